"""Acceptance suite: one test and one printed PASS/FAIL line per criterion."""

import hashlib
import itertools
import time

import numpy as np
import pytest

from maxmix.cli import cmd_select, cmd_simulate, main
from maxmix.empirical import bin_madogram, empirical_fmadogram
from maxmix.madogram import madogram_curve, madogram_ims, madogram_mm, madogram_mm_oracle, madogram_ms
from maxmix.models import (TEG, BrownResnick, ModelSpec, Smith, bivariate_cdf_mm, mm_cdf_partials)
from maxmix.registry import MODELS, get_model
from maxmix.simulate import Seed, sample_sites, simulate_max_mixture
from maxmix.study import StudyConfig, run_study

from . import oracles

PSI0 = {"a": 0.5, "theta_x": 0.2, "r_x": 0.25, "sigma_y": 0.6}
A_GRID = np.round(np.linspace(0, 1, 11), 10)
THETA_GRID = np.round(np.linspace(1, 2, 11), 10)
ETA_GRID = np.round(np.linspace(0.1, 1, 10), 10)

pytestmark = pytest.mark.acceptance


def test_criterion_1_closed_form_vs_oracle(criterion):
    with criterion(1, "madogram closed form vs quadrature oracle") as c:
        t0 = time.perf_counter()
        worst = max(abs(madogram_mm(a, t, e) - madogram_mm_oracle(a, t, e))
                    for a, t, e in itertools.product(A_GRID, THETA_GRID, ETA_GRID))
        elapsed = time.perf_counter() - t0
        c.check(worst <= 1e-8, f"max |diff| {worst:.2e} over 1210 points (tol 1e-8)")
        c.check(elapsed < 10, f"runtime {elapsed:.1f}s (< 10s)")


def test_criterion_2_endpoint_reductions(criterion):
    with criterion(2, "endpoint reductions a=0 and a=1") as c:
        worst = 0.0
        for t, e in itertools.product((1.0, 1.5, 2.0), (0.3, 0.5, 1.0)):
            worst = max(worst, abs(madogram_mm(0.0, t, e) - madogram_ims(e)),
                        abs(madogram_mm(1.0, t, e) - madogram_ms(t)))
        c.check(worst <= 1e-12, f"max |diff| {worst:.1e} (tol 1e-12)")


_GATE_MODELS = {
    "smith": ModelSpec(1.0, Smith(0.6)),
    "brown-resnick": ModelSpec(1.0, BrownResnick(1.5, 0.4)),
    "teg": ModelSpec(1.0, TEG(0.2, 0.25)),
    "MM1": ModelSpec(0.5, TEG(0.2, 0.25), Smith(0.6)),
}


def test_criterion_3_simulator_pairwise_law(criterion):
    with criterion(3, "simulator pairwise-law gate, n_rep=1e5") as c:
        n = 100_000
        sites = sample_sites(8, seed=Seed(2024).child("sites"))
        rng = Seed(2024).child("pairs").rng()
        all_pairs = list(itertools.combinations(range(len(sites)), 2))
        pairs = [all_pairs[k] for k in rng.choice(len(all_pairs), 5, replace=False)]
        for name, spec in _GATE_MODELS.items():
            t0 = time.perf_counter()
            z = simulate_max_mixture(spec, sites, n, Seed(2024).child(name)).data
            worst = 0.0
            for i, j in pairs:
                h = float(np.hypot(*(sites.coords[i] - sites.coords[j])))
                for t in (0.5, 2.0, 10.0):
                    p = float(bivariate_cdf_mm(spec, h, t, t))
                    emp = np.mean((z[:, i] <= t) & (z[:, j] <= t))
                    worst = max(worst, abs(emp - p) / np.sqrt(p * (1 - p) / n))
            elapsed = time.perf_counter() - t0
            c.check(worst <= 3 and elapsed < 120,
                    f"{name} max {worst:.2f} SE in {elapsed:.0f}s")


def test_criterion_4_madogram_curve(criterion):
    with criterion(4, "MM1 binned madogram curve vs closed form, two sills") as c:
        t0 = time.perf_counter()
        spec = get_model("MM1").build(PSI0)
        sites = sample_sites(50, seed=Seed(4).child("sites"))
        cloud = empirical_fmadogram(simulate_max_mixture(spec, sites, 1000, Seed(4).child("data")),
                                    keep_terms=False)
        b = bin_madogram(cloud)
        # theoretical values averaged over the same pairs as each bin
        theory_cloud = type(cloud)(cloud.i, cloud.j, cloud.h, cloud.angle,
                                   np.asarray(madogram_curve(spec, cloud.h)), cloud.y_sq_bar,
                                   cloud.n_rep)
        theory = bin_madogram(theory_cloud, b.edges).nu_hat
        dev = float(np.max(np.abs(b.nu_hat - theory)))
        c.check(dev <= 0.015, f"max bin deviation {dev:.4f} (tol 0.015)")
        # two sills: steep rise up to h = 2 r_X, then a slow climb towards 1/6
        near = (b.centers > 0.05) & (b.centers < 0.45)
        far = (b.centers > 0.6) & (b.centers < 1.3)
        s_near = np.polyfit(b.centers[near], b.nu_hat[near], 1)[0]
        s_far = np.polyfit(b.centers[far], b.nu_hat[far], 1)[0]
        two_sill = s_near > 2 * s_far > 0 and b.nu_hat.max() < 1 / 6
        c.check(two_sill, f"slopes {s_near:.3f} before / {s_far:.3f} after 2r, "
                          f"max {b.nu_hat.max():.3f} < 1/6")
        elapsed = time.perf_counter() - t0
        c.check(elapsed < 300, f"runtime {elapsed:.0f}s (< 300s)")


# Parameters that the madogram identifies at each a: with a=0 the TEG part is absent and
# with a=1 the inverted part is absent, so their parameters do not enter the likelihood.
_IDENTIFIABLE = {0.0: ("sigma_y",), 0.5: ("theta_x", "r_x", "sigma_y"), 1.0: ("theta_x", "r_x")}


def test_criterion_5_ls_recovery(criterion):
    with criterion(5, "LS recovery, 30 sites, N=500, J=20") as c:
        t0 = time.perf_counter()
        res = run_study(StudyConfig(a_grid=(0.0, 0.5, 1.0), estimators=("ls",), seed=0))
        elapsed = time.perf_counter() - t0
        for a in (0.0, 0.5, 1.0):
            med_a = float(np.median(np.abs(res.values(a, "ls", "a") - a)))
            c.check(med_a <= 0.10, f"a={a}: median|a err| {med_a:.3f}")
            for p in _IDENTIFIABLE[a]:
                rel = float(np.median(np.abs(res.values(a, "ls", p) / PSI0[p] - 1)))
                c.check(rel <= 0.30, f"{p} {rel:.0%}")
            for p in sorted(set(PSI0) - set(_IDENTIFIABLE[a]) - {"a"}):
                rel = float(np.median(np.abs(res.values(a, "ls", p) / PSI0[p] - 1)))
                c.note(f"{p} {rel:.0%} (no influence at this a, not gated)")
        c.check(elapsed < 1800, f"runtime {elapsed:.0f}s (< 1800s)")


def test_criterion_6_estimator_ordering(criterion):
    with criterion(6, "LS better at a=0, CL better at a=1 (3 study seeds)") as c:
        wins0 = wins1 = 0
        parts = []
        for seed in (0, 1, 2):
            res = run_study(StudyConfig(a_grid=(0.0, 1.0), seed=seed, cl_n_starts=4))
            table = {(a, est): r for a, est, p, n, b, r in res.rmse_table() if p == "a"}
            wins0 += table[0.0, "ls"] < table[0.0, "cl"]
            wins1 += table[1.0, "cl"] < table[1.0, "ls"]
            parts.append(f"seed {seed}: a=0 ls {table[0.0, 'ls']:.3f}/cl {table[0.0, 'cl']:.3f}, "
                         f"a=1 ls {table[1.0, 'ls']:.3f}/cl {table[1.0, 'cl']:.3f}")
        c.check(wins0 >= 2, f"a=0 LS wins {wins0}/3")
        c.check(wins1 >= 2, f"a=1 CL wins {wins1}/3 ({'; '.join(parts)})")


_RANGES = {"a": (0.05, 0.95), "theta_x": (0.05, 1.0), "theta_y": (0.05, 1.0), "r_x": (0.1, 0.6),
           "sigma_x": (0.05, 1.0), "sigma_y": (0.05, 1.0), "sigma2_x": (0.3, 3.0),
           "sigma2_y": (0.3, 3.0)}


def _oracle_V(family, h):
    if family is None:
        return None
    if isinstance(family, Smith):
        return lambda x1, x2: oracles.V_smith(h, x1, x2, family.sigma)
    if isinstance(family, BrownResnick):
        return lambda x1, x2: oracles.V_br(h, x1, x2, family.sigma2, family.theta)
    return lambda x1, x2: oracles.V_teg(h, x1, x2, family.theta, family.r)


def test_criterion_7_density_vs_finite_differences(criterion):
    with criterion(7, "d2G/dz1dz2 vs central finite differences") as c:
        t0 = time.perf_counter()
        rng = np.random.default_rng(7)
        for name, model in MODELS.items():
            worst = 0.0
            for _ in range(20):
                spec = model.build({p: rng.uniform(*_RANGES[p]) for p in model.params})
                h = rng.uniform(0.02, 1.2)
                z1, z2 = np.exp(rng.uniform(np.log(0.3), np.log(20.0), 2))
                got = mm_cdf_partials(spec, h, z1, z2)[3]
                want = oracles.cdf_mm_d12(spec.a, _oracle_V(spec.x_family, h),
                                          _oracle_V(spec.y_family, h), z1, z2)
                worst = max(worst, float(abs(got - want) / abs(want)))
            c.check(worst <= 1e-4, f"{name} {worst:.1e}")
        elapsed = time.perf_counter() - t0
        c.check(elapsed < 30, f"runtime {elapsed:.1f}s (< 30s)")


def test_criterion_8_model_selection(criterion, tmp_path):
    with criterion(8, "select ranks MM1 first on MM1 data (10 trials)") as c:
        first = {"ls": 0, "cl": 0}
        for trial in range(10):
            d = tmp_path / f"trial{trial}"
            cmd_simulate({"model": "MM1", "params": PSI0, "n_sites": 30, "n_rep": 500,
                          "seed": 100 + trial, "out": str(d / "sample")})
            tables = cmd_select({"sample": str(d / "sample"), "models": "MM1,M1,M3",
                                 "estimator": "both", "n_starts": 4, "seed": trial,
                                 "out": str(d)})
            for est, rows in tables.items():
                first[est] += rows[0][1] == "MM1" and rows[0][0] == 1
        c.check(first["ls"] >= 6, f"MIC {first['ls']}/10")
        c.check(first["cl"] >= 6, f"CLIC {first['cl']}/10")


def _tree_digest(root):
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def _pipeline(root, workers):
    sim = ["simulate", "--n-sites", "10", "--n-rep", "200", "--seed", "5",
           "--out", str(root / "sample")]
    codes = [main(sim)]
    codes.append(main(["madogram", "--sample", str(root / "sample"), "--sectors",
                       "--out", str(root / "curve.csv")]))
    for est in ("ls", "cl"):
        codes.append(main(["fit", "--sample", str(root / "sample"), "--model", "M1",
                           "--estimator", est, "--n-starts", "2", "--out",
                           str(root / f"fit_{est}.json")]))
    codes.append(main(["select", "--sample", str(root / "sample"), "--models", "M1,M4",
                       "--estimator", "both", "--n-starts", "1", "--out", str(root / "select")]))
    codes.append(main(["study", "--a-grid", "0,1", "--n-sites", "8", "--n-rep", "150", "--J", "2",
                       "--n-starts", "1", "--seed", "1", "--workers", str(workers),
                       "--out", str(root / "study")]))
    return codes


def test_criterion_9_determinism(criterion, tmp_path):
    with criterion(9, "byte-identical outputs across runs and worker counts") as c:
        digests = []
        for run, workers in enumerate((1, 1, 2)):
            root = tmp_path / f"run{run}"
            codes = _pipeline(root, workers)
            c.check(all(code == 0 for code in codes), f"run {run} exit codes {codes}")
            digests.append(_tree_digest(root))
        same = digests[0] == digests[1] == digests[2]
        c.check(same and len(digests[0]) > 10, f"{len(digests[0])} files identical in 3 runs "
                                              "(workers 1, 1, 2)")
