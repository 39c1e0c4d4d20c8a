import hashlib

import numpy as np
import pytest

from maxmix import io as mio
from maxmix import study as study_mod
from maxmix.cli import main
from maxmix.exceptions import UsageError
from maxmix.fit import rmse
from maxmix.study import StudyConfig, run_study, write_study

SMALL = dict(a_grid=(0.0, 1.0), n_sites=8, n_rep=120, J=2, n_starts=1, seed=3)


class TestConfig:
    def test_defaults_are_desk_scale(self):
        cfg = StudyConfig()
        assert (cfg.n_sites, cfg.n_rep, cfg.J) == (30, 500, 20)
        assert cfg.a_grid == (0.0, 0.25, 0.5, 0.75, 1.0)

    @pytest.mark.parametrize("bad", [dict(J=0), dict(n_rep=1), dict(a_grid=(1.5,)),
                                     dict(estimators=("mle",)), dict(n_sites=1)])
    def test_invalid(self, bad):
        with pytest.raises(UsageError):
            StudyConfig(**bad)

    def test_unknown_key(self):
        with pytest.raises(UsageError):
            StudyConfig.from_dict({"n_reps": 3})

    def test_model_without_mixing(self):
        cfg = StudyConfig(model="M4", psi0={"sigma_x": 0.5}, a_grid=(0.3, 0.7))
        assert cfg.a_grid == (1.0,) and cfg.truth(1.0) == {"sigma_x": 0.5}


def test_smoke_tables_and_rmse_consistency(tmp_path):
    cfg = StudyConfig(**dict(SMALL, J=1))
    res = run_study(cfg)
    write_study(res, tmp_path, "f" * 16)
    for name in ("estimates.csv", "errors.csv", "rmse.csv", "density.csv", "failures.csv",
                 "report.json"):
        assert (tmp_path / name).exists()
    rows = mio.read_table(tmp_path / "estimates.csv", required=mio.ESTIMATE_COLUMNS)
    table = {(float(r["a_true"]), r["estimator"], r["param"]): float(r["rmse"])
             for r in mio.read_table(tmp_path / "rmse.csv")}
    for (a, est, p), value in table.items():
        vals = [float(r["value"]) for r in rows
                if float(r["a_true"]) == a and r["estimator"] == est and r["param"] == p]
        assert value == float(rmse(np.array(vals)[:, None], [cfg.truth(a)[p]]).rmse[0])


def test_ls_only_never_touches_cl(monkeypatch):
    def boom(*args, **kwargs):
        raise AssertionError("CL path used")

    monkeypatch.setattr(study_mod, "fit_cl", boom)
    res = run_study(StudyConfig(**dict(SMALL, estimators=("ls",), J=1)))
    assert {r[2] for r in res.estimates} == {"ls"} and not res.failures


def test_failures_are_recorded_and_study_continues(monkeypatch):
    from maxmix.exceptions import NumericError

    def flaky(*args, **kwargs):
        raise NumericError("synthetic failure")

    monkeypatch.setattr(study_mod, "fit_cl", flaky)
    res = run_study(StudyConfig(**dict(SMALL, J=1)))
    assert len(res.failures) == 2 and all(f[3] == "NumericError" for f in res.failures)
    assert {r[2] for r in res.estimates} == {"ls"}


def test_density_table_integrates_to_one():
    res = run_study(StudyConfig(**dict(SMALL, estimators=("ls",), J=3, density_bins=5)))
    for a in SMALL["a_grid"]:
        for p in res.config.truth(a):
            dens = [r for r in res.density_table() if r[0] == a and r[2] == p]
            area = sum((hi - lo) * d for _, _, _, lo, hi, d in dens)
            assert area == pytest.approx(1.0)


def test_worker_count_does_not_change_outputs(tmp_path):
    args = ["study", "--a-grid", "0,1", "--n-sites", "8", "--n-rep", "120", "--J", "2",
            "--n-starts", "1", "--estimators", "ls", "--seed", "3"]
    assert main(args + ["--workers", "1", "--out", str(tmp_path / "w1")]) == 0
    assert main(args + ["--workers", "2", "--out", str(tmp_path / "w2")]) == 0
    for f in sorted((tmp_path / "w1").iterdir()):
        a = hashlib.sha256(f.read_bytes()).hexdigest()
        b = hashlib.sha256((tmp_path / "w2" / f.name).read_bytes()).hexdigest()
        assert a == b, f.name
