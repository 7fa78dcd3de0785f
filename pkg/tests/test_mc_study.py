import csv
import io

import numpy as np
import pytest

from pmqld.core import new_params
from pmqld.errors import ParameterError, StudyError
from pmqld.estimation import fit_mle
from pmqld.mc_study import StudyConfig, run_study
from pmqld.sampling import RandomSource, sample
from pmqld.table import FrequencyTable

TRUTH = new_params(0.3, 0.5, 2.5)


@pytest.fixture(scope="module")
def small_study():
    return run_study(StudyConfig(TRUTH, (60, 100), replications=6, seed=11))


class TestConfig:
    @pytest.mark.parametrize("reps", [0, -1, 2.5])
    def test_replications(self, reps):
        with pytest.raises(ParameterError):
            StudyConfig(TRUTH, replications=reps)

    @pytest.mark.parametrize("sizes", [(), (5, 100), (60, 9)])
    def test_sizes(self, sizes):
        with pytest.raises(ParameterError):
            StudyConfig(TRUTH, sizes)

    def test_seed(self):
        with pytest.raises(ParameterError):
            StudyConfig(TRUTH, seed=-1)

    def test_defaults(self):
        cfg = StudyConfig(TRUTH)
        assert cfg.sample_sizes == (60, 100, 200, 300)
        assert cfg.replications == 1000


class TestRun:
    def test_deterministic(self, small_study):
        again = run_study(StudyConfig(TRUTH, (60, 100), replications=6, seed=11))
        assert again.to_csv() == small_study.to_csv()

    def test_seed_changes_result(self, small_study):
        other = run_study(StudyConfig(TRUTH, (60, 100), replications=6, seed=12))
        assert other.to_csv() != small_study.to_csv()

    def test_layout(self, small_study):
        assert [(r.n, r.param) for r in small_study.rows] == [
            (n, p) for n in (60, 100) for p in ("theta", "alpha", "delta")
        ]

    def test_bias_below_mse(self, small_study):
        for r in small_study.rows:
            assert r.bias == pytest.approx(r.avg - getattr(TRUTH, r.param), abs=1e-12)
            assert r.bias**2 <= r.mse * (1 + 1e-12)

    def test_single_replicate(self):
        table = run_study(StudyConfig(TRUTH, (80,), replications=1, seed=3))
        draws = sample(TRUTH, 80, RandomSource(3).child(80, 0), "alg2")
        est = fit_mle(FrequencyTable.from_observations(draws)).estimates
        truth = np.array(TRUTH.as_tuple())
        for j, name in enumerate(("theta", "alpha", "delta")):
            r = table.row(80, name)
            assert r.avg == pytest.approx(est[j], rel=1e-12)
            assert r.bias == pytest.approx(est[j] - truth[j], abs=1e-12)
            assert r.mse == pytest.approx((est[j] - truth[j]) ** 2, rel=1e-12)

    def test_replicates_independent_of_size_list(self):
        # each (n, replicate) has its own stream, so adding sizes leaves rows unchanged
        a = run_study(StudyConfig(TRUTH, (60,), replications=3, seed=5))
        b = run_study(StudyConfig(TRUTH, (60, 70), replications=3, seed=5))
        assert a.row(60, "theta") == b.row(60, "theta")

    def test_progress(self):
        calls = []
        run_study(StudyConfig(TRUTH, (60,), replications=2, seed=1), progress=lambda n, r: calls.append((n, r)))
        assert calls == [(60, 0), (60, 1)]

    def test_missing_row(self, small_study):
        with pytest.raises(KeyError):
            small_study.row(300, "theta")


class TestOutput:
    def test_csv(self, small_study):
        rows = list(csv.DictReader(io.StringIO(small_study.to_csv())))
        assert list(rows[0]) == ["n", "param", "avg", "bias", "mse", "failures"]
        assert len(rows) == 6
        first = small_study.rows[0]
        assert float(rows[0]["mse"]) == first.mse
        assert int(rows[0]["failures"]) == first.failures

    def test_dicts(self, small_study):
        d = small_study.as_dicts()
        assert d[0]["param"] == "theta" and set(d[0]) == {"n", "param", "avg", "bias", "mse", "failures"}


class TestFailures:
    def test_too_many_failures(self, monkeypatch):
        import pmqld.mc_study as mc

        monkeypatch.setattr(mc, "_one_replicate", lambda config, n, rep: None if rep % 2 else np.zeros(3))
        with pytest.raises(StudyError, match="3 of 6"):
            run_study(StudyConfig(TRUTH, (60,), replications=6))

    def test_failures_counted(self, monkeypatch):
        import pmqld.mc_study as mc

        truth = np.array(TRUTH.as_tuple())
        monkeypatch.setattr(mc, "_one_replicate", lambda config, n, rep: None if rep == 0 else truth)
        table = run_study(StudyConfig(TRUTH, (60,), replications=5))
        assert table.row(60, "delta").failures == 1
        assert table.row(60, "delta").mse == 0.0
