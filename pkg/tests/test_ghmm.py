import copy

import numpy as np
import pytest

from treeqp.baselines import brute_force_solve
from treeqp.errors import InstanceError
from treeqp.ghmm import (
    GhmmParams,
    build_instance,
    model_objective,
    online_init,
    online_run,
    online_step,
    read_observations,
    solve_batch,
    windows,
)
from treeqp.solver import solve_path
from treeqp.tree import TreeInstance


def stream(rng, n, outliers=0.05):
    t = np.arange(n)
    y = 3.0 * np.sin(t / 40.0) * (np.sin(t / 300.0) > -0.3) + rng.normal(0, 0.5, n)
    hit = rng.random(n) < outliers
    y[hit] += rng.choice([-1, 1], hit.sum()) * rng.uniform(8, 20, hit.sum())
    return y


class TestBuildInstance:
    def test_single_observation(self):
        inst, mp = build_instance([1.0], GhmmParams(sigma2=1.0, nu2=1.0, K=1))
        assert inst.n == 2
        np.testing.assert_allclose(inst.diag, [2.0, 4.0])
        assert inst.edges == [(0, 1, 2.0)]
        np.testing.assert_allclose(inst.c, [-2.0, -2.0])
        assert mp.constant == 1.0
        assert mp.x_ids == [1] and mp.w_ids == [[0]]

    def test_shape(self, rng):
        y = rng.normal(size=47)
        inst, mp = build_instance(y, GhmmParams(K=10))
        T = 5
        assert inst.n == T + 47 and len(inst.edges) == inst.n - 1
        assert [len(w) for w in mp.w_ids] == [10, 10, 10, 10, 7]
        deg = np.zeros(inst.n, dtype=int)
        for u, v, _ in inst.edges:
            deg[u] += 1
            deg[v] += 1
        assert all(deg[w] == 1 for ids in mp.w_ids for w in ids)
        assert mp.x_ids[-1] == inst.n - 1

    def test_consistency_with_model(self, rng):
        p = GhmmParams(sigma2=1.5, nu2=0.7, lambda_w=3.0, gamma_x=2.0, K=3, sigma2_initial=4.0)
        y = rng.normal(size=8)
        inst, mp = build_instance(y, p)
        for _ in range(10):
            x = rng.normal(size=inst.n) * (rng.random(inst.n) < 0.6)
            z = (x != 0).astype(int)
            xs = x[mp.x_ids]
            w = [x[ids] for ids in mp.w_ids]
            assert inst.objective(x, z) + mp.constant == pytest.approx(model_objective(y, p, xs, w), abs=1e-9)

    def test_empty(self):
        with pytest.raises(InstanceError):
            build_instance([], GhmmParams())

    def test_bad_params(self):
        with pytest.raises(ValueError):
            GhmmParams(sigma2=0.0)
        with pytest.raises(ValueError):
            GhmmParams(K=0)


class TestSolveBatch:
    def test_all_zero(self):
        sol = solve_batch(np.zeros(30), GhmmParams())
        np.testing.assert_array_equal(sol.x, 0.0)
        assert sol.outliers == [] and not sol.s.any()
        assert sol.objective_miqp == 0.0 and sol.objective_model == 0.0

    def test_no_outliers_matches_chain(self, rng):
        p = GhmmParams(lambda_w=1e9, gamma_x=0.5, K=4)
        y = rng.normal(size=8)
        sol = solve_batch(y, p)
        assert sol.outliers == []
        ws = windows(y, 4)
        diag = [2 * 4 / p.nu2 + 2 / p.sigma2 + 2 / p.sigma2, 2 * 4 / p.nu2 + 2 / p.sigma2]
        chain = TreeInstance(2, diag, [(0, 1, -2 / p.sigma2)], [-2 * w.sum() / p.nu2 for w in ws], [0.5, 0.5])
        ref = solve_path(chain)
        assert sol.objective_miqp == pytest.approx(ref.objective, abs=1e-7)

    def test_outlier_mechanism(self, rng):
        y = rng.normal(0, 0.3, 60)
        y[17] = 40.0
        sol = solve_batch(y, GhmmParams(lambda_w=5.0, gamma_x=1.0, K=6))
        assert (2, 5) in sol.outliers
        for t, k in sol.outliers:
            assert sol.w[t][k] == pytest.approx(y[6 * t + k] - sol.x[t], abs=1e-6)

    def test_brute_force(self, rng):
        for _ in range(5):
            p = GhmmParams(sigma2=1.0, nu2=0.5, lambda_w=float(rng.uniform(0.5, 4)),
                           gamma_x=float(rng.uniform(0.5, 4)), K=3)
            y = rng.normal(0, 2, 9)
            inst, _ = build_instance(y, p)
            assert inst.n == 12
            assert solve_batch(y, p).objective_miqp == pytest.approx(brute_force_solve(inst).objective,
                                                                     abs=1e-6)

    def test_lambda_monotone(self, rng):
        y = stream(rng, 400, outliers=0.1)
        counts = [len(solve_batch(y, GhmmParams(lambda_w=lw)).outliers) for lw in (1, 5, 20, 100, 500)]
        assert counts == sorted(counts, reverse=True)

    def test_save(self, tmp_path):
        solve_batch([0.0, 1.0, 2.0], GhmmParams(K=2)).save(tmp_path / "g.json")
        import json
        data = json.loads((tmp_path / "g.json").read_text())
        assert set(data) == {"x", "outliers", "s", "objective_miqp", "objective_model"}


class TestOnline:
    def test_first_step_zero(self):
        st = online_init(GhmmParams())
        xs, obj = online_step(st, np.zeros(10))
        np.testing.assert_array_equal(xs, [0.0])
        assert obj == 0.0

    @pytest.mark.parametrize("S", [1, 5])
    def test_matches_batch(self, rng, S, backend):
        p = GhmmParams(lambda_w=10.0, gamma_x=20.0, K=5)
        y = stream(rng, 200)
        ws = windows(y, p.K)
        for T, (xs, obj) in enumerate(online_run(y, p, S=S), start=1):
            ref = solve_batch(ws[:T], p)
            assert obj == pytest.approx(ref.objective_miqp, abs=1e-6)
            np.testing.assert_allclose(xs, ref.x[-len(xs):], atol=1e-6)
            assert len(xs) == min(S, T)

    def test_initial_variance(self, rng):
        p = GhmmParams(lambda_w=3.0, gamma_x=1.0, K=3, sigma2_initial=0.3)
        y = stream(rng, 30)
        *_, (xs, obj) = online_run(y, p, S=3)
        ref = solve_batch(y, p)
        assert obj == pytest.approx(ref.objective_miqp, abs=1e-6)

    def test_idempotent(self, rng):
        p = GhmmParams(K=4)
        st = online_init(p, history=5)
        for w in windows(stream(rng, 40), 4):
            online_step(st, w, 5)
        w = rng.normal(size=4)
        before = copy.deepcopy(st)
        a = online_step(st, w, 5)
        b = online_step(before, w, 5)
        np.testing.assert_array_equal(a[0], b[0])
        assert a[1] == b[1]

    def test_empty_window(self):
        with pytest.raises(InstanceError):
            online_step(online_init(GhmmParams()), [])


class TestReadObservations:
    def test_header_auto(self, tmp_path):
        f = tmp_path / "o.csv"
        f.write_text("value\n1.5\n-2\n\n3\n")
        np.testing.assert_array_equal(read_observations(f), [1.5, -2.0, 3.0])

    def test_no_header(self, tmp_path):
        f = tmp_path / "o.csv"
        f.write_text("1\n2\n")
        np.testing.assert_array_equal(read_observations(f), [1.0, 2.0])
        np.testing.assert_array_equal(read_observations(f, header=True), [2.0])

    def test_empty(self, tmp_path):
        f = tmp_path / "o.csv"
        f.write_text("value\n")
        with pytest.raises(InstanceError, match="empty"):
            read_observations(f)

    def test_bad_value(self, tmp_path):
        f = tmp_path / "o.csv"
        f.write_text("1\nabc\n")
        with pytest.raises(InstanceError, match="line 2"):
            read_observations(f)
