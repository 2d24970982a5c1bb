import numpy as np
import pytest

from fuzz import random_consistent, random_tree_instance
from oracles import dense_enumerate
from treeqp.baselines import (
    brute_force_solve,
    direct_dp_path,
    grid_conjugate,
    parametric_oracle,
    window_cost,
)
from treeqp.errors import ShapeError
from treeqp.gen import random_path
from treeqp.pwq import IndicatorCost, PiecewiseQuadratic, QuadraticPiece, breakpoint_conjugate
from treeqp.solver import solve_path
from treeqp.tree import TreeInstance, topological_order


class TestBruteForce:
    def test_single(self):
        sol = brute_force_solve(TreeInstance(1, [1.0], [], [-2.0], [1.0]))
        assert sol.objective == pytest.approx(-1.0)
        np.testing.assert_allclose(sol.x, [2.0])

    def test_large_lambda(self):
        sol = brute_force_solve(TreeInstance(2, [1.0, 1.0], [(0, 1, -0.5)], [-1.0, -1.0], [10.0, 10.0]))
        assert sol.objective == 0.0
        np.testing.assert_array_equal(sol.z, [0, 0])

    def test_dense_oracle(self, rng):
        for _ in range(30):
            inst = random_tree_instance(rng, int(rng.integers(1, 9)), mixed_lambda=True)
            ref = brute_force_solve(inst)
            lam = np.maximum(inst.lam, 0.0)
            value, _, _ = dense_enumerate(inst.dense_q(), inst.c, lam)
            value += float(np.minimum(inst.lam, 0.0).sum())
            assert ref.objective == pytest.approx(value, abs=1e-9)

    def test_too_large(self, rng):
        with pytest.raises(ValueError):
            brute_force_solve(random_tree_instance(rng, 26))


class TestDirectDP:
    def test_single_window(self):
        inst = TreeInstance(1, [1.0], [], [2.0], [1.0])
        assert window_cost(inst, 0, 0) == pytest.approx(-1.0)

    def test_empty_window(self):
        inst = random_path(5, 3)
        assert window_cost(inst, 3, 2) == 0.0

    def test_window_dense(self, rng):
        inst = random_path(8, 11)
        Q, c = inst.dense_q(), inst.c
        for k in range(8):
            for l in range(k, 8):
                J = list(range(k, l + 1))
                want = -0.5 * c[J] @ np.linalg.solve(Q[np.ix_(J, J)], c[J]) + inst.lam[J].sum()
                assert window_cost(inst, k, l) == pytest.approx(want, abs=1e-9)

    def test_matches_solve_path(self, rng):
        inst = random_path(200, 5)
        a = direct_dp_path(inst)
        b = solve_path(inst)
        assert a.objective == pytest.approx(b.objective, abs=1e-7)
        assert inst.objective(a.x, a.z) == pytest.approx(a.objective, abs=1e-7)

    def test_mixed_lambda(self, rng):
        for seed in range(20):
            inst = random_path(30, seed)
            inst.lam = rng.uniform(-3.0, 8.0, 30)
            assert direct_dp_path(inst).objective == pytest.approx(solve_path(inst).objective, abs=1e-7)

    def test_rejects_tree(self):
        inst = TreeInstance(4, [2.0] * 4, [(0, 3, -0.5), (1, 3, -0.5), (2, 3, -0.5)], [0.0] * 4, [1.0] * 4)
        with pytest.raises(ShapeError):
            direct_dp_path(inst)


class TestGridConjugate:
    def test_plateau(self):
        f = IndicatorCost(PiecewiseQuadratic.single(QuadraticPiece(0.5, 0.0, 0.0)), 0.5, True)
        g = grid_conjugate(f, 10.0, 1e-3)
        beta = np.linspace(-1, 1, 41)
        np.testing.assert_allclose(g(beta), 0.0, atol=2e-3)

    def test_square(self):
        step = 1e-3
        f = IndicatorCost(PiecewiseQuadratic.single(QuadraticPiece(0.5, 0.0, 0.0)), 0.0, False)
        g = grid_conjugate(f, 10.0, step, exact=False)
        beta = np.linspace(-5, 5, 51)
        err = np.abs(g(beta) - 0.5 * beta ** 2)
        assert np.all(err <= step * np.abs(beta) + step ** 2 / 2 + 1e-12)

    def test_breakpoint_agreement(self, rng):
        for _ in range(20):
            f = IndicatorCost(random_consistent(rng), float(rng.uniform(0.01, 5.0)), True)
            h = breakpoint_conjugate(f)
            g = grid_conjugate(f, 40.0, 1e-4)
            beta = rng.uniform(-5, 5, 30)
            np.testing.assert_allclose(g(beta), h(beta), atol=1e-4)


class TestParametricOracle:
    def test_leaf(self, rng):
        inst = random_tree_instance(rng, 6)
        order = topological_order(inst)
        leaf = next(u for u in range(inst.n) if not order.parents[u])
        a = np.array([-2.0, 0.0, 1.5])
        want = 0.5 * inst.diag[leaf] * a ** 2 + inst.c[leaf] * a + inst.lam[leaf] * (a != 0)
        np.testing.assert_allclose(parametric_oracle(inst, order, leaf, a), want, atol=1e-12)

    def test_zeroed_parent_piece(self):
        # with a huge parent penalty the parent stays at zero
        inst = TreeInstance(2, [1.0, 1.0], [(0, 1, -0.5)], [1.0, -1.0], [1e6, 0.5])
        order = topological_order(inst)
        a = np.array([-1.0, 0.7, 3.0])
        want = 0.5 * a ** 2 - a + 0.5
        np.testing.assert_allclose(parametric_oracle(inst, order, 1, a), want, atol=1e-12)
