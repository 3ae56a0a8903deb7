import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pr4pc.core import ContractViolation, ParamSpace, Problem, eval_regularized, is_feasible
from pr4pc.instances import BUNDLED, make_instance
from pr4pc.solvers import (
    BudgetExceeded,
    DescentConfig,
    GridSpec,
    analytic_grad,
    finite_diff_grad,
    grid_table,
    select_best,
    solve_pc_grid,
    solve_pr_descent,
    solve_pr_grid,
)


class TestGridPR:
    def test_plateau_above_one(self, plateau):
        res = solve_pr_grid(plateau, [2.0], GridSpec(2001))
        assert res.w.tolist() == [1.0]
        assert res.reg_objective == 1.0
        assert res.provenance == "grid_global"

    def test_tie_prefers_low_violation(self, tie):
        res = solve_pr_grid(tie, [1.0])
        assert res.label == "b"
        assert res.provenance == "finite_enumeration"

    def test_tie_flag_flips_preference(self, tie, plateau):
        assert solve_pr_grid(tie, [1.0], GridSpec(prefer="high_violation")).label == "a"
        assert solve_pr_grid(plateau, [1.0], GridSpec(2001, prefer="high_violation")).w[0] == 0.0

    def test_zero_multiplier_minimizes_loss(self, bundled):
        table = grid_table(bundled)
        res = solve_pr_grid(bundled, np.zeros(bundled.m))
        assert res.loss == table.loss.min()

    def test_reg_objective_consistent(self, bundled):
        lam = np.full(bundled.m, 0.7)
        res = solve_pr_grid(bundled, lam)
        assert res.reg_objective == pytest.approx(res.loss + lam @ res.violation, rel=1e-12, abs=1e-300)

    def test_budget(self, regression):
        with pytest.raises(BudgetExceeded) as info:
            solve_pr_grid(regression, [1.0], GridSpec(2000, budget=1_000_000))
        assert info.value.required == 4_000_000

    def test_grid_shape_errors(self, regression):
        with pytest.raises(ContractViolation):
            solve_pr_grid(regression, [1.0], GridSpec((11, 11, 11)))
        with pytest.raises(ContractViolation):
            solve_pr_grid(regression, [1.0], GridSpec(1))


class TestGridPC:
    def test_plateau(self, plateau):
        res = solve_pc_grid(plateau, [0.4], GridSpec(2001))
        assert res.w[0] == pytest.approx(0.6, abs=1e-12)
        assert res.loss == pytest.approx(0.6, abs=1e-12)

    def test_log_unbounded(self):
        p = make_instance("log_unbounded", w_max=5.0)
        res = solve_pc_grid(p, [1.0], GridSpec(50001))
        assert res.w[0] == pytest.approx(math.e - 1, abs=1e-4)

    def test_infeasible_is_an_outcome(self):
        # plateau restricted to [0, 0.9]: C >= 0.1 everywhere
        cut = Problem(
            name="plateau_cut",
            dim=1,
            space=ParamSpace.box([0.0], [0.9]),
            num_constraints=1,
            loss=lambda W: W[:, 0].copy(),
            violation=lambda W: np.maximum(0.0, 1.0 - W[:, :1]),
        )
        res = solve_pc_grid(cut, [0.0])
        assert res.status == "infeasible"
        assert not res.feasible
        assert res.w is None


def _grid_points(problem):
    return grid_table(problem).points


@settings(max_examples=40, deadline=None)
@given(which=st.sampled_from(BUNDLED), log_lam=st.floats(-3, 3))
def test_oracle_dominance(which, log_lam):
    problem = make_instance(which)
    lam = [10.0**log_lam]
    res = solve_pr_grid(problem, lam)
    table = grid_table(problem)
    values = table.loss + table.violation[:, 0] * lam[0]
    assert np.all(values >= res.reg_objective - 4 * np.finfo(float).eps * max(1.0, abs(res.reg_objective)))


@settings(max_examples=40, deadline=None)
@given(which=st.sampled_from(BUNDLED), theta=st.floats(0, 20))
def test_pc_feasibility_soundness(which, theta):
    problem = make_instance(which)
    res = solve_pc_grid(problem, [theta])
    table = grid_table(problem)
    feas = table.violation[:, 0] <= theta
    if not feas.any():
        assert res.status == "infeasible"
        return
    assert is_feasible(problem, res.w, [theta])
    assert res.loss <= table.loss[feas].min()


@settings(max_examples=100, deadline=None)
@given(
    values=st.lists(st.sampled_from([0.0, 1.0, 2.0]), min_size=2, max_size=12),
    seed=st.integers(0, 1000),
)
def test_tie_break_order_independent(values, seed):
    n = len(values)
    v = np.array(values)
    C = np.arange(n, dtype=float)[::-1, None] % 3
    W = np.arange(n, dtype=float)[:, None]
    perm = np.random.default_rng(seed).permutation(n)
    a = select_best(v, C, W)
    b = perm[select_best(v[perm], C[perm], W[perm])]
    assert a == b


class TestDescent:
    def test_vanishing_gradient(self, vanishing):
        res = solve_pr_descent(vanishing, [math.e**2], DescentConfig(restarts=4))
        assert abs(res.w[0] - 2.0) <= 1e-3
        assert res.converged
        assert res.provenance == "descent_local"

    def test_plateau_stalls_on_flat_region(self, plateau):
        res = solve_pr_descent(plateau, [1.0], DescentConfig(restarts=3, seed=5))
        assert 0.0 <= res.w[0] <= 1.0
        assert res.reg_objective == pytest.approx(1.0, abs=1e-12)

    def test_regression_matches_grid_at_zero(self, regression):
        grid = GridSpec(401)
        step = 6.0 / 400
        g = solve_pr_grid(regression, [0.0], grid)
        d = solve_pr_descent(regression, [0.0])
        assert np.all(np.abs(g.w - d.w) <= step)
        # closed-form least squares as a third opinion
        X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
        t = np.array([1.0, 0.5, 1.8, 0.4])
        assert d.w == pytest.approx(np.linalg.solve(X.T @ X, X.T @ t), abs=1e-6)

    def test_finite_space_rejected(self, tie):
        with pytest.raises(ContractViolation):
            solve_pr_descent(tie, [1.0])

    def test_max_iters_flags_nonconvergence(self, vanishing):
        res = solve_pr_descent(vanishing, [math.e**2], DescentConfig(max_iters=2, restarts=1))
        assert not res.converged

    def test_finite_difference_path(self, vanishing):
        res = solve_pr_descent(vanishing, [math.e**2], DescentConfig(analytic=False, restarts=2))
        assert abs(res.w[0] - 2.0) <= 1e-3

    def test_nan_iterate_aborts_restart(self):
        def loss(W):
            out = W[:, 0] ** 2
            return out

        p = Problem(
            name="nan_grad",
            dim=1,
            space=ParamSpace.box([-1.0], [1.0]),
            num_constraints=1,
            loss=loss,
            violation=lambda W: np.zeros((W.shape[0], 1)),
            loss_grad=lambda w: np.array([np.nan]),
            violation_jac=lambda w: np.zeros((1, 1)),
        )
        res = solve_pr_descent(p, [1.0], DescentConfig(restarts=2))
        assert res.status == "failed"
        assert len(res.diagnostics) == 2

    @pytest.mark.parametrize("name", ["plateau", "vanishing_gradient", "log_unbounded"])
    def test_descent_never_beats_grid_beyond_discretization(self, name):
        p = make_instance(name) if name != "log_unbounded" else make_instance(name, w_max=50.0)
        grid = GridSpec(2001)
        step = (p.space.hi[0] - p.space.lo[0]) / 2000
        lip_l, lip_c = p.lipschitz
        for lam in (0.3, 1.0, 3.0, 12.0):
            g = solve_pr_grid(p, [lam], grid)
            d = solve_pr_descent(p, [lam], DescentConfig(restarts=3, max_iters=5000))
            bound = (lip_l + lam * lip_c[0]) * step / 2
            assert d.reg_objective >= g.reg_objective - bound - 1e-12


class TestFiniteDifferences:
    def test_vanishing_gradient_derivative(self, vanishing):
        g = finite_diff_grad(vanishing, [1.0], [1.0], h=1e-5)
        assert g[0] == pytest.approx(1 - math.exp(-1), abs=1e-6)
        assert g[0] == pytest.approx(0.63212, abs=1e-5)

    def test_plateau_flat(self, plateau):
        assert abs(finite_diff_grad(plateau, [1.0], [0.5])[0]) <= 1e-9

    def test_one_sided_at_boundary(self, vanishing):
        g = finite_diff_grad(vanishing, [1.0], [0.0])
        assert g[0] == pytest.approx(0.0, abs=1e-5)
        g = finite_diff_grad(vanishing, [1.0], [10.0])
        assert g[0] == pytest.approx(1 - math.exp(-10), abs=1e-5)

    @pytest.mark.parametrize("name", ["plateau", "vanishing_gradient", "log_unbounded", "ordered_regression", "balanced_classification"])
    def test_loss_gradient_matches_analytic(self, name):
        p = make_instance(name)
        rng = np.random.default_rng(11)
        lo, hi = np.array(p.space.lo), np.array(p.space.hi)
        for _ in range(20):
            w = lo + (0.05 + 0.9 * rng.random(p.dim)) * (hi - lo)
            fd = finite_diff_grad(p, np.zeros(p.m), w)
            an = analytic_grad(p, np.zeros(p.m), w)
            assert np.all(np.abs(fd - an) <= np.maximum(1e-5, 1e-4 * np.abs(an)))

    def test_rejects_bad_step(self, vanishing):
        with pytest.raises(ContractViolation):
            finite_diff_grad(vanishing, [1.0], [1.0], h=0.0)
