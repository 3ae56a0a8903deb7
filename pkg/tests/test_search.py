import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pr4pc.analysis import trace_conformance
from pr4pc.core import ContractViolation
from pr4pc.instances import BUNDLED, make_instance
from pr4pc.search import (
    InvalidBracket,
    LambdaStrategy,
    binary_search_multiplier,
    dual_ascent,
    log_space,
    pr4pc,
)
from pr4pc.solvers import DescentConfig, GridSpec, solve_pc_grid


class TestStrategy:
    def test_log_grid_endpoints_exact(self):
        vals = log_space(0.25, 4.0, 9)
        assert vals[0] == 0.25 and vals[-1] == 4.0
        assert np.allclose(np.diff(np.log(vals)), np.log(16) / 8)

    def test_log_grid_product_for_two_constraints(self):
        cands = LambdaStrategy.log_grid(1.0, 100.0, 3).candidates(2)
        assert len(cands) == 9
        assert cands[0].tolist() == [1.0, 1.0] and cands[-1].tolist() == [100.0, 100.0]

    @pytest.mark.parametrize(
        "strategy,m",
        [
            (LambdaStrategy.explicit([[-1.0]]), 1),
            (LambdaStrategy.explicit([]), 1),
            (LambdaStrategy.log_grid(0.0, 1.0, 3), 1),
            (LambdaStrategy.binary(1.0, 10.0), 2),
            (LambdaStrategy.binary(5.0, 1.0), 1),
            (LambdaStrategy.dual([1.0], 0.0, 5), 1),
        ],
    )
    def test_invalid(self, strategy, m):
        with pytest.raises(ContractViolation):
            strategy.validate(m)


class TestPr4pc:
    def test_plateau_zero_threshold(self, plateau):
        out = pr4pc(plateau, [0.0], LambdaStrategy.log_grid(0.25, 4.0, 9), grid=GridSpec(2001))
        assert len(out.trace) == 9
        assert out.winner.result.w.tolist() == [1.0]
        assert out.winner.result.loss == 1.0
        # lambda < 1 -> C = 1 (rejected); lambda >= 1 -> C = 0 (stored)
        assert [e.stored for e in out.trace] == [lam >= 1.0 for lam in log_space(0.25, 4.0, 9)]

    def test_log_unbounded_default_domain_stores_nothing(self):
        p = make_instance("log_unbounded")
        out = pr4pc(p, [1.0], LambdaStrategy.log_grid(1e-3, 1e3, 200))
        assert out.stored == []
        assert out.winner is None
        assert out.status == "no_multiplier_found"

    def test_log_unbounded_truncation_breakpoint(self):
        # On [0, w_max] the concave objective -w + lam*ln(1+w) is minimized at an
        # endpoint; w=0 wins once lam > w_max / ln(1 + w_max).
        w_max = 1e3
        p = make_instance("log_unbounded", w_max=w_max)
        breakpoint_ = w_max / math.log1p(w_max)
        below = pr4pc(p, [1.0], LambdaStrategy.log_grid(1e-3, breakpoint_ * 0.999, 200))
        assert below.stored == []
        above = pr4pc(p, [1.0], LambdaStrategy.log_grid(breakpoint_ * 1.001, 1e3, 20))
        assert all(e.stored and e.result.w[0] == 0.0 for e in above.trace)
        # the constrained optimum w = e - 1 is never produced
        assert all(abs(e.result.w[0] - (math.e - 1)) > 1 for e in above.trace + below.trace)

    def test_attainable_table_explicit(self, attainable):
        out = pr4pc(attainable, [0.5], LambdaStrategy.explicit([3.0]))
        assert out.winner.result.label == "w*"

    def test_threads_do_not_change_trace(self, regression):
        strategy = LambdaStrategy.log_grid(1e-2, 1e2, 12)
        a = pr4pc(regression, [0.05], strategy, grid=GridSpec(101))
        b = pr4pc(regression, [0.05], strategy, grid=GridSpec(101), threads=4)
        assert [e.result.w.tolist() for e in a.trace] == [e.result.w.tolist() for e in b.trace]
        assert a.winner.index == b.winner.index

    def test_descent_solver_and_warm_start(self, vanishing):
        cfg = DescentConfig(restarts=1, seed=2)
        out = pr4pc(vanishing, [0.1], LambdaStrategy.log_grid(1.0, 100.0, 7), solver="descent", descent=cfg, warm_start=True)
        assert all(e.result.provenance == "descent_local" for e in out.trace)
        assert out.winner is not None

    def test_dispatch_to_adaptive_strategies(self, vanishing):
        out = pr4pc(vanishing, [0.1], LambdaStrategy.binary(1.0, 100.0, 1e-3))
        assert out.strategy == "binary_search"
        out = pr4pc(vanishing, [0.25], LambdaStrategy.dual([1.0], 4.0, 5))
        assert out.strategy == "dual_ascent"


@settings(max_examples=25, deadline=None)
@given(
    which=st.sampled_from(BUNDLED),
    theta=st.floats(0, 5),
    lo=st.floats(-3, 0),
    hi=st.floats(0.1, 3),
)
def test_store_filter_and_winner(which, theta, lo, hi):
    problem = make_instance(which)
    out = pr4pc(problem, [theta], LambdaStrategy.log_grid(10**lo, 10**hi, 7))
    for e in out.stored:
        assert np.all(e.result.violation <= theta)
    for e in out.trace:
        assert e.stored == bool(np.all(e.result.violation <= theta))
    if out.stored:
        losses = [e.result.loss for e in out.stored]
        assert out.winner.result.loss == min(losses)
        assert out.winner.index == next(e.index for e in out.stored if e.result.loss == min(losses))
        # the winner is PC-optimal for its own violation level
        pc = solve_pc_grid(problem, out.winner.result.violation)
        assert pc.loss == pytest.approx(out.winner.result.loss, abs=1e-9)
    else:
        assert out.winner is None


@settings(max_examples=25, deadline=None)
@given(which=st.sampled_from(BUNDLED), seed=st.integers(0, 10_000))
def test_trace_conformance_and_monotonicity_with_grid(which, seed):
    problem = make_instance(which)
    lams = np.sort(np.exp(np.random.default_rng(seed).uniform(np.log(1e-3), np.log(1e3), 6)))
    out = pr4pc(problem, [0.5], LambdaStrategy.explicit(lams))
    assert all(trace_conformance(problem, out))
    C = [e.result.violation[0] for e in out.trace]
    for a in range(len(C)):
        for b in range(a + 1, len(C)):
            assert C[b] <= C[a] + 1e-9


class TestBinarySearch:
    def test_vanishing_gradient_converges_to_ten(self, vanishing):
        out = binary_search_multiplier(vanishing, [0.1], [1.0, 100.0], 1e-6)
        lo, hi = out.extra["terminal_bracket"]
        assert hi - lo <= 1e-6
        # grid w* = nearest point to ln(lambda): C = 1/lambda up to the step 0.005
        assert lo == pytest.approx(10.0, rel=0.01)
        assert out.winner.result.violation[0] <= 0.1
        assert out.flags == []

    def test_plateau_jump(self, plateau):
        out = binary_search_multiplier(plateau, [0.5], [0.25, 4.0], 1e-6)
        lo, hi = out.extra["terminal_bracket"]
        assert lo < 1.0 <= hi and hi - lo <= 1e-6
        for e in out.trace:
            assert e.result.violation[0] == (1.0 if e.lam[0] < 1.0 else 0.0)
        assert out.winner.result.violation[0] == 0.0

    def test_invalid_bracket(self, vanishing):
        with pytest.raises(InvalidBracket):
            binary_search_multiplier(vanishing, [0.9], [2.0, 4.0], 1e-6)

    def test_single_multiplier_only(self):
        p = make_instance("finite_table", rows=[("x", 0.0, [1.0, 1.0]), ("y", 1.0, [0.0, 0.0])])
        with pytest.raises(ContractViolation):
            binary_search_multiplier(p, [0.5, 0.5], [0.1, 10.0], 1e-3)

    def test_non_monotone_flagged_for_local_solver(self):
        # scripted solver returning violations that rise with lambda
        from pr4pc.core import SolveResult

        p = make_instance("vanishing_gradient")

        def scripted(problem, lam, init=None):
            c = 0.05 if lam[0] >= 99 else (0.9 if lam[0] <= 1 else min(0.99, 0.2 + lam[0] / 200))
            v = np.array([c])
            return SolveResult(np.array([1.0]), 1.0, v, 1.0 + lam[0] * c, "descent_local", lam=lam)

        out = binary_search_multiplier(p, [0.3], [1.0, 100.0], 1.0, solver=scripted)
        assert out.flags, "rising violations must be flagged"


class TestDualAscent:
    def test_fixed_point(self, vanishing):
        out = dual_ascent(vanishing, [0.25], [1.0], 4.0, 50)
        assert len(out.trace) == 50
        assert out.extra["final_lambda"][0] == pytest.approx(4.0, rel=0.01)
        assert out.trace[1].lam[0] == pytest.approx(4.0, rel=0.01)

    def test_vacuous_threshold_drives_to_zero(self, plateau):
        out = dual_ascent(plateau, [2.0], [3.0], 0.5, 12)
        lams = [e.lam[0] for e in out.trace]
        assert lams[0] == 3.0
        assert all(b <= a for a, b in zip(lams, lams[1:]))
        assert lams[-1] == 0.0

    def test_two_point_tie(self, tie):
        out = dual_ascent(tie, [0.0], [0.0], 0.5, 8)
        lams = [e.lam[0] for e in out.trace]
        labels = [e.result.label for e in out.trace]
        # a (C=1) pushes lambda up by 0.5 per step; at lambda=1 the tie goes to b (C=0=theta)
        assert lams == [0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
        assert labels == ["a", "a"] + ["b"] * 6
        assert all(lab == "b" for lam, lab in zip(lams, labels) if lam >= 1.0)
        assert out.winner.result.label == "b"

    def test_opposite_tie_break_overshoots(self, tie):
        out = dual_ascent(tie, [0.0], [0.0], 0.5, 6, grid=GridSpec(prefer="high_violation"))
        assert [e.lam[0] for e in out.trace] == [0.0, 0.5, 1.0, 1.5, 1.5, 1.5]

    def test_solver_failure_recorded(self, vanishing):
        calls = {"n": 0}

        def flaky(problem, lam, init=None):
            calls["n"] += 1
            if calls["n"] == 2:
                raise ArithmeticError("boom")
            from pr4pc.solvers import solve_pr_grid

            return solve_pr_grid(problem, lam)

        out = dual_ascent(vanishing, [0.25], [1.0], 4.0, 4, solver=flaky)
        assert out.trace[1].note and "boom" in out.trace[1].note
        assert not out.trace[1].stored
        assert out.trace[2].lam.tolist() == out.trace[1].lam.tolist()
