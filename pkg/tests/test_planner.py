import math

import numpy as np
import pytest

from steadyctl import (
    CUBIC_SHIFT,
    LOGISTIC,
    RADIAL_CUBIC_2D,
    ControlPolyline,
    ControlledMap,
    LegBudgetExceeded,
    NoProgress,
    TargetNotStable,
    UnstableOnPath,
    Verdict,
    check_maneuver,
    in_basin,
    plan_along_path,
    plan_from_controls,
    solve_steady_state,
    state_at,
    trace_path,
    verify_plan,
)


def solve(m, alpha, guess):
    return solve_steady_state(m, alpha, guess)


class TestCheckManeuver:
    def test_logistic_direct_transfer_both_ways(self):
        a = solve(LOGISTIC, 1.1, 0.05)
        b = solve(LOGISTIC, 2.9, 0.65)
        assert check_maneuver(LOGISTIC, a, b).success
        assert check_maneuver(LOGISTIC, b, a).success

    def test_cross_branch_transfer_to_origin(self):
        src = solve(LOGISTIC, 2.0, 0.6)
        tgt = solve(LOGISTIC, 0.0, 0.1)
        man = check_maneuver(LOGISTIC, src, tgt)
        assert man.success
        assert man.evidence.final_distance <= 1e-8

    def test_cubic_long_jump_fails(self):
        src = solve(CUBIC_SHIFT, 0.0, 0.1)
        tgt = solve(CUBIC_SHIFT, 2.0, 2.1)
        man = check_maneuver(CUBIC_SHIFT, src, tgt)
        assert not man.success
        assert man.evidence.cause in ("escaped", "stationary")

    def test_unstable_target_refused(self):
        src = solve(LOGISTIC, 0.0, 0.1)
        tgt = solve(LOGISTIC, 2.0, 0.0)  # repelling origin state
        with pytest.raises(TargetNotStable):
            check_maneuver(LOGISTIC, src, tgt)

    def test_success_implies_membership(self):
        src = solve(CUBIC_SHIFT, 0.0, 0.1)
        tgt = solve(CUBIC_SHIFT, 0.7, 0.8)
        man = check_maneuver(CUBIC_SHIFT, src, tgt)
        assert man.success
        assert in_basin(CUBIC_SHIFT, src.x, tgt).verdict is Verdict.IN


class TestPlanAlongPath:
    def test_cubic_transfer_needs_intermediates(self, cubic_phi1_path):
        plan = plan_along_path(CUBIC_SHIFT, cubic_phi1_path, 0.0, cubic_phi1_path.t_end)
        assert plan.status.verified
        assert len(plan.intermediates) >= 2
        assert all(leg.success for leg in plan.legs)
        # legs chain through shared steady states
        for a, b in zip(plan.legs, plan.legs[1:]):
            assert a.target is b.source

    def test_plan_reverifies_nominally(self, cubic_phi1_path):
        plan = plan_along_path(CUBIC_SHIFT, cubic_phi1_path, 0.0, cubic_phi1_path.t_end)
        report = verify_plan(CUBIC_SHIFT, plan, "nominal")
        assert report.verified

    def test_logistic_direct_transfer_single_leg(self, logistic_phi3_path):
        t_end = logistic_phi3_path.t_end
        plan = plan_along_path(LOGISTIC, logistic_phi3_path, 0.0, t_end)
        assert plan.status.verified
        assert len(plan.legs) == 1
        assert plan.intermediates == ()

    def test_reverse_direction(self, logistic_phi3_path):
        plan = plan_along_path(LOGISTIC, logistic_phi3_path, logistic_phi3_path.t_end, 0.0)
        assert plan.status.verified
        assert plan.legs[-1].target.alpha[0] == pytest.approx(1.05)

    def test_radial_with_leg_cap_reproduces_half_steps(self, radial_path):
        plan = plan_along_path(
            RADIAL_CUBIC_2D, radial_path, 0.0, radial_path.t_end, max_leg=0.5
        )
        assert plan.status.verified
        mids = [a[0] for a in plan.intermediates]
        assert np.allclose(mids, [-0.5, 0.0, 0.5], atol=1e-9)

    def test_radial_unconstrained_is_short(self, radial_path):
        plan = plan_along_path(RADIAL_CUBIC_2D, radial_path, 0.0, radial_path.t_end)
        assert plan.status.verified
        assert len(plan.legs) <= 4

    def test_finiteness_bound(self, cubic_phi1_path):
        min_step = cubic_phi1_path.polyline.length / 1000.0
        plan = plan_along_path(
            CUBIC_SHIFT, cubic_phi1_path, 0.0, cubic_phi1_path.t_end, min_step=min_step
        )
        span = cubic_phi1_path.t_end
        assert len(plan.legs) <= math.ceil(span / min_step) + 1

    def test_unstable_samples_rejected(self):
        pl = ControlPolyline.from_points([[2.5], [3.5]])
        seed = solve(LOGISTIC, 2.5, 0.6)
        path = trace_path(LOGISTIC, seed, pl, initial_step=0.02, max_step=0.05)
        with pytest.raises(UnstableOnPath):
            plan_along_path(LOGISTIC, path, 0.0, path.t_end)

    def test_degenerate_span_rejected(self, cubic_phi1_path):
        with pytest.raises(ValueError):
            plan_along_path(CUBIC_SHIFT, cubic_phi1_path, 0.5, 0.5)


def _steep_map(strength: float) -> ControlledMap:
    """Identity branch with a basin of width 1/sqrt(strength) on each side."""
    def f(x, a):
        u = x[0] - a[0]
        return np.array([strength * u * u * u + a[0]])

    def jac(x, a):
        u = x[0] - a[0]
        return np.array([[3.0 * strength * u * u]])

    return ControlledMap(
        name=f"steep-{strength:g}", state_dim=1, control_dim=1, eval=f, jacobian_x=jac
    )


class TestPlannerFailureModes:
    # trace steps must stay below the branch separation 1/sqrt(strength),
    # otherwise the corrector can lock onto the neighboring unstable branch

    def test_no_progress_when_basins_are_narrower_than_min_step(self):
        m = _steep_map(1e6)  # basin half-width 1e-3 around each steady state
        pl = ControlPolyline.from_points([[0.0], [0.3]])
        seed = solve(m, 0.0, 0.0)
        path = trace_path(m, seed, pl, initial_step=4e-4, max_step=1e-3)
        with pytest.raises(NoProgress) as err:
            plan_along_path(m, path, 0.0, path.t_end, min_step=0.002)
        assert err.value.stuck_t == 0.0
        assert err.value.evidence is not None

    def test_leg_budget_exceeded(self):
        m = _steep_map(2500.0)  # basin half-width 0.02
        pl = ControlPolyline.from_points([[0.0], [1.0]])
        seed = solve(m, 0.0, 0.0)
        path = trace_path(m, seed, pl, initial_step=0.005, max_step=0.01)
        with pytest.raises(LegBudgetExceeded):
            plan_along_path(m, path, 0.0, path.t_end, min_step=0.002, max_legs=3)


class TestExplicitPlans:
    def test_published_cubic_sequence_verifies_leg_by_leg(self):
        states = [solve(CUBIC_SHIFT, a, a + 0.05) for a in (0.0, 0.7, 1.4, 2.0)]
        plan = plan_from_controls(CUBIC_SHIFT, states)
        assert plan.status.verified
        report = verify_plan(CUBIC_SHIFT, plan, "nominal")
        assert report.verified
        assert all(leg.success for leg in report.legs)

    def test_direct_cubic_jump_fails_in_plan(self):
        states = [solve(CUBIC_SHIFT, 0.0, 0.05), solve(CUBIC_SHIFT, 2.0, 2.05)]
        plan = plan_from_controls(CUBIC_SHIFT, states)
        assert not plan.status.verified
        assert plan.status.failed_leg == 0

    def test_published_radial_sequence_verifies_chained(self):
        states = [
            solve(RADIAL_CUBIC_2D, a, [a + 0.05, a - 0.05])
            for a in (-1.0, -0.5, 0.0, 0.5, 1.0)
        ]
        plan = plan_from_controls(RADIAL_CUBIC_2D, states)
        assert plan.status.verified
        report = verify_plan(RADIAL_CUBIC_2D, plan, "chained")
        assert report.verified
        assert report.legs[-1].final_distance <= 1e-8

    def test_identity_plan_is_trivially_verified(self):
        ss = solve(LOGISTIC, 2.0, 0.6)
        plan = plan_from_controls(LOGISTIC, [ss, ss])
        assert plan.status.verified
        report = verify_plan(LOGISTIC, plan, "nominal")
        assert report.verified
        assert report.legs[0].steps == 0

    def test_chained_failure_reports_leg(self):
        good = solve(CUBIC_SHIFT, 0.0, 0.05)
        far = solve(CUBIC_SHIFT, 2.0, 2.05)
        plan = plan_from_controls(CUBIC_SHIFT, [good, far])
        report = verify_plan(CUBIC_SHIFT, plan, "chained")
        assert not report.verified
        assert report.failed_leg == 0


@pytest.mark.parametrize(
    "m,path_fixture",
    [
        (LOGISTIC, "logistic_phi3_path"),
        (CUBIC_SHIFT, "cubic_phi1_path"),
        (RADIAL_CUBIC_2D, "radial_path"),
    ],
)
def test_small_steps_always_succeed_both_ways(m, path_fixture, rng, request):
    path = request.getfixturevalue(path_fixture)
    delta = path.polyline.length / 1000.0
    for t in rng.uniform(0.0, path.t_end - delta, 20):
        a = state_at(m, path, t)
        b = state_at(m, path, t + delta)
        assert check_maneuver(m, a, b).success
        assert check_maneuver(m, b, a).success
