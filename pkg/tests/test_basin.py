from decimal import Decimal, getcontext

import numpy as np
import pytest

from steadyctl import (
    CUBIC_SHIFT,
    LOGISTIC,
    RADIAL_CUBIC_2D,
    ControlledMap,
    Interval,
    LyapunovStatus,
    NotConverged,
    Star,
    TargetNotStable,
    Verdict,
    certify_contraction_ball,
    estimate_grid,
    estimate_interval_1d,
    estimate_star,
    functional_residual,
    in_basin,
    jacobian_x,
    lyapunov_value,
    shift_to_origin,
    solve_steady_state,
)
from steadyctl.basin import _sphere_directions


def cubic_series_oracle(x0: str, digits: int = 200) -> Decimal:
    """Independent high-precision sum of the series for the cubic map at
    control 0: sum_k x0**(2 * 3**k)."""
    getcontext().prec = digits
    x = Decimal(x0)
    total = Decimal(0)
    e = 1
    for _ in range(digits):
        term = x ** (2 * e)
        total += term
        if term < Decimal(10) ** (-digits):
            break
        e *= 3
    return total


def brute_force_series(m, x, target, terms=2000):
    """Direct orbit summation with no early stopping (independent oracle)."""
    xk = np.atleast_1d(np.asarray(x, float))
    total = 0.0
    for _ in range(terms):
        d = float(np.linalg.norm(xk - target.x))
        total += d * d
        xk = m.eval(xk, target.alpha)
    return total


class TestLyapunovValue:
    def test_zero_exactly_at_target(self, cubic_target_a0, logistic_target_a2, radial_target_a0):
        for m, tgt in (
            (CUBIC_SHIFT, cubic_target_a0),
            (LOGISTIC, logistic_target_a2),
            (RADIAL_CUBIC_2D, radial_target_a0),
        ):
            ev = lyapunov_value(m, tgt.x, tgt)
            assert ev.status is LyapunovStatus.CONVERGED
            assert ev.value == 0.0

    def test_cubic_frozen_oracle_value(self, cubic_target_a0):
        oracle = float(cubic_series_oracle("0.5"))
        ev = lyapunov_value(CUBIC_SHIFT, [0.5], cubic_target_a0)
        assert ev.status is LyapunovStatus.CONVERGED
        assert abs(ev.value - oracle) <= 1e-15
        assert abs(ev.value - 0.26562881469726566) <= 1e-12

    def test_agreement_with_brute_force(self, logistic_target_a2, cubic_target_a0, rng):
        cases = [(LOGISTIC, logistic_target_a2, rng.uniform(0.1, 0.9, 12)),
                 (CUBIC_SHIFT, cubic_target_a0, rng.uniform(-0.9, 0.9, 12))]
        for m, tgt, xs in cases:
            for x in xs:
                ev = lyapunov_value(m, [x], tgt)
                assert ev.status is LyapunovStatus.CONVERGED
                ref = brute_force_series(m, [x], tgt)
                assert abs(ev.value - ref) <= ev.tail_bound + 1e-13

    def test_nonnegative_everywhere(self, logistic_target_a2, rng):
        for x in rng.uniform(-0.2, 1.2, 25):
            ev = lyapunov_value(LOGISTIC, [x], logistic_target_a2)
            assert ev.value >= 0.0

    def test_diverges_outside_basin(self, cubic_target_a0):
        ev = lyapunov_value(CUBIC_SHIFT, [1.5], cubic_target_a0)
        assert ev.status is LyapunovStatus.DIVERGED
        assert ev.cause == "escaped"

    def test_diverges_on_pinned_boundary_orbit(self, cubic_target_a0):
        # exactly on the basin edge the orbit sits on another fixed point
        ev = lyapunov_value(CUBIC_SHIFT, [1.0], cubic_target_a0)
        assert ev.status is LyapunovStatus.DIVERGED
        assert ev.cause == "stationary"

    def test_value_cap_triggers_divergence(self, cubic_target_a0):
        # partial sum passes the cap before the orbit reaches the escape radius
        ev = lyapunov_value(CUBIC_SHIFT, [1.2], cubic_target_a0, value_cap=0.5)
        assert ev.status is LyapunovStatus.DIVERGED
        assert ev.cause == "value_cap"

    def test_converged_tail_bound_honors_tolerance(self, cubic_target_a0):
        ev = lyapunov_value(CUBIC_SHIFT, [0.5], cubic_target_a0, tail_tol=1e-12)
        assert ev.tail_bound <= 1e-12


class TestFunctionalResidual:
    def test_zero_at_target(self):
        # 0.5 is exactly representable, so a tight solve lands on it and the
        # one-step defect vanishes identically
        tgt = solve_steady_state(LOGISTIC, 2.0, 0.6, newton_tol=1e-13)
        assert tgt.residual == 0.0
        assert functional_residual(LOGISTIC, tgt.x, tgt) == 0.0

    def test_logistic_bound(self, logistic_target_a2):
        r = functional_residual(LOGISTIC, [0.25], logistic_target_a2, tail_tol=1e-12)
        assert r <= 2e-12

    def test_cubic_bound(self, cubic_target_a0):
        r = functional_residual(CUBIC_SHIFT, [0.5], cubic_target_a0, tail_tol=1e-12)
        assert r <= 2e-12

    def test_contract_on_random_interior_points(self, cubic_target_a0, rng):
        for x in rng.uniform(-0.8, 0.8, 20):
            ex = lyapunov_value(CUBIC_SHIFT, [x], cubic_target_a0)
            fx = CUBIC_SHIFT.eval(np.array([x]), cubic_target_a0.alpha)
            efx = lyapunov_value(CUBIC_SHIFT, fx, cubic_target_a0)
            r = functional_residual(CUBIC_SHIFT, [x], cubic_target_a0)
            assert r <= 2.0 * (ex.tail_bound + efx.tail_bound) + 1e-14

    def test_not_converged_raises(self, cubic_target_a0):
        with pytest.raises(NotConverged):
            functional_residual(CUBIC_SHIFT, [1.5], cubic_target_a0)


class TestContractionBall:
    def test_logistic_ball_certifies_contraction(self, logistic_target_a2, rng):
        r, q = certify_contraction_ball(LOGISTIC, logistic_target_a2)
        assert 0 < r <= 1.0
        assert q == pytest.approx(0.5, abs=1e-9)
        for x in rng.uniform(-r, r, 50):
            J = jacobian_x(LOGISTIC, logistic_target_a2.x + x, logistic_target_a2.alpha)
            assert abs(J[0, 0]) <= q + 1e-12

    def test_unstable_target_rejected(self):
        tgt = solve_steady_state(LOGISTIC, 2.0, 0.0)  # origin branch, repelling
        with pytest.raises(TargetNotStable):
            certify_contraction_ball(LOGISTIC, tgt)


class TestInBasin:
    def test_logistic_cross_branch_point_is_inside(self):
        tgt = solve_steady_state(LOGISTIC, 2.9, 0.65)
        res = in_basin(LOGISTIC, [0.1 / 1.1], tgt)
        assert res.verdict is Verdict.IN
        assert res.evidence.cause == "converged"

    def test_cubic_origin_outside_far_basin(self):
        tgt = solve_steady_state(CUBIC_SHIFT, 2.0, 2.1)
        res = in_basin(CUBIC_SHIFT, [0.0], tgt)
        assert res.verdict is Verdict.OUT

    def test_radial_point_inside_unit_disc(self, radial_target_a0):
        res = in_basin(RADIAL_CUBIC_2D, [0.5, 0.5], radial_target_a0)
        assert res.verdict is Verdict.IN

    def test_unstable_target_refused(self):
        tgt = solve_steady_state(LOGISTIC, 2.0, 0.0)
        with pytest.raises(TargetNotStable):
            in_basin(LOGISTIC, [0.5], tgt)

    def test_membership_consistent_with_series(self, logistic_target_a2, rng):
        for x in rng.uniform(-0.3, 1.3, 30):
            res = in_basin(LOGISTIC, [x], logistic_target_a2)
            ev = lyapunov_value(LOGISTIC, [x], logistic_target_a2)
            if res.verdict is Verdict.IN:
                assert ev.status is LyapunovStatus.CONVERGED
            if ev.status is LyapunovStatus.DIVERGED:
                assert res.verdict is Verdict.OUT


class TestIntervalEstimate:
    @pytest.mark.parametrize("alpha", [1.5, 2.0, 2.5])
    def test_logistic_unit_interval(self, alpha):
        tgt = solve_steady_state(LOGISTIC, alpha, 0.4)
        sl = estimate_interval_1d(LOGISTIC, tgt)
        geom = sl.geometry
        assert isinstance(geom, Interval)
        assert abs(geom.lo - 0.0) <= 1e-3
        assert abs(geom.hi - 1.0) <= 1e-3
        assert not geom.lo_open_ended and not geom.hi_open_ended
        assert geom.lo < tgt.x[0] < geom.hi

    def test_cubic_unit_window(self):
        tgt = solve_steady_state(CUBIC_SHIFT, 0.7, 0.8)
        geom = estimate_interval_1d(CUBIC_SHIFT, tgt).geometry
        assert abs(geom.lo - (-0.3)) <= 1e-3
        assert abs(geom.hi - 1.7) <= 1e-3

    def test_logistic_origin_is_globally_attracting_at_zero_control(self):
        tgt = solve_steady_state(LOGISTIC, 0.0, 0.1)
        geom = estimate_interval_1d(LOGISTIC, tgt, r_probe_max=64.0).geometry
        assert geom.lo_open_ended and geom.hi_open_ended
        assert geom.lo == -64.0 and geom.hi == 64.0

    def test_requires_1d(self, radial_target_a0):
        with pytest.raises(ValueError, match="1-D"):
            estimate_interval_1d(RADIAL_CUBIC_2D, radial_target_a0)


class TestStarEstimate:
    def test_unit_disc_all_rays(self):
        tgt = solve_steady_state(RADIAL_CUBIC_2D, 1.0, [1.1, 0.9])
        sl = estimate_star(RADIAL_CUBIC_2D, tgt, num_rays=16)
        geom = sl.geometry
        assert isinstance(geom, Star)
        assert geom.radii.shape == (16,)
        assert np.all(np.abs(geom.radii - 1.0) <= 1e-3)
        assert not geom.open_ended.any()

    def test_single_axis_ray_at_origin(self, radial_target_a0):
        geom = estimate_star(RADIAL_CUBIC_2D, radial_target_a0, num_rays=4).geometry
        j = int(np.argmax(geom.directions @ np.array([1.0, 0.0])))
        assert np.allclose(geom.directions[j], [1.0, 0.0])
        assert abs(geom.radii[j] - 1.0) <= 1e-3

    def test_ray_count_contract(self, radial_target_a0):
        geom = estimate_star(RADIAL_CUBIC_2D, radial_target_a0, num_rays=4).geometry
        assert geom.directions.shape == (4, 2)
        assert geom.radii.shape == (4,)

    def test_rejects_too_few_rays(self, radial_target_a0):
        with pytest.raises(ValueError, match="at least 4"):
            estimate_star(RADIAL_CUBIC_2D, radial_target_a0, num_rays=3)

    def test_three_dimensional_rays_are_unit_and_deterministic(self):
        d1 = _sphere_directions(3, 8)
        d2 = _sphere_directions(3, 8)
        assert np.array_equal(d1, d2)
        assert np.allclose(np.linalg.norm(d1, axis=1), 1.0)

    def test_linear_contraction_3d_open_ended(self):
        lin = ControlledMap(
            name="half3d", state_dim=3, control_dim=1,
            eval=lambda x, a: 0.5 * x,
            jacobian_x=lambda x, a: 0.5 * np.eye(3),
        )
        tgt = solve_steady_state(lin, 0.0, [0.2, -0.1, 0.3])
        geom = estimate_star(lin, tgt, num_rays=6, r_max=2.0).geometry
        assert np.all(geom.open_ended)
        assert np.all(geom.radii == 2.0)


def test_grid_mask_matches_disc(radial_target_a0):
    sl = estimate_grid(
        RADIAL_CUBIC_2D, radial_target_a0,
        bounds=[(-1.4, 1.4), (-1.4, 1.4)], resolution=15,
    )
    cells = sl.geometry.cells
    axes = np.linspace(-1.4, 1.4, 15)
    for i, x in enumerate(axes):
        for j, y in enumerate(axes):
            r = np.hypot(x, y)
            if r < 0.95:
                assert cells[i, j]
            elif r > 1.05:
                assert not cells[i, j]


@pytest.mark.parametrize(
    "m,alpha,guess,spread",
    [
        (LOGISTIC, 2.0, 0.6, 1.2),
        (CUBIC_SHIFT, 0.7, 0.8, 2.0),
        (RADIAL_CUBIC_2D, 0.5, [0.6, 0.4], 2.0),
    ],
)
def test_shift_equivalence_on_random_probes(m, alpha, guess, spread, rng):
    tgt = solve_steady_state(m, alpha, guess)
    g = shift_to_origin(m, tgt)
    tgt_g = solve_steady_state(g, tgt.alpha, np.zeros(m.state_dim))
    for _ in range(20):
        x = tgt.x + rng.uniform(-spread, spread, size=m.state_dim)
        direct = in_basin(m, x, tgt).verdict
        shifted = in_basin(g, x - tgt.x, tgt_g).verdict
        assert direct == shifted


def test_series_grows_toward_basin_edge(cubic_target_a0):
    hi = estimate_interval_1d(CUBIC_SHIFT, cubic_target_a0).geometry.hi
    values = []
    for frac in (0.9, 0.99, 0.999):
        ev = lyapunov_value(CUBIC_SHIFT, [frac * hi], cubic_target_a0)
        assert ev.status is LyapunovStatus.CONVERGED
        values.append(ev.value)
    assert values[0] < values[1] < values[2]
