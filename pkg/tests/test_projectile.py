import math

import numpy as np
import pytest

from mlsurrogate.projectile import (
    EPSILON,
    NOMINAL,
    ProjectileParameters,
    ResolutionLadder,
    SimulationError,
    Trajectory,
    _range_batch,
    cost,
    estimate_convergence_order,
    evaluate_detail,
    evaluate_level,
    observable,
    perturb,
    simulate,
)

GRAVITY = 9.81


def closed_form_range(v0, angle, h, g=GRAVITY):
    vy = v0 * math.sin(angle)
    return v0 * math.cos(angle) * (vy + math.sqrt(vy * vy + 2 * g * h)) / g


def nominal_params(**overrides):
    fields = dict(
        rho=1.225,
        radius=0.23,
        drag_coefficient=0.1,
        mass=0.145,
        height=1.0,
        angle=math.radians(30),
        speed=25.0,
    )
    fields.update(overrides)
    return ProjectileParameters(**fields)


class TestPerturb:
    def test_midpoint_is_nominal(self):
        p = perturb(np.full(7, 0.5))
        assert (p.rho, p.radius, p.drag_coefficient, p.mass, p.height, p.angle, p.speed) == NOMINAL

    def test_density_upper_edge(self):
        y = np.full(7, 0.5)
        y[0] = 1.0
        p = perturb(y)
        assert p.rho == pytest.approx(1.225 * 1.1, abs=1e-15)
        assert p.radius == 0.23 and p.speed == 25.0

    def test_all_lower_edge(self):
        p = perturb(np.zeros(7))
        expect = [0.9 * v for v in NOMINAL]
        got = [p.rho, p.radius, p.drag_coefficient, p.mass, p.height, p.angle, p.speed]
        assert got == pytest.approx(expect, rel=1e-15)
        assert p.angle == pytest.approx(math.radians(27.0))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            perturb(np.zeros(6))

    def test_affine_in_each_coordinate(self):
        for k in range(7):
            vals = []
            for yk in (0.0, 0.5, 1.0):
                y = np.full(7, 0.5)
                y[k] = yk
                p = perturb(y)
                vals.append([p.rho, p.radius, p.drag_coefficient, p.mass, p.height, p.angle, p.speed][k])
            assert vals[1] == pytest.approx((vals[0] + vals[2]) / 2, rel=1e-14)


class TestSimulate:
    def test_drag_free_matches_closed_form(self):
        p = nominal_params(drag_coefficient=0.0)
        x_max = observable(simulate(p, 0.00125))
        exact = closed_form_range(25.0, math.radians(30), 1.0)
        assert exact == pytest.approx(56.8558, abs=5e-4)
        assert abs(x_max - exact) / exact < 1e-3

    def test_first_order_convergence_from_ground(self):
        p = nominal_params(height=0.0)
        dt = 0.01
        ref = observable(simulate(p, dt / 1024))
        e1 = abs(observable(simulate(p, dt)) - ref)
        e2 = abs(observable(simulate(p, dt / 2)) - ref)
        assert 1.6 <= e1 / e2 <= 2.4

    def test_nominal_drag_regression_fixture(self):
        # Cross-checked against an independently written integrator below.
        x_max = observable(simulate(nominal_params(), 0.00125))
        assert x_max == pytest.approx(17.858633970407347, rel=1e-12)

        def independent_range(dt):
            c = 1.225 * 0.1 * math.pi * 0.23**2 / (2 * 0.145)
            px, py = 0.0, 1.0
            ux = 25.0 * math.cos(math.radians(30))
            uy = 25.0 * math.sin(math.radians(30))
            while True:
                nx, ny = px + ux * dt, py + uy * dt
                ux, uy = ux - dt * c * (ux * ux + uy * uy), uy - dt * GRAVITY
                if ny <= 0.0:
                    return nx if ny == 0.0 else px + (nx - px) * (py / (py - ny))
                px, py = nx, ny

        assert abs(independent_range(0.00125) - x_max) / x_max < 1e-6

    def test_nontermination_guard(self):
        with pytest.raises(SimulationError):
            simulate(nominal_params(), 1e-7, max_steps=10)

    def test_drag_reduces_range(self):
        with_drag = observable(simulate(nominal_params(), 0.002))
        without = observable(simulate(nominal_params(drag_coefficient=0.0), 0.002))
        assert with_drag < without

    def test_physical_drag_differs_from_literal(self):
        literal = observable(simulate(nominal_params(), 0.002))
        physical = observable(simulate(nominal_params(), 0.002, physical_drag=True))
        assert literal != physical

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            nominal_params(mass=-1.0)
        with pytest.raises(ValueError):
            nominal_params(angle=math.pi)
        with pytest.raises(ValueError):
            simulate(nominal_params(), 0.0)


class TestObservable:
    def test_midpoint_interpolation(self):
        traj = Trajectory(
            positions=np.array([[0.0, 2.0], [10.0, 0.5], [11.0, -0.5]]),
            velocities=np.zeros((3, 2)),
            dt=1.0,
        )
        assert observable(traj) == pytest.approx(10.5, abs=1e-15)

    def test_exact_ground_hit(self):
        traj = Trajectory(
            positions=np.array([[10.0, 0.5], [11.0, 0.0]]),
            velocities=np.zeros((2, 2)),
            dt=1.0,
        )
        assert observable(traj) == 11.0

    def test_rejects_airborne_trajectory(self):
        traj = Trajectory(
            positions=np.array([[0.0, 2.0], [1.0, 3.0]]),
            velocities=np.zeros((2, 2)),
            dt=1.0,
        )
        with pytest.raises(ValueError):
            observable(traj)

    def test_drag_free_accuracy(self):
        p = nominal_params(drag_coefficient=0.0)
        x_max = observable(simulate(p, 0.00125))
        assert abs(x_max - closed_form_range(25.0, math.radians(30), 1.0)) < 0.05


class TestEvaluateLevel:
    def test_ladder_resolutions(self, ladder):
        assert ladder.delta(0) == 0.08
        assert ladder.delta(6) == pytest.approx(0.00125, rel=1e-15)

    def test_determinism(self, ladder, rng):
        y = rng.random(7)
        a = evaluate_level(y, 4, ladder)
        b = evaluate_level(y, 4, ladder)
        assert a.value == b.value

    def test_matches_scalar_composition(self, ladder, rng):
        for level in (0, 3):
            y = rng.random(7)
            fast = evaluate_level(y, level, ladder).value
            slow = observable(simulate(perturb(y), ladder.delta(level)))
            assert fast == slow

    def test_resolution_convergence(self, ladder, rng):
        ys = rng.random((500, 7))
        v6 = _range_batch(ys, ladder.delta(6), EPSILON, NOMINAL, False)
        v5 = _range_batch(ys, ladder.delta(5), EPSILON, NOMINAL, False)
        v0 = _range_batch(ys, ladder.delta(0), EPSILON, NOMINAL, False)
        closer = np.abs(v6 - v5) < np.abs(v6 - v0)
        assert np.mean(closer) >= 0.95


class TestEvaluateDetail:
    def test_rejects_degenerate_pair(self, ladder):
        with pytest.raises(ValueError):
            evaluate_detail(np.full(7, 0.5), 1, (0, 0), ladder)
        with pytest.raises(ValueError):
            evaluate_detail(np.full(7, 0.5), 3, (0, 3, 6), ladder)

    def test_telescoping_identity(self, model, rng):
        ys = rng.random((200, 7))
        total = model.level_values(ys, 0)
        for level in range(1, 7):
            total = total + model.detail_values(ys, level - 1, level)
        finest = model.level_values(ys, 6)
        assert np.max(np.abs(total - finest) / np.abs(finest)) < 1e-12

    def test_detail_variance_shrinks_with_level(self, model, rng):
        ys = rng.random((400, 7))
        v1 = model.detail_values(ys, 0, 1).var(ddof=1)
        v3 = model.detail_values(ys, 2, 3).var(ddof=1)
        assert v3 < v1


class TestCost:
    def test_reciprocal_fixture(self, ladder):
        assert cost(6, ladder) == pytest.approx(800.0, rel=1e-12)

    def test_ladder_ratio(self, ladder):
        for level in range(1, 7):
            assert cost(level - 1, ladder) / cost(level, ladder) == pytest.approx(0.5, rel=1e-12)

    def test_allocation_total_cost(self, model):
        # 2048 coarse samples plus 32 finest detail pairs, summed directly.
        total = 2048 * model.cost(0) + 32 * (model.cost(6) + model.cost(5))
        assert total == pytest.approx(2048 * 12.5 + 32 * (800 + 400), rel=1e-12)
        assert model.detail_cost(5, 6) == pytest.approx(1200.0, rel=1e-12)


class TestBatchEvaluation:
    def test_batch_equals_scalar_bitwise(self, ladder, rng):
        ys = rng.random((40, 7))
        batch = _range_batch(ys, ladder.delta(2), EPSILON, NOMINAL, False)
        scalar = np.array([observable(simulate(perturb(y), ladder.delta(2))) for y in ys])
        assert np.array_equal(batch, scalar)

    def test_empty_batch(self, ladder):
        out = _range_batch(np.empty((0, 7)), ladder.delta(0), EPSILON, NOMINAL, False)
        assert out.shape == (0,)


class TestEulerOrder:
    def test_empirical_order_near_one(self, model):
        order = estimate_convergence_order(model, n_points=100, seed=4)
        assert 0.7 <= order <= 1.3


class TestResolutionLadder:
    def test_halving_structure(self, ladder):
        for level in range(1, 7):
            assert ladder.delta(level - 1) == 2 * ladder.delta(level)

    def test_invalid_construction(self):
        with pytest.raises(ValueError):
            ResolutionLadder.from_coarsest(-0.1, 3)
        with pytest.raises(ValueError):
            ResolutionLadder(finest_level=1, deltas=(0.1, 0.2))
