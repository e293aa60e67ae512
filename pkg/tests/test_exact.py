"""Closed-form and fixed-point ground-state solvers."""

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import lambertw

from slater_rom import (
    DomainError,
    GroundState,
    grid_eigensolver,
    lambert_w0,
    solve_ground_state,
    solve_symmetric_dimer,
)


class TestLambertW:
    def test_defining_identity(self):
        """w * exp(w) = x, relative to |x|, across six hundred decades.

        Above x = 1 the product overflows long before the function does,
        so the identity is checked in logarithmic form there."""
        xs = np.concatenate([
            -np.exp(-1.0) * np.linspace(1e-6, 0.999999, 40),
            np.logspace(-300, 300, 100),
        ])
        for x in xs:
            w = lambert_w0(float(x))
            if x > 1.0:
                assert abs(w + np.log(w) - np.log(x)) <= 1e-13 * max(1.0, np.log(x))
            else:
                assert abs(w * np.exp(w) - x) <= 1e-14 * abs(x)

    def test_special_values(self):
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(np.e) == pytest.approx(1.0, rel=1e-15)
        assert lambert_w0(-np.exp(-1.0)) == -1.0

    def test_against_scipy(self):
        rng = np.random.default_rng(57)
        xs = np.concatenate([rng.uniform(-np.exp(-1.0), 0.0, 50),
                             10.0 ** rng.uniform(-6, 6, 50)])
        for x in xs:
            ref = float(lambertw(complex(x)).real)
            assert lambert_w0(float(x)) == pytest.approx(ref, rel=1e-12, abs=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            lambert_w0(-0.5)


class TestSymmetricDimer:
    def test_fixed_point_and_bisection(self):
        """The closed form satisfies zeta = z (1 + exp(-2 zeta r)) and
        matches an independent bisection of the same equation."""
        rng = np.random.default_rng(58)
        for _ in range(50):
            z = float(rng.uniform(0.1, 5.0))
            r = float(rng.uniform(0.1, 5.0))
            gs = solve_symmetric_dimer(z, r)
            assert abs(gs.zeta - z * (1.0 + np.exp(-2.0 * gs.zeta * r))) <= 1e-12
            root = brentq(lambda t: t - z * (1.0 + np.exp(-2.0 * t * r)),
                          z, 2.0 * z, xtol=1e-15, rtol=8.9e-16)
            assert gs.zeta == pytest.approx(root, rel=1e-13)
            np.testing.assert_allclose(gs.weights, [0.5, 0.5], atol=1e-15)
            assert gs.energy == pytest.approx(-0.5 * gs.zeta**2, rel=1e-15)

    def test_coincident_wells(self):
        gs = solve_symmetric_dimer(1.3, 0.0)
        assert gs.zeta == pytest.approx(2.6, rel=1e-15)

    def test_limits(self):
        """Far-separated wells approach a single well of charge z; close
        wells approach one well of charge 2z."""
        assert solve_symmetric_dimer(1.0, 40.0).zeta == pytest.approx(1.0, abs=1e-12)
        assert solve_symmetric_dimer(1.0, 1e-9).zeta == pytest.approx(2.0, abs=1e-6)

    def test_invalid_arguments(self):
        with pytest.raises(DomainError):
            solve_symmetric_dimer(0.0, 1.0)
        with pytest.raises(DomainError):
            solve_symmetric_dimer(1.0, -0.1)
        # NaN comparisons are all False, so these need explicit rejection
        with pytest.raises(DomainError):
            solve_symmetric_dimer(float("nan"), 1.0)
        with pytest.raises(DomainError):
            solve_symmetric_dimer(1.0, float("nan"))


class TestGeneralSolver:
    def test_single_well(self):
        gs = solve_ground_state([1.7], [0.4])
        assert gs.zeta == 1.7
        assert gs.weights[0] == 1.0
        assert gs.energy == pytest.approx(-0.5 * 1.7**2)

    def test_matches_closed_form_dimer(self):
        rng = np.random.default_rng(59)
        for _ in range(20):
            z = float(rng.uniform(0.2, 4.0))
            r = float(rng.uniform(0.05, 4.0))
            a = solve_symmetric_dimer(z, r)
            b = solve_ground_state([z, z], [-r, r])
            assert b.zeta == pytest.approx(a.zeta, rel=1e-13)
            np.testing.assert_allclose(b.weights, a.weights, atol=1e-12)

    def test_matching_conditions(self):
        """pi_m zeta = z_m sum_k pi_k exp(-zeta |r_m - r_k|) at the solution."""
        rng = np.random.default_rng(60)
        for _ in range(25):
            m = int(rng.integers(2, 5))
            z = rng.uniform(0.2, 3.0, size=m)
            r = rng.uniform(-3.0, 3.0, size=m)
            gs = solve_ground_state(z, r)
            assert gs.matching_residual() <= 1e-10
            assert np.all(gs.weights > 0)
            assert gs.weights.sum() == pytest.approx(1.0, abs=1e-12)
            assert float(z.max()) <= gs.zeta <= float(z.sum()) + 1e-12

    def test_symmetries(self):
        """Translation and reflection of the wells move centers only."""
        z = np.array([0.8, 1.1, 0.6])
        r = np.array([-1.0, 0.2, 1.4])
        base = solve_ground_state(z, r)
        shifted = solve_ground_state(z, r + 5.0)
        assert shifted.zeta == pytest.approx(base.zeta, rel=1e-13)
        np.testing.assert_allclose(shifted.weights, base.weights, atol=1e-11)
        mirrored = solve_ground_state(z[::-1], -r[::-1])
        assert mirrored.zeta == pytest.approx(base.zeta, rel=1e-13)
        np.testing.assert_allclose(mirrored.weights, base.weights[::-1], atol=1e-11)

    def test_coincident_wells_add_charges(self):
        gs = solve_ground_state([0.7, 0.9], [1.3, 1.3])
        assert gs.zeta == pytest.approx(1.6, rel=1e-12)

    def test_invalid_arguments(self):
        with pytest.raises(DomainError):
            solve_ground_state([1.0, -1.0], [0.0, 1.0])
        with pytest.raises(DomainError):
            solve_ground_state([1.0], [0.0, 1.0])
        with pytest.raises(DomainError):
            solve_ground_state([], [])
        with pytest.raises(DomainError):
            solve_ground_state([1.0, float("nan")], [0.0, 1.0])
        with pytest.raises(DomainError):
            solve_ground_state([1.0, 1.0], [0.0, float("inf")])

    def test_mixture_view(self):
        gs = solve_ground_state([0.8, 1.1], [-1.0, 1.0])
        mix = gs.mixture()
        np.testing.assert_allclose(mix.scales, gs.zeta)
        np.testing.assert_allclose(mix.centers, gs.positions)
        np.testing.assert_allclose(mix.weights, gs.weights)


class TestGroundStateType:
    def test_validation(self):
        with pytest.raises(DomainError):
            GroundState(np.array([1.0]), np.array([0.0, 1.0]), 1.0,
                        np.array([1.0]))
        with pytest.raises(DomainError):
            GroundState(np.array([-1.0]), np.array([0.0]), 1.0, np.array([1.0]))

    def test_frozen_arrays(self):
        gs = solve_ground_state([1.0, 1.0], [-1.0, 1.0])
        with pytest.raises(ValueError):
            gs.weights[0] = 2.0


class TestGridEigensolver:
    """Independent finite-difference route; never feeds the closed forms."""

    CASES = [
        ((1.0,), (0.3,)),
        ((0.8, 1.1), (-1.2, 1.2)),
        ((0.5, 1.0, 1.5), (-2.0, 0.3, 1.7)),
    ]

    @pytest.mark.parametrize("z,r", CASES)
    def test_energy_and_shape_converge(self, z, r):
        gs = solve_ground_state(z, r)
        hw = max(abs(min(r)), abs(max(r))) + 25.0 / gs.zeta
        errs = []
        for npts in (2000, 8000):
            E, grid, u = grid_eigensolver(z, r, hw, npts)
            errs.append(abs(E - gs.energy) / abs(gs.energy))
            h = grid[1] - grid[0]
            dens = gs.mixture().density(grid)
            dens /= dens.sum() * h
            assert np.max(np.abs(u - dens)) / np.max(dens) < 2e-2
        assert errs[1] < errs[0] < 2e-3

    def test_validation(self):
        with pytest.raises(DomainError):
            grid_eigensolver([1.0], [2.0], 1.0, 100)   # well outside the box
        with pytest.raises(DomainError):
            grid_eigensolver([1.0], [0.0], 1.0, 2)
