"""
Unit tests for the fusion penalties and their delta-update maps.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from analysis.core import PenaltySpec
from analysis.errors import InvalidGamma
from analysis.penalty import delta_prox, group_soft_threshold, penalty_value

MCP = PenaltySpec(kind="mcp", gamma=3.0)
SCAD = PenaltySpec(kind="scad", gamma=3.7)
L1 = PenaltySpec(kind="l1")


def _derivative(t, lam, spec):
    if spec.kind.value == "l1":
        return lam
    g = spec.gamma
    if spec.kind.value == "mcp":
        return max(lam - t / g, 0.0)
    return lam * min(1.0, max(g - t / lam, 0.0) / (g - 1.0))


def _brute_force_norm(zeta_norm, lam, theta, spec):
    """Minimize (theta/2)(|zeta| - s)^2 + p(s) over s by grid search then golden section."""
    upper = zeta_norm + 3 * lam
    grid = np.linspace(0.0, upper, 20001)
    values = 0.5 * theta * (zeta_norm - grid) ** 2 + penalty_value(grid, lam, spec)
    k = int(np.argmin(values))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    if hi <= lo:
        return float(grid[k])
    res = minimize_scalar(
        lambda s: 0.5 * theta * (zeta_norm - s) ** 2 + penalty_value(max(s, 0.0), lam, spec),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.x) if res.fun <= values[k] else float(grid[k])


class TestPenaltyValue:
    """Test the closed-form penalty values."""

    def test_zero(self):
        """Test p(0) = 0 for every penalty."""
        for spec in (MCP, SCAD, L1):
            assert penalty_value(0.0, 1.3, spec) == 0.0

    def test_mcp_flat_region(self):
        """Test MCP beyond gamma*lambda equals gamma*lambda^2/2."""
        assert penalty_value(5.0, 1.0, MCP) == pytest.approx(1.5)

    def test_scad_flat_region(self):
        """Test SCAD beyond gamma*lambda equals lambda^2(gamma+1)/2."""
        assert penalty_value(10.0, 1.0, SCAD) == pytest.approx(2.35)

    @pytest.mark.parametrize("spec", [MCP, SCAD, L1])
    @pytest.mark.parametrize("t", [0.3, 1.0, 1.7, 2.9, 3.5, 6.0])
    def test_matches_quadrature(self, spec, t):
        """Test each closed form against numerical integration of its derivative."""
        lam = 0.8
        kinks = [b for b in (lam, (spec.gamma or 0.0) * lam) if 0 < b < t]
        expected, _ = quad(_derivative, 0.0, t, args=(lam, spec), points=kinks or None)
        assert penalty_value(t, lam, spec) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("spec", [MCP, SCAD, L1])
    def test_nondecreasing_and_concave(self, spec):
        """Test first differences are >= 0 and second differences <= 0 on a grid."""
        t = np.linspace(0.0, 10.0, 2001)
        values = penalty_value(t, 1.2, spec)
        first = np.diff(values)
        second = np.diff(values, n=2)
        assert np.all(first >= -1e-12)
        assert np.all(second <= 1e-9)

    def test_invalid_gamma(self):
        """Test an invalid gamma is rejected."""
        with pytest.raises(InvalidGamma):
            penalty_value(1.0, 1.0, PenaltySpec(kind="mcp", gamma=0.9))


class TestGroupSoftThreshold:
    """Test the groupwise soft-thresholding operator."""

    def test_boundary_is_zero(self):
        """Test ||z|| = t maps to zero."""
        np.testing.assert_array_equal(group_soft_threshold(np.array([3.0, 4.0]), 5.0), [0.0, 0.0])

    def test_shrinks(self):
        """Test shrinking (3, 4) by 2.5."""
        np.testing.assert_allclose(group_soft_threshold(np.array([3.0, 4.0]), 2.5), [1.5, 2.0])

    def test_zero_input(self):
        """Test the zero vector stays zero."""
        np.testing.assert_array_equal(group_soft_threshold(np.zeros(4), 1.0), np.zeros(4))

    @settings(max_examples=50)
    @given(
        st.floats(min_value=0.0, max_value=10.0),
        st.floats(min_value=0.0, max_value=2 * math.pi),
        st.floats(min_value=0.0, max_value=12.0),
    )
    def test_rotation_invariance(self, radius, angle, t):
        """Test the output norm depends only on ||z||."""
        z = radius * np.array([math.cos(angle), math.sin(angle)])
        out = group_soft_threshold(z, t)
        assert np.linalg.norm(out) == pytest.approx(max(radius - t, 0.0), abs=1e-9)


class TestDeltaProx:
    """Test the exact delta-update rules."""

    def test_l1_example(self):
        """Test L1 reduces to soft thresholding at lambda/theta."""
        np.testing.assert_allclose(delta_prox(np.array([3.0, 4.0]), 2.5, 1.0, L1), [1.5, 2.0])

    def test_mcp_example(self):
        """Test the MCP shrinkage branch on (2, 0)."""
        np.testing.assert_allclose(delta_prox(np.array([2.0, 0.0]), 1.0, 1.0, MCP), [1.5, 0.0])

    def test_scad_identity_example(self):
        """Test SCAD leaves (5, 0) untouched."""
        np.testing.assert_array_equal(delta_prox(np.array([5.0, 0.0]), 1.0, 1.0, SCAD), [5.0, 0.0])

    def test_zero_input(self):
        """Test zeta = 0 maps to 0 for every penalty."""
        for spec in (MCP, SCAD, L1):
            np.testing.assert_array_equal(delta_prox(np.zeros(3), 1.0, 1.0, spec), np.zeros(3))

    def test_invalid_pairing(self):
        """Test gamma/theta pairs outside the update's validity are rejected."""
        with pytest.raises(InvalidGamma):
            delta_prox(np.ones(2), 1.0, 0.2, MCP)
        with pytest.raises(InvalidGamma):
            delta_prox(np.ones(2), 1.0, 0.3, SCAD)

    def test_matches_brute_force(self):
        """Test 200 random cases against scalar minimization along zeta."""
        rng = np.random.default_rng(11)
        kinds = ("l1", "mcp", "scad")
        for case in range(200):
            kind = kinds[case % 3]
            q = (1, 2, 8)[case % 3 if case % 2 else (case // 2) % 3]
            lam = rng.uniform(0.1, 2.0)
            theta = rng.uniform(0.5, 2.0)
            if kind == "mcp":
                spec = PenaltySpec(kind=kind, gamma=max(1.0 / theta, 1.0) + rng.uniform(0.5, 3.0))
            elif kind == "scad":
                spec = PenaltySpec(kind=kind, gamma=max(1.0 / theta + 1.0, 2.0) + rng.uniform(0.5, 3.0))
            else:
                spec = PenaltySpec(kind=kind)
            direction = rng.normal(size=q)
            direction /= np.linalg.norm(direction)
            reach = (spec.gamma or 3.0) * lam * 1.5 + 1.0
            zeta = rng.uniform(0.0, reach) * direction

            out = delta_prox(zeta, lam, theta, spec)
            expected = _brute_force_norm(float(np.linalg.norm(zeta)), lam, theta, spec)
            assert abs(np.linalg.norm(out) - expected) < 1e-4, (case, kind, lam, theta, spec.gamma)
            if np.linalg.norm(out) > 0:
                np.testing.assert_allclose(out / np.linalg.norm(out), direction, atol=1e-10)

    @pytest.mark.parametrize("spec", [MCP, SCAD])
    def test_identity_beyond_flat_region(self, spec):
        """Test ||zeta|| > gamma*lambda returns zeta exactly."""
        rng = np.random.default_rng(3)
        for _ in range(50):
            zeta = rng.normal(size=4)
            lam = 0.9 * np.linalg.norm(zeta) / spec.gamma
            np.testing.assert_array_equal(delta_prox(zeta, lam, 1.0, spec), zeta)

    def test_scad_continuity(self):
        """Test the SCAD update norm has no jump at either branch boundary."""
        lam, theta, h = 1.0, 1.0, 1e-10
        for boundary in (lam + lam / theta, SCAD.gamma * lam):
            below = np.linalg.norm(delta_prox(np.array([boundary - h, 0.0]), lam, theta, SCAD))
            above = np.linalg.norm(delta_prox(np.array([boundary + h, 0.0]), lam, theta, SCAD))
            assert abs(above - below) < 1e-8

    def test_mcp_continuity(self):
        """Test the MCP update meets the identity at gamma*lambda."""
        lam, theta, h = 1.0, 1.0, 1e-10
        boundary = MCP.gamma * lam
        below = np.linalg.norm(delta_prox(np.array([boundary - h]), lam, theta, MCP))
        above = np.linalg.norm(delta_prox(np.array([boundary + h]), lam, theta, MCP))
        assert abs(above - below) < 1e-8


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
