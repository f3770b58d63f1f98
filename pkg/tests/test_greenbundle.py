import dataclasses

import numpy as np
import pytest

from greenlyap.errors import (
    ConjugatePointError,
    MonotonicityViolationError,
    NonConvergenceError,
    NonPDDenominatorError,
    NoPositiveEigenvalueError,
)
from greenlyap.greenbundle import (
    GreenPair,
    compute_green_bundles,
    compute_green_bundles_periodic,
    riccati_backward_step,
    riccati_forward_step,
    theorem2_sum,
    theorem4_bound,
)
from greenlyap.lyap import WeightedOrbitMeasure
from greenlyap.symgeo import graph_transform
from greenlyap.twistmap import (
    coupled_standard_family,
    find_minimizing_periodic_orbit,
    iterate_orbit,
    standard_family,
)

GOLDEN_PLUS = (np.sqrt(5.0) - 1.0) / 2.0    # S_+ at the K=1 minimizing fixed point
GOLDEN_MINUS = -(1.0 + np.sqrt(5.0)) / 2.0  # S_-


def top_multiplier(K):
    """Largest eigenvalue of [[K+2, 1], [K+1, 1]]-type fixed point tangent map."""
    t = 2.0 + K
    return (t + np.sqrt(t * t - 4.0)) / 2.0


def fixed_point_config(K):
    return find_minimizing_periodic_orbit(standard_family(K), [0], 1)


class TestRiccatiSteps:
    def test_forward_ladder_is_fibonacci(self):
        # at the K=1 fixed point the forward iterates are F(2k-1)/F(2k)
        gf = standard_family(1.0)
        fib = [1, 1]
        while len(fib) < 20:
            fib.append(fib[-1] + fib[-2])
        S = np.array([[1.0]])
        for k in range(2, 9):
            S = riccati_forward_step(gf, [0.5], [0.5], S)
            assert S[0, 0] == pytest.approx(fib[2 * k - 2] / fib[2 * k - 1],
                                            abs=1e-15)

    def test_backward_ladder_is_fibonacci(self):
        gf = standard_family(1.0)
        fib = [1, 1]
        while len(fib) < 20:
            fib.append(fib[-1] + fib[-2])
        S = np.array([[-2.0]])
        for k in range(2, 9):
            S = riccati_backward_step(gf, [0.5], [0.5], S)
            assert S[0, 0] == pytest.approx(-fib[2 * k] / fib[2 * k - 1],
                                            abs=1e-15)

    def test_parabolic_ladder_is_harmonic(self):
        # free motion: S_k = 1/k exactly
        gf = standard_family(0.0)
        S = np.array([[1.0]])
        for k in range(2, 30):
            S = riccati_forward_step(gf, [0.0], [0.0], S)
            assert S[0, 0] == pytest.approx(1.0 / k, abs=1e-15)

    def test_fixed_points_of_the_recursion(self):
        gf = standard_family(1.0)
        for s_star in (GOLDEN_PLUS, GOLDEN_MINUS):
            S = np.array([[s_star]])
            out = riccati_forward_step(gf, [0.5], [0.5], S)
            assert out[0, 0] == pytest.approx(s_star, abs=1e-15)

    def test_backward_inverts_forward(self):
        gf = coupled_standard_family([1.0, 0.7], 0.3)
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = rng.uniform(0, 1, 2)
            Q = rng.uniform(0, 1, 2)
            A = rng.standard_normal((2, 2))
            S = A + A.T + 3.0 * np.eye(2)
            S2 = riccati_forward_step(gf, q, Q, S)
            back = riccati_backward_step(gf, q, Q, S2)
            assert np.abs(back - S).max() < 1e-10 * (1 + np.abs(S).max())

    def test_agrees_with_graph_transform(self):
        # the Riccati step in generating blocks is the tangent-map graph
        # transform; they must agree to rounding
        gf = standard_family(1.0)
        orbit = iterate_orbit(gf, [0.32], [0.41], 50)
        S = np.array([[0.8]])
        for n in range(len(orbit) - 1):
            via_riccati = riccati_forward_step(gf, orbit.q[n], orbit.q[n + 1], S)
            via_frame = graph_transform(orbit.tangent(n).as_matrix(), S)
            assert np.abs(via_riccati - via_frame).max() < 1e-13
            S = via_riccati


class TestSegmentBundles:
    def test_fixed_point_segment(self):
        gf = standard_family(1.0)
        orbit = iterate_orbit(gf, [0.5], [0.0], 60)
        pair = compute_green_bundles(orbit)
        assert pair.converged
        assert pair.k_used < 25
        np.testing.assert_allclose(pair.S_plus[:, 0, 0], GOLDEN_PLUS, atol=1e-11)
        np.testing.assert_allclose(pair.S_minus[:, 0, 0], GOLDEN_MINUS, atol=1e-11)
        np.testing.assert_allclose(pair.S_one[:, 0, 0], 1.0, atol=1e-14)
        np.testing.assert_allclose(pair.S_minus_one[:, 0, 0], -2.0, atol=1e-14)
        # reported window: k_used steps of cushion on both sides
        assert pair.indices[0] == pair.k_used
        assert pair.indices[-1] == len(orbit) - 1 - pair.k_used
        # convergence certificates: monotone trace moves, last below tol
        assert np.all(np.diff(pair.deltas_forward) <= 1e-14)
        assert pair.deltas_forward[-1] < pair.tol

    def test_short_segment_fails_with_partial(self):
        gf = standard_family(1.0)
        orbit = iterate_orbit(gf, [0.5], [0.0], 8)
        with pytest.raises(NonConvergenceError) as ei:
            compute_green_bundles(orbit)
        partial = ei.value.partial
        assert isinstance(partial, GreenPair)
        assert not partial.converged

    def test_parabolic_segment_never_settles(self):
        gf = standard_family(0.0)
        orbit = iterate_orbit(gf, [0.0], [0.3], 100)
        with pytest.raises(NonConvergenceError):
            compute_green_bundles(orbit)

    def test_elliptic_monotonicity_violation(self):
        # q = 0 with K = 0.5 is elliptic: the forward ladder dives through
        # the twist singularity and comes back up, which the monotone
        # certificate must catch
        gf = standard_family(0.5)
        orbit = iterate_orbit(gf, [0.0], [0.0], 30)
        with pytest.raises(MonotonicityViolationError):
            compute_green_bundles(orbit)

    def test_elliptic_conjugate_point(self):
        # K = 1 at q = 0: d11 + S_2 = 0 exactly, a conjugate point
        gf = standard_family(1.0)
        orbit = iterate_orbit(gf, [0.0], [0.0], 30)
        with pytest.raises(ConjugatePointError):
            compute_green_bundles(orbit)

    def test_matches_periodic_on_unrolled_orbit(self):
        gf = standard_family(1.0)
        pc = find_minimizing_periodic_orbit(gf, [1], 2, residual_tol=1e-12)
        per = compute_green_bundles_periodic(gf, pc)
        orbit = pc.as_orbit_segment(gf, 30)
        seg = compute_green_bundles(orbit)
        for j, idx in enumerate(seg.indices):
            n = idx % 2
            assert np.abs(seg.S_plus[j] - per.S_plus[n]).max() < 1e-9
            assert np.abs(seg.S_minus[j] - per.S_minus[n]).max() < 1e-9


class TestPeriodicBundles:
    def test_fixed_point_values(self):
        pair = compute_green_bundles_periodic(standard_family(1.0),
                                              fixed_point_config(1.0))
        assert pair.converged
        assert pair.S_plus[0, 0, 0] == pytest.approx(GOLDEN_PLUS, abs=1e-13)
        assert pair.S_minus[0, 0, 0] == pytest.approx(GOLDEN_MINUS, abs=1e-13)

    def test_chain_ordering(self):
        gf = standard_family(1.0)
        pc = find_minimizing_periodic_orbit(gf, [2], 5, residual_tol=1e-12)
        pair = compute_green_bundles_periodic(gf, pc)
        for n in range(len(pair)):
            s1 = pair.S_one[n, 0, 0]
            sp = pair.S_plus[n, 0, 0]
            sm = pair.S_minus[n, 0, 0]
            sm1 = pair.S_minus_one[n, 0, 0]
            assert sm1 < sm < sp < s1
            assert sp - sm > 0.2  # hyperbolic: gap bounded away from zero

    def test_bundle_invariance_along_orbit(self):
        # S_+ pushed through one step lands on S_+ at the next point;
        # S_- pulled back lands on S_- at the previous point
        gf = standard_family(1.0)
        pc = find_minimizing_periodic_orbit(gf, [2], 5, residual_tol=1e-12)
        pair = compute_green_bundles_periodic(gf, pc, tol=1e-14)
        pts = pc.unrolled(1)
        N = pc.period
        for n in range(N):
            fwd = riccati_forward_step(gf, pts[n], pts[n + 1], pair.S_plus[n])
            assert np.abs(fwd - pair.S_plus[(n + 1) % N]).max() < 1e-10
            bwd = riccati_backward_step(gf, pts[n], pts[n + 1],
                                        pair.S_minus[(n + 1) % N])
            assert np.abs(bwd - pair.S_minus[n]).max() < 1e-10

    def test_shear_rotation_never_settles(self):
        gf = standard_family(0.0)
        pc = find_minimizing_periodic_orbit(gf, [1], 3)
        with pytest.raises(NonConvergenceError) as ei:
            compute_green_bundles_periodic(gf, pc)
        assert not ei.value.partial.converged

    def test_coupled_fixed_point_diagonalizes(self):
        # separable structure: in the eigenbasis of V'' the slopes are the
        # scalar fixed-point values of each curvature eigenvalue
        gf = coupled_standard_family([1.0, 0.6], 0.25)
        pc = find_minimizing_periodic_orbit(gf, [0, 0], 1)
        pair = compute_green_bundles_periodic(gf, pc)
        v = np.linalg.eigvalsh(gf.potential.hess(pc.points[0]))
        expected_plus = (-v + np.sqrt(v * v + 4 * v)) / 2.0
        expected_minus = (-v - np.sqrt(v * v + 4 * v)) / 2.0
        np.testing.assert_allclose(np.linalg.eigvalsh(pair.S_plus[0]),
                                   np.sort(expected_plus), atol=1e-11)
        np.testing.assert_allclose(np.linalg.eigvalsh(pair.S_minus[0]),
                                   np.sort(expected_minus), atol=1e-11)


class TestTheorem2:
    @pytest.mark.parametrize("K", [0.5, 1.0, 2.0, 5.0])
    def test_fixed_point_equals_log_multiplier(self, K):
        gf = standard_family(K)
        pair = compute_green_bundles_periodic(gf, fixed_point_config(K))
        val = theorem2_sum(WeightedOrbitMeasure.uniform(1), pair)
        assert val == pytest.approx(np.log(top_multiplier(K)), abs=1e-11)

    def test_golden_identity(self):
        # K = 1: (1/2) log( (S_+ + 2) / (S_- + 2) ) = log((3 + sqrt 5)/2)
        pair = compute_green_bundles_periodic(standard_family(1.0),
                                              fixed_point_config(1.0))
        val = theorem2_sum(WeightedOrbitMeasure.uniform(1), pair)
        assert val == pytest.approx(0.9624236501192069, abs=1e-11)

    def test_periodic_orbit_matches_monodromy(self):
        gf = standard_family(1.0)
        pc = find_minimizing_periodic_orbit(gf, [2], 5, residual_tol=1e-12)
        pair = compute_green_bundles_periodic(gf, pc, tol=1e-14)
        val = theorem2_sum(WeightedOrbitMeasure.uniform(5), pair)
        orbit = pc.as_orbit_segment(gf, 1)
        M = np.eye(2)
        for n in range(5):
            M = orbit.tangent(n).as_matrix() @ M
        lam = np.abs(np.linalg.eigvals(M)).max()
        assert val == pytest.approx(np.log(lam) / 5.0, abs=1e-10)

    def test_swapping_bundles_negates(self):
        gf = standard_family(1.0)
        pc = find_minimizing_periodic_orbit(gf, [1], 2, residual_tol=1e-12)
        pair = compute_green_bundles_periodic(gf, pc)
        swapped = dataclasses.replace(pair, S_plus=pair.S_minus,
                                      S_minus=pair.S_plus)
        w = WeightedOrbitMeasure.uniform(2)
        assert theorem2_sum(w, swapped) == -theorem2_sum(w, pair)

    def test_weighted_average(self):
        gf = standard_family(1.0)
        pc = find_minimizing_periodic_orbit(gf, [2], 5, residual_tol=1e-12)
        pair = compute_green_bundles_periodic(gf, pc)
        w = np.array([0.4, 0.1, 0.2, 0.05, 0.25])
        val = theorem2_sum(WeightedOrbitMeasure(w), pair)
        manual = 0.0
        for n in range(5):
            num = pair.S_plus[n, 0, 0] - pair.S_minus_one[n, 0, 0]
            den = pair.S_minus[n, 0, 0] - pair.S_minus_one[n, 0, 0]
            manual += w[n] * 0.5 * np.log(num / den)
        assert val == pytest.approx(manual, abs=1e-14)

    def test_non_pd_denominator_raises(self):
        pair = compute_green_bundles_periodic(standard_family(1.0),
                                              fixed_point_config(1.0))
        bad = dataclasses.replace(pair, S_minus=pair.S_minus_one.copy())
        with pytest.raises(NonPDDenominatorError):
            theorem2_sum(WeightedOrbitMeasure.uniform(1), bad)

    def test_coupled_fixed_point_sums_eigenmodes(self):
        gf = coupled_standard_family([1.0, 0.6], 0.25)
        pc = find_minimizing_periodic_orbit(gf, [0, 0], 1)
        pair = compute_green_bundles_periodic(gf, pc)
        v = np.linalg.eigvalsh(gf.potential.hess(pc.points[0]))
        expected = sum(np.log(top_multiplier(vi)) for vi in v)
        val = theorem2_sum(WeightedOrbitMeasure.uniform(1), pair)
        assert val == pytest.approx(expected, abs=1e-10)


class TestTheorem4:
    def test_golden_bound_value(self):
        pair = compute_green_bundles_periodic(standard_family(1.0),
                                              fixed_point_config(1.0))
        res = theorem4_bound(WeightedOrbitMeasure.uniform(1), pair)
        assert res.constant == pytest.approx(3.0, abs=1e-12)
        assert res.per_point_qplus[0] == pytest.approx(np.sqrt(5.0), abs=1e-12)
        assert res.n_degenerate == 0
        expected = 0.5 * np.log1p(np.sqrt(5.0) / 3.0)
        assert res.bound == pytest.approx(expected, abs=1e-12)
        assert res.bound == pytest.approx(0.2784792710055213, abs=1e-12)
        # scalar positive gap: both bound flavours coincide
        assert res.bound_conorm == pytest.approx(res.bound, abs=1e-15)

    @pytest.mark.parametrize("K", [0.5, 1.0, 2.0, 5.0])
    def test_bound_below_exponent(self, K):
        gf = standard_family(K)
        pair = compute_green_bundles_periodic(gf, fixed_point_config(K))
        res = theorem4_bound(WeightedOrbitMeasure.uniform(1), pair)
        assert 0.0 < res.bound <= np.log(top_multiplier(K)) + 1e-12

    def test_larger_constant_weakens_bound(self):
        pair = compute_green_bundles_periodic(standard_family(1.0),
                                              fixed_point_config(1.0))
        w = WeightedOrbitMeasure.uniform(1)
        tight = theorem4_bound(w, pair)
        loose = theorem4_bound(w, pair, constant=10.0)
        assert loose.constant == 10.0
        assert loose.bound < tight.bound

    def test_degenerate_gap_everywhere_raises(self):
        pair = compute_green_bundles_periodic(standard_family(1.0),
                                              fixed_point_config(1.0))
        flat = dataclasses.replace(pair, S_minus=pair.S_plus.copy())
        with pytest.raises(NoPositiveEigenvalueError):
            theorem4_bound(WeightedOrbitMeasure.uniform(1), flat)

    def test_partially_degenerate_gap_counted(self):
        gf = standard_family(1.0)
        pc = find_minimizing_periodic_orbit(gf, [1], 2, residual_tol=1e-12)
        pair = compute_green_bundles_periodic(gf, pc)
        S_minus = pair.S_minus.copy()
        S_minus[0] = pair.S_plus[0]
        half_flat = dataclasses.replace(pair, S_minus=S_minus)
        res = theorem4_bound(WeightedOrbitMeasure.uniform(2), half_flat)
        assert res.n_degenerate == 1
        assert res.bound > 0.0

    def test_coupled_fixed_point_bound(self):
        # d = 2: q_+ picks the softest curvature mode, C the stiffest
        gf = coupled_standard_family([1.0, 0.6], 0.25)
        pc = find_minimizing_periodic_orbit(gf, [0, 0], 1)
        pair = compute_green_bundles_periodic(gf, pc)
        v = np.linalg.eigvalsh(gf.potential.hess(pc.points[0]))
        res = theorem4_bound(WeightedOrbitMeasure.uniform(1), pair)
        expected_qp = np.sqrt(v[0] ** 2 + 4 * v[0])
        assert res.per_point_qplus[0] == pytest.approx(expected_qp, abs=1e-10)
        assert res.constant == pytest.approx(2.0 + v[-1], abs=1e-10)
        smallest_exponent = np.log(top_multiplier(v[0]))
        assert 0.0 < res.bound <= smallest_exponent
        # conorm flavour is never stronger
        assert res.bound_conorm <= res.bound + 1e-15
