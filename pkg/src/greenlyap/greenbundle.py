"""Green bundles of locally minimizing twist-map orbits.

Along a locally minimizing orbit the images of the vertical under the
k-step tangent maps are graphs of symmetric matrices obeying a discrete
Riccati recursion in the generating-function blocks.  Forward images
decrease to the slope ``S_+`` of the upper Green bundle, backward images
increase to ``S_-``, and the gap ``S_+ - S_-`` is what the exponent
formulas consume.  Everything here certifies its own monotonicity: a
Riccati sweep that moves the wrong way is a proof the orbit was not
minimizing, and is reported as such rather than averaged away.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConjugatePointError,
    MonotonicityViolationError,
    NonConvergenceError,
    NonPDDenominatorError,
    NoPositiveEigenvalueError,
)
from .lyap import as_weight_vector
from .symgeo import KAPPA_MAX, q_plus, symmetrize
from .twistmap import GeneratingFunction, OrbitSegment, PeriodicConfiguration

GREEN_TOL = 1e-12
GREEN_K_MAX = 500


def _forward_step(phi11, phi12, phi22, S, kappa_max=KAPPA_MAX):
    den = phi11 + S
    kappa = np.linalg.cond(den)
    if not np.isfinite(kappa) or kappa > kappa_max:
        raise ConjugatePointError(
            f"forward Riccati denominator cond {kappa:.3e} > {kappa_max:.1e}")
    return symmetrize(phi22 - phi12.T @ np.linalg.solve(den, phi12))


def _backward_step(phi11, phi12, phi22, S_next, kappa_max=KAPPA_MAX):
    den = S_next - phi22
    kappa = np.linalg.cond(den)
    if not np.isfinite(kappa) or kappa > kappa_max:
        raise ConjugatePointError(
            f"backward Riccati denominator cond {kappa:.3e} > {kappa_max:.1e}")
    return symmetrize(-phi11 - phi12 @ np.linalg.solve(den, phi12.T))


def riccati_forward_step(gf: GeneratingFunction, q, Q, S) -> np.ndarray:
    """Push the graph slope ``S`` at ``x = (q, .)`` one map step forward.

    Implements ``S' = d22 Phi - t(d12 Phi) (d11 Phi + S)^{-1} d12 Phi`` with
    the blocks evaluated on the orbit step ``q -> Q``; equals the graph
    transform of ``S`` by the tangent map of that step.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    Q = np.atleast_1d(np.asarray(Q, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    return _forward_step(gf.d11(q, Q), gf.d12(q, Q), gf.d22(q, Q), S)


def riccati_backward_step(gf: GeneratingFunction, q, Q, S_next) -> np.ndarray:
    """Pull the graph slope at the head of the step ``q -> Q`` back to its tail.

    Inverse of :func:`riccati_forward_step`:
    ``S = -d11 Phi - d12 Phi (S' - d22 Phi)^{-1} t(d12 Phi)``.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    Q = np.atleast_1d(np.asarray(Q, dtype=float))
    S_next = np.atleast_2d(np.asarray(S_next, dtype=float))
    return _backward_step(gf.d11(q, Q), gf.d12(q, Q), gf.d22(q, Q), S_next)


@dataclass(frozen=True)
class GreenPair:
    """Green bundle slopes along reported orbit points.

    Arrays are indexed like ``indices`` (positions in the source orbit or
    periodic configuration).  ``S_one``/``S_minus_one`` are the one-step
    graphs bounding the Green chain; their difference is the Jacobi
    diagonal ``a_n``, the natural normalization constant for the gap.
    """

    indices: np.ndarray
    S_plus: np.ndarray        # (n, d, d)
    S_minus: np.ndarray
    S_one: np.ndarray
    S_minus_one: np.ndarray
    k_used: int
    converged: bool
    tol: float
    deltas_forward: np.ndarray = field(repr=False)   # per-k max trace decrease
    deltas_backward: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.indices.size

    @property
    def dim(self) -> int:
        return self.S_plus.shape[-1]

    def gap(self) -> np.ndarray:
        """(n, d, d) array of ``S_+ - S_-`` (positive semidefinite)."""
        return self.S_plus - self.S_minus


def _monotone_update(old, new, direction: str):
    """Check eigenvalues of the one-sided difference, return max trace move."""
    diff = old - new if direction == "forward" else new - old
    worst_tr = 0.0
    for n in range(diff.shape[0]):
        d = symmetrize(diff[n])
        tol = 1e-10 * (1.0 + np.abs(old[n]).max())
        ev_min = float(np.linalg.eigvalsh(d)[0])
        if ev_min < -tol:
            raise MonotonicityViolationError(
                f"{direction} Green iteration gained {-ev_min:.3e} in a "
                "direction it must lose; orbit is not locally minimizing "
                "over this window")
        worst_tr = max(worst_tr, float(np.trace(d)))
    return worst_tr


def compute_green_bundles_periodic(gf: GeneratingFunction,
                                   config: PeriodicConfiguration,
                                   tol: float = GREEN_TOL,
                                   k_max: int = GREEN_K_MAX) -> GreenPair:
    """Green bundles at every point of a minimizing periodic configuration.

    Runs the forward and backward Riccati sweeps around the loop until the
    worst per-point trace move drops below ``tol`` (monotone sequences, so
    the trace move bounds the remaining error up to the contraction rate).

    Raises
    ------
    MonotonicityViolationError
        If a sweep moves the wrong way — the configuration is not a
        locally minimizing orbit.
    NonConvergenceError
        If ``k_max`` sweeps are not enough; the partial GreenPair is
        attached to the error.
    """
    pts = config.unrolled(1)
    N, d = config.points.shape
    phi11 = np.empty((N, d, d))
    phi12 = np.empty((N, d, d))
    phi22 = np.empty((N, d, d))
    for n in range(N):
        phi11[n] = gf.d11(pts[n], pts[n + 1])
        phi12[n] = gf.d12(pts[n], pts[n + 1])
        phi22[n] = gf.d22(pts[n], pts[n + 1])

    S_one = np.stack([phi22[(n - 1) % N] for n in range(N)])
    S_minus_one = np.stack([-phi11[n] for n in range(N)])
    S_f = S_one.copy()
    S_b = S_minus_one.copy()
    deltas_f, deltas_b = [], []
    k = 1
    while k < k_max:
        new_f = np.stack([
            _forward_step(phi11[(n - 1) % N], phi12[(n - 1) % N],
                          phi22[(n - 1) % N], S_f[(n - 1) % N])
            for n in range(N)])
        new_b = np.stack([
            _backward_step(phi11[n], phi12[n], phi22[n], S_b[(n + 1) % N])
            for n in range(N)])
        deltas_f.append(_monotone_update(S_f, new_f, "forward"))
        deltas_b.append(_monotone_update(S_b, new_b, "backward"))
        S_f, S_b = new_f, new_b
        k += 1
        if deltas_f[-1] < tol and deltas_b[-1] < tol:
            break
    converged = bool(deltas_f and deltas_f[-1] < tol and deltas_b[-1] < tol)
    pair = GreenPair(np.arange(N), S_f, S_b, S_one, S_minus_one, k, converged,
                     tol, np.asarray(deltas_f), np.asarray(deltas_b))
    if not converged:
        raise NonConvergenceError(
            f"Green sweeps still moving {max(deltas_f[-1], deltas_b[-1]):.3e} "
            f"> {tol:.1e} after {k} rounds", partial=pair)
    return pair


def compute_green_bundles(orbit: OrbitSegment, tol: float = GREEN_TOL,
                          k_max: int = GREEN_K_MAX) -> GreenPair:
    """Green bundles on the interior window of a finite minimizing segment.

    Values are reported only at points with at least ``k_used`` orbit steps
    on both sides, where ``k_used`` is the first depth at which both
    monotone sweeps move less than ``tol``; boundary points never appear.

    Raises
    ------
    NonConvergenceError
        If the segment is too short for the sweeps to settle before the
        two-sided window closes (or ``k_max`` is hit).
    """
    L = len(orbit)
    d = orbit.dim
    if L < 3:
        raise ValueError("orbit segment too short for any interior point")
    phi11, phi12, phi22 = orbit._phi11, orbit._b, orbit._phi22

    # S_k(x_n) lives at n >= k; S_{-k}(x_n) at n <= L-1-k.  `valid` tracks k.
    S_f = np.full((L, d, d), np.nan)
    S_b = np.full((L, d, d), np.nan)
    for n in range(1, L):
        S_f[n] = phi22[n - 1]
    for n in range(L - 1):
        S_b[n] = -phi11[n]
    S_one = S_f.copy()
    S_minus_one = S_b.copy()

    deltas_f, deltas_b = [], []
    k = 1
    converged = False
    while True:
        lo, hi = k + 1, L - 2 - k       # window indices valid after this sweep
        if lo > hi:
            break
        new_f = np.full_like(S_f, np.nan)
        new_b = np.full_like(S_b, np.nan)
        for n in range(k + 1, L):
            new_f[n] = _forward_step(phi11[n - 1], phi12[n - 1], phi22[n - 1],
                                     S_f[n - 1])
        for n in range(L - 2 - k, -1, -1):
            new_b[n] = _backward_step(phi11[n], phi12[n], phi22[n], S_b[n + 1])
        deltas_f.append(_monotone_update(S_f[lo:hi + 1], new_f[lo:hi + 1],
                                         "forward"))
        deltas_b.append(_monotone_update(S_b[lo:hi + 1], new_b[lo:hi + 1],
                                         "backward"))
        S_f, S_b = new_f, new_b
        k += 1
        if deltas_f[-1] < tol and deltas_b[-1] < tol:
            converged = True
            break
        if k >= k_max:
            break

    idx = np.arange(k, L - k)
    pair = GreenPair(idx, S_f[idx], S_b[idx], S_one[idx], S_minus_one[idx],
                     k, converged, tol,
                     np.asarray(deltas_f), np.asarray(deltas_b))
    if not converged or idx.size == 0:
        last = max(deltas_f[-1], deltas_b[-1]) if deltas_f else np.inf
        raise NonConvergenceError(
            f"Green sweeps at depth {k} still moving {last:.3e} > {tol:.1e}; "
            "segment too short or k_max too small", partial=pair)
    return pair


# ---------------------------------------------------------------------------
# exponent formulas

def theorem2_sum(measure, green: GreenPair) -> float:
    """Exact sum of positive exponents from the Green gap (twist maps).

    Evaluates ``(1/2) sum_n w_n [log det(S_+ - S_{-1}) - log det(S_- - S_{-1})]``
    over the reported points.  For a minimizing-orbit measure this equals
    the sum of positive Lyapunov exponents; swapping the roles of ``S_+``
    and ``S_-`` negates the value exactly.

    Raises
    ------
    NonPDDenominatorError
        If either log-det argument fails to be positive definite.
    """
    w = as_weight_vector(measure, len(green))
    total = 0.0
    for n in range(len(green)):
        num = symmetrize(green.S_plus[n] - green.S_minus_one[n])
        den = symmetrize(green.S_minus[n] - green.S_minus_one[n])
        for name, mat in (("S_+ - S_{-1}", num), ("S_- - S_{-1}", den)):
            ev = np.linalg.eigvalsh(mat)
            if ev[0] <= 0:
                raise NonPDDenominatorError(
                    f"{name} has min eigenvalue {ev[0]:.3e} at point "
                    f"{green.indices[n]}; log-det undefined")
        total += w[n] * 0.5 * (np.linalg.slogdet(num)[1]
                               - np.linalg.slogdet(den)[1])
    return float(total)


@dataclass(frozen=True)
class Theorem4Result:
    """Lower bounds for the smallest positive exponent from the Green gap.

    ``bound`` uses the smallest positive eigenvalue q_+ of the gap
    (zero-gap points contribute nothing and are counted in
    ``n_degenerate``); ``bound_conorm`` uses the conorm of the gap, which
    is weaker whenever the gap is singular but needs no eigenvalue
    selection.  ``constant`` is the normalization C >= sup ||S_1 - S_{-1}||.
    """

    bound: float
    bound_conorm: float
    constant: float
    per_point_qplus: np.ndarray
    n_degenerate: int


def theorem4_bound(measure, green: GreenPair, constant: float | None = None) -> Theorem4Result:
    """Green-gap lower bound ``(1/2) sum w log(1 + q_+(S_+ - S_-) / C)``.

    Parameters
    ----------
    constant : float, optional
        Override for C; defaults to the sup over reported points of
        ``||S_1 - S_{-1}||_2`` (any valid upper bound for the family keeps
        the inequality true, the default is the sharpest the data offers).

    Raises
    ------
    NoPositiveEigenvalueError
        If the gap is degenerate at every reported point — the bound's
        positive-exponent hypothesis has no support.
    """
    w = as_weight_vector(measure, len(green))
    if constant is None:
        constant = max(
            np.linalg.norm(green.S_one[n] - green.S_minus_one[n], 2)
            for n in range(len(green)))
    constant = float(constant)
    per_qplus = np.zeros(len(green))
    n_degenerate = 0
    total = 0.0
    total_conorm = 0.0
    for n in range(len(green)):
        gap = symmetrize(green.S_plus[n] - green.S_minus[n])
        try:
            qp = q_plus(gap)
        except NoPositiveEigenvalueError:
            n_degenerate += 1
            continue
        per_qplus[n] = qp
        total += w[n] * 0.5 * np.log1p(qp / constant)
        ev = np.linalg.eigvalsh(gap)
        total_conorm += w[n] * 0.5 * np.log1p(max(float(ev[0]), 0.0) / constant)
    if n_degenerate == len(green):
        raise NoPositiveEigenvalueError(
            "Green gap is degenerate at every reported point; no positive "
            "exponent to bound")
    return Theorem4Result(float(total), float(total_conorm), constant,
                          per_qplus, n_degenerate)
