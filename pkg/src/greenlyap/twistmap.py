"""Symplectic twist maps of T^d x R^d given by generating functions.

A map ``f(q, p) = (Q, P)`` is encoded by ``Phi(q, Q)`` through

    p = -d1 Phi(q, Q),      P = d2 Phi(q, Q),

with ``Phi(q + k, Q + k) = Phi(q, Q)`` for integer ``k`` and the uniform
twist condition ``zeta . d12 Phi . zeta <= -K |zeta|^2``.  Orbits of ``f``
correspond to stationary configurations of the discrete action
``sum_n Phi(q_n, q_{n+1})``; locally minimizing configurations are the ones
whose Green bundles exist, so this module also carries the variational
side: actions, Euler-Lagrange residuals, block-tridiagonal Hessians and a
certified minimizing-periodic-orbit solver.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy import optimize

from .errors import (
    NewtonDivergenceError,
    NonConvergenceError,
    SaddleDetectedError,
    StepSizeUnderflowError,
)
from .potentials import TrigPolynomial, cosine_potential, coupled_cosine_potential
from .symgeo import SympBlockMat, check_symplectic, symmetrize

NEWTON_MAX_ITER = 50
NEWTON_TOL_SCALE = 1e-12


class GeneratingFunction:
    """Interface for twist-map generating functions.

    Subclasses provide ``value, d1, d2, d11, d12, d22`` taking (and
    returning) plain float arrays of shape (d,) / (d, d), plus ``dim`` and
    a declared uniform twist constant ``twist_constant``.
    """

    dim: int
    twist_constant: float

    def value(self, q, Q) -> float:
        raise NotImplementedError

    def d1(self, q, Q) -> np.ndarray:
        raise NotImplementedError

    def d2(self, q, Q) -> np.ndarray:
        raise NotImplementedError

    def d11(self, q, Q) -> np.ndarray:
        raise NotImplementedError

    def d12(self, q, Q) -> np.ndarray:
        """Mixed block with entries ``d^2 Phi / dq_i dQ_j``."""
        raise NotImplementedError

    def d22(self, q, Q) -> np.ndarray:
        raise NotImplementedError


class SeparableTwistFamily(GeneratingFunction):
    """``Phi(q, Q) = |Q - q|^2 / 2 + V(q)`` for a periodic potential V.

    The associated map is explicit: ``Q = q + p + V'(q)``, ``P = Q - q``.
    With ``V = cosine_potential(K)`` this is the standard family; its
    minimizing fixed point sits at q = 1/2 where ``V''`` is ``+K``.
    """

    def __init__(self, potential: TrigPolynomial):
        self.potential = potential
        self.dim = potential.dim
        self.twist_constant = 1.0

    def value(self, q, Q) -> float:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        Q = np.atleast_1d(np.asarray(Q, dtype=float))
        diff = Q - q
        return 0.5 * float(diff @ diff) + self.potential.value(q)

    def d1(self, q, Q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        Q = np.atleast_1d(np.asarray(Q, dtype=float))
        return -(Q - q) + self.potential.grad(q)

    def d2(self, q, Q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        Q = np.atleast_1d(np.asarray(Q, dtype=float))
        return Q - q

    def d11(self, q, Q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        return np.eye(self.dim) + self.potential.hess(q)

    def d12(self, q, Q) -> np.ndarray:
        return -np.eye(self.dim)

    def d22(self, q, Q) -> np.ndarray:
        return np.eye(self.dim)

    def __repr__(self):
        return f"SeparableTwistFamily({self.potential!r})"


def standard_family(K: float) -> SeparableTwistFamily:
    """The standard family at parameter K (d = 1)."""
    return SeparableTwistFamily(cosine_potential(K, dim=1))


def coupled_standard_family(strengths, coupling: float) -> SeparableTwistFamily:
    """d >= 2 product of standard maps with a cos(2 pi (q_1 + ... + q_d)) coupling."""
    return SeparableTwistFamily(coupled_cosine_potential(strengths, coupling))


# ---------------------------------------------------------------------------
# validation

def validate_generating_function(gf: GeneratingFunction, n_samples: int = 25,
                                 seed: int = 0, fd_tol: float = 1e-5,
                                 box: float = 1.5) -> dict:
    """Sample-based consistency report for a generating function.

    Checks, at ``n_samples`` random (q, Q) pairs: central finite differences
    of ``value`` against ``d1``/``d2`` and of those against the second
    derivative blocks (relative error <= ``fd_tol``); integer-translation
    periodicity; symmetry of ``d11`` and ``d22``; and the declared uniform
    twist constant against ``-max eig(sym(d12))``.

    Returns
    -------
    dict with keys ``passed``, ``max_fd_error``, ``periodicity_defect``,
    ``symmetry_defect``, ``twist_margin`` (negative margin = violated).
    """
    rng = np.random.default_rng(seed)
    d = gf.dim
    h = 1e-6
    max_fd = 0.0
    per_defect = 0.0
    sym_defect = 0.0
    twist_margin = np.inf

    def fd_grad(fun, x):
        g = np.zeros(d)
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
        return g

    def fd_jac(fun, x):
        cols = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            cols.append((fun(x + e) - fun(x - e)) / (2 * h))
        return np.column_stack(cols)

    for _ in range(n_samples):
        q = rng.uniform(-box, box, size=d)
        Q = q + rng.uniform(-box, box, size=d)
        scale = 1.0 + abs(gf.value(q, Q))

        g1 = gf.d1(q, Q)
        g2 = gf.d2(q, Q)
        max_fd = max(max_fd,
                     np.abs(fd_grad(lambda x: gf.value(x, Q), q) - g1).max() / scale,
                     np.abs(fd_grad(lambda x: gf.value(q, x), Q) - g2).max() / scale)
        # second derivatives against FD of the analytic gradients
        jscale = 1.0 + max(np.abs(gf.d11(q, Q)).max(), np.abs(gf.d12(q, Q)).max(),
                           np.abs(gf.d22(q, Q)).max())
        max_fd = max(
            max_fd,
            np.abs(fd_jac(lambda x: gf.d1(x, Q), q) - gf.d11(q, Q)).max() / jscale,
            np.abs(fd_jac(lambda x: gf.d1(q, x), Q).T - gf.d12(q, Q).T).max() / jscale,
            np.abs(fd_jac(lambda x: gf.d2(q, x), Q) - gf.d22(q, Q)).max() / jscale,
        )

        k = rng.integers(-3, 4, size=d)
        per_defect = max(per_defect,
                         abs(gf.value(q + k, Q + k) - gf.value(q, Q)) / scale)
        sym_defect = max(sym_defect,
                         np.abs(gf.d11(q, Q) - gf.d11(q, Q).T).max() / jscale,
                         np.abs(gf.d22(q, Q) - gf.d22(q, Q).T).max() / jscale)
        # margin = -max_eig(sym b) - K; nonnegative iff the twist condition holds
        b_sym = symmetrize(gf.d12(q, Q))
        twist_margin = float(min(twist_margin,
                                 -np.linalg.eigvalsh(b_sym)[-1] - gf.twist_constant))

    passed = (max_fd <= fd_tol and per_defect <= 1e-9
              and sym_defect <= 1e-9 and twist_margin >= -1e-9)
    return {
        "passed": bool(passed),
        "max_fd_error": float(max_fd),
        "periodicity_defect": float(per_defect),
        "symmetry_defect": float(sym_defect),
        "twist_margin": float(twist_margin),
    }


# ---------------------------------------------------------------------------
# the map and its tangent maps

def _damped_newton(fun, jac, x0, tol, max_iter, label):
    """Newton with half-step backtracking on the residual norm."""
    x = np.array(x0, dtype=float)
    r = fun(x)
    rnorm = np.abs(r).max()
    for _ in range(max_iter):
        if rnorm <= tol:
            return x
        step = np.linalg.solve(jac(x), -r)
        t = 1.0
        while True:
            x_new = x + t * step
            r_new = fun(x_new)
            rnorm_new = np.abs(r_new).max()
            if rnorm_new <= (1.0 - 0.5 * t) * rnorm or rnorm_new <= tol:
                break
            t *= 0.5
            if t < 1e-12:
                raise StepSizeUnderflowError(
                    f"{label}: backtracking underflow at residual {rnorm:.3e}",
                    partial=x)
        x, r, rnorm = x_new, r_new, rnorm_new
    if rnorm <= tol:
        return x
    raise NewtonDivergenceError(
        f"{label}: residual {rnorm:.3e} > {tol:.3e} after {max_iter} iterations",
        partial=x)


def forward_map(gf: GeneratingFunction, q, p,
                tol_scale: float = NEWTON_TOL_SCALE,
                max_iter: int = NEWTON_MAX_ITER):
    """Apply the twist map: solve ``d1 Phi(q, Q) = -p`` for Q, then ``P = d2 Phi``.

    The Newton solve starts from the integrable guess ``Q = q + p`` and is
    damped; the uniform twist makes ``d12 Phi`` invertible everywhere so
    the iteration is safe for any valid generating function.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    tol = tol_scale * (1.0 + np.abs(p).max())
    Q = _damped_newton(lambda x: gf.d1(q, x) + p,
                       lambda x: gf.d12(q, x),
                       q + p, tol, max_iter, "forward_map")
    return Q, gf.d2(q, Q)


def inverse_map(gf: GeneratingFunction, Q, P,
                tol_scale: float = NEWTON_TOL_SCALE,
                max_iter: int = NEWTON_MAX_ITER):
    """Apply the inverse map: solve ``d2 Phi(q, Q) = P`` for q, then ``p = -d1 Phi``."""
    Q = np.atleast_1d(np.asarray(Q, dtype=float))
    P = np.atleast_1d(np.asarray(P, dtype=float))
    tol = tol_scale * (1.0 + np.abs(P).max())
    q = _damped_newton(lambda x: gf.d2(x, Q) - P,
                       lambda x: gf.d12(x, Q).T,
                       Q - P, tol, max_iter, "inverse_map")
    return q, -gf.d1(q, Q)


def tangent_map(gf: GeneratingFunction, q, Q) -> SympBlockMat:
    """Differential of the map at the orbit step ``q -> Q``.

    With ``b = d12 Phi(q, Q)`` the blocks are::

        Df = [ -b^{-1} d11 Phi          -b^{-1}        ]
             [ t_b - d22 Phi b^{-1} d11 Phi   -d22 Phi b^{-1} ]
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    Q = np.atleast_1d(np.asarray(Q, dtype=float))
    b = gf.d12(q, Q)
    phi11 = gf.d11(q, Q)
    phi22 = gf.d22(q, Q)
    binv = np.linalg.solve(b, np.eye(gf.dim))
    binv_phi11 = binv @ phi11
    return SympBlockMat(-binv_phi11, -binv,
                        b.T - phi22 @ binv_phi11, -phi22 @ binv)


# ---------------------------------------------------------------------------
# orbits

@dataclass
class OrbitSegment:
    """A finite orbit ``x_0, ..., x_{L-1}`` of a twist map, with lifts.

    ``q`` keeps the lifted configuration (no reduction mod Z^d), so the
    generating-function relations hold verbatim between consecutive rows.
    """

    gf: GeneratingFunction
    q: np.ndarray  # (L, d)
    p: np.ndarray  # (L, d)

    def __post_init__(self):
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        self.p = np.atleast_2d(np.asarray(self.p, dtype=float))
        if self.q.shape != self.p.shape:
            raise ValueError("q and p must have the same shape")
        if self.q.shape[1] != self.gf.dim:
            raise ValueError(f"points have dimension {self.q.shape[1]}, "
                             f"map has dimension {self.gf.dim}")

    def __len__(self) -> int:
        return self.q.shape[0]

    @property
    def dim(self) -> int:
        return self.gf.dim

    @classmethod
    def from_configuration(cls, gf: GeneratingFunction, q_points) -> "OrbitSegment":
        """Rebuild momenta from a stationary configuration.

        Uses ``p_n = -d1 Phi(q_n, q_{n+1})`` (and the d2-relation at the
        last point); for a configuration that is not Euler-Lagrange
        stationary the two relations disagree and
        :meth:`momentum_residual` will say so.
        """
        q_points = np.atleast_2d(np.asarray(q_points, dtype=float))
        L = q_points.shape[0]
        p = np.zeros_like(q_points)
        for n in range(L - 1):
            p[n] = -gf.d1(q_points[n], q_points[n + 1])
        p[L - 1] = gf.d2(q_points[L - 2], q_points[L - 1])
        return cls(gf, q_points, p)

    @cached_property
    def _b(self) -> np.ndarray:
        """(L-1, d, d): ``b_n = d12 Phi(q_n, q_{n+1})``."""
        L, d = self.q.shape
        out = np.empty((L - 1, d, d))
        for n in range(L - 1):
            out[n] = self.gf.d12(self.q[n], self.q[n + 1])
        return out

    @cached_property
    def _phi11(self) -> np.ndarray:
        L, d = self.q.shape
        out = np.empty((L - 1, d, d))
        for n in range(L - 1):
            out[n] = self.gf.d11(self.q[n], self.q[n + 1])
        return out

    @cached_property
    def _phi22(self) -> np.ndarray:
        L, d = self.q.shape
        out = np.empty((L - 1, d, d))
        for n in range(L - 1):
            out[n] = self.gf.d22(self.q[n], self.q[n + 1])
        return out

    def b_mat(self, n: int) -> np.ndarray:
        """Twist block along the step ``n -> n+1``."""
        return self._b[n]

    def a_mat(self, n: int) -> np.ndarray:
        """Jacobi diagonal ``a_n = d11 Phi(q_n, q_{n+1}) + d22 Phi(q_{n-1}, q_n)``."""
        if not 1 <= n <= len(self) - 2:
            raise IndexError(f"a_mat needs both neighbours; n={n} out of range")
        return self._phi11[n] + self._phi22[n - 1]

    def tangent(self, n: int) -> SympBlockMat:
        """Tangent map ``Df(x_n)``, for 0 <= n <= L-2."""
        return tangent_map(self.gf, self.q[n], self.q[n + 1])

    def momentum_residual(self) -> float:
        """Worst deviation of stored momenta from the generating relations."""
        res = 0.0
        for n in range(len(self) - 1):
            res = max(res, np.abs(self.p[n] + self.gf.d1(self.q[n], self.q[n + 1])).max())
            res = max(res, np.abs(self.p[n + 1] - self.gf.d2(self.q[n], self.q[n + 1])).max())
        return float(res)


def iterate_orbit(gf: GeneratingFunction, q0, p0, n_steps: int) -> OrbitSegment:
    """Iterate the map ``n_steps`` times from (q0, p0), keeping lifts."""
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    q = np.empty((n_steps + 1, q0.size))
    p = np.empty_like(q)
    q[0], p[0] = q0, p0
    for n in range(n_steps):
        q[n + 1], p[n + 1] = forward_map(gf, q[n], p[n])
    return OrbitSegment(gf, q, p)


def jacobi_propagate(orbit: OrbitSegment, n: int, zeta_prev, zeta) -> np.ndarray:
    """One step of the discrete Jacobi recursion along ``orbit``.

    Solves ``t_b_{n-1} zeta_{n-1} + a_n zeta_n + b_n zeta_{n+1} = 0`` for
    ``zeta_{n+1}``; valid for 1 <= n <= L-2.  The q-components of any
    tangent-map cocycle orbit satisfy this identity.
    """
    zeta_prev = np.atleast_1d(np.asarray(zeta_prev, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    rhs = orbit.b_mat(n - 1).T @ zeta_prev + orbit.a_mat(n) @ zeta
    return np.linalg.solve(orbit.b_mat(n), -rhs)


# ---------------------------------------------------------------------------
# discrete action and Hessians

def action(gf: GeneratingFunction, q_points) -> float:
    """Total action ``sum_n Phi(q_n, q_{n+1})`` of an open configuration."""
    q_points = np.atleast_2d(np.asarray(q_points, dtype=float))
    return float(sum(gf.value(q_points[n], q_points[n + 1])
                     for n in range(q_points.shape[0] - 1)))


def euler_lagrange_residual(gf: GeneratingFunction, q_points) -> np.ndarray:
    """Stationarity defect ``d2 Phi(q_{n-1}, q_n) + d1 Phi(q_n, q_{n+1})``.

    Returns an (L-2, d) array over the interior points; zero rows exactly
    when the configuration is a critical point of the action with ends held.
    """
    q_points = np.atleast_2d(np.asarray(q_points, dtype=float))
    L, d = q_points.shape
    out = np.empty((L - 2, d))
    for n in range(1, L - 1):
        out[n - 1] = (gf.d2(q_points[n - 1], q_points[n])
                      + gf.d1(q_points[n], q_points[n + 1]))
    return out


@dataclass(frozen=True)
class BlockTridiagonal:
    """Symmetric block tridiagonal matrix: ``diag[j]`` on the diagonal,
    ``offdiag[j]`` coupling block row j to block row j+1 (as H[j, j+1])."""

    diag: np.ndarray     # (m, d, d)
    offdiag: np.ndarray  # (m-1, d, d)

    @property
    def n_blocks(self) -> int:
        return self.diag.shape[0]

    @property
    def block_dim(self) -> int:
        return self.diag.shape[1] if self.n_blocks else 0

    def to_dense(self) -> np.ndarray:
        """Dense form — for tests and small reports; the PD sweep never builds it."""
        m, d = self.n_blocks, self.block_dim
        out = np.zeros((m * d, m * d))
        for j in range(m):
            out[j * d:(j + 1) * d, j * d:(j + 1) * d] = self.diag[j]
        for j in range(m - 1):
            out[j * d:(j + 1) * d, (j + 1) * d:(j + 2) * d] = self.offdiag[j]
            out[(j + 1) * d:(j + 2) * d, j * d:(j + 1) * d] = self.offdiag[j].T
        return out

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.to_dense())


def hessian(gf: GeneratingFunction, q_points) -> BlockTridiagonal:
    """Action Hessian of an open configuration w.r.t. its interior points.

    Diagonal blocks are the Jacobi coefficients ``a_n`` for 1 <= n <= L-2,
    off-diagonal blocks the twist blocks ``b_n`` between consecutive
    interior points.  Positive definiteness of these matrices for every
    sub-segment is what "locally minimizing" means for an orbit.
    """
    q_points = np.atleast_2d(np.asarray(q_points, dtype=float))
    L, d = q_points.shape
    m = L - 2
    diag = np.empty((max(m, 0), d, d))
    offdiag = np.empty((max(m - 1, 0), d, d))
    for j, n in enumerate(range(1, L - 1)):
        diag[j] = gf.d11(q_points[n], q_points[n + 1]) + gf.d22(q_points[n - 1], q_points[n])
        if n <= L - 3:
            offdiag[j] = gf.d12(q_points[n], q_points[n + 1])
    return BlockTridiagonal(diag, offdiag)


def is_positive_definite(H: BlockTridiagonal, shift: float = 0.0) -> bool:
    """Strict positive definiteness via the block Cholesky sweep.

    Runs the Schur-complement recursion ``D_{j+1} = a_{j+1} - t_b_j D_j^{-1} b_j``
    and reports True iff every pivot block admits a Cholesky factor (after
    subtracting ``shift`` from the diagonal).  O(m d^3), no dense assembly.
    An empty matrix is vacuously positive definite.
    """
    m = H.n_blocks
    if m == 0:
        return True
    eye = np.eye(H.block_dim)
    pivot = H.diag[0] - shift * eye
    for j in range(m):
        try:
            np.linalg.cholesky(symmetrize(pivot))
        except np.linalg.LinAlgError:
            return False
        if j == m - 1:
            break
        b = H.offdiag[j]
        pivot = H.diag[j + 1] - shift * eye - b.T @ np.linalg.solve(symmetrize(pivot), b)
    return True


# ---------------------------------------------------------------------------
# minimizing periodic orbits

@dataclass(frozen=True)
class MinimalityCertificate:
    """Evidence that a periodic configuration is a locally minimizing orbit."""

    residual: float          # sup-norm of the action gradient
    action: float            # action of one period
    min_eig_periodic: float  # smallest eigenvalue of the periodic Hessian
    kernel_dim: int          # near-zero eigenvalues of the periodic Hessian
    n_periods_checked: int   # segment Hessian windows swept
    segment_pd: bool         # strict PD of the unrolled segment Hessian


@dataclass
class PeriodicConfiguration:
    """Configuration with ``q_{n+N} = q_n + rotation`` (one period stored)."""

    points: np.ndarray            # (N, d)
    rotation: np.ndarray          # (d,) integer vector
    certificate: MinimalityCertificate | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.rotation = np.atleast_1d(np.asarray(self.rotation))
        if self.rotation.shape != (self.points.shape[1],):
            raise ValueError("rotation vector length must match point dimension")

    @property
    def period(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def rotation_number(self) -> np.ndarray:
        return self.rotation / self.period

    def unrolled(self, n_periods: int) -> np.ndarray:
        """Lifted points over ``n_periods`` periods plus the closing point."""
        N, d = self.points.shape
        reps = [self.points + j * self.rotation for j in range(n_periods)]
        out = np.vstack(reps + [self.points[:1] + n_periods * self.rotation])
        return out

    def as_orbit_segment(self, gf: GeneratingFunction,
                         n_periods: int = 1) -> OrbitSegment:
        return OrbitSegment.from_configuration(gf, self.unrolled(n_periods))


def periodic_action(gf: GeneratingFunction, config: PeriodicConfiguration) -> float:
    """Action of one period, ``sum_{n<N} Phi(q_n, q_{n+1})`` with the wrap lift."""
    return action(gf, config.unrolled(1))


def periodic_gradient(gf: GeneratingFunction,
                      config: PeriodicConfiguration) -> np.ndarray:
    """Gradient of the periodic action w.r.t. the N stored points, shape (N, d)."""
    pts = config.unrolled(1)
    N, d = config.points.shape
    grad = np.zeros((N, d))
    for n in range(N):
        grad[n] += gf.d1(pts[n], pts[n + 1])
    for n in range(N):
        # the step ending at point (n+1) mod N
        grad[(n + 1) % N] += gf.d2(pts[n], pts[n + 1])
    return grad


def periodic_hessian(gf: GeneratingFunction,
                     config: PeriodicConfiguration) -> np.ndarray:
    """Dense Hessian of the periodic action (cyclic block tridiagonal).

    For N = 1 and N = 2 the wrap-around couplings land on top of each other,
    which the accumulation handles without special cases.
    """
    pts = config.unrolled(1)
    N, d = config.points.shape
    H = np.zeros((N * d, N * d))

    def blk(i, j, val):
        H[i * d:(i + 1) * d, j * d:(j + 1) * d] += val

    for n in range(N):
        nn = (n + 1) % N
        blk(n, n, gf.d11(pts[n], pts[n + 1]))
        blk(nn, nn, gf.d22(pts[n], pts[n + 1]))
        b = gf.d12(pts[n], pts[n + 1])
        blk(n, nn, b)
        blk(nn, n, b.T)
    return H


def _polish_critical_point(gf, points, rotation, residual_tol, max_iter=50):
    """Newton iterations on the periodic action gradient."""
    config = PeriodicConfiguration(points, rotation)
    g = periodic_gradient(gf, config)
    gnorm = np.abs(g).max()
    for _ in range(max_iter):
        if gnorm <= residual_tol:
            return config, gnorm
        H = periodic_hessian(gf, config)
        try:
            step = np.linalg.solve(H, -g.ravel())
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, -g.ravel(), rcond=None)[0]
        t = 1.0
        while True:
            trial = PeriodicConfiguration(
                config.points + t * step.reshape(config.points.shape), rotation)
            g_new = periodic_gradient(gf, trial)
            gnorm_new = np.abs(g_new).max()
            if gnorm_new <= (1.0 - 0.25 * t) * gnorm or gnorm_new <= residual_tol:
                break
            t *= 0.5
            if t < 1e-14:
                return config, gnorm  # stalled; caller decides
        config, g, gnorm = trial, g_new, gnorm_new
    return config, gnorm


def _certify(gf, config, residual, n_periods, psd_tol_scale=1e-9):
    H = periodic_hessian(gf, config)
    ev = np.linalg.eigvalsh(H)
    tol = psd_tol_scale * (1.0 + np.abs(H).max())
    min_eig = float(ev[0])
    if min_eig < -tol:
        raise SaddleDetectedError(
            f"periodic Hessian has eigenvalue {min_eig:.3e} < -{tol:.1e}")
    kernel_dim = int(np.sum(np.abs(ev) <= tol))
    segment = hessian(gf, config.unrolled(n_periods))
    segment_pd = is_positive_definite(segment)
    if not segment_pd:
        raise SaddleDetectedError(
            f"segment Hessian over {n_periods} periods is not positive definite")
    return MinimalityCertificate(
        residual=float(residual),
        action=periodic_action(gf, config),
        min_eig_periodic=min_eig,
        kernel_dim=kernel_dim,
        n_periods_checked=n_periods,
        segment_pd=segment_pd,
    )


def find_minimizing_periodic_orbit(gf: GeneratingFunction, rotation, period: int,
                                   init=None, residual_tol: float = 1e-10,
                                   n_certify_periods: int = 3,
                                   phases=(0.5, 0.25, 0.0, 0.75)) -> PeriodicConfiguration:
    """Locate a certified locally minimizing (rotation, period) orbit.

    Minimizes the periodic action with L-BFGS-B from affine initial
    configurations ``q_n = n * rotation / period + phase`` (several
    deterministic phases, because an unlucky start can sit exactly on the
    maximizing critical orbit where the gradient vanishes), polishes with
    Newton, certifies second-order minimality, and returns the certified
    configuration of least action.

    Parameters
    ----------
    rotation : integer vector (d,)
    period : int
        N >= 1; together they fix the rotation vector ``rotation / period``.
    init : (N, d) array, optional
        Start from this configuration only, skipping the phase sweep.
    residual_tol : float
        Sup-norm cap on the action gradient of the returned configuration.
    n_certify_periods : int
        How many unrolled periods the strict segment-Hessian check sweeps.

    Returns
    -------
    PeriodicConfiguration
        With its :class:`MinimalityCertificate` attached.

    Raises
    ------
    SaddleDetectedError
        If every candidate fails the second-order test.
    NonConvergenceError
        If no candidate reaches ``residual_tol``.
    """
    rotation = np.atleast_1d(np.asarray(rotation))
    if not np.issubdtype(rotation.dtype, np.integer):
        if not np.allclose(rotation, np.round(rotation)):
            raise ValueError("rotation must be an integer vector")
        rotation = np.round(rotation).astype(int)
    d = gf.dim
    if rotation.shape != (d,):
        raise ValueError(f"rotation must have shape ({d},)")
    N = int(period)
    if N < 1:
        raise ValueError("period must be >= 1")

    if init is not None:
        starts = [np.atleast_2d(np.asarray(init, dtype=float))]
    else:
        base = np.arange(N)[:, None] * (rotation / N)[None, :]
        starts = [base + phase for phase in phases]

    def fun_and_grad(x):
        config = PeriodicConfiguration(x.reshape(N, d), rotation)
        return (periodic_action(gf, config),
                periodic_gradient(gf, config).ravel())

    best = None
    last_error: Exception | None = None
    for start in starts:
        points = np.asarray(start, dtype=float)
        # Symmetric starts can descend straight into a reflection-symmetric
        # saddle (the anti-symmetric escape direction is never generated), so
        # on a failed certificate we kick along the softest eigenvector and
        # reoptimize before giving up on this start.
        for _ in range(3):
            opt = optimize.minimize(fun_and_grad, points.ravel(), jac=True,
                                    method="L-BFGS-B",
                                    options={"maxiter": 2000, "ftol": 1e-16,
                                             "gtol": 1e-10})
            config, residual = _polish_critical_point(
                gf, opt.x.reshape(N, d), rotation, residual_tol)
            if residual > residual_tol:
                last_error = NonConvergenceError(
                    f"gradient stalled at {residual:.3e} > {residual_tol:.1e}",
                    partial=config)
                break
            try:
                cert = _certify(gf, config, residual, n_certify_periods)
            except SaddleDetectedError as err:
                last_error = err
                H = periodic_hessian(gf, config)
                _, vecs = np.linalg.eigh(H)
                points = config.points + 0.05 * vecs[:, 0].reshape(N, d)
                continue
            candidate = replace_points_normalized(config, cert)
            if best is None or cert.action < best.certificate.action - 1e-13:
                best = candidate
            break
    if best is None:
        raise last_error if last_error is not None else NonConvergenceError(
            "no starting phase produced a certified minimizer")
    return best


def replace_points_normalized(config: PeriodicConfiguration,
                              cert: MinimalityCertificate) -> PeriodicConfiguration:
    """Translate by an integer vector so the first point lies in [0, 1)^d."""
    shift = np.floor(config.points[0])
    return PeriodicConfiguration(config.points - shift, config.rotation, cert)
