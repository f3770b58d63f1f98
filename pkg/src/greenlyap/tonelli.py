"""Tonelli Hamiltonian flows on T^d x R^d and their Green bundles.

The flow side mirrors the twist-map side with time in place of the step
index: vertical planes transported by the linearized flow converge to the
Green bundles ``U`` (from the past) and ``S`` (from the future), and
the gap ``U - S`` controls the positive exponents through ``H_pp``.

Numerical design note: every quantity along one orbit — base states, both
Green bundles, transported test vectors — is computed against a single
dense integrator solution (two legs glued at the anchor point).  Backward
transports integrate the variational equation *along the stored
interpolant* instead of re-integrating the base point backwards; on
hyperbolic stretches re-integration drift grows like e^{lambda T} and
would silently put ``U`` and ``S`` on different shadow orbits, wrecking
identity checks that mix them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConjugatePointError, DegenerateCocycleError, MonotonicityViolationError
from .lyap import as_weight_vector
from .potentials import TrigPolynomial, cosine_potential, zero_potential
from .symgeo import KAPPA_MAX, conorm, q_plus, symmetrize
from .errors import NoPositiveEigenvalueError

DEFAULT_RTOL = 1e-11
DEFAULT_ATOL = 1e-13


class TonelliHamiltonian:
    """Interface: smooth H(q, p), Z^d-periodic in q, uniformly convex in p."""

    dim: int

    def value(self, q, p) -> float:
        raise NotImplementedError

    def grad_q(self, q, p) -> np.ndarray:
        raise NotImplementedError

    def grad_p(self, q, p) -> np.ndarray:
        raise NotImplementedError

    def hess_pp(self, q, p) -> np.ndarray:
        raise NotImplementedError

    def hess_pq(self, q, p) -> np.ndarray:
        """Mixed block with entries ``d^2 H / dp_i dq_j``."""
        raise NotImplementedError

    def hess_qq(self, q, p) -> np.ndarray:
        raise NotImplementedError


class MechanicalHamiltonian(TonelliHamiltonian):
    """``H(q, p) = |p|^2 / 2 + V(q)`` for a periodic potential V."""

    def __init__(self, potential: TrigPolynomial):
        self.potential = potential
        self.dim = potential.dim

    def value(self, q, p) -> float:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return 0.5 * float(p @ p) + self.potential.value(q)

    def grad_q(self, q, p) -> np.ndarray:
        return self.potential.grad(q)

    def grad_p(self, q, p) -> np.ndarray:
        return np.array(np.atleast_1d(p), dtype=float)

    def hess_pp(self, q, p) -> np.ndarray:
        return np.eye(self.dim)

    def hess_pq(self, q, p) -> np.ndarray:
        return np.zeros((self.dim, self.dim))

    def hess_qq(self, q, p) -> np.ndarray:
        return self.potential.hess(q)

    def momentum_at_energy(self, q, energy: float) -> np.ndarray:
        """Positive momentum with ``H(q, p) = energy`` (d = 1 mechanical)."""
        if self.dim != 1:
            raise ValueError("momentum_at_energy is defined for d = 1")
        gap = energy - self.potential.value(q)
        if gap < 0:
            raise ValueError(f"energy {energy} below potential at q={q}")
        return np.array([np.sqrt(2.0 * gap)])

    def __repr__(self):
        return f"MechanicalHamiltonian({self.potential!r})"


def pendulum(stiffness: float = 1.0) -> MechanicalHamiltonian:
    """``H = p^2/2 + (stiffness / 4 pi^2) cos(2 pi q)``.

    The hilltop equilibrium (q, p) = (0, 0) maximizes the potential, so it
    is a minimizing orbit of the Lagrangian action; its linearization has
    exponents ``+-sqrt(stiffness)``.  The separatrix energy is ``V(0)``.
    """
    return MechanicalHamiltonian(cosine_potential(stiffness, dim=1))


def flat_torus(dim: int = 1) -> MechanicalHamiltonian:
    """Geodesic flow of the flat metric: every orbit minimizes, all exponents 0."""
    return MechanicalHamiltonian(zero_potential(dim))


def separatrix_energy(ham: MechanicalHamiltonian, q_top=None) -> float:
    """Energy of the hilltop equilibrium (defaults to q = 0)."""
    d = ham.dim
    q = np.zeros(d) if q_top is None else np.atleast_1d(q_top)
    return ham.value(q, np.zeros(d))


def validate_hamiltonian(ham: TonelliHamiltonian, n_samples: int = 25,
                         seed: int = 0, fd_tol: float = 1e-5,
                         box: float = 1.5, p_box: float = 2.0) -> dict:
    """Finite-difference / structure report analogous to the twist-map one.

    Checks gradients against central differences of ``value``, Hessian
    blocks against differences of the gradients, symmetry of ``hess_pp``
    and ``hess_qq``, integer periodicity in q, and records the uniform
    convexity margin ``min eig hess_pp`` over the samples.
    """
    rng = np.random.default_rng(seed)
    d = ham.dim
    h = 1e-6
    max_fd = per_defect = sym_defect = 0.0
    convexity = np.inf

    def fd(fun, x):
        g = np.zeros(d)
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
        return g

    def fd_jac(fun, x):
        return np.column_stack([
            (fun(x + h * e) - fun(x - h * e)) / (2 * h)
            for e in np.eye(d)])

    for _ in range(n_samples):
        q = rng.uniform(-box, box, size=d)
        p = rng.uniform(-p_box, p_box, size=d)
        scale = 1.0 + abs(ham.value(q, p))
        max_fd = max(max_fd,
                     np.abs(fd(lambda x: ham.value(x, p), q) - ham.grad_q(q, p)).max() / scale,
                     np.abs(fd(lambda x: ham.value(q, x), p) - ham.grad_p(q, p)).max() / scale)
        jscale = 1.0 + max(np.abs(ham.hess_pp(q, p)).max(),
                           np.abs(ham.hess_qq(q, p)).max(),
                           np.abs(ham.hess_pq(q, p)).max())
        max_fd = max(
            max_fd,
            np.abs(fd_jac(lambda x: ham.grad_p(q, x), p) - ham.hess_pp(q, p)).max() / jscale,
            np.abs(fd_jac(lambda x: ham.grad_q(x, p), q) - ham.hess_qq(q, p)).max() / jscale,
            # rows i of hess_pq are d/dq of grad_p_i
            np.abs(fd_jac(lambda x: ham.grad_p(x, p), q) - ham.hess_pq(q, p)).max() / jscale,
        )
        k = rng.integers(-3, 4, size=d)
        per_defect = max(per_defect, abs(ham.value(q + k, p) - ham.value(q, p)) / scale)
        sym_defect = max(sym_defect,
                         np.abs(ham.hess_pp(q, p) - ham.hess_pp(q, p).T).max(),
                         np.abs(ham.hess_qq(q, p) - ham.hess_qq(q, p).T).max())
        convexity = min(convexity, float(np.linalg.eigvalsh(ham.hess_pp(q, p))[0]))

    passed = (max_fd <= fd_tol and per_defect <= 1e-9 and sym_defect <= 1e-9
              and convexity > 0)
    return {
        "passed": bool(passed),
        "max_fd_error": float(max_fd),
        "periodicity_defect": float(per_defect),
        "symmetry_defect": float(sym_defect),
        "convexity_margin": float(convexity),
    }


# ---------------------------------------------------------------------------
# integration machinery

def hamilton_rhs(ham: TonelliHamiltonian):
    d = ham.dim

    def rhs(t, y):
        q, p = y[:d], y[d:]
        return np.concatenate([ham.grad_p(q, p), -ham.grad_q(q, p)])

    return rhs


def variational_matrix(ham: TonelliHamiltonian, q, p) -> np.ndarray:
    """Coefficient matrix of the linearized flow at (q, p).

    With ``A = hess_pq``, ``B = hess_pp``, ``C = hess_qq``::

        d/dt (dq, dp) = [[A, B], [-C, -A^T]] (dq, dp)
    """
    A = ham.hess_pq(q, p)
    B = ham.hess_pp(q, p)
    C = ham.hess_qq(q, p)
    return np.block([[A, B], [-C, -A.T]])


@dataclass
class OrbitPath:
    """Dense flow trajectory through an anchor point, glued from two legs.

    Both legs start exactly at the anchor, so the path is continuous at
    t = 0 by construction.  ``state(t)`` evaluates the stored interpolants;
    nothing is ever re-integrated.
    """

    ham: TonelliHamiltonian
    t_min: float
    t_max: float
    _legs: list = field(repr=False)

    @classmethod
    def from_point(cls, ham: TonelliHamiltonian, q0, p0, t_back: float,
                   t_fwd: float, rtol: float = DEFAULT_RTOL,
                   atol: float = DEFAULT_ATOL) -> "OrbitPath":
        """Integrate ``t_back`` units into the past and ``t_fwd`` into the future."""
        if t_back < 0 or t_fwd < 0 or (t_back == 0 and t_fwd == 0):
            raise ValueError("need nonnegative spans with at least one positive")
        q0 = np.atleast_1d(np.asarray(q0, dtype=float))
        p0 = np.atleast_1d(np.asarray(p0, dtype=float))
        y0 = np.concatenate([q0, p0])
        rhs = hamilton_rhs(ham)
        legs = []
        if t_back > 0:
            res = solve_ivp(rhs, (0.0, -t_back), y0, method="DOP853",
                            dense_output=True, rtol=rtol, atol=atol)
            if not res.success:
                raise RuntimeError(f"backward integration failed: {res.message}")
            legs.append((-t_back, 0.0, res.sol))
        if t_fwd > 0:
            res = solve_ivp(rhs, (0.0, t_fwd), y0, method="DOP853",
                            dense_output=True, rtol=rtol, atol=atol)
            if not res.success:
                raise RuntimeError(f"forward integration failed: {res.message}")
            legs.append((0.0, t_fwd, res.sol))
        return cls(ham, -t_back, t_fwd, legs)

    def state(self, t: float) -> np.ndarray:
        if not (self.t_min - 1e-9 <= t <= self.t_max + 1e-9):
            raise ValueError(f"t={t} outside path range [{self.t_min}, {self.t_max}]")
        for lo, hi, sol in self._legs:
            if lo <= t <= hi:
                return sol(t)
        # roundoff just outside a leg boundary
        lo, hi, sol = min(self._legs,
                          key=lambda leg: min(abs(t - leg[0]), abs(t - leg[1])))
        return sol(np.clip(t, lo, hi))

    def energy_drift(self, n: int = 200) -> float:
        """Max |H - H(anchor)| over a uniform t-grid (integration QC)."""
        ts = np.linspace(self.t_min, self.t_max, n)
        d = self.ham.dim
        e0 = None
        worst = 0.0
        for t in ts:
            y = self.state(t)
            e = self.ham.value(y[:d], y[d:])
            if e0 is None:
                e0 = e
            worst = max(worst, abs(e - e0))
        return worst


@dataclass(frozen=True)
class FrameTransport:
    """Frames transported along a path, with QR renormalization bookkeeping."""

    record_times: np.ndarray
    frames: np.ndarray            # (m, 2d, k) at the record times
    log_times: np.ndarray         # elapsed transport time at each renorm
    log_sums: np.ndarray          # (n_renorms + 1, k) cumulative log |diag R|


def transport_frame(ham: TonelliHamiltonian, path: OrbitPath, t_from: float,
                    t_to: float, frame0, renorm_every: float = 1.0,
                    record_times=(), rtol: float = DEFAULT_RTOL,
                    atol: float = DEFAULT_ATOL) -> FrameTransport:
    """Transport a frame by the linearized flow along a stored path.

    Integrates ``F' = L(x(t)) F`` from ``t_from`` to ``t_to`` (either
    direction), QR-renormalizing every ``renorm_every`` time units and
    accumulating ``log |diag R|``.  Frames are recorded at the requested
    ``record_times`` (post-renormalization when the two coincide).
    """
    frame = np.atleast_2d(np.asarray(frame0, dtype=float))
    if frame.shape[0] != 2 * ham.dim:
        frame = frame.T
    if frame.shape[0] != 2 * ham.dim:
        raise ValueError("frame0 must have 2d rows")
    k = frame.shape[1]
    d = ham.dim
    span = t_to - t_from
    if span == 0:
        raise ValueError("empty transport span")
    sgn = np.sign(span)
    record_times = np.asarray(sorted(record_times, key=lambda t: sgn * t), dtype=float)
    lo_t, hi_t = min(t_from, t_to), max(t_from, t_to)
    if record_times.size and (record_times.min() < lo_t - 1e-12
                              or record_times.max() > hi_t + 1e-12):
        raise ValueError("record_times must lie within the transport span")

    # renormalization boundaries cut the span into integration segments; a
    # single dense solve covers each segment and the record times inside it
    n_renorm = int(np.ceil(abs(span) / renorm_every - 1e-12))
    renorms = t_from + sgn * renorm_every * np.arange(1, n_renorm + 1)
    renorms[-1] = t_to

    def rhs(t, y):
        x = path.state(t)
        L = variational_matrix(ham, x[:d], x[d:])
        return (L @ y.reshape(2 * d, k)).ravel()

    logsum = np.zeros(k)
    log_times = [0.0]
    log_sums = [logsum.copy()]
    rec_frames = {}

    def capture(t, current):
        for tr in record_times:
            if abs(tr - t) <= 1e-12 and np.round(tr, 12) not in rec_frames:
                rec_frames[np.round(tr, 12)] = current.copy()

    t_cur = t_from
    capture(t_cur, frame)
    for t_next in renorms:
        if abs(t_next - t_cur) > 1e-15:
            res = solve_ivp(rhs, (t_cur, t_next), frame.ravel(), method="DOP853",
                            dense_output=True, rtol=rtol, atol=atol)
            if not res.success:
                raise RuntimeError(f"frame transport failed: {res.message}")
            for tr in record_times:
                if (tr - t_cur) * sgn > 1e-12 and (t_next - tr) * sgn > 1e-12:
                    rec_frames[np.round(tr, 12)] = res.sol(tr).reshape(2 * d, k)
            frame = res.y[:, -1].reshape(2 * d, k)
        t_cur = t_next
        frame, r = np.linalg.qr(frame)
        diag = np.diag(r)
        if not np.all(np.isfinite(diag)) or np.any(np.abs(diag) < 1e-250):
            raise DegenerateCocycleError("transported frame collapsed")
        frame = frame * np.sign(diag)
        logsum = logsum + np.log(np.abs(diag))
        log_times.append(abs(t_cur - t_from))
        log_sums.append(logsum.copy())
        # a record on a boundary sees the renormalized frame (same span)
        capture(t_cur, frame)
    frames = np.stack([rec_frames[np.round(tr, 12)] for tr in record_times]) \
        if record_times.size else np.zeros((0, 2 * d, k))
    return FrameTransport(record_times, frames, np.asarray(log_times),
                          np.asarray(log_sums))


def vertical_frame_flow(dim: int) -> np.ndarray:
    cols = np.zeros((2 * dim, dim))
    cols[dim:, :] = np.eye(dim)
    return cols


def graph_slope(frame: np.ndarray, kappa_max: float = KAPPA_MAX) -> np.ndarray:
    """Symmetric slope S with ``frame`` spanning the graph of ``dp = S dq``."""
    d = frame.shape[0] // 2
    X, Y = frame[:d], frame[d:]
    kappa = np.linalg.cond(X)
    if not np.isfinite(kappa) or kappa > kappa_max:
        raise ConjugatePointError(
            f"transported plane is vertical-degenerate: cond {kappa:.3e}")
    return symmetrize(np.linalg.solve(X.T, Y.T).T)


def finite_time_graph(ham: TonelliHamiltonian, q0, p0, t: float,
                      rtol: float = DEFAULT_RTOL,
                      atol: float = DEFAULT_ATOL) -> np.ndarray:
    """Slope of ``dphi_t(vertical at phi_{-t} x)`` at x (t < 0: backward graph)."""
    if t == 0:
        raise ValueError("finite-time graph needs t != 0")
    back, fwd = (abs(t), 0.0) if t > 0 else (0.0, abs(t))
    path = OrbitPath.from_point(ham, q0, p0, back, fwd, rtol=rtol, atol=atol)
    tr = transport_frame(ham, path, -t if t > 0 else abs(t), 0.0,
                         vertical_frame_flow(ham.dim),
                         record_times=[0.0], rtol=rtol, atol=atol)
    return graph_slope(tr.frames[0])


# ---------------------------------------------------------------------------
# Green bundles along flow orbits

def _check_flow_monotone(coarse, fine, direction: str):
    """coarse = shorter-time graph, fine = longer-time graph."""
    diff = coarse - fine if direction == "forward" else fine - coarse
    tol = 1e-8 * (1.0 + np.abs(coarse).max())
    ev_min = float(np.linalg.eigvalsh(symmetrize(diff))[0])
    if ev_min < -tol:
        raise MonotonicityViolationError(
            f"{direction} finite-time graphs not monotone: min eig {ev_min:.3e}")


@dataclass(frozen=True)
class GreenFlowPair:
    """Green bundle slopes at a single flow point, with depth diagnostics."""

    q: np.ndarray
    p: np.ndarray
    U: np.ndarray
    S: np.ndarray
    U_half: np.ndarray
    S_half: np.ndarray
    T: float
    convergence_estimate: float

    def gap(self) -> np.ndarray:
        return self.U - self.S


def compute_green_bundles_flow(ham: TonelliHamiltonian, q0, p0, T: float,
                               renorm_every: float = 1.0,
                               rtol: float = DEFAULT_RTOL,
                               atol: float = DEFAULT_ATOL) -> GreenFlowPair:
    """Green bundles at one point by depth-T vertical transport.

    ``U`` is the slope of the vertical transported from ``phi_{-T} x``,
    ``S`` from ``phi_{+T} x`` backwards; half-depth transports give the
    convergence estimate ``max(||U - U_{T/2}||, ||S - S_{T/2}||)`` and a
    monotonicity certificate (forward graphs must decrease, backward ones
    increase).
    """
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    path = OrbitPath.from_point(ham, q0, p0, T, T, rtol=rtol, atol=atol)
    V = vertical_frame_flow(ham.dim)

    def slope(t_start):
        tr = transport_frame(ham, path, t_start, 0.0, V,
                             renorm_every=renorm_every,
                             record_times=[0.0], rtol=rtol, atol=atol)
        return graph_slope(tr.frames[0])

    U, U_half = slope(-T), slope(-T / 2)
    S, S_half = slope(T), slope(T / 2)
    _check_flow_monotone(U_half, U, "forward")
    _check_flow_monotone(S_half, S, "backward")
    conv = max(np.abs(U - U_half).max(), np.abs(S - S_half).max())
    return GreenFlowPair(q0, p0, U, S, U_half, S_half, float(T), float(conv))


@dataclass
class GreenOrbitData:
    """Green bundles sampled along one flow orbit (shared dense path)."""

    ham: TonelliHamiltonian
    times: np.ndarray
    q: np.ndarray                 # (n, d)
    p: np.ndarray
    U: np.ndarray                 # (n, d, d)
    S: np.ndarray
    T_conv: float
    conv_forward: float
    conv_backward: float
    path: OrbitPath = field(repr=False, default=None)

    def __len__(self):
        return self.times.size

    def gap(self) -> np.ndarray:
        return self.U - self.S

    def hess_pp_path(self) -> np.ndarray:
        return np.stack([self.ham.hess_pp(self.q[i], self.p[i])
                         for i in range(len(self))])


def green_bundles_along_orbit(ham: TonelliHamiltonian, q0, p0, t_samples,
                              T_conv: float, renorm_every: float = 1.0,
                              rtol: float = DEFAULT_RTOL,
                              atol: float = DEFAULT_ATOL,
                              convergence_check: bool = True) -> GreenOrbitData:
    """Sample ``U`` and ``S`` at given times along the orbit of (q0, p0).

    One dense path covers ``[-T_conv, t_max + T_conv]``; the vertical is
    transported once from each end, recording at every sample time, so all
    reported slopes refer to the same numerical orbit.  With
    ``convergence_check`` half-depth transports bound the finite-T error.
    """
    t_samples = np.asarray(t_samples, dtype=float)
    if t_samples.ndim != 1 or t_samples.size == 0:
        raise ValueError("t_samples must be a nonempty 1d array")
    if t_samples.size > 1 and np.any(np.diff(t_samples) <= 0):
        raise ValueError("t_samples must be strictly increasing")
    if t_samples[0] < 0:
        raise ValueError("t_samples must start at or after 0")
    t_max = float(t_samples[-1])
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    path = OrbitPath.from_point(ham, q0, p0, T_conv, t_max + T_conv,
                                rtol=rtol, atol=atol)
    V = vertical_frame_flow(ham.dim)
    d = ham.dim

    fwd = transport_frame(ham, path, -T_conv, t_max if t_max > 0 else 0.0, V,
                          renorm_every=renorm_every, record_times=t_samples,
                          rtol=rtol, atol=atol)
    bwd = transport_frame(ham, path, t_max + T_conv, float(t_samples[0]), V,
                          renorm_every=renorm_every, record_times=t_samples,
                          rtol=rtol, atol=atol)
    U = np.stack([graph_slope(f) for f in fwd.frames])
    bwd_lookup = {np.round(t, 12): f for t, f in zip(bwd.record_times, bwd.frames)}
    S = np.stack([graph_slope(bwd_lookup[np.round(t, 12)]) for t in t_samples])

    conv_f = conv_b = np.nan
    if convergence_check:
        fwd_h = transport_frame(ham, path, -T_conv / 2, t_max if t_max > 0 else 0.0,
                                V, renorm_every=renorm_every,
                                record_times=t_samples, rtol=rtol, atol=atol)
        bwd_h = transport_frame(ham, path, t_max + T_conv / 2, float(t_samples[0]),
                                V, renorm_every=renorm_every,
                                record_times=t_samples, rtol=rtol, atol=atol)
        U_h = np.stack([graph_slope(f) for f in fwd_h.frames])
        bwd_h_lookup = {np.round(t, 12): f for t, f in zip(bwd_h.record_times, bwd_h.frames)}
        S_h = np.stack([graph_slope(bwd_h_lookup[np.round(t, 12)]) for t in t_samples])
        for i in range(t_samples.size):
            _check_flow_monotone(U_h[i], U[i], "forward")
            _check_flow_monotone(S_h[i], S[i], "backward")
        conv_f = float(np.abs(U - U_h).max())
        conv_b = float(np.abs(S - S_h).max())

    states = np.stack([path.state(t) for t in t_samples])
    return GreenOrbitData(ham, t_samples, states[:, :d], states[:, d:],
                          U, S, float(T_conv), conv_f, conv_b, path)


# ---------------------------------------------------------------------------
# residuals and identity checks

def riccati_residual(ham: TonelliHamiltonian, times, q, p, G) -> np.ndarray:
    """Residual of ``G' + G B G + G A + A^T G + C = 0`` on a uniform grid.

    ``G'`` comes from a 5-point central stencil, so the two samples at each
    end are not reported; the returned array has ``len(times) - 4`` rows of
    max-norm residuals.
    """
    times = np.asarray(times, dtype=float)
    G = np.asarray(G, dtype=float)
    n = times.size
    if n < 5:
        raise ValueError("need at least 5 uniform samples")
    dt = times[1] - times[0]
    if np.abs(np.diff(times) - dt).max() > 1e-9 * (1 + abs(dt)):
        raise ValueError("riccati_residual needs a uniform time grid")
    out = np.empty(n - 4)
    for i in range(2, n - 2):
        Gdot = (G[i - 2] - 8 * G[i - 1] + 8 * G[i + 1] - G[i + 2]) / (12 * dt)
        A = ham.hess_pq(q[i], p[i])
        B = ham.hess_pp(q[i], p[i])
        C = ham.hess_qq(q[i], p[i])
        R = Gdot + G[i] @ B @ G[i] + G[i] @ A + A.T @ G[i] + C
        out[i - 2] = np.abs(R).max()
    return out


@dataclass(frozen=True)
class Lemma9Report:
    """Finite-difference check of the height derivative identity.

    Along an orbit, with ``dx_U(t)`` a linearized-flow solution in the
    ``U`` graph and ``dx_S(t)`` its companion in the ``S`` graph with the
    same configuration component, the pairing ``omega(dx_S, dx_U) =
    dq . (U - S) dq`` must grow at rate ``w . H_pp w`` for
    ``w = (U - S) dq``.  ``lhs`` holds the stencil derivative, ``rhs`` the
    algebraic rate, at ``times``.
    """

    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    max_abs_err: float
    max_rel_err: float
    min_lhs: float


def lemma9_check(ham: TonelliHamiltonian, q0, p0, t_total: float,
                 dt: float = 1e-3, T_conv: float = 12.0,
                 dq0=None, window: float = 1.0,
                 rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                 renorm_every: float = 1.0) -> Lemma9Report:
    """Numerically verify the derivative identity along one minimizing orbit.

    The test vector is renormalized at ``window`` boundaries to keep both
    sides O(1); stencils never straddle a renormalization, so the check is
    exact up to O(dt^4) and transport error.
    """
    n = int(round(t_total / dt))
    t_samples = np.arange(n + 1) * dt
    data = green_bundles_along_orbit(ham, q0, p0, t_samples, T_conv,
                                     renorm_every=renorm_every,
                                     rtol=rtol, atol=atol,
                                     convergence_check=False)
    d = ham.dim
    if dq0 is None:
        dq0 = np.zeros(d)
        dq0[0] = 1.0
    dq0 = np.atleast_1d(np.asarray(dq0, dtype=float))
    v0 = np.concatenate([dq0, data.U[0] @ dq0])
    v0 = v0 / np.linalg.norm(v0)
    tr = transport_frame(ham, data.path, 0.0, t_total, v0[:, None],
                         renorm_every=window, record_times=t_samples,
                         rtol=rtol, atol=atol)
    vecs = tr.frames[:, :, 0]

    h = np.empty(n + 1)
    rate = np.empty(n + 1)
    for i in range(n + 1):
        dq = vecs[i, :d]
        gap = data.U[i] - data.S[i]
        h[i] = dq @ gap @ dq
        w = gap @ dq
        rate[i] = w @ ham.hess_pp(data.q[i], data.p[i]) @ w

    # window boundaries (renormalization events) partition the samples; the
    # sample AT a right boundary holds the renormalized (rescaled) vector,
    # so stencils must stay strictly left of it — the left-boundary sample
    # is the rescaled vector this window actually continues, and is fine
    per_window = max(1, int(round(window / dt)))
    keep, lhs_list, rhs_list = [], [], []
    for i in range(2, n - 1):
        w_id = i // per_window
        lo, hi = w_id * per_window, min((w_id + 1) * per_window, n)
        if i - 2 < lo or i + 2 >= hi:
            continue
        lhs_list.append((h[i - 2] - 8 * h[i - 1] + 8 * h[i + 1] - h[i + 2]) / (12 * dt))
        rhs_list.append(rate[i])
        keep.append(t_samples[i])
    lhs = np.asarray(lhs_list)
    rhs = np.asarray(rhs_list)
    err = np.abs(lhs - rhs)
    rel = err / (1.0 + np.abs(rhs))
    return Lemma9Report(np.asarray(keep), lhs, rhs, float(err.max()),
                        float(rel.max()), float(lhs.min()))


# ---------------------------------------------------------------------------
# exponent formulas (flow side)

def theorem1_sum(measure, data: GreenOrbitData) -> float:
    """Exact positive-exponent sum ``(1/2) int tr(H_pp (U - S)) d mu``."""
    w = as_weight_vector(measure, len(data))
    B = data.hess_pp_path()
    vals = np.array([np.trace(B[i] @ (data.U[i] - data.S[i]))
                     for i in range(len(data))])
    return float(0.5 * np.sum(w * vals))


@dataclass(frozen=True)
class Theorem3Result:
    """Flow-side lower bound for the smallest positive exponent."""

    bound: float
    per_point_qplus: np.ndarray
    per_point_conorm_hpp: np.ndarray
    n_degenerate: int


def theorem3_bound(measure, data: GreenOrbitData) -> Theorem3Result:
    """Lower bound ``(1/2) int m(H_pp) q_+(U - S) d mu``.

    Points where the Green gap has no positive eigenvalue contribute
    nothing (counted in ``n_degenerate``); if that happens everywhere the
    hypothesis of a positive exponent has no support and the error from
    :func:`greenlyap.symgeo.q_plus` propagates.
    """
    w = as_weight_vector(measure, len(data))
    n = len(data)
    per_q = np.zeros(n)
    per_m = np.zeros(n)
    n_degenerate = 0
    total = 0.0
    for i in range(n):
        per_m[i] = conorm(data.ham.hess_pp(data.q[i], data.p[i]))
        gap = symmetrize(data.U[i] - data.S[i])
        try:
            per_q[i] = q_plus(gap)
        except NoPositiveEigenvalueError:
            n_degenerate += 1
            continue
        total += w[i] * 0.5 * per_m[i] * per_q[i]
    if n_degenerate == n:
        raise NoPositiveEigenvalueError(
            "Green gap degenerate at every sample; no positive exponent to bound")
    return Theorem3Result(float(total), per_q, per_m, n_degenerate)
