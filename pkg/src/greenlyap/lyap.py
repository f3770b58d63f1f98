"""Lyapunov spectra, Oseledets subspace estimates and orbit measures.

The map-side estimator is the classical QR (Benettin) scheme on a
symplectic cocycle; the flow-side version rides on the variational
transport from :mod:`greenlyap.tonelli`.  Exponent estimates discard a
burn-in prefix by default: the seed frame's alignment transient enters the
cumulative logs as an O(1) offset, so the plain average converges only
like 1/n while the tail average is limited by the cocycle itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCocycleError, NoGapError, NoPositiveExponentError
from .symgeo import SympBlockMat, subspace_distance


def default_zero_threshold(span: float) -> float:
    """Heuristic |exponent| scale below which it is treated as zero.

    CLT-flavoured: fluctuations of a Birkhoff average over ``span`` steps
    (or time units) scale like 1/sqrt(span); the floor keeps very long
    runs from classifying genuinely tiny exponents as nonzero.
    """
    return max(5.0 / np.sqrt(span), 1e-4)


@dataclass(frozen=True)
class WeightedOrbitMeasure:
    """Probability weights attached to the points of a finite orbit sample."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("measure needs at least one atom")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must not all vanish")
        object.__setattr__(self, "weights", w / total)

    @classmethod
    def uniform(cls, n: int) -> "WeightedOrbitMeasure":
        return cls(np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return self.weights.size


def as_weight_vector(measure, n: int) -> np.ndarray:
    """Accept a WeightedOrbitMeasure or a bare weight array of length n."""
    w = np.asarray(getattr(measure, "weights", measure), dtype=float).ravel()
    if w.shape != (n,):
        raise ValueError(f"measure has {w.size} atoms, data has {n} points")
    return w / w.sum()


def birkhoff_average(measure, values) -> float | np.ndarray:
    """Weighted average of per-point observable values (scalar or array rows)."""
    values = np.asarray(values, dtype=float)
    w = as_weight_vector(measure, values.shape[0])
    return np.tensordot(w, values, axes=(0, 0))


# ---------------------------------------------------------------------------
# spectra

@dataclass(frozen=True)
class LyapunovSpectrum:
    """QR estimate of a full Lyapunov spectrum.

    ``exponents`` are the burn-in-discarded (tail) estimates sorted in
    decreasing order; ``exponents_full`` keeps the plain 0-to-end average
    for convergence studies.  ``log_history`` holds the cumulative
    log-stretches at each renormalization event (frame order, unsorted),
    ``log_times`` the corresponding step counts or times.
    """

    exponents: np.ndarray
    exponents_full: np.ndarray
    span: float
    burn_in: float
    zero_threshold: float
    log_times: np.ndarray = field(repr=False)
    log_history: np.ndarray = field(repr=False)

    @property
    def n_exponents(self) -> int:
        return self.exponents.size

    def pairing_defect(self) -> float:
        """Max violation of the symplectic pairing ``lambda_i = -lambda_{2d+1-i}``."""
        return float(np.abs(self.exponents + self.exponents[::-1]).max())

    def running_tail(self) -> np.ndarray:
        """Tail-average estimates as a function of span, for convergence plots."""
        mask = self.log_times > self.burn_in
        t = self.log_times[mask]
        base = np.interp(self.burn_in, self.log_times, np.arange(len(self.log_times)))
        i0 = int(np.floor(base))
        t0, logs0 = self.log_times[i0], self.log_history[i0]
        return (self.log_history[mask] - logs0) / (t - t0)[:, None]


def sum_positive(spectrum: LyapunovSpectrum) -> float:
    """Sum of exponents above the zero threshold (0 if there are none)."""
    pos = spectrum.exponents[spectrum.exponents > spectrum.zero_threshold]
    return float(pos.sum())


def smallest_positive(spectrum: LyapunovSpectrum) -> float:
    """Smallest exponent above the zero threshold.

    Raises
    ------
    NoPositiveExponentError
        If every exponent is below the threshold — callers use this to
        reject hypotheses that need a positive exponent.
    """
    pos = spectrum.exponents[spectrum.exponents > spectrum.zero_threshold]
    if pos.size == 0:
        raise NoPositiveExponentError(
            f"no exponent above {spectrum.zero_threshold:.3e} "
            f"(largest is {spectrum.exponents[0]:.3e})")
    return float(pos.min())


def _haar_frame(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, k)))
    return q * np.sign(np.diag(r))


def _cocycle_getter(cocycle):
    """Normalize the cocycle argument to (getter, matrix_size)."""
    if callable(cocycle) and not isinstance(cocycle, (list, tuple)):
        probe = np.asarray(_to_matrix(cocycle(0)), dtype=float)
        return lambda n: _to_matrix(cocycle(n)), probe.shape[0]
    mats = [np.asarray(_to_matrix(m), dtype=float) for m in cocycle]
    if not mats:
        raise ValueError("empty cocycle")
    size = mats[0].shape[0]
    for m in mats:
        if m.shape != (size, size):
            raise ValueError("cocycle matrices must share one square shape")
    # finite sequences are cycled, the natural reading for periodic orbits
    return lambda n: mats[n % len(mats)], size


def _to_matrix(m):
    return m.as_matrix() if isinstance(m, SympBlockMat) else m


def lyapunov_spectrum_map(cocycle, n_steps: int, renorm_every: int = 1,
                          seed: int | None = None, frame0=None,
                          burn_in: int | None = None,
                          zero_threshold: float | None = None) -> LyapunovSpectrum:
    """Full Lyapunov spectrum of a matrix cocycle by QR renormalization.

    Parameters
    ----------
    cocycle : sequence of (2d, 2d) arrays / SympBlockMat, or callable n -> matrix
        Finite sequences are cycled (periodic-orbit cocycles).
    n_steps : int
        Total number of cocycle steps.
    renorm_every : int
        QR renormalization cadence; 1 is the robust default for maps.
    seed : int, optional
        Seed for a Haar-random start frame; identity frame when omitted.
    frame0 : (2d, 2d) array, optional
        Explicit start frame (overrides ``seed``).
    burn_in : int, optional
        Steps discarded from the front of the averages; default n_steps // 10.
    zero_threshold : float, optional
        Defaults to :func:`default_zero_threshold`.

    Raises
    ------
    DegenerateCocycleError
        On a numerically singular QR factor (non-invertible cocycle step
        or overflow from too-sparse renormalization).
    """
    get, size = _cocycle_getter(cocycle)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if burn_in is None:
        burn_in = n_steps // 10
    if not 0 <= burn_in < n_steps:
        raise ValueError("burn_in must be in [0, n_steps)")
    if zero_threshold is None:
        zero_threshold = default_zero_threshold(n_steps)

    if frame0 is not None:
        Q = np.asarray(frame0, dtype=float)
    elif seed is not None:
        Q = _haar_frame(np.random.default_rng(seed), size, size)
    else:
        Q = np.eye(size)

    logsum = np.zeros(size)
    log_times = [0.0]
    log_history = [logsum.copy()]
    for n in range(n_steps):
        Q = get(n) @ Q
        if (n + 1) % renorm_every == 0 or n == n_steps - 1:
            Q, R = np.linalg.qr(Q)
            diag = np.diag(R)
            if not np.all(np.isfinite(diag)) or np.any(np.abs(diag) < 1e-250):
                raise DegenerateCocycleError(
                    f"QR factor collapsed at step {n + 1}: |diag| min = "
                    f"{np.abs(diag).min():.3e}")
            Q = Q * np.sign(diag)
            logsum = logsum + np.log(np.abs(diag))
            log_times.append(float(n + 1))
            log_history.append(logsum.copy())

    log_times = np.asarray(log_times)
    log_history = np.asarray(log_history)
    exponents_full = np.sort(logsum / n_steps)[::-1]
    i0 = int(np.searchsorted(log_times, burn_in, side="left"))
    t0, logs0 = log_times[i0], log_history[i0]
    if n_steps - t0 <= 0:
        raise ValueError("burn_in leaves no tail to average")
    tail = np.sort((logsum - logs0) / (n_steps - t0))[::-1]
    return LyapunovSpectrum(tail, exponents_full, float(n_steps), float(t0),
                            float(zero_threshold), log_times, log_history)


def lyapunov_spectrum_flow(ham, q0, p0, total_time: float,
                           renorm_every: float = 1.0,
                           burn_in_time: float | None = None,
                           zero_threshold: float | None = None,
                           rtol: float = 1e-11, atol: float = 1e-13) -> LyapunovSpectrum:
    """Lyapunov spectrum (per unit time) of a Tonelli Hamiltonian flow orbit.

    Integrates the orbit once with a dense interpolant and transports the
    full tangent frame along it with periodic QR renormalization; see
    :func:`lyapunov_spectrum_map` for the estimator conventions.
    """
    from .tonelli import OrbitPath, transport_frame  # deferred: avoids module cycle

    if total_time <= 0:
        raise ValueError("total_time must be positive")
    if burn_in_time is None:
        burn_in_time = min(0.5 * total_time, max(10.0, 0.1 * total_time))
    if not 0 <= burn_in_time < total_time:
        raise ValueError("burn_in_time must be in [0, total_time)")
    if zero_threshold is None:
        zero_threshold = default_zero_threshold(total_time)

    path = OrbitPath.from_point(ham, q0, p0, t_back=0.0, t_fwd=total_time,
                                rtol=rtol, atol=atol)
    n = 2 * ham.dim
    transport = transport_frame(ham, path, 0.0, total_time, np.eye(n),
                                renorm_every=renorm_every, rtol=rtol, atol=atol)
    log_times = transport.log_times
    log_history = transport.log_sums
    logsum = log_history[-1]
    exponents_full = np.sort(logsum / total_time)[::-1]
    i0 = int(np.searchsorted(log_times, burn_in_time, side="left"))
    t0, logs0 = log_times[i0], log_history[i0]
    tail = np.sort((logsum - logs0) / (total_time - t0))[::-1]
    return LyapunovSpectrum(tail, exponents_full, float(total_time), float(t0),
                            float(zero_threshold), log_times, log_history)


# ---------------------------------------------------------------------------
# Oseledets subspace estimates

@dataclass(frozen=True)
class SubspaceEstimate:
    """A settled pushed frame approximating an Oseledets sum space."""

    frame: np.ndarray       # (2d, k), orthonormal columns
    which: str              # "unstable" or "stable"
    residual: float         # largest frame motion over the settling window
    n_steps: int


def _push_frame(get, n_steps: int, frame: np.ndarray, stride: int = 1,
                settle_fraction: float = 0.1):
    """QR-push a frame, measuring its motion between strided revisits.

    ``stride`` is the cocycle period: along a periodic orbit the Oseledets
    spaces move with the base point, so settling means the frame returns to
    itself after a full period, not after a single step.
    """
    window = max(stride, int(np.ceil(settle_fraction * n_steps)))
    keep_from = n_steps - window - stride
    if keep_from < 0:
        raise ValueError(
            f"n_steps={n_steps} too short to assess settling at stride {stride}")
    kept: dict[int, np.ndarray] = {}
    residual = 0.0
    for n in range(n_steps):
        Y = get(n) @ frame
        frame, r = np.linalg.qr(Y)
        diag = np.diag(r)
        if np.any(np.abs(diag) < 1e-250) or not np.all(np.isfinite(diag)):
            raise DegenerateCocycleError("frame push collapsed")
        frame = frame * np.sign(diag)
        step = n + 1
        if step >= keep_from:
            kept[step] = frame.copy()
            earlier = kept.get(step - stride)
            if earlier is not None:
                residual = max(residual, subspace_distance(earlier, frame))
    return frame, residual


def unstable_space_estimate(cocycle, k: int, n_steps: int, seed: int = 0,
                            settle_tol: float = 1e-7) -> SubspaceEstimate:
    """Estimate the slowest-decaying (unstable) k-dimensional Oseledets sum.

    Pushes a seeded Haar-random k-frame through the cocycle with QR
    renormalization and requires the spanned subspace to settle: the max
    subspace distance between frames one cocycle period apart, over the
    final 10% of steps, must not exceed ``settle_tol``.  (For a callable
    cocycle the period is taken as 1.)  The distance metric has a rounding
    floor near sqrt(2 * eps) ~ 2e-8 (identical spans do not report 0), so
    tolerances below ~5e-8 are unsatisfiable by design.

    Raises
    ------
    NoGapError
        If the frame keeps moving — no spectral gap at index k resolved
        within ``n_steps`` steps.
    """
    get, size = _cocycle_getter(cocycle)
    stride = 1 if callable(cocycle) and not isinstance(cocycle, (list, tuple)) \
        else len(cocycle)
    frame0 = _haar_frame(np.random.default_rng(seed), size, k)
    frame, residual = _push_frame(get, n_steps, frame0, stride=stride)
    if residual > settle_tol:
        raise NoGapError(
            f"unstable frame residual {residual:.3e} > {settle_tol:.1e} "
            f"after {n_steps} steps")
    return SubspaceEstimate(frame, "unstable", float(residual), n_steps)


def stable_space_estimate(cocycle, k: int, n_steps: int, seed: int = 0,
                          settle_tol: float = 1e-7) -> SubspaceEstimate:
    """Estimate the stable k-dimensional Oseledets sum at the orbit's base point.

    Needs a finite (periodic) cocycle sequence: the stable space is the
    unstable space of the inverse cocycle run backwards, so the sequence is
    inverted and reversed with the cyclic order anchored at step 0.
    """
    if callable(cocycle) and not isinstance(cocycle, (list, tuple)):
        raise ValueError("stable estimates need a finite periodic cocycle sequence")
    blocks = [m if isinstance(m, SympBlockMat) else SympBlockMat.from_matrix(np.asarray(m))
              for m in cocycle]
    L = len(blocks)
    # inverse cocycle along the backward orbit of the base point
    inv = [blocks[(L - 1 - n) % L].inverse().as_matrix() for n in range(L)]
    est = unstable_space_estimate(inv, k, n_steps, seed=seed, settle_tol=settle_tol)
    return SubspaceEstimate(est.frame, "stable", est.residual, est.n_steps)


# ---------------------------------------------------------------------------
# general (structure-free) exponent bounds

@dataclass(frozen=True)
class GeneralBoundReport:
    """One evaluation of the norm/subspace-distance exponent gap bound."""

    lhs: float
    rhs: float
    slack: float
    holds: bool
    cocycle_constant: float
    mean_distance: float
    dim: int


def cocycle_bound_constant(matrices) -> float:
    """``C = max_n max(||M_n||, ||M_n^{-1}||)`` in the operator 2-norm."""
    C = 0.0
    for m in matrices:
        mat = _to_matrix(m)
        C = max(C, np.linalg.norm(mat, 2), np.linalg.norm(np.linalg.inv(mat), 2))
    return float(C)


def general_bound_check_1d(spectrum: LyapunovSpectrum, C: float,
                           mean_distance: float,
                           tol: float = 1e-9) -> GeneralBoundReport:
    """Check ``lambda_u - lambda_s <= log(1 + C^2 * mean dist(E^u, E^s))`` (d = 1)."""
    if spectrum.n_exponents != 2:
        raise ValueError("1d bound applies to 2x2 cocycles only")
    lhs = float(spectrum.exponents[0] - spectrum.exponents[-1])
    rhs = float(np.log1p(C ** 2 * mean_distance))
    slack = rhs - lhs
    return GeneralBoundReport(lhs, rhs, slack, bool(slack >= -tol),
                              float(C), float(mean_distance), 1)


def general_bound_check_dd(spectrum: LyapunovSpectrum, C: float,
                           mean_distance: float,
                           tol: float = 1e-9) -> GeneralBoundReport:
    """Check ``Lambda_u - Lambda_s <= d log(1 + (C^2 + 1) * mean dist)`` (any d).

    ``Lambda_u``/``Lambda_s`` are the sums of positive/negative exponents
    per the spectrum's zero threshold.
    """
    d = spectrum.n_exponents // 2
    pos = spectrum.exponents[spectrum.exponents > spectrum.zero_threshold]
    neg = spectrum.exponents[spectrum.exponents < -spectrum.zero_threshold]
    lhs = float(pos.sum() - neg.sum())
    rhs = float(d * np.log1p((C ** 2 + 1.0) * mean_distance))
    slack = rhs - lhs
    return GeneralBoundReport(lhs, rhs, slack, bool(slack >= -tol),
                              float(C), float(mean_distance), d)
