"""Linear symplectic geometry on R^{2d} = R^d_q x R^d_p.

Lagrangian subspaces transverse to the vertical are graphs
``{(v, S v)}`` of symmetric matrices ``S``; most of this module is bookkeeping
for moving such graphs around with symplectic matrices and comparing them.
Everything works on plain numpy arrays; the two small container classes
(:class:`SympBlockMat`, :class:`LagrangianFrame`) only add structure checks.

Conventions: points are ordered ``(q, p)``, the symplectic form is
``omega((q, p), (q', p')) = p . q' - p' . q`` with matrix ``J = [[0, I], [-I, 0]]``
acting as ``omega(u, v) = u . J v``, and a symplectic matrix written in
d x d blocks ``M = [[a, b], [c, d]]`` satisfies ``t_a c = t_c a``,
``t_b d = t_d b`` and ``t_d a - t_b c = I``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConjugatePointError, NoPositiveEigenvalueError

# Absolute scale-relative tolerances used across the package.
TAU_SYM = 1e-9       # symmetry defect of S-matrices
TAU_SYMP = 1e-9      # symplecticity defect of block matrices
KAPPA_MAX = 1e12     # condition cap before declaring a conjugate point


def eig_tolerance(mat: np.ndarray) -> float:
    """Eigenvalue negligibility threshold, relative to ``||mat||``."""
    return 1e-10 * (1.0 + np.linalg.norm(mat, 2))


def symmetrize(mat: np.ndarray) -> np.ndarray:
    """Return the symmetric part ``(mat + mat^T) / 2``."""
    return 0.5 * (mat + mat.T)


def check_symmetric(mat: np.ndarray, tol: float = TAU_SYM) -> None:
    """Raise ``ValueError`` if ``mat`` is not symmetric to relative ``tol``."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    scale = 1.0 + np.abs(mat).max()
    defect = np.abs(mat - mat.T).max()
    if defect > tol * scale:
        raise ValueError(f"matrix is not symmetric: defect {defect:.3e} "
                         f"exceeds {tol:.1e} * {scale:.3e}")


def standard_symplectic_matrix(dim: int) -> np.ndarray:
    """``J`` with blocks ``[[0, I], [-I, 0]]`` in (q, p) coordinates."""
    eye = np.eye(dim)
    zero = np.zeros((dim, dim))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class SympBlockMat:
    """A 2d x 2d matrix stored as four d x d blocks ``[[a, b], [c, d]]``.

    The class does not force symplecticity on construction (finite-difference
    Jacobians and test fixtures want to represent non-symplectic matrices
    too); call :func:`check_symplectic` where the property matters.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        blocks = [np.atleast_2d(np.asarray(x, dtype=float))
                  for x in (self.a, self.b, self.c, self.d)]
        n = blocks[0].shape[0]
        for blk in blocks:
            if blk.shape != (n, n):
                raise ValueError("all four blocks must be square with equal size, "
                                 f"got shapes {[b.shape for b in blocks]}")
        object.__setattr__(self, "a", blocks[0])
        object.__setattr__(self, "b", blocks[1])
        object.__setattr__(self, "c", blocks[2])
        object.__setattr__(self, "d", blocks[3])

    @property
    def dim(self) -> int:
        """Base dimension d (the matrix is 2d x 2d)."""
        return self.a.shape[0]

    @classmethod
    def from_matrix(cls, mat: np.ndarray) -> "SympBlockMat":
        mat = np.asarray(mat, dtype=float)
        n = mat.shape[0]
        if mat.ndim != 2 or mat.shape != (n, n) or n % 2:
            raise ValueError(f"expected a 2d x 2d matrix, got shape {mat.shape}")
        d = n // 2
        return cls(mat[:d, :d], mat[:d, d:], mat[d:, :d], mat[d:, d:])

    def as_matrix(self) -> np.ndarray:
        return np.block([[self.a, self.b], [self.c, self.d]])

    def inverse(self) -> "SympBlockMat":
        """Symplectic inverse ``-J M^T J`` (cheaper and exacter than solve)."""
        return SympBlockMat(self.d.T, -self.b.T, -self.c.T, self.a.T)

    def __matmul__(self, other: "SympBlockMat") -> "SympBlockMat":
        return SympBlockMat(
            self.a @ other.a + self.b @ other.c,
            self.a @ other.b + self.b @ other.d,
            self.c @ other.a + self.d @ other.c,
            self.c @ other.b + self.d @ other.d,
        )


def _as_blocks(mat) -> SympBlockMat:
    if isinstance(mat, SympBlockMat):
        return mat
    return SympBlockMat.from_matrix(np.asarray(mat, dtype=float))


def check_symplectic(mat, tol: float = TAU_SYMP) -> bool:
    """Test the three block identities of a linear symplectic map.

    Parameters
    ----------
    mat : SympBlockMat or (2d, 2d) array
    tol : float
        Relative tolerance; residuals are compared against
        ``tol * (1 + ||M||_inf^2)`` so the test is meaningful for
        matrices of any magnitude.

    Returns
    -------
    bool
    """
    m = _as_blocks(mat)
    eye = np.eye(m.dim)
    r1 = m.a.T @ m.c - m.c.T @ m.a
    r2 = m.b.T @ m.d - m.d.T @ m.b
    r3 = m.d.T @ m.a - m.b.T @ m.c - eye
    scale = 1.0 + max(np.abs(blk).max() for blk in (m.a, m.b, m.c, m.d)) ** 2
    defect = max(np.abs(r).max() for r in (r1, r2, r3))
    return bool(defect <= tol * scale)


def graph_transform(mat, S: np.ndarray, kappa_max: float = KAPPA_MAX) -> np.ndarray:
    """Image of the Lagrangian graph of ``S`` under a symplectic matrix.

    If ``M = [[a, b], [c, d]]`` maps the graph of ``S`` onto another graph,
    that image is the graph of ``(c + d S)(a + b S)^{-1}``.

    Parameters
    ----------
    mat : SympBlockMat or (2d, 2d) array
    S : (d, d) symmetric array
    kappa_max : float
        Condition-number cap on ``a + b S``.

    Returns
    -------
    (d, d) ndarray
        Symmetrized result (for exactly symplectic input the symmetry
        defect is pure rounding; symmetrizing keeps iterated transforms
        from accumulating it).

    Raises
    ------
    ConjugatePointError
        If ``a + b S`` is singular or worse conditioned than ``kappa_max``,
        i.e. the image is not a graph over the horizontal.
    """
    m = _as_blocks(mat)
    S = np.atleast_2d(np.asarray(S, dtype=float))
    check_symmetric(S)
    den = m.a + m.b @ S
    kappa = np.linalg.cond(den)
    if not np.isfinite(kappa) or kappa > kappa_max:
        raise ConjugatePointError(
            f"graph image degenerates: cond(a + bS) = {kappa:.3e} > {kappa_max:.1e}")
    num = m.c + m.d @ S
    # result = num @ den^{-1}, computed as a solve on the transposed system
    res = np.linalg.solve(den.T, num.T).T
    return symmetrize(res)


@dataclass(frozen=True)
class HeightForm:
    """The quadratic form comparing two Lagrangian graphs.

    For graphs of ``S`` and ``U`` the form is ``h(v) = v . (U - S) v``;
    its matrix and eigenvalues ("characteristic numbers", ascending) are
    stored.  Antisymmetry ``height(S, U) = -height(U, S)`` and the cocycle
    identity ``height(R, S) + height(S, U) = height(R, U)`` hold exactly
    because the matrix is formed by subtraction alone.
    """

    matrix: np.ndarray
    char_numbers: np.ndarray = field(init=False)

    def __post_init__(self):
        mat = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        check_symmetric(mat)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "char_numbers", np.linalg.eigvalsh(mat))

    @property
    def base_dim(self) -> int:
        return self.matrix.shape[0]


def height_form(S: np.ndarray, U: np.ndarray) -> HeightForm:
    """Height of the graph of ``U`` over the graph of ``S`` (matrix ``U - S``)."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if S.shape != U.shape:
        raise ValueError(f"shape mismatch: {S.shape} vs {U.shape}")
    return HeightForm(U - S)


def height_distance(form: HeightForm) -> float:
    """Largest characteristic number in absolute value, ``||U - S||_2``."""
    ev = form.char_numbers
    return float(max(abs(ev[0]), abs(ev[-1])))


def q_plus(mat: np.ndarray, tol: float | None = None) -> float:
    """Smallest eigenvalue above the negligibility threshold.

    Parameters
    ----------
    mat : (d, d) symmetric array
    tol : float, optional
        Defaults to ``eig_tolerance(mat)``.

    Raises
    ------
    NoPositiveEigenvalueError
        If no eigenvalue exceeds ``tol``.
    """
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    check_symmetric(mat)
    if tol is None:
        tol = eig_tolerance(mat)
    ev = np.linalg.eigvalsh(mat)
    pos = ev[ev > tol]
    if pos.size == 0:
        raise NoPositiveEigenvalueError(
            f"no eigenvalue above {tol:.3e} (largest is {ev[-1]:.3e})")
    return float(pos[0])


def conorm(mat: np.ndarray) -> float:
    """Conorm ``m(A) = min_{|v|=1} |A v|``, the smallest singular value."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    return float(np.linalg.svd(mat, compute_uv=False)[-1])


# ---------------------------------------------------------------------------
# frames and subspace distance

@dataclass(frozen=True)
class LagrangianFrame:
    """A subspace of R^{2d} spanned by the columns of ``columns`` (2d, k).

    Despite the name the container accepts any full-rank frame; use
    :meth:`isotropy_defect` to measure how Lagrangian it actually is.
    """

    columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim == 1:
            cols = cols[:, None]
        if cols.shape[0] % 2:
            raise ValueError("ambient dimension must be even")
        if np.linalg.matrix_rank(cols) < cols.shape[1]:
            raise ValueError("frame columns are linearly dependent")
        object.__setattr__(self, "columns", cols)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    def orthonormalized(self) -> np.ndarray:
        q, r = np.linalg.qr(self.columns)
        # fix signs so the basis is a deterministic function of the span
        q = q * np.sign(np.diag(r))
        return q

    def isotropy_defect(self) -> float:
        """``max |F^T J F|``; zero iff the span is isotropic."""
        J = standard_symplectic_matrix(self.ambient_dim // 2)
        return float(np.abs(self.columns.T @ J @ self.columns).max())


def vertical_frame(dim: int) -> LagrangianFrame:
    """The vertical ``{0} x R^d``."""
    cols = np.zeros((2 * dim, dim))
    cols[dim:, :] = np.eye(dim)
    return LagrangianFrame(cols)


def graph_frame(S: np.ndarray) -> LagrangianFrame:
    """Frame ``[I; S]`` of the graph of the symmetric matrix ``S``."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    check_symmetric(S)
    return LagrangianFrame(np.vstack([np.eye(S.shape[0]), S]))


def _orthonormal_columns(frame) -> np.ndarray:
    if isinstance(frame, LagrangianFrame):
        return frame.orthonormalized()
    cols = np.asarray(frame, dtype=float)
    if cols.ndim == 1:
        cols = cols[:, None]
    return LagrangianFrame(cols).orthonormalized()


def subspace_distance(E, F) -> float:
    """Distance ``inf max_i |e_i - f_i|`` over orthonormal bases of E and F.

    Parameters
    ----------
    E, F : LagrangianFrame or (n, k) arrays
        Frames of two k-dimensional subspaces of the same R^n.

    Returns
    -------
    float
        ``sqrt(2 - 2 * mean(sigma))`` where ``sigma`` are the singular
        values of ``E0^T F0`` for orthonormalized frames (the cosines of
        the principal angles).  For k = 1 this is the exact minimum of
        ``|e - f|`` over unit spanning vectors; for k >= 2 it is always an
        upper bound for the infimum (and tight for it).

    Notes
    -----
    Equals 0 iff the subspaces coincide and sqrt(2) iff they are
    orthogonal; always <= sqrt(2).
    """
    E0 = _orthonormal_columns(E)
    F0 = _orthonormal_columns(F)
    if E0.shape != F0.shape:
        raise ValueError(f"frame shape mismatch: {E0.shape} vs {F0.shape}")
    sigma = np.linalg.svd(E0.T @ F0, compute_uv=False)
    mean_cos = float(np.clip(sigma, 0.0, 1.0).mean())
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * mean_cos)))


def graph_intersection_dim(S: np.ndarray, U: np.ndarray,
                           tol: float | None = None) -> int:
    """Dimension of the intersection of the graphs of ``S`` and ``U``.

    Equals the nullity of ``U - S``; computed from its eigenvalues with the
    relative threshold of :func:`eig_tolerance`.
    """
    form = height_form(S, U)
    if tol is None:
        tol = eig_tolerance(form.matrix)
    return int(np.sum(np.abs(form.char_numbers) <= tol))
