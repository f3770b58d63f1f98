"""Z^d-periodic trigonometric potentials.

One small class covers every potential used in the package: the standard
family's cosine, coupled multi-dimensional variants, and the mechanical
Hamiltonians on the torus.  Wave vectors are integer so periodicity under
``q -> q + k`` is automatic.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


class TrigPolynomial:
    """``V(q) = sum_j c_j cos(2 pi <k_j, q> + phi_j)`` with integer ``k_j``.

    Parameters
    ----------
    terms : sequence of (coeff, wave_vector) or (coeff, wave_vector, phase)
        ``wave_vector`` is an integer vector of length d (or a scalar for
        d = 1); ``phase`` defaults to 0.
    dim : int, optional
        Needed only for the empty (identically zero) potential.
    """

    def __init__(self, terms, dim: int | None = None):
        coeffs, waves, phases = [], [], []
        for term in terms:
            if len(term) == 2:
                c, k = term
                phi = 0.0
            else:
                c, k, phi = term
            k = np.atleast_1d(np.asarray(k))
            if not np.issubdtype(k.dtype, np.integer):
                if not np.allclose(k, np.round(k)):
                    raise ValueError(f"wave vector {k} is not integer")
                k = np.round(k).astype(int)
            coeffs.append(float(c))
            waves.append(k)
            phases.append(float(phi))
        if waves:
            dims = {len(k) for k in waves}
            if len(dims) != 1:
                raise ValueError("wave vectors have inconsistent dimensions")
            self._dim = dims.pop()
            if dim is not None and dim != self._dim:
                raise ValueError(f"dim={dim} contradicts wave vectors of length {self._dim}")
        else:
            if dim is None:
                raise ValueError("empty potential needs an explicit dim")
            self._dim = int(dim)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.waves = (np.asarray(waves, dtype=float).reshape(len(coeffs), self._dim)
                      if coeffs else np.zeros((0, self._dim)))
        self.phases = np.asarray(phases, dtype=float)

    @property
    def dim(self) -> int:
        return self._dim

    def _angles(self, q: np.ndarray) -> np.ndarray:
        return TWO_PI * (self.waves @ q) + self.phases

    def value(self, q) -> float:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if self.coeffs.size == 0:
            return 0.0
        return float(np.sum(self.coeffs * np.cos(self._angles(q))))

    def grad(self, q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if self.coeffs.size == 0:
            return np.zeros(self._dim)
        s = self.coeffs * np.sin(self._angles(q)) * TWO_PI
        return -(self.waves.T @ s)

    def hess(self, q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if self.coeffs.size == 0:
            return np.zeros((self._dim, self._dim))
        c = self.coeffs * np.cos(self._angles(q)) * TWO_PI ** 2
        return -(self.waves.T * c) @ self.waves

    def __repr__(self):
        inner = ", ".join(
            f"({c:g}, {k.astype(int).tolist()}, {phi:g})"
            for c, k, phi in zip(self.coeffs, self.waves, self.phases))
        return f"TrigPolynomial([{inner}], dim={self._dim})"


def cosine_potential(strength: float, dim: int = 1) -> TrigPolynomial:
    """``(strength / 4 pi^2) * sum_i cos(2 pi q_i)`` — one cosine per axis.

    With ``strength = K`` and d = 1 this is the standard-family potential:
    its Hessian at q is ``-K cos(2 pi q)``.
    """
    scale = strength / (4.0 * np.pi ** 2)
    eye = np.eye(dim, dtype=int)
    return TrigPolynomial([(scale, eye[i]) for i in range(dim)])


def coupled_cosine_potential(strengths, coupling: float) -> TrigPolynomial:
    """Axis cosines plus one diagonal coupling term ``cos(2 pi (q_1 + ... + q_d))``."""
    strengths = np.atleast_1d(np.asarray(strengths, dtype=float))
    dim = strengths.size
    scale = 1.0 / (4.0 * np.pi ** 2)
    eye = np.eye(dim, dtype=int)
    terms = [(scale * strengths[i], eye[i]) for i in range(dim)]
    terms.append((scale * coupling, np.ones(dim, dtype=int)))
    return TrigPolynomial(terms)


def zero_potential(dim: int = 1) -> TrigPolynomial:
    return TrigPolynomial([], dim=dim)
