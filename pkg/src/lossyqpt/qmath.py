"""Dense complex linear algebra for small Hermitian matrices.

Everything here operates on plain complex ndarrays.  The eigensolver is a
cyclic Jacobi iteration with complex plane rotations: for matrices up to
16x16 it is unconditionally convergent and keeps the whole numerical trust
path inside this module.  Eigenvalues come back ascending; in degenerate
subspaces only the projector is well defined, so tests and callers must
not rely on individual eigenvectors there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPsdError, RepresentationError

#: Default relative tolerance below which an eigenvalue is treated as zero
#: when taking matrix square roots of reconstructed (noisy) matrices.
DEFAULT_CLAMP_TOL = 1e-10

_HERM_TOL = 1e-12


@dataclass(frozen=True)
class EigDecomposition:
    """Spectral decomposition of a Hermitian matrix.

    eigenvalues are real and ascending; eigenvectors is unitary with the
    i-th column belonging to eigenvalues[i].
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def hermitian_deviation(m: np.ndarray) -> float:
    """max|M - M^dag|, the absolute deviation from Hermiticity."""
    return float(np.abs(m - m.conj().T).max())


def require_hermitian(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Validate shape and Hermiticity, returning the symmetrized matrix.

    The returned copy is (M + M^dag)/2, which removes rounding-level
    asymmetry without changing anything above the validation tolerance.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise RepresentationError(f"{what} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()))
    if hermitian_deviation(m) > _HERM_TOL * scale:
        raise RepresentationError(
            f"{what} is not Hermitian within tolerance "
            f"(deviation {hermitian_deviation(m):.3e}, scale {scale:.3e})"
        )
    return 0.5 * (m + m.conj().T)


def _jacobi_rotation(app: float, aqq: float, apq: complex):
    """2x2 unitary zeroing the off-diagonal element apq.

    Returns the rotation as a (2, 2) array U such that
    U^dag [[app, apq], [conj(apq), aqq]] U is diagonal.
    """
    r = abs(apq)
    u = apq / r
    tau = (aqq - app) / (2.0 * r)
    if tau >= 0.0:
        t = -1.0 / (tau + np.sqrt(1.0 + tau * tau))
    else:
        t = 1.0 / (-tau + np.sqrt(1.0 + tau * tau))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    return np.array([[c * u, -s * u], [s, c]], dtype=complex)


def herm_eig(m: np.ndarray, max_sweeps: int = 60) -> EigDecomposition:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Args:
        m: Hermitian matrix (validated against the standard tolerance).
        max_sweeps: safety cap on full cyclic sweeps.

    Returns:
        EigDecomposition with ascending real eigenvalues and orthonormal
        eigenvector columns.

    Raises:
        RepresentationError: non-square or non-Hermitian input.
    """
    a = require_hermitian(m, "herm_eig input")
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    if n == 1:
        return EigDecomposition(np.array([a[0, 0].real]), v)

    scale = float(np.abs(a).max())
    if scale == 0.0:
        return EigDecomposition(np.zeros(n), v)
    thresh = 1e-15 * scale

    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= thresh:
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                off = max(off, abs(apq))
                rot = _jacobi_rotation(a[p, p].real, a[q, q].real, apq)
                cols = [p, q]
                a[:, cols] = a[:, cols] @ rot
                a[cols, :] = rot.conj().T @ a[cols, :]
                v[:, cols] = v[:, cols] @ rot
                # kill rounding residue so convergence is monotone
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
        if off <= thresh:
            break

    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return EigDecomposition(w[order], v[:, order])


def psd_sqrt(
    m: np.ndarray, clamp_tol: float = DEFAULT_CLAMP_TOL
) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix.

    clamp_tol sets the negativity tolerance: an eigenvalue below
    -clamp_tol * max(1, lambda_max) raises NotPsdError, anything above
    that is clamped to zero.  Positive eigenvalues below the (never
    larger than default) zeroing window are treated as exact zeros, so
    loosening clamp_tol for noisy reconstructed matrices does not erase
    genuine spectrum.
    """
    eig = herm_eig(m)
    w = eig.eigenvalues
    scale = max(1.0, float(w[-1]))
    if w[0] < -clamp_tol * scale:
        raise NotPsdError(
            f"matrix has eigenvalue {w[0]:.6e} below -{clamp_tol * scale:.1e}",
            eigenvalue=float(w[0]),
        )
    zero_window = min(clamp_tol, DEFAULT_CLAMP_TOL) * max(float(w[-1]), 0.0)
    w = np.where(w > zero_window, w, 0.0)
    v = eig.eigenvectors
    return (v * np.sqrt(w)) @ v.conj().T


def state_fidelity(
    a: np.ndarray, b: np.ndarray, clamp_tol: float = DEFAULT_CLAMP_TOL
) -> float:
    """Quantum state fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2.

    Traces need not be one; callers that want a normalized figure divide
    by the traces themselves.  Symmetric in its arguments to numerical
    precision.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise RepresentationError(
            f"fidelity arguments must have equal shapes, got {a.shape} and {b.shape}"
        )
    sa = psd_sqrt(a, clamp_tol)
    inner = sa @ b @ sa
    inner = 0.5 * (inner + inner.conj().T)
    w = herm_eig(inner).eigenvalues
    scale = max(1.0, float(w[-1])) if w.size else 1.0
    if w.size and w[0] < -clamp_tol * scale:
        raise NotPsdError(
            f"fidelity inner product has eigenvalue {w[0]:.6e}",
            eigenvalue=float(w[0]),
        )
    # rank-deficient inputs leave rounding residue ~1e-16 in the inner
    # spectrum; through the square root each such eigenvalue would inject
    # ~1e-8, so anything that far below the leading eigenvalue is noise
    w = np.where(w > 1e-13 * max(float(w[-1]), 0.0), w, 0.0)
    return float(np.sum(np.sqrt(w)) ** 2)
