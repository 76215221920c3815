"""Channel representations and the success-probability operator.

A channel E acts as E(rho) = sum_mn chi_mn A_m rho A_n^dag for a fixed
operator basis {A_m} normalized to Tr[A_m A_n^dag] = d delta_mn.  The chi
matrix always travels together with its basis: mixing coefficients from
different bases silently is the main bug class in process tomography, so
every cross-basis operation goes through change_basis explicitly.

For maps that are not trace preserving the trace of the output state is
Tr[P rho], with P = sum_mn chi_mn A_n^dag A_m the success-probability
operator.  Its spectrum classifies the channel: all eigenvalues 1 means
trace preserving, all equal below 1 means a uniform loss, anything else
means the success probability depends on the input state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qmath
from .errors import NotPsdError, RepresentationError

_BASIS_TOL = 1e-12

#: Absolute tolerance separating the spectral classes of P.
CLASSIFY_TOL = 1e-6

TRACE_PRESERVING = "trace-preserving"
UNIFORM_LOSSY = "uniform-lossy"
STATE_DEPENDENT = "state-dependent"

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class OperatorBasis:
    """A complete operator basis {A_m} with Tr[A_m A_n^dag] = d delta_mn."""

    dim: int
    ops: np.ndarray  # shape (d*d, d, d)
    label: str

    def __post_init__(self):
        ops = np.asarray(self.ops, dtype=complex)
        d = self.dim
        if ops.shape != (d * d, d, d):
            raise RepresentationError(
                f"operator basis for d={d} needs {d * d} operators of shape "
                f"({d},{d}), got array of shape {ops.shape}"
            )
        gram = np.einsum("mij,nij->mn", ops, ops.conj())
        if np.abs(gram - d * np.eye(d * d)).max() > _BASIS_TOL * d:
            raise RepresentationError(
                f"basis {self.label!r} violates Tr[A_m A_n^dag] = d delta_mn"
            )
        object.__setattr__(self, "ops", ops)

    @property
    def size(self) -> int:
        return self.dim * self.dim


def pauli_basis() -> OperatorBasis:
    """The qubit basis {I, sigma_x, sigma_y, sigma_z}."""
    return OperatorBasis(2, PAULI.copy(), "pauli")


def elementary_basis(d: int) -> OperatorBasis:
    """The scaled matrix units sqrt(d)|i><j| in lexicographic (i, j) order."""
    if d < 2:
        raise RepresentationError("elementary basis needs d >= 2")
    ops = np.zeros((d * d, d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            ops[i * d + j, i, j] = np.sqrt(d)
    return OperatorBasis(d, ops, "elementary-scaled")


@dataclass(frozen=True)
class ChiMatrix:
    """Process matrix chi_mn relative to a declared operator basis.

    The matrix is validated Hermitian at construction.  Positivity is NOT
    enforced here: linear inversion of noisy data legitimately produces
    indefinite matrices and callers decide how to handle them (see
    min_eigenvalue / is_psd).
    """

    basis: OperatorBasis
    mat: np.ndarray

    def __post_init__(self):
        m = qmath.require_hermitian(self.mat, "chi matrix")
        n = self.basis.size
        if m.shape != (n, n):
            raise RepresentationError(
                f"chi matrix must be {n}x{n} for d={self.basis.dim}, "
                f"got {m.shape}"
            )
        object.__setattr__(self, "mat", m)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def min_eigenvalue(self) -> float:
        return float(qmath.herm_eig(self.mat).eigenvalues[0])

    def is_psd(self, tol: float = qmath.DEFAULT_CLAMP_TOL) -> bool:
        w = qmath.herm_eig(self.mat).eigenvalues
        return bool(w[0] >= -tol * max(1.0, float(w[-1])))

    def scaled(self, factor: float) -> "ChiMatrix":
        return ChiMatrix(self.basis, self.mat * factor)


@dataclass(frozen=True)
class KrausSet:
    """Kraus operators {E_i} of a (possibly lossy) channel.

    coeffs, when present, is the matrix a_im expanding E_i = sum_m a_im A_m
    over the basis the set was derived from.
    """

    dim: int
    ops: list
    coeffs: np.ndarray | None = None

    def completeness_defect(self) -> float:
        """Largest eigenvalue of sum E_i^dag E_i - I (<= 0 for physical maps)."""
        s = sum(op.conj().T @ op for op in self.ops)
        w = qmath.herm_eig(s - np.eye(self.dim)).eigenvalues
        return float(w[-1])


@dataclass(frozen=True)
class ProbabilityOperator:
    """Success-probability operator P with its spectrum and classification."""

    mat: np.ndarray
    spectrum: qmath.EigDecomposition
    classification: str

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues


def pure_density(ket: np.ndarray) -> np.ndarray:
    """Density matrix |psi><psi| of a (not necessarily normalized) ket."""
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def apply_channel(chi: ChiMatrix, rho: np.ndarray) -> np.ndarray:
    """Apply the map to a state: sum_mn chi_mn A_m rho A_n^dag.

    The output is not renormalized; its trace is the success probability
    Tr[P rho] of the channel on this input.
    """
    rho = np.asarray(rho, dtype=complex)
    d = chi.dim
    if rho.shape != (d, d):
        raise RepresentationError(
            f"state must be {d}x{d} for this channel, got {rho.shape}"
        )
    a = chi.basis.ops
    out = np.einsum("mn,mij,jk,nlk->il", chi.mat, a, rho, a.conj(), optimize=True)
    return 0.5 * (out + out.conj().T)


def chi_from_kraus(kraus, basis: OperatorBasis) -> ChiMatrix:
    """Expand Kraus operators in the basis and build chi_mn = sum_i a_im a_in^*."""
    if isinstance(kraus, KrausSet):
        ops = kraus.ops
    else:
        ops = list(kraus)
    d = basis.dim
    coeffs = np.array(
        [
            [np.trace(basis.ops[m].conj().T @ np.asarray(e, dtype=complex)) / d
             for m in range(basis.size)]
            for e in ops
        ]
    )
    mat = coeffs.T @ coeffs.conj()
    return ChiMatrix(basis, mat)


def kraus_from_chi(chi: ChiMatrix, rank_tol: float = 1e-12) -> KrausSet:
    """Spectral factorization of chi into Kraus operators.

    Components with eigenvalue below rank_tol * lambda_max are dropped;
    an eigenvalue below the PSD clamp tolerance raises NotPsdError.
    """
    eig = qmath.herm_eig(chi.mat)
    w = eig.eigenvalues
    scale = max(1.0, float(w[-1]))
    if w[0] < -qmath.DEFAULT_CLAMP_TOL * scale:
        raise NotPsdError(
            f"chi has eigenvalue {w[0]:.6e}; not a physical channel",
            eigenvalue=float(w[0]),
        )
    keep = w > rank_tol * max(float(w[-1]), 0.0)
    ops = []
    coeffs = []
    for i in np.nonzero(keep)[0][::-1]:  # largest component first
        c = np.sqrt(w[i]) * eig.eigenvectors[:, i]
        ops.append(np.tensordot(c, chi.basis.ops, axes=(0, 0)))
        coeffs.append(c)
    return KrausSet(chi.dim, ops, np.array(coeffs) if coeffs else None)


def change_basis(chi: ChiMatrix, target: OperatorBasis) -> ChiMatrix:
    """Re-express chi in another normalized basis of the same dimension.

    The conversion chi' = C chi C^dag with C_pm = Tr[B_p^dag A_m]/d is
    unitary, so spectra, traces and fidelities are unchanged.
    """
    if target.dim != chi.dim:
        raise RepresentationError(
            f"cannot change basis across dimensions {chi.dim} -> {target.dim}"
        )
    c = np.einsum("pij,mij->pm", target.ops.conj(), chi.basis.ops) / chi.dim
    return ChiMatrix(target, c @ chi.mat @ c.conj().T)


def probability_operator(chi: ChiMatrix) -> ProbabilityOperator:
    """P = sum_mn chi_mn A_n^dag A_m, with spectrum and spectral class."""
    a = chi.basis.ops
    p = np.einsum("mn,nji,mjk->ik", chi.mat, a.conj(), a, optimize=True)
    p = 0.5 * (p + p.conj().T)
    spectrum = qmath.herm_eig(p)
    w = spectrum.eigenvalues
    if np.all(np.abs(w - 1.0) <= CLASSIFY_TOL):
        tag = TRACE_PRESERVING
    elif float(w[-1] - w[0]) <= CLASSIFY_TOL:
        tag = UNIFORM_LOSSY
    else:
        tag = STATE_DEPENDENT
    return ProbabilityOperator(p, spectrum, tag)


def maximally_entangled_state(d: int) -> np.ndarray:
    """|Phi><Phi| with |Phi> = sum_j |jj>/sqrt(d)."""
    phi = np.zeros(d * d, dtype=complex)
    for j in range(d):
        phi[j * d + j] = 1.0
    phi /= np.sqrt(d)
    return np.outer(phi, phi.conj())


def jamiolkowski_state(chi: ChiMatrix) -> np.ndarray:
    """The channel-state dual: the map applied to half of |Phi><Phi|.

    With the process half of the pair listed first, the resulting d^2 x d^2
    state is exactly chi expressed in the scaled matrix-unit basis, so this
    is implemented as a basis change.  Tr of the result equals Tr[chi]
    (one for trace-preserving channels).
    """
    return change_basis(chi, elementary_basis(chi.dim)).mat.copy()


def _common_basis(chi_a: ChiMatrix, chi_b: ChiMatrix):
    if chi_a.dim != chi_b.dim:
        raise RepresentationError(
            f"cannot compare channels of dimension {chi_a.dim} and {chi_b.dim}"
        )
    if chi_b.basis.label != chi_a.basis.label:
        chi_b = change_basis(chi_b, chi_a.basis)
    return chi_a, chi_b


def process_fidelity_tp(
    chi_a: ChiMatrix,
    chi_b: ChiMatrix,
    clamp_tol: float = qmath.DEFAULT_CLAMP_TOL,
    trace_tol: float = 1e-6,
) -> float:
    """Process fidelity between two trace-preserving channels.

    Both chi matrices must have unit trace within trace_tol; for lossy
    channels use process_fidelity_ntp, which normalizes the traces away.
    """
    for name, chi in (("first", chi_a), ("second", chi_b)):
        if abs(chi.trace() - 1.0) > trace_tol:
            raise RepresentationError(
                f"{name} argument has trace {chi.trace():.6f}; "
                "use process_fidelity_ntp for lossy channels"
            )
    chi_a, chi_b = _common_basis(chi_a, chi_b)
    return qmath.state_fidelity(chi_a.mat, chi_b.mat, clamp_tol)


def process_fidelity_ntp(
    chi: ChiMatrix,
    chi_id: ChiMatrix,
    clamp_tol: float = qmath.DEFAULT_CLAMP_TOL,
) -> float:
    """Generalized process fidelity for non-trace-preserving channels.

    Fidelity of the two chi matrices divided by the product of their
    traces.  Invariant under rescaling either argument: channels that
    differ only by a global loss are indistinguishable by this figure.
    """
    ta, tb = chi.trace(), chi_id.trace()
    if ta <= 0.0 or tb <= 0.0:
        raise RepresentationError(
            f"process fidelity needs positive traces, got {ta:.3e} and {tb:.3e}"
        )
    chi, chi_id = _common_basis(chi, chi_id)
    # dividing the fidelity by the traces equals the fidelity of the
    # unit-trace matrices chi' = chi/Tr[chi]; normalizing first keeps the
    # computation at a scale where the spectral clamp is harmless
    return qmath.state_fidelity(chi.mat / ta, chi_id.mat / tb, clamp_tol)
