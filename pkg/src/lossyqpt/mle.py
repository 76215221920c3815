"""Maximum-likelihood reconstruction of the process matrix.

The fitted matrix is kept positive semidefinite by construction through a
lower-triangular parameterization: a real vector t of length d^4 maps to
a lower-triangular factor T(t) with real diagonal, and the candidate
process matrix is chi(t) = T^dag T.  The figure of merit compares model
counts to measured counts,

    f(t) = sum_ab (n_ab - N <psi_b|E_t(|phi_a><phi_a|)|psi_b>)^2 / w_ab

with w_ab = max(n_ab, 1); the floor keeps dark analyzer settings (exact
zeros at strong polarization-dependent loss) from blowing up the weight.
Setting weight_mode="drop" in FitOptions omits zero-count terms instead.

Three reconstruction flavors:

  * fit_unconstrained: the correct treatment for lossy maps.  The result
    is rescaled so that the largest eigenvalue of the success operator P
    is one, since a global loss factor is not measurable.
  * fit_trace_preserving: adds the constraint P = I by quadratic penalty
    with a growing weight.  For genuinely lossy, state-dependent devices
    this is a wrong model, and its fidelity to the true map degrades as
    the polarization dependence grows.
  * fit_post_selected: normalizes every tomographed output state to unit
    trace before linear inversion, mimicking post-selected measurements.
    Also a wrong model; the result can even be indefinite, so it is
    flagged rather than silently repaired.

Minimization is Nelder-Mead (16 parameters for a qubit) restarted from a
linear-inversion seed plus random points; everything is deterministic
given the seed in FitOptions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qmath
from .channels import ChiMatrix, OperatorBasis, pauli_basis, probability_operator
from .errors import DegenerateFitError, RepresentationError
from .optimize import minimize_adaptive
from .states import kets_for
from .tomography import CountTable, reconstruct_linear

_RESTART_SCALE = 0.25  # stddev of random seed components


@dataclass(frozen=True)
class FitOptions:
    """Optimizer and weighting knobs; defaults reproduce the standard fit."""

    restarts: int = 4
    maxfev: int = 50_000
    xtol: float = 1e-9
    seed: int = 0
    weight_mode: str = "floor"  # "floor" -> w = max(n, 1); "drop" -> skip n = 0
    penalty_mu0: float = 100.0
    penalty_growth: float = 10.0
    penalty_stages: int = 12
    constraint_tol: float = 1e-6
    # warm continuation stages track a slowly moving optimum and need far
    # fewer evaluations than the cold first stage
    continuation_maxfev: int = 10_000

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("need at least one start")
        if self.weight_mode not in ("floor", "drop"):
            raise ValueError(f"unknown weight_mode {self.weight_mode!r}")


@dataclass(frozen=True)
class FitReport:
    """Outcome of one reconstruction."""

    chi: ChiMatrix
    objective: float
    iterations: int
    evaluations: int
    restarts_used: int
    normalization_scale: float
    seed: int
    min_chi_eigenvalue: float
    psd_ok: bool
    constraint_residual: float | None = None
    method: str = "mle"


def n_params(dim: int) -> int:
    return dim ** 4


_TRIL_CACHE: dict = {}


def _lower_indices(n: int):
    if n not in _TRIL_CACHE:
        _TRIL_CACHE[n] = np.tril_indices(n, k=-1)
    return _TRIL_CACHE[n]


def factor_from_params(t: np.ndarray, dim: int) -> np.ndarray:
    """Lower-triangular T with real diagonal from the parameter vector."""
    n = dim * dim
    t = np.asarray(t, dtype=float)
    if t.size != n * n:
        raise RepresentationError(f"need {n * n} parameters for d={dim}, got {t.size}")
    mat = np.zeros((n, n), dtype=complex)
    mat[np.diag_indices(n)] = t[:n]
    rows, cols = _lower_indices(n)
    mat[rows, cols] = t[n::2] + 1j * t[n + 1 :: 2]
    return mat


def params_from_factor(mat: np.ndarray) -> np.ndarray:
    n = mat.shape[0]
    rows, cols = _lower_indices(n)
    t = np.empty(n * n)
    t[:n] = np.diag(mat).real
    t[n::2] = mat[rows, cols].real
    t[n + 1 :: 2] = mat[rows, cols].imag
    return t


def chi_tilde(t: np.ndarray, dim: int) -> np.ndarray:
    """The always-PSD candidate matrix T(t)^dag T(t)."""
    f = factor_from_params(t, dim)
    return f.conj().T @ f


def params_from_chi(mat: np.ndarray) -> np.ndarray:
    """Parameters whose chi_tilde reproduces a PSD matrix (seeding).

    Negative eigenvalues are clamped to zero first, so a slightly
    indefinite linear-inversion result is a valid seed; a tiny diagonal
    jitter keeps the factorization defined for rank-deficient matrices.
    """
    eig = qmath.herm_eig(mat)
    w = np.clip(eig.eigenvalues, 0.0, None)
    repaired = (eig.eigenvectors * w) @ eig.eigenvectors.conj().T
    n = mat.shape[0]
    jitter = 1e-12 * max(1.0, float(w[-1]))
    flipped = np.flip(np.flip(repaired + jitter * np.eye(n), 0), 1)
    lower = np.linalg.cholesky(flipped)
    factor = np.flip(np.flip(lower.conj().T, 0), 1)
    return params_from_factor(factor)


def _resolve_protocol(counts: CountTable, inputs, analyzers):
    in_labels = tuple(inputs) if inputs is not None else counts.inputs
    an_labels = tuple(analyzers) if analyzers is not None else counts.projectors
    if in_labels != counts.inputs or an_labels != counts.projectors:
        raise RepresentationError(
            "protocol labels disagree with the count table layout"
        )
    return kets_for(in_labels), kets_for(an_labels)


def measurement_design(
    basis: OperatorBasis, input_kets: np.ndarray, analyzer_kets: np.ndarray
) -> np.ndarray:
    """Matrix mapping vec(chi) to detection probabilities.

    Row (a, b) holds <psi_b|A_m|phi_a><phi_a|A_n^dag|psi_b> flattened over
    (m, n), so probabilities are Re(D @ vec(chi)).
    """
    amps = np.einsum(
        "bi,mij,aj->abm", analyzer_kets.conj(), basis.ops, input_kets
    )
    outer = amps[:, :, :, None] * amps.conj()[:, :, None, :]
    na, nb = amps.shape[0], amps.shape[1]
    n = basis.size
    return outer.reshape(na * nb, n * n)


def _objective_pieces(counts: CountTable, basis, inputs, analyzers, weight_mode):
    if basis is None:
        if counts.dim != 2:
            raise RepresentationError("a basis must be given for d != 2")
        basis = pauli_basis()
    in_kets, an_kets = _resolve_protocol(counts, inputs, analyzers)
    # model_ab = N sum_mn c_m chi_mn c_n^* = N ||T(t) conj(c_ab)||^2 for
    # chi = T^dag T, which is a real quadratic form in t.  Precomputing one
    # small PSD form per table cell keeps complex arithmetic out of the
    # optimizer's hot loop entirely.
    amps = np.einsum("bi,mij,aj->abm", an_kets.conj(), basis.ops, in_kets)
    conj_amps = np.ascontiguousarray(amps.conj().reshape(-1, basis.size).T)
    n_flat = counts.counts.reshape(-1)
    if weight_mode == "drop":
        keep = n_flat > 0
        conj_amps = conj_amps[:, keep]
        n_flat = n_flat[keep]
        inv_w = 1.0 / n_flat
    else:
        inv_w = 1.0 / np.maximum(n_flat, 1.0)
    exposure = counts.exposure
    n = basis.size
    npar = n * n
    ncells = conj_amps.shape[1]
    lo_rows, lo_cols = _lower_indices(n)
    # d(T c)/dt_p has a single nonzero component: row_of[p] picks it,
    # col_of[p] picks the amplitude entry, phase_of[p] is 1 or i.
    row_of = np.concatenate([np.arange(n), np.repeat(lo_rows, 2)])
    col_of = np.concatenate([np.arange(n), np.repeat(lo_cols, 2)])
    phase_of = np.concatenate([np.ones(n), np.tile([1.0, 1j], lo_rows.size)])
    vals = phase_of[:, None] * conj_amps[col_of, :]  # (npar, ncells)
    mask = (row_of[:, None] == row_of[None, :]).astype(float)
    forms = np.einsum("pj,qj->jpq", vals.conj(), vals).real * mask
    forms_flat = np.ascontiguousarray(forms.reshape(ncells * npar, npar))

    def objective(t):
        u = forms_flat @ t
        model = exposure * (u.reshape(ncells, npar) @ t)
        r = n_flat - model
        return float(np.dot(r * r, inv_w))

    return objective, basis


def likelihood(
    t: np.ndarray,
    counts: CountTable,
    basis: OperatorBasis | None = None,
    inputs=None,
    analyzers=None,
    weight_mode: str = "floor",
) -> float:
    """Weighted squared misfit between measured and model counts at t."""
    objective, _ = _objective_pieces(counts, basis, inputs, analyzers, weight_mode)
    return objective(t)


def _constraint_gram(basis: OperatorBasis) -> np.ndarray:
    """Stack of A_n^dag A_m indexed by the flattened chi index (m, n)."""
    g = np.einsum("nji,mjk->mnik", basis.ops.conj(), basis.ops)
    n = basis.size
    return g.reshape(n * n, basis.dim, basis.dim)


def constraint_residual(chi_mat: np.ndarray, basis: OperatorBasis) -> float:
    """Frobenius distance of the success operator P from the identity."""
    gram = _constraint_gram(basis)
    p = np.tensordot(chi_mat.reshape(-1), gram, axes=(0, 0))
    return float(np.linalg.norm(p - np.eye(basis.dim)))


def _seed_pool(counts, basis, opts):
    li = reconstruct_linear(counts, basis)
    t0 = params_from_chi(li.chi.mat)
    rng = np.random.default_rng(opts.seed)
    seeds = [t0]
    for _ in range(opts.restarts - 1):
        seeds.append(rng.normal(0.0, _RESTART_SCALE, t0.size))
    return seeds, li


def _best_of(func, seeds, opts):
    best = None
    iterations = evaluations = 0
    for s in seeds:
        res = minimize_adaptive(func, s, xtol=opts.xtol, maxfev=opts.maxfev)
        iterations += res.iterations
        evaluations += res.evaluations
        if best is None or res.fun < best.fun:
            best = res
    return best, iterations, evaluations


def normalize_max_p(chi: ChiMatrix):
    """Rescale chi so the largest eigenvalue of P is exactly one.

    Returns (rescaled chi, scale), where scale is the eigenvalue divided
    out.  Idempotent, and irrelevant for the generalized process fidelity,
    which ignores global loss.
    """
    p = probability_operator(chi)
    pmax = float(p.eigenvalues[-1])
    if pmax <= 0.0:
        raise DegenerateFitError("cannot normalize a zero map (max P eigenvalue <= 0)")
    return chi.scaled(1.0 / pmax), pmax


def fit_unconstrained(
    counts: CountTable,
    basis: OperatorBasis | None = None,
    opts: FitOptions = FitOptions(),
    inputs=None,
    analyzers=None,
) -> FitReport:
    """Maximum-likelihood fit of a (possibly lossy) process matrix.

    Starts Nelder-Mead from the linear-inversion seed and restarts - 1
    random points, keeps the best optimum, and rescales it to max
    eigenvalue of P equal to one.  Deterministic given (counts, opts).
    """
    objective, basis = _objective_pieces(
        counts, basis, inputs, analyzers, opts.weight_mode
    )
    seeds, _ = _seed_pool(counts, basis, opts)
    seed_value = objective(seeds[0])
    best, iterations, evaluations = _best_of(objective, seeds, opts)
    if best.fun > seed_value:
        raise DegenerateFitError(
            f"optimizer made no progress (f={best.fun:.6e} vs seed {seed_value:.6e})"
        )
    raw = ChiMatrix(basis, chi_tilde(best.x, basis.dim))
    chi, scale = normalize_max_p(raw)
    return FitReport(
        chi=chi,
        objective=best.fun,
        iterations=iterations,
        evaluations=evaluations,
        restarts_used=len(seeds),
        normalization_scale=scale,
        seed=opts.seed,
        min_chi_eigenvalue=chi.min_eigenvalue(),
        psd_ok=True,
        method="mle",
    )


def fit_trace_preserving(
    counts: CountTable,
    basis: OperatorBasis | None = None,
    opts: FitOptions = FitOptions(),
    inputs=None,
    analyzers=None,
) -> FitReport:
    """Fit under the (often wrong) assumption that the map preserves trace.

    Minimizes f(t) + mu ||P(t) - I||_F^2 with mu growing by a fixed factor
    per stage until the constraint residual drops below constraint_tol.
    The reported objective is the unpenalized f at the solution.
    """
    objective, basis = _objective_pieces(
        counts, basis, inputs, analyzers, opts.weight_mode
    )
    dim = basis.dim
    n = basis.size
    diag = np.diag_indices(n)
    rows, cols = _lower_indices(n)
    ops_flat = basis.ops.reshape(n, dim * dim)
    eye_flat = np.eye(dim).reshape(-1)
    factor = np.zeros((n, n), dtype=complex)

    def penalty(t):
        # P = sum_r W_r^dag W_r with W_r = sum_n conj(T[r, n]) A_n; stacking
        # the W_r vertically turns the sum into one small Gram product
        factor[diag] = t[:n]
        factor[rows, cols] = t[n::2] + 1j * t[n + 1 :: 2]
        stacked = (factor.conj() @ ops_flat).reshape(n * dim, dim)
        p = stacked.conj().T @ stacked
        defect = p.reshape(-1) - eye_flat
        return float(np.vdot(defect, defect).real)

    def penalized(mu):
        def g(t):
            return objective(t) + mu * penalty(t)

        return g

    seeds, _ = _seed_pool(counts, basis, opts)
    mu = opts.penalty_mu0
    best, iterations, evaluations = _best_of(penalized(mu), seeds, opts)
    x = best.x
    residual = constraint_residual(chi_tilde(x, dim), basis)
    stages = 1
    while residual >= opts.constraint_tol and stages < opts.penalty_stages:
        mu *= opts.penalty_growth
        # the optimum moves by O(residual) per stage, so start the warm
        # simplex at that scale instead of a full-size one
        res = minimize_adaptive(
            penalized(mu),
            x,
            xtol=opts.xtol,
            maxfev=opts.continuation_maxfev,
            step=max(residual, 1e-7),
        )
        iterations += res.iterations
        evaluations += res.evaluations
        x = res.x
        residual = constraint_residual(chi_tilde(x, dim), basis)
        stages += 1
    if residual >= opts.constraint_tol:
        raise DegenerateFitError(
            f"penalty stages exhausted: ||P - I|| = {residual:.3e} "
            f"after {stages} stages (target {opts.constraint_tol:.1e})"
        )
    chi = ChiMatrix(basis, chi_tilde(x, dim))
    return FitReport(
        chi=chi,
        objective=objective(x),
        iterations=iterations,
        evaluations=evaluations,
        restarts_used=len(seeds),
        normalization_scale=1.0,
        seed=opts.seed,
        min_chi_eigenvalue=chi.min_eigenvalue(),
        psd_ok=True,
        constraint_residual=residual,
        method="mle-tp",
    )


def fit_linear(
    counts: CountTable,
    basis: OperatorBasis | None = None,
    opts: FitOptions = FitOptions(),
) -> FitReport:
    """Plain linear inversion packaged as a report (no optimizer, no
    rescaling).  Exact on noiseless data; indefinite results are flagged,
    never repaired."""
    if basis is None:
        if counts.dim != 2:
            raise RepresentationError("a basis must be given for d != 2")
        basis = pauli_basis()
    res = reconstruct_linear(counts, basis)
    return FitReport(
        chi=res.chi,
        objective=res.lambda_residual,
        iterations=0,
        evaluations=0,
        restarts_used=0,
        normalization_scale=1.0,
        seed=opts.seed,
        min_chi_eigenvalue=res.min_eigenvalue,
        psd_ok=res.psd_ok,
        method="linear",
    )


def fit_post_selected(
    counts: CountTable,
    basis: OperatorBasis | None = None,
    opts: FitOptions = FitOptions(),
) -> FitReport:
    """Linear inversion after normalizing every output state to unit trace.

    This imitates reconstruction from post-selected measurements.  For a
    state-dependent lossy map the normalization breaks the linearity the
    inversion relies on: the result depends on which inputs were prepared
    and may be indefinite, which psd_ok / min_chi_eigenvalue expose.
    """
    if basis is None:
        if counts.dim != 2:
            raise RepresentationError("a basis must be given for d != 2")
        basis = pauli_basis()
    res = reconstruct_linear(counts, basis, normalize_outputs=True)
    return FitReport(
        chi=res.chi,
        objective=res.lambda_residual,
        iterations=0,
        evaluations=0,
        restarts_used=0,
        normalization_scale=1.0,
        seed=opts.seed,
        min_chi_eigenvalue=res.min_eigenvalue,
        psd_ok=res.psd_ok,
        method="post-selected",
    )
