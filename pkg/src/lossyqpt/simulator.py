"""Forward model of the partially transmitting PBS experiment.

The device transmits the horizontal and vertical polarization components
with amplitudes sqrt(T_H) and sqrt(T_V):

    alpha|H> + beta|V>  ->  alpha sqrt(T_H)|H> + beta sqrt(T_V)|V>

a single-Kraus lossy map whose success probability depends on the input
state whenever T_H != T_V.  The transmittivity ratio is Gamma = T_V / T_H;
sweeps fix T_H = 1 and scan Gamma.

Counts follow the six-in six-out protocol: each of the cardinal states is
prepared, sent through the device, and analyzed against all six cardinal
projectors.  Expected coincidences are N * Tr[Pi_b E(rho_a)] and the
detection statistics are Poissonian (or exact expectations for noiseless
studies).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channels import (
    ChiMatrix,
    OperatorBasis,
    ProbabilityOperator,
    apply_channel,
    pauli_basis,
    probability_operator,
)
from .errors import DataError
from .states import STATE_LABELS, state_catalog, state_ket  # noqa: F401  (re-export)
from .tomography import CountTable


@dataclass(frozen=True)
class PpbsParams:
    """Transmittivities of the partial polarizing beam splitter."""

    t_h: float
    t_v: float

    def __post_init__(self):
        if not (0.0 <= self.t_h <= 1.0 and 0.0 <= self.t_v <= 1.0):
            raise DataError(
                f"transmittivities must lie in [0, 1], got ({self.t_h}, {self.t_v})"
            )

    @property
    def gamma(self) -> float:
        """Ratio T_V / T_H (defined for T_H > 0)."""
        if self.t_h <= 0.0:
            raise DataError("gamma undefined for t_h = 0")
        return self.t_v / self.t_h

    @classmethod
    def from_gamma(cls, gamma: float) -> "PpbsParams":
        """Sweep convention: T_H = 1, T_V = Gamma."""
        if not 0.0 < gamma <= 1.0:
            raise DataError(f"gamma must lie in (0, 1], got {gamma}")
        return cls(1.0, gamma)


@dataclass(frozen=True)
class SimConfig:
    """One simulated acquisition of the full 6x6 protocol.

    dark_counts (expected accidental coincidences per cell) and efficiency
    (global detection scale) are hooks kept at their do-nothing defaults;
    the count-table schema does not change when they are switched on.
    """

    params: PpbsParams
    exposure: float = 1e4
    seed: int = 0
    noise: str = "poisson"
    inputs: tuple = STATE_LABELS
    analyzers: tuple = STATE_LABELS
    dark_counts: float = 0.0
    efficiency: float = 1.0

    def __post_init__(self):
        if self.exposure <= 0:
            raise DataError("exposure must be positive")
        if self.noise not in ("poisson", "none"):
            raise DataError(f"noise must be 'poisson' or 'none', got {self.noise!r}")
        if self.dark_counts < 0 or not 0.0 < self.efficiency <= 1.0:
            raise DataError("need dark_counts >= 0 and efficiency in (0, 1]")
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "analyzers", tuple(self.analyzers))


def ppbs_kraus(p: PpbsParams) -> np.ndarray:
    """The single Kraus operator diag(sqrt(T_H), sqrt(T_V))."""
    return np.diag([np.sqrt(p.t_h), np.sqrt(p.t_v)]).astype(complex)


def ppbs_chi(p: PpbsParams, basis: OperatorBasis | None = None) -> ChiMatrix:
    """Analytic process matrix of the device in the Pauli basis.

    Nonzero entries (Pauli order I, x, y, z):

        chi_00 = (sqrt(T_H) + sqrt(T_V))^2 / 4
        chi_33 = (sqrt(T_H) - sqrt(T_V))^2 / 4
        chi_03 = chi_30 = (T_H - T_V) / 4

    a rank-one matrix, as expected for a single-Kraus map.
    """
    if basis is None:
        basis = pauli_basis()
    if basis.label != "pauli":
        from .channels import change_basis

        return change_basis(ppbs_chi(p), basis)
    sh, sv = np.sqrt(p.t_h), np.sqrt(p.t_v)
    mat = np.zeros((4, 4), dtype=complex)
    mat[0, 0] = (sh + sv) ** 2 / 4.0
    mat[3, 3] = (sh - sv) ** 2 / 4.0
    mat[0, 3] = mat[3, 0] = (p.t_h - p.t_v) / 4.0
    return ChiMatrix(basis, mat)


def ppbs_probability_operator(p: PpbsParams) -> ProbabilityOperator:
    """Success probabilities of the device: P = diag(T_H, T_V)."""
    return probability_operator(ppbs_chi(p))


def expected_counts(
    chi: ChiMatrix,
    exposure: float,
    inputs=STATE_LABELS,
    analyzers=STATE_LABELS,
) -> np.ndarray:
    """Expected coincidences N * Tr[Pi_b E(rho_a)] for a generic channel."""
    cat = state_catalog()
    mu = np.empty((len(inputs), len(analyzers)))
    for a, lab_in in enumerate(inputs):
        out = apply_channel(chi, cat[lab_in])
        for b, lab_an in enumerate(analyzers):
            mu[a, b] = exposure * float(np.trace(cat[lab_an] @ out).real)
    return np.clip(mu, 0.0, None)


def simulate_counts(cfg: SimConfig, chi: ChiMatrix | None = None) -> CountTable:
    """Generate one count table for the configured device.

    With noise="poisson" every cell is an independent Poisson draw from
    its expectation; with noise="none" the exact expectations are stored,
    which keeps the noiseless pipeline algebraically closed.  A chi
    override replaces the analytic device model (same protocol).
    """
    if chi is None:
        chi = ppbs_chi(cfg.params)
    mu = expected_counts(chi, cfg.exposure, cfg.inputs, cfg.analyzers)
    mu = cfg.efficiency * mu + cfg.dark_counts
    if cfg.noise == "poisson":
        rng = np.random.default_rng(cfg.seed)
        counts = rng.poisson(mu).astype(float)
    else:
        counts = mu
    return CountTable(chi.dim, cfg.inputs, cfg.analyzers, cfg.exposure, counts)


def derive_seed(*parts) -> int:
    """Deterministic child seed from integer parts (sweep decorrelation)."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def gamma_sweep(gammas, cfg: SimConfig):
    """Simulate one table per transmittivity ratio.

    Each point gets its own RNG stream derived from (seed, point index),
    so tables are decorrelated but the whole sweep is reproducible.
    """
    gammas = [float(g) for g in gammas]
    out = []
    for i, g in enumerate(gammas):
        point = replace(
            cfg,
            params=PpbsParams.from_gamma(g),
            seed=derive_seed(cfg.seed, i),
        )
        out.append((g, simulate_counts(point)))
    return out
