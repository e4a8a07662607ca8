"""
metrics.py
PURPOSE: Figures of merit for states and processes: process and average gate
fidelity, state fidelity, tangle, linear entropy, truth tables of the Bell
analyser and set-level summaries.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.linalg import sqrtm

from ppbs_cz_system.analysis.tomography import check_chi
from ppbs_cz_system.core.errors import DomainError
from ppbs_cz_system.core.qubit_states import check_density_matrix
from ppbs_cz_system.optics.gate_circuits import (
    DEFAULT_ANALYSER_PHASES,
    OUTCOME_LABELS,
    BellInput,
    GateInstance,
    analyze_bell,
    bell_inputs,
    kraus_operators,
)

FIDELITY_TOLERANCE = 1e-9
EIGENVALUE_FLOOR = 1e-12   # eigenvalues below this are numerical noise
PURE_TOLERANCE = 1e-12

# sigma_y x sigma_y for the spin-flipped state
_SPIN_FLIP = np.array([[0, 0, 0, -1],
                       [0, 0, 1, 0],
                       [0, 1, 0, 0],
                       [-1, 0, 0, 0]], dtype=complex)


def _unit_interval(value):
    return float(min(1.0, max(0.0, value)))


def process_fidelity(chi_meas, chi_ideal) -> float:
    """F_P = Tr[chi_meas chi_ideal] for two unit-trace chi matrices."""
    chi_meas = check_chi(chi_meas)
    chi_ideal = check_chi(chi_ideal)
    return _unit_interval(np.real(np.trace(chi_meas @ chi_ideal)))


def average_gate_fidelity(process_fid) -> float:
    """(4 F_P + 1) / 5"""
    if not (np.isfinite(process_fid) and -FIDELITY_TOLERANCE <= process_fid <= 1.0 + FIDELITY_TOLERANCE):
        raise DomainError(f"Process fidelity must be in [0, 1]: {process_fid}")
    return (4.0 * float(process_fid) + 1.0) / 5.0


def _pure_vector(rho):
    """Dominant eigenvector if rho is pure, else None."""
    if abs(np.real(np.trace(rho @ rho)) - 1.0) > PURE_TOLERANCE:
        return None
    _, vecs = np.linalg.eigh((rho + rho.conj().T) / 2)
    return vecs[:, -1]


def _floored_roots(eigvals):
    eigvals = np.real(eigvals)
    return np.sqrt(np.where(eigvals < EIGENVALUE_FLOOR, 0.0, eigvals))


def state_fidelity(rho, sigma) -> float:
    """(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2; reduces to <psi|rho|psi> for a pure argument."""
    rho = check_density_matrix(rho)
    sigma = check_density_matrix(sigma)
    for pure, other in ((sigma, rho), (rho, sigma)):
        psi = _pure_vector(pure)
        if psi is not None:
            return _unit_interval(np.real(np.vdot(psi, other @ psi)))
    root = sqrtm(rho)
    inner = root @ sigma @ root
    return _unit_interval(np.sum(_floored_roots(np.linalg.eigvalsh((inner + inner.conj().T) / 2))) ** 2)


def concurrence(rho) -> float:
    """Wootters concurrence from the eigenvalues of rho (sy x sy) rho* (sy x sy)."""
    rho = check_density_matrix(rho)
    flipped = _SPIN_FLIP @ rho.conj() @ _SPIN_FLIP
    lambdas = np.sort(_floored_roots(np.linalg.eigvals(rho @ flipped)))[::-1]
    return _unit_interval(lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3])


def tangle(rho) -> float:
    """Concurrence squared."""
    return concurrence(rho) ** 2


def linear_entropy(rho) -> float:
    """(4/3)(1 - Tr[rho^2]); 0 for pure states, 1 for the maximally mixed state."""
    rho = check_density_matrix(rho)
    purity = float(np.real(np.trace(rho @ rho)))
    return _unit_interval(4.0 / 3.0 * (1.0 - purity))


def mutual_fidelity_matrix(states: Sequence[np.ndarray]) -> np.ndarray:
    """Pairwise state fidelities (symmetric, unit diagonal)."""
    if len(states) < 2:
        raise DomainError(f"Need at least 2 states, got {len(states)}")
    n = len(states)
    out = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = state_fidelity(states[i], states[j])
    return out


def mean_off_diagonal(matrix) -> float:
    m = np.asarray(matrix, dtype=float)
    mask = ~np.eye(m.shape[0], dtype=bool)
    return float(m[mask].mean())


@dataclass(frozen=True)
class SetSummary:
    mean_fidelity: Optional[float]
    mean_tangle: float
    mean_linear_entropy: float
    count: int


def set_summary(states: Sequence[np.ndarray], targets: Optional[Sequence[np.ndarray]] = None) -> SetSummary:
    """Averages over a set of states; fidelity only when targets are given."""
    if not states:
        raise DomainError("Empty state set")
    fidelity = None
    if targets is not None:
        if len(targets) != len(states):
            raise DomainError(f"{len(states)} states but {len(targets)} targets")
        fidelity = float(np.mean([state_fidelity(s, t) for s, t in zip(states, targets)]))
    return SetSummary(
        fidelity,
        float(np.mean([tangle(s) for s in states])),
        float(np.mean([linear_entropy(s) for s in states])),
        len(states),
    )


# ── Truth tables ──────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class TruthTable:
    """Rows are Bell inputs, columns are analyser outcomes DD, AD, DA, AA."""
    probabilities: np.ndarray
    row_labels: tuple
    column_labels: tuple = OUTCOME_LABELS
    success_probabilities: tuple = ()
    output_states: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 2 or p.shape[1] != len(self.column_labels):
            raise DomainError(f"Truth table must have {len(self.column_labels)} columns, got shape {p.shape}")
        if np.any(p < -FIDELITY_TOLERANCE) or np.any(p > 1 + FIDELITY_TOLERANCE):
            raise DomainError("Truth-table entries must lie in [0, 1]")
        if not np.allclose(p.sum(axis=1), 1.0, atol=1e-10):
            raise DomainError("Truth-table rows must sum to 1")
        object.__setattr__(self, "probabilities", p)

    @property
    def mean_diagonal(self):
        """Average probability of the correct outcome."""
        n = min(self.probabilities.shape)
        return float(np.mean(np.diag(self.probabilities)[:n]))

    def as_dict(self) -> Dict[str, Dict[str, float]]:
        return {r: dict(zip(self.column_labels, map(float, row)))
                for r, row in zip(self.row_labels, self.probabilities)}


def truth_table(gate: GateInstance, basis_inputs: Optional[Sequence[BellInput]] = None,
                phases=DEFAULT_ANALYSER_PHASES) -> TruthTable:
    """
    Analyser outcome distribution for each Bell input.

    Raises:
        NullPostselectionError if an input produces no coincidences
    """
    basis_inputs = bell_inputs() if basis_inputs is None else list(basis_inputs)
    kraus = kraus_operators(gate)
    results = [analyze_bell(b.state, gate, phases, kraus) for b in basis_inputs]
    return TruthTable(
        np.array([r.distribution for r in results]),
        tuple(b.label.value for b in basis_inputs),
        OUTCOME_LABELS,
        tuple(r.success_probability for r in results),
        tuple(r.output_state for r in results),
    )
