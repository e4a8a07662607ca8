"""
gate_circuits.py
PURPOSE: Concrete circuits built from the optical elements:
the PPBS controlled-Z gate, the dual-rail interferometric reference gate,
input-state preparation (wave plates, entangled source) and the Bell-state
analyser built on the CZ gate.

Conventions:
  - control photon on path 0, target photon on path 1
  - two-qubit matrices are in HH, HV, VH, VV order; logical 0 = V, 1 = H
  - the PPBS gate's half-wave plates leave an X on each qubit; by default the
    outputs are relabeled (X x X) so the gate reads as CZ
  - the analyser measures the control in (|H> +- e^{i phi1}|V>)/sqrt2 and the
    target in (|H> +- e^{i phi2}|V>)/sqrt2; the default phi1 = pi, phi2 = 0
    reproduces the pairing psi'+ -> DD, psi'- -> AD, phi'+ -> DA, phi'- -> AA
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from ppbs_cz_system.core.errors import DomainError, NullPostselectionError
from ppbs_cz_system.core.fock_state import (
    ModeLabel,
    PhotonicState,
    PostselectionResult,
    Polarization,
    SpatialPattern,
    TransferMatrix,
    coincidence,
    evolve,
    internal_amplitude_blocks,
    postselect,
    spatial_occupancy,
)
from ppbs_cz_system.analysis.tomography import chi_from_kraus
from ppbs_cz_system.core.qubit_states import (
    IDENTITY_2,
    PAULI_X,
    as_density_matrix,
    check_density_matrix,
    hadamard_second,
    ket,
    normalize,
    projector,
)
from ppbs_cz_system.optics.elements import (
    Circuit,
    _check_fraction,
    bs,
    compile_circuit,
    distinguishability_prepare,
    hwp,
    jones_hwp,
    jones_qwp,
    pbs,
    ppbs,
)

CONTROL_PATH = 0
TARGET_PATH = 1
IDEAL_ETA = 1.0 / 3.0
KRAUS_TOLERANCE = 1e-14

OUTCOME_LABELS = ("DD", "AD", "DA", "AA")
DEFAULT_ANALYSER_PHASES = (math.pi, 0.0)


class Relabeling(Enum):
    NONE = "none"
    XX = "xx"


class Architecture(Enum):
    PPBS = "ppbs"
    INTERFEROMETRIC = "interferometric"


@dataclass(frozen=True, eq=False)
class GateInstance:
    circuit: Circuit
    reflectivities: Tuple[float, float, float]
    overlap: float
    relabeling: Relabeling
    success_pattern: SpatialPattern
    architecture: Architecture
    transfer: TransferMatrix = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "transfer", compile_circuit(self.circuit))

    def with_overlap(self, overlap):
        return GateInstance(self.circuit, self.reflectivities, _check_fraction("Overlap V", overlap),
                            self.relabeling, self.success_pattern, self.architecture)

    def describe(self):
        eta = ", ".join(f"{e:.4g}" for e in self.reflectivities)
        return (f"{self.architecture.value} CZ (eta = {eta}; V = {self.overlap:.4g}; "
                f"relabel = {self.relabeling.value})")


# ── Gate construction ─────────────────────────────────────────────────────────

def build_ppbs_cz(eta1=IDEAL_ETA, eta2=IDEAL_ETA, eta3=IDEAL_ETA, overlap=1.0, relabel=True):
    """
    PPBS CZ gate: one interfering PPBS, a half-wave plate at 45 deg on each
    path, then one PPBS per path whose transmitted port is dumped.

    Args:
        eta1, eta2, eta3: H reflectivities of the three PPBSs (V is fully reflected)
        overlap: two-photon interference visibility V at the first PPBS
        relabel: apply the X x X output relabeling

    Returns:
        GateInstance
    """
    etas = tuple(_check_fraction(f"eta{i + 1}", e) for i, e in enumerate((eta1, eta2, eta3)))
    overlap = _check_fraction("Overlap V", overlap)
    circuit = Circuit((
        ppbs(CONTROL_PATH, TARGET_PATH, etas[0], 1.0),
        hwp(CONTROL_PATH, math.pi / 4),
        hwp(TARGET_PATH, math.pi / 4),
        ppbs(CONTROL_PATH, None, etas[1], 1.0),
        ppbs(TARGET_PATH, None, etas[2], 1.0),
    ), path_count=2)
    return GateInstance(circuit, etas, overlap,
                        Relabeling.XX if relabel else Relabeling.NONE,
                        coincidence(CONTROL_PATH, TARGET_PATH), Architecture.PPBS)


def build_interferometric_cz(eta=IDEAL_ETA, overlap=1.0):
    """
    Dual-rail CZ gate: polarizing splitters move V onto separate rails, the H
    rails meet at a central splitter, each V rail meets a vacuum port at its
    own splitter, and the rails are recombined.

    Paths: 0 control, 1 target, 2 control-V rail, 3 target-V rail, 4-5 vacuum.
    """
    eta = _check_fraction("eta", eta)
    overlap = _check_fraction("Overlap V", overlap)
    circuit = Circuit((
        pbs(CONTROL_PATH, 2),
        pbs(TARGET_PATH, 3),
        bs(CONTROL_PATH, TARGET_PATH, eta),
        bs(2, 4, eta),
        bs(5, 3, eta),
        pbs(CONTROL_PATH, 2),
        pbs(TARGET_PATH, 3),
    ), path_count=6)
    pattern = SpatialPattern({CONTROL_PATH: 1, TARGET_PATH: 1})
    return GateInstance(circuit, (eta, eta, eta), overlap, Relabeling.NONE,
                        pattern, Architecture.INTERFEROMETRIC)


# ── Running the gate ──────────────────────────────────────────────────────────

def gate_input_state(gate: GateInstance, psi) -> PhotonicState:
    """
    Two-photon input for a (possibly entangled) pure polarization state.

    The control photon is the reference wavepacket; the target photon carries
    the mismatch set by the gate's overlap.
    """
    psi = normalize(np.asarray(psi, dtype=complex).reshape(4))
    internal_c = distinguishability_prepare(gate.overlap, 0)
    internal_t = distinguishability_prepare(gate.overlap, 1)
    terms = {}
    for pc in Polarization:
        for pt in Polarization:
            alpha = psi[2 * int(pc) + int(pt)]
            if alpha == 0:
                continue
            for ic, cc in internal_c.items():
                for it, ct in internal_t.items():
                    key = (ModeLabel(CONTROL_PATH, pc, ic), ModeLabel(TARGET_PATH, pt, it))
                    terms[key] = terms.get(key, 0j) + alpha * cc * ct
    return PhotonicState(terms, 2)


def run_gate(gate: GateInstance, psi) -> PostselectionResult:
    """Evolve a pure input through the gate and post-select on coincidences."""
    output = evolve(gate_input_state(gate, psi), gate.transfer)
    return postselect(output, gate.success_pattern)


def _relabel_matrix(gate):
    if gate.relabeling is Relabeling.XX:
        return np.kron(PAULI_X, PAULI_X)
    return np.eye(4, dtype=complex)


def kraus_operators(gate: GateInstance) -> List[np.ndarray]:
    """
    Post-selected gate as Kraus operators, one per pair of output wavepacket
    labels (control, target). Columns follow the HH, HV, VH, VV inputs.
    """
    relabel = _relabel_matrix(gate)
    ops: Dict[Tuple[int, int], np.ndarray] = {}
    for col in range(4):
        basis = np.zeros(4, dtype=complex)
        basis[col] = 1.0
        output = evolve(gate_input_state(gate, basis), gate.transfer)
        kept = {k: v for k, v in output.terms.items()
                if gate.success_pattern(spatial_occupancy(k))}
        if not kept:
            continue
        blocks = internal_amplitude_blocks(PhotonicState(kept, 2), CONTROL_PATH, TARGET_PATH)
        for key, vec in blocks.items():
            ops.setdefault(key, np.zeros((4, 4), dtype=complex))[:, col] = relabel @ vec
    return [ops[k] for k in sorted(ops) if np.max(np.abs(ops[k])) > KRAUS_TOLERANCE]


def induced_operator(gate: GateInstance) -> np.ndarray:
    """The single 4x4 operator of a gate whose photons are indistinguishable."""
    ops = kraus_operators(gate)
    if len(ops) != 1:
        raise DomainError(f"Gate has {len(ops)} Kraus operators; it is not a single operator (V < 1?)")
    return ops[0]


@dataclass(frozen=True)
class GateOutput:
    state: Optional[np.ndarray]
    success_probability: float

    @property
    def is_null(self):
        return self.state is None


def apply_gate(gate: GateInstance, rho, kraus=None) -> GateOutput:
    """
    Propagate a (possibly mixed) two-qubit input through the gate.

    Returns:
        GateOutput with the normalized post-selected state and the coincidence
        success probability; a null output if nothing survives
    """
    rho = check_density_matrix(as_density_matrix(rho))
    kraus = kraus_operators(gate) if kraus is None else kraus
    sigma = sum((k @ rho @ k.conj().T for k in kraus), np.zeros((4, 4), dtype=complex))
    probability = float(np.real(np.trace(sigma)))
    if probability <= KRAUS_TOLERANCE:
        return GateOutput(None, 0.0)
    sigma = sigma / probability
    return GateOutput((sigma + sigma.conj().T) / 2, probability)


def success_probability(gate: GateInstance, rho) -> float:
    return apply_gate(gate, rho).success_probability


def process_chi(gate: GateInstance) -> np.ndarray:
    """Unit-trace chi matrix of the post-selected gate, built from its Kraus operators."""
    return chi_from_kraus(kraus_operators(gate))


# ── Source and input states ───────────────────────────────────────────────────

def source_state(phi) -> np.ndarray:
    """(|HH> + e^{i phi}|VV>)/sqrt2 as a density matrix."""
    if not math.isfinite(phi):
        raise DomainError(f"Source phase must be finite: {phi}")
    return projector(normalize(ket("HH") + np.exp(1j * phi) * ket("VV")))


class BellLabel(Enum):
    PSI_PLUS = "psi'+"
    PSI_MINUS = "psi'-"
    PHI_PLUS = "phi'+"
    PHI_MINUS = "phi'-"


@dataclass(frozen=True, eq=False)
class BellInput:
    label: BellLabel
    state: np.ndarray


def bell_kets() -> Dict[BellLabel, np.ndarray]:
    return {
        BellLabel.PSI_PLUS: normalize(ket("HA") + ket("VD")),
        BellLabel.PSI_MINUS: normalize(ket("HA") - ket("VD")),
        BellLabel.PHI_PLUS: normalize(ket("HD") + ket("VA")),
        BellLabel.PHI_MINUS: normalize(ket("HD") - ket("VA")),
    }


def bell_inputs() -> List[BellInput]:
    """The four Bell states with a Hadamard on the target qubit."""
    return [BellInput(label, projector(vec)) for label, vec in bell_kets().items()]


def displayed_bell_inputs() -> List[BellInput]:
    """Analyser inputs with the target Hadamard undone, i.e. the standard Bell states."""
    return [BellInput(b.label, hadamard_second(b.state)) for b in bell_inputs()]


def analyser_basis(phases=DEFAULT_ANALYSER_PHASES) -> List[np.ndarray]:
    """Outcome kets in DD, AD, DA, AA order for the given (phi1, phi2)."""
    phi1, phi2 = phases
    s = 1.0 / math.sqrt(2.0)
    control = {"D": np.array([s, s * np.exp(1j * phi1)]), "A": np.array([s, -s * np.exp(1j * phi1)])}
    target = {"D": np.array([s, s * np.exp(1j * phi2)]), "A": np.array([s, -s * np.exp(1j * phi2)])}
    return [np.kron(control[label[0]], target[label[1]]) for label in OUTCOME_LABELS]


@dataclass(frozen=True, eq=False)
class BellAnalysis:
    distribution: np.ndarray      # probabilities over OUTCOME_LABELS
    success_probability: float
    output_state: np.ndarray

    def most_likely(self):
        return OUTCOME_LABELS[int(np.argmax(self.distribution))]


def analyze_bell(rho, gate: GateInstance, phases=DEFAULT_ANALYSER_PHASES, kraus=None) -> BellAnalysis:
    """
    Send an input through the gate and measure both outputs in the D/A basis.

    Raises:
        NullPostselectionError if no coincidence can occur
    """
    output = apply_gate(gate, rho, kraus)
    if output.is_null:
        raise NullPostselectionError(f"No coincidences from {gate.describe()}")
    probs = np.array([float(np.real(np.vdot(v, output.state @ v))) for v in analyser_basis(phases)])
    probs = np.clip(probs, 0.0, None)
    return BellAnalysis(probs / probs.sum(), output.success_probability, output.state)


def ideal_analyser_outputs(phases=DEFAULT_ANALYSER_PHASES) -> Dict[BellLabel, np.ndarray]:
    """Expected separable output for each Bell input under the analyser convention."""
    basis = analyser_basis(phases)
    return {label: projector(basis[i]) for i, label in enumerate(BellLabel)}


# ── Wave-plate state preparation ──────────────────────────────────────────────

def prepare_state(hwp_angle, qwp_angle) -> np.ndarray:
    """|H> sent through a half-wave plate and then a quarter-wave plate."""
    return jones_qwp(qwp_angle) @ jones_hwp(hwp_angle) @ np.array([1.0, 0.0], dtype=complex)


@dataclass(frozen=True)
class WaveplateFit:
    angles: Tuple[float, ...]
    fidelity: float


def _best_of_starts(cost, starts):
    best = None
    for x0 in starts:
        res = minimize(cost, x0, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    return best


def fit_waveplates(target) -> WaveplateFit:
    """
    Half- and quarter-wave plate angles preparing ``target`` from |H>.

    Returns:
        WaveplateFit with (hwp, qwp) angles and the achieved fidelity
    """
    target = normalize(np.asarray(target, dtype=complex).reshape(2))

    def cost(x):
        return 1.0 - abs(np.vdot(target, prepare_state(x[0], x[1]))) ** 2

    grid = np.linspace(0.0, math.pi / 2, 5, endpoint=False)
    res = _best_of_starts(cost, [(h, q) for h in grid for q in grid])
    return WaveplateFit((float(res.x[0]), float(res.x[1])), 1.0 - float(res.fun))


def waveplate_unitary(q1, h, q2):
    """QWP(q1) -> HWP(h) -> QWP(q2); covers every single-qubit unitary up to phase."""
    return jones_qwp(q2) @ jones_hwp(h) @ jones_qwp(q1)


def compensate_source(phi, target=None) -> WaveplateFit:
    """
    Wave-plate settings on the control qubit that turn the source state
    (|HH> + e^{i phi}|VV>)/sqrt2 into ``target`` (default (|HH> + |VV>)/sqrt2).

    Returns:
        WaveplateFit with (qwp1, hwp, qwp2) angles and the achieved fidelity
    """
    rho = source_state(phi)
    target = normalize(ket("HH") + ket("VV")) if target is None else normalize(target)

    def cost(x):
        u = np.kron(waveplate_unitary(*x), IDENTITY_2)
        out = u @ rho @ u.conj().T
        return 1.0 - float(np.real(np.vdot(target, out @ target)))

    grid = np.linspace(0.0, math.pi, 4, endpoint=False)
    res = _best_of_starts(cost, [(a, b, c) for a in grid for b in grid[:2] for c in grid])
    return WaveplateFit(tuple(float(v) for v in res.x), 1.0 - float(res.fun))
