"""
elements.py
PURPOSE: Optical components (PPBS, beamsplitters, wave plates, loss, phase)
and their composition into circuits over labeled paths.

SIGN CONVENTION (the source experiment never states one):
every two-port splitter acts on (path_a, path_b) for each polarization p as

    [[ sqrt(eta_p),      sqrt(1 - eta_p) ],
     [ sqrt(1 - eta_p), -sqrt(eta_p)     ]]

so "reflection" keeps a photon in its own path, with a minus sign on path_b.
This reproduces the -alpha|HH> coefficient of the CZ gate with no extra phases.
Wave plates use HWP = [[cos 2t, sin 2t], [sin 2t, -cos 2t]] and a QWP equal to
diag(1, i) at t = 0; global phases are never physical here.

A splitter port given as ``None`` is dumped: its output is not tracked, which
makes the element sub-unitary on the tracked paths.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from ppbs_cz_system.core.errors import DomainError
from ppbs_cz_system.core.fock_state import (
    DEFAULT_INTERNAL_DIMENSION,
    ModeLabel,
    PhotonicState,
    Polarization,
    TransferMatrix,
    all_modes,
    coincidence,
    evolve,
    postselect,
)


class ElementKind(Enum):
    PPBS = "ppbs"
    BS = "bs"
    PBS = "pbs"
    HWP = "hwp"
    QWP = "qwp"
    LOSS = "loss"
    PHASE = "phase"


TWO_PORT_KINDS = (ElementKind.PPBS, ElementKind.BS, ElementKind.PBS)


# ── Jones blocks ──────────────────────────────────────────────────────────────

def jones_hwp(theta):
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def _rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]], dtype=complex)


def jones_qwp(theta):
    """Quarter-wave plate with fast axis at ``theta``: R(-t) diag(1, i) R(t)."""
    return _rotation(-theta) @ np.diag([1.0, 1j]) @ _rotation(theta)


def jones_phase(phi):
    """Relative phase phi on V with respect to H."""
    return np.diag([1.0, np.exp(1j * phi)]).astype(complex)


def splitter_block(eta):
    r, t = math.sqrt(eta), math.sqrt(1.0 - eta)
    return np.array([[r, t], [t, -r]], dtype=complex)


def _check_fraction(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and 0.0 <= value <= 1.0):
        raise DomainError(f"{name} must be in [0, 1]: {value}")
    return float(value)


def _check_angle(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value)):
        raise DomainError(f"{name} must be a finite angle in radians: {value}")
    return float(value)


def _check_path(path):
    if path is not None and (not isinstance(path, int) or path < 0):
        raise DomainError(f"Path index must be a non-negative integer: {path}")
    return path


# ── Elements ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Element:
    kind: ElementKind
    params: Tuple[float, ...]
    acts_on: Tuple[Optional[int], ...]

    def describe(self):
        paths = ",".join("dump" if p is None else str(p) for p in self.acts_on)
        values = ",".join(f"{v:.6g}" for v in self.params)
        return f"{self.kind.value}({paths}; {values})"

    def tracked_paths(self):
        return [p for p in self.acts_on if p is not None]

    def polarization_block(self, pol: Polarization):
        """2x2 splitter block for one polarization (two-port kinds only)."""
        if self.kind not in TWO_PORT_KINDS:
            raise DomainError(f"{self.kind.value} is not a two-port element")
        return splitter_block(self.params[int(pol)])

    def jones(self):
        """2x2 polarization matrix (single-path kinds only)."""
        if self.kind is ElementKind.HWP:
            return jones_hwp(self.params[0])
        if self.kind is ElementKind.QWP:
            return jones_qwp(self.params[0])
        if self.kind is ElementKind.PHASE:
            return jones_phase(self.params[0])
        if self.kind is ElementKind.LOSS:
            return math.sqrt(self.params[0]) * np.eye(2, dtype=complex)
        raise DomainError(f"{self.kind.value} has no single-path Jones matrix")


def ppbs(path_a, path_b, eta_h, eta_v):
    """Partially-polarising beamsplitter with per-polarization reflectivities."""
    eta_h = _check_fraction("eta_H", eta_h)
    eta_v = _check_fraction("eta_V", eta_v)
    _check_path(path_a)
    _check_path(path_b)
    if path_a is None and path_b is None:
        raise DomainError("A splitter needs at least one tracked port")
    if path_a is not None and path_a == path_b:
        raise DomainError(f"Splitter ports must differ: {path_a}")
    return Element(ElementKind.PPBS, (eta_h, eta_v), (path_a, path_b))


def bs(path_a, path_b, eta):
    """Polarization-insensitive beamsplitter with reflectivity eta."""
    element = ppbs(path_a, path_b, eta, eta)
    return Element(ElementKind.BS, element.params, element.acts_on)


def pbs(path_a, path_b):
    """Polarizing beamsplitter: H stays in its path, V swaps paths."""
    element = ppbs(path_a, path_b, 1.0, 0.0)
    return Element(ElementKind.PBS, element.params, element.acts_on)


def hwp(path, theta):
    _check_path(path)
    return Element(ElementKind.HWP, (_check_angle("HWP angle", theta),), (path,))


def qwp(path, theta):
    _check_path(path)
    return Element(ElementKind.QWP, (_check_angle("QWP angle", theta),), (path,))


def loss(path, transmission):
    _check_path(path)
    return Element(ElementKind.LOSS, (_check_fraction("Transmission", transmission),), (path,))


def phase(path, phi):
    _check_path(path)
    return Element(ElementKind.PHASE, (_check_angle("Phase", phi),), (path,))


# ── Circuits ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Circuit:
    elements: Tuple[Element, ...] = ()
    path_count: int = 2
    internal_dimension: int = DEFAULT_INTERNAL_DIMENSION

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    def then(self, *elements):
        return Circuit(self.elements + tuple(elements), self.path_count, self.internal_dimension)

    def modes(self):
        return all_modes(self.path_count, self.internal_dimension)

    def describe(self):
        return " -> ".join(e.describe() for e in self.elements)


def element_matrix(element: Element, modes: Sequence[ModeLabel]):
    """Full square matrix of one element over ``modes`` (identity elsewhere)."""
    index = {m: i for i, m in enumerate(modes)}
    dim = len(modes)
    mat = np.eye(dim, dtype=complex)
    internals = sorted({m.internal for m in modes})

    if element.kind in TWO_PORT_KINDS:
        a, b = element.acts_on
        for pol in Polarization:
            block = element.polarization_block(pol)
            for k in internals:
                ports = [(0, a), (1, b)]
                tracked = [(i, index[ModeLabel(p, pol, k)]) for i, p in ports if p is not None]
                for _, row in tracked:
                    mat[row, row] = 0.0
                for i, row in tracked:
                    for j, col in tracked:
                        mat[row, col] = block[i, j]
        return mat

    (path,) = element.acts_on
    jones = element.jones()
    for k in internals:
        idx = [index[ModeLabel(path, pol, k)] for pol in Polarization]
        for i, row in enumerate(idx):
            for j, col in enumerate(idx):
                mat[row, col] = jones[i, j]
    return mat


def compile_circuit(circuit: Circuit) -> TransferMatrix:
    """
    Ordered product of the element matrices (first element acts first).

    Returns:
        TransferMatrix over path_count x 2 x internal_dimension modes
    """
    if not circuit.elements:
        raise DomainError("Cannot compile an empty circuit")
    for element in circuit.elements:
        for p in element.tracked_paths():
            if p >= circuit.path_count:
                raise DomainError(
                    f"{element.describe()} uses path {p} but the circuit has {circuit.path_count} paths")
    modes = circuit.modes()
    total = np.eye(len(modes), dtype=complex)
    for element in circuit.elements:
        total = element_matrix(element, modes) @ total
    return TransferMatrix(total, modes, modes)


# ── Source-side helpers ───────────────────────────────────────────────────────

def distinguishability_prepare(overlap, which_photon) -> Dict[int, complex]:
    """
    Internal (wavepacket) amplitudes for one photon of a pair.

    Args:
        overlap: interference visibility V in [0, 1]
        which_photon: 0 for the reference photon, 1 for the mismatched photon

    Returns:
        {internal index: amplitude}; the pair overlap is sqrt(V), so the
        two-photon interference visibility is V
    """
    overlap = _check_fraction("Overlap V", overlap)
    if which_photon not in (0, 1):
        raise DomainError(f"which_photon must be 0 (reference) or 1: {which_photon}")
    if which_photon == 0:
        return {0: 1.0}
    amps = {0: math.sqrt(overlap), 1: math.sqrt(1.0 - overlap)}
    return {k: v for k, v in amps.items() if v != 0.0}


def single_photon(path, polarization_vector, internal_amplitudes: Mapping[int, complex] = None):
    """{mode: amplitude} for one photon with the given Jones vector and wavepacket."""
    vec = np.asarray(polarization_vector, dtype=complex)
    if vec.shape != (2,):
        raise DomainError(f"Jones vector must have 2 entries, got {vec.shape}")
    internal_amplitudes = internal_amplitudes or {0: 1.0}
    photon = {}
    for pol in Polarization:
        for k, c in internal_amplitudes.items():
            amp = vec[int(pol)] * c
            if amp != 0:
                photon[ModeLabel(path, pol, k)] = amp
    return photon


def hom_coincidence_probability(overlap, eta=0.5):
    """
    Coincidence probability for one H photon in each input of a beamsplitter.

    The second photon carries the wavepacket mismatch set by ``overlap``.
    """
    circuit = Circuit((bs(0, 1, eta),), path_count=2)
    h = np.array([1.0, 0.0])
    state = PhotonicState.from_photons([
        single_photon(0, h, distinguishability_prepare(overlap, 0)),
        single_photon(1, h, distinguishability_prepare(overlap, 1)),
    ])
    result = postselect(evolve(state, compile_circuit(circuit)), coincidence(0, 1))
    return result.success_probability
