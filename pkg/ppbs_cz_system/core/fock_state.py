"""
fock_state.py
PURPOSE: Few-photon states over labeled optical modes and their evolution
through linear transfer matrices, including post-selection on coincidences.

KEY CONCEPT: a linear-optical network is fully described by its single-photon
transfer matrix M (output modes x input modes). For n photons, the amplitude
to go from occupation S_in to occupation S_out is

    perm(M[S_out, S_in]) / sqrt(prod(S_in multiplicities!) * prod(S_out multiplicities!))

Loss is leakage out of the tracked modes, i.e. a sub-unitary M.
"""

import itertools
import math
from dataclasses import dataclass, field
from enum import IntEnum
from types import MappingProxyType
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from ppbs_cz_system.core.errors import DomainError

DEBUG_FOCK = False   # Set True to print per-evolution term counts

DEFAULT_INTERNAL_DIMENSION = 2   # reference wavepacket + one orthogonal complement
MAX_PHOTONS = 4
PRUNE_TOLERANCE = 1e-14          # amplitudes below this are dropped after evolution
GAIN_TOLERANCE = 1e-12           # singular values may exceed 1 by at most this
NORM_TOLERANCE = 1e-10


class Polarization(IntEnum):
    H = 0
    V = 1


@dataclass(frozen=True, order=True)
class ModeLabel:
    """One optical mode: path, polarization, distinguishability index."""
    spatial: int
    polarization: Polarization
    internal: int = 0

    def __post_init__(self):
        if self.spatial < 0:
            raise DomainError(f"Spatial path index must be non-negative: {self.spatial}")
        if self.internal < 0:
            raise DomainError(f"Internal index must be non-negative: {self.internal}")
        object.__setattr__(self, "polarization", Polarization(self.polarization))

    def __str__(self):
        return f"{self.spatial}{self.polarization.name}{self.internal}"


Occupation = Tuple[ModeLabel, ...]


def all_modes(path_count, internal_dimension=DEFAULT_INTERNAL_DIMENSION):
    """Canonically ordered list of every mode for the given path count."""
    if path_count < 1:
        raise DomainError(f"Path count must be at least 1: {path_count}")
    if internal_dimension < 1:
        raise DomainError(f"Internal dimension must be at least 1: {internal_dimension}")
    return tuple(
        ModeLabel(p, pol, k)
        for p in range(path_count)
        for pol in Polarization
        for k in range(internal_dimension)
    )


def _multiplicity_factor(occupation):
    """prod(n_i!) over the distinct modes of an occupation list."""
    factor = 1
    for _, group in itertools.groupby(occupation):
        factor *= math.factorial(len(list(group)))
    return factor


def permanent(matrix):
    """Permanent of a square matrix by Ryser's inclusion-exclusion formula."""
    a = np.asarray(matrix, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DomainError(f"Permanent needs a square matrix, got shape {a.shape}")
    if n == 0:
        return 1.0 + 0.0j
    total = 0.0 + 0.0j
    for mask in range(1, 1 << n):
        cols = [j for j in range(n) if (mask >> j) & 1]
        row_sums = a[:, cols].sum(axis=1)
        total += (-1) ** len(cols) * np.prod(row_sums)
    return (-1) ** n * total


@dataclass(frozen=True)
class PhotonicState:
    """
    Sparse n-photon state: sorted occupation list -> complex amplitude.

    The norm is 1 for freshly prepared states and may drop below 1 after lossy
    evolution; the deficit is the loss probability. An empty term map means
    every photon was lost.
    """
    terms: Mapping[Occupation, complex]
    photon_number: int

    def __post_init__(self):
        n = int(self.photon_number)
        if not 1 <= n <= MAX_PHOTONS:
            raise DomainError(f"Photon number must be in [1, {MAX_PHOTONS}]: {self.photon_number}")
        canonical: Dict[Occupation, complex] = {}
        for key, amp in dict(self.terms).items():
            occupation = tuple(sorted(key))
            if len(occupation) != n:
                raise DomainError(
                    f"Occupation {tuple(str(m) for m in occupation)} has {len(occupation)} photons, expected {n}")
            canonical[occupation] = canonical.get(occupation, 0j) + complex(amp)
        object.__setattr__(self, "terms", MappingProxyType(canonical))
        object.__setattr__(self, "photon_number", n)
        norm2 = self.norm2()
        if norm2 > 1.0 + NORM_TOLERANCE:
            raise DomainError(f"State norm^2 exceeds 1: {norm2}")

    # ── Constructors ──────────────────────────────────────────────────────────

    @classmethod
    def single_term(cls, occupation: Iterable[ModeLabel], amplitude=1.0):
        occupation = tuple(occupation)
        return cls({occupation: amplitude}, len(occupation))

    @classmethod
    def from_photons(cls, photons: Sequence[Mapping[ModeLabel, complex]]):
        """
        Build prod_i (sum_m c_im a_m^dagger)|0> and normalize it.

        Args:
            photons: one {mode: amplitude} map per photon

        Returns:
            Normalized PhotonicState
        """
        if not photons:
            raise DomainError("At least one photon is required")
        amplitudes: Dict[Occupation, complex] = {}
        for choice in itertools.product(*[list(p.items()) for p in photons]):
            modes = tuple(sorted(m for m, _ in choice))
            coeff = np.prod([c for _, c in choice])
            amplitudes[modes] = amplitudes.get(modes, 0j) + coeff
        # a^dagger products carry sqrt(n!) per multiply-occupied mode
        terms = {k: v * math.sqrt(_multiplicity_factor(k)) for k, v in amplitudes.items()
                 if abs(v) > PRUNE_TOLERANCE}
        norm = math.sqrt(sum(abs(v) ** 2 for v in terms.values()))
        if norm == 0.0:
            raise DomainError("Photon amplitudes cancel to the vacuum")
        return cls({k: v / norm for k, v in terms.items()}, len(photons))

    # ── Queries ───────────────────────────────────────────────────────────────

    def norm2(self):
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    def amplitude(self, occupation: Iterable[ModeLabel]):
        return self.terms.get(tuple(sorted(occupation)), 0j)

    def modes(self):
        """Every mode occupied in at least one term."""
        return sorted({m for key in self.terms for m in key})

    def spatial_paths(self):
        return sorted({m.spatial for m in self.modes()})

    def is_empty(self):
        return not self.terms

    def __len__(self):
        return len(self.terms)


def spatial_occupancy(occupation: Occupation) -> Dict[int, int]:
    """Photon count per path for one occupation list."""
    counts: Dict[int, int] = {}
    for mode in occupation:
        counts[mode.spatial] = counts.get(mode.spatial, 0) + 1
    return counts


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """
    Single-photon transfer matrix with its mode bookkeeping.

    ``matrix[i, j]`` is the amplitude for a photon entering ``in_modes[j]`` to
    leave in ``out_modes[i]``.
    """
    matrix: np.ndarray
    in_modes: Tuple[ModeLabel, ...]
    out_modes: Tuple[ModeLabel, ...]
    in_index: Mapping[ModeLabel, int] = field(init=False, repr=False, compare=False)
    out_index: Mapping[ModeLabel, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        in_modes = tuple(self.in_modes)
        out_modes = tuple(self.out_modes)
        if m.ndim != 2 or m.shape != (len(out_modes), len(in_modes)):
            raise DomainError(
                f"Matrix shape {m.shape} does not match ({len(out_modes)} out, {len(in_modes)} in) modes")
        if len(set(in_modes)) != len(in_modes) or len(set(out_modes)) != len(out_modes):
            raise DomainError("Mode lists must not contain duplicates")
        if m.size:
            top = float(np.linalg.norm(m, ord=2))
            if top > 1.0 + GAIN_TOLERANCE:
                raise DomainError(f"Transfer matrix has gain (largest singular value {top:.15f})")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "in_modes", in_modes)
        object.__setattr__(self, "out_modes", out_modes)
        object.__setattr__(self, "in_index", MappingProxyType({mode: i for i, mode in enumerate(in_modes)}))
        object.__setattr__(self, "out_index", MappingProxyType({mode: i for i, mode in enumerate(out_modes)}))

    @classmethod
    def identity(cls, modes: Sequence[ModeLabel]):
        modes = tuple(modes)
        return cls(np.eye(len(modes)), modes, modes)

    @property
    def dims(self):
        return self.matrix.shape

    def __matmul__(self, other):
        """``B @ A`` is the network that applies A first, then B."""
        if not isinstance(other, TransferMatrix):
            return NotImplemented
        if other.out_modes != self.in_modes:
            raise DomainError(
                f"Cannot compose: {len(other.out_modes)} output modes feed {len(self.in_modes)} input modes")
        return TransferMatrix(self.matrix @ other.matrix, other.in_modes, self.out_modes)

    def then(self, other):
        """Apply self, then other."""
        return other @ self

    def is_unitary(self, tol=1e-12):
        if self.dims[0] != self.dims[1]:
            return False
        return np.allclose(self.matrix.conj().T @ self.matrix, np.eye(self.dims[1]), atol=tol)

    def element(self, out_mode: ModeLabel, in_mode: ModeLabel):
        return self.matrix[self.out_index[out_mode], self.in_index[in_mode]]


def evolve(state: PhotonicState, m: TransferMatrix) -> PhotonicState:
    """
    Push a PhotonicState through a linear network.

    Args:
        state: input state; every occupied mode must be an input of ``m``
        m: transfer matrix of the network

    Returns:
        Output PhotonicState (norm^2 never larger than the input's)
    """
    if not isinstance(state, PhotonicState) or not isinstance(m, TransferMatrix):
        raise DomainError("evolve() needs a PhotonicState and a TransferMatrix")
    for mode in state.modes():
        if mode not in m.in_index:
            raise DomainError(f"Mode {mode} is not an input of the transfer matrix")

    n = state.photon_number
    u = m.matrix
    out: Dict[Occupation, complex] = {}
    for occupation, amp in state.terms.items():
        cols = [m.in_index[mode] for mode in occupation]
        sub = u[:, cols]
        reachable = [i for i in range(u.shape[0]) if np.any(np.abs(sub[i]) > 0.0)]
        in_factor = _multiplicity_factor(occupation)
        for rows in itertools.combinations_with_replacement(reachable, n):
            value = permanent(sub[list(rows), :])
            if value == 0:
                continue
            out_occ = tuple(sorted(m.out_modes[r] for r in rows))
            norm = math.sqrt(in_factor * _multiplicity_factor(out_occ))
            out[out_occ] = out.get(out_occ, 0j) + amp * value / norm

    pruned = {k: v for k, v in out.items() if abs(v) >= PRUNE_TOLERANCE}
    if DEBUG_FOCK:
        print(f"[FOCK] evolve: {len(state)} -> {len(pruned)} terms "
              f"(norm^2 {state.norm2():.6f} -> {sum(abs(v) ** 2 for v in pruned.values()):.6f})")
    return PhotonicState(pruned, n)


# ── Post-selection ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SpatialPattern:
    """Predicate on per-path photon counts: every listed path holds exactly its count."""
    counts: Mapping[int, int]

    def __post_init__(self):
        object.__setattr__(self, "counts", MappingProxyType(dict(self.counts)))

    @property
    def paths(self):
        return sorted(self.counts)

    def __call__(self, occupancy: Mapping[int, int]) -> bool:
        return all(occupancy.get(path, 0) == count for path, count in self.counts.items())


def coincidence(*paths):
    """One photon in each of the given paths."""
    return SpatialPattern({p: 1 for p in paths})


@dataclass(frozen=True)
class PostselectionResult:
    state: Optional[PhotonicState]
    success_probability: float

    @property
    def is_null(self):
        return self.state is None


def postselect(state: PhotonicState, pattern: Callable[[Mapping[int, int]], bool]) -> PostselectionResult:
    """
    Keep only terms whose spatial occupancy satisfies ``pattern``.

    Returns:
        PostselectionResult with the renormalized kept state and the kept
        norm^2; a null result (state None, probability 0) if nothing survives.
    """
    paths = getattr(pattern, "paths", None)
    if paths is not None and not state.is_empty():
        span = max(state.spatial_paths())
        bad = [p for p in paths if p < 0 or p > span]
        if bad:
            raise DomainError(f"Pattern references paths {bad} outside the state's paths 0..{span}")

    kept = {k: v for k, v in state.terms.items() if pattern(spatial_occupancy(k))}
    probability = float(sum(abs(v) ** 2 for v in kept.values()))
    if probability <= PRUNE_TOLERANCE ** 2:
        return PostselectionResult(None, 0.0)
    scale = 1.0 / math.sqrt(probability)
    return PostselectionResult(
        PhotonicState({k: v * scale for k, v in kept.items()}, state.photon_number),
        probability,
    )


# ── Reduction to polarization qubits ─────────────────────────────────────────

def internal_amplitude_blocks(state: PhotonicState, control_path=0, target_path=1):
    """
    Split a one-photon-per-path state into polarization amplitude vectors.

    Returns:
        dict {(control internal, target internal): length-4 amplitude vector in
        HH, HV, VH, VV order}
    """
    if state.photon_number != 2:
        raise DomainError(f"Qubit reduction needs exactly 2 photons, got {state.photon_number}")
    blocks: Dict[Tuple[int, int], np.ndarray] = {}
    for occupation, amp in state.terms.items():
        by_path = {}
        for mode in occupation:
            by_path.setdefault(mode.spatial, []).append(mode)
        if sorted(by_path) != sorted((control_path, target_path)) or any(len(v) != 1 for v in by_path.values()):
            raise DomainError(
                f"Term {tuple(str(m) for m in occupation)} is not one photon per qubit path; post-select first")
        c = by_path[control_path][0]
        t = by_path[target_path][0]
        key = (c.internal, t.internal)
        if key not in blocks:
            blocks[key] = np.zeros(4, dtype=complex)
        blocks[key][2 * int(c.polarization) + int(t.polarization)] += amp
    return blocks


def reduce_to_qubits(state: PhotonicState, control_path=0, target_path=1) -> np.ndarray:
    """
    Trace out internal labels of a one-photon-per-path state.

    Returns:
        4x4 unit-trace density matrix in HH, HV, VH, VV order
    """
    blocks = internal_amplitude_blocks(state, control_path, target_path)
    rho = np.zeros((4, 4), dtype=complex)
    for vec in blocks.values():
        rho += np.outer(vec, vec.conj())
    trace = float(np.real(np.trace(rho)))
    if trace <= 0.0:
        raise DomainError("Cannot reduce a state with zero norm")
    return rho / trace
