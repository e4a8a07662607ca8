"""
qubit_states.py
PURPOSE: Polarization-qubit vectors and two-qubit density-matrix helpers
shared by the optics, tomography and metrics modules.

Matrix order is always H, V per qubit (HH, HV, VH, VV for two qubits).
Logical labels follow 0 = V, 1 = H.
"""

import numpy as np

from ppbs_cz_system.core.errors import DomainError

DENSITY_TOLERANCE = 1e-10

_S2 = 1.0 / np.sqrt(2.0)

# Single-qubit polarization kets
POLARIZATION_KETS = {
    "H": np.array([1.0, 0.0], dtype=complex),
    "V": np.array([0.0, 1.0], dtype=complex),
    "D": np.array([_S2, _S2], dtype=complex),
    "A": np.array([_S2, -_S2], dtype=complex),
    "R": np.array([_S2, 1j * _S2], dtype=complex),
    "L": np.array([_S2, -1j * _S2], dtype=complex),
}

# Polarization label -> logical label (0 = V, 1 = H; D and A are the logical X eigenstates)
LOGICAL_LABELS = {"H": "1", "V": "0", "D": "+", "A": "-"}

TWO_QUBIT_LABELS = ("HH", "HV", "VH", "VV")
LOGICAL_TWO_QUBIT_LABELS = ("00", "01", "10", "11")

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) * _S2
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def ket(label):
    """
    Product ket from a polarization string, e.g. ket("HA").

    Args:
        label: one character per qubit from H, V, D, A, R, L

    Returns:
        Normalized state vector of length 2**len(label)
    """
    try:
        vec = np.array([1.0], dtype=complex)
        for ch in label:
            vec = np.kron(vec, POLARIZATION_KETS[ch])
        return vec
    except KeyError:
        raise DomainError(f"Unknown polarization label in {label!r}")


def projector(vec):
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def normalize(vec):
    vec = np.asarray(vec, dtype=complex)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise DomainError("Cannot normalize a zero vector")
    return vec / norm


def as_density_matrix(state):
    """Accept a ket or a density matrix and return a 4x4 density matrix."""
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        return projector(normalize(arr))
    return arr


def check_density_matrix(rho, dim=4, tol=DENSITY_TOLERANCE):
    """
    Validate Hermiticity, positivity and unit trace.

    Returns:
        The matrix as a complex ndarray

    Raises:
        DomainError if any invariant fails beyond ``tol``
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise DomainError(f"Density matrix must be {dim}x{dim}, got {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=tol):
        raise DomainError("Density matrix is not Hermitian")
    trace = np.trace(rho)
    if abs(trace - 1.0) > tol:
        raise DomainError(f"Density matrix trace is {trace.real:.12f}, expected 1")
    min_eig = float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)))
    if min_eig < -tol:
        raise DomainError(f"Density matrix is not positive semidefinite (eigenvalue {min_eig:.3e})")
    return rho


def apply_local(rho, u_control, u_target):
    """rho -> (Uc x Ut) rho (Uc x Ut)^dagger"""
    u = np.kron(u_control, u_target)
    return u @ rho @ u.conj().T


def maximally_mixed(dim=4):
    return np.eye(dim, dtype=complex) / dim


def werner_state(p, target=None):
    """p |phi+><phi+| + (1 - p) I/4"""
    if target is None:
        target = normalize(ket("HH") + ket("VV"))
    return p * projector(target) + (1.0 - p) * maximally_mixed()


def hadamard_second(rho):
    """Apply a Hadamard to the target qubit (used to display analyser inputs as Bell states)."""
    return apply_local(as_density_matrix(rho), IDENTITY_2, HADAMARD)


def to_logical_order(matrix):
    """Reorder a 4x4 matrix from HH..VV to logical 00..11 (0 = V, 1 = H)."""
    perm = [3, 2, 1, 0]
    m = np.asarray(matrix)
    return m[np.ix_(perm, perm)]


def logical_label(label):
    """Polarization labels to logical ones: HV -> 10, DA -> +-."""
    try:
        return "".join(LOGICAL_LABELS[c] for c in label)
    except KeyError:
        raise DomainError(f"No logical label for {label!r}; use H, V, D or A")
