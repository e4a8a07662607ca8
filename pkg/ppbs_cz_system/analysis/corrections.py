"""
corrections.py
PURPOSE: Numerical modeling of fixable gate errors: local single-qubit
corrections that maximize process fidelity, fits of the analyser output
phases, and bisection of the overlap V for a target metric value.

Corrections act on chi directly. A process E followed by local unitaries
E'(rho) = U_post E(U_pre rho U_pre^dag) U_post^dag has chi' = A chi A^dag with
U_post P_m U_pre = sum_k A_km P_k, so reconstructed and simulated processes are
handled the same way.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from ppbs_cz_system.analysis.metrics import average_gate_fidelity, process_fidelity, state_fidelity
from ppbs_cz_system.analysis.tomography import PAULI_BASIS, chi_ideal_cz, check_chi
from ppbs_cz_system.core.errors import DomainError
from ppbs_cz_system.optics.gate_circuits import DEFAULT_ANALYSER_PHASES, analyser_basis

DEBUG_OPT = False   # Set True to print every restart

CORRECTION_RESTARTS = 20
SIMPLEX_OPTIONS = {"xatol": 1e-10, "fatol": 1e-13, "maxiter": 40000, "maxfev": 60000, "adaptive": True}
BISECTION_TOLERANCE = 1e-6


def euler_unitary(alpha, beta, gamma):
    """Rz(alpha) Ry(beta) Rz(gamma) in the H, V basis; global phase dropped."""
    rz = lambda a: np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
    c, s = math.cos(beta / 2), math.sin(beta / 2)
    ry = np.array([[c, -s], [s, c]], dtype=complex)
    return rz(alpha) @ ry @ rz(gamma)


@dataclass(frozen=True, eq=False)
class LocalCorrection:
    """Euler angles (3 per unitary) for pre-control, pre-target, post-control, post-target."""
    angles: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float).reshape(4, 3)
        if not np.all(np.isfinite(a)):
            raise DomainError("Correction angles must be finite")
        object.__setattr__(self, "angles", a)

    @classmethod
    def identity(cls):
        return cls(np.zeros((4, 3)))

    @property
    def unitaries(self):
        return tuple(euler_unitary(*row) for row in self.angles)

    def pre(self):
        u = self.unitaries
        return np.kron(u[0], u[1])

    def post(self):
        u = self.unitaries
        return np.kron(u[2], u[3])


_BASIS = np.array(PAULI_BASIS)


def correction_matrix(correction: LocalCorrection) -> np.ndarray:
    """A_km = Tr(P_k^dag U_post P_m U_pre) / 4"""
    pre, post = correction.pre(), correction.post()
    moved = np.einsum("ab,mbc,cd->mad", post, _BASIS, pre)
    return np.einsum("kba,mba->km", _BASIS.conj(), moved) / 4.0


def apply_correction(chi, correction: LocalCorrection) -> np.ndarray:
    a = correction_matrix(correction)
    out = a @ np.asarray(chi) @ a.conj().T
    return (out + out.conj().T) / 2


@dataclass(frozen=True, eq=False)
class CorrectionResult:
    correction: LocalCorrection
    fidelity_before: float
    fidelity_after: float
    restart_values: Tuple[float, ...]
    converged: bool

    @property
    def average_before(self):
        return average_gate_fidelity(self.fidelity_before)

    @property
    def average_after(self):
        return average_gate_fidelity(self.fidelity_after)

    @property
    def improvement(self):
        return self.fidelity_after - self.fidelity_before


def optimize_corrections(chi, chi_ideal=None, restarts=CORRECTION_RESTARTS, rng=None) -> CorrectionResult:
    """
    Local unitaries before and after the process that maximize F_P.

    Nelder-Mead over the 12 Euler angles. The first start is the identity,
    the remaining ones are uniform random angles from ``rng``; the best
    restart wins and the result never falls below the uncorrected fidelity.

    Args:
        chi: measured or simulated unit-trace chi matrix
        chi_ideal: target chi (default ideal CZ)
        restarts: number of simplex starts
        rng: numpy Generator for the random starts

    Returns:
        CorrectionResult with F_P before and after
    """
    chi = check_chi(chi)
    chi_ideal = chi_ideal_cz() if chi_ideal is None else check_chi(chi_ideal)
    if restarts < 1:
        raise DomainError(f"Need at least one restart: {restarts}")
    rng = rng if rng is not None else np.random.default_rng(0)

    def cost(x):
        corrected = apply_correction(chi, LocalCorrection(x))
        return -float(np.real(np.trace(corrected @ chi_ideal)))

    before = process_fidelity(chi, chi_ideal)
    best_x, best_val, converged = np.zeros(12), -before, True
    values = []
    for i in range(restarts):
        x0 = np.zeros(12) if i == 0 else rng.uniform(-math.pi, math.pi, size=12)
        res = minimize(cost, x0, method="Nelder-Mead", options=SIMPLEX_OPTIONS)
        # one simplex restart from the end point to escape stagnation
        res = minimize(cost, res.x, method="Nelder-Mead", options=SIMPLEX_OPTIONS)
        values.append(-float(res.fun))
        if DEBUG_OPT:
            print(f"[OPT] restart {i}: F_P={-res.fun:.8f}, evaluations={res.nfev}, {res.message}")
        if res.fun < best_val:
            best_x, best_val, converged = res.x, float(res.fun), bool(res.success)

    correction = LocalCorrection(best_x)
    after = max(before, process_fidelity(apply_correction(chi, correction), chi_ideal))
    return CorrectionResult(correction, before, after, tuple(values), converged)


# ── Analyser phase fit ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PhaseFit:
    phases: Tuple[float, float]
    fidelities: Tuple[float, ...]

    @property
    def mean_fidelity(self):
        return float(np.mean(self.fidelities))


def _wrap(phi):
    return float((phi + math.pi) % (2 * math.pi) - math.pi)


def fit_output_phases(states: Sequence[np.ndarray]) -> PhaseFit:
    """
    Phases (phi1, phi2) making the four output states closest to the
    separable analyser states, taken in DD, AD, DA, AA order.

    Returns:
        PhaseFit with phases wrapped to [-pi, pi) and the per-state fidelities
    """
    if len(states) != 4:
        raise DomainError(f"Need the four analyser output states, got {len(states)}")

    def fidelities(phases):
        basis = analyser_basis(phases)
        return [float(np.real(np.vdot(v, s @ v))) for v, s in zip(basis, states)]

    def cost(x):
        return -float(np.mean(fidelities(x)))

    grid = np.linspace(-math.pi, math.pi, 8, endpoint=False)
    best = None
    for p1 in grid:
        for p2 in grid:
            res = minimize(cost, (p1, p2), method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
            if best is None or res.fun < best.fun:
                best = res
    phases = (_wrap(best.x[0]), _wrap(best.x[1]))
    return PhaseFit(phases, tuple(fidelities(phases)))


def default_phase_fidelity(states: Sequence[np.ndarray]) -> float:
    """Mean fidelity of the four outputs with the default analyser states."""
    basis = analyser_basis(DEFAULT_ANALYSER_PHASES)
    return float(np.mean([state_fidelity(s, np.outer(v, v.conj())) for v, s in zip(basis, states)]))


# ── Overlap bisection ─────────────────────────────────────────────────────────

def bisect_overlap(metric: Callable[[float], float], target, low=0.0, high=1.0,
                   tol=BISECTION_TOLERANCE, max_iterations=100) -> float:
    """
    Overlap V in [low, high] at which a monotone ``metric(V)`` equals ``target``.

    Raises:
        DomainError if the target is not bracketed by the endpoint values
    """
    if not 0.0 <= low < high <= 1.0:
        raise DomainError(f"Bisection interval must satisfy 0 <= low < high <= 1: [{low}, {high}]")
    f_low, f_high = metric(low) - target, metric(high) - target
    if f_low == 0.0:
        return low
    if f_high == 0.0:
        return high
    if f_low * f_high > 0:
        raise DomainError(
            f"Target {target} is not bracketed: metric({low}) = {f_low + target:.6g}, "
            f"metric({high}) = {f_high + target:.6g}")
    for _ in range(max_iterations):
        mid = 0.5 * (low + high)
        f_mid = metric(mid) - target
        if DEBUG_OPT:
            print(f"[OPT] bisect V={mid:.8f}: metric-target={f_mid:+.3e}")
        if f_mid == 0.0 or high - low < tol:
            return mid
        if f_low * f_mid < 0:
            high = mid
        else:
            low, f_low = mid, f_mid
    return 0.5 * (low + high)
