"""
tomography.py
PURPOSE: Simulated tomographic counts and maximum-likelihood reconstruction of
two-qubit density matrices and process (chi) matrices, plus bootstrap error bars.

KEY CONCEPT: physicality is guaranteed by the parameterization. Every estimate
is M = T T^dagger with T lower-triangular, so it is Hermitian and positive
semidefinite by construction; the trace is normalized at the end.

Chi matrices are written in the logical Pauli basis {I, X, Y, Z} x {I, X, Y, Z}
(logical 0 = V, 1 = H) with E(rho) = sum_mn chi_mn P_m rho P_n^dagger.
"""

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from ppbs_cz_system.core.errors import DomainError
from ppbs_cz_system.core.qubit_states import (
    DENSITY_TOLERANCE,
    check_density_matrix,
    ket,
    projector,
)

DEBUG_TOMO = False   # Set True to print per-start likelihood values

ML_STARTS = 5
ML_MAX_ITERATIONS = 2000
ML_GRADIENT_TOLERANCE = 1e-8
START_REGULARIZATION = 1e-9
RANK_TOLERANCE = 1e-9

PAULI_LABELS = ("I", "X", "Y", "Z")

# Logical Pauli matrices written in the H, V order used for states
_LOGICAL_PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "Z": np.array([[-1, 0], [0, 1]], dtype=complex),
}

CHI_LABELS = tuple(a + b for a in PAULI_LABELS for b in PAULI_LABELS)
PAULI_BASIS = tuple(np.kron(_LOGICAL_PAULIS[a], _LOGICAL_PAULIS[b]) for a in PAULI_LABELS for b in PAULI_LABELS)

MEASUREMENT_LABELS = ("H", "V", "D", "A", "R", "L")
PREPARATION_LABELS = ("H", "V", "D", "R")


# ── Chi matrices ──────────────────────────────────────────────────────────────

def chi_index(label):
    """Row/column of a two-letter Pauli label such as "ZZ"."""
    try:
        return CHI_LABELS.index(label)
    except ValueError:
        raise DomainError(f"Unknown Pauli label {label!r}")


def operator_coefficients(op):
    """c_m with op = sum_m c_m P_m."""
    op = np.asarray(op, dtype=complex)
    return np.array([np.trace(p.conj().T @ op) / 4.0 for p in PAULI_BASIS])


def chi_from_kraus(kraus_ops: Sequence[np.ndarray], normalize=True) -> np.ndarray:
    """
    Chi matrix of the map rho -> sum_k K rho K^dagger.

    Args:
        kraus_ops: 4x4 operators in HH, HV, VH, VV order
        normalize: scale to unit trace (the post-selected, trace-preserving form)
    """
    chi = np.zeros((16, 16), dtype=complex)
    for k in kraus_ops:
        c = operator_coefficients(k)
        chi += np.outer(c, c.conj())
    if normalize:
        trace = float(np.real(np.trace(chi)))
        if trace <= 0.0:
            raise DomainError("Process has no support; cannot normalize chi")
        chi /= trace
    return chi


def chi_from_operator(op) -> np.ndarray:
    return chi_from_kraus([op])


def chi_ideal_cz() -> np.ndarray:
    """Chi of CZ = (II + IZ + ZI - ZZ)/2; every nonzero entry has magnitude 0.25."""
    return chi_from_operator(np.diag([-1.0, 1.0, 1.0, 1.0]).astype(complex))


def apply_chi(chi, rho):
    """E(rho) = sum_mn chi_mn P_m rho P_n^dagger"""
    out = np.zeros((4, 4), dtype=complex)
    for m, pm in enumerate(PAULI_BASIS):
        left = pm @ rho
        for n, pn in enumerate(PAULI_BASIS):
            if chi[m, n] != 0:
                out += chi[m, n] * left @ pn.conj().T
    return out


def check_chi(chi, tol=DENSITY_TOLERANCE):
    """Hermitian, PSD, unit trace; returns the matrix or raises DomainError."""
    return check_density_matrix(chi, dim=16, tol=tol)


# ── Measurement settings and counts ───────────────────────────────────────────

@dataclass(frozen=True)
class MeasurementSetting:
    control: str
    target: str

    def __post_init__(self):
        for label in (self.control, self.target):
            if label not in MEASUREMENT_LABELS:
                raise DomainError(f"Unknown analysis setting {label!r}; use one of {MEASUREMENT_LABELS}")

    @property
    def label(self):
        return self.control + self.target

    @property
    def projector(self):
        return projector(ket(self.label))

    def expected_probability(self, rho):
        return float(np.real(np.trace(rho @ self.projector)))


def measurement_settings(kind="overcomplete") -> List[MeasurementSetting]:
    """
    Args:
        kind: "overcomplete" for all 36 pairs from H, V, D, A, R, L;
              "minimal" for the 16 pairs from H, V, D, R

    Returns:
        list of MeasurementSetting
    """
    if kind == "overcomplete":
        labels = MEASUREMENT_LABELS
    elif kind == "minimal":
        labels = PREPARATION_LABELS
    else:
        raise DomainError(f"Unknown settings set {kind!r}; use 'overcomplete' or 'minimal'")
    return [MeasurementSetting(a, b) for a, b in itertools.product(labels, labels)]


@dataclass(frozen=True)
class CountRecord:
    setting: MeasurementSetting
    count: float
    total_scale: float
    rng_seed: Optional[int] = None
    rng_stream: Optional[int] = None   # spawned stream index when drawn from a run seed

    def __post_init__(self):
        if not np.isfinite(self.count) or self.count < 0:
            raise DomainError(f"Counts must be non-negative: {self.setting.label} = {self.count}")


def _generator(rng=None, seed=None):
    if rng is not None:
        return rng
    if seed is None:
        raise DomainError("Count simulation needs a seed or a generator")
    return np.random.default_rng(seed)


def simulate_counts(rho, settings: Sequence[MeasurementSetting], total_scale, seed=None, rng=None,
                    stream=None) -> List[CountRecord]:
    """
    Poisson counts with mean total_scale * Tr[rho Pi] for each setting.

    Args:
        seed: integer seed, recorded in each CountRecord; only drawn from if rng is None
        rng: numpy Generator to draw from (for spawned streams)
        stream: index of the stream rng was spawned as, recorded with the seed
    """
    if not total_scale > 0:
        raise DomainError(f"total_scale must be positive: {total_scale}")
    rho = check_density_matrix(rho)
    gen = _generator(rng, seed)
    means = np.array([max(s.expected_probability(rho), 0.0) * total_scale for s in settings])
    draws = gen.poisson(means)
    return [CountRecord(s, int(n), float(total_scale), seed, stream) for s, n in zip(settings, draws)]


def exact_counts(rho, settings: Sequence[MeasurementSetting], total_scale=1.0) -> List[CountRecord]:
    """Noise-free 'counts' equal to the expected means."""
    rho = check_density_matrix(rho)
    return [CountRecord(s, max(s.expected_probability(rho), 0.0) * total_scale, float(total_scale))
            for s in settings]


# ── Cholesky parameterization ─────────────────────────────────────────────────

_TRIL = {}


def _tril_index(dim):
    if dim not in _TRIL:
        rows, cols = np.tril_indices(dim)
        off = rows != cols
        _TRIL[dim] = (rows, cols, off)
    return _TRIL[dim]


def _t_to_params(t):
    rows, cols, off = _tril_index(t.shape[0])
    vals = t[rows, cols]
    return np.concatenate([vals.real, vals[off].imag])


def _params_to_t(x, dim):
    rows, cols, off = _tril_index(dim)
    n = len(rows)
    vals = x[:n].astype(complex)
    vals[off] += 1j * x[n:]
    t = np.zeros((dim, dim), dtype=complex)
    t[rows, cols] = vals
    return t


def _gradient_params(h, t):
    """Gradient in parameter space of f with df = Re Tr(H dM), M = T T^dagger."""
    rows, cols, off = _tril_index(t.shape[0])
    g = 2.0 * (h @ t)[rows, cols]
    return np.concatenate([g.real, g[off].imag])


def _psd_start(matrix, scale):
    """Nearest PSD matrix (eigenvalue clip) plus a small ridge, as a Cholesky factor."""
    herm = (matrix + matrix.conj().T) / 2
    vals, vecs = np.linalg.eigh(herm)
    vals = np.clip(vals, 0.0, None)
    if vals.sum() <= 0:
        vals = np.ones_like(vals)
    vals = vals / vals.sum() * scale
    ridge = START_REGULARIZATION * scale
    while True:
        try:
            return np.linalg.cholesky((vecs * vals) @ vecs.conj().T + ridge * np.eye(len(vals)))
        except np.linalg.LinAlgError:
            ridge *= 10.0


@dataclass(frozen=True, eq=False)
class MLEstimate:
    matrix: np.ndarray
    objective: float
    history: Tuple[float, ...]
    iterations: int
    converged: bool
    linear_estimate: np.ndarray = field(repr=False, default=None)
    intensity: float = 1.0   # fitted trace before normalization; counts for state fits


def _run_ml(objective, gradient, t_start, dim, starts, rng, tag):
    """
    Multi-start BFGS over Cholesky factors.

    The first start is ``t_start``; further starts perturb it with ``rng``.
    Returns the best (T, result, history, converged).
    """
    best = None
    x_ref = _t_to_params(t_start)
    spread = max(float(np.sqrt(np.mean(x_ref ** 2))), 1e-3)
    for i in range(starts):
        x0 = x_ref if i == 0 else x_ref + rng.normal(0.0, 0.3 * spread, size=x_ref.size)
        history = [objective(x0)]
        res = minimize(objective, x0, jac=gradient, method="BFGS",
                       callback=lambda xk: history.append(objective(xk)),
                       options={"gtol": ML_GRADIENT_TOLERANCE, "maxiter": ML_MAX_ITERATIONS})
        if DEBUG_TOMO:
            print(f"[TOMO] {tag} start {i}: objective={res.fun:.12g}, iterations={res.nit}, {res.message}")
        if best is None or res.fun < best[1].fun:
            best = (_params_to_t(res.x, dim), res, history)
    t, res, history = best
    converged = bool(res.success) and res.nit < ML_MAX_ITERATIONS
    if not converged:
        warnings.warn(f"{tag} reconstruction did not converge after {res.nit} iterations ({res.message}); "
                      f"gradient norm {np.linalg.norm(gradient(res.x)):.3e}", RuntimeWarning)
    return t, res, history, converged


# ── State tomography ──────────────────────────────────────────────────────────

def _pauli_design(projectors):
    """Real design matrix A with p = A r for rho = sum_j r_j P_j / 4."""
    return np.array([[np.real(np.trace(pk @ pj)) / 4.0 for pj in PAULI_BASIS] for pk in projectors])


def linear_inversion_state(records: Sequence[CountRecord]) -> np.ndarray:
    """
    Least-squares density matrix from normalized counts (may be unphysical).

    Raises:
        DomainError if the settings are not tomographically complete
    """
    projectors = [r.setting.projector for r in records]
    design = _pauli_design(projectors)
    if np.linalg.matrix_rank(design, tol=RANK_TOLERANCE) < 16:
        raise DomainError(
            f"{len(records)} settings span fewer than 16 independent two-qubit projectors; tomography is incomplete")
    counts = np.array([r.count for r in records], dtype=float)
    r, *_ = np.linalg.lstsq(design, counts, rcond=None)
    rho = sum(c * p for c, p in zip(r, PAULI_BASIS)) / 4.0
    return rho


def reconstruct_state(records: Sequence[CountRecord], starts=ML_STARTS, rng=None) -> MLEstimate:
    """
    Maximum-likelihood density matrix from Poisson counts.

    The intensity is fitted alongside the state: the objective is
    sum_k (mu_k - n_k log mu_k) with mu_k = Tr[Pi_k T T^dagger], and the
    estimate is T T^dagger / Tr[T T^dagger].

    Args:
        records: CountRecords from a tomographically complete setting list
        starts: number of BFGS starts (first from linear inversion)
        rng: Generator for the extra starts

    Returns:
        MLEstimate whose history is the per-iteration objective of the best start.
        Its intensity is the fitted count rate, so the expected count for a
        setting is intensity * Tr[rho Pi] whatever settings set was used.
    """
    if not records:
        raise DomainError("No count records to reconstruct from")
    counts = np.array([r.count for r in records], dtype=float)
    if counts.sum() <= 0:
        raise DomainError("All counts are zero; nothing to reconstruct")
    linear = linear_inversion_state(records)

    # Scale so the fitted intensity is O(1)
    scale = counts.sum() / len(records) * 4.0
    n = counts / scale
    projectors = np.array([r.setting.projector for r in records])
    positive = n > 0

    def mu_of(x):
        t = _params_to_t(x, 4)
        m = t @ t.conj().T
        return np.real(np.einsum("kab,ba->k", projectors, m))

    def objective(x):
        mu = mu_of(x)
        if np.any(mu[positive] <= 0):
            return np.inf
        return float(mu.sum() - np.dot(n[positive], np.log(mu[positive])))

    def gradient(x):
        mu = mu_of(x)
        weights = np.ones_like(mu)
        weights[positive] -= n[positive] / np.maximum(mu[positive], 1e-300)
        h = np.einsum("k,kab->ab", weights, projectors)
        return _gradient_params(h, _params_to_t(x, 4))

    t0 = _psd_start(linear, max(float(np.real(np.trace(linear))) / scale, 1e-12))
    rng = rng if rng is not None else np.random.default_rng(0)
    t, res, history, converged = _run_ml(objective, gradient, t0, 4, starts, rng, "State")
    m = t @ t.conj().T
    trace = float(np.real(np.trace(m)))
    rho = m / trace
    rho = (rho + rho.conj().T) / 2
    return MLEstimate(rho, float(res.fun), tuple(history), int(res.nit), converged, linear, trace * scale)


# ── Process tomography ────────────────────────────────────────────────────────

def preparation_states() -> List[np.ndarray]:
    """The 16 product inputs from {H, V, D, R} per qubit, as density matrices."""
    return [projector(ket(a + b)) for a, b in itertools.product(PREPARATION_LABELS, PREPARATION_LABELS)]


def preparation_labels() -> List[str]:
    return [a + b for a, b in itertools.product(PREPARATION_LABELS, PREPARATION_LABELS)]


def _process_tensor(inputs):
    """B[j, m, n] = P_m rho_j P_n^dagger, shape (J, 16, 16, 4, 4)."""
    paulis = np.array(PAULI_BASIS)
    left = np.einsum("mab,jbc->jmac", paulis, np.asarray(inputs))
    return np.einsum("jmac,ndc->jmnad", left, paulis.conj())


def reconstruct_process(inputs: Sequence[np.ndarray], outputs: Sequence[np.ndarray],
                        weights: Optional[Sequence[float]] = None, starts=1, rng=None) -> MLEstimate:
    """
    Physical chi matrix from input/output state pairs.

    Minimizes sum_j || E_chi(rho_j) - w_j sigma_j ||_F^2 over chi = T T^dagger,
    starting from linear inversion, then normalizes to unit trace.

    Args:
        inputs: preparation density matrices (must span operator space)
        outputs: normalized output density matrices
        weights: relative success probability per input (default all 1)

    Raises:
        DomainError if the preparations are rank-deficient or sizes disagree
    """
    inputs = [check_density_matrix(r) for r in inputs]
    outputs = [check_density_matrix(s) for s in outputs]
    if len(inputs) != len(outputs):
        raise DomainError(f"{len(inputs)} preparations but {len(outputs)} output states")
    span = np.array([r.reshape(16) for r in inputs])
    if np.linalg.matrix_rank(span, tol=RANK_TOLERANCE) < 16:
        raise DomainError("Preparation states do not span the two-qubit operator space")
    w = np.ones(len(inputs)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(inputs),) or np.any(w < 0) or w.sum() <= 0:
        raise DomainError("Weights must be one non-negative value per preparation, not all zero")
    w = w / w.max()

    b = _process_tensor(inputs)
    targets = np.array([wj * s for wj, s in zip(w, outputs)])

    # Linear inversion: vec(E(rho_j)) = sum_mn chi_mn vec(B_jmn)
    design = b.transpose(0, 3, 4, 1, 2).reshape(len(inputs) * 16, 256)
    chi_vec, *_ = np.linalg.lstsq(design, targets.reshape(-1), rcond=None)
    linear = chi_vec.reshape(16, 16)
    linear = (linear + linear.conj().T) / 2

    def residual(x):
        t = _params_to_t(x, 16)
        chi = t @ t.conj().T
        return np.einsum("mn,jmnab->jab", chi, b) - targets, t

    def objective(x):
        r, _ = residual(x)
        return float(np.sum(np.abs(r) ** 2))

    def gradient(x):
        r, t = residual(x)
        g = np.einsum("jab,jmnab->mn", r.conj(), b)
        h = g.T + g.conj()
        return _gradient_params(h, t)

    t0 = _psd_start(linear, max(float(np.real(np.trace(linear))), 1e-12))
    rng = rng if rng is not None else np.random.default_rng(0)
    t, res, history, converged = _run_ml(objective, gradient, t0, 16, starts, rng, "Process")
    chi = t @ t.conj().T
    trace = float(np.real(np.trace(chi)))
    chi = chi / trace
    chi = (chi + chi.conj().T) / 2
    return MLEstimate(chi, float(res.fun), tuple(history), int(res.nit), converged, linear, trace)


# ── Bootstrap errors ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    std: float
    samples: Tuple[float, ...]
    failures: int

    @classmethod
    def from_values(cls, values, failures=0):
        if len(values) < 2:
            raise DomainError(f"Only {len(values)} bootstrap values; need at least 2")
        arr = np.asarray(values, dtype=float)
        return cls(float(arr.mean()), float(arr.std(ddof=1)), tuple(float(v) for v in arr), failures)

    def describe(self, digits=4):
        return f"{self.mean:.{digits}f} +- {self.std:.{digits}f} ({len(self.samples)} ok, {self.failures} failed)"


def resample_counts(records: Sequence[CountRecord], rng) -> List[CountRecord]:
    """One Poisson redraw around the observed counts."""
    draws = rng.poisson([r.count for r in records])
    return [CountRecord(r.setting, int(n), r.total_scale, r.rng_seed, r.rng_stream) for r, n in zip(records, draws)]


def monte_carlo_errors(records: Sequence[CountRecord], n_resamples,
                       estimator: Callable[[List[CountRecord]], float], rng=None, seed=None) -> BootstrapResult:
    """
    Parametric bootstrap: redraw Poisson counts around the observed ones,
    rerun ``estimator`` on each redraw and report mean and standard deviation.

    Resamples on which the estimator raises are dropped and counted.
    """
    if n_resamples < 2:
        raise DomainError(f"Need at least 2 resamples: {n_resamples}")
    gen = _generator(rng, seed)
    values = []
    failures = 0
    for _ in range(n_resamples):
        try:
            values.append(float(estimator(resample_counts(records, gen))))
        except (DomainError, ValueError, np.linalg.LinAlgError) as e:
            failures += 1
            if DEBUG_TOMO:
                print(f"[TOMO] Bootstrap resample failed: {e}")
    if len(values) < 2:
        raise DomainError(f"Only {len(values)} of {n_resamples} bootstrap resamples succeeded")
    return BootstrapResult.from_values(values, failures)
