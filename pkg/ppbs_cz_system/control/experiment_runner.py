"""
experiment_runner.py
PURPOSE: Run one configured pipeline end to end and collect a ResultBundle.

Pipelines:
  process_tomography       prepare 16 inputs, (optionally) simulate counts and
                           reconstruct each output, reconstruct chi, score it
  state_tomography         reconstruct the entangled source state
  bell_analysis            truth table of the CZ-based Bell-state analyser
  correction_optimization  local-unitary corrections that maximize F_P
  sweep                    figures of merit over a grid of V or eta

Randomness: one SeedSequence per run, spawned in a fixed order
  stream 0  count simulation
  stream 1  bootstrap resampling
  stream 2  correction optimizer restarts
  stream 3  tomography ML extra starts
"""

import numpy as np

from ppbs_cz_system.analysis import metrics as fm
from ppbs_cz_system.analysis.corrections import (
    bisect_overlap,
    default_phase_fidelity,
    fit_output_phases,
    optimize_corrections,
    apply_correction,
)
from ppbs_cz_system.analysis.tomography import (
    CHI_LABELS,
    MLEstimate,
    BootstrapResult,
    chi_ideal_cz,
    chi_index,
    exact_counts,
    measurement_settings,
    monte_carlo_errors,
    preparation_labels,
    preparation_states,
    reconstruct_process,
    reconstruct_state,
    simulate_counts,
)
from ppbs_cz_system.core.errors import ConfigError, DomainError, NullPostselectionError
from ppbs_cz_system.core.qubit_states import (
    LOGICAL_TWO_QUBIT_LABELS,
    TWO_QUBIT_LABELS,
    check_density_matrix,
    ket,
    logical_label,
    normalize,
    projector,
    to_logical_order,
)
from ppbs_cz_system.data.result_logger import ResultBundle, matrix_rows, provenance
from ppbs_cz_system.optics.elements import hom_coincidence_probability
from ppbs_cz_system.optics.gate_circuits import (
    OUTCOME_LABELS,
    apply_gate,
    build_interferometric_cz,
    build_ppbs_cz,
    compensate_source,
    kraus_operators,
    process_chi,
    source_state,
)
from ppbs_cz_system.settings.experiment_config import ExperimentConfig
from ppbs_cz_system.utils.run_profiler import RunProfiler

DEBUG_RUN = False   # Set True to print per-input and per-point progress

STREAM_COUNTS = 0
STREAM_BOOTSTRAP = 1
STREAM_OPTIMIZER = 2
STREAM_TOMOGRAPHY = 3
STREAM_COUNT = 4

TRUTH_TABLE_TARGET = 0.78
CHI_II_TARGET = 0.36

SWEEP_COLUMNS = ["value", "process_fidelity", "average_gate_fidelity", "chi_II",
                 "truth_table_mean_diagonal", "success_probability", "hom_coincidence"]


def build_gate(config: ExperimentConfig, overlap=None, eta=None):
    """Gate described by the config, optionally with V or eta replaced."""
    overlap = config.overlap if overlap is None else overlap
    eta = list(config.eta) if eta is None else list(eta)
    if config.architecture == "interferometric":
        if len(set(eta)) != 1:
            raise ConfigError(f"The interferometric gate uses one reflectivity for all splitters: {eta}")
        return build_interferometric_cz(eta[0], overlap)
    return build_ppbs_cz(eta[0], eta[1], eta[2], overlap, relabel=config.relabel)


class ExperimentRunner:
    """
    Runs one validated ExperimentConfig.

    Usage
    -----
        bundle = ExperimentRunner(config).run()
    """

    def __init__(self, config: ExperimentConfig, stamp=False, profiler=None):
        self.config = config
        self.stamp = stamp
        self.profiler = profiler or RunProfiler()
        seed = config.seed if config.seed is not None else 0
        streams = np.random.SeedSequence(seed).spawn(STREAM_COUNT)
        self.rngs = [np.random.default_rng(s) for s in streams]

    def run(self) -> ResultBundle:
        config = self.config.validate()
        print(f"[RUN] Pipeline {config.pipeline} (seed={config.seed})")
        bundle = ResultBundle(
            name=config.pipeline,
            config=config.to_dict(),
            provenance=provenance(config.seed, config.pipeline, self.stamp),
        )
        meta = config.resolved_source_metadata()
        if meta:
            bundle.provenance["source"] = meta
        handler = getattr(self, f"_run_{config.pipeline}")
        handler(bundle)
        self.profiler.checkpoint(f"{config.pipeline} done")
        self.profiler.summary()
        for key in sorted(bundle.metrics):
            err = bundle.errors.get(key)
            suffix = f" +- {err['std']:.4f}" if err else ""
            print(f"[RUN]   {key} = {bundle.metrics[key]:.6f}{suffix}")
        return bundle

    # ── Shared stages ─────────────────────────────────────────────────────────

    def _gate_outputs(self, gate):
        """Exact post-selected outputs and success probabilities for the 16 inputs."""
        kraus = kraus_operators(gate)
        inputs = preparation_states()
        outputs, probs = [], []
        for label, rho in zip(preparation_labels(), inputs):
            out = apply_gate(gate, rho, kraus)
            if out.is_null:
                raise NullPostselectionError(f"Input {label} gives no coincidences through {gate.describe()}")
            outputs.append(out.state)
            probs.append(out.success_probability)
        return inputs, outputs, np.array(probs)

    def _measured_outputs(self, outputs, probs):
        """Simulated counts per input, scaled by relative success probability."""
        config = self.config
        settings = measurement_settings(config.settings_kind)
        records = []
        for sigma, p in zip(outputs, probs):
            records.append(simulate_counts(sigma, settings, config.counts * p / probs.max(),
                                           seed=config.seed, rng=self.rngs[STREAM_COUNTS], stream=STREAM_COUNTS))
        return records

    def _process_from_records(self, inputs, records):
        # fitted intensities, not raw count sums: with the minimal set the sum depends on the state
        outputs, weights = [], []
        for group in records:
            estimate = reconstruct_state(group, rng=self.rngs[STREAM_TOMOGRAPHY])
            outputs.append(estimate.matrix)
            weights.append(estimate.intensity)
        return reconstruct_process(inputs, outputs, weights)

    def _process_chi(self, gate, bundle=None) -> np.ndarray:
        """Chi from simulated tomography: exact outputs when counts = 0, else counts."""
        inputs, outputs, probs = self._gate_outputs(gate)
        self.profiler.checkpoint("gate outputs")
        if self.config.counts <= 0:
            estimate = reconstruct_process(inputs, outputs, probs)
            self.profiler.checkpoint("process reconstruction")
            return estimate.matrix

        records = self._measured_outputs(outputs, probs)
        self.profiler.checkpoint("count simulation")
        estimate = self._process_from_records(inputs, records)
        self.profiler.checkpoint("process reconstruction")
        if bundle is not None:
            bundle.add_table("counts", ["input", "setting", "count"],
                             [[label, r.setting.label, r.count]
                              for label, group in zip(preparation_labels(), records) for r in group])
            self._bootstrap_process(bundle, inputs, records)
        return estimate.matrix

    def _bootstrap_process(self, bundle, inputs, records):
        n = self.config.n_resamples
        if not n:
            return
        flat = [r for group in records for r in group]
        size = len(records[0])
        ideal = chi_ideal_cz()

        def estimator(resampled):
            groups = [resampled[i:i + size] for i in range(0, len(resampled), size)]
            chi = self._process_from_records(inputs, groups).matrix
            return fm.process_fidelity(chi, ideal)

        result = monte_carlo_errors(flat, n, estimator, rng=self.rngs[STREAM_BOOTSTRAP])
        bundle.add_error("process_fidelity", result)
        bundle.add_error("average_gate_fidelity", BootstrapResult.from_values(
            [fm.average_gate_fidelity(v) for v in result.samples], result.failures))
        self.profiler.checkpoint("bootstrap")

    def _add_chi(self, bundle, key, chi):
        bundle.add_matrix(key, chi)
        bundle.add_table(f"{key}_bars", ["row", "column", "real", "imag"],
                         matrix_rows(chi, CHI_LABELS, CHI_LABELS))

    # ── Pipelines ─────────────────────────────────────────────────────────────

    def _run_process_tomography(self, bundle):
        gate = build_gate(self.config)
        ideal = chi_ideal_cz()
        chi = self._process_chi(gate, bundle)
        direct = process_chi(gate)
        self._add_chi(bundle, "chi", chi)
        self._add_chi(bundle, "chi_ideal", ideal)
        bundle.add_matrix("chi_direct", direct)

        f_p = fm.process_fidelity(chi, ideal)
        bundle.metrics["process_fidelity"] = f_p
        bundle.metrics["average_gate_fidelity"] = fm.average_gate_fidelity(f_p)
        bundle.metrics["process_fidelity_direct"] = fm.process_fidelity(direct, ideal)
        bundle.metrics["chi_II"] = float(chi[chi_index("II"), chi_index("II")].real)
        _, _, probs = self._gate_outputs(gate)
        bundle.metrics["success_probability"] = float(np.mean(probs))

    def _source(self):
        explicit = self.config.source_matrix()
        if explicit is not None:
            return check_density_matrix(np.array(explicit, dtype=complex)), True
        return source_state(self.config.source_phase), False

    def _run_state_tomography(self, bundle):
        config = self.config
        rho_true, explicit = self._source()
        settings = measurement_settings(config.settings_kind)
        if config.counts > 0:
            records = simulate_counts(rho_true, settings, config.counts, seed=config.seed,
                                      rng=self.rngs[STREAM_COUNTS], stream=STREAM_COUNTS)
            bundle.add_table("counts", ["setting", "count"], [[r.setting.label, r.count] for r in records])
        else:
            records = exact_counts(rho_true, settings)
        self.profiler.checkpoint("counts")
        estimate: MLEstimate = reconstruct_state(records, rng=self.rngs[STREAM_TOMOGRAPHY])
        self.profiler.checkpoint("state reconstruction")
        rho = estimate.matrix
        phi_plus = projector(normalize(ket("HH") + ket("VV")))

        bundle.add_matrix("rho", rho)
        bundle.add_matrix("rho_true", rho_true)
        bundle.add_table("rho_bars", ["row", "column", "real", "imag"],
                         matrix_rows(rho, TWO_QUBIT_LABELS, TWO_QUBIT_LABELS))
        bundle.add_matrix("rho_logical", to_logical_order(rho))
        bundle.add_table("rho_logical_bars", ["row", "column", "real", "imag"],
                         matrix_rows(to_logical_order(rho), LOGICAL_TWO_QUBIT_LABELS, LOGICAL_TWO_QUBIT_LABELS))
        bundle.add_table("likelihood_history", ["iteration", "negative_log_likelihood"],
                         list(enumerate(estimate.history)))
        bundle.metrics["state_fidelity"] = fm.state_fidelity(rho, rho_true)
        bundle.metrics["fidelity_phi_plus"] = fm.state_fidelity(rho, phi_plus)
        bundle.metrics["tangle"] = fm.tangle(rho)
        bundle.metrics["linear_entropy"] = fm.linear_entropy(rho)

        if not explicit:
            fit = compensate_source(config.source_phase)
            bundle.metrics["compensation_fidelity"] = fit.fidelity
            bundle.add_table("compensation_waveplates", ["plate", "angle_rad"],
                             list(zip(["qwp1", "hwp", "qwp2"], fit.angles)))

        if config.n_resamples:
            self._bootstrap_state(bundle, records, rho_true)

    def _bootstrap_state(self, bundle, records, rho_true):
        states = []

        def estimator(resampled):
            rho = reconstruct_state(resampled, starts=1).matrix
            states.append(rho)
            return fm.state_fidelity(rho, rho_true)

        result = monte_carlo_errors(records, self.config.n_resamples, estimator,
                                    rng=self.rngs[STREAM_BOOTSTRAP])
        bundle.add_error("state_fidelity", result)
        bundle.add_error("tangle", BootstrapResult.from_values([fm.tangle(s) for s in states], result.failures))
        bundle.add_error("linear_entropy",
                         BootstrapResult.from_values([fm.linear_entropy(s) for s in states], result.failures))
        self.profiler.checkpoint("bootstrap")

    def _run_bell_analysis(self, bundle):
        config = self.config
        gate = build_gate(config)
        phases = tuple(config.analyser_phases)
        table = fm.truth_table(gate, phases=phases)
        self.profiler.checkpoint("truth table")

        bundle.add_table("truth_table", ["input"] + list(OUTCOME_LABELS),
                         [[label] + [float(p) for p in row]
                          for label, row in zip(table.row_labels, table.probabilities)])
        bundle.add_table("truth_table_heatmap",
                         ["input", "outcome", "outcome_logical", "probability"],
                         [[label, outcome, logical_label(outcome), float(table.probabilities[i, j])]
                          for i, label in enumerate(table.row_labels)
                          for j, outcome in enumerate(OUTCOME_LABELS)])
        bundle.add_table("truth_table_logical", ["input"] + [logical_label(o) for o in OUTCOME_LABELS],
                         [[label] + [float(p) for p in row]
                          for label, row in zip(table.row_labels, table.probabilities)])
        for outcome, state in zip(OUTCOME_LABELS, table.output_states):
            bundle.add_matrix(f"output_{outcome}", state)

        bundle.metrics["truth_table_mean_diagonal"] = table.mean_diagonal
        bundle.metrics["success_probability"] = float(np.mean(table.success_probabilities))

        outputs = list(table.output_states)
        fit = fit_output_phases(outputs)
        bundle.metrics["fitted_phase_control"] = fit.phases[0]
        bundle.metrics["fitted_phase_target"] = fit.phases[1]
        bundle.metrics["fitted_separable_fidelity"] = fit.mean_fidelity
        bundle.metrics["default_separable_fidelity"] = default_phase_fidelity(outputs)
        mutual = fm.mutual_fidelity_matrix(outputs)
        bundle.add_table("mutual_fidelity", ["input"] + list(table.row_labels),
                         [[label] + [float(v) for v in row] for label, row in zip(table.row_labels, mutual)])
        bundle.metrics["mean_mutual_fidelity"] = fm.mean_off_diagonal(mutual)
        summary = fm.set_summary(outputs)
        bundle.metrics["mean_output_tangle"] = summary.mean_tangle
        bundle.metrics["mean_output_linear_entropy"] = summary.mean_linear_entropy

        if config.counts > 0:
            rng = self.rngs[STREAM_COUNTS]
            sampled = [rng.poisson(config.counts * row) for row in table.probabilities]
            bundle.add_table("truth_table_counts", ["input"] + list(OUTCOME_LABELS),
                             [[label] + [int(c) for c in row] for label, row in zip(table.row_labels, sampled)])
            rows = [row / max(row.sum(), 1) for row in sampled]
            bundle.metrics["truth_table_sampled_mean_diagonal"] = float(np.mean([r[i] for i, r in enumerate(rows)]))
        self.profiler.checkpoint("analyser fits")

    def _run_correction_optimization(self, bundle):
        gate = build_gate(self.config)
        ideal = chi_ideal_cz()
        chi = self._process_chi(gate, bundle)
        result = optimize_corrections(chi, ideal, restarts=self.config.restarts,
                                      rng=self.rngs[STREAM_OPTIMIZER])
        self.profiler.checkpoint("correction optimizer")
        corrected = apply_correction(chi, result.correction)

        self._add_chi(bundle, "chi", chi)
        self._add_chi(bundle, "chi_ideal", ideal)
        self._add_chi(bundle, "chi_corrected", corrected)
        bundle.metrics["process_fidelity"] = fm.process_fidelity(chi, ideal)
        bundle.metrics["average_gate_fidelity"] = fm.average_gate_fidelity(bundle.metrics["process_fidelity"])
        bundle.metrics["process_fidelity_corrected"] = fm.process_fidelity(corrected, ideal)
        bundle.metrics["average_gate_fidelity_corrected"] = fm.average_gate_fidelity(
            bundle.metrics["process_fidelity_corrected"])
        bundle.metrics["chi_II"] = float(chi[chi_index("II"), chi_index("II")].real)
        names = ["pre_control", "pre_target", "post_control", "post_target"]
        bundle.add_table("correction_angles", ["unitary", "alpha", "beta", "gamma"],
                         [[n] + [float(a) for a in row] for n, row in zip(names, result.correction.angles)])
        bundle.add_table("correction_restarts", ["restart", "process_fidelity"],
                         list(enumerate(result.restart_values)))

    def _sweep_row(self, value):
        config = self.config
        if config.sweep.get("parameter", "overlap") == "overlap":
            gate = build_gate(config, overlap=value)
        else:
            gate = build_gate(config, eta=[value] * 3)
        ideal = chi_ideal_cz()
        chi = process_chi(gate)
        f_p = fm.process_fidelity(chi, ideal)
        table = fm.truth_table(gate, phases=tuple(config.analyser_phases))
        return [value, f_p, fm.average_gate_fidelity(f_p),
                float(chi[chi_index("II"), chi_index("II")].real),
                table.mean_diagonal, float(np.mean(table.success_probabilities)),
                hom_coincidence_probability(gate.overlap)]

    def _run_sweep(self, bundle):
        config = self.config
        rows = []
        for value in config.sweep_points():
            rows.append(self._sweep_row(value))
            if DEBUG_RUN:
                print(f"[RUN] sweep {config.sweep.get('parameter', 'overlap')}={value}: F_P={rows[-1][1]:.6f}")
        self.profiler.checkpoint("sweep grid")
        bundle.add_table("sweep", SWEEP_COLUMNS, rows)
        bundle.metrics["sweep_points"] = float(len(rows))

        if config.sweep.get("parameter", "overlap") == "overlap" and rows:
            self._operating_points(bundle)

    def _operating_points(self, bundle):
        """Overlaps at which the truth table and chi[II, II] reach their reference values."""
        config = self.config
        phases = tuple(config.analyser_phases)

        def truth(v):
            return fm.truth_table(build_gate(config, overlap=v), phases=phases).mean_diagonal

        def chi_ii(v):
            return float(process_chi(build_gate(config, overlap=v))[0, 0].real)

        for key, metric, target in (("overlap_at_truth_table_target", truth, TRUTH_TABLE_TARGET),
                                    ("overlap_at_chi_II_target", chi_ii, CHI_II_TARGET)):
            try:
                bundle.metrics[key] = bisect_overlap(metric, target)
            except DomainError as e:
                print(f"[RUN] {key} skipped: {e}")
        self.profiler.checkpoint("operating points")


def run(config: ExperimentConfig, stamp=False) -> ResultBundle:
    return ExperimentRunner(config, stamp=stamp).run()
