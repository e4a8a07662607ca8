"""
result_logger.py
PURPOSE: Save run results for later analysis and re-check them.

Two output formats:
  - text:  one self-describing JSON bundle, <out>/<name>.json
  - table: the same bundle plus one CSV per matrix and table, each starting
           with a #META: JSON comment line followed by a header row

Matrices are stored row-major with real and imaginary parts kept apart.
Floats are written with repr precision, so a bundle reloads bit-exactly.
"""

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ppbs_cz_system import __version__
from ppbs_cz_system.core.errors import ResultIOError
from ppbs_cz_system.utils.helpers import format_timestamp, safe_name

BUNDLE_FORMAT = "ppbs-cz-result"
BUNDLE_FORMAT_VERSION = 1
VERIFY_TOLERANCE = 1e-9


@dataclass
class ResultBundle:
    """Everything one run produced, ready to emit."""
    name: str
    config: dict
    matrices: Dict[str, np.ndarray] = field(default_factory=dict)
    metrics: Dict[str, float] = field(default_factory=dict)
    errors: Dict[str, dict] = field(default_factory=dict)
    tables: Dict[str, dict] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def add_matrix(self, key, matrix):
        self.matrices[key] = np.asarray(matrix, dtype=complex)

    def add_table(self, key, columns, rows):
        self.tables[key] = {"columns": list(columns), "rows": [list(r) for r in rows]}

    def add_error(self, key, bootstrap):
        self.errors[key] = {
            "mean": bootstrap.mean,
            "std": bootstrap.std,
            "resamples": len(bootstrap.samples),
            "failures": bootstrap.failures,
        }

    # ── Serialization ─────────────────────────────────────────────────────────

    def to_dict(self):
        return {
            "format": BUNDLE_FORMAT,
            "format_version": BUNDLE_FORMAT_VERSION,
            "name": self.name,
            "provenance": self.provenance,
            "config": self.config,
            "metrics": {k: float(v) for k, v in self.metrics.items()},
            "errors": self.errors,
            "matrices": {k: _matrix_to_dict(m) for k, m in self.matrices.items()},
            "tables": self.tables,
        }

    @classmethod
    def from_dict(cls, raw):
        if raw.get("format") != BUNDLE_FORMAT:
            raise ValueError(f"Not a result bundle (format={raw.get('format')!r})")
        if raw.get("format_version") != BUNDLE_FORMAT_VERSION:
            raise ValueError(f"Unsupported bundle version {raw.get('format_version')}")
        return cls(
            name=raw["name"],
            config=raw.get("config", {}),
            matrices={k: _matrix_from_dict(v) for k, v in raw.get("matrices", {}).items()},
            metrics=dict(raw.get("metrics", {})),
            errors=dict(raw.get("errors", {})),
            tables=dict(raw.get("tables", {})),
            provenance=dict(raw.get("provenance", {})),
        )


def _matrix_to_dict(m):
    m = np.asarray(m, dtype=complex)
    return {
        "shape": list(m.shape),
        "real": [float(v) for v in m.real.reshape(-1)],
        "imag": [float(v) for v in m.imag.reshape(-1)],
    }


def _matrix_from_dict(raw):
    shape = tuple(raw["shape"])
    real = np.array(raw["real"], dtype=float).reshape(shape)
    imag = np.array(raw["imag"], dtype=float).reshape(shape)
    return real + 1j * imag


def provenance(seed, pipeline, stamp=False):
    """Version, seed and pipeline; a wall-clock timestamp only when asked for."""
    prov = {"version": __version__, "seed": seed, "pipeline": pipeline}
    if stamp:
        prov["timestamp"] = format_timestamp(format_str="%Y-%m-%dT%H:%M:%S")
    return prov


# ── Plot-ready tables ─────────────────────────────────────────────────────────

def matrix_rows(matrix, row_labels, column_labels):
    """(row label, column label, real, imag) rows in row-major order."""
    m = np.asarray(matrix, dtype=complex)
    return [[row_labels[i], column_labels[j], float(m[i, j].real), float(m[i, j].imag)]
            for i in range(m.shape[0]) for j in range(m.shape[1])]


# ── Emit ──────────────────────────────────────────────────────────────────────

class ResultLogger:
    # Metadata prefix for comment lines in CSV
    METADATA_PREFIX = "#META:"

    def __init__(self, out_dir="results"):
        self.out_dir = out_dir
        self.written: List[str] = []

    def _ensure_folder(self):
        try:
            os.makedirs(self.out_dir, exist_ok=True)
        except OSError as e:
            raise ResultIOError(self.out_dir, e.strerror or str(e))

    def emit(self, bundle: ResultBundle, fmt="text"):
        """
        Write the bundle in the requested format.

        Returns:
            list of written file paths

        Raises:
            ResultIOError naming the path that could not be written
        """
        if fmt not in ("text", "table"):
            raise ValueError(f"Unknown output format {fmt!r}; use 'text' or 'table'")
        self._ensure_folder()
        self.written = []
        base = safe_name(bundle.name)
        self._write_json(os.path.join(self.out_dir, f"{base}.json"), bundle.to_dict())
        if fmt == "table":
            meta = {"bundle": base, "version": bundle.provenance.get("version"),
                    "seed": bundle.provenance.get("seed")}
            self._write_csv(os.path.join(self.out_dir, f"{base}_metrics.csv"),
                            dict(meta, content="metrics"),
                            ["metric", "value", "std", "resamples", "failures"],
                            self._metric_rows(bundle))
            for key, m in sorted(bundle.matrices.items()):
                rows = [[i, j, float(m[i, j].real), float(m[i, j].imag)]
                        for i in range(m.shape[0]) for j in range(m.shape[1])]
                self._write_csv(os.path.join(self.out_dir, f"{base}_{safe_name(key)}.csv"),
                                dict(meta, content=f"matrix {key}", shape=list(m.shape)),
                                ["row", "column", "real", "imag"], rows)
            for key, table in sorted(bundle.tables.items()):
                self._write_csv(os.path.join(self.out_dir, f"{base}_{safe_name(key)}.csv"),
                                dict(meta, content=f"table {key}"),
                                table["columns"], table["rows"])
        print(f"[EMIT] Wrote {len(self.written)} file(s) to {self.out_dir}")
        return list(self.written)

    @staticmethod
    def _metric_rows(bundle):
        rows = []
        for key in sorted(bundle.metrics):
            err = bundle.errors.get(key, {})
            rows.append([key, float(bundle.metrics[key]), err.get("std", ""),
                         err.get("resamples", ""), err.get("failures", "")])
        return rows

    def _write_json(self, path, payload):
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                json.dump(payload, f, indent=1, sort_keys=True)
                f.write("\n")
        except OSError as e:
            raise ResultIOError(path, e.strerror or str(e))
        self.written.append(path)

    def _write_csv(self, path, metadata, header, rows):
        try:
            with open(path, "w", newline="", encoding="utf-8") as f:
                f.write(f"{self.METADATA_PREFIX}{json.dumps(metadata, separators=(',', ':'), sort_keys=True)}\n")
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        except OSError as e:
            raise ResultIOError(path, e.strerror or str(e))
        self.written.append(path)

    # ── Load ──────────────────────────────────────────────────────────────────

    @staticmethod
    def load(path) -> ResultBundle:
        """
        Read a bundle written by emit().

        Raises:
            ResultIOError if the file cannot be read or is not a bundle
        """
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
            return ResultBundle.from_dict(raw)
        except OSError as e:
            raise ResultIOError(path, e.strerror or str(e))
        except (ValueError, KeyError) as e:
            raise ResultIOError(path, f"not a readable result bundle ({e})")

    @classmethod
    def load_csv_with_metadata(cls, filepath):
        """
        Read one CSV written by emit().

        Returns:
            (metadata dict, header list, list of row lists as strings)
        """
        metadata = {}
        try:
            with open(filepath, "r", newline="", encoding="utf-8") as f:
                lines = f.read().splitlines()
        except OSError as e:
            raise ResultIOError(filepath, e.strerror or str(e))
        body = []
        for line in lines:
            if line.startswith(cls.METADATA_PREFIX):
                metadata.update(json.loads(line[len(cls.METADATA_PREFIX):]))
            else:
                body.append(line)
        rows = list(csv.reader(body))
        if not rows:
            return metadata, [], []
        return metadata, rows[0], rows[1:]


# ── Verify ────────────────────────────────────────────────────────────────────

@dataclass
class VerifyReport:
    checked: Dict[str, tuple] = field(default_factory=dict)   # name -> (stored, recomputed)
    tolerance: float = VERIFY_TOLERANCE

    @property
    def mismatches(self):
        return {k: v for k, v in self.checked.items() if abs(v[0] - v[1]) > self.tolerance}

    @property
    def ok(self):
        return not self.mismatches


def recompute_metrics(bundle: ResultBundle) -> Dict[str, float]:
    """Scalar metrics that can be recomputed from the bundle's own matrices and tables."""
    from ppbs_cz_system.analysis import metrics as fm
    from ppbs_cz_system.analysis.tomography import chi_index

    out: Dict[str, float] = {}
    m = bundle.matrices
    if "chi" in m and "chi_ideal" in m:
        out["process_fidelity"] = fm.process_fidelity(m["chi"], m["chi_ideal"])
        out["average_gate_fidelity"] = fm.average_gate_fidelity(out["process_fidelity"])
        out["chi_II"] = float(m["chi"][chi_index("II"), chi_index("II")].real)
    if "chi_corrected" in m and "chi_ideal" in m:
        out["process_fidelity_corrected"] = fm.process_fidelity(m["chi_corrected"], m["chi_ideal"])
        out["average_gate_fidelity_corrected"] = fm.average_gate_fidelity(out["process_fidelity_corrected"])
    if "rho" in m:
        out["tangle"] = fm.tangle(m["rho"])
        out["linear_entropy"] = fm.linear_entropy(m["rho"])
        if "rho_true" in m:
            out["state_fidelity"] = fm.state_fidelity(m["rho"], m["rho_true"])
    table = bundle.tables.get("truth_table")
    if table:
        probs = np.array([row[1:] for row in table["rows"]], dtype=float)
        out["truth_table_mean_diagonal"] = float(np.mean(np.diag(probs)))
    return {k: v for k, v in out.items() if k in bundle.metrics}


def verify(path, tolerance=VERIFY_TOLERANCE) -> VerifyReport:
    """Reload a bundle and compare stored metrics with recomputed ones."""
    bundle = ResultLogger.load(path)
    report = VerifyReport(tolerance=tolerance)
    for key, value in recompute_metrics(bundle).items():
        report.checked[key] = (float(bundle.metrics[key]), float(value))
    return report
