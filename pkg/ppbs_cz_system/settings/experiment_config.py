"""
experiment_config.py
PURPOSE: Experiment configuration loaded from JSON files with command-line
overrides.

A config file holds any subset of the fields in _DEFAULTS; missing fields take
their defaults. Flags given on the command line win over the file.

    config = ExperimentConfig.load("config/ideal_process.json")
    config.apply_overrides(seed=7, counts=1e5)
    config.validate()
"""

import json
import math
import os

from ppbs_cz_system.core.errors import ConfigError

PIPELINES = ("process_tomography", "state_tomography", "bell_analysis",
             "correction_optimization", "sweep")
ARCHITECTURES = ("ppbs", "interferometric")
SETTINGS_SETS = {"overcomplete36": "overcomplete", "minimal16": "minimal"}
SWEEP_PARAMETERS = ("overlap", "eta")
FORMATS = ("text", "table")

# Photon source parameters of the two sources the gate was tested with; metadata only
SOURCE_PRESETS = {
    "cw": {
        "pump_source": "Ar+",
        "pump_wavelength": "351.1 nm",
        "crystal_arrangement": "Type I sandwich",
        "photon_wavelength": "702.2 nm",
        "interference_filters": "+-0.18 nm",
        "output_state": "separable<->entangled",
    },
    "pulsed": {
        "pump_source": "doubled Ti:Sa",
        "pump_wavelength": "410 nm",
        "crystal_arrangement": "Type I single",
        "photon_wavelength": "820 nm",
        "interference_filters": "+-1.5 nm",
        "output_state": "separable",
    },
}

# ──────────────────────────────────────────────────────────────────────────────
# Defaults (used for any field a config file leaves out)
# ──────────────────────────────────────────────────────────────────────────────
_DEFAULTS = {
    "pipeline":        ("str",    "process_tomography"),
    "architecture":    ("str",    "ppbs"),
    "eta":             ("floats", [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
    "overlap":         ("float",  1.0),
    "relabel":         ("bool",   True),
    "source_phase":    ("float",  0.0),
    "source_state":    ("matrix", None),     # {"real": 4x4, "imag": 4x4}
    "counts":          ("float",  0.0),      # expected counts per setting; 0 = noiseless
    "seed":            ("int",    None),
    "n_resamples":     ("int",    0),
    "settings_set":    ("str",    "overcomplete36"),
    "sweep":           ("dict",   None),     # {"parameter", "start", "stop", "step"}
    "restarts":        ("int",    20),
    "analyser_phases": ("floats", [math.pi, 0.0]),
    "out_dir":         ("str",    "results"),
    "format":          ("str",    "text"),
    "source_metadata": ("dict",   None),     # {"preset": "cw" | "pulsed", ...}
}


class ExperimentConfig:
    """
    All knobs of one run as plain attributes.

    Usage
    -----
        config = ExperimentConfig.load(path)   # or ExperimentConfig() for defaults
        config.validate()
        bundle = run(config)
    """

    def __init__(self, **fields):
        for name, (_kind, default) in _DEFAULTS.items():
            setattr(self, name, _copy(default))
        self.source_path = None
        unknown = set(fields) - set(_DEFAULTS)
        if unknown:
            raise ConfigError(f"Unknown config field(s): {', '.join(sorted(unknown))}")
        for name, raw in fields.items():
            kind, default = _DEFAULTS[name]
            setattr(self, name, _coerce(name, raw, kind, default))

    # ── Loading ───────────────────────────────────────────────────────────────

    @classmethod
    def load(cls, path):
        """
        Read a JSON config file.

        Raises:
            ConfigError if the file is missing, unparsable or has unknown fields
        """
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object")
        raw = {k: v for k, v in raw.items() if not k.startswith("_")}   # "_comment" keys
        config = cls(**raw)
        config.source_path = os.path.abspath(path)
        return config

    def apply_overrides(self, **overrides):
        """Set fields from command-line flags; None means 'flag not given'."""
        for name, raw in overrides.items():
            if raw is None:
                continue
            if name not in _DEFAULTS:
                raise ConfigError(f"Unknown override: {name}")
            kind, default = _DEFAULTS[name]
            setattr(self, name, _coerce(name, raw, kind, default))
        return self

    # ── Validation ────────────────────────────────────────────────────────────

    @property
    def is_stochastic(self):
        return self.counts > 0 or self.n_resamples > 0 or self.pipeline == "correction_optimization"

    @property
    def settings_kind(self):
        return SETTINGS_SETS[self.settings_set]

    def validate(self):
        """
        Check ranges and cross-field rules.

        Raises:
            ConfigError describing the first problem found
        """
        _one_of("pipeline", self.pipeline, PIPELINES)
        _one_of("architecture", self.architecture, ARCHITECTURES)
        _one_of("settings_set", self.settings_set, tuple(SETTINGS_SETS))
        _one_of("format", self.format, FORMATS)
        if len(self.eta) != 3:
            raise ConfigError(f"eta needs 3 reflectivities, got {len(self.eta)}")
        for i, e in enumerate(self.eta):
            _fraction(f"eta[{i}]", e)
        _fraction("overlap", self.overlap)
        if not math.isfinite(self.source_phase):
            raise ConfigError(f"source_phase must be finite: {self.source_phase}")
        if not (math.isfinite(self.counts) and self.counts >= 0):
            raise ConfigError(f"counts must be >= 0 (0 = noiseless): {self.counts}")
        if self.n_resamples < 0 or self.n_resamples == 1:
            raise ConfigError(f"n_resamples must be 0 or at least 2: {self.n_resamples}")
        if self.n_resamples and self.counts <= 0:
            raise ConfigError("Bootstrap resampling needs simulated counts (counts > 0)")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be at least 1: {self.restarts}")
        if len(self.analyser_phases) != 2 or not all(math.isfinite(p) for p in self.analyser_phases):
            raise ConfigError(f"analyser_phases needs two finite values: {self.analyser_phases}")
        if self.is_stochastic and self.seed is None:
            raise ConfigError(f"Pipeline '{self.pipeline}' is stochastic with these settings; a seed is required")
        if self.pipeline == "sweep":
            self._validate_sweep()
        if self.source_state is not None:
            _matrix(self.source_state)
        if self.source_metadata is not None:
            preset = self.source_metadata.get("preset")
            if preset is not None and preset not in SOURCE_PRESETS:
                raise ConfigError(f"Unknown source preset {preset!r}; use one of {sorted(SOURCE_PRESETS)}")
        return self

    def _validate_sweep(self):
        if not isinstance(self.sweep, dict):
            raise ConfigError("pipeline 'sweep' needs a sweep block {parameter, start, stop, step}")
        _one_of("sweep.parameter", self.sweep.get("parameter", "overlap"), SWEEP_PARAMETERS)
        try:
            start, stop, step = (float(self.sweep[k]) for k in ("start", "stop", "step"))
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"sweep needs numeric start, stop and step: {self.sweep}")
        _fraction("sweep.start", start)
        _fraction("sweep.stop", stop)
        if not step > 0:
            raise ConfigError(f"sweep.step must be positive: {step}")

    # ── Convenience helpers ───────────────────────────────────────────────────

    def sweep_points(self):
        """Grid of sweep values, inclusive of stop; empty when start > stop."""
        start, stop, step = (float(self.sweep[k]) for k in ("start", "stop", "step"))
        if start > stop:
            return []
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]

    def source_matrix(self):
        """Explicit source state as a complex nested list, or None."""
        if self.source_state is None:
            return None
        return _matrix(self.source_state)

    def resolved_source_metadata(self):
        if not self.source_metadata:
            return {}
        meta = dict(SOURCE_PRESETS.get(self.source_metadata.get("preset"), {}))
        meta.update(self.source_metadata)
        return meta

    def to_dict(self):
        return {name: _copy(getattr(self, name)) for name in _DEFAULTS}

    def __repr__(self):
        fields = ", ".join(f"{k}={getattr(self, k)!r}" for k in _DEFAULTS)
        return f"ExperimentConfig({fields})"


# ──────────────────────────────────────────────────────────────────────────────
# Internal helpers
# ──────────────────────────────────────────────────────────────────────────────

def _copy(value):
    if isinstance(value, list):
        return [_copy(v) for v in value]
    if isinstance(value, dict):
        return {k: _copy(v) for k, v in value.items()}
    return value


def _coerce(name, raw, kind: str, default):
    """Convert a raw JSON or flag value to the field's Python type."""
    if raw is None:
        return _copy(default)
    try:
        if kind == "int":
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            if isinstance(raw, (int, float)):
                return bool(raw)
            return str(raw).strip().lower() in ("1", "true", "yes")
        if kind == "str":
            return str(raw)
        if kind == "floats":
            if isinstance(raw, str):
                raw = [p for p in raw.split(",") if p.strip()]
            return [float(v) for v in raw]
        if kind in ("dict", "matrix"):
            if not isinstance(raw, dict):
                raise TypeError(raw)
            return _copy(raw)
    except (ValueError, TypeError):
        raise ConfigError(f"Config field '{name}' expects {kind}, got {raw!r}")
    raise ConfigError(f"Config field '{name}' has unknown kind {kind}")


def _one_of(name, value, allowed):
    if value not in allowed:
        raise ConfigError(f"{name} must be one of {', '.join(allowed)}: {value!r}")


def _fraction(name, value):
    if not (math.isfinite(value) and 0.0 <= value <= 1.0):
        raise ConfigError(f"{name} must be in [0, 1]: {value}")


def _matrix(raw):
    try:
        real, imag = raw["real"], raw.get("imag", [[0.0] * 4] * 4)
        out = [[complex(float(real[i][j]), float(imag[i][j])) for j in range(4)] for i in range(4)]
    except (KeyError, IndexError, TypeError, ValueError):
        raise ConfigError("source_state needs 4x4 'real' (and optional 'imag') lists")
    return out
