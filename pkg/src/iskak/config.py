"""Experiment configuration: flat key = value files with section headers.

Sections group keys for readability only; keys are globally unique.  Unknown
keys are a hard error (all of them reported at once).  Command-line
overrides reuse the same schema.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

EXPERIMENT_NAMES = (
    "dispersion",
    "convergence",
    "consistency",
    "conservation",
    "simulate",
    "elliptic-suite",
)


def _parse_delta_list(text: str) -> tuple[float, ...]:
    vals = tuple(float(p) for p in text.replace(",", " ").split())
    if not vals:
        raise ValueError("delta_list must not be empty")
    return vals


@dataclass
class ExperimentConfig:
    experiment: str = "dispersion"
    n_points: int = 128
    length: float = 2.0 * np.pi
    delta_list: tuple = (0.4, 0.3, 0.2, 0.15, 0.1)
    delta: float = 0.2               # single-run experiments
    amplitude: float = 0.05
    phi_amplitude: float = 0.0
    k0: int = 1
    t_end: float = 1.0
    dt: float = 5e-4
    dtn: str = "exact:16"
    seed: int = 0
    output_dir: str = "."
    record_every: int = 40
    reproject_every: int = 10
    cg_tol: float = 1e-12
    dtn_tol: float = 1e-12
    noise_floor: float = 1e-12
    trials: int = 100
    model: str = "ik"                # simulate: which solver to drive

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_NAMES:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; pick one of {', '.join(EXPERIMENT_NAMES)}"
            )
        if not self.delta_list or any(not 0.0 < d <= 1.0 for d in self.delta_list):
            raise ValueError("delta_list entries must lie in (0, 1]")
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be >= 0")
        if self.model not in ("ik", "ww"):
            raise ValueError("model must be 'ik' or 'ww'")
        parse_dtn(self.dtn)  # validates the backend spec

    def backend_kind(self) -> tuple[str, int]:
        return parse_dtn(self.dtn)


def parse_dtn(spec: str) -> tuple[str, int]:
    """'exact:16' -> ('exact', 16); 'series:2' -> ('series', 2)."""
    parts = spec.split(":")
    if len(parts) != 2 or parts[0] not in ("exact", "series"):
        raise ValueError(f"dtn spec must look like 'exact:16' or 'series:2', got {spec!r}")
    try:
        n = int(parts[1])
    except ValueError as exc:
        raise ValueError(f"bad dtn parameter in {spec!r}") from exc
    if parts[0] == "exact" and n < 8:
        raise ValueError("exact dtn needs n_z >= 8")
    if parts[0] == "series" and n not in (0, 1, 2):
        raise ValueError("series dtn order must be 0, 1 or 2")
    return parts[0], n


_CASTERS = {
    "experiment": str,
    "n_points": int,
    "length": float,
    "delta_list": _parse_delta_list,
    "delta": float,
    "amplitude": float,
    "phi_amplitude": float,
    "k0": int,
    "t_end": float,
    "dt": float,
    "dtn": str,
    "seed": int,
    "output_dir": str,
    "record_every": int,
    "reproject_every": int,
    "cg_tol": float,
    "dtn_tol": float,
    "noise_floor": float,
    "trials": int,
    "model": str,
}

# keys accepted in files as aliases
_ALIASES = {"name": "experiment"}


def default_config(experiment: str) -> ExperimentConfig:
    """Per-experiment defaults; the sweep experiments pick their own run scale."""
    base = ExperimentConfig(experiment=experiment)
    if experiment == "convergence":
        return base
    if experiment == "consistency":
        return replace(base, amplitude=0.1, phi_amplitude=0.1)
    if experiment == "conservation":
        # drift-order run: higher mode on a finer grid lifts the dt^4 signal
        # above the spectral floor at the compared step sizes
        return replace(base, n_points=256, k0=4, amplitude=0.1, delta=0.5,
                       dt=1e-3, cg_tol=1e-13)
    if experiment == "simulate":
        return replace(base, amplitude=0.1, delta=0.2, dt=1e-3, record_every=20)
    if experiment == "elliptic-suite":
        return replace(base, delta_list=(0.05, 0.1, 0.2, 0.4))
    return base


def parse_config_text(text: str, base: ExperimentConfig) -> ExperimentConfig:
    """Apply key = value lines (with [section] headers and # comments) to base."""
    updates: dict = {}
    unknown: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            if not line[1:-1].strip():
                raise ValueError(f"line {lineno}: empty section header")
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _CASTERS:
            unknown.append(f"{key} (line {lineno})")
            continue
        try:
            updates[key] = _CASTERS[key](value)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from exc
    if unknown:
        raise ValueError(
            "unknown config keys: " + ", ".join(unknown)
            + "; known keys: " + ", ".join(sorted(_CASTERS))
        )
    return replace(base, **updates)


def load_config(path: str, base: ExperimentConfig) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply 'key=value' strings from the command line."""
    updates: dict = {}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override must look like key=value, got {item!r}")
        key, value = (p.strip() for p in item.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _CASTERS:
            raise ValueError(f"unknown override key {key!r}; known keys: "
                             + ", ".join(sorted(_CASTERS)))
        updates[key] = _CASTERS[key](value)
    return replace(cfg, **updates)


def config_items(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Stable (key, rendered value) pairs for provenance output."""
    out = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            out.append((f.name, ",".join(repr(x) for x in v)))
        else:
            out.append((f.name, repr(v)))
    return out
