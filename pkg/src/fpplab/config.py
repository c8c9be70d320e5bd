"""Campaign configuration and the exact-reproducibility manifest.

Configs are flat JSON with documented keys.  A manifest records the config
snapshot, per-experiment seeds, wall-clock timings, and a sha256 digest of
every output file; replaying the same config and master seed reproduces all
digests exactly (timings live only in the manifest and are excluded from the
comparison).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError

__all__ = ["ExperimentConfig", "RunManifest", "load_config", "write_json", "write_csv"]

KNOWN_EXPERIMENTS = (
    "fluctuation",
    "triangle",
    "poisson_sanity",
    "resampling",
    "corridor",
    "rotation",
    "audit",
    "midpoint",
    "argmin",
    "separation",
    "site",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative campaign description (see README for the JSON schema)."""

    dimension: int = 2
    alpha: float = 2.0
    intensity: float = 1.0
    n_values: tuple = (8, 16, 32, 64, 128)
    replicas: int = 400
    master_seed: int = 20260809
    padding: float | str = "auto"
    theta: float | None = None     # None: 0.9 x the corridor gate for (delta, c_ubiq)
    delta: float = 0.5
    c_ubiq: float = 0.2
    phi_override: float | None = None   # None: plug in the sweep's own value
    experiments: tuple = ("fluctuation",)
    output_dir: str = "fpplab-out"
    workers: int | str = "auto"

    def __post_init__(self):
        if not self.alpha > 1:
            raise ConfigError(f"alpha must be > 1, got {self.alpha}")
        if self.dimension < 2:
            raise ConfigError(f"dimension must be >= 2, got {self.dimension}")
        if self.replicas < 2:
            raise ConfigError(f"replicas must be >= 2, got {self.replicas}")
        ns = tuple(float(n) for n in self.n_values)
        if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError(f"n_values must be nonempty and strictly increasing, got {self.n_values}")
        object.__setattr__(self, "n_values", ns)
        object.__setattr__(self, "experiments", tuple(self.experiments))
        for e in self.experiments:
            if e not in KNOWN_EXPERIMENTS:
                raise ConfigError(f"unknown experiment {e!r}; known: {', '.join(KNOWN_EXPERIMENTS)}")
        if self.padding != "auto" and not float(self.padding) > 0:
            raise ConfigError(f"padding must be 'auto' or positive, got {self.padding}")
        if self.theta is not None and not self.theta > 0:
            raise ConfigError(f"theta must be positive when given, got {self.theta}")
        if self.phi_override is not None and not self.phi_override >= 1:
            raise ConfigError(f"phi_override must be >= 1 when given, got {self.phi_override}")
        if not self.intensity > 0:
            raise ConfigError(f"intensity must be positive, got {self.intensity}")
        if self.workers != "auto" and int(self.workers) < 1:
            raise ConfigError(f"workers must be 'auto' or >= 1, got {self.workers}")

    def resolved_workers(self) -> int:
        env = os.environ.get("FPPLAB_WORKERS")
        if env:
            return max(1, int(env))
        if self.workers == "auto":
            return os.cpu_count() or 1
        return int(self.workers)

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get("FPPLAB_OUTPUT_DIR") or self.output_dir)

    def padding_for(self, n: float) -> float:
        return n / 2.0 if self.padding == "auto" else float(self.padding)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["n_values"] = list(self.n_values)
        d["experiments"] = list(self.experiments)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return ExperimentConfig.from_dict(raw)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_csv(path, header: list, rows: list) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(row[h]) for h in header))
    Path(path).write_text("\n".join(lines) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def file_digest(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


@dataclass
class RunManifest:
    """Reproducibility record for one campaign run."""

    artifact_version: str
    config: dict
    experiment_seeds: dict = field(default_factory=dict)
    timings_s: dict = field(default_factory=dict)
    digests: dict = field(default_factory=dict)

    def add_outputs(self, outdir: Path, names) -> None:
        for name in names:
            self.digests[name] = file_digest(Path(outdir) / name)

    def write(self, path) -> None:
        write_json(path, {
            "artifact_version": self.artifact_version,
            "config": self.config,
            "experiment_seeds": self.experiment_seeds,
            "timings_s": self.timings_s,
            "digests": self.digests,
        })

    @classmethod
    def read(cls, path) -> "RunManifest":
        raw = json.loads(Path(path).read_text())
        return cls(raw["artifact_version"], raw["config"], raw["experiment_seeds"],
                   raw["timings_s"], raw["digests"])
