"""Experiment configuration (a single JSON document)."""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError, InputError
from .lattice import DEFAULT_EDGE_MARGIN, LatticePotential
from .scattering import OperatorPath

SCHEMA_VERSION = 1
OUTPUT_ENV = "SPECTRAL_FLOW_LAB_OUTPUT"


@dataclass
class ExperimentConfig:
    """Validated experiment configuration.

    ``potentials`` are the vertices visited after the free operator, so
    ``[{"0": 1}]`` is the straight path ``H0 -> H0 + delta_0`` and an empty
    list is the trivial path. ``coupling`` scales every vertex.
    """

    potentials: list = field(default_factory=list)
    band_min: float = -1.9
    band_max: float = 1.9
    band_points: int = 39
    edge_margin: float = DEFAULT_EDGE_MARGIN
    r_nodes: int = 32
    texp_steps: int = 10_000
    truncation_N: int = 2001
    coupling: float = 1.0
    theta_points: int = 256
    output_format: str = "csv"
    output_path: Optional[str] = None
    threads: int = 1

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigurationError("configuration must be a JSON object")
        schema = raw.get("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema {schema!r}")
        known = {"schema", "potential", "potentials", "band_grid", "edge_margin", "r_nodes", "texp_steps",
                 "truncation_N", "coupling", "theta_points", "output", "threads"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        if "potential" in raw and "potentials" in raw:
            raise ConfigurationError("give either 'potential' or 'potentials', not both")
        pots = raw.get("potentials")
        if pots is None:
            pots = [raw["potential"]] if "potential" in raw else []
        if not isinstance(pots, list) or not all(isinstance(p, dict) for p in pots):
            raise ConfigurationError("'potentials' must be a list of {site: coupling} objects")
        try:
            potentials = [LatticePotential.from_mapping(p) for p in pots]
        except (InputError, ValueError, TypeError) as exc:
            raise ConfigurationError(f"bad potential: {exc}") from exc
        grid = raw.get("band_grid", {})
        out = raw.get("output", {})
        try:
            cfg = cls(
                potentials=potentials,
                band_min=float(grid.get("min", cls.band_min)),
                band_max=float(grid.get("max", cls.band_max)),
                band_points=int(grid.get("points", cls.band_points)),
                edge_margin=float(raw.get("edge_margin", DEFAULT_EDGE_MARGIN)),
                r_nodes=int(raw.get("r_nodes", cls.r_nodes)),
                texp_steps=int(raw.get("texp_steps", cls.texp_steps)),
                truncation_N=int(raw.get("truncation_N", cls.truncation_N)),
                coupling=float(raw.get("coupling", 1.0)),
                theta_points=int(raw.get("theta_points", cls.theta_points)),
                output_format=str(out.get("format", "csv")),
                output_path=out.get("path"),
                threads=int(raw.get("threads", 1)),
            )
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigurationError(f"bad configuration value: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def validate(self):
        lo, hi = -2 + self.edge_margin, 2 - self.edge_margin
        if not (0 < self.edge_margin < 1):
            raise ConfigurationError("edge_margin must lie in (0, 1)")
        if not (lo < self.band_min <= self.band_max < hi):
            raise ConfigurationError(f"band grid must lie inside ({lo}, {hi})")
        if self.band_points < 1:
            raise ConfigurationError("band_grid.points must be >= 1")
        if self.r_nodes < 2 or self.texp_steps < 1 or self.theta_points < 1 or self.threads < 1:
            raise ConfigurationError("r_nodes, texp_steps, theta_points and threads must be positive")
        if self.truncation_N < 3 or self.truncation_N % 2 == 0:
            raise ConfigurationError("truncation_N must be an odd integer >= 3")
        if self.output_format not in ("csv", "json"):
            raise ConfigurationError("output.format must be 'csv' or 'json'")
        if not np.isfinite(self.coupling):
            raise ConfigurationError("coupling must be finite")
        half = (self.truncation_N - 1) // 2
        for v in self.potentials:
            if any(abs(s) > half for s in v.support):
                raise ConfigurationError("potential support exceeds the truncation window")

    def grid(self):
        return np.linspace(self.band_min, self.band_max, self.band_points)

    def path(self):
        free = LatticePotential((), ())
        verts = [free] + [v.scaled(self.coupling) for v in self.potentials]
        if len(verts) == 1:
            verts.append(free)
        return OperatorPath(tuple(verts))

    def echo(self):
        return {
            "schema": SCHEMA_VERSION,
            "potentials": [{str(k): v for k, v in p.as_dict().items()} for p in self.potentials],
            "band_grid": {"min": self.band_min, "max": self.band_max, "points": self.band_points},
            "edge_margin": self.edge_margin,
            "r_nodes": self.r_nodes,
            "texp_steps": self.texp_steps,
            "truncation_N": self.truncation_N,
            "coupling": self.coupling,
            "theta_points": self.theta_points,
            "output": {"format": self.output_format, "path": self.output_path},
            "threads": self.threads,
        }
