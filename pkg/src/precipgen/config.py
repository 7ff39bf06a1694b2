"""Run configuration: a JSON document merged with command-line flags (flags win)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .errors import ConfigError
from .inference import DEFAULT_NU_GRID


@dataclass
class RunConfig:
    data: str | None = None
    network: str | None = None
    cutoffs: str | None = None
    out: str | None = None
    u_r: float | None = None
    nu_grid: tuple = DEFAULT_NU_GRID
    H_max: int = 2
    K: int = 50
    seed: int | None = None
    gaussian: bool = False
    n_starts: int = 4
    algorithms: tuple = ("nelder-mead", "bfgs")

    @classmethod
    def from_sources(cls, file_doc: dict | None, flags: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        merged = {}
        if file_doc:
            unknown = set(file_doc) - known - {"schema"}
            if unknown:
                raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
            merged.update({k: v for k, v in file_doc.items() if k in known})
        merged.update({k: v for k, v in flags.items() if k in known and v is not None})
        cfg = cls(**merged)
        cfg.nu_grid = tuple(float(v) for v in cfg.nu_grid)
        cfg.algorithms = tuple(cfg.algorithms)
        return cfg

    def require(self, *names) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            flags = ", ".join("--" + n.replace("_", "-") for n in missing)
            raise ConfigError(f"missing required setting(s): {flags} (no defaults are assumed)")
        if "u_r" in names and not self.u_r > 0:
            raise ConfigError(f"u_r must be > 0, got {self.u_r!r}")
        if "seed" in names and (int(self.seed) != self.seed or self.seed < 0):
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if "K" in names and not self.K >= 1:
            raise ConfigError(f"K must be >= 1, got {self.K!r}")

    def to_dict(self):
        return asdict(self)
