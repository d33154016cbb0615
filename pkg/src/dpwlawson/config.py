"""Run configuration: flat key = value files, validated defaults."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    m: int = 1
    k: int | None = None
    t: float | None = None
    trunc_degree: int = 24
    rho: float = 2.0
    grid_size: int | None = None      # lambda grid; defaults to 4 * trunc_degree
    ode_tol: float = 1e-11
    newton_tol: float = 1e-10
    mesh_resolution: int = 6
    quad_resolution: int = 16
    out_dir: str = "."

    @property
    def L(self) -> int:
        return self.grid_size if self.grid_size is not None else 4 * self.trunc_degree

    def validate(self) -> "RunConfig":
        if self.m < 1:
            raise ConfigError("invariant violated: m must be >= 1")
        if self.rho <= 1.0:
            raise ConfigError("invariant violated: rho must exceed 1")
        if self.L % 2 != 0:
            raise ConfigError("invariant violated: grid_size must be even "
                              "(the grid must contain lam = -1)")
        if self.L < 2 * self.trunc_degree + 2:
            raise ConfigError("invariant violated: grid_size must be at least "
                              "2 * trunc_degree + 2")
        for name in ("ode_tol", "newton_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"invariant violated: {name} must be positive")
        if self.mesh_resolution < 2 or self.quad_resolution < 2:
            raise ConfigError("invariant violated: resolutions must be >= 2")
        if self.k is not None and self.k < 1:
            raise ConfigError("invariant violated: k must be >= 1")
        return self

    def solve_options(self):
        from .solver import SolveOptions

        return SolveOptions(N=self.trunc_degree, rho=self.rho, L=self.grid_size,
                            ode_tol=self.ode_tol, newton_tol=self.newton_tol)

    def header_lines(self) -> list[str]:
        out = []
        for f in fields(self):
            val = getattr(self, f.name)
            out.append(f"# {f.name} = {val}")
        return out

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            if val is None:
                continue
            lines.append(f"{f.name} = {val}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {
    "m": int, "k": int, "trunc_degree": int, "grid_size": int,
    "mesh_resolution": int, "quad_resolution": int,
    "t": float, "rho": float, "ode_tol": float, "newton_tol": float,
    "out_dir": str,
}


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            setattr(cfg, key, _FIELD_TYPES[key](val))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from exc
    return cfg.validate()


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(cfg.to_text())
