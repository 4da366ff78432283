"""Run configuration: strict JSON/flag parsing with exact rational values.

Numeric parameters accept "p/q" strings, parsed exactly and echoed back in
their original spelling.  Unknown keys are rejected with their key path,
and parameter constraints are checked before any computation starts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .geometry import model_by_name
from .measures import MeasureParams, validate_measure
from .quantum import CONVENTIONS
from .resistance import ParameterError, ResistanceParams, hanoi_rho, solve_sg3_rho


class ConfigError(ValueError):
    def __init__(self, key_path: str, message: str):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}")


KNOWN_KEYS = {
    "model": str,
    "level": int,
    "r": (str, int, float),
    "a": (str, int, float),
    "b": (str, int, float),
    "bc": str,
    "out": str,
    "fit_window": list,
    "lambda_min": (str, int, float),
    "lambda_max": (str, int, float),
    "grid_step": (str, int, float),
    "svd_threshold": (str, int, float),
    "length_convention": str,
    "renormalize": bool,
    "eig_index": int,
    "cluster_rtol": (str, int, float),
    "max_vertices": int,
}

REQUIRED = {
    "build": ("model", "level"),
    "resistance": ("model", "level", "r"),
    "spectrum": ("model", "level", "r", "a", "bc"),
    "qg-spectrum": ("model", "level", "r", "a"),
    "analyze": ("model", "level", "r", "a", "bc"),
    "export-eigfun": ("model", "level", "r", "a", "bc"),
    "plot": ("model", "level", "r", "a", "bc"),
}


def parse_rational(value, key_path: str) -> tuple[float, str]:
    """Parse a number or 'p/q' string; returns (float value, echo string)."""
    if isinstance(value, bool):
        raise ConfigError(key_path, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value), repr(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value)), value
        except (ValueError, ZeroDivisionError):
            raise ConfigError(key_path, f"cannot parse {value!r} as a rational number")
    raise ConfigError(key_path, f"expected number or 'p/q' string, got {type(value).__name__}")


@dataclass
class RunConfig:
    command: str
    model_name: str
    level: int
    r: float | None = None
    a: float | None = None
    b: float | None = None
    bc: str = "dirichlet"
    out: str = "out"
    fit_window: tuple | None = None
    lambda_min: float = 1e-4
    lambda_max: float = 10.0
    grid_step: float | None = None
    svd_threshold: float = 1e-8
    length_convention: str | None = None
    renormalize: bool = False
    eig_index: int = 0
    cluster_rtol: float = 1e-6
    max_vertices: int = 2_000_000
    echo: dict = field(default_factory=dict)

    def model(self):
        return model_by_name(self.model_name)

    def rho(self) -> float:
        if self.model_name == "hanoi":
            return hanoi_rho(self.r)
        return solve_sg3_rho(self.r)

    def resistance_params(self) -> ResistanceParams:
        return ResistanceParams(model=self.model_name, r=self.r, rho=self.rho())

    def measure_params(self) -> MeasureParams:
        if self.model_name == "hanoi":
            return MeasureParams(model="hanoi", a=self.a)
        return MeasureParams(model="sg3", a=self.a, b=self.b)

    def serialize(self) -> dict:
        return dict(self.echo)


def parse_config(command: str, raw: dict) -> RunConfig:
    """Validate a flat key-value mapping into a RunConfig.

    Rejects unknown keys, wrong types and constraint violations, naming
    the offending key path.
    """
    if command not in REQUIRED:
        raise ConfigError(".command", f"unknown command {command!r}")
    for key, value in raw.items():
        if key not in KNOWN_KEYS:
            raise ConfigError(f".{key}", "unknown key")
        expected = KNOWN_KEYS[key]
        if key == "level" or key == "eig_index" or key == "max_vertices":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f".{key}", f"expected an integer, got {value!r}")
        elif not isinstance(value, expected):
            raise ConfigError(f".{key}", f"expected {expected}, got {type(value).__name__}")
    for key in REQUIRED[command]:
        if key not in raw:
            raise ConfigError(f".{key}", "missing required key")

    echo = dict(raw)
    cfg = RunConfig(command=command,
                    model_name=str(raw["model"]).lower(),
                    level=raw["level"], echo=echo)
    if cfg.model_name not in ("hanoi", "sg3"):
        raise ConfigError(".model", f"unknown model {raw['model']!r}")
    if cfg.level < 0:
        raise ConfigError(".level", "level must be >= 0")

    for key in ("r", "a", "b", "lambda_min", "lambda_max", "grid_step",
                "svd_threshold", "cluster_rtol"):
        if key in raw:
            val, _src = parse_rational(raw[key], f".{key}")
            setattr(cfg, key, val)
    for key in ("bc", "out", "length_convention"):
        if key in raw:
            setattr(cfg, key, raw[key])
    for key in ("renormalize", "eig_index", "max_vertices"):
        if key in raw:
            setattr(cfg, key, raw[key])
    if "fit_window" in raw:
        win = raw["fit_window"]
        if len(win) != 2:
            raise ConfigError(".fit_window", "expected [x_lo, x_hi]")
        lo, _ = parse_rational(win[0], ".fit_window[0]")
        hi, _ = parse_rational(win[1], ".fit_window[1]")
        if not 0 < lo < hi:
            raise ConfigError(".fit_window", f"need 0 < x_lo < x_hi, got {win}")
        cfg.fit_window = (lo, hi)

    if cfg.bc not in ("dirichlet", "neumann"):
        raise ConfigError(".bc", f"bc must be dirichlet or neumann, got {raw.get('bc')!r}")
    if cfg.length_convention is not None and cfg.length_convention not in CONVENTIONS:
        raise ConfigError(".length_convention",
                          f"must be one of {CONVENTIONS}, got {cfg.length_convention!r}")

    # parameter constraints, checked before any computation
    if cfg.r is not None:
        try:
            cfg.resistance_params().validate()
        except ParameterError as exc:
            raise ConfigError(".r", str(exc))
    if cfg.a is not None:
        msg = validate_measure(cfg.measure_params())
        if msg is not None:
            key = ".b" if "b" in msg else ".a"
            raise ConfigError(key, msg)
    return cfg


def load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(".", f"cannot read config file {path}: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(".", "config file must hold a JSON object")
    return raw


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class ManifestWriter:
    """Collects output files and timings, then writes manifest.json."""

    def __init__(self, cfg: RunConfig, out_dir: Path):
        self.cfg = cfg
        self.out_dir = out_dir
        self.files: list[Path] = []
        self.timings: dict[str, float] = {}

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.files.append(path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def finish(self) -> Path:
        import numpy
        import scipy
        manifest = {
            "command": self.cfg.command,
            "config": self.cfg.serialize(),
            "versions": {
                "fractal_spectra": "0.1.0",
                "numpy": numpy.__version__,
                "scipy": scipy.__version__,
            },
            "timings_s": {k: round(v, 6) for k, v in self.timings.items()},
            "outputs": [
                {"path": str(p.relative_to(self.out_dir)),
                 "bytes": p.stat().st_size,
                 "sha256": sha256_file(p)}
                for p in self.files
            ],
        }
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
        return path
