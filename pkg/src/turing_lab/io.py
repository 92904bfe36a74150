"""Configuration files, CSV tables and binary field snapshots.

CSV files always start with a header row. Floats are written with ``repr``,
the shortest decimal that reads back to the same double, so reruns with the
same inputs give byte-identical files.

Snapshots use a small little-endian binary layout::

    offset  size  field
    0       4     magic b"TURF"
    4       4     uint32 format version (1)
    8       4     uint32 dimension d
    12      4     uint32 points per axis n
    16      8     float64 time
    24      8     reserved, zero
    32      ...   float64 grid values, C order, u block then v block
"""
from __future__ import annotations

import csv
import dataclasses
import itertools
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .kinetics import ReactionSystem, build_model, expression_model, with_steady_state
from .simulator import MODES, SCHEMES
from .spectral import Grid, SpectralField

MAGIC = b"TURF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIId8x")

DISPERSION_HEADER = ("k", "re_lambda_plus", "re_lambda_minus", "im_lambda", "class")
DIAGNOSTICS_HEADER = ("t", "l2", "h2", "max_abs", "dominant_amplitude")
DEVIATION_HEADER = ("delta", "t", "dev", "bound", "ratio", "l2", "h2")
SCAN_TAIL = ("rest_stable", "turing_unstable", "lambda_max", "omega_max_count")


# --------------------------------------------------------------------------
# CSV


def fmt(x: Any) -> str:
    """Text for one CSV cell."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file, expected a header row")
    return rows[0], rows[1:]


def mode_header(d: int) -> tuple[str, ...]:
    axes = ("q1", "q2", "q3")[:d] if d <= 3 else tuple(f"q{i + 1}" for i in range(d))
    return axes + ("re_lambda_plus", "re_lambda_minus", "im_lambda", "class")


def coefficient_rows(field_: SpectralField):
    """``(*q, w_u, w_v)`` for every mode in lexicographic order."""
    c = field_.coeffs
    for idx in np.ndindex(*field_.grid.shape):
        yield (*idx, c[(0,) + idx], c[(1,) + idx])


def coefficient_header(d: int) -> tuple[str, ...]:
    return mode_header(d)[:d] + ("w_u", "w_v")


# --------------------------------------------------------------------------
# binary snapshots


def write_snapshot(path: str | Path, field_: SpectralField, t: float) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = field_.grid
    values = np.ascontiguousarray(field_.values, dtype="<f8")
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, g.d, g.n, float(t)))
        fh.write(values.tobytes(order="C"))
    return path


def read_snapshot(path: str | Path) -> tuple[float, SpectralField]:
    """Inverse of :func:`write_snapshot`; the field is re-analysed from its grid values."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, d, n, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    count = 2 * n ** d
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise ValueError(f"{path}: expected {count} values, found {len(body) // 8}")
    values = np.frombuffer(body, dtype="<f8").reshape((2,) + (n,) * d)
    return t, SpectralField.from_values(Grid(d, n), values.astype(float))


# --------------------------------------------------------------------------
# configuration


@dataclass
class ModelConfig:
    name: str = "benchmark"
    params: dict = field(default_factory=dict)
    f: str | None = None
    g: str | None = None
    D1: str | float | None = None
    D2: str | float | None = None
    guess: tuple[float, float] | None = None
    derivative_mode: str | None = None
    eta: float | None = None

    @property
    def is_expression(self) -> bool:
        return self.f is not None or self.g is not None


@dataclass
class GridConfig:
    d: int = 1
    n: int = 64


@dataclass
class AnalysisConfig:
    k_points: int = 201
    k_max: float | None = None


@dataclass
class SimulationSection:
    dt: float = 5e-3
    t_end: float = 10.0
    scheme: str = "imex_cn_ab2"
    mode: str = "nonlinear"
    snapshot_stride: int = 100
    dealias: bool = True
    initial: str = "mixed"
    amplitude: float = 1e-3
    q0: tuple[int, ...] | None = None
    snapshots: bool = True


@dataclass
class ExperimentSection:
    theta: float = 0.1
    deltas: tuple[float, ...] = (1e-3, 1e-4, 1e-5)
    epsilon_frac: float = 0.25
    samples: int = 200
    profile: str = "mixed"
    q0: tuple[int, ...] | None = None
    dt: float = 5e-3
    scheme: str = "imex_cn_ab2"
    linear_check: bool = True


@dataclass
class ScanSection:
    combine: str = "product"
    params: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    command: str | None = None
    seed: int = 0
    out: str = "out"
    model: ModelConfig = field(default_factory=ModelConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    scan: ScanSection = field(default_factory=ScanSection)


_SECTIONS = {
    "model": ModelConfig,
    "grid": GridConfig,
    "analysis": AnalysisConfig,
    "simulation": SimulationSection,
    "experiment": ExperimentSection,
    "scan": ScanSection,
}
_INITIAL_PROFILES = ("mixed", "pure", "random", "zero")
_PROFILES = ("mixed", "pure")


def _coerce(where: str, value, default, hint: str):
    """Convert ``value`` to the type suggested by the dataclass field."""
    try:
        if "tuple[int" in hint:
            if isinstance(value, int):
                return (int(value),)
            return tuple(int(x) for x in value)
        if "tuple[float" in hint:
            return tuple(float(x) for x in value)
        if hint.startswith("bool"):
            if not isinstance(value, bool):
                raise TypeError("expected true or false")
            return value
        if hint.startswith("int"):
            if isinstance(value, bool) or int(value) != value:
                raise TypeError("expected an integer")
            return int(value)
        if hint.startswith("float"):
            if isinstance(value, bool):
                raise TypeError("expected a number")
            return float(value)
        if hint.startswith("dict"):
            if not isinstance(value, Mapping):
                raise TypeError("expected a table")
            return dict(value)
        if hint.startswith("str |"):
            return value if isinstance(value, (int, float)) and not isinstance(value, bool) else str(value)
        if hint.startswith("str"):
            if not isinstance(value, str):
                raise TypeError("expected a string")
            return value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc} (got {value!r})") from None
    return value


def _section(name: str, cls, table: Mapping) -> Any:
    if not isinstance(table, Mapping):
        raise ConfigError(f"[{name}] must be a table")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kw = {}
    for key, value in table.items():
        if key not in fields:
            raise ConfigError(f"{name}.{key}: unknown field; expected one of {sorted(fields)}")
        kw[key] = _coerce(f"{name}.{key}", value, fields[key].default, str(fields[key].type))
    return cls(**kw)


def config_from_dict(data: Mapping) -> RunConfig:
    cfg = RunConfig()
    for key, value in data.items():
        if key in _SECTIONS:
            setattr(cfg, key, _section(key, _SECTIONS[key], value))
        elif key == "output":
            if not isinstance(value, Mapping) or set(value) - {"dir"}:
                raise ConfigError("[output] accepts only 'dir'")
            if "dir" in value:
                cfg.out = str(value["dir"])
        elif key == "seed":
            cfg.seed = _coerce("seed", value, 0, "int")
        else:
            raise ConfigError(f"{key}: unknown section")
    validate(cfg)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    """Parse a TOML run configuration; syntax errors report their line and column."""
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def validate(cfg: RunConfig) -> None:
    if cfg.seed < 0:
        raise ConfigError("seed: must be a non-negative integer")
    g = cfg.grid
    if g.d < 1:
        raise ConfigError("grid.d: must be >= 1")
    if g.n < 4 or g.n & (g.n - 1):
        raise ConfigError("grid.n: must be a power of two >= 4")
    s = cfg.simulation
    if s.scheme not in SCHEMES:
        raise ConfigError(f"simulation.scheme: expected one of {SCHEMES}")
    if s.mode not in MODES:
        raise ConfigError(f"simulation.mode: expected one of {MODES}")
    if s.initial not in _INITIAL_PROFILES:
        raise ConfigError(f"simulation.initial: expected one of {_INITIAL_PROFILES}")
    if not s.dt > 0:
        raise ConfigError("simulation.dt: must be positive")
    if s.t_end < 0:
        raise ConfigError("simulation.t_end: must be non-negative")
    if s.snapshot_stride < 1:
        raise ConfigError("simulation.snapshot_stride: must be >= 1")
    e = cfg.experiment
    if e.profile not in _PROFILES:
        raise ConfigError(f"experiment.profile: expected one of {_PROFILES}")
    if e.scheme not in SCHEMES:
        raise ConfigError(f"experiment.scheme: expected one of {SCHEMES}")
    if not e.dt > 0:
        raise ConfigError("experiment.dt: must be positive")
    if cfg.scan.combine not in ("product", "zip"):
        raise ConfigError("scan.combine: expected 'product' or 'zip'")
    for key, values in cfg.scan.params.items():
        if isinstance(values, (str, bytes)) or not isinstance(values, Sequence):
            raise ConfigError(f"scan.params.{key}: expected a list of values")
    if cfg.analysis.k_points < 2:
        raise ConfigError("analysis.k_points: must be >= 2")
    m = cfg.model
    if m.is_expression and (m.f is None or m.g is None or m.D1 is None or m.D2 is None):
        raise ConfigError("model: expression models need f, g, D1 and D2")


def build_system(model: ModelConfig, params: Mapping[str, float] | None = None) -> ReactionSystem:
    """The reaction system named by ``model``; ``params`` overrides entries of ``model.params``."""
    merged = {**model.params, **(params or {})}
    if model.is_expression:
        kw = {}
        if model.guess is not None:
            kw["guess"] = model.guess
        if model.derivative_mode is not None:
            kw["derivative_mode"] = model.derivative_mode
        if model.eta is not None:
            kw["eta"] = model.eta
        system = expression_model(model.name, model.f, model.g, model.D1, model.D2, merged, **kw)
        return with_steady_state(system)
    return build_model(model.name, merged, guess=model.guess,
                       derivative_mode=model.derivative_mode, eta=model.eta)


def scan_points(scan: ScanSection) -> list[dict[str, float]]:
    """Parameter points of the sweep: the Cartesian product or the element-wise zip of the lists."""
    keys = list(scan.params)
    lists = [list(scan.params[k]) for k in keys]
    if not keys or any(len(v) == 0 for v in lists):
        return []
    if scan.combine == "zip":
        if len({len(v) for v in lists}) != 1:
            raise ConfigError("scan.params: lists must have equal length for combine = 'zip'")
        combos = zip(*lists)
    else:
        combos = itertools.product(*lists)
    return [{k: float(v) for k, v in zip(keys, c)} for c in combos]

