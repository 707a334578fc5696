"""CSV ingestion, the simulation config file and serialisable run reports.

Config files use INI syntax::

    [simulation]
    n = 400
    d = 3
    rho = 0.5
    methods = BEL, ABEL_log, ABEL_hp
    block_lengths = 10, 13, pro
    levels = 0.90, 0.95, 0.99
    replications = 500
    seed = 1

    [bootstrap]
    replications = 100

Reports are written UTF-8 with LF line endings.  Floats are written with
``repr`` so they survive a round trip exactly; infinities appear as ``inf`` in
CSV and as ``{"__float__": "inf"}`` in JSON.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, IoError, ParseError
from .simulation import SimConfig, method_from_label
from .tuning import BootstrapSettings

SIMULATION_KEYS = {
    "n", "d", "rho", "methods", "block_lengths", "levels", "replications", "seed", "gap", "workers",
}
BOOTSTRAP_KEYS = {"replications", "block_length"}
REQUIRED_KEYS = ("n", "d", "rho", "methods", "block_lengths")


@dataclass
class Dataset:
    names: list[str]
    values: np.ndarray
    path: str | None = None

    def column(self, key) -> int:
        """Index of a column given by name or 0-based position."""
        if isinstance(key, str) and key in self.names:
            return self.names.index(key)
        try:
            j = int(key)
        except (TypeError, ValueError):
            raise ConfigError(f"no column named {key!r}; available: {', '.join(self.names)}", key="columns") from None
        if not 0 <= j < len(self.names):
            raise ConfigError(f"column index {j} out of range for {len(self.names)} columns", key="columns")
        return j

    def select(self, keys) -> Dataset:
        idx = [self.column(k) for k in keys]
        return Dataset([self.names[j] for j in idx], self.values[:, idx], self.path)


def _parse_float(text: str) -> float:
    text = text.strip()
    if not text:
        raise ValueError("empty cell")
    return float(text)


def load_csv(path, header: bool = True, delimiter: str = ",") -> Dataset:
    """Read a rectangular numeric table.

    Rows and columns in :class:`ParseError` are 1-based file positions, so a
    header line counts as row 1.  Blank lines are skipped.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return parse_csv(text, header=header, delimiter=delimiter, path=str(path))


def parse_csv(text: str, header: bool = True, delimiter: str = ",", path: str | None = None) -> Dataset:
    rows = []
    names = None
    width = None
    for lineno, row in enumerate(csv.reader(io.StringIO(text), delimiter=delimiter), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if header and names is None:
            names = [c.strip() for c in row]
            width = len(names)
            continue
        if width is None:
            width = len(row)
        if len(row) != width:
            raise DataError(f"row {lineno} has {len(row)} fields, expected {width}")
        vals = []
        for col, cell in enumerate(row, start=1):
            try:
                vals.append(_parse_float(cell))
            except ValueError:
                raise ParseError(lineno, col, cell) from None
        rows.append(vals)
    if len(rows) < 2:
        raise DataError(f"need at least 2 data rows, got {len(rows)}")
    if names is None:
        names = [f"x{j + 1}" for j in range(width)]
    return Dataset(names, np.array(rows, dtype=float), path)


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _get(section, name, key, conv):
    try:
        return conv(section[key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {name}.{key}: {section[key]!r} ({exc})", key=f"{name}.{key}") from None


def _block_spec(text: str):
    if text.lower() in ("pro", "progressive"):
        return "pro"
    return int(text)


def read_config_text(text: str) -> SimConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    for name in parser.sections():
        if name not in ("simulation", "bootstrap"):
            raise ConfigError(f"unknown section [{name}]", key=name)
    if not parser.has_section("simulation"):
        raise ConfigError("missing [simulation] section", key="simulation")
    sim = parser["simulation"]
    for key in sim:
        if key not in SIMULATION_KEYS:
            raise ConfigError(f"unknown key simulation.{key}", key=f"simulation.{key}")
    for key in REQUIRED_KEYS:
        if key not in sim:
            raise ConfigError(f"missing key simulation.{key}", key=f"simulation.{key}")

    boot_kw = {}
    if parser.has_section("bootstrap"):
        boot = parser["bootstrap"]
        for key in boot:
            if key not in BOOTSTRAP_KEYS:
                raise ConfigError(f"unknown key bootstrap.{key}", key=f"bootstrap.{key}")
        if "replications" in boot:
            boot_kw["replications"] = _get(boot, "bootstrap", "replications", int)
        if "block_length" in boot:
            boot_kw["block_length"] = _get(boot, "bootstrap", "block_length", int)
    try:
        bootstrap = BootstrapSettings(**boot_kw)
    except ValueError as exc:
        raise ConfigError(str(exc), key="bootstrap.replications") from None

    methods = []
    for label in _split(sim["methods"]):
        try:
            methods.append((label, method_from_label(label, bootstrap)))
        except ConfigError as exc:
            raise ConfigError(str(exc), key="simulation.methods") from None
    kw = dict(
        n=_get(sim, "simulation", "n", int),
        d=_get(sim, "simulation", "d", int),
        rho=_get(sim, "simulation", "rho", float),
        methods=methods,
        block_lengths=_get(sim, "simulation", "block_lengths", lambda v: [_block_spec(b) for b in _split(v)]),
    )
    if "levels" in sim:
        kw["levels"] = _get(sim, "simulation", "levels", lambda v: [float(x) for x in _split(v)])
    for key in ("replications", "seed", "gap", "workers"):
        if key in sim:
            kw[key] = _get(sim, "simulation", key, int)
    try:
        return SimConfig(**kw)
    except ConfigError as exc:
        raise ConfigError(str(exc), key=f"simulation.{exc.key}" if exc.key else None) from None


def read_config(path) -> SimConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", key="config") from exc
    return read_config_text(text)


# reports

@dataclass
class RunReport:
    """Command echo, resolved configuration, results table and seed.

    ``wall_time`` is kept on the object but left out of :meth:`to_dict` by
    default so that reports of identical runs are byte-identical.
    """

    command: list[str]
    config: dict
    results: list[dict]
    seed: int | None = None
    wall_time: float | None = None
    columns: list[str] = field(default_factory=list)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "command": list(self.command),
            "seed": self.seed,
            "config": self.config,
            "columns": list(self.columns or _columns(self.results)),
            "results": self.results,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    @classmethod
    def from_dict(cls, d: dict) -> RunReport:
        return cls(
            command=list(d["command"]),
            config=d["config"],
            results=list(d["results"]),
            seed=d.get("seed"),
            wall_time=d.get("wall_time"),
            columns=list(d.get("columns", [])),
        )

    def to_json(self, include_timing: bool = False) -> str:
        return dumps(self.to_dict(include_timing))

    @classmethod
    def from_json(cls, text: str) -> RunReport:
        return cls.from_dict(loads(text))

    def to_csv(self) -> str:
        return rows_to_csv(self.results, self.columns or _columns(self.results))


def _columns(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def _tag(obj):
    if isinstance(obj, float) or isinstance(obj, np.floating):
        x = float(obj)
        if math.isfinite(x):
            return x
        return {"__float__": repr(x)}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_tag(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _tag(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tag(v) for v in obj]
    return obj


def _untag(obj):
    if isinstance(obj, dict):
        if set(obj) == {"__float__"}:
            return float(obj["__float__"])
        return {k: _untag(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_untag(v) for v in obj]
    return obj


def dumps(obj) -> str:
    """JSON with non-finite floats tagged; Python's float repr is lossless."""
    return json.dumps(_tag(obj), indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def loads(text: str):
    return _untag(json.loads(text))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
