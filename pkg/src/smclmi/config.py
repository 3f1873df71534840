"""Run configuration: INI-style sections with SI values and engineering suffixes."""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, replace

import numpy as np

from .cuk import DEFAULT, PAPER_LITERAL, CukParams
from .errors import ConfigurationError
from .model import SlidingSurface, SwitchedAffineSystem
from .sim import BIDIRECTIONAL, UNIDIRECTIONAL

SUFFIXES = {"k": 1e3, "m": 1e-3, "u": 1e-6, "µ": 1e-6, "n": 1e-9, "p": 1e-12}
_NUMBER = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*([kmuµnp]?)$")
REALIZATIONS = {"uni": UNIDIRECTIONAL, "bi": BIDIRECTIONAL,
                UNIDIRECTIONAL: UNIDIRECTIONAL, BIDIRECTIONAL: BIDIRECTIONAL}


def parse_quantity(text: str, where: str = "value") -> float:
    """'10m' -> 0.01, '1u' -> 1e-6, '2.5e3' -> 2500.0."""
    match = _NUMBER.match(text.strip())
    if not match:
        raise ConfigurationError(f"{where}: cannot parse number {text!r}")
    value = float(match.group(1))
    return value * SUFFIXES[match.group(2)] if match.group(2) else value


def parse_vector(text: str, where: str) -> tuple[float, ...]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if not parts:
        raise ConfigurationError(f"{where}: empty vector")
    return tuple(parse_quantity(p, where) for p in parts)


def parse_matrix(text: str, where: str) -> tuple[tuple[float, ...], ...]:
    rows = tuple(parse_vector(r, where) for r in text.split(";") if r.strip())
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigurationError(f"{where}: matrix rows must be non-empty and of equal length")
    return rows


def parse_deltas(text: str) -> tuple[float, ...]:
    """'1m,10m,100m' or a log-spaced range 'start:stop:count'."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"--delta: range must be start:stop:count, got {text!r}")
        lo, hi = parse_quantity(parts[0], "--delta"), parse_quantity(parts[1], "--delta")
        try:
            count = int(parts[2])
        except ValueError:
            raise ConfigurationError(f"--delta: count must be an integer, got {parts[2]!r}") from None
        if not (0 < lo <= hi and count >= 1):
            raise ConfigurationError("--delta: need 0 < start <= stop and count >= 1")
        values = np.geomspace(lo, hi, count) if count > 1 else np.array([lo])
        return tuple(float(v) for v in values)
    values = tuple(parse_quantity(p, "--delta") for p in text.split(",") if p.strip())
    if not values:
        raise ConfigurationError("--delta: no values given")
    if any(not v > 0 for v in values):
        raise ConfigurationError("--delta: hysteresis half-widths must be positive")
    return values


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple) and value and isinstance(value[0], tuple):
        return "; ".join(", ".join(repr(v) for v in row) for row in value)
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    # [circuit]
    preset: str = "cuk"
    v_in: float = DEFAULT.v_in
    l1: float = DEFAULT.l1
    l2: float = DEFAULT.l2
    c1: float = DEFAULT.c1
    c2: float = DEFAULT.c2
    r_load: float = DEFAULT.r_load
    A: tuple | None = None
    B: tuple | None = None
    C: tuple | None = None
    D: tuple | None = None
    labels: tuple | None = None
    # [surface]
    m: tuple = (1.0, 0.0, 0.0, 0.0)
    m5: float = 0.5
    delta: float = 0.01
    eliminate: int | None = None  # 1-based
    guess: tuple | None = None
    dv_c1_max: float | None = None
    # [sim]
    realization: str = UNIDIRECTIONAL
    t_end: float = 3e-3
    sample_dt: float = 2e-8
    x0: str | tuple = "origin"
    u0: int = 1
    steady_periods: int = 5
    # [lmi]
    margin: float = 1e-8
    tol: float = 1e-9
    transform: bool = True
    sector_state: int | None = None  # 1-based full-state index
    back_map: str = "column"
    eigvec_norm: str = "columns"
    # [output]
    out_dir: str = "out"

    @property
    def n(self) -> int:
        return 4 if self.preset == "cuk" else len(self.A)

    @property
    def params(self) -> CukParams:
        return CukParams(self.v_in, self.l1, self.l2, self.c1, self.c2, self.r_load)

    @property
    def state_keys(self) -> tuple[str, ...]:
        if self.preset == "cuk":
            return ("i_l1", "i_l2", "v_c1", "v_c2")
        return self.labels or tuple(f"x{i + 1}" for i in range(self.n))

    def system(self) -> SwitchedAffineSystem:
        if self.preset == "cuk":
            from .cuk import build_ccm
            return build_ccm(self.params)
        return SwitchedAffineSystem(np.array(self.A), np.array(self.B), np.array(self.C),
                                    None if self.D is None else np.array(self.D))

    def surface(self, delta: float | None = None) -> SlidingSurface:
        return SlidingSurface(np.array(self.m), self.m5, self.delta if delta is None else delta)

    def with_overrides(self, delta=None, out_dir=None, realization=None,
                       paper_literal=False) -> "RunConfig":
        cfg = self
        if delta is not None:
            cfg = replace(cfg, delta=float(delta))
        if out_dir is not None:
            cfg = replace(cfg, out_dir=str(out_dir))
        if realization is not None:
            cfg = replace(cfg, realization=_realization(realization, "--realization"))
        if paper_literal:
            cfg = replace(cfg, c1=PAPER_LITERAL.c1, c2=PAPER_LITERAL.c2)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.preset not in ("cuk", "generic"):
            raise ConfigurationError(f"[circuit] preset: expected cuk or generic, got {self.preset!r}")
        if self.preset == "cuk":
            self.params  # positivity checks
            if self.realization not in (UNIDIRECTIONAL, BIDIRECTIONAL):
                raise ConfigurationError(f"[sim] realization: unknown {self.realization!r}")
        else:
            for name in ("A", "B", "C"):
                if getattr(self, name) is None:
                    raise ConfigurationError(f"[circuit] {name}: required for a generic system")
            if self.realization != BIDIRECTIONAL:
                raise ConfigurationError("[sim] realization: generic systems support only 'bi'")
            try:
                self.system()
            except ConfigurationError as exc:
                raise ConfigurationError(f"[circuit]: {exc}") from None
            if self.labels is not None and len(self.labels) != self.n:
                raise ConfigurationError("[circuit] labels: one label per state required")
        if len(self.m) != self.n:
            raise ConfigurationError(f"[surface] m: expected {self.n} coefficients, got {len(self.m)}")
        if not self.delta > 0:
            raise ConfigurationError("[surface] delta: must be positive")
        if self.eliminate is not None and not 1 <= self.eliminate <= self.n:
            raise ConfigurationError("[surface] eliminate: state index out of range")
        if self.eliminate is not None and self.m[self.eliminate - 1] == 0:
            raise ConfigurationError("[surface] eliminate: the surface has no weight on that state")
        if self.guess is not None and len(self.guess) != self.n:
            raise ConfigurationError("[surface] guess: wrong length")
        if self.dv_c1_max is not None and not self.dv_c1_max > 0:
            raise ConfigurationError("[surface] dv_c1_max: must be positive")
        for name in ("t_end", "sample_dt", "margin", "tol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name}: must be positive")
        if self.sample_dt > self.t_end:
            raise ConfigurationError("[sim] sample_dt: exceeds t_end")
        if self.u0 not in (0, 1):
            raise ConfigurationError("[sim] u0: must be 0 or 1")
        if self.steady_periods < 1:
            raise ConfigurationError("[sim] steady_periods: must be at least 1")
        if isinstance(self.x0, str) and self.x0 not in ("equilibrium", "origin"):
            raise ConfigurationError(f"[sim] x0: expected equilibrium, origin or a vector, got {self.x0!r}")
        if isinstance(self.x0, tuple) and len(self.x0) != self.n:
            raise ConfigurationError("[sim] x0: wrong length")
        if self.sector_state is not None and not 1 <= self.sector_state <= self.n:
            raise ConfigurationError("[lmi] sector_state: state index out of range")
        if self.back_map not in ("column", "full"):
            raise ConfigurationError(f"[lmi] back_map: expected column or full, got {self.back_map!r}")
        if self.eigvec_norm not in ("columns", "complex"):
            raise ConfigurationError(f"[lmi] eigvec_norm: expected columns or complex, got {self.eigvec_norm!r}")

    def to_text(self) -> str:
        layout = {
            "circuit": ["preset", "v_in", "l1", "l2", "c1", "c2", "r_load", "A", "B", "C", "D", "labels"],
            "surface": ["m", "m5", "delta", "eliminate", "guess", "dv_c1_max"],
            "sim": ["realization", "t_end", "sample_dt", "x0", "u0", "steady_periods"],
            "lmi": ["margin", "tol", "transform", "sector_state", "back_map", "eigvec_norm"],
            "output": ["out_dir"],
        }
        lines = []
        for section, keys in layout.items():
            lines.append(f"[{section}]")
            for key in keys:
                value = getattr(self, key)
                if value is None:
                    continue
                if key == "labels":
                    value = ", ".join(value)
                if self.preset == "cuk" and key in ("A", "B", "C", "D", "labels"):
                    continue
                lines.append(f"{'dir' if key == 'out_dir' else key} = {_fmt(value)}")
            lines.append("")
        return "\n".join(lines)


def _realization(text: str, where: str) -> str:
    try:
        return REALIZATIONS[text.strip().lower()]
    except KeyError:
        raise ConfigurationError(f"{where}: expected uni or bi, got {text!r}") from None


def _bool(text: str, where: str) -> bool:
    value = text.strip().lower()
    if value in ("yes", "true", "1", "on"):
        return True
    if value in ("no", "false", "0", "off"):
        return False
    raise ConfigurationError(f"{where}: expected yes or no, got {text!r}")


def _int(text: str, where: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigurationError(f"{where}: expected an integer, got {text!r}") from None


_KNOWN = {
    "circuit": {"preset", "v_in", "l1", "l2", "c1", "c2", "r_load", "a", "b", "c", "d", "labels"},
    "surface": {"m", "m5", "delta", "eliminate", "guess", "dv_c1_max"},
    "sim": {"realization", "t_end", "sample_dt", "x0", "u0", "steady_periods"},
    "lmi": {"margin", "tol", "transform", "sector_state", "back_map", "eigvec_norm"},
    "output": {"dir"},
}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    for section in parser.sections():
        if section not in _KNOWN:
            raise ConfigurationError(f"{source}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN[section]:
                raise ConfigurationError(f"{source}: [{section}] unknown key {key!r}")

    kw = {}

    def get(section, key):
        if parser.has_section(section) and parser.has_option(section, key):
            return parser.get(section, key)
        return None

    def where(section, key):
        return f"{source}: [{section}] {key}"

    preset = (get("circuit", "preset") or "cuk").strip().lower()
    kw["preset"] = preset
    for key in ("v_in", "l1", "l2", "c1", "c2", "r_load"):
        if (v := get("circuit", key)) is not None:
            kw[key] = parse_quantity(v, where("circuit", key))
    for key in ("A", "C"):
        if (v := get("circuit", key.lower())) is not None:
            kw[key] = parse_matrix(v, where("circuit", key))
    for key in ("B", "D"):
        if (v := get("circuit", key.lower())) is not None:
            kw[key] = parse_vector(v, where("circuit", key))
    if (v := get("circuit", "labels")) is not None:
        kw["labels"] = tuple(s.strip() for s in v.split(",") if s.strip())

    if (v := get("surface", "m")) is not None:
        kw["m"] = parse_vector(v, where("surface", "m"))
    elif preset != "cuk":
        raise ConfigurationError(f"{where('surface', 'm')}: required for a generic system")
    for key in ("m5", "delta", "dv_c1_max"):
        if (v := get("surface", key)) is not None:
            kw[key] = parse_quantity(v, where("surface", key))
    if (v := get("surface", "eliminate")) is not None:
        kw["eliminate"] = _int(v, where("surface", "eliminate"))
    if (v := get("surface", "guess")) is not None:
        kw["guess"] = parse_vector(v, where("surface", "guess"))

    realization = get("sim", "realization")
    if realization is not None:
        kw["realization"] = _realization(realization, where("sim", "realization"))
    elif preset != "cuk":
        kw["realization"] = BIDIRECTIONAL
    for key in ("t_end", "sample_dt"):
        if (v := get("sim", key)) is not None:
            kw[key] = parse_quantity(v, where("sim", key))
    if (v := get("sim", "x0")) is not None:
        v = v.strip()
        kw["x0"] = v.lower() if v.lower() in ("equilibrium", "origin") else parse_vector(v, where("sim", "x0"))
    for key in ("u0", "steady_periods"):
        if (v := get("sim", key)) is not None:
            kw[key] = _int(v, where("sim", key))

    for key in ("margin", "tol"):
        if (v := get("lmi", key)) is not None:
            kw[key] = parse_quantity(v, where("lmi", key))
    if (v := get("lmi", "transform")) is not None:
        kw["transform"] = _bool(v, where("lmi", "transform"))
    if (v := get("lmi", "sector_state")) is not None:
        kw["sector_state"] = _int(v, where("lmi", "sector_state"))
    if (v := get("lmi", "back_map")) is not None:
        kw["back_map"] = v.strip().lower()
    if (v := get("lmi", "eigvec_norm")) is not None:
        kw["eigvec_norm"] = v.strip().lower()

    if (v := get("output", "dir")) is not None:
        kw["out_dir"] = v.strip()

    cfg = RunConfig(**kw)
    try:
        cfg.validate()
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))

