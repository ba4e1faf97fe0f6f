"""Experiment configuration: an INI file with fixed sections and keys.

Unknown sections or keys are rejected so that typos do not silently fall
back to defaults.  See the README for the full grammar.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, HolobesovError
from .functions import SUITE, label, make
from .geometry import Domain, ball, ellipsoid

SCHEMA = {
    "domain": {"kind", "n", "weights", "epsilon"},
    "functions": {"names"},
    "rates": {"max_level", "p", "q", "s", "method"},
    "modulus": {"order", "levels", "decompositions", "per_cell", "method"},
    "continuation": {"depth", "local_depth", "local_degree", "p", "per_band", "radii"},
    "quadrature": {"level_order"},
    "run": {"seed", "jobs", "out", "size"},
}


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    params: tuple = ()

    @property
    def label(self) -> str:
        return label(self.name, **dict(self.params))

    def build(self, n: int):
        return make(self.name, n, **dict(self.params))


@dataclass
class ExperimentConfig:
    domain: Domain
    functions: list
    max_level: int = 6
    p: float = 2.0
    q: list = field(default_factory=lambda: [np.inf])
    s: list = field(default_factory=lambda: [0.5, 1.0, 1.5, 2.0, 2.5])
    rates_method: str = "auto"
    modulus_order: int | None = None  # None: chosen from the fitted slope
    modulus_levels: int = 5
    decompositions: int = 2
    per_cell: int | None = None
    modulus_method: str = "ls"
    depth: int = 6
    local_depth: int = 3
    local_degree: int = 2
    continuation_p: float = 2.0
    per_band: int = 3
    local_radii: list = field(default_factory=lambda: [0.2, 0.15, 0.1, 0.075])
    level_order: int | None = None
    seed: int = 0
    jobs: int = 1
    out: Path = Path("out")
    size: str = "quick"

    def to_dict(self) -> dict:
        def num(x):
            return "inf" if np.isinf(x) else float(x)
        return {
            "domain": {"kind": self.domain.kind, "n": self.domain.n,
                       "weights": list(self.domain.weights), "epsilon": self.domain.epsilon},
            "functions": [f.label for f in self.functions],
            "rates": {"max_level": self.max_level, "p": num(self.p), "q": [num(q) for q in self.q],
                      "s": list(self.s), "method": self.rates_method},
            "modulus": {"order": self.modulus_order or "auto", "levels": self.modulus_levels,
                        "decompositions": self.decompositions, "per_cell": self.per_cell or "auto",
                        "method": self.modulus_method},
            "continuation": {"depth": self.depth, "local_depth": self.local_depth,
                             "local_degree": self.local_degree, "p": num(self.continuation_p),
                             "per_band": self.per_band, "radii": list(self.local_radii)},
            "quadrature": {"level_order": self.level_order or "auto"},
            "run": {"seed": self.seed, "jobs": self.jobs, "size": self.size},
        }


def split_top_level(text: str):
    """Split on commas that are not inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ConfigError(f"unbalanced parentheses in {text!r}")
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise ConfigError(f"unbalanced parentheses in {text!r}")
    parts.append("".join(cur).strip())
    return [p for p in parts if p]


_CALL = re.compile(r"^([A-Za-z_]\w*)\s*(?:\((.*)\))?$")


def parse_function(text: str) -> FunctionSpec:
    """``name`` or ``name(key=value, ...)`` with numeric or tuple values."""
    m = _CALL.match(text.strip())
    if not m:
        raise ConfigError(f"cannot parse function spec {text!r}")
    name, args = m.group(1), m.group(2)
    params = []
    for item in split_top_level(args or ""):
        if "=" not in item:
            raise ConfigError(f"function parameter {item!r} must be key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        params.append((k, _parse_value(v)))
    return FunctionSpec(name, tuple(sorted(params)))


def _parse_value(v: str):
    if v.startswith("(") and v.endswith(")"):
        return tuple(_parse_value(x) for x in split_top_level(v[1:-1]))
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"parameter value {v!r} is not a number") from None


def _float(v: str) -> float:
    v = v.strip().lower()
    if v in ("inf", "infinity"):
        return np.inf
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"{v!r} is not a number") from None


def _int(v: str) -> int:
    try:
        return int(v.strip())
    except ValueError:
        raise ConfigError(f"{v!r} is not an integer") from None


def _floats(v: str):
    return [_float(x) for x in v.split(",") if x.strip()]


def _auto_int(v: str):
    return None if v.strip().lower() == "auto" else _int(v)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp[sec]) - SCHEMA[sec]
        if extra:
            raise ConfigError(f"unknown keys in [{sec}]: {sorted(extra)}")

    def get(sec, key, default=None):
        return cp[sec][key] if cp.has_option(sec, key) else default

    kind = get("domain", "kind", "ball").strip()
    n = _int(get("domain", "n", "2"))
    try:
        if kind == "ball":
            eps = _float(get("domain", "epsilon", "0.5"))
            if cp.has_option("domain", "weights"):
                raise ConfigError("the ball takes no weights")
            dom = ball(n, eps)
        elif kind == "ellipsoid":
            eps = _float(get("domain", "epsilon", "0.25"))
            weights = _floats(get("domain", "weights", ",".join(["1"] * n)))
            if len(weights) != n:
                raise ConfigError(f"need {n} weights, got {len(weights)}")
            dom = ellipsoid(weights, eps)
        else:
            raise ConfigError(f"unknown domain kind {kind!r}")
    except ConfigError:
        raise
    except HolobesovError as exc:
        raise ConfigError(str(exc)) from exc

    names = get("functions", "names")
    if names is None:
        funcs = [FunctionSpec(nm, tuple(sorted(pr.items()))) for nm, pr in SUITE]
        funcs = [f for f in funcs if f.name != "z1z2" or n >= 2]
    else:
        funcs = [parse_function(t) for t in split_top_level(names)]
    for f in funcs:
        f.build(n)  # raises ConfigError on unknown names or parameters

    cfg = ExperimentConfig(domain=dom, functions=funcs)
    if cp.has_section("rates"):
        cfg.max_level = _int(get("rates", "max_level", str(cfg.max_level)))
        cfg.p = _float(get("rates", "p", "2"))
        cfg.q = _floats(get("rates", "q", "inf"))
        cfg.s = _floats(get("rates", "s", ",".join(map(str, cfg.s))))
        cfg.rates_method = get("rates", "method", "auto").strip()
    if cp.has_section("modulus"):
        cfg.modulus_order = _auto_int(get("modulus", "order", "auto"))
        cfg.modulus_levels = _int(get("modulus", "levels", str(cfg.modulus_levels)))
        cfg.decompositions = _int(get("modulus", "decompositions", str(cfg.decompositions)))
        cfg.per_cell = _auto_int(get("modulus", "per_cell", "auto"))
        cfg.modulus_method = get("modulus", "method", "ls").strip()
    if cp.has_section("continuation"):
        cfg.depth = _int(get("continuation", "depth", str(cfg.depth)))
        cfg.local_depth = _int(get("continuation", "local_depth", str(cfg.local_depth)))
        cfg.local_degree = _int(get("continuation", "local_degree", str(cfg.local_degree)))
        cfg.continuation_p = _float(get("continuation", "p", "2"))
        cfg.per_band = _int(get("continuation", "per_band", str(cfg.per_band)))
        if cp.has_option("continuation", "radii"):
            cfg.local_radii = _floats(get("continuation", "radii"))
    if cp.has_section("quadrature"):
        cfg.level_order = _auto_int(get("quadrature", "level_order", "auto"))
    if cp.has_section("run"):
        cfg.seed = _int(get("run", "seed", "0"))
        cfg.jobs = _int(get("run", "jobs", "1"))
        cfg.out = Path(get("run", "out", "out").strip())
        cfg.size = get("run", "size", "quick").strip()
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    if cfg.p not in (2, np.inf) or cfg.continuation_p not in (2, np.inf):
        raise ConfigError("p must be 2 or inf")
    if any(q < 1 for q in cfg.q):
        raise ConfigError("q must be >= 1")
    if not 2 <= cfg.max_level <= 10:
        raise ConfigError("max_level must lie in [2, 10]")
    if cfg.rates_method not in ("auto", "fft", "ls", "minimax"):
        raise ConfigError(f"unknown rates method {cfg.rates_method!r}")
    if cfg.modulus_method not in ("ls", "projector", "minimax"):
        raise ConfigError(f"unknown modulus method {cfg.modulus_method!r}")
    if cfg.modulus_order is not None and cfg.modulus_order < 1:
        raise ConfigError("modulus order must be >= 1")
    if not 1 <= cfg.modulus_levels <= 8 or cfg.decompositions < 1:
        raise ConfigError("modulus levels in [1, 8] and decompositions >= 1")
    if cfg.depth < 3 or cfg.depth > cfg.max_level:
        raise ConfigError("continuation depth must lie in [3, max_level]")
    if cfg.local_depth < 1 or cfg.local_degree < 0:
        raise ConfigError("local_depth >= 1 and local_degree >= 0")
    if any(not 0 < r < cfg.domain.epsilon for r in cfg.local_radii):
        raise ConfigError("continuation radii must lie in (0, epsilon)")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg.size not in ("quick", "full"):
        raise ConfigError("size must be quick or full")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def default_config() -> ExperimentConfig:
    return parse_config("")
