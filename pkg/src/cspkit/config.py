"""Flat ``key = value`` run configuration.

Recognised keys::

    system      mmh | linear2d | tilted
    kappa       MMH kappa
    lambda      MMH lambda
    a, b        linear2d coefficients
    q           CSP order (0..3)
    mode        two_step | one_step
    policy      current | previous
    scheme      fiber_search | vertical_base
    grid.min    comma-separated lower corner of the slow grid
    grid.max    comma-separated upper corner
    grid.nodes  nodes per axis
    eps.list    comma-separated eps values
    out         output path
    x0          comma-separated initial condition (slow first)
    horizon     slow-time horizon for projection error

Lines starting with ``#`` or ``;`` are comments.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from typing import Optional

_SECTION = "cspkit"


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


@dataclass
class RunConfig:
    system: str = "mmh"
    kappa: Optional[float] = None
    lam: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    q: int = 0
    mode: str = "two_step"
    policy: str = "current"
    scheme: str = "fiber_search"
    grid_min: Optional[tuple] = None
    grid_max: Optional[tuple] = None
    grid_nodes: Optional[int] = None
    eps_list: Optional[tuple] = None
    out: Optional[str] = None
    x0: Optional[tuple] = None
    horizon: float = 5.0
    extra: dict = field(default_factory=dict)

    def system_params(self) -> dict:
        if self.system == "mmh":
            keys = {"kappa": self.kappa, "lambda": self.lam}
        elif self.system == "linear2d":
            keys = {"a": self.a, "b": self.b}
        else:
            keys = {}
        return {k: v for k, v in keys.items() if v is not None}


_KEYS = {
    "system": ("system", str),
    "kappa": ("kappa", float),
    "lambda": ("lam", float),
    "a": ("a", float),
    "b": ("b", float),
    "q": ("q", int),
    "mode": ("mode", str),
    "policy": ("policy", str),
    "scheme": ("scheme", str),
    "grid.min": ("grid_min", _floats),
    "grid.max": ("grid_max", _floats),
    "grid.nodes": ("grid_nodes", int),
    "eps.list": ("eps_list", _floats),
    "out": ("out", str),
    "x0": ("x0", _floats),
    "horizon": ("horizon", float),
}


def parse_config(text: str, strict: bool = True) -> RunConfig:
    """Parse flat key-value text; unknown keys raise unless ``strict`` is False."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string(f"[{_SECTION}]\n{text}")
    cfg = RunConfig()
    for key, raw in parser.items(_SECTION):
        raw = raw.strip()
        if key not in _KEYS:
            if strict:
                raise ValueError(f"unknown config key {key!r}; known: {', '.join(sorted(_KEYS))}")
            cfg.extra[key] = raw
            continue
        attr, conv = _KEYS[key]
        try:
            setattr(cfg, attr, conv(raw))
        except ValueError as exc:
            raise ValueError(f"bad value for {key!r}: {raw!r}") from exc
    return cfg


def load_config(path, strict: bool = True) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), strict)


def dump_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` for the keys that are set."""
    lines = []
    by_attr = {attr: key for key, (attr, _) in _KEYS.items()}
    for f in fields(cfg):
        if f.name == "extra":
            continue
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ", ".join(repr(float(v)) for v in value)
        lines.append(f"{by_attr[f.name]} = {value}")
    return "\n".join(lines) + "\n"
