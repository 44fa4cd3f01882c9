"""Run configuration: flat ``key = value`` text with dotted section keys.

Example::

    surface.name = catenoid
    surface.waist = 1.0
    grid.count = 64
    grid.axis1.count = 96
    stencil.backend = jets
    stencil.order = 6
    tasks = analyze, willmore
    seeds = 0, 1, 2
    tolerances.isotropy.dev_A = 1e-5
    output_dir = out
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .calculus import Axis, Calculus, ParamGrid, StencilConfig
from .catalog import CATALOG, default_grid

TASKS = ("analyze", "invariance", "willmore", "variation", "isotropy")
BACKENDS = ("jets", "fd")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


class GridIncompatible(ValueError):
    """Grid does not fit the surface or the stencil."""


@dataclass
class RunConfig:
    surface: str
    params: dict = field(default_factory=dict)
    axes: tuple = ()
    backend: str = "jets"
    order: int = 6
    tasks: tuple = ("analyze",)
    seeds: tuple = (0,)
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "out"
    raw: dict = field(default_factory=dict)

    @property
    def grid(self) -> ParamGrid:
        return ParamGrid(tuple(Axis(*a) for a in self.axes))

    def calculus(self) -> Calculus:
        if self.backend == "jets":
            return Calculus(self.grid, "jets", self.order)
        return Calculus(self.grid, "fd", stencil=StencilConfig(order=self.order))

    def echo(self) -> list:
        """Normalised (key, value) pairs in a fixed order."""
        out = [("surface.name", self.surface)]
        out += [(f"surface.{k}", v) for k, v in sorted(self.params.items())]
        for i, (lo, hi, n, per) in enumerate(self.axes):
            out += [(f"grid.axis{i}.lo", lo), (f"grid.axis{i}.hi", hi),
                    (f"grid.axis{i}.count", n), (f"grid.axis{i}.periodic", per)]
        out += [("stencil.backend", self.backend), ("stencil.order", self.order),
                ("tasks", ", ".join(self.tasks)),
                ("seeds", ", ".join(str(s) for s in self.seeds))]
        out += [(f"tolerances.{k}", v) for k, v in sorted(self.tolerances.items())]
        return out


def parse_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        out[key] = value
    return out


def _number(key, text, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind.__name__}") from None


def _bool(key, text):
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {text!r}")


def _list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def build_config(raw: dict) -> RunConfig:
    """Validate a flat key dictionary into a RunConfig."""
    raw = dict(raw)
    known = {"surface.name", "grid.count", "stencil.backend", "stencil.order", "tasks", "seeds",
             "output_dir"}
    name = raw.get("surface.name")
    if not name:
        raise ConfigError("surface.name is required")
    if name not in CATALOG:
        raise ConfigError(f"unknown surface {name!r}; known: {', '.join(CATALOG)}")
    entry = CATALOG[name]
    params = {}
    for key, value in raw.items():
        if key.startswith("surface.") and key != "surface.name":
            p = key[len("surface."):]
            if p not in entry.defaults:
                raise ConfigError(f"unknown parameter {p!r} for {name}")
            params[p] = value if isinstance(entry.defaults[p], str) else _number(key, value)
            known.add(key)

    backend = raw.get("stencil.backend", "jets")
    if backend not in BACKENDS:
        raise ConfigError(f"stencil.backend must be one of {BACKENDS}, got {backend!r}")
    order = _number("stencil.order", raw.get("stencil.order", "6"), int)
    if backend == "fd" and order not in (2, 4, 6):
        raise ConfigError(f"fd stencil order must be 2, 4 or 6, got {order}")
    if backend == "jets" and order < 0:
        raise ConfigError("jet order must be non-negative")

    count = _number("grid.count", raw.get("grid.count", "64"), int)
    base = default_grid(name, count)
    axes = []
    for i, ax in enumerate(base.axes):
        pre = f"grid.axis{i}."
        vals = {"lo": ax.lo, "hi": ax.hi, "count": ax.count, "periodic": ax.periodic}
        for k in vals:
            if pre + k in raw:
                known.add(pre + k)
                text = raw[pre + k]
                vals[k] = (_bool(pre + k, text) if k == "periodic"
                           else _number(pre + k, text, int if k == "count" else float))
        axes.append((vals["lo"], vals["hi"], vals["count"], vals["periodic"]))
    for key in raw:
        if key.startswith("grid.axis") and key not in known:
            raise GridIncompatible(f"{key}: {name} has {len(base.axes)} parameter axes")

    tasks = tuple(_list(raw.get("tasks", "analyze")))
    if not tasks:
        raise ConfigError("at least one task is required")
    for t in tasks:
        if t not in TASKS:
            raise ConfigError(f"unknown task {t!r}; known: {', '.join(TASKS)}")
    seeds = tuple(_number("seeds", s, int) for s in _list(raw.get("seeds", "0")))

    tolerances = {}
    for key, value in raw.items():
        if key.startswith("tolerances."):
            tolerances[key[len("tolerances."):]] = _number(key, value)
            known.add(key)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")

    cfg = RunConfig(name, params, tuple(axes), backend, order, tasks, seeds, tolerances,
                    raw.get("output_dir", "out"), raw)
    check_grid(cfg)
    return cfg


def check_grid(cfg: RunConfig):
    for i, (lo, hi, n, per) in enumerate(cfg.axes):
        if not hi > lo:
            raise GridIncompatible(f"grid axis {i}: hi must exceed lo")
        if cfg.backend == "fd" and n < 2 * cfg.order + 1:
            raise GridIncompatible(
                f"grid axis {i}: {n} nodes too few for order-{cfg.order} stencils")
        if n < 4:
            raise GridIncompatible(f"grid axis {i}: at least 4 nodes needed, got {n}")


def load_config(path: str | None, overrides=None, seed: int | None = None) -> RunConfig:
    raw = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = parse_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    raw.update(parse_overrides(overrides))
    if seed is not None:
        raw["seeds"] = str(seed)
    return build_config(raw)
