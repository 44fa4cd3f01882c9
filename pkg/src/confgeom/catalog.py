"""Closed-form test immersions.

Each entry is written once as an expression in the coordinate fields; the
jets backend turns it into exact Taylor jets, the FD backend into samples.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass
from typing import Callable


from .calculus import Axis, ParamGrid
from .errors import InvalidParameter, UnknownSurface
from .jets import Field, cos, cosh, exp, log, sin, sinh, sqrt
from .spaceforms import Immersion, Kind, SpaceForm

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    spaceform: SpaceForm
    defaults: dict
    axes: tuple          # default (lo, hi, periodic) per axis
    build: Callable      # params -> evaluator(coords) -> list of components
    description: str
    check: Callable | None = None


def _positive(*keys):
    def check(params):
        for k in keys:
            if not params[k] > 0:
                raise InvalidParameter(f"{k} must be positive, got {params[k]}")
    return check


def _plane(p):
    return lambda c: [c[0], c[1], 0.0 * c[0]]


def _round_sphere(p):
    r = p["radius"]
    return lambda c: [r * cos(c[0]) * cos(c[1]), r * cos(c[0]) * sin(c[1]), r * sin(c[0])]


def _catenoid(p):
    a = p["waist"]
    return lambda c: [a * cosh(c[0] / a) * cos(c[1]), a * cosh(c[0] / a) * sin(c[1]), c[0]]


def _helicoid(p):
    a = p["pitch"]
    return lambda c: [c[0] * cos(c[1]), c[0] * sin(c[1]), a * c[1]]


def _enneper(p):
    def ev(c):
        s, t = c
        return [s - s * s * s / 3.0 + s * t * t, t - t * t * t / 3.0 + t * s * s, s * s - t * t]
    return ev


def _clifford(p):
    k = 1.0 / math.sqrt(2.0)
    return lambda c: [k * cos(c[0]), k * sin(c[0]), k * cos(c[1]), k * sin(c[1])]


def _torus_product(p):
    r = p["radius"]
    q = math.sqrt(1.0 - r * r)
    return lambda c: [r * cos(c[0]), r * sin(c[0]), q * cos(c[1]), q * sin(c[1])]


def _lorentz_cylinder(p):
    r = p["radius"]
    return lambda c: [r * cos(c[0]), r * sin(c[0]), c[1]]


def _spacelike_catenoid(p):
    a = p["waist"]
    return lambda c: [a * sinh(c[0] / a) * cos(c[1]), a * sinh(c[0] / a) * sin(c[1]), c[0]]


# -- graph expressions -----------------------------------------------------------

_FUNCS = {"sin": sin, "cos": cos, "sinh": sinh, "cosh": cosh, "exp": exp, "log": log,
          "sqrt": sqrt}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv}


def parse_expression(text: str):
    """Compile a height-function expression in ``s`` and ``t`` to a callable.

    Only arithmetic, constant powers and the functions in ``_FUNCS`` are allowed.
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise InvalidParameter(f"cannot parse expression {text!r}: {exc}") from None
    _validate(tree.body, text)

    def ev(node, env):
        if isinstance(node, ast.Expression):
            return ev(node.body, env)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in env:
                return env[node.id]
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise InvalidParameter(f"unknown name {node.id!r} in expression")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            left, right = ev(node.left, env), ev(node.right, env)
            if isinstance(node.op, ast.Pow):
                if isinstance(right, Field):
                    raise InvalidParameter("exponents must be constants")
                if isinstance(left, Field):
                    if float(right).is_integer() and right >= 0:
                        out = left * 0.0 + 1.0
                        for _ in range(int(right)):
                            out = out * left
                        return out
                    return left.power(right)
                return left ** right
            if type(node.op) in _BINOPS:
                return _BINOPS[type(node.op)](left, right)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
            return _FUNCS[node.func.id](ev(node.args[0], env))
        raise InvalidParameter(f"unsupported syntax in expression {text!r}")

    return lambda s, t: ev(tree, {"s": s, "t": t})


def _validate(node, text):
    """Reject anything outside arithmetic in s, t, constants and the known functions."""
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return
    if isinstance(node, ast.Name):
        if node.id in ("s", "t") or node.id in _CONSTS:
            return
        raise InvalidParameter(f"unknown name {node.id!r} in expression {text!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        return _validate(node.operand, text)
    if isinstance(node, ast.BinOp) and (type(node.op) in _BINOPS or isinstance(node.op, ast.Pow)):
        if isinstance(node.op, ast.Pow) and any(
                isinstance(n, ast.Name) and n.id in ("s", "t") for n in ast.walk(node.right)):
            raise InvalidParameter(f"exponents must be constants in {text!r}")
        _validate(node.left, text)
        return _validate(node.right, text)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
        return _validate(node.args[0], text)
    raise InvalidParameter(f"unsupported syntax in expression {text!r}")


def _graph(p):
    f = parse_expression(p["expr"])
    return lambda c: [c[0], c[1], f(c[0], c[1]) + 0.0 * c[0]]


def _graph_check(p):
    parse_expression(p["expr"])


def _torus_check(p):
    if not 0.0 < p["radius"] < 1.0:
        raise InvalidParameter(f"torus_product radius must lie in (0, 1), got {p['radius']}")


R3 = SpaceForm(Kind.FLAT, 3, 0)
R31 = SpaceForm(Kind.FLAT, 3, 1)
S3 = SpaceForm(Kind.SPHERE, 3, 0)

CATALOG = {e.name: e for e in [
    CatalogEntry("plane", R3, {}, ((-1.0, 1.0, False), (-1.0, 1.0, False)), _plane,
                 "coordinate plane in R^3 (totally geodesic)"),
    CatalogEntry("round_sphere", R3, {"radius": 1.0},
                 ((-1.2, 1.2, False), (0.0, TWO_PI, True)), _round_sphere,
                 "round sphere of given radius in R^3 (totally umbilic)", _positive("radius")),
    CatalogEntry("catenoid", R3, {"waist": 1.0}, ((-1.0, 1.0, False), (0.0, TWO_PI, True)),
                 _catenoid, "catenoid in R^3 (minimal)", _positive("waist")),
    CatalogEntry("helicoid", R3, {"pitch": 1.0}, ((-1.0, 1.0, False), (-1.0, 1.0, False)),
                 _helicoid, "helicoid in R^3 (minimal)", _positive("pitch")),
    CatalogEntry("enneper", R3, {}, ((-1.0, 1.0, False), (-1.0, 1.0, False)), _enneper,
                 "Enneper surface in R^3 (minimal)"),
    CatalogEntry("graph", R3, {"expr": "0.25*sin(s)*cos(t) + 0.1*s*s"},
                 ((-1.0, 1.0, False), (-1.0, 1.0, False)), _graph,
                 "graph (s, t, f(s, t)) of a user expression in R^3", _graph_check),
    CatalogEntry("clifford_torus", S3, {}, ((0.0, TWO_PI, True), (0.0, TWO_PI, True)), _clifford,
                 "Clifford torus in S^3 (minimal, flat)"),
    CatalogEntry("torus_product", S3, {"radius": 0.6},
                 ((0.0, TWO_PI, True), (0.0, TWO_PI, True)), _torus_product,
                 "product torus S^1(r) x S^1(sqrt(1-r^2)) in S^3", _torus_check),
    CatalogEntry("lorentz_cylinder", R31, {"radius": 1.0},
                 ((0.0, TWO_PI, True), (-1.0, 1.0, False)), _lorentz_cylinder,
                 "time-like circular cylinder in R^3_1", _positive("radius")),
    CatalogEntry("spacelike_catenoid", R31, {"waist": 1.0},
                 ((0.3, 1.3, False), (0.0, TWO_PI, True)), _spacelike_catenoid,
                 "space-like stationary surface of revolution in R^3_1", _positive("waist")),
]}


def catalog_names() -> list:
    return list(CATALOG)


def default_grid(name: str, count: int = 64, counts=None) -> ParamGrid:
    entry = _entry(name)
    counts = counts or [count] * len(entry.axes)
    return ParamGrid(tuple(Axis(lo, hi, n, per) for (lo, hi, per), n in zip(entry.axes, counts)))


def _entry(name):
    try:
        return CATALOG[name]
    except KeyError:
        raise UnknownSurface(f"unknown catalog surface {name!r}; known: {', '.join(CATALOG)}") from None


def catalog(name: str, params: dict | None = None, grid: ParamGrid | None = None,
            count: int = 64) -> Immersion:
    entry = _entry(name)
    merged = dict(entry.defaults)
    for k, v in (params or {}).items():
        if k not in merged:
            raise InvalidParameter(f"unknown parameter {k!r} for {name}")
        merged[k] = v if isinstance(entry.defaults[k], str) else float(v)
    if entry.check:
        entry.check(merged)
    grid = grid or default_grid(name, count)
    if grid.m != len(entry.axes):
        raise InvalidParameter(f"{name} needs a {len(entry.axes)}-dimensional grid")
    return Immersion(entry.spaceform, grid, evaluator=entry.build(merged), name=name,
                     params=merged)
