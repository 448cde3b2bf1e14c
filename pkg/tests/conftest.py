"""Shared fixtures and independent oracles.

The evaluators and differentiators here are deliberately separate from the
library code: `eval_real` is a plain recursive float evaluator and `fd_partial`
a nested fourth-order central-difference stencil, so they can serve as oracles
for the jet engine rather than echoing it.
"""

import math

import numpy as np
import pytest

from rwcert import catalog
from rwcert.certify import CertifyConfig, certify
from rwcert.chart import chart_from_dict
from rwcert.exprs import BinOp, Call, CoordRef, Neg, Num, ParamRef

# -- independent real evaluator ------------------------------------------------

_REAL_FN = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "sinh": math.sinh, "cosh": math.cosh, "tanh": math.tanh,
    "exp": math.exp, "ln": math.log, "sqrt": math.sqrt,
}


def eval_real(node, env: dict, params: dict) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, CoordRef):
        return env[node.name]
    if isinstance(node, ParamRef):
        return params[node.name]
    if isinstance(node, Neg):
        return -eval_real(node.child, env, params)
    if isinstance(node, Call):
        return _REAL_FN[node.fn](eval_real(node.arg, env, params))
    if isinstance(node, BinOp):
        left = eval_real(node.left, env, params)
        right = eval_real(node.right, env, params)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            return left / right
        return left**right
    raise TypeError(node)


# -- finite-difference oracle ----------------------------------------------------

FD_STEPS = {1: 1e-3, 2: 2e-3, 3: 4e-3}


def _d1(fn, x, i, h):
    def shift(k):
        y = dict(x)
        y[i] = y[i] + k * h
        return fn(y)
    return (-shift(2) + 8 * shift(1) - 8 * shift(-1) + shift(-2)) / (12 * h)


def fd_partial(fn, x: dict, indices: tuple, h: float) -> float:
    """Nested fourth-order central differences for an arbitrary multi-index."""
    if len(indices) == 1:
        return _d1(fn, x, indices[0], h)

    def inner(y):
        return fd_partial(fn, y, indices[1:], h)
    return _d1(inner, x, indices[0], h)


# -- random expression trees ---------------------------------------------------

_SAFE_FUNCTIONS = ("sin", "cos", "tanh", "sinh", "exp", "cosh")


def random_expr_text(rng: np.random.Generator, names: list[str], depth: int) -> str:
    """A random expression over `names`, biased toward numerically tame forms."""
    if depth == 0 or rng.random() < 0.25:
        roll = rng.random()
        if roll < 0.45:
            return rng.choice(names)
        if roll < 0.85:
            return f"{rng.uniform(-2.0, 2.0):.4f}"
        return f"{rng.integers(1, 4)}"
    roll = rng.random()
    if roll < 0.42:
        op = rng.choice(["+", "-", "*"])
        return (f"({random_expr_text(rng, names, depth - 1)} {op} "
                f"{random_expr_text(rng, names, depth - 1)})")
    if roll < 0.52:
        return (f"({random_expr_text(rng, names, depth - 1)} / "
                f"(2.0 + {random_expr_text(rng, names, depth - 1)}^2))")
    if roll < 0.62:
        return f"({random_expr_text(rng, names, depth - 1)})^{rng.integers(2, 4)}"
    if roll < 0.72:
        return f"(-{random_expr_text(rng, names, depth - 1)})"
    if roll < 0.82:
        return f"sqrt(1.5 + ({random_expr_text(rng, names, depth - 1)})^2)"
    if roll < 0.9:
        return f"ln(2.0 + ({random_expr_text(rng, names, depth - 1)})^2)"
    fn = rng.choice(_SAFE_FUNCTIONS)
    return f"{fn}({random_expr_text(rng, names, depth - 1)})"


def draw_expr_case(rng: np.random.Generator, max_dim: int = 4, depth: int = 6):
    """(text, coord names, point dict) kept inside a numerically safe regime."""
    from rwcert.exprs import parse_expr

    while True:
        dim = int(rng.integers(1, max_dim + 1))
        names = [f"x{i}" for i in range(dim)]
        text = random_expr_text(rng, names, depth)
        node = parse_expr(text, names, ())
        point = {name: float(rng.uniform(-0.8, 0.8)) for name in names}
        try:
            probes = [eval_real(node, point, {})]
            for name in names:
                for offset in (-0.02, 0.02):
                    shifted = dict(point)
                    shifted[name] += offset
                    probes.append(eval_real(node, shifted, {}))
        except (ValueError, OverflowError, ZeroDivisionError):
            continue
        if all(math.isfinite(p) and abs(p) < 1e4 for p in probes):
            return text, node, names, point


# -- dim-2 self-test charts -------------------------------------------------------

SPHERE_R2_DOC = {
    "name": "sphere_r2",
    "dim": 2,
    "coords": ["theta", "phi"],
    "metric": [["R^2", None], [None, "R^2*sin(theta)^2"]],
    "u": ["1/R", "0"],
    "params": {"R": 2.0},
    "domain": [[0.5, 2.6], [0.0, 8.0]],
    "options": {},
}

EUCLIDEAN_PLANE_DOC = {
    "name": "euclidean_plane",
    "dim": 2,
    "coords": ["x", "y"],
    "metric": [["1", None], [None, "1"]],
    "u": ["1", "0"],
    "params": {},
    "domain": [[-3.0, 3.0], [-3.0, 3.0]],
    "options": {},
}


@pytest.fixture(scope="session")
def sphere_chart():
    return chart_from_dict(SPHERE_R2_DOC)


@pytest.fixture(scope="session")
def plane_chart():
    return chart_from_dict(EUCLIDEAN_PLANE_DOC)


# -- catalog access ---------------------------------------------------------------

@pytest.fixture(scope="session")
def charts():
    return {cid: catalog.get_chart(cid) for cid in catalog.CATALOG}


@pytest.fixture(scope="session")
def certificates(charts):
    """Moderate-size certificates for the unit tests (acceptance re-runs at 100)."""
    return {cid: certify(chart, CertifyConfig(samples=24, seed=0))
            for cid, chart in charts.items()}


def domain_points(chart, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lows = np.array([lo for lo, _ in chart.domain])
    highs = np.array([hi for _, hi in chart.domain])
    return rng.uniform(lows, highs, size=(count, chart.dim))
