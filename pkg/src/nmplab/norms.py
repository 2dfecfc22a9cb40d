"""Volume-normalized norms, averages and positive/negative parts.

Every starred quantity divides the measure by the total volume, so a
constant function ``c`` has ``norm_star(c, p) == |c|`` for every ``p``.
The essential supremum of a node field is its node maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import UsageError
from .model import ScalarField, VectorField


@dataclass(frozen=True)
class NormReport:
    p: float
    starred: bool
    value: float


def average(u: ScalarField) -> float:
    """``u_M = (sum w u) / vol``."""
    m = u.model
    return float(np.dot(m.weights, u.values) / m.volume)


def _star(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    if math.isinf(p):
        return float(np.max(values)) if values.size else 0.0
    if p < 1:
        raise UsageError(f"norm exponent must be >= 1, got {p}")
    scale = float(np.max(values)) if values.size else 0.0
    if scale == 0.0:
        return 0.0
    # factor out the max to avoid overflow for large p
    mean = np.dot(weights, (values / scale) ** p) / np.sum(weights)
    return scale * float(mean) ** (1.0 / p)


def norm_star(u: ScalarField, p: float) -> float:
    """``((1/vol) sum w |u|^p)^(1/p)``; ``p = inf`` gives the node max of ``|u|``."""
    return _star(np.abs(u.values), u.model.weights, p)


def norm_plain(u: ScalarField, p: float) -> float:
    """Un-normalized ``L^p`` norm ``(sum w |u|^p)^(1/p)``."""
    vol = u.model.volume
    if math.isinf(p):
        return norm_star(u, p)
    return norm_star(u, p) * vol ** (1.0 / p)


def norm_star_vec(Phi: VectorField, p: float) -> float:
    """Starred norm of the pointwise Euclidean length ``|Phi|``."""
    return _star(Phi.pointwise_norm(), Phi.model.weights, p)


def norm_report(u, p: float) -> NormReport:
    if isinstance(u, VectorField):
        return NormReport(p, True, norm_star_vec(u, p))
    return NormReport(p, True, norm_star(u, p))


def pos_neg_parts(u: ScalarField):
    """``(max(u, 0), min(u, 0))``."""
    return (
        ScalarField(u.model, np.maximum(u.values, 0.0)),
        ScalarField(u.model, np.minimum(u.values, 0.0)),
    )


def ess_sup(u: ScalarField) -> float:
    return float(np.max(u.values))


def holder_star(f1: ScalarField, f2: ScalarField, p: float, q: float):
    """Both sides of ``||f1 f2||*_1 <= ||f1||*_p ||f2||*_q`` for conjugate ``p, q``."""
    if p < 1 or q < 1:
        raise UsageError("Hoelder exponents must be >= 1")
    inv = (0.0 if math.isinf(p) else 1.0 / p) + (0.0 if math.isinf(q) else 1.0 / q)
    if abs(inv - 1.0) > 1e-12:
        raise UsageError(f"exponents {p}, {q} are not conjugate")
    lhs = norm_star(f1 * f2, 1.0)
    rhs = norm_star(f1, p) * norm_star(f2, q)
    return lhs, rhs
