"""Lower-bound estimators for the volume-normalized isoperimetric constant C*.

``C*`` is ``C_{N,I} vol^{1/n}`` where ``C_{N,I}`` is the supremum of
``vol(Omega)^((n-1)/n) / area(boundary Omega)`` over regions holding at most
half the volume.  Three estimators are provided; each returns a lower bound
of the model's true constant:

* ``cheeger_sweep``: level sets of low eigenvectors, cut areas measured on
  the model's face graph,
* ``sobolev_ratio_ascent``: maximizes ``||u - u_M||*_q / ||grad u||*_2`` with
  ``q = 2n/(n-2)`` and converts by ``C* = S (n-2) / (4 (n-1))``,
* ``slab_candidate``: the half-torus slab, in closed form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import UnsupportedOperationError, UsageError
from .model import ScalarField, SpectralModel, as_field

METHODS = ("variational", "sweep", "analytic-slab", "user")


@dataclass
class CstarEstimate:
    value: float
    method: str
    is_lower_bound: bool = True
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {"value": self.value, "method": self.method, "is_lower_bound": self.is_lower_bound}
        d["diagnostics"] = {k: v for k, v in self.diagnostics.items() if not isinstance(v, np.ndarray)}
        return d


def user_estimate(value: float) -> CstarEstimate:
    if not value > 0:
        raise UsageError("C* must be positive")
    return CstarEstimate(float(value), "user", is_lower_bound=False)


# --------------------------------------------------------------------------
# sweep cuts
# --------------------------------------------------------------------------


def sweep_profile(model: SpectralModel, order: np.ndarray):
    """Volumes and cut areas of the prefixes ``order[:k]``, ``k = 1..N``."""
    if model.edges is None:
        raise UnsupportedOperationError(f"{model.kind} model has no boundary-area notion")
    rank = np.empty(model.size, dtype=int)
    rank[order] = np.arange(model.size)
    e = model.edges
    ri, rj = rank[e[:, 0].astype(int)], rank[e[:, 1].astype(int)]
    lo, hi = np.minimum(ri, rj), np.maximum(ri, rj)
    # edge is cut for prefix sizes lo < k <= hi
    delta = np.zeros(model.size + 2)
    np.add.at(delta, lo + 1, e[:, 2])
    np.add.at(delta, hi + 1, -e[:, 2])
    cut = np.cumsum(delta)[1 : model.size + 1]
    vol = np.cumsum(model.weights[order])
    return vol, cut


def cut_ratio(volume: float, area: float, n: int) -> float:
    return volume ** ((n - 1) / n) / area if area > 0 else math.inf


def _sweep_vectors(model: SpectralModel, n_levels: int, n_angles: int):
    lam = model.eigenvalues
    levels = []
    k = 1
    while k < model.n_modes and len(levels) < n_levels:
        same = np.flatnonzero(np.isclose(lam, lam[k], rtol=1e-9, atol=1e-12))
        same = same[same >= k]
        levels.append(same)
        k = same[-1] + 1
    vectors = [model.eigenbasis[:, j] for lev in levels for j in lev]
    # rotations inside the lowest eigenspace pick out shifted level sets
    first = levels[0] if levels else []
    angles = np.arange(1, n_angles) * (math.pi / n_angles)
    for a, b in itertools.combinations(first, 2):
        pa, pb = model.eigenbasis[:, a], model.eigenbasis[:, b]
        vectors.extend(math.cos(t) * pa + math.sin(t) * pb for t in angles)
    return vectors


def cheeger_sweep(model: SpectralModel, n_levels: int = 3, n_angles: int = 16) -> CstarEstimate:
    """Best sweep cut over level sets of the low eigenvectors."""
    if model.edges is None:
        raise UnsupportedOperationError(f"{model.kind} model has no boundary-area notion")
    n = model.n_intrinsic
    vol_total = model.volume
    best = (-1.0, 0.0, 0.0, 0)
    for vec in _sweep_vectors(model, n_levels, n_angles):
        for order in (np.argsort(-vec, kind="stable"), np.argsort(vec, kind="stable")):
            vol, cut = sweep_profile(model, order)
            ok = (vol <= 0.5 * vol_total * (1 + 1e-12)) & (cut > 0)
            if not np.any(ok):
                continue
            ratios = np.where(ok, vol ** ((n - 1) / n) / np.where(cut > 0, cut, 1.0), -1.0)
            k = int(np.argmax(ratios))
            if ratios[k] > best[0]:
                best = (float(ratios[k]), float(vol[k]), float(cut[k]), k + 1)
    ratio, vol_best, area_best, size_best = best
    return CstarEstimate(
        ratio * vol_total ** (1.0 / n),
        "sweep",
        diagnostics={
            "ratio": ratio,
            "region_volume": vol_best,
            "region_area": area_best,
            "region_nodes": size_best,
        },
    )


def slab_candidate(model: SpectralModel) -> CstarEstimate:
    """Half-slab ``{0 <= x_1 < L/2}`` on a torus: ratio ``2^{-(n-1)/n} / 2``."""
    if model.kind != "torus":
        raise UnsupportedOperationError("slab candidate needs a torus model")
    n = model.n_intrinsic
    ratio = 2.0 ** (-(n - 1) / n) / 2.0
    return CstarEstimate(ratio * model.volume ** (1.0 / n), "analytic-slab", diagnostics={"ratio": ratio})


# --------------------------------------------------------------------------
# Sobolev ratio ascent
# --------------------------------------------------------------------------


def sobolev_exponent(n: int) -> float:
    return 2.0 * n / (n - 2.0)


def gradient_norm_star(model: SpectralModel, u) -> float:
    """``||grad u||*_2`` from the Dirichlet form (valid on every model)."""
    c = model.analyze(as_field(model, u).values)
    return math.sqrt(max(float(np.sum(model.eigenvalues * c * c)), 0.0) / model.volume)


def _star_q(values, weights, vol, q):
    a = np.abs(values)
    s = a.max()
    if s == 0:
        return 0.0
    return float(s * (np.dot(weights, (a / s) ** q) / vol) ** (1.0 / q))


def sobolev_ratio_ascent(
    model: SpectralModel,
    restarts: int = 20,
    iters: int = 300,
    step: float = 0.5,
    seed: int = 0,
    n_modes: int | None = None,
) -> CstarEstimate:
    """Multi-start projected gradient ascent for the starred Sobolev ratio.

    Works in coordinates ``y`` with ``u = sum_k y_k sqrt(vol / lambda_k) phi_k``
    (``k >= 1``), so ``||grad u||*_2 = |y|`` and the constraint is the unit
    sphere.  Restart 0 starts from ``phi_1``; restart ``r > 0`` from a normal
    draw seeded by ``(seed, r)``.  Steps are normalized gradient steps with
    backtracking halving.
    """
    if restarts < 1 or iters < 1:
        raise UsageError("restarts and iters must be >= 1")
    n = model.n_intrinsic
    q = sobolev_exponent(n)
    K = model.n_modes if n_modes is None else min(int(n_modes) + 1, model.n_modes)
    if K < 2:
        raise UsageError("need at least one nonconstant mode")
    w, vol = model.weights, model.volume
    scale = np.sqrt(vol / model.eigenvalues[1:K])
    basis = model.eigenbasis[:, 1:K] * scale

    def objective(y):
        return _star_q(basis @ y, w, vol, q)

    def direction(y):
        u = basis @ y
        g = basis.T @ (w * np.abs(u) ** (q - 2) * u)
        g -= np.dot(g, y) * y
        nrm = np.linalg.norm(g)
        return g / nrm if nrm > 0 else g

    best_val, best_y, best_restart = -1.0, None, -1
    total_iters = 0
    stagnated = 0
    seed_ratio = None
    for r in range(restarts):
        if r == 0:
            y = np.zeros(K - 1)
            y[0] = 1.0
        else:
            y = np.random.default_rng([seed, r]).standard_normal(K - 1)
            y /= np.linalg.norm(y)
        val = objective(y)
        if r == 0:
            seed_ratio = val
        h = step
        converged = False
        for _ in range(iters):
            total_iters += 1
            d = direction(y)
            while h > 1e-10:
                cand = y + h * d
                cand /= np.linalg.norm(cand)
                cval = objective(cand)
                if cval > val:
                    y, val = cand, cval
                    h = min(2.0 * h, 1.0)
                    break
                h *= 0.5
            else:
                converged = True
                break
        if not converged:
            stagnated += 1
        if val > best_val:
            best_val, best_y, best_restart = val, y, r

    coeffs = np.zeros(model.n_modes)
    coeffs[1:K] = best_y * scale
    return CstarEstimate(
        float(best_val) * (n - 2) / (4.0 * (n - 1)),
        "variational",
        diagnostics={
            "ratio": float(best_val),
            "seed_ratio": float(seed_ratio),
            "restarts": restarts,
            "best_restart": best_restart,
            "iterations": total_iters,
            "stagnated_restarts": stagnated,
            "maximizer": coeffs,
        },
    )


def maximizer_field(model: SpectralModel, estimate: CstarEstimate) -> ScalarField:
    return ScalarField(model, model.synthesize(estimate.diagnostics["maximizer"]))


def estimate_cstar(
    model: SpectralModel,
    methods=("ascent", "sweep", "slab"),
    restarts: int = 20,
    iters: int = 300,
    seed: int = 0,
) -> CstarEstimate:
    """Largest applicable estimate; ``diagnostics["candidates"]`` lists all."""
    found = []
    for m in methods:
        try:
            if m == "ascent":
                found.append(sobolev_ratio_ascent(model, restarts, iters, seed=seed))
            elif m == "sweep":
                found.append(cheeger_sweep(model))
            elif m == "slab":
                found.append(slab_candidate(model))
            else:
                raise UsageError(f"unknown estimator {m!r}")
        except UnsupportedOperationError:
            continue
    if not found:
        raise UnsupportedOperationError("no estimator applies to this model")
    best = max(found, key=lambda e: e.value)
    out = CstarEstimate(best.value, best.method, True, dict(best.diagnostics))
    out.diagnostics["candidates"] = {e.method: e.value for e in found}
    return out


# --------------------------------------------------------------------------
# inequalities in starred norms
# --------------------------------------------------------------------------


def poincare_sobolev_sides(model: SpectralModel, u, cstar: float) -> dict:
    """``(lhs, rhs)`` of the starred Poincare, Poincare-Sobolev and Sobolev inequalities.

    * poincare:         ``||u - u_M||*_2 <= 2(n-1)/(n-2) C* ||grad u||*_2``
    * poincare_sobolev: ``||u - u_M||*_q <= 4(n-1)/(n-2) C* ||grad u||*_2``
    * sobolev:          ``||u||*_q <= 2(n-1)/(n-2) C* ||grad u||*_2 + sqrt 2 ||u||*_2``
    """
    u = as_field(model, u)
    n = model.n_intrinsic
    q = sobolev_exponent(n)
    w, vol = model.weights, model.volume
    vals = u.values
    centered = vals - np.dot(w, vals) / vol
    grad = gradient_norm_star(model, u)
    k = (n - 1) / (n - 2) * cstar
    return {
        "poincare": (_star_q(centered, w, vol, 2.0), 2.0 * k * grad),
        "poincare_sobolev": (_star_q(centered, w, vol, q), 4.0 * k * grad),
        "sobolev": (
            _star_q(vals, w, vol, q),
            2.0 * k * grad + math.sqrt(2.0) * _star_q(vals, w, vol, 2.0),
        ),
    }
