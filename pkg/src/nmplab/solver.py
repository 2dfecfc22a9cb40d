"""Poisson solves, subsolution instances and maximum-principle checks.

Three estimates are checked on discrete instances, with constants taken
from :func:`nmplab.constants.constant_set`:

``check_moser_bound``
    ``sup (u - lam) <= A C1 (||f^-||*_p + ||Phi||*_2p) + A (C1 + sqrt 2) ||(u - lam)^+||*_2``
    for ``Delta u >= f + div Phi``.
``check_solution_bound``
    ``sup |u - u_M| <= C2 (||f||*_p + ||Phi||*_2p)`` for ``Delta u = f + div Phi``.
``check_theorem_A``
    ``sup u <= u_M + coef_f ||f^-||*_p + coef_phi ||Phi||*_2p`` for subsolutions,
    replaying the intermediate bounds of the argument (split ``u = v + w``).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import ConstantSet, constant_set
from .exceptions import ModelError, UsageError
from .kernels import KernelMatrix, green_function
from .model import (
    ScalarField,
    SpectralModel,
    VectorField,
    apply_laplacian,
    as_field,
    as_vector,
    divergence,
    gradient,
    pairing,
    dirichlet_form,
    integrate,
)
from .norms import average, ess_sup, norm_star, norm_star_vec, pos_neg_parts
from .records import PASS, VIOLATION, VerificationRecord, holds, slack_ratio


def _require_gap(model: SpectralModel) -> None:
    if model.n_modes < 2 or model.eigenvalues[1] <= 1e-10:
        raise ModelError("model has no spectral gap (disconnected)")


def solve_poisson(model: SpectralModel, f, Phi=None) -> ScalarField:
    """Mean-zero ``v`` with ``Delta v = f - f_M + div Phi``."""
    _require_gap(model)
    f = as_field(model, f)
    rhs = f.values + divergence(model, Phi).values
    c = model.analyze(rhs)
    c[0] = 0.0
    c[1:] = -c[1:] / model.eigenvalues[1:]
    return ScalarField(model, model.synthesize(c))


def energy(model: SpectralModel, f, Phi, v) -> float:
    """``F(v) = int |grad v|^2 + 2 (f - f_M) v - 2 Phi . grad v``.

    Its minimizers over mean-zero ``v`` solve ``Delta v = f - f_M + div Phi``.
    """
    f, v = as_field(model, f), as_field(model, v)
    Phi = as_vector(model, Phi)
    fc = f.values - average(f)
    if model.has_gradient:
        gv = gradient(model, v)
        dirichlet = pairing(model, gv, gv)
        flux = pairing(model, Phi, gv)
    else:
        dirichlet = dirichlet_form(model, v, v)
        flux = 0.0
    return dirichlet + 2.0 * integrate(model, fc * v.values) - 2.0 * flux


@dataclass
class EnergyMinimization:
    v: ScalarField
    energy: float
    iterations: int
    converged: bool


def minimize_energy(
    model: SpectralModel, f, Phi=None, iters: int = 500, rtol: float = 1e-13
) -> EnergyMinimization:
    """Conjugate-gradient descent on :func:`energy` over mean-zero fields.

    Uses the pointwise gradient/divergence operators (Dirichlet form on
    graphs), never the spectral inverse, so it is an independent route to
    the :func:`solve_poisson` solution.
    """
    _require_gap(model)
    f = as_field(model, f)
    Phi = as_vector(model, Phi)
    w, vol = model.weights, model.volume

    def project(x):
        return x - np.dot(w, x) / vol

    if model.has_gradient:
        def stiff(x):
            # W-weighted representation of -Delta x
            return -divergence(model, gradient(model, x)).values
        b = -(f.values - average(f)) - divergence(model, Phi).values
    else:
        def stiff(x):
            return -apply_laplacian(model, x).values
        b = -(f.values - average(f))
    b = project(b)

    x = np.zeros(model.size)
    r = b.copy()
    p = r.copy()
    rr = np.dot(w, r * r)
    b_norm = math.sqrt(np.dot(w, b * b))
    converged = b_norm == 0.0
    it = 0
    while not converged and it < iters:
        it += 1
        Ap = project(stiff(p))
        alpha = rr / np.dot(w, p * Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rr_new = np.dot(w, r * r)
        if math.sqrt(rr_new) <= rtol * b_norm:
            converged = True
        p = r + (rr_new / rr) * p
        rr = rr_new
    v = ScalarField(model, project(x))
    return EnergyMinimization(v, energy(model, f, Phi, v), it, converged)


# --------------------------------------------------------------------------
# instances
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """``u`` with ``Delta u = f + div Phi + slack`` and ``slack >= 0``."""

    model: SpectralModel
    f: ScalarField
    Phi: VectorField
    u: ScalarField
    slack: ScalarField
    p: float = 2.0
    lam: Optional[float] = None

    def __post_init__(self):
        n = self.model.n_intrinsic
        if not self.p > n / 2.0:
            raise UsageError(f"p must exceed n/2 = {n / 2}")
        if np.any(self.slack.values < 0):
            raise UsageError("slack must be nonnegative")

    def residual(self) -> float:
        """``||Delta u - f - div Phi - slack||*_2``."""
        r = (
            apply_laplacian(self.model, self.u)
            - self.f
            - divergence(self.model, self.Phi)
            - self.slack
        )
        return norm_star(r, 2.0)

    def scaled(self, c: float) -> "ProblemInstance":
        lam = None if self.lam is None else c * self.lam
        return ProblemInstance(
            self.model, c * self.f, c * self.Phi, c * self.u, c * self.slack, self.p, lam
        )


def generate_subsolution(
    model: SpectralModel, u, Phi=None, slack=None, p: float = 2.0, lam: Optional[float] = None
) -> ProblemInstance:
    """Instance with ``f := Delta u - div Phi - slack``."""
    u = as_field(model, u)
    Phi = as_vector(model, Phi)
    slack = as_field(model, 0.0 if slack is None else slack)
    if np.any(slack.values < 0):
        raise UsageError("slack must be nonnegative")
    f = apply_laplacian(model, u) - divergence(model, Phi) - slack
    return ProblemInstance(model, f, Phi, u, slack, p, lam)


def weak_pairing_residual(instance: ProblemInstance, phi) -> float:
    """``int grad u . grad phi + int f phi - int Phi . grad phi``; ``<= 0`` for ``phi >= 0``."""
    m = instance.model
    phi = as_field(m, phi)
    if m.has_gradient:
        gp = gradient(m, phi)
        return (
            pairing(m, gradient(m, instance.u), gp)
            + integrate(m, instance.f.values * phi.values)
            - pairing(m, instance.Phi, gp)
        )
    return dirichlet_form(m, instance.u, phi) + integrate(m, instance.f.values * phi.values)


def weak_inequality_panel(instance: ProblemInstance, n_tests: int = 50, seed: int = 0):
    """Largest normalized pairing residual over random nonnegative test functions."""
    rng = np.random.default_rng(seed)
    m = instance.model
    scale = (
        norm_star(instance.u, 2.0) * (1.0 + m.eigenvalues[-1])
        + norm_star(instance.f, 2.0)
        + norm_star_vec(instance.Phi, 2.0) * (1.0 + math.sqrt(m.eigenvalues[-1]))
        + 1.0
    ) * m.volume
    worst = -math.inf
    for _ in range(n_tests):
        phi = np.abs(rng.standard_normal(m.size))
        worst = max(worst, weak_pairing_residual(instance, phi) / (scale * norm_star(as_field(m, phi), 2.0)))
    return worst


# --------------------------------------------------------------------------
# checks
# --------------------------------------------------------------------------


def _constants(model: SpectralModel, p: float, cstar: float, consts: Optional[ConstantSet]):
    if consts is None:
        return constant_set(model.n_intrinsic, p, cstar)
    if consts.n != model.n_intrinsic or consts.p != p or consts.cstar != cstar:
        raise UsageError("constant set does not match (n, p, C*)")
    return consts


def check_moser_bound(
    instance: ProblemInstance,
    cstar: float,
    lam: Optional[float] = None,
    consts: Optional[ConstantSet] = None,
    **record_kw,
) -> VerificationRecord:
    """Sup bound for ``u - lam`` (default ``lam = u_M``)."""
    start = time.perf_counter()
    m, p = instance.model, instance.p
    cs = _constants(m, p, cstar, consts)
    if lam is None:
        lam = instance.lam if instance.lam is not None else average(instance.u)
    shifted = instance.u - lam
    f_neg = pos_neg_parts(instance.f)[1]
    data = norm_star(f_neg, p) + norm_star_vec(instance.Phi, 2 * p)
    plus = pos_neg_parts(shifted)[0]
    lhs = ess_sup(shifted)
    rhs = cs.moser_f * data + cs.moser_u * norm_star(plus, 2.0)
    return VerificationRecord.from_sides(
        "moser",
        m.spec,
        lhs,
        rhs,
        cstar=float(cstar),
        wall_time=time.perf_counter() - start,
        extras={"lambda": float(lam), "data_norm": data, "p": p},
        **record_kw,
    )


def check_solution_bound(
    model: SpectralModel,
    f,
    Phi,
    cstar: float,
    p: float = 2.0,
    consts: Optional[ConstantSet] = None,
    **record_kw,
) -> VerificationRecord:
    """Sup bound for the solution of ``Delta u = (f - f_M) + div Phi``.

    Solvability on a closed model forces zero mean, so ``f - f_M`` is used
    and its norm enters the bound; ``||f||*_p`` is reported alongside.
    """
    start = time.perf_counter()
    cs = _constants(model, p, cstar, consts)
    f = as_field(model, f)
    Phi = as_vector(model, Phi)
    u = solve_poisson(model, f, Phi)
    fc = f - average(f)
    lhs = float(np.max(np.abs(u.values - average(u))))
    rhs = cs.C2 * (norm_star(fc, p) + norm_star_vec(Phi, 2 * p))
    return VerificationRecord.from_sides(
        "solution",
        model.spec,
        lhs,
        rhs,
        cstar=float(cstar),
        wall_time=time.perf_counter() - start,
        extras={"f_norm": norm_star(f, p), "f_centered_norm": norm_star(fc, p), "p": p},
        **record_kw,
    )


def check_theorem_A(
    instance: ProblemInstance,
    cstar: float,
    green: Optional[KernelMatrix] = None,
    consts: Optional[ConstantSet] = None,
    **record_kw,
) -> VerificationRecord:
    """Sup bound for subsolutions, with the two intermediate bounds replayed.

    With ``g = f^-``: ``v`` solves ``Delta v = g - g_M + div Phi``, ``w = u - v``
    and ``sigma = min_{x != y} G0``.  Recorded in ``extras``:

    * ``v_bound``: ``sup v <= C2 (||g - g_M||*_p + ||Phi||*_2p) <= C2 (2 ||g||*_p + ||Phi||*_2p)``
    * ``w_bound``: ``w - w_M <= -sigma vol |g_M| <= C0 C*^2 ||g||*_p`` at every node

    The record passes only if the final bound and both intermediate bounds hold.
    """
    start = time.perf_counter()
    m, p = instance.model, instance.p
    cs = _constants(m, p, cstar, consts)
    if green is None:
        green = green_function(m)
    u, Phi = instance.u, instance.Phi
    g = pos_neg_parts(instance.f)[1]
    g_norm = norm_star(g, p)
    phi_norm = norm_star_vec(Phi, 2 * p)
    g_mean = average(g)

    v = solve_poisson(m, g, Phi)
    w = u - v
    sigma = green.min_offdiagonal()

    v_sup = ess_sup(v)
    v_rhs_tight = cs.C2 * (norm_star(g - g_mean, p) + phi_norm)
    v_rhs = cs.C2 * (2.0 * g_norm + phi_norm)
    w_excess = float(np.max(w.values - average(w)))
    w_mid = -sigma * m.volume * abs(g_mean)
    w_rhs = cs.C0n * cstar**2 * g_norm

    lhs = ess_sup(u)
    rhs = average(u) + cs.coef_f * g_norm + cs.coef_phi * phi_norm
    steps = {
        "v_bound": holds(v_sup, v_rhs_tight) and holds(v_rhs_tight, v_rhs),
        "w_green": holds(w_excess, w_mid),
        "w_bound": holds(w_mid, w_rhs),
    }
    ok = holds(lhs - average(u), rhs - average(u)) and all(steps.values())
    excess = lhs - average(u)
    budget = rhs - average(u)
    return VerificationRecord(
        "A",
        m.spec,
        float(excess),
        float(budget),
        slack_ratio(excess, budget),
        ok,
        cstar=float(cstar),
        status=PASS if ok else VIOLATION,
        wall_time=time.perf_counter() - start,
        extras={
            "sup_u": lhs,
            "u_mean": average(u),
            "f_neg_norm": g_norm,
            "phi_norm": phi_norm,
            "sigma": sigma,
            "v_sup": v_sup,
            "v_rhs": v_rhs,
            "w_excess": w_excess,
            "w_green_rhs": w_mid,
            "w_rhs": w_rhs,
            "coef_f": cs.coef_f,
            "coef_f_stated": cs.coef_f_stated,
            "coef_phi": cs.coef_phi,
            "stated_rhs": average(u) + cs.coef_f_stated * g_norm + cs.coef_phi * phi_norm,
            "steps": steps,
            "p": p,
        },
        **record_kw,
    )


def rescaled_theorem_A_rhs(
    instance: ProblemInstance, cstar: float, alpha: float
) -> dict:
    """Both sides of the combined (check ``A``) bound after the metric change ``g -> alpha g``.

    ``u`` is unchanged; ``f`` and the divergence data scale by ``1/alpha``,
    ``|Phi|`` measured in the new metric by ``alpha^(-1/2)``, and ``C*`` by
    ``alpha^(1/2)``.  Starred norms do not see the volume change.
    """
    if not alpha > 0:
        raise UsageError("alpha must be positive")
    m, p = instance.model, instance.p
    cs = constant_set(m.n_intrinsic, p, cstar * math.sqrt(alpha))
    g_norm = norm_star(pos_neg_parts(instance.f)[1], p) / alpha
    phi_norm = norm_star_vec(instance.Phi, 2 * p) / math.sqrt(alpha)
    excess = ess_sup(instance.u) - average(instance.u)
    budget = cs.coef_f * g_norm + cs.coef_phi * phi_norm
    return {"alpha": alpha, "lhs": excess, "rhs": budget, "slack_ratio": slack_ratio(excess, budget)}


__all__ = [
    "solve_poisson",
    "energy",
    "minimize_energy",
    "EnergyMinimization",
    "ProblemInstance",
    "generate_subsolution",
    "weak_pairing_residual",
    "weak_inequality_panel",
    "check_moser_bound",
    "check_solution_bound",
    "check_theorem_A",
    "rescaled_theorem_A_rhs",
]
