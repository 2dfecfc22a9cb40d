"""Heat kernel, centered heat kernel and Green function as dense matrices.

Every kernel is the exact matrix function of the discrete Laplacian,

    H(x, y, t) = sum_k exp(-lambda_k t) phi_k(x) phi_k(y),
    G(x, y, t) = H(x, y, t) - 1/vol      (modes k >= 1),
    G0(x, y)   = sum_{k>=1} phi_k(x) phi_k(y) / lambda_k,

and acts on node fields through the weighted sum
``(K u)(x) = sum_y w_y K(x, y) u(y)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .constants import c0
from .exceptions import ModelError, NumericalFailure, UsageError
from .model import ScalarField, SpectralModel, apply_laplacian, as_field, gradient, vector_dim
from .records import VerificationRecord

LAMBDA1_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Node-by-node kernel with its kind (``heat``, ``centered``, ``green``)."""

    model: SpectralModel
    kind: str
    matrix: np.ndarray
    t: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def apply(self, u) -> ScalarField:
        u = as_field(self.model, u)
        return ScalarField(self.model, self.matrix @ (self.model.weights * u.values))

    def row_integrals(self) -> np.ndarray:
        return self.matrix @ self.model.weights

    def symmetry_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T)))

    def min_offdiagonal(self) -> float:
        off = self.matrix.copy()
        np.fill_diagonal(off, np.inf)
        return float(off.min())


def _modal(model: SpectralModel, gains: np.ndarray, start: int = 0) -> np.ndarray:
    phi = model.eigenbasis[:, start:]
    return (phi * gains[start:]) @ phi.T


def _check_t(t: float) -> float:
    if not t > 0:
        raise UsageError(f"time must be positive, got {t}")
    return float(t)


def _require_gap(model: SpectralModel) -> None:
    if model.n_modes < 2 or model.eigenvalues[1] <= LAMBDA1_TOL:
        raise ModelError("first nonzero eigenvalue vanishes; Green function undefined")


def heat_kernel(model: SpectralModel, t: float) -> KernelMatrix:
    t = _check_t(t)
    return KernelMatrix(model, "heat", _modal(model, np.exp(-model.eigenvalues * t)), t)


def centered_kernel(model: SpectralModel, t: float) -> KernelMatrix:
    """``H - 1/vol``, summed over nonconstant modes to avoid cancellation."""
    t = _check_t(t)
    return KernelMatrix(model, "centered", _modal(model, np.exp(-model.eigenvalues * t), 1), t)


def green_function(model: SpectralModel) -> KernelMatrix:
    _require_gap(model)
    gains = np.zeros(model.n_modes)
    gains[1:] = 1.0 / model.eigenvalues[1:]
    return KernelMatrix(model, "green", _modal(model, gains, 1))


def midpoint_time_weights(
    eigenvalues: np.ndarray, t_max: float, panels: int, t_first: Optional[float] = None
) -> np.ndarray:
    """Composite midpoint quadrature of ``int_0^t_max exp(-lambda t) dt`` per mode.

    The rule is applied in log-time ``t = e^s`` on ``[t_first, t_max]``, where
    the integrand ``lambda-scaled x e^{-x}`` is smooth and decays at both
    ends, so equal panels in ``s`` converge exponentially fast.  The short
    piece ``[0, t_first]`` is one ordinary midpoint panel.
    """
    if panels < 2:
        raise UsageError("need at least two panels")
    lam = np.asarray(eigenvalues, dtype=float)
    if t_first is None:
        t_first = 1e-8 / max(float(lam.max()), 1.0 / t_max)
    if not t_first < t_max:
        raise UsageError("t_max too small for the quadrature range")
    s = np.linspace(np.log(t_first), np.log(t_max), panels + 1)
    t_mid = np.exp(0.5 * (s[:-1] + s[1:]))
    weights = np.diff(s) * t_mid
    return np.exp(-np.outer(lam, t_mid)) @ weights + t_first * np.exp(-lam * t_first / 2.0)


def green_by_time_integral(
    model: SpectralModel,
    t_max: Optional[float] = None,
    panels: int = 2000,
    include_tail: bool = True,
    tol: Optional[float] = None,
) -> KernelMatrix:
    """Green function as ``int_0^inf G(., ., t) dt``.

    The integral up to ``t_max`` (default ``40 / lambda_1``) uses the
    log-time midpoint rule; the remainder ``exp(-lambda t_max) / lambda`` is
    added mode by mode when ``include_tail``.  ``meta["error_estimate"]`` is
    the max-abs kernel change between ``panels`` and ``panels // 2`` (an
    upper estimate for the coarser rule, hence for this one).  If ``tol`` is
    given and the estimate exceeds it, :class:`NumericalFailure` is raised.
    """
    _require_gap(model)
    lam = model.eigenvalues[1:]
    if t_max is None:
        t_max = 40.0 / lam[0]
    t_max = _check_t(t_max)
    fine = midpoint_time_weights(lam, t_max, panels)
    coarse = midpoint_time_weights(lam, t_max, max(panels // 2, 2))
    peak = np.max(model.eigenbasis[:, 1:] ** 2, axis=0)
    error_estimate = float(np.sum(np.abs(fine - coarse) * peak))
    if tol is not None and error_estimate > tol:
        raise NumericalFailure(
            f"quadrature error estimate {error_estimate:.3g} exceeds {tol:.3g}; use more panels"
        )
    if include_tail:
        fine = fine + np.exp(-lam * t_max) / lam
    gains = np.concatenate([[0.0], fine])
    return KernelMatrix(
        model,
        "green",
        _modal(model, gains, 1),
        meta={
            "t_max": t_max,
            "panels": panels,
            "error_estimate": error_estimate,
            "tail": include_tail,
        },
    )


@dataclass
class KernelIdentityReport:
    t: float
    s: float
    stochasticity: float
    centering: float
    symmetry: float
    semigroup: float
    square_formula: float
    diagonal_increase: float
    heat_semigroup: float

    def passed(self, tol: float = 1e-10) -> bool:
        return max(
            self.stochasticity,
            self.centering,
            self.symmetry,
            self.semigroup,
            self.square_formula,
            self.heat_semigroup,
        ) <= tol and self.diagonal_increase <= 1e-12


def kernel_identities(
    model: SpectralModel, t: float, s: float, t_grid: Optional[Sequence[float]] = None
) -> KernelIdentityReport:
    """Max-abs residuals of the heat/centered kernel identities.

    * ``int H(x, y, t) dy = 1`` and ``int G(x, y, t) dy = 0``
    * ``G(x, y, t + s) = int G(x, z, s) G(z, y, t) dz`` (and the same for ``H``)
    * ``G(x, x, t) = int G(x, y, t/2)^2 dy``
    * ``t -> G(x, x, t)`` nonincreasing on ``t_grid``
    """
    w = model.weights
    H = heat_kernel(model, t)
    G_t = centered_kernel(model, t)
    G_s = centered_kernel(model, s)
    G_ts = centered_kernel(model, t + s)
    H_s = heat_kernel(model, s)
    H_ts = heat_kernel(model, t + s)
    G_half = centered_kernel(model, t / 2.0).matrix

    semigroup = np.max(np.abs(G_ts.matrix - (G_s.matrix * w) @ G_t.matrix))
    heat_semigroup = np.max(np.abs(H_ts.matrix - (H_s.matrix * w) @ H.matrix))
    square = np.max(np.abs(np.diag(G_t.matrix) - (G_half**2) @ w))

    if t_grid is None:
        t_grid = np.geomspace(1e-3, 10.0, 25)
    diag = np.array([np.diag(centered_kernel(model, tt).matrix) for tt in sorted(t_grid)])
    increase = float(np.max(np.diff(diag, axis=0), initial=0.0))

    return KernelIdentityReport(
        t=t,
        s=s,
        stochasticity=float(np.max(np.abs(H.row_integrals() - 1.0))),
        centering=float(np.max(np.abs(G_t.row_integrals()))),
        symmetry=max(H.symmetry_residual(), G_t.symmetry_residual()),
        semigroup=float(semigroup),
        square_formula=float(square),
        diagonal_increase=max(increase, 0.0),
        heat_semigroup=float(heat_semigroup),
    )


def heat_min_entry(model: SpectralModel, times: Sequence[float]) -> float:
    """Most negative heat-kernel entry over the given times."""
    return min(float(heat_kernel(model, t).matrix.min()) for t in times)


def green_lower_bound_check(
    model: SpectralModel,
    cstar: float,
    green: Optional[KernelMatrix] = None,
    cstar_source: str = "user",
) -> VerificationRecord:
    """Check ``min_{x != y} G0(x, y) >= -C0(n) C*^2 / vol``.

    Recorded as ``lhs = max(0, -min G0) <= rhs = C0(n) C*^2 / vol``.
    """
    start = time.perf_counter()
    if green is None:
        green = green_function(model)
    sigma = green.min_offdiagonal()
    rhs = c0(model.n_intrinsic) * cstar**2 / model.volume
    lhs = max(0.0, -sigma)
    return VerificationRecord.from_sides(
        "green",
        model.spec,
        lhs,
        rhs,
        cstar=float(cstar),
        cstar_source=cstar_source,
        wall_time=time.perf_counter() - start,
        extras={"sigma": sigma, "C0n": c0(model.n_intrinsic)},
    )


def pseudoinverse_green(model_weights: np.ndarray, stiffness: np.ndarray) -> np.ndarray:
    """Green function from the Moore-Penrose pseudoinverse of ``W^-1/2 K W^-1/2``.

    Independent of the model's eigenbasis; used as an oracle on graphs.
    """
    s = 1.0 / np.sqrt(model_weights)
    sym = s[:, None] * stiffness * s[None, :]
    return s[:, None] * np.linalg.pinv(sym) * s[None, :]


def graph_stiffness(model: SpectralModel) -> np.ndarray:
    """Stiffness matrix ``D - C`` assembled from the model's edge list."""
    if model.kind != "graph":
        raise UsageError("stiffness assembly needs a graph model")
    K = np.zeros((model.size, model.size))
    for i, j, c in model.edges:
        i, j = int(i), int(j)
        K[i, j] -= c
        K[j, i] -= c
        K[i, i] += c
        K[j, j] += c
    return K


def expm_heat_oracle(model: SpectralModel, t: float) -> np.ndarray:
    """``exp(-t M^-1 K) M^-1`` by scipy's scaling-and-squaring, for graphs."""
    from scipy.linalg import expm

    K = graph_stiffness(model)
    minv = 1.0 / model.weights
    return expm(-t * (minv[:, None] * K)) * minv[None, :]


def time_integral_sweep(model: SpectralModel, t_max_values: Sequence[float], panels: int = 2000):
    """Max-abs gap to ``green_function`` without the analytic tail, per ``t_max``."""
    exact = green_function(model).matrix
    out = []
    for tm in t_max_values:
        approx = green_by_time_integral(model, tm, panels, include_tail=False).matrix
        out.append((float(tm), float(np.max(np.abs(approx - exact)))))
    return out


def representation_residual(model: SpectralModel, u, green: Optional[KernelMatrix] = None) -> float:
    """Relative max error of ``u = u_M - int G0(., y) (Lap u)(y) dy``."""
    u = as_field(model, u)
    if green is None:
        green = green_function(model)
    u_mean = float(np.dot(model.weights, u.values)) / model.volume
    rebuilt = u_mean - green.apply(apply_laplacian(model, u)).values
    return _relative(rebuilt, u.values)


def gradient_matrices(model: SpectralModel) -> np.ndarray:
    """``(d, N, N)`` node matrices of the gradient components."""
    eye = np.eye(model.size)
    cols = [gradient(model, eye[:, j]).components for j in range(model.size)]
    return np.stack(cols, axis=2)


def gradient_representation_residual(
    model: SpectralModel, u, green: Optional[KernelMatrix] = None, grad_mats=None
) -> float:
    """Relative max error of ``u = u_M + int grad_y G0(., y) . grad u(y) dy``."""
    u = as_field(model, u)
    if vector_dim(model) == 0:
        raise ModelError("gradient representation needs a model with a pointwise gradient")
    if green is None:
        green = green_function(model)
    if grad_mats is None:
        grad_mats = gradient_matrices(model)
    w = model.weights
    u_mean = float(np.dot(w, u.values)) / model.volume
    rebuilt = np.full(model.size, u_mean)
    for D in grad_mats:
        # row x of G0 differentiated in y is G0[x, :] @ D^T
        rebuilt += green.matrix @ (D.T @ (w * (D @ u.values)))
    return _relative(rebuilt, u.values)


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


__all__ = [
    "KernelMatrix",
    "KernelIdentityReport",
    "heat_kernel",
    "centered_kernel",
    "green_function",
    "green_by_time_integral",
    "kernel_identities",
    "green_lower_bound_check",
    "heat_min_entry",
    "pseudoinverse_green",
    "graph_stiffness",
    "expm_heat_oracle",
    "time_integral_sweep",
    "midpoint_time_weights",
    "representation_residual",
    "gradient_representation_residual",
    "gradient_matrices",
]
