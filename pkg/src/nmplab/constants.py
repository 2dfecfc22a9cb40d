"""Explicit constants of the maximum-principle estimates.

All constants depend only on the dimension ``n``, the integrability
exponent ``p > n/2`` and the volume-normalized Neumann isoperimetric
constant ``C*``:

* ``C1 = 2 (n-1) / (n-2) * C*``
* Moser exponent ladder ``gamma_k = gamma_0 r^k`` with
  ``gamma_0 = 1 + (n (p-2) + 2p) / ((n-2) p)`` and ``r = n (p-1) / ((n-2) p)``
* ``A_gamma = C* (n-1)(gamma+1)/(n-2) sqrt((gamma+2)/gamma)``
* ``A = prod_{i>=1} (A_{gamma_i - 1} + sqrt 2)^(2 / gamma_i)``
* ``C2 = A C1 [1 + 2 max(C1, 1) (C1 + sqrt 2)]``
* ``C0(n) = 8 n^2 (n-1)^2 / (n-2)^3 * ((n-2)/2)^(4/n)``

The infinite product is truncated with a certified bound on the remainder
of ``log A``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .exceptions import NumericalFailure, UsageError

SQRT2 = math.sqrt(2.0)
MAX_FACTORS = 10_000_000


def _check_np(n: int, p: float) -> None:
    if n < 3:
        raise UsageError(f"dimension must be >= 3, got {n}")
    if not p > n / 2.0:
        raise UsageError(f"exponent p must exceed n/2 = {n / 2}, got {p}")


def c0(n: int) -> float:
    """Green-function lower-bound constant ``C0(n)``."""
    if n < 3:
        raise UsageError(f"C0(n) needs n >= 3, got {n}")
    return 8.0 * n**2 * (n - 1) ** 2 / (n - 2) ** 3 * ((n - 2) / 2.0) ** (4.0 / n)


def c1(n: int, cstar: float) -> float:
    return 2.0 * (n - 1) / (n - 2) * cstar


def gamma_schedule(n: int, p: float, tol: float | None = None, cstar: float = 1.0):
    """Return ``(gamma0, r, k_star)`` for the Moser exponent ladder.

    ``k_star`` is the number of product factors needed so that the tail of
    ``log A`` is certified below ``tol`` (``None`` when no ``tol`` is given).
    """
    _check_np(n, p)
    gamma0 = 1.0 + (n * (p - 2.0) + 2.0 * p) / ((n - 2.0) * p)
    r = n * (p - 1.0) / ((n - 2.0) * p)
    lhs = gamma0 * p / (p - 1.0)
    rhs = 2.0 * n / (n - 2.0)
    if abs(lhs - rhs) > 1e-12 * rhs:
        raise NumericalFailure(f"exponent identity broken: {lhs} != {rhs}")
    k_star = None if tol is None else _k_star(n, gamma0, r, cstar, tol)
    return gamma0, r, k_star


def a_gamma(n: int, cstar: float, gamma: float) -> float:
    if gamma < 1.0:
        raise UsageError(f"A_gamma needs gamma >= 1, got {gamma}")
    return cstar * (n - 1) * (gamma + 1.0) / (n - 2) * math.sqrt((gamma + 2.0) / gamma)


def log_tail_bound(n: int, gamma0: float, r: float, cstar: float, k: int) -> float:
    """Certified upper bound on ``sum_{i>k} (2/gamma_i) log(A_{gamma_i-1} + sqrt 2)``.

    Uses ``A_{gamma-1} <= c1 gamma`` with ``c1 = sqrt(3) C* (n-1)/(n-2)``
    (valid because ``gamma - 1 >= 1``), so each log term is at most
    ``log(c1 + sqrt 2) + log(gamma_0) + i log r``, and the geometric and
    arithmetic-geometric series are summed in closed form.
    """
    cc1 = math.sqrt(3.0) * cstar * (n - 1) / (n - 2)
    base = math.log(cc1 + SQRT2) + math.log(gamma0)
    x = 1.0 / r
    geo = x ** (k + 1) / (1.0 - x)
    arith = x ** (k + 1) * ((k + 1) - k * x) / (1.0 - x) ** 2
    return (2.0 / gamma0) * (base * geo + math.log(r) * arith)


def _k_star(n, gamma0, r, cstar, tol) -> int:
    if not tol > 0:
        raise UsageError("tolerance must be positive")
    # exponential search then bisection on the monotone tail bound
    hi = 1
    while log_tail_bound(n, gamma0, r, cstar, hi) > tol:
        hi *= 2
        if hi > MAX_FACTORS:
            raise NumericalFailure(
                f"tail of log A cannot reach {tol:g} within {MAX_FACTORS} factors (r = {r})"
            )
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if log_tail_bound(n, gamma0, r, cstar, mid) > tol:
            lo = mid
        else:
            hi = mid
    return hi


def product_A(n: int, p: float, cstar: float, tol: float = 1e-12, k: int | None = None):
    """Certified value of the Moser product ``A``.

    Returns ``(A, tail_bound)`` where ``tail_bound`` bounds the truncation
    error of ``log A``; the returned ``A`` is the truncated product, so the
    true value lies in ``[A, A * exp(tail_bound)]``.  Passing ``k``
    overrides the number of factors.
    """
    if cstar < 0:
        raise UsageError("C* must be nonnegative")
    gamma0, r, k_star = gamma_schedule(n, p, tol, cstar)
    if k is None:
        k = k_star
    log_a = 0.0
    g = gamma0
    for _ in range(k):
        g *= r
        log_a += (2.0 / g) * math.log(a_gamma(n, cstar, g - 1.0) + SQRT2)
    tail = log_tail_bound(n, gamma0, r, cstar, k)
    if log_a > 700.0:
        raise NumericalFailure(f"A = exp({log_a:.4g}) overflows double precision")
    return math.exp(log_a), tail


def c2(A: float, C1: float) -> float:
    return A * C1 * (1.0 + 2.0 * max(C1, 1.0) * (C1 + SQRT2))


@dataclass(frozen=True)
class ConstantSet:
    """All constants for a given ``(n, p, C*)``.

    ``coef_f`` follows the Green-function step ``C0 C*^2 + 2 C2``;
    ``coef_f_stated`` is the variant ``C0 C* + 2 C2`` with a single power of
    ``C*``; it is kept for reporting only.
    """

    n: int
    p: float
    cstar: float
    C1: float
    gamma0: float
    r: float
    k_star: int
    A: float
    A_tail_bound: float
    C2: float
    C0n: float
    coef_f: float
    coef_phi: float
    coef_f_stated: float
    moser_f: float
    moser_u: float

    @property
    def degenerate(self) -> bool:
        return self.cstar == 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def constant_set(n: int, p: float, cstar: float, tol: float = 1e-12) -> ConstantSet:
    gamma0, r, k_star = gamma_schedule(n, p, tol, cstar)
    A, tail = product_A(n, p, cstar, tol)
    C1 = c1(n, cstar)
    C2 = c2(A, C1)
    C0n = c0(n)
    return ConstantSet(
        n=n,
        p=float(p),
        cstar=float(cstar),
        C1=C1,
        gamma0=gamma0,
        r=r,
        k_star=k_star,
        A=A,
        A_tail_bound=tail,
        C2=C2,
        C0n=C0n,
        coef_f=C0n * cstar**2 + 2.0 * C2,
        coef_phi=C2,
        coef_f_stated=C0n * cstar + 2.0 * C2,
        moser_f=A * C1,
        moser_u=A * (C1 + SQRT2),
    )
