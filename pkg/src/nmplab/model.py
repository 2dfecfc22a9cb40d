"""Exact finite spectral models of closed manifolds.

A :class:`SpectralModel` is a set of quadrature nodes with positive weights
together with a complete weighted-orthonormal eigenbasis of a discrete
Laplacian.  Three families are provided:

* flat tori ``T^n = (R / L Z)^n`` sampled on a uniform grid with every
  representable real Fourier mode,
* the round unit 3-sphere restricted to zonal functions (functions of the
  polar angle only), sampled at midpoints in ``theta``,
* weighted graphs with node masses and edge conductances.

Sign convention: ``laplacian = div grad`` has nonpositive spectrum and the
model stores ``eigenvalues >= 0`` with ``laplacian(phi_k) = -eigenvalues[k] * phi_k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg as sla
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import ModelError, UnsupportedOperationError, UsageError

TORUS_NODE_CAP = 4096
GRAPH_NODE_CAP = 2000

ArrayLike = Union[np.ndarray, Sequence[float]]


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Immutable spectral surrogate of a closed manifold.

    Attributes:
        kind: one of ``"torus"``, ``"sphere3"``, ``"graph"``.
        n_intrinsic: the dimension ``n`` fed to all constant formulas.
        nodes: node coordinates (informational).
        weights: positive quadrature weights; they sum to the volume.
        eigenvalues: ascending, ``eigenvalues[0] == 0``.
        eigenbasis: ``(N, K)`` matrix whose columns are weighted-orthonormal.
        diameter: known diameter or ``None``.
        spec: the model-spec string this model was built from.
        edges: ``(E, 3)`` array of ``(i, j, area)`` used for cut computations.
    """

    kind: str
    n_intrinsic: int
    nodes: np.ndarray
    weights: np.ndarray
    eigenvalues: np.ndarray
    eigenbasis: np.ndarray
    diameter: Optional[float]
    spec: str
    edges: Optional[np.ndarray] = None
    _grad: Optional[dict] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def volume(self) -> float:
        return float(np.sum(self.weights))

    @property
    def is_complete(self) -> bool:
        return self.n_modes == self.size

    @property
    def has_gradient(self) -> bool:
        return self._grad is not None

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Spectral coefficients ``<u, phi_k>_w`` of node values (last axis = nodes)."""
        return (np.asarray(values) * self.weights) @ self.eigenbasis

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs) @ self.eigenbasis.T

    def gram_residual(self) -> float:
        """Max-abs deviation of the weighted Gram matrix of the basis from identity."""
        gram = self.eigenbasis.T @ (self.weights[:, None] * self.eigenbasis)
        return float(np.max(np.abs(gram - np.eye(self.n_modes))))

    def __repr__(self) -> str:
        return f"SpectralModel({self.spec!r}, N={self.size}, vol={self.volume:.6g})"


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node values of a function on a model."""

    model: SpectralModel
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.model.size,):
            raise UsageError(
                f"field has shape {values.shape}, model has {self.model.size} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise UsageError("field values must be finite")
        object.__setattr__(self, "values", values)

    def _other(self, other):
        if isinstance(other, ScalarField):
            _check_same(self.model, other.model)
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.model, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.model, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.model, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.model, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.model, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.model, -self.values)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class VectorField:
    """Vector field as a ``(d, N)`` array of components.

    ``d`` is ``n`` on a torus, 1 (the polar component) on the zonal sphere,
    and 0 on graph models, where only the zero field exists.
    """

    model: SpectralModel
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        d = vector_dim(self.model)
        if comps.shape != (d, self.model.size):
            raise UsageError(
                f"vector field has shape {comps.shape}, expected {(d, self.model.size)}"
            )
        if not np.all(np.isfinite(comps)):
            raise UsageError("vector field components must be finite")
        object.__setattr__(self, "components", comps)

    def pointwise_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.components**2, axis=0))

    def __add__(self, other: "VectorField"):
        _check_same(self.model, other.model)
        return VectorField(self.model, self.components + other.components)

    def __mul__(self, c: float):
        return VectorField(self.model, self.components * c)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(self.model, -self.components)


def _check_same(a: SpectralModel, b: SpectralModel) -> None:
    if a is not b:
        raise ModelError(f"model mismatch: {a.spec!r} vs {b.spec!r}")


def vector_dim(model: SpectralModel) -> int:
    if model.kind == "torus":
        return model.n_intrinsic
    if model.kind == "sphere3":
        return 1
    return 0


def as_field(model: SpectralModel, u) -> ScalarField:
    """Coerce arrays (or scalars) to a :class:`ScalarField` on ``model``."""
    if isinstance(u, ScalarField):
        _check_same(model, u.model)
        return u
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        arr = np.full(model.size, float(arr))
    return ScalarField(model, arr)


def zero_vector(model: SpectralModel) -> VectorField:
    return VectorField(model, np.zeros((vector_dim(model), model.size)))


def as_vector(model: SpectralModel, phi) -> VectorField:
    if phi is None:
        return zero_vector(model)
    if isinstance(phi, VectorField):
        _check_same(model, phi.model)
        return phi
    return VectorField(model, np.asarray(phi, dtype=float))


def mode(model: SpectralModel, k: int) -> ScalarField:
    """The ``k``-th basis function as a field."""
    return ScalarField(model, model.eigenbasis[:, k].copy())


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------


def _fourier_basis_1d(m: int, L: float):
    """Real orthonormal Fourier basis on ``m`` uniform points of ``[0, L)``.

    Returns node coordinates, the ``(m, m)`` basis, 1D eigenvalues and the
    mode-space derivative matrix.  The Nyquist cosine has no representable
    derivative on the grid; it is mapped onto itself with factor ``pi m / L``
    so that ``Dhat^T Dhat`` equals the 1D eigenvalue matrix exactly.
    """
    x = np.arange(m) * (L / m)
    basis = np.empty((m, m))
    evals = np.empty(m)
    dhat = np.zeros((m, m))
    basis[:, 0] = 1.0 / math.sqrt(L)
    evals[0] = 0.0
    col = 1
    for j in range(1, m // 2):
        k = 2.0 * math.pi * j / L
        c, s = col, col + 1
        basis[:, c] = math.sqrt(2.0 / L) * np.cos(k * x)
        basis[:, s] = math.sqrt(2.0 / L) * np.sin(k * x)
        evals[c] = evals[s] = k * k
        dhat[s, c] = -k
        dhat[c, s] = k
        col += 2
    kn = math.pi * m / L
    basis[:, col] = np.where(np.arange(m) % 2 == 0, 1.0, -1.0) / math.sqrt(L)
    evals[col] = kn * kn
    dhat[col, col] = kn
    return x, basis, evals, dhat


def build_torus(n: int, m: int, L: float = 1.0, node_cap: int = TORUS_NODE_CAP) -> SpectralModel:
    """Flat torus ``(R / L Z)^n`` on an ``m^n`` grid with all Fourier modes.

    >>> build_torus(3, 8, 1.0).volume
    1.0
    """
    if n not in (3, 4):
        raise UsageError(f"torus dimension must be 3 or 4, got {n}")
    if m < 4 or m % 2:
        raise UsageError(f"grid points per axis must be even and >= 4, got {m}")
    if not L > 0:
        raise UsageError(f"side length must be positive, got {L}")
    size = m**n
    if size > node_cap:
        raise ModelError(f"torus model has {size} nodes, cap is {node_cap}")

    x, b1, e1, dhat = _fourier_basis_1d(m, L)
    basis = b1
    evals = e1
    for _ in range(n - 1):
        basis = np.kron(basis, b1)
        evals = np.add.outer(evals, e1).ravel()
    order = np.argsort(evals, kind="stable")
    basis = np.ascontiguousarray(basis[:, order])
    evals = evals[order]

    h = L / m
    weights = np.full(size, h**n)
    grid = np.stack(np.meshgrid(*([x] * n), indexing="ij"), axis=-1).reshape(size, n)
    # node-space derivative along one axis: D1 = B1 Dhat B1^T W1
    d1 = b1 @ dhat @ b1.T * h

    # nearest-neighbour faces between grid cells, area h^(n-1)
    idx = np.arange(size).reshape((m,) * n)
    pairs = []
    for a in range(n):
        nb = np.roll(idx, -1, axis=a)
        pairs.append(np.stack([idx.ravel(), nb.ravel()], axis=1))
    pairs = np.concatenate(pairs)
    edges = np.column_stack([pairs, np.full(len(pairs), h ** (n - 1))])

    return SpectralModel(
        kind="torus",
        n_intrinsic=n,
        nodes=grid,
        weights=weights,
        eigenvalues=evals,
        eigenbasis=basis,
        diameter=L * math.sqrt(n) / 2.0,
        spec=f"torus:{n}:{m}:{_fmt(L)}",
        edges=edges,
        _grad={"axis": d1, "shape": (m,) * n},
    )


def _chebyshev_u(x: np.ndarray, kmax: int):
    """Values and x-derivatives of U_0..U_{kmax-1} at x by recurrence."""
    u = np.zeros((x.size, kmax))
    du = np.zeros((x.size, kmax))
    u[:, 0] = 1.0
    if kmax > 1:
        u[:, 1] = 2.0 * x
        du[:, 1] = 2.0
    for k in range(1, kmax - 1):
        u[:, k + 1] = 2.0 * x * u[:, k] - u[:, k - 1]
        du[:, k + 1] = 2.0 * u[:, k] + 2.0 * x * du[:, k] - du[:, k - 1]
    return u, du


def build_zonal_sphere3(m_theta: int) -> SpectralModel:
    """Zonal reduction of the round unit 3-sphere.

    Nodes are the midpoints of ``m_theta`` equal cells of ``(0, pi)`` with
    weights ``4 pi sin^2(theta) dtheta``.  The basis is the sampled zonal
    harmonics ``sin((k+1) theta) / (sin(theta) sqrt(2 pi^2))``, eigenvalue
    ``k (k + 2)``, re-orthonormalized under the discrete weights.
    """
    if m_theta < 16:
        raise UsageError(f"m_theta must be >= 16, got {m_theta}")
    m = int(m_theta)
    dtheta = math.pi / m
    theta = (np.arange(m) + 0.5) * dtheta
    weights = 4.0 * math.pi * np.sin(theta) ** 2 * dtheta
    exact_volume = 2.0 * math.pi**2
    quadrature_error = abs(weights.sum() - exact_volume) / exact_volume
    weights = weights * (exact_volume / weights.sum())

    u, du = _chebyshev_u(np.cos(theta), m)
    psi = u / math.sqrt(exact_volume)
    dpsi = -np.sin(theta)[:, None] * du / math.sqrt(exact_volume)

    # weighted Gram-Schmidt via QR of W^(1/2) Psi
    q, r = np.linalg.qr(np.sqrt(weights)[:, None] * psi)
    signs = np.sign(np.diag(r))
    r = r * signs[:, None]
    basis = sla.solve_triangular(r, psi.T, trans="T", lower=False).T
    dbasis = sla.solve_triangular(r, dpsi.T, trans="T", lower=False).T
    basis[:, 0] = 1.0 / math.sqrt(exact_volume)
    dbasis[:, 0] = 0.0
    k = np.arange(m)
    evals = (k * (k + 2)).astype(float)

    # Correct the sampled derivatives so that sum_i w |grad phi|^2 pairs
    # exactly with the eigenvalues (matters only for the top mode, whose
    # product with itself is not integrated exactly by the midpoint rule).
    gram = dbasis[:, 1:].T @ (weights[:, None] * dbasis[:, 1:])
    gvals, gvecs = np.linalg.eigh(gram)
    inv_sqrt = gvecs @ np.diag(gvals**-0.5) @ gvecs.T
    dbasis[:, 1:] = dbasis[:, 1:] @ inv_sqrt @ np.diag(np.sqrt(evals[1:]))
    dmat = dbasis @ (basis.T * weights)

    edges = np.column_stack(
        [np.arange(m - 1), np.arange(1, m), 4.0 * math.pi * np.sin(theta[:-1] + dtheta / 2) ** 2]
    )
    model = SpectralModel(
        kind="sphere3",
        n_intrinsic=3,
        nodes=theta,
        weights=weights,
        eigenvalues=evals,
        eigenbasis=basis,
        diameter=math.pi,
        spec=f"sphere3:{m}",
        edges=edges,
        _grad={"matrix": dmat, "quadrature_error": quadrature_error},
    )
    return model


def sphere_quadrature_error(model: SpectralModel) -> float:
    """Relative midpoint-rule volume error before normalization."""
    if model.kind != "sphere3":
        raise UnsupportedOperationError("only zonal sphere models carry a quadrature error")
    return model._grad["quadrature_error"]


def build_graph_model(
    node_masses: ArrayLike,
    edges: Sequence[Sequence[float]],
    n_intrinsic: int,
    name: str = "graph",
    node_cap: int = GRAPH_NODE_CAP,
    spectrum: Optional[tuple] = None,
) -> SpectralModel:
    """Weighted graph with node masses and edge conductances.

    The Laplacian is ``-(M^{-1} (D - C))`` with ``C`` the conductance matrix,
    ``D`` its row sums and ``M`` the diagonal mass matrix.  ``spectrum`` may
    supply precomputed ``(eigenvalues, eigenbasis)`` (e.g. from a cache),
    skipping the eigensolve.
    """
    masses = np.asarray(node_masses, dtype=float)
    size = masses.size
    if size < 2:
        raise UsageError("graph needs at least two nodes")
    if size > node_cap:
        raise ModelError(f"graph has {size} nodes, cap is {node_cap}")
    if np.any(masses <= 0) or not np.all(np.isfinite(masses)):
        raise UsageError("node masses must be positive and finite")
    if n_intrinsic < 3:
        raise UsageError(f"n_intrinsic must be >= 3, got {n_intrinsic}")
    e = np.asarray(edges, dtype=float).reshape(-1, 3)
    i, j, c = e[:, 0].astype(int), e[:, 1].astype(int), e[:, 2]
    if np.any(c <= 0):
        raise UsageError("edge conductances must be positive")
    if np.any((i < 0) | (i >= size) | (j < 0) | (j >= size)) or np.any(i == j):
        raise UsageError("edge endpoints out of range or self-loop")

    cond = coo_matrix((np.r_[c, c], (np.r_[i, j], np.r_[j, i])), shape=(size, size)).toarray()
    ncomp, _ = connected_components(cond > 0, directed=False)
    if ncomp != 1:
        raise ModelError(f"graph is disconnected ({ncomp} components)")
    stiffness = np.diag(cond.sum(axis=1)) - cond

    if spectrum is None:
        evals, basis = sla.eigh(stiffness, np.diag(masses))
    else:
        evals, basis = (np.array(a, dtype=float) for a in spectrum)
        if basis.shape != (size, size) or evals.shape != (size,):
            raise ModelError("precomputed spectrum has the wrong shape")
    vol = masses.sum()
    basis[:, 0] = 1.0 / math.sqrt(vol)
    evals[0] = 0.0
    if evals[1] <= 1e-10 * max(1.0, evals[-1]):
        raise ModelError("first nonzero eigenvalue vanishes; graph is disconnected")

    return SpectralModel(
        kind="graph",
        n_intrinsic=int(n_intrinsic),
        nodes=np.arange(size, dtype=float),
        weights=masses.copy(),
        eigenvalues=evals,
        eigenbasis=basis,
        diameter=None,
        spec=name,
        edges=np.column_stack([i, j, c]).astype(float),
    )


def _complete_inputs(N: int):
    return np.ones(N), [(a, b, 1.0) for a in range(N) for b in range(a + 1, N)]


def _cycle_inputs(N: int):
    return np.ones(N), [(a, (a + 1) % N, 1.0) for a in range(N)]


def complete_graph(N: int, n_intrinsic: int = 3) -> SpectralModel:
    return build_graph_model(*_complete_inputs(N), n_intrinsic, name=f"complete:{N}")


def cycle_graph(N: int, n_intrinsic: int = 3) -> SpectralModel:
    return build_graph_model(*_cycle_inputs(N), n_intrinsic, name=f"cycle:{N}")


def _graph_file_inputs(path: str):
    try:
        with open(path) as fh:
            data = json.load(fh)
        return data["masses"], data["edges"], int(data.get("n", 3))
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load graph file {path}: {exc}") from exc


def load_graph_file(path: str) -> SpectralModel:
    """Graph from a JSON file ``{"masses": [...], "edges": [[i, j, c], ...], "n": 3}``."""
    masses, edges, n = _graph_file_inputs(path)
    return build_graph_model(masses, edges, n, name=f"graph:{path}")


def graph_inputs(spec: str):
    """``(masses, edges, n_intrinsic)`` for a graph-valued spec, or ``None``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "graph":
            return _graph_file_inputs(rest)
        if kind == "complete":
            return (*_complete_inputs(int(rest)), 3)
        if kind == "cycle":
            return (*_cycle_inputs(int(rest)), 3)
    except ValueError as exc:
        raise UsageError(f"malformed model spec {spec!r}: {exc}") from exc
    return None


def _fmt(x: float) -> str:
    return repr(float(x)).rstrip("0").rstrip(".") if float(x) != int(x) else str(int(x))


def build_from_spec(spec: str) -> SpectralModel:
    """Build a model from ``kind:params``.

    Recognized: ``torus:n:m:L``, ``sphere3:mtheta``, ``graph:<path>``,
    ``complete:N``, ``cycle:N``.
    """
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "torus":
            n, m = int(parts[0]), int(parts[1])
            L = float(parts[2]) if len(parts) > 2 else 1.0
            return build_torus(n, m, L)
        if kind == "sphere3":
            return build_zonal_sphere3(int(parts[0]) if parts else 64)
        if kind == "graph":
            return load_graph_file(rest)
        if kind == "complete":
            return complete_graph(int(parts[0]))
        if kind == "cycle":
            return cycle_graph(int(parts[0]))
    except (IndexError, ValueError) as exc:
        raise UsageError(f"malformed model spec {spec!r}: {exc}") from exc
    raise UsageError(f"unknown model kind in {spec!r}")


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------


def apply_laplacian(model: SpectralModel, u) -> ScalarField:
    """``div grad u`` by spectral multiplication with ``-eigenvalues``."""
    u = as_field(model, u)
    coeffs = model.analyze(u.values)
    return ScalarField(model, model.synthesize(-model.eigenvalues * coeffs))


def _require_gradient(model: SpectralModel) -> dict:
    if model._grad is None:
        raise UnsupportedOperationError(
            f"{model.kind} models have no pointwise gradient; use dirichlet_form"
        )
    return model._grad


def gradient(model: SpectralModel, u) -> VectorField:
    g = _require_gradient(model)
    u = as_field(model, u)
    if "axis" in g:
        d1, shape = g["axis"], g["shape"]
        grid = u.values.reshape(shape)
        comps = [
            np.moveaxis(np.tensordot(d1, grid, axes=([1], [a])), 0, a).ravel()
            for a in range(len(shape))
        ]
        return VectorField(model, np.array(comps))
    return VectorField(model, (g["matrix"] @ u.values)[None, :])


def divergence_weak(model: SpectralModel, Phi) -> ScalarField:
    """Weak divergence: ``sum w (div Phi) phi = -sum w Phi . grad phi`` for all ``phi``."""
    g = _require_gradient(model)
    Phi = as_vector(model, Phi)
    if "axis" in g:
        d1, shape = g["axis"], g["shape"]
        out = np.zeros(shape)
        for a, comp in enumerate(Phi.components):
            grid = comp.reshape(shape)
            out -= np.moveaxis(np.tensordot(d1.T, grid, axes=([1], [a])), 0, a)
        # uniform weights cancel in W^-1 D^T W
        return ScalarField(model, out.ravel())
    w = model.weights
    return ScalarField(model, -(g["matrix"].T @ (w * Phi.components[0])) / w)


def divergence(model: SpectralModel, Phi) -> ScalarField:
    """Divergence of a vector field; the zero field on graph models."""
    Phi = as_vector(model, Phi)
    if Phi.components.shape[0] == 0:
        return ScalarField(model, np.zeros(model.size))
    return divergence_weak(model, Phi)


def integrate(model: SpectralModel, values) -> float:
    return float(np.dot(model.weights, np.asarray(values, dtype=float)))


def pairing(model: SpectralModel, Phi, Psi) -> float:
    """``sum_i w_i Phi(i) . Psi(i)`` for two vector fields."""
    Phi, Psi = as_vector(model, Phi), as_vector(model, Psi)
    return float(np.sum(Phi.components * Psi.components * model.weights))


def dirichlet_form(model: SpectralModel, u, phi) -> float:
    """``int grad u . grad phi``; spectral on every model, so valid on graphs."""
    cu = model.analyze(as_field(model, u).values)
    cp = model.analyze(as_field(model, phi).values)
    return float(np.sum(model.eigenvalues * cu * cp))
