"""Binary model cache (``NMPM1``) and kernel export (``NMPK1``).

Both formats are a 5-byte ASCII magic followed by little-endian float64
values only:

* ``NMPM1``: ``N, n, volume, has_diameter, diameter, weights[N],
  eigenvalues[K], eigenbasis[N*K]`` (row-major).  ``K`` is implied by the
  file length.
* ``NMPK1``: ``N, kind_code, t, matrix[N*N]`` (row-major); ``t`` is NaN for
  the time-independent Green function.
"""

from __future__ import annotations

import hashlib
import math
import os
from typing import Optional

import numpy as np

from .exceptions import ModelError, NMPError
from .kernels import KernelMatrix
from .model import SpectralModel, build_from_spec, build_graph_model, graph_inputs

MODEL_MAGIC = b"NMPM1"
KERNEL_MAGIC = b"NMPK1"
KERNEL_KINDS = {"heat": 0.0, "centered": 1.0, "green": 2.0}
_LE = np.dtype("<f8")


def _read_block(path: str, magic: bytes) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise NMPError(f"cannot read {path}: {exc}") from exc
    if data[: len(magic)] != magic:
        raise ModelError(f"{path}: bad magic, expected {magic.decode()}")
    body = data[len(magic):]
    if len(body) % 8:
        raise ModelError(f"{path}: truncated payload")
    return np.frombuffer(body, dtype=_LE).astype(float)


def _write_block(path: str, magic: bytes, values: np.ndarray) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(magic)
            fh.write(np.ascontiguousarray(values, dtype=_LE).tobytes())
    except OSError as exc:
        raise NMPError(f"cannot write {path}: {exc}") from exc


def write_model(model: SpectralModel, path: str) -> None:
    N, K = model.eigenbasis.shape
    has_diam = model.diameter is not None
    header = [N, model.n_intrinsic, model.volume, float(has_diam), model.diameter if has_diam else 0.0]
    _write_block(
        path,
        MODEL_MAGIC,
        np.concatenate([header, model.weights, model.eigenvalues, model.eigenbasis.ravel()]),
    )


def read_model_arrays(path: str) -> dict:
    """Decode an ``NMPM1`` file into its named arrays."""
    v = _read_block(path, MODEL_MAGIC)
    if v.size < 5:
        raise ModelError(f"{path}: header too short")
    N, n = int(v[0]), int(v[1])
    rest = v.size - 5 - N
    if N < 1 or rest <= 0 or rest % (N + 1):
        raise ModelError(f"{path}: payload length inconsistent with N = {N}")
    K = rest // (N + 1)
    weights = v[5 : 5 + N]
    return {
        "N": N,
        "n": n,
        "volume": float(v[2]),
        "diameter": float(v[4]) if v[3] else None,
        "weights": weights.copy(),
        "eigenvalues": v[5 + N : 5 + N + K].copy(),
        "eigenbasis": v[5 + N + K :].reshape(N, K).copy(),
    }


def read_model(path: str) -> SpectralModel:
    """A gradient-free model holding only the cached spectral data."""
    a = read_model_arrays(path)
    return SpectralModel(
        kind="cached",
        n_intrinsic=a["n"],
        nodes=np.arange(a["N"], dtype=float),
        weights=a["weights"],
        eigenvalues=a["eigenvalues"],
        eigenbasis=a["eigenbasis"],
        diameter=a["diameter"],
        spec=f"cached:{path}",
    )


def cache_path(spec: str, cache_dir: str) -> str:
    digest = hashlib.sha256(spec.encode()).hexdigest()[:16]
    return os.path.join(cache_dir, f"{digest}.nmpm")


def load_or_build(spec: str, cache_dir: Optional[str]) -> SpectralModel:
    """Build ``spec``, reusing a cached spectrum when one exists.

    Operators that are not spectral (gradients, cut edges) are always rebuilt
    from the model spec; the cached eigenpairs replace the freshly computed ones
    only for graph models, whose eigensolve dominates construction time.
    """
    if cache_dir is None:
        return build_from_spec(spec)
    os.makedirs(cache_dir, exist_ok=True)
    path = cache_path(spec, cache_dir)
    if os.path.exists(path):
        inputs = graph_inputs(spec)
        if inputs is not None:
            cached = read_model_arrays(path)
            masses, edges, n = inputs
            return build_graph_model(
                masses, edges, n, name=spec,
                spectrum=(cached["eigenvalues"], cached["eigenbasis"]),
            )
    model = build_from_spec(spec)
    write_model(model, path)
    return model


def write_kernel(kernel: KernelMatrix, path: str) -> None:
    N = kernel.matrix.shape[0]
    t = math.nan if kernel.t is None else float(kernel.t)
    header = [N, KERNEL_KINDS[kernel.kind], t]
    _write_block(path, KERNEL_MAGIC, np.concatenate([header, kernel.matrix.ravel()]))


def read_kernel(path: str):
    """Return ``(kind, t, matrix)`` from an ``NMPK1`` file."""
    v = _read_block(path, KERNEL_MAGIC)
    N = int(v[0])
    if v.size != 3 + N * N:
        raise ModelError(f"{path}: payload length inconsistent with N = {N}")
    kinds = {code: name for name, code in KERNEL_KINDS.items()}
    kind = kinds.get(float(v[1]))
    if kind is None:
        raise ModelError(f"{path}: unknown kernel kind code {v[1]}")
    t = None if math.isnan(v[2]) else float(v[2])
    return kind, t, v[3:].reshape(N, N).copy()


__all__ = [
    "write_model",
    "read_model",
    "read_model_arrays",
    "load_or_build",
    "cache_path",
    "write_kernel",
    "read_kernel",
]
