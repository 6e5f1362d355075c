"""On-disk cache of high-accuracy reference controls.

File layout (little-endian)::

    4 bytes   magic  b"L1PG"
    uint32    format version (1)
    uint64    N, number of control coefficients
    N x f64   control values
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from pathlib import Path

import numpy as np

from .fem import ControlProblem, PdeConfig
from .mesh import build_uniform_mesh

log = logging.getLogger(__name__)

MAGIC = b"L1PG"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")


class CacheFormatError(ValueError):
    pass


def write_control(path, u) -> None:
    u = np.ascontiguousarray(u, dtype="<f8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, u.size))
        fh.write(u.tobytes())
    tmp.replace(path)


def read_control(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CacheFormatError(f"{path}: truncated header")
    magic, version, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CacheFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CacheFormatError(f"{path}: unsupported version {version}")
    if len(data) != _HEADER.size + 8 * n:
        raise CacheFormatError(f"{path}: expected {n} values, got {(len(data) - _HEADER.size) / 8}")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(float)


def cache_key(level: int, pde: PdeConfig) -> str:
    payload = json.dumps(
        {"level": int(level), "alpha": float(pde.alpha), "bc": pde.bc,
         "bounds": [float(b) for b in pde.bounds]},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def reference_solution(level: int, pde: PdeConfig, cache_dir, gap_tol: float = 1e-11,
                       seed: int = 0, problem: ControlProblem | None = None):
    """Return ``(u_ref, J(u_ref))``, computing and caching u_ref when absent."""
    from .optimizers import RunConfig, prox_grad_l1

    if problem is None:
        problem = ControlProblem(build_uniform_mesh(level), pde)
    path = Path(cache_dir) / f"ref_{cache_key(level, pde)}.bin"
    if path.exists():
        u = read_control(path)
        if u.size == problem.mesh.n_triangles:
            return u, problem.objective(u)
        log.warning("ignoring cached reference %s of wrong size", path)
    log.info("computing reference solution at level %d (gap_tol %.1e)", level, gap_tol)
    res = prox_grad_l1(RunConfig(algorithm="pg_l1", gap_tol=gap_tol, level=level, pde=pde,
                                 seed=seed, max_iter=20000), problem)
    write_control(path, res.u)
    return res.u, res.objective
