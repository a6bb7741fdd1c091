"""Shared random generators and brute-force oracles for the test suite."""

from __future__ import annotations

import numpy as np

from renyiqkd import qmath


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_pure(gen: np.random.Generator, dim: int) -> np.ndarray:
    v = gen.normal(size=dim) + 1j * gen.normal(size=dim)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def random_psd(gen: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    rank = rank or dim
    g = gen.normal(size=(dim, rank)) + 1j * gen.normal(size=(dim, rank))
    return g @ g.conj().T


def basis_pinching(dim: int) -> qmath.PinchingProjectors:
    projs = [np.diag(np.eye(dim)[i]).astype(complex) for i in range(dim)]
    return qmath.PinchingProjectors(projs)


def block_pinching(dims: list[int]) -> qmath.PinchingProjectors:
    """Pinching onto consecutive blocks of the given sizes."""
    total = sum(dims)
    projs = []
    start = 0
    for d in dims:
        p = np.zeros((total, total), dtype=complex)
        p[start:start + d, start:start + d] = np.eye(d)
        projs.append(p)
        start += d
    return qmath.PinchingProjectors(projs)


def partial_trace_loops(a: np.ndarray, dims: list[int], keep: list[int]) -> np.ndarray:
    """Naive index-contraction partial trace used as an oracle."""
    n = len(dims)
    keep = sorted(keep)
    traced = [i for i in range(n) if i not in keep]
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    out = np.zeros((dk, dk), dtype=complex)
    idx = [range(d) for d in dims]

    def flat(multi):
        f = 0
        for i, d in zip(multi, dims):
            f = f * d + i
        return f

    import itertools

    for row in itertools.product(*idx):
        for col in itertools.product(*idx):
            if any(row[t] != col[t] for t in traced):
                continue
            rk = 0
            ck = 0
            for k in keep:
                rk = rk * dims[k] + row[k]
                ck = ck * dims[k] + col[k]
            out[rk, ck] += a[flat(row), flat(col)]
    return out
