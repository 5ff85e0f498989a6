"""Dense tensors, Kruskal models and the multilinear primitives.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. Modes are
0-based. Everything that linearizes a tensor (unfolding columns,
vectorization, the on-disk payload) uses **column-major** order: the
lowest-numbered mode varies fastest. Under that convention

    unfold(reconstruct(k), n) == k.factors[n] @ coproduct_matrix(k, n).T

where the co-product is the Khatri-Rao product of the remaining factors
taken from the last mode down to the first.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

__all__ = [
    "KruskalModel",
    "unfold",
    "fold",
    "vec",
    "kronecker",
    "khatri_rao",
    "reconstruct",
    "coproduct_matrix",
    "gram_product",
    "mttkrp",
    "frobenius_norm",
    "pseudo_inverse",
]


def _check_mode(ndim: int, mode: int) -> None:
    if not 0 <= mode < ndim:
        raise ValueError(f"mode {mode} out of range for a tensor of order {ndim}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, init=False)
class KruskalModel:
    """Ordered factor matrices sharing a common column count (the rank).

    Factors are copied on construction and stored read-only.
    """

    factors: tuple[np.ndarray, ...]

    def __init__(self, factors: Sequence[np.ndarray]):
        if len(factors) == 0:
            raise ValueError("a Kruskal model needs at least one factor")
        mats = []
        for i, f in enumerate(factors):
            f = np.asarray(f, dtype=np.float64)
            if f.ndim != 2:
                raise ValueError(f"factor {i} is not a matrix (ndim={f.ndim})")
            mats.append(_readonly(f))
        ranks = {f.shape[1] for f in mats}
        if len(ranks) != 1:
            raise ValueError(f"factors have differing column counts {sorted(ranks)}")
        object.__setattr__(self, "factors", tuple(mats))

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ndim(self) -> int:
        return len(self.factors)

    def replace(self, mode: int, factor: np.ndarray) -> "KruskalModel":
        """Return a copy with the factor of ``mode`` swapped out."""
        _check_mode(self.ndim, mode)
        fs = list(self.factors)
        fs[mode] = factor
        return KruskalModel(fs)

    def full(self) -> np.ndarray:
        return reconstruct(self)

    def normalized(self, absorb: int | None = None) -> "KruskalModel":
        """Unit-norm columns, with the column scales absorbed into ``absorb``.

        ``absorb`` defaults to the last mode. Reconstruction is unchanged.
        Columns that are identically zero are left alone.
        """
        absorb = self.ndim - 1 if absorb is None else absorb
        _check_mode(self.ndim, absorb)
        fs = [np.array(f) for f in self.factors]
        scale = np.ones(self.rank)
        for m, f in enumerate(fs):
            if m == absorb:
                continue
            nrm = np.linalg.norm(f, axis=0)
            nz = nrm > 0
            f[:, nz] /= nrm[nz]
            scale[nz] *= nrm[nz]
            scale[~nz] = 0.0
        fs[absorb] = fs[absorb] * scale
        return KruskalModel(fs)


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization, shape ``(I_mode, prod of other sizes)``."""
    t = np.asarray(t, dtype=np.float64)
    _check_mode(t.ndim, mode)
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def fold(m: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    _check_mode(len(shape), mode)
    rest = int(np.prod(shape)) // shape[mode] if shape[mode] else 0
    if len(shape) == 1 and m.shape == (1, shape[0]):
        # a vector may also arrive as a single row
        return m[0].copy()
    if m.ndim != 2 or m.shape != (shape[mode], rest):
        raise ValueError(
            f"matrix of shape {m.shape} cannot be folded into {shape} along mode {mode}"
        )
    moved = (shape[mode],) + shape[:mode] + shape[mode + 1 :]
    return np.moveaxis(np.reshape(m, moved, order="F"), 0, mode)


def vec(t: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.reshape(np.asarray(t, dtype=np.float64), -1, order="F")


def kronecker(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.atleast_2d(a).astype(np.float64), np.atleast_2d(b).astype(np.float64))


def khatri_rao(*mats: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product ``mats[0] ⊙ mats[1] ⊙ ...``.

    Column ``j`` of the result is ``kron(mats[0][:, j], mats[1][:, j], ...)``,
    so the row index of the last matrix varies fastest.
    """
    if not mats:
        raise ValueError("khatri_rao needs at least one matrix")
    mats = [np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in mats]
    ncols = {m.shape[1] for m in mats}
    if len(ncols) != 1:
        raise ValueError(f"column counts differ: {[m.shape[1] for m in mats]}")
    r = mats[0].shape[1]

    def _kr(a, b):
        return (a[:, None, :] * b[None, :, :]).reshape(-1, r)

    return reduce(_kr, mats)


def reconstruct(k: KruskalModel) -> np.ndarray:
    """Sum of the ``R`` rank-one outer products."""
    letters = "abcdefghijklmnopqrstuvwxyz"
    if k.ndim > len(letters) - 1:
        raise ValueError("tensor order too large")
    subs = ",".join(f"{letters[i]}z" for i in range(k.ndim))
    out = letters[: k.ndim]
    return np.einsum(f"{subs}->{out}", *k.factors)


def coproduct_matrix(k: KruskalModel, mode: int) -> np.ndarray:
    """Khatri-Rao product of every factor except ``mode``, last mode first."""
    if k.ndim < 2:
        raise ValueError("the co-product needs a model of order >= 2")
    _check_mode(k.ndim, mode)
    others = [k.factors[m] for m in reversed(range(k.ndim)) if m != mode]
    return khatri_rao(*others)


def gram_product(factors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """``V.T @ V`` for the co-product ``V`` of ``mode``, without forming ``V``."""
    r = factors[0].shape[1]
    g = np.ones((r, r))
    for m, f in enumerate(factors):
        if m != mode:
            g *= f.T @ f
    return g


def _contract_trailing(y: np.ndarray, f: np.ndarray) -> np.ndarray:
    # y: (p, i, R) column-major; out[:, r] = y[:, :, r] @ f[:, r]
    out = np.empty((y.shape[0], f.shape[1]), order="F")
    for r in range(f.shape[1]):
        out[:, r] = y[:, :, r] @ f[:, r]
    return out


def _contract_leading(y: np.ndarray, f: np.ndarray) -> np.ndarray:
    # y: (i, q, R) column-major; out[:, r] = f[:, r] @ y[:, :, r]
    out = np.empty((y.shape[1], f.shape[1]), order="F")
    for r in range(f.shape[1]):
        out[:, r] = f[:, r] @ y[:, :, r]
    return out


def mttkrp(t: np.ndarray, factors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """``unfold(t, mode) @ coproduct_matrix`` without forming either operand.

    One GEMM against the last (or, for the last mode, the first) factor
    touches the full tensor; the remaining modes are contracted one at a
    time on the much smaller intermediate.
    """
    t = np.asfortranarray(t, dtype=np.float64)
    _check_mode(t.ndim, mode)
    s = t.shape
    n = t.ndim
    r = factors[0].shape[1]
    if n == 1:
        return np.repeat(t[:, None], r, axis=1)
    if mode < n - 1:
        y = t.reshape((-1, s[-1]), order="F") @ factors[-1]
        for m in range(n - 2, mode, -1):
            y = _contract_trailing(y.reshape((-1, s[m], r), order="F"), factors[m])
        first = 0
    else:
        y = np.asfortranarray(factors[0].T @ t.reshape((s[0], -1), order="F")).T
        first = 1
    # y is column-major (prod s[first:mode+1], R); now fold in the leading modes
    for m in range(first, mode):
        y = _contract_leading(y.reshape((s[m], -1, r), order="F"), factors[m])
    return np.asfortranarray(y.reshape((s[mode], r), order="F"))


def frobenius_norm(t: np.ndarray) -> float:
    return float(np.linalg.norm(np.ravel(t)))


def _svd_gesvd(m: np.ndarray):
    from scipy.linalg import svd

    flat = m.reshape((-1,) + m.shape[-2:])
    parts = [svd(x, full_matrices=False, lapack_driver="gesvd") for x in flat]
    u, s, vt = (np.stack(p).reshape(m.shape[:-2] + p[0].shape) for p in zip(*parts))
    return u, s, vt


def pseudo_inverse(m: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via the SVD.

    Singular values below ``max(rows, cols) * eps * s_max`` are treated as
    zero. Stacks of matrices (leading batch axes) are handled elementwise.
    """
    m = np.asarray(m, dtype=np.float64)
    rows, cols = m.shape[-2:]
    if m.size == 0:
        return np.zeros(m.shape[:-2] + (cols, rows))
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # divide-and-conquer occasionally fails to converge; QR iteration is slower but robust
        u, s, vt = _svd_gesvd(m)
    cutoff = max(rows, cols) * np.finfo(np.float64).eps * s[..., :1]
    keep = s > cutoff
    s_inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return np.swapaxes(vt, -1, -2) @ (s_inv[..., :, None] * np.swapaxes(u, -1, -2))
