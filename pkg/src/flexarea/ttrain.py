"""Tensor-train compression of component tensors.

Standard TT-SVD: sweep the unfoldings left to right, truncating each SVD
at delta = eps / sqrt(d - 1) * ||T||_F, which bounds the total
reconstruction error by eps * ||T||_F in the Frobenius norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class TtTensor:
    cores: tuple[np.ndarray, ...]  # each of shape (r_{k-1}, n_k, r_k)
    epsilon: float

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores[:-1])

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def n_elements(self) -> int:
        return int(sum(c.size for c in self.cores))


def tt_decompose(tensor: np.ndarray, eps: float) -> TtTensor:
    if not 0 < eps < 1:
        raise ContractError("eps must lie in (0, 1)")
    shape = tensor.shape
    d = len(shape)
    if d < 2:
        raise ContractError("TT decomposition needs at least 2 dimensions")
    norm = float(np.linalg.norm(tensor))
    delta = eps / np.sqrt(d - 1) * norm
    cores: list[np.ndarray] = []
    w = tensor.astype(float)
    r = 1
    for k in range(d - 1):
        w = w.reshape(r * shape[k], -1)
        u, s, vh = np.linalg.svd(w, full_matrices=False)
        # smallest rank whose discarded tail satisfies the truncation budget
        tail = np.cumsum(s[::-1] ** 2)[::-1]
        keep = int(np.searchsorted(-tail, -delta * delta, side="left"))
        keep = max(min(keep, len(s)), 1)
        cores.append(u[:, :keep].reshape(r, shape[k], keep))
        w = (s[:keep, None] * vh[:keep]).astype(float)
        r = keep
    cores.append(w.reshape(r, shape[-1], 1))
    return TtTensor(cores=tuple(cores), epsilon=eps)


def tt_reconstruct(tt: TtTensor) -> np.ndarray:
    out = tt.cores[0]
    for core in tt.cores[1:]:
        out = np.tensordot(out, core, axes=([out.ndim - 1], [0]))
    return out.reshape(tt.shape)
