"""First-order and ZO-projected empirical NTKs.

Both kernels are V x V matrices between an observed input x_o and an
update input x_u:

    K_fo = J_o^T J_u
    K_zo = J_o^T U U^T J_u = (U^T J_o)^T (U^T J_u)

where J is the d x V logit Jacobian and U the d x P projection. The d x d
matrix U U^T is never formed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInputError
from .linalg import as_matrix


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    entries: np.ndarray
    tag: str = "FO"
    meta: dict = field(default_factory=dict)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def V(self) -> int:
        return self.entries.shape[0]

    def to_json(self) -> dict:
        rows, cols = self.entries.shape
        return {
            "meta": {"tag": self.tag, **self.meta},
            "rows": rows,
            "cols": cols,
            "entries": [float(v) for v in self.entries.ravel()],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "KernelMatrix":
        meta = dict(obj["meta"])
        tag = meta.pop("tag", "FO")
        entries = np.asarray(obj["entries"], dtype=np.float64).reshape(obj["rows"], obj["cols"])
        return cls(entries, tag, meta)


def dump_kernel(path, K: KernelMatrix) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(K.to_json(), f, sort_keys=True)
        f.write("\n")


def load_kernel(path) -> KernelMatrix:
    with open(path, encoding="utf-8") as f:
        return KernelMatrix.from_json(json.load(f))


def _pair(J_o, J_u):
    J_o = as_matrix(J_o, "J_o")
    J_u = as_matrix(J_u, "J_u")
    if J_o.shape[0] != J_u.shape[0]:
        raise RejectedInputError(
            f"Jacobians disagree on parameter count: {J_o.shape[0]} vs {J_u.shape[0]}"
        )
    return J_o, J_u


def fo_entk(J_o, J_u, meta: dict | None = None) -> KernelMatrix:
    J_o, J_u = _pair(J_o, J_u)
    return KernelMatrix(J_o.T @ J_u, "FO", dict(meta or {}))


def projected_jacobian(U, J) -> np.ndarray:
    """U^T J: each logit gradient mapped from R^d into R^P."""
    U = as_matrix(U, "U")
    J = as_matrix(J, "J")
    if U.shape[0] != J.shape[0]:
        raise RejectedInputError(f"projection has d={U.shape[0]} but Jacobian has d={J.shape[0]}")
    return U.T @ J


def zo_entk(J_o, J_u, U, meta: dict | None = None) -> KernelMatrix:
    J_o, J_u = _pair(J_o, J_u)
    info = dict(U.meta()) if hasattr(U, "meta") else {"P": np.shape(U)[1]}
    info.update(meta or {})
    Po = projected_jacobian(U, J_o)
    Pu = Po if J_u is J_o else projected_jacobian(U, J_u)
    return KernelMatrix(Po.T @ Pu, "ZO", info)


def kernel_discrepancy(K_fo, K_zo) -> np.ndarray:
    """Delta K = K_fo - K_zo."""
    a = as_matrix(K_fo, "K_fo")
    b = as_matrix(K_zo, "K_zo")
    if a.shape != b.shape:
        raise RejectedInputError(f"kernel shapes differ: {a.shape} vs {b.shape}")
    return a - b


def jacobian_scale(J_o, J_u) -> float:
    """Xi = max(||J_o||_F^2, ||J_u||_F^2)."""
    return float(max(np.sum(np.square(J_o)), np.sum(np.square(J_u))))
