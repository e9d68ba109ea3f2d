"""Kernel comparison metrics: relative Frobenius error, CKA error, spectral distance."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInputError
from .linalg import as_matrix, is_symmetric, singular_values, symmetric_eigenvalues

CSV_COLUMNS = (
    "pair_id", "P", "distribution", "seed",
    "rel_frobenius", "cka_error", "spectral_distance", "spectra_kind",
)


def _same_shape(K1, K2):
    a = as_matrix(K1, "K1")
    b = as_matrix(K2, "K2")
    if a.shape != b.shape:
        raise RejectedInputError(f"kernel shapes differ: {a.shape} vs {b.shape}")
    return a, b


def rel_frobenius_error(K_fo, K_zo) -> float:
    a, b = _same_shape(K_fo, K_zo)
    ref = np.linalg.norm(a)
    if ref == 0.0:
        raise RejectedInputError("reference kernel has zero Frobenius norm")
    return float(np.linalg.norm(a - b) / ref)


def _centered(K: np.ndarray) -> np.ndarray:
    return K - K.mean(axis=0, keepdims=True) - K.mean(axis=1, keepdims=True) + K.mean()


def hsic(K1, K2) -> float:
    """Unnormalized HSIC <H K1 H, H K2 H>_F.

    Equals Tr(K1 H K2 H) for symmetric kernels. Constant prefactors are
    dropped since they cancel in CKA.
    """
    a, b = _same_shape(K1, K2)
    return float(np.sum(_centered(a) * _centered(b)))


def cka_error(K1, K2) -> float:
    a, b = _same_shape(K1, K2)
    V = a.shape[0]
    if V < 2:
        raise RejectedInputError("CKA needs at least 2 classes")
    if V < 3:
        warnings.warn("CKA on 2x2 kernels has one centered degree of freedom", RuntimeWarning)
    ca, cb = _centered(a), _centered(b)
    na, nb = np.linalg.norm(ca), np.linalg.norm(cb)
    for name, n, k in (("K1", na, a), ("K2", nb, b)):
        if n <= 1e-12 * max(1.0, np.linalg.norm(k)):
            raise RejectedInputError(
                f"{name} is degenerate after centering (||HKH||_F = {n:.3g}); "
                "constant or rank-one-along-ones kernels have no CKA"
            )
    cka = float(np.sum(ca * cb) / (na * nb))
    return float(np.clip(1.0 - cka, 0.0, 2.0))


def spectra(K1, K2) -> tuple[np.ndarray, np.ndarray, str]:
    """Sorted spectra of both kernels: eigenvalues if both symmetric, else singular values."""
    a, b = _same_shape(K1, K2)
    if is_symmetric(a) and is_symmetric(b):
        return symmetric_eigenvalues(a), symmetric_eigenvalues(b), "eigen"
    return singular_values(a), singular_values(b), "singular"


def spectral_distance(K1, K2) -> float:
    l1, l2, _ = spectra(K1, K2)
    return float(np.mean(np.abs(l1 - l2)))


@dataclass
class MetricReport:
    rel_frobenius: float
    cka_error: float
    spectral_distance: float
    spectra_kind: str
    meta: dict = field(default_factory=dict)

    def csv_row(self) -> list:
        m = self.meta
        return [
            m.get("pair_id", ""), m.get("P", ""), m.get("distribution", ""), m.get("seed", ""),
            self.rel_frobenius, self.cka_error, self.spectral_distance, self.spectra_kind,
        ]


def compare_kernels(K_fo, K_zo, meta: dict | None = None) -> MetricReport:
    a, b = _same_shape(K_fo, K_zo)
    l1, l2, kind = spectra(a, b)
    try:
        cka = cka_error(a, b)
    except RejectedInputError:
        cka = float("nan")
    return MetricReport(
        rel_frobenius=rel_frobenius_error(a, b),
        cka_error=cka,
        spectral_distance=float(np.mean(np.abs(l1 - l2))),
        spectra_kind=kind,
        meta=dict(meta or {}),
    )
