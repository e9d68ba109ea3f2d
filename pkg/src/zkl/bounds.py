"""Johnson-Lindenstrauss budgets, moment identities and the kernel-error bound chain."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import RejectedInputError
from .linalg import as_matrix, as_vector, is_symmetric
from .rng import Distribution, StreamKey, Tag, draw

DEFAULT_C = 0.25
ENUMERATION_MAX_D = 12
_CHUNK = 8192


# -- perturbation budgets ---------------------------------------------------

@dataclass(frozen=True)
class JlBudget:
    n: int
    epsilon: float
    delta: float
    concentration_constant: float
    required_P: int

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "c": self.concentration_constant,
            "required_P": self.required_P,
        }


def _budget_numerator(n: int, delta: float) -> float:
    return 2.0 * math.log(n) + math.log(1.0 / delta)


def jl_required_p(n: int, epsilon: float, delta: float, c: float = DEFAULT_C) -> int:
    """Smallest P with P >= (2 ln n + ln(1/delta)) / (c epsilon^2)."""
    if n < 1:
        raise RejectedInputError(f"n must be >= 1, got {n}")
    if not 0.0 < epsilon < 1.0:
        raise RejectedInputError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise RejectedInputError(f"delta must lie in (0, 1), got {delta}")
    if not c > 0.0:
        raise RejectedInputError(f"concentration constant must be > 0, got {c}")
    value = _budget_numerator(n, delta) / (c * epsilon * epsilon)
    # absorb float noise so an exact integer quotient is not bumped up by one
    rounded = round(value)
    if abs(value - rounded) <= 1e-9 * max(1.0, value):
        value = rounded
    return max(1, math.ceil(value))


def jl_budget(n: int, epsilon: float, delta: float, c: float = DEFAULT_C) -> JlBudget:
    return JlBudget(n, epsilon, delta, c, jl_required_p(n, epsilon, delta, c))


def jl_epsilon(n: int, P: int, c: float = DEFAULT_C, delta: float = 0.01) -> float:
    """Distortion achievable with P projections: sqrt((2 ln n + ln(1/delta)) / (c P))."""
    if P < 1:
        raise RejectedInputError(f"P must be >= 1, got {P}")
    return math.sqrt(_budget_numerator(n, delta) / (c * P))


def gaussian_tail_bound(P: int, epsilon: float) -> float:
    """2 exp(-P eps^2 / 4): two-sided tail of chi^2_P / P at the c = 1/4 rate."""
    return 2.0 * math.exp(-P * epsilon**2 / 4.0)


def rademacher_tail_bound(P: int, epsilon: float) -> float:
    """Achlioptas-form bound 2 exp(-P eps^2 / 4 + P eps^3 / 6)."""
    return 2.0 * math.exp(-P * epsilon**2 / 4.0 + P * epsilon**3 / 6.0)


# -- inner-product preservation --------------------------------------------

def polarization_inner_product(U, a, b) -> float:
    """<U^T a, U^T b> recovered from norms: (||U^T(a+b)||^2 - ||U^T(a-b)||^2) / 4."""
    U = np.asarray(U, dtype=np.float64)
    return 0.25 * (float(np.sum((U.T @ (a + b)) ** 2)) - float(np.sum((U.T @ (a - b)) ** 2)))


@dataclass
class PreservationReport:
    distortion: np.ndarray      # |<U^T w_i, U^T w_j> - <w_i, w_j>| for every pair
    bound: np.ndarray           # (eps / 2) (||w_i||^2 + ||w_j||^2)
    holds: np.ndarray           # distortion <= bound
    max_normalized_distortion: float

    @property
    def all_hold(self) -> bool:
        return bool(np.all(self.holds))

    @property
    def n_failures(self) -> int:
        return int(np.count_nonzero(~self.holds))


def _normalized_distortion(G_true: np.ndarray, G_proj: np.ndarray):
    sq = np.diag(G_true)
    scale = 0.5 * (sq[:, None] + sq[None, :])
    dist = np.abs(G_proj - G_true)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(scale > 0, dist / scale, 0.0)
    return dist, scale, ratio


def check_inner_product_preservation(points, U, epsilon: float) -> PreservationReport:
    """Check the inner-product JL inequality for every pair (including i == j).

    ``points`` is an (n x d) array of row vectors.
    """
    W = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if W.shape[0] == 0:
        raise RejectedInputError("need at least one point")
    U = as_matrix(U, "U")
    if U.shape[0] != W.shape[1]:
        raise RejectedInputError(f"points have d={W.shape[1]}, projection has d={U.shape[0]}")
    proj = W @ U
    dist, scale, ratio = _normalized_distortion(W @ W.T, proj @ proj.T)
    bound = epsilon * scale
    return PreservationReport(dist, bound, dist <= bound, float(np.max(ratio)))


def measured_epsilon(J_o, J_u, U) -> float:
    """Smallest eps for which the general JL inequality holds on all 2V Jacobian columns."""
    cols = np.hstack([as_matrix(J_o, "J_o"), as_matrix(J_u, "J_u")])
    proj = as_matrix(U, "U").T @ cols
    _, _, ratio = _normalized_distortion(cols.T @ cols, proj.T @ proj)
    return float(np.max(ratio))


def delta_k_bound(epsilon_star: float, xi: float, V: int) -> float:
    """||Delta K||_F <= eps * Xi * sqrt(V)."""
    if epsilon_star < 0 or xi < 0 or V < 0:
        raise RejectedInputError("bound arguments must be non-negative")
    return float(epsilon_star * xi * math.sqrt(V))


@dataclass(frozen=True)
class DiffBound:
    simplified: float   # sqrt(V ln V / P) * eta Xi ||G|| ||A||
    explicit: float     # sqrt(V) * jl_epsilon(V, P, c, delta) * eta Xi ||G|| ||A||

    def to_json(self) -> dict:
        return {"simplified": self.simplified, "explicit": self.explicit}


def dynamics_diff_bound(V, P, eta, xi, norm_g, norm_a, c=DEFAULT_C, delta=0.01) -> DiffBound:
    if min(V, P, eta, xi, norm_g, norm_a, c, delta) <= 0:
        raise RejectedInputError("all bound arguments must be positive")
    dyn = eta * xi * norm_g * norm_a
    simplified = math.sqrt(V * math.log(V) / P) * dyn
    explicit = math.sqrt(V) * jl_epsilon(V, P, c, delta) * dyn
    return DiffBound(simplified, explicit)


# -- moment identities ------------------------------------------------------

def _symmetric(W, max_d: int = 64) -> np.ndarray:
    W = as_matrix(W, "W")
    if not is_symmetric(W):
        raise RejectedInputError("W must be symmetric")
    if W.shape[0] > max_d:
        raise RejectedInputError(f"Monte-Carlo oracles are limited to d <= {max_d}")
    return W


def _chunks(total: int, size: int = _CHUNK):
    for k, start in enumerate(range(0, total, size)):
        yield k, min(size, total - start)


def gaussian_fourth_moment_target(W) -> np.ndarray:
    """E[u u^T W u u^T] = Tr(W) I + 2 W for u ~ N(0, I)."""
    W = as_matrix(W, "W")
    return np.trace(W) * np.eye(W.shape[0]) + 2.0 * W


def gaussian_fourth_moment_oracle(W, samples: int, seed: int) -> np.ndarray:
    """Monte-Carlo mean of u u^T W u u^T over ``samples`` Gaussian draws."""
    W = _symmetric(W)
    d = W.shape[0]
    acc = np.zeros((d, d))
    for k, n in _chunks(samples):
        u = StreamKey(seed, k, 0, Tag.MONTE_CARLO).generator().standard_normal((n, d))
        q = np.einsum("bi,ij,bj->b", u, W, u)
        acc += (u * q[:, None]).T @ u
    return acc / samples


def multi_perturbation_target(W, P: int) -> np.ndarray:
    """E[Ubar W Ubar] = (1 + 1/P) W + Tr(W)/P I with Ubar = (1/P) sum_p u_p u_p^T."""
    W = as_matrix(W, "W")
    return (1.0 + 1.0 / P) * W + (np.trace(W) / P) * np.eye(W.shape[0])


def multi_perturbation_expectation_oracle(W, P: int, samples: int, seed: int) -> np.ndarray:
    W = _symmetric(W)
    if P < 1:
        raise RejectedInputError("P must be >= 1")
    d = W.shape[0]
    acc = np.zeros((d, d))
    for k, n in _chunks(samples, max(1, _CHUNK // P)):
        u = StreamKey(seed, k, P, Tag.MONTE_CARLO).generator().standard_normal((n, P, d))
        ubar = np.einsum("bpi,bpj->bij", u, u) / P
        acc += np.einsum("bij,jk,bkl->il", ubar, W, ubar, optimize=True)
    return acc / samples


def rademacher_second_moment_exact(g) -> float:
    """(1/2^d) sum over all sign vectors u of <g, u>^2 ||u||^2."""
    g = as_vector(g, "g")
    d = g.shape[0]
    if d > ENUMERATION_MAX_D:
        raise RejectedInputError(
            f"enumeration limited to d <= {ENUMERATION_MAX_D}; use second_moment_mc instead"
        )
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=d)))
    return float(np.mean((signs @ g) ** 2 * np.sum(signs**2, axis=1)))


def second_moment_target(g, dist) -> float:
    """(d + 2) ||g||^2 for Gaussian, d ||g||^2 for Rademacher."""
    g = as_vector(g, "g")
    d = g.shape[0]
    extra = 2 if Distribution.parse(dist) is Distribution.GAUSSIAN else 0
    return float((d + extra) * g @ g)


def second_moment_mc(g, dist, samples: int, seed: int) -> float:
    """Monte-Carlo mean of ||<g, u> u||^2."""
    g = as_vector(g, "g")
    d = g.shape[0]
    dist = Distribution.parse(dist)
    total = 0.0
    for k, n in _chunks(samples, max(1, (1 << 20) // d)):
        gen = StreamKey(seed, k, 0, Tag.MONTE_CARLO).generator()
        u = draw(gen, n * d, dist).reshape(n, d)
        total += float(np.sum((u @ g) ** 2 * np.sum(u * u, axis=1)))
    return total / samples
