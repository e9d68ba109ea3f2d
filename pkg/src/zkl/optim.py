"""FO-SGD and multi-perturbation ZO-SGD (SPSA central differences), plus a trajectory runner."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .data import Dataset
from .errors import NumericError, RejectedInputError
from .model import (
    MlpConfig,
    check_params,
    grad_loss_params,
    logits_batch,
    logits_many_params,
    logsumexp,
    mean_loss,
    softmax,
)
from .rng import Distribution, PerturbationMatrix, StreamKey, Tag, perturbation_columns

DIVERGENCE_LOSS = 1e6
TRAJECTORY_COLUMNS = (
    "step", "algorithm", "P", "distribution", "seed", "loss", "probe_id", "class", "logit", "belief",
)

LossFn = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class OptimConfig:
    eta: float = 0.01
    mu: float = 1e-3
    P: int = 1
    distribution: Distribution = Distribution.GAUSSIAN
    steps: int = 100
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "distribution", Distribution.parse(self.distribution))
        # eta == 0 is allowed: it is the "frozen model" control used by several checks
        if not self.eta >= 0:
            raise RejectedInputError(f"eta must be >= 0, got {self.eta}")
        if not self.mu > 0:
            raise RejectedInputError(f"mu must be > 0, got {self.mu}")
        if self.P < 1:
            raise RejectedInputError(f"P must be >= 1, got {self.P}")
        if self.steps < 1:
            raise RejectedInputError(f"steps must be >= 1, got {self.steps}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["distribution"] = self.distribution.value
        return d


def _finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise NumericError(f"non-finite {what}: {value}")
    return value


def spsa_coefficient(lossfn: LossFn, theta, u, mu: float) -> float:
    """(l(theta + mu u) - l(theta - mu u)) / (2 mu)."""
    if not mu > 0:
        raise RejectedInputError(f"mu must be > 0, got {mu}")
    theta = np.asarray(theta, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    plus = _finite(lossfn(theta + mu * u), "loss")
    minus = _finite(lossfn(theta - mu * u), "loss")
    return (plus - minus) / (2.0 * mu)


def zo_sgd_step(
    lossfn: LossFn,
    theta,
    cfg: OptimConfig,
    step: int,
    batch_loss: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, PerturbationMatrix]:
    """theta - (eta / P) sum_p c_p u_p with c_p the SPSA coefficient along u_p.

    ``batch_loss``, if given, maps a (2P x d) stack of parameter vectors to
    their losses in one call; it must agree with ``lossfn``. The returned
    projection carries the 1/sqrt(P) column scaling of the projected kernel.
    """
    theta = np.asarray(theta, dtype=np.float64)
    d = theta.shape[0]
    raw = perturbation_columns(cfg.master_seed, step, d, cfg.P, cfg.distribution)
    if batch_loss is None:
        coeffs = np.array([spsa_coefficient(lossfn, theta, raw[:, p], cfg.mu) for p in range(cfg.P)])
    else:
        shifts = cfg.mu * raw.T
        stack = np.concatenate([theta + shifts, theta - shifts])
        losses = np.asarray(batch_loss(stack), dtype=np.float64)
        if not np.all(np.isfinite(losses)):
            raise NumericError("non-finite loss during perturbation evaluation")
        coeffs = (losses[: cfg.P] - losses[cfg.P:]) / (2.0 * cfg.mu)
    update = np.zeros(d)
    for p in range(cfg.P):  # fixed accumulation order
        update += coeffs[p] * raw[:, p]
    theta_next = theta - (cfg.eta / cfg.P) * update
    U = PerturbationMatrix(raw / np.sqrt(cfg.P), cfg.distribution, cfg.master_seed, step)
    return theta_next, U


def fo_sgd_step(theta, grad, eta: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if theta.shape != grad.shape:
        raise RejectedInputError(f"theta {theta.shape} and grad {grad.shape} differ")
    return theta - eta * grad


# -- trajectories -------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    algorithm: str
    config: OptimConfig
    losses: np.ndarray          # (T,) mean dataset loss after each step
    logits: np.ndarray          # (T, n_probes, V)
    beliefs: np.ndarray         # (T, n_probes, V)
    update_norms: np.ndarray    # (T,)
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.losses.shape[0]

    def belief_gap(self, other: "TrajectoryRecord") -> np.ndarray:
        """Per-step, per-probe L2 distance between beliefs, over the common prefix."""
        n = min(len(self), len(other))
        return np.linalg.norm(self.beliefs[:n] - other.beliefs[:n], axis=-1)

    def csv_rows(self, gaps: np.ndarray | None = None) -> list[list]:
        cfg = self.config
        P = cfg.P if self.algorithm == "ZO" else 0
        dist = cfg.distribution.value if self.algorithm == "ZO" else ""
        rows = []
        for t in range(len(self)):
            for k in range(self.logits.shape[1]):
                for c in range(self.logits.shape[2]):
                    row = [t + 1, self.algorithm, P, dist, cfg.master_seed, self.losses[t], k, c,
                           self.logits[t, k, c], self.beliefs[t, k, c]]
                    if gaps is not None:
                        row.append(gaps[t, k] if t < gaps.shape[0] else "")
                    rows.append(row)
        return rows


def sample_order(master_seed: int, n: int, steps: int) -> np.ndarray:
    """Index of the training example used at each step: one fresh permutation per epoch."""
    order = np.empty(steps, dtype=np.int64)
    for epoch, start in enumerate(range(0, steps, n)):
        perm = StreamKey(master_seed, epoch, 0, Tag.ORDER).generator().permutation(n)
        take = min(n, steps - start)
        order[start:start + take] = perm[:take]
    return order


def _sample_loss(cfg: MlpConfig, x, y) -> tuple[LossFn, Callable]:
    def single(theta):
        z = logits_batch(theta, cfg, x)[0]
        return float(logsumexp(z) - z[y])

    def batch(thetas):
        Z = logits_many_params(thetas, cfg, x)
        return logsumexp(Z) - Z[:, y]

    return single, batch


def run_trajectory(
    model_cfg: MlpConfig,
    theta0,
    data: Dataset,
    optim_cfg: OptimConfig,
    algorithm: str,
    probes,
) -> TrajectoryRecord:
    """Run ``optim_cfg.steps`` single-sample SGD steps and record probe beliefs.

    FO and ZO runs with the same ``master_seed`` see the same sample order.
    Divergence (non-finite or > 1e6 loss) truncates the record and sets
    ``diverged`` instead of raising.
    """
    algorithm = algorithm.upper()
    if algorithm not in ("FO", "ZO"):
        raise RejectedInputError(f"algorithm must be FO or ZO, got {algorithm!r}")
    data.check_labels(model_cfg.output_dim)
    theta = check_params(theta0, model_cfg).copy()
    probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    T = optim_cfg.steps
    order = sample_order(optim_cfg.master_seed, len(data), T)

    losses, logits, norms = [], [], []
    diverged = False
    for t in range(T):
        x, y = data.inputs[order[t]], int(data.labels[order[t]])
        try:
            if algorithm == "FO":
                new = fo_sgd_step(theta, grad_loss_params(theta, model_cfg, x, y), optim_cfg.eta)
            else:
                single, batch = _sample_loss(model_cfg, x, y)
                new, _ = zo_sgd_step(single, theta, optim_cfg, t, batch_loss=batch)
            loss = mean_loss(new, model_cfg, data.inputs, data.labels)
        except NumericError:
            diverged = True
            break
        if not math.isfinite(loss) or loss > DIVERGENCE_LOSS or not np.all(np.isfinite(new)):
            diverged = True
            break
        norms.append(float(np.linalg.norm(new - theta)))
        theta = new
        losses.append(loss)
        logits.append(logits_batch(theta, model_cfg, probes))

    V = model_cfg.output_dim
    logits_arr = np.array(logits).reshape(len(losses), probes.shape[0], V)
    return TrajectoryRecord(
        algorithm=algorithm,
        config=optim_cfg,
        losses=np.array(losses),
        logits=logits_arr,
        beliefs=softmax(logits_arr),
        update_norms=np.array(norms),
        diverged=diverged,
        meta={"final_theta": theta},
    )

