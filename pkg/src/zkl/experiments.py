"""Experiment runners behind the CLI subcommands.

Each runner takes a resolved :class:`ExperimentConfig`, returns plain Python
results, and (through :func:`write_outputs`) serializes them as CSV/JSON.
Runs are deterministic: every random quantity is keyed by the seeds in the
config, cells are sorted before writing, and floats are written with
``repr`` so identical configs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds
from .data import Dataset, load_idx_dataset, synth_blobs
from .errors import RejectedInputError
from .kernel import KernelMatrix, dump_kernel, fo_entk, kernel_discrepancy, zo_entk
from .metrics import CSV_COLUMNS, compare_kernels
from .model import MlpConfig, init_params, jacobian_logits
from .optim import TRAJECTORY_COLUMNS, OptimConfig, run_trajectory
from .rng import Distribution, PerturbationMatrix, StreamKey, Tag, draw, perturbation_columns

CSV_VERSION_LINE = "# zkl-csv v1"
KINDS = ("kernel-compare", "trajectory", "v-scaling", "moment-check", "jl-budget")


class ConfigError(RejectedInputError):
    """Invalid experiment configuration; the message starts with the field path."""


# -- configuration ------------------------------------------------------------

_DEFAULTS = {
    "kernel-compare": {
        "model": {"output_dim": 10},
        "data": {"kind": "blobs", "per_class": 10, "separation": 4.0, "seed": 0},
        "p_sweep": [1, 4, 16, 64, 256, 1024],
        "distributions": ["gaussian", "rademacher"],
        "seeds": list(range(20)),
        "pairs": {"update_index": 0, "observed": "per-class"},
        "dump_kernels": False,
    },
    "trajectory": {
        "model": {"output_dim": 4},
        "optim": {"eta": 2e-3, "mu": 1e-3, "steps": 200},
        "data": {"kind": "blobs", "per_class": 25, "separation": 3.0, "seed": 0},
        "p_sweep": [1, 10, 50, 100],
        "distributions": ["gaussian"],
        "seeds": list(range(10)),
        "probes": {"per_class": 1, "seed": 99},
        "include_zo": True,
    },
    "v-scaling": {
        "model": {},
        "data": {"kind": "blobs", "per_class": 2, "separation": 4.0, "seed": 0},
        "v_sweep": [2, 10, 100, 500, 1000],
        "p_sweep": [50],
        "distributions": ["gaussian"],
        "seeds": list(range(20)),
        "input_index": 0,
    },
    "moment-check": {
        "seeds": [0],
        "c": bounds.DEFAULT_C,
        "W": "random",
        "fourth_moment": {"d": 8, "samples": 200_000, "tol": 0.05},
        "multi_perturbation": {"d": 8, "P": [1, 2, 8], "samples": 100_000, "tol": 0.05},
        "rademacher_exact": {"d": list(range(2, 13)), "tol": 1e-12},
        "gaussian_second_moment": {"d": 64, "samples": 100_000, "tol": 0.03},
        "concentration": {"d": 64, "P": [32, 128], "epsilon": 0.3, "trials": 10_000, "slack": 1.5},
    },
    "jl-budget": {"n": 10, "epsilon": 0.5, "delta": 0.01, "c": bounds.DEFAULT_C, "seeds": [0]},
}


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class ExperimentConfig:
    kind: str
    model: MlpConfig
    optim: OptimConfig
    data: dict
    p_sweep: tuple[int, ...]
    distributions: tuple[Distribution, ...]
    seeds: tuple[int, ...]
    out: str | None = None
    threads: int = 1
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "model": self.model.to_dict(),
            "optim": self.optim.to_dict(),
            "data": self.data,
            "p_sweep": list(self.p_sweep),
            "distributions": [d.value for d in self.distributions],
            "seeds": list(self.seeds),
            **self.extra,
        }


def _positive_ints(values, path: str) -> tuple[int, ...]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(f"{path}: must be a non-empty list")
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(f"{path}[{i}]: must be a positive integer, got {v!r}")
        out.append(v)
    return tuple(out)


def resolve_config(kind: str, raw: dict | None = None, **overrides) -> ExperimentConfig:
    """Merge defaults, a JSON config document and flag overrides; validate."""
    raw = dict(raw or {})
    kind = raw.pop("kind", kind)
    if kind not in KINDS:
        raise ConfigError(f"config.kind: unknown experiment {kind!r}; expected one of {KINDS}")
    merged = _merge(_DEFAULTS[kind], raw)
    merged = _merge(merged, {k: v for k, v in overrides.items() if v is not None})

    try:
        model = MlpConfig.from_dict(merged.pop("model", {}))
    except (TypeError, RejectedInputError) as e:
        raise ConfigError(f"config.model: {e}") from None
    try:
        optim = OptimConfig(**merged.pop("optim", {}))
    except (TypeError, RejectedInputError) as e:
        raise ConfigError(f"config.optim: {e}") from None

    p_sweep = _positive_ints(merged.pop("p_sweep", [1]), "config.p_sweep")
    dists = merged.pop("distributions", ["gaussian"])
    if not isinstance(dists, (list, tuple)) or not dists:
        raise ConfigError("config.distributions: must be a non-empty list")
    try:
        distributions = tuple(Distribution.parse(d) for d in dists)
    except RejectedInputError as e:
        raise ConfigError(f"config.distributions: {e}") from None
    seeds = merged.pop("seeds", [0])
    if not isinstance(seeds, (list, tuple)) or not seeds:
        raise ConfigError("config.seeds: must be a non-empty list")
    for i, s in enumerate(seeds):
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError(f"config.seeds[{i}]: must be a non-negative integer, got {s!r}")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("config.seeds: seeds must be distinct")
    data = merged.pop("data", {})
    if kind in ("kernel-compare", "trajectory", "v-scaling"):
        _check_data(data)
    if kind == "v-scaling":
        _positive_ints(merged.get("v_sweep"), "config.v_sweep")
        if any(v < 2 for v in merged["v_sweep"]):
            raise ConfigError("config.v_sweep: every V must be >= 2")
    threads = merged.pop("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError(f"config.threads: must be a positive integer, got {threads!r}")
    out = merged.pop("out", None)
    return ExperimentConfig(
        kind, model, optim, data, p_sweep, distributions, tuple(seeds), out, threads, merged
    )


def _check_data(data: dict) -> None:
    kind = data.get("kind", "blobs")
    if kind == "blobs":
        if not isinstance(data.get("per_class"), int) or data["per_class"] < 1:
            raise ConfigError("config.data.per_class: must be a positive integer")
        if not isinstance(data.get("separation"), (int, float)) or data["separation"] < 0:
            raise ConfigError("config.data.separation: must be a non-negative number")
    elif kind == "idx":
        for key in ("images", "labels"):
            if not isinstance(data.get(key), str):
                raise ConfigError(f"config.data.{key}: path to an IDX file is required")
    else:
        raise ConfigError(f"config.data.kind: expected 'blobs' or 'idx', got {kind!r}")


def load_dataset(data: dict, model: MlpConfig) -> Dataset:
    if data.get("kind", "blobs") == "idx":
        ds = load_idx_dataset(data["images"], data["labels"])
        limit = data.get("limit")
        if limit:
            ds = Dataset(ds.inputs[:limit], ds.labels[:limit], ds.name)
        if ds.input_dim != model.input_dim:
            raise ConfigError(
                f"config.model.input_dim: IDX images have {ds.input_dim} pixels, model expects "
                f"{model.input_dim}"
            )
        return ds.check_labels(model.output_dim)
    return synth_blobs(
        model.output_dim, model.input_dim, data["per_class"], float(data["separation"]), data["seed"]
    )


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- kernel comparison ----------------------------------------------------------

def kernel_pairs(ds: Dataset, update_index: int, observed) -> list[tuple[int, int]]:
    """(observed_index, update_index) pairs.

    ``"per-class"`` picks the first example of every class as x_o (for the
    update example's own class, the next example of that class, or the update
    example itself if the class has only one).
    """
    n = len(ds)
    if not 0 <= update_index < n:
        raise ConfigError(f"config.pairs.update_index: {update_index} outside dataset of size {n}")
    if observed == "per-class":
        obs = []
        for c in np.unique(ds.labels):
            idx = [int(i) for i in np.flatnonzero(ds.labels == c)]
            others = [i for i in idx if i != update_index]
            obs.append(others[0] if others else idx[0])
    elif isinstance(observed, list):
        obs = [int(i) for i in observed]
        for i in obs:
            if not 0 <= i < n:
                raise ConfigError(f"config.pairs.observed: index {i} outside dataset of size {n}")
    else:
        raise ConfigError("config.pairs.observed: expected 'per-class' or a list of indices")
    return [(o, update_index) for o in obs]


@dataclass
class KernelCompareResult:
    reports: list          # MetricReport per (pair, P, distribution, seed)
    medians: list          # MetricReport per (pair, P, distribution), seed == "median"
    summary: dict
    kernels: dict          # file name -> KernelMatrix (only when dumps are requested)


def _median_report(group: list, meta: dict):
    arr = np.array([[r.rel_frobenius, r.cka_error, r.spectral_distance] for r in group])
    med = np.nanmedian(arr, axis=0)
    kinds = sorted({r.spectra_kind for r in group})
    first = group[0]
    return type(first)(float(med[0]), float(med[1]), float(med[2]), "/".join(kinds), meta)


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def spearman(xs, ys) -> float:
    rx = np.argsort(np.argsort(xs)).astype(float)
    ry = np.argsort(np.argsort(ys)).astype(float)
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.sum(rx * ry) / math.sqrt(np.sum(rx**2) * np.sum(ry**2)))


METRIC_NAMES = ("rel_frobenius", "cka_error", "spectral_distance")


def run_kernel_compare(cfg: ExperimentConfig) -> KernelCompareResult:
    model = cfg.model
    theta = init_params(model)
    ds = load_dataset(cfg.data, model)
    pairs_cfg = cfg.extra.get("pairs", {})
    pairs = kernel_pairs(ds, pairs_cfg.get("update_index", 0), pairs_cfg.get("observed", "per-class"))
    needed = sorted({i for pair in pairs for i in pair})
    jac = {i: jacobian_logits(theta, model, ds.inputs[i]) for i in needed}
    fo = {(o, u): fo_entk(jac[o], jac[u], {"pair_id": f"o{o}-u{u}"}) for o, u in pairs}
    d = model.num_params
    p_max = max(cfg.p_sweep)
    dump = bool(cfg.extra.get("dump_kernels", False))

    def cell(job):
        dist, seed = job
        # column p of the stream is keyed by (seed, 0, p): smaller P are prefixes
        raw = perturbation_columns(seed, 0, d, p_max, dist)
        reports, kernels = [], {}
        for P in cfg.p_sweep:
            U = PerturbationMatrix(raw[:, :P] / np.sqrt(P), dist, seed, 0)
            for o, u in pairs:
                pair_id = f"o{o}-u{u}"
                K_zo = zo_entk(jac[o], jac[u], U, {"pair_id": pair_id})
                meta = {"pair_id": pair_id, "P": P, "distribution": dist.value, "seed": seed}
                reports.append(compare_kernels(fo[(o, u)], K_zo, meta))
                if dump:
                    kernels[f"zo_{pair_id}_P{P}_{dist.value}_s{seed}.json"] = K_zo
        return reports, kernels

    jobs = [(dist, seed) for dist in cfg.distributions for seed in cfg.seeds]
    reports, kernels = [], {}
    for r, k in _map(cell, jobs, cfg.threads):
        reports.extend(r)
        kernels.update(k)
    if dump:
        for (o, u), K in fo.items():
            kernels[f"fo_o{o}-u{u}.json"] = K

    def order(r):
        m = r.meta
        return (m["pair_id"], m["P"], m["distribution"], m["seed"])

    reports.sort(key=order)
    groups: dict = {}
    for r in reports:
        m = r.meta
        groups.setdefault((m["pair_id"], m["P"], m["distribution"]), []).append(r)
    medians = [
        _median_report(g, {"pair_id": k[0], "P": k[1], "distribution": k[2], "seed": "median"})
        for k, g in sorted(groups.items())
    ]
    return KernelCompareResult(reports, medians, _kernel_summary(cfg, reports, medians), kernels)


def _kernel_summary(cfg, reports, medians) -> dict:
    Ps = list(cfg.p_sweep)
    pooled: dict = {}
    for dist in cfg.distributions:
        per_p = {}
        for P in Ps:
            sel = [r for r in reports if r.meta["P"] == P and r.meta["distribution"] == dist.value]
            arr = np.array([[r.rel_frobenius, r.cka_error, r.spectral_distance] for r in sel])
            per_p[P] = {name: float(np.nanmedian(arr[:, i])) for i, name in enumerate(METRIC_NAMES)}
        pooled[dist.value] = per_p
    summary: dict = {"p_sweep": Ps, "pooled_medians": {}, "slopes": {}, "spearman": {}}
    for dist, per_p in pooled.items():
        summary["pooled_medians"][dist] = {str(P): v for P, v in per_p.items()}
        if len(Ps) >= 2:
            summary["slopes"][dist] = {
                name: loglog_slope(Ps, [per_p[P][name] for P in Ps]) for name in METRIC_NAMES
            }
            summary["spearman"][dist] = {
                name: spearman(Ps, [per_p[P][name] for P in Ps]) for name in METRIC_NAMES
            }
    if len(Ps) >= 2:
        summary["pair_slopes"] = {}
        for m in medians:
            key = f"{m.meta['pair_id']}/{m.meta['distribution']}"
            summary["pair_slopes"].setdefault(key, []).append((m.meta["P"], m.rel_frobenius))
        summary["pair_slopes"] = {
            k: loglog_slope([p for p, _ in v], [e for _, e in v])
            for k, v in summary["pair_slopes"].items()
        }
    if {d.value for d in cfg.distributions} >= {"gaussian", "rademacher"}:
        g, r = pooled["gaussian"], pooled["rademacher"]
        summary["parity"] = {
            str(P): {name: abs(r[P][name] - g[P][name]) / g[P][name] for name in METRIC_NAMES}
            for P in Ps
        }
    return summary


# -- trajectories -------------------------------------------------------------

@dataclass
class TrajectoryResult:
    rows: list
    summary: dict


def run_trajectory_sweep(cfg: ExperimentConfig) -> TrajectoryResult:
    model = cfg.model
    theta0 = init_params(model)
    ds = load_dataset(cfg.data, model)
    probe_cfg = cfg.extra.get("probes", {"per_class": 1, "seed": 99})
    if cfg.data.get("kind", "blobs") == "blobs":
        probes = synth_blobs(
            model.output_dim, model.input_dim, probe_cfg["per_class"],
            float(cfg.data["separation"]), probe_cfg["seed"],
        ).inputs
    else:
        probes = ds.inputs[: probe_cfg.get("count", model.output_dim)]
    include_zo = cfg.extra.get("include_zo", True)

    def per_seed(seed):
        base = replace(cfg.optim, master_seed=seed)
        fo = run_trajectory(model, theta0, ds, base, "FO", probes)
        out = [("FO", 0, "", fo, fo.belief_gap(fo))]
        if include_zo:
            for dist in cfg.distributions:
                for P in cfg.p_sweep:
                    zo = run_trajectory(model, theta0, ds, replace(base, P=P, distribution=dist),
                                        "ZO", probes)
                    out.append(("ZO", P, dist.value, zo, zo.belief_gap(fo)))
        return seed, out

    results = _map(per_seed, list(cfg.seeds), cfg.threads)
    rows, finals = [], {}
    diverged = []
    for seed, runs in sorted(results, key=lambda t: t[0]):
        for algo, P, dist, rec, gap in runs:
            rows.extend(rec.csv_rows(gap))
            if rec.diverged:
                diverged.append({"seed": seed, "algorithm": algo, "P": P, "distribution": dist,
                                 "steps_completed": len(rec)})
            if algo == "ZO":
                final = float(gap[-1].mean()) if len(gap) else float("nan")
                finals.setdefault(f"{dist}/P{P}", []).append(final)
    rows.sort(key=lambda r: (r[4], r[1], r[2], r[3], r[0], r[6], r[7]))
    summary = {
        "median_final_gap": {k: float(np.median(v)) for k, v in finals.items()},
        "final_gaps": finals,
        "diverged": diverged,
    }
    for dist in cfg.distributions:
        meds = [summary["median_final_gap"].get(f"{dist.value}/P{P}") for P in cfg.p_sweep]
        if None not in meds:
            summary.setdefault("strictly_decreasing", {})[dist.value] = bool(
                all(a > b for a, b in zip(meds, meds[1:]))
            )
    return TrajectoryResult(rows, summary)


# -- V scaling ----------------------------------------------------------------

@dataclass
class VScalingResult:
    rows: list      # [V, P, distribution, seed, difference_norm, fo_norm, relative_error]
    medians: list
    summary: dict


def sqrt_v_log_v_ratio(v_hi: int, v_lo: int) -> float:
    return math.sqrt(v_hi * math.log(v_hi) / (v_lo * math.log(v_lo)))


def run_v_scaling(cfg: ExperimentConfig) -> VScalingResult:
    """Self-kernel K(x, x) at a fixed input, for a fresh V-class model per V."""
    rows = []
    idx = cfg.extra.get("input_index", 0)
    for V in cfg.extra["v_sweep"]:
        model = replace(cfg.model, output_dim=V)
        theta = init_params(model)
        ds = load_dataset(cfg.data, model)
        J = jacobian_logits(theta, model, ds.inputs[idx])
        K_fo = fo_entk(J, J)
        f = float(np.linalg.norm(K_fo.entries))
        d = model.num_params

        def cell(job, J=J, K_fo=K_fo, f=f, d=d, V=V):
            P, dist, seed = job
            U = PerturbationMatrix(perturbation_columns(seed, 0, d, P, dist) / np.sqrt(P), dist, seed, 0)
            k = float(np.linalg.norm(kernel_discrepancy(K_fo, zo_entk(J, J, U))))
            return [V, P, dist.value, seed, k, f, k / f]

        jobs = [(P, dist, s) for P in cfg.p_sweep for dist in cfg.distributions for s in cfg.seeds]
        rows.extend(_map(cell, jobs, cfg.threads))
        del J, K_fo
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    medians, med = [], {}
    for V in cfg.extra["v_sweep"]:
        for P in cfg.p_sweep:
            for dist in cfg.distributions:
                sel = [r for r in rows if r[0] == V and r[1] == P and r[2] == dist.value]
                m = [V, P, dist.value, "median"] + [float(np.median([r[i] for r in sel])) for i in (4, 5, 6)]
                medians.append(m)
                med[(V, P, dist.value)] = m[6]
    summary: dict = {"median_relative_error": {}, "checks": {}}
    vs = sorted(cfg.extra["v_sweep"])
    for P in cfg.p_sweep:
        for dist in cfg.distributions:
            errs = [med[(V, P, dist.value)] for V in vs]
            key = f"{dist.value}/P{P}"
            summary["median_relative_error"][key] = {str(V): e for V, e in zip(vs, errs)}
            check = {"strictly_increasing": bool(all(a < b for a, b in zip(errs, errs[1:])))}
            if 10 in vs and 1000 in vs:
                ratio = med[(1000, P, dist.value)] / med[(10, P, dist.value)]
                pred = sqrt_v_log_v_ratio(1000, 10)
                check.update({
                    "ratio_1000_over_10": ratio,
                    "predicted_sqrt_vlogv": pred,
                    "within_factor_2": bool(pred / 2 <= ratio <= 2 * pred),
                    "predicted_sqrt_v": math.sqrt(100.0),
                })
            summary["checks"][key] = check
    return VScalingResult(rows, medians, summary)


# -- moment identities --------------------------------------------------------

def _test_matrix(kind: str, d: int, seed: int) -> np.ndarray:
    if kind == "zero":
        return np.zeros((d, d))
    if kind == "identity":
        return np.eye(d)
    B = StreamKey(seed, 0, d, Tag.PROBE).generator().standard_normal((d, d))
    return (B + B.T) / 2.0


def _rel(a, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a - b))


def _check(name: str, value: float, tol: float, **info) -> dict:
    return {"name": name, "value": value, "tol": tol, "pass": bool(value <= tol), **info}


def concentration_tail(dist: Distribution, d: int, P: int, epsilon: float, trials: int, seed: int) -> float:
    """Empirical P(| ||U^T x||^2 - 1 | >= eps) for a fixed unit x and fresh U each trial."""
    x = np.zeros(d)
    x[0] = 1.0
    x = np.full(d, 1.0 / math.sqrt(d)) if dist is Distribution.RADEMACHER else x
    hits = 0
    chunk = max(1, (1 << 20) // (d * P))
    for k, start in enumerate(range(0, trials, chunk)):
        n = min(chunk, trials - start)
        gen = StreamKey(seed, k, P, Tag.MONTE_CARLO).generator()
        U = draw(gen, n * d * P, dist).reshape(n, d, P) / math.sqrt(P)
        y = np.einsum("i,nip->np", x, U)
        hits += int(np.count_nonzero(np.abs(np.sum(y * y, axis=1) - 1.0) >= epsilon))
    return hits / trials


def run_moment_check(cfg: ExperimentConfig) -> dict:
    ex = cfg.extra
    seed = cfg.seeds[0]
    c = float(ex["c"])
    checks = []

    fm = ex["fourth_moment"]
    W = _test_matrix(ex["W"], fm["d"], seed)
    est = bounds.gaussian_fourth_moment_oracle(W, fm["samples"], seed)
    target = bounds.gaussian_fourth_moment_target(W)
    checks.append(_check("gaussian_fourth_moment", _rel(est, target), fm["tol"],
                         d=fm["d"], samples=fm["samples"]))

    mp = ex["multi_perturbation"]
    W = _test_matrix(ex["W"], mp["d"], seed)
    for P in mp["P"]:
        est = bounds.multi_perturbation_expectation_oracle(W, P, mp["samples"], seed)
        target = bounds.multi_perturbation_target(W, P)
        checks.append(_check("multi_perturbation_expectation", _rel(est, target), mp["tol"],
                             d=mp["d"], P=P, samples=mp["samples"]))

    re_ = ex["rademacher_exact"]
    worst = 0.0
    for d in re_["d"]:
        g = StreamKey(seed, 1, d, Tag.PROBE).generator().standard_normal(d)
        if ex["W"] == "zero":
            g = np.zeros(d)
        exact = bounds.rademacher_second_moment_exact(g)
        target = bounds.second_moment_target(g, Distribution.RADEMACHER)
        worst = max(worst, abs(exact - target) / max(1.0, abs(target)))
    checks.append(_check("rademacher_second_moment_exact", worst, re_["tol"], d=list(re_["d"])))

    gs = ex["gaussian_second_moment"]
    g = StreamKey(seed, 2, gs["d"], Tag.PROBE).generator().standard_normal(gs["d"])
    if ex["W"] == "zero":
        g = np.zeros(gs["d"])
    est = bounds.second_moment_mc(g, Distribution.GAUSSIAN, gs["samples"], seed)
    target = bounds.second_moment_target(g, Distribution.GAUSSIAN)
    value = abs(est - target) / target if target else abs(est)
    checks.append(_check("gaussian_second_moment", value, gs["tol"], d=gs["d"], samples=gs["samples"]))

    co = ex["concentration"]
    for dist in (Distribution.GAUSSIAN, Distribution.RADEMACHER):
        for P in co["P"]:
            eps = co["epsilon"]
            observed = concentration_tail(dist, co["d"], P, eps, co["trials"], seed)
            if dist is Distribution.GAUSSIAN:
                bound = 2.0 * math.exp(-c * P * eps**2)
            else:
                bound = 2.0 * math.exp(-c * P * eps**2 + P * eps**3 / 6.0)
            checks.append(_check(f"concentration_{dist.value}", observed, co["slack"] * bound,
                                 P=P, epsilon=eps, c=c, trials=co["trials"]))
    return {"c": c, "W": ex["W"], "checks": checks, "all_pass": all(ch["pass"] for ch in checks)}


def run_jl_budget(cfg: ExperimentConfig) -> dict:
    ex = cfg.extra
    b = bounds.jl_budget(int(ex["n"]), float(ex["epsilon"]), float(ex["delta"]), float(ex["c"]))
    out = b.to_json()
    out["epsilon_at_required_P"] = bounds.jl_epsilon(b.n, b.required_P, b.concentration_constant, b.delta)
    return out


# -- serialization ------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(CSV_VERSION_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def run(cfg: ExperimentConfig):
    return {
        "kernel-compare": run_kernel_compare,
        "trajectory": run_trajectory_sweep,
        "v-scaling": run_v_scaling,
        "moment-check": run_moment_check,
        "jl-budget": run_jl_budget,
    }[cfg.kind](cfg)


def write_outputs(cfg: ExperimentConfig, result, out_dir: str) -> list[str]:
    """Serialize ``result`` into ``out_dir``; returns the written file names."""
    os.makedirs(out_dir, exist_ok=True)
    written = {"run_config.json": json_text(cfg.to_json())}
    if cfg.kind == "kernel-compare":
        rows = [r.csv_row() for r in result.reports] + [m.csv_row() for m in result.medians]
        written["kernel_compare.csv"] = csv_text(CSV_COLUMNS, rows)
        written["kernel_compare_summary.json"] = json_text(result.summary)
        if result.kernels:
            os.makedirs(os.path.join(out_dir, "kernels"), exist_ok=True)
            for name, K in sorted(result.kernels.items()):
                dump_kernel(os.path.join(out_dir, "kernels", name), K)
    elif cfg.kind == "trajectory":
        written["trajectory.csv"] = csv_text(TRAJECTORY_COLUMNS + ("gap",), result.rows)
        written["trajectory_summary.json"] = json_text(result.summary)
    elif cfg.kind == "v-scaling":
        cols = ("V", "P", "distribution", "seed", "difference_norm", "fo_norm", "relative_error")
        written["v_scaling.csv"] = csv_text(cols, result.rows + result.medians)
        written["v_scaling_summary.json"] = json_text(result.summary)
    elif cfg.kind == "moment-check":
        written["moment_check.json"] = json_text(result)
    else:
        written["jl_budget.json"] = json_text(result)
    for name, text in written.items():
        _write(os.path.join(out_dir, name), text)
    return sorted(written)


__all__ = [
    "ConfigError", "ExperimentConfig", "KernelMatrix", "resolve_config", "run", "write_outputs",
]
