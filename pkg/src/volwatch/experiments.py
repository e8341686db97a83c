"""Seeded Monte Carlo harness for size, power and delay studies.

Each replication simulates a training-plus-monitoring sample, fits the QMLE on
the training part and runs every requested scheme on the monitoring part.
Replication r uses the seed sequence (plan.seed, r), so results are identical
whatever the execution order or worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .critical_values import CvRequest, CvTable, build_cv_table, cv_darling_erdos
from .garch import simulate_path
from .monitor import (DarlingErdos, Detected, MonitorConfig, Renyi, SchemeKind,
                      Weighted, run_closed_ended, stopping_time)
from .params import GarchParams, InnovationDist
from .qmle import QmleError, fit_qmle

__all__ = [
    "ExperimentPlan",
    "SchemeResult",
    "ExperimentResult",
    "scheme_key",
    "run_experiment",
    "run_delay_study",
    "write_result_csv",
    "write_manifest",
    "write_delay_csv",
    "plan_to_dict",
    "plan_from_dict",
]


def scheme_key(scheme: SchemeKind) -> str:
    if isinstance(scheme, Weighted):
        return f"weighted:{scheme.eta:g}"
    if isinstance(scheme, Renyi):
        return f"renyi:{scheme.eta:g}:r{scheme.r}"
    return "de" if scheme.r is None else f"de:r{scheme.r}"


@dataclass(frozen=True)
class ExperimentPlan:
    """One Monte Carlo study: H0 when theta_a is None, else a change at
    monitoring index k_star."""

    theta0: GarchParams
    dist: InnovationDist
    m: int
    n: int
    schemes: tuple[SchemeKind, ...]
    level: float = 0.05
    reps: int = 1_000
    tuned: bool = True
    seed: int = 0
    theta_a: GarchParams | None = None
    k_star: int | None = None
    qmle_restarts: int = 2
    qmle_lattice: int = 1

    def __post_init__(self):
        if self.reps < 100:
            raise ValueError("reps must be >= 100")
        if not self.schemes:
            raise ValueError("schemes must be non-empty")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must be in (0, 1)")
        if (self.theta_a is None) != (self.k_star is None):
            raise ValueError("theta_a and k_star must be given together")
        if self.k_star is not None and not 1 <= self.k_star <= self.n:
            raise ValueError("need 1 <= k_star <= n")
        if self.m < 100 or self.n < 2:
            raise ValueError("need m >= 100 and n >= 2")

    @property
    def is_null(self) -> bool:
        return self.theta_a is None


def plan_to_dict(plan: ExperimentPlan) -> dict:
    def params(p):
        return None if p is None else {"omega": p.omega, "alpha": p.alpha,
                                       "beta": p.beta}

    schemes = []
    for s in plan.schemes:
        if isinstance(s, Weighted):
            schemes.append({"kind": "weighted", "eta": s.eta})
        elif isinstance(s, Renyi):
            schemes.append({"kind": "renyi", "eta": s.eta, "r": s.r})
        else:
            schemes.append({"kind": "de", "r": s.r})
    return {"theta0": params(plan.theta0), "theta_a": params(plan.theta_a),
            "k_star": plan.k_star, "dist": plan.dist.label(), "m": plan.m,
            "n": plan.n, "schemes": schemes, "level": plan.level,
            "reps": plan.reps, "tuned": plan.tuned, "seed": plan.seed,
            "qmle_restarts": plan.qmle_restarts,
            "qmle_lattice": plan.qmle_lattice}


def plan_from_dict(d: dict) -> ExperimentPlan:
    def params(v):
        return None if v is None else GarchParams(**v)

    schemes: list[SchemeKind] = []
    for s in d["schemes"]:
        kind = s["kind"]
        if kind == "weighted":
            schemes.append(Weighted(eta=float(s["eta"])))
        elif kind == "renyi":
            schemes.append(Renyi(eta=float(s["eta"]), r=int(s["r"])))
        elif kind == "de":
            r = s.get("r")
            schemes.append(DarlingErdos(r=None if r is None else int(r)))
        else:
            raise ValueError(f"unknown scheme kind {kind!r}")
    return ExperimentPlan(
        theta0=params(d["theta0"]), theta_a=params(d.get("theta_a")),
        k_star=d.get("k_star"), dist=InnovationDist.from_label(d["dist"]),
        m=int(d["m"]), n=int(d["n"]), schemes=tuple(schemes),
        level=float(d.get("level", 0.05)), reps=int(d["reps"]),
        tuned=bool(d.get("tuned", True)), seed=int(d.get("seed", 0)),
        qmle_restarts=int(d.get("qmle_restarts", 2)),
        qmle_lattice=int(d.get("qmle_lattice", 1)))


def plan_hash(plan: ExperimentPlan) -> str:
    blob = json.dumps(plan_to_dict(plan), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def critical_values_for(plan: ExperimentPlan,
                        cv_table: CvTable | None = None,
                        cv_req: CvRequest | None = None,
                        cache_path: str | None = None) -> dict[str, float]:
    """Critical value per scheme, simulated (or cache-served) when needed."""
    out: dict[str, float] = {}
    weighted = sorted({s.eta for s in plan.schemes if isinstance(s, Weighted)})
    renyi = sorted({s.eta for s in plan.schemes if isinstance(s, Renyi)})
    table = cv_table or CvTable(entries={})

    def need(scheme: str, etas: list[float]) -> list[float]:
        return [e for e in etas if table.lookup(scheme, e, plan.level) is None]

    req = cv_req or CvRequest(level=plan.level, grid_points=20_000, reps=20_000)
    for scheme_name, etas in (("weighted", weighted), ("renyi", renyi)):
        missing = need(scheme_name, etas)
        if missing:
            extra = build_cv_table(missing, [plan.level], req, scheme=scheme_name,
                                   cache_path=cache_path)
            table.entries.update(extra.entries)
    for s in plan.schemes:
        if isinstance(s, DarlingErdos):
            out[scheme_key(s)] = cv_darling_erdos(plan.level)
        else:
            name = "weighted" if isinstance(s, Weighted) else "renyi"
            out[scheme_key(s)] = table.lookup(name, s.eta, plan.level).c
    return out


def _run_one_rep(args) -> tuple[int, dict[str, int] | None]:
    """One replication; returns (rep, {scheme_key: stopping time}) or (rep, None)
    when the QMLE is unusable."""
    plan, cvs, rep = args
    ss = np.random.SeedSequence([plan.seed, rep])
    sim_seed, fit_seed = (int(s) for s in ss.generate_state(2))
    length = plan.m + plan.n
    switch = None if plan.is_null else plan.m + plan.k_star
    path = simulate_path(plan.theta0, plan.theta_a, switch, length=length,
                         dist=plan.dist, seed=sim_seed)
    y = path.y
    if not np.all(np.isfinite(y)):
        return rep, None
    train = y[1:plan.m + 1]
    post = y[plan.m + 1:]
    try:
        fit = fit_qmle(train, restarts=plan.qmle_restarts, seed=fit_seed,
                       lattice=plan.qmle_lattice)
    except QmleError:
        return rep, None
    if not fit.D_hat.is_invertible:
        return rep, None
    outcomes: dict[str, int] = {}
    for scheme in plan.schemes:
        config = MonitorConfig(scheme=scheme, c=cvs[scheme_key(scheme)],
                               horizon_n=plan.n, m=plan.m, tuned=plan.tuned)
        outcome = run_closed_ended(post, config, fit)
        tau = stopping_time(outcome)
        outcomes[scheme_key(scheme)] = tau if isinstance(outcome, Detected) else -tau
    return rep, outcomes


@dataclass(frozen=True)
class SchemeResult:
    scheme: SchemeKind
    c: float
    rejections: int
    completed: int
    rate: float
    half_width: float
    delays: np.ndarray  # tau - k_star (tau itself under H0), detected reps only

    def __post_init__(self):
        self.delays.setflags(write=False)


@dataclass(frozen=True)
class ExperimentResult:
    plan: ExperimentPlan
    per_scheme: dict[str, SchemeResult]
    n_failures: int
    config_hash: str


def run_experiment(plan: ExperimentPlan,
                   cv_table: CvTable | None = None,
                   cv_req: CvRequest | None = None,
                   cv_cache: str | None = None,
                   n_jobs: int | None = None) -> ExperimentResult:
    """Run the plan; aborts when more than 5% of replications lose their QMLE."""
    cvs = critical_values_for(plan, cv_table, cv_req, cv_cache)
    jobs = [(plan, cvs, rep) for rep in range(plan.reps)]
    if n_jobs is None:
        n_jobs = min(os.cpu_count() or 1, 8)
    results: list[dict[str, int] | None] = [None] * plan.reps
    if n_jobs > 1 and plan.reps >= 2 * n_jobs:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            chunk = max(1, plan.reps // (4 * n_jobs))
            for rep, out in pool.map(_run_one_rep, jobs, chunksize=chunk):
                results[rep] = out
    else:
        for job in jobs:
            rep, out = _run_one_rep(job)
            results[rep] = out

    n_failures = sum(1 for r in results if r is None)
    if n_failures > 0.05 * plan.reps:
        raise RuntimeError(
            f"QMLE failed in {n_failures}/{plan.reps} replications "
            f"(> 5%); training configuration unusable")

    per_scheme: dict[str, SchemeResult] = {}
    offset = 0 if plan.is_null else plan.k_star
    for scheme in plan.schemes:
        key = scheme_key(scheme)
        taus = [r[key] for r in results if r is not None]
        detected = [t for t in taus if t > 0]
        completed = len(taus)
        rate = len(detected) / completed if completed else 0.0
        hw = 1.96 * math.sqrt(rate * (1.0 - rate) / completed) if completed else 0.0
        delays = np.array(sorted(t - offset for t in detected), dtype=np.int64)
        per_scheme[key] = SchemeResult(scheme=scheme, c=cvs[key],
                                       rejections=len(detected),
                                       completed=completed, rate=rate,
                                       half_width=hw, delays=delays)
    return ExperimentResult(plan=plan, per_scheme=per_scheme,
                            n_failures=n_failures, config_hash=plan_hash(plan))


def run_delay_study(plan: ExperimentPlan, **kwargs) -> dict[str, dict[str, float]]:
    """Delay quartiles per scheme, conditional on detection."""
    result = run_experiment(plan, **kwargs)
    summary: dict[str, dict[str, float]] = {}
    for key, res in result.per_scheme.items():
        if res.delays.size:
            q25, q50, q75 = np.percentile(res.delays, [25, 50, 75])
        else:
            q25 = q50 = q75 = math.nan
        summary[key] = {"n_detected": int(res.delays.size), "q25": float(q25),
                        "median": float(q50), "q75": float(q75)}
    return summary


def _scheme_eta(scheme: SchemeKind) -> float:
    return scheme.eta if isinstance(scheme, (Weighted, Renyi)) else 1.0


def write_result_csv(result: ExperimentResult, path: str | Path) -> None:
    lines = ["scheme,eta,reps,rejections,rate,half_width"]
    for key, res in result.per_scheme.items():
        lines.append(f"{key},{_scheme_eta(res.scheme)!r},{res.completed},"
                     f"{res.rejections},{res.rate!r},{res.half_width!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_delay_csv(result: ExperimentResult, path: str | Path) -> None:
    lines = ["scheme,eta,n_detected,q25,median,q75"]
    for key, res in result.per_scheme.items():
        if res.delays.size:
            q25, q50, q75 = (float(v) for v in np.percentile(res.delays, [25, 50, 75]))
            lines.append(f"{key},{_scheme_eta(res.scheme)!r},{res.delays.size},"
                         f"{q25!r},{q50!r},{q75!r}")
        else:
            lines.append(f"{key},{_scheme_eta(res.scheme)!r},0,,,")
    Path(path).write_text("\n".join(lines) + "\n")


def write_manifest(result: ExperimentResult, path: str | Path) -> None:
    from ._kernels import BACKEND

    doc = {"plan": plan_to_dict(result.plan),
           "config_hash": result.config_hash,
           "backend": BACKEND,
           "n_failures": result.n_failures,
           "critical_values": {k: r.c for k, r in result.per_scheme.items()}}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
