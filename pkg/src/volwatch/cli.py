"""Command-line front end: cv, monitor, simulate, experiment."""

from __future__ import annotations

import json
import math
from pathlib import Path

import click
import numpy as np

from . import __version__
from .critical_values import (CvRequest, CvTable, build_cv_table,
                              cv_darling_erdos, default_cache_path)
from .experiments import (plan_from_dict, run_experiment, write_delay_csv,
                          write_manifest, write_result_csv)
from .garch import Regime, simulate_path
from .io import read_returns_csv, write_returns_csv
from .monitor import (DarlingErdos, Detected, MonitorConfig, Renyi, Weighted,
                      run_closed_ended_with_trace)
from .params import GarchParams, InnovationDist
from .qmle import QmleError, fit_qmle, run_score_filter, initial_filter_state

_SCHEMES = ("weighted", "renyi", "de")


def _parse_theta(text: str) -> GarchParams:
    parts = text.split(",")
    if len(parts) != 3:
        raise click.BadParameter("expected 'omega,alpha,beta'")
    try:
        o, a, b = (float(p) for p in parts)
        return GarchParams(omega=o, alpha=a, beta=b)
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _parse_dist(label: str) -> InnovationDist:
    try:
        return InnovationDist.from_label(label)
    except ValueError as exc:
        raise click.BadParameter(str(exc))


@click.group()
@click.version_option(__version__)
def main():
    """Sequential monitoring of GARCH(1,1) volatility regimes."""


@main.command("cv")
@click.option("--scheme", type=click.Choice(_SCHEMES), default="weighted",
              show_default=True)
@click.option("--eta", "etas", type=float, multiple=True,
              help="Boundary weight exponent(s); required except for scheme 'de'.")
@click.option("--level", "levels", type=float, multiple=True,
              default=(0.10, 0.05, 0.01), show_default=True)
@click.option("--grid", type=int, default=100_000, show_default=True)
@click.option("--reps", type=int, default=20_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--cache", type=click.Path(dir_okay=False),
              default=None, help="Cache CSV (default: $VOLWATCH_CV_CACHE).")
def cmd_cv(scheme, etas, levels, grid, reps, seed, cache):
    """Simulate (or serve from cache) boundary critical values."""
    if scheme != "de" and not etas:
        raise click.UsageError("--eta is required for schemes 'weighted' and 'renyi'")
    if scheme == "de" and not etas:
        etas = (1.0,)
    cache = cache or default_cache_path()
    req = CvRequest(level=levels[0], grid_points=grid, reps=reps, seed=seed,
                    scheme=scheme)
    try:
        table = build_cv_table(list(etas), list(levels), req, scheme=scheme,
                               cache_path=cache)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo("scheme,eta,level,c,se")
    for (sch, eta, level), e in sorted(table.entries.items()):
        click.echo(f"{sch},{eta:g},{level:g},{e.c:.6f},{e.se:.6f}")


def _scheme_from_flags(scheme: str, eta: float | None, r: int | None, n: int):
    if scheme == "weighted":
        if eta is None:
            eta = 0.0
        return Weighted(eta=eta)
    if scheme == "renyi":
        if eta is None:
            raise click.UsageError("--eta is required for scheme 'renyi'")
        if r is None:
            r = int(math.isqrt(n))
        return Renyi(eta=eta, r=r)
    return DarlingErdos(r=r)


def _critical_value(scheme_obj, level: float, cache: str | None) -> dict:
    if isinstance(scheme_obj, DarlingErdos):
        return {"c": cv_darling_erdos(level), "se": 0.0, "source": "closed_form"}
    name = "weighted" if isinstance(scheme_obj, Weighted) else "renyi"
    req = CvRequest(level=level, grid_points=50_000, reps=20_000, seed=0,
                    scheme=name)
    cached = CvTable.load_or_empty(cache).lookup(name, scheme_obj.eta, level)
    if cached is not None:
        return {"c": cached.c, "se": cached.se, "source": "cache",
                "grid": cached.grid, "reps": cached.reps, "seed": cached.seed}
    table = build_cv_table([scheme_obj.eta], [level], req, scheme=name,
                           cache_path=cache)
    e = table.lookup(name, scheme_obj.eta, level)
    return {"c": e.c, "se": e.se, "source": "simulated", "grid": e.grid,
            "reps": e.reps, "seed": e.seed}


def _training_regime(y_train: np.ndarray, fit) -> dict:
    """Heuristic in-sample regime label: Monte Carlo Lyapunov sign test using
    the standardised training residuals as the innovation draws."""
    scores_state = initial_filter_state(fit.init_sigma2, fit.init_sigma2)
    _, _, log_sig2, _ = run_score_filter(y_train, fit.theta_hat, scores_state)
    eps_sq = y_train ** 2 * np.exp(-log_sig2)
    vals = np.log(fit.theta_hat.alpha * eps_sq + fit.theta_hat.beta)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size))
    if est + 3 * se < 0:
        label = Regime.STATIONARY
    elif est - 3 * se > 0:
        label = Regime.EXPLOSIVE
    else:
        label = Regime.NEAR_BOUNDARY
    return {"value": label.value, "lyapunov": est, "std_error": se,
            "note": "heuristic Lyapunov-sign classifier on training residuals"}


@main.command("monitor")
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--m", type=int, required=True, help="Training sample length.")
@click.option("--n", type=int, required=True, help="Monitoring horizon.")
@click.option("--scheme", type=click.Choice(_SCHEMES), default="weighted",
              show_default=True)
@click.option("--eta", type=float, default=None)
@click.option("--r", type=int, default=None,
              help="Trimming index (renyi default: floor(sqrt(n))).")
@click.option("--level", type=float, default=0.05, show_default=True)
@click.option("--tuned/--untuned", default=True, show_default=True)
@click.option("--cv-cache", type=click.Path(dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the JSON run report here (default: stdout).")
def cmd_monitor(data, m, n, scheme, eta, r, level, tuned, cv_cache, out):
    """Fit on the first m observations, monitor the following n."""
    dates, values = _read_or_fail(data)
    if m < 100:
        raise click.ClickException("need m >= 100")
    if len(values) < m + n - 1:
        raise click.ClickException(
            f"data has {len(values)} rows; monitoring m={m}, n={n} needs at "
            f"least {m + n - 1}")
    scheme_obj = _scheme_from_flags(scheme, eta, r, n)
    if isinstance(scheme_obj, DarlingErdos):
        tuned = False
    cv_cache = cv_cache or default_cache_path()
    cv_info = _critical_value(scheme_obj, level, cv_cache)
    try:
        config = MonitorConfig(scheme=scheme_obj, c=cv_info["c"], horizon_n=n,
                               m=m, tuned=tuned)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    train = values[:m]
    post = values[m:]
    try:
        fit = fit_qmle(train)
    except QmleError as exc:
        raise click.ClickException(f"QMLE failed: {exc}")
    if not fit.D_hat.is_invertible:
        raise click.ClickException("training score covariance is rank "
                                   "deficient; cannot monitor")
    outcome, trace = run_closed_ended_with_trace(post, config, fit)

    if isinstance(outcome, Detected):
        date = dates[m + outcome.k - 1] if dates[m + outcome.k - 1] else None
        outcome_doc = {"type": "detected", "k": outcome.k,
                       "detector": outcome.detector_value, "date": date}
    else:
        outcome_doc = {"type": "no_change", "horizon_n": outcome.horizon_n}
    report = {
        "config": {"data": str(data), "m": m, "n": n, "scheme": scheme,
                   "eta": eta, "r": getattr(scheme_obj, "r", None),
                   "level": level, "tuned": tuned},
        "critical_value": cv_info,
        "theta_hat": {"omega": fit.theta_hat.omega,
                      "alpha": fit.theta_hat.alpha,
                      "beta": fit.theta_hat.beta},
        "qmle": {"neg_quasi_loglik": fit.neg_quasi_loglik,
                 "converged": fit.converged,
                 "boundary_contact": fit.boundary_contact,
                 "init_sigma2": fit.init_sigma2},
        "D_hat": [list(row) for row in fit.D_hat.matrix.tolist()],
        "training_regime": _training_regime(train, fit),
        "outcome": outcome_doc,
        "trace": {"k": trace.ks.tolist(),
                  "detector": trace.detector.tolist(),
                  "boundary": trace.boundary.tolist()},
    }
    text = json.dumps(report, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        click.echo(text)


def _read_or_fail(path) -> tuple[list, np.ndarray]:
    try:
        return read_returns_csv(path)
    except ValueError as exc:
        raise click.ClickException(str(exc))


@main.command("simulate")
@click.option("--theta0", required=True, help="'omega,alpha,beta' before the change.")
@click.option("--thetaA", "theta_a", default=None,
              help="'omega,alpha,beta' after the change.")
@click.option("--kstar", type=int, default=None,
              help="Change point, counted after the training sample.")
@click.option("--m", type=int, required=True)
@click.option("--n", type=int, required=True)
@click.option("--dist", default="gaussian", show_default=True,
              help="'gaussian' or 't<df>' (e.g. t7).")
@click.option("--seed", type=int, default=None,
              help="Omit to draw one from OS entropy (echoed for replay).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def cmd_simulate(theta0, theta_a, kstar, m, n, dist, seed, out):
    """Write a simulated returns CSV with m training and n monitoring rows."""
    p0 = _parse_theta(theta0)
    pa = _parse_theta(theta_a) if theta_a else None
    if (pa is None) != (kstar is None):
        raise click.UsageError("--thetaA and --kstar must be given together")
    if kstar is not None and not 1 <= kstar <= n:
        raise click.ClickException("need 1 <= kstar <= n")
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2 ** 63))
        click.echo(f"seed: {seed}", err=True)
    d = _parse_dist(dist)
    path = simulate_path(p0, pa, None if kstar is None else m + kstar,
                         length=m + n, dist=d, seed=seed)
    if not np.all(np.isfinite(path.observations)):
        raise click.ClickException("simulated path overflowed double precision; "
                                   "shorten the horizon or soften the regime")
    write_returns_csv(out, path.observations)
    click.echo(f"wrote {m + n} rows to {out}")


@main.command("experiment")
@click.option("--plan", "plan_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Plan JSON (see README for the schema).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--cv-cache", type=click.Path(dir_okay=False), default=None)
@click.option("--jobs", type=int, default=None)
def cmd_experiment(plan_path, out_dir, cv_cache, jobs):
    """Run a Monte Carlo plan and write result CSVs plus a manifest."""
    try:
        doc = json.loads(Path(plan_path).read_text())
        plan = plan_from_dict(doc)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise click.ClickException(f"invalid plan: {exc}")
    cv_cache = cv_cache or default_cache_path()
    try:
        result = run_experiment(plan, cv_cache=cv_cache, n_jobs=jobs)
    except (RuntimeError, ValueError) as exc:
        raise click.ClickException(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_result_csv(result, out / "results.csv")
    write_delay_csv(result, out / "delays.csv")
    write_manifest(result, out / "manifest.json")
    for key, res in result.per_scheme.items():
        click.echo(f"{key}: rate {res.rate:.4f} +/- {res.half_width:.4f} "
                   f"({res.rejections}/{res.completed})")
    click.echo(f"wrote {out / 'results.csv'}")


if __name__ == "__main__":
    main()
