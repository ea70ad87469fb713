"""Config-driven command line front end.

Subcommands: simulate | moments | bounds | figure1 | figure2 | oracle.
Exit codes: 0 success, 1 assumption-guard failure, 2 config or I/O error.
CSV output: comma separated, '.' decimal point, header row, LF line endings;
matrix dumps are row-major without a header. Plots are self-contained SVG.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from .config import (
    ExperimentConfig,
    load_config,
    resolve_dataset,
    resolve_scheme,
    resolve_schedule,
)
from .dynamics import run_trajectory
from .errors import AssumptionError, BudgetError, ConfigError, RwgdError
from .linalg import Dataset, WeightedProblem, build_weighted_problem
from .montecarlo import (
    OracleBudget,
    ensemble_moments,
    enumeration_oracle,
    risk_curve,
)
from .moments import MomentContext, propagate, stationary_second_moment
from .schedules import Constant, schedule_prefix
from .svgplot import line_chart
from .weighting import analytic_moments, finite_support, support_bound

__all__ = ["main"]


def _fmt(v) -> str:
    v = float(v)
    if np.isnan(v):
        return "nan"
    return repr(v)


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0])
    lines = [",".join(header)]
    for i in range(rows):
        lines.append(",".join(_fmt(col[i]) for col in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_matrix_csv(path: Path, matrix: np.ndarray) -> None:
    """Row-major matrix dump, '.' decimal, no header."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [",".join(_fmt(v) for v in row) for row in m]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8", newline="\n")


def stability_limit(wp: WeightedProblem, tau: float | None) -> float:
    """Largest step size that keeps both the mean recursion and the
    per-realization weighted steps stable: min(1/||X^t M2 X||, 2/(tau^2 ||X^t X||))."""
    limit = 1.0 / wp.norm_xx_hat
    if tau is not None and tau > 0:
        limit = min(limit, 2.0 / (tau**2 * wp.norm_xx))
    return limit


def _scheme_label(spec: dict, index: int) -> str:
    if spec["variant"] == "categorical_rule":
        return spec["rule"]
    return f"{spec['variant']}_{index}"


def _core_guard(wp, scheme, schedule, w1) -> None:
    report = bounds_mod.assumption_check(wp, scheme, schedule, w1=w1)
    for name in ("step_size_bound", "m2_nonsingular", "start_orthogonal"):
        for a in report.assumptions:
            if a.name == name and not a.passed:
                raise AssumptionError(f"assumption '{name}' fails: {a.detail}")


def _sq_dist_envelope(wp, scheme, schedule, w1, steps):
    """Per-row envelope for E||w_k - w_hat||^2 = Tr(A_k), k = 1..steps+1,
    from the constant-step deviation bound; (None, reason) when the bound's
    assumptions fail."""
    if not isinstance(schedule, Constant):
        return None, "envelope defined for constant step sizes only"
    try:
        ctx = MomentContext(wp, analytic_moments(scheme).sigma_d, schedule)
        ctx.require_step_limit()
        limit_norm = float(np.linalg.norm(stationary_second_moment(ctx), 2))
        c2 = bounds_mod.var_constants(ctx, w1)["c2"]
    except AssumptionError as exc:
        return None, str(exc)
    env = np.empty(steps + 1)
    for row in range(steps + 1):
        env[row] = wp.d * (limit_norm + bounds_mod.second_moment_envelope(ctx, c2, row))
    return env, None


def _prepare(cfg: ExperimentConfig, base_dir: Path):
    data = resolve_dataset(cfg.dataset, base_dir)
    if cfg.scheme is None:
        raise ConfigError("this command needs a 'scheme' entry in the config")
    scheme = resolve_scheme(cfg.scheme, data.dataset)
    mom = analytic_moments(scheme)
    wp = build_weighted_problem(data.dataset, mom.m2_diag)
    schedule = resolve_schedule(cfg.schedule, stability_limit(wp, support_bound(scheme)))
    w1 = np.asarray(cfg.w1, dtype=float) if cfg.w1 is not None else np.zeros(wp.d)
    if w1.shape != (wp.d,):
        raise ConfigError(f"w1 must have length d = {wp.d}")
    return data, scheme, mom, wp, schedule, w1


def cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int, plot: bool,
                 base_dir: Path) -> int:
    data, scheme, mom, wp, schedule, w1 = _prepare(cfg, base_dir)
    if cfg.enforce_assumptions:
        _core_guard(wp, scheme, schedule, w1)
    out.mkdir(parents=True, exist_ok=True)
    alphas = schedule_prefix(schedule, cfg.steps)
    if cfg.n_traj == 1:
        rec = run_trajectory(wp, scheme, schedule, w1, cfg.steps, cfg.seed,
                             enforce_assumptions=cfg.enforce_assumptions)
        header = ["k"] + [f"w_{j + 1}" for j in range(wp.d)] + ["alpha_k"]
        alpha_col = np.concatenate([alphas, [np.nan]])  # no step leaves the final iterate
        cols = [rec.iter_index.astype(float)]
        cols += [rec.iterates[:, j] for j in range(wp.d)]
        cols += [alpha_col[rec.iter_index - 1]]
        write_csv(out / "trajectory.csv", header, cols)
        write_json(out / "simulate_config.json",
                   {"config": cfg.to_dict(), "seed": cfg.seed})
        if plot:
            (out / "trajectory.svg").write_text(
                line_chart(rec.iter_index,
                           [(f"w_{j + 1}", rec.iterates[:, j]) for j in range(min(wp.d, 6))],
                           title="iterate coordinates", y_label="value"),
                encoding="utf-8")
        return 0
    summary = ensemble_moments(wp, scheme, schedule, w1, cfg.steps, cfg.n_traj,
                               cfg.seed, threads=threads)
    env, env_reason = _sq_dist_envelope(wp, scheme, schedule, w1, cfg.steps)
    env_col = env if env is not None else np.full(cfg.steps + 1, np.nan)
    write_csv(out / "ensemble.csv",
              ["k", "mean_sq_dist", "se", "bound_envelope"],
              [summary.iter_index.astype(float), summary.sq_dist,
               summary.se_sq_dist, env_col])
    write_json(out / "simulate_config.json",
               {"config": cfg.to_dict(), "seed": cfg.seed,
                "envelope_valid": env is not None,
                "envelope_note": env_reason or "constant-step deviation bound"})
    if plot:
        series = [("mean sq dist", summary.sq_dist)]
        if env is not None:
            series.append(("envelope", env_col))
        (out / "ensemble.svg").write_text(
            line_chart(summary.iter_index, series, title="ensemble squared distance",
                       y_label="E||w_k - w_hat||^2", log_y=True),
            encoding="utf-8")
    return 0


def cmd_moments(cfg: ExperimentConfig, out: Path, threads: int, plot: bool,
                base_dir: Path) -> int:
    data, scheme, mom, wp, schedule, w1 = _prepare(cfg, base_dir)
    if cfg.enforce_assumptions:
        _core_guard(wp, scheme, schedule, w1)
    out.mkdir(parents=True, exist_ok=True)
    ctx = MomentContext(wp, mom.sigma_d, schedule)
    states = propagate(ctx, w1 - wp.w_hat, cfg.steps)
    ks = np.array([s.k for s in states], dtype=float)
    m_norm = np.array([np.linalg.norm(s.m) for s in states])
    a_norm = np.array([np.linalg.norm(s.a, 2) for s in states])
    a_trace = np.array([np.trace(s.a) for s in states])
    write_csv(out / "moments.csv", ["k", "m_norm", "a_norm", "a_trace"],
              [ks, m_norm, a_norm, a_trace])
    stationary_note = "not computed: requires a constant schedule within the step bound"
    if isinstance(schedule, Constant):
        try:
            limit = stationary_second_moment(ctx)
            write_matrix_csv(out / "stationary.csv", limit)
            stationary_note = "stationary.csv"
        except AssumptionError as exc:
            stationary_note = f"not computed: {exc}"
    write_json(out / "moments_config.json",
               {"config": cfg.to_dict(), "seed": cfg.seed, "stationary": stationary_note})
    if plot:
        (out / "moments.svg").write_text(
            line_chart(ks, [("||m_k||", m_norm), ("||A_k||", a_norm), ("Tr A_k", a_trace)],
                       title="exact moment decay", log_y=True),
            encoding="utf-8")
    return 0


def cmd_bounds(cfg: ExperimentConfig, out: Path, threads: int, plot: bool,
               base_dir: Path) -> int:
    data, scheme, mom, wp, schedule, w1 = _prepare(cfg, base_dir)
    out.mkdir(parents=True, exist_ok=True)
    extra = cfg.bounds or {}
    tau = extra.get("tau", support_bound(scheme))
    report = bounds_mod.assumption_check(wp, scheme, schedule, w1=w1, tau=tau)
    payload = json.loads(report.to_json())
    values: dict = {}
    skipped: dict = {}

    try:
        values["gd_rate_bound_at_k"] = bounds_mod.gd_rate_bound(wp, schedule, cfg.steps, w1)
    except AssumptionError as exc:
        skipped["gd_rate_bound_at_k"] = str(exc)

    try:
        ctx = MomentContext(wp, mom.sigma_d, schedule)
    except AssumptionError as exc:
        ctx = None
        skipped["moment_context"] = str(exc)
    if ctx is not None:
        values["mean_rate_bound_at_k"] = bounds_mod.mean_rate_bound(ctx, cfg.steps, w1)
        try:
            consts = bounds_mod.var_constants(ctx, w1)
            values["c0"] = consts["c0"]
            if consts["c1"] is not None:
                values["c1"] = consts["c1"]
            if consts["c2"] is not None:
                values["c2"] = consts["c2"]
        except AssumptionError as exc:
            skipped["var_constants"] = str(exc)

    if ctx is not None and isinstance(schedule, Constant):
        try:
            values["variance_ceiling"] = bounds_mod.variance_ceiling(ctx)
        except AssumptionError as exc:
            skipped["variance_ceiling"] = str(exc)
        if tau is not None:
            try:
                bq, r = bounds_mod.gmc_rate(wp, schedule.alpha, tau, 2.0)
                values["gmc_rate_q2_bound"] = r
                values["gmc_rate_q2_bound_pow_q"] = bq
            except AssumptionError as exc:
                skipped["gmc_rate"] = str(exc)
            if "epsilon" in extra:
                # default prefactor: 10x the initial distance to the target
                c3 = extra.get("c3", 10.0 * float(np.linalg.norm(w1 - wp.w_hat)))
                try:
                    a_max, k_min = bounds_mod.conv_point_budget(
                        ctx, tau, extra["epsilon"], c3)
                    values["point_mass_alpha_max"] = a_max
                    values["point_mass_k_min"] = k_min
                    values["point_mass_c3"] = c3
                except AssumptionError as exc:
                    skipped["conv_point_budget"] = str(exc)
    elif ctx is not None:
        skipped["constant_step_bounds"] = "schedule is not constant"

    wp_uniform = build_weighted_problem(data.dataset, np.ones(wp.n))
    ratio, bound = bounds_mod.condition_speedup(wp_uniform, wp)
    values["condition_speedup_ratio"] = ratio
    values["condition_speedup_bound"] = bound

    ds = data.dataset
    if ds.w_star is not None and ds.sigma_eps is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lo, hi = bounds_mod.asym_risk_bounds(wp, ds.w_star, ds.sigma_eps)
        values["risk_lower"] = lo
        values["risk_upper"] = hi

    payload["values"] = {k: float(v) for k, v in values.items()}
    payload["skipped"] = skipped
    payload["config"] = cfg.to_dict()
    write_json(out / "bounds.json", payload)
    return 0


def cmd_figure1(cfg: ExperimentConfig, out: Path, threads: int, plot: bool,
                base_dir: Path) -> int:
    if cfg.figure is None:
        raise ConfigError("figure1 needs a 'figure' section with two scheme specs")
    data = resolve_dataset(cfg.dataset, base_dir)
    specs = cfg.figure["schemes"]
    schemes = [resolve_scheme(s, data.dataset) for s in specs]
    labels = [_scheme_label(s, i) for i, s in enumerate(specs)]
    wps = [build_weighted_problem(data.dataset, analytic_moments(s).m2_diag)
           for s in schemes]
    limit = min(
        stability_limit(wp, support_bound(s)) for wp, s in zip(wps, schemes)
    )
    schedule = resolve_schedule(cfg.schedule, limit)
    if cfg.n_traj == 1:
        warnings.warn("n_traj = 1: standard errors are undefined", stacklevel=2)
    out.mkdir(parents=True, exist_ok=True)
    header = ["k"]
    cols = [np.arange(1, cfg.steps + 2, dtype=float)]
    notes = {}
    curves = []
    for label, scheme, wp in zip(labels, schemes, wps):
        w1 = np.zeros(wp.d)
        if cfg.enforce_assumptions:
            _core_guard(wp, scheme, schedule, w1)
        summary = ensemble_moments(wp, scheme, schedule, w1, cfg.steps,
                                   cfg.n_traj, cfg.seed, threads=threads)
        env, reason = _sq_dist_envelope(wp, scheme, schedule, w1, cfg.steps)
        header += [f"sq_dist_{label}", f"se_{label}", f"envelope_{label}"]
        cols += [summary.sq_dist, summary.se_sq_dist,
                 env if env is not None else np.full(cfg.steps + 1, np.nan)]
        notes[label] = {"envelope_valid": env is not None,
                        "envelope_note": reason or "constant-step deviation bound"}
        curves.append((label, summary.sq_dist))
    write_csv(out / "figure1.csv", header, cols)
    write_json(out / "figure1_config.json",
               {"config": cfg.to_dict(), "seed": cfg.seed, "schemes": notes})
    if plot:
        (out / "figure1.svg").write_text(
            line_chart(cols[0], curves, title="uniform vs importance sampling",
                       y_label="E||w_k - w_hat||^2", log_y=True),
            encoding="utf-8")
    return 0


def cmd_figure2(cfg: ExperimentConfig, out: Path, threads: int, plot: bool,
                base_dir: Path) -> int:
    if cfg.figure is None or "noise_maps" not in cfg.figure:
        raise ConfigError("figure2 needs a 'figure' section with schemes and noise_maps")
    data = resolve_dataset(cfg.dataset, base_dir)
    ds = data.dataset
    if ds.w_star is None:
        raise ConfigError("figure2 needs a generated dataset with a ground truth w_star")
    # normalize the design so the risk sandwich applies exactly as stated
    scale = float(np.linalg.norm(ds.x, 2))
    x = ds.x / scale
    w_star = ds.w_star
    n = ds.n
    big = data.rescaled_rows
    n_rep = cfg.figure.get("n_rep", cfg.n_traj)
    specs = cfg.figure["schemes"]
    labels = [_scheme_label(s, i) for i, s in enumerate(specs)]
    base = Dataset(x, x @ w_star, w_star=w_star)
    # norm-keyed sampling rules act on the raw (unnormalized) rows
    schemes = [resolve_scheme(s, ds) for s in specs]
    wps = [build_weighted_problem(base, analytic_moments(s).m2_diag) for s in schemes]
    limit = min(stability_limit(wp, support_bound(s)) for wp, s in zip(wps, schemes))
    schedule = resolve_schedule(cfg.schedule, limit)
    if not isinstance(schedule, Constant):
        raise ConfigError("figure2 requires a constant step-size schedule")
    alpha = schedule.alpha

    def _stds(rule):
        if isinstance(rule, dict):
            std = np.full(n, float(rule["small"]))
            std[big] = float(rule["large"])
            return std
        std = np.asarray(rule, dtype=float)
        if std.shape != (n,):
            raise ConfigError(f"noise map must list n = {n} values")
        return std

    out.mkdir(parents=True, exist_ok=True)
    header = ["k"]
    cols = [np.arange(1, cfg.steps + 2, dtype=float)]
    sandwiches = {}
    curves = []
    for panel in ("left", "right"):
        std = _stds(cfg.figure["noise_maps"][panel])
        sigma_eps = np.diag(std**2)
        for label, scheme, wp in zip(labels, schemes, wps):
            if cfg.enforce_assumptions:
                _core_guard(wp, scheme, schedule, np.zeros(wp.d))
            mean, se = risk_curve(
                lambda y, m2=wp.m2_diag: build_weighted_problem(Dataset(x, y), m2),
                scheme, alpha, w_star, sigma_eps, cfg.steps, n_rep,
                cfg.seed, threads=threads)
            lo, hi = bounds_mod.asym_risk_bounds(wp, w_star, sigma_eps)
            col = f"{panel}_{label}"
            header += [f"risk_{col}", f"se_{col}"]
            cols += [mean, se]
            sandwiches[col] = {"lower": lo, "upper": hi}
            curves.append((col, mean))
    for col, s in sandwiches.items():
        header += [f"lower_{col}", f"upper_{col}"]
        cols += [np.full(cfg.steps + 1, s["lower"]), np.full(cfg.steps + 1, s["upper"])]
    write_csv(out / "figure2.csv", header, cols)
    write_json(out / "figure2_config.json",
               {"config": cfg.to_dict(), "seed": cfg.seed,
                "design_norm_scale": scale, "sandwich": sandwiches})
    if plot:
        (out / "figure2.svg").write_text(
            line_chart(cols[0], curves, title="statistical error of good vs bad sampling",
                       y_label="E||w_k - w*||^2", log_y=True),
            encoding="utf-8")
    return 0


def cmd_oracle(cfg: ExperimentConfig, out: Path, threads: int, plot: bool,
               base_dir: Path) -> int:
    if cfg.oracle is None:
        raise ConfigError("oracle needs an 'oracle' section with instances")
    max_outcomes = cfg.oracle.get("max_outcomes", 2**16)
    tol = 1e-10
    worst = 0.0
    lines = []
    out.mkdir(parents=True, exist_ok=True)
    for i, inst in enumerate(cfg.oracle["instances"]):
        data = resolve_dataset(inst["dataset"], base_dir)
        scheme = resolve_scheme(inst["scheme"], data.dataset)
        mom = analytic_moments(scheme)
        wp = build_weighted_problem(data.dataset, mom.m2_diag)
        schedule = resolve_schedule(inst["schedule"],
                                    stability_limit(wp, support_bound(scheme)))
        steps = inst["steps"]
        w1 = (np.asarray(inst["w1"], dtype=float) if "w1" in inst else np.zeros(wp.d))
        support = finite_support(scheme)
        if support is None:
            raise ConfigError(f"oracle instance {i}: scheme has no finite support")
        budget = OracleBudget(len(support), steps, max_outcomes)
        oracle_states = enumeration_oracle(wp, scheme, schedule, w1, budget)
        ctx = MomentContext(wp, mom.sigma_d, schedule)
        exact_states = propagate(ctx, w1 - wp.w_hat, steps)
        dev = 0.0
        for o, e in zip(oracle_states, exact_states):
            dev = max(dev, float(np.max(np.abs(o.m - e.m))), float(np.max(np.abs(o.a - e.a))))
        worst = max(worst, dev)
        write_csv(out / f"oracle_{i}.csv", ["k", "m_norm", "a_norm", "a_trace"],
                  [np.array([s.k for s in oracle_states], dtype=float),
                   np.array([np.linalg.norm(s.m) for s in oracle_states]),
                   np.array([np.linalg.norm(s.a, 2) for s in oracle_states]),
                   np.array([np.trace(s.a) for s in oracle_states])])
        lines.append(f"instance {i}: max deviation {dev:.3e} "
                     f"({'ok' if dev <= tol else 'FAIL'})")
    for line in lines:
        print(line)
    print(f"worst deviation {worst:.3e} (tolerance {tol})")
    return 0 if worst <= tol else 1


_COMMANDS = {
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "bounds": cmd_bounds,
    "figure1": cmd_figure1,
    "figure2": cmd_figure2,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rwgd",
        description="randomly weighted gradient descent experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--threads", type=int, default=1, help="worker threads for ensembles")
        p.add_argument("--no-plot", action="store_true", help="skip SVG output")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        out = Path(args.out) if args.out else Path(cfg.outputs["csv_dir"])
        plot = cfg.outputs["plot"] and not args.no_plot
        base_dir = Path(args.config).resolve().parent
        return _COMMANDS[args.command](cfg, out, args.threads, plot, base_dir)
    except AssumptionError as exc:
        print(f"assumption guard failure: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, BudgetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RwgdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
