"""Experiment configuration: strict JSON schema, lossless round-trips.

Specs for datasets, schemes, and schedules are kept as normalized dicts and
resolved into live objects only when a command runs, because some of them
(norm-keyed sampling rules, stability-fraction step sizes) depend on the
generated data.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datagen import GeneratedData, gaussian_rescaled, heteroscedastic
from .errors import ConfigError
from .linalg import Dataset
from .schedules import Constant, Explicit, Harmonic, StepSchedule
from .weighting import (
    BernoulliIndependent,
    CategoricalSingle,
    ContinuousIID,
    FixedDiagonal,
    Identity,
    WeightingScheme,
)


def _check_keys(d: dict, required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    keys = set(d)
    missing = required - keys
    if missing:
        raise ConfigError(f"{where} is missing keys: {sorted(missing)}")
    unknown = keys - required - optional
    if unknown:
        raise ConfigError(f"{where} has unknown keys: {sorted(unknown)}")


def _num(v, where, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where} must be a finite number")
    if positive and v <= 0:
        raise ConfigError(f"{where} must be positive")
    return float(v)


def _int(v, where, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where} must be an integer")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where} must be at least {minimum}")
    return v


# ---------------------------------------------------------------------------
# sub-spec validation


def validate_dataset_spec(spec, where="dataset") -> dict:
    _check_keys(spec, set(), {"generator", "file", "inline"}, where)
    if sum(k in spec for k in ("generator", "file", "inline")) != 1:
        raise ConfigError(f"{where} needs exactly one of 'generator', 'file', or 'inline'")
    if "inline" in spec:
        inline = spec["inline"]
        _check_keys(inline, {"x", "y"}, {"w_star", "noise_std"}, f"{where}.inline")
        if not isinstance(inline["x"], list) or not isinstance(inline["y"], list):
            raise ConfigError(f"{where}.inline x and y must be JSON arrays")
        return spec
    if "generator" in spec:
        g = spec["generator"]
        _check_keys(g, {"variant"}, {"n", "d", "rescale_fraction", "rescale_factor",
                                     "seed", "entry_scale", "noise_map", "w_star"},
                    f"{where}.generator")
        if g["variant"] == "gaussian_rescaled":
            _check_keys(g, {"variant", "n", "d", "rescale_fraction", "rescale_factor", "seed"},
                        {"entry_scale"}, f"{where}.generator")
        elif g["variant"] == "heteroscedastic":
            _check_keys(g, {"variant", "n", "d", "noise_map", "w_star", "seed"},
                        {"rescale_fraction", "rescale_factor", "entry_scale"},
                        f"{where}.generator")
        else:
            raise ConfigError(f"unknown generator variant {g['variant']!r}")
    else:
        f = spec["file"]
        _check_keys(f, {"x", "y"}, {"w_star", "noise_std"}, f"{where}.file")
    return spec


def validate_scheme_spec(spec, where="scheme") -> dict:
    _check_keys(spec, {"variant"}, {"p", "c", "low", "high", "rule"}, where)
    v = spec["variant"]
    if v == "identity":
        _check_keys(spec, {"variant"}, set(), where)
    elif v == "fixed":
        _check_keys(spec, {"variant", "c"}, set(), where)
    elif v == "categorical":
        _check_keys(spec, {"variant", "p"}, set(), where)
    elif v == "bernoulli":
        _check_keys(spec, {"variant", "p"}, set(), where)
    elif v == "uniform":
        _check_keys(spec, {"variant", "low", "high"}, set(), where)
        lo, hi = _num(spec["low"], f"{where}.low"), _num(spec["high"], f"{where}.high")
        if not 0 <= lo < hi:
            raise ConfigError(f"{where}: need 0 <= low < high")
    elif v == "categorical_rule":
        _check_keys(spec, {"variant", "rule"}, set(), where)
        if spec["rule"] not in {"uniform", "exp_norm", "exp_neg_norm"}:
            raise ConfigError(f"{where}.rule must be uniform, exp_norm, or exp_neg_norm")
    else:
        raise ConfigError(f"unknown scheme variant {v!r}")
    return spec


def validate_schedule_spec(spec, where="schedule") -> dict:
    _check_keys(spec, {"variant"}, {"alpha", "values"}, where)
    v = spec["variant"]
    if v in ("constant", "harmonic"):
        _check_keys(spec, {"variant", "alpha"}, set(), where)
        a = spec["alpha"]
        if isinstance(a, dict):
            _check_keys(a, {"rule", "value"}, set(), f"{where}.alpha")
            if a["rule"] != "fraction_of_stability_limit":
                raise ConfigError(f"{where}.alpha.rule must be 'fraction_of_stability_limit'")
            _num(a["value"], f"{where}.alpha.value", positive=True)
        else:
            _num(a, f"{where}.alpha", positive=True)
    elif v == "explicit":
        _check_keys(spec, {"variant", "values"}, set(), where)
        vals = spec["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"{where}.values must be a non-empty list")
        for i, x in enumerate(vals):
            _num(x, f"{where}.values[{i}]", positive=True)
    else:
        raise ConfigError(f"unknown schedule variant {v!r}")
    return spec


def validate_outputs_spec(spec, where="outputs") -> dict:
    _check_keys(spec, set(), {"csv_dir", "plot"}, where)
    out = {"csv_dir": spec.get("csv_dir", "out"), "plot": spec.get("plot", True)}
    if not isinstance(out["csv_dir"], str):
        raise ConfigError(f"{where}.csv_dir must be a string")
    if not isinstance(out["plot"], bool):
        raise ConfigError(f"{where}.plot must be a boolean")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    dataset: dict
    schedule: dict
    outputs: dict
    scheme: dict | None = None
    steps: int = 100
    n_traj: int = 1
    w1: tuple[float, ...] | None = None
    enforce_assumptions: bool = True
    figure: dict | None = None
    oracle: dict | None = None
    bounds: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "seed": self.seed,
            "dataset": self.dataset,
            "schedule": self.schedule,
            "outputs": self.outputs,
            "steps": self.steps,
            "n_traj": self.n_traj,
            "enforce_assumptions": self.enforce_assumptions,
        }
        if self.scheme is not None:
            out["scheme"] = self.scheme
        if self.w1 is not None:
            out["w1"] = list(self.w1)
        for name in ("figure", "oracle", "bounds"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_TOP_REQUIRED = {"seed", "dataset", "schedule"}
_TOP_OPTIONAL = {"outputs", "scheme", "steps", "n_traj", "w1",
                 "enforce_assumptions", "figure", "oracle", "bounds"}


def config_from_dict(raw: dict) -> ExperimentConfig:
    _check_keys(raw, _TOP_REQUIRED, _TOP_OPTIONAL, "config")
    seed = _int(raw["seed"], "seed", minimum=0)
    dataset = validate_dataset_spec(raw["dataset"])
    schedule = validate_schedule_spec(raw["schedule"])
    outputs = validate_outputs_spec(raw.get("outputs", {}))
    scheme = raw.get("scheme")
    if scheme is not None:
        scheme = validate_scheme_spec(scheme)
    steps = _int(raw.get("steps", 100), "steps", minimum=0)
    n_traj = _int(raw.get("n_traj", 1), "n_traj", minimum=1)
    w1 = raw.get("w1")
    if w1 is not None:
        if not isinstance(w1, list):
            raise ConfigError("w1 must be a list of numbers")
        w1 = tuple(_num(v, f"w1[{i}]") for i, v in enumerate(w1))
    enforce = raw.get("enforce_assumptions", True)
    if not isinstance(enforce, bool):
        raise ConfigError("enforce_assumptions must be a boolean")

    figure = raw.get("figure")
    if figure is not None:
        _check_keys(figure, {"schemes"}, {"noise_maps", "n_rep"}, "figure")
        if not isinstance(figure["schemes"], list) or len(figure["schemes"]) != 2:
            raise ConfigError("figure.schemes must list exactly two scheme specs")
        for i, s in enumerate(figure["schemes"]):
            validate_scheme_spec(s, f"figure.schemes[{i}]")
        if "noise_maps" in figure:
            _check_keys(figure["noise_maps"], {"left", "right"}, set(), "figure.noise_maps")
        if "n_rep" in figure:
            _int(figure["n_rep"], "figure.n_rep", minimum=1)

    oracle = raw.get("oracle")
    if oracle is not None:
        _check_keys(oracle, {"instances"}, {"max_outcomes"}, "oracle")
        if not isinstance(oracle["instances"], list) or not oracle["instances"]:
            raise ConfigError("oracle.instances must be a non-empty list")
        for i, inst in enumerate(oracle["instances"]):
            _check_keys(inst, {"dataset", "scheme", "schedule", "steps"}, {"w1"},
                        f"oracle.instances[{i}]")
            validate_dataset_spec(inst["dataset"], f"oracle.instances[{i}].dataset")
            validate_scheme_spec(inst["scheme"], f"oracle.instances[{i}].scheme")
            validate_schedule_spec(inst["schedule"], f"oracle.instances[{i}].schedule")
            _int(inst["steps"], f"oracle.instances[{i}].steps", minimum=0)
        if "max_outcomes" in oracle:
            _int(oracle["max_outcomes"], "oracle.max_outcomes", minimum=1)

    bounds = raw.get("bounds")
    if bounds is not None:
        _check_keys(bounds, set(), {"tau", "epsilon", "c3"}, "bounds")
        for key in bounds:
            _num(bounds[key], f"bounds.{key}", positive=True)

    return ExperimentConfig(
        seed=seed, dataset=dataset, schedule=schedule, outputs=outputs,
        scheme=scheme, steps=steps, n_traj=n_traj, w1=w1,
        enforce_assumptions=enforce, figure=figure, oracle=oracle, bounds=bounds,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# resolution of specs into live objects


def load_matrix_csv(path: str | Path):
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}") from exc


def resolve_dataset(spec: dict, base_dir: Path | None = None) -> GeneratedData:
    if "inline" in spec:
        inline = spec["inline"]
        x = np.asarray(inline["x"], dtype=float)
        y = np.asarray(inline["y"], dtype=float)
        w_star = np.asarray(inline["w_star"], dtype=float) if "w_star" in inline else None
        sigma_eps = None
        if "noise_std" in inline:
            std = np.asarray(inline["noise_std"], dtype=float)
            sigma_eps = np.diag(std**2)
        return GeneratedData(Dataset(x, y, w_star=w_star, sigma_eps=sigma_eps),
                             np.array([], dtype=int))
    if "generator" in spec:
        g = spec["generator"]
        if g["variant"] == "gaussian_rescaled":
            return gaussian_rescaled(
                n=g["n"], d=g["d"],
                rescale_fraction=g["rescale_fraction"],
                rescale_factor=g["rescale_factor"],
                seed=g["seed"],
                entry_scale=g.get("entry_scale", 1.0),
            )
        return heteroscedastic(
            n=g["n"], d=g["d"], noise_map=g["noise_map"], w_star=g["w_star"],
            seed=g["seed"],
            rescale_fraction=g.get("rescale_fraction", 0.0),
            rescale_factor=g.get("rescale_factor", 1.0),
            entry_scale=g.get("entry_scale", 1.0),
        )
    f = spec["file"]
    base = base_dir or Path(".")

    def _path(rel):
        p = Path(rel)
        return p if p.is_absolute() else base / p

    x = load_matrix_csv(_path(f["x"]))
    y = load_matrix_csv(_path(f["y"])).ravel()
    w_star = load_matrix_csv(_path(f["w_star"])).ravel() if "w_star" in f else None
    sigma_eps = None
    if "noise_std" in f:
        std = load_matrix_csv(_path(f["noise_std"])).ravel()
        sigma_eps = np.diag(std**2)
    return GeneratedData(Dataset(x, y, w_star=w_star, sigma_eps=sigma_eps),
                         np.array([], dtype=int))


def resolve_scheme(spec: dict, dataset: Dataset) -> WeightingScheme:
    v = spec["variant"]
    n = dataset.n
    if v == "identity":
        return Identity(n)
    if v == "fixed":
        return FixedDiagonal(np.asarray(spec["c"], dtype=float))
    if v == "categorical":
        return CategoricalSingle(np.asarray(spec["p"], dtype=float))
    if v == "bernoulli":
        return BernoulliIndependent(np.asarray(spec["p"], dtype=float))
    if v == "uniform":
        lo, hi = float(spec["low"]), float(spec["high"])
        moments = tuple(
            (hi ** (p + 1) - lo ** (p + 1)) / ((p + 1) * (hi - lo)) for p in range(1, 5)
        )
        return ContinuousIID(
            n=n,
            sampler=lambda rng, size: rng.uniform(lo, hi, size),
            moments=moments,
            tau=hi,
        )
    if v == "categorical_rule":
        rule = spec["rule"]
        if rule == "uniform":
            p = np.full(n, 1.0 / n)
        else:
            norms = np.linalg.norm(dataset.x, axis=1)
            sign = 1.0 if rule == "exp_norm" else -1.0
            logits = sign * norms
            logits -= logits.max()
            p = np.exp(logits)
            p /= p.sum()
        return CategoricalSingle(p)
    raise ConfigError(f"unknown scheme variant {v!r}")


def resolve_schedule(spec: dict, stability_limit: float | None = None) -> StepSchedule:
    """stability_limit feeds the 'fraction_of_stability_limit' rule; it is the
    largest step size the caller considers safe for the problem at hand."""
    v = spec["variant"]
    if v == "explicit":
        return Explicit(tuple(float(x) for x in spec["values"]))
    a = spec["alpha"]
    if isinstance(a, dict):
        if stability_limit is None:
            raise ConfigError("schedule uses a stability-fraction rule but no limit is available")
        alpha = float(a["value"]) * stability_limit
    else:
        alpha = float(a)
    return Constant(alpha) if v == "constant" else Harmonic(alpha)
