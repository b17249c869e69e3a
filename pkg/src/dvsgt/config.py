"""Run configuration: a flat TOML file with one table per component.

Sections and keys (see README for the full reference):

* ``[problem]``  either ``path`` to a problem JSON or an inline spec
  (kind, n, d, eig_min, eig_max, zero_eigs, noise_sd, reference_radius,
  seed).
* ``[graph]``    either ``path`` to a graph-process JSON or an inline
  spec (n, p, count, seed).
* ``[run]``      algorithm, schedule table, alpha spec, horizon,
  replications, seed_base, optional stop rule and baseline step rule.

Step sizes accept a scalar, a per-agent list, or ``"auto:<bound>@<frac>"``
where <bound> is one of ``convex``, ``identical``, ``strongly_convex``
(identical steps at the named theory bound times the stated fraction,
optionally clipped by ``alpha_cap``).
"""

import hashlib
import json
import sys
from dataclasses import dataclass

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import graphs, problems, schedules, theory
from .algorithms import ALGORITHMS, StepRule


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}")


def config_hash(cfg):
    """Hash of the semantic content (key order and comments ignored)."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def build_problem(cfg, seed_override=None):
    sec = cfg.get("problem")
    if not sec:
        raise ConfigError("missing [problem] section")
    if "path" in sec:
        return problems.RegressionInstance.load(sec["path"])
    if sec.get("kind", "regression") != "regression":
        raise ConfigError(f"unknown problem kind {sec.get('kind')!r}")
    try:
        seed = seed_override if seed_override is not None else sec.get("seed", 0)
        rng = np.random.default_rng(seed)
        return problems.make_regression(
            n=sec["n"], d=sec["d"],
            eig_range=(sec.get("eig_min", 1.0), sec.get("eig_max", 2.0)),
            noise_sd=sec.get("noise_sd", 0.1),
            zero_eigs=sec.get("zero_eigs", 0),
            reference_radius=sec.get("reference_radius", 2.0),
            rng=rng)
    except KeyError as exc:
        raise ConfigError(f"[problem] missing key {exc}")
    except ValueError as exc:
        raise ConfigError(f"[problem]: {exc}")


def build_graphs(cfg, seed_override=None):
    sec = cfg.get("graph")
    if not sec:
        raise ConfigError("missing [graph] section")
    if "path" in sec:
        return graphs.GraphProcess.load(sec["path"])
    try:
        seed = seed_override if seed_override is not None else sec.get("seed", 0)
        rng = np.random.default_rng(seed)
        return graphs.erdos_renyi_support(
            n=sec["n"], p=sec["p"], count=sec.get("count", 1), rng=rng)
    except KeyError as exc:
        raise ConfigError(f"[graph] missing key {exc}")
    except (ValueError, graphs.GraphConnectivityError) as exc:
        raise ConfigError(f"[graph]: {exc}")


def build_schedule(spec):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("schedule must be a table with a 'kind' key")
    kind = spec["kind"]
    try:
        if kind == "constant":
            return schedules.constant(spec["B"])
        if kind == "geometric":
            return schedules.geometric(spec["q"])
        if kind == "polynomial":
            return schedules.polynomial(spec["theta"])
        if kind == "power":
            return schedules.power(spec["p"])
        if kind == "table":
            return schedules.table(spec["values"])
    except KeyError as exc:
        raise ConfigError(f"schedule missing key {exc}")
    except ValueError as exc:
        raise ConfigError(f"schedule: {exc}")
    raise ConfigError(f"unknown schedule kind {kind!r}")


AUTO_BOUNDS = ("convex", "identical", "strongly_convex")


def resolve_alpha(spec, n, rho1_val, eta, L, cap=None):
    """Turn an alpha spec into a per-agent vector.

    Returns (alphas, info) where info records how an auto spec resolved.
    """
    info = {}
    if isinstance(spec, str):
        if not spec.startswith("auto:"):
            raise ConfigError(f"bad alpha spec {spec!r}")
        body = spec[len("auto:"):]
        name, _, frac_s = body.partition("@")
        frac = float(frac_s) if frac_s else 0.99
        if name not in AUTO_BOUNDS:
            raise ConfigError(f"unknown alpha bound {name!r}; "
                              f"choose from {AUTO_BOUNDS}")
        if name == "convex":
            bound = theory.stepsize_bound_convex(rho1_val, L)
        elif name == "identical":
            bound = theory.stepsize_bound_identical(rho1_val, eta, L)
        else:
            if eta <= 0:
                raise ConfigError("strongly_convex bound needs eta > 0")
            beta_star, second = theory.stepsize_bound_strongly_convex(
                rho1_val, eta, L, 0.0)
            bound = min(beta_star, second) / L
        value = frac * bound
        if cap is not None:
            value = min(value, cap)
        if value <= 0:
            raise ConfigError("resolved step size is not positive")
        info = {"bound": name, "fraction": frac, "bound_value": bound,
                "alpha": value, "capped": cap is not None and frac * bound > cap}
        return np.full(n, value), info
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(f"alpha list must have length {n}")
    if (arr <= 0).any():
        raise ConfigError("step sizes must be positive")
    info = {"alpha": arr.tolist()}
    return arr, info


@dataclass
class RunSetup:
    """Everything needed to execute a configured run."""

    problem: object
    process: object
    schedule: object
    alphas: np.ndarray
    alpha_info: dict
    algorithm: str
    horizon: int
    replications: int
    seed_base: int
    x0: np.ndarray
    stop_eps: "float | None"
    stop_metric: str
    fail_on_divergence: bool
    baseline_rule: "StepRule | None"
    rho1: float
    cfg: dict

    @property
    def hash(self):
        return config_hash(self.cfg)


def build_setup(cfg, *, seed=None, graph_seed=None, problem_seed=None):
    problem = build_problem(cfg, problem_seed)
    process = build_graphs(cfg, graph_seed)
    if process.n != problem.n:
        raise ConfigError(
            f"agent counts differ: graph n={process.n}, problem n={problem.n}")
    run = cfg.get("run")
    if not run:
        raise ConfigError("missing [run] section")
    algorithm = run.get("algorithm", "dvss_sgt")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    schedule = build_schedule(run.get("schedule", {"kind": "geometric", "q": 0.98}))
    rho1_val = graphs.rho1(process)
    alphas, alpha_info = resolve_alpha(
        run.get("alpha", 0.01), problem.n, rho1_val, problem.eta, problem.lip,
        cap=run.get("alpha_cap"))
    horizon = int(run.get("horizon", 100))
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    replications = int(run.get("replications", 1))
    if replications < 1:
        raise ConfigError("replications must be >= 1")
    seed_base = int(seed if seed is not None else run.get("seed_base", 0))

    x0_spec = run.get("x0", "zeros")
    if isinstance(x0_spec, str):
        if x0_spec != "zeros":
            raise ConfigError(f"unknown x0 spec {x0_spec!r}")
        x0 = np.zeros((problem.n, problem.d))
    else:
        x0 = np.asarray(x0_spec, dtype=float)
        if x0.shape != (problem.n, problem.d):
            raise ConfigError(f"x0 must have shape {(problem.n, problem.d)}")

    rule_spec = run.get("baseline_step")
    baseline_rule = None
    if rule_spec is not None:
        try:
            baseline_rule = StepRule(rule_spec.get("kind", "constant"),
                                     rule_spec.get("c", 0.01))
        except ValueError as exc:
            raise ConfigError(f"baseline_step: {exc}")
    elif algorithm == "dsgd":
        baseline_rule = StepRule("constant", float(np.min(alphas)))

    stop_eps = run.get("stop_eps")
    stop_metric = run.get("stop_metric", "e")
    if stop_metric not in ("e", "opt_error", "consensus_x"):
        raise ConfigError(f"unknown stop metric {stop_metric!r}")

    return RunSetup(
        problem=problem, process=process, schedule=schedule,
        alphas=alphas, alpha_info=alpha_info, algorithm=algorithm,
        horizon=horizon, replications=replications, seed_base=seed_base,
        x0=x0, stop_eps=stop_eps, stop_metric=stop_metric,
        fail_on_divergence=bool(run.get("fail_on_divergence", False)),
        baseline_rule=baseline_rule, rho1=rho1_val, cfg=cfg)
