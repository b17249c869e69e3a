"""Per-iteration error measurement, Monte Carlo aggregation, and
empirical-vs-theory comparison utilities.

The combined error e(k) follows the stacked definition used in the
experiments, sqrt(opt_error^2 + consensus_x^2); the y-consensus error
is recorded separately so the full three-component error vector is
available for envelope comparisons.
"""

import math
from dataclasses import dataclass

import numpy as np

CSV_HEADER = ("k,opt_error_mean,opt_error_se,consensus_x_mean,consensus_x_se,"
              "consensus_y_mean,consensus_y_se,e_mean,e_se,samples_cum,"
              "comms_cum,diverged_count")


@dataclass
class MetricFrame:
    """Errors and counters of one network state."""

    k: int
    opt_error: "float | None"
    consensus_x: float
    consensus_y: "float | None"
    e: "float | None"
    samples_cum: int
    comms_cum: int
    tracking_residual: "float | None" = None  # relative, not serialized


def frame(state, problem):
    """Measure a network state against the problem's optimum.

    Mean subtraction implements the stacked projection (I - 11'/n) (x) I
    without materializing a Kronecker product. The tracking residual is
    ||mean(y) - mean(cached gradients)|| / (1 + ||mean(cached gradients)||).
    """
    xbar = state.x.mean(axis=0)
    consensus_x = float(np.linalg.norm(state.x - xbar))
    x_star = getattr(problem, "x_star", None)
    if x_star is not None:
        opt = float(np.linalg.norm(xbar - x_star))
        e = math.hypot(opt, consensus_x)
    else:
        opt = None
        e = None
    if state.y is not None:
        ybar = state.y.mean(axis=0)
        consensus_y = float(np.linalg.norm(state.y - ybar))
        gbar = state.g_cache.mean(axis=0)
        tracking = float(np.linalg.norm(ybar - gbar)
                         / (1.0 + np.linalg.norm(gbar)))
    else:
        consensus_y = None
        tracking = None
    return MetricFrame(
        k=state.k, opt_error=opt, consensus_x=consensus_x,
        consensus_y=consensus_y, e=e,
        samples_cum=sum(state.samples), comms_cum=state.comms,
        tracking_residual=tracking)


@dataclass
class EnsembleSeries:
    """Per-iteration mean and standard error across sample paths."""

    k: np.ndarray
    opt_mean: np.ndarray
    opt_se: np.ndarray
    consensus_x_mean: np.ndarray
    consensus_x_se: np.ndarray
    consensus_y_mean: np.ndarray
    consensus_y_se: np.ndarray
    e_mean: np.ndarray
    e_se: np.ndarray
    samples_cum: list          # exact ints, identical across replications
    comms_mean: np.ndarray
    replications: int
    seeds: list
    diverged_count: int

    def z_mean(self):
        """Mean error vector (opt, x-consensus, y-consensus) per k."""
        return np.stack([self.opt_mean, self.consensus_x_mean,
                         self.consensus_y_mean], axis=1)


def _mean_se(rows):
    arr = np.asarray(rows, dtype=float)
    mean = arr.mean(axis=0)
    if arr.shape[0] > 1:
        se = arr.std(axis=0, ddof=1) / math.sqrt(arr.shape[0])
    else:
        se = np.full(arr.shape[1], np.nan)
    return mean, se


def ensemble(run_factory, R, seed_base, threads=1):
    """Aggregate R independent replications.

    `run_factory(seed)` must return a Trajectory; replication r uses
    seed `seed_base + r`. Replications are independent, so any degree of
    parallelism gives the same aggregate; diverged replications are
    excluded from the means and counted.
    """
    if R < 1:
        raise ValueError("need at least one replication")
    seeds = [seed_base + r for r in range(R)]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajectories = list(pool.map(run_factory, seeds))
    else:
        trajectories = [run_factory(s) for s in seeds]

    kept = [t for t in trajectories if t.status != "diverged"]
    diverged = len(trajectories) - len(kept)
    if not kept:
        raise RuntimeError("all replications diverged")
    length = min(len(t.frames) for t in kept)

    def rows(name):
        return [t.field_array(name)[:length] for t in kept]

    opt_mean, opt_se = _mean_se(rows("opt_error"))
    cx_mean, cx_se = _mean_se(rows("consensus_x"))
    cy_mean, cy_se = _mean_se(rows("consensus_y"))
    e_mean, e_se = _mean_se(rows("e"))
    comms_mean, _ = _mean_se(rows("comms_cum"))
    samples = [f.samples_cum for f in kept[0].frames[:length]]
    for t in kept[1:]:
        if [f.samples_cum for f in t.frames[:length]] != samples:
            raise RuntimeError("replications disagree on the sample schedule")
    return EnsembleSeries(
        k=np.arange(length), opt_mean=opt_mean, opt_se=opt_se,
        consensus_x_mean=cx_mean, consensus_x_se=cx_se,
        consensus_y_mean=cy_mean, consensus_y_se=cy_se,
        e_mean=e_mean, e_se=e_se, samples_cum=samples,
        comms_mean=comms_mean, replications=len(kept), seeds=seeds,
        diverged_count=diverged)


@dataclass
class FitResult:
    slope: float
    intercept: float
    r2: float


def rate_fit(k, values, k_range, abscissa="k"):
    """Least-squares fit of log(values) against k or log(k).

    Use abscissa "k" for geometric decay (slope = log of the base) and
    "logk" for polynomial decay (slope = -exponent).
    """
    k = np.asarray(k, dtype=float)
    v = np.asarray(values, dtype=float)
    lo, hi = k_range
    mask = (k >= lo) & (k <= hi)
    if not mask.any():
        raise ValueError("empty fit range")
    kk, vv = k[mask], v[mask]
    if (vv <= 0).any() or not np.isfinite(vv).all():
        raise ValueError("fit requires positive finite values on the range")
    if abscissa == "k":
        x = kk
    elif abscissa == "logk":
        if (kk <= 0).any():
            raise ValueError("log-k fit requires k > 0 on the range")
        x = np.log(kk)
    else:
        raise ValueError(f"unknown abscissa {abscissa!r}")
    y = np.log(vv)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (resid ** 2).sum() / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), float(r2))


@dataclass
class SweepRow:
    epsilon: float
    iterations: "int | None"     # None: target never reached (censored)
    samples: "int | None"
    comms: "float | None"

    @property
    def censored(self):
        return self.iterations is None


def complexity_sweep(series, epsilons):
    """First-passage iterations and budgets of mean e(k) below each eps.

    Epsilons must be strictly decreasing. Unreached targets are reported
    as censored rows, never extrapolated.
    """
    eps = list(epsilons)
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    rows = []
    e = series.e_mean
    for target in eps:
        below = np.nonzero(e < target)[0]
        if below.size == 0:
            rows.append(SweepRow(target, None, None, None))
        else:
            j = int(below[0])
            rows.append(SweepRow(
                target, j, series.samples_cum[j], float(series.comms_mean[j])))
    return rows


# ---------------------------------------------------------------------------
# CSV output

def _fmt(x):
    if x is None:
        return "nan"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    xf = float(x)
    if math.isnan(xf):
        return "nan"
    return f"{xf:.17g}"


def write_ensemble_csv(path, series, metadata=None):
    """Emit the fixed-schema per-iteration CSV (comment lines first)."""
    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}={value}")
    lines.append(CSV_HEADER)
    for j in range(len(series.k)):
        row = [
            str(int(series.k[j])),
            _fmt(series.opt_mean[j]), _fmt(series.opt_se[j]),
            _fmt(series.consensus_x_mean[j]), _fmt(series.consensus_x_se[j]),
            _fmt(series.consensus_y_mean[j]), _fmt(series.consensus_y_se[j]),
            _fmt(series.e_mean[j]), _fmt(series.e_se[j]),
            str(int(series.samples_cum[j])),
            _fmt(series.comms_mean[j]),
            str(series.diverged_count),
        ]
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_ensemble_csv(path):
    """Read back a CSV written by write_ensemble_csv.

    Returns (metadata dict, column dict); numeric columns come back as
    float arrays except samples_cum, parsed as exact ints.
    """
    metadata = {}
    rows = []
    header = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, val = body.split("=", 1)
                    metadata[key.strip()] = val.strip()
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    if header is None:
        raise ValueError(f"no header found in {path}")
    cols = {}
    for idx, name in enumerate(header):
        raw = [r[idx] for r in rows]
        if name == "samples_cum":
            cols[name] = [int(v) for v in raw]
        elif name in ("k", "diverged_count"):
            cols[name] = np.array([int(v) for v in raw])
        else:
            cols[name] = np.array([float(v) for v in raw])
    return metadata, cols
