"""Iteration engines: variable sample-size gradient tracking plus the
single-sample baselines it is compared against.

One update of the tracking algorithm, with A(k) drawn fresh from the
graph process and per-agent fixed steps alpha_i:

    x_i(k+1) = sum_j a_ij(k) x_j(k) - alpha_i y_i(k)
    y_i(k+1) = sum_j a_ij(k) y_j(k) + g_i(x_i(k+1)) - g_i(x_i(k))

where g_i is the batch-mean gradient with N(k+1) samples and the value
at x_i(k) is the one cached from the previous iteration (re-sampling it
would break the tracking identity mean(y) = mean(g)).

Baselines: "dsgd" mixes x and takes one sampled gradient per agent per
step (constant or 1/(k+1)-decaying step); "dsgt" is the tracking update
with batch size fixed at one and constant steps.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels, metrics
from .graphs import sample_index
from .schedules import batch_at, constant

ALGORITHMS = ("dvss_sgt", "dsgd", "dsgt")


@dataclass
class StepRule:
    """Step-size sequence for the baselines."""

    kind: str = "constant"   # "constant" | "harmonic" (c / (k+1))
    c: float = 0.01

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic"):
            raise ValueError(f"unknown step rule {self.kind!r}")
        if self.c <= 0:
            raise ValueError("step-rule constant must be positive")

    def at(self, k):
        if self.kind == "constant":
            return self.c
        return self.c / (k + 1.0)


@dataclass
class NetworkState:
    """Stacked iterates of all agents plus bookkeeping counters.

    `samples` holds per-agent cumulative oracle calls as Python ints
    (geometric schedules overflow fixed-width integers within a few
    hundred iterations); `comms` counts directed messages.
    """

    x: np.ndarray                    # (n, d)
    y: "np.ndarray | None"           # (n, d); None for dsgd
    alphas: np.ndarray               # (n,)
    k: int = 0
    g_cache: "np.ndarray | None" = None
    samples: list = field(default_factory=list)
    comms: int = 0

    @property
    def n(self):
        return self.x.shape[0]


def init(problem, schedule, alphas, x0, rng):
    """Initial state: y_i(0) is the batch gradient at x_i(0) with N(0)."""
    x0 = np.array(x0, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if x0.shape != (problem.n, problem.d):
        raise ValueError(f"x0 must have shape {(problem.n, problem.d)}")
    if alphas.shape != (problem.n,):
        raise ValueError("one step size per agent required")
    if (alphas <= 0).any():
        raise ValueError("step sizes must be positive")
    N0 = batch_at(schedule, 0)
    y0 = problem.batch_gradients(x0, N0, rng)
    return NetworkState(
        x=x0, y=y0, alphas=alphas, k=0, g_cache=y0.copy(),
        samples=[N0] * problem.n, comms=0)


def init_dsgd(problem, alphas_unused, x0):
    x0 = np.array(x0, dtype=float)
    if x0.shape != (problem.n, problem.d):
        raise ValueError(f"x0 must have shape {(problem.n, problem.d)}")
    return NetworkState(
        x=x0, y=None, alphas=np.zeros(problem.n), k=0,
        g_cache=None, samples=[0] * problem.n, comms=0)


def step_dvss(state, problem, process, schedule, rng):
    """Advance the tracking iteration by one round (in place)."""
    m = sample_index(process, rng)
    A = process.matrices[m]
    x_new = kernels.gt_mix(A, state.x, state.y, state.alphas)
    N_next = batch_at(schedule, state.k + 1)
    g_new = problem.batch_gradients(x_new, N_next, rng)
    state.y = kernels.gt_track(A, state.y, g_new, state.g_cache)
    state.x = x_new
    state.g_cache = g_new
    state.k += 1
    for i in range(state.n):
        state.samples[i] += N_next
    state.comms += int(process.comm_rounds[m])
    return state


def step_dsgd(state, problem, process, rule, rng):
    """One mixing plus single-sample gradient step (no tracking)."""
    m = sample_index(process, rng)
    A = process.matrices[m]
    g = problem.batch_gradients(state.x, 1, rng)
    a_k = rule.at(state.k)
    state.x = A @ state.x - a_k * g
    state.k += 1
    for i in range(state.n):
        state.samples[i] += 1
    # x only is exchanged, half the messages of the tracking methods
    state.comms += int(process.comm_rounds[m]) // 2
    return state


@dataclass
class Trajectory:
    """Recorded per-iteration metrics of one run."""

    frames: list
    status: str          # "horizon" | "converged" | "diverged"
    k_final: int
    final_state: "NetworkState | None" = None

    def field_array(self, name):
        return np.array([getattr(f, name) for f in self.frames], dtype=float)


def run(problem, process, schedule, alphas, x0, horizon, rng, *,
        kind="dvss_sgt", dsgd_rule=None, stop_eps=None, stop_metric="e",
        recorder=None):
    """Iterate an algorithm for `horizon` steps, recording a metric frame
    per iteration (including the initial state).

    Stops early when the chosen stop metric first drops below stop_eps
    ("converged") or when any iterate goes non-finite ("diverged").
    `recorder`, when given, receives (tracking_residual, mix_deviation)
    per step for invariant audits.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if kind not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {kind!r}")

    if kind == "dsgd":
        rule = dsgd_rule if dsgd_rule is not None else StepRule("constant", 0.01)
        state = init_dsgd(problem, alphas, x0)
    else:
        if kind == "dsgt":
            schedule = constant(1)
        state = init(problem, schedule, alphas, x0, rng)
    # a decreasing-step tracking baseline rewrites its steps each round
    dsgt_rule = dsgd_rule if kind == "dsgt" and dsgd_rule is not None else None

    frames = [metrics.frame(state, problem)]
    status = "horizon"
    for _ in range(horizon):
        if dsgt_rule is not None:
            state.alphas = np.full(state.n, dsgt_rule.at(state.k))
        if recorder is not None:
            x_prev_mean = state.x.mean(axis=0)
            y_prev = state.y.copy() if state.y is not None else None
        if kind == "dsgd":
            step_dsgd(state, problem, process, rule, rng)
        else:
            step_dvss(state, problem, process, schedule, rng)

        if not np.isfinite(state.x).all() or (
                state.y is not None and not np.isfinite(state.y).all()):
            status = "diverged"
            break

        f = metrics.frame(state, problem)
        frames.append(f)
        if recorder is not None:
            # mixing is mean-preserving: undo the gradient part of the
            # update and compare the mixed mean against the previous mean
            if y_prev is not None:
                mixed_mean = (state.x + state.alphas[:, None] * y_prev).mean(axis=0)
            else:
                mixed_mean = None
            recorder.observe(f, mixed_mean, x_prev_mean)
        if stop_eps is not None:
            val = getattr(f, _STOP_FIELDS[stop_metric])
            if val is not None and val < stop_eps:
                status = "converged"
                break
    return Trajectory(frames=frames, status=status, k_final=state.k,
                      final_state=state)


_STOP_FIELDS = {
    "e": "e",
    "opt_error": "opt_error",
    "consensus_x": "consensus_x",
}


class InvariantRecorder:
    """Collects per-step invariant residuals over one or more runs."""

    def __init__(self):
        self.tracking = []
        self.mix_deviation = []

    def observe(self, frame, mixed_mean, prev_mean):
        if frame.tracking_residual is not None:
            self.tracking.append(frame.tracking_residual)
        if mixed_mean is not None:
            self.mix_deviation.append(
                float(np.linalg.norm(mixed_mean - prev_mean)))

    def max_tracking(self):
        return max(self.tracking) if self.tracking else 0.0

    def max_mix_deviation(self):
        return max(self.mix_deviation) if self.mix_deviation else 0.0
