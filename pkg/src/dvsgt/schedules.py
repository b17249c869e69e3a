"""Batch-size schedules k -> N(k).

Four kinds are supported:

* ``constant``   N(k) = B
* ``geometric``  N(k) = ceil(q^(-2k)), q in (0, 1)
* ``polynomial`` N(k) = max(1, ceil((k+1)^(2 theta))), theta > 0
* ``power``      N(k) = max(1, ceil(k^p)), p > 0 (empirical-style ramp
  that starts at 1 regardless of p)
* ``table``      explicit values

Every schedule is clamped to N(k) >= 1; batch sizes are Python ints so
cumulative sums never wrap (geometric schedules exceed 2^63 quickly).
"""

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class BatchSchedule:
    kind: str
    B: int = 1
    q: float = 0.0
    theta: float = 0.0
    p: float = 0.0
    values: tuple = field(default=())

    def __post_init__(self):
        if self.kind == "constant":
            if self.B < 1:
                raise ValueError("constant batch size must be >= 1")
        elif self.kind == "geometric":
            if not (0.0 < self.q < 1.0):
                raise ValueError("geometric ratio must lie in (0, 1)")
        elif self.kind == "polynomial":
            if self.theta <= 0:
                raise ValueError("polynomial exponent theta must be > 0")
        elif self.kind == "power":
            if self.p <= 0:
                raise ValueError("power exponent must be > 0")
        elif self.kind == "table":
            if len(self.values) == 0:
                raise ValueError("empty schedule table")
            if any(int(v) < 1 or int(v) != v for v in self.values):
                raise ValueError("table entries must be integers >= 1")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def describe(self):
        if self.kind == "constant":
            return f"constant B={self.B}"
        if self.kind == "geometric":
            return f"geometric q={self.q}"
        if self.kind == "polynomial":
            return f"polynomial theta={self.theta}"
        if self.kind == "power":
            return f"power p={self.p}"
        return f"table ({len(self.values)} entries)"


def constant(B):
    return BatchSchedule("constant", B=int(B))


def geometric(q):
    return BatchSchedule("geometric", q=float(q))


def polynomial(theta):
    return BatchSchedule("polynomial", theta=float(theta))


def power(p):
    return BatchSchedule("power", p=float(p))


def table(values):
    return BatchSchedule("table", values=tuple(int(v) for v in values))


def batch_at(schedule, k):
    """Scheduled batch size at iteration k (deterministic, int >= 1)."""
    if k < 0:
        raise ValueError("iteration index must be >= 0")
    if schedule.kind == "constant":
        return schedule.B
    if schedule.kind == "geometric":
        v = schedule.q ** (-2 * k)
        if math.isinf(v):
            raise OverflowError(f"geometric batch size overflows at k={k}")
        return max(1, math.ceil(v))
    if schedule.kind == "polynomial":
        return max(1, math.ceil((k + 1) ** (2 * schedule.theta)))
    if schedule.kind == "power":
        return max(1, math.ceil(k ** schedule.p))
    if k >= len(schedule.values):
        raise IndexError(f"schedule table has no entry for k={k}")
    return int(schedule.values[k])


@dataclass(frozen=True)
class SummabilityReport:
    summable: "bool | None"   # None: classification unavailable (table)
    partial_sum: float


def is_as_summable(schedule, horizon):
    """Partial sum of 1/N(k) over k < horizon plus a classification.

    Constant schedules diverge; geometric ones are summable; polynomial
    (power) ones are summable iff 2*theta > 1 (p > 1). Tables only get
    the partial-sum report.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    s = 0.0
    for k in range(horizon):
        s += 1.0 / batch_at(schedule, k)
    if schedule.kind == "constant":
        summable = False
    elif schedule.kind == "geometric":
        summable = True
    elif schedule.kind == "polynomial":
        summable = 2 * schedule.theta > 1
    elif schedule.kind == "power":
        summable = schedule.p > 1
    else:
        summable = None
    return SummabilityReport(summable, s)


def cumulative_samples(schedule, K):
    """Sum of N(k) for k = 0..K, exact (arbitrary-precision ints)."""
    if K < 0:
        raise ValueError("K must be >= 0")
    return sum(batch_at(schedule, k) for k in range(K + 1))


def min_schedule_summability(schedules, horizon):
    """Summability report for per-agent schedules via N_min(k).

    When agents draw different batch sizes the summability condition is
    checked on the pointwise minimum across agents.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    s = 0.0
    for k in range(horizon):
        s += 1.0 / min(batch_at(sch, k) for sch in schedules)
    reports = [is_as_summable(sch, 1).summable for sch in schedules]
    if any(r is None for r in reports):
        summable = None
    else:
        summable = all(reports)
    return SummabilityReport(summable, s)
