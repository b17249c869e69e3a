"""Closed-form theory objects evaluated numerically.

Everything here is pure real arithmetic on problem constants (no
simulation): step-size statistics, the 3x3 contraction matrices whose
spectral radius below one certifies linear convergence in expectation,
admissible step-size bounds, steady-state error bounds for constant
batch sizes, and rate/complexity predictors.

Big-O constants are not predicted; predictors return scaling laws, and
the error-envelope recursion gives concrete numeric envelopes when
seeded with a measured initial error vector.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import schedules as sched_mod


class StepsizeBoundError(ValueError):
    """Step size violates the condition a bound requires."""


# ---------------------------------------------------------------------------
# step-size statistics

@dataclass(frozen=True)
class StepStats:
    """Aggregate statistics of the per-agent step-size vector."""

    alpha_bar: float    # mean step size
    c1: float           # sqrt(sum (alpha_i - mean)^2)
    alpha_max: float
    c2: float           # sqrt(sum alpha_i^2)
    n: int

    @property
    def d_alpha(self):
        """Relative step-size dispersion, zero iff all steps equal."""
        if self.c1 == 0.0:
            return 0.0
        return self.c1 / (math.sqrt(self.n) * self.alpha_bar)

    @classmethod
    def from_alphas(cls, alphas):
        a = np.asarray(alphas, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("need a nonempty step-size vector")
        if (a <= 0).any():
            raise ValueError("step sizes must be positive")
        if (a == a[0]).all():      # keep c1 exactly zero for equal steps
            return cls.identical(a[0], a.size)
        abar = float(a.mean())
        return cls(
            alpha_bar=abar,
            c1=float(np.sqrt(((a - abar) ** 2).sum())),
            alpha_max=float(a.max()),
            c2=float(np.sqrt((a ** 2).sum())),
            n=a.size,
        )

    @classmethod
    def identical(cls, alpha, n):
        """Stats of n identical step sizes (c1 exactly zero).

        Zero is allowed here so limit cases of the closed forms can be
        evaluated; actual runs require positive steps.
        """
        if alpha < 0:
            raise ValueError("step size must be nonnegative")
        return cls(alpha_bar=float(alpha), c1=0.0, alpha_max=float(alpha),
                   c2=math.sqrt(n) * float(alpha), n=int(n))


# ---------------------------------------------------------------------------
# contraction factors and matrices

def lemma2_stepsize_limit(rho1, L):
    """Largest step size under which rho2 stays below one."""
    return (1.0 - rho1) ** 2 / ((2.0 - rho1) * L)


def rho2(rho1, alpha_max, L):
    """Contraction factor of the coupled consensus-error recursion.

    Below one whenever alpha_max < (1-rho1)^2 / ((2-rho1) L); above
    that limit the returned value may reach or exceed one and the
    caller should treat the recursion as non-contracting.
    """
    aL = alpha_max * L
    val = (2.0 * rho1 + aL + math.sqrt(aL * aL + 4.0 * aL)) / 2.0
    if alpha_max < lemma2_stepsize_limit(rho1, L):
        assert val < 1.0
    return val


def j_matrix(stats, rho1, eta, L):
    """3x3 error-propagation matrix for heterogeneous step sizes.

    Rows act on (optimality gap, x-consensus error, y-consensus error).
    Valid under 0 < alpha_i <= 2/(eta+L); use `j_hypothesis_ok` to check.
    """
    abar, c1, amax, c2 = stats.alpha_bar, stats.c1, stats.alpha_max, stats.c2
    rn = math.sqrt(stats.n)
    return np.array([
        [1.0 - abar * eta, abar * L / rn,        c1 / stats.n],
        [c1 * L,           rho1 + c1 * L / rn,   amax],
        [c2 * L ** 2,      L + c2 * L ** 2 / rn, rho1 + amax * L],
    ])


def j_hypothesis_ok(stats, eta, L):
    return 0.0 < stats.alpha_max <= 2.0 / (eta + L)


def j_hat_matrix(alpha, rho1, eta, L, n):
    """Identical-step specialization of the error-propagation matrix."""
    return j_matrix(StepStats.identical(alpha, n), rho1, eta, L)


def spectral_radius_3x3(M):
    """Largest eigenvalue modulus of a real 3x3 matrix.

    Solved through the characteristic cubic (trigonometric form for
    three real roots, Cardano otherwise) with a Newton polish, so it is
    independent of any general eigenvalue routine and can serve as an
    oracle for them on 3x3 cases.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise ValueError("expected a 3x3 matrix")
    a, b, c, = M[0]
    d, e, f = M[1]
    g, h, i = M[2]
    tr = a + e + i
    m2 = (a * e - b * d) + (a * i - c * g) + (e * i - f * h)
    det = (a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g))

    # lambda^3 - tr lambda^2 + m2 lambda - det = 0
    def poly(x):
        return ((x - tr) * x + m2) * x - det

    def dpoly(x):
        return (3.0 * x - 2.0 * tr) * x + m2

    def polish(x):
        for _ in range(3):
            fx = poly(x)
            dfx = dpoly(x)
            if dfx == 0.0:
                break
            step = fx / dfx
            x -= step
            if abs(step) <= 1e-15 * (1.0 + abs(x)):
                break
        return x

    shift = tr / 3.0
    p = m2 - tr * tr / 3.0
    q = -det + tr * (m2 - 2.0 * tr * tr / 9.0) / 3.0  # poly(shift)
    scale = max(abs(tr), abs(m2), abs(det), 1.0)
    if abs(p) <= 1e-14 * scale and abs(q) <= 1e-14 * scale ** 1.5:
        return abs(shift)  # triple root
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc <= 0.0:
        # three real roots (trigonometric form)
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        arg = min(1.0, max(-1.0, arg))
        theta = math.acos(arg) / 3.0
        roots = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) + shift
                 for k in range(3)]
        return max(abs(polish(r)) for r in roots)
    # one real root + complex pair
    s = math.sqrt(disc)
    u = math.copysign(abs(-q / 2.0 + s) ** (1.0 / 3.0), -q / 2.0 + s)
    v = math.copysign(abs(-q / 2.0 - s) ** (1.0 / 3.0), -q / 2.0 - s)
    r = polish(u + v + shift)
    # deflate: remaining quadratic x^2 + p2 x + q2 holds the complex pair
    p2 = r - tr
    q2 = m2 + r * p2
    disc2 = p2 * p2 - 4.0 * q2
    if disc2 < 0.0:
        pair_mod = math.sqrt(q2)  # |pair|^2 equals the root product
        return max(abs(r), pair_mod)
    s2 = math.sqrt(disc2)
    return max(abs(r), abs(polish((-p2 + s2) / 2.0)),
               abs(polish((-p2 - s2) / 2.0)))


# ---------------------------------------------------------------------------
# admissible step-size bounds

def stepsize_bound_convex(rho1, L):
    """Admissible identical step size for merely convex objectives.

    With c0 = (1-rho1)^2/(2-rho1), returns the smaller root of
    L^2 a^2 - (c0+1+2 sqrt(3) L) L a + c0, evaluated in a cancellation-
    free form. Always below c0/L.
    """
    if not (0.0 <= rho1 < 1.0):
        raise ValueError("rho1 must lie in [0, 1)")
    if L <= 0:
        raise ValueError("L must be positive")
    c0 = (1.0 - rho1) ** 2 / (2.0 - rho1)
    bcoef = c0 + 1.0 + 2.0 * math.sqrt(3.0) * L
    return 2.0 * c0 / (L * (bcoef + math.sqrt(bcoef * bcoef - 4.0 * c0)))


def stepsize_bound_strongly_convex(rho1, eta, L, d_alpha):
    """Admissible range of alpha_i * L for heterogeneous step sizes.

    Returns (beta_star, second_term); admissible step sizes satisfy
    alpha_i L < min(beta_star, second_term). beta_star is the positive
    root of c3 b^2 + c4 b - (1-rho1)^2 (the value at which the
    error-propagation matrix stops contracting); the second term caps
    the dispersion effect and is infinite for identical steps.
    """
    if not (0.0 <= rho1 < 1.0):
        raise ValueError("rho1 must lie in [0, 1)")
    if eta <= 0 or L <= 0:
        raise ValueError("eta and L must be positive")
    if d_alpha < 0:
        raise ValueError("d_alpha must be nonnegative")
    kappa = L / eta
    s = math.sqrt(d_alpha ** 2 + 1.0)
    c3 = s * (1.0 + kappa * d_alpha ** 2) + kappa * s
    c4 = ((1.0 + (kappa + 1.0) * d_alpha) * (1.0 - rho1)
          + 1.0 + kappa * d_alpha ** 2
          + kappa * s * d_alpha * (1.0 - rho1))
    r2 = (1.0 - rho1) ** 2
    beta_star = 2.0 * r2 / (c4 + math.sqrt(c4 * c4 + 4.0 * c3 * r2))
    if d_alpha == 0.0:
        second = math.inf
    else:
        second = (1.0 - rho1) / (d_alpha * kappa * (L + eta))
    return beta_star, second


def stepsize_bound_identical(rho1, eta, L):
    """Admissible identical step size for strongly convex objectives."""
    beta_star, _ = stepsize_bound_strongly_convex(rho1, eta, L, 0.0)
    return beta_star / L


# ---------------------------------------------------------------------------
# determinant identity and steady-state bounds (identical steps)

def det_identity_check(rho1, eta, L, alpha):
    """Numeric vs closed-form determinant of I - J_hat(alpha).

    Returns (lhs, rhs) with lhs the numeric determinant and rhs
    -(beta/kappa)((1+kappa) beta^2 + (2-rho1) beta - (1-rho1)^2),
    beta = alpha L. The two agree identically in exact arithmetic.
    """
    n = 4  # determinant of I - J_hat does not depend on n
    Jh = j_hat_matrix(alpha, rho1, eta, L, n)
    lhs = float(np.linalg.det(np.eye(3) - Jh))
    beta = alpha * L
    kappa = L / eta
    rhs = -(beta / kappa) * ((1.0 + kappa) * beta ** 2
                             + (2.0 - rho1) * beta - (1.0 - rho1) ** 2)
    return lhs, rhs


def steady_state_denominator(rho1, kappa, beta):
    return (1.0 - rho1) ** 2 - (1.0 + kappa) * beta ** 2 - (2.0 - rho1) * beta


def steady_state_bounds(rho1, eta, L, alpha, B, nu, n):
    """Asymptotic error bounds for constant batch size B.

    Returns (x_bar_bound, consensus_bound): limits superior of the mean
    optimality gap and of the mean x-consensus error. Both scale as
    1/sqrt(B). Raises StepsizeBoundError when alpha violates the
    identical-step admissibility condition (denominator <= 0).
    """
    if B < 1:
        raise ValueError("batch size must be >= 1")
    kappa = L / eta
    beta = alpha * L
    denom = steady_state_denominator(rho1, kappa, beta)
    if denom <= 0:
        raise StepsizeBoundError(
            f"step size {alpha} violates the identical-step condition "
            f"(denominator {denom:.3e} <= 0)")
    common = math.sqrt(B) * eta * denom
    xbar = nu * ((1.0 - rho1) ** 2 + rho1 * beta) / common
    cons = alpha * math.sqrt(n) * nu * (alpha * L ** 2 + eta * (2.0 + beta)) / common
    return xbar, cons


# ---------------------------------------------------------------------------
# error-envelope recursion

def noise_envelope(J, z0, forcing, gamma, K):
    """Iterate z(k+1) = J z(k) + forcing * gamma^k for k = 0..K-1.

    Returns an array of shape (K+1, 3) starting at z0. Seeding z0 with a
    measured initial error vector gives a concrete component-wise upper
    envelope for the mean error trajectory.
    """
    J = np.asarray(J, dtype=float)
    out = np.empty((K + 1, 3))
    out[0] = z0
    b = np.asarray(forcing, dtype=float)
    g = 1.0
    for k in range(K):
        out[k + 1] = J @ out[k] + b * g
        g *= gamma
    return out


def geometric_forcing(stats, nu, L, q):
    """Forcing vector for geometric batch growth N(k) = ceil(q^(-2k))."""
    rn = math.sqrt(stats.n)
    return np.array([
        stats.alpha_bar * nu,
        stats.c1 * nu,
        rn * nu * (1.0 + q) + stats.c2 * L * nu,
    ])


def constant_forcing(stats, nu, L, B):
    """Forcing vector for constant batch size B (gamma = 1)."""
    rn = math.sqrt(stats.n)
    return np.array([
        stats.alpha_bar * nu,
        stats.c1 * nu,
        2.0 * rn * nu + stats.c2 * L * nu,
    ]) / math.sqrt(B)


# ---------------------------------------------------------------------------
# rate and complexity predictors

@dataclass
class RatePrediction:
    kind: str                   # "geometric" | "polynomial" | "constant"
    base: "float | None" = None        # geometric decay base
    exponent: "float | None" = None    # polynomial decay exponent
    plateau: "tuple | None" = None     # steady-state bounds (constant B)
    asymptote_coef: "np.ndarray | None" = None  # z(k) ~ coef * q^(k-1)
    note: str = ""


def rate_predict(schedule, rho_J, *, identical_alpha=None, L=None, n=None,
                 nu=None, J_hat=None, steady=None):
    """Predicted decay law of the mean error vector for a schedule.

    Geometric schedules decay at base max(rho_J, q); polynomial ones at
    k^(-theta); constant batches approach the steady-state bounds at
    base rho(J_hat). For identical steps with q > rho(J_hat) the
    asymptotic coefficient vector of the noise-driven term is included
    (z(k) ~ coef * q^(k-1)).
    """
    if schedule.kind == "geometric":
        q = schedule.q
        pred = RatePrediction(kind="geometric", base=max(rho_J, q))
        have_asymptote_inputs = (J_hat is not None and identical_alpha is not None
                                 and nu is not None and L is not None and n is not None)
        if have_asymptote_inputs:
            rhoh = spectral_radius_3x3(J_hat)
            if q > rhoh:
                alpha = identical_alpha
                vec = np.array([alpha, 0.0,
                                (1.0 + q + alpha * L) * math.sqrt(n)])
                coef = nu * np.linalg.solve(np.eye(3) - J_hat / q, vec)
                pred.asymptote_coef = coef
            else:
                pred.note = "q <= rho(J_hat); noise asymptote omitted"
        return pred
    if schedule.kind in ("polynomial", "power"):
        theta = schedule.theta if schedule.kind == "polynomial" else schedule.p / 2.0
        return RatePrediction(kind="polynomial", exponent=theta)
    if schedule.kind == "constant":
        return RatePrediction(kind="constant", base=rho_J, plateau=steady)
    return RatePrediction(kind=schedule.kind,
                          note="no closed-form rate for table schedules")


@dataclass
class ComplexityPrediction:
    regime: str
    iterations: float
    samples: "int | float"
    communications: float
    note: str = "scaling law; constants omitted (set by the unknown big-O factor)"


def complexity_predict(schedule, rho_J, epsilon, mean_comm_rounds, C=1.0):
    """Iterations, oracle calls, and communications to reach accuracy eps.

    Geometric schedules: with q > rho(J) the iteration count scales as
    ln(C/eps)/ln(1/q) and the sample count as 1/eps^2; with q < rho(J)
    the decay is set by rho(J) and the sample count follows
    (1/eps)^(2 ln(1/q)/ln(1/rho)). Polynomial schedules give
    (1/eps)^(1/theta) iterations and (1/eps)^(2+1/theta) samples.
    Communications are 2 x (expected per-round messages) x iterations.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if schedule.kind == "geometric":
        q = schedule.q
        decay = max(rho_J, q) if rho_J < 1.0 else None
        if decay is None or decay >= 1.0:
            raise StepsizeBoundError("rho(J) >= 1: no geometric decay predicted")
        K = max(0, math.ceil(math.log(C / epsilon) / math.log(1.0 / decay)))
        samples = sched_mod.cumulative_samples(schedule, K)
        regime = "geometric-i" if q > rho_J else "geometric-ii"
        return ComplexityPrediction(regime, K, samples, mean_comm_rounds * K)
    if schedule.kind in ("polynomial", "power"):
        theta = schedule.theta if schedule.kind == "polynomial" else schedule.p / 2.0
        K = max(1, math.ceil((C / epsilon) ** (1.0 / theta)))
        samples = sched_mod.cumulative_samples(schedule, K)
        return ComplexityPrediction("polynomial", K, samples,
                                    mean_comm_rounds * K)
    if schedule.kind == "constant":
        if rho_J >= 1.0:
            raise StepsizeBoundError("rho(J) >= 1: no decay predicted")
        K = max(0, math.ceil(math.log(C / epsilon) / math.log(1.0 / rho_J)))
        samples = sched_mod.cumulative_samples(schedule, K)
        return ComplexityPrediction(
            "constant", K, samples, mean_comm_rounds * K,
            note="valid down to the steady-state plateau only")
    raise ValueError(f"no complexity prediction for {schedule.kind!r} schedules")


# ---------------------------------------------------------------------------
# aggregated report

def build_report(rho1, eta, L, nu, n, alphas, schedule, mean_comm_rounds,
                 epsilon=1e-3):
    """Assemble every theory quantity into one JSON-serializable dict.

    Purely descriptive: inadmissible inputs produce warnings rather than
    errors, so the report can be used to diagnose a bad configuration.
    """
    stats = StepStats.from_alphas(alphas)
    kappa = L / eta if eta > 0 else math.inf
    warnings = []

    J = j_matrix(stats, rho1, eta, L)
    rho_J = spectral_radius_3x3(J)
    if not j_hypothesis_ok(stats, eta, L):
        warnings.append("step sizes exceed 2/(eta+L); the error-propagation "
                        "matrix is outside its validity range")

    identical = stats.c1 == 0.0
    J_hat = j_hat_matrix(stats.alpha_bar, rho1, eta, L, n) if identical else None
    rho_J_hat = spectral_radius_3x3(J_hat) if identical else None

    lemma2_limit = lemma2_stepsize_limit(rho1, L)
    rho2_val = rho2(rho1, stats.alpha_max, L) if stats.alpha_max < lemma2_limit else None
    if rho2_val is None:
        warnings.append("alpha_max exceeds the consensus-contraction limit "
                        "(rho2 would reach 1)")

    bounds = {}
    if 0.0 <= rho1 < 1.0:
        bounds["convex"] = stepsize_bound_convex(rho1, L)
        if eta > 0:
            beta_star, second = stepsize_bound_strongly_convex(
                rho1, eta, L, stats.d_alpha)
            bounds["strongly_convex"] = {
                "beta_star": beta_star,
                "second_term": None if math.isinf(second) else second,
                "alpha_limit": min(beta_star, second) / L,
            }
            bounds["identical"] = stepsize_bound_identical(rho1, eta, L)
            if stats.alpha_max * L >= min(beta_star, second):
                warnings.append("step sizes exceed the strongly convex "
                                "admissibility bound; rho(J) < 1 is not "
                                "guaranteed")
    else:
        warnings.append("rho1 outside (0, 1); step-size bounds undefined")

    steady = None
    if schedule.kind == "constant" and identical and eta > 0:
        try:
            steady = steady_state_bounds(
                rho1, eta, L, stats.alpha_bar, schedule.B, nu, n)
        except StepsizeBoundError as exc:
            warnings.append(str(exc))

    rate = rate_predict(
        schedule, rho_J, identical_alpha=stats.alpha_bar if identical else None,
        L=L, n=n, nu=nu, J_hat=J_hat,
        steady=steady)
    try:
        complexity = complexity_predict(schedule, rho_J, epsilon, mean_comm_rounds)
    except (StepsizeBoundError, ValueError) as exc:
        complexity = None
        warnings.append(f"complexity prediction unavailable: {exc}")

    report = {
        "rho1": rho1,
        "rho2": rho2_val,
        "eta": eta,
        "L": L,
        "kappa": None if math.isinf(kappa) else kappa,
        "nu": nu,
        "n": n,
        "step_stats": {
            "alpha_bar": stats.alpha_bar, "c1": stats.c1, "c2": stats.c2,
            "alpha_max": stats.alpha_max, "d_alpha": stats.d_alpha,
        },
        "J": J.tolist(),
        "rho_J": rho_J,
        "J_hat": J_hat.tolist() if J_hat is not None else None,
        "rho_J_hat": rho_J_hat,
        "lemma2_stepsize_limit": lemma2_limit,
        "stepsize_bounds": bounds,
        "steady_state": None if steady is None else {
            "x_bar_bound": steady[0], "consensus_bound": steady[1],
            "B": schedule.B,
        },
        "rate": {
            "kind": rate.kind, "base": rate.base, "exponent": rate.exponent,
            "asymptote_coef": (rate.asymptote_coef.tolist()
                               if rate.asymptote_coef is not None else None),
            "note": rate.note,
        },
        "complexity": None if complexity is None else {
            "regime": complexity.regime,
            "epsilon": epsilon,
            "iterations": complexity.iterations,
            "samples": (float(complexity.samples)
                        if complexity.samples < 10 ** 300 else math.inf),
            "communications": complexity.communications,
            "note": complexity.note,
        },
        "schedule": schedule.describe(),
        "warnings": warnings,
        "schema_version": 1,
    }
    return report
