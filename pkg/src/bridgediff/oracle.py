"""Independent ground truth for the bridge math on scalar Gaussian data.

Three oracles, deliberately built from first principles rather than from
the closed forms they check:

* :func:`grid_bayes_posterior` multiplies the forward-kernel and marginal
  densities numerically on a grid, never touching the posterior algebra.
* :func:`optimal_eps` is the analytic minimum-MSE noise prediction when
  (x0, y) are jointly Gaussian, derived from the regression E[x0 | x_t].
* :func:`exact_reverse_chain` runs the literal reverse recursion
  (coefficient form, endpoint conventions included) with the analytic
  predictor substituted for the network.

Everything here is scalar mathematics; isotropic states factor per
dimension, so scalar coverage is complete. The arithmetic is written with
numpy scalars/ufuncs, so arrays pass through elementwise, which the batch
helpers exploit for vectorized Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .schedule import BridgeSchedule


@dataclass(frozen=True)
class JointGaussianSpec:
    """Joint law of a scalar data/conditioning pair (x0, y)."""

    mean0: float = 0.0
    meany: float = 0.0
    var0: float = 1.0
    vary: float = 1.0
    corr: float = 0.0

    def __post_init__(self):
        for name in ("var0", "vary"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0.0:
                raise ValueError(f"{name} must be finite and positive, got {v}")
        if not -1.0 <= float(self.corr) <= 1.0:
            raise ValueError(f"correlation must lie in [-1, 1], got {self.corr}")

    @property
    def cov(self) -> float:
        return float(self.corr) * math.sqrt(float(self.var0) * float(self.vary))


def grid_bayes_posterior(
    schedule: BridgeSchedule,
    t: int,
    x_t: float,
    x0: float,
    y: float,
    grid_lo: float,
    grid_hi: float,
    n_points: int,
) -> tuple[float, float]:
    """Posterior mean/variance of the previous state by direct density product.

    Evaluates log q(x_t | u, y) + log q(u | x0, y) on a uniform grid of
    candidate previous states u, normalizes, and integrates the first two
    moments. Log densities are accumulated before exponentiation so extreme
    steps do not underflow. The caller chooses the grid; it must span the
    posterior generously (>= 8 posterior standard deviations) for the
    moments to be trustworthy.
    """
    if not 2 <= t <= schedule.T - 1:
        raise ValueError(f"grid oracle needs an interior step 2..T-1, got t={t}")
    n_points = int(n_points)
    if n_points < 2 or not grid_hi > grid_lo:
        raise ValueError("empty grid")
    u = np.linspace(float(grid_lo), float(grid_hi), n_points)

    mix_t = schedule.mix[t]
    mix_prev = schedule.mix[t - 1]
    ratio = (1.0 - mix_t) / (1.0 - mix_prev)
    v_step = schedule.transition_var[t]
    v_prev = schedule.marginal_var[t - 1]

    kernel_mean = ratio * u + (mix_t - ratio * mix_prev) * y
    prior_mean = (1.0 - mix_prev) * x0 + mix_prev * y
    log_w = -((x_t - kernel_mean) ** 2) / (2.0 * v_step)
    log_w -= (u - prior_mean) ** 2 / (2.0 * v_prev)

    peak = int(np.argmax(log_w))
    if peak == 0 or peak == n_points - 1:
        raise ValueError("posterior peak sits on the grid boundary (grid misplaced)")
    log_w -= log_w[peak]
    w = np.exp(log_w)
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise ValueError("grid carries no posterior mass (misplaced bounds?)")
    w /= total
    mean = float(np.dot(w, u))
    var = float(np.dot(w, (u - mean) ** 2))
    return mean, var


def posterior_grid_bounds(
    schedule: BridgeSchedule, t: int, x_t: float, x0: float, y: float,
    width: float = 10.0,
) -> tuple[float, float, float]:
    """Conservative grid limits covering both density factors.

    Returns (lo, hi, sd_fine) where sd_fine is the narrower factor's
    standard deviation, a safe yardstick for choosing the grid resolution.
    """
    if not 2 <= t <= schedule.T - 1:
        raise ValueError(f"grid oracle needs an interior step 2..T-1, got t={t}")
    mix_t = schedule.mix[t]
    mix_prev = schedule.mix[t - 1]
    ratio = (1.0 - mix_t) / (1.0 - mix_prev)
    # Center/scale of each factor viewed as a density in the previous state.
    c_kernel = (x_t - (mix_t - ratio * mix_prev) * y) / ratio
    sd_kernel = math.sqrt(schedule.transition_var[t]) / ratio
    c_prior = (1.0 - mix_prev) * x0 + mix_prev * y
    sd_prior = math.sqrt(schedule.marginal_var[t - 1])
    sd_wide = max(sd_kernel, sd_prior)
    lo = min(c_kernel, c_prior) - width * sd_wide
    hi = max(c_kernel, c_prior) + width * sd_wide
    return lo, hi, min(sd_kernel, sd_prior)


def optimal_eps(spec: JointGaussianSpec, schedule: BridgeSchedule, t: int, x_t):
    """Minimum-MSE prediction of the training target given the state at t.

    For jointly Gaussian (x0, y) the state at step t is Gaussian with

        E[x_t]   = (1-mix) mean0 + mix meany
        Var[x_t] = (1-mix)^2 var0 + mix^2 vary + 2 mix (1-mix) cov + mv_t
        Cov[x0, x_t] = (1-mix) var0 + mix cov

    so E[x0 | x_t] is affine in x_t and the best target prediction is
    x_t - E[x0 | x_t]. Valid for 0 < t <= T (at t = T it reduces to the
    regression of x0 on y). Accepts arrays elementwise.
    """
    if not 0 < t <= schedule.T:
        raise ValueError(f"analytic predictor defined for 0 < t <= T, got t={t}")
    mix = schedule.mix[t]
    mean_t = (1.0 - mix) * spec.mean0 + mix * spec.meany
    var_t = (
        (1.0 - mix) ** 2 * spec.var0
        + mix**2 * spec.vary
        + 2.0 * mix * (1.0 - mix) * spec.cov
        + schedule.marginal_var[t]
    )
    cov_0t = (1.0 - mix) * spec.var0 + mix * spec.cov
    if var_t <= 0.0:
        raise ValueError(f"state variance vanishes at step {t}")
    e_x0 = spec.mean0 + (cov_0t / var_t) * (x_t - mean_t)
    return x_t - e_x0


def exact_reverse_chain(
    spec: JointGaussianSpec,
    schedule: BridgeSchedule,
    y,
    noise_stream,
):
    """Run the full reverse recursion with the analytic predictor.

    Endpoint conventions match the sampler: the move away from t = T draws
    from the step T-1 marginal around the reconstructed data point, interior
    steps use the coefficient-form recursion

        x_{t-1} = coef_state x_t + coef_cond y - coef_noise eps* + sqrt(pv) z

    and the final step (t = 1) injects no noise. ``noise_stream`` is either
    a Generator or a sequence of at least T standard-normal draws (the chain
    consumes T - 1). ``y`` may be an array for vectorized Monte Carlo when a
    Generator is supplied.
    """
    T = schedule.T
    y = np.asarray(y, dtype=np.float64)

    if isinstance(noise_stream, np.random.Generator):
        def draw():
            return noise_stream.standard_normal(y.shape) if y.shape else float(noise_stream.standard_normal())
    else:
        seq = iter(np.asarray(noise_stream, dtype=np.float64).ravel())

        def draw():
            try:
                return next(seq)
            except StopIteration:
                raise ValueError(f"noise stream exhausted; supply at least {T} draws") from None

    x = y + 0.0
    eps = optimal_eps(spec, schedule, T, x)
    x0_hat = x - eps
    x = (
        (1.0 - schedule.mix[T - 1]) * x0_hat
        + schedule.mix[T - 1] * y
        + math.sqrt(schedule.marginal_var[T - 1]) * draw()
    )
    for t in range(T - 1, 1, -1):
        eps = optimal_eps(spec, schedule, t, x)
        x = (
            schedule.coef_state[t] * x
            + schedule.coef_cond[t] * y
            - schedule.coef_noise[t] * eps
            + math.sqrt(schedule.posterior_var[t]) * draw()
        )
    eps = optimal_eps(spec, schedule, 1, x)
    return schedule.coef_state[1] * x + schedule.coef_cond[1] * y - schedule.coef_noise[1] * eps
