"""Precomputed stepping tables for the Euler engine.

The simulator evolves the split system (branching block first, then the
real block) by explicit Euler with full truncation: branching coordinates
are clamped at zero inside every coefficient and projected to zero after
each step.  Jumps below the truncation threshold ``eps`` are dropped; the
drift is corrected so that the mean dynamics of the simulated process match
the generator exactly on everything that is representable:

* state-independent measure: jumps with ``|xi| > eps`` are simulated raw.
  The generator compensates only the real coordinates of small jumps, so
  the drift subtracts the real-coordinate mean of the band
  ``eps < |xi| <= 1``.  The dropped branching-coordinate mass below ``eps``
  is a positive bias, reported in :attr:`StepModel.bias` rather than folded
  into the drift.
* branching measures: the generator compensates small jumps in full, so the
  effective linear drift column ``i`` is
  ``beta[:, i] - int_{|xi| > eps} xi mu_i`` and dropping the compensated
  band below ``eps`` leaves the mean exact; the residual diffusion-scale
  bias is reported.

Everything the per-step loop needs is baked into plain float64 arrays so
the compiled kernel and the pure-Python stepper read identical data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..levy import PreparedSampler
from ..linalg import build_factors
from ..params import AdmissibleParameters

__all__ = ["SchemeSettings", "StepModel", "ExplosionError"]

OVERFLOW_GUARD = 1e12
MAX_STEP_INTENSITY = 1e7


class ExplosionError(ArithmeticError):
    """State exceeded the overflow guard; carries the blow-up time."""

    def __init__(self, t: float, what: str = "state overflow"):
        super().__init__(f"{what} at t = {t:.6g}")
        self.time = t


@dataclass(frozen=True)
class SchemeSettings:
    """Discretization controls: step, jump truncation, horizon."""

    step: float
    horizon: float
    truncation: float = 1e-3
    nonnegativity: str = "full-truncation"

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.truncation <= 0:
            raise ValueError("truncation must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.nonnegativity != "full-truncation":
            raise ValueError("only full-truncation mode is implemented")

    @property
    def n_steps(self) -> int:
        k = int(round(self.horizon / self.step))
        if abs(k * self.step - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ValueError("horizon must be an integer multiple of the step")
        return k

    def step_of_time(self, t: float) -> int:
        k = int(round(t / self.step))
        if abs(k * self.step - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= k <= self.n_steps:
            raise ValueError(f"time {t} is not on the step grid")
        return k


@dataclass
class StepModel:
    """Flattened per-step data derived from (parameters, scheme settings)."""

    m: int
    n: int
    drift_c: np.ndarray
    drift_B: np.ndarray
    sigma_a: np.ndarray
    sigma: np.ndarray  # (m, d, d)
    use_common: bool
    use_diff: np.ndarray  # (m,) uint8
    nu_rate: float
    nu_sampler: PreparedSampler | None
    mu_rate: np.ndarray  # (m,)
    mu_samplers: list
    bias: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.m + self.n

    @classmethod
    def build(cls, params: AdmissibleParameters, settings: SchemeSettings) -> "StepModel":
        dims = params.dims
        m, n, d = dims.m, dims.n, dims.d
        eps = settings.truncation

        factors = build_factors(params)
        sigma = (
            np.ascontiguousarray(np.stack(factors.sigma), dtype=float)
            if m
            else np.zeros((0, d, d))
        )
        sigma_a = np.ascontiguousarray(factors.sigma_a, dtype=float)
        use_common = bool(n and np.any(sigma_a != 0.0))
        use_diff = np.asarray(
            [np.any(sigma[i] != 0.0) for i in range(m)], dtype=np.uint8
        )

        drift_c = params.b.astype(float).copy()
        bias: dict = {}
        if not params.nu.is_zero:
            if eps < 1.0:
                band = params.nu.mean_vector(eps, 1.0, d)
                drift_c[m:] -= band[m:]
            dropped_pos = np.array(
                [params.nu.mean_component(i, 0.0, eps) for i in range(m)]
            )
            bias["dropped_branching_drift"] = dropped_pos
            bias["dropped_small_nu_variance"] = params.nu.second_moment_band(0.0, eps)

        drift_B = params.beta.astype(float).copy()
        mu_rate = np.zeros(m)
        mu_samplers: list = []
        dropped_mu = np.zeros(m)
        for i in range(m):
            mu_i = params.mu[i]
            if mu_i.is_zero:
                mu_samplers.append(None)
                continue
            drift_B[:, i] -= mu_i.mean_vector(eps, np.inf, d)
            mu_rate[i] = mu_i.tail_mass(eps)
            mu_samplers.append(PreparedSampler(mu_i, eps, d))
            dropped_mu[i] = mu_i.second_moment_band(0.0, eps)
        if m:
            bias["dropped_small_mu_variance"] = dropped_mu

        nu_rate = 0.0
        nu_sampler = None
        if not params.nu.is_zero:
            nu_rate = params.nu.tail_mass(eps)
            if nu_rate > 0:
                nu_sampler = PreparedSampler(params.nu, eps, d)

        return cls(
            m=m,
            n=n,
            drift_c=np.ascontiguousarray(drift_c),
            drift_B=np.ascontiguousarray(drift_B),
            sigma_a=sigma_a,
            sigma=sigma,
            use_common=use_common,
            use_diff=use_diff,
            nu_rate=float(nu_rate),
            nu_sampler=nu_sampler,
            mu_rate=mu_rate,
            mu_samplers=mu_samplers,
            bias=bias,
        )

    def source_usage(self):
        """Which noise sources the stepper will actually consume."""
        return {
            "B": self.use_common,
            "W": [bool(f) for f in self.use_diff],
            "M": self.nu_rate > 0.0,
            "N": [r > 0.0 for r in self.mu_rate],
        }
