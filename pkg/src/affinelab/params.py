"""Parameter types and admissibility validation for affine jump-diffusions.

The state space is ``D = R_+^m x R^n``.  A model is described by the tuple
``(a, alpha, b, beta, nu, mu)``:

* ``a``      -- constant diffusion matrix (only the ``R^n`` block may be nonzero),
* ``alpha``  -- per-branching-coordinate diffusion matrices ``alpha_1..alpha_m``,
* ``b``      -- constant drift, which must point into the state space,
* ``beta``   -- linear drift matrix with nonnegative cross feeding between
  branching coordinates (after subtracting the mean jump displacement),
* ``nu``     -- state-independent jump measure,
* ``mu``     -- state-dependent (branching) jump measures ``mu_1..mu_m``.

``validate`` checks the full set of structural and integrability conditions
that make the tuple admissible, i.e. that guarantee a conservative Feller
process living on ``D``.  Every violated condition is reported with the
offending index; an empty report means the parameters are admissible.

Validation is pure and idempotent; parameter objects are immutable after
construction and safe to share between simulation workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .levy import JumpMeasure, ZERO_MEASURE

__all__ = [
    "StateDims",
    "AdmissibleParameters",
    "Violation",
    "ValidationReport",
    "DimensionError",
    "validate",
    "subcriticality_margin",
    "effective_drift",
]

# Eigenvalue floor for positive-semidefiniteness checks is scaled by the
# trace so that round-off on large matrices does not produce spurious
# violations.
PSD_FLOOR_SCALE = 1e-10


class DimensionError(ValueError):
    """Structurally inconsistent input (wrong shapes), as opposed to an
    admissibility violation of well-formed input."""


@dataclass(frozen=True)
class StateDims:
    """Dimensions of the canonical state space ``R_+^m x R^n``."""

    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise DimensionError("m and n must be nonnegative")
        if self.m + self.n == 0:
            raise DimensionError("total dimension must be positive")

    @property
    def d(self) -> int:
        return self.m + self.n

    @property
    def idx_pos(self) -> range:
        """Indices of the nonnegative (branching) coordinates."""
        return range(self.m)

    @property
    def idx_real(self) -> range:
        """Indices of the unconstrained coordinates."""
        return range(self.m, self.m + self.n)


def _as_matrix(x, d: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (d, d):
        raise DimensionError(f"{name} must be {d}x{d}, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class AdmissibleParameters:
    """Full parameter tuple of an affine model on ``R_+^m x R^n``.

    Construction enforces shape consistency only; call :func:`validate` to
    check admissibility.  All arrays are copied and frozen.
    """

    dims: StateDims
    a: np.ndarray
    alpha: tuple
    b: np.ndarray
    beta: np.ndarray
    nu: JumpMeasure = ZERO_MEASURE
    mu: tuple = ()

    def __post_init__(self):
        d, m = self.dims.d, self.dims.m
        a = _as_matrix(self.a, d, "a")
        beta = _as_matrix(self.beta, d, "beta")
        b = np.asarray(self.b, dtype=float)
        if b.shape != (d,):
            raise DimensionError(f"b must have length {d}, got {b.shape}")
        alpha = tuple(_as_matrix(al, d, f"alpha[{i}]") for i, al in enumerate(self.alpha))
        if len(alpha) != m:
            raise DimensionError(f"alpha must contain {m} matrices, got {len(alpha)}")
        mu = tuple(self.mu) if self.mu else tuple(ZERO_MEASURE for _ in range(m))
        if len(mu) != m:
            raise DimensionError(f"mu must contain {m} measures, got {len(mu)}")
        if self.nu.dim not in (0, d):
            raise DimensionError(f"nu has dimension {self.nu.dim}, state has {d}")
        for i, mi in enumerate(mu):
            if mi.dim not in (0, d):
                raise DimensionError(f"mu[{i}] has dimension {mi.dim}, state has {d}")
        for arr in (a, beta, b) + alpha:
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "mu", mu)

    # Block views -------------------------------------------------------

    def a_real_block(self) -> np.ndarray:
        """The ``n x n`` block of ``a`` acting on the real coordinates."""
        r = self.dims.idx_real
        return self.a[np.ix_(r, r)]

    def beta_blocks(self):
        """Return (beta_II, beta_IJ, beta_JI, beta_JJ)."""
        p, r = self.dims.idx_pos, self.dims.idx_real
        return (
            self.beta[np.ix_(p, p)],
            self.beta[np.ix_(p, r)],
            self.beta[np.ix_(r, p)],
            self.beta[np.ix_(r, r)],
        )


@dataclass(frozen=True)
class Violation:
    """One violated admissibility condition."""

    condition: str
    index: tuple
    message: str

    def __str__(self):
        where = f" at {self.index}" if self.index else ""
        return f"[{self.condition}]{where}: {self.message}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return not self.violations

    def add(self, condition: str, index: tuple, message: str):
        self.violations.append(Violation(condition, index, message))

    def conditions(self) -> set:
        return {v.condition for v in self.violations}

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)


def _psd_violation(mat: np.ndarray) -> float | None:
    """Return the most negative eigenvalue if below the tolerance floor."""
    sym = 0.5 * (mat + mat.T)
    if not np.allclose(mat, mat.T, atol=1e-12, rtol=0.0):
        return -np.inf
    w = np.linalg.eigvalsh(sym)
    floor = -PSD_FLOOR_SCALE * (1.0 + abs(np.trace(sym)))
    return float(w[0]) if w[0] < floor else None


def validate(params: AdmissibleParameters, quad_rtol: float = 1e-6) -> ValidationReport:
    """Check every admissibility condition and report all violations.

    Conditions, with the report codes used below:

    * ``a-block``      -- ``a`` PSD with zero blocks touching the branching
      coordinates (only the real-coordinate block may be nonzero).
    * ``alpha-block``  -- each ``alpha_i`` PSD, and zero on any row/column
      belonging to a branching coordinate other than ``i``.
    * ``b-domain``     -- constant drift points into ``D`` (``b_i >= 0`` on
      branching coordinates).
    * ``beta-block``   -- no feedback from real into branching coordinates,
      and ``beta_ki >= mean displacement of mu_i in coordinate k`` for
      branching coordinates ``k != i``.
    * ``nu-integrability``  -- ``nu`` integrates ``1 ^ |xi|^2`` plus
      ``1 ^ xi_i`` on each branching coordinate, with no mass at the origin.
    * ``mu-integrability``  -- each ``mu_i`` integrates ``|xi| ^ |xi|^2``
      plus the off-``i`` branching coordinates, with no mass at the origin.

    Measure components that declare their moments analytically are checked
    in closed form; tabulated components fall back to quadrature at relative
    tolerance ``quad_rtol``.
    """
    report = ValidationReport()
    dims = params.dims
    m = dims.m
    pos = list(dims.idx_pos)

    # a: PSD with only the real-real block nonzero
    bad = _psd_violation(params.a)
    if bad is not None:
        report.add("a-block", (), f"a is not PSD (min eigenvalue {bad:.3e})")
    for k in range(dims.d):
        for l in range(dims.d):
            if (k in pos or l in pos) and params.a[k, l] != 0.0:
                report.add("a-block", (k, l), "a must vanish on branching rows/columns")

    # alpha_i: PSD with the branching block supported on the (i, i) entry
    for i in range(m):
        al = params.alpha[i]
        bad = _psd_violation(al)
        if bad is not None:
            report.add("alpha-block", (i,), f"alpha[{i}] is not PSD (min eigenvalue {bad:.3e})")
        for k in range(dims.d):
            for l in range(dims.d):
                if ((k in pos and k != i) or (l in pos and l != i)) and al[k, l] != 0.0:
                    report.add(
                        "alpha-block",
                        (i, k, l),
                        f"alpha[{i}] must vanish outside branching coordinate {i}",
                    )

    # b in D
    for i in pos:
        if params.b[i] < 0.0:
            report.add("b-domain", (i,), f"b[{i}] = {params.b[i]} < 0")

    # beta: real -> branching block zero; cross-feeding dominated by beta
    for i in pos:
        for j in dims.idx_real:
            if params.beta[i, j] != 0.0:
                report.add("beta-block", (i, j), "beta must not feed real coordinates into branching ones")
    for i in range(m):
        mu_i = params.mu[i]
        for k in pos:
            if k == i:
                continue
            try:
                disp = mu_i.mean_component(k, 0.0, np.inf)
            except ValueError as exc:
                report.add("mu-integrability", (i, k), str(exc))
                continue
            if params.beta[k, i] - disp < 0.0:
                report.add(
                    "beta-block",
                    (k, i),
                    f"beta[{k},{i}] = {params.beta[k, i]} is below the mean jump displacement {disp:.6g}",
                )

    # nu integrability
    for msg in params.nu.admissibility_errors_state_independent(pos, rtol=quad_rtol):
        report.add("nu-integrability", (), msg)

    # mu_i integrability
    for i in range(m):
        for msg in params.mu[i].admissibility_errors_branching(i, pos, rtol=quad_rtol):
            report.add("mu-integrability", (i,), msg)

    return report


def subcriticality_margin(beta: np.ndarray) -> float:
    """Negative spectral abscissa of ``beta``.

    Positive iff every eigenvalue of ``beta`` has negative real part, in
    which case the affine model is subcritical and the return value is the
    slowest mean-reversion rate.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 2 or beta.shape[0] != beta.shape[1]:
        raise DimensionError("beta must be square")
    eigs = np.linalg.eigvals(beta)
    return float(-np.max(eigs.real))


def effective_drift(params: AdmissibleParameters) -> tuple:
    """Drift pair ``(b_tilde, beta_tilde)`` used by the pathwise equation.

    ``b_tilde`` adds the small-jump mass of ``nu`` on the branching
    coordinates; ``beta_tilde`` subtracts the mean large-jump displacement
    of each ``mu_i`` from column ``i``.  Computed on demand so the stored
    parameters remain the single source of truth.
    """
    dims = params.dims
    b_t = params.b.copy()
    for i in dims.idx_pos:
        b_t[i] += params.nu.mean_component(i, 0.0, 1.0)
    beta_t = params.beta.copy()
    for i in range(dims.m):
        beta_t[:, i] -= params.mu[i].mean_vector(1.0, np.inf)
    return b_t, beta_t
