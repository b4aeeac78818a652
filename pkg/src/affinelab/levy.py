"""Jump-measure representations with sampling, moments, and exponents.

A :class:`JumpMeasure` is a finite sum of components, each one of

* :class:`PointMasses`      -- finitely many atoms with positive weights,
* :class:`StableTail`       -- ``c * dz / z^(1+gamma)`` along one coordinate
  axis (one-sided power tail, the workhorse for branching jump measures),
* :class:`TabulatedDensity` -- a one-dimensional density given numerically
  on a knot grid, placed along one axis.

Every component reports, analytically where possible:

* tail mass above a threshold,
* partial first/second moments over bands ``lo < |xi| <= hi``,
* the logarithmic tail moment ``int_{|xi|>1} log|xi|``,
* the exponential integrals entering the Levy-Khintchine exponents,
* a truncated sampler (inverse-CDF based) for compound-Poisson simulation.

Conventions for the exponent integrals:

* state-independent measures are compensated only in the real coordinates
  and only for jumps of norm at most one,
* branching measures are fully compensated (the integrand is
  ``exp(<u,xi>) - 1 - <u,xi>``),

matching the two integrability regimes of admissible parameters.  Requesting
a moment that diverges under the declared component parameters raises
:class:`DivergentMomentError` rather than returning garbage; in particular
the uncompensated small-jump first moment of a power tail with exponent
``gamma >= 1`` is rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "JumpMeasure",
    "PointMasses",
    "StableTail",
    "TabulatedDensity",
    "ZERO_MEASURE",
    "PreparedSampler",
    "DivergentMomentError",
    "TransformDomainError",
    "tail_mass",
    "sample_jump",
    "compensator_moment",
    "log_moment",
    "exponent_F",
    "exponent_R",
    "check_transform_domain",
]

DOMAIN_TOL = 1e-12


class DivergentMomentError(ValueError):
    """A requested moment is infinite for the given component parameters."""


class TransformDomainError(ValueError):
    """Transform argument outside the admissible half-space."""


def check_transform_domain(u, m: int) -> np.ndarray:
    """Validate ``Re u <= 0`` on branching and ``Re u = 0`` on real coordinates."""
    u = np.asarray(u, dtype=complex)
    if np.any(u.real[:m] > DOMAIN_TOL):
        raise TransformDomainError("real part must be <= 0 on branching coordinates")
    if np.any(np.abs(u.real[m:]) > DOMAIN_TOL):
        raise TransformDomainError("real part must vanish on real coordinates")
    return u


def _stable_power(w: complex, gamma: float) -> complex:
    # principal branch of w^gamma on Re w >= 0
    if w == 0:
        return 0.0 + 0.0j
    return complex(w) ** gamma


# ---------------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointMasses:
    """Finitely many atoms ``xi_k`` with weights ``w_k > 0``."""

    atoms: tuple  # tuple of coordinate tuples
    weights: tuple

    def __post_init__(self):
        atoms = tuple(tuple(float(c) for c in a) for a in self.atoms)
        weights = tuple(float(w) for w in self.weights)
        if len(atoms) != len(weights):
            raise ValueError("atoms and weights must have equal length")
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be positive")
        if any(all(c == 0.0 for c in a) for a in atoms):
            raise ValueError("no mass at the origin")
        d = {len(a) for a in atoms}
        if len(d) > 1:
            raise ValueError("atoms must share one dimension")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return len(self.atoms[0]) if self.atoms else 0

    def _norms(self):
        return [math.sqrt(sum(c * c for c in a)) for a in self.atoms]

    def tail_mass(self, eps: float) -> float:
        return sum(w for a, w, r in zip(self.atoms, self.weights, self._norms()) if r > eps)

    def mean_vector(self, lo: float, hi: float, d: int) -> np.ndarray:
        out = np.zeros(d)
        for a, w, r in zip(self.atoms, self.weights, self._norms()):
            if lo < r <= hi:
                out += w * np.asarray(a)
        return out

    def mean_coordinate(self, k: int, lo: float, hi: float) -> float:
        return sum(
            w * a[k] for a, w, r in zip(self.atoms, self.weights, self._norms()) if lo < r <= hi
        )

    def second_moment_band(self, lo: float, hi: float) -> float:
        return sum(w * r * r for a, w, r in zip(self.atoms, self.weights, self._norms()) if lo < r <= hi)

    def log_moment(self) -> float:
        return sum(w * math.log(r) for w, r in zip(self.weights, self._norms()) if r > 1.0)

    def exp_integral(self, u: np.ndarray, m: int, compensated: bool) -> complex:
        total = 0.0 + 0.0j
        for a, w, r in zip(self.atoms, self.weights, self._norms()):
            xi = np.asarray(a)
            dot = complex(np.dot(u, xi))
            corr = dot if compensated else (complex(np.dot(u[m:], xi[m:])) if r <= 1.0 else 0.0)
            total += w * (np.exp(dot) - 1.0 - corr)
        return total

    def support_errors(self, pos_idx) -> list:
        errs = []
        for k, a in enumerate(self.atoms):
            for i in pos_idx:
                if a[i] < 0.0:
                    errs.append(f"atom {k} leaves the state space (coordinate {i} = {a[i]})")
        return errs


@dataclass(frozen=True)
class StableTail:
    """One-sided power-tail density ``scale * dz / z^(1+gamma)`` on one axis.

    ``sign`` places the tail on the positive (+1) or negative (-1) half-axis;
    negative tails are only admissible on real coordinates.  ``gamma`` may
    range over (0, 2) excluding 1; which sub-range is admissible depends on
    whether the component sits in a state-independent or branching measure
    and is checked by parameter validation, not here.
    """

    axis: int
    gamma: float
    scale: float = 1.0
    dim: int = 0  # 0 means "inherit from context"
    sign: int = 1

    def __post_init__(self):
        if not (0.0 < self.gamma < 2.0) or self.gamma == 1.0:
            raise ValueError("gamma must lie in (0,1) or (1,2)")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")

    def tail_mass(self, eps: float) -> float:
        # integral of scale * z^(-1-gamma) over z > eps
        return self.scale * eps ** (-self.gamma) / self.gamma

    def _first_moment_band(self, lo: float, hi: float) -> float:
        g = self.gamma
        if lo <= 0.0 and g >= 1.0:
            raise DivergentMomentError(
                f"small-jump first moment diverges for tail exponent gamma={g}"
            )
        if not np.isfinite(hi) and g <= 1.0:
            raise DivergentMomentError(
                f"large-jump first moment diverges for tail exponent gamma={g}"
            )
        p = 1.0 - g
        upper = 0.0 if not np.isfinite(hi) else hi**p
        lower = 0.0 if lo <= 0.0 else lo**p
        return self.scale * (upper - lower) / p

    def mean_vector(self, lo: float, hi: float, d: int) -> np.ndarray:
        out = np.zeros(d)
        out[self.axis] = self.sign * self._first_moment_band(lo, hi)
        return out

    def mean_coordinate(self, k: int, lo: float, hi: float) -> float:
        if k != self.axis:
            return 0.0
        return self.sign * self._first_moment_band(lo, hi)

    def second_moment_band(self, lo: float, hi: float) -> float:
        if not np.isfinite(hi):
            raise DivergentMomentError("second moment diverges on unbounded band")
        p = 2.0 - self.gamma
        lower = 0.0 if lo <= 0.0 else lo**p
        return self.scale * (hi**p - lower) / p

    def log_moment(self) -> float:
        # int_1^inf log(z) * scale * z^(-1-gamma) dz = scale / gamma^2
        return self.scale / self.gamma**2

    def exp_integral(self, u: np.ndarray, m: int, compensated: bool) -> complex:
        g, c = self.gamma, self.scale
        v = complex(u[self.axis]) * self.sign
        w = -v  # Re w >= 0 on the transform domain
        if compensated:
            if g < 1.0:
                raise DivergentMomentError("full compensation requires gamma > 1")
            return c * math.gamma(2.0 - g) / (g * (g - 1.0)) * _stable_power(w, g)
        if self.axis < m:
            # branching coordinate of a state-independent measure: raw integrand
            if g > 1.0:
                raise DivergentMomentError(
                    "uncompensated exponent diverges for gamma > 1 on a branching axis"
                )
            return -c * math.gamma(1.0 - g) / g * _stable_power(w, g)
        # real coordinate: compensate the band |z| <= 1 only
        if g > 1.0:
            full = c * math.gamma(2.0 - g) / (g * (g - 1.0)) * _stable_power(w, g)
            return full - w * c / (g - 1.0)
        raw = -c * math.gamma(1.0 - g) / g * _stable_power(w, g)
        return raw + w * c / (1.0 - g)

    def support_errors(self, pos_idx) -> list:
        if self.axis in pos_idx and self.sign < 0:
            return [f"negative tail on branching axis {self.axis} leaves the state space"]
        return []


@dataclass(frozen=True)
class TabulatedDensity:
    """One-dimensional density on one axis, piecewise linear between knots.

    Masses and the sampler are exact for the piecewise-linear density;
    z-weighted moments and exponent integrals use trapezoid sums on the
    knots, so their accuracy is set by the grid resolution.  The measure is
    finite by construction (numeric tails), hence admissible in any slot.
    """

    axis: int
    grid: tuple
    density: tuple

    def __post_init__(self):
        zs = np.asarray(self.grid, dtype=float)
        ps = np.asarray(self.density, dtype=float)
        if zs.ndim != 1 or zs.shape != ps.shape or zs.size < 2:
            raise ValueError("grid and density must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(zs) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(ps < 0):
            raise ValueError("density must be nonnegative")
        object.__setattr__(self, "grid", tuple(float(z) for z in zs))
        object.__setattr__(self, "density", tuple(float(p) for p in ps))

    @property
    def dim(self) -> int:
        return 0

    def _band_cells(self, lo: float, hi: float):
        """Knots with true density values plus a per-cell inclusion mask.

        Band boundaries are inserted as knots, so every cell lies entirely
        inside or outside ``lo < |z| <= hi``; integrators sum the trapezoid
        rule over included cells only, which represents the density jump at
        a band edge exactly.
        """
        zs = np.asarray(self.grid)
        ps = np.asarray(self.density)
        cuts = [c for c in (-hi, -lo, lo, hi) if np.isfinite(c) and zs[0] < c < zs[-1]]
        allz = np.unique(np.concatenate([zs, np.asarray(cuts, dtype=float)]))
        allp = np.interp(allz, zs, ps)
        mids = 0.5 * (allz[:-1] + allz[1:])
        cell_in = (np.abs(mids) > lo) & (np.abs(mids) <= hi)
        return allz, allp, cell_in

    def _band_integral(self, lo: float, hi: float, f) -> complex | float:
        z, p, cell = self._band_cells(lo, hi)
        vals = f(z) * p
        terms = 0.5 * (vals[:-1] + vals[1:]) * np.diff(z)
        return terms[cell].sum()

    def _knots(self, lo: float, hi: float):
        """Restricted knot/density arrays, zero outside (for the sampler)."""
        z, p, cell = self._band_cells(lo, hi)
        keep = np.zeros(z.shape, dtype=bool)
        keep[:-1] |= cell
        keep[1:] |= cell
        return z, np.where(keep, p, 0.0)

    def tail_mass(self, eps: float) -> float:
        return float(self._band_integral(eps, np.inf, lambda z: np.ones_like(z)))

    def mean_vector(self, lo: float, hi: float, d: int) -> np.ndarray:
        out = np.zeros(d)
        out[self.axis] = float(self._band_integral(lo, hi, lambda z: z))
        return out

    def mean_coordinate(self, k: int, lo: float, hi: float) -> float:
        if k != self.axis:
            return 0.0
        return float(self._band_integral(lo, hi, lambda z: z))

    def second_moment_band(self, lo: float, hi: float) -> float:
        return float(self._band_integral(lo, hi, lambda z: z * z))

    def log_moment(self) -> float:
        return float(
            self._band_integral(1.0, np.inf, lambda z: np.log(np.maximum(np.abs(z), 1.0)))
        )

    def exp_integral(self, u: np.ndarray, m: int, compensated: bool) -> complex:
        v = complex(u[self.axis])

        def integrand(z):
            g = np.exp(v * z) - 1.0
            if compensated:
                return g - v * z
            if self.axis >= m:
                return g - np.where(np.abs(z) <= 1.0, v * z, 0.0)
            return g

        # split at |z| = 1 so the compensator kink falls on a cell boundary
        inner = self._band_integral(0.0, 1.0, integrand)
        outer = self._band_integral(1.0, np.inf, integrand)
        return complex(inner + outer)

    def support_errors(self, pos_idx) -> list:
        if self.axis in pos_idx and self.grid[0] < 0 and any(
            p > 0 for z, p in zip(self.grid, self.density) if z < 0
        ):
            return [f"density mass on negative half of branching axis {self.axis}"]
        return []


# ---------------------------------------------------------------------------
# Composite measure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpMeasure:
    """Finite sum of jump-measure components; the empty sum is the zero measure."""

    components: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def dim(self) -> int:
        for c in self.components:
            if c.dim:
                return c.dim
        return 0

    @property
    def is_zero(self) -> bool:
        return not self.components

    def tail_mass(self, eps: float) -> float:
        if eps <= 0:
            raise ValueError("tail threshold must be positive")
        return sum(c.tail_mass(eps) for c in self.components)

    def mean_vector(self, lo: float, hi: float, d: int | None = None) -> np.ndarray:
        d = d or self.dim
        out = np.zeros(d)
        for c in self.components:
            out += c.mean_vector(lo, hi, d)
        return out

    def mean_component(self, k: int, lo: float, hi: float) -> float:
        """Single-coordinate first moment; only that coordinate must converge."""
        return float(sum(c.mean_coordinate(k, lo, hi) for c in self.components))

    def second_moment_band(self, lo: float, hi: float) -> float:
        return sum(c.second_moment_band(lo, hi) for c in self.components)

    def log_moment(self) -> float:
        return sum(c.log_moment() for c in self.components)

    def exp_integral(self, u: np.ndarray, m: int, compensated: bool) -> complex:
        return sum((c.exp_integral(u, m, compensated) for c in self.components), 0.0 + 0.0j)

    # Admissibility -----------------------------------------------------

    def admissibility_errors_state_independent(self, pos_idx, rtol: float = 1e-6) -> list:
        """Violations of the state-independent integrability requirements."""
        errs = []
        for c in self.components:
            errs.extend(c.support_errors(pos_idx))
            if isinstance(c, StableTail):
                if c.axis in pos_idx and c.gamma >= 1.0:
                    errs.append(
                        f"tail exponent gamma={c.gamma} on branching axis {c.axis} "
                        "fails the small-jump first-moment requirement"
                    )
        return errs

    def admissibility_errors_branching(self, i: int, pos_idx, rtol: float = 1e-6) -> list:
        """Violations of the branching-measure integrability requirements."""
        errs = []
        for c in self.components:
            errs.extend(c.support_errors(pos_idx))
            if isinstance(c, StableTail):
                if c.gamma <= 1.0:
                    errs.append(
                        f"tail exponent gamma={c.gamma} lacks a finite large-jump first moment"
                    )
                if c.axis in pos_idx and c.axis != i:
                    errs.append(
                        f"power tail on branching axis {c.axis} != {i} has divergent "
                        "cross displacement"
                    )
        return errs


ZERO_MEASURE = JumpMeasure(())


# ---------------------------------------------------------------------------
# Truncated sampling
# ---------------------------------------------------------------------------

_KIND_ATOMS = 0
_KIND_STABLE = 1
_KIND_TABLE = 2


class PreparedSampler:
    """Sampler for a jump measure restricted to ``|xi| > eps`` and normalized.

    The draw protocol is fixed (one uniform to select the component, one
    uniform inside the component) so the compiled kernel and the Python
    stepper consume random streams identically.
    """

    def __init__(self, measure: JumpMeasure, eps: float, d: int):
        if eps <= 0:
            raise ValueError("truncation threshold must be positive")
        self.d = d
        kinds, masses = [], []
        st_axis, st_sign, st_floor, st_neg_inv_gamma = [], [], [], []
        at_off, at_cum, at_xi = [0], [], []
        tb_off, tb_axis, tb_cdf, tb_z, tb_rho = [0], [], [], [], []

        for comp in measure.components:
            mass = comp.tail_mass(eps)
            if mass <= 0.0:
                continue
            if isinstance(comp, PointMasses):
                if comp.dim != d:
                    raise ValueError(f"atoms have dimension {comp.dim}, expected {d}")
                sel = [(a, w) for a, w, r in zip(comp.atoms, comp.weights, comp._norms()) if r > eps]
                cum = np.cumsum([w for _, w in sel]) / mass
                at_cum.extend(cum)
                at_xi.extend(np.asarray(a, dtype=float) for a, _ in sel)
                at_off.append(len(at_cum))
                kinds.append(_KIND_ATOMS)
                st_axis.append(-1); st_sign.append(0.0); st_floor.append(0.0); st_neg_inv_gamma.append(0.0)
                tb_off.append(tb_off[-1]); tb_axis.append(-1)
            elif isinstance(comp, StableTail):
                kinds.append(_KIND_STABLE)
                st_axis.append(comp.axis)
                st_sign.append(float(comp.sign))
                st_floor.append(eps)
                st_neg_inv_gamma.append(-1.0 / comp.gamma)
                at_off.append(at_off[-1])
                tb_off.append(tb_off[-1]); tb_axis.append(-1)
            elif isinstance(comp, TabulatedDensity):
                z, p, cell_in = comp._band_cells(eps, np.inf)
                p = p / mass  # conditional (normalized) density
                cell = 0.5 * (p[1:] + p[:-1]) * np.diff(z)
                cell[~cell_in] = 0.0
                cdf = np.concatenate([[0.0], np.cumsum(cell)])
                cdf /= cdf[-1]
                kinds.append(_KIND_TABLE)
                tb_cdf.extend(cdf); tb_z.extend(z); tb_rho.extend(p)
                tb_off.append(len(tb_cdf))
                tb_axis.append(comp.axis)
                at_off.append(at_off[-1])
                st_axis.append(-1); st_sign.append(0.0); st_floor.append(0.0); st_neg_inv_gamma.append(0.0)
            else:  # pragma: no cover
                raise TypeError(f"unknown component type {type(comp)!r}")
            masses.append(mass)

        self.total_rate = float(sum(masses))
        ncomp = len(kinds)
        self.n_components = ncomp
        self.kinds = np.asarray(kinds, dtype=np.int32)
        self.sel_cum = (
            np.cumsum(masses) / self.total_rate if ncomp else np.zeros(0)
        ).astype(float)
        self.st_axis = np.asarray(st_axis, dtype=np.int32)
        self.st_sign = np.asarray(st_sign, dtype=float)
        self.st_floor = np.asarray(st_floor, dtype=float)
        self.st_neg_inv_gamma = np.asarray(st_neg_inv_gamma, dtype=float)
        self.at_off = np.asarray(at_off, dtype=np.int32)
        self.at_cum = np.asarray(at_cum, dtype=float)
        self.at_xi = (
            np.ascontiguousarray(at_xi, dtype=float) if at_xi else np.zeros((0, d))
        )
        self.tb_off = np.asarray(tb_off, dtype=np.int32)
        self.tb_axis = np.asarray(tb_axis, dtype=np.int32)
        self.tb_cdf = np.asarray(tb_cdf, dtype=float)
        self.tb_z = np.asarray(tb_z, dtype=float)
        self.tb_rho = np.asarray(tb_rho, dtype=float)

    def sample_with_uniforms(self, u1: float, u2: float) -> np.ndarray:
        """Deterministic map (u1, u2) -> jump; mirrored by the compiled kernel."""
        if self.n_components == 0:
            raise ValueError("sampler has zero tail mass")
        c = 0
        while c < self.n_components - 1 and self.sel_cum[c] < u1:
            c += 1
        xi = np.zeros(self.d)
        kind = self.kinds[c]
        if kind == _KIND_ATOMS:
            lo, hi = self.at_off[c], self.at_off[c + 1]
            j = lo
            while j < hi - 1 and self.at_cum[j] < u2:
                j += 1
            xi[:] = self.at_xi[j]
        elif kind == _KIND_STABLE:
            # (1 - u2) in (0, 1] keeps the inverse tail finite
            z = self.st_floor[c] * (1.0 - u2) ** self.st_neg_inv_gamma[c]
            xi[self.st_axis[c]] = self.st_sign[c] * z
        else:
            lo, hi = self.tb_off[c], self.tb_off[c + 1]
            j = lo
            while j < hi - 2 and self.tb_cdf[j + 1] <= u2:
                j += 1
            z0 = self.tb_z[j]
            dz = self.tb_z[j + 1] - z0
            r0 = self.tb_rho[j]
            slope = (self.tb_rho[j + 1] - r0) / dz
            p = u2 - self.tb_cdf[j]
            disc = r0 * r0 + 2.0 * slope * p
            if abs(slope) * dz <= 1e-13 * (r0 + 1e-300) or disc <= 0.0:
                t = p / r0 if r0 > 0.0 else 0.0
            else:
                t = (math.sqrt(disc) - r0) / slope
            if t > dz:
                t = dz
            xi[self.tb_axis[c]] = z0 + t
        return xi

    def sample(self, gen) -> np.ndarray:
        """Draw one truncated jump using a ``numpy.random.Generator``."""
        return self.sample_with_uniforms(gen.random(), gen.random())


# ---------------------------------------------------------------------------
# Spec-level operations
# ---------------------------------------------------------------------------


def tail_mass(measure: JumpMeasure, eps: float) -> float:
    """Mass of ``{|xi| > eps}``; finite for any admissible measure."""
    return measure.tail_mass(eps)


def sample_jump(measure: JumpMeasure, eps: float, gen, d: int | None = None) -> np.ndarray:
    """One draw from the measure restricted to ``{|xi| > eps}``, normalized."""
    sampler = PreparedSampler(measure, eps, d or measure.dim)
    return sampler.sample(gen)


def compensator_moment(
    measure: JumpMeasure,
    r: float,
    region: str = "small",
    component: int | None = None,
):
    """First moment over ``{|xi| <= r}`` (``region="small"``) or ``{|xi| > r}``.

    Returns the full vector, or a single coordinate when ``component`` is
    given.  Divergent requests raise :class:`DivergentMomentError`.
    """
    if region not in ("small", "large"):
        raise ValueError("region must be 'small' or 'large'")
    lo, hi = (0.0, r) if region == "small" else (r, np.inf)
    if component is not None:
        return measure.mean_component(component, lo, hi)
    return measure.mean_vector(lo, hi)


def log_moment(measure: JumpMeasure) -> float:
    """``int_{|xi|>1} log|xi|`` -- the integrability gate for ergodicity."""
    return measure.log_moment()


def exponent_F(params, u) -> complex:
    """State-independent Levy-Khintchine exponent.

    ``F(u) = <u, a u> + <b, u> + int (e^{<u,xi>} - 1 - 1_{|xi|<=1} <xi_J, u_J>) nu(dxi)``.
    """
    m = params.dims.m
    u = check_transform_domain(u, m)
    quad = complex(u @ params.a @ u)
    lin = complex(params.b @ u)
    jump = params.nu.exp_integral(u, m, compensated=False) if not params.nu.is_zero else 0.0
    return quad + lin + jump


def exponent_R(params, i: int, u) -> complex:
    """Branching Levy-Khintchine exponent for coordinate ``i``.

    ``R_i(u) = <u, alpha_i u> + sum_k beta_{ki} u_k
    + int (e^{<u,xi>} - 1 - <u,xi>) mu_i(dxi)``.
    """
    m = params.dims.m
    u = check_transform_domain(u, m)
    quad = complex(u @ params.alpha[i] @ u)
    lin = complex(params.beta[:, i] @ u)
    mu_i = params.mu[i]
    jump = mu_i.exp_integral(u, m, compensated=True) if not mu_i.is_zero else 0.0
    return quad + lin + jump
