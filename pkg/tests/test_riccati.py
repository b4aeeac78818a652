"""Transform ODE solver, Laplace/invariant transforms, moment formulas."""

import numpy as np
import pytest
from scipy.integrate import quad

from affinelab.levy import JumpMeasure, PointMasses, StableTail
from affinelab.models import preset
from affinelab.params import AdmissibleParameters, StateDims
from affinelab.riccati import (
    PreconditionError,
    invariant_transform,
    laplace_transform,
    mean_formula,
    solve_riccati,
)

from conftest import random_admissible


def cir_psi(t, u, alpha=0.25, beta=-0.5):
    """Scalar closed-form solution of psi' = alpha psi^2 + beta psi, psi(0) = u."""
    e = np.exp(beta * t)
    return u * e / (1.0 - (u * alpha / beta) * (e - 1.0))


class TestSolveRiccati:
    def test_zero_argument_fixed_point(self):
        p = preset("cir").params
        sol = solve_riccati(p, np.array([0.0]), 5.0)
        assert np.all(sol.phi == 0.0)
        assert np.all(sol.psi == 0.0)

    def test_initial_conditions(self):
        p = preset("stoch-vol").params
        u = np.array([-1.0, 0.5j])
        sol = solve_riccati(p, u, 1.0)
        assert sol.phi[0] == 0.0
        assert np.allclose(sol.psi[0], u)

    def test_cir_closed_form(self):
        p = preset("cir").params
        for u0 in (-0.1, -1.0, -10.0):
            sol = solve_riccati(p, np.array([u0]), 10.0, tol=1e-9)
            exact = cir_psi(sol.grid, u0)
            err = np.max(np.abs(sol.psi[:, 0] - exact))
            assert err < 1e-7

    def test_ou_real_block_closed_form(self):
        p = preset("ou").params
        theta = 0.7
        sol = solve_riccati(p, np.array([1j * theta]), 3.0)
        assert np.allclose(sol.psi[:, 0], 1j * theta * np.exp(-sol.grid), atol=1e-12)
        # phi(t) = int_0^t (a psi^2 + b psi) ds with a = 0.5, b = 1
        want = [
            quad(lambda s: 0.5 * (theta * np.exp(-s)) ** 2 * -1.0, 0, t)[0]
            + 1j * quad(lambda s: theta * np.exp(-s), 0, t)[0]
            for t in sol.grid
        ]
        assert np.max(np.abs(sol.phi - np.asarray(want))) < 1e-7

    def test_branching_exponent_stays_in_domain(self):
        p = preset("anisotropic-root").params
        sol = solve_riccati(p, np.array([-2.0, -1.0]), 8.0)
        assert np.max(sol.psi[:, :2].real) <= 1e-9

    def test_semiflow_property(self, rng):
        tol = 1e-9
        for _ in range(15):
            m = int(rng.integers(0, 3))
            n = int(rng.integers(0, 2))
            if m + n == 0:
                m = 1
            p = random_admissible(rng, m, n)
            d = p.dims.d
            u = np.concatenate(
                [-rng.uniform(0.2, 1.5, size=m), 1j * rng.normal(scale=0.5, size=n)]
            )
            t, s = 0.8, 0.6
            big = solve_riccati(p, u, t + s, tol=tol)
            first = solve_riccati(p, u, t, tol=tol)
            second = solve_riccati(p, first.terminal_psi, s, tol=tol)
            scale = 1.0 + abs(big.terminal_phi) + np.max(np.abs(big.terminal_psi))
            assert abs(big.terminal_phi - (first.terminal_phi + second.terminal_phi)) < 5 * tol * scale
            assert np.max(np.abs(big.terminal_psi - second.terminal_psi)) < 5 * tol * scale


class TestLaplaceTransform:
    def test_time_zero(self):
        p = preset("stoch-vol").params
        x = np.array([1.0, -2.0])
        u = np.array([-0.5, 1j])
        assert laplace_transform(p, x, u, 0.0) == pytest.approx(np.exp(np.dot(u, x)))

    def test_deterministic_flow(self):
        # no noise at all: point mass at the linear ODE flow
        p = AdmissibleParameters(
            dims=StateDims(1, 1),
            a=np.zeros((2, 2)),
            alpha=(np.zeros((2, 2)),),
            b=np.array([0.5, 1.0]),
            beta=np.array([[-1.0, 0.0], [0.3, -2.0]]),
        )
        x = np.array([1.0, 0.0])
        u = np.array([-1.0, 2j])
        t = 1.3
        got = laplace_transform(p, x, u, t)
        flow = mean_formula(p, x, t).mean
        assert got == pytest.approx(np.exp(np.dot(u, flow)), rel=1e-7)

    def test_modulus_bounded_by_one(self, rng):
        for _ in range(10):
            p = random_admissible(rng, int(rng.integers(1, 3)), int(rng.integers(0, 2)))
            d = p.dims.d
            m = p.dims.m
            u = np.concatenate(
                [-rng.uniform(0.0, 2.0, size=m), 1j * rng.normal(size=d - m)]
            )
            x = np.concatenate([rng.uniform(0, 2, size=m), rng.normal(size=d - m)])
            val = laplace_transform(p, x, u, rng.uniform(0.1, 2.0))
            assert abs(val) <= 1.0 + 5e-8


class TestInvariantTransform:
    def test_zero_argument(self):
        p = preset("cir").params
        assert invariant_transform(p, np.array([0.0])).value == 1.0 + 0.0j

    def test_cir_gamma_law(self):
        # stationary law is Gamma(shape=b/alpha, rate=|beta|/alpha)
        p = preset("cir").params
        for u0 in (-0.25, -1.0, -4.0):
            res = invariant_transform(p, np.array([u0]))
            want = (1.0 - u0 * 0.25 / 0.5) ** (-1.0 / 0.25)
            assert res.value.real == pytest.approx(want, rel=1e-6)
            assert abs(res.value.imag) < 1e-10
            assert res.tail_bound < 1e-6

    def test_ou_gaussian_law(self):
        # stationary law is Normal(1, 0.5): transform exp(i theta - theta^2/4... )
        p = preset("ou").params
        theta = 0.8
        res = invariant_transform(p, np.array([1j * theta]))
        want = np.exp(1j * theta * 1.0 - 0.5 * theta**2 * 0.5)
        assert res.value == pytest.approx(want, rel=1e-7)

    def test_matches_long_horizon_transform(self):
        p = preset("cir").params
        u = np.array([-1.0])
        res = invariant_transform(p, u)
        for x in ([0.3], [4.0]):
            lt = laplace_transform(p, np.asarray(x), u, 40.0)
            assert lt == pytest.approx(res.value, rel=1e-5)

    def test_supercritical_rejected(self):
        p = AdmissibleParameters(
            dims=StateDims(1, 0),
            a=np.zeros((1, 1)),
            alpha=(np.array([[0.1]]),),
            b=np.array([1.0]),
            beta=np.array([[0.2]]),
        )
        with pytest.raises(PreconditionError):
            invariant_transform(p, np.array([-1.0]))


class TestMeanFormula:
    def test_time_zero(self):
        p = preset("stoch-vol").params
        x = np.array([1.5, -0.3])
        assert np.allclose(mean_formula(p, x, 0.0).mean, x)

    def test_flow_only(self):
        p = AdmissibleParameters(
            dims=StateDims(1, 1),
            a=np.zeros((2, 2)),
            alpha=(np.zeros((2, 2)),),
            b=np.zeros(2),
            beta=np.array([[-1.0, 0.0], [0.5, -2.0]]),
        )
        x = np.array([2.0, 1.0])
        t = 0.7
        from affinelab.linalg import expm

        assert np.allclose(mean_formula(p, x, t).mean, expm(p.beta, t) @ x, atol=1e-12)

    def test_ou_scalar_formula(self):
        p = preset("ou").params
        t, z = 1.4, -2.0
        got = mean_formula(p, [z], t).mean[0]
        assert got == pytest.approx(np.exp(-t) * z + (1 - np.exp(-t)) * 1.0, rel=1e-10)

    def test_block_split_consistency(self, rng):
        for _ in range(10):
            p = random_admissible(rng, int(rng.integers(1, 3)), int(rng.integers(1, 3)))
            x = np.concatenate(
                [rng.uniform(0, 2, size=p.dims.m), rng.normal(size=p.dims.n)]
            )
            mf = mean_formula(p, x, rng.uniform(0.2, 3.0))
            assert np.allclose(np.concatenate([mf.pos_block, mf.real_block]), mf.mean, atol=1e-9)

    def test_jump_means_enter(self):
        nu = JumpMeasure((PointMasses(atoms=((2.0,),), weights=(0.5,)),))
        p = AdmissibleParameters(
            dims=StateDims(1, 0),
            a=np.zeros((1, 1)),
            alpha=(np.zeros((1, 1)),),
            b=np.array([0.0]),
            beta=np.array([[-1.0]]),
            nu=nu,
        )
        t = 2.0
        # dE/dt = -E + 1.0  (jump rate 0.5 * size 2.0)
        assert mean_formula(p, [0.0], t).mean[0] == pytest.approx(1.0 - np.exp(-t), rel=1e-10)

    def test_divergent_nu_mean_rejected(self):
        nu = JumpMeasure((StableTail(axis=0, gamma=0.5, scale=1.0),))
        p = AdmissibleParameters(
            dims=StateDims(1, 0),
            a=np.zeros((1, 1)),
            alpha=(np.zeros((1, 1)),),
            b=np.array([0.0]),
            beta=np.array([[-1.0]]),
            nu=nu,
        )
        with pytest.raises(PreconditionError):
            mean_formula(p, [0.0], 1.0)
