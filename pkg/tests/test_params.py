"""Validation and spectral-margin tests."""

import numpy as np
import pytest

from affinelab.levy import JumpMeasure, PointMasses
from affinelab.params import (
    AdmissibleParameters,
    DimensionError,
    StateDims,
    effective_drift,
    subcriticality_margin,
    validate,
)

from conftest import random_admissible


def stoch_vol_like(rho=0.5):
    return AdmissibleParameters(
        dims=StateDims(1, 1),
        a=np.zeros((2, 2)),
        alpha=(np.array([[1.0, rho], [rho, 1.0]]),),
        b=np.array([1.0, 0.0]),
        beta=np.diag([-1.0, -1.0]),
    )


class TestValidate:
    def test_volatility_model_admissible(self):
        assert validate(stoch_vol_like()).admissible

    def test_all_zero_parameters_admissible(self):
        p = AdmissibleParameters(
            dims=StateDims(1, 1),
            a=np.zeros((2, 2)),
            alpha=(np.zeros((2, 2)),),
            b=np.zeros(2),
            beta=np.zeros((2, 2)),
        )
        assert validate(p).admissible

    def test_beta_feeding_real_into_branching_rejected(self):
        p = AdmissibleParameters(
            dims=StateDims(1, 1),
            a=np.zeros((2, 2)),
            alpha=(np.zeros((2, 2)),),
            b=np.zeros(2),
            beta=np.array([[-1.0, 1.0], [0.0, -1.0]]),
        )
        report = validate(p)
        assert not report.admissible
        assert "beta-block" in report.conditions()

    def test_dimension_mismatch_is_structural(self):
        with pytest.raises(DimensionError):
            AdmissibleParameters(
                dims=StateDims(1, 1),
                a=np.zeros((3, 3)),
                alpha=(np.zeros((2, 2)),),
                b=np.zeros(2),
                beta=np.zeros((2, 2)),
            )

    def test_validate_pure_and_idempotent(self, rng):
        p = random_admissible(rng, 2, 1)
        r1 = validate(p)
        r2 = validate(p)
        assert r1.admissible and r2.admissible

    def test_random_admissible_models_validate(self, rng):
        for _ in range(25):
            m = int(rng.integers(0, 3))
            n = int(rng.integers(0, 3))
            if m + n == 0:
                n = 1
            assert validate(random_admissible(rng, m, n)).admissible

    def test_cross_displacement_condition(self):
        # beta[1,0] must dominate the mean displacement of mu_0 in coordinate 1
        mu0 = JumpMeasure((PointMasses(atoms=((0.0, 1.0),), weights=(0.5,)),))
        base = dict(
            dims=StateDims(2, 0),
            a=np.zeros((2, 2)),
            alpha=(np.zeros((2, 2)), np.zeros((2, 2))),
            b=np.zeros(2),
            mu=(mu0, JumpMeasure(())),
        )
        good = AdmissibleParameters(beta=np.array([[-1.0, 0.0], [0.5, -1.0]]), **base)
        bad = AdmissibleParameters(beta=np.array([[-1.0, 0.0], [0.4, -1.0]]), **base)
        assert validate(good).admissible
        report = validate(bad)
        assert "beta-block" in report.conditions()


class TestSubcriticalityMargin:
    def test_triangular(self):
        assert subcriticality_margin(np.array([[-1.0, 0.0], [0.5, -2.0]])) == pytest.approx(1.0)

    def test_critical_scalar(self):
        assert subcriticality_margin(np.array([[0.0]])) == pytest.approx(0.0)

    def test_complex_pair(self):
        # eigenvalues -1 +/- 2i from the hand-solved characteristic polynomial
        beta = np.array([[-1.0, 4.0], [-1.0, -1.0]])
        assert subcriticality_margin(beta) == pytest.approx(1.0, abs=1e-12)

    def test_similarity_invariance(self, rng):
        for _ in range(20):
            beta = rng.normal(size=(3, 3))
            q = rng.normal(size=(3, 3)) + 3.0 * np.eye(3)
            sim = q @ beta @ np.linalg.inv(q)
            assert subcriticality_margin(beta) == pytest.approx(
                subcriticality_margin(sim), abs=1e-8
            )


def test_effective_drift_view():
    nu = JumpMeasure((PointMasses(atoms=((0.5, 0.0), (2.0, 0.0)), weights=(1.0, 0.25)),))
    mu0 = JumpMeasure((PointMasses(atoms=((3.0, 0.0),), weights=(0.1,)),))
    p = AdmissibleParameters(
        dims=StateDims(1, 1),
        a=np.zeros((2, 2)),
        alpha=(np.zeros((2, 2)),),
        b=np.array([1.0, 0.0]),
        beta=np.diag([-1.0, -1.0]),
        nu=nu,
        mu=(mu0,),
    )
    b_t, beta_t = effective_drift(p)
    assert b_t[0] == pytest.approx(1.0 + 0.5)  # small-jump mass added on branching axis
    assert beta_t[0, 0] == pytest.approx(-1.0 - 0.3)  # large-jump displacement removed
    # stored parameters untouched
    assert p.b[0] == 1.0 and p.beta[0, 0] == -1.0
