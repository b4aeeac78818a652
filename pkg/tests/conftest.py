"""Shared test helpers: random admissible models and measure builders."""

import numpy as np
import pytest

from affinelab.levy import JumpMeasure, PointMasses, StableTail
from affinelab.params import AdmissibleParameters, StateDims


def random_block_diffusion(rng, m, n):
    """Random (a, alpha) pair satisfying the admissibility block structure.

    alpha_i is built as sigma sigma^T from a factor with the required block
    shape, which guarantees both positive semidefiniteness and the sparsity
    pattern.
    """
    d = m + n
    a = np.zeros((d, d))
    if n:
        g = rng.normal(size=(n, n))
        a[m:, m:] = g @ g.T / n
    alphas = []
    for i in range(m):
        sigma = np.zeros((d, d))
        sigma[i, i] = np.sqrt(rng.uniform(0.0, 2.0))
        if n:
            sigma[m:, i] = rng.normal(scale=0.5, size=n)
            g = rng.normal(size=(n, n)) * 0.5
            sigma[m:, m:] = np.tril(g)
        alphas.append(sigma @ sigma.T)
    return a, tuple(alphas)


def random_admissible(rng, m, n, with_jumps=True, subcritical=True):
    """Random admissible parameter tuple (always validates cleanly)."""
    d = m + n
    a, alphas = random_block_diffusion(rng, m, n)
    b = np.concatenate([rng.uniform(0.0, 1.5, size=m), rng.normal(size=n)])
    beta = rng.normal(scale=0.4, size=(d, d))
    beta[:m, m:] = 0.0
    for i in range(m):
        for k in range(m):
            if k != i:
                beta[k, i] = abs(beta[k, i])
    if subcritical:
        for k in range(d):
            beta[k, k] = -(np.sum(np.abs(beta[k, :])) - np.abs(beta[k, k]) + rng.uniform(0.3, 1.2))
    nu = JumpMeasure(())
    mus = []
    if with_jumps:
        atoms, weights = [], []
        for _ in range(rng.integers(1, 4)):
            xi = np.concatenate([rng.uniform(0.05, 2.0, size=m), rng.normal(size=n)])
            atoms.append(tuple(xi))
            weights.append(rng.uniform(0.1, 1.0))
        nu = JumpMeasure((PointMasses(atoms=tuple(atoms), weights=tuple(weights)),))
        for i in range(m):
            if rng.random() < 0.5:
                mus.append(
                    JumpMeasure(
                        (StableTail(axis=i, gamma=rng.uniform(1.2, 1.9), scale=rng.uniform(0.1, 0.6)),)
                    )
                )
            else:
                mus.append(JumpMeasure(()))
    else:
        mus = [JumpMeasure(()) for _ in range(m)]
    return AdmissibleParameters(
        dims=StateDims(m, n), a=a, alpha=alphas, b=b, beta=beta, nu=nu, mu=tuple(mus)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
