"""Simulation engine: determinism, domain preservation, couplings, IO."""

import numpy as np
import pytest

from affinelab.models import preset
from affinelab.params import AdmissibleParameters, StateDims
from affinelab.riccati import laplace_transform, mean_formula
from affinelab.sde import (
    ExplosionError,
    NoiseBundle,
    SchemeSettings,
    read_samples,
    simulate,
    simulate_coupled,
    simulate_ensemble,
    trajectory_to_csv,
    write_samples,
)


def deterministic_params():
    return AdmissibleParameters(
        dims=StateDims(1, 1),
        a=np.zeros((2, 2)),
        alpha=(np.zeros((2, 2)),),
        b=np.array([0.5, 1.0]),
        beta=np.array([[-1.0, 0.0], [0.3, -2.0]]),
    )


class TestSimulate:
    def test_deterministic_model_matches_flow(self):
        p = deterministic_params()
        x = np.array([1.0, 0.0])
        st = SchemeSettings(step=2.0**-10, horizon=1.0)
        traj = simulate(p, x, st, NoiseBundle(0))
        want = mean_formula(p, x, 1.0).mean
        assert np.max(np.abs(traj.terminal - want)) < 5e-3  # O(h) Euler error

    def test_bit_exact_reproducibility(self):
        p = preset("cir").params
        st = SchemeSettings(step=2.0**-8, horizon=1.0)
        t1 = simulate(p, [1.0], st, NoiseBundle(42, 7))
        t2 = simulate(p, [1.0], st, NoiseBundle(42, 7))
        assert np.array_equal(t1.states, t2.states)

    def test_distinct_paths_differ(self):
        p = preset("cir").params
        st = SchemeSettings(step=2.0**-8, horizon=1.0)
        t1 = simulate(p, [1.0], st, NoiseBundle(42, 0))
        t2 = simulate(p, [1.0], st, NoiseBundle(42, 1))
        assert not np.array_equal(t1.states, t2.states)

    def test_states_stay_in_domain(self):
        p = preset("anisotropic-root").params
        st = SchemeSettings(step=2.0**-8, horizon=2.0, truncation=1e-2)
        for pth in range(5):
            traj = simulate(p, [0.1, 0.1], st, NoiseBundle(9, pth))
            assert np.all(traj.states[:, :2] >= 0.0)

    def test_explosion_reported(self):
        p = AdmissibleParameters(
            dims=StateDims(0, 1),
            a=np.zeros((1, 1)),
            alpha=(),
            b=np.array([0.0]),
            beta=np.array([[40.0]]),  # violently supercritical
        )
        st = SchemeSettings(step=0.25, horizon=16.0)
        with pytest.raises(ExplosionError):
            simulate(p, [1.0], st, NoiseBundle(1))

    def test_start_point_validated(self):
        p = preset("cir").params
        st = SchemeSettings(step=0.5, horizon=1.0)
        with pytest.raises(ValueError):
            simulate(p, [-1.0], st, NoiseBundle(0))

    def test_jump_log(self):
        p = preset("stoch-vol").params
        st = SchemeSettings(step=2.0**-6, horizon=4.0)
        traj = simulate(p, [1.0, 0.0], st, NoiseBundle(5), log_jumps=True)
        assert traj.jump_log, "compound-Poisson activity expected over t in [0, 4]"
        times = [item[0] for item in traj.jump_log]
        assert all(0 < t <= 4.0 for t in times)


class TestCoupled:
    def test_identical_starts_identical_paths(self):
        p = preset("stoch-vol").params
        st = SchemeSettings(step=2.0**-8, horizon=1.0)
        a, b = simulate_coupled(p, [1.0, 0.0], [1.0, 0.0], st, NoiseBundle(3))
        assert np.array_equal(a.states, b.states)

    def test_branching_comparison_pure_jump(self):
        # pure-jump branching model: the discrete scheme is exactly monotone
        p = preset("anisotropic-root").params
        st = SchemeSettings(step=2.0**-8, horizon=2.0, truncation=1e-2)
        for pth in range(40):
            lo, hi = simulate_coupled(p, [0.5, 1.0], [1.0, 1.5], st, NoiseBundle(17, pth))
            gap = hi.states - lo.states
            assert np.min(gap) >= -1e-12

    def test_branching_comparison_diffusive(self):
        p = preset("cir").params
        st = SchemeSettings(step=2.0**-8, horizon=4.0)
        for pth in range(200):
            lo, hi = simulate_coupled(p, [1.0], [2.0], st, NoiseBundle(23, pth))
            assert np.min(hi.states - lo.states) >= -1e-12

    def test_contraction_scale(self):
        # coupled CIR gap mean follows e^{beta t} (y2 - y1)
        p = preset("cir").params
        st = SchemeSettings(step=2.0**-8, horizon=4.0)
        gaps = []
        for pth in range(800):
            lo, hi = simulate_coupled(p, [1.0], [2.0], st, NoiseBundle(29, pth))
            gaps.append(hi.terminal[0] - lo.terminal[0])
        got = np.mean(gaps)
        want = np.exp(-0.5 * 4.0)
        se = np.std(gaps, ddof=1) / np.sqrt(len(gaps))
        assert abs(got - want) < 4.0 * se + 1e-3


class TestEnsemble:
    def test_single_path_reduces_to_simulate(self):
        p = preset("cir").params
        st = SchemeSettings(step=2.0**-8, horizon=1.0)
        ens = simulate_ensemble(p, [1.0], st, 1, 42, record_times=[0.5, 1.0])
        traj = simulate(p, [1.0], st, NoiseBundle(42, 0))
        assert ens.at(1.0)[0, 0] == traj.terminal[0]
        k = int(round(0.5 / st.step))
        assert ens.at(0.5)[0, 0] == traj.states[k, 0]

    def test_deterministic_model_all_paths_equal(self):
        p = deterministic_params()
        st = SchemeSettings(step=2.0**-6, horizon=1.0)
        ens = simulate_ensemble(p, [1.0, 0.0], st, 7, 0, record_times=[1.0])
        assert np.all(ens.at(1.0) == ens.at(1.0)[0])

    def test_worker_count_invariance(self):
        p = preset("stoch-vol").params
        st = SchemeSettings(step=2.0**-7, horizon=0.5)
        e1 = simulate_ensemble(p, [1.0, 0.0], st, 300, 11, record_times=[0.5], workers=1)
        e3 = simulate_ensemble(p, [1.0, 0.0], st, 300, 11, record_times=[0.5], workers=3)
        assert np.array_equal(e1.samples, e3.samples)

    def test_empirical_transform_matches_riccati(self):
        p = preset("stoch-vol").params
        x = np.array([1.0, 0.0])
        st = SchemeSettings(step=2.0**-8, horizon=1.0)
        ens = simulate_ensemble(p, x, st, 30_000, 101, record_times=[1.0])
        u = np.array([-0.5, 0.4j])
        vals = np.exp(ens.at(1.0) @ u)
        emp = vals.mean()
        se = np.sqrt((vals.real.var() + vals.imag.var()) / vals.size)
        theo = laplace_transform(p, x, u, 1.0)
        assert abs(emp - theo) < 3.0 * se + 2e-3

    def test_weak_step_refinement(self):
        # halving h moves the 1e5-path CIR ensemble mean by no more than the
        # Monte Carlo resolution: the two runs are independent, so the noise
        # of their difference has scale sqrt(SE1^2 + SE2^2); the usual
        # 3-sigma convention applies on top (a 1-sigma gate would reject a
        # perfect integrator a third of the time)
        p = preset("cir").params
        n = 100_000
        means, ses = [], []
        for step in (2.0**-7, 2.0**-8):
            st = SchemeSettings(step=step, horizon=1.0)
            samples = simulate_ensemble(p, [1.0], st, n, 202, record_times=[1.0]).at(1.0)
            means.append(samples.mean())
            ses.append(samples.std(ddof=1) / np.sqrt(n))
        assert abs(means[0] - means[1]) < 3.0 * np.hypot(*ses)
        exact = mean_formula(p, [1.0], 1.0).mean[0]
        for mu, se in zip(means, ses):
            assert abs(mu - exact) < 3.0 * se

    def test_off_grid_record_time_rejected(self):
        p = preset("cir").params
        st = SchemeSettings(step=2.0**-4, horizon=1.0)
        with pytest.raises(ValueError):
            simulate_ensemble(p, [1.0], st, 2, 0, record_times=[0.3])


class TestIO:
    def test_trajectory_csv(self, tmp_path):
        p = preset("cir").params
        st = SchemeSettings(step=0.25, horizon=1.0)
        traj = simulate(p, [1.0], st, NoiseBundle(0))
        path = tmp_path / "traj.csv"
        trajectory_to_csv(traj, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,x1"
        assert len(lines) == 6  # header + 5 grid points

    def test_sample_dump_roundtrip(self, tmp_path):
        samples = np.random.default_rng(0).normal(size=(17, 3))
        path = tmp_path / "s.bin"
        write_samples(samples, path)
        back = read_samples(path)
        assert np.array_equal(back, samples)
        raw = path.read_bytes()
        assert int.from_bytes(raw[:8], "little") == 17
        assert len(raw) == 8 + 17 * 3 * 8
