"""Monte Carlo front-end: single paths, shared-noise pairs, ensembles.

Randomness model
----------------
All noise derives from one master seed through counter-based Philox streams.
Stream keys hash ``(seed, path index, source id)``, so

* every path owns statistically independent streams,
* per-path results never depend on scheduling or worker count,
* rerunning any configuration is bit-exact.

Sources: ``B`` (common Brownian motion on the real block), ``W_i`` (one
d-dimensional Brownian motion per branching coordinate), ``M``
(state-independent jumps), ``N_i`` (state-dependent jump marks including
the thinning uniforms).  Coupled pairs consume the identical streams, which
realizes the monotone coupling for the branching block.

Output surfaces: trajectory CSV ``t, x_1..x_d`` and a binary sample dump
(little-endian: ``u64`` sample count, then the ``count * d`` float64 state
matrix row-major), the exchange format consumed by the transport-distance
tooling.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Philox, SeedSequence

from ..params import AdmissibleParameters
from . import backend as _backend_mod
from ._model import ExplosionError, SchemeSettings, StepModel

__all__ = [
    "NoiseBundle",
    "Trajectory",
    "EnsembleResult",
    "simulate",
    "simulate_coupled",
    "simulate_ensemble",
    "trajectory_to_csv",
    "write_samples",
    "read_samples",
]

_SRC_B = 0
_SRC_W = 1  # W_i -> 1 + i
_SRC_M = 10_000
_SRC_N = 10_001  # N_i -> 10_001 + i

_MASK64 = (1 << 64) - 1
_GAMMA_PATH = 0x9E3779B97F4A7C15
_GAMMA_SRC = 0xBF58476D1CE4E5B9


def _mix64(z: int) -> int:
    """SplitMix64 finalizer; bijective on 64-bit words."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _stream_key(base0: int, base1: int, path: int, source: int):
    """128-bit Philox key for one (path, source) slot.

    Distinct slots map to distinct keys, and Philox streams under distinct
    keys are independent by construction (counter-based cipher), so path
    results never depend on scheduling.
    """
    x = (base0 + _GAMMA_PATH * (path + 1) + _GAMMA_SRC * (source + 1)) & _MASK64
    return _mix64(x), _mix64(x ^ base1)


def _seed_base(seed: int):
    base = SeedSequence(seed).generate_state(2, np.uint64)
    return int(base[0]), int(base[1])


@dataclass(frozen=True)
class NoiseBundle:
    """Replayable noise identity: master seed plus path index."""

    seed: int
    path: int = 0

    def _philox(self, source: int) -> Philox:
        b0, b1 = _seed_base(self.seed)
        key = np.asarray(_stream_key(b0, b1, self.path, source), dtype=np.uint64)
        return Philox(key=key)

    def streams(self, usage: dict) -> dict:
        """Materialize bit generators for the sources the model consumes."""
        m = len(usage["W"])
        return {
            "B": self._philox(_SRC_B) if usage["B"] else None,
            "W": [self._philox(_SRC_W + i) if usage["W"][i] else None for i in range(m)],
            "M": self._philox(_SRC_M) if usage["M"] else None,
            "N": [self._philox(_SRC_N + i) if usage["N"][i] else None for i in range(m)],
        }


class _StreamFactory:
    """Per-worker stream supplier reusing template bit generators.

    Re-keys one Philox object per source slot instead of constructing fresh
    ones per path (construction draws OS entropy it never uses).  The keys
    are exactly those of :class:`NoiseBundle`, so fast-path ensembles and
    single-path runs see identical streams.
    """

    def __init__(self, seed: int, usage: dict):
        self._b0, self._b1 = _seed_base(seed)
        m = len(usage["W"])
        self._slots = []  # (group, index, source_id, Philox, state dict)
        layout = [("B", None, _SRC_B, usage["B"]), ("M", None, _SRC_M, usage["M"])]
        layout += [("W", i, _SRC_W + i, usage["W"][i]) for i in range(m)]
        layout += [("N", i, _SRC_N + i, usage["N"][i]) for i in range(m)]
        self._streams = {"B": None, "M": None, "W": [None] * m, "N": [None] * m}
        for group, idx, source, used in layout:
            if not used:
                continue
            bg = Philox(key=0)
            state = bg.state
            self._slots.append((group, idx, source, bg, state))
            if idx is None:
                self._streams[group] = bg
            else:
                self._streams[group][idx] = bg

    def streams(self, path: int) -> dict:
        for _, _, source, bg, state in self._slots:
            k0, k1 = _stream_key(self._b0, self._b1, path, source)
            inner = state["state"]
            inner["counter"][:] = 0
            inner["key"][0] = k0
            inner["key"][1] = k1
            state["buffer_pos"] = 4
            state["has_uint32"] = 0
            state["uinteger"] = 0
            bg.state = state
        return self._streams


@dataclass
class Trajectory:
    """One simulated path on the step grid."""

    times: np.ndarray
    states: np.ndarray  # (K+1, d)
    jump_log: list | None = None

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


def _check_start(params: AdmissibleParameters, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (params.dims.d,):
        raise ValueError(f"start point must have dimension {params.dims.d}")
    if np.any(x[: params.dims.m] < 0):
        raise ValueError("branching coordinates of the start point must be nonnegative")
    return x


def _model_for(params: AdmissibleParameters, settings: SchemeSettings) -> StepModel:
    return StepModel.build(params, settings)


def simulate(
    params: AdmissibleParameters,
    x,
    settings: SchemeSettings,
    noise: NoiseBundle,
    backend: str | None = None,
    log_jumps: bool = False,
    _model: StepModel | None = None,
) -> Trajectory:
    """Strong-solution surrogate for one path; records every grid time."""
    x = _check_start(params, x)
    model = _model_for(params, settings) if _model is None else _model
    be = _backend_mod.get_backend(backend)
    n_steps = settings.n_steps
    rec = np.arange(n_steps + 1, dtype=np.int64)
    out = np.empty((n_steps + 1, model.d))
    jump_log: list | None = [] if log_jumps else None
    streams = noise.streams(model.source_usage())
    boom = be.run_path(model, x, settings.step, n_steps, streams, rec, out, jump_log=jump_log)
    if boom is not None:
        raise ExplosionError(boom)
    return Trajectory(times=rec * settings.step, states=out, jump_log=jump_log)


def simulate_coupled(
    params: AdmissibleParameters,
    x,
    x_alt,
    settings: SchemeSettings,
    noise: NoiseBundle,
    backend: str | None = None,
    _model: StepModel | None = None,
) -> tuple:
    """Two paths driven by the identical noise bundle (monotone coupling)."""
    x = _check_start(params, x)
    x_alt = _check_start(params, x_alt)
    model = _model_for(params, settings) if _model is None else _model
    be = _backend_mod.get_backend(backend)
    n_steps = settings.n_steps
    rec = np.arange(n_steps + 1, dtype=np.int64)
    out_a = np.empty((n_steps + 1, model.d))
    out_b = np.empty((n_steps + 1, model.d))
    streams = noise.streams(model.source_usage())
    boom = be.run_pair(model, x, x_alt, settings.step, n_steps, streams, rec, out_a, out_b)
    if boom is not None:
        raise ExplosionError(boom)
    times = rec * settings.step
    return Trajectory(times, out_a), Trajectory(times, out_b)


@dataclass
class EnsembleResult:
    """Sample matrices at the requested times plus running summaries."""

    times: np.ndarray  # (R,)
    samples: np.ndarray  # (R, N, d)
    mean: np.ndarray = field(init=False)
    moment_root: np.ndarray = field(init=False)  # E (1+|x|^2)^(1/2)
    moment_log: np.ndarray = field(init=False)  # E log(1+|x|^2)

    def __post_init__(self):
        sq = 1.0 + np.sum(self.samples**2, axis=2)
        self.mean = self.samples.mean(axis=1)
        self.moment_root = np.sqrt(sq).mean(axis=1)
        self.moment_log = np.log(sq).mean(axis=1)

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} not recorded")
        return self.samples[k]


def simulate_ensemble(
    params: AdmissibleParameters,
    x,
    settings: SchemeSettings,
    n_paths: int,
    seed: int,
    record_times=None,
    backend: str | None = None,
    workers: int = 1,
) -> EnsembleResult:
    """Independent paths from per-path derived streams.

    Results are identical for any ``workers`` value: each path writes its
    own slice and owns its own streams, so the merge is order-free.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    x = _check_start(params, x)
    model = _model_for(params, settings)
    be = _backend_mod.get_backend(backend)
    n_steps = settings.n_steps
    if record_times is None:
        record_times = [settings.horizon]
    rec = np.asarray(sorted(settings.step_of_time(t) for t in record_times), dtype=np.int64)
    if len(set(rec.tolist())) != len(rec):
        raise ValueError("record times must be distinct grid times")
    out = np.empty((len(rec), n_paths, model.d))
    usage = model.source_usage()
    h = settings.step

    def run_range(lo: int, hi: int):
        factory = _StreamFactory(seed, usage)
        scratch = np.empty((len(rec), model.d))
        for p in range(lo, hi):
            streams = factory.streams(p)
            boom = be.run_path(model, x, h, n_steps, streams, rec, scratch)
            if boom is not None:
                raise ExplosionError(boom)
            out[:, p, :] = scratch

    if workers <= 1 or n_paths < 2 * workers:
        run_range(0, n_paths)
    else:
        from concurrent.futures import ThreadPoolExecutor

        bounds = np.linspace(0, n_paths, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_range, bounds[w], bounds[w + 1]) for w in range(workers)
            ]
            for f in futures:
                f.result()
    return EnsembleResult(times=rec * h, samples=out)


# ---------------------------------------------------------------------------
# Output surfaces
# ---------------------------------------------------------------------------


def trajectory_to_csv(traj: Trajectory, path):
    """Write ``t, x_1..x_d`` rows."""
    d = traj.states.shape[1]
    header = "t," + ",".join(f"x{k + 1}" for k in range(d))
    body = np.column_stack([traj.times, traj.states])
    np.savetxt(path, body, delimiter=",", header=header, comments="", fmt="%.17g")


def write_samples(samples: np.ndarray, path):
    """Binary dump: little-endian u64 count, then count*d float64 row-major."""
    samples = np.ascontiguousarray(samples, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", samples.shape[0]))
        fh.write(samples.tobytes())


def read_samples(path) -> np.ndarray:
    with open(path, "rb") as fh:
        (count,) = struct.unpack("<Q", fh.read(8))
        flat = np.frombuffer(fh.read(), dtype="<f8")
    if count == 0:
        return flat.reshape(0, 0)
    if flat.size % count:
        raise ValueError("corrupt sample dump: size not divisible by count")
    return flat.reshape(count, flat.size // count)
