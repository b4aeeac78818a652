"""Pure-Python reference stepper.

This is the executable specification of the step algorithm.  The compiled
kernel mirrors it operation-for-operation (same arithmetic order, same
stream consumption order), so both backends produce bit-identical
trajectories from the same noise bundle; this module is the slow but
dependency-free fallback and the ground truth for equivalence tests.

Per-step protocol (state ``x``, step ``h``, left-endpoint coefficients):

1. drift:            ``new = x + h * (c + B x)`` accumulated row by row,
2. common diffusion: ``n`` normals from stream B, ``new_J += sqrt(2h) sigma_a z``,
3. per branching coordinate ``i``: ``d`` normals from stream W_i,
   ``new += sqrt(2 h max(x_i, 0)) sigma_i z`` (normals are drawn even when
   the coefficient is zero so coupled paths stay aligned),
4. state-independent jumps: ``Poisson(h * rate)`` count from stream M, then
   per jump two uniforms through the prepared sampler,
5. per branching coordinate ``i``: ``Poisson(h * rate_i * max(x_i, 0))``
   count from stream N_i, then per jump two uniforms (plus one thinning
   uniform in coupled mode),
6. clamp branching coordinates at zero, 7. overflow guard at 1e12.

Coupled mode shares every draw: one set of normals applied with each path's
own coefficient, one jump count per source taken at the pairwise-maximum
intensity, and thinning ``r <= max(x_i, 0)`` deciding acceptance per path.
"""

from __future__ import annotations

import math

from numpy.random import Generator

from ._model import MAX_STEP_INTENSITY, OVERFLOW_GUARD

__all__ = ["run_path", "run_pair", "NAME"]

NAME = "python"


def _sample(sampler, gen, xi):
    """Draw one truncated jump into the scratch list ``xi``."""
    u1 = gen.random()
    u2 = gen.random()
    vec = sampler.sample_with_uniforms(u1, u2)
    for r in range(len(xi)):
        xi[r] = vec[r]


def _wrap_streams(streams):
    return {
        "B": Generator(streams["B"]) if streams["B"] is not None else None,
        "W": [Generator(s) if s is not None else None for s in streams["W"]],
        "M": Generator(streams["M"]) if streams["M"] is not None else None,
        "N": [Generator(s) if s is not None else None for s in streams["N"]],
    }


def run_path(model, x0, h, n_steps, streams, rec_steps, out, jump_log=None):
    """Advance one path; fill ``out[r]`` with the state after ``rec_steps[r]``."""
    m, n, d = model.m, model.n, model.d
    gens = _wrap_streams(streams)
    x = [float(v) for v in x0]
    xi = [0.0] * d
    sq2h = math.sqrt(2.0 * h)
    rec_pos = 0
    if rec_pos < len(rec_steps) and rec_steps[rec_pos] == 0:
        out[rec_pos, :] = x
        rec_pos += 1
    for k in range(n_steps):
        new = [0.0] * d
        for r in range(d):
            acc = model.drift_c[r]
            for s in range(d):
                acc += model.drift_B[r, s] * x[s]
            new[r] = x[r] + h * acc
        if model.use_common:
            gb = gens["B"]
            zb = [gb.standard_normal() for _ in range(n)]
            for r in range(n):
                acc = 0.0
                for s in range(n):
                    acc += model.sigma_a[r, s] * zb[s]
                new[m + r] += sq2h * acc
        for i in range(m):
            if not model.use_diff[i]:
                continue
            gw = gens["W"][i]
            zw = [gw.standard_normal() for _ in range(d)]
            yi = x[i] if x[i] > 0.0 else 0.0
            coef = math.sqrt(2.0 * h * yi)
            if coef > 0.0:
                for r in range(d):
                    acc = 0.0
                    for s in range(d):
                        acc += model.sigma[i, r, s] * zw[s]
                    new[r] += coef * acc
        if model.nu_rate > 0.0:
            gm = gens["M"]
            cnt = int(gm.poisson(h * model.nu_rate))
            for _ in range(cnt):
                _sample(model.nu_sampler, gm, xi)
                for r in range(d):
                    new[r] += xi[r]
                if jump_log is not None:
                    jump_log.append(((k + 1) * h, "state-independent", tuple(xi)))
        for i in range(m):
            rate = model.mu_rate[i]
            if rate <= 0.0:
                continue
            gn = gens["N"][i]
            yi = x[i] if x[i] > 0.0 else 0.0
            lam = h * rate * yi
            if lam > MAX_STEP_INTENSITY:
                return (k + 1) * h
            if lam > 0.0:
                cnt = int(gn.poisson(lam))
                for _ in range(cnt):
                    _sample(model.mu_samplers[i], gn, xi)
                    for r in range(d):
                        new[r] += xi[r]
                    if jump_log is not None:
                        jump_log.append(((k + 1) * h, f"branching-{i}", tuple(xi)))
        for i in range(m):
            if new[i] < 0.0:
                new[i] = 0.0
        for r in range(d):
            if not (-OVERFLOW_GUARD < new[r] < OVERFLOW_GUARD):
                return (k + 1) * h
        x = new
        if rec_pos < len(rec_steps) and rec_steps[rec_pos] == k + 1:
            out[rec_pos, :] = x
            rec_pos += 1
    return None


def run_pair(model, x0a, x0b, h, n_steps, streams, rec_steps, out_a, out_b):
    """Advance two paths against identical noise (shared-noise coupling)."""
    m, n, d = model.m, model.n, model.d
    gens = _wrap_streams(streams)
    xa = [float(v) for v in x0a]
    xb = [float(v) for v in x0b]
    xi = [0.0] * d
    sq2h = math.sqrt(2.0 * h)
    rec_pos = 0
    if rec_pos < len(rec_steps) and rec_steps[rec_pos] == 0:
        out_a[rec_pos, :] = xa
        out_b[rec_pos, :] = xb
        rec_pos += 1
    for k in range(n_steps):
        na = [0.0] * d
        nb = [0.0] * d
        for r in range(d):
            acc_a = model.drift_c[r]
            acc_b = model.drift_c[r]
            for s in range(d):
                acc_a += model.drift_B[r, s] * xa[s]
                acc_b += model.drift_B[r, s] * xb[s]
            na[r] = xa[r] + h * acc_a
            nb[r] = xb[r] + h * acc_b
        if model.use_common:
            gb = gens["B"]
            zb = [gb.standard_normal() for _ in range(n)]
            for r in range(n):
                acc = 0.0
                for s in range(n):
                    acc += model.sigma_a[r, s] * zb[s]
                na[m + r] += sq2h * acc
                nb[m + r] += sq2h * acc
        for i in range(m):
            if not model.use_diff[i]:
                continue
            gw = gens["W"][i]
            zw = [gw.standard_normal() for _ in range(d)]
            ya = xa[i] if xa[i] > 0.0 else 0.0
            yb = xb[i] if xb[i] > 0.0 else 0.0
            ca = math.sqrt(2.0 * h * ya)
            cb = math.sqrt(2.0 * h * yb)
            for r in range(d):
                acc = 0.0
                for s in range(d):
                    acc += model.sigma[i, r, s] * zw[s]
                if ca > 0.0:
                    na[r] += ca * acc
                if cb > 0.0:
                    nb[r] += cb * acc
        if model.nu_rate > 0.0:
            gm = gens["M"]
            cnt = int(gm.poisson(h * model.nu_rate))
            for _ in range(cnt):
                _sample(model.nu_sampler, gm, xi)
                for r in range(d):
                    na[r] += xi[r]
                    nb[r] += xi[r]
        for i in range(m):
            rate = model.mu_rate[i]
            if rate <= 0.0:
                continue
            gn = gens["N"][i]
            ya = xa[i] if xa[i] > 0.0 else 0.0
            yb = xb[i] if xb[i] > 0.0 else 0.0
            ymax = ya if ya > yb else yb
            lam = h * rate * ymax
            if lam > MAX_STEP_INTENSITY:
                return (k + 1) * h
            if lam > 0.0:
                cnt = int(gn.poisson(lam))
                for _ in range(cnt):
                    _sample(model.mu_samplers[i], gn, xi)
                    r_mark = gn.random() * ymax
                    if r_mark <= ya:
                        for r in range(d):
                            na[r] += xi[r]
                    if r_mark <= yb:
                        for r in range(d):
                            nb[r] += xi[r]
        for i in range(m):
            if na[i] < 0.0:
                na[i] = 0.0
            if nb[i] < 0.0:
                nb[i] = 0.0
        for r in range(d):
            if not (-OVERFLOW_GUARD < na[r] < OVERFLOW_GUARD) or not (
                -OVERFLOW_GUARD < nb[r] < OVERFLOW_GUARD
            ):
                return (k + 1) * h
        xa = na
        xb = nb
        if rec_pos < len(rec_steps) and rec_steps[rec_pos] == k + 1:
            out_a[rec_pos, :] = xa
            out_b[rec_pos, :] = xb
            rec_pos += 1
    return None
