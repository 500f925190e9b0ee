"""Impact-time equations.

Both the planar equation ``(t - t0) v0 = p(t)`` and the skew equation
``tau sqrt(2 E0) = P(omega0 + nu tau)`` are the same scalar problem in the
flight time ``d``::

    g(d) = d v - P(base + nu d),    g'(d) = v - dP(base + nu d)

with ``base`` the torus point at the launch time.  Since ``a <= P <= b`` the
root lies in ``[a/v, b/v]``, and for ``v > v*`` the slope is at least
``v - D1 > v/2``, so the root is unique.  The solver is Newton's method kept
inside that bracket, falling back to bisection whenever a step leaves it or
the slope degenerates.  Everything is vectorised over batches of launches.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import BelowThreshold, NoConvergence
from .forcing import ForcingSpec, eval_all, flow_advance, v_star_bound

MAX_ITER = 200
RESIDUAL_SCALE = 1e-12


class SolveResult(NamedTuple):
    root: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    bracket: tuple
    offset: np.ndarray  # root minus launch time; exact flight time


def _flight_time(spec: ForcingSpec, base, v, tol, max_iter=MAX_ITER):
    """Solve ``d v = P(base + nu d)`` for every row of ``base``.

    Returns ``(d, g, iterations, lo, hi)`` where ``g`` is the residual of the
    returned ``d`` and ``[lo, hi]`` the initial bracket.
    """
    base = np.asarray(base, dtype=float)
    shape = base.shape[:-1]
    base = base.reshape(-1, base.shape[-1])
    v = np.broadcast_to(np.asarray(v, dtype=float), shape).reshape(-1)
    tol = np.broadcast_to(np.asarray(tol, dtype=float), shape).reshape(-1)
    lo0 = spec.lower / v
    hi0 = spec.upper / v
    lo, hi = lo0.copy(), hi0.copy()
    nu = spec.nu

    def g_and_slope(d, rows):
        P, dP, _ = eval_all(spec, flow_advance(base[rows], d, nu))
        return d * v[rows] - P, v[rows] - dP

    d = np.clip(eval_all(spec, base)[0] / v, lo, hi)
    g = np.empty_like(d)
    iters = np.zeros(d.shape, dtype=np.int64)
    active = np.arange(d.size)

    for _ in range(max_iter):
        if active.size == 0:
            break
        dd = d[active]
        gg, slope = g_and_slope(dd, active)
        g[active] = gg
        done = np.abs(gg) <= tol[active]
        # g is increasing in d, so its sign tells which end to move
        neg = gg < 0.0
        lo[active] = np.where(neg, dd, lo[active])
        hi[active] = np.where(neg, hi[active], dd)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = dd - gg / slope
        bad = (slope < 0.5 * v[active]) | ~(step > lo[active]) | ~(step < hi[active])
        step = np.where(bad, 0.5 * (lo[active] + hi[active]), step)
        d[active] = np.where(done, dd, step)
        iters[active] += ~done
        # one extra Newton step on converged entries, kept only if it helps
        pol = done & ~bad
        if np.any(pol):
            rows = active[pol]
            cand = step[pol]
            gc, _ = g_and_slope(cand, rows)
            better = np.abs(gc) < np.abs(gg[pol])
            d[rows] = np.where(better, cand, d[rows])
            g[rows] = np.where(better, gc, g[rows])
        active = active[~done]
    if active.size:
        raise NoConvergence(
            f"{active.size} impact-time solves missed tolerance after {max_iter} iterations"
        )
    return (
        d.reshape(shape),
        g.reshape(shape),
        iters.reshape(shape),
        lo0.reshape(shape),
        hi0.reshape(shape),
    )


def _check_slope(spec, base, d, v):
    dP = eval_all(spec, flow_advance(base, d, spec.nu))[1]
    if np.any(1.0 - dP / v < 0.5):
        raise NoConvergence("implicit-function margin 1 - dP/v >= 1/2 violated at root")


def _scalarize(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def solve_impact_time(spec: ForcingSpec, omega, t0, v0) -> SolveResult:
    """Next impact time ``t`` on the moving plate: ``(t - t0) v0 = p_omega(t)``.

    ``omega`` is the torus point at time 0; ``t0`` and ``v0`` broadcast.
    """
    t0 = np.asarray(t0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if np.any(~(v0 > v_star_bound(spec))):
        raise BelowThreshold(f"v0 must exceed v* = {v_star_bound(spec):.6g}")
    omega = np.asarray(omega, dtype=float)
    shape = np.broadcast_shapes(omega.shape[:-1], t0.shape, v0.shape)
    omega = np.broadcast_to(omega, shape + omega.shape[-1:])
    t0 = np.broadcast_to(t0, shape)
    v0 = np.broadcast_to(v0, shape)
    base = flow_advance(omega, t0, spec.nu)
    tol = RESIDUAL_SCALE * max(1.0, spec.upper)
    d, g, iters, lo, hi = _flight_time(spec, base, v0, tol)
    _check_slope(spec, base, d, v0)
    return SolveResult(
        _scalarize(t0 + d),
        _scalarize(np.abs(g)),
        _scalarize(iters),
        (_scalarize(t0 + lo), _scalarize(t0 + hi)),
        _scalarize(d),
    )


def solve_tau(spec: ForcingSpec, omega0, E0) -> SolveResult:
    """Flight time ``tau = P(omega0 + nu tau) / sqrt(2 E0)`` from torus point ``omega0``.

    The residual reported is the fixed-point residual
    ``|tau - P(omega0 + nu tau) / sqrt(2 E0)|``.
    """
    E0 = np.asarray(E0, dtype=float)
    if np.any(~(E0 > 0.5 * v_star_bound(spec) ** 2)):
        raise BelowThreshold("E0 must exceed v*^2 / 2")
    omega0 = np.asarray(omega0, dtype=float)
    shape = np.broadcast_shapes(omega0.shape[:-1], E0.shape)
    omega0 = np.broadcast_to(omega0, shape + omega0.shape[-1:])
    v = np.sqrt(2.0 * np.broadcast_to(E0, shape))
    d, g, iters, lo, hi = _flight_time(spec, omega0, v, RESIDUAL_SCALE * v)
    _check_slope(spec, omega0, d, v)
    return SolveResult(
        _scalarize(d),
        _scalarize(np.abs(g) / v),
        _scalarize(iters),
        (_scalarize(lo), _scalarize(hi)),
        _scalarize(d),
    )
