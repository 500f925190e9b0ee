"""Successor maps of the ping-pong.

A particle leaves the fixed plate at ``x = 0`` at time ``t0`` with speed
``v0``, hits the moving plate ``x = p(t)`` at the first ``t~`` with
``(t~ - t0) v0 = p(t~)``, is reflected with speed ``v1 = v0 - 2 pdot(t~)``
and returns to ``x = 0`` at ``t1 = t~ + p(t~) / v1``.

Three equivalent descriptions are provided:

* ``step_tv``   -- planar map in time and speed;
* ``step_te``   -- planar map in time and energy ``E = v^2 / 2`` (area-preserving);
* ``step_skew`` -- the map on ``T^N x (0, inf)`` that carries the phase of the
  forcing instead of the absolute time.

Each accepts scalars or batches.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .collision import _flight_time, solve_tau, RESIDUAL_SCALE
from .exceptions import BelowThreshold, ConstructionFailed, NoConvergence
from .forcing import ForcingSpec, eval_all, flow_advance, v_star_bound, energy_threshold


class PhaseStateTV(NamedTuple):
    t: np.ndarray
    v: np.ndarray


class PhaseStateTE(NamedTuple):
    t: np.ndarray
    E: np.ndarray


class SkewState(NamedTuple):
    omega: np.ndarray
    E: np.ndarray


def _impact(spec: ForcingSpec, omega, t0, v0):
    """Flight to the moving plate.

    Returns ``(t_impact, P, dP, residual)`` with the forcing and its flow
    derivative evaluated at the impact.
    """
    t0 = np.asarray(t0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if np.any(~(v0 > v_star_bound(spec))):
        raise BelowThreshold(f"speed must exceed v* = {v_star_bound(spec):.6g}")
    omega = np.asarray(omega, dtype=float)
    shape = np.broadcast_shapes(omega.shape[:-1], t0.shape, v0.shape)
    base = flow_advance(np.broadcast_to(omega, shape + omega.shape[-1:]), np.broadcast_to(t0, shape), spec.nu)
    v0 = np.broadcast_to(v0, shape)
    d, g, _, _, _ = _flight_time(spec, base, v0, RESIDUAL_SCALE * max(1.0, spec.upper))
    P, dP, _ = eval_all(spec, flow_advance(base, d, spec.nu))
    return t0 + d, P, dP, np.abs(g)


def step_tv(spec: ForcingSpec, omega, s: PhaseStateTV) -> PhaseStateTV:
    t_hit, P, dP, _ = _impact(spec, omega, s.t, s.v)
    v1 = s.v - 2.0 * dP
    return PhaseStateTV(t_hit + P / v1, v1)


def _step_te(spec, omega, t0, E0):
    E0 = np.asarray(E0, dtype=float)
    if np.any(~(E0 > energy_threshold(spec))):
        raise BelowThreshold(f"energy must exceed v*^2/2 = {energy_threshold(spec):.6g}")
    t_hit, P, dP, res = _impact(spec, omega, t0, np.sqrt(2.0 * E0))
    # E0 + G with G = 2 dP (dP - sqrt(2 E0)); equal to (sqrt(E0) - sqrt(2) dP)^2,
    # but exact when dP = 0 and positive since sqrt(2 E0) > 2 dP above threshold
    E1 = E0 + 2.0 * dP * (dP - np.sqrt(2.0 * E0))
    t1 = t_hit + P / np.sqrt(2.0 * E1)
    return t1, E1, res


def step_te(spec: ForcingSpec, omega, s: PhaseStateTE) -> PhaseStateTE:
    t1, E1, _ = _step_te(spec, omega, s.t, s.E)
    return PhaseStateTE(t1, E1)


def skew_parts(spec: ForcingSpec, omega0, E0):
    """Return time ``F`` and energy increment ``G`` of the skew map."""
    E0 = np.asarray(E0, dtype=float)
    tau = solve_tau(spec, omega0, E0).root
    P, dP, _ = eval_all(spec, flow_advance(omega0, tau, spec.nu))
    G = 2.0 * dP * (dP - np.sqrt(2.0 * E0))
    E1 = E0 + G
    F = (1.0 / np.sqrt(2.0 * E0) + 1.0 / np.sqrt(2.0 * E1)) * P
    return F, G


def step_skew(spec: ForcingSpec, s: SkewState, E_threshold: float | None = None) -> SkewState:
    thr = energy_threshold(spec) if E_threshold is None else max(E_threshold, energy_threshold(spec))
    E0 = np.asarray(s.E, dtype=float)
    if np.any(~(E0 > thr)):
        raise BelowThreshold(f"energy must exceed {thr:.6g}")
    F, G = skew_parts(spec, s.omega, E0)
    return SkewState(flow_advance(s.omega, F, spec.nu), E0 + G)


def default_floor(spec: ForcingSpec) -> float:
    return 1.01 * energy_threshold(spec)


class Status(enum.Enum):
    COMPLETED = "Completed"
    LEFT_DOMAIN = "LeftDomain"
    DIVERGED = "Diverged"


@dataclass
class OrbitTrace:
    """One forward orbit of ``step_te`` with per-step diagnostics.

    ``residuals[i]`` belongs to the solve that produced state ``i + 1``.
    ``status_step`` is the number of completed steps for ``COMPLETED`` and
    the offending step index otherwise.
    """

    t: np.ndarray
    E: np.ndarray
    W: np.ndarray
    residuals: np.ndarray
    status: Status
    status_step: int
    omega: np.ndarray = field(default=None, repr=False)

    @property
    def states(self):
        return [PhaseStateTE(t, E) for t, E in zip(self.t, self.E)]

    def __len__(self):
        return len(self.t)


@dataclass
class BatchTrace:
    """Orbits of a batch, padded with NaN after an orbit stops."""

    t: np.ndarray  # (n_max + 1, M)
    E: np.ndarray
    W: np.ndarray
    residuals: np.ndarray  # (n_max, M)
    status: np.ndarray  # object array of Status
    status_step: np.ndarray

    def orbit(self, j: int) -> OrbitTrace:
        n = self.status_step[j]
        stop = n + 1
        return OrbitTrace(
            self.t[:stop, j].copy(),
            self.E[:stop, j].copy(),
            self.W[:stop, j].copy(),
            self.residuals[:n, j].copy(),
            self.status[j],
            int(n),
        )


def iterate_batch(spec: ForcingSpec, omega, t0, E0, n_max: int, E_floor: float | None = None) -> BatchTrace:
    """Iterate ``step_te`` for a batch of orbits sharing or not sharing ``omega``.

    An orbit stops with ``LEFT_DOMAIN`` as soon as its energy drops to
    ``E_floor`` or below, and with ``DIVERGED`` if a solve fails.
    """
    floor = default_floor(spec) if E_floor is None else E_floor
    if floor < energy_threshold(spec):
        raise ValueError("E_floor must be at least v*^2 / 2")
    t0 = np.atleast_1d(np.asarray(t0, dtype=float))
    E0 = np.atleast_1d(np.asarray(E0, dtype=float))
    M = np.broadcast_shapes(t0.shape, E0.shape)[0]
    omega = np.broadcast_to(np.asarray(omega, dtype=float), (M, spec.dim))
    if np.any(~(np.broadcast_to(E0, (M,)) > floor)):
        raise BelowThreshold("initial energy must exceed E_floor")
    t = np.full((n_max + 1, M), np.nan)
    E = np.full((n_max + 1, M), np.nan)
    res = np.full((n_max, M), np.nan)
    t[0] = t0
    E[0] = E0
    status = np.full(M, Status.COMPLETED, dtype=object)
    status_step = np.full(M, n_max, dtype=np.int64)
    active = np.arange(M)
    for n in range(n_max):
        if active.size == 0:
            break
        try:
            t1, E1, r = _step_te(spec, omega[active], t[n, active], E[n, active])
        except NoConvergence:
            t1, E1, r, failed = _step_one_by_one(spec, omega[active], t[n, active], E[n, active])
            status[active[failed]] = Status.DIVERGED
            status_step[active[failed]] = n
            keep = ~failed
            active, t1, E1, r = active[keep], t1[keep], E1[keep], r[keep]
        t[n + 1, active] = t1
        E[n + 1, active] = E1
        res[n, active] = r
        left = E1 <= floor
        if np.any(left):
            status[active[left]] = Status.LEFT_DOMAIN
            status_step[active[left]] = n + 1
            active = active[~left]
    W = np.full_like(E, np.nan)
    ok = ~np.isnan(t)
    cols = np.nonzero(ok)
    P = eval_all(spec, flow_advance(omega[cols[1]], t[cols], spec.nu))[0]
    W[cols] = P**2 * E[cols]
    return BatchTrace(t, E, W, res, status, status_step)


def _step_one_by_one(spec, omega, t, E):
    t1 = np.full(t.shape, np.nan)
    E1 = np.full(t.shape, np.nan)
    r = np.full(t.shape, np.nan)
    failed = np.zeros(t.shape, dtype=bool)
    for i in range(t.size):
        try:
            t1[i], E1[i], r[i] = _step_te(spec, omega[i], t[i], E[i])
        except NoConvergence:
            failed[i] = True
    return t1, E1, r, failed


def iterate(spec: ForcingSpec, omega, s0: PhaseStateTE, n_max: int, E_floor: float | None = None) -> OrbitTrace:
    bt = iterate_batch(spec, np.asarray(omega)[None, :], s0.t, s0.E, n_max, E_floor)
    tr = bt.orbit(0)
    tr.omega = np.asarray(omega, dtype=float)
    return tr


def iterate_skew(spec: ForcingSpec, s0: SkewState, n_max: int):
    """``n_max`` steps of ``step_skew``; returns arrays ``(omega_n, E_n)``."""
    omega = np.empty((n_max + 1, spec.dim))
    E = np.empty(n_max + 1)
    omega[0], E[0] = s0.omega, s0.E
    for n in range(n_max):
        s = step_skew(spec, SkewState(omega[n], E[n]))
        omega[n + 1], E[n + 1] = s.omega, s.E
    return omega, E


def jacobian_det_estimate(spec: ForcingSpec, omega, s: PhaseStateTE, h: float = 1e-6):
    """Central-difference determinant of the Jacobian of ``step_te`` at ``s``."""
    t = np.asarray(s.t, dtype=float)
    E = np.asarray(s.E, dtype=float)
    tt = np.stack([t + h, t - h, t, t])
    EE = np.stack([E, E, E + h, E - h])
    omega = np.asarray(omega, dtype=float)
    t1, E1, _ = _step_te(spec, omega, tt, EE)
    dt1_dt = (t1[0] - t1[1]) / (2 * h)
    dE1_dt = (E1[0] - E1[1]) / (2 * h)
    dt1_dE = (t1[2] - t1[3]) / (2 * h)
    dE1_dE = (E1[2] - E1[3]) / (2 * h)
    return dt1_dt * dE1_dE - dt1_dE * dE1_dt


# -- a forcing for which the planar map is not injective -------------------------


@dataclass(frozen=True)
class TimeForcing:
    """Forcing given directly as a function of time."""

    p: Callable[[float], float]
    pdot: Callable[[float], float]
    lower: float
    upper: float
    sup_pdot: float
    description: dict


def tv_step_time_forcing(forcing: TimeForcing, t0: float, v0: float):
    """``step_tv`` for a time-domain forcing; the impact is bracketed and found by Brent's method."""
    if not v0 > max(forcing.sup_pdot, 0.0):
        raise BelowThreshold("speed must exceed sup pdot for a unique impact")
    g = lambda t: (t - t0) * v0 - forcing.p(t)
    t_hit = brentq(g, t0 + forcing.lower / v0, t0 + forcing.upper / v0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    v1 = v0 - 2.0 * forcing.pdot(t_hit)
    return t_hit + forcing.p(t_hit) / v1, v1


def twin_peak_forcing(c: float = 3.0, A: float = 1.0, B: float = 0.5) -> TimeForcing:
    """Period-2 forcing whose velocity peaks at every integer with falling height.

    ``pdot(t) = A cos(2 pi t) - B (1 - cos 2 pi t) sin(pi t)`` never exceeds
    ``A`` when ``0 <= B <= A``, with equality exactly at the integers, while
    ``p(0) - p(1) = 8 B / (3 pi) > 0``.
    """
    pi = math.pi

    def p(t):
        return c + A / (2 * pi) * math.sin(2 * pi * t) + B * (
            1.5 / pi * math.cos(pi * t) - math.cos(3 * pi * t) / (6 * pi)
        )

    def pdot(t):
        return A * math.cos(2 * pi * t) - B * (1.0 - math.cos(2 * pi * t)) * math.sin(pi * t)

    swing = A / (2 * pi) + B * (1.5 / pi + 1.0 / (6 * pi))
    return TimeForcing(
        p=p,
        pdot=pdot,
        lower=c - swing,
        upper=c + swing,
        sup_pdot=A,
        description={
            "kind": "time-domain",
            "p": "c + A/(2 pi) sin(2 pi t) + B (3/(2 pi) cos(pi t) - cos(3 pi t)/(6 pi))",
            "c": c,
            "A": A,
            "B": B,
        },
    )


class NonInjectivityExample(NamedTuple):
    forcing: dict
    pre1: PhaseStateTV
    pre2: PhaseStateTV
    image1: PhaseStateTV
    image2: PhaseStateTV
    v1: float
    max_diff: float


def noninjective_speed(p1: float, p2: float, t1: float, t2: float) -> float:
    """Speed ``v`` with ``t1 + p1 / v = t2 + p2 / v``."""
    return (p1 - p2) / (t2 - t1)


def build_noninjectivity_example(forcing: TimeForcing | None = None, t_hits=(0.0, 1.0)) -> NonInjectivityExample:
    """Two launches at the same speed that land on the same successor state.

    Both impacts happen where ``pdot`` is maximal, so both are reflected to
    the same speed, and the launch times are chosen so that both particles
    arrive back at ``x = 0`` simultaneously.
    """
    forcing = twin_peak_forcing() if forcing is None else forcing
    ta, tb = t_hits
    grid = np.linspace(ta - 2.0, tb + 2.0, 40001)
    peak = max(forcing.pdot(x) for x in grid)
    if not (
        ta < tb
        and abs(forcing.pdot(ta) - peak) < 1e-12
        and abs(forcing.pdot(tb) - peak) < 1e-12
        and abs(peak - forcing.sup_pdot) < 1e-9
        and forcing.p(ta) > forcing.p(tb)
    ):
        raise ConstructionFailed("forcing does not peak at both impact times with falling p")
    pa, pb = forcing.p(ta), forcing.p(tb)
    v1 = noninjective_speed(pa, pb, ta, tb)
    v0 = v1 + 2.0 * forcing.pdot(ta)
    pre1 = PhaseStateTV(ta - pa / v0, v0)
    pre2 = PhaseStateTV(tb - pb / v0, v0)
    im1 = PhaseStateTV(*tv_step_time_forcing(forcing, *pre1))
    im2 = PhaseStateTV(*tv_step_time_forcing(forcing, *pre2))
    diff = max(abs(im1.t - im2.t), abs(im1.v - im2.v))
    if not diff < 1e-9:
        raise ConstructionFailed(f"images differ by {diff:.3g}")
    return NonInjectivityExample(forcing.description, pre1, pre2, im1, im2, v1, diff)


# -- empirical injectivity probe -------------------------------------------------


class ProbeLevel(NamedTuple):
    E: float
    min_dt1: float  # smallest increment of t1 along a fixed-E0 line
    min_dE1: float  # smallest increment of E1 along a fixed-t0 line
    passed: bool


def injectivity_probe(step, levels, t_range=(0.0, 1.0), n_t: int = 400, n_E: int = 200, n_lines: int = 8):
    """Line-wise injectivity test of a planar map ``step(t0, E0) -> (t1, E1)``.

    For each level ``E`` the map is evaluated on ``n_lines`` lines of fixed
    energy in ``[E, 2E]`` (``t0`` running over ``t_range``) and on ``n_lines``
    lines of fixed ``t0`` (``E0`` running over ``[E, 2E]``).  A level passes
    when ``t1`` increases strictly along every fixed-energy line and ``E1``
    along every fixed-time line, so that no two points of one line share an
    image.  This is a finite probe, not a proof of injectivity.

    Returns the list of ``ProbeLevel`` records and the smallest level from
    which every higher level passes (``None`` if the top level fails).
    """
    t = np.linspace(*t_range, n_t)
    out = []
    for E in levels:
        Es = np.linspace(E, 2.0 * E, n_lines)
        T, EE = np.meshgrid(t, Es, indexing="ij")  # fixed-energy lines are columns
        t1, _ = step(T, EE)
        Eline = np.linspace(E, 2.0 * E, n_E)
        ts = np.linspace(*t_range, n_lines, endpoint=False)
        T2, E2 = np.meshgrid(ts, Eline, indexing="ij")  # fixed-time lines are rows
        _, E1 = step(T2, E2)
        dt1 = float(np.min(np.diff(t1, axis=0)))
        dE1 = float(np.min(np.diff(E1, axis=1)))
        out.append(ProbeLevel(float(E), dt1, dE1, dt1 > 0.0 and dE1 > 0.0))
    smallest = None
    for rec in reversed(out):
        if not rec.passed:
            break
        smallest = rec.E
    return out, smallest


def te_stepper(spec: ForcingSpec, omega):
    """``(t0, E0) -> (t1, E1)`` for ``step_te`` at fixed ``omega``, for ``injectivity_probe``."""
    omega = np.asarray(omega, dtype=float)

    def step(t, E):
        t1, E1, _ = _step_te(spec, omega, t, E)
        return t1, E1

    return step


def time_forcing_stepper(forcing: TimeForcing):
    """Energy-coordinate map of a ``TimeForcing``, for ``injectivity_probe``."""

    def one(t, E):
        t1, v1 = tv_step_time_forcing(forcing, float(t), math.sqrt(2.0 * E))
        return t1, 0.5 * v1 * v1

    vec = np.vectorize(one)
    return lambda t, E: vec(t, E)
