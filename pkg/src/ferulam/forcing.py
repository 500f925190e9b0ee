"""Quasi-periodic forcing on the N-torus.

A forcing is a finite trigonometric polynomial

    P(theta) = c0 + sum_k [a_k cos(2 pi k.theta) + b_k sin(2 pi k.theta)]

sampled along the linear flow ``theta(t) = omega + nu t (mod 1)``, which gives
the plate motion ``p_omega(t) = P(omega + nu t)``.  Derivatives along the flow
are closed-form, so ``p``, ``pdot`` and ``pddot`` are exact up to rounding.

Torus points are plain ``numpy`` arrays whose last axis has length N.  All
functions broadcast over leading axes.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * np.pi


def frac(x):
    """Reduce to [0, 1).  ``x - floor(x)`` can round up to 1.0; that is folded to 0."""
    y = np.asarray(x, dtype=float) - np.floor(x)
    return np.where(y >= 1.0, 0.0, y)


def torus_point(theta) -> np.ndarray:
    """Coerce ``theta`` to a float array with every component in [0, 1)."""
    return frac(np.asarray(theta, dtype=float))


def flow_advance(omega, t, nu) -> np.ndarray:
    """Move ``omega`` along the linear flow for time ``t``.

    ``t`` broadcasts against the leading axes of ``omega``.
    """
    omega = np.asarray(omega, dtype=float)
    t = np.asarray(t, dtype=float)
    return frac(omega + t[..., None] * np.asarray(nu, dtype=float))


def resonance_certificate(nu, Q: int = 20, tol: float = 1e-9):
    """Search for a small integer resonance ``|k.nu| < tol`` with ``|k_i| <= Q``.

    Returns the offending integer vector, or ``None`` when the bounded scan
    finds nothing.
    """
    nu = np.asarray(nu, dtype=float)
    n = nu.size
    if n == 1:
        return None
    rng = np.arange(-Q, Q + 1)
    # loop over the leading N-1 coordinates, vectorise the last one
    last = rng[None, :]
    for head in itertools.product(range(-Q, Q + 1), repeat=n - 1):
        partial = float(np.dot(head, nu[:-1]))
        vals = np.abs(partial + last * nu[-1])[0]
        hits = np.flatnonzero(vals < tol)
        for h in hits:
            k = (*head, int(rng[h]))
            if any(k):
                return np.array(k)
    return None


@dataclass(frozen=True)
class ForcingSpec:
    """Finite Fourier description of the forcing on T^N.

    Parameters
    ----------
    nu : array_like
        Frequency vector, shape (N,).  ``nu[0] > 0`` fixes the cross-section
        return time ``S = 1 / nu[0]``.
    c0 : float
        Mean plate distance.
    modes : sequence of (k, a, b)
        Integer wave vector and cosine/sine amplitudes.
    resonance_Q, resonance_tol : int, float
        Bound and threshold of the nonresonance scan run on construction.
        Pass ``resonance_Q=0`` to skip the scan.
    """

    nu: np.ndarray
    c0: float
    modes: tuple = ()
    resonance_Q: int = 20
    resonance_tol: float = 1e-9
    k: np.ndarray = field(init=False, repr=False)
    a_k: np.ndarray = field(init=False, repr=False)
    b_k: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nu = np.array(self.nu, dtype=float).reshape(-1)
        if nu.size < 1:
            raise ValueError("frequency vector must have at least one entry")
        if np.any(nu == 0.0) or not np.all(np.isfinite(nu)):
            raise ValueError("frequencies must be finite and nonzero")
        if nu[0] <= 0.0:
            raise ValueError("nu[0] must be positive")
        modes = tuple(
            (tuple(int(x) for x in k), float(a), float(b)) for k, a, b in self.modes
        )
        for k, _, _ in modes:
            if len(k) != nu.size:
                raise ValueError(f"mode {k} does not match torus dimension {nu.size}")
            if not any(k):
                raise ValueError("the zero mode belongs in c0")
        if modes:
            k = np.array([m[0] for m in modes], dtype=float)
            a_k = np.array([m[1] for m in modes])
            b_k = np.array([m[2] for m in modes])
        else:
            k = np.zeros((0, nu.size))
            a_k = np.zeros(0)
            b_k = np.zeros(0)
        nu.setflags(write=False)
        for arr in (k, a_k, b_k):
            arr.setflags(write=False)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "a_k", a_k)
        object.__setattr__(self, "b_k", b_k)
        if self.lower <= 0.0:
            raise ValueError(
                f"coefficient lower bound a = {self.lower:.6g} must be positive"
            )
        if self.resonance_Q > 0:
            bad = resonance_certificate(nu, self.resonance_Q, self.resonance_tol)
            if bad is not None:
                raise ValueError(f"frequency vector is resonant: k = {bad.tolist()}")

    @property
    def dim(self) -> int:
        return self.nu.size

    @property
    def S(self) -> float:
        """Return time to the cross-section ``theta_1 = 0``."""
        return 1.0 / self.nu[0]

    @property
    def amplitudes(self) -> np.ndarray:
        return np.hypot(self.a_k, self.b_k)

    @property
    def omega_k(self) -> np.ndarray:
        """Angular frequency ``2 pi k.nu`` of each mode along the flow."""
        return TWO_PI * (self.k @ self.nu)

    def _slack(self) -> float:
        # evaluated trig sums carry a few ulps of rounding; keep the bounds outside it
        return 16 * np.finfo(float).eps * (abs(self.c0) + float(self.amplitudes.sum()))

    @property
    def lower(self) -> float:
        """Lower bound ``a`` on P, rounded outward."""
        if not self.modes:
            return self.c0
        return self.c0 - float(self.amplitudes.sum()) - self._slack()

    @property
    def upper(self) -> float:
        """Upper bound ``b`` on P, rounded outward."""
        if not self.modes:
            return self.c0
        return self.c0 + float(self.amplitudes.sum()) + self._slack()

    def derivative_bound(self, order: int) -> float:
        """Coefficient bound on the sup norm of the ``order``-th flow derivative."""
        return float(np.sum(np.abs(self.omega_k) ** order * self.amplitudes))

    @property
    def D1(self) -> float:
        return self.derivative_bound(1)

    @property
    def D2(self) -> float:
        return self.derivative_bound(2)

    @property
    def D3(self) -> float:
        return self.derivative_bound(3)

    def to_dict(self) -> dict:
        return {
            "nu": self.nu.tolist(),
            "c0": self.c0,
            "modes": [{"k": list(k), "a": a, "b": b} for k, a, b in self.modes],
        }

    @classmethod
    def from_dict(cls, d: dict, **kwargs) -> "ForcingSpec":
        modes = [(m["k"], m.get("a", 0.0), m.get("b", 0.0)) for m in d.get("modes", [])]
        return cls(nu=d["nu"], c0=d["c0"], modes=modes, **kwargs)

    @classmethod
    def load(cls, path, **kwargs) -> "ForcingSpec":
        with open(Path(path)) as fh:
            return cls.from_dict(json.load(fh), **kwargs)


def constant_spec(c: float = 2.0, nu=(1.0, math.sqrt(2.0))) -> ForcingSpec:
    """Plate at rest at distance ``c``."""
    return ForcingSpec(nu=nu, c0=c, modes=())


def single_mode_spec() -> ForcingSpec:
    """c0 = 2 with one cosine mode of amplitude 0.1 along theta_1."""
    return ForcingSpec(nu=(1.0, math.sqrt(2.0)), c0=2.0, modes=[((1, 0), 0.1, 0.0)])


def standard_spec() -> ForcingSpec:
    """Two-mode quasi-periodic forcing used throughout the tests and notebooks."""
    return ForcingSpec(
        nu=(1.0, math.sqrt(2.0)),
        c0=2.0,
        modes=[((1, 0), 0.1, 0.0), ((0, 1), 0.0, 0.05)],
    )


def _phases(spec: ForcingSpec, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    return TWO_PI * (omega @ spec.k.T)


def eval_P(spec: ForcingSpec, omega):
    """Value of P at torus point(s) ``omega``."""
    ph = _phases(spec, omega)
    return spec.c0 + np.cos(ph) @ spec.a_k + np.sin(ph) @ spec.b_k


def eval_dpsi_P(spec: ForcingSpec, omega):
    """First derivative of P along the flow direction ``nu``."""
    ph = _phases(spec, omega)
    w = spec.omega_k
    return (-np.sin(ph) * spec.a_k + np.cos(ph) * spec.b_k) @ w


def eval_dpsi2_P(spec: ForcingSpec, omega):
    """Second derivative of P along the flow direction ``nu``."""
    ph = _phases(spec, omega)
    w2 = spec.omega_k**2
    return -(np.cos(ph) * spec.a_k + np.sin(ph) * spec.b_k) @ w2


def eval_all(spec: ForcingSpec, omega):
    """``(P, dP, d2P)`` at ``omega`` sharing one trig evaluation."""
    ph = _phases(spec, omega)
    c, s = np.cos(ph), np.sin(ph)
    w = spec.omega_k
    ca, sb = c * spec.a_k, s * spec.b_k
    p = spec.c0 + ca.sum(axis=-1) + sb.sum(axis=-1)
    dp = (-s * spec.a_k + c * spec.b_k) @ w
    ddp = -(ca + sb) @ (w * w)
    return p, dp, ddp


def eval_p_omega(spec: ForcingSpec, omega, t):
    """``(p, pdot, pddot)`` of the plate motion ``p_omega`` at time ``t``."""
    return eval_all(spec, flow_advance(omega, t, spec.nu))


def grid_points(dim: int, G: int) -> np.ndarray:
    axes = np.meshgrid(*([np.arange(G) / G] * dim), indexing="ij")
    return np.stack([ax.ravel() for ax in axes], axis=-1)


def v_star(spec: ForcingSpec, G: int = 128):
    """Velocity threshold above which the successor map is defined.

    Returns ``(bound, estimate)``: the certified coefficient bound
    ``2 max(D1, 0)`` used for every domain check, and a grid maximisation of
    ``2 max(dP)`` over ``G**N`` points for reporting.
    """
    bound = 2.0 * max(spec.D1, 0.0)
    if spec.k.shape[0] == 0:
        return bound, 0.0
    pts = grid_points(spec.dim, G)
    estimate = 2.0 * max(float(np.max(eval_dpsi_P(spec, pts))), 0.0)
    return bound, estimate


def v_star_bound(spec: ForcingSpec) -> float:
    return 2.0 * max(spec.D1, 0.0)


def energy_threshold(spec: ForcingSpec) -> float:
    """``v*^2 / 2`` with the certified ``v*``."""
    return 0.5 * v_star_bound(spec) ** 2


def find_almost_period(spec, omega, eps, t_grid, T_candidates):
    """First candidate shift ``T`` with ``max |p(t + T) - p(t)| < eps`` on ``t_grid``.

    Returns ``None`` when no candidate qualifies.
    """
    p0 = eval_p_omega(spec, omega, t_grid)[0]
    for T in T_candidates:
        dev = np.max(np.abs(eval_p_omega(spec, omega, t_grid + T)[0] - p0))
        if dev < eps:
            return float(T)
    return None
