"""Adiabatic invariant ``W = p^2 E`` and the recurrence bands built from it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import zeta

from .forcing import ForcingSpec, energy_threshold, eval_dpsi2_P, eval_P, eval_p_omega, flow_advance
from .pingpong import PhaseStateTE, _step_te
from .rng import haar_sample, stream_key, uniform_stream


def eval_W(spec: ForcingSpec, omega, E):
    return eval_P(spec, omega) ** 2 * np.asarray(E, dtype=float)


def lipschitz_d2(spec: ForcingSpec, metric: str = "flow") -> float:
    """Lipschitz constant of the second flow derivative of P.

    ``metric="flow"`` measures distance as elapsed flow time (this is ``D3``);
    ``metric="torus"`` uses the Euclidean distance of the lifted torus points.
    """
    if metric == "flow":
        return spec.D3
    if metric == "torus":
        knorm = np.linalg.norm(spec.k, axis=-1)
        return float(np.sum(spec.omega_k**2 * 2 * np.pi * knorm * spec.amplitudes))
    raise ValueError(f"unknown metric {metric!r}")


def delta_modulus(spec: ForcingSpec, E0, C: float = 1.0, metric: str = "flow"):
    """Upper bound ``E0^-1/2 (1 + C L)`` on the drift modulus, ``L`` from ``lipschitz_d2``."""
    E0 = np.asarray(E0, dtype=float)
    return E0**-0.5 * (1.0 + C * lipschitz_d2(spec, metric))


@dataclass(frozen=True)
class DriftRecord:
    E0: np.ndarray
    drift: np.ndarray
    delta_bound: np.ndarray

    @property
    def ratio(self):
        return self.drift / self.delta_bound


def measure_drift(spec: ForcingSpec, omega, s: PhaseStateTE, C: float = 1.0) -> DriftRecord:
    """Change of ``p^2 E`` over one bounce, next to the modulus ``Delta(E0)``."""
    t1, E1, _ = _step_te(spec, omega, s.t, s.E)
    p0 = eval_p_omega(spec, omega, s.t)[0]
    p1 = eval_p_omega(spec, omega, t1)[0]
    E0 = np.asarray(s.E, dtype=float)
    drift = np.abs(p1**2 * E1 - p0**2 * E0)
    return DriftRecord(E0, drift, delta_modulus(spec, E0, C))


def sample_launches(spec: ForcingSpec, n: int, E_range, seed: int, omega=None, start: int = 0):
    """Haar ``omega`` (unless fixed), ``t0`` uniform in ``[0, S)``, ``E0`` log-uniform."""
    lo, hi = E_range
    if not lo > energy_threshold(spec):
        raise ValueError("energy range must lie above v*^2 / 2")
    u = uniform_stream(stream_key(seed, 0x445249, 0), 2 * start, 2 * n).reshape(n, 2)
    t0 = u[:, 0] * spec.S
    E0 = lo * (hi / lo) ** u[:, 1]
    if omega is None:
        omega = haar_sample(int(stream_key(seed, 0x445249, 1)[0]), n, spec.dim, start=start)
    else:
        omega = np.broadcast_to(np.asarray(omega, dtype=float), (n, spec.dim))
    return omega, t0, E0


def drift_sample(spec, n, E_range, seed, omega=None, C=1.0, start=0) -> DriftRecord:
    omega, t0, E0 = sample_launches(spec, n, E_range, seed, omega, start)
    return measure_drift(spec, omega, PhaseStateTE(t0, E0), C)


def estimate_drift_constant(spec, n_samples, E_range, seed=0, omega=None, C=1.0) -> float:
    """Largest observed ``drift / Delta(E0)``."""
    rec = drift_sample(spec, n_samples, E_range, seed, omega, C)
    return float(np.max(rec.ratio))


@dataclass(frozen=True)
class DriftScaling:
    decade_lo: np.ndarray
    max_drift: np.ndarray
    slope: float
    intercept: float
    r_squared: float


def drift_scaling(spec, decades=(2, 3, 4, 5), n_per_decade=1000, seed=0, C=1.0) -> DriftScaling:
    """Log-log fit of the largest one-step drift in each energy decade."""
    lows, maxes = [], []
    for i, k in enumerate(decades):
        rec = drift_sample(spec, n_per_decade, (10.0**k, 10.0 ** (k + 1)), int(stream_key(seed, i)[0]), C=C)
        lows.append(10.0**k)
        maxes.append(float(np.max(rec.drift)))
    lows = np.array(lows)
    maxes = np.array(maxes)
    fit = stats.linregress(np.log10(lows), np.log10(maxes))
    return DriftScaling(lows, maxes, float(fit.slope), float(fit.intercept), float(fit.rvalue**2))


@dataclass(frozen=True)
class BandFamily:
    """Bands ``|W - W_j| <= eps_j`` with ``W_j = W0 j^4`` and ``eps_j = eps0 j^-3/2``."""

    W0: float = 10.0
    eps0: float = 0.5
    j_max: int = 50

    def __post_init__(self):
        if self.W0 <= 0 or self.eps0 <= 0 or self.j_max < 1:
            raise ValueError("band family needs W0 > 0, eps0 > 0, j_max >= 1")

    @property
    def j(self) -> np.ndarray:
        return np.arange(1, self.j_max + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.W0 * self.j.astype(float) ** 4

    @property
    def half_widths(self) -> np.ndarray:
        return self.eps0 * self.j.astype(float) ** -1.5

    @property
    def width_sum_bound(self) -> float:
        return float(self.eps0 * zeta(1.5))

    def drift_ratio(self, delta: float, C: float = 1.0) -> np.ndarray:
        """``eps_j^-1 k(W_j / (4 delta))`` for ``k(r) = C r^-1/2``; tends to zero."""
        return C * (self.centers / (4.0 * delta)) ** -0.5 / self.half_widths

    def check(self) -> None:
        widths = self.half_widths
        if not np.all(np.diff(self.centers) > 0):
            raise AssertionError("band centres must increase")
        if not np.cumsum(widths)[-1] <= self.width_sum_bound * (1 + 1e-12):
            raise AssertionError("half-widths exceed their series bound")


def band_hits(W_values, bands: BandFamily):
    """All ``(step, j)`` with ``|W[step] - W_j| <= eps_j`` (``j`` counted from 1)."""
    W = np.asarray(getattr(W_values, "W", W_values), dtype=float)
    inside = np.abs(W[:, None] - bands.centers[None, :]) <= bands.half_widths[None, :]
    steps, js = np.nonzero(inside)
    return [(int(s), int(j) + 1) for s, j in zip(steps, js)]


def band_section_measure(spec: ForcingSpec, omega, bands: BandFamily, j: int):
    """Length of the energy interval on which ``W(omega, .)`` lies in band ``j``."""
    if not 1 <= j <= bands.j_max:
        raise IndexError(f"band {j} outside 1..{bands.j_max}")
    eps = bands.half_widths[j - 1]
    return 2.0 * eps / eval_P(spec, omega) ** 2


def sampled_modulus(spec: ForcingSpec, E0: float, C: float = 1.0, n: int = 2000, m: int = 21, seed: int = 0):
    """Largest sampled ``|d2P(w) - d2P(w')|`` over flow-time separations up to ``C E0^-1/2``."""
    w = haar_sample(seed, n, spec.dim)
    shifts = np.linspace(-C * E0**-0.5, C * E0**-0.5, m)
    base = eval_dpsi2_P(spec, w)
    best = 0.0
    for h in shifts:
        moved = eval_dpsi2_P(spec, flow_advance(w, np.full(n, h), spec.nu))
        best = max(best, float(np.max(np.abs(moved - base))))
    return best
