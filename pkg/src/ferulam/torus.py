"""Cross-section coordinates for the linear flow on T^N.

The section is ``Sigma = {theta_1 = 0}``; every orbit of the flow meets it
once per return time ``S = 1/nu_1``.  ``phi_compose`` flows a section point
forward for ``s`` in ``[0, S)``; ``phi_inverse`` undoes it.  ``tau_section``
uses the character ``theta -> exp(2 pi i theta_1)``, giving
``tau(omega) = theta_1 / nu_1``: the time elapsed since the orbit last left
the section.  The time until it next returns is ``S - tau``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .exceptions import DomainError
from .forcing import ForcingSpec, flow_advance, frac
from .rng import haar_sample, stream_key, uniform_stream

SECTION_TOL = 1e-12


class SectionCoords(NamedTuple):
    sigma: np.ndarray
    s: np.ndarray


def _on_section_distance(theta1):
    theta1 = np.asarray(theta1, dtype=float)
    return np.minimum(np.abs(theta1), np.abs(1.0 - theta1))


def tau_section(omega, nu) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    return omega[..., 0] / nu[0]


def phi_inverse(omega, nu) -> SectionCoords:
    """Split ``omega`` into its section base point and the time since leaving it."""
    omega = np.asarray(omega, dtype=float)
    tau = tau_section(omega, nu)
    sigma = flow_advance(omega, -tau, nu)
    # theta_1 of the base point is zero by construction; drop the rounding residue
    sigma[..., 0] = 0.0
    return SectionCoords(sigma, tau)


def phi_compose(sc: SectionCoords, nu) -> np.ndarray:
    sigma = np.asarray(sc.sigma, dtype=float)
    s = np.asarray(sc.s, dtype=float)
    S = 1.0 / nu[0]
    if np.any((s < 0.0) | (s >= S)):
        raise DomainError(f"section time must lie in [0, {S})")
    if np.any(_on_section_distance(sigma[..., 0]) > SECTION_TOL):
        raise DomainError("base point is not on the section theta_1 = 0")
    return flow_advance(sigma, s, nu)


def chi_wrap(sigma, t, nu) -> SectionCoords:
    """Fold a flow time ``t >= 0`` from ``sigma`` back into ``[0, S)``.

    Whole periods are absorbed into the base point, which stays on the
    section.
    """
    sigma = np.asarray(sigma, dtype=float)
    t = np.asarray(t, dtype=float)
    S = 1.0 / nu[0]
    whole = np.floor(t / S) * S
    rem = t - whole
    # rounding can leave rem == S or a hair below 0
    over = rem >= S
    under = rem < 0.0
    whole = np.where(over, whole + S, np.where(under, whole - S, whole))
    rem = np.where(over, rem - S, np.where(under, rem + S, rem))
    base = flow_advance(sigma, whole, nu)
    base[..., 0] = 0.0
    return SectionCoords(base, rem)


def section_add(a: SectionCoords, b: SectionCoords) -> SectionCoords:
    """Componentwise sum in ``Sigma x [0, inf)``; the time part is not wrapped."""
    sigma = frac(np.asarray(a.sigma) + np.asarray(b.sigma))
    sigma[..., 0] = 0.0
    return SectionCoords(sigma, np.asarray(a.s) + np.asarray(b.s))


def sample_section(seed: int, n: int, nu, start: int = 0) -> SectionCoords:
    """Product-measure sample on ``Sigma x [0, S)``: Haar on Sigma, uniform time."""
    nu = np.asarray(nu, dtype=float)
    pts = haar_sample(seed, n, nu.size, start=start)
    s = pts[:, 0] / nu[0]
    sigma = pts.copy()
    sigma[:, 0] = 0.0
    return SectionCoords(sigma, s)


def section_crossings(sigma, nu, t_max: float, dt: float | None = None) -> np.ndarray:
    """Times in ``(0, t_max]`` where the orbit of ``sigma`` crosses ``theta_1 = 0``.

    Wraps of ``theta_1`` are located on a time grid and each is refined by
    Brent's method on the centred coordinate ``((theta_1 + 1/2) mod 1) - 1/2``.
    """
    nu = np.asarray(nu, dtype=float)
    S = 1.0 / nu[0]
    if dt is None:
        dt = S / 8.0
    grid = np.arange(dt, t_max + dt / 2, dt)
    th = flow_advance(sigma, grid, nu)[:, 0]

    def centred(t):
        return float(frac(flow_advance(sigma, t, nu)[0] + 0.5) - 0.5)

    wraps = np.flatnonzero(th[1:] < th[:-1])
    out = []
    for i in wraps:
        lo, hi = grid[i], grid[i + 1]
        out.append(brentq(centred, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))
    return np.asarray(out)


@dataclass(frozen=True)
class DecompositionRow:
    set_id: int
    haar_estimate: float
    product_estimate: float
    diff: float
    three_sigma: float

    @property
    def passed(self) -> bool:
        return self.diff <= self.three_sigma


def _in_rect(points, lo, hi):
    return np.all((points >= lo) & (points < hi), axis=-1)


def check_haar_decomposition(spec: ForcingSpec, n: int, rects, seed: int = 0):
    """Compare Haar frequency of each rectangle with its section-product frequency.

    ``rects`` is a sequence of ``(lo, hi)`` pairs of length-N arrays, each
    describing ``prod_i [lo_i, hi_i)``.  The Haar side samples T^N uniformly;
    the product side samples ``(sigma, s)`` on ``Sigma x [0, S)`` and maps it
    through ``phi_compose``.  The two samples are independent, so the 3-sigma
    band uses the pooled two-sample binomial variance.
    """
    nu = spec.nu
    rows = []
    for j, (lo, hi) in enumerate(rects):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        omega = haar_sample(int(stream_key(seed, 1, j)[0]), n, spec.dim)
        sc = sample_section(int(stream_key(seed, 2, j)[0]), n, nu)
        mapped = phi_compose(sc, nu)
        p_h = float(np.mean(_in_rect(omega, lo, hi)))
        p_p = float(np.mean(_in_rect(mapped, lo, hi)))
        pooled = 0.5 * (p_h + p_p)
        sigma = np.sqrt(max(pooled * (1.0 - pooled), 0.0) * 2.0 / n)
        rows.append(DecompositionRow(j, p_h, p_p, abs(p_h - p_p), 3.0 * sigma))
    return rows


def random_rectangles(seed: int, count: int, dim: int, min_width: float = 0.1):
    """Random axis-aligned sub-rectangles of the unit cube with side >= ``min_width``."""
    u = uniform_stream(stream_key(seed, 0x52454354, dim), 0, 2 * count * dim)
    u = u.reshape(count, dim, 2)
    width = min_width + (1.0 - min_width) * u[..., 0]
    lo = (1.0 - width) * u[..., 1]
    return [(lo[i], lo[i] + width[i]) for i in range(count)]
