"""Monte-Carlo census of escaping and recurrent orbits.

For each of ``n_omega`` Haar-random phases, ``n_orbits`` launches are drawn
uniformly from ``t0_range x E0_range`` and followed for ``n_max`` bounces.
Every orbit is labelled at several horizons:

``Returned``
    its energy went above ``E_esc`` and later came back to ``2 E0`` or less;
``EscapingCandidate``
    it went above ``E_esc`` and has not come back yet;
``LeftDomain``
    its energy fell to ``E_floor`` (the map is only defined above ``v*``);
``Alive``
    none of the above.

Escaping is a statement about ``n -> inf``, so the candidate fraction at a
finite horizon is only an upper bound for the measure of escaping
launches.  The same pass records the first return of each orbit to its
initial energy window ``|E_n - E_0| <= window E_0``.

Random numbers come from streams addressed by ``(seed, omega index)``, and
results are folded in omega order, so the report does not depend on the
number of workers.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import binomtest

from .exceptions import ConfigError, NoConvergence
from .forcing import ForcingSpec, energy_threshold
from .pingpong import _step_te, default_floor
from .rng import haar_sample, stream_key, uniform_stream


class Label(enum.IntEnum):
    ALIVE = 0
    ESCAPING = 1
    RETURNED = 2
    LEFT_DOMAIN = 3

    @property
    def title(self) -> str:
        return {0: "Alive", 1: "EscapingCandidate", 2: "Returned", 3: "LeftDomain"}[self.value]


@dataclass(frozen=True)
class CensusConfig:
    spec: ForcingSpec
    n_omega: int = 8
    n_orbits: int = 1000
    t0_range: tuple = (0.0, 1.0)
    E0_range: tuple = (30.0, 100.0)
    n_max: int = 10_000
    E_esc: float = 300.0
    E_floor: float | None = None
    seed: int = 0
    window: float = 2e-4

    @property
    def floor(self) -> float:
        return default_floor(self.spec) if self.E_floor is None else float(self.E_floor)

    @property
    def horizons(self) -> list[int]:
        return sorted({max(1, self.n_max // 4), max(1, self.n_max // 2), self.n_max})

    def validate(self) -> "CensusConfig":
        if self.n_omega < 1 or self.n_orbits < 1:
            raise ConfigError("n_omega and n_orbits must be positive")
        if self.n_max < 1:
            raise ConfigError("n_max must be at least 1")
        lo, hi = self.E0_range
        if not (lo <= hi):
            raise ConfigError("E0_range must be an ordered interval")
        if self.floor < energy_threshold(self.spec):
            raise ConfigError("E_floor lies below v*^2 / 2")
        if not lo > self.floor:
            raise ConfigError("E0_range must lie above E_floor")
        if not self.E_esc > hi:
            raise ConfigError("E_esc must exceed the top of E0_range")
        if not self.t0_range[0] <= self.t0_range[1]:
            raise ConfigError("t0_range must be an ordered interval")
        if self.window < 0:
            raise ConfigError("window must be non-negative")
        return self

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "spec"}
        d["spec"] = self.spec.to_dict()
        d["t0_range"] = list(self.t0_range)
        d["E0_range"] = list(self.E0_range)
        d["E_floor"] = self.floor
        return d


class Classifier:
    """Streaming labeller; feed energies one step at a time."""

    def __init__(self, E0, E_esc: float, E_floor: float):
        E0 = np.asarray(E0, dtype=float)
        self.E0 = E0
        self.E_esc = E_esc
        self.E_floor = E_floor
        self.exceeded = np.zeros(E0.shape, dtype=bool)
        self.decided = np.full(E0.shape, Label.ALIVE, dtype=np.int8)

    def feed(self, E, rows=None):
        rows = np.arange(self.E0.size) if rows is None else rows
        E = np.asarray(E, dtype=float)
        open_ = self.decided[rows] == Label.ALIVE
        left = open_ & (E <= self.E_floor)
        back = open_ & ~left & self.exceeded[rows] & (E <= 2.0 * self.E0[rows])
        self.decided[rows[left]] = Label.LEFT_DOMAIN
        self.decided[rows[back]] = Label.RETURNED
        self.exceeded[rows] |= E > self.E_esc

    def labels(self) -> np.ndarray:
        out = self.decided.copy()
        out[(out == Label.ALIVE) & self.exceeded] = Label.ESCAPING
        return out


def classify_orbit(trace, cfg: CensusConfig, horizon: int | None = None) -> Label:
    """Label of one orbit, looking only at the first ``horizon`` steps."""
    E = np.asarray(getattr(trace, "E", trace), dtype=float)
    if horizon is not None:
        E = E[: horizon + 1]
    E = E[~np.isnan(E)]
    clf = Classifier(E[:1], cfg.E_esc, cfg.floor)
    for e in E[1:]:
        clf.feed(np.array([e]))
    return Label(int(clf.labels()[0]))


def _launches(cfg: CensusConfig, i: int):
    u = uniform_stream(stream_key(cfg.seed, 0x43454E, i), 0, 2 * cfg.n_orbits).reshape(-1, 2)
    t0 = cfg.t0_range[0] + (cfg.t0_range[1] - cfg.t0_range[0]) * u[:, 0]
    E0 = cfg.E0_range[0] + (cfg.E0_range[1] - cfg.E0_range[0]) * u[:, 1]
    return t0, E0


def census_omegas(cfg: CensusConfig) -> np.ndarray:
    return haar_sample(int(stream_key(cfg.seed, 0x4F4D)[0]), cfg.n_omega, cfg.spec.dim)


@dataclass
class OmegaResult:
    index: int
    omega: np.ndarray
    labels: dict  # horizon -> int8 array of Label
    first_return: np.ndarray  # step of first return to the window, -1 if none
    v_growth: np.ndarray  # max_n v_n / v_0 within n_max
    diverged: int = 0


def simulate_omega(cfg: CensusConfig, i: int) -> OmegaResult:
    spec = cfg.spec
    omega = census_omegas(cfg)[i]
    t, E = _launches(cfg, i)
    t, E = t.copy(), E.copy()
    E0 = E.copy()
    Emax = E.copy()
    clf = Classifier(E0, cfg.E_esc, cfg.floor)
    first = np.full(E.shape, -1, dtype=np.int64)
    horizons = cfg.horizons
    labels = {}
    active = np.arange(E.size)
    diverged = 0
    for n in range(1, cfg.n_max + 1):
        if active.size:
            try:
                t1, E1, _ = _step_te(spec, omega, t[active], E[active])
            except NoConvergence:
                t1, E1 = _careful_step(spec, omega, t[active], E[active])
            bad = np.isnan(E1)
            if np.any(bad):
                diverged += int(bad.sum())
                clf.decided[active[bad]] = Label.LEFT_DOMAIN
                active, t1, E1 = active[~bad], t1[~bad], E1[~bad]
            t[active] = t1
            E[active] = E1
            Emax[active] = np.maximum(Emax[active], E1)
            clf.feed(E1, active)
            inside = E1 > cfg.floor
            hit = inside & (first[active] < 0) & (np.abs(E1 - E0[active]) <= cfg.window * E0[active])
            first[active[hit]] = n
            active = active[inside]
        if n in horizons:
            labels[n] = clf.labels()
    return OmegaResult(i, omega, labels, first, np.sqrt(Emax / E0), diverged)


def _careful_step(spec, omega, t, E):
    t1 = np.full(t.shape, np.nan)
    E1 = np.full(t.shape, np.nan)
    for j in range(t.size):
        try:
            t1[j], E1[j], _ = _step_te(spec, omega, t[j], E[j])
        except NoConvergence:
            pass
    return t1, E1


def simulate(cfg: CensusConfig, workers: int = 1) -> list[OmegaResult]:
    cfg.validate()
    idx = list(range(cfg.n_omega))
    if workers <= 1:
        return [simulate_omega(cfg, i) for i in idx]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(simulate_omega, [cfg] * len(idx), idx))


def wilson(k: int, n: int, level: float = 0.95):
    if n == 0:
        return (0.0, 1.0)
    ci = binomtest(k, n).proportion_ci(confidence_level=level, method="wilson")
    return (float(ci.low), float(ci.high))


@dataclass
class CensusReport:
    config: dict
    horizons: list
    omegas: list  # per-omega dicts
    pooled: dict
    velocity_quantiles: dict

    def escape_fraction(self, horizon: int) -> float:
        return self.pooled["escape_fraction"][str(horizon)]

    def escape_sigma(self, horizon: int) -> float:
        p = self.escape_fraction(horizon)
        return math.sqrt(p * (1 - p) / self.pooled["n"])

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "horizons": self.horizons,
            "omegas": self.omegas,
            "pooled": self.pooled,
            "velocity_quantiles": self.velocity_quantiles,
        }


def _counts(lbl) -> dict:
    return {Label(k).title: int(np.sum(lbl == k)) for k in Label}


VELOCITY_Q = (0.5, 0.9, 0.99, 1.0)


def build_report(cfg: CensusConfig, results: list[OmegaResult]) -> CensusReport:
    horizons = cfg.horizons
    omegas = []
    pooled_esc = {str(h): 0 for h in horizons}
    for r in results:
        entry = {"index": r.index, "omega": r.omega.tolist(), "diverged": r.diverged, "horizons": {}}
        for h in horizons:
            lbl = r.labels[h]
            k = int(np.sum(lbl == Label.ESCAPING))
            pooled_esc[str(h)] += k
            lo, hi = wilson(k, lbl.size)
            entry["horizons"][str(h)] = {
                "counts": _counts(lbl),
                "escape_fraction": k / lbl.size,
                "wilson95": [lo, hi],
            }
        omegas.append(entry)
    n = cfg.n_omega * cfg.n_orbits
    pooled = {
        "n": n,
        "escape_count": pooled_esc,
        "escape_fraction": {h: c / n for h, c in pooled_esc.items()},
        "wilson95": {h: list(wilson(c, n)) for h, c in pooled_esc.items()},
    }
    growth = np.concatenate([r.v_growth for r in results])
    vq = {str(q): float(np.quantile(growth, q)) for q in VELOCITY_Q}
    return CensusReport(cfg.to_dict(), horizons, omegas, pooled, vq)


def run_census(cfg: CensusConfig, workers: int = 1) -> CensusReport:
    return build_report(cfg, simulate(cfg, workers))


@dataclass
class RecurrenceProfile:
    """First-return steps to the initial energy window, pooled over omegas.

    ``counts[n]`` is the number of orbits whose first return happens at step
    ``n`` (``counts[0]`` is always zero); ``no_return`` counts orbits with no
    return within ``horizon`` steps.
    """

    counts: np.ndarray
    horizon: int
    no_return: int

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.no_return

    def no_return_at(self, h: int) -> int:
        """Orbits without a return within ``h`` steps."""
        return self.no_return + int(self.counts[h + 1 :].sum())


def profile_from_results(cfg: CensusConfig, results: list[OmegaResult]) -> RecurrenceProfile:
    first = np.concatenate([r.first_return for r in results])
    counts = np.bincount(first[first > 0], minlength=cfg.n_max + 1)
    return RecurrenceProfile(counts, cfg.n_max, int(np.sum(first < 0)))


def recurrence_profile(cfg: CensusConfig, workers: int = 1) -> RecurrenceProfile:
    return profile_from_results(cfg, simulate(cfg, workers))
