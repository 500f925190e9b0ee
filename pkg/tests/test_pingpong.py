import math

import numpy as np
import pytest

from ferulam.collision import solve_impact_time
from ferulam.exceptions import BelowThreshold, ConstructionFailed
from ferulam.forcing import (
    constant_spec,
    energy_threshold,
    eval_p_omega,
    flow_advance,
    single_mode_spec,
    standard_spec,
    v_star_bound,
)
from ferulam.pingpong import (
    PhaseStateTE,
    PhaseStateTV,
    SkewState,
    Status,
    TimeForcing,
    build_noninjectivity_example,
    injectivity_probe,
    iterate,
    iterate_batch,
    iterate_skew,
    jacobian_det_estimate,
    noninjective_speed,
    skew_parts,
    step_skew,
    step_te,
    step_tv,
    te_stepper,
    time_forcing_stepper,
    twin_peak_forcing,
)
from ferulam.rng import haar_sample, stream_key, uniform_stream

# mpmath references (40 digits)
SINGLE_T1 = 0.38405686761639660889
SINGLE_V1 = 11.202045347913108635
SINGLE_E1 = 62.74290998835085954
TWO_T1 = 1.9186931639253306371  # omega=(0.3, 0.7), t0=1.25, v0=7
TWO_V1 = 5.3017791740112855392


def launches(seed, n, E_lo=20.0, E_hi=2e4, t_hi=10.0):
    w = haar_sample(seed, n, 2)
    u = uniform_stream(stream_key(seed, 1), 0, 2 * n).reshape(n, 2)
    return w, t_hi * u[:, 0], E_lo * (E_hi / E_lo) ** u[:, 1]


def test_constant_tv():
    s = step_tv(constant_spec(2.0), [0.3, 0.4], PhaseStateTV(1.0, 4.0))
    assert s.t == pytest.approx(2.0, abs=1e-15) and s.v == 4.0


def test_constant_te():
    s = step_te(constant_spec(2.0), [0.3, 0.4], PhaseStateTE(1.0, 8.0))
    assert s.E == 8.0 and s.t == pytest.approx(2.0, abs=1e-15)


def test_constant_skew():
    spec = constant_spec(2.0)
    F, G = skew_parts(spec, [0.3, 0.4], 8.0)
    assert G == 0.0 and F == pytest.approx(1.0, abs=1e-15)
    s = step_skew(spec, SkewState(np.array([0.3, 0.4]), 8.0))
    np.testing.assert_allclose(s.omega, flow_advance([0.3, 0.4], 1.0, spec.nu), atol=1e-15)


def test_single_mode_reference():
    spec = single_mode_spec()
    s = step_tv(spec, [0.0, 0.0], PhaseStateTV(0.0, 10.0))
    assert s.t == pytest.approx(SINGLE_T1, abs=1e-13)
    assert s.v == pytest.approx(SINGLE_V1, abs=1e-12)
    e = step_te(spec, [0.0, 0.0], PhaseStateTE(0.0, 50.0))
    assert e.E == pytest.approx(SINGLE_E1, rel=1e-13)
    assert e.t == pytest.approx(SINGLE_T1, abs=1e-13)


def test_two_mode_reference():
    s = step_tv(standard_spec(), [0.3, 0.7], PhaseStateTV(1.25, 7.0))
    assert s.t == pytest.approx(TWO_T1, abs=1e-13)
    assert s.v == pytest.approx(TWO_V1, abs=1e-12)


def test_time_ordering():
    spec = standard_spec()
    w, t0, E0 = launches(41, 10_000)
    v0 = np.sqrt(2 * E0)
    hit = solve_impact_time(spec, w, t0, v0)
    s = step_tv(spec, w, PhaseStateTV(t0, v0))
    assert np.all(t0 < hit.root) and np.all(hit.root < s.t) and np.all(s.v > 0)


def test_te_conjugate_to_tv():
    spec = standard_spec()
    w, t0, E0 = launches(42, 10_000)
    a = step_te(spec, w, PhaseStateTE(t0, E0))
    b = step_tv(spec, w, PhaseStateTV(t0, np.sqrt(2 * E0)))
    assert np.max(np.abs(a.t - b.t)) < 1e-10
    assert np.max(np.abs(a.E - 0.5 * b.v**2) / a.E) < 1e-13


def test_perfect_square_identity():
    spec = standard_spec()
    w, t0, E0 = launches(43, 1000)
    hit = solve_impact_time(spec, w, t0, np.sqrt(2 * E0))
    pd = eval_p_omega(spec, w, hit.root)[1]
    expanded = E0 - 2 * np.sqrt(2 * E0) * pd + 2 * pd**2
    square = (np.sqrt(E0) - math.sqrt(2) * pd) ** 2
    assert np.all(np.abs(square - expanded) <= 8 * np.spacing(E0))
    E1 = step_te(spec, w, PhaseStateTE(t0, E0)).E
    assert np.all(np.abs(E1 - square) / square < 1e-13)


def test_one_step_semiconjugacy():
    spec = standard_spec()
    w, t0, E0 = launches(44, 10_000)
    planar = step_te(spec, w, PhaseStateTE(t0, E0))
    skew = step_skew(spec, SkewState(flow_advance(w, t0, spec.nu), E0))
    d = np.abs(skew.omega - flow_advance(w, planar.t, spec.nu))
    assert np.max(np.minimum(d, 1 - d)) < 1e-10
    assert np.max(np.abs(skew.E - planar.E)) < 1e-10 * max(1.0, E0.max() / 1e3)


def test_orbit_semiconjugacy():
    spec = standard_spec()
    w = np.array([0.21, 0.83])
    tr = iterate(spec, w, PhaseStateTE(0.4, 800.0), 1000)
    assert tr.status is Status.COMPLETED
    om, E = iterate_skew(spec, SkewState(flow_advance(w, 0.4, spec.nu), 800.0), 1000)
    n = np.arange(1001)
    assert np.all(np.abs(E - tr.E) <= 1e-8 * np.maximum(n, 1))


def test_time_translation_equivariance():
    spec = standard_spec()
    w, t0, E0 = launches(45, 1000, t_hi=1.0)
    T = 37.25
    a = step_te(spec, w, PhaseStateTE(t0 + T, E0))
    b = step_te(spec, flow_advance(w, T, spec.nu), PhaseStateTE(t0, E0))
    assert np.max(np.abs(a.t - (b.t + T))) < 1e-9
    assert np.max(np.abs(a.E - b.E) / E0) < 1e-12


def test_below_threshold():
    spec = standard_spec()
    with pytest.raises(BelowThreshold):
        step_tv(spec, [0, 0], PhaseStateTV(0.0, 0.5 * v_star_bound(spec)))
    with pytest.raises(BelowThreshold):
        step_te(spec, [0, 0], PhaseStateTE(0.0, energy_threshold(spec)))
    with pytest.raises(BelowThreshold):
        step_skew(spec, SkewState(np.zeros(2), 100.0), E_threshold=200.0)


def test_iterate_constant():
    tr = iterate(constant_spec(2.0), [0.1, 0.2], PhaseStateTE(0.0, 10.0), 100)
    assert tr.status is Status.COMPLETED and tr.status_step == 100
    assert len(tr) == 101 and np.all(tr.E == 10.0)
    assert np.all(tr.W == 40.0)


def test_iterate_batch_residuals():
    spec = standard_spec()
    w, t0, E0 = launches(46, 1000, E_lo=50.0, E_hi=5000.0)
    bt = iterate_batch(spec, w, t0, E0, 1000)
    done = np.isfinite(bt.residuals)
    assert done.sum() > 0.5 * bt.residuals.size
    assert np.all(bt.residuals[done] < 1e-11)


def test_left_domain_exactly_at_floor():
    spec = standard_spec()
    w, t0, _ = launches(47, 300)
    floor = 1.01 * energy_threshold(spec)
    bt = iterate_batch(spec, w, t0, np.full(300, 3.0), 200, E_floor=floor)
    for j in range(300):
        tr = bt.orbit(j)
        below = np.nonzero(tr.E <= floor)[0]
        if tr.status is Status.LEFT_DOMAIN:
            assert below.size == 1 and below[0] == tr.status_step == len(tr) - 1
        else:
            assert below.size == 0
    assert any(s is Status.LEFT_DOMAIN for s in bt.status)


def test_trace_W_matches_definition():
    spec = standard_spec()
    w = np.array([0.5, 0.25])
    tr = iterate(spec, w, PhaseStateTE(0.0, 120.0), 50)
    P = eval_p_omega(spec, w, tr.t)[0]
    np.testing.assert_allclose(tr.W, P**2 * tr.E, rtol=1e-15)


def test_jacobian_constant_is_one():
    d = jacobian_det_estimate(constant_spec(2.0), [0.1, 0.2], PhaseStateTE(0.3, 10.0))
    assert d == pytest.approx(1.0, abs=1e-8)


def test_jacobian_area_preservation():
    spec = standard_spec()
    w, t0, _ = launches(48, 1000, t_hi=1.0)
    E0 = np.full(1000, 50.0)
    det = jacobian_det_estimate(spec, w, PhaseStateTE(t0, E0), h=1e-6)
    assert np.mean(np.abs(det - 1)) < 1e-5
    assert np.max(np.abs(det - 1)) < 1e-3


def test_jacobian_stable_in_h():
    spec = standard_spec()
    w, t0, _ = launches(49, 100, t_hi=1.0)
    s = PhaseStateTE(t0, np.full(100, 50.0))
    d = [jacobian_det_estimate(spec, w, s, h=h) for h in (1e-5, 1e-6, 1e-7)]
    assert np.max(np.abs(d[0] - d[1])) < 1e-4
    assert np.max(np.abs(d[1] - d[2])) < 1e-4


def test_noninjective_speed_formula():
    assert noninjective_speed(2.2, 2.0, 0.0, 1.0) == pytest.approx(0.2, abs=1e-15)


def test_twin_peak_forcing_shape():
    f = twin_peak_forcing()
    t = np.linspace(-3, 3, 60001)
    pd = np.array([f.pdot(x) for x in t])
    assert pd.max() <= f.sup_pdot + 1e-12
    assert f.pdot(0.0) == pytest.approx(f.sup_pdot) and f.pdot(1.0) == pytest.approx(f.sup_pdot)
    assert f.p(0.0) - f.p(1.0) == pytest.approx(8 * 0.5 / (3 * math.pi), abs=1e-14)
    # pdot is the derivative of p
    h = 1e-6
    fd = np.array([(f.p(x + h) - f.p(x - h)) / (2 * h) for x in t[::600]])
    np.testing.assert_allclose(fd, pd[::600], atol=1e-8)


def test_noninjectivity_example():
    ex = build_noninjectivity_example()
    assert ex.max_diff < 1e-9
    assert abs(ex.image1.t - ex.image2.t) < 1e-9 and abs(ex.image1.v - ex.image2.v) < 1e-9
    assert abs(ex.pre1.t - ex.pre2.t) > 1e-3
    assert ex.pre1.v == ex.pre2.v
    # p(t~1) > p(t~2) forces t01 < t02
    assert ex.pre1.t < ex.pre2.t
    assert ex.v1 == pytest.approx(8 * 0.5 / (3 * math.pi), rel=1e-14)
    assert ex.image1.v == pytest.approx(ex.v1, rel=1e-12)


def test_noninjectivity_rejects_bad_forcing():
    flat = TimeForcing(lambda t: 3.0, lambda t: 0.0, 3.0, 3.0, 0.0, {})
    with pytest.raises(ConstructionFailed):
        build_noninjectivity_example(flat)


def test_injectivity_probe_high_energy_passes():
    spec = standard_spec()
    recs, smallest = injectivity_probe(te_stepper(spec, [0.1, 0.2]), [5.0, 500.0], (0.0, 3.0))
    assert recs[-1].passed and smallest is not None and smallest <= 500.0


def test_injectivity_probe_sees_counterexample_energy():
    f = twin_peak_forcing()
    ex = build_noninjectivity_example(f)
    E = 0.5 * ex.pre1.v**2
    recs, _ = injectivity_probe(time_forcing_stepper(f), [E / 1.5], (-2.0, 2.0), n_t=200, n_E=20)
    assert not recs[0].passed
