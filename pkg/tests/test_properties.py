import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from resilient_cl.adversary import SENSING, DangerZone, risk_at
from resilient_cl.angles import wrap_angle
from resilient_cl.comms import GraphState, TriggerConfig, adaptive_threshold, innovation, process_link, trigger_mask
from resilient_cl.filters import CKF, EKF, UKF, Estimate, apply_update, ensure_psd, linear_model
from resilient_cl.graph import build_graph, lambda2, laplacian
from resilient_cl.sensing import NoiseConfig
from resilient_cl.sim import msle
from resilient_cl.world import ControlInput, ControlLimits, RobotState, Waypoint, leader_follower_control, step_unicycle

finite = st.floats(-1e3, 1e3, allow_nan=False)
angle = st.floats(-50, 50, allow_nan=False)
unit = st.floats(0, 1)
pos = st.floats(1e-3, 10)


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_wrap_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-6)


@given(finite, finite, angle, st.floats(-2, 2), st.floats(-5, 5), st.floats(1e-3, 1))
def test_unicycle_step_properties(x, y, th, v, om, dt):
    s = step_unicycle(RobotState(x, y, th), ControlInput(v, om), dt)
    assert -math.pi < s.theta <= math.pi
    assert math.hypot(s.x - x, s.y - y) <= abs(v) * dt * (1 + 1e-9) + 1e-12
    still = step_unicycle(RobotState(x, y, th), ControlInput(0, 0), dt)
    assert (still.x, still.y) == (x, y)
    assert math.isclose(still.theta, wrap_angle(th), abs_tol=1e-12)


@given(finite, finite, angle, finite, finite, pos, pos, pos, pos)
def test_controller_respects_limits(x, y, th, tx, ty, kv, kw, vmax, wmax):
    u = leader_follower_control(RobotState(x, y, th), Waypoint(tx, ty), (kv, kw), ControlLimits(vmax, wmax))
    assert 0 <= u.v <= vmax
    assert abs(u.omega) <= wmax


@given(st.floats(0.01, 5), unit, st.floats(0, 10), st.floats(0, 10))
def test_risk_monotone_and_bounded(radius, peak, d1, d2):
    z = DangerZone(SENSING, (0.0, 0.0), radius, peak)
    r1, r2 = risk_at(z, (d1, 0.0)), risk_at(z, (d2, 0.0))
    assert 0 <= r1 <= peak
    if d1 <= d2:
        assert r1 >= r2
    if d1 >= radius:
        assert r1 == 0


threshold_inputs = dict(
    alpha=st.floats(1e-3, 10), gamma=st.floats(0, 5), zs=st.floats(0, 0.5), zc=st.floats(0, 0.5),
    lam=st.floats(1e-6, 20), nrm=st.floats(0, 100), ds=unit, dc=unit,
)


@given(**threshold_inputs, bump=st.floats(0, 5))
def test_threshold_monotonicity(alpha, gamma, zs, zc, lam, nrm, ds, dc, bump):
    cfg = TriggerConfig(alpha=alpha, gamma=gamma, zeta_s=zs, zeta_c=zc)
    d = adaptive_threshold(cfg, lam, nrm, ds, dc)
    assert d >= 0
    tol = 1e-12 * max(1.0, d)
    assert adaptive_threshold(cfg, lam + bump, nrm, ds, dc) <= d + tol
    assert adaptive_threshold(cfg, lam, nrm, min(1, ds + bump / 5), dc) <= d + tol
    assert adaptive_threshold(cfg, lam, nrm, ds, min(1, dc + bump / 5)) <= d + tol
    assert adaptive_threshold(cfg, lam, nrm + bump, ds, dc) >= d - tol


@given(st.floats(0, 100), st.floats(0, 100))
def test_trigger_iff_strictly_above(nrm, delta):
    assert bool(trigger_mask("event_triggered", nrm, delta)) == (nrm > delta)


@given(arrays(float, 2, elements=st.floats(-20, 20)), arrays(float, 2, elements=st.floats(-20, 20)))
def test_innovation_bearing_wrapped(z, zh):
    assert -math.pi < innovation(z, zh)[1] <= math.pi


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 15), st.floats(0.3, 2.0), st.integers(0, 2**32 - 1))
def test_laplacian_structure(n, radius, seed):
    pts = np.random.default_rng(seed).uniform(0, 3, (n, 2))
    L = laplacian(build_graph(pts, radius))
    np.testing.assert_allclose(L, L.T)
    np.testing.assert_allclose(L.sum(axis=1), 0, atol=1e-12)
    assert np.linalg.eigvalsh(L).min() >= -1e-9
    assert lambda2(build_graph(pts, radius)) >= 0


@settings(max_examples=50)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1), st.floats(-math.pi, math.pi), finite, finite)
def test_msle_rigid_invariance(n, seed, rot, tx, ty):
    rng = np.random.default_rng(seed)
    truth = rng.uniform(0, 3, (n, 3))
    est = truth + rng.normal(0, 0.1, (n, 3))
    c, s = math.cos(rot), math.sin(rot)
    moved = est.copy()
    moved[:, :2] = est[:, :2] @ np.array([[c, s], [-s, c]]) + [tx, ty]
    assert math.isclose(msle(truth, moved), msle(truth, est), rel_tol=1e-6, abs_tol=1e-9)
    assert msle(truth, est) >= 0


@st.composite
def spd(draw, n=3, lo=1e-6, hi=1.0):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    w = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    Qm, _ = np.linalg.qr(A)
    return (Qm * w) @ Qm.T


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from([CKF, UKF, EKF]),
    spd(),
    arrays(float, 3, elements=st.floats(-2, 2)),
    arrays(float, 3, elements=st.floats(-2, 2)),
    st.floats(0, 0.3), st.floats(-2, 2),
)
def test_covariance_stays_symmetric_psd(cls, P, x, nb, v, om):
    assume(np.hypot(*(x[:2] - nb[:2])) > 0.05)
    flt = cls()
    R = NoiseConfig().R
    m, C, bad = flt.predict(x, P, np.array([v, om]), 0.1, np.diag([1e-6, 1e-6, 1e-5]))
    assert not bad
    zh, Pzz, Pxz, _ = flt.predict_measurement(m, C, nb, R)
    z = zh + np.array([0.01, -0.02])
    m2, C2, innov, _, ok = apply_update(m, C, z, zh, Pzz, Pxz)
    for M in (C, C2):
        assert np.max(np.abs(M - M.T)) <= 1e-9
        np.linalg.cholesky(M + 1e-12 * np.eye(3) * max(1.0, np.abs(M).max()))
    assert -math.pi < innov[1] <= math.pi


@settings(max_examples=60, deadline=None)
@given(spd(), spd(n=2, lo=1e-3), st.integers(0, 2**32 - 1), st.sampled_from([CKF, UKF, EKF]))
def test_linear_correct_never_increases_trace(P, Rm, seed, cls):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(2, 3))
    model = linear_model(np.eye(3), H)
    flt = cls(model)
    x = rng.normal(size=3)
    zh, Pzz, Pxz, _ = flt.predict_measurement(x, P, np.zeros(3), Rm)
    z = H @ rng.normal(size=3)
    _, P2, *_ = apply_update(x, P, z, zh, Pzz, Pxz, model)
    assert np.trace(P2) <= np.trace(P) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 0.9), st.floats(-0.3, 0.3), st.floats(-0.5, 0.5), spd(lo=1e-5, hi=1e-2))
def test_dropped_link_posterior_is_prior(dist, dr, db, P):
    truth = np.array([[0.0, 0.0, 0.0], [dist, 0.0, 0.0]])
    g = build_graph(truth[:, :2], 1.0)
    est = Estimate(truth[0], P)
    nb = Estimate(truth[1], np.eye(3) * 1e-4)
    z = np.array([dist + dr, db])
    dec, post = process_link(
        0, 1, est, nb, z, TriggerConfig(rho=1e9), GraphState(g, lambda2(g)), (),
        flt=CKF(), R=NoiseConfig().R, position=(0.0, 0.0), sigma=False,
    )
    assert post is None and not dec.fused


@given(spd())
def test_ensure_psd_is_idempotent_on_psd(P):
    np.testing.assert_array_equal(ensure_psd(P), 0.5 * (P + P.T))
