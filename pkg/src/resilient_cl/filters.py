"""Nonlinear Gaussian filters for cooperative localization.

Three filters share one interface: the cubature Kalman filter (CKF) and the
EKF/UKF baselines. Every kernel accepts stacked inputs with arbitrary leading
batch dimensions, so the simulator can run one predict or one correction for
many robots at once. The single-estimate functions (``ckf_predict``,
``ekf_correct``, ...) are thin wrappers over the same kernels.

A correction is split in two phases so the caller can gate on the innovation
before committing to it::

    kf = CKF()
    z_hat, Pzz, Pxz, bad = kf.predict_measurement(mean, cov, neighbor_mean, R_eff)
    mean, cov, innov, gain, ok = apply_update(mean, cov, z, z_hat, Pzz, Pxz)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .angles import wrap_angle
from .sensing import range_bearing, range_bearing_jacobians
from .world import ControlInput, unicycle, unicycle_jacobian

PSD_JITTER = 1e-12
# Pzz with singular-value ratio below this is treated as singular
PZZ_RCOND = 1e-12
# smallest Pzz scale whose inverse squared still fits in a double; zero-noise
# runs shrink covariances geometrically and would otherwise underflow
PZZ_ABS_FLOOR = float(np.sqrt(np.finfo(float).tiny))


class FilterDivergenceError(RuntimeError):
    """Covariance became indefinite or non-finite."""


class ConditioningWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Model:
    """Dynamics and measurement functions with their Jacobians.

    ``f(x, u, dt)`` and ``h(x, ctx)`` take stacked arrays; ``ctx`` is the
    neighbor state the measurement is taken against. ``h_jac_ctx`` is the
    Jacobian with respect to ``ctx`` and is only needed to inflate the
    measurement noise by the neighbor's uncertainty.
    """

    f: Callable
    f_jac: Callable
    h: Callable
    h_jac: Callable
    h_jac_ctx: Callable | None = None
    state_angles: tuple[int, ...] = ()
    meas_angles: tuple[int, ...] = ()


ROBOT_MODEL = Model(
    f=unicycle,
    f_jac=unicycle_jacobian,
    h=range_bearing,
    h_jac=lambda x, c: range_bearing_jacobians(x, c)[0],
    h_jac_ctx=lambda x, c: range_bearing_jacobians(x, c)[1],
    state_angles=(2,),
    meas_angles=(1,),
)


def linear_model(A, H) -> Model:
    """Linear-Gaussian surrogate ``x' = A x``, ``z = H x`` (inputs ignored)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))

    def f(x, u, dt):
        return np.asarray(x, dtype=float) @ A.T

    def f_jac(x, u, dt):
        return np.broadcast_to(A, np.shape(x)[:-1] + A.shape)

    def h(x, ctx):
        return np.asarray(x, dtype=float) @ H.T

    def h_jac(x, ctx):
        return np.broadcast_to(H, np.shape(x)[:-1] + H.shape)

    return Model(f, f_jac, h, h_jac)


@dataclass(frozen=True, eq=False)
class Estimate:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.array(self.mean, dtype=float)
        P = np.array(self.cov, dtype=float)
        if P.shape != (m.size, m.size):
            raise ValueError("covariance shape does not match mean")
        if np.max(np.abs(P - P.T), initial=0.0) > 1e-9:
            raise ValueError("covariance is not symmetric")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", P)


def residual(a, b, angles=()):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    for k in angles:
        d[..., k] = wrap_angle(d[..., k])
    return d


def symmetrize(P):
    return 0.5 * (P + np.swapaxes(P, -1, -2))


# ---------------------------------------------------------------------------
# square roots and PSD repair


def _psd_sqrt(P: np.ndarray):
    """Lower-triangular S with S S^T = P for PSD, possibly singular, P (batched).

    Returns ``(S, bad)``; indefinite or non-finite entries get ``S = 0``.
    """
    finite = np.all(np.isfinite(P), axis=(-2, -1))
    P = np.where(finite[..., None, None], P, 0.0)
    w, V = np.linalg.eigh(P)
    scale = np.maximum(1.0, np.max(np.abs(w), axis=-1))
    bad = ~finite | (w[..., 0] < -1e-9 * scale)
    A = V * np.sqrt(np.clip(w, 0.0, None))[..., None, :]
    # A A^T = P; QR of A^T gives R^T R = P with R upper triangular
    S = np.swapaxes(np.linalg.qr(np.swapaxes(A, -1, -2), mode="r"), -1, -2)
    sign = np.where(np.diagonal(S, axis1=-2, axis2=-1) < 0, -1.0, 1.0)
    S = S * sign[..., None, :]
    return np.where(bad[..., None, None], 0.0, S), bad


def cholesky_factor(P) -> np.ndarray:
    """Lower-triangular factor of a symmetric PSD matrix.

    Positive definite input goes through a plain Cholesky; semidefinite input
    (e.g. an exactly known state, P = 0) falls back to an eigen-decomposition.
    Raises :class:`FilterDivergenceError` for indefinite input.
    """
    P = symmetrize(np.asarray(P, dtype=float))
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        pass
    S, bad = _psd_sqrt(P)
    if np.any(bad):
        if not np.all(np.isfinite(P)):
            raise FilterDivergenceError("covariance is not finite")
        raise FilterDivergenceError(
            f"covariance is indefinite (min eigenvalue {np.linalg.eigvalsh(P).min():.3g})"
        )
    return S


def sqrt_batch(P: np.ndarray):
    """Batched :func:`cholesky_factor`. Returns ``(S, bad)``.

    ``bad`` marks entries that are indefinite or non-finite; their factor is
    zero so callers can keep going and decide what to do with them.
    """
    P = symmetrize(P)
    try:
        return np.linalg.cholesky(P), np.zeros(P.shape[:-2], dtype=bool)
    except np.linalg.LinAlgError:
        pass
    S, bad = _psd_sqrt(P)
    # keep the plain Cholesky factor wherever it exists; it is more accurate
    # than the eigen route for nearly singular P
    w = np.linalg.eigvalsh(P)
    pd = ~bad & (w[..., 0] > 1e-10 * np.abs(w[..., -1]))
    if np.any(pd):
        try:
            S[pd] = np.linalg.cholesky(P[pd])
        except np.linalg.LinAlgError:
            pass
    return S, bad


def ensure_psd(P: np.ndarray) -> np.ndarray:
    """Symmetrize; clip negative eigenvalues only where a jittered Cholesky fails."""
    P = symmetrize(P)
    n = P.shape[-1]
    try:
        np.linalg.cholesky(P + PSD_JITTER * np.eye(n))
        return P
    except np.linalg.LinAlgError:
        pass
    if not np.all(np.isfinite(P)):
        return P
    w, V = np.linalg.eigh(P)
    fix = w[..., 0] < 0
    clipped = (V * np.clip(w, 0.0, None)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return np.where(fix[..., None, None], symmetrize(clipped), P)


# ---------------------------------------------------------------------------
# weighted statistics over sigma / cubature points


def weighted_mean(X: np.ndarray, w: np.ndarray, angles=()) -> np.ndarray:
    """Weighted mean over axis -2; angle components use the circular mean."""
    ref = X[..., :1, :]
    d = residual(X, ref, angles)
    mean = ref[..., 0, :] + np.einsum("m,...md->...d", w, d)
    for k in angles:
        s = np.einsum("m,...m->...", w, np.sin(d[..., k]))
        c = np.einsum("m,...m->...", w, np.cos(d[..., k]))
        mean[..., k] = wrap_angle(ref[..., 0, k] + np.arctan2(s, c))
    return mean


def weighted_cross(X, x_mean, Y, y_mean, w, x_angles=(), y_angles=()):
    dx = residual(X, x_mean[..., None, :], x_angles)
    dy = residual(Y, y_mean[..., None, :], y_angles)
    return np.einsum("m,...mi,...mj->...ij", w, dx, dy)


# ---------------------------------------------------------------------------
# filters


class SigmaPointFilter:
    """Shared machinery for the deterministic-sampling filters."""

    def __init__(self, model: Model = ROBOT_MODEL):
        self.model = model

    def points(self, mean, cov):
        """Return ``(X, wm, wc, bad)`` with X of shape (..., m, n)."""
        raise NotImplementedError

    def predict(self, mean, cov, u, dt, Q):
        """Returns ``(mean, cov, bad)``."""
        m = self.model
        X, wm, wc, bad = self.points(mean, cov)
        Y = m.f(X, np.asarray(u, dtype=float)[..., None, :], dt)
        y = weighted_mean(Y, wm, m.state_angles)
        P = weighted_cross(Y, y, Y, y, wc, m.state_angles, m.state_angles) + Q
        return y, symmetrize(P), bad

    def predict_measurement(self, mean, cov, ctx, R):
        """Returns ``(z_hat, Pzz, Pxz, bad)``; ``R`` may already be inflated."""
        m = self.model
        X, wm, wc, bad = self.points(mean, cov)
        Z = m.h(X, np.asarray(ctx, dtype=float)[..., None, :])
        z_hat = weighted_mean(Z, wm, m.meas_angles)
        Pzz = weighted_cross(Z, z_hat, Z, z_hat, wc, m.meas_angles, m.meas_angles) + R
        Pxz = weighted_cross(X, mean, Z, z_hat, wc, m.state_angles, m.meas_angles)
        return z_hat, symmetrize(Pzz), Pxz, bad


class CKF(SigmaPointFilter):
    """Third-degree spherical-radial cubature rule: 2n points at +-sqrt(n)."""

    kind = "ckf"

    def points(self, mean, cov):
        mean = np.asarray(mean, dtype=float)
        n = mean.shape[-1]
        S, bad = sqrt_batch(np.asarray(cov, dtype=float))
        cols = np.sqrt(n) * np.swapaxes(S, -1, -2)  # rows = scaled columns of S
        X = np.concatenate([mean[..., None, :] + cols, mean[..., None, :] - cols], axis=-2)
        w = np.full(2 * n, 1.0 / (2 * n))
        return X, w, w, bad


class UKF(SigmaPointFilter):
    """Scaled unscented transform with 2n+1 sigma points."""

    kind = "ukf"

    def __init__(self, model: Model = ROBOT_MODEL, alpha=1e-3, beta=2.0, kappa=0.0):
        super().__init__(model)
        self.alpha = alpha
        self.beta = beta
        self.kappa = kappa

    def weights(self, n):
        lam = self.alpha**2 * (n + self.kappa) - n
        wm = np.full(2 * n + 1, 0.5 / (n + lam))
        wc = wm.copy()
        wm[0] = lam / (n + lam)
        wc[0] = wm[0] + 1.0 - self.alpha**2 + self.beta
        return wm, wc, n + lam

    def points(self, mean, cov):
        mean = np.asarray(mean, dtype=float)
        n = mean.shape[-1]
        wm, wc, c = self.weights(n)
        S, bad = sqrt_batch(np.asarray(cov, dtype=float))
        cols = np.sqrt(c) * np.swapaxes(S, -1, -2)
        mu = mean[..., None, :]
        X = np.concatenate([mu, mu + cols, mu - cols], axis=-2)
        return X, wm, wc, bad


class EKF:
    """First-order linearization with analytic Jacobians."""

    kind = "ekf"

    def __init__(self, model: Model = ROBOT_MODEL):
        self.model = model

    def predict(self, mean, cov, u, dt, Q):
        m = self.model
        mean = np.asarray(mean, dtype=float)
        u = np.asarray(u, dtype=float)
        F = m.f_jac(mean, u, dt)
        y = m.f(mean, u, dt)
        P = F @ cov @ np.swapaxes(F, -1, -2) + Q
        bad = ~np.all(np.isfinite(P), axis=(-2, -1))
        return y, symmetrize(P), bad

    def predict_measurement(self, mean, cov, ctx, R):
        m = self.model
        H = m.h_jac(mean, ctx)
        z_hat = m.h(mean, ctx)
        Pxz = cov @ np.swapaxes(H, -1, -2)
        Pzz = H @ Pxz + R
        bad = ~np.all(np.isfinite(cov), axis=(-2, -1))
        return z_hat, symmetrize(Pzz), Pxz, bad


FILTERS = {"ckf": CKF, "ukf": UKF, "ekf": EKF}


def make_filter(kind: str, model: Model = ROBOT_MODEL, **params):
    try:
        cls = FILTERS[kind]
    except KeyError:
        raise ValueError(f"unknown filter kind {kind!r}") from None
    return cls(model, **params) if cls is UKF else cls(model)


def effective_noise(model: Model, R, ctx, neighbor_cov=None, mean=None):
    """Measurement noise inflated by the neighbor's broadcast covariance.

    ``R + Hj P_j Hj^T`` with ``Hj`` the Jacobian of h with respect to the
    neighbor state, evaluated at the neighbor mean.
    """
    R = np.asarray(R, dtype=float)
    if neighbor_cov is None or model.h_jac_ctx is None:
        return R
    Hj = model.h_jac_ctx(mean, ctx)
    return R + Hj @ neighbor_cov @ np.swapaxes(Hj, -1, -2)


def singular(Pzz: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(Pzz, compute_uv=False)
    smax = s[..., 0]
    return ~(np.isfinite(smax) & (smax > PZZ_ABS_FLOOR) & (s[..., -1] > PZZ_RCOND * smax))


def apply_update(mean, cov, z, z_hat, Pzz, Pxz, model: Model = ROBOT_MODEL, mask=None):
    """Kalman update from a predicted measurement.

    Returns ``(mean, cov, innovation, gain, ok)``. Entries where ``mask`` is
    False or ``Pzz`` is singular are returned unchanged with ``ok`` False.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    innov = residual(z, z_hat, model.meas_angles)
    ok = ~singular(Pzz)
    if mask is not None:
        ok &= mask
    safe = np.where(ok[..., None, None], Pzz, np.eye(Pzz.shape[-1]))
    K = np.swapaxes(np.linalg.solve(safe, np.swapaxes(Pxz, -1, -2)), -1, -2)
    K = np.where(ok[..., None, None], K, 0.0)
    new_mean = mean + np.einsum("...ij,...j->...i", K, innov)
    for k in model.state_angles:
        new_mean[..., k] = wrap_angle(new_mean[..., k])
    new_cov = cov - K @ safe @ np.swapaxes(K, -1, -2)
    new_cov = np.where(ok[..., None, None], ensure_psd(new_cov), cov)
    return new_mean, new_cov, innov, K, ok


# ---------------------------------------------------------------------------
# single-estimate API


def _u(u):
    if isinstance(u, ControlInput):
        return np.array([u.v, u.omega])
    return np.asarray(u, dtype=float)


def _z(z):
    return z.z if hasattr(z, "z") else np.asarray(z, dtype=float)


def _predict(flt, est: Estimate, u, dt, Q) -> Estimate:
    mean, cov, bad = flt.predict(est.mean, est.cov, _u(u), dt, np.asarray(Q, dtype=float))
    if bad:
        raise FilterDivergenceError("prediction failed: indefinite covariance")
    return Estimate(mean, cov)


def _correct(flt, est: Estimate, neighbor_mean, z, R, neighbor_cov=None):
    ctx = np.asarray(neighbor_mean, dtype=float)
    R_eff = effective_noise(flt.model, R, ctx, neighbor_cov, est.mean)
    z_hat, Pzz, Pxz, bad = flt.predict_measurement(est.mean, est.cov, ctx, R_eff)
    if bad:
        raise FilterDivergenceError("correction failed: indefinite covariance")
    mean, cov, innov, K, ok = apply_update(est.mean, est.cov, _z(z), z_hat, Pzz, Pxz, flt.model)
    if not ok:
        warnings.warn("innovation covariance is singular; measurement skipped", ConditioningWarning)
    return Estimate(mean, cov), innov, K


def ckf_predict(est: Estimate, u, dt: float, Q, model: Model = ROBOT_MODEL) -> Estimate:
    return _predict(CKF(model), est, u, dt, Q)


def ckf_correct(est: Estimate, neighbor_mean, z, R, neighbor_cov=None, model: Model = ROBOT_MODEL):
    return _correct(CKF(model), est, neighbor_mean, z, R, neighbor_cov)


def ukf_predict(est: Estimate, u, dt: float, Q, model: Model = ROBOT_MODEL, **params) -> Estimate:
    return _predict(UKF(model, **params), est, u, dt, Q)


def ukf_correct(est: Estimate, neighbor_mean, z, R, neighbor_cov=None, model: Model = ROBOT_MODEL, **params):
    return _correct(UKF(model, **params), est, neighbor_mean, z, R, neighbor_cov)


def ekf_predict(est: Estimate, u, dt: float, Q, model: Model = ROBOT_MODEL) -> Estimate:
    return _predict(EKF(model), est, u, dt, Q)


def ekf_correct(est: Estimate, neighbor_mean, z, R, neighbor_cov=None, model: Model = ROBOT_MODEL):
    return _correct(EKF(model), est, neighbor_mean, z, R, neighbor_cov)
