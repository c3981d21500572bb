"""Vectorized numpy batch kernels (pure-Python backend).

Same contract as the compiled ``uowloc._kernels`` extension: all inputs are
plain float64 arrays, per-trial results are independent of the batch they
arrive in, and failures are reported through per-trial status codes instead
of exceptions so one bad trial cannot abort a sweep.

Status codes: 0 ok, 1 degenerate geometry, 2 singular matrix.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi
CONDITION_LIMIT = 1e12

STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_SINGULAR = 2


def _wrap(a):
    m = np.fmod(a + np.pi, TWO_PI)
    m = np.where(m <= 0.0, m + TWO_PI, m)
    return m - np.pi


def _det3(a):
    return (
        a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
        - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
        + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0])
    )


def _inv3_sym(a):
    """Adjugate inverse of symmetric 3x3 blocks; exactly symmetric output."""
    det = _det3(a)
    out = np.empty_like(a)
    c00 = a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1]
    c01 = a[..., 0, 2] * a[..., 2, 1] - a[..., 0, 1] * a[..., 2, 2]
    c02 = a[..., 0, 1] * a[..., 1, 2] - a[..., 0, 2] * a[..., 1, 1]
    c11 = a[..., 0, 0] * a[..., 2, 2] - a[..., 0, 2] * a[..., 2, 0]
    c12 = a[..., 0, 2] * a[..., 1, 0] - a[..., 0, 0] * a[..., 1, 2]
    c22 = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    out[..., 0, 0] = c00
    out[..., 0, 1] = c01
    out[..., 0, 2] = c02
    out[..., 1, 0] = c01
    out[..., 1, 1] = c11
    out[..., 1, 2] = c12
    out[..., 2, 0] = c02
    out[..., 2, 1] = c12
    out[..., 2, 2] = c22
    with np.errstate(divide="ignore", invalid="ignore"):
        out /= det[..., None, None]
    return out


def _fro(a):
    return np.sqrt(np.sum(a * a, axis=(-2, -1)))


def _cond(a, a_inv):
    with np.errstate(invalid="ignore"):
        c = _fro(a) * _fro(a_inv)
    return np.where(np.isfinite(c), c, np.inf)


def _true_geometry(sources, anchors):
    rel = sources[:, None, :] - anchors
    dd = np.sqrt(np.sum(rel * rel, axis=-1))
    d2 = np.sqrt(rel[..., 0] ** 2 + rel[..., 1] ** 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = np.arctan2(rel[..., 1], rel[..., 0])
        theta = np.arccos(np.clip(rel[..., 2] / dd, -1.0, 1.0))
    return rel, dd, d2, phi, theta


def _weights_or_fallback(cov):
    """Inverse of each (T,M,3,3) block, isotropic fallback past the guard."""
    inv = _inv3_sym(cov)
    bad = ~np.all(np.isfinite(inv), axis=(-2, -1))
    bad |= _cond(cov, inv) > CONDITION_LIMIT
    trace = cov[..., 0, 0] + cov[..., 1, 1] + cov[..., 2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where((trace > 0.0) & np.isfinite(trace), 3.0 / trace, 1.0)
    fallback = scale[..., None, None] * np.eye(3)
    w = np.where(bad[..., None, None], fallback, inv)
    return w, bad


def _wlls_solve(cov, fixes):
    w, fell_back = _weights_or_fallback(cov)
    w_sum = np.sum(w, axis=1)
    rhs = np.einsum("tmij,tmj->ti", w, fixes)
    w_inv = _inv3_sym(w_sum)
    bad = _cond(w_sum, w_inv) > CONDITION_LIMIT
    pos = np.einsum("tij,tj->ti", w_inv, rhs)
    return pos, np.sum(fell_back, axis=1), bad


def trial_errors(sources, anchors_true, anchors_drifted, zdraws, sigma_meas, sigma_drift):
    """Squared position errors for one batch of Monte Carlo trials.

    sources (T,3); anchors_true/anchors_drifted (T,M,3); zdraws (T,M,3)
    standard-normal draws in (d, phi, theta) order; sigma_meas (3,);
    sigma_drift (3,).

    Returns (sq_errors (T,4) [lls, wlls, lls_apu, wlls_apu], status (T,),
    clamp_counts (T,), fallback_counts (T,)).  Failed trials carry NaN
    errors and a nonzero status.
    """
    sources = np.ascontiguousarray(sources, dtype=float)
    anchors_true = np.ascontiguousarray(anchors_true, dtype=float)
    anchors_drifted = np.ascontiguousarray(anchors_drifted, dtype=float)
    zdraws = np.ascontiguousarray(zdraws, dtype=float)
    sigma_meas = np.asarray(sigma_meas, dtype=float)
    sigma_drift = np.asarray(sigma_drift, dtype=float)
    n_trials = sources.shape[0]

    with np.errstate(invalid="ignore", divide="ignore"):
        rel, dd, d2, phi, theta = _true_geometry(sources, anchors_true)
        status = np.where(np.min(dd, axis=1) <= 0.0, STATUS_DEGENERATE, STATUS_OK).astype(np.uint8)

        d_noisy = dd + sigma_meas[0] * zdraws[..., 0]
        clamped_d = d_noisy < 0.0
        d_noisy = np.where(clamped_d, 0.0, d_noisy)
        phi_noisy = _wrap(phi + sigma_meas[1] * zdraws[..., 1])
        theta_raw = theta + sigma_meas[2] * zdraws[..., 2]
        clamped_t = (theta_raw < 0.0) | (theta_raw > np.pi)
        theta_noisy = np.minimum(np.pi, np.maximum(0.0, theta_raw))
        clamp_counts = (np.sum(clamped_d, axis=1) + np.sum(clamped_t, axis=1)).astype(np.int64)

        st = np.sin(theta_noisy)
        ct = np.cos(theta_noisy)
        sp = np.sin(phi_noisy)
        cp = np.cos(phi_noisy)
        offset = d_noisy[..., None] * np.stack([st * cp, st * sp, ct], axis=-1)
        fixes_true = anchors_true + offset
        fixes_apu = anchors_drifted + offset

        lls_true = np.mean(fixes_true, axis=1)
        lls_apu = np.mean(fixes_apu, axis=1)

        b = np.empty(dd.shape + (3, 3))
        b[..., 0, 0] = st * cp
        b[..., 0, 1] = -d_noisy * st * sp
        b[..., 0, 2] = d_noisy * ct * cp
        b[..., 1, 0] = st * sp
        b[..., 1, 1] = d_noisy * st * cp
        b[..., 1, 2] = d_noisy * ct * sp
        b[..., 2, 0] = ct
        b[..., 2, 1] = 0.0
        b[..., 2, 2] = -d_noisy * st
        fix_cov = np.einsum("tmik,k,tmjk->tmij", b, sigma_meas**2, b)

        wlls_true, fb_true, bad_true = _wlls_solve(fix_cov, fixes_true)
        wlls_apu, fb_apu, bad_apu = _wlls_solve(
            fix_cov + np.diag(sigma_drift**2), fixes_apu
        )

        sq_errors = np.empty((n_trials, 4))
        sq_errors[:, 0] = np.sum((lls_true - sources) ** 2, axis=1)
        sq_errors[:, 1] = np.sum((wlls_true - sources) ** 2, axis=1)
        sq_errors[:, 2] = np.sum((lls_apu - sources) ** 2, axis=1)
        sq_errors[:, 3] = np.sum((wlls_apu - sources) ** 2, axis=1)

    status = np.where((status == STATUS_OK) & (bad_true | bad_apu), STATUS_SINGULAR, status)
    sq_errors[status != STATUS_OK] = np.nan
    fallback_counts = (fb_true + fb_apu).astype(np.int64)
    return sq_errors, status, clamp_counts, fallback_counts


def _prefactors(dd, unit_prefactor, gain3, extinction, distance_attenuation):
    if unit_prefactor:
        return np.ones_like(dd)
    if distance_attenuation:
        return gain3 * np.exp(-extinction * dd)
    return np.full_like(dd, gain3 * np.exp(-extinction))


def _crlb_rows(j):
    """Cofactor CRLB for (T,3,3) information matrices -> ((T,4), bad (T,))."""
    det = _det3(j)
    j_inv = _inv3_sym(j)
    bad = (det == 0.0) | (_cond(j, j_inv) > CONDITION_LIMIT)
    with np.errstate(divide="ignore", invalid="ignore"):
        var_x = (j[:, 1, 1] * j[:, 2, 2] - j[:, 1, 2] * j[:, 1, 2]) / det
        var_y = (j[:, 0, 0] * j[:, 2, 2] - j[:, 0, 2] * j[:, 0, 2]) / det
        var_z = (j[:, 0, 0] * j[:, 1, 1] - j[:, 0, 1] * j[:, 0, 1]) / det
    out = np.stack([var_x, var_y, var_z, var_x + var_y + var_z], axis=1)
    return out, bad


def bounds(
    sources,
    anchors_true,
    sigma_meas,
    sigma_drift,
    unit_prefactor,
    gain3,
    extinction,
    distance_attenuation,
    paper_c12,
    include_meas_noise,
):
    """Known-anchor and uncertainty-aware CRLBs for a batch of scenarios.

    Returns (out (T,2,4), status (T,2)): rows [known, apu], columns
    [var_x, var_y, var_z, total].  ``gain3`` is 3 * gain_factor; the
    per-anchor weight is gain3 * exp(-c) or gain3 * exp(-c d) (or 1 in
    unit-prefactor mode).  ``paper_c12`` selects the printed (1,2)
    covariance sign, else the derived-expectation sign.
    ``include_meas_noise`` adds the measurement variances to each drift
    covariance (effective-covariance mode).
    """
    sources = np.ascontiguousarray(sources, dtype=float)
    anchors_true = np.ascontiguousarray(anchors_true, dtype=float)
    sigma_meas = np.asarray(sigma_meas, dtype=float)
    sigma_drift = np.asarray(sigma_drift, dtype=float)
    n_trials = sources.shape[0]

    out = np.full((n_trials, 2, 4), np.nan)
    status = np.zeros((n_trials, 2), dtype=np.uint8)

    with np.errstate(invalid="ignore", divide="ignore"):
        rel, dd, d2, phi, theta = _true_geometry(sources, anchors_true)
        degenerate = np.any((dd <= 0.0) | (d2 <= 0.0), axis=1)
        w = _prefactors(dd, unit_prefactor, gain3, extinction, distance_attenuation)

        xt, yt, zt = rel[..., 0], rel[..., 1], rel[..., 2]
        dsq = dd * dd
        d2sq = d2 * d2
        inv_sd2 = 1.0 / sigma_meas[0] ** 2
        inv_sp2 = 1.0 / sigma_meas[1] ** 2
        inv_st2 = 1.0 / sigma_meas[2] ** 2

        j = np.empty((n_trials, 3, 3))
        j11 = np.sum(
            w * ((xt * xt / dsq) * inv_sd2
                 + (yt * yt / (d2sq * d2sq)) * inv_sp2
                 + (xt * zt / (dsq * d2)) ** 2 * inv_st2),
            axis=1,
        )
        j12 = np.sum(
            w * xt * yt * (inv_sd2 / dsq
                           - inv_sp2 / (d2sq * d2sq)
                           + (zt / (dsq * d2)) ** 2 * inv_st2),
            axis=1,
        )
        j13 = np.sum(w * (xt * zt / dsq) * (inv_sd2 - inv_st2 / dsq), axis=1)
        j22 = np.sum(
            w * ((yt * yt / dsq) * inv_sd2
                 + (xt * xt / (d2sq * d2sq)) * inv_sp2
                 + (yt * zt / (dsq * d2)) ** 2 * inv_st2),
            axis=1,
        )
        j23 = np.sum(w * (yt * zt / dsq) * (inv_sd2 - inv_st2 / dsq), axis=1)
        j33 = np.sum(w * ((zt * zt) * inv_sd2 + (d2 / dd) ** 2 * inv_st2) / dsq, axis=1)
        j[:, 0, 0] = j11
        j[:, 0, 1] = j[:, 1, 0] = j12
        j[:, 0, 2] = j[:, 2, 0] = j13
        j[:, 1, 1] = j22
        j[:, 1, 2] = j[:, 2, 1] = j23
        j[:, 2, 2] = j33
        known_rows, known_bad = _crlb_rows(j)

        # Drift-induced covariance per anchor.
        sx2, sy2, sz2 = sigma_drift**2
        spn = np.sin(phi)
        cpn = np.cos(phi)
        stn = np.sin(theta)
        denom = cpn * xt + spn * yt
        x_sign = 1.0 if paper_c12 else -1.0
        c = np.empty(dd.shape + (3, 3))
        c[..., 0, 0] = (sx2 * xt * xt + sy2 * yt * yt + sz2 * zt * zt) / dsq
        c[..., 0, 1] = c[..., 1, 0] = (x_sign * spn * sx2 * xt + cpn * sy2 * yt) / (denom * dd)
        c[..., 0, 2] = c[..., 2, 0] = -zt * sz2 / (stn * dsq)
        c[..., 1, 1] = (spn * spn * sx2 + cpn * cpn * sy2) / (denom * denom)
        c[..., 1, 2] = c[..., 2, 1] = 0.0
        c[..., 2, 2] = sz2 / (stn * dd) ** 2
        if include_meas_noise:
            c = c + np.diag(sigma_meas**2)

        c_inv = _inv3_sym(c)
        c_bad = np.any(_cond(c, c_inv) > CONDITION_LIMIT, axis=1)

        g = np.empty(dd.shape + (3, 3))
        g[..., 0, 0] = xt / dd
        g[..., 0, 1] = -yt / d2sq
        g[..., 0, 2] = xt * zt / (dsq * d2)
        g[..., 1, 0] = yt / dd
        g[..., 1, 1] = xt / d2sq
        g[..., 1, 2] = yt * zt / (dsq * d2)
        g[..., 2, 0] = zt / dd
        g[..., 2, 1] = 0.0
        g[..., 2, 2] = -d2 / dsq
        gc = np.einsum("tmak,tmkl->tmal", g, c_inv)
        j_apu = np.einsum("tm,tmal,tmbl->tab", w, gc, g)
        j_apu = np.triu(j_apu) + np.transpose(np.triu(j_apu, 1), (0, 2, 1))
        apu_rows, apu_bad = _crlb_rows(j_apu)

    for row, rows, bad in ((0, known_rows, known_bad), (1, apu_rows, apu_bad)):
        st_col = np.where(degenerate, STATUS_DEGENERATE,
                          np.where(bad, STATUS_SINGULAR, STATUS_OK)).astype(np.uint8)
        if row == 1:
            st_col = np.where((st_col == STATUS_OK) & c_bad, STATUS_SINGULAR, st_col)
        ok = st_col == STATUS_OK
        out[ok, row, :] = rows[ok]
        status[:, row] = st_col
    return out, status
