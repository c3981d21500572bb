# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled batch kernels (Cython backend).

Same contract as ``uowloc._kernels_py``; see that module for the API docs.
Per-trial math runs as sequential C loops over anchors, which keeps results
independent of batch composition and thread count.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport M_PI, acos, atan2, cos, exp, fmod, isfinite, sin, sqrt

cnp.import_array()

cdef double TWO_PI = 6.283185307179586476925286766559
cdef double CONDITION_LIMIT = 1e12

STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_SINGULAR = 2


cdef inline double _wrap(double a) noexcept nogil:
    cdef double m = fmod(a + M_PI, TWO_PI)
    if m <= 0.0:
        m += TWO_PI
    return m - M_PI


cdef inline double _clip(double x, double lo, double hi) noexcept nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


cdef inline double _det3(double[3][3] a) noexcept nogil:
    return (a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]))


cdef inline void _inv3_sym(double[3][3] a, double[3][3] out) noexcept nogil:
    # Adjugate inverse of a symmetric matrix; mirrored output.
    cdef double det = _det3(a)
    cdef double c00 = a[1][1] * a[2][2] - a[1][2] * a[2][1]
    cdef double c01 = a[0][2] * a[2][1] - a[0][1] * a[2][2]
    cdef double c02 = a[0][1] * a[1][2] - a[0][2] * a[1][1]
    cdef double c11 = a[0][0] * a[2][2] - a[0][2] * a[2][0]
    cdef double c12 = a[0][2] * a[1][0] - a[0][0] * a[1][2]
    cdef double c22 = a[0][0] * a[1][1] - a[0][1] * a[1][0]
    out[0][0] = c00 / det
    out[0][1] = c01 / det
    out[0][2] = c02 / det
    out[1][0] = out[0][1]
    out[1][1] = c11 / det
    out[1][2] = c12 / det
    out[2][0] = out[0][2]
    out[2][1] = out[1][2]
    out[2][2] = c22 / det


cdef inline double _fro3(double[3][3] a) noexcept nogil:
    cdef double s = 0.0
    cdef int i, k
    for i in range(3):
        for k in range(3):
            s += a[i][k] * a[i][k]
    return sqrt(s)


cdef inline double _cond3(double[3][3] a, double[3][3] a_inv) noexcept nogil:
    cdef int i, k
    for i in range(3):
        for k in range(3):
            if not isfinite(a_inv[i][k]):
                return 1e308
    return _fro3(a) * _fro3(a_inv)


cdef inline bint _weight_or_fallback(double[3][3] cov, double[3][3] w) noexcept nogil:
    # Returns True when the isotropic fallback was used.
    cdef double trace, scale
    cdef int i, k
    _inv3_sym(cov, w)
    if _cond3(cov, w) <= CONDITION_LIMIT:
        return False
    trace = cov[0][0] + cov[1][1] + cov[2][2]
    scale = 3.0 / trace if (trace > 0.0 and isfinite(trace)) else 1.0
    for i in range(3):
        for k in range(3):
            w[i][k] = 0.0
        w[i][i] = scale
    return True


def trial_errors(double[:, ::1] sources, double[:, :, ::1] anchors_true,
                 double[:, :, ::1] anchors_drifted, double[:, :, ::1] zdraws,
                 double[::1] sigma_meas, double[::1] sigma_drift):
    cdef Py_ssize_t n_trials = sources.shape[0]
    cdef Py_ssize_t n_anchors = anchors_true.shape[1]
    sq_errors_arr = np.full((n_trials, 4), np.nan)
    status_arr = np.zeros(n_trials, dtype=np.uint8)
    clamp_arr = np.zeros(n_trials, dtype=np.int64)
    fallback_arr = np.zeros(n_trials, dtype=np.int64)
    cdef double[:, ::1] sq_errors = sq_errors_arr
    cdef cnp.uint8_t[::1] status = status_arr
    cdef cnp.int64_t[::1] clamps = clamp_arr
    cdef cnp.int64_t[::1] fallbacks = fallback_arr

    cdef double sd = sigma_meas[0], sp_ = sigma_meas[1], st_ = sigma_meas[2]
    cdef double drift0 = sigma_drift[0] * sigma_drift[0]
    cdef double drift1 = sigma_drift[1] * sigma_drift[1]
    cdef double drift2 = sigma_drift[2] * sigma_drift[2]
    cdef double sig2[3]
    sig2[0] = sd * sd
    sig2[1] = sp_ * sp_
    sig2[2] = st_ * st_

    cdef Py_ssize_t t, j
    cdef int i, k, l
    cdef double xt, yt, zt, dd, phi, theta
    cdef double dn, pn, tn, sth, cth, sph, cph
    cdef double fix_t[3]
    cdef double fix_a[3]
    cdef double b[3][3]
    cdef double s_fix[3][3]
    cdef double s_apu[3][3]
    cdef double w[3][3]
    cdef double lls_t[3]
    cdef double lls_a[3]
    cdef double wsum_t[3][3]
    cdef double rhs_t[3]
    cdef double wsum_a[3][3]
    cdef double rhs_a[3]
    cdef double winv[3][3]
    cdef double acc, e0, e1, e2
    cdef bint degenerate, singular

    with nogil:
        for t in range(n_trials):
            degenerate = False
            singular = False
            for i in range(3):
                lls_t[i] = 0.0
                lls_a[i] = 0.0
                rhs_t[i] = 0.0
                rhs_a[i] = 0.0
                for k in range(3):
                    wsum_t[i][k] = 0.0
                    wsum_a[i][k] = 0.0
            for j in range(n_anchors):
                xt = sources[t, 0] - anchors_true[t, j, 0]
                yt = sources[t, 1] - anchors_true[t, j, 1]
                zt = sources[t, 2] - anchors_true[t, j, 2]
                dd = sqrt(xt * xt + yt * yt + zt * zt)
                if dd <= 0.0:
                    degenerate = True
                    break
                phi = atan2(yt, xt)
                theta = acos(_clip(zt / dd, -1.0, 1.0))

                dn = dd + sd * zdraws[t, j, 0]
                if dn < 0.0:
                    dn = 0.0
                    clamps[t] += 1
                pn = _wrap(phi + sp_ * zdraws[t, j, 1])
                tn = theta + st_ * zdraws[t, j, 2]
                if tn < 0.0 or tn > M_PI:
                    tn = _clip(tn, 0.0, M_PI)
                    clamps[t] += 1

                sth = sin(tn)
                cth = cos(tn)
                sph = sin(pn)
                cph = cos(pn)
                fix_t[0] = anchors_true[t, j, 0] + dn * sth * cph
                fix_t[1] = anchors_true[t, j, 1] + dn * sth * sph
                fix_t[2] = anchors_true[t, j, 2] + dn * cth
                fix_a[0] = anchors_drifted[t, j, 0] + dn * sth * cph
                fix_a[1] = anchors_drifted[t, j, 1] + dn * sth * sph
                fix_a[2] = anchors_drifted[t, j, 2] + dn * cth
                for i in range(3):
                    lls_t[i] += fix_t[i]
                    lls_a[i] += fix_a[i]

                b[0][0] = sth * cph
                b[0][1] = -dn * sth * sph
                b[0][2] = dn * cth * cph
                b[1][0] = sth * sph
                b[1][1] = dn * sth * cph
                b[1][2] = dn * cth * sph
                b[2][0] = cth
                b[2][1] = 0.0
                b[2][2] = -dn * sth
                for i in range(3):
                    for k in range(3):
                        acc = 0.0
                        for l in range(3):
                            acc += b[i][l] * sig2[l] * b[k][l]
                        s_fix[i][k] = acc
                for i in range(3):
                    for k in range(3):
                        s_apu[i][k] = s_fix[i][k]
                s_apu[0][0] += drift0
                s_apu[1][1] += drift1
                s_apu[2][2] += drift2

                if _weight_or_fallback(s_fix, w):
                    fallbacks[t] += 1
                for i in range(3):
                    for k in range(3):
                        wsum_t[i][k] += w[i][k]
                    rhs_t[i] += w[i][0] * fix_t[0] + w[i][1] * fix_t[1] + w[i][2] * fix_t[2]

                if _weight_or_fallback(s_apu, w):
                    fallbacks[t] += 1
                for i in range(3):
                    for k in range(3):
                        wsum_a[i][k] += w[i][k]
                    rhs_a[i] += w[i][0] * fix_a[0] + w[i][1] * fix_a[1] + w[i][2] * fix_a[2]

            if degenerate:
                status[t] = 1
                continue

            e0 = lls_t[0] / n_anchors - sources[t, 0]
            e1 = lls_t[1] / n_anchors - sources[t, 1]
            e2 = lls_t[2] / n_anchors - sources[t, 2]
            sq_errors[t, 0] = e0 * e0 + e1 * e1 + e2 * e2
            e0 = lls_a[0] / n_anchors - sources[t, 0]
            e1 = lls_a[1] / n_anchors - sources[t, 1]
            e2 = lls_a[2] / n_anchors - sources[t, 2]
            sq_errors[t, 2] = e0 * e0 + e1 * e1 + e2 * e2

            _inv3_sym(wsum_t, winv)
            if _cond3(wsum_t, winv) > CONDITION_LIMIT:
                singular = True
            else:
                e0 = winv[0][0] * rhs_t[0] + winv[0][1] * rhs_t[1] + winv[0][2] * rhs_t[2] - sources[t, 0]
                e1 = winv[1][0] * rhs_t[0] + winv[1][1] * rhs_t[1] + winv[1][2] * rhs_t[2] - sources[t, 1]
                e2 = winv[2][0] * rhs_t[0] + winv[2][1] * rhs_t[1] + winv[2][2] * rhs_t[2] - sources[t, 2]
                sq_errors[t, 1] = e0 * e0 + e1 * e1 + e2 * e2

            _inv3_sym(wsum_a, winv)
            if _cond3(wsum_a, winv) > CONDITION_LIMIT:
                singular = True
            else:
                e0 = winv[0][0] * rhs_a[0] + winv[0][1] * rhs_a[1] + winv[0][2] * rhs_a[2] - sources[t, 0]
                e1 = winv[1][0] * rhs_a[0] + winv[1][1] * rhs_a[1] + winv[1][2] * rhs_a[2] - sources[t, 1]
                e2 = winv[2][0] * rhs_a[0] + winv[2][1] * rhs_a[1] + winv[2][2] * rhs_a[2] - sources[t, 2]
                sq_errors[t, 3] = e0 * e0 + e1 * e1 + e2 * e2

            if singular:
                status[t] = 2

    # NaN-out failed trials outside nogil (np.nan unavailable in nogil code).
    sq_errors_arr[status_arr != 0] = np.nan
    return sq_errors_arr, status_arr, clamp_arr, fallback_arr


cdef inline void _crlb_row(double[3][3] j, double* out, bint* bad) noexcept nogil:
    cdef double det = _det3(j)
    cdef double j_inv[3][3]
    _inv3_sym(j, j_inv)
    if det == 0.0 or _cond3(j, j_inv) > CONDITION_LIMIT:
        bad[0] = True
        return
    bad[0] = False
    out[0] = (j[1][1] * j[2][2] - j[1][2] * j[1][2]) / det
    out[1] = (j[0][0] * j[2][2] - j[0][2] * j[0][2]) / det
    out[2] = (j[0][0] * j[1][1] - j[0][1] * j[0][1]) / det
    out[3] = out[0] + out[1] + out[2]


def bounds(double[:, ::1] sources, double[:, :, ::1] anchors_true,
           double[::1] sigma_meas, double[::1] sigma_drift,
           bint unit_prefactor, double gain3, double extinction,
           bint distance_attenuation, bint paper_c12, bint include_meas_noise):
    cdef Py_ssize_t n_trials = sources.shape[0]
    cdef Py_ssize_t n_anchors = anchors_true.shape[1]
    out_arr = np.full((n_trials, 2, 4), np.nan)
    status_arr = np.zeros((n_trials, 2), dtype=np.uint8)
    cdef double[:, :, ::1] out = out_arr
    cdef cnp.uint8_t[:, ::1] status = status_arr

    cdef double inv_sd2 = 1.0 / (sigma_meas[0] * sigma_meas[0])
    cdef double inv_sp2 = 1.0 / (sigma_meas[1] * sigma_meas[1])
    cdef double inv_st2 = 1.0 / (sigma_meas[2] * sigma_meas[2])
    cdef double sx2 = sigma_drift[0] * sigma_drift[0]
    cdef double sy2 = sigma_drift[1] * sigma_drift[1]
    cdef double sz2 = sigma_drift[2] * sigma_drift[2]
    cdef double mu_const = exp(-extinction)
    cdef double x_sign = 1.0 if paper_c12 else -1.0

    cdef Py_ssize_t t, j
    cdef int i, k, l
    cdef double xt, yt, zt, dd, d2, dsq, d2sq, w
    cdef double phi, theta, sph, cph, sth, denom
    cdef double jk[3][3]
    cdef double ja[3][3]
    cdef double c[3][3]
    cdef double c_inv[3][3]
    cdef double g[3][3]
    cdef double gc[3][3]
    cdef double row[4]
    cdef double acc
    cdef bint degenerate, apu_singular, bad

    with nogil:
        for t in range(n_trials):
            degenerate = False
            apu_singular = False
            for i in range(3):
                for k in range(3):
                    jk[i][k] = 0.0
                    ja[i][k] = 0.0
            for j in range(n_anchors):
                xt = sources[t, 0] - anchors_true[t, j, 0]
                yt = sources[t, 1] - anchors_true[t, j, 1]
                zt = sources[t, 2] - anchors_true[t, j, 2]
                d2sq = xt * xt + yt * yt
                d2 = sqrt(d2sq)
                dd = sqrt(d2sq + zt * zt)
                if dd <= 0.0 or d2 <= 0.0:
                    degenerate = True
                    break
                dsq = dd * dd

                if unit_prefactor:
                    w = 1.0
                elif distance_attenuation:
                    w = gain3 * exp(-extinction * dd)
                else:
                    w = gain3 * mu_const

                jk[0][0] += w * ((xt * xt / dsq) * inv_sd2
                                 + (yt * yt / (d2sq * d2sq)) * inv_sp2
                                 + (xt * zt / (dsq * d2)) * (xt * zt / (dsq * d2)) * inv_st2)
                jk[0][1] += w * xt * yt * (inv_sd2 / dsq
                                           - inv_sp2 / (d2sq * d2sq)
                                           + (zt / (dsq * d2)) * (zt / (dsq * d2)) * inv_st2)
                jk[0][2] += w * (xt * zt / dsq) * (inv_sd2 - inv_st2 / dsq)
                jk[1][1] += w * ((yt * yt / dsq) * inv_sd2
                                 + (xt * xt / (d2sq * d2sq)) * inv_sp2
                                 + (yt * zt / (dsq * d2)) * (yt * zt / (dsq * d2)) * inv_st2)
                jk[1][2] += w * (yt * zt / dsq) * (inv_sd2 - inv_st2 / dsq)
                jk[2][2] += w * ((zt * zt) * inv_sd2 + (d2 / dd) * (d2 / dd) * inv_st2) / dsq

                phi = atan2(yt, xt)
                theta = acos(_clip(zt / dd, -1.0, 1.0))
                sph = sin(phi)
                cph = cos(phi)
                sth = sin(theta)
                denom = cph * xt + sph * yt

                c[0][0] = (sx2 * xt * xt + sy2 * yt * yt + sz2 * zt * zt) / dsq
                c[0][1] = (x_sign * sph * sx2 * xt + cph * sy2 * yt) / (denom * dd)
                c[0][2] = -zt * sz2 / (sth * dsq)
                c[1][0] = c[0][1]
                c[1][1] = (sph * sph * sx2 + cph * cph * sy2) / (denom * denom)
                c[1][2] = 0.0
                c[2][0] = c[0][2]
                c[2][1] = 0.0
                c[2][2] = sz2 / ((sth * dd) * (sth * dd))
                if include_meas_noise:
                    c[0][0] += 1.0 / inv_sd2
                    c[1][1] += 1.0 / inv_sp2
                    c[2][2] += 1.0 / inv_st2

                _inv3_sym(c, c_inv)
                if _cond3(c, c_inv) > CONDITION_LIMIT:
                    apu_singular = True
                    continue

                g[0][0] = xt / dd
                g[0][1] = -yt / d2sq
                g[0][2] = xt * zt / (dsq * d2)
                g[1][0] = yt / dd
                g[1][1] = xt / d2sq
                g[1][2] = yt * zt / (dsq * d2)
                g[2][0] = zt / dd
                g[2][1] = 0.0
                g[2][2] = -d2 / dsq
                for i in range(3):
                    for k in range(3):
                        acc = 0.0
                        for l in range(3):
                            acc += g[i][l] * c_inv[l][k]
                        gc[i][k] = acc
                for i in range(3):
                    for k in range(i, 3):
                        acc = 0.0
                        for l in range(3):
                            acc += gc[i][l] * g[k][l]
                        ja[i][k] += w * acc

            if degenerate:
                status[t, 0] = 1
                status[t, 1] = 1
                continue

            jk[1][0] = jk[0][1]
            jk[2][0] = jk[0][2]
            jk[2][1] = jk[1][2]
            _crlb_row(jk, row, &bad)
            if bad:
                status[t, 0] = 2
            else:
                for i in range(4):
                    out[t, 0, i] = row[i]

            if apu_singular:
                status[t, 1] = 2
            else:
                ja[1][0] = ja[0][1]
                ja[2][0] = ja[0][2]
                ja[2][1] = ja[1][2]
                _crlb_row(ja, row, &bad)
                if bad:
                    status[t, 1] = 2
                else:
                    for i in range(4):
                        out[t, 1, i] = row[i]

    return out_arr, status_arr
