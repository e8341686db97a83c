# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the sequential GARCH recursions.

These loops are inherently serial (each step feeds the next), so they are the
runtime hot spots of fitting and Monte Carlo work.  The pure-Python module
``_kernels_py`` implements the same contracts and is used when this extension
is unavailable.

All variance recursions run in log space: ``l_i = log sigma2_i`` is advanced
via ``l_i = l_{i-1} + log(beta + (omega + alpha*y_{i-1}^2) * exp(-l_{i-1}))``,
which never overflows while the inputs stay representable.  Derivatives are
carried as the ratios ``(d sigma2 / d theta_j) / sigma2``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


def simulate_log_variance(const double[::1] eps, double log_init,
                          double omega0, double alpha0, double beta0,
                          double omega1, double alpha1, double beta1,
                          Py_ssize_t switch_index):
    """Log-variance path driven by innovations ``eps``.

    ``eps[0]`` pairs with the initial variance; entry ``i >= 1`` of the output
    uses the second parameter triple once ``i >= switch_index`` (no switch when
    ``switch_index <= 0``).  Uses ``y_{i-1}^2 = exp(l_{i-1}) * eps_{i-1}^2`` so
    the returns themselves are never materialised.
    """
    cdef Py_ssize_t n = eps.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ls = out
    cdef double l = log_init
    cdef double om, al, be, e2
    cdef Py_ssize_t i
    ls[0] = l
    for i in range(1, n):
        if switch_index > 0 and i >= switch_index:
            om = omega1; al = alpha1; be = beta1
        else:
            om = omega0; al = alpha0; be = beta0
        e2 = eps[i - 1] * eps[i - 1]
        l = l + log(be + al * e2 + om * exp(-l))
        ls[i] = l
    return out


def nll_grad(const double[::1] y, double y0_sq, double log_sigma0_sq,
             double omega, double alpha, double beta):
    """Gaussian quasi-likelihood kernel sum and its analytic gradient.

    Returns ``(sum_i [log s2_i + y_i^2/s2_i], g_omega, g_alpha, g_beta)`` for
    the filter started at ``(y0_sq, exp(log_sigma0_sq))`` with zero derivative
    state.
    """
    cdef Py_ssize_t n = y.shape[0]
    cdef double l_prev = log_sigma0_sq
    cdef double d_om = 0.0, d_al = 0.0, d_be = 0.0
    cdef double yp_sq = y0_sq
    cdef double nll = 0.0, g_om = 0.0, g_al = 0.0, g_be = 0.0
    cdef double l, s, r, z, f, w
    cdef Py_ssize_t i
    for i in range(n):
        w = exp(-l_prev)
        l = l_prev + log(beta + (omega + alpha * yp_sq) * w)
        s = exp(l)
        r = exp(l_prev - l)
        d_al = yp_sq / s + beta * d_al * r
        d_be = r * (1.0 + beta * d_be)
        d_om = 1.0 / s + beta * d_om * r
        z = y[i] * y[i] / s
        nll += l + z
        f = 1.0 - z
        g_om += f * d_om
        g_al += f * d_al
        g_be += f * d_be
        l_prev = l
        yp_sq = y[i] * y[i]
    return nll, g_om, g_al, g_be


def score_filter(const double[::1] y, double y_prev_sq,
                 double log_sigma2, double d_omega, double d_alpha,
                 double d_beta, double omega, double alpha, double beta):
    """One filter pass recording per-observation scores.

    The initial derivative state is explicit so a monitoring pass can resume
    from the terminal state of the training pass.  Returns
    ``(s_alpha, s_beta, loglik, log_sig2, state)`` where ``state`` is the
    tuple ``(log_sigma2, d_omega, d_alpha, d_beta, z_last)``.
    """
    cdef Py_ssize_t n = y.shape[0]
    cdef cnp.ndarray[double, ndim=1] s_al = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] s_be = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ll = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ls2 = np.empty(n, dtype=np.float64)
    cdef double[::1] v_al = s_al, v_be = s_be, v_ll = ll, v_ls = ls2
    cdef double l_prev = log_sigma2
    cdef double d_om = d_omega, d_al = d_alpha, d_be = d_beta
    cdef double yp_sq = y_prev_sq
    cdef double l, s, r, z, f
    cdef Py_ssize_t i
    z = 0.0
    for i in range(n):
        l = l_prev + log(beta + (omega + alpha * yp_sq) * exp(-l_prev))
        s = exp(l)
        r = exp(l_prev - l)
        d_al = yp_sq / s + beta * d_al * r
        d_be = r * (1.0 + beta * d_be)
        d_om = 1.0 / s + beta * d_om * r
        z = y[i] * y[i] / s
        f = 1.0 - z
        v_al[i] = f * d_al
        v_be[i] = f * d_be
        v_ll[i] = l + z
        v_ls[i] = l
        l_prev = l
        yp_sq = y[i] * y[i]
    return s_al, s_be, ll, ls2, (l_prev, d_om, d_al, d_be, z)


def sim_score_filter(const double[::1] eps,
                     double omega_sim, double alpha_sim, double beta_sim,
                     double log_init_sim,
                     double omega_fit, double alpha_fit, double beta_fit,
                     double log_init_fit):
    """Scores of the fitted filter along a freshly simulated path.

    Simulates the true log variance under the first triple while filtering at
    the second, tracking only the bounded ratios ``y^2/sigma2``; safe on
    explosive paths of any length.  Returns ``(s_alpha, s_beta)`` for
    observations ``1 .. len(eps)-1``.
    """
    cdef Py_ssize_t n = eps.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] s_al = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] s_be = np.empty(n, dtype=np.float64)
    cdef double[::1] v_al = s_al, v_be = s_be
    cdef double lam = log_init_sim   # true log variance
    cdef double l = log_init_fit     # filtered log variance
    cdef double d_al = 0.0, d_be = 0.0
    cdef double z_prev, lam_new, l_new, r, z, f, e2
    cdef Py_ssize_t i
    for i in range(1, n + 1):
        e2 = eps[i - 1] * eps[i - 1]
        z_prev = e2 * exp(lam - l)
        lam_new = lam + log(beta_sim + alpha_sim * e2 + omega_sim * exp(-lam))
        l_new = l + log(beta_fit + alpha_fit * z_prev + omega_fit * exp(-l))
        r = exp(l - l_new)
        d_al = (z_prev + beta_fit * d_al) * r
        d_be = (1.0 + beta_fit * d_be) * r
        z = eps[i] * eps[i] * exp(lam_new - l_new)
        f = 1.0 - z
        v_al[i - 1] = f * d_al
        v_be[i - 1] = f * d_be
        lam = lam_new
        l = l_new
    return s_al, s_be
