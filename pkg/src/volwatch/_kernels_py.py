"""Pure-Python fallback for the compiled recursion kernels.

Same contracts as ``_speedups``; used when the extension is not built or when
``VOLWATCH_PURE_PYTHON=1``.  Orders of magnitude slower on long paths, which
is why the compiled module exists (see ``benchmarks/bench_kernels.py``).
"""

import math

import numpy as np


def simulate_log_variance(eps, log_init, omega0, alpha0, beta0,
                          omega1, alpha1, beta1, switch_index):
    eps = np.asarray(eps, dtype=np.float64)
    n = eps.shape[0]
    out = np.empty(n, dtype=np.float64)
    l = float(log_init)
    out[0] = l
    for i in range(1, n):
        if switch_index > 0 and i >= switch_index:
            om, al, be = omega1, alpha1, beta1
        else:
            om, al, be = omega0, alpha0, beta0
        e2 = eps[i - 1] * eps[i - 1]
        l = l + math.log(be + al * e2 + om * math.exp(-l))
        out[i] = l
    return out


def nll_grad(y, y0_sq, log_sigma0_sq, omega, alpha, beta):
    y = np.asarray(y, dtype=np.float64)
    l_prev = float(log_sigma0_sq)
    d_om = d_al = d_be = 0.0
    yp_sq = float(y0_sq)
    nll = g_om = g_al = g_be = 0.0
    for yi in y:
        l = l_prev + math.log(beta + (omega + alpha * yp_sq) * math.exp(-l_prev))
        s = math.exp(l)
        r = math.exp(l_prev - l)
        d_al = yp_sq / s + beta * d_al * r
        d_be = r * (1.0 + beta * d_be)
        d_om = 1.0 / s + beta * d_om * r
        z = yi * yi / s
        nll += l + z
        f = 1.0 - z
        g_om += f * d_om
        g_al += f * d_al
        g_be += f * d_be
        l_prev = l
        yp_sq = yi * yi
    return nll, g_om, g_al, g_be


def score_filter(y, y_prev_sq, log_sigma2, d_omega, d_alpha, d_beta,
                 omega, alpha, beta):
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    s_al = np.empty(n)
    s_be = np.empty(n)
    ll = np.empty(n)
    ls2 = np.empty(n)
    l_prev = float(log_sigma2)
    d_om, d_al, d_be = float(d_omega), float(d_alpha), float(d_beta)
    yp_sq = float(y_prev_sq)
    z = 0.0
    for i in range(n):
        l = l_prev + math.log(beta + (omega + alpha * yp_sq) * math.exp(-l_prev))
        s = math.exp(l)
        r = math.exp(l_prev - l)
        d_al = yp_sq / s + beta * d_al * r
        d_be = r * (1.0 + beta * d_be)
        d_om = 1.0 / s + beta * d_om * r
        z = y[i] * y[i] / s
        f = 1.0 - z
        s_al[i] = f * d_al
        s_be[i] = f * d_be
        ll[i] = l + z
        ls2[i] = l
        l_prev = l
        yp_sq = y[i] * y[i]
    return s_al, s_be, ll, ls2, (l_prev, d_om, d_al, d_be, z)


def sim_score_filter(eps, omega_sim, alpha_sim, beta_sim, log_init_sim,
                     omega_fit, alpha_fit, beta_fit, log_init_fit):
    eps = np.asarray(eps, dtype=np.float64)
    n = eps.shape[0] - 1
    s_al = np.empty(n)
    s_be = np.empty(n)
    lam = float(log_init_sim)
    l = float(log_init_fit)
    d_al = d_be = 0.0
    for i in range(1, n + 1):
        e2 = eps[i - 1] * eps[i - 1]
        z_prev = e2 * math.exp(lam - l)
        lam_new = lam + math.log(beta_sim + alpha_sim * e2 + omega_sim * math.exp(-lam))
        l_new = l + math.log(beta_fit + alpha_fit * z_prev + omega_fit * math.exp(-l))
        r = math.exp(l - l_new)
        d_al = (z_prev + beta_fit * d_al) * r
        d_be = (1.0 + beta_fit * d_be) * r
        z = eps[i] * eps[i] * math.exp(lam_new - l_new)
        f = 1.0 - z
        s_al[i - 1] = f * d_al
        s_be[i - 1] = f * d_be
        lam = lam_new
        l = l_new
    return s_al, s_be
