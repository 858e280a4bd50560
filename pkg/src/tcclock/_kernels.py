"""Compiled inner loops for the jump unraveling.

The no-jump generator is tridiagonal, so each Taylor term of
exp(G dt) psi costs O(d).  Jump times are found on the Taylor polynomial of
the step, so locating the norm crossing needs no extra operator products.
"""

import numpy as np
from numba import njit

# status codes returned by run_segment
REACHED_STOP = 0
NEED_UNIFORMS = 1
BUFFER_FULL = 2
NONFINITE = 3
UNDERFLOW = 4
DARK = 5

MAX_TERMS = 40
STEP_THETA = 2.0
NORM_TOL = 1e-12


@njit(cache=True)
def build_generator(alpha, gm, gp, ladder, cm2, cp2, lower, diag, upper):
    d = diag.shape[0]
    s = gm + gp
    for j in range(d):
        diag[j] = -0.5 * (gm * cm2[j] + gp * cp2[j] + s * alpha * alpha)
    for j in range(d - 1):
        off = 0.5 * alpha * s * ladder[j]
        lower[j] = -1j * off
        upper[j] = 1j * off
    # max absolute column sum
    norm = 0.0
    for j in range(d):
        c = abs(diag[j])
        if j > 0:
            c += abs(upper[j - 1])
        if j < d - 1:
            c += abs(lower[j])
        if c > norm:
            norm = c
    return norm


@njit(cache=True)
def tri_matvec(lower, diag, upper, x, out):
    d = x.shape[0]
    out[0] = diag[0] * x[0]
    for j in range(1, d):
        out[j] = diag[j] * x[j] + lower[j - 1] * x[j - 1]
    for j in range(d - 1):
        out[j] += upper[j] * x[j + 1]


@njit(cache=True)
def norm2(x):
    s = 0.0
    for j in range(x.shape[0]):
        s += x[j].real * x[j].real + x[j].imag * x[j].imag
    return s


@njit(cache=True)
def taylor_terms(lower, diag, upper, psi, tau, terms):
    """Fill terms[k] = (tau G)^k psi / k!; returns the number of terms used."""
    d = psi.shape[0]
    ref = 0.0
    for j in range(d):
        terms[0, j] = psi[j]
        ref += psi[j].real * psi[j].real + psi[j].imag * psi[j].imag
    n = 1
    for k in range(1, MAX_TERMS):
        f = tau / k
        prev = terms[k - 1]
        cur = terms[k]
        acc = 0.0
        for j in range(d):
            v = diag[j] * prev[j]
            if j > 0:
                v += lower[j - 1] * prev[j - 1]
            if j < d - 1:
                v += upper[j] * prev[j + 1]
            v *= f
            cur[j] = v
            acc += v.real * v.real + v.imag * v.imag
        n = k + 1
        if acc <= 1e-34 * ref:
            break
    return n


@njit(cache=True)
def eval_poly(terms, n, sigma, out):
    d = out.shape[0]
    for j in range(d):
        out[j] = terms[n - 1, j]
    for k in range(n - 2, -1, -1):
        for j in range(d):
            out[j] = out[j] * sigma + terms[k, j]


@njit(cache=True)
def eval_poly_and_slope(terms, n, sigma, out):
    """Evaluate psi(sigma) into ``out`` and return (|psi|^2, d|psi|^2/dsigma)."""
    d = out.shape[0]
    nn = 0.0
    slope = 0.0
    for j in range(d):
        v = terms[n - 1, j]
        dv = 0j
        for k in range(n - 2, -1, -1):
            dv = dv * sigma + v
            v = v * sigma + terms[k, j]
        out[j] = v
        nn += v.real * v.real + v.imag * v.imag
        slope += 2.0 * (v.real * dv.real + v.imag * dv.imag)
    return nn, slope


@njit(cache=True)
def find_crossing(terms, n, target, end_norm, work):
    """sigma in [0, 1] with |psi(sigma)|^2 = target (the norm is non-increasing).

    Safeguarded Newton started from log-linear interpolation of the norm decay.
    """
    lo, hi = 0.0, 1.0
    start = norm2(terms[0])
    sigma = 0.5
    if end_norm > 0 and end_norm < start:
        sigma = np.log(target / start) / np.log(end_norm / start)
        if not (0.0 < sigma < 1.0):
            sigma = 0.5
    for _ in range(200):
        nn, fp = eval_poly_and_slope(terms, n, sigma, work)
        f = nn - target
        if abs(f) <= NORM_TOL * target:
            return sigma
        if f > 0:
            lo = sigma
        else:
            hi = sigma
        nxt = sigma - f / fp if fp < 0 else -1.0
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if hi - lo < 1e-15:
            return hi
        sigma = nxt
    return sigma


@njit(cache=True)
def apply_jump(kind, psi, ladder, alpha, out):
    """out = L_kind psi with L_- = S_- + i alpha, L_+ = S_+ - i alpha."""
    d = psi.shape[0]
    if kind == 0:
        for j in range(d):
            acc = 1j * alpha * psi[j]
            if j < d - 1:
                acc += ladder[j] * psi[j + 1]
            out[j] = acc
    else:
        for j in range(d):
            acc = -1j * alpha * psi[j]
            if j > 0:
                acc += ladder[j - 1] * psi[j - 1]
            out[j] = acc


@njit(cache=True)
def expectation(mat, psi):
    return np.vdot(psi, np.dot(mat, psi)).real


@njit(cache=True)
def run_segment(psi, state, t_stop, uniforms, ladder, cm2, cp2, gm, gp, alphas, seg_dt,
                pi_mat, energy, out_t, out_k, out_fid, out_en, out_n):
    """Advance one trajectory until ``t_stop``, a refill request, or a full buffer.

    ``psi`` is the unnormalized conditional state (updated in place).
    ``state`` = [t, norm target, uniform cursor, emitted count] (updated in place).
    """
    d = psi.shape[0]
    t = state[0]
    target = state[1]
    upos = int(state[2])
    n = out_n
    lower = np.empty(d - 1, np.complex128)
    diag = np.empty(d, np.complex128)
    upper = np.empty(d - 1, np.complex128)
    terms = np.empty((MAX_TERMS, d), np.complex128)
    work = np.empty(d, np.complex128)
    jumped = np.empty(d, np.complex128)
    nseg = alphas.shape[0]
    seg = -1
    alpha = 0.0
    gnorm = 0.0
    status = REACHED_STOP
    while t < t_stop:
        k = 0
        if seg_dt > 0 and np.isfinite(seg_dt):
            k = int(t / seg_dt)
            # t / seg_dt can round below an integer exactly at a boundary
            while (k + 1) * seg_dt <= t:
                k += 1
            if k >= nseg:
                k = nseg - 1
        if k != seg:
            seg = k
            alpha = alphas[k]
            gnorm = build_generator(alpha, gm, gp, ladder, cm2, cp2, lower, diag, upper)
        t_end = t_stop
        if seg_dt > 0 and np.isfinite(seg_dt) and seg < nseg - 1:
            b = (seg + 1) * seg_dt
            if b < t_end:
                t_end = b
        tau = STEP_THETA / gnorm if gnorm > 0 else t_end - t
        if t + tau > t_end:
            tau = t_end - t
        if tau <= 0.0:
            # segment boundary reached exactly; move to next segment
            if t_end >= t_stop:
                break
            t = t_end
            continue
        nt = taylor_terms(lower, diag, upper, psi, tau, terms)
        eval_poly(terms, nt, 1.0, work)
        nn = norm2(work)
        if not np.isfinite(nn):
            status = NONFINITE
            break
        if nn > target:
            if nn >= norm2(psi) and not np.isfinite(t_stop):
                # no decay over a full step: a dark state never jumps again
                status = DARK
                break
            for j in range(d):
                psi[j] = work[j]
            t = t + tau if t + tau < t_end else t_end
            continue
        # a jump happens inside this step
        if upos + 2 > uniforms.shape[0]:
            status = NEED_UNIFORMS
            break
        if n >= out_t.shape[0]:
            status = BUFFER_FULL
            break
        sigma = find_crossing(terms, nt, target, nn, work)
        eval_poly(terms, nt, sigma, psi)
        t_jump = t + sigma * tau
        if t_jump <= t:
            t_jump = np.nextafter(t, np.inf)
            if t_jump >= t_end:
                status = UNDERFLOW
                break
        t = t_jump
        apply_jump(0, psi, ladder, alpha, work)
        apply_jump(1, psi, ladder, alpha, jumped)
        w_minus = gm * norm2(work)
        w_plus = gp * norm2(jumped)
        u = uniforms[upos]
        upos += 1
        if (1.0 - u) * (w_minus + w_plus) < w_minus:
            kind = 0
            nrm = np.sqrt(norm2(work))
            for j in range(d):
                psi[j] = work[j] / nrm
        else:
            kind = 1
            nrm = np.sqrt(norm2(jumped))
            for j in range(d):
                psi[j] = jumped[j] / nrm
        if not np.isfinite(nrm) or nrm == 0.0:
            status = NONFINITE
            break
        out_t[n] = t
        out_k[n] = kind
        out_fid[n] = expectation(pi_mat, psi)
        en = 0.0
        for j in range(d):
            en += energy[j] * (psi[j].real * psi[j].real + psi[j].imag * psi[j].imag)
        out_en[n] = en
        n += 1
        target = uniforms[upos]
        upos += 1
        if n >= out_t.shape[0]:
            status = BUFFER_FULL
            break
    state[0] = t
    state[1] = target
    state[2] = upos
    return n, status
