"""Dense numeric kernels shared by every module.

Everything here operates on float64 C-order arrays and avoids raising, so
the same source compiles under numba and runs under plain numpy (see
backend.py).  Failure modes are reported through returned flags and the
wrappers in linalg.py turn them into exceptions.
"""

import math

import numpy as np

from .backend import jit_kernel

# Pade-13 scaling-and-squaring constants (double precision).
EXPM_THETA13 = 5.371920351148152
_B0 = 64764752532480000.0
_B1 = 32382376266240000.0
_B2 = 7771770303897600.0
_B3 = 1187353796428800.0
_B4 = 129060195264000.0
_B5 = 10559470521600.0
_B6 = 670442572800.0
_B7 = 33522128640.0
_B8 = 1323241920.0
_B9 = 40840800.0
_B10 = 960960.0
_B11 = 16380.0
_B12 = 182.0
_B13 = 1.0


@jit_kernel
def lu_solve(a, b):
    """Solve a @ x = b by Gaussian elimination with partial pivoting.

    b is (n, m); returns (x, min_abs_pivot).  A zero min pivot marks a
    singular system; the result is then meaningless.
    """
    n = a.shape[0]
    lu = a.copy()
    x = b.copy()
    minpiv = np.inf
    for k in range(n):
        p = k
        big = abs(lu[k, k])
        for i in range(k + 1, n):
            v = abs(lu[i, k])
            if v > big:
                big = v
                p = i
        if p != k:
            tmp = lu[k, :].copy()
            lu[k, :] = lu[p, :]
            lu[p, :] = tmp
            tmpx = x[k, :].copy()
            x[k, :] = x[p, :]
            x[p, :] = tmpx
        piv = lu[k, k]
        apiv = abs(piv)
        if apiv < minpiv:
            minpiv = apiv
        if apiv == 0.0:
            return x, 0.0
        col = lu[k + 1:, k] / piv
        lu[k + 1:, k] = col
        lu[k + 1:, k + 1:] -= np.outer(col, lu[k, k + 1:])
        x[k + 1:, :] -= np.outer(col, x[k, :])
    for k in range(n - 1, -1, -1):
        x[k, :] = (x[k, :] - lu[k, k + 1:] @ np.ascontiguousarray(x[k + 1:, :])) / lu[k, k]
    return x, minpiv


@jit_kernel
def one_norm(a):
    n, m = a.shape
    nrm = 0.0
    for j in range(m):
        s = 0.0
        for i in range(n):
            s += abs(a[i, j])
        if s > nrm:
            nrm = s
    return nrm


@jit_kernel
def expm(a):
    """Matrix exponential, degree-13 Pade approximant with scaling and
    squaring (scale so the 1-norm drops below theta_13, square back)."""
    n = a.shape[0]
    nrm = one_norm(a)
    s = 0
    if nrm > EXPM_THETA13:
        s = int(math.ceil(math.log2(nrm / EXPM_THETA13)))
    w = a / (2.0 ** s)
    ident = np.eye(n)
    w2 = w @ w
    w4 = w2 @ w2
    w6 = w2 @ w4
    u = w @ (w6 @ (_B13 * w6 + _B11 * w4 + _B9 * w2)
             + _B7 * w6 + _B5 * w4 + _B3 * w2 + _B1 * ident)
    v = (w6 @ (_B12 * w6 + _B10 * w4 + _B8 * w2)
         + _B6 * w6 + _B4 * w4 + _B2 * w2 + _B0 * ident)
    r, _ = lu_solve(v - u, v + u)
    for _k in range(s):
        r = r @ r
    return r


@jit_kernel
def kron(a, b):
    n, m = a.shape
    p, q = b.shape
    out = np.empty((n * p, m * q))
    for i in range(n):
        for j in range(m):
            out[i * p:(i + 1) * p, j * q:(j + 1) * q] = a[i, j] * b
    return out


@jit_kernel
def eig_qr(a, max_iter, rtol):
    """All eigenvalues of a real square matrix.

    Householder reduction to Hessenberg form, then Francis double-shift QR
    with deflation at relative threshold ``rtol`` on subdiagonal decay and
    an exceptional shift every tenth stalled sweep.  Returns
    (re, im, converged_flag, residual) where residual is the largest
    subdiagonal that would not deflate when the iteration cap is hit.
    """
    n = a.shape[0]
    re = np.zeros(n)
    im = np.zeros(n)
    if n == 0:
        return re, im, 1, 0.0
    if n == 1:
        re[0] = a[0, 0]
        return re, im, 1, 0.0
    h = a.copy()
    anorm = one_norm(h)
    if anorm == 0.0:
        return re, im, 1, 0.0

    # Hessenberg reduction.
    for k in range(n - 2):
        x0 = h[k + 1, k]
        sigma = 0.0
        for i in range(k + 2, n):
            sigma += h[i, k] * h[i, k]
        if sigma == 0.0:
            continue
        mu = math.sqrt(x0 * x0 + sigma)
        if x0 <= 0.0:
            v0 = x0 - mu
        else:
            v0 = -sigma / (x0 + mu)
        beta = 2.0 * v0 * v0 / (sigma + v0 * v0)
        v = np.empty(n - k - 1)
        v[0] = 1.0
        for i in range(1, n - k - 1):
            v[i] = h[k + 1 + i, k] / v0
        wl = v @ np.ascontiguousarray(h[k + 1:, k:])
        h[k + 1:, k:] -= beta * np.outer(v, wl)
        wr = np.ascontiguousarray(h[:, k + 1:]) @ v
        h[:, k + 1:] -= beta * np.outer(wr, v)
        for i in range(k + 2, n):
            h[i, k] = 0.0

    # Francis double-shift QR with deflation.
    hi = n - 1
    total_iter = 0
    block_iter = 0
    v3 = np.empty(3)
    v2 = np.empty(2)
    while hi >= 0:
        lo = hi
        while lo > 0:
            sub = abs(h[lo, lo - 1])
            thr = rtol * (abs(h[lo - 1, lo - 1]) + abs(h[lo, lo]))
            if thr == 0.0:
                thr = rtol * anorm
            if sub <= thr:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            re[hi] = h[hi, hi]
            hi -= 1
            block_iter = 0
            continue
        if lo == hi - 1:
            a11 = h[lo, lo]
            a12 = h[lo, hi]
            a21 = h[hi, lo]
            a22 = h[hi, hi]
            mid = 0.5 * (a11 + a22)
            p = 0.5 * (a11 - a22)
            disc = p * p + a12 * a21
            if disc >= 0.0:
                sq = math.sqrt(disc)
                re[hi - 1] = mid + sq
                re[hi] = mid - sq
            else:
                sq = math.sqrt(-disc)
                re[hi - 1] = mid
                re[hi] = mid
                im[hi - 1] = sq
                im[hi] = -sq
            hi -= 2
            block_iter = 0
            continue

        if total_iter >= max_iter:
            resid = 0.0
            for i in range(lo + 1, hi + 1):
                s = abs(h[i, i - 1])
                if s > resid:
                    resid = s
            return re, im, 0, resid
        total_iter += 1
        block_iter += 1

        if block_iter % 10 == 0:
            # exceptional shift to break symmetric stalls
            s1 = h[hi, hi] + 0.75 * abs(h[hi, hi - 1])
            ssum = 2.0 * s1
            sprod = s1 * s1
        else:
            ssum = h[hi - 1, hi - 1] + h[hi, hi]
            sprod = (h[hi - 1, hi - 1] * h[hi, hi]
                     - h[hi - 1, hi] * h[hi, hi - 1])

        x = (h[lo, lo] * h[lo, lo] + h[lo, lo + 1] * h[lo + 1, lo]
             - ssum * h[lo, lo] + sprod)
        y = h[lo + 1, lo] * (h[lo, lo] + h[lo + 1, lo + 1] - ssum)
        z = h[lo + 2, lo + 1] * h[lo + 1, lo]

        for k in range(lo - 1, hi - 2):
            # Householder for (x, y, z)
            sigma = y * y + z * z
            if sigma == 0.0 and x >= 0.0:
                beta = 0.0
                v3[0] = 1.0
                v3[1] = 0.0
                v3[2] = 0.0
            else:
                mu = math.sqrt(x * x + sigma)
                if x <= 0.0:
                    v0 = x - mu
                else:
                    v0 = -sigma / (x + mu)
                beta = 2.0 * v0 * v0 / (sigma + v0 * v0)
                v3[0] = 1.0
                v3[1] = y / v0
                v3[2] = z / v0
            q0 = k if k > lo else lo
            if beta != 0.0:
                wl = v3 @ np.ascontiguousarray(h[k + 1:k + 4, q0:])
                h[k + 1:k + 4, q0:] -= beta * np.outer(v3, wl)
                r0 = k + 4 if k + 4 < hi else hi
                wr = np.ascontiguousarray(h[:r0 + 1, k + 1:k + 4]) @ v3
                h[:r0 + 1, k + 1:k + 4] -= beta * np.outer(wr, v3)
            if k >= lo:
                # bulge column annihilated by construction
                h[k + 2, k] = 0.0
                h[k + 3, k] = 0.0
            x = h[k + 2, k + 1]
            y = h[k + 3, k + 1]
            if k < hi - 3:
                z = h[k + 4, k + 1]

        # final 2-vector reflection on rows (hi-1, hi)
        sigma = y * y
        if sigma == 0.0 and x >= 0.0:
            beta = 0.0
        else:
            mu = math.sqrt(x * x + sigma)
            if x <= 0.0:
                v0 = x - mu
            else:
                v0 = -sigma / (x + mu)
            beta = 2.0 * v0 * v0 / (sigma + v0 * v0)
            v2[0] = 1.0
            v2[1] = y / v0
        if beta != 0.0:
            wl = v2 @ np.ascontiguousarray(h[hi - 1:hi + 1, hi - 2:])
            h[hi - 1:hi + 1, hi - 2:] -= beta * np.outer(v2, wl)
            wr = np.ascontiguousarray(h[:hi + 1, hi - 1:hi + 1]) @ v2
            h[:hi + 1, hi - 1:hi + 1] -= beta * np.outer(wr, v2)
        h[hi, hi - 2] = 0.0

    return re, im, 1, 0.0


@jit_kernel
def microgrid_run(lam0, pr0, phys0, alpha, beta, a0, mu, w, et, f,
                  pmain_vals, pmain_steps, n_steps, record_every):
    """Fused dispatch/flow loop for the micro-grid scenario.

    Per step: incremental-cost consensus update of (lam, pr), then one
    exact flow of every MG's physical state over the dispatch interval,
    ``phys_i <- E @ phys_i + f * pr_i`` with ``et = E.T``.  Neighbour
    terms are accumulated as weighted differences so consensus-level
    cancellation stays at the spread scale, not the cost scale.
    """
    n = lam0.shape[0]
    n_rec = 0
    for k in range(n_steps):
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            n_rec += 1
    rec_step = np.empty(n_rec, np.int64)
    rec_lam = np.empty((n_rec, n))
    rec_pr = np.empty((n_rec, n))
    rec_phys = np.empty((n_rec, phys0.shape[0], phys0.shape[1]))

    lam = lam0.copy()
    pr = pr0.copy()
    phys = phys0.copy()
    lam_new = np.empty(n)
    seg = 0
    r = 0
    for k in range(n_steps):
        while seg + 1 < pmain_steps.shape[0] and k >= pmain_steps[seg + 1]:
            seg += 1
        pmain = pmain_vals[seg]
        total = 0.0
        for i in range(n):
            total += pr[i]
        mismatch = total - pmain
        for i in range(n):
            s = 0.0
            for j in range(n):
                if w[i, j] != 0.0:
                    s += w[i, j] * (lam[i] - lam[j])
            lam_new[i] = lam[i] - (mu[i] * s + a0[i] * mismatch)
        for i in range(n):
            lam[i] = lam_new[i]
            pr[i] = (lam[i] - beta[i]) / alpha[i]
        phys = phys @ et + np.outer(pr, f)
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            rec_step[r] = k + 1
            rec_lam[r, :] = lam
            rec_pr[r, :] = pr
            rec_phys[r, :, :] = phys
            r += 1
    return rec_step, rec_lam, rec_pr, rec_phys, lam, pr, phys
