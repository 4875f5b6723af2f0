"""Compiled kernels shared by the map families.

A map is encoded as a "program": a tuple of arrays describing a block
diagonal map (linear automorphisms and standard maps acting on coordinate
slices), optionally precomposed with one or more center twists.  Every
module that needs long orbit loops calls into these kernels so the
evaluation path of a map is the same everywhere.

Program layout (all arrays, so one compiled signature serves every map)::

    blocks   int64[nb, 3]     (kind, offset, dim); kind 0 = linear, 1 = standard
    mats     float64[nb, n, n] forward matrix of linear blocks (upper-left dim x dim)
    imats    float64[nb, n, n] inverse matrix of linear blocks
    lams     float64[nb]      standard map parameter
    tw_cen   float64[nt, n]   twist centers, in application order
    tw_par   float64[nt, 4]   (delta, beta, u_index, v_index)
    tw_coef  float64[nt, m]   bump polynomial coefficients, ascending powers
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
LINEAR = 0
STANDARD = 1


@njit(cache=True, inline="always")
def wrap(v):
    r = v - math.floor(v)
    if r >= 1.0:
        r = 0.0
    return r


@njit(cache=True, inline="always")
def lattice_offset(a):
    return a - np.rint(a)


@njit(cache=True)
def _poly(coef, t):
    acc = 0.0
    for k in range(coef.shape[0] - 1, -1, -1):
        acc = acc * t + coef[k]
    return acc


@njit(cache=True)
def _dpoly(coef, t):
    acc = 0.0
    for k in range(coef.shape[0] - 1, 0, -1):
        acc = acc * t + k * coef[k]
    return acc


@njit(cache=True)
def bump(coef, t):
    if t <= 0.0:
        return 1.0
    if t >= 1.0:
        return 0.0
    return _poly(coef, t)


@njit(cache=True)
def bump_slope(coef, t):
    if t <= 0.0 or t >= 1.0:
        return 0.0
    return _dpoly(coef, t)


# ---------------------------------------------------------------------------
# twists


@njit(cache=True)
def twist_apply(x, out, cen, par, coef, sign):
    """Write T(x) (sign=+1) or T^{-1}(x) (sign=-1) into out.

    Returns True when the point lies inside the ball.  Outside the ball the
    input is copied unchanged, so the surrounding evaluation is bit-identical
    to the unperturbed one.
    """
    n = x.shape[0]
    delta = par[0]
    d2 = 0.0
    for i in range(n):
        o = lattice_offset(x[i] - cen[i])
        d2 += o * o
    d = math.sqrt(d2)
    for i in range(n):
        out[i] = x[i]
    if d >= delta:
        return False
    iu = int(par[2])
    iv = int(par[3])
    phi = sign * par[1] * bump(coef, d / delta)
    if phi == 0.0:
        return True
    u = lattice_offset(x[iu] - cen[iu])
    v = lattice_offset(x[iv] - cen[iv])
    cs = math.cos(phi)
    sn = math.sin(phi)
    out[iu] = wrap(cen[iu] + (cs * u - sn * v))
    out[iv] = wrap(cen[iv] + (sn * u + cs * v))
    return True


@njit(cache=True)
def twist_jacobian(x, jac, cen, par, coef, sign):
    """Derivative of the twist at x written into jac (identity outside)."""
    n = x.shape[0]
    for i in range(n):
        for j in range(n):
            jac[i, j] = 0.0
        jac[i, i] = 1.0
    delta = par[0]
    d2 = 0.0
    offs = np.empty(n)
    for i in range(n):
        o = lattice_offset(x[i] - cen[i])
        offs[i] = o
        d2 += o * o
    d = math.sqrt(d2)
    if d >= delta:
        return False
    iu = int(par[2])
    iv = int(par[3])
    beta = sign * par[1]
    phi = beta * bump(coef, d / delta)
    u = offs[iu]
    v = offs[iv]
    cs = math.cos(phi)
    sn = math.sin(phi)
    ru = cs * u - sn * v
    rv = sn * u + cs * v
    # d(phi)/dx_j = beta * P'(d/delta) / delta * offs_j / d
    scale = 0.0
    if d > 0.0:
        scale = beta * bump_slope(coef, d / delta) / (delta * d)
    for j in range(n):
        g = scale * offs[j]
        jac[iu, j] = -rv * g
        jac[iv, j] = ru * g
    jac[iu, iu] += cs
    jac[iu, iv] += -sn
    jac[iv, iu] += sn
    jac[iv, iv] += cs
    return True


# ---------------------------------------------------------------------------
# block maps


@njit(cache=True)
def _blocks_forward(x, out, blocks, mats, lams):
    for b in range(blocks.shape[0]):
        kind = blocks[b, 0]
        off = blocks[b, 1]
        dim = blocks[b, 2]
        if kind == LINEAR:
            for i in range(dim):
                acc = 0.0
                for j in range(dim):
                    acc += mats[b, i, j] * x[off + j]
                out[off + i] = wrap(acc)
        else:
            s = x[off] + x[off + 1]
            out[off] = wrap(s)
            out[off + 1] = wrap(x[off + 1] + lams[b] * math.sin(TWO_PI * s))


@njit(cache=True)
def _blocks_backward(x, out, blocks, imats, lams):
    for b in range(blocks.shape[0]):
        kind = blocks[b, 0]
        off = blocks[b, 1]
        dim = blocks[b, 2]
        if kind == LINEAR:
            for i in range(dim):
                acc = 0.0
                for j in range(dim):
                    acc += imats[b, i, j] * x[off + j]
                out[off + i] = wrap(acc)
        else:
            w = x[off + 1] - lams[b] * math.sin(TWO_PI * x[off])
            out[off + 1] = wrap(w)
            out[off] = wrap(x[off] - w)


@njit(cache=True)
def _blocks_jacobian(x, jac, blocks, mats, lams):
    n = x.shape[0]
    for i in range(n):
        for j in range(n):
            jac[i, j] = 0.0
    for b in range(blocks.shape[0]):
        kind = blocks[b, 0]
        off = blocks[b, 1]
        dim = blocks[b, 2]
        if kind == LINEAR:
            for i in range(dim):
                for j in range(dim):
                    jac[off + i, off + j] = mats[b, i, j]
        else:
            a = TWO_PI * lams[b] * math.cos(TWO_PI * (x[off] + x[off + 1]))
            jac[off, off] = 1.0
            jac[off, off + 1] = 1.0
            jac[off + 1, off] = a
            jac[off + 1, off + 1] = 1.0 + a


@njit(cache=True)
def _blocks_jacobian_inverse(y, jac, blocks, imats, lams):
    """Derivative of the inverse block map at y."""
    n = y.shape[0]
    for i in range(n):
        for j in range(n):
            jac[i, j] = 0.0
    for b in range(blocks.shape[0]):
        kind = blocks[b, 0]
        off = blocks[b, 1]
        dim = blocks[b, 2]
        if kind == LINEAR:
            for i in range(dim):
                for j in range(dim):
                    jac[off + i, off + j] = imats[b, i, j]
        else:
            a = TWO_PI * lams[b] * math.cos(TWO_PI * y[off])
            jac[off, off] = 1.0 + a
            jac[off, off + 1] = -1.0
            jac[off + 1, off] = -a
            jac[off + 1, off + 1] = 1.0


@njit(cache=True)
def _matmul_into(a, b, out):
    n = a.shape[0]
    m = b.shape[1]
    k = a.shape[1]
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc


# ---------------------------------------------------------------------------
# full program


@njit(cache=True)
def forward_into(x, out, prog, work):
    blocks, mats, imats, lams, tw_cen, tw_par, tw_coef = prog
    n = x.shape[0]
    for i in range(n):
        work[i] = x[i]
    for t in range(tw_cen.shape[0]):
        twist_apply(work, out, tw_cen[t], tw_par[t], tw_coef[t], 1.0)
        for i in range(n):
            work[i] = out[i]
    _blocks_forward(work, out, blocks, mats, lams)


@njit(cache=True)
def backward_into(y, out, prog, work):
    blocks, mats, imats, lams, tw_cen, tw_par, tw_coef = prog
    n = y.shape[0]
    _blocks_backward(y, work, blocks, imats, lams)
    for t in range(tw_cen.shape[0] - 1, -1, -1):
        twist_apply(work, out, tw_cen[t], tw_par[t], tw_coef[t], -1.0)
        for i in range(n):
            work[i] = out[i]
    for i in range(n):
        out[i] = work[i]


@njit(cache=True)
def jacobian_into(x, jac, prog, pt, tmp_a, tmp_b):
    """Df(x) into jac.  pt, tmp_a, tmp_b are scratch (n,), (n,n), (n,n)."""
    blocks, mats, imats, lams, tw_cen, tw_par, tw_coef = prog
    n = x.shape[0]
    nt = tw_cen.shape[0]
    if nt == 0:
        _blocks_jacobian(x, jac, blocks, mats, lams)
        return
    for i in range(n):
        pt[i] = x[i]
    for i in range(n):
        for j in range(n):
            tmp_a[i, j] = 0.0
        tmp_a[i, i] = 1.0
    moved = np.empty(n)
    for t in range(nt):
        inside = twist_jacobian(pt, tmp_b, tw_cen[t], tw_par[t], tw_coef[t], 1.0)
        if inside:
            _matmul_into(tmp_b, tmp_a, jac)
            for i in range(n):
                for j in range(n):
                    tmp_a[i, j] = jac[i, j]
            twist_apply(pt, moved, tw_cen[t], tw_par[t], tw_coef[t], 1.0)
            for i in range(n):
                pt[i] = moved[i]
    _blocks_jacobian(pt, tmp_b, blocks, mats, lams)
    _matmul_into(tmp_b, tmp_a, jac)


@njit(cache=True)
def jacobian_inverse_into(y, jac, prog, pt, tmp_a, tmp_b):
    """D(f^{-1})(y) into jac."""
    blocks, mats, imats, lams, tw_cen, tw_par, tw_coef = prog
    n = y.shape[0]
    nt = tw_cen.shape[0]
    _blocks_jacobian_inverse(y, jac, blocks, imats, lams)
    if nt == 0:
        return
    for i in range(n):
        for j in range(n):
            tmp_a[i, j] = jac[i, j]
    _blocks_backward(y, pt, blocks, imats, lams)
    moved = np.empty(n)
    for t in range(nt - 1, -1, -1):
        inside = twist_jacobian(pt, tmp_b, tw_cen[t], tw_par[t], tw_coef[t], -1.0)
        if inside:
            _matmul_into(tmp_b, tmp_a, jac)
            for i in range(n):
                for j in range(n):
                    tmp_a[i, j] = jac[i, j]
            twist_apply(pt, moved, tw_cen[t], tw_par[t], tw_coef[t], -1.0)
            for i in range(n):
                pt[i] = moved[i]
    for i in range(n):
        for j in range(n):
            jac[i, j] = tmp_a[i, j]


# ---------------------------------------------------------------------------
# batch entry points


@njit(cache=True)
def evaluate_many(xs, prog, backward):
    m, n = xs.shape
    out = np.empty((m, n))
    work = np.empty(n)
    buf = np.empty(n)
    for k in range(m):
        if backward:
            backward_into(xs[k], buf, prog, work)
        else:
            forward_into(xs[k], buf, prog, work)
        for i in range(n):
            out[k, i] = buf[i]
    return out


@njit(cache=True)
def jacobian_many(xs, prog, inverse):
    m, n = xs.shape
    out = np.empty((m, n, n))
    jac = np.empty((n, n))
    pt = np.empty(n)
    ta = np.empty((n, n))
    tb = np.empty((n, n))
    for k in range(m):
        if inverse:
            jacobian_inverse_into(xs[k], jac, prog, pt, ta, tb)
        else:
            jacobian_into(xs[k], jac, prog, pt, ta, tb)
        for i in range(n):
            for j in range(n):
                out[k, i, j] = jac[i, j]
    return out


@njit(cache=True)
def orbit(x0, steps, prog, backward):
    n = x0.shape[0]
    out = np.empty((steps + 1, n))
    work = np.empty(n)
    buf = np.empty(n)
    for i in range(n):
        out[0, i] = x0[i]
    for k in range(steps):
        if backward:
            backward_into(out[k], buf, prog, work)
        else:
            forward_into(out[k], buf, prog, work)
        for i in range(n):
            out[k + 1, i] = buf[i]
    return out


# ---------------------------------------------------------------------------
# QR tangent propagation


@njit(cache=True)
def mgs_inplace(m, logs):
    """Modified Gram-Schmidt on the columns of m; log|R_jj| into logs.

    Returns False if a diagonal entry is zero or non-finite.
    """
    rows, cols = m.shape
    for j in range(cols):
        for i in range(j):
            r = 0.0
            for t in range(rows):
                r += m[t, i] * m[t, j]
            for t in range(rows):
                m[t, j] -= r * m[t, i]
        nrm = 0.0
        for t in range(rows):
            nrm += m[t, j] * m[t, j]
        nrm = math.sqrt(nrm)
        if not (nrm > 0.0) or not math.isfinite(nrm):
            return False
        for t in range(rows):
            m[t, j] /= nrm
        logs[j] = math.log(nrm)
    return True


@njit(cache=True)
def tangent_spectrum(x0, prog, frame, proj_l, proj_r, n_iter, qr_period, burn_in,
                     checkpoints, n_blocks):
    """Accumulate QR log-stretches of the cocycle proj_l^T Df proj_r.

    With proj_l = proj_r = identity this is the full tangent cocycle; with
    both set to a constant center frame it is the center cocycle.

    Returns (sums, block_sums, checkpoint_values, fail_index).  fail_index is
    -1 on success, otherwise the iterate at which a non-finite value appeared.
    """
    n = x0.shape[0]
    k = frame.shape[1]
    x = x0.copy()
    nxt = np.empty(n)
    work = np.empty(n)
    jac = np.empty((n, n))
    pt = np.empty(n)
    ta = np.empty((n, n))
    tb = np.empty((n, n))
    tmp = np.empty((n, k))
    small = np.empty((proj_l.shape[1], proj_r.shape[1]))
    plt = proj_l.T.copy()
    q = frame.copy()
    newq = np.empty_like(q)
    logs = np.empty(k)
    sums = np.zeros(k)
    block_sums = np.zeros((n_blocks, k))
    cp_vals = np.full((checkpoints.shape[0], k), np.nan)
    cp_next = 0
    block_len = n_iter // n_blocks
    since = 0
    total = burn_in + n_iter
    for it in range(total):
        for i in range(n):
            if not math.isfinite(x[i]):
                return sums, block_sums, cp_vals, it
        jacobian_into(x, jac, prog, pt, ta, tb)
        _matmul_into(jac, proj_r, tmp)
        _matmul_into(plt, tmp, small)
        _matmul_into(small, q, newq)
        for i in range(newq.shape[0]):
            for j in range(k):
                q[i, j] = newq[i, j]
        forward_into(x, nxt, prog, work)
        for i in range(n):
            x[i] = nxt[i]
        since += 1
        last = it == total - 1
        at_burn_end = it == burn_in - 1
        if since == qr_period or last or at_burn_end:
            ok = mgs_inplace(q, logs)
            if not ok:
                return sums, block_sums, cp_vals, it
            since = 0
            if it >= burn_in:
                done = it - burn_in + 1
                b = (it - burn_in) // block_len if block_len > 0 else 0
                if b >= n_blocks:
                    b = n_blocks - 1
                for j in range(k):
                    sums[j] += logs[j]
                    block_sums[b, j] += logs[j]
                while cp_next < checkpoints.shape[0] and checkpoints[cp_next] <= done:
                    for j in range(k):
                        cp_vals[cp_next, j] = sums[j] / done
                    cp_next += 1
    return sums, block_sums, cp_vals, -1


# ---------------------------------------------------------------------------
# projective pushforward


@njit(cache=True)
def projective_push(x0, prog, frame, use_const, const, n_orbit, angles0, bins,
                    grid, gi, gj, burn_in):
    """Push atoms along the base orbit and bin (cell, angle) visits.

    The center cocycle is frame^T Df frame, or the constant matrix const
    when use_const is set.  Each recorded step adds weight 1/len(angles0)
    to the histogram of the grid cell of the current base point.
    """
    n = x0.shape[0]
    x = x0.copy()
    nxt = np.empty(n)
    work = np.empty(n)
    jac = np.empty((n, n))
    pt = np.empty(n)
    ta = np.empty((n, n))
    tb = np.empty((n, n))
    tmp = np.empty((n, 2))
    blk = np.empty((2, 2))
    ft = frame.T.copy()
    ang = angles0.copy()
    na = ang.shape[0]
    w = 1.0 / na
    counts = np.zeros((grid, grid, bins))
    for it in range(burn_in + n_orbit):
        if use_const:
            for i in range(2):
                for j in range(2):
                    blk[i, j] = const[i, j]
        else:
            jacobian_into(x, jac, prog, pt, ta, tb)
            _matmul_into(jac, frame, tmp)
            _matmul_into(ft, tmp, blk)
        for a in range(na):
            c = math.cos(ang[a])
            s = math.sin(ang[a])
            vx = blk[0, 0] * c + blk[0, 1] * s
            vy = blk[1, 0] * c + blk[1, 1] * s
            t = math.atan2(vy, vx)
            if t < 0.0:
                t += math.pi
            if t >= math.pi:
                t -= math.pi
            ang[a] = t
        forward_into(x, nxt, prog, work)
        for i in range(n):
            x[i] = nxt[i]
        if it >= burn_in:
            ci = int(x[gi] * grid)
            cj = int(x[gj] * grid)
            if ci >= grid:
                ci = grid - 1
            if cj >= grid:
                cj = grid - 1
            for a in range(na):
                bi = int(ang[a] / math.pi * bins)
                if bi >= bins:
                    bi = bins - 1
                counts[ci, cj, bi] += w
    return counts


# ---------------------------------------------------------------------------
# pairs on a common strong leaf


@njit(cache=True)
def leaf_pair_orbit(x0, y0, offsets, nb, prog, backward):
    """Orbits of x0 and of a partner whose first nb (base) coordinates are
    pinned to base(x_j) + offsets[j] at every step.

    The base factor is linear, so the leaf offset is propagated exactly by
    the caller; only the remaining coordinates of the partner are evolved by
    the map.  This keeps the pair on a common leaf instead of letting the
    rounding error in the expanding direction grow.
    """
    steps = offsets.shape[0] - 1
    n = x0.shape[0]
    xs = np.empty((steps + 1, n))
    ys = np.empty((steps + 1, n))
    work = np.empty(n)
    buf = np.empty(n)
    for i in range(n):
        xs[0, i] = x0[i]
        ys[0, i] = y0[i]
    for k in range(steps):
        if backward:
            backward_into(xs[k], buf, prog, work)
        else:
            forward_into(xs[k], buf, prog, work)
        for i in range(n):
            xs[k + 1, i] = buf[i]
        if backward:
            backward_into(ys[k], buf, prog, work)
        else:
            forward_into(ys[k], buf, prog, work)
        for i in range(n):
            ys[k + 1, i] = buf[i]
        for i in range(nb):
            ys[k + 1, i] = wrap(xs[k + 1, i] + offsets[k + 1, i])
    return xs, ys
