"""Multiprecision re-implementation of the program interpreter.

Used where double rounding would swamp the quantity being checked: leaf
contraction over 20+ iterates (the unstable component of a 1e-16 error
grows like 2.6^m) and closed-form leaf orbits for recurrence estimates.
Written independently of the compiled kernels so it doubles as an oracle.
"""

from __future__ import annotations

import mpmath

DPS = 60


def _ctx():
    ctx = mpmath.mp.clone()
    ctx.dps = DPS
    return ctx


def _lat(ctx, a):
    return a - ctx.nint(a)


def _wrap(ctx, a):
    return a - ctx.floor(a)


class MPProgram:
    """Evaluate a MapSystem's program at DPS decimal digits."""

    def __init__(self, system):
        self.ctx = _ctx()
        p = system.program
        self.n = system.dimension
        self.blocks = [tuple(int(v) for v in b) for b in p.blocks]
        mp = self.ctx
        self.mats = [[[mp.mpf(int(round(p.mats[b][i][j]))) for j in range(dim)] for i in range(dim)]
                     for b, (_, _, dim) in enumerate(self.blocks)]
        self.imats = [[[mp.mpf(int(round(p.imats[b][i][j]))) for j in range(dim)] for i in range(dim)]
                      for b, (_, _, dim) in enumerate(self.blocks)]
        self.lams = [mp.mpf(float(v)) for v in p.lams]
        self.twists = [([mp.mpf(float(c)) for c in cen], float(par[0]), mp.mpf(float(par[1])),
                        int(par[2]), int(par[3]), [mp.mpf(float(c)) for c in coef])
                       for cen, par, coef in zip(p.tw_cen, p.tw_par, p.tw_coef)]

    def point(self, x):
        mpf = self.ctx.mpf
        return [v if isinstance(v, mpf) else mpf(float(v)) for v in x]

    def _twist(self, x, tw, sign):
        mp = self.ctx
        cen, delta, beta, iu, iv, coef = tw
        offs = [_lat(mp, x[i] - cen[i]) for i in range(self.n)]
        d = mp.sqrt(mp.fsum(o * o for o in offs))
        if d >= delta:
            return list(x)
        t = d / delta
        prof = mp.mpf(1) if t <= 0 else mp.polyval(coef[::-1], t)
        phi = sign * beta * prof
        u, v = offs[iu], offs[iv]
        out = list(x)
        out[iu] = _wrap(mp, cen[iu] + mp.cos(phi) * u - mp.sin(phi) * v)
        out[iv] = _wrap(mp, cen[iv] + mp.sin(phi) * u + mp.cos(phi) * v)
        return out

    def forward(self, x):
        mp = self.ctx
        x = list(x)
        for tw in self.twists:
            x = self._twist(x, tw, 1)
        out = list(x)
        for b, (kind, off, dim) in enumerate(self.blocks):
            if kind == 0:
                m = self.mats[b]
                for i in range(dim):
                    out[off + i] = _wrap(mp, mp.fsum(m[i][j] * x[off + j] for j in range(dim)))
            else:
                s = x[off] + x[off + 1]
                out[off] = _wrap(mp, s)
                out[off + 1] = _wrap(mp, x[off + 1] + self.lams[b] * mp.sin(2 * mp.pi * s))
        return out

    def backward(self, y):
        mp = self.ctx
        out = list(y)
        for b, (kind, off, dim) in enumerate(self.blocks):
            if kind == 0:
                m = self.imats[b]
                for i in range(dim):
                    out[off + i] = _wrap(mp, mp.fsum(m[i][j] * y[off + j] for j in range(dim)))
            else:
                w = y[off + 1] - self.lams[b] * mp.sin(2 * mp.pi * y[off])
                out[off + 1] = _wrap(mp, w)
                out[off] = _wrap(mp, y[off] - w)
        for tw in reversed(self.twists):
            out = self._twist(out, tw, -1)
        return out

    def iterate(self, x, steps: int):
        x = self.point(x)
        step = self.forward if steps >= 0 else self.backward
        for _ in range(abs(steps)):
            x = step(x)
        return x

    def distance(self, a, b):
        mp = self.ctx
        acc = mp.mpf(0)
        for u, v in zip(a, b):
            d = abs(u - v) % 1
            d = min(d, 1 - d)
            acc += d * d
        return mp.sqrt(acc)


def leaf_vectors(matrix, inside: bool, ctx=None):
    """High-precision real eigenvectors (unit length, first non-zero entry
    positive) and eigenvalues of an integer matrix with |mu| < 1 (inside)
    or |mu| > 1.  Only real-diagonalizable leaves are supported."""
    ctx = ctx or _ctx()
    m = ctx.matrix([[int(round(v)) for v in row] for row in matrix])
    vals, vecs = ctx.eig(m)
    out = []
    for k, mu in enumerate(vals):
        if abs(ctx.im(mu)) > ctx.mpf(10) ** (-40):
            raise ValueError("complex eigenvalues: closed-form leaves need a real spectrum")
        mu = ctx.re(mu)
        if (abs(mu) < 1) != inside:
            continue
        v = [ctx.re(vecs[i, k]) for i in range(m.rows)]
        nrm = ctx.sqrt(ctx.fsum(c * c for c in v))
        v = [c / nrm for c in v]
        first = next(c for c in v if abs(c) > ctx.mpf(10) ** (-30))
        if first < 0:
            v = [-c for c in v]
        out.append((mu, v))
    return out
