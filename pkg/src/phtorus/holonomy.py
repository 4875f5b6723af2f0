"""Holonomies of the center derivative cocycle along strong leaves.

Leaves are used in closed form only: on a product whose left factor is a
linear Anosov automorphism the strong stable leaf through x is
x + E^s (base coordinates), and the leaf offset is carried to later iterates
by the restriction of the matrix.  For perturbed products the center
coordinates of a leaf partner are found by pulling a far-iterate partner
back (see ``stable_partner``).

Holonomy between center fibers is the limit of

    A_n(x, y) = F^n(y)^{-1} P F^n(x),

computed through its increments

    A_{n+1} - A_n = F^n(y)^{-1} F(y_n)^{-1} (F(x_n) - F(y_n)) F^n(x)

so that the residual of every step is available.  All center frames are
the constant frame of the system's splitting and parallel transport is the
identity, so P acts as the identity on center coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels as K
from . import _mp
from .torus_dynamics import MapSystem, as_point, torus_distance, torus_offset

LEAF_RADIUS = 0.25
DEFAULT_TOL = 1e-12
MAX_STEPS = 200
FRAME_COND_MAX = 1e6
PULLBACK_STEPS = 64
LEAF_KINDS = ("stable", "unstable")


class HolonomyConvergenceError(RuntimeError):
    def __init__(self, message: str, history: np.ndarray):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class CenterFrame:
    base: np.ndarray
    basis: np.ndarray

    def coordinates(self, v) -> np.ndarray:
        return self.basis.T @ np.asarray(v, dtype=float)

    def vector(self, coords) -> np.ndarray:
        return self.basis @ np.asarray(coords, dtype=float)


def center_frame(system: MapSystem, x) -> CenterFrame:
    basis = system._require_center()
    cond = np.linalg.cond(basis)
    if not np.isfinite(cond) or cond > FRAME_COND_MAX:
        raise ValueError(f"center frame is degenerate (condition number {cond:.3g})")
    gram = basis.T @ basis
    if np.max(np.abs(gram - np.eye(2))) > 1e-12:
        raise ValueError("center frame columns are not orthonormal")
    return CenterFrame(as_point(x, system.dimension), basis)


@dataclass(frozen=True)
class HolonomyMap:
    source: CenterFrame
    target: CenterFrame
    matrix: np.ndarray
    n_used: int
    residual: float
    kind: str = "stable"
    history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    legs: tuple = ()

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    @property
    def distance(self) -> float:
        return torus_distance(self.source.base, self.target.base)

    def apply(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)


@dataclass(frozen=True)
class SuPath:
    nodes: tuple
    leg_types: tuple

    def __post_init__(self):
        nodes = tuple(np.asarray(z, dtype=float) for z in self.nodes)
        legs = tuple(self.leg_types)
        if not nodes:
            raise ValueError("a path needs at least one node")
        if len(legs) != len(nodes) - 1:
            raise ValueError(f"{len(nodes)} nodes need {len(nodes) - 1} leg types, got {len(legs)}")
        bad = [t for t in legs if t not in LEAF_KINDS]
        if bad:
            raise ValueError(f"leg types must be 'stable' or 'unstable', got {bad}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "leg_types", legs)

    def __len__(self) -> int:
        return len(self.nodes)

    def leg_lengths(self) -> list[float]:
        return [torus_distance(a, b) for a, b in zip(self.nodes[:-1], self.nodes[1:])]

    def reversed(self) -> "SuPath":
        return SuPath(self.nodes[::-1], self.leg_types[::-1])

    def split(self, l: int) -> tuple["SuPath", "SuPath"]:
        """([z_0..z_l], [z_N..z_l])."""
        if not 0 <= l < len(self.nodes):
            raise ValueError(f"split index {l} outside 0..{len(self.nodes) - 1}")
        first = SuPath(self.nodes[:l + 1], self.leg_types[:l])
        second = SuPath(self.nodes[l:], self.leg_types[l:]).reversed()
        return first, second


# ---------------------------------------------------------------------------
# closed-form leaves


@dataclass(frozen=True)
class _Leaf:
    nb: int
    basis: np.ndarray        # nb x k, orthonormal
    step: np.ndarray         # k x k, offset coefficients one step along the contracting time
    backward: bool           # contracting time direction is backward for unstable leaves
    rate: float              # worst contraction per step


def _leaf(system: MapSystem, kind: str) -> _Leaf:
    if kind not in LEAF_KINDS:
        raise ValueError(f"leaf kind must be 'stable' or 'unstable', got {kind!r}")
    base = system.base
    if base is None:
        raise ValueError(f"{system.kind} system has no linear Anosov factor: closed-form leaves unavailable")
    if kind == "stable":
        step = base.stable_restriction
        return _Leaf(base.dim, base.stable, step, False, base.stable_rate)
    step = np.linalg.inv(base.unstable_restriction)
    return _Leaf(base.dim, base.unstable, step, True, 1.0 / base.unstable_rate)


def leaf_coefficient(system: MapSystem, x, y, kind: str) -> tuple[np.ndarray, float]:
    """Coordinates of base(y) - base(x) along the leaf, and the norm of the
    transversal remainder (0 for points on a common leaf)."""
    lf = _leaf(system, kind)
    off = torus_offset(np.asarray(x)[:lf.nb], np.asarray(y)[:lf.nb])
    coef = lf.basis.T @ off
    return coef, float(np.linalg.norm(off - lf.basis @ coef))


def _offsets(lf: _Leaf, coef: np.ndarray, steps: int) -> np.ndarray:
    out = np.empty((steps + 1, lf.nb))
    c = np.array(coef, dtype=float)
    for j in range(steps + 1):
        out[j] = lf.basis @ c
        c = lf.step @ c
    return out


def _partner(system: MapSystem, x, offset, kind: str) -> np.ndarray:
    lf = _leaf(system, kind)
    x = as_point(x, system.dimension)
    coef = np.atleast_1d(np.asarray(offset, dtype=float))
    if coef.shape != (lf.basis.shape[1],):
        raise ValueError(f"offset needs {lf.basis.shape[1]} leaf coordinates, got {coef.shape}")
    if np.linalg.norm(coef) > LEAF_RADIUS + 1e-12:
        raise ValueError(f"|offset| = {np.linalg.norm(coef):.4g} exceeds the local leaf radius {LEAF_RADIUS}")
    y = x.copy()
    y[:lf.nb] = as_point(x[:lf.nb] + lf.basis @ coef)
    if not system.twists:
        return y
    return _refine_partner(system, x, y, coef, lf)


def _refine_partner(system: MapSystem, x, y, coef, lf: _Leaf) -> np.ndarray:
    """Leaf partner of x for a perturbed product, starting from the
    candidate y that shares x's center coordinates.

    The candidate is exact when the center coordinates of the pair evolve
    identically along the contracting time (both orbits miss the twist
    balls, or sit where the twists act trivially).  Otherwise the partner is
    seeded far along the orbit, where the pair is exponentially close, and
    pulled back.
    """
    m = PULLBACK_STEPS
    offs = _offsets(lf, coef, m)
    xs, ys = K.leaf_pair_orbit(np.ascontiguousarray(x), np.ascontiguousarray(y), offs,
                               lf.nb, system._prog, lf.backward)
    if np.array_equal(xs[:, lf.nb:], ys[:, lf.nb:]):
        return y
    z = xs[m].copy()
    z[:lf.nb] = as_point(xs[m, :lf.nb] + offs[m])
    undo = system.evaluate if lf.backward else system.invert
    for j in range(m - 1, -1, -1):
        z = undo(z)
        z[:lf.nb] = as_point(xs[j, :lf.nb] + offs[j])
    return z


def stable_partner(system: MapSystem, x, offset) -> np.ndarray:
    """Point on the local strong stable leaf of x at leaf coordinate offset."""
    return _partner(system, x, offset, "stable")


def unstable_partner(system: MapSystem, x, offset) -> np.ndarray:
    return _partner(system, x, offset, "unstable")


def pair_orbits(system: MapSystem, x, y, kind: str, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Orbits of a same-leaf pair along the contracting time direction."""
    lf = _leaf(system, kind)
    coef, transversal = leaf_coefficient(system, x, y, kind)
    if transversal > 1e-9:
        raise ValueError(f"points are not on a common {kind} leaf (transversal offset {transversal:.3g})")
    offs = _offsets(lf, coef, steps)
    x = np.ascontiguousarray(as_point(x, system.dimension))
    y = np.ascontiguousarray(as_point(y, system.dimension))
    return K.leaf_pair_orbit(x, y, offs, lf.nb, system._prog, lf.backward)


@dataclass(frozen=True)
class LeafCheck:
    kind: str
    steps: int
    initial_distance: float
    final_distance: float
    predicted: float
    transversal: float
    passed: bool


def leaf_contraction_check(system: MapSystem, x, y, kind: str, steps: int = 20) -> LeafCheck:
    """Iterate both points m steps (forward for stable, backward for
    unstable) in multiprecision and compare the final distance with the
    leaf contraction d_0 * rate^m (1% slack).

    y is rebuilt as x plus its projected leaf offset on high-precision
    eigenvectors, so the check tests the leaf geometry rather than rounding
    in the expanding direction.
    """
    lf = _leaf(system, kind)
    coef, transversal = leaf_coefficient(system, x, y, kind)
    prog = _mp.MPProgram(system)
    ctx = prog.ctx
    vecs = _mp.leaf_vectors(system.base.matrix, inside=(kind == "stable"), ctx=ctx)
    off = lf.basis @ coef
    v = ctx.matrix([[vec[i] for _, vec in vecs] for i in range(lf.nb)])
    c = ctx.lu_solve(v.T * v, v.T * ctx.matrix([float(t) for t in off]))
    xm = prog.point(x)
    ym = prog.point(y)
    for i in range(lf.nb):
        ym[i] = xm[i] + ctx.fsum(c[k] * vecs[k][1][i] for k in range(len(vecs)))
        ym[i] = ym[i] - ctx.floor(ym[i])
    d0 = prog.distance(xm, ym)
    signed = -steps if lf.backward else steps
    dm = prog.distance(prog.iterate(xm, signed), prog.iterate(ym, signed))
    predicted = d0 * ctx.mpf(lf.rate) ** steps
    ok = bool(dm <= predicted * ctx.mpf("1.01")) and transversal < 1e-9
    return LeafCheck(kind, steps, float(d0), float(dm), float(predicted), transversal, ok)


def verify_path(system: MapSystem, path: SuPath, steps: int = 20) -> list[LeafCheck]:
    """Leaf check for every leg; raises when a leg is too long or off-leaf."""
    checks = []
    for i, (a, b, kind) in enumerate(zip(path.nodes[:-1], path.nodes[1:], path.leg_types)):
        length = torus_distance(a, b)
        if length > LEAF_RADIUS + 1e-9:
            raise ValueError(f"leg {i} has length {length:.4g} > {LEAF_RADIUS}")
        chk = leaf_contraction_check(system, a, b, kind, steps)
        if not chk.passed:
            raise ValueError(f"leg {i} does not lie on a common {kind} leaf: {chk}")
        checks.append(chk)
    return checks


# ---------------------------------------------------------------------------
# A_n and holonomies


def _inv2(m: np.ndarray) -> np.ndarray:
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if det == 0.0 or not math.isfinite(det):
        raise ValueError("singular center block")
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


def _center_blocks(system: MapSystem, pts: np.ndarray, backward: bool) -> np.ndarray:
    c = system._require_center()
    jacs = system.jacobian_inverse_many(pts) if backward else system.jacobian_many(pts)
    return np.einsum("ia,kij,jb->kab", c, jacs, c)


def _sequence(system, x, y, kind, n_max, tol, stop):
    src = center_frame(system, x)
    dst = center_frame(system, y)
    lf = _leaf(system, kind)
    xs, ys = pair_orbits(system, x, y, kind, n_max)
    gx = _center_blocks(system, xs[:n_max], lf.backward)
    gy = _center_blocks(system, ys[:n_max], lf.backward)
    eye = np.eye(2)
    a = dst.basis.T @ src.basis
    p = eye.copy()
    q = eye.copy()
    history = np.zeros(n_max)
    n_used = n_max
    for n in range(n_max):
        gyi = _inv2(gy[n])
        # G_y^{-1} (G_x - G_y) vanishes exactly where both blocks coincide
        inc = q @ gyi @ (gx[n] - gy[n]) @ p
        a = a + inc
        history[n] = np.linalg.norm(inc, 2)
        p = gx[n] @ p
        q = q @ gyi
        if stop and history[n] < tol and torus_distance(xs[n + 1], ys[n + 1]) < tol * 1e-2:
            n_used = n + 1
            break
    else:
        if stop:
            raise HolonomyConvergenceError(
                f"{kind} holonomy did not converge within {n_max} steps "
                f"(last increment {history[-1]:.3g})", history)
    return a, n_used, history[:n_used], src, dst


def holonomy_A_n(system: MapSystem, x, y, n: int, kind: str = "stable") -> np.ndarray:
    """A_n(x, y) in center-frame coordinates (A_0 is the frame overlap)."""
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if n == 0:
        return center_frame(system, y).basis.T @ center_frame(system, x).basis
    return _sequence(system, x, y, kind, n, 0.0, stop=False)[0]


def _holonomy(system, x, y, kind, tol, n_max):
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    a, n_used, hist, src, dst = _sequence(system, x, y, kind, n_max, tol, stop=True)
    return HolonomyMap(src, dst, a, n_used, float(hist[-1]), kind, hist)


def stable_holonomy(system: MapSystem, x, y, tol: float = DEFAULT_TOL,
                    n_max: int = MAX_STEPS) -> HolonomyMap:
    """H^s_{x,y} as the limit of A_n over forward orbits.

    Raises:
        HolonomyConvergenceError: with the residual history when the
            increments do not drop below tol within n_max steps.
    """
    return _holonomy(system, x, y, "stable", tol, n_max)


def unstable_holonomy(system: MapSystem, x, y, tol: float = DEFAULT_TOL,
                      n_max: int = MAX_STEPS) -> HolonomyMap:
    """H^u_{x,y}, the backward-time analogue."""
    return _holonomy(system, x, y, "unstable", tol, n_max)


def holonomy(system: MapSystem, x, y, kind: str, tol: float = DEFAULT_TOL) -> HolonomyMap:
    return _holonomy(system, x, y, kind, tol, MAX_STEPS)


def leg_holonomy(system: MapSystem, x, y, kind: str, tol: float = DEFAULT_TOL,
                 max_length: float = LEAF_RADIUS) -> HolonomyMap:
    """Holonomy along one leg, subdivided into pieces of length <= max_length
    and composed (groupoid law)."""
    coef, _ = leaf_coefficient(system, x, y, kind)
    length = float(np.linalg.norm(coef))
    pieces = max(1, math.ceil(length / max_length - 1e-12))
    if pieces == 1:
        return holonomy(system, x, y, kind, tol)
    pts = [as_point(x, system.dimension)]
    for i in range(1, pieces):
        pts.append(_partner(system, pts[-1], coef / pieces, kind))
    pts.append(as_point(y, system.dimension))
    parts = [holonomy(system, a, b, kind, tol) for a, b in zip(pts[:-1], pts[1:])]
    return _chain(parts, kind)


def _chain(parts: list[HolonomyMap], kind: str) -> HolonomyMap:
    mat = np.eye(2)
    for h in parts:
        mat = h.matrix @ mat
    return HolonomyMap(parts[0].source, parts[-1].target, mat,
                       max(h.n_used for h in parts), max(h.residual for h in parts),
                       kind, np.zeros(0), tuple(parts))


def compose_along_path(system: MapSystem, path: SuPath, tol: float = DEFAULT_TOL) -> HolonomyMap:
    """H_zeta = H_{z_N} o ... o H_{z_1}, one (subdivided) holonomy per leg."""
    if len(path.nodes) == 1:
        f = center_frame(system, path.nodes[0])
        return HolonomyMap(f, f, np.eye(2), 0, 0.0, "path")
    legs = [leg_holonomy(system, a, b, kind, tol)
            for a, b, kind in zip(path.nodes[:-1], path.nodes[1:], path.leg_types)]
    return _chain(legs, "path")


def equivariance_residual(system: MapSystem, x, y, kind: str = "stable",
                          tol: float = DEFAULT_TOL) -> float:
    """|| F_y H_{x,y} - H_{x1,y1} F_x || with (x1, y1) the next pair along the
    contracting time (F the forward cocycle for stable, inverse for unstable)."""
    lf = _leaf(system, kind)
    xs, ys = pair_orbits(system, x, y, kind, 1)
    h0 = holonomy(system, xs[0], ys[0], kind, tol)
    h1 = holonomy(system, xs[1], ys[1], kind, tol)
    fx = _center_blocks(system, xs[:1], lf.backward)[0]
    fy = _center_blocks(system, ys[:1], lf.backward)[0]
    return float(np.linalg.norm(fy @ h0.matrix - h1.matrix @ fx, 2))


def groupoid_residual(system: MapSystem, x, y, z, kind: str = "stable",
                      tol: float = DEFAULT_TOL) -> float:
    """|| H_{y,z} H_{x,y} - H_{x,z} || for three points on one leaf."""
    hxy = holonomy(system, x, y, kind, tol)
    hyz = holonomy(system, y, z, kind, tol)
    hxz = holonomy(system, x, z, kind, tol)
    return float(np.linalg.norm(hyz.matrix @ hxy.matrix - hxz.matrix, 2))


def rotation(beta: float) -> np.ndarray:
    c, s = math.cos(beta), math.sin(beta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class HolonomyComparison:
    per_leg: tuple
    total: float
    compensated: float | None
    holonomy_f: HolonomyMap
    holonomy_fk: HolonomyMap

    def to_dict(self) -> dict:
        return {"per_leg": list(self.per_leg), "total": self.total, "compensated": self.compensated}


def compare_holonomies(map_f: MapSystem, map_fk: MapSystem, path_f: SuPath, path_fk: SuPath,
                       tol: float = DEFAULT_TOL, beta: float | None = None) -> HolonomyComparison:
    """Operator distances between the path holonomies of two maps; with beta,
    also || R_beta^{-1} H_f - H_fk ||."""
    if path_f.leg_types != path_fk.leg_types:
        raise ValueError(f"mismatched paths: leg types {path_f.leg_types} vs {path_fk.leg_types}")
    hf = compose_along_path(map_f, path_f, tol)
    hk = compose_along_path(map_fk, path_fk, tol)
    per_leg = tuple(float(np.linalg.norm(a.matrix - b.matrix, 2)) for a, b in zip(hf.legs, hk.legs))
    total = float(np.linalg.norm(hf.matrix - hk.matrix, 2))
    comp = None
    if beta is not None:
        comp = float(np.linalg.norm(rotation(-beta) @ hf.matrix - hk.matrix, 2))
    return HolonomyComparison(per_leg, total, comp, hf, hk)


# ---------------------------------------------------------------------------
# homoclinic su-paths


@dataclass(frozen=True)
class RecurrenceEstimate:
    c: float
    window_a: float
    window_b: float
    j_split: int
    j_max: int
    argmin: tuple[int, int]     # (j, node index)
    relative_change: float

    @property
    def stable(self) -> bool:
        return self.relative_change <= 0.10

    def to_dict(self) -> dict:
        return {"c": self.c, "window_a": self.window_a, "window_b": self.window_b,
                "j_split": self.j_split, "j_max": self.j_max, "argmin": list(self.argmin),
                "relative_change": self.relative_change, "stable": self.stable}


@dataclass(frozen=True)
class HomoclinicPath(SuPath):
    """Closed su-path p -> z (stable legs) -> p (unstable legs)."""

    p: np.ndarray = None
    z: np.ndarray = None
    split_index: int = 0
    lattice_vector: tuple = (0, 0)
    unstable_coefficient: float = 0.0   # z = p + a v^u (unit v^u)
    stable_coefficient: float = 0.0     # z = p + b v^s + lattice vector (unit v^s)
    # (kind, t): node = p + t v^kind on that leaf through p
    node_leaf_coords: tuple = ()
    recurrence: RecurrenceEstimate | None = None

    def first_coordinate_coefficients(self, system: MapSystem) -> tuple[float, float]:
        """(a, b) for eigenvectors normalized to first coordinate 1."""
        base = system.base
        return (self.unstable_coefficient * float(base.unstable[0, 0]),
                self.stable_coefficient * float(base.stable[0, 0]))

    def zetas(self) -> tuple[SuPath, SuPath]:
        return self.split(self.split_index)


def find_homoclinic_su_path(system: MapSystem, lattice_window: int, lattice_vector=None,
                            max_leg: float = LEAF_RADIUS, recurrence_j: int = 20) -> HomoclinicPath:
    """Closed su-path through the fixed point p = 0 via a homoclinic point.

    Solves a v^u - b v^s = m over lattice vectors m with |m_i| <= lattice_window
    and keeps the solution with the smallest |a| + |b| (ties: shorter lattice
    vector, then lexicographically largest), unless lattice_vector is given.
    z = a v^u = b v^s + m lies on both leaves of p.  Legs are subdivided to
    length <= max_leg; z is node l.
    """
    base = system.base
    if base is None or base.dim != 2 or base.stable.shape[1] != 1:
        raise ValueError("homoclinic paths need a product whose left factor is a 2x2 linear Anosov map")
    n = system.dimension
    p = np.zeros(n)
    if torus_distance(system.evaluate(p), p) > 1e-12:
        raise ValueError("origin is not fixed: homoclinic construction needs p = 0 fixed")
    vu = base.unstable[:, 0]
    vs = base.stable[:, 0]
    mat = np.column_stack([vu, -vs])
    if lattice_vector is not None:
        m = tuple(int(v) for v in lattice_vector)
        if m == (0, 0):
            raise ValueError("no solution: the zero lattice vector gives z = p")
        candidates = [m]
    else:
        w = int(lattice_window)
        candidates = [(i, j) for i in range(-w, w + 1) for j in range(-w, w + 1) if (i, j) != (0, 0)]
        if not candidates:
            raise ValueError(f"no solution in lattice window {lattice_window}: only the zero vector is available")

    def solve(m):
        a, b = np.linalg.solve(mat, np.array(m, dtype=float))
        return float(a), float(b)

    def key(m):
        a, b = solve(m)
        return (round(abs(a) + abs(b), 9), abs(m[0]) + abs(m[1]), -m[0], -m[1])

    m = min(candidates, key=key)
    a, b = solve(m)
    z_base = as_point(a * vu)

    ns = max(1, math.ceil(abs(b) / max_leg - 1e-12))
    nu = max(1, math.ceil(abs(a) / max_leg - 1e-12))
    nodes, coords = [], []
    for i in range(ns + 1):
        t = b * i / ns
        pt = p.copy()
        pt[:2] = as_point(t * vs)
        nodes.append(pt)
        coords.append(("stable", t))
    nodes[-1][:2] = z_base
    for i in range(1, nu + 1):
        t = a * (1 - i / nu)
        pt = p.copy()
        pt[:2] = as_point(t * vu)
        nodes.append(pt)
        coords.append(("unstable", t))
    legs = ["stable"] * ns + ["unstable"] * nu
    z = nodes[ns].copy()
    path = HomoclinicPath(tuple(nodes), tuple(legs), p=p, z=z, split_index=ns,
                          lattice_vector=m, unstable_coefficient=a, stable_coefficient=b,
                          node_leaf_coords=tuple(coords))
    rec = recurrence_constant(system, path, recurrence_j)
    object.__setattr__(path, "recurrence", rec)
    return path


def _leaf_iterates(system: MapSystem, path: HomoclinicPath, js) -> dict:
    """dist(f^j(z_i), z_l) for exact leaf points, in multiprecision."""
    ctx = _mp._ctx()
    base = system.base
    vs = _mp.leaf_vectors(base.matrix, inside=True, ctx=ctx)[0]
    vu = _mp.leaf_vectors(base.matrix, inside=False, ctx=ctx)[0]
    mu_s, vec_s = vs
    mu_u, vec_u = vu
    a = ctx.mpf(path.unstable_coefficient)
    zl = [a * c for c in vec_u]
    out = {}
    for i, (kind, t) in enumerate(path.node_leaf_coords):
        mu, vec = (mu_s, vec_s) if kind == "stable" else (mu_u, vec_u)
        t = ctx.mpf(t)
        for j in js:
            if j == 0 and i == path.split_index:
                continue
            s = t * mu ** j
            acc = ctx.mpf(0)
            for k in range(2):
                d = abs(s * vec[k] - zl[k]) % 1
                d = min(d, 1 - d)
                acc += d * d
            out[(j, i)] = float(ctx.sqrt(acc))
    return out


def recurrence_constant(system: MapSystem, path: HomoclinicPath, j_split: int = 20,
                        j_max: int | None = None) -> RecurrenceEstimate:
    """c = min (1 + j^2) dist(f^j(z_i), z_l) over sampled (j, i) != (0, l).

    Window A is |j| <= j_split, window B is j_split < |j| <= j_max (default
    2 j_split).  The estimate is reported as the minimum over both, with the
    relative drop that window B causes as its stability measure.
    """
    j_max = 2 * j_split if j_max is None else j_max
    wa = range(-j_split, j_split + 1)
    wb = [j for j in range(-j_max, j_max + 1) if abs(j) > j_split]

    def best(js):
        vals = _leaf_iterates(system, path, js)
        k = min(vals, key=lambda key: (1 + key[0] ** 2) * vals[key])
        return (1 + k[0] ** 2) * vals[k], k

    ca, arg_a = best(wa)
    cb, arg_b = best(wb)
    c = min(ca, cb)
    return RecurrenceEstimate(c, ca, cb, j_split, j_max, arg_a if ca <= cb else arg_b,
                              (ca - c) / ca if ca > 0 else float("inf"))


def recurrence_table(system: MapSystem, path: HomoclinicPath, j_max: int = 20) -> list[tuple[int, int, float]]:
    """(j, i, (1 + j^2) dist) rows for every sampled pair."""
    vals = _leaf_iterates(system, path, range(-j_max, j_max + 1))
    return [(j, i, (1 + j * j) * d) for (j, i), d in sorted(vals.items())]


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class DecayFit:
    ratio: float
    slope: float
    intercept: float
    count: int
    r_squared: float


def fit_decay(histories, floor: float = 1e-15) -> DecayFit:
    """Pooled least-squares fit of log ||A_{n+1} - A_n|| against n over all
    increments above floor (zero increments carry no rate information)."""
    ns, logs = [], []
    for h in histories:
        h = np.asarray(h, dtype=float)
        idx = np.nonzero(h > floor)[0]
        ns.extend(idx.tolist())
        logs.extend(np.log(h[idx]).tolist())
    ns = np.asarray(ns, dtype=float)
    logs = np.asarray(logs)
    if ns.size < 3 or np.ptp(ns) == 0:
        raise ValueError(f"not enough non-zero increments to fit a decay ({ns.size})")
    slope, intercept = np.polyfit(ns, logs, 1)
    pred = slope * ns + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(math.exp(slope)), float(slope), float(intercept), int(ns.size), r2)


@dataclass(frozen=True)
class VarsigmaFit:
    raw: float
    clipped: float
    bound: float          # nu_max^((1 - varsigma) alpha)


def fit_varsigma(ratio: float, alpha: float, nu_max: float) -> VarsigmaFit:
    """Solve ratio = nu_max^((1 - s) alpha) for s; s is an existence constant
    in [0, 1), so a decay faster than nu_max^alpha fits s < 0 and is clipped."""
    raw = 1.0 - math.log(ratio) / (alpha * math.log(nu_max))
    s = min(max(raw, 0.0), 1.0)
    return VarsigmaFit(raw, s, nu_max ** ((1.0 - s) * alpha))


@dataclass(frozen=True)
class NormBoundFit:
    c_hat: float
    alpha: float
    samples: int
    per_sample: np.ndarray


def fit_norm_constant(holonomies, alpha: float) -> NormBoundFit:
    """Smallest C with ||H|| <= 1 + C dist^alpha over the given holonomies."""
    vals = []
    for h in holonomies:
        d = h.distance
        if d > 0:
            vals.append((h.norm - 1.0) / d ** alpha)
    vals = np.asarray(vals)
    if vals.size == 0:
        raise ValueError("no holonomies between distinct points")
    return NormBoundFit(float(max(vals.max(), 0.0)), float(alpha), int(vals.size), vals)
