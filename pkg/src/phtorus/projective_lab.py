"""Projective center cocycle: fiber dynamics, empirical fiber measures,
holonomy-invariance residuals and the separation witness.

Angles live in [0, pi) and are always taken in the constant center frame of
the system's splitting, so every fiber shares one angle coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels as K
from . import holonomy as hol
from . import perturbation as pt
from .torus_dynamics import MapSystem, as_point, torus_distance

PI = math.pi
SINGULAR_TOL = 1e-14
CONVERGED_STEP = 1e-10
FLATNESS_MAX = 0.1
FLATNESS_BINS = 32
DEFAULT_GRID = 16


def reduce_angle(theta):
    t = np.mod(theta, PI)
    return np.where(t >= PI, 0.0, t) if isinstance(t, np.ndarray) else (0.0 if t >= PI else float(t))


def projective_distance(a, b):
    """Distance between lines at angles a and b (the circle [0, pi))."""
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), PI)
    d = np.minimum(d, PI - d)
    return float(d) if d.ndim == 0 else d


@dataclass(frozen=True)
class ProjectivePoint:
    angle: float
    frame: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "angle", reduce_angle(float(self.angle)))

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])


def _check_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"projective action needs a 2x2 matrix, got shape {m.shape}")
    scale = max(float(np.max(np.abs(m))), 1e-300)
    if abs(np.linalg.det(m)) <= SINGULAR_TOL * scale * scale:
        raise ValueError("singular matrix has no projective action")
    return m


def project_angles(matrix, angles) -> np.ndarray:
    """Vectorized action on an array of angles."""
    m = _check_matrix(matrix)
    t = np.asarray(angles, dtype=float)
    c, s = np.cos(t), np.sin(t)
    return reduce_angle(np.arctan2(m[1, 0] * c + m[1, 1] * s, m[0, 0] * c + m[0, 1] * s))


def project_action(matrix, p):
    """Angle of matrix @ (cos t, sin t), mod pi.  Accepts a ProjectivePoint
    (returned with the same frame) or a bare angle."""
    if isinstance(p, ProjectivePoint):
        return ProjectivePoint(float(project_angles(matrix, p.angle)), p.frame)
    return float(project_angles(matrix, float(p)))


def eigendirections(matrix) -> dict:
    """Eigen data of a 2x2 block: for real spectra the expanding and
    contracting line angles (None when complex)."""
    m = np.asarray(matrix, dtype=float)
    vals, vecs = np.linalg.eig(m)
    if np.any(np.abs(vals.imag) > 1e-12):
        return {"eigenvalues": vals, "real": False, "expanding": None, "contracting": None}
    vals = vals.real
    order = np.argsort(-np.abs(vals))
    vecs = vecs.real[:, order]
    angle = [reduce_angle(math.atan2(vecs[1, i], vecs[0, i])) for i in range(2)]
    return {"eigenvalues": vals[order], "real": True, "expanding": angle[0], "contracting": angle[1]}


# ---------------------------------------------------------------------------
# periodic points


@dataclass(frozen=True)
class FiberDynamics:
    trajectory: np.ndarray
    classification: str          # "pinching", "elliptic" or "parabolic"
    period_block: np.ndarray
    eigenvalues: np.ndarray
    expanding_angle: float | None
    contracting_angle: float | None
    limit_angle: float | None    # where the trajectory settled, if it did
    flatness: float
    observed_ratio: float | None

    def steps_to(self, target: float, tol: float) -> int | None:
        """First iterate within tol of target (projective distance)."""
        hit = np.nonzero(projective_distance(self.trajectory, target) < tol)[0]
        return int(hit[0]) if hit.size else None


def _flatness(traj: np.ndarray, bins: int = FLATNESS_BINS) -> float:
    counts, _ = np.histogram(traj, bins=bins, range=(0.0, PI))
    return float(np.max(np.abs(counts * bins / traj.shape[0] - 1.0)))


def _observed_ratio(traj: np.ndarray, target: float) -> float | None:
    d = projective_distance(traj, target)
    keep = np.nonzero((d > 1e-13) & (d < 1e-2))[0]
    if keep.size < 3:
        return None
    slope, _ = np.polyfit(keep.astype(float), np.log(d[keep]), 1)
    return float(math.exp(slope))


def fiber_dynamics(block, theta0, n: int = 10_000) -> FiberDynamics:
    """Iterate the projective action of a fixed 2x2 block from theta0.

    A run whose last step moves less than 1e-10 has converged ("pinching"
    when the block has real eigenvalues of different moduli).  Otherwise a
    trajectory with bin-flatness below 0.1 is "elliptic", anything else
    "parabolic".
    """
    m = _check_matrix(block)
    theta0 = theta0.angle if isinstance(theta0, ProjectivePoint) else float(theta0)
    if n < 1:
        raise ValueError(f"need at least one iterate, got {n}")
    traj = np.empty(n + 1)
    traj[0] = reduce_angle(theta0)
    c, s = m[0], m[1]
    t = traj[0]
    for i in range(1, n + 1):
        ct, st = math.cos(t), math.sin(t)
        t = math.atan2(s[0] * ct + s[1] * st, c[0] * ct + c[1] * st)
        if t < 0.0:
            t += PI
        if t >= PI:
            t -= PI
        traj[i] = t
    eig = eigendirections(m)
    step = projective_distance(traj[-1], traj[-2])
    flat = _flatness(traj)
    limit = None
    if step < CONVERGED_STEP:
        limit = float(traj[-1])
        separated = eig["real"] and abs(abs(eig["eigenvalues"][0]) - abs(eig["eigenvalues"][1])) > 1e-9
        kind = "pinching" if separated else "parabolic"
    elif flat < FLATNESS_MAX:
        kind = "elliptic"
    else:
        kind = "parabolic"
    ratio = _observed_ratio(traj, eig["expanding"]) if kind == "pinching" and eig["expanding"] is not None else None
    return FiberDynamics(traj, kind, m, eig["eigenvalues"], eig["expanding"], eig["contracting"],
                         limit, flat, ratio)


def period_block(system: MapSystem, p, period: int) -> np.ndarray:
    """Center block of f^period at p (product of the blocks along the orbit)."""
    orbit = system.orbit(as_point(p, system.dimension), period)
    if torus_distance(orbit[-1], orbit[0]) >= 1e-9:
        raise ValueError(f"point is not periodic with period {period} "
                         f"(return distance {torus_distance(orbit[-1], orbit[0]):.3g})")
    c = system._require_center()
    m = np.eye(2)
    for x in orbit[:-1]:
        m = (c.T @ system.jacobian(x) @ c) @ m
    return m


def periodic_fiber_dynamics(system: MapSystem, p, period: int, theta0, n: int = 10_000) -> FiberDynamics:
    return fiber_dynamics(period_block(system, p, period), theta0, n)


# ---------------------------------------------------------------------------
# fiber measures and the circle transport distance


@dataclass(frozen=True)
class FiberMeasure:
    """Probability on [0, pi): atoms at ``angles`` with ``weights``.  A
    histogram is the measure with its masses at bin centers."""

    angles: np.ndarray
    weights: np.ndarray
    base: np.ndarray | None = None

    def __post_init__(self):
        a = reduce_angle(np.atleast_1d(np.asarray(self.angles, dtype=float)))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if a.shape != w.shape:
            raise ValueError(f"angles {a.shape} and weights {w.shape} differ in shape")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("measure has zero mass")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "weights", w / total)

    @classmethod
    def point_mass(cls, angle: float, base=None) -> "FiberMeasure":
        return cls(np.array([angle]), np.array([1.0]), base)

    @classmethod
    def from_histogram(cls, counts, base=None) -> "FiberMeasure":
        counts = np.asarray(counts, dtype=float)
        centers = (np.arange(counts.shape[0]) + 0.5) * PI / counts.shape[0]
        return cls(centers, counts, base)

    @classmethod
    def uniform(cls, bins: int, base=None) -> "FiberMeasure":
        return cls.from_histogram(np.ones(bins), base)

    def histogram(self, bins: int) -> np.ndarray:
        idx = np.minimum((self.angles / PI * bins).astype(int), bins - 1)
        return np.bincount(idx, weights=self.weights, minlength=bins)

    def total_variation_to_uniform(self, bins: int) -> float:
        return 0.5 * float(np.sum(np.abs(self.histogram(bins) - 1.0 / bins)))


def circle_wasserstein(mu: FiberMeasure, nu: FiberMeasure) -> float:
    """W1 on the circle of length pi.

    With F the difference of the two distribution functions from 0, the
    optimal cost is min_c integral |F - c|, reached at a weighted median of
    F; F is piecewise constant between the merged support points, so the
    integral is exact.
    """
    pts = np.concatenate([mu.angles, nu.angles])
    jumps = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(pts, kind="stable")
    pts, jumps = pts[order], jumps[order]
    f = np.cumsum(jumps)
    lengths = np.diff(np.append(pts, PI + pts[0]))
    # F on [pts[i], pts[i+1]) is f[i]; the last interval wraps through 0
    o = np.argsort(f, kind="stable")
    cw = np.cumsum(lengths[o])
    c = f[o][np.searchsorted(cw, 0.5 * cw[-1])]
    return float(np.sum(lengths * np.abs(f - c)))


def transport(measure: FiberMeasure, matrix, base=None) -> FiberMeasure:
    """Push a fiber measure by the projective action of matrix."""
    return FiberMeasure(project_angles(matrix, measure.angles), measure.weights.copy(),
                        measure.base if base is None else base)


def transport_histogram(counts, matrix) -> np.ndarray:
    """Push histogram masses (at bin centers) and re-bin them."""
    bins = np.asarray(counts).shape[0]
    return transport(FiberMeasure.from_histogram(counts), matrix).histogram(bins)


# ---------------------------------------------------------------------------
# empirical invariant measures


@dataclass(frozen=True)
class MeasureField:
    """Per-cell fiber histograms over a grid on the two base coordinates."""

    counts: np.ndarray        # (grid, grid, bins), raw visit weights
    grid: int
    bins: int
    n_orbit: int
    base_coords: tuple[int, int]

    def cell_of(self, x) -> tuple[int, int]:
        i, j = self.base_coords
        x = as_point(x)
        return (min(int(x[i] * self.grid), self.grid - 1), min(int(x[j] * self.grid), self.grid - 1))

    def mass(self, cell) -> float:
        return float(self.counts[cell].sum())

    def measure(self, cell) -> FiberMeasure | None:
        c = self.counts[cell]
        if c.sum() <= 0:
            return None
        return FiberMeasure.from_histogram(c, base=np.array(cell))

    def aggregate(self) -> FiberMeasure:
        return FiberMeasure.from_histogram(self.counts.sum(axis=(0, 1)))

    def rows(self) -> list[tuple[int, int, int, float]]:
        """(cell_i, cell_j, bin, normalized mass) for populated cells."""
        out = []
        for ci in range(self.grid):
            for cj in range(self.grid):
                row = self.counts[ci, cj]
                tot = row.sum()
                if tot > 0:
                    out.extend((ci, cj, b, float(v / tot)) for b, v in enumerate(row))
        return out


def _constant_center_block(system: MapSystem, rng) -> np.ndarray | None:
    if system.twists:
        return None
    pts = rng.random((8, system.dimension))
    c = system._require_center()
    blocks = np.einsum("ia,kij,jb->kab", c, system.jacobian_many(pts), c)
    return blocks[0] if np.all(blocks == blocks[0]) else None


def empirical_invariant_measure(system: MapSystem, x0, n_orbit: int = 100_000, bins: int = 64,
                                grid: int = DEFAULT_GRID, atoms: int = 64,
                                burn_in: int = 0, seed: int = 0) -> MeasureField:
    """Push `atoms` initially equispaced angles along the orbit of x0 and
    record (cell, angle) visits on a grid over the base coordinates."""
    if n_orbit < 10_000:
        raise ValueError(f"n_orbit must be at least 10^4, got {n_orbit}")
    c = system._require_center()
    rng = np.random.default_rng(seed)
    const = _constant_center_block(system, rng)
    base_coords = (0, 1)
    angles0 = (np.arange(atoms) + 0.5) * PI / atoms
    counts = K.projective_push(as_point(x0, system.dimension), system._prog, np.ascontiguousarray(c),
                               const is not None, np.ascontiguousarray(const if const is not None else np.eye(2)),
                               int(n_orbit), angles0, int(bins), int(grid), base_coords[0], base_coords[1],
                               int(burn_in))
    return MeasureField(counts, int(grid), int(bins), int(n_orbit), base_coords)


# ---------------------------------------------------------------------------
# invariance residuals


@dataclass(frozen=True)
class InvarianceResidual:
    kind: str
    mean: float | None
    values: np.ndarray
    pairs_used: int
    skipped_empty: int
    skipped_holonomy: int


def invariance_residual(system: MapSystem, measure_field: MeasureField, n_pairs: int = 200,
                        kind: str = "stable", max_offset: float = 0.05, seed: int = 0,
                        tol: float = hol.DEFAULT_TOL) -> InvarianceResidual:
    """Mean W1 between (H_{x,y})_* m_x and m_y over sampled same-leaf pairs.

    Pairs whose cells hold no mass, or whose holonomy does not converge,
    are skipped and counted.
    """
    rng = np.random.default_rng(seed)
    vals, empty, failed = [], 0, 0
    for _ in range(n_pairs):
        x = rng.random(system.dimension)
        off = rng.uniform(-max_offset, max_offset, size=system.base.leaf_basis(kind).shape[1])
        y = hol._partner(system, x, off, kind)
        mx = measure_field.measure(measure_field.cell_of(x))
        my = measure_field.measure(measure_field.cell_of(y))
        if mx is None or my is None:
            empty += 1
            continue
        try:
            h = hol.holonomy(system, x, y, kind, tol)
        except hol.HolonomyConvergenceError:
            failed += 1
            continue
        vals.append(circle_wasserstein(transport(mx, h.matrix), my))
    vals = np.asarray(vals)
    return InvarianceResidual(kind, float(vals.mean()) if vals.size else None, vals,
                              int(vals.size), empty, failed)


# ---------------------------------------------------------------------------
# projective exponent


def projective_exponent(system: MapSystem, x0, theta0: float, n: int = 100_000,
                        chunk: int = 10_000) -> float:
    """Average log of the derivative of the projective action along the
    orbit: d theta' / d theta = det(M) / |M v(theta)|^2."""
    c = system._require_center()
    x = as_point(x0, system.dimension)
    t = reduce_angle(float(theta0))
    acc = 0.0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        orbit = system.orbit(x, m)
        blocks = np.einsum("ia,kij,jb->kab", c, system.jacobian_many(orbit[:-1]), c)
        dets = np.linalg.det(blocks)
        for b, d in zip(blocks, dets):
            v0 = b[0, 0] * math.cos(t) + b[0, 1] * math.sin(t)
            v1 = b[1, 0] * math.cos(t) + b[1, 1] * math.sin(t)
            acc += math.log(abs(d) / (v0 * v0 + v1 * v1))
            t = math.atan2(v1, v0) % PI
        x = orbit[-1]
        done += m
    return acc / n


# ---------------------------------------------------------------------------
# separation witness


@dataclass(frozen=True)
class WitnessRow:
    k: int
    delta: float
    beta: float
    sin_beta: float
    drift: float | None           # || R_beta^{-1} H_{zeta_1}(f) - H_{zeta_1^k}(f_k) ||
    ratio: float | None           # drift / sin^2 beta (None when beta = 0)
    image_a: float | None
    image_b: float | None
    image_c: float | None
    witness: float | None
    lower_bound: float | None     # sin beta (1 - ratio)
    failures: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("k", "delta", "beta", "sin_beta", "drift", "ratio",
                                           "image_a", "image_b", "image_c", "witness", "lower_bound")}
        d["failures"] = [list(f) for f in self.failures]
        return d


@dataclass(frozen=True)
class SeparationReport:
    rows: tuple
    a: float
    b: float
    pinching_eigenvalues: np.ndarray
    period: int
    skipped: tuple = field(default=())

    def ratios(self) -> tuple[np.ndarray, np.ndarray]:
        ks = np.array([r.k for r in self.rows if r.ok and r.ratio is not None])
        rs = np.array([r.ratio for r in self.rows if r.ok and r.ratio is not None])
        return ks, rs

    def ratio_decreasing(self, allowed_violations: int = 1) -> bool:
        _, rs = self.ratios()
        if rs.size < 2:
            return False
        return int(np.count_nonzero(np.diff(rs) >= 0)) <= allowed_violations

    def witness_positive_after_threshold(self, threshold: float = 0.5) -> bool:
        """Witness > 0 at every k from the first one whose ratio < threshold."""
        started = False
        for r in self.rows:
            if not r.ok or r.ratio is None:
                continue
            started = started or r.ratio < threshold
            if started and not (r.witness is not None and r.witness > 0):
                return False
        return started

    def witness_bound_holds(self) -> bool:
        return all(r.witness >= r.lower_bound - 1e-15 for r in self.rows
                   if r.ok and r.lower_bound is not None and r.witness is not None)


def _transported_direction(g: MapSystem, p_k, angle: float, steps: int) -> float:
    """Push the line `angle` at q = g^{-steps}(p_k) forward to p_k."""
    if steps == 0:
        return angle
    q = g.iterate(p_k, -steps)
    c = g._require_center()
    orbit = g.orbit(q, steps)
    t = angle
    for x in orbit[:-1]:
        t = project_action(c.T @ g.jacobian(x) @ c, t)
    return t


def separation_witness(map_f: MapSystem, schedule_, k_range, path: hol.HomoclinicPath,
                       period: int = 1, tol: float = hol.DEFAULT_TOL) -> SeparationReport:
    """Per-k witness of broken holonomy rigidity at the pinching point p.

    For each k: twist at z_l with the k-th schedule entry, continue the path,
    and compare the projective images H_{zeta_1^k}(a), H_{zeta_1^k}(b) with
    H_{zeta_2^k}(c_k), where a, b are the expanding and contracting lines of
    the period block at p and c_k is a transported from q_k = f_k^{-period k}(p_k).
    """
    eig = eigendirections(period_block(map_f, path.p, period))
    if not eig["real"] or abs(abs(eig["eigenvalues"][0]) - abs(eig["eigenvalues"][1])) < 1e-9:
        raise ValueError(f"p is not a pinching periodic point (eigenvalues {eig['eigenvalues']})")
    a, b = eig["expanding"], eig["contracting"]
    zeta1, zeta2 = path.zetas()
    h1_f = hol.compose_along_path(map_f, zeta1, tol)
    plane = map_f.center_plane
    rows, skipped = [], []
    for k in k_range:
        k = int(k)
        tw = schedule_.twist(k, path.z, plane)
        g = pt.perturbed_system(map_f, tw)
        sin_b = float(schedule_.sin_beta_k(k))
        head = dict(k=k, delta=tw.delta, beta=tw.beta, sin_beta=sin_b)
        path_k, fails = pt.continue_path(g, path)
        if fails:
            rows.append(WitnessRow(**head, drift=None, ratio=None, image_a=None, image_b=None,
                                   image_c=None, witness=None, lower_bound=None, failures=fails))
            skipped.append(k)
            continue
        z1k, z2k = path_k.split(path.split_index)
        try:
            h1 = hol.compose_along_path(g, z1k, tol)
            h2 = hol.compose_along_path(g, z2k, tol)
        except (hol.HolonomyConvergenceError, ValueError) as exc:
            rows.append(WitnessRow(**head, drift=None, ratio=None, image_a=None, image_b=None,
                                   image_c=None, witness=None, lower_bound=None,
                                   failures=((-1, str(exc)),)))
            skipped.append(k)
            continue
        drift = float(np.linalg.norm(hol.rotation(-tw.beta) @ h1_f.matrix - h1.matrix, 2))
        c_k = _transported_direction(g, path_k.nodes[-1], a, period * k)
        ia, ib = project_action(h1.matrix, a), project_action(h1.matrix, b)
        ic = project_action(h2.matrix, c_k)
        witness = float(min(projective_distance(ic, ia), projective_distance(ic, ib)))
        ratio = drift / sin_b ** 2 if sin_b > 0 else None
        bound = sin_b * (1.0 - ratio) if ratio is not None else None
        rows.append(WitnessRow(**head, drift=drift, ratio=ratio, image_a=ia, image_b=ib, image_c=ic,
                               witness=witness, lower_bound=bound))
    return SeparationReport(tuple(rows), a, b, eig["eigenvalues"], int(period), tuple(skipped))
