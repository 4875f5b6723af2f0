"""Localized center twists and their schedule.

A twist at a point z rotates the center-plane offset (u, v) from z by the
angle beta * P(|x - z| / delta), where P is a polynomial bump equal to 1 at
0, to 0 from 1 on, and C^r at both seams.  Rotating a plane vector by an
angle that does not depend on the plane coordinates' direction is area
preserving, and the twist leaves every other coordinate alone, so T is
exactly symplectic for the product form.  The perturbed map is g = f o T.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
import math

import numpy as np
from scipy import linalg

from . import _kernels as K
from . import holonomy as hol
from .torus_dynamics import (N_COEF, MapSystem, Program, as_point, torus_distance,
                             torus_offset, with_twists)

MAX_SMOOTHNESS = (N_COEF - 2) // 2
MAX_FD_ORDER = 4


def smoothstep_coefficients(r: int) -> np.ndarray:
    """Ascending coefficients of the degree 2r+1 smoothstep S with
    S(0)=0, S(1)=1 and derivatives 1..r vanishing at both ends."""
    coef = np.zeros(2 * r + 2)
    for k in range(r + 1):
        coef[r + 1 + k] = math.comb(r + k, k) * math.comb(2 * r + 1, r - k) * (-1) ** k
    return coef


@dataclass(frozen=True)
class BumpProfile:
    smoothness_r: int

    def __post_init__(self):
        if not 2 <= self.smoothness_r <= MAX_SMOOTHNESS:
            raise ValueError(f"smoothness r must be in [2, {MAX_SMOOTHNESS}], got {self.smoothness_r}")

    @property
    def coefficients(self) -> np.ndarray:
        """Coefficients of P = 1 - S, ascending, zero padded to N_COEF."""
        c = -smoothstep_coefficients(self.smoothness_r)
        c[0] += 1.0
        out = np.zeros(N_COEF)
        out[:c.size] = c
        return out

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        poly = np.polynomial.polynomial.polyval(np.clip(t, 0.0, 1.0), self.coefficients)
        return np.where(t <= 0.0, 1.0, np.where(t >= 1.0, 0.0, poly))

    def derivative(self, t, order: int = 1):
        t = np.asarray(t, dtype=float)
        d = np.polynomial.polynomial.polyder(self.coefficients, order)
        inside = (t > 0.0) & (t < 1.0)
        return np.where(inside, np.polynomial.polynomial.polyval(np.clip(t, 0.0, 1.0), d), 0.0)


@dataclass(frozen=True)
class TwistPerturbation:
    center: np.ndarray
    delta: float
    beta: float
    bump: BumpProfile
    center_plane: tuple[int, int]

    @property
    def params(self) -> np.ndarray:
        return np.array([self.delta, self.beta, float(self.center_plane[0]), float(self.center_plane[1])])

    @property
    def dimension(self) -> int:
        return self.center.shape[0]

    def as_system(self) -> MapSystem:
        """T on its own, as a MapSystem (identity block plus the twist)."""
        n = self.dimension
        eye = np.eye(n)
        prog = Program(np.array([[K.LINEAR, 0, n]], dtype=np.int64), eye[None], eye[None].copy(),
                       np.zeros(1), self.center[None].copy(), self.params[None],
                       self.bump.coefficients[None])
        return MapSystem("twist", n, prog, params={"delta": self.delta, "beta": self.beta})

    def apply(self, x) -> np.ndarray:
        return self.as_system().evaluate_many(x).reshape(np.shape(x))

    def jacobian(self, x) -> np.ndarray:
        return self.as_system().jacobian_many(x).reshape(np.shape(x) + (self.dimension,))

    def displacement(self, offsets) -> np.ndarray:
        """T(z + y) - (z + y) for local offsets y (rows), without wrapping.

        Written as (-2 sin^2(phi/2) u - sin(phi) v, sin(phi) u - 2 sin^2(phi/2) v)
        so that small displacements keep full relative precision."""
        y = np.atleast_2d(np.asarray(offsets, dtype=float))
        iu, iv = self.center_plane
        phi = self.beta * self.bump(np.linalg.norm(y, axis=1) / self.delta)
        s = np.sin(phi)
        h = 2.0 * np.sin(0.5 * phi) ** 2
        u, v = y[:, iu], y[:, iv]
        out = np.zeros_like(y)
        out[:, iu] = -h * u - s * v
        out[:, iv] = s * u - h * v
        return out

    def describe(self) -> dict:
        return {"center": self.center.tolist(), "delta": self.delta, "beta": self.beta,
                "r": self.bump.smoothness_r, "center_plane": list(self.center_plane)}


def build_twist(center, delta: float, beta: float, r: int, center_plane) -> TwistPerturbation:
    """Twist of angle beta on B_delta(center) in the given coordinate plane.

    Raises:
        ValueError: delta outside (0, 0.25) (the ball would wrap), |beta| >= pi/2,
            or a bad plane.
    """
    delta = float(delta)
    beta = float(beta)
    if not 0.0 < delta < 0.25:
        raise ValueError(f"delta must lie in (0, 0.25) so the ball does not wrap, got {delta}")
    if not abs(beta) < math.pi / 2:
        raise ValueError(f"beta must satisfy |beta| < pi/2, got {beta}")
    c = as_point(center)
    plane = tuple(int(i) for i in center_plane)
    if len(plane) != 2 or plane[0] == plane[1] or not all(0 <= i < c.shape[0] for i in plane):
        raise ValueError(f"center plane must be two distinct coordinate indices, got {center_plane}")
    return TwistPerturbation(c, delta, beta, BumpProfile(int(r)), plane)


def rotation_block(dimension: int, beta: float, center_plane) -> np.ndarray:
    """A_beta: rotation by beta in the center plane, identity elsewhere."""
    a = np.eye(dimension)
    iu, iv = center_plane
    c, s = math.cos(beta), math.sin(beta)
    a[iu, iu], a[iu, iv], a[iv, iu], a[iv, iv] = c, -s, s, c
    return a


def perturbed_system(system: MapSystem, twist: TwistPerturbation) -> MapSystem:
    """g = f o T."""
    if twist.dimension != system.dimension:
        raise ValueError(f"twist dimension {twist.dimension} does not match system dimension {system.dimension}")
    return with_twists(system, twist.center, twist.params, twist.bump.coefficients, [twist])


# ---------------------------------------------------------------------------
# schedule


@dataclass(frozen=True)
class PerturbationSchedule:
    c: float
    sigma: float
    epsilon: float
    r: int
    C0: float = 1.0
    k_min: int = 1

    def __post_init__(self):
        for name in ("c", "sigma", "epsilon", "C0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if int(self.r) != self.r or self.r < 2:
            raise ValueError(f"r must be an integer >= 2, got {self.r}")
        if self.k_min < 1:
            raise ValueError(f"k_min must be at least 1, got {self.k_min}")
        self.sin_beta_k(self.k_min)

    def delta_k(self, k: int) -> float:
        return self.c / (1.0 + (self.sigma * k) ** 2)

    def sin_beta_k(self, k: int) -> float:
        s = self.C0 * self.delta_k(k) ** (self.r - 1) * self.epsilon
        if s >= 1.0:
            raise ValueError(f"sin beta_{k} = {s:.6g} >= 1: constants too large")
        return s

    def beta_k(self, k: int) -> float:
        return math.asin(self.sin_beta_k(k))

    def twist(self, k: int, center, center_plane) -> TwistPerturbation:
        return build_twist(center, self.delta_k(k), self.beta_k(k), self.r, center_plane)

    def to_dict(self) -> dict:
        return {"c": self.c, "sigma": self.sigma, "epsilon": self.epsilon, "r": self.r,
                "C0": self.C0, "k_min": self.k_min}


def schedule(c: float, sigma: float = 4.0, epsilon: float = 0.5, r: int = 2, C0: float = 1.0,
             k_min: int = 1) -> PerturbationSchedule:
    return PerturbationSchedule(float(c), float(sigma), float(epsilon), int(r), float(C0), int(k_min))


class _ZeroSchedule:
    """A schedule with beta identically 0 (for null-case runs)."""

    def __init__(self, base: PerturbationSchedule):
        self.base = base
        self.sigma = base.sigma
        self.r = base.r

    def delta_k(self, k):
        return self.base.delta_k(k)

    def sin_beta_k(self, k):
        return 0.0

    def beta_k(self, k):
        return 0.0

    def twist(self, k, center, center_plane):
        return build_twist(center, self.delta_k(k), 0.0, self.r, center_plane)

    def to_dict(self):
        return dict(self.base.to_dict(), beta="zero")


def zero_schedule(base: PerturbationSchedule) -> _ZeroSchedule:
    return _ZeroSchedule(base)


# ---------------------------------------------------------------------------
# C^r size


def cr_size_estimate(twist: TwistPerturbation, r: int, samples: int = 128, seed: int = 0) -> float:
    """max over sampled points in the ball and multi-indices |i| <= r of
    |d^i (T - id)|, by nested central differences with h = max(1e-3 delta, 1e-6).

    Raises:
        ValueError: for r > 4 (finite-difference order limit).
    """
    if r > MAX_FD_ORDER:
        raise ValueError(f"finite-difference order limited to {MAX_FD_ORDER}, got r = {r}")
    if r < 0:
        raise ValueError(f"r must be non-negative, got {r}")
    if twist.beta == 0.0:
        return 0.0
    n = twist.dimension
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(samples, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = twist.delta * rng.random(samples)
    pts = dirs * radii[:, None]
    h = max(1e-3 * twist.delta, 1e-6)
    best = float(np.max(np.abs(twist.displacement(pts))))
    for order in range(1, r + 1):
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * order, indexing="ij")).reshape(order, -1).T
        weights = np.prod(signs, axis=1) / (2.0 * h) ** order
        for idx in combinations_with_replacement(range(n), order):
            acc = np.zeros((samples, n))
            for sgn, w in zip(signs, weights):
                shift = np.zeros(n)
                for s, i in zip(sgn, idx):
                    shift[i] += s * h
                acc += w * twist.displacement(pts + shift)
            best = max(best, float(np.max(np.abs(acc))))
    return best


# ---------------------------------------------------------------------------
# leaf tracking


def _push_frame(system: MapSystem, x, frame: np.ndarray, steps: int, backward: bool) -> np.ndarray:
    """Frame transported from f^{-steps}(x) (or f^{steps}(x) when backward)
    to x by the derivative, re-orthonormalized each step."""
    # one-sided orbit of x, then the derivative along it from the far end
    # back to x (never round-trip through f^{-m} o f^{m}, which loses x)
    orbit = system.orbit(x, steps, backward=not backward)[::-1]
    jacs = (system.jacobian_inverse_many(orbit[:-1]) if backward
            else system.jacobian_many(orbit[:-1]))
    q = frame.copy()
    for j in range(steps):
        q, _ = np.linalg.qr(jacs[j] @ q)
    return q


def center_angle_proxy(system: MapSystem, x, steps: int) -> float:
    """Largest principal angle between the reference center frame and the
    finite-time center estimate E^cs_m(x) cap E^cu_m(x) of system.

    E^cu is pushed forward from f^{-m}(x), E^cs backward from f^{m}(x),
    both seeded with the reference splitting.
    """
    s = system.exact_splitting
    if s is None:
        raise ValueError(f"{system.kind} system has no reference splitting")
    cu = _push_frame(system, x, np.hstack([s.center, s.unstable]), steps, backward=False)
    cs = _push_frame(system, x, np.hstack([s.stable, s.center]), steps, backward=True)
    null = linalg.null_space(np.hstack([cu, -cs]), rcond=1e-10)
    if null.shape[1] < 2:
        return float("nan")
    ec, _ = np.linalg.qr(cu @ null[:cu.shape[1], :2])
    return float(np.max(linalg.subspace_angles(ec, s.center)))


@dataclass(frozen=True)
class LeafTrackingReport:
    k: int
    nodes: tuple
    node_distances: np.ndarray
    angle_proxies: np.ndarray
    proxy_steps: int
    failures: tuple

    def rows(self) -> list[tuple[int, int, float, float]]:
        return [(self.k, i, float(d), float(a))
                for i, (d, a) in enumerate(zip(self.node_distances, self.angle_proxies))]

    def continued_path(self, leg_types) -> hol.SuPath:
        return hol.SuPath(self.nodes, leg_types)


def continue_path(map_fk: MapSystem, path_f: hol.SuPath) -> tuple[hol.SuPath, tuple]:
    """Path of map_fk with the leaf coordinates of path_f, built leg by leg
    from z_0 (leaf partners of the perturbed map, pulled back when needed)."""
    nodes = [as_point(path_f.nodes[0], map_fk.dimension)]
    failures = []
    for i, (a, b, kind) in enumerate(zip(path_f.nodes[:-1], path_f.nodes[1:], path_f.leg_types)):
        coef, _ = hol.leaf_coefficient(map_fk, a, b, kind)
        try:
            if np.array_equal(nodes[-1], a):
                # same start: the original node is the closed-form candidate
                nodes.append(hol._refine_partner(map_fk, a, as_point(b), coef, hol._leaf(map_fk, kind)))
            else:
                nodes.append(hol._partner(map_fk, nodes[-1], coef, kind))
        except (ValueError, FloatingPointError) as exc:
            failures.append((i + 1, str(exc)))
            nodes.append(as_point(b, map_fk.dimension))
    return hol.SuPath(tuple(nodes), path_f.leg_types), tuple(failures)


def leaf_tracking_report(map_f: MapSystem, map_fk: MapSystem, path_f: hol.SuPath, k: int,
                         sigma: float = 4.0) -> LeafTrackingReport:
    """Node continuation distances and center-angle proxies for one k.

    The angle proxy uses m = max(1, round(sigma k) - 1) steps on each side.
    """
    if map_f.base is None:
        raise ValueError("leaf tracking needs a product with a linear Anosov left factor")
    path_k, failures = continue_path(map_fk, path_f)
    dists = np.array([torus_distance(a, b) for a, b in zip(path_f.nodes, path_k.nodes)])
    m = max(1, int(round(sigma * k)) - 1)
    angles = np.array([center_angle_proxy(map_fk, z, m) for z in path_k.nodes])
    return LeafTrackingReport(int(k), path_k.nodes, dists, angles, m, failures)


@dataclass(frozen=True)
class ExponentialFit:
    rate: float | None        # fitted per-k factor, None when there is nothing to fit
    slope: float | None
    count: int
    identically_zero: bool


def fit_exponential(ks, values, floor: float = 0.0) -> ExponentialFit:
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > floor
    if not np.any(values > 0):
        return ExponentialFit(None, None, 0, True)
    if np.count_nonzero(keep) < 2:
        return ExponentialFit(None, None, int(np.count_nonzero(keep)), False)
    slope, _ = np.polyfit(ks[keep], np.log(values[keep]), 1)
    return ExponentialFit(float(math.exp(slope)), float(slope), int(np.count_nonzero(keep)), False)


def exactness_report(map_f: MapSystem, schedule_, k: int, center, center_plane,
                     outside_samples: int = 100_000, det_samples: int = 10_000,
                     seed: int = 0) -> dict:
    """Support, derivative-at-center and volume checks for the k-th map."""
    tw = schedule_.twist(k, center, center_plane)
    g = perturbed_system(map_f, tw)
    rng = np.random.default_rng(seed + k)
    pts = rng.random((outside_samples, map_f.dimension))
    d = np.linalg.norm(torus_offset(tw.center[None, :], pts), axis=1)
    out = pts[d >= tw.delta]
    identical = bool(np.array_equal(g.evaluate_many(out), map_f.evaluate_many(out)))
    a_beta = rotation_block(map_f.dimension, tw.beta, tw.center_plane)
    deriv = float(np.max(np.abs(g.jacobian(tw.center) - map_f.jacobian(tw.center) @ a_beta)))
    # half the determinant samples inside the ball, where the twist acts
    inner = tw.center + rng.uniform(-1, 1, (det_samples // 2, map_f.dimension)) * tw.delta / math.sqrt(map_f.dimension)
    sample = np.vstack([rng.random((det_samples - det_samples // 2, map_f.dimension)), as_point_rows(inner)])
    det = float(np.max(np.abs(np.linalg.det(g.jacobian_many(sample)) - 1.0)))
    return {"k": int(k), "delta": tw.delta, "beta": tw.beta, "outside_points": int(out.shape[0]),
            "outside_identical": identical, "derivative_at_center": deriv, "max_det_error": det}


def as_point_rows(xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    r = xs - np.floor(xs)
    r[r >= 1.0] = 0.0
    return r
