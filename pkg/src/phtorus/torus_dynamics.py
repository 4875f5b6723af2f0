"""Map families on the flat torus and the geometry they share.

Points are float arrays with coordinates in [0, 1).  The metric is flat,
so parallel transport between tangent spaces is the identity on
components and distances are minimized over lattice translates.

Families:

* linear symplectic automorphisms (hyperbolic ones via make_linear_anosov),
* the standard map (z, w) -> (z + w, w + lam sin(2 pi (z + w))),
* products, with the right factor designated as the center factor,
* perturbed maps f o T, built by the perturbation module.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy import linalg

from . import _kernels as K

HYPERBOLIC_GAP = 1e-9
MAX_DIMENSION = 8

TorusPoint = np.ndarray


def as_point(coords, dimension: int | None = None) -> TorusPoint:
    """Return coords as a float array reduced into [0, 1)."""
    x = np.array(coords, dtype=float).reshape(-1)
    if dimension is not None and x.shape[0] != dimension:
        raise ValueError(f"point has {x.shape[0]} coordinates, expected {dimension}")
    if x.shape[0] % 2:
        raise ValueError(f"torus dimension must be even, got {x.shape[0]}")
    r = x - np.floor(x)
    r[r >= 1.0] = 0.0
    return r


def torus_offset(a, b) -> np.ndarray:
    """Lattice-minimal displacement b - a, each component in [-1/2, 1/2].
    Broadcasts over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1:] != b.shape[-1:]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = b - a
    return d - np.rint(d)


def torus_distance(a, b) -> float:
    """Euclidean length of the lattice-minimal displacement."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = np.abs(b - a) % 1.0
    d = np.minimum(d, 1.0 - d)
    return float(np.sqrt(np.sum(d * d)))


@dataclass(frozen=True)
class TangentVector:
    base: TorusPoint
    components: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    def transport(self, target: TorusPoint) -> "TangentVector":
        # flat metric: parallel transport is the identity on components
        return TangentVector(np.asarray(target, dtype=float), np.array(self.components))


def symplectic_form(n: int) -> np.ndarray:
    """Sum of dx_{2i} ^ dx_{2i+1}: the form of products of 2-tori."""
    if n % 2:
        raise ValueError(f"symplectic form needs even dimension, got {n}")
    j = np.zeros((n, n))
    for i in range(0, n, 2):
        j[i, i + 1] = 1.0
        j[i + 1, i] = -1.0
    return j


@dataclass(frozen=True)
class ExactSplitting:
    """Invariant splitting E^s + E^c + E^u with frames constant in x.

    Every shipped family has a constant splitting (linear factors and
    coordinate center planes), so the frames are stored as matrices and the
    frame functions ignore their argument.
    """

    stable: np.ndarray
    center: np.ndarray
    unstable: np.ndarray

    def stable_frame(self, x=None) -> np.ndarray:
        return self.stable

    def center_frame(self, x=None) -> np.ndarray:
        return self.center

    def unstable_frame(self, x=None) -> np.ndarray:
        return self.unstable

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.stable.shape[1], self.center.shape[1], self.unstable.shape[1]

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(np.hstack([self.stable, self.center, self.unstable])))

    def frames(self) -> dict[str, np.ndarray]:
        return {"stable": self.stable, "center": self.center, "unstable": self.unstable}


@dataclass(frozen=True)
class LinearBase:
    """Leaf data of a linear Anosov factor on the first coordinates.

    Strong leaves are affine: W^s(x) = x + E^s.  Offsets along a leaf move
    by the restriction of the matrix to the (invariant) subspace.
    """

    matrix: np.ndarray
    dim: int
    stable: np.ndarray
    unstable: np.ndarray
    stable_restriction: np.ndarray
    unstable_restriction: np.ndarray

    @property
    def stable_rate(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.stable_restriction))))

    @property
    def unstable_rate(self) -> float:
        return float(np.min(np.abs(np.linalg.eigvals(self.unstable_restriction))))

    def leaf_basis(self, kind: str) -> np.ndarray:
        if kind == "stable":
            return self.stable
        if kind == "unstable":
            return self.unstable
        raise ValueError(f"leaf kind must be 'stable' or 'unstable', got {kind!r}")

    def restriction(self, kind: str, backward: bool) -> np.ndarray:
        r = self.stable_restriction if kind == "stable" else self.unstable_restriction
        return np.linalg.inv(r) if backward else r

    def decompose(self, offset: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of a base offset in the (E^s, E^u) basis."""
        basis = np.hstack([self.stable, self.unstable])
        coef = np.linalg.solve(basis, offset)
        s = self.stable.shape[1]
        return coef[:s], coef[s:]


@dataclass(frozen=True)
class Program:
    blocks: np.ndarray
    mats: np.ndarray
    imats: np.ndarray
    lams: np.ndarray
    tw_cen: np.ndarray
    tw_par: np.ndarray
    tw_coef: np.ndarray

    def as_tuple(self):
        return (self.blocks, self.mats, self.imats, self.lams,
                self.tw_cen, self.tw_par, self.tw_coef)


N_COEF = 24


def _empty_twists(n: int):
    return np.zeros((0, n)), np.zeros((0, 4)), np.zeros((0, N_COEF))


def _program(n: int, blocks: list[tuple[int, int, int, np.ndarray | None, float]]):
    nb = len(blocks)
    b = np.zeros((nb, 3), dtype=np.int64)
    mats = np.zeros((nb, n, n))
    imats = np.zeros((nb, n, n))
    lams = np.zeros(nb)
    for i, (kind, off, dim, mat, lam) in enumerate(blocks):
        b[i] = (kind, off, dim)
        if mat is not None:
            mats[i, :dim, :dim] = mat
            imats[i, :dim, :dim] = np.rint(np.linalg.inv(mat))
        lams[i] = lam
    return Program(b, mats, imats, lams, *_empty_twists(n))


class MapSystem:
    """An invertible closed-form map of the torus with its derivative.

    Instances are immutable after construction and safe to share.
    """

    def __init__(self, kind: str, dimension: int, program: Program,
                 splitting: ExactSplitting | None = None,
                 base: LinearBase | None = None,
                 center_plane: tuple[int, int] | None = None,
                 params: dict | None = None,
                 factors: tuple["MapSystem", ...] = (),
                 twists: tuple = ()):
        if dimension % 2:
            raise ValueError(f"dimension must be even, got {dimension}")
        if dimension > MAX_DIMENSION:
            raise ValueError(f"dimension {dimension} exceeds supported maximum {MAX_DIMENSION}")
        self.kind = kind
        self.dimension = dimension
        self.program = program
        self.exact_splitting = splitting
        self.base = base
        self.center_plane = center_plane
        self.params = dict(params or {})
        self.factors = factors
        self.twists = twists
        self._prog = program.as_tuple()

    def __repr__(self) -> str:
        return f"MapSystem(kind={self.kind!r}, dimension={self.dimension}, params={self.params})"

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise ValueError(f"expected {self.dimension} coordinates, got {x.shape[-1]}")
        return x

    def evaluate(self, x) -> TorusPoint:
        x = self._check(x)
        return K.evaluate_many(x.reshape(1, -1), self._prog, False)[0]

    def invert(self, y) -> TorusPoint:
        y = self._check(y)
        return K.evaluate_many(y.reshape(1, -1), self._prog, True)[0]

    def jacobian(self, x) -> np.ndarray:
        x = self._check(x)
        return K.jacobian_many(x.reshape(1, -1), self._prog, False)[0]

    def jacobian_inverse(self, y) -> np.ndarray:
        """Derivative of the inverse map at y, i.e. (Df at f^{-1}(y))^{-1}."""
        y = self._check(y)
        return K.jacobian_many(y.reshape(1, -1), self._prog, True)[0]

    def evaluate_many(self, xs) -> np.ndarray:
        xs = np.ascontiguousarray(self._check(xs).reshape(-1, self.dimension))
        return K.evaluate_many(xs, self._prog, False)

    def invert_many(self, ys) -> np.ndarray:
        ys = np.ascontiguousarray(self._check(ys).reshape(-1, self.dimension))
        return K.evaluate_many(ys, self._prog, True)

    def jacobian_many(self, xs) -> np.ndarray:
        xs = np.ascontiguousarray(self._check(xs).reshape(-1, self.dimension))
        return K.jacobian_many(xs, self._prog, False)

    def jacobian_inverse_many(self, ys) -> np.ndarray:
        ys = np.ascontiguousarray(self._check(ys).reshape(-1, self.dimension))
        return K.jacobian_many(ys, self._prog, True)

    def orbit(self, x0, steps: int, backward: bool = False) -> np.ndarray:
        """Rows f^j(x0) for j = 0..steps (or f^{-j} when backward)."""
        x0 = np.ascontiguousarray(self._check(x0), dtype=float)
        return K.orbit(x0, int(steps), self._prog, bool(backward))

    def iterate(self, x, steps: int) -> TorusPoint:
        """f^steps(x); negative steps iterate the inverse."""
        return self.orbit(x, abs(steps), backward=steps < 0)[-1]

    def center_block(self, x) -> np.ndarray:
        """2x2 matrix of Df(x) restricted to E^c in the splitting's frames."""
        c = self._require_center()
        return c.T @ self.jacobian(x) @ c

    def center_block_inverse(self, y) -> np.ndarray:
        c = self._require_center()
        return c.T @ self.jacobian_inverse(y) @ c

    def _require_center(self) -> np.ndarray:
        if self.exact_splitting is None or self.exact_splitting.dims[1] != 2:
            raise ValueError(f"{self.kind} system has no exact splitting with a 2-dimensional center")
        return self.exact_splitting.center

    def random_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return rng.random((count, self.dimension))

    def describe(self) -> dict:
        """Serializable description (used in reports and configs)."""
        out = {"kind": self.kind}
        out.update(self.params)
        if self.factors:
            out["left"] = self.factors[0].describe()
            out["right"] = self.factors[1].describe()
        return out


# ---------------------------------------------------------------------------
# factories


def _integer_matrix(matrix) -> np.ndarray:
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    af = a.astype(float)
    if not np.all(np.isfinite(af)) or not np.array_equal(af, np.rint(af)):
        raise ValueError("matrix is not integer: every entry must be an integer")
    return np.rint(af).astype(np.int64)


def _validate_symplectic(a: np.ndarray) -> None:
    n = a.shape[0]
    if n % 2:
        raise ValueError(f"matrix dimension must be even, got {n}")
    det = int(round(np.linalg.det(a.astype(float))))
    if abs(det) != 1:
        raise ValueError(f"matrix is not unimodular: determinant {det} is not +-1")
    j = symplectic_form(n).astype(np.int64)
    if not np.array_equal(a.T @ j @ a, j):
        raise ValueError("matrix is not symplectic for the standard form sum dx_2i ^ dx_2i+1")


def _invariant_subspace(a: np.ndarray, inside: bool) -> np.ndarray:
    """Orthonormal basis of the sum of generalized eigenspaces with
    |mu| < 1 (inside) or |mu| > 1, read off a sorted real Schur form."""
    sort = "iuc" if inside else "ouc"
    _, z, sdim = linalg.schur(a.astype(float), output="real", sort=sort)
    basis = z[:, :sdim]
    # sign convention: first non-negligible entry of each column positive
    for j in range(basis.shape[1]):
        col = basis[:, j]
        k = int(np.argmax(np.abs(col) > 1e-12))
        if col[k] < 0:
            basis[:, j] = -col
    return basis


def make_linear_automorphism(matrix) -> MapSystem:
    """Torus automorphism of an integer symplectic matrix, without any
    hyperbolicity requirement.  The whole tangent space is declared center
    when the dimension is 2 (e.g. an isometric center factor)."""
    a = _integer_matrix(matrix)
    _validate_symplectic(a)
    n = a.shape[0]
    prog = _program(n, [(K.LINEAR, 0, n, a.astype(float), 0.0)])
    splitting = None
    if n == 2:
        splitting = ExactSplitting(np.zeros((2, 0)), np.eye(2), np.zeros((2, 0)))
    return MapSystem("linear", n, prog, splitting, center_plane=(0, 1) if n == 2 else None,
                     params={"matrix": a.tolist()})


def make_linear_anosov(matrix) -> MapSystem:
    """Hyperbolic integer symplectic automorphism with its exact splitting.

    Raises:
        ValueError: naming the violated condition (integer, unimodular,
            symplectic, hyperbolic).
    """
    a = _integer_matrix(matrix)
    _validate_symplectic(a)
    n = a.shape[0]
    moduli = np.abs(np.linalg.eigvals(a.astype(float)))
    if np.any(np.abs(moduli - 1.0) < HYPERBOLIC_GAP):
        raise ValueError(f"matrix is not hyperbolic: eigenvalue moduli {np.sort(moduli)} touch the unit circle")
    es = _invariant_subspace(a, inside=True)
    eu = _invariant_subspace(a, inside=False)
    af = a.astype(float)
    base = LinearBase(
        matrix=af, dim=n, stable=es, unstable=eu,
        stable_restriction=np.linalg.pinv(es) @ af @ es,
        unstable_restriction=np.linalg.pinv(eu) @ af @ eu,
    )
    prog = _program(n, [(K.LINEAR, 0, n, af, 0.0)])
    splitting = ExactSplitting(es, np.zeros((n, 0)), eu)
    return MapSystem("linear_anosov", n, prog, splitting, base=base,
                     params={"matrix": a.tolist()})


@dataclass(frozen=True)
class StandardMapParams:
    lam: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.lam):
            raise ValueError(f"standard map parameter must be finite, got {self.lam}")


def make_standard_map(params: StandardMapParams | float) -> MapSystem:
    lam = params.lam if isinstance(params, StandardMapParams) else float(params)
    StandardMapParams(lam)
    prog = _program(2, [(K.STANDARD, 0, 2, None, lam)])
    splitting = ExactSplitting(np.zeros((2, 0)), np.eye(2), np.zeros((2, 0)))
    return MapSystem("standard_map", 2, prog, splitting, center_plane=(0, 1),
                     params={"lambda": lam})


def make_product(left: MapSystem, right: MapSystem) -> MapSystem:
    """left x right, the right factor being the center factor."""
    if left.twists or right.twists:
        raise ValueError("products of perturbed systems are not supported; perturb the product instead")
    nl, nr = left.dimension, right.dimension
    n = nl + nr
    blocks = []
    for sys_, shift in ((left, 0), (right, nl)):
        p = sys_.program
        for b in range(p.blocks.shape[0]):
            kind, off, dim = (int(v) for v in p.blocks[b])
            mat = p.mats[b, :dim, :dim] if kind == K.LINEAR else None
            blocks.append((kind, off + shift, dim, mat, float(p.lams[b])))
    prog = _program(n, blocks)

    splitting = None
    if left.exact_splitting is not None:
        ls = left.exact_splitting

        def pad(mat, top):
            out = np.zeros((n, mat.shape[1]))
            if top:
                out[:nl] = mat
            else:
                out[nl:] = mat
            return out

        center_right = np.zeros((n, nr))
        center_right[nl:] = np.eye(nr)
        center = np.hstack([pad(ls.center, True), center_right])
        splitting = ExactSplitting(pad(ls.stable, True), center, pad(ls.unstable, True))
    base = left.base if left.kind == "linear_anosov" else None
    plane = (nl, nl + 1) if nr == 2 else None
    return MapSystem("product", n, prog, splitting, base=base, center_plane=plane,
                     factors=(left, right))


def with_twists(system: MapSystem, centers, pars, coefs, twist_records) -> MapSystem:
    """system precomposed with extra twists (applied before the existing
    ones).  Used by the perturbation module; the splitting of the
    unperturbed system is kept as a proxy."""
    p = system.program
    prog = Program(p.blocks, p.mats, p.imats, p.lams,
                   np.vstack([np.atleast_2d(centers), p.tw_cen]),
                   np.vstack([np.atleast_2d(pars), p.tw_par]),
                   np.vstack([np.atleast_2d(coefs), p.tw_coef]))
    return MapSystem("perturbed", system.dimension, prog, system.exact_splitting,
                     base=system.base, center_plane=system.center_plane,
                     params=dict(system.params), factors=system.factors,
                     twists=tuple(twist_records) + system.twists)


def splitting_invariance_angles(system: MapSystem, x) -> dict[str, float]:
    """Largest principal angle between Df(x) E^*(x) and E^*(f(x))."""
    s = system.exact_splitting
    if s is None:
        raise ValueError(f"{system.kind} system has no exact splitting")
    jac = system.jacobian(x)
    fx = system.evaluate(x)
    out = {}
    for name, frame in s.frames().items():
        if frame.shape[1] == 0:
            continue
        target = getattr(s, f"{name}_frame")(fx)
        out[name] = float(np.max(linalg.subspace_angles(jac @ frame, target)))
    return out


def invariant_report(system: MapSystem, count: int = 10_000, seed: int = 0) -> dict[str, float]:
    """Worst residuals of the MapSystem invariants on random points."""
    rng = np.random.default_rng(seed)
    xs = system.random_points(count, rng)
    ys = system.evaluate_many(xs)
    back = system.invert_many(ys)
    d = np.abs(back - xs) % 1.0
    d = np.minimum(d, 1.0 - d)
    roundtrip = float(np.max(np.sqrt(np.sum(d * d, axis=1))))
    jac = system.jacobian_many(xs)
    det = float(np.max(np.abs(np.linalg.det(jac) - 1.0)))
    jinv = system.jacobian_inverse_many(ys)
    eye = np.eye(system.dimension)
    inverse = float(np.max(np.abs(np.einsum("kij,kjl->kil", jinv, jac) - eye)))
    return {"roundtrip": roundtrip, "determinant": det, "inverse_jacobian": inverse}
