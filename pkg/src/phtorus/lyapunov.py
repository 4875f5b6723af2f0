"""Lyapunov spectra by QR re-orthonormalized tangent propagation.

The frame is pushed by the Jacobian, re-orthonormalized by modified
Gram-Schmidt every ``qr_period`` steps, and the logs of the diagonal of R
are accumulated.  Standard errors come from batching the accumulated logs
into equal blocks of iterates.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import _kernels as K
from .torus_dynamics import MapSystem, as_point

BURN_IN = 1000
N_BLOCKS = 20


class NonFiniteOrbitError(ArithmeticError):
    """Raised when the orbit or the tangent frame stops being finite.
    ``iterate`` counts from x0, burn-in included."""

    def __init__(self, iterate: int):
        super().__init__(f"non-finite value at iterate {iterate}")
        self.iterate = iterate


@dataclass(frozen=True)
class SpectrumResult:
    exponents: np.ndarray
    iterations: int
    qr_period: int
    seed_point: np.ndarray
    convergence_series: np.ndarray  # rows: (iteration, exponent_1, ..., exponent_k)
    standard_errors: np.ndarray

    def to_rows(self) -> list[list[float]]:
        return [list(map(float, r)) for r in self.convergence_series]


def _checkpoints(n_iter: int) -> np.ndarray:
    """Four geometric checkpoints per decade from 10 iterates on, plus n_iter."""
    pts = set()
    k = 4
    while True:
        v = int(round(10 ** (k / 4)))
        if v >= n_iter:
            break
        pts.add(v)
        k += 1
    pts.add(n_iter)
    return np.array(sorted(pts), dtype=np.int64)


def _run(system: MapSystem, x0, frame, proj, n_iter, qr_period, burn_in):
    if n_iter < 1000:
        raise ValueError(f"n_iter must be at least 1000, got {n_iter}")
    if not 1 <= qr_period <= 20:
        raise ValueError(f"qr_period must be in [1, 20], got {qr_period}")
    x0 = as_point(x0, system.dimension)
    cps = _checkpoints(n_iter)
    sums, block_sums, cp_vals, fail = K.tangent_spectrum(
        x0, system._prog, np.ascontiguousarray(frame, dtype=float),
        np.ascontiguousarray(proj, dtype=float), np.ascontiguousarray(proj, dtype=float),
        int(n_iter), int(qr_period), int(burn_in), cps, N_BLOCKS)
    if fail >= 0:
        raise NonFiniteOrbitError(int(fail))
    exps = sums / n_iter
    order = np.argsort(-exps, kind="stable")
    block_len = n_iter // N_BLOCKS
    lengths = np.full(N_BLOCKS, block_len, dtype=float)
    lengths[-1] = n_iter - block_len * (N_BLOCKS - 1)
    means = block_sums / lengths[:, None]
    se = means.std(axis=0, ddof=1) / np.sqrt(N_BLOCKS)
    series = np.column_stack([cps.astype(float), np.sort(cp_vals, axis=1)[:, ::-1]])
    return SpectrumResult(exps[order], int(n_iter), int(qr_period), x0, series, se[order])


def full_spectrum(system: MapSystem, x0, n_iter: int = 1_000_000, qr_period: int = 1,
                  frame: np.ndarray | None = None, burn_in: int = BURN_IN) -> SpectrumResult:
    """All Lyapunov exponents along the orbit of x0, sorted descending.

    Args:
        frame: initial orthonormal frame (identity by default).

    Raises:
        NonFiniteOrbitError: naming the iterate where the orbit blew up.
    """
    n = system.dimension
    frame = np.eye(n) if frame is None else np.asarray(frame, dtype=float)
    return _run(system, x0, frame, np.eye(n), n_iter, qr_period, burn_in)


def center_spectrum(system: MapSystem, x0, n_iter: int = 1_000_000, qr_period: int = 1,
                    burn_in: int = BURN_IN) -> SpectrumResult:
    """Exponents of the center cocycle (2-frame kept inside E^c)."""
    c = system._require_center()
    return _run(system, x0, np.eye(2), c, n_iter, qr_period, burn_in)


def center_exponents(system: MapSystem, x0, n_iter: int = 1_000_000) -> tuple[float, float]:
    res = center_spectrum(system, x0, n_iter)
    return float(res.exponents[0]), float(res.exponents[1])


def symmetry_residual(spectrum) -> float:
    """max_j |lambda_j + lambda_{n+1-j}| for a descending spectrum."""
    exps = spectrum.exponents if isinstance(spectrum, SpectrumResult) else spectrum
    exps = np.asarray(exps, dtype=float)
    if exps.shape[0] % 2:
        raise ValueError(f"spectrum length must be even, got {exps.shape[0]}")
    return float(np.max(np.abs(exps + exps[::-1])))


@dataclass(frozen=True)
class SeedEnsemble:
    """Top center exponent from several random seed points."""

    seeds: tuple
    seed_points: np.ndarray
    exponents: np.ndarray          # (seeds, 2)
    standard_errors: np.ndarray

    @property
    def multimodal(self) -> bool:
        """True when two runs disagree by more than twice their combined
        standard error (orbits in different ergodic components)."""
        top, se = self.exponents[:, 0], self.standard_errors[:, 0]
        for i in range(top.size):
            for j in range(i + 1, top.size):
                if abs(top[i] - top[j]) > 2.0 * math.hypot(se[i], se[j]):
                    return True
        return False


def center_exponent_ensemble(system: MapSystem, seeds, n_iter: int = 100_000) -> SeedEnsemble:
    seeds = tuple(int(s) for s in seeds)
    pts, exps, ses = [], [], []
    for s in seeds:
        x0 = np.random.default_rng(s).random(system.dimension)
        res = center_spectrum(system, x0, n_iter)
        pts.append(x0)
        exps.append(res.exponents)
        ses.append(res.standard_errors)
    return SeedEnsemble(seeds, np.array(pts), np.array(exps), np.array(ses))
