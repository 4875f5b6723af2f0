"""Sampled rate functions and the pinching / bunching inequalities.

For each sample point the derivative is restricted to the three bundles in
orthonormal bundle coordinates and its extreme singular values give

    E^s:  chi = s_min,         nu = s_max
    E^c:  gamma = s_min,       gamma_hat = 1 / s_max
    E^u:  nu_hat = 1 / s_min,  chi_hat = 1 / s_max

so every rate is below one for a partially hyperbolic map.  Inequalities
are strict: a margin within STRICTNESS of zero is "marginal", not a pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .torus_dynamics import MapSystem, torus_offset

STRICTNESS = 1e-9
ALPHA_LO = 1e-4
ALPHA_HI = 10.0
ALPHA_TOL = 1e-4


@dataclass(frozen=True)
class RateEstimate:
    """Rates at a batch of sample points (one entry per point)."""

    chi: np.ndarray
    nu: np.ndarray
    gamma: np.ndarray
    gamma_hat: np.ndarray
    nu_hat: np.ndarray
    chi_hat: np.ndarray
    points: np.ndarray
    in_proxy_region: np.ndarray = field(default=None)

    @property
    def sample_count(self) -> int:
        return int(self.chi.shape[0])

    def __len__(self) -> int:
        return self.sample_count

    def at(self, i: int) -> dict[str, float]:
        return {k: float(getattr(self, k)[i])
                for k in ("chi", "nu", "gamma", "gamma_hat", "nu_hat", "chi_hat")}

    def extremes(self) -> dict[str, tuple[float, float]]:
        return {k: (float(getattr(self, k).min()), float(getattr(self, k).max()))
                for k in ("chi", "nu", "gamma", "gamma_hat", "nu_hat", "chi_hat")}


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    status: str  # "pass", "marginal" or "fail"
    margins: dict[str, float]

    @property
    def worst_margin(self) -> float:
        return min(self.margins.values())

    def __bool__(self) -> bool:
        return self.passed


@dataclass(frozen=True)
class AlphaWindow:
    pinching_alpha_max: float | None
    bunching_alpha_min: float | None
    bunching_alpha_max: float | None


@dataclass(frozen=True)
class AuditReport:
    ph_ok: bool
    pinching_alpha_max: float | None
    bunching_alpha_min: float | None
    bunching_alpha_max: float | None
    center_bunched: bool
    worst_margins: dict[str, float]
    sample_count: int
    proxy_region_samples: int
    rate_extremes: dict[str, tuple[float, float]]

    def to_dict(self) -> dict:
        return {
            "ph_ok": self.ph_ok,
            "pinching_alpha_max": self.pinching_alpha_max,
            "bunching_alpha_min": self.bunching_alpha_min,
            "bunching_alpha_max": self.bunching_alpha_max,
            "center_bunched": self.center_bunched,
            "worst_margins": dict(self.worst_margins),
            "sample_count": self.sample_count,
            "proxy_region_samples": self.proxy_region_samples,
            "rate_extremes": {k: list(v) for k, v in self.rate_extremes.items()},
            "strictness": STRICTNESS,
        }


def sample_points(system: MapSystem, orbit_points: int = 10_000, uniform_points: int = 1_000,
                  seed: int = 0) -> np.ndarray:
    """One orbit from a random seed point plus independent uniform points."""
    rng = np.random.default_rng(seed)
    x0 = rng.random(system.dimension)
    pts = [system.orbit(x0, orbit_points - 1)] if orbit_points > 0 else []
    if uniform_points > 0:
        pts.append(rng.random((uniform_points, system.dimension)))
    return np.vstack(pts)


def _bundle_svals(jacs: np.ndarray, frame: np.ndarray) -> np.ndarray:
    restricted = np.einsum("ia,kij,jb->kab", frame, jacs, frame)
    return np.linalg.svd(restricted, compute_uv=False)


def _in_twist_balls(system: MapSystem, pts: np.ndarray) -> np.ndarray:
    inside = np.zeros(pts.shape[0], dtype=bool)
    for tw in system.twists:
        d = np.linalg.norm(torus_offset(np.asarray(tw.center)[None, :], pts), axis=1)
        inside |= d < tw.delta
    return inside


def estimate_rates(system: MapSystem, orbit_sample) -> RateEstimate:
    """Rates at every point of orbit_sample (an (m, n) array or list of points).

    For perturbed maps the unperturbed splitting serves as a proxy; points
    inside a twist ball are flagged in ``in_proxy_region``.
    """
    s = system.exact_splitting
    if s is None:
        raise ValueError(f"{system.kind} system has no exact splitting")
    ds, dc, du = s.dims
    if ds == 0 or du == 0 or dc != 2:
        raise ValueError(f"rate estimation needs dims (s>0, c=2, u>0), got {(ds, dc, du)}")
    pts = np.asarray(orbit_sample, dtype=float).reshape(-1, system.dimension)
    if pts.shape[0] == 0:
        raise ValueError("empty sample")
    jacs = system.jacobian_many(pts)
    ss = _bundle_svals(jacs, s.stable)
    sc = _bundle_svals(jacs, s.center)
    su = _bundle_svals(jacs, s.unstable)
    return RateEstimate(
        chi=ss[:, -1], nu=ss[:, 0],
        gamma=sc[:, -1], gamma_hat=1.0 / sc[:, 0],
        nu_hat=1.0 / su[:, -1], chi_hat=1.0 / su[:, 0],
        points=pts, in_proxy_region=_in_twist_balls(system, pts),
    )


def _concat(rates) -> RateEstimate:
    if isinstance(rates, RateEstimate):
        r = rates
    else:
        rates = list(rates)
        if not rates:
            raise ValueError("empty sample")
        r = RateEstimate(*(np.concatenate([getattr(x, k) for x in rates])
                           for k in ("chi", "nu", "gamma", "gamma_hat", "nu_hat", "chi_hat",
                                     "points", "in_proxy_region")))
    if r.sample_count == 0:
        raise ValueError("empty sample")
    return r


def _judge(margins: dict[str, float]) -> CheckResult:
    worst = min(margins.values())
    if worst > STRICTNESS:
        status = "pass"
    elif worst >= -STRICTNESS:
        status = "marginal"
    else:
        status = "fail"
    return CheckResult(status == "pass", status, margins)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return alpha


def check_partial_hyperbolicity(rates) -> CheckResult:
    r = _concat(rates)
    return _judge({
        "nu<gamma": float(np.min(r.gamma - r.nu)),
        "nu_hat<gamma_hat": float(np.min(r.gamma_hat - r.nu_hat)),
        "nu<1": float(np.min(1.0 - r.nu)),
        "nu_hat<1": float(np.min(1.0 - r.nu_hat)),
    })


def check_pinching(rates, alpha: float) -> CheckResult:
    """All four pinching inequalities (direct and crossed), pointwise."""
    a = _check_alpha(alpha)
    r = _concat(rates)
    return _judge({
        "nu<gamma*chi^a": float(np.min(r.gamma * r.chi ** a - r.nu)),
        "nu_hat<gamma_hat*chi_hat^a": float(np.min(r.gamma_hat * r.chi_hat ** a - r.nu_hat)),
        "nu<gamma*chi_hat^a": float(np.min(r.gamma * r.chi_hat ** a - r.nu)),
        "nu_hat<gamma_hat*chi^a": float(np.min(r.gamma_hat * r.chi ** a - r.nu_hat)),
    })


def check_bunching(rates, alpha: float) -> CheckResult:
    a = _check_alpha(alpha)
    r = _concat(rates)
    gg = r.gamma * r.gamma_hat
    return _judge({
        "nu^a<gamma*gamma_hat": float(np.min(gg - r.nu ** a)),
        "nu_hat^a<gamma*gamma_hat": float(np.min(gg - r.nu_hat ** a)),
    })


def check_center_bunching(rates) -> CheckResult:
    r = _concat(rates)
    gg = r.gamma * r.gamma_hat
    return _judge({
        "nu<gamma*gamma_hat": float(np.min(gg - r.nu)),
        "nu_hat<gamma*gamma_hat": float(np.min(gg - r.nu_hat)),
    })


def _bisect(passes, lo: float, hi: float, want_largest: bool) -> float:
    # invariant: passes(lo) != passes(hi); returns the passing endpoint
    while hi - lo > ALPHA_TOL:
        mid = 0.5 * (lo + hi)
        if passes(mid) == want_largest:
            lo = mid
        else:
            hi = mid
    return lo if want_largest else hi


def max_admissible_alpha(rates) -> AlphaWindow:
    """Alpha window over [1e-4, 10] found by bisection to 1e-4.

    pinching_alpha_max is the largest alpha passing check_pinching.
    bunching_alpha_min is the smallest alpha passing check_bunching (the
    binding constraint) and bunching_alpha_max the largest, 10 when the
    check passes at the cap.

    Raises:
        ValueError: when the sample is not partially hyperbolic.
    """
    r = _concat(rates)
    ph = check_partial_hyperbolicity(r)
    if not ph.passed:
        raise ValueError(f"partial hyperbolicity fails (status {ph.status}, margins {ph.margins})")

    def pin(a):
        return check_pinching(r, a).passed

    def bun(a):
        return check_bunching(r, a).passed

    if pin(ALPHA_HI):
        p_max = ALPHA_HI
    elif not pin(ALPHA_LO):
        p_max = None
    else:
        p_max = _bisect(pin, ALPHA_LO, ALPHA_HI, want_largest=True)

    lo_ok, hi_ok = bun(ALPHA_LO), bun(ALPHA_HI)
    if lo_ok:
        b_min = ALPHA_LO
    elif hi_ok:
        b_min = _bisect(bun, ALPHA_LO, ALPHA_HI, want_largest=False)
    else:
        b_min = None
    if hi_ok:
        b_max = ALPHA_HI
    elif lo_ok:
        b_max = _bisect(bun, ALPHA_LO, ALPHA_HI, want_largest=True)
    else:
        b_max = None
    return AlphaWindow(p_max, b_min, b_max)


def audit(system: MapSystem, orbit_points: int = 10_000, uniform_points: int = 1_000,
          seed: int = 0) -> AuditReport:
    rates = estimate_rates(system, sample_points(system, orbit_points, uniform_points, seed))
    ph = check_partial_hyperbolicity(rates)
    cb = check_center_bunching(rates)
    margins = {f"ph:{k}": v for k, v in ph.margins.items()}
    margins.update({f"center_bunching:{k}": v for k, v in cb.margins.items()})
    window = AlphaWindow(None, None, None)
    if ph.passed:
        window = max_admissible_alpha(rates)
        if window.pinching_alpha_max is not None:
            margins.update({f"pinching@{window.pinching_alpha_max:.4g}:{k}": v for k, v in
                            check_pinching(rates, window.pinching_alpha_max).margins.items()})
        if window.bunching_alpha_min is not None:
            margins.update({f"bunching@{window.bunching_alpha_min:.4g}:{k}": v for k, v in
                            check_bunching(rates, window.bunching_alpha_min).margins.items()})
    return AuditReport(
        ph_ok=ph.passed,
        pinching_alpha_max=window.pinching_alpha_max,
        bunching_alpha_min=window.bunching_alpha_min,
        bunching_alpha_max=window.bunching_alpha_max,
        center_bunched=cb.passed,
        worst_margins=margins,
        sample_count=rates.sample_count,
        proxy_region_samples=int(np.count_nonzero(rates.in_proxy_region)),
        rate_extremes=rates.extremes(),
    )
