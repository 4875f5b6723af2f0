"""The six experiments.  Each returns results plus a list of checks; a check
carries its value, tolerance and sample size next to the pass flag."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .. import holonomy as hol
from .. import hyperbolicity_audit as au
from .. import lyapunov as ly
from .. import perturbation as pt
from .. import projective_lab as pl
from . import systems
from .config import ExperimentConfig


# acceptance criteria, as keys of the report's "criteria" map
CAT_SPECTRUM = "cat_spectrum"
PRODUCT_SPECTRUM = "product_spectrum_symmetry"
TWIST_EXACTNESS = "perturbation_exactness"
SCHEDULE_FORMULAS = "schedule_formulas"
HOLONOMY_SUITE = "holonomy_suite"
HOMOCLINIC_PATH = "homoclinic_path"
PINCHING_FIBERS = "pinching_fiber_dynamics"
SEPARATION_WITNESS = "separation_witness_trend"
TRANSPORT_METRIC = "transport_metric"
AUDIT_COHERENCE = "audit_coherence"


@dataclass
class Check:
    name: str
    passed: bool
    value: object
    tolerance: object
    samples: int
    criterion: str | None = None
    note: str = ""

    def to_dict(self) -> dict:
        d = {"name": self.name, "passed": bool(self.passed), "value": _plain(self.value),
             "tolerance": _plain(self.tolerance), "samples": int(self.samples)}
        if self.criterion is not None:
            d["criterion"] = self.criterion
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class Outcome:
    results: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)     # name -> (header, rows)
    plots: dict = field(default_factory=dict)      # name -> (table, columns, title, logscale)

    def check(self, *args, **kw) -> Check:
        c = Check(*args, **kw)
        self.checks.append(c)
        return c


def _plain(v):
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _pool_map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _point(system, given, rng):
    if given is None:
        return rng.random(system.dimension)
    x = np.asarray(given, dtype=float)
    if x.shape != (system.dimension,):
        raise ValueError(f"point has {x.size} coordinates, system dimension is {system.dimension}")
    return x


# ---------------------------------------------------------------------------
# spectrum


def run_spectrum(cfg: ExperimentConfig, threads: int) -> Outcome:
    p = cfg.params
    out = Outcome()
    system = systems.build(cfg.system)
    rng = np.random.default_rng(cfg.seed)
    x0 = _point(system, p["x0"], rng)
    t0 = time.perf_counter()
    res = ly.full_spectrum(system, x0, p["n_iter"], p["qr_period"], burn_in=p["burn_in"])
    elapsed = time.perf_counter() - t0
    crit = CAT_SPECTRUM if system.dimension == 2 else PRODUCT_SPECTRUM
    out.results.update(exponents=res.exponents, standard_errors=res.standard_errors,
                       seed_point=res.seed_point, iterations=res.iterations, seconds=elapsed)
    if p["expected"] is not None:
        exp = np.sort(np.asarray(p["expected"], dtype=float))[::-1]
        if exp.shape != res.exponents.shape:
            raise ValueError(f"expected {exp.size} exponents, system has {res.exponents.size}")
        err = float(np.max(np.abs(res.exponents - exp)))
        out.check("exponents", err < p["tol"], err, p["tol"], res.iterations, crit)
    if system.dimension % 2 == 0:
        sym = ly.symmetry_residual(res)
        out.results["symmetry_residual"] = sym
        out.check("symmetry_residual", sym < p["symmetry_tol"], sym, p["symmetry_tol"], res.iterations, crit)
    out.check("runtime", elapsed < p["max_runtime"], elapsed, p["max_runtime"], 1, crit)
    header = ["iteration"] + [f"lambda_{i + 1}" for i in range(res.exponents.size)]
    out.tables["convergence"] = (header, res.to_rows())
    out.plots["convergence"] = ("convergence", header, "Lyapunov exponent estimates", "x")
    return out


# ---------------------------------------------------------------------------
# audit


def run_audit(cfg: ExperimentConfig, threads: int) -> Outcome:
    p = cfg.params
    out = Outcome()
    specs = cfg.system if isinstance(cfg.system, list) else [cfg.system]
    alphas = np.geomspace(p["alpha_min"], p["alpha_max"], p["alpha_grid"])
    rows, reports = [], []

    def one(i):
        system = systems.build(specs[i])
        rates = au.estimate_rates(system, au.sample_points(system, p["orbit_points"], p["uniform_points"],
                                                           cfg.seed + i))
        pin = [au.check_pinching(rates, a) for a in alphas]
        bun = [au.check_bunching(rates, a) for a in alphas]
        rep = au.audit(system, p["orbit_points"], p["uniform_points"], cfg.seed + i)
        return rates.sample_count, pin, bun, rep

    for i, (n, pin, bun, rep) in enumerate(_pool_map(one, range(len(specs)), threads)):
        passes_p = [c.passed for c in pin]
        passes_b = [c.passed for c in bun]
        # monotone: once pinching fails it keeps failing as alpha grows; bunching the reverse
        mono = all(not (not a and b) for a, b in zip(passes_p, passes_p[1:]))
        anti = all(not (a and not b) for a, b in zip(passes_b, passes_b[1:]))
        out.check(f"system[{i}]:pinching_monotone", mono, sum(passes_p), "non-increasing", n, AUDIT_COHERENCE)
        out.check(f"system[{i}]:bunching_antitone", anti, sum(passes_b), "non-decreasing", n, AUDIT_COHERENCE)
        if i in p["isometric"]:
            out.check(f"system[{i}]:bunching_all_alpha", all(passes_b), sum(passes_b), len(alphas), n, AUDIT_COHERENCE)
        reports.append(rep.to_dict())
        rows.extend((i, float(a), c.worst_margin, b.worst_margin, int(c.passed), int(b.passed))
                    for a, c, b in zip(alphas, pin, bun))
    out.results["reports"] = reports
    header = ["system", "alpha", "pinching_margin", "bunching_margin", "pinching_pass", "bunching_pass"]
    out.tables["alpha_scan"] = (header, rows)
    out.plots["alpha_scan"] = ("alpha_scan", header[:4], "worst margins against alpha", "x")
    return out


# ---------------------------------------------------------------------------
# holonomy


def _left_factor(system):
    if system.factors:
        return system.factors[0]
    return system


def run_holonomy(cfg: ExperimentConfig, threads: int) -> Outcome:
    p = cfg.params
    out = Outcome()
    t0 = time.perf_counter()
    system = systems.build(cfg.system)
    plain = systems.build(systems.unperturbed(cfg.system))
    rng = np.random.default_rng(cfg.seed)
    tol = p["tol"]
    slice_ = p["center_slice"]
    if slice_ is None and system.twists:
        iu, iv = system.center_plane
        slice_ = [float(system.twists[0].center[iu]), float(system.twists[0].center[iv])]

    def sample_x():
        x = rng.random(system.dimension)
        if slice_ is not None:
            iu, iv = system.center_plane
            x[iu], x[iv] = slice_
        return x

    pairs = []
    for _ in range(p["n_pairs"]):
        x = sample_x()
        s = rng.uniform(-p["max_offset"], p["max_offset"])
        pairs.append((x, s))

    ident = max(float(np.linalg.norm(hol.stable_holonomy(system, x, x, tol).matrix - np.eye(2), 2))
                for x, _ in pairs)
    out.check("identity_at_coincident_points", ident == 0.0 or ident < p["identity_tol"], ident,
              p["identity_tol"], len(pairs), HOLONOMY_SUITE)

    histories, hmaps = [], []
    equiv, groupoid, failures = 0.0, 0.0, 0
    for x, s in pairs:
        y = hol.stable_partner(system, x, s)
        mid = hol.stable_partner(system, x, 0.5 * s)
        try:
            h = hol.stable_holonomy(system, x, y, tol)
            histories.append(h.history)
            hmaps.append(h)
            equiv = max(equiv, hol.equivariance_residual(system, x, y, "stable", tol))
            groupoid = max(groupoid, hol.groupoid_residual(system, x, mid, y, "stable", tol))
            yu = hol.unstable_partner(system, x, s)
            equiv = max(equiv, hol.equivariance_residual(system, x, yu, "unstable", tol))
        except hol.HolonomyConvergenceError:
            failures += 1
    out.check("holonomy_converged", failures == 0, failures, 0, len(pairs), HOLONOMY_SUITE)
    out.check("groupoid_subdivided_legs", groupoid < p["groupoid_tol"], groupoid, p["groupoid_tol"],
              len(pairs), HOLONOMY_SUITE)
    out.check("equivariance", equiv < 10 * tol, equiv, 10 * tol, 2 * len(pairs), HOLONOMY_SUITE)

    const = 0.0
    for x, s in pairs:
        h = hol.stable_holonomy(plain, x, hol.stable_partner(plain, x, s), tol)
        const = max(const, float(np.max(np.abs(h.matrix - np.eye(2)))))
    out.check("constant_center_identity", const < p["identity_tol"], const, p["identity_tol"], len(pairs), HOLONOMY_SUITE,
              note="holonomies of the system with every twist removed")

    audit = au.audit(system, seed=cfg.seed)
    alpha = audit.pinching_alpha_max
    nu_max = audit.rate_extremes["nu"][1]
    out.results["audit"] = audit.to_dict()
    decay_rows = [(i, n, float(v)) for i, h in enumerate(histories) for n, v in enumerate(h)]
    out.tables["decay"] = (["pair", "n", "increment"], decay_rows)
    out.plots["decay"] = ("decay", ["n", "increment"], "||A_{n+1} - A_n||", "y")
    try:
        fit = hol.fit_decay(histories)
    except ValueError as exc:
        out.check("decay_ratio", False, None, None, len(histories), HOLONOMY_SUITE, note=str(exc))
    else:
        if alpha is None:
            out.check("decay_ratio", False, fit.ratio, None, fit.count, HOLONOMY_SUITE, note="no admissible pinching alpha")
        else:
            vs = hol.fit_varsigma(fit.ratio, alpha, nu_max)
            bound = nu_max ** ((1.0 - vs.clipped) * alpha) + p["decay_margin"]
            out.results["decay"] = {"ratio": fit.ratio, "r_squared": fit.r_squared, "alpha": alpha,
                                    "nu_max": nu_max, "varsigma_raw": vs.raw, "varsigma": vs.clipped,
                                    "bound": bound}
            out.check("decay_ratio", fit.ratio <= bound and vs.raw < 1.0, fit.ratio, bound, fit.count, HOLONOMY_SUITE)
        if hmaps:
            try:
                nb = hol.fit_norm_constant(hmaps, alpha or 1.0)
                out.results["norm_constant"] = {"C_hat": nb.c_hat, "alpha": nb.alpha, "samples": nb.samples}
            except ValueError:
                pass

    elapsed = time.perf_counter() - t0
    out.check("runtime", elapsed < p["max_runtime"], elapsed, p["max_runtime"], 1, HOLONOMY_SUITE)

    # homoclinic path on the linear Anosov factor
    left = _left_factor(plain)
    m = p["lattice_vector"]
    path = hol.find_homoclinic_su_path(left, max(1, max(abs(v) for v in m)), lattice_vector=m)
    err = float(np.max(np.abs(path.z[:2] - np.asarray(p["homoclinic_z"]))))
    out.check("homoclinic_point", err < p["homoclinic_tol"], path.z[:2], p["homoclinic_tol"], 1, HOMOCLINIC_PATH)
    leaf = hol.verify_path(left, path)
    out.check("homoclinic_leaf_contraction", all(c.passed for c in leaf),
              [c.final_distance for c in leaf], [c.predicted for c in leaf], len(leaf), HOMOCLINIC_PATH)
    rec = path.recurrence
    out.check("recurrence_constant", rec.c > 0 and rec.relative_change <= p["recurrence_stability"],
              rec.c, p["recurrence_stability"], 2 * rec.j_max + 1, HOMOCLINIC_PATH,
              note=f"windows |j|<={rec.j_split} and {rec.j_split}<|j|<={rec.j_max}: "
                   f"{rec.window_a:.6g}, {rec.window_b:.6g}")
    out.results["homoclinic"] = {"z": path.z, "lattice_vector": list(path.lattice_vector),
                                 "a_b": list(path.first_coordinate_coefficients(left)),
                                 "leg_lengths": path.leg_lengths(), "recurrence": rec.to_dict()}
    return out


# ---------------------------------------------------------------------------
# perturbation sweep


def _schedule_for(cfg, system):
    p = cfg.params
    path = hol.find_homoclinic_su_path(system, p["lattice_window"], lattice_vector=p["lattice_vector"])
    c = p["c"] if p["c"] is not None else path.recurrence.c
    return path, pt.schedule(c, p["sigma"], p["epsilon"], p["r"], p["C0"])


def _hand_schedule(c, sigma, epsilon, r, C0, k):
    """delta_k and beta_k by exact rational arithmetic (and a 40-digit asin)."""
    delta = Fraction(c) / (1 + (Fraction(sigma) * k) ** 2)
    s = Fraction(C0) * delta ** (r - 1) * Fraction(epsilon)
    with mpmath.workdps(40):
        beta = mpmath.asin(mpmath.mpf(s.numerator) / s.denominator)
        return float(delta), float(beta)


def run_perturb_sweep(cfg: ExperimentConfig, threads: int) -> Outcome:
    p = cfg.params
    out = Outcome()
    t0 = time.perf_counter()
    system = systems.build(cfg.system)
    path, sch = _schedule_for(cfg, system)
    out.results["schedule"] = sch.to_dict()
    out.results["z"] = path.z
    ks = list(range(p["k_range"][0], p["k_range"][1] + 1))

    def one(k):
        rep = pt.exactness_report(system, sch, k, path.z, system.center_plane,
                                  p["outside_samples"], p["det_samples"], cfg.seed)
        tw = sch.twist(k, path.z, system.center_plane)
        return rep, pt.cr_size_estimate(tw, p["cr_order"], seed=cfg.seed)

    reports = _pool_map(one, ks, threads)
    ok_out = all(r["outside_identical"] for r, _ in reports)
    worst_d = max(r["derivative_at_center"] for r, _ in reports)
    worst_det = max(r["max_det_error"] for r, _ in reports)
    n_out = min(r["outside_points"] for r, _ in reports)
    out.check("outside_bit_identical", ok_out, ok_out, "identical", n_out * len(ks), TWIST_EXACTNESS)
    out.check("derivative_at_center", worst_d < p["derivative_tol"], worst_d, p["derivative_tol"], len(ks), TWIST_EXACTNESS)
    out.check("determinant", worst_det < p["det_tol"], worst_det, p["det_tol"], p["det_samples"] * len(ks), TWIST_EXACTNESS)

    rel = 0.0
    for k in ks:
        d_hand, b_hand = _hand_schedule(sch.c, sch.sigma, sch.epsilon, sch.r, sch.C0, k)
        rel = max(rel, abs(sch.delta_k(k) - d_hand) / d_hand, abs(sch.beta_k(k) - b_hand) / b_hand)
    out.check("schedule_formulas", rel < 1e-15 or rel == 0.0, rel, 1e-15, 2 * len(ks), SCHEDULE_FORMULAS)

    sizes = np.array([s for _, s in reports])
    spread = float(sizes.max() / sizes.min()) if sizes.min() > 0 else float("inf")
    out.check("cr_size_scale_invariant", spread <= 3.0, spread, 3.0, len(ks),
              note=f"order {p['cr_order']} finite differences")

    tracking = []
    node_rows = []
    for k in p["track_k"]:
        g = pt.perturbed_system(system, sch.twist(k, path.z, system.center_plane))
        rep = pt.leaf_tracking_report(system, g, path, k, sch.sigma)
        node_rows.extend(rep.rows())
        tracking.append({"k": k, "max_node_distance": float(rep.node_distances.max()),
                         "max_angle_proxy": float(np.nanmax(rep.angle_proxies)),
                         "failures": [list(f) for f in rep.failures]})
    if tracking:
        kk = [t["k"] for t in tracking]
        df = pt.fit_exponential(kk, [t["max_node_distance"] for t in tracking])
        af = pt.fit_exponential(kk, [t["max_angle_proxy"] for t in tracking])
        out.results["leaf_tracking"] = {"per_k": tracking, "node_distance_fit": vars(df),
                                        "angle_proxy_fit": vars(af)}
        out.check("continuation", all(not t["failures"] for t in tracking),
                  sum(len(t["failures"]) for t in tracking), 0, len(tracking))

    out.results["per_k"] = [dict(r, cr_size=s) for r, s in reports]
    out.tables["schedule"] = (["k", "delta", "beta", "sin_beta", "cr_size"],
                              [(k, sch.delta_k(k), sch.beta_k(k), sch.sin_beta_k(k), s)
                               for k, (_, s) in zip(ks, reports)])
    out.tables["nodes"] = (["k", "i", "dist", "angle_proxy"], node_rows)
    out.plots["schedule"] = ("schedule", ["k", "delta", "beta"], "schedule", "y")
    elapsed = time.perf_counter() - t0
    out.check("runtime", elapsed < p["max_runtime"], elapsed, p["max_runtime"], 1, TWIST_EXACTNESS)
    return out


# ---------------------------------------------------------------------------
# invariance principle diagnostics


def _initial_angles(n: int, avoid=()) -> np.ndarray:
    a = (np.arange(n) + 0.5) * math.pi / n
    for t in avoid:
        if t is not None:
            a = a[pl.projective_distance(a, t) > 1e-3]
    return a


def _convergence(block, target, angles, max_steps, tol):
    worst = 0
    for t in angles:
        fd = pl.fiber_dynamics(block, t, max_steps)
        s = fd.steps_to(target, tol)
        worst = max(worst, max_steps + 1 if s is None else s)
    return worst


def run_ip_test(cfg: ExperimentConfig, threads: int) -> Outcome:
    p = cfg.params
    out = Outcome()
    rng = np.random.default_rng(cfg.seed)
    n_ang = p["n_angles"]

    if p["block"] is not None:
        block = np.asarray(p["block"], dtype=float)
        eig = pl.eigendirections(block)
        target = p["expected_angle"] if p["expected_angle"] is not None else eig["expanding"]
        angles = _initial_angles(n_ang, [eig["contracting"]])
        worst = _convergence(block, target, angles, p["max_steps"], p["angle_tol"])
        out.check("block_convergence", worst <= p["max_steps"], worst, p["max_steps"], angles.size, PINCHING_FIBERS,
                  note=f"to angle {target} within {p['angle_tol']}")
        out.results["block"] = {"eigenvalues": eig["eigenvalues"], "expanding": eig["expanding"],
                                "contracting": eig["contracting"]}

    system = systems.build(cfg.system)
    x = np.zeros(system.dimension) if p["periodic_point"] is None else np.asarray(p["periodic_point"], float)
    pb = pl.period_block(system, x, p["period"])
    eig = pl.eigendirections(pb)
    out.results["periodic_block"] = {"matrix": pb, "eigenvalues": eig["eigenvalues"], "trace": float(np.trace(pb))}
    if p["expected_eigenvalues"] is not None:
        if eig["real"]:
            err = float(np.max(np.abs(np.sort(eig["eigenvalues"]) - np.sort(p["expected_eigenvalues"]))))
        else:
            err = float("inf")
        out.check("periodic_eigenvalues", err < p["eigenvalue_tol"], eig["eigenvalues"],
                  p["eigenvalue_tol"], 2, PINCHING_FIBERS)
    if eig["real"] and eig["expanding"] is not None:
        angles = _initial_angles(n_ang, [eig["contracting"]])
        worst = _convergence(pb, eig["expanding"], angles, p["max_steps"], p["angle_tol"])
        out.check("periodic_convergence", worst <= p["max_steps"], worst, p["max_steps"], angles.size, PINCHING_FIBERS)
        fd = pl.fiber_dynamics(pb, angles[0], p["max_steps"])
        expect = abs(eig["eigenvalues"][1] / eig["eigenvalues"][0])
        if fd.observed_ratio is not None:
            rel = abs(fd.observed_ratio - expect) / expect
            out.check("contraction_ratio", rel < 0.10, fd.observed_ratio, expect, p["max_steps"],
                      note="within 10% of the eigenvalue ratio")
        fiber_rows = [(i, float(t)) for i, t in enumerate(fd.trajectory)]
        out.tables["fiber"] = (["step", "angle"], fiber_rows)

    # circle transport distance: metric checks and exact rotation of atoms
    bins = p["bins"]
    sym = tri = 0.0
    for _ in range(p["metric_triples"]):
        a, b, c = (pl.FiberMeasure.from_histogram(rng.random(bins) ** 4) for _ in range(3))
        ab, ba = pl.circle_wasserstein(a, b), pl.circle_wasserstein(b, a)
        bc, ac = pl.circle_wasserstein(b, c), pl.circle_wasserstein(a, c)
        sym = max(sym, abs(ab - ba))
        tri = max(tri, ac - ab - bc)
    out.check("wasserstein_symmetry", sym < p["metric_tol"], sym, p["metric_tol"], p["metric_triples"], TRANSPORT_METRIC)
    out.check("wasserstein_triangle", tri < p["metric_tol"], max(tri, 0.0), p["metric_tol"],
              p["metric_triples"], TRANSPORT_METRIC)
    shift = 0.0
    for _ in range(100):
        t, beta = rng.uniform(0, math.pi), rng.uniform(-1.5, 1.5)
        moved = pl.transport(pl.FiberMeasure.point_mass(t), hol.rotation(beta))
        shift = max(shift, pl.projective_distance(moved.angles[0], t + beta))
    out.check("rotation_shifts_atoms", shift < 1e-14, shift, 1e-14, 100, TRANSPORT_METRIC)

    # empirical fiber measures and holonomy invariance
    if system.base is not None and system.exact_splitting is not None and system.exact_splitting.dims[1] == 2:
        x0 = rng.random(system.dimension)
        res_rows = []
        for n in p["n_orbits"]:
            field_ = pl.empirical_invariant_measure(system, x0, n, bins, p["grid"], seed=cfg.seed)
            r_s = pl.invariance_residual(system, field_, p["n_pairs"], "stable", seed=cfg.seed)
            r_u = pl.invariance_residual(system, field_, p["n_pairs"], "unstable", seed=cfg.seed)
            res_rows.append((n, r_s.mean, r_u.mean, r_s.pairs_used, r_u.pairs_used,
                             r_s.skipped_empty + r_u.skipped_empty, r_s.skipped_holonomy + r_u.skipped_holonomy))
        out.tables["residual"] = (["n_orbit", "stable", "unstable", "stable_pairs", "unstable_pairs",
                                   "skipped_empty", "skipped_holonomy"], res_rows)
        out.tables["measure"] = (["cell_i", "cell_j", "bin", "mass"], field_.rows())
        out.plots["residual"] = ("residual", ["n_orbit", "stable", "unstable"], "invariance residual", "xy")
        st = [r[1] for r in res_rows if r[1] is not None]
        out.results["invariance"] = {"rows": res_rows}
        out.check("residual_trend", len(st) >= 2 and st[-1] < st[0], st, "last < first",
                  sum(r[3] for r in res_rows), note="mean W1 over stable pairs, n_orbit increasing")
    return out


# ---------------------------------------------------------------------------
# separation witness


def run_separation(cfg: ExperimentConfig, threads: int) -> Outcome:
    p = cfg.params
    out = Outcome()
    t0 = time.perf_counter()
    system = systems.build(cfg.system)
    path, sch = _schedule_for(cfg, system)
    if p["beta_schedule"] == "zero":
        sch = pt.zero_schedule(sch)
    ks = list(range(p["k_range"][0], p["k_range"][1] + 1))
    parts = _pool_map(lambda k: pl.separation_witness(system, sch, [k], path, p["period"], p["tol"]),
                      ks, threads)
    rows = tuple(r for part in parts for r in part.rows)
    rep = pl.SeparationReport(rows, parts[0].a, parts[0].b, parts[0].pinching_eigenvalues, p["period"],
                              tuple(k for part in parts for k in part.skipped))
    out.results["schedule"] = sch.to_dict()
    out.results["a"], out.results["b"] = rep.a, rep.b
    out.results["rows"] = [r.to_dict() for r in rows]
    out.check("continuation", not rep.skipped, list(rep.skipped), [], len(ks), SEPARATION_WITNESS)
    if p["beta_schedule"] == "zero":
        worst = max((r.witness for r in rows if r.witness is not None), default=float("inf"))
        out.check("null_witness_zero", worst == 0.0, worst, 0.0, len(rows), SEPARATION_WITNESS)
    else:
        _, ratios = rep.ratios()
        out.check("ratio_decreasing", rep.ratio_decreasing(p["allowed_violations"]), ratios,
                  f"at most {p['allowed_violations']} non-decreasing step", len(ratios), SEPARATION_WITNESS)
        out.check("witness_positive", rep.witness_positive_after_threshold(p["ratio_threshold"]),
                  [r.witness for r in rows], f"> 0 once ratio < {p['ratio_threshold']}", len(rows), SEPARATION_WITNESS)
        out.check("witness_lower_bound", rep.witness_bound_holds(), None, "sin beta (1 - ratio)", len(rows))
    out.tables["witness"] = (["k", "delta", "beta", "sin_beta", "drift", "ratio", "witness", "lower_bound"],
                             [(r.k, r.delta, r.beta, r.sin_beta, r.drift, r.ratio, r.witness, r.lower_bound)
                              for r in rows])
    out.plots["witness"] = ("witness", ["k", "ratio", "drift", "witness"], "separation witness", "y")
    elapsed = time.perf_counter() - t0
    out.check("runtime", elapsed < p["max_runtime"], elapsed, p["max_runtime"], 1, SEPARATION_WITNESS)
    return out


RUNNERS = {
    "spectrum": run_spectrum,
    "audit": run_audit,
    "holonomy": run_holonomy,
    "perturb-sweep": run_perturb_sweep,
    "ip-test": run_ip_test,
    "separation": run_separation,
}
