"""Verification suites: each returns a list of :class:`Row`, one per identity,
with the computed residual, its tolerance and supporting data.

Suites are deterministic given their options; ``seed`` only drives the
random test-case generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import schottky as sk
from .exprcalc.jets import Jet
from .formcalc import builtin_map, cocycle_value, gauge_cs_residual, product_map
from .formcalc import rotate_connection, so3_normalization, wznw_degree
from .formcalc.samples import (random_gauge, random_one_form, random_so3_connection,
                               random_so3_field, sample_points)
from .funnel import (DEFAULT_PATCHES, DEFAULT_QHDS, CuspPatch, FunnelData,
                     alpha_omega_curvature_residual, complex_curvature_residual,
                     conformal_change_residual, cs_decomposition_residual, cusp_forms,
                     default_funnels, fit_decay_exponent, flatness_residual,
                     frame_evenness, load_funnel_spec, sectional_curvature,
                     tr_t_cubed_residual)
from .hyperbolic3 import (H3Point, canonical_lift, complex_connection_apply,
                          curl_h3, equivariance_residual, killing_field,
                          killing_pair_residual, killing_residual, killing_vector,
                          random_moebius)
from .renorm import (BOUNDARY_FORMS, cs_psl_density, fp_boundary_density, patch_grid,
                     volr_closed_form, volr_funnel_density)
from .riemann import TailError, period_matrix
from .variation import (bulk_curvature_term, compatibility_defect, cs_variation_density,
                        default_families, e_expansion_residual, fiber_curvature_check,
                        gauss_bonnet_variation, load_family_spec, omega_dot_by_jets,
                        omega_dot_by_transport, random_surface_families, transport_frame,
                        variation_term_densities, volr_variation_density,
                        volume_form_variation_defect)

class ConfigError(ValueError):
    """Invalid options or inputs (reported with exit status 2 by the CLI)."""


SUITES = ("funnel-check", "cs-density", "variation-check", "cusp-check", "gauge-check",
          "killing-check", "schottky-f", "schottky-delta", "periods")


def to_json_value(v):
    """Complex numbers as ``[re, im]``, arrays as nested lists, non-finite
    floats as the strings ``"inf"``, ``"-inf"``, ``"nan"``."""
    if isinstance(v, (complex, np.complexfloating)):
        return [to_json_value(float(v.real)), to_json_value(float(v.imag))]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.ndarray):
        return [to_json_value(x) for x in v.tolist()] if v.ndim else to_json_value(v.item())
    if isinstance(v, (list, tuple)):
        return [to_json_value(x) for x in v]
    if isinstance(v, dict):
        return {str(k): to_json_value(x) for k, x in v.items()}
    if isinstance(v, (np.integer, np.bool_)):
        return v.item()
    return v


@dataclass
class Row:
    """One identity: passes when ``residual <= tol`` (``< tol`` if ``strict``)."""

    suite: str
    identity: str
    residual: float
    tol: float
    value: object = None
    expected: object = None
    note: str = ""
    strict: bool = False
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        r = float(self.residual)
        if not math.isfinite(r):
            return False
        return r < self.tol if self.strict else r <= self.tol

    def to_json_dict(self) -> dict:
        return {"suite": self.suite, "identity": self.identity,
                "value": to_json_value(self.value), "expected": to_json_value(self.expected),
                "residual": to_json_value(float(self.residual)), "tol": self.tol, "passed": self.passed,
                "note": self.note, "data": to_json_value(self.data)}


@dataclass
class Options:
    spec: str | None = None
    tol: float | None = None
    grid: int | None = None
    maxlen: int | None = None
    mmax: int | None = None
    x0: float | None = None
    seed: int = 0
    threads: int = 1
    timing: bool = False

    def tolerance(self, default: float) -> float:
        return default if self.tol is None else self.tol


class _Collector:
    """Max residual per identity over several cases, remembering the worst case."""

    def __init__(self, suite: str, opts: Options):
        self.suite, self.opts = suite, opts
        self.rows: dict = {}

    def add(self, identity: str, residual: float, tol: float, case: str = "", **kw):
        tol = self.opts.tolerance(tol)
        row = self.rows.get(identity)
        if row is None:
            note = kw.pop("note", "")
            row = self.rows[identity] = Row(self.suite, identity, float(residual), tol,
                                            note=note, **kw)
            row.data["cases"] = 0
            row.data["worst_case"] = case
        elif residual > row.residual or not math.isfinite(residual):
            row.residual = float(residual)
            row.data["worst_case"] = case
            for k, v in kw.items():
                setattr(row, k, v)
        row.data["cases"] += 1

    def result(self) -> list:
        return list(self.rows.values())


# funnel geometry ----------------------------------------------------------------------

def _funnels(opts: Options) -> tuple:
    if opts.spec:
        funnel, grid = load_funnel_spec(opts.spec)
        return [_with_cutoff(funnel, opts.x0)], grid
    try:
        return default_funnels(0.5 if opts.x0 is None else opts.x0), None
    except ValueError as exc:
        raise ConfigError(f"--x0 {opts.x0}: {exc}") from None


def _with_cutoff(funnel: FunnelData, x0: float | None) -> FunnelData:
    if x0 is None:
        return funnel
    try:
        return replace(funnel, x0=x0)
    except ValueError as exc:
        raise ConfigError(f"--x0 {x0}: {exc}") from None


def funnel_check(opts: Options) -> list:
    """Curvature, flatness and Chern-Simons decomposition at random points
    (1000 sample planes in total)."""
    funnels, _ = _funnels(opts)
    col = _Collector("funnel-check", opts)
    rng = np.random.default_rng(opts.seed)
    planes = max(50, -(-1000 // len(funnels)))
    for k, f in enumerate(funnels):
        name = f.name or f"funnel {k}"
        pt = f.sample(rng, planes)
        u, v = rng.normal(size=(2, planes, 3))
        col.add("sectional_curvature_minus_one",
                float(np.abs(sectional_curvature(f, pt, u, v) + 1).max()), 1e-7, name)
        small = [p[:12] for p in pt]
        col.add("real_flatness_structure_equations", flatness_residual(f, small), 1e-7, name)
        col.add("complex_connection_flat", complex_curvature_residual(f, small), 1e-7, name)
        col.add("cs_complex_decomposition", cs_decomposition_residual(f, small), 1e-7, name)
        col.add("tr_T_cubed_equals_six_dvol", tr_t_cubed_residual(f, small), 1e-9, name)
        col.add("cs_conformal_change", conformal_change_residual(f, small), 1e-7, name)
        col.add("tr_alpha_wedge_curvature_vanishes",
                alpha_omega_curvature_residual(f, small), 1e-9, name)
        col.add("compactified_frame_even_in_x",
                frame_evenness(f, small[1][:6], small[2][:6]), 1e-10, name)
    return col.result()


# finite parts ---------------------------------------------------------------------------

STATED_BOUNDARY_FP = {"T^alpha": 2.0, "T^omega_hat": -2.0, "T^omega": -4.0,
                      "alpha^omega": 0.0}
BOUNDARY_ROW_NAMES = {"T^alpha": "fp_tr_T_wedge_alpha", "T^omega_hat": "fp_tr_T_wedge_omega_hat",
                      "T^omega": "fp_tr_T_wedge_omega",
                      "alpha^omega": "fp_tr_alpha_wedge_omega_conformal_invariance"}
BOUNDARY_NOTES = {
    "T^alpha": "reference value +2 Tr(A); the computed finite part is -2 Tr(A)",
    "T^omega": "reference value -4 Tr(A); omega = omega_hat - alpha forces -2 - (-2) = 0",
}


def _mean_det_a(funnel: FunnelData, grid: int) -> float:
    y1, y2, w = patch_grid(funnel, grid)
    ys = Jet.seeds([y1, y2], 0)
    det_a = np.linalg.det(funnel.endomorphism(*ys).value).real
    dens = np.exp(2 * funnel.patch.conformal_factor(*ys).value.real)
    return float(np.sum(w * dens * det_a) / np.sum(w * dens))


def cs_density(opts: Options) -> list:
    """Renormalized volume, boundary finite parts and cutoff independence per
    unit boundary area."""
    if opts.spec:
        funnel, grid = load_funnel_spec(opts.spec)
    else:
        funnel = FunnelData(DEFAULT_PATCHES["halfplane"], DEFAULT_QHDS["zero"], 1.0,
                            name="fuchsian")
        grid = 8
    funnel = _with_cutoff(funnel, opts.x0)
    grid = opts.grid or grid
    s = "cs-density"
    rows = []
    vol, logc, _ = volr_funnel_density(funnel, grid=grid)
    closed = volr_closed_form(funnel.x0, 1.0, _mean_det_a(funnel, grid))
    rows.append(Row(s, "volr_density_closed_form", abs(vol - closed), opts.tolerance(1e-8),
                    vol, closed, "det(1 + x^2 A/2) closed form with the area-mean det A"))
    rows.append(Row(s, "volr_log_coefficient", abs(logc - 0.5), opts.tolerance(1e-8),
                    logc, 0.5, "coefficient of log(1/eps) equals Tr(A)/2"))
    fps = {name: fp_boundary_density(funnel, name, grid=grid).c0 for name in BOUNDARY_FORMS}
    for name in ("alpha^omega", "T^alpha", "T^omega_hat", "T^omega"):
        tol = 1e-6 if name == "alpha^omega" else 1e-5
        val, want = fps[name], STATED_BOUNDARY_FP[name]
        rows.append(Row(s, BOUNDARY_ROW_NAMES[name], abs(val - want), opts.tolerance(tol),
                        val, want, BOUNDARY_NOTES.get(name, "per unit h0-area")))
    rel = fps["T^omega"] - (fps["T^omega_hat"] - fps["T^alpha"])
    rows.append(Row(s, "fp_omega_equals_omega_hat_minus_alpha", abs(rel), opts.tolerance(1e-9),
                    rel, 0.0))
    cutoffs = (0.3, 0.5, 0.8)
    psl = cs_psl_density(funnel, cutoffs, grid=max(4, grid // 2 + 2))
    rows.append(Row(s, "cs_psl_cutoff_independence", psl["spread"], opts.tolerance(1e-5),
                    psl["totals"], None, f"chi coefficient nearest: {psl['matches']}",
                    data={"cutoffs": psl["cutoffs"], "chi_coefficient": psl["chi_coefficient"],
                          "candidates": psl["candidates"]}))
    return rows


# first variation ------------------------------------------------------------------------

DENSITY_FAMILIES = ("constant", "fiber", "tt_fuchsian", "tt_halfplane", "tt_band", "tt_disk",
                    "mixed")
VOLR_FAMILIES = ("tt_fuchsian", "tt_same_as_h2", "tt_halfplane", "tt_band", "fiber")
GB_FAMILIES = ("tt_halfplane", "tt_band", "tt_disk", "mixed", "fiber", "zero_flux", "killing")
E_CASES = (("tt_halfplane", (0.4, 1.3)), ("mixed", (0.7, 1.1)), ("zero_flux", (0.4, 0.2)))
TRANSPORT_FAMILIES = ("tt_halfplane", "killing", "mixed", "fiber")
INTERIOR_FAMILIES = ("tt_halfplane", "killing", "fiber")


def _has_wp_direction(fam) -> bool:
    return fam.h0_dot is not None or fam.displacement == ("0", "0")


def _transport_points(fam, rng) -> list:
    y1, y2 = fam.patch.sample(rng, 2)
    return [np.array([0.2, 0.35]) * fam.x0 / 0.5, y1, y2]


def variation_check(opts: Options) -> list:
    """Every identity of the first variation, aggregated over the families
    (shipped ones, or the one in ``--spec``)."""
    grid = opts.grid or 8
    if opts.spec:
        fam = load_family_spec(opts.spec)
        fams = {fam.name: fam}
        plan = {k: [fam.name] for k in ("dens", "transport", "interior")}
        plan["volr"] = [fam.name] if _has_wp_direction(fam) else []
        plan["gb"] = plan["volr"]
        y1, y2 = fam.patch.sample(np.random.default_rng(opts.seed), 1)
        plan["e"] = [(fam.name, (float(y1[0]), float(y2[0])))]
    else:
        fams = default_families()
        plan = {"dens": DENSITY_FAMILIES, "volr": VOLR_FAMILIES, "gb": GB_FAMILIES,
                "e": E_CASES, "transport": TRANSPORT_FAMILIES, "interior": INTERIOR_FAMILIES}
    col = _Collector("variation-check", opts)
    for name in plan["dens"]:
        fam = fams[name]
        dens = variation_term_densities(fam, grid)
        for c in dens.checks():
            col.add(c.name, c.residual, c.tol, name, note=c.note)
        if _has_wp_direction(fam):
            cs = cs_variation_density(fam, grid, dens=dens)
            col.add("cs_first_variation", cs.residual, 1e-5, name,
                    note="d_t CS against connection term plus Weil-Petersson pairings")
            col.add("cs_parallel_transport", abs(cs.parallel_transport_defect()), 1e-5, name)
            coeff = cs.liouville_coefficient()
            if coeff is not None:
                col.add("liouville_coefficient", abs(coeff - 1 / (2 * math.pi)), 1e-6, name,
                        value=coeff, expected=1 / (2 * math.pi))
    for name in plan["volr"]:
        v = volr_variation_density(fams[name])
        col.add("volr_first_variation", v.residual, 1e-4, name,
                note="d_t Vol_R against -(1/4) <h0_dot, h2> per unit area")
    for name, y in plan["e"]:
        col.add("e_tensor_expansion", e_expansion_residual(fams[name], *y), 1e-5, name)
    for name in plan["gb"]:
        col.add("gauss_bonnet_differentiated", abs(gauss_bonnet_variation(fams[name])), 1e-6,
                name)
    rng = np.random.default_rng(opts.seed)
    for name in plan["transport"]:
        fam = fams[name]
        pts = _transport_points(fam, rng)
        tr = transport_frame(fam, pts, 0.02)
        col.add("frame_transport_ode", tr.ode_residual(), 1e-8, name)
        col.add("frame_transport_orthonormality", tr.orthonormality_defect(), 1e-8, name)
        col.add("frame_transport_compactified", compatibility_defect(fam, pts, 0.02), 1e-8,
                name)
        diff = omega_dot_by_transport(fam, pts) - omega_dot_by_jets(fam, pts)
        col.add("omega_dot_two_routes", float(np.abs(diff).max()), 1e-6, name)
    for name in plan["interior"]:
        fam = fams[name]
        col.add("volume_form_variation", volume_form_variation_defect(fam, seed=opts.seed),
                1e-9, name)
        col.add("bulk_curvature_term_vanishes", bulk_curvature_term(fam, seed=opts.seed),
                1e-9, name)
    for fam2 in random_surface_families(10, opts.seed):
        y1, y2 = fam2.patch.sample(np.random.default_rng(opts.seed + 1), 6)
        r = fiber_curvature_check(fam2, y1, y2)
        for key in ("commutator", "sectional", "tt_horizontal", "trace_identity"):
            col.add(f"fiber_curvature_{key}", r[key], 1e-7, fam2.name)
    return col.result()


# cusp -----------------------------------------------------------------------------------

CUSP_METRICS = (((1.0, 0.0), (0.0, 1.0)), ((1.0, 0.3), (0.3, 2.0)))


def cusp_check(opts: Options) -> list:
    col = _Collector("cusp-check", opts)
    rng = np.random.default_rng(opts.seed)
    ys = np.geomspace(10, 1000, 7)
    for h in CUSP_METRICS:
        name = f"h={h}"
        out = cusp_forms(CuspPatch(h), ys, *rng.uniform(0, 1, size=(2, 6)))
        col.add("cusp_compact_cs_vanishes", float(out["cs_hat"].max()), 1e-10, name)
        p_cs = fit_decay_exponent(ys, out["cs"])
        col.add("cusp_cs_decay_exponent", abs(p_cs + 2), 0.05, name, value=p_cs, expected=-2)
        p_ao = fit_decay_exponent(ys, out["tr_alpha_omega"])
        col.add("cusp_tr_alpha_omega_decay_exponent", abs(p_ao + 1), 0.05, name, value=p_ao,
                expected=-1)
    return col.result()


# gauge sector -----------------------------------------------------------------------------

SHIPPED_DEGREES = (("const", 0.0), ("quaternion_cover", -2.0), ("torus_winding(1)", -1.0),
                   ("torus_winding(-1)", 1.0))


def gauge_check(opts: Options) -> list:
    s = "gauge-check"
    grid = opts.grid or 48
    col = _Collector(s, opts)
    for k in range(50):
        rng = np.random.default_rng([opts.seed, 100 + k])
        size = 2 if k % 2 else 3
        theta = random_one_form(rng, size=size)
        a = random_gauge(rng, size=size)
        col.add("cs_gauge_transformation_law",
                gauge_cs_residual(theta, a, sample_points(rng, 3, n=3)), 1e-8, f"case {k}")
    rows = col.result()
    for name, want in SHIPPED_DEGREES:
        deg = wznw_degree(name, grid=grid, threads=opts.threads)
        note = ""
        if name.startswith("torus_winding"):
            note = ("odd reference value; a smooth map from the 3-torus to SO(3) has even "
                    "degree, the shipped map evaluates to -2k")
        rows.append(Row(s, f"wznw_degree[{name}]", abs(deg - want), opts.tolerance(1e-3),
                        deg, want, note))
    col = _Collector(s, opts)
    for k in range(3):
        w = random_so3_connection(np.random.default_rng([opts.seed, 20 + k]))
        a = random_so3_field(np.random.default_rng([opts.seed, 200 + k]), False)
        a_ext = random_so3_field(np.random.default_rng([opts.seed, 200 + k]), True)
        b = random_so3_field(np.random.default_rng([opts.seed, 300 + k]), False)
        b_ext = random_so3_field(np.random.default_rng([opts.seed, 300 + k]), True)
        c_ab = cocycle_value(w, product_map(a, b), product_map(a_ext, b_ext))
        c_a = cocycle_value(w, a, a_ext)
        c_b = cocycle_value(rotate_connection(w, a), b, b_ext)
        col.add("cocycle_identity", abs(c_ab - c_a * c_b), 1e-6, f"case {k}",
                note="c(S, ab) = c(S, a) c(Sa, b)")
    rows += col.result()
    norm = so3_normalization()
    rows.append(Row(s, "so3_normalization", abs(norm - 1), opts.tolerance(1e-3), norm, 1.0))
    for name in ("const", "quaternion_cover", "torus_winding(1)"):
        gmap, patch = builtin_map(name)
        pts = [np.random.default_rng(opts.seed).uniform(ax.lo, ax.hi, size=20)
               for ax in patch.axes]
        rows.append(Row(s, f"shipped_map_is_rotation[{name}]", gmap.group_residual(pts),
                        opts.tolerance(1e-10)))
    return rows


# Killing fields and canonical lifts ----------------------------------------------------

def killing_check(opts: Options) -> list:
    col = _Collector("killing-check", opts)
    for k in range(20):
        rng = np.random.default_rng([opts.seed, 500 + k])
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        h[1, 1] = -h[0, 0]
        p = H3Point(rng.normal(), rng.normal(), rng.uniform(0.3, 2.5))
        u = rng.normal(size=3)
        kappa = killing_field(h)
        case = f"case {k}"
        col.add("killing_equation", killing_residual(kappa, p), 1e-8, case)
        col.add("killing_of_ih_is_half_curl",
                float(np.abs(-0.5 * curl_h3(kappa, p) - killing_vector(1j * h, p)).max()),
                1e-8, case)
        lift = canonical_lift(kappa)(p)
        col.add("canonical_lift_formula",
                float(np.abs(lift - (kappa(p) - 1j * killing_vector(1j * h, p))).max()),
                1e-8, case)
        col.add("canonical_lift_complex_linear",
                float(np.abs(canonical_lift(killing_field(1j * h))(p) - 1j * lift).max()),
                1e-8, case)
        col.add("killing_pair_curvature", killing_pair_residual(h, p, u), 1e-8, case)
        col.add("canonical_lift_parallel",
                float(np.abs(complex_connection_apply(u, canonical_lift(kappa), p)).max()),
                1e-8, case)
        col.add("killing_equivariance", equivariance_residual(random_moebius(rng), h, p),
                1e-8, case)
    return col.result()


# Schottky groups ----------------------------------------------------------------------------

def _group(opts: Options) -> sk.SchottkyGroup:
    if opts.spec:
        from .funnel import read_spec_source
        return sk.build_group(read_spec_source(opts.spec))
    return sk.far_separated_group()


def schottky_f(opts: Options) -> list:
    s = "schottky-f"
    group = _group(opts)
    maxlen = 6 if opts.maxlen is None else opts.maxlen
    mmax = 20 if opts.mmax is None else opts.mmax
    res = sk.zograf_f(group, maxlen, mmax)
    data = res.to_json_dict()
    if not opts.timing:
        data.pop("wall_time")
    if maxlen > 0:
        prev = sk.zograf_f(group, maxlen - 1, mmax)
        step, bound = abs(res.value - prev.value), prev.tail
        note = "|F(L) - F(L-1)| against the tail bound at L-1"
    else:
        step, bound = 0.0, res.tail
        note = "empty product"
    rows = [Row(s, "zograf_product_truncation", step, bound if opts.tol is None else opts.tol,
                res.value, None, note, data=data)]
    expected = sum(sk.primitive_class_count(group.genus, n) for n in range(1, maxlen + 1))
    rows.append(Row(s, "primitive_class_count", abs(res.class_count - expected), 0.0,
                    res.class_count, expected, "necklace count of primitive classes"))
    if maxlen >= 1:
        hol = sk.holomorphy_residual(lambda w: sk.translate_handle(group, 0, w),
                                     maxlen=min(maxlen, 3))
        rows.append(Row(s, "zograf_holomorphy", hol, opts.tolerance(1e-3), hol, 0.0,
                        "|dF/dwbar| / |dF/dw| along a translation of the first handle"))
    return rows


def schottky_delta(opts: Options) -> list:
    group = _group(opts)
    maxlen = 5 if opts.maxlen is None else opts.maxlen
    est = sk.limit_set_dimension(group, maxlen, opts.tolerance(0.02))
    return [Row("schottky-delta", "limit_set_dimension_bracket",
                est.bracket[1] - est.bracket[0], opts.tolerance(0.02), est.value, None,
                "width of the bracket from consecutive word lengths",
                data={"bracket": list(est.bracket), "maxlen": maxlen})]


def periods(opts: Options) -> list:
    s = "periods"
    group = _group(opts)
    maxlen = 5 if opts.maxlen is None else opts.maxlen
    try:
        pm = period_matrix(group, maxlen, opts.tolerance(1e-8))
    except TailError as exc:
        return [Row(s, "poincare_series_tail", math.inf, opts.tolerance(1e-8),
                    note=f"{exc}", data={"needed_maxlen": exc.needed})]
    data = pm.to_json_dict()
    rows = [
        Row(s, "period_matrix_symmetric", pm.sym_defect, opts.tolerance(1e-6), data=data),
        Row(s, "period_matrix_imaginary_part_positive", -pm.min_eig_im, 0.0,
            pm.min_eig_im, None, "smallest eigenvalue of Im tau must be positive",
            strict=True),
        Row(s, "period_quadrature_matches_primitive", pm.route_defect, opts.tolerance(1e-8)),
    ]
    if group.genus == 1:
        want = np.log(sk.multiplier(group.generators[0])) / (2j * math.pi)
        rows.append(Row(s, "cyclic_period_is_log_multiplier", abs(pm.tau[0, 0] - want),
                        opts.tolerance(1e-8), pm.tau[0, 0], want))
    return rows


RUNNERS = {"funnel-check": funnel_check, "cs-density": cs_density,
           "variation-check": variation_check, "cusp-check": cusp_check,
           "gauge-check": gauge_check, "killing-check": killing_check,
           "schottky-f": schottky_f, "schottky-delta": schottky_delta, "periods": periods}


def run_suite(name: str, opts: Options) -> list:
    return RUNNERS[name](opts)
