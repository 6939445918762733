"""Acceptance suite: one test per numbered criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are
repeated at the end of the pytest report.
"""

import time
from itertools import product
from math import e, exp, sqrt

import numpy as np
import pytest

from starforms import (
    Ball,
    BogovskiiConfig,
    BoundRangeError,
    Ellipsoid,
    FormValue,
    MultiPoly,
    PoincareConfig,
    PolyForm,
    apply_bogovskii,
    apply_poincare_poly,
    bound_sweep,
    build_bump,
    build_chain,
    c_phi_constant,
    chain_bound,
    cigar_family,
    contract,
    exactness_check_bogovskii,
    glue_bc,
    glue_no_bc,
    h1_bound,
    hodge_star,
    poincare_constant_KP,
    random_closed_form,
    wedge,
)
from starforms.bogovskii import trace_residuals
from starforms.chain import overlap_source
from starforms.constants import bogovskii_branch, is_nondecreasing, kappa_bogovskii, kappa_poincare, poincare_branch
from starforms.exterior import dim
from starforms.geometry import DomainStats
from starforms.mollifier import multi_indices
from starforms.poincare import poincare_gradient_check
from starforms.polyform import FieldForm, bump_cut_form, ellipsoidal_bump, trace_residual


def _rand_form(rng, n, l):
    return FormValue(n, l, rng.uniform(-1, 1, dim(n, l)))


# --- 1 ----------------------------------------------------------------------------------------


def test_c1_exterior_algebra(criterion):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    per_n = 200
    for n in range(2, 7):
        for _ in range(per_n):
            p, q = rng.integers(0, n + 1, 2)
            while p + q > n:
                p, q = rng.integers(0, n + 1, 2)
            a, b = _rand_form(rng, n, p), _rand_form(rng, n, q)
            ab, ba = wedge(a, b), wedge(b, a)
            worst = max(worst, np.max(np.abs(ab.coeffs - (-1) ** (p * q) * ba.coeffs)))

            worst = max(worst, np.max(np.abs(hodge_star(hodge_star(a)).coeffs - (-1) ** (p * (n - p)) * a.coeffs)))

            if p >= 1 or q >= 1:
                z = rng.uniform(-1, 1, n)
                lhs = contract(z, ab)
                terms = []
                if p >= 1:
                    terms.append(wedge(contract(z, a), b).coeffs)
                if q >= 1:
                    terms.append((-1) ** p * wedge(a, contract(z, b)).coeffs)
                worst = max(worst, np.max(np.abs(lhs.coeffs - sum(terms))))

            l = int(rng.integers(0, n - 1))
            u = PolyForm.random(n, l, int(rng.integers(1, 4)), rng)
            dd = u.d().d()
            assert dd.is_zero()
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 5.0
    criterion("C1 exterior algebra", ok, f"max residual {worst:.2e} over {5 * per_n} inputs per identity, {elapsed:.2f}s")
    assert ok


# --- 2 ----------------------------------------------------------------------------------------


def test_c2_null_homotopy(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    draws = 0
    for n in (2, 3):
        ball = Ball(np.zeros(n), 1.0)
        axes = [2.0] + [0.5] * (n - 1)
        center = np.r_[0.3, -0.2, 0.1][:n]
        ell = Ellipsoid(center, axes)
        for dom in (ball, ell):
            mol = build_bump(dom.ball_center, dom.ball_radius)
            for l in range(1, n + 1):
                cfg = PoincareConfig(mol, l)
                for s in range(50):
                    u = random_closed_form(n, l, s % 4, 1000 * n + 100 * l + s)
                    worst = max(worst, apply_poincare_poly(cfg, u).d().max_abs_diff(u))
                    draws += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 60.0
    criterion("C2 null-homotopy", ok, f"max coefficient defect {worst:.2e} over {draws} forms, {elapsed:.1f}s")
    assert ok


# --- 3 ----------------------------------------------------------------------------------------


def test_c3_derivative_formulas(criterion):
    rng = np.random.default_rng(3)
    worst_first = worst_second = 0.0
    inputs = 0
    for n in (2, 3):
        mol = build_bump(rng.uniform(-0.2, 0.2, n), 0.8)
        for _ in range(50):
            l = int(rng.integers(1, n + 1))
            cfg = PoincareConfig(mol, l)
            f = MultiPoly.random(n, int(rng.integers(0, 4)), rng)
            inputs += 1
            for m, j in product(range(1, n + 1), repeat=2):
                worst_first = max(worst_first, poincare_gradient_check(cfg, f, m, j))
                for k in range(n):
                    alpha = tuple(int(i == k) for i in range(n))
                    worst_second = max(worst_second, poincare_gradient_check(cfg, f, m, j, alpha=alpha))
    ok = worst_first <= 1e-9 and worst_second <= 1e-9
    criterion("C3 derivative formulas", ok,
              f"first-order {worst_first:.2e}, second-order {worst_second:.2e} over {inputs} inputs")
    assert ok


# --- 4 ----------------------------------------------------------------------------------------

_LEVELS = [
    dict(t_quad_order=8, ray_panels=1, sphere_order=16, rho_order=12, cone_order=8, h=4e-3),
    dict(t_quad_order=16, ray_panels=2, sphere_order=32, rho_order=24, cone_order=16, h=2e-3),
    dict(t_quad_order=32, ray_panels=4, sphere_order=64, rho_order=48, cone_order=32, h=1e-3),
]


def test_c4_bogovskii_exactness(criterion):
    disk = Ball([0.0, 0.0], 1.0)
    mol = build_bump([0.0, 0.0], 1.0)
    rng = np.random.default_rng(4)
    final, monotone = [], True
    for k in range(10):
        c = rng.uniform(-0.3, 0.3, 2)
        w = bump_cut_form(PolyForm.random(2, 0, 2, rng), c, 0.35)
        # check where u = dw lives, plus a few points of the disk at large
        pts = np.vstack([Ball(c, 0.3).sample(8, rng), disk.sample(4, rng)])
        res = []
        for opts in _LEVELS:
            opts = dict(opts)
            h = opts.pop("h")
            cfg = BogovskiiConfig(mol, 1, disk, **opts)
            res.append(exactness_check_bogovskii(cfg, w, h, points=pts))
        monotone &= res[0] > res[1] > res[2]
        final.append(res[-1])

    # one-dimensional oracle: the antiderivative of 2x - 1 vanishing at both ends
    seg = Ball([0.5], 0.5)
    cfg1 = BogovskiiConfig(build_bump([0.5], 0.5), 1, seg)
    u1 = FieldForm(1, 1, lambda X: np.where(seg.contains(X), 2 * X[:, 0] - 1, 0.0)[:, None])
    x = np.linspace(0.05, 0.95, 19)[:, None]
    err1 = float(np.max(np.abs(apply_bogovskii(cfg1, u1, x)[:, 0] - (x[:, 0] ** 2 - x[:, 0]))))

    ok = max(final) <= 5e-3 and monotone and err1 <= 1e-3
    criterion("C4 Bogovskii exactness", ok,
              f"max residual {max(final):.2e}, monotone {monotone}, 1-D oracle error {err1:.2e}")
    assert ok


# --- 5 ----------------------------------------------------------------------------------------


def test_c5_locality_and_trace(criterion):
    rng = np.random.default_rng(5)
    disk = Ball(np.zeros(2), 1.0, ball=([0.0, 0.0], 0.3))
    mol = build_bump([0.0, 0.0], 0.3)
    cfg = BogovskiiConfig(mol, 1, disk)
    fine = BogovskiiConfig(mol, 1, disk, t_quad_order=64, ray_panels=8, sphere_order=128, rho_order=96, cone_order=64)
    c, r = np.array([0.45, 0.1]), 0.3
    u = bump_cut_form(PolyForm.random(2, 0, 2, rng), c, r).d()

    # hull of the ball and the support: points farther than r from the segment [0, c]
    X = disk.sample(4000, rng)
    t = np.clip(X @ c / (c @ c), 0.0, 1.0)
    dist = np.linalg.norm(X - t[:, None] * c, axis=1)
    far = X[dist > r + 0.02][:200]
    near = X[dist < r][:40]
    assert len(far) == 200
    outside = float(np.max(np.abs(apply_bogovskii(cfg, u, far))))
    quad_err = float(np.max(np.abs(apply_bogovskii(cfg, u, near) - apply_bogovskii(fine, u, near))))

    psis = [PolyForm.random(2, 1, 2, rng) for _ in range(20)]
    pairs = trace_residuals(cfg, u, disk, psis, level=5)
    trace_ok = all(v <= tol for v, tol in pairs)
    worst = max(v / tol for v, tol in pairs)

    ok = outside <= quad_err and trace_ok
    criterion("C5 locality and trace", ok,
              f"|Bu| outside hull {outside:.2e} vs quadrature error {quad_err:.2e}; "
              f"worst trace pairing/tolerance {worst:.3f} over 20 test forms")
    assert ok


# --- 6 ----------------------------------------------------------------------------------------


def _stats(ratio_diam, ratio_vol):
    return DomainStats(R=ratio_diam, rho=1.0, vol=ratio_vol, vol_ball=1.0)


def test_c6_kappa_formulas(criterion):
    checks = [
        (kappa_poincare(2, 2, e), 1.0),
        (kappa_poincare(2, 1, e), 1.0),
        (kappa_poincare(4, 1, e), exp(1 / 3)),
        (kappa_bogovskii(3, 1, e), 1.0),
        (kappa_bogovskii(2, 2, e), 2.0),
        (kappa_bogovskii(2, 2, e**2), 3.0),
        (h1_bound("poincare", 2, 2, _stats(4.0, e), 1.0), 4.0),
        (h1_bound("bogovskii", 2, 2, _stats(3.0, e), 1.0), 6.0),
        (poincare_constant_KP(2, _stats(2.0, e), 1.0), 4.0),
        (chain_bound(False, 1, 3.0), 6.0),
        (chain_bound(False, 2, 3.0, C_P=2.0, C_S=0.0, D_T=5.0, d_T=0.1), 6.0),
        (chain_bound(True, 1, 1.0, C_S=0.0, n=2), 4 * sqrt(2)),
    ]
    worst = max(abs(a - b) for a, b in checks)
    branches = {"poincare": set(), "bogovskii": set()}
    for n in range(1, 7):
        for l in range(1, n + 1):
            branches["poincare"].add(poincare_branch(n, l))
            branches["bogovskii"].add(bogovskii_branch(n, l))
            for kind in ("poincare", "bogovskii"):
                fn = kappa_poincare if kind == "poincare" else kappa_bogovskii
                assert np.isfinite(fn(n, l, 3.0))
    total = branches["poincare"] == {1, 2, 3} and branches["bogovskii"] == {1, 2}
    ok = worst <= 1e-12 and total
    criterion("C6 kappa formulas", ok, f"max deviation {worst:.1e} over {len(checks)} values; dispatch total {total}")
    assert ok


# --- 7 ----------------------------------------------------------------------------------------


@pytest.mark.slow
def test_c7_bound_shape_sweep(criterion):
    t0 = time.perf_counter()
    family = cigar_family((1, 2, 4, 8), n=2, radius=0.5)
    trend_rtol = {"poincare": 1e-9, "bogovskii": 1e-4}
    ok, notes = True, []
    for kind in ("poincare", "bogovskii"):
        for l in (1, 2):
            reps = bound_sweep(kind, family, l, ensemble_size=8, degree=2, seed=0, safety=2.0)
            emp = [r.empirical_ratio for r in reps]
            bnd = [r.bound_value for r in reps]
            within = all(a <= b for a, b in zip(emp[1:], bnd[1:]))
            trend = is_nondecreasing(emp, trend_rtol[kind]) and is_nondecreasing(bnd)
            ok &= within and trend
            notes.append(f"{kind} l={l}: emp {', '.join(f'{x:.3g}' for x in emp)}; "
                         f"bound {', '.join(f'{x:.3g}' for x in bnd)}; within {within}, trend {trend}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600.0
    for line in notes:
        print(line)
    criterion("C7 bound-shape sweep", ok, f"{elapsed:.0f}s")
    assert ok


# --- 8 ----------------------------------------------------------------------------------------


def test_c8_chain_no_bc(criterion):
    dv = jump = std = 0.0
    bounds = {1: [], 2: []}
    holds = True
    for N in (2, 4, 8):
        chain = build_chain(N, n=2)
        for l in (1, 2):
            u = random_closed_form(2, l, 2, 10 * N + l)
            _, rep = glue_no_bc(chain, u, seed=N)
            dv = max(dv, rep.max_dv_residual)
            jump = max(jump, rep.max_interface_jump)
            if l == 1:
                std = max(std, *rep.constancy_std)
            holds &= rep.bound_holds
            bounds[l].append(rep.chain_bound)
    n_free = all(np.ptp(b) <= 1e-12 * max(b) for b in bounds.values())
    ok = dv <= 1e-7 and jump <= 1e-8 and std <= 1e-8 and holds and n_free
    criterion("C8 chain gluing without boundary conditions", ok,
              f"dv residual {dv:.1e}, jump {jump:.1e}, constancy std {std:.1e}, "
              f"bound holds {holds}, bound independent of N {n_free} "
              f"(l=1: {bounds[1][0]:.4g}, l=2: {bounds[2][0]:.4g})")
    assert ok


# --- 9 ----------------------------------------------------------------------------------------


def test_c9_chain_bc(criterion):
    chain = build_chain(2, n=2)
    u = ellipsoidal_bump([0.0, 0.03], [2.0, 0.42]).d()
    _, rep = glue_bc(chain, u)
    residual = rep.max_dv_residual
    zero_int = max(a / b for a, b in rep.extra["zero_integral"])

    # vanishing trace of d(phi u) on the overlap, in three dimensions where it is not vacuous
    chain3 = build_chain(2, n=3)
    u3 = ellipsoidal_bump([0.0, 0.02, -0.01], [2.0, 0.42, 0.4]).d()
    overlap = chain3.overlaps[0]
    rng = np.random.default_rng(9)
    psis = [PolyForm.random(3, 0, 2, rng) for _ in range(6)]
    g = overlap_source(chain3, 0, u3)
    overlap_pairs = [trace_residual(g, psi, overlap, level=4) for psi in psis]
    overlap_ok = all(v <= tol for v, tol in overlap_pairs)
    # control: a closed form with a boundary trace must fail the same test
    g_bad = overlap_source(chain3, 0, PolyForm(3, 1, {(2,): MultiPoly.constant(3, 1.0)}))
    control = [trace_residual(g_bad, psi, overlap, level=4) for psi in psis]
    control_caught = any(v > tol for v, tol in control)

    top = random_closed_form(2, 2, 1, 0)
    try:
        glue_bc(chain, FieldForm(2, 2, top))
        rejected = False
    except BoundRangeError:
        rejected = True

    ok = residual <= 1e-2 and zero_int <= 1e-3 and overlap_ok and control_caught and rejected
    criterion("C9 chain gluing with boundary conditions", ok,
              f"relative dv residual {residual:.2e}, overlap zero-integral ratio {zero_int:.1e}, "
              f"trace worst ratio {max(v / t for v, t in overlap_pairs):.3f}, control caught {control_caught}, "
              f"top degree rejected {rejected}")
    assert ok


# --- 10 ---------------------------------------------------------------------------------------


def test_c10_mollifier(criterion):
    mass_err = odd = scale_err = 0.0
    for n in (1, 2, 3):
        m1 = build_bump(np.zeros(n), 1.0)
        m2 = build_bump(np.zeros(n), 0.37)
        mass_err = max(mass_err, abs(m1.moment((0,) * n) - 1.0), abs(m2.moment((0,) * n) - 1.0))
        for alpha in multi_indices(n, 8):
            a1 = m1.moment(alpha)
            if any(a % 2 for a in alpha):
                odd = max(odd, abs(a1))
            else:
                scale_err = max(scale_err, abs(m2.moment(alpha) - 0.37 ** sum(alpha) * a1) / abs(a1))
    mt1 = build_bump([0.0, 0.0], 1.0)
    mtr = build_bump([0.0, 0.0], 0.37)
    c1, cr = c_phi_constant(mt1, rho=1.0), c_phi_constant(mtr, rho=0.37)
    c_err = abs(cr - c1 / 0.37) / (c1 / 0.37)
    ok = mass_err <= 1e-10 and odd <= 1e-12 and scale_err <= 1e-10 and c_err <= 1e-10
    criterion("C10 mollifier", ok,
              f"mass error {mass_err:.1e}, odd moments {odd:.1e}, moment scaling {scale_err:.1e}, "
              f"constant scaling {c_err:.1e}")
    assert ok
