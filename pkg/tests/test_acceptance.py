"""Acceptance checks, one test per criterion.

Long solves are shared through module fixtures. Each test records a
PASS/FAIL line (printed in the terminal summary) before asserting.
"""
import time

import numpy as np
import pytest

from jang_horizons.horizon_algebra import (TrappedDomain, enclosing_horizon, find_horizon,
                                           outermost)
from jang_horizons.horizon_geometry import hausdorff
from jang_horizons.initial_data import Sphere, Union, build_domain, make_family
from jang_horizons.jang_core import GraphOperator
from jang_horizons.spherical_oracle import expansion, horizon_radius, radial_profile

R_STAR = 2.0


def centered(tag, dim, outer, inner, h, n):
    """n^dim grid with spacing h centred on the origin, annulus outer > r > inner."""
    ids = make_family(tag, dim=dim, half_width=(n - 1) * h / 2 + h)
    grid = build_domain(ids, Sphere(np.zeros(dim), outer), Sphere(np.zeros(dim), inner), h,
                        shape=(n,) * dim)
    return grid, ids


def timed_find(grid, ids, **kw):
    start = time.perf_counter()
    res = find_horizon(grid, ids, verify=True, **kw)
    return res, time.perf_counter() - start


@pytest.fixture(scope="module")
def pg2d():
    grid, ids = centered("pg", 2, 3.0, 1.0, 0.025, 256)
    return timed_find(grid, ids)


@pytest.fixture(scope="module")
def pg2d_coarse():
    grid, ids = centered("pg", 2, 3.0, 1.0, 0.05, 128)
    return grid, ids, timed_find(grid, ids)[0]


@pytest.fixture(scope="module")
def pg3d():
    grid, ids = centered("pg", 3, 3.0, 0.75, 6.4 / 63, 64)
    return timed_find(grid, ids)


@pytest.fixture(scope="module")
def disks():
    h, c, rd = 0.05, 0.1, 0.8
    ids = make_family("pg", dim=2, half_width=7.0)
    base = build_domain(ids, Sphere([0, 0], 6.0), Sphere([0, 0], rd), h)
    A = TrappedDomain.from_shape(base, Sphere([-c, 0], rd))
    B = TrappedDomain.from_shape(base, Sphere([c, 0], rd))
    return base, ids, A, B


def radius_error(res):
    r = res.surface.radii()
    return float(np.max(np.abs(r - R_STAR)))


# ----------------------------------------------------------------------


def test_criterion_01_pg_radius(record, pg2d, pg3d):
    (res2, sec2), (res3, sec3) = pg2d, pg3d
    h2, h3 = res2.grid.h, res3.grid.h
    e2, e3 = radius_error(res2), radius_error(res3)
    ok = e2 <= 2 * h2 and sec2 <= 120 and e3 <= 2 * h3 and sec3 <= 900
    record(1, ok, f"2D 256^2 |r-2| max {e2:.4f} (<= {2 * h2:.4f}) in {sec2:.0f}s (<= 120); "
                  f"3D 64^3 |r-2| max {e3:.4f} (<= {2 * h3:.4f}) in {sec3:.0f}s (<= 900)")
    assert ok


def test_criterion_02_minimal_sphere(record):
    rows, ok = [], True
    for dim, n in ((2, 128), (3, 64)):
        R, rin = 1.0, 0.15
        h = (2 * R + 0.2) / (n - 1)
        grid, ids = centered("schwarzschild", dim, R, rin, h, n)
        res = find_horizon(grid, ids)
        r = res.surface.radii()
        err = float(np.max(np.abs(r - 0.5)))
        ok &= err <= 2 * h
        text = f"{dim}D |r-0.5| max {err:.4f} (<= {2 * h:.4f})"
        if dim == 3:
            rel = abs(res.surface.area_value / (16 * np.pi) - 1)
            ok &= rel <= 0.02
            text += f", area {res.surface.area_value:.3f} vs 16pi ({100 * rel:.2f}% <= 2%)"
        rows.append(text)
    record(2, ok, "; ".join(rows))
    assert ok


def test_criterion_03_barrier_bounds(record, pg2d, pg3d):
    counts = {}
    for name, (res, _) in (("2D", pg2d), ("3D", pg3d)):
        recs = list(res.continuation.trace)
        counts[name] = (len(recs), sum(r.envelope_violations + r.lower_bound_violations
                                       + r.collar_violations + r.outer_collar_violations for r in recs))
    ok = all(v == 0 for _, v in counts.values())
    record(3, ok, ", ".join(f"{k}: {v} violations over {n} steps" for k, (n, v) in counts.items()))
    assert ok


def test_criterion_04_residual_convergence(record, pg2d, pg2d_coarse):
    coarse = pg2d_coarse[2].report.residual
    fine = pg2d[0].report.residual
    ratio = fine / coarse
    ok = coarse <= 0.1 and 0.35 <= ratio <= 0.65
    record(4, ok, f"residual h=0.05 {coarse:.3e} (<= 0.1), h=0.025 {fine:.3e}, "
                  f"ratio {ratio:.3f} (band [0.35, 0.65])")
    assert ok


def test_criterion_05_curvature_bound(record, pg2d, pg3d):
    worst, bad = 0.0, 0
    for res, _ in (pg2d, pg3d):
        for r in res.continuation.trace:
            worst = max(worst, r.sup_mean_curvature / r.curvature_bound)
            bad += not r.curvature_ok
    ok = bad == 0
    record(5, ok, f"{bad} steps with sup|H| > 2C; largest sup|H|/2C = {worst:.3f}")
    assert ok


def test_criterion_06_outer_minimizing(record, pg2d, pg3d):
    parts, ok = [], True
    for name, (res, _) in (("2D", pg2d), ("3D", pg3d)):
        p = res.report.probes
        n_bumps = len(p.bump_areas)
        worst = float(np.min(p.bump_areas - p.base_area)) / p.base_area
        ok &= n_bumps == 50 and p.passed
        parts.append(f"{name}: {n_bumps} bumps, min relative area change {worst:.2e} (>= -1e-3)")
    record(6, ok, "; ".join(parts))
    assert ok


def test_criterion_07_stability(record, pg2d, pg3d):
    parts, ok = [], True
    for name, (res, _) in (("2D", pg2d), ("3D", pg3d)):
        s = res.report.stability
        ok &= len(s.margins) == 100 and s.normalized >= -0.05
        parts.append(f"{name}: min margin / (kappa^2 area) = {s.normalized:.3f} (>= -0.05)")
    record(7, ok, "; ".join(parts))
    assert ok


def test_criterion_08_enclosing_horizon(record, disks):
    base, ids, A, B = disks
    surf, D, _ = enclosing_horizon(A, B, ids)
    in_domain = base.phi_outer < 0
    covers = bool(np.all(surf.inside_mask[(A.enclosed | B.enclosed) & in_domain]))
    single = surf.component_count == 1
    # idempotence: a domain bounded by a horizon gives that horizon back
    surf_a, Da, _ = enclosing_horizon(A, A, ids)
    again, _, _ = enclosing_horizon(Da, Da, ids)
    dist = hausdorff(again.vertices, surf_a.vertices)
    ok = single and covers and dist <= 2 * base.h
    record(8, ok, f"components {surf.component_count}, both masks enclosed {covers}, "
                  f"idempotence Hausdorff {dist:.2e} (<= {2 * base.h})")
    assert ok


def test_criterion_09_outermost(record, disks):
    base, ids, A, B = disks
    ab = outermost(base, ids, [A, B])
    ba = outermost(base, ids, [B, A])
    decreasing = all(ab.masks_decreasing) and all(ba.masks_decreasing)
    monotone = all(np.all(np.diff(o.distances) <= 0) for o in (ab, ba))
    settled = ab.distances[-1] < base.h / 2 and ba.distances[-1] < base.h / 2
    order = hausdorff(ab.surface.vertices, ba.surface.vertices)
    ok = decreasing and monotone and settled and order <= 2 * base.h
    record(9, ok, f"masks decreasing {decreasing}, distances {[f'{d:.1e}' for d in ab.distances]} "
                  f"monotone {monotone}, final < h/2 {settled}, seed-order Hausdorff {order:.1e}")
    assert ok


def test_criterion_10_oracle_self_checks(record):
    worst_root = 0.0
    for tag, dim, mode in (("pg", 2, "generalized"), ("pg", 3, "generalized"), ("pg", 3, "mots"),
                           ("schwarzschild", 3, "generalized")):
        prof = radial_profile(tag, 1.0, dim)
        worst_root = max(worst_root, abs(expansion(prof, horizon_radius(prof, mode), mode)))
    base = horizon_radius(radial_profile("pg", 1.0, 3))
    scale_err = max(abs(horizon_radius(radial_profile("pg", lam, 3)) - lam * base) / lam
                    for lam in (0.5, 2.0, 4.0))
    root_tol = 2 * (1e-13 + 4 * np.finfo(float).eps * 4 * base)
    ids = make_family("pg", dim=2, half_width=3.0)
    grid = build_domain(ids, Sphere([0, 0], 2.0), Sphere([0, 0], 0.6), 0.1)
    op = GraphOperator(grid, ids)
    pts = grid.points[grid.interior]
    r = np.linalg.norm(pts, axis=1)
    worst_jac = 0.0
    for k in range(50):
        rng = np.random.default_rng(k)
        u = -rng.uniform(0.5, 4) * (2.0 - r) + 0.2 * rng.standard_normal(len(r))
        t, eps = rng.uniform(0.01, 0.2), rng.uniform(0.01, 0.05)
        _, J = op.residual(u, t, eps, with_jacobian=True)
        v = rng.standard_normal(len(u))
        fd = (op.residual(u + 1e-6 * v, t, eps) - op.residual(u - 1e-6 * v, t, eps)) / 2e-6
        worst_jac = max(worst_jac, np.linalg.norm(J @ v - fd) / np.linalg.norm(fd))
    ok = worst_root <= 1e-10 and scale_err <= root_tol and worst_jac <= 1e-4
    record(10, ok, f"root residual {worst_root:.1e} (<= 1e-10), scaling error {scale_err:.1e} "
                   f"(<= {root_tol:.1e}), Jacobian rel. error {worst_jac:.1e} (<= 1e-4)")
    assert ok


def test_criterion_11_mots_mode(record, pg2d_coarse):
    grid, ids, gen = pg2d_coarse
    mots = find_horizon(grid, ids, mode="mots")
    err = radius_error(mots)
    gap = hausdorff(mots.surface.vertices, gen.surface.vertices)
    ok = err <= 2 * grid.h and gap <= 2 * grid.h
    record(11, ok, f"MOTS |r-2| max {err:.4f} (<= {2 * grid.h}), distance to generalized "
                   f"horizon {gap:.4f} (<= {2 * grid.h})")
    assert ok
