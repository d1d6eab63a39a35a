import numpy as np
import pytest

from jang_horizons.barriers import (barrier_fields, boundary_admissibility, build_barriers,
                                    choose_delta, data_bound, expansion_margin)
from jang_horizons.errors import AdmissibilityError, BarrierError
from jang_horizons.initial_data import Sphere, build_domain, make_family
from jang_horizons.spherical_oracle import radial_profile, radial_scalars


def annulus(tag="pg", inner=1.0, outer=3.0, h=0.05, dim=2):
    ids = make_family(tag, dim=dim, half_width=outer + 0.5)
    return build_domain(ids, Sphere(np.zeros(dim), outer), Sphere(np.zeros(dim), inner), h), ids


def test_margin_signs():
    assert expansion_margin(1.0, 0.0, 0.01, "generalized") > 0
    assert expansion_margin(2.0, 2.9, 0.01, "generalized") < 0
    assert expansion_margin(1.0, -1.0, 0.0, "mots") == 0.0


def test_pg_annulus_admissible():
    grid, ids = annulus()
    rep = boundary_admissibility(grid, ids, 0.01)
    assert rep.ok
    H, T = radial_scalars(radial_profile("pg", 1.0, 2), np.array([1.0]))
    exact = np.sqrt(T[0] ** 2 + 0.01 ** 2) - H[0]
    assert rep.inner_margin == pytest.approx(exact, abs=2 * grid.h)


def test_untrapped_inner_boundary_rejected():
    grid, ids = annulus(inner=2.5, outer=5.0)
    with pytest.raises(AdmissibilityError) as info:
        boundary_admissibility(grid, ids, 0.01)
    assert info.value.margin < 0


def test_report_without_raising():
    grid, ids = annulus(inner=2.5, outer=5.0)
    assert not boundary_admissibility(grid, ids, 0.01, raise_on_fail=False).inner_ok


def test_choose_delta_at_least_two_cells():
    grid, ids = annulus()
    delta = choose_delta(grid, ids, 0.01)
    assert 2 * grid.h <= delta < grid.separation() / 2


def test_flat_data_has_no_collar():
    grid, ids = annulus("flat")
    with pytest.raises(BarrierError):
        choose_delta(grid, ids, 0.01)


def test_barrier_formulas():
    grid, ids = annulus()
    t, delta = 0.1, 0.2
    upper, lower, d_outer, d_inner = barrier_fields(grid, ids, t, delta, C=5.0)
    near = np.abs(d_inner - 0.1) < 0.02
    assert np.allclose(upper[near], (d_inner[near] - 0.2) / 0.1)
    assert np.all(upper[d_inner > delta] == 0)
    assert np.all(upper <= 0) and np.all(lower <= upper)
    far = d_outer > delta
    assert np.allclose(lower[far], -5.0 / t)


def test_flat_bound_is_one():
    grid, ids = annulus("flat")
    assert data_bound(grid, ids) == 1.0


def test_barriers_pass_discrete_check():
    grid, ids = annulus()
    pair = build_barriers(grid, ids, 0.1, 0.04, choose_delta(grid, ids, 0.04))
    assert pair.theta == pair.delta / 2
    assert np.all(pair.lower <= pair.upper)
