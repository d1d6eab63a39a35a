import numpy as np
import pytest

from jang_horizons.errors import DomainError, NoHorizon
from jang_horizons.spherical_oracle import (expansion, horizon_radius, radial_capillary_solve,
                                            radial_profile, radial_scalars)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("mode", ["generalized", "mots"])
def test_pg_horizon_at_twice_the_mass(dim, mode):
    r = horizon_radius(radial_profile("pg", 1.0, dim), mode)
    assert r == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("dim", [2, 3])
def test_minimal_sphere_at_half_the_mass(dim):
    r = horizon_radius(radial_profile("schwarzschild", 1.0, dim))
    assert r == pytest.approx(0.5, abs=1e-10)


def test_flat_has_no_horizon():
    with pytest.raises(NoHorizon):
        horizon_radius(radial_profile("flat", 1.0, 3))


def test_non_symmetric_family_rejected():
    with pytest.raises(DomainError):
        radial_profile("brill-lindquist")


def test_pg_sphere_scalars_closed_form():
    prof = radial_profile("pg", 1.0, 3)
    r = np.array([1.0, 2.0, 4.0])
    H, T = radial_scalars(prof, r)
    assert np.allclose(H, 2 / r)
    assert np.allclose(np.abs(T), 2 * np.sqrt(2 / r ** 3))


def test_expansion_changes_sign_at_root():
    prof = radial_profile("pg", 1.0, 3)
    assert expansion(prof, 1.9) < 0 < expansion(prof, 2.1)


def test_radial_solution_satisfies_outer_condition():
    prof = radial_profile("pg", 1.0, 2)
    sol = radial_capillary_solve(prof, 0.1, 0.04, 1.0, 3.0)
    assert sol(3.0) == pytest.approx(0.0, abs=1e-8)
    assert sol(1.5) < 0
