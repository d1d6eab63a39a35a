"""Radial reference values for the symmetric families.

Prints the horizon radius for each family, mode and dimension, and the
scaling r*(lambda m) = lambda r*(m) for PG data.

    python3 demos/oracle_table.py
"""
from jang_horizons.errors import NoHorizon
from jang_horizons.spherical_oracle import expansion, horizon_radius, radial_profile

print(f"{'family':>14} {'dim':>4} {'mode':>12} {'r*':>14} {'theta(r*)':>11}")
for tag in ("pg", "schwarzschild", "flat"):
    for dim in (2, 3):
        for mode in ("generalized", "mots"):
            prof = radial_profile(tag, 1.0, dim)
            try:
                r = horizon_radius(prof, mode)
            except NoHorizon:
                print(f"{tag:>14} {dim:>4} {mode:>12} {'none':>14}")
                continue
            print(f"{tag:>14} {dim:>4} {mode:>12} {r:>14.10f} {expansion(prof, r, mode):>11.1e}")

print()
for lam in (0.5, 2.0, 4.0):
    r = horizon_radius(radial_profile("pg", lam, 3))
    print(f"PG m = {lam}: r* = {r:.12f}  (r*/m = {r / lam:.12f})")
