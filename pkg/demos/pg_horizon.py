"""Find the generalized apparent horizon of Painleve-Gullstrand data (m = 1).

The horizon sits at r = 2. We solve on the annulus 1 < r < 3 in the planar
analog, print the continuation trace and the verification report, and
write the horizon polyline next to this script.

    python3 demos/pg_horizon.py [h]
"""
import sys
from pathlib import Path

import numpy as np

from jang_horizons import Sphere, build_domain, find_horizon, make_family, write_mesh
from jang_horizons.spherical_oracle import horizon_radius, radial_profile

h = float(sys.argv[1]) if len(sys.argv) > 1 else 0.05
ids = make_family("pg", dim=2, half_width=3.5)
grid = build_domain(ids, Sphere([0, 0], 3.0), Sphere([0, 0], 1.0), h)
print(f"{grid.n_unknowns} unknowns at h = {h}")

res = find_horizon(grid, ids, verify=True)
print(res.continuation.trace.table())
print()
print(res.report.to_text())

r = res.surface.radii()
target = horizon_radius(radial_profile("pg", 1.0, 2))
print(f"radius range [{r.min():.4f}, {r.max():.4f}], radial reference {target:.4f}")
out = Path(__file__).with_name("pg_horizon.mesh")
write_mesh(out, res.surface)
print(f"wrote {out}")
