"""Two overlapping trapped disks and the outermost horizon around them.

Each disk alone is trapped for PG(m = 1) data. enclosing_horizon solves on
the intersection of their outer regions and returns a single curve around
both; outermost then iterates until the curve stops moving.

    python3 demos/two_disks.py
"""
import numpy as np

from jang_horizons import Sphere, TrappedDomain, build_domain, enclosing_horizon, make_family, outermost
from jang_horizons.horizon_geometry import hausdorff

h = 0.05
ids = make_family("pg", dim=2, half_width=7.0)
base = build_domain(ids, Sphere([0, 0], 6.0), Sphere([0, 0], 0.8), h)
A = TrappedDomain.from_shape(base, Sphere([-0.1, 0], 0.8))
B = TrappedDomain.from_shape(base, Sphere([0.1, 0], 0.8))

surf, D, _ = enclosing_horizon(A, B, ids)
r = surf.radii()
print(f"enclosing horizon: {surf.component_count} component(s), r in [{r.min():.4f}, {r.max():.4f}]")
print("encloses both disks:", bool(np.all(surf.inside_mask[(A.enclosed | B.enclosed) & (base.phi_outer < 0)])))

res = outermost(base, ids, [A, B])
print(f"outermost: {res.rounds} round(s), Hausdorff steps {[f'{d:.2e}' for d in res.distances]}")
print("outer regions shrink at every step:", all(res.masks_decreasing))
print(f"distance to the enclosing horizon: {hausdorff(res.surface.vertices, surf.vertices):.2e}")
