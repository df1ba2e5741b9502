"""
Covering a disk with small circles
==================================

Lloyd's map alternates two steps: split the domain into Voronoi cells, then
move every point to the center of the smallest circle covering its cell.
The worst covering radius never goes up.  On a large disk the interior
cells settle into hexagons.
"""

import numpy as np

from quantloc import DomainSpec, WeightScheme, init_points, lloyd_run, render_svg, sukharev_bounds

# start from a hexagonal lattice clipped to the unit disk
disk = DomainSpec.disk(1.0)
design, report = lloyd_run(init_points(disk, 120, method="lattice"), disk,
                           WeightScheme.uniform(), max_iters=60)
print(f"cost {report.cost_trace[0]:.4f} -> {design.cost:.4f} in {report.iterations} steps")

# count the sides of the cells away from the boundary
sides = []
for cell in design.cells:
    V = cell.vertices
    if np.linalg.norm(V, axis=1).max() < 0.8:
        e = np.roll(V, -1, axis=0) - V
        f = np.roll(e, -1, axis=0)
        # sine of the turning angle at each vertex; near-straight vertices are not corners
        turn = (e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0]) / (
            np.linalg.norm(e, axis=1) * np.linalg.norm(f, axis=1))
        sides.append(int(np.sum(np.abs(turn) > np.sin(np.radians(1.0)))))
print("interior cells by side count:", {k: sides.count(k) for k in sorted(set(sides))})

with open("hexagons.svg", "w") as fh:
    fh.write(render_svg(design, title="Lloyd design, 120 points"))
print("wrote hexagons.svg")

# on the unit square the optimum is squeezed between two simple grid bounds
square = DomainSpec.square(0.5)
for N in (4, 9, 16):
    d, _ = lloyd_run(init_points(square, N, method="lattice"), square, WeightScheme.uniform())
    lo, hi = sukharev_bounds(N, 2)
    print(f"N={N:2d}: {lo:.4f} <= {d.cost:.4f} <= {hi:.4f}")
