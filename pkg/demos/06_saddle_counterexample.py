"""Why boundedness matters: the saddle y1^2 - y2^2.

The capacity argument divides the curvature side of the Poincare inequality
by (log R)^2 and lets R grow; for bounded stable solutions the ratio tends to
zero.  The unbounded saddle has curved level sets everywhere and the ratio
grows instead.  This script also writes the dump used by configs/saddle.ini.
"""

import math
import pathlib

from boundary_reaction import (Field, Scenario, WeightModel, boundary_reaction, build_grid,
                               capacity_scan)

here = pathlib.Path(__file__).resolve().parent
grid = build_grid(2, 60.0, 60.0, 64, 48)
u = Field.from_function(grid, lambda a, b, x: a * a - b * b + 0 * x)
u.dump(here / "configs" / "saddle.bin")

s = Scenario(WeightModel.p_laplacian(2.0), boundary_reaction("cubic"))
radii = [math.e ** k for k in (2, 3, 4)]
for R, ratio in zip(radii, capacity_scan(u, s, radii)):
    print(f"R = e^{math.log(R):.0f}: lhs / (log R)^2 = {ratio:.1f}")
print("CLI check: boundary-reaction poincare --config demos/configs/saddle.ini  (exit status 2)")
