"""
Tangent lines for a sigmoid neuron
==================================

A sigmoid neuron with pre-activation in [x_lo, x_hi] is bounded by two lines.
Each line is a tangent of the sigmoid, picked by its slope.  This script walks
through the intercept map, the admissible slope ranges, and what happens when
a range collapses to a chord.
"""
import numpy as np

from alphasig.oracle import bound_validity_scan
from alphasig.relaxation import (
    BoundRole,
    anchored_tangent_slope,
    intercept_of_slope,
    sigmoid,
    slope_limits,
)

# %%
# The intercept of a tangent is a function of its slope.  Slope 0.25 touches
# at the inflection point, so both roles give the same intercept, 0.5.
for alpha in (0.25, 0.2, 0.1, 0.01):
    lo = intercept_of_slope(alpha, BoundRole.LOWER)
    up = intercept_of_slope(alpha, BoundRole.UPPER)
    print(f"alpha {alpha:5.2f}  lower beta {lo:.6f}  upper beta {up:.6f}  sum {lo + up:.15f}")

# %%
# On [-1, 1] the sigmoid is convex on the left and concave on the right.  A
# lower tangent may only touch on the left half, and must not cross the curve
# at x_hi.  The steepest such line goes through the anchor (x_hi, sigma(x_hi)).
r = slope_limits(-1.0, 1.0)
print("\nslope ranges on [-1, 1]")
print(f"  lower: [{r.lo_lower:.6f}, {r.hi_lower:.6f}]")
print(f"  upper: [{r.lo_upper:.6f}, {r.hi_upper:.6f}]")

alpha, x_t = anchored_tangent_slope((1.0, sigmoid(1.0)), BoundRole.LOWER, -1.0)
print(f"  anchored lower tangent touches at x = {x_t:.6f} with slope {alpha:.6f}")

# %%
# Every slope inside a range gives a valid line.  One slope beyond the end
# does not, which the dense scan from the oracle module detects.
for a in (r.lo_lower, 0.5 * (r.lo_lower + r.hi_lower), r.hi_lower, r.hi_lower + 1e-3):
    worst = bound_validity_scan(-1.0, 1.0, a, "lower")
    print(f"  lower slope {a:.6f}: worst violation {worst:+.2e}")

# %%
# On an interval that is entirely convex, no upper tangent can stay above the
# curve, so the upper role collapses to the chord between the endpoints.
r = slope_limits(-5.0, -1.0)
print(f"\n[-5, -1]: upper collapsed {r.upper_collapsed}, chord slope {r.chord:.6f}")
xs = np.linspace(-5.0, -1.0, 5)
chord = r.chord * xs + r.chord_intercept
print("  chord minus sigmoid:", np.round(chord - sigmoid(xs), 5))
