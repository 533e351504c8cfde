"""
A small experiment grid
=======================

Two families of random 4-layer networks.  In the first, model j draws weights
with standard deviation 2.5/j, so later models are closer to linear.  In the
second every model uses 2.5.  For each network we report tau, the percent
improvement of the optimized bound over the static one.
"""
import numpy as np

from alphasig.cli import run_instance

SIZES = (5, 10, 50)
MODELS = 5

for exp_id in (1, 2):
    print(f"\nfamily {exp_id}")
    print("size   " + "".join(f"{'tau_' + str(m):>9}" for m in range(1, MODELS + 1)) + "   time/net")
    for size in SIZES:
        rows = [run_instance((exp_id, size, m, 0, 300, 1, 1)) for m in range(1, MODELS + 1)]
        taus = "".join(f"{r['tau']:>+9.1f}" for r in rows)
        print(f"4x{size:<4}" + taus + f"   {np.mean([r['wall_time'] for r in rows]):.3f}s")
