"""
Certifying a random network
===========================

Generate a 4x10 sigmoid network, bound it with interval arithmetic, then tune
the tangent slopes.  An independent sampling oracle confirms the certified
bound never exceeds any observed value of the network.
"""
import tempfile
from pathlib import Path

from alphasig import VerifyConfig, VerificationProblem, compute_activation_bounds, run_alpha_sig
from alphasig.dual_verifier import tau_compare
from alphasig.model import generate_random, load_model, save_model
from alphasig.oracle import sample_min

# %%
# Networks are plain JSON and load back bit for bit.
net = generate_random([2, 10, 10, 10, 10, 1], weight_std=2.5, bias_std=0.25, seed=11)
path = Path(tempfile.mkdtemp()) / "net.json"
save_model(net, path)
assert load_model(path) == net
print("widths", net.widths)

# %%
# Interval bounds for every hidden pre-activation come first.  They fix the
# slope ranges for the whole run.
prob = VerificationProblem(net, c=[1.0], x0=[0.0, 0.0], epsilon=1.0)
bounds = compute_activation_bounds(prob)
for i in range(len(bounds)):
    width = bounds.pre_hi[i] - bounds.pre_lo[i]
    print(f"layer {i}: mean interval width {width.mean():.3f}")

# %%
# Zero steps gives the static relaxation.  The default 300-step run tightens it.
base = run_alpha_sig(prob, bounds, VerifyConfig(steps=0)).bound
res = run_alpha_sig(prob, bounds)
print(f"\nstatic bound     {base:.6f}")
print(f"optimized bound  {res.bound:.6f}  ({res.iterations_run} steps, {res.wall_time:.3f}s)")
print(f"improvement tau  {tau_compare(res.bound, base):+.2f}%")

# %%
# The oracle samples 1e5 inputs (plus the box corners) and counts any value
# below the bound.
rep = sample_min(prob, 100_000, seed=0, bound=res.bound)
print(f"sampled minimum  {rep.sampled_min:.6f}  violations {rep.violations}")

# %%
# The same network under a Euclidean ball of radius 1.
prob2 = VerificationProblem(net, c=[1.0], x0=[0.0, 0.0], epsilon=1.0, p=2)
res2 = run_alpha_sig(prob2, compute_activation_bounds(prob2))
rep2 = sample_min(prob2, 100_000, seed=0, bound=res2.bound)
print(f"\n2-norm ball: bound {res2.bound:.6f}, sampled minimum {rep2.sampled_min:.6f}, violations {rep2.violations}")
