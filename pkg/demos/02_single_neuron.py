"""
Verifying a single sigmoid
==========================

The smallest possible verification problem: f(x) = sigmoid(x) on [-1, 1].
Its true minimum is sigmoid(-1), and the optimized relaxation recovers it.
Flipping the sign of the objective asks for the maximum instead.
"""
from alphasig import VerificationProblem, VerifyConfig, verify
from alphasig.model import Layer, NeuralNet
from alphasig.relaxation import sigmoid

# %%
# A network is a list of layers.  The last one must be linear, so an identity
# head sits on top of the sigmoid.
net = NeuralNet((Layer([[1.0]], [0.0], "sigmoid"), Layer([[1.0]], [0.0], "linear")), input_dim=1)

for c, exact in ((1.0, sigmoid(-1.0)), (-1.0, -sigmoid(1.0))):
    prob = VerificationProblem(net, c=[c], x0=[0.0], epsilon=1.0)
    res = verify(prob)
    print(f"c = {c:+.0f}: bound {res.bound:.10f}  exact {exact:.10f}  steps {res.iterations_run}")

# %%
# The trace records the objective at every iteration.  Iteration 0 uses the
# initial slopes, which is the static relaxation.  By default all 300 steps
# run; a tolerance stops early once the objective stalls.
prob = VerificationProblem(net, c=[1.0], x0=[0.0], epsilon=1.0)
res = verify(prob)
print(f"{len(res.trace)} trace entries, first three:", [round(float(v), 8) for v in res.trace[:3]])
res = verify(prob, VerifyConfig(tol=1e-7))
print(f"with tol 1e-7: {len(res.trace)} entries")
