import csv
import itertools
import math

import numpy as np
import pytest

from alphasig.dual_verifier import (
    RelaxationState,
    VerifyConfig,
    assemble_linear,
    ascend_gradient,
    backward_signs,
    clip_alphas,
    compute_slope_ranges,
    dual_objective,
    init_state,
    relaxed_objective,
    run_alpha_sig,
    tau_compare,
    write_trace_csv,
)
from alphasig.interval_bounds import ActivationBoundSet, compute_activation_bounds
from alphasig.model import Layer, NeuralNet, VerificationProblem, generate_random, objective_eval
from alphasig.oracle import sample_min

SIG_M1 = 0.2689414213699951
SIG_P1 = 0.7310585786300049
BETA_LOWER_02 = 0.4688779322738624


def single_sigmoid(w=1.0, out=1.0):
    return NeuralNet((Layer([[w]], [0.0], "sigmoid"), Layer([[out]], [0.0], "linear")), 1)


def state_for(net, lower=0.2, upper=0.2):
    hidden = net.layers[:-1]
    return RelaxationState(
        [np.full(layer.out_dim, lower) if layer.activation == "sigmoid" else None for layer in hidden],
        [np.full(layer.out_dim, upper) if layer.activation == "sigmoid" else None for layer in hidden],
    )


def random_problem(seed, widths=(2, 6, 6, 6, 2), std=2.5, eps=1.0, p=math.inf):
    net = generate_random(list(widths), std, 0.25, seed)
    return VerificationProblem(net, np.ones(widths[-1]), np.full(widths[0], 0.1), eps, p)


class TestBackwardSigns:
    def identity_head(self, c):
        net = NeuralNet((Layer(np.eye(2), [0.0, 0.0], "sigmoid"), Layer(np.eye(2), [0.0, 0.0], "linear")), 2)
        return backward_signs(net, c, state_for(net))[0].tolist()

    def test_positive(self):
        assert self.identity_head([1.0, 1.0]) == [1, 1]

    def test_mixed(self):
        assert self.identity_head([1.0, -1.0]) == [1, -1]

    def test_zero_counts_as_lower(self):
        assert self.identity_head([0.0, -1.0]) == [1, -1]

    def test_uses_downstream_role_slope(self):
        # second hidden neuron is upper-bounded; its upper slope flips the sign of the first layer
        net = NeuralNet(
            (
                Layer([[1.0]], [0.0], "sigmoid"),
                Layer([[1.0], [-1.0]], [0.0, 0.0], "sigmoid"),
                Layer([[1.0, 1.0]], [0.0], "linear"),
            ),
            1,
        )
        st = RelaxationState([np.array([0.2]), np.array([0.1, 0.1])], [np.array([0.2]), np.array([0.1, 0.2])])
        s = backward_signs(net, [1.0], st)
        assert s[1].tolist() == [1, 1]
        # coefficient into layer 0: 1*0.1*1 + 1*0.1*(-1) = 0 -> +1
        assert s[0].tolist() == [1]
        st.alpha_lower[1][1] = 0.15
        assert backward_signs(net, [1.0], st)[0].tolist() == [-1]


class TestAssembleLinear:
    def test_hand_composed_chain(self):
        net = single_sigmoid(w=2.0)
        g1, g2 = assemble_linear(net, [1.0], state_for(net, lower=0.2))
        assert g1.tolist() == pytest.approx([0.4], abs=1e-15)
        assert g2 == pytest.approx(BETA_LOWER_02, abs=1e-14)

    def test_zero_objective(self):
        net = generate_random([3, 4, 4, 2], 1.0, 0.25, 0)
        g1, g2 = assemble_linear(net, [0.0, 0.0], state_for(net))
        assert not g1.any() and g2 == 0.0

    def test_linear_network_is_exact(self):
        rng = np.random.default_rng(0)
        net = NeuralNet((Layer(rng.normal(size=(3, 2)), rng.normal(size=3), "linear"),
                         Layer(rng.normal(size=(2, 3)), rng.normal(size=2), "linear")), 2)
        c = np.array([1.0, -2.0])
        g1, g2 = assemble_linear(net, c, state_for(net))
        prob = VerificationProblem(net, c, [0.0, 0.0], 1.0)
        for x in rng.normal(size=(20, 2)):
            assert g1 @ x + g2 == pytest.approx(objective_eval(prob, x), abs=1e-12)

    def test_relaxed_function_dominance(self):
        for seed in range(5):
            prob = random_problem(seed)
            bounds = compute_activation_bounds(prob)
            ranges = compute_slope_ranges(prob.net, bounds)
            rng = np.random.default_rng(seed)
            st = init_state(bounds, ranges)
            for r, lo, up in zip(ranges, st.alpha_lower, st.alpha_upper):
                lo[:] = r.lo_lower + rng.uniform(size=lo.shape) * (r.hi_lower - r.lo_lower)
                up[:] = r.lo_upper + rng.uniform(size=up.shape) * (r.hi_upper - r.lo_upper)
            g1, g2 = assemble_linear(prob.net, prob.c, st, ranges=ranges)
            xs = prob.x0 + rng.uniform(-1, 1, (10_000, 2))
            assert np.all(xs @ g1 + g2 <= objective_eval(prob, xs) + 1e-9)


class TestDualObjective:
    def test_one_norm(self):
        assert dual_objective([3.0, -4.0], 1.0, [0.0, 0.0], 1.0, math.inf) == -6.0

    def test_two_norm(self):
        assert dual_objective([3.0, -4.0], 1.0, [0.0, 0.0], 1.0, 2) == -4.0

    def test_offset_box_against_corners(self):
        g1, x0, eps = np.array([3.0, -4.0]), np.array([1.0, 0.0]), 0.5
        corners = min(g1 @ (x0 + eps * np.array(c)) + 1.0 for c in itertools.product((-1, 1), repeat=2))
        assert dual_objective(g1, 1.0, x0, eps, "inf") == pytest.approx(corners) == pytest.approx(0.5)


class TestAdamAndClip:
    def test_zero_gradient_keeps_alpha(self):
        st = state_for(single_sigmoid())
        ascend_gradient(st, [np.zeros(1)], [np.zeros(1)])
        assert st.alpha_lower[0].tolist() == [0.2] and st.alpha_upper[0].tolist() == [0.2]
        assert st.step == 1

    def test_positive_gradient_increases_until_clipped(self):
        from alphasig.relaxation import slope_limits

        net = single_sigmoid()
        st = state_for(net, lower=0.197)
        r = slope_limits(-1.0, 1.0)
        ranges = [r]
        vals = [st.alpha_lower[0][0]]
        for _ in range(20):
            ascend_gradient(st, [np.ones(1)], [np.zeros(1)], VerifyConfig(lr=0.002, lr_decay=1.0))
            clip_alphas(st, ranges)
            vals.append(st.alpha_lower[0][0])
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert vals[1] > vals[0]
        assert vals[-1] == r.hi_lower

    def test_clip(self):
        from alphasig.relaxation import layer_slope_ranges

        r = layer_slope_ranges(np.array([-1.0, -5.0, -1.0]), np.array([1.0, -1.0, 1.0]))
        st = RelaxationState([np.array([0.3, 0.1, 0.21])], [np.array([0.1, 0.2, 0.21])])
        clip_alphas(st, [r])
        assert st.alpha_lower[0][0] == r.hi_lower[0]
        assert st.alpha_lower[0][2] == 0.21
        assert st.alpha_upper[0][0] == r.lo_upper[0]
        assert st.alpha_upper[0][1] == r.chord[1]


class TestRunAlphaSig:
    def test_single_sigmoid_lower(self):
        net = single_sigmoid()
        prob = VerificationProblem(net, [1.0], [0.0], 1.0)
        res = run_alpha_sig(prob, compute_activation_bounds(prob))
        assert res.bound == pytest.approx(SIG_M1, abs=1e-4)
        assert res.iterations_run <= 300

    def test_single_sigmoid_upper(self):
        net = single_sigmoid()
        prob = VerificationProblem(net, [-1.0], [0.0], 1.0)
        res = run_alpha_sig(prob, compute_activation_bounds(prob))
        assert res.bound == pytest.approx(-SIG_P1, abs=1e-4)

    @pytest.mark.parametrize("c,target", [(1.0, SIG_M1), (-1.0, -SIG_P1)])
    def test_single_sigmoid_from_midpoint_slopes(self, c, target):
        # both range ends are exact for one neuron, so start in the interior
        prob = VerificationProblem(single_sigmoid(), [c], [0.0], 1.0)
        bounds = compute_activation_bounds(prob)
        ranges = compute_slope_ranges(prob.net, bounds)
        st = init_state(bounds, ranges)
        r = ranges[0]
        st.alpha_lower[0][:] = (r.lo_lower + r.hi_lower) / 2
        st.alpha_upper[0][:] = (r.lo_upper + r.hi_upper) / 2
        start = relaxed_objective(prob, st, ranges)[0]
        assert target - start > 1e-3
        best = start
        for _ in range(300):
            _, g_l, g_u, _ = relaxed_objective(prob, st, ranges)
            ascend_gradient(st, g_l, g_u)
            clip_alphas(st, ranges)
            best = max(best, relaxed_objective(prob, st, ranges)[0])
        assert best == pytest.approx(target, abs=1e-4)

    def test_linear_network_exact_at_start(self):
        rng = np.random.default_rng(1)
        W, b = rng.normal(size=(2, 3)), rng.normal(size=2)
        net = NeuralNet((Layer(W, b, "linear"),), 3)
        prob = VerificationProblem(net, [1.0, 1.0], [0.5, 0.0, -0.5], 0.3)
        exact = min(prob.c @ (W @ (prob.x0 + 0.3 * np.array(c)) + b) for c in itertools.product((-1, 1), repeat=3))
        res = run_alpha_sig(prob, compute_activation_bounds(prob))
        assert res.trace[0] == pytest.approx(exact, abs=1e-12)

    def test_best_so_far(self):
        prob = random_problem(3, widths=(1, 10, 10, 10, 10, 1))
        res = run_alpha_sig(prob, compute_activation_bounds(prob), VerifyConfig(tol=None))
        assert res.bound == res.trace.max() == res.best_trace[-1]
        assert np.all(np.diff(res.best_trace) >= 0)
        assert res.trace[res.best_iteration] == res.bound
        assert len(res.trace) == 301

    def test_zero_steps_is_static_baseline(self):
        prob = random_problem(4)
        bounds = compute_activation_bounds(prob)
        res0 = run_alpha_sig(prob, bounds, VerifyConfig(steps=0))
        ranges = compute_slope_ranges(prob.net, bounds)
        assert res0.bound == relaxed_objective(prob, init_state(bounds, ranges), ranges)[0]
        assert run_alpha_sig(prob, bounds).bound >= res0.bound

    @pytest.mark.parametrize("p", [math.inf, 2])
    def test_every_iterate_is_sound(self, p):
        for seed in range(3):
            prob = random_problem(seed, p=p)
            rep = sample_min(prob, 10_000, seed)
            seen = []
            run_alpha_sig(prob, compute_activation_bounds(prob), VerifyConfig(tol=None),
                          callback=lambda k, v, st: seen.append(v))
            assert max(seen) <= rep.sampled_min + 1e-9

    def test_mismatched_bounds(self):
        prob = random_problem(0)
        bad = ActivationBoundSet((np.zeros(6),), (np.ones(6),), ("sigmoid",))
        with pytest.raises(ValueError):
            run_alpha_sig(prob, bad)

    def test_trace_csv(self, tmp_path):
        prob = random_problem(5)
        res = run_alpha_sig(prob, compute_activation_bounds(prob), VerifyConfig(steps=20, tol=None))
        path = tmp_path / "t.csv"
        write_trace_csv(res, path)
        rows = list(csv.DictReader(path.open()))
        assert list(rows[0]) == ["iteration", "objective", "best_so_far", "wall_ms"]
        best = [float(r["best_so_far"]) for r in rows]
        assert len(rows) == 21 and best == sorted(best)


def _fd_check(prob, seed, h=1e-6):
    bounds = compute_activation_bounds(prob)
    ranges = compute_slope_ranges(prob.net, bounds)
    rng = np.random.default_rng(seed)
    st = init_state(bounds, ranges)
    for r, lo, up in zip(ranges, st.alpha_lower, st.alpha_upper):
        # interior points, away from the clip boundaries
        lo[:] = r.lo_lower + rng.uniform(0.2, 0.8, lo.shape) * (r.hi_lower - r.lo_lower)
        up[:] = r.lo_upper + rng.uniform(0.2, 0.8, up.shape) * (r.hi_upper - r.lo_upper)
    _, g_l, g_u, signs = relaxed_objective(prob, st, ranges)
    analytic, numeric = [], []
    for grads, alphas in ((g_l, st.alpha_lower), (g_u, st.alpha_upper)):
        for i, a in enumerate(alphas):
            for j in range(a.size):
                keep = a[j]
                a[j] = keep + h
                fp = relaxed_objective(prob, st, ranges, signs)[0]
                a[j] = keep - h
                fm = relaxed_objective(prob, st, ranges, signs)[0]
                a[j] = keep
                analytic.append(grads[i][j])
                numeric.append((fp - fm) / (2 * h))
    return np.array(analytic), np.array(numeric)


@pytest.mark.parametrize("p", [math.inf, 2])
def test_objective_gradient_matches_finite_differences(p):
    for seed in range(4):
        a, n = _fd_check(random_problem(seed, p=p), seed)
        assert np.linalg.norm(a - n) <= 1e-4 * np.linalg.norm(n)


def test_tau():
    assert tau_compare(-4.0, -5.0) == pytest.approx(20.0)
    assert tau_compare(1.5, 1.5) == 0.0
    assert tau_compare(2.0, 1.0) > 0
    assert math.isnan(tau_compare(1.0, 0.0))
