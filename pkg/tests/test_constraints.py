import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import random_network, two_node, violated_two_node
from qualbn.constraints import (
    InequalitySystem,
    audit,
    enumerate_inequalities,
    expert_agreement_likelihood,
    format_report,
    inequality_count,
    inequality_slack,
    partial_violation,
    total_violation,
    violation_gradient,
)
from qualbn.datagen import fixture_networks
from qualbn.network import ConstraintSet, Influence, Network, Variable


def net_with(n_w, n_z, extra=0, rng=None, rows=None):
    """W (n_w states) -> Z (n_z states), optionally with an extra binary parent Y."""
    W = Variable("W", tuple(f"w{i}" for i in range(n_w)))
    Z = Variable("Z", tuple(f"z{i}" for i in range(n_z)))
    variables = [W, Z]
    parents = ["W"]
    if extra:
        variables.insert(1, Variable("Y", ("y1", "y2")))
        parents.append("Y")
    k = n_w * (2 if extra else 1)
    if rows is None:
        rng = rng or np.random.default_rng(0)
        rows = rng.dirichlet(np.ones(n_z), size=k)
    cpts = {"W": np.full((1, n_w), 1 / n_w), "Z": rows}
    if extra:
        cpts["Y"] = [[0.5, 0.5]]
    return Network(variables, {"Z": parents}, cpts)


def brute_count(net, cs):
    """Count inequalities by looping over every (m, i, j, y) combination."""
    total = 0
    for inf in cs:
        others = [p for p in net.parents(inf.child) if p != inf.parent]
        n_w = net.cardinality(inf.parent)
        for _y in itertools.product(*(range(net.cardinality(p)) for p in others)):
            for i in range(n_w):
                for j in range(n_w):
                    if i > j:
                        total += net.cardinality(inf.child) - 1
    return total


class TestEnumerate:
    def test_binary_pair_gives_one(self):
        net = net_with(2, 2)
        ineqs = enumerate_inequalities(net, ConstraintSet((Influence("W", "Z", "+"),)))
        assert len(ineqs) == 1
        q = ineqs[0]
        assert (q.threshold, q.higher, q.lower, q.context) == (1, 1, 0, ())

    def test_three_state_parent_gives_all_pairs(self):
        net = net_with(3, 2)
        cs = ConstraintSet((Influence("W", "Z", "+"),))
        ineqs = enumerate_inequalities(net, cs)
        assert sorted((q.higher, q.lower) for q in ineqs) == [(1, 0), (2, 0), (2, 1)]
        assert len(ineqs) == brute_count(net, cs) == 3

    def test_extra_binary_parent_doubles(self):
        cs = ConstraintSet((Influence("W", "Z", "+"),))
        assert len(enumerate_inequalities(net_with(3, 2, extra=1), cs)) == 6

    @pytest.mark.parametrize("fixture", fixture_networks(), ids=lambda f: f.name)
    def test_fixture_counts_match_brute_force(self, fixture):
        n = len(enumerate_inequalities(fixture.network, fixture.constraints))
        assert n == brute_count(fixture.network, fixture.constraints)
        assert n == inequality_count(fixture.network, fixture.constraints)


class TestSlackAndPartial:
    def test_slack_examples(self):
        cs = ConstraintSet((Influence("A", "B", "+"),))
        satisfied = two_node(rows=((0.7, 0.3), (0.3, 0.7)))
        (q,) = enumerate_inequalities(satisfied, cs)
        assert inequality_slack(satisfied, q) == pytest.approx(0.4, abs=1e-15)
        equal = two_node(rows=((0.6, 0.4), (0.6, 0.4)))
        assert inequality_slack(equal, q) == 0.0
        reversed_ = two_node(rows=((0.3, 0.7), (0.7, 0.3)))
        assert inequality_slack(reversed_, q) == pytest.approx(-0.4, abs=1e-15)

    def test_partial_violation_branches(self):
        net = two_node()
        (pos,) = enumerate_inequalities(net, ConstraintSet((Influence("A", "B", "+"),)))
        (neg,) = enumerate_inequalities(net, ConstraintSet((Influence("A", "B", "-"),)))
        assert partial_violation(pos, -0.4) == 0.4
        assert partial_violation(pos, 0.4) == 0.0
        assert partial_violation(neg, 0.4) == 0.4
        assert partial_violation(neg, -0.4) == 0.0
        assert partial_violation(pos, 0.0) == 0.0


class TestTotalViolation:
    def test_satisfied(self):
        for fx in fixture_networks():
            assert total_violation(fx.network, fx.constraints) == 0.0

    def test_uniform_cpts(self):
        for fx in fixture_networks():
            net = fx.network
            uniform = net.with_cpts({
                n: np.full(net.cpt(n).shape, 1 / net.cardinality(n)) for n in net.names
            })
            assert total_violation(uniform, fx.constraints) == pytest.approx(0.0, abs=1e-15)

    def test_single_violation(self):
        net, cs = violated_two_node()
        assert total_violation(net, cs) == pytest.approx(0.4, abs=1e-15)

    def test_zero_iff_sign_consistent(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            net = net_with(3, 3, extra=1, rng=rng)
            for sign in "+-":
                cs = ConstraintSet((Influence("W", "Z", sign),))
                system = InequalitySystem(net, cs)
                slacks = system.slacks(net)
                consistent = np.all(slacks >= 0) if sign == "+" else np.all(slacks <= 0)
                assert (system.total(net) == 0) == consistent

    def test_invariant_under_relabelling(self):
        rng = np.random.default_rng(11)
        net = net_with(3, 3, extra=1, rng=rng)
        cs = ConstraintSet((Influence("W", "Z", "+"), Influence("Y", "Z", "-")))
        rename = {"W": "alpha", "Y": "beta", "Z": "gamma"}
        variables = [Variable(rename[v.name], v.states) for v in reversed(net.variables)]
        parents = {rename[c]: [rename[p] for p in net.parents(c)] for c in net.names}
        cpts = {rename[n]: net.cpt(n) for n in net.names}
        relabelled = Network(variables, parents, cpts)
        cs2 = ConstraintSet(tuple(Influence(rename[i.parent], rename[i.child], i.sign) for i in cs))
        assert total_violation(relabelled, cs2) == pytest.approx(total_violation(net, cs), abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 10_000))
    def test_adjacent_pairs_imply_the_rest(self, n_w, n_z, seed):
        rng = np.random.default_rng(seed)
        rows = rng.dirichlet(np.ones(n_z), size=n_w)
        tails = np.cumsum(rows[:, ::-1], axis=1)[:, ::-1]
        # non-adjacent slacks telescope into sums of adjacent ones
        net = net_with(n_w, n_z, rows=rows)
        cs = ConstraintSet((Influence("W", "Z", "+"),))
        ineqs = enumerate_inequalities(net, cs)
        slack = {(q.higher, q.lower, q.threshold): inequality_slack(net, q) for q in ineqs}
        for (i, j, m), value in slack.items():
            assert value == pytest.approx(sum(slack[(t + 1, t, m)] for t in range(j, i)), abs=1e-12)
        # sort each tail column across parent states: adjacent pairs now hold, so all must
        monotone_tails = np.sort(tails, axis=0)
        monotone_rows = monotone_tails - np.hstack([monotone_tails[:, 1:], np.zeros((n_w, 1))])
        mono = net_with(n_w, n_z, rows=monotone_rows)
        adjacent = [q for q in ineqs if q.higher == q.lower + 1]
        assert all(inequality_slack(mono, q) >= -1e-12 for q in adjacent)
        assert total_violation(mono, cs) < 1e-12


class TestViolationGradient:
    def test_violation_fixture_counts(self):
        net, cs = violated_two_node()
        v = violation_gradient(net, cs)["B"]
        k1 = net.encode_parent_config("B", ("a1",))
        k2 = net.encode_parent_config("B", ("a2",))
        assert v[k1, 1] == 1.0
        assert v[k2, 1] == -1.0
        assert v[k1, 0] == 0.0 and v[k2, 0] == 0.0
        np.testing.assert_array_equal(violation_gradient(net, cs)["A"], 0.0)

    def test_satisfied_is_zero(self):
        for fx in fixture_networks():
            for g in violation_gradient(fx.network, fx.constraints).values():
                assert not g.any()

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        net = random_network(rng, n_vars=5, max_states=3)
        influences = []
        for child in net.names:
            for p in net.parents(child):
                influences.append(Influence(p, child, "+" if rng.random() < 0.5 else "-"))
        if not influences:
            pytest.skip("no edges")
        cs = ConstraintSet(tuple(influences))
        system = InequalitySystem(net, cs)
        if np.abs(system.slacks(net)).min() < 1e-4:
            pytest.skip("a slack sits at a kink")
        theta = net.parameter_vector()
        analytic = np.concatenate([system.gradient(net)[n].ravel() for n in net.names])
        h = 1e-6
        fd = np.empty_like(theta)
        for i in range(theta.size):
            up, down = theta.copy(), theta.copy()
            up[i] += h
            down[i] -= h
            fd[i] = (system.total(net.with_parameter_vector(up)) - system.total(net.with_parameter_vector(down))) / (2 * h)
        np.testing.assert_allclose(fd, analytic, atol=1e-6)


class TestExpertLikelihood:
    def test_no_violation(self):
        fx = fixture_networks()[0]
        assert expert_agreement_likelihood(fx.network, fx.constraints, 2.0) == 1.0

    def test_violation_weight_two(self):
        net, cs = violated_two_node()
        value = expert_agreement_likelihood(net, cs, 2.0)
        assert value == pytest.approx(math.exp(-0.8), abs=1e-15)
        assert value == pytest.approx(0.4493, abs=1e-4)

    def test_large_weight_tends_to_zero(self):
        net, cs = violated_two_node()
        assert expert_agreement_likelihood(net, cs, 1e4) < 1e-100

    def test_weight_must_be_positive(self):
        net, cs = violated_two_node()
        with pytest.raises(ValueError):
            expert_agreement_likelihood(net, cs, 0.0)


class TestAudit:
    def test_satisfied(self):
        fx = fixture_networks()[0]
        report = audit(fx.network, fx.constraints)
        assert report.violated == [] and report.total == 0.0
        assert report.essentially_zero
        assert "total 0.0" in format_report(report)

    def test_single_violation(self):
        net, cs = violated_two_node()
        report = audit(net, cs)
        assert len(report.violated) == 1
        assert report.total == pytest.approx(0.4, abs=1e-15)
        assert report.violated[0].slack == pytest.approx(-0.4, abs=1e-15)
        text = format_report(report)
        assert "B\tA\t+\tm=2\ti=2\tj=1" in text

    def test_two_independent_violations_add(self):
        A = Variable("A", ("a1", "a2"))
        B = Variable("B", ("b1", "b2"))
        C = Variable("C", ("c1", "c2"))
        net = Network([A, B, C], {"B": ["A"], "C": ["A"]}, {
            "A": [[0.5, 0.5]],
            "B": [[0.3, 0.7], [0.7, 0.3]],  # violates + by 0.4
            "C": [[0.9, 0.1], [0.75, 0.25]],  # violates - by 0.15
        })
        cs = ConstraintSet((Influence("A", "B", "+"), Influence("A", "C", "-")))
        report = audit(net, cs)
        first = total_violation(net, ConstraintSet((cs.influences[0],)))
        second = total_violation(net, ConstraintSet((cs.influences[1],)))
        assert report.total == pytest.approx(first + second, abs=1e-15)
        assert report.total == pytest.approx(0.55, abs=1e-15)
        assert [r.inequality.child for r in report.violated] == ["B", "C"]
        assert report.structural_maximum == 2
