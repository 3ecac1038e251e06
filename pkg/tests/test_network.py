import itertools
import json
import math

import numpy as np
import pytest

from builders import all_assignments, chain3, random_network, two_node
from qualbn.datagen import fixture_networks
from qualbn.network import (
    ConstraintSet,
    FormatError,
    Influence,
    Network,
    NetworkError,
    Variable,
    joint_probability,
    load_constraints,
    load_network,
    network_to_dict,
    save_constraints,
    save_network,
    validate_network,
)


class TestValidate:
    def test_well_formed_two_node(self):
        assert validate_network(two_node()) == []

    def test_bad_row_sum_names_variable_and_row(self):
        net = two_node(rows=((0.7, 0.3), (0.6, 0.6)))
        defects = validate_network(net)
        assert len(defects) == 1
        assert "'B'" in defects[0] and "k=1" in defects[0]

    def test_cycle(self):
        A = Variable("A", ("a1", "a2"))
        B = Variable("B", ("b1", "b2"))
        net = Network([A, B], {"A": ["B"], "B": ["A"]},
                      {"A": [[0.5, 0.5], [0.5, 0.5]], "B": [[0.5, 0.5], [0.5, 0.5]]})
        defects = validate_network(net)
        assert defects == ["parent graph contains a cycle"]

    def test_dimension_mismatch(self):
        net = two_node().with_cpts({"B": np.array([[0.5, 0.5]])})
        assert any("shape" in d for d in validate_network(net))

    def test_duplicate_names(self):
        A = Variable("A", ("a1", "a2"))
        net = Network([A, A], {}, {"A": [[0.5, 0.5]]})
        assert any("duplicate variable" in d for d in validate_network(net))

    @pytest.mark.parametrize("fixture", fixture_networks(), ids=lambda f: f.name)
    def test_fixtures_valid_and_every_single_defect_rejected(self, fixture):
        net = fixture.network
        assert validate_network(net) == []
        for name in net.names:
            table = np.array(net.cpt(name))
            for k in range(table.shape[0]):
                bumped = table.copy()
                bumped[k, 0] += 0.01
                assert validate_network(net.with_cpts({name: bumped})), (name, k)
            negative = table.copy()
            negative[0, 0], negative[0, -1] = -0.1, negative[0, -1] + negative[0, 0] + 0.1
            assert validate_network(net.with_cpts({name: negative}))
            assert validate_network(net.with_cpts({name: table[:, :-1]}))
        # adding a back edge from a leaf to a root closes a cycle
        root = net.topological_order()[0]
        leaf = net.topological_order()[-1]
        parents = {n: net.parents(n) for n in net.names}
        parents[root] = (leaf,)
        cyclic = Network(net.variables, parents, net.cpts)
        assert "parent graph contains a cycle" in validate_network(cyclic)


class TestJointProbability:
    def test_two_factor_product(self):
        net = two_node()
        assert joint_probability(net, {"A": "a2", "B": "b2"}) == pytest.approx(0.28, abs=1e-15)

    def test_zero_entry_annihilates(self):
        net = two_node(rows=((1.0, 0.0), (0.3, 0.7)))
        assert joint_probability(net, {"A": "a1", "B": "b2"}) == 0.0

    def test_chain_matches_direct_product(self):
        net = chain3()
        # direct reading of the three CPT entries
        expected = 0.65 * 0.3 * 0.55
        assert joint_probability(net, {"A": "a2", "B": "b2", "C": "c2"}) == pytest.approx(expected, abs=1e-15)

    def test_missing_variable(self):
        with pytest.raises(NetworkError):
            joint_probability(chain3(), {"A": "a1"})

    @pytest.mark.parametrize("seed", range(5))
    def test_sums_to_one(self, seed):
        net = random_network(np.random.default_rng(seed), n_vars=6)
        total = math.fsum(joint_probability(net, a) for a in all_assignments(net))
        assert total == pytest.approx(1.0, abs=1e-9)


class TestParentConfig:
    def net(self):
        A = Variable("A", ("a1", "a2"))
        C = Variable("C", ("c1", "c2", "c3"))
        X = Variable("X", ("x1", "x2"))
        return Network([A, C, X], {"X": ["A", "C"]},
                       {"A": [[0.5, 0.5]], "C": [[0.2, 0.3, 0.5]], "X": np.full((6, 2), 0.5)})

    @pytest.mark.parametrize("states,k", [(("a1", "c1"), 0), (("a2", "c3"), 5), (("a2", "c1"), 3)])
    def test_encode(self, states, k):
        assert self.net().encode_parent_config("X", states) == k

    def test_encode_matches_enumeration_order(self):
        net = self.net()
        tuples = list(itertools.product(("a1", "a2"), ("c1", "c2", "c3")))
        for pos, t in enumerate(tuples):
            assert net.encode_parent_config("X", t) == pos
            assert net.decode_parent_config("X", pos) == dict(zip(("A", "C"), t))

    def test_unknown_state(self):
        with pytest.raises(NetworkError):
            self.net().encode_parent_config("X", ("a1", "c9"))

    @pytest.mark.parametrize("fixture", fixture_networks(), ids=lambda f: f.name)
    def test_round_trip_on_fixtures(self, fixture):
        net = fixture.network
        for name in net.names:
            for k in range(net.n_configs(name)):
                assert net.encode_parent_config(name, net.decode_parent_config(name, k)) == k


class TestFiles:
    def test_network_round_trip(self, tmp_path):
        for fx in fixture_networks():
            save_network(fx.network, tmp_path / "n.json")
            assert load_network(tmp_path / "n.json") == fx.network

    def test_round_trip_random_values(self, tmp_path):
        net = random_network(np.random.default_rng(3), n_vars=5)
        save_network(net, tmp_path / "n.json")
        back = load_network(tmp_path / "n.json")
        for name in net.names:
            np.testing.assert_array_equal(back.cpt(name), net.cpt(name))

    def test_small_row_error_renormalised_large_rejected(self, tmp_path):
        doc = network_to_dict(two_node())
        doc["cpts"]["B"][0] = [0.7, 0.3 + 5e-10]
        (tmp_path / "ok.json").write_text(json.dumps(doc))
        net = load_network(tmp_path / "ok.json")
        assert net.cpt("B")[0].sum() == pytest.approx(1.0, abs=1e-15)
        doc["cpts"]["B"][0] = [0.7, 0.31]
        (tmp_path / "bad.json").write_text(json.dumps(doc))
        with pytest.raises(NetworkError, match="sums to"):
            load_network(tmp_path / "bad.json")

    def test_malformed(self, tmp_path):
        (tmp_path / "bad.json").write_text('{"nodes": [\n  {"name": "A",}\n]}')
        with pytest.raises(FormatError, match="line 2"):
            load_network(tmp_path / "bad.json")

    def test_structure_only_file_gets_uniform_cpts(self, tmp_path):
        doc = network_to_dict(chain3())
        del doc["cpts"]
        (tmp_path / "s.json").write_text(json.dumps(doc))
        net = load_network(tmp_path / "s.json")
        np.testing.assert_allclose(net.cpt("B"), np.full((2, 3), 1 / 3))

    def test_constraints_round_trip(self, tmp_path):
        for fx in fixture_networks():
            save_constraints(fx.constraints, tmp_path / "c.json")
            assert load_constraints(tmp_path / "c.json", fx.network) == fx.constraints

    def test_constraint_on_non_parent_pair(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps(
            {"influences": [{"parent": "A", "child": "C", "sign": "+"}]}))
        with pytest.raises(NetworkError, match="'A' is not a parent of 'C'"):
            load_constraints(tmp_path / "c.json", chain3())

    def test_both_signs_for_one_pair_rejected(self):
        with pytest.raises(NetworkError):
            ConstraintSet((Influence("A", "B", "+"), Influence("A", "B", "-")))
