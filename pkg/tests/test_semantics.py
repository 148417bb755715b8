"""Semantic store tests.  Prototype expectations come from a brute-force
co-occurrence oracle; retrieval thresholds in the schema fixtures were chosen
so the excitation arithmetic is exact and checkable by hand."""

import random

import pytest

from cogsim.semantics import SemanticError, SemanticStore


def subsets_oracle(items):
    items = sorted(items)
    out = []
    for mask in range(1, 1 << len(items)):
        out.append(tuple(items[i] for i in range(len(items)) if mask & (1 << i)))
    return out


def cooccurrence_oracle(observations):
    """Brute-force counts: each observation bumps every nonempty subset of
    its feature set by one."""
    counts = {}
    for features in observations:
        for sub in subsets_oracle(features):
            counts[sub] = counts.get(sub, 0) + 1
    return counts


class TestRegistration:
    def test_register_allocates_units(self):
        store = SemanticStore()
        p = store.register_percept("penguin", "visual", 4)
        assert p.percept_id == "penguin(visual)"
        assert len(p.assembly) == 4

    def test_duplicate_label_modality_rejected(self):
        store = SemanticStore()
        store.register_percept("penguin", "visual", 4)
        with pytest.raises(SemanticError):
            store.register_percept("penguin", "visual", 4)

    def test_same_label_other_modality_ok(self):
        store = SemanticStore()
        store.register_percept("car", "visual")
        store.register_percept("car", "lexical")
        assert store.lookup("car", "lexical").percept_id == "car(lexical)"
        with pytest.raises(SemanticError):
            store.lookup("car")  # ambiguous bare label

    def test_amodal_percept(self):
        store = SemanticStore()
        p = store.register_percept("justice", "amodal", 6)
        assert p.modality == "amodal"
        assert len(p.assembly) == 6


class TestConsolidateReplay:
    def test_bidirectional_replay_strengthens_both_ways(self):
        store = SemanticStore()
        store.register_percept("car", "visual")
        store.register_percept("car", "lexical")
        store.consolidate_replay(
            [["car(visual)"], ["car(lexical)"]], "both", repeats=5
        )
        fwd = store.edge_weight(["car(visual)"], "car(lexical)")
        bwd = store.edge_weight(["car(lexical)"], "car(visual)")
        assert fwd == bwd == 5.0

    def test_forward_only_leaves_backward_empty(self):
        store = SemanticStore()
        store.register_percept("car", "visual")
        store.register_percept("car", "lexical")
        store.consolidate_replay([["car(visual)"], ["car(lexical)"]], "forward", 3)
        assert store.edge_weight(["car(visual)"], "car(lexical)") == 3.0
        assert store.edge_weight(["car(lexical)"], "car(visual)") == 0.0

    def test_pair_input_creates_complementary_entry(self):
        store = SemanticStore()
        for label in ("chocolate", "cone", "ice cream"):
            store.register_percept(label)
        store.consolidate_replay([["chocolate", "cone"], ["ice cream"]], "forward", 1)
        assert store.edge_weight(["chocolate", "cone"], "ice cream") == 1.0
        assert store.edge_weight(["chocolate"], "ice cream") == 1.0
        assert store.edge_weight(["cone"], "ice cream") == 1.0

    def test_short_trace_rejected(self):
        store = SemanticStore()
        store.register_percept("x")
        with pytest.raises(SemanticError):
            store.consolidate_replay([["x"]], "forward", 1)


class TestRetrieve:
    def hub(self):
        store = SemanticStore(theta_p=1.0)
        store.register_percept("penguin", "visual")
        store.register_percept("bird", "lexical")
        store.register_percept("chirping", "auditory")
        store.consolidate_replay([["penguin(visual)"], ["bird(lexical)"]], "both", 2)
        store.consolidate_replay([["penguin(visual)"], ["chirping(auditory)"]], "both", 2)
        return store

    def test_automatic_spreads_to_related_percepts(self):
        store = self.hub()
        hops = store.retrieve(["penguin(visual)"], "automatic")
        assert "bird(lexical)" in hops[-1]
        assert "chirping(auditory)" in hops[-1]

    def test_automatic_mode_preconditions(self):
        store = self.hub()
        with pytest.raises(SemanticError):
            store.retrieve(["penguin(visual)", "bird(lexical)"], "automatic")
        with pytest.raises(SemanticError):
            store.retrieve(["penguin(visual)"], "automatic", supplementary=["bird(lexical)"])
        with pytest.raises(SemanticError):
            store.retrieve(["penguin(visual)"], "automatic", hops=0)

    def test_supplementary_percepts_disambiguate_relations(self):
        store = SemanticStore(theta_p=4.0)
        for label in ("seed", "water", "germination", "growth",
                      "animals", "living things", "life"):
            store.register_percept(label)
        store.consolidate_replay([["seed", "water", "germination"], ["growth"]], "forward", 1)
        store.consolidate_replay([["seed", "animals", "living things"], ["life"]], "forward", 1)
        grew = store.retrieve(
            ["seed"], "controlled", supplementary=["water", "germination"]
        )[-1]
        assert "growth(amodal)" in grew and "life(amodal)" not in grew
        lived = store.retrieve(
            ["seed"], "controlled", supplementary=["animals", "living things"]
        )[-1]
        assert "life(amodal)" in lived and "growth(amodal)" not in lived

    def test_suppressed_percept_absent_from_every_hop(self):
        store = self.hub()
        store.register_percept("fly", "amodal")
        store.consolidate_replay([["penguin(visual)"], ["fly"]], "forward", 3)
        hops = store.retrieve(["penguin(visual)"], "controlled", suppress=["fly"])
        assert all("fly(amodal)" not in h for h in hops)

    def test_bias_can_activate_and_never_removes(self):
        store = self.hub()
        store.register_percept("remote", "amodal")
        base = store.retrieve(["penguin(visual)"], "controlled")[-1]
        assert "remote(amodal)" not in base
        rng = random.Random(8)
        for _ in range(20):
            b = rng.uniform(1.0, 9.0)
            hops = store.retrieve(["penguin(visual)"], "controlled", bias={"remote": b})
            assert "remote(amodal)" in hops[-1]

    def test_deterministic_function_of_store(self):
        store = self.hub()
        a = store.retrieve(["penguin(visual)"], "automatic")
        b = store.retrieve(["penguin(visual)"], "automatic")
        assert a == b


class TestPrototype:
    def bird_store(self):
        store = SemanticStore()
        for label in "abcd":
            store.register_percept(label, "visual")
        store.register_percept("bird", "lexical")
        return store

    OBSERVATIONS = [
        (["a(visual)", "b(visual)", "c(visual)"], "bird(lexical)"),
        (["a(visual)", "b(visual)", "d(visual)"], "bird(lexical)"),
        (["a(visual)", "d(visual)"], "bird(lexical)"),
    ]

    def test_bird_variants_match_counting_oracle(self):
        store = self.bird_store()
        proto = store.build_prototype(self.OBSERVATIONS, repeats=1)
        oracle = cooccurrence_oracle([feats for feats, _ in self.OBSERVATIONS])
        assert proto.weights == {k: float(v) for k, v in oracle.items()}
        w = proto.weights
        assert w[("a(visual)",)] == 3
        assert w[("b(visual)",)] == 2
        assert w[("c(visual)",)] == 1
        assert w[("d(visual)",)] == 2
        assert w[("a(visual)", "b(visual)")] == 2
        assert w[("a(visual)", "c(visual)")] == 1
        assert w[("b(visual)", "c(visual)")] == 1
        assert w[("a(visual)", "d(visual)")] == 2
        assert w[("b(visual)", "d(visual)")] == 1

    def test_single_observation(self):
        store = self.bird_store()
        proto = store.build_prototype([(["a(visual)"], "bird(lexical)")])
        assert proto.weights == {("a(visual)",): 1.0}

    def test_repeated_observations_preserve_ratios(self):
        store = self.bird_store()
        doubled = self.OBSERVATIONS + self.OBSERVATIONS
        proto = store.build_prototype(doubled, repeats=1)
        oracle = cooccurrence_oracle([feats for feats, _ in self.OBSERVATIONS])
        assert proto.weights == {k: 2.0 * v for k, v in oracle.items()}

    def test_oracle_equivalence_random_observation_sets(self):
        rng = random.Random(6102)
        for _ in range(25):
            store = SemanticStore()
            features = [f"f{i}" for i in range(5)]
            for f in features:
                store.register_percept(f, "visual")
            store.register_percept("target", "lexical")
            observations = []
            for _ in range(rng.randint(1, 6)):
                feats = rng.sample(features, rng.randint(1, 4))
                observations.append(
                    ([f"{f}(visual)" for f in feats], "target(lexical)")
                )
            proto = store.build_prototype(observations)
            oracle = cooccurrence_oracle([f for f, _ in observations])
            assert proto.weights == {k: float(v) for k, v in oracle.items()}

    def test_mixed_targets_rejected(self):
        store = self.bird_store()
        store.register_percept("other", "lexical")
        with pytest.raises(SemanticError):
            store.build_prototype(
                [(["a(visual)"], "bird(lexical)"), (["a(visual)"], "other(lexical)")]
            )


class TestAssemblyExcitation:
    def dropout_store(self):
        store = SemanticStore()
        store.register_percept("penguin", "visual", 4)
        store.register_percept("cannot fly")
        store.consolidate_replay([["penguin(visual)"], ["cannot fly"]], "forward", 2)
        return store

    def test_full_assembly_sums_all_subsets(self):
        store = self.dropout_store()
        assert store.assembly_excitation(["penguin(visual)"], "cannot fly") == 15 * 2.0

    def test_one_unit_dropped_loses_half_the_entries(self):
        store = self.dropout_store()
        got = store.assembly_excitation(
            ["penguin(visual)"], "cannot fly", dropout={"penguin(visual)": [0]}
        )
        assert got == 7 * 2.0

    def test_all_units_dropped(self):
        store = self.dropout_store()
        got = store.assembly_excitation(
            ["penguin(visual)"], "cannot fly", dropout={"penguin(visual)": [0, 1, 2, 3]}
        )
        assert got == 0.0

    def test_unknown_target_rejected(self):
        store = self.dropout_store()
        with pytest.raises(SemanticError):
            store.assembly_excitation(["penguin(visual)"], "no such percept")

    def test_orthogonalization_by_shared_units(self):
        # a percept sharing k of n units reaches only the shared-subset sum
        for n, k in [(3, 1), (4, 2), (5, 3)]:
            store = SemanticStore()
            shared = [f"u{i}" for i in range(k)]
            p1_units = shared + [f"p1-{i}" for i in range(n - k)]
            p2_units = shared + [f"p2-{i}" for i in range(n - k)]
            store.register_percept("p1", "visual", units=p1_units)
            store.register_percept("p2", "visual", units=p2_units)
            store.register_percept("t")
            store.consolidate_replay([["p1(visual)"], ["t"]], "forward", 1)
            full = store.assembly_excitation(["p1(visual)"], "t")
            via_p2 = store.assembly_excitation(["p2(visual)"], "t")
            assert full == 2**n - 1
            assert via_p2 == 2**k - 1
            assert via_p2 < full


def build_broad_schema(theta_p, edge_repeats=5, schema_repeats=2):
    """Old all-birds-fly schema plus the counterexample consolidation: the
    full percept context active when the new fact arrived is the window.
    The exception's related percepts are consolidated in one replay pair
    (they co-occur, so none of them is depressed as uncorrelated)."""
    store = SemanticStore(theta_p=theta_p)
    for label in ("penguin", "mynah", "bird", "fly", "cannot fly", "water", "blubber"):
        store.register_percept(label)
    store.consolidate_replay(
        [["penguin"], ["bird", "water", "blubber"]], "forward", edge_repeats
    )
    store.consolidate_replay([["mynah"], ["bird"]], "forward", edge_repeats)
    store.consolidate_replay([["bird"], ["fly"]], "forward", edge_repeats)
    store.consolidate_replay(
        [["penguin", "bird", "fly"], ["cannot fly"]], "forward", schema_repeats
    )
    return store


def build_direct_schema(theta_p=3.5, edge_repeats=5):
    """Schema variant with a strong direct exception->new-fact edge, used by
    the inhibition mechanisms (the new fact must activate before the old)."""
    store = SemanticStore(theta_p=theta_p)
    for label in ("penguin", "mynah", "bird", "fly", "cannot fly"):
        store.register_percept(label)
    store.consolidate_replay([["penguin"], ["bird"]], "forward", edge_repeats)
    store.consolidate_replay([["mynah"], ["bird"]], "forward", edge_repeats)
    store.consolidate_replay([["bird"], ["fly"]], "forward", edge_repeats)
    store.consolidate_replay(
        [["penguin", "bird", "fly"], ["cannot fly"]], "forward", 1
    )
    store.consolidate_replay([["penguin"], ["cannot fly"]], "forward", 3)
    return store


def final(store, seed):
    return store.retrieve([seed], "automatic")[-1]


class TestInterferenceProtocols:
    def assert_pre_interference(self, store):
        active = final(store, "penguin")
        assert "fly(amodal)" in active and "cannot fly(amodal)" in active

    def test_schema_absent_rejected(self):
        store = SemanticStore()
        for label in ("penguin", "mynah", "bird", "fly", "cannot fly"):
            store.register_percept(label)
        with pytest.raises(SemanticError):
            store.apply_interference_protocol("weaken-uncorrelated")

    def test_unknown_variant_rejected(self):
        store = build_broad_schema(theta_p=4.0)
        with pytest.raises(SemanticError):
            store.apply_interference_protocol("nonsense")

    def test_weaken_uncorrelated(self):
        store = build_broad_schema(theta_p=4.0)
        self.assert_pre_interference(store)
        assert "cannot fly(amodal)" in final(store, "mynah")  # the broken schema
        store.apply_interference_protocol("weaken-uncorrelated")
        active = final(store, "mynah")
        assert "fly(amodal)" in active
        assert "cannot fly(amodal)" not in active
        assert "cannot fly(amodal)" in final(store, "penguin")

    def test_interleaved_replay(self):
        store = build_broad_schema(theta_p=5.0)
        self.assert_pre_interference(store)
        store.apply_interference_protocol("interleaved-replay")
        active = final(store, "mynah")
        assert "fly(amodal)" in active
        assert "cannot fly(amodal)" not in active
        assert "cannot fly(amodal)" in final(store, "penguin")

    def test_dilution(self):
        store = build_broad_schema(theta_p=4.0)
        self.assert_pre_interference(store)
        assert "cannot fly(amodal)" in final(store, "mynah")
        store.apply_interference_protocol("dilution")
        active = final(store, "mynah")
        assert "fly(amodal)" in active
        assert "cannot fly(amodal)" not in active
        assert "cannot fly(amodal)" in final(store, "penguin")

    def test_direct_inhibition(self):
        store = build_direct_schema()
        self.assert_pre_interference(store)
        store.apply_interference_protocol("direct-inhibition")
        mynah = final(store, "mynah")
        assert "fly(amodal)" in mynah and "cannot fly(amodal)" not in mynah
        penguin = final(store, "penguin")
        assert "cannot fly(amodal)" in penguin and "fly(amodal)" not in penguin

    def test_gated_inhibition(self):
        store = build_direct_schema()
        self.assert_pre_interference(store)
        store.apply_interference_protocol("gated-inhibition")
        mynah = final(store, "mynah")
        assert "fly(amodal)" in mynah and "cannot fly(amodal)" not in mynah
        penguin = final(store, "penguin")
        assert "cannot fly(amodal)" in penguin and "fly(amodal)" not in penguin

    def test_gate_is_conjunctive(self):
        # the gated variant suppresses the old fact only when both the
        # exception and the new fact are active
        store = build_direct_schema()
        store.apply_interference_protocol("gated-inhibition")
        gate = store.gates[0]
        assert gate.inputs == {"penguin(amodal)", "cannot fly(amodal)"}
        assert gate.weight > 0


class TestDump:
    def test_edge_dump_sorted_lines(self):
        store = SemanticStore()
        store.register_percept("a", "visual")
        store.register_percept("b", "lexical")
        store.consolidate_replay([["a(visual)"], ["b(lexical)"]], "forward", 2)
        dump = store.dump_edges()
        assert dump == "a(visual) -> b(lexical) : a(visual):9 : 2.0\n"
