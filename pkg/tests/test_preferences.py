import math
import random

import pytest

from multicake.geometry import CakeConfig, PieceSelection, make_division
from multicake.preferences import (
    EpsilonCategoryModel,
    QueryRequired,
    ScriptedOracle,
    epsilon_category_prefer,
    human_oracle,
    linked_bonus_model,
    log_utility_model,
    model_from_spec,
    poker_model,
    scripted_oracle,
)
from multicake.verifier import preferred_set


def sel(*picks):
    return PieceSelection(tuple(picks))


def random_division(config, rng, grid=1000):
    rows = []
    for k in config.pieces_per_cake:
        cuts = sorted(rng.randint(0, grid) for _ in range(k - 1))
        parts = [b - a for a, b in zip([0] + cuts, cuts + [grid])]
        rows.append([p / grid for p in parts])
    return make_division(config, rows)


BUILTIN_MODELS = [
    (CakeConfig.of(2, 2), linked_bonus_model(0.5, "same")),
    (CakeConfig.of(2, 2), linked_bonus_model(0.25, "different")),
    (CakeConfig.of(3, 3, 3), EpsilonCategoryModel(0.1, "A")),
    (CakeConfig.of(3, 3, 3), EpsilonCategoryModel(0.1, "B")),
    (CakeConfig.of(4, 4, 4, 4), poker_model("A")),
    (CakeConfig.of(4, 4, 4, 4), poker_model("B")),
    (CakeConfig.of(2, 3), log_utility_model(7)),
    (CakeConfig.of(4, 4, 4), log_utility_model(3)),
]


class TestLinkedBonus:
    def test_center_same_prefers_matching_pair(self):
        # Oracle: at the uniform division the four utilities are
        # (1.5, 1.0, 1.0, 1.5) for the matching-bonus player, so the
        # lexicographically first maximizer is (a, a).
        model = linked_bonus_model(0.5, "same")
        d = make_division(CakeConfig.of(2, 2), [[0.5, 0.5], [0.5, 0.5]])
        assert model.utility(d, sel(0, 0)) == pytest.approx(1.5)
        assert model.utility(d, sel(0, 1)) == pytest.approx(1.0)
        assert model.prefer(d) == sel(0, 0)

    def test_center_different_prefers_split_pair(self):
        model = linked_bonus_model(0.5, "different")
        d = make_division(CakeConfig.of(2, 2), [[0.5, 0.5], [0.5, 0.5]])
        assert model.prefer(d) == sel(0, 1)

    def test_hungry_on_degenerate_cake(self):
        d = make_division(CakeConfig.of(2, 2), [[1.0, 0.0], [0.5, 0.5]])
        for model in (linked_bonus_model(0.5, "same"), linked_bonus_model(0.5, "different")):
            assert model.prefer(d).picks[0] == 0

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            linked_bonus_model(0.0, "same")
        with pytest.raises(ValueError):
            linked_bonus_model(1.5, "same")
        with pytest.raises(ValueError):
            linked_bonus_model(0.5, "both")

    def test_wrong_shape(self):
        model = linked_bonus_model(0.5, "same")
        d = make_division(CakeConfig.of(2, 3), [[0.5, 0.5], [0.4, 0.3, 0.3]])
        with pytest.raises(ValueError, match="two cakes"):
            model.utility(d, sel(0, 0))

    def test_same_region_touches_own_corner(self):
        model = linked_bonus_model(0.5, "same")
        config = CakeConfig.of(2, 2)
        corner_aa = make_division(config, [[1.0, 0.0], [1.0, 0.0]])
        corner_bb = make_division(config, [[0.0, 1.0], [0.0, 1.0]])
        assert preferred_set(model, corner_aa) == [sel(0, 0)]
        assert preferred_set(model, corner_bb) == [sel(1, 1)]


def epsilon_rule_oracle(model, division):
    """Independent restatement of the category rule: stay in the highest
    category that still offers an option with all pieces at least epsilon;
    take the largest total, first lexicographically."""
    config = division.config()
    order = {"A": [0, 1, 2], "B": [2, 1, 0]}[model.role]

    def category(picks):
        payload = sorted(
            (picks.count(p) for p in set(picks)), reverse=True
        )
        return {(3,): 0, (2, 1): 1, (1, 1, 1): 2}[tuple(payload)]

    for cat in order:
        best = None
        for s in config.selections():
            if category(s.picks) != cat:
                continue
            lengths = division.piece_lengths(s)
            if any(x < model.epsilon for x in lengths):
                continue
            key = (-math.fsum(lengths), s.picks)
            if best is None or key < best[0]:
                best = (key, s)
        if best is not None:
            return best[1]
    raise AssertionError("epsilon < 1/3 guarantees an acceptable option")


class TestEpsilonCategory:
    def test_uniform_division_roles(self):
        config = CakeConfig.of(3, 3, 3)
        d = make_division(config, [[1 / 3] * 3] * 3)
        assert epsilon_category_prefer(EpsilonCategoryModel(0.1, "A"), d) == sel(0, 0, 0)
        assert epsilon_category_prefer(EpsilonCategoryModel(0.1, "B"), d) == sel(0, 1, 2)

    def test_blocked_triple_falls_to_pair(self):
        # Only piece c is acceptable on cake 2, and cakes 0, 1 have tiny c
        # pieces, so no same-type triple survives; the best pair keeps two
        # a picks and takes c on cake 2.
        config = CakeConfig.of(3, 3, 3)
        d = make_division(
            config,
            [[0.475, 0.475, 0.05], [0.475, 0.475, 0.05], [0.05, 0.05, 0.9]],
        )
        choice = EpsilonCategoryModel(0.1, "A").prefer(d)
        assert choice.picks[2] == 2
        assert choice == sel(0, 0, 2)

    def test_matches_independent_rule_oracle(self):
        config = CakeConfig.of(3, 3, 3)
        rng = random.Random(5)
        for role in ("A", "B"):
            model = EpsilonCategoryModel(0.1, role)
            for _ in range(300):
                d = random_division(config, rng)
                assert model.prefer(d) == epsilon_rule_oracle(model, d)

    def test_epsilon_bounds(self):
        with pytest.raises(ValueError):
            EpsilonCategoryModel(1 / 3, "A")
        with pytest.raises(ValueError):
            EpsilonCategoryModel(0.0, "A")

    # The three impossibility-argument scenarios: whatever the one player
    # picks, the other's rule output conflicts with it.

    def test_rival_conflicts_with_same_type_triple(self):
        config = CakeConfig.of(3, 3, 3)
        d = make_division(config, [[0.5, 0.3, 0.2]] * 3)
        a = EpsilonCategoryModel(0.1, "A").prefer(d)
        assert a == sel(0, 0, 0)
        for b in preferred_set(EpsilonCategoryModel(0.1, "B"), d):
            assert any(x == y for x, y in zip(a.picks, b.picks))

    def test_rival_conflicts_with_pair(self):
        # Every same-type triple is blocked somewhere, so the first player
        # settles for the pair (a, a, b); the rival's acceptable options are
        # forced through the same large pieces and conflict.
        config = CakeConfig.of(3, 3, 3)
        d = make_division(
            config,
            [[0.86, 0.05, 0.09], [0.86, 0.05, 0.09], [0.05, 0.9, 0.05]],
        )
        model_a = EpsilonCategoryModel(0.1, "A")
        a = model_a.prefer(d)
        assert a == sel(0, 0, 1)
        for b in preferred_set(EpsilonCategoryModel(0.1, "B"), d):
            assert any(x == y for x, y in zip(a.picks, b.picks))

    def test_rival_conflicts_with_all_different(self):
        config = CakeConfig.of(3, 3, 3)
        # Only the first piece of cake 0 is acceptable there, so both
        # players must take it.
        d = make_division(
            config,
            [[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]],
        )
        a = EpsilonCategoryModel(0.1, "A").prefer(d)
        b = EpsilonCategoryModel(0.1, "B").prefer(d)
        assert b.picks[0] == a.picks[0] == 0


class TestPoker:
    def test_uniform_division_roles(self):
        config = CakeConfig.of(4, 4, 4, 4)
        d = make_division(config, [[0.25] * 4] * 4)
        assert poker_model("A").prefer(d) == sel(0, 0, 0, 0)
        assert poker_model("B").prefer(d) == sel(0, 1, 2, 3)

    def test_output_always_epsilon_admissible(self):
        config = CakeConfig.of(4, 4, 4, 4)
        rng = random.Random(11)
        for role in ("A", "B"):
            model = poker_model(role, epsilon=0.1)
            for _ in range(100):
                d = random_division(config, rng)
                choice = model.prefer(d)
                assert all(x >= 0.1 for x in d.piece_lengths(choice))

    def test_category_ladder(self):
        # Each letter is tiny on exactly one cake, so every four-of-a-kind
        # is blocked while three-of-a-kinds survive; role A lands there.
        config = CakeConfig.of(4, 4, 4, 4)
        rows = [
            [0.04, 0.32, 0.32, 0.32],
            [0.32, 0.04, 0.32, 0.32],
            [0.32, 0.32, 0.04, 0.32],
            [0.32, 0.32, 0.32, 0.04],
        ]
        d = make_division(config, rows)
        choice = poker_model("A").prefer(d)
        counts = sorted(
            (choice.picks.count(p) for p in set(choice.picks)), reverse=True
        )
        assert counts == [3, 1]


class TestLogUtility:
    def test_determinism(self):
        config = CakeConfig.of(2, 3)
        model = log_utility_model(42)
        rng = random.Random(0)
        d = random_division(config, rng)
        assert model.prefer(d) == log_utility_model(42).prefer(d)

    def test_zero_piece_avoided(self):
        config = CakeConfig.of(2, 3)
        d = make_division(config, [[1.0, 0.0], [0.5, 0.0, 0.5]])
        for seed in range(10):
            choice = log_utility_model(seed).prefer(d)
            assert all(x > 0 for x in d.piece_lengths(choice))

    def test_no_linkage_decomposes_per_cake(self):
        config = CakeConfig.of(2, 3)
        model = log_utility_model(9, linkage_strength=0.0)
        rng = random.Random(3)
        for _ in range(50):
            d = random_division(config, rng)
            choice = model.prefer(d)
            # Oracle: optimize each cake independently.
            for i, k in enumerate(config.pieces_per_cake):
                utilities = []
                for j in range(k):
                    x = d.rows[i][j]
                    w = model._params(config.pieces_per_cake)[0][i][j]
                    utilities.append(w * math.log(x) if x > 0 else -math.inf)
                best = max(utilities)
                assert utilities[choice.picks[i]] == best

    def test_seed_changes_parameters(self):
        config = (2, 3)
        w1, _ = log_utility_model(1)._params(config)
        w2, _ = log_utility_model(2)._params(config)
        assert w1 != w2


class TestScriptedOracle:
    def test_replay(self):
        config = CakeConfig.of(2, 2)
        key = (2, ((1, 1), (1, 1)))
        oracle = scripted_oracle({key: sel(0, 1)})
        d = make_division(config, [[0.5, 0.5], [0.5, 0.5]])
        assert oracle.prefer(d, key=key) == sel(0, 1)

    def test_unrecorded_raises_query_required(self):
        oracle = human_oracle()
        d = make_division(CakeConfig.of(2, 2), [[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(QueryRequired):
            oracle.prefer(d, key=(2, ((1, 1), (1, 1))))

    def test_requires_key(self):
        oracle = human_oracle()
        d = make_division(CakeConfig.of(2, 2), [[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(ValueError, match="lattice key"):
            oracle.prefer(d)

    def test_zero_piece_answer_rejected(self):
        oracle = human_oracle()
        d = make_division(CakeConfig.of(2, 2), [[1.0, 0.0], [0.5, 0.5]])
        with pytest.raises(ValueError, match="zero length"):
            oracle.record(d, (2, ((2, 0), (1, 1))), sel(1, 0))

    def test_conflicting_rerecord_rejected(self):
        oracle = human_oracle()
        d = make_division(CakeConfig.of(2, 2), [[0.5, 0.5], [0.5, 0.5]])
        key = (2, ((1, 1), (1, 1)))
        oracle.record(d, key, sel(0, 1))
        oracle.record(d, key, sel(0, 1))  # idempotent
        with pytest.raises(ValueError, match="conflicting"):
            oracle.record(d, key, sel(1, 0))

    def test_no_utilities(self):
        oracle = human_oracle()
        d = make_division(CakeConfig.of(2, 2), [[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(TypeError):
            oracle.utility(d, sel(0, 0))


class TestModelContracts:
    @pytest.mark.parametrize("config,model", BUILTIN_MODELS)
    def test_hungry(self, config, model):
        rng = random.Random(hash(model.kind) % 1000)
        for _ in range(300):
            d = random_division(config, rng)
            choice = model.prefer(d)
            assert all(x > 0 for x in d.piece_lengths(choice))

    @pytest.mark.parametrize("config,model", BUILTIN_MODELS)
    def test_prefer_is_lex_first_argmax(self, config, model):
        rng = random.Random(1 + hash(model.kind) % 1000)
        for _ in range(100):
            d = random_division(config, rng)
            utils = model.utilities(d)
            best = max(utils)
            expected = next(
                s
                for s, u in zip(config.selections(), utils)
                if u == best
            )
            assert model.prefer(d) == expected

    @pytest.mark.parametrize("config,model", BUILTIN_MODELS)
    def test_determinism_on_identical_input(self, config, model):
        rng = random.Random(2)
        d = random_division(config, rng)
        assert model.prefer(d) == model.prefer(d)


class TestModelSpecs:
    @pytest.mark.parametrize(
        "spec",
        [
            {"kind": "linked_bonus", "beta": 0.5, "mode": "same"},
            {"kind": "epsilon_category", "epsilon": 0.1, "role": "B"},
            {"kind": "poker", "role": "A", "epsilon": 0.1},
            {"kind": "log_utility", "seed": 7, "linkage_strength": 1.0},
        ],
    )
    def test_round_trip(self, spec):
        model = model_from_spec(spec)
        assert model_from_spec(model.spec()).spec() == model.spec()

    def test_human_spec(self):
        model = model_from_spec({"kind": "human"})
        assert isinstance(model, ScriptedOracle)
        assert model.interactive

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown model kind"):
            model_from_spec({"kind": "telepathic"})
