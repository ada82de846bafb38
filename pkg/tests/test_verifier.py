import numpy as np
import pytest

from multicake.geometry import CakeConfig, PieceSelection, make_division, center
from multicake.preferences import (
    EpsilonCategoryModel,
    linked_bonus_model,
    log_utility_model,
    poker_model,
)
from multicake.verifier import (
    CERTIFY_NONE,
    COLLECT,
    _composition_table,
    _decode_chunk,
    _generic_mask,
    envy_report,
    grid_sweep,
    preferred_set,
    sweep_division_count,
    sweep_hits_csv,
)


def sel(*picks):
    return PieceSelection(tuple(picks))


SQUARE = CakeConfig.of(2, 2)
SQUARE_MODELS = {
    0: linked_bonus_model(0.5, "same"),
    1: linked_bonus_model(0.5, "different"),
}


class TestPreferredSet:
    def test_center_tie_for_matching_player(self):
        d = center(SQUARE)
        assert preferred_set(SQUARE_MODELS[0], d) == [sel(0, 0), sel(1, 1)]

    def test_generic_log_model_is_singleton(self):
        config = CakeConfig.of(2, 3)
        model = log_utility_model(19)
        rng = np.random.default_rng(0)
        for _ in range(50):
            cuts0 = sorted(rng.integers(1, 99, size=1))
            cuts1 = sorted(rng.integers(1, 99, size=2))
            rows = [
                [cuts0[0] / 100, 1 - cuts0[0] / 100],
                [
                    cuts1[0] / 100,
                    (cuts1[1] - cuts1[0]) / 100,
                    1 - cuts1[1] / 100,
                ],
            ]
            d = make_division(config, rows)
            assert len(preferred_set(model, d)) == 1

    def test_zero_piece_never_in_set(self):
        d = make_division(SQUARE, [[1.0, 0.0], [0.5, 0.5]])
        for model in SQUARE_MODELS.values():
            for s in preferred_set(model, d):
                assert d.rows[0][s.picks[0]] > 0


class TestEnvyReport:
    def test_argmax_allocation_has_zero_gaps(self):
        d = make_division(SQUARE, [[0.7, 0.3], [0.6, 0.4]])
        alloc = {
            0: SQUARE_MODELS[0].prefer(d),
            1: SQUARE_MODELS[1].prefer(d),
        }
        report = envy_report(d, alloc, SQUARE_MODELS)
        assert report.delta == 0.0
        for envy in report.players.values():
            assert envy.gap == 0.0

    def test_holding_rivals_favorite_creates_gap(self):
        d = center(SQUARE)
        # The matching-bonus player holds a split pair: positive envy.
        alloc = {0: sel(0, 1), 1: sel(1, 0)}
        report = envy_report(d, alloc, SQUARE_MODELS)
        assert report.players[0].gap == pytest.approx(0.5)
        assert report.players[1].gap == 0.0
        assert report.delta > 0

    def test_normalized_delta_scale_free(self):
        d = center(SQUARE)
        alloc = {0: sel(0, 1), 1: sel(1, 0)}
        report = envy_report(d, alloc, SQUARE_MODELS)
        # Gap 0.5 over the utility span 1.5 at this division... span is
        # best (1.5) minus worst admissible (1.0).
        assert report.players[0].normalized_gap == pytest.approx(1.0)

    def test_disjoint_flag(self):
        d = center(SQUARE)
        report = envy_report(d, {0: sel(0, 0), 1: sel(1, 1)}, SQUARE_MODELS)
        assert report.disjoint
        report2 = envy_report(d, {0: sel(0, 0), 1: sel(0, 1)}, SQUARE_MODELS)
        assert not report2.disjoint

    def test_pareto_false_when_dominated(self):
        # Two matching-bonus players both holding split pairs at the
        # center: swapping to the matched pairs improves both strictly.
        models = {
            0: linked_bonus_model(0.5, "same"),
            1: linked_bonus_model(0.5, "same"),
        }
        d = center(SQUARE)
        report = envy_report(d, {0: sel(0, 1), 1: sel(1, 0)}, models)
        assert not report.pareto

    def test_pareto_true_for_disjoint_argmax(self):
        d = make_division(SQUARE, [[0.7, 0.3], [0.6, 0.4]])
        models = {0: log_utility_model(3), 1: log_utility_model(4)}
        alloc = {0: models[0].prefer(d), 1: models[1].prefer(d)}
        report = envy_report(d, alloc, models)
        if report.disjoint:
            assert report.pareto

    def test_disjoint_envy_free_implies_pareto_on_swept_hits(self):
        # Every collected sweep hit allocates both players a member of
        # their argmax set disjointly; such allocations must be Pareto.
        config = CakeConfig.of(2, 3)
        models = {0: log_utility_model(2), 1: log_utility_model(102)}
        cert = grid_sweep(config, models, 12, COLLECT)
        assert cert.examples
        for ex in cert.examples[:50]:
            d = make_division(config, ex["division"])
            sa, sb = ex["disjoint_pairs"][0]
            report = envy_report(
                d, {0: sel(*sa), 1: sel(*sb)}, models
            )
            assert report.delta == 0.0
            assert report.disjoint
            assert report.pareto

    def test_jsonable_round_trip_fields(self):
        d = center(SQUARE)
        report = envy_report(d, {0: sel(0, 0), 1: sel(1, 1)}, SQUARE_MODELS)
        doc = report.to_jsonable()
        assert doc["disjoint"] is True
        assert set(doc["players"]) == {"0", "1"}


class TestSweepMachinery:
    def test_division_count_formula(self):
        assert sweep_division_count(SQUARE, 200) == 201 * 201
        assert sweep_division_count(CakeConfig.of(3, 3, 3), 12) == 91**3
        assert sweep_division_count(CakeConfig.of(2, 3), 24) == 25 * 325

    def test_decode_chunk_is_lexicographic(self):
        tables = [_composition_table(2, 2), _composition_table(2, 3)]
        ys = _decode_chunk(tables, 0, 3 * 6)
        rows = [
            (tuple(int(v) for v in ys[0][r]), tuple(int(v) for v in ys[1][r]))
            for r in range(18)
        ]
        assert rows == sorted(rows)
        assert len(set(rows)) == 18

    @pytest.mark.parametrize(
        "config,models,G",
        [
            (SQUARE, SQUARE_MODELS, 7),
            (
                CakeConfig.of(3, 3, 3),
                {
                    0: EpsilonCategoryModel(0.1, "A"),
                    1: EpsilonCategoryModel(0.1, "B"),
                },
                3,
            ),
            (
                CakeConfig.of(2, 3),
                {0: log_utility_model(5), 1: log_utility_model(6)},
                5,
            ),
        ],
    )
    def test_kernels_match_generic_path(self, config, models, G):
        # Dual-route check: the vectorized integer/float kernels must agree
        # with the per-division generic evaluation everywhere.
        tables = [
            _composition_table(G, k) for k in config.pieces_per_cake
        ]
        total = sweep_division_count(config, G)
        ys = _decode_chunk(tables, 0, total)
        for model in models.values():
            fast = model.grid_argmax_mask(ys, G)
            assert fast is not None
            slow = _generic_mask(model, ys, G)
            assert np.array_equal(fast, slow)

    def test_poker_kernel_matches_generic(self):
        config = CakeConfig.of(4, 4, 4, 4)
        G = 2
        tables = [_composition_table(G, k) for k in config.pieces_per_cake]
        total = sweep_division_count(config, G)
        ys = _decode_chunk(tables, 0, total)
        for role in ("A", "B"):
            model = poker_model(role)
            fast = model.grid_argmax_mask(ys, G)
            slow = _generic_mask(model, ys, G)
            assert np.array_equal(fast, slow)


class TestGridSweep:
    def test_square_counterexample_certifies_zero(self):
        cert = grid_sweep(SQUARE, SQUARE_MODELS, 50, CERTIFY_NONE)
        assert cert.certified
        assert cert.solutions_found == 0
        assert cert.divisions_examined == 51 * 51

    def test_epsilon_counterexample_certifies_zero_small(self):
        models = {
            0: EpsilonCategoryModel(0.1, "A"),
            1: EpsilonCategoryModel(0.1, "B"),
        }
        cert = grid_sweep(CakeConfig.of(3, 3, 3), models, 6, CERTIFY_NONE)
        assert cert.certified
        assert cert.solutions_found == 0

    def test_prism_log_models_have_solutions(self):
        config = CakeConfig.of(2, 3)
        for seed in range(1, 21):
            models = {
                0: log_utility_model(seed),
                1: log_utility_model(seed + 100),
            }
            cert = grid_sweep(config, models, 24, COLLECT)
            assert cert.solutions_found >= 1, f"seed {seed}"

    def test_collect_gathers_examples(self):
        config = CakeConfig.of(2, 3)
        models = {0: log_utility_model(1), 1: log_utility_model(101)}
        cert = grid_sweep(config, models, 12, COLLECT)
        assert cert.solutions_found >= 1
        assert cert.examples
        ex = cert.examples[0]
        assert ex["disjoint_pairs"]
        for sa, sb in ex["disjoint_pairs"]:
            assert all(x != y for x, y in zip(sa, sb))

    def test_witness_on_failed_certification(self):
        config = CakeConfig.of(2, 3)
        models = {0: log_utility_model(1), 1: log_utility_model(101)}
        cert = grid_sweep(config, models, 12, CERTIFY_NONE)
        assert cert.certified is False
        assert cert.witness is not None

    def test_deterministic_across_worker_counts(self):
        config = CakeConfig.of(3, 3, 3)
        models = {
            0: EpsilonCategoryModel(0.1, "A"),
            1: EpsilonCategoryModel(0.1, "B"),
        }
        serial = grid_sweep(config, models, 5, CERTIFY_NONE, threads=1, chunk=500)
        parallel = grid_sweep(config, models, 5, CERTIFY_NONE, threads=2, chunk=500)
        a, b = serial.to_jsonable(), parallel.to_jsonable()
        a.pop("runtime_seconds")
        b.pop("runtime_seconds")
        assert a == b

    def test_cap_guard(self):
        with pytest.raises(ValueError, match="cap"):
            grid_sweep(SQUARE, SQUARE_MODELS, 1000, CERTIFY_NONE, cap=10**4)

    def test_csv_output(self, tmp_path):
        config = CakeConfig.of(2, 3)
        models = {0: log_utility_model(1), 1: log_utility_model(101)}
        cert = grid_sweep(config, models, 12, COLLECT)
        path = tmp_path / "hits.csv"
        sweep_hits_csv(cert, models, path)
        text = path.read_text().splitlines()
        assert text[0].startswith("division,")
        assert len(text) >= 2
