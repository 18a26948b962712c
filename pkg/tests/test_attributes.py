import math
import warnings

import numpy as np
import pytest

from imgvirality.attributes import (
    AttributeMatrix,
    Combo,
    ComboMode,
    ConstantColumnWarning,
    CoverageWarning,
    aggregate_annotations,
    attribute_correlations,
    attribute_virality_correlation,
    best_addition,
    combo_accuracy,
    combo_correlation,
    combo_score,
    combo_scores,
    correlations_csv,
    greedy_select,
    pearson,
)
from imgvirality.errors import ViralityError
from imgvirality.fixtures.oracles import oracle_combo_scores, oracle_greedy_step
from imgvirality.model import AttributeAnnotation, Direction, PairLabel, SignedAttribute

UP, DOWN = Direction.UP, Direction.DOWN


def matrix(columns, labels):
    names = tuple(columns)
    entries = np.array([columns[n] for n in names]).T
    return AttributeMatrix(tuple(f"p{i}" for i in range(len(labels))), names, entries, labels)


def cell(votes):
    pairs = [PairLabel("p1", "a", "b", 1)]
    anns = [AttributeAnnotation("p1", "animal", f"w{i}", v) for i, v in enumerate(votes)]
    return aggregate_annotations(anns, pairs).entries[0, 0]


class TestAggregation:
    def test_majority(self):
        assert cell([1, 1, -1]) == 1

    def test_tie(self):
        assert cell([1, -1]) == 0

    def test_twenty_workers(self):
        assert cell([1] * 11 + [-1] * 9) == 1

    def test_neutral_votes(self):
        assert cell([0, 0, -1]) == -1
        assert cell([0, 0, 0]) == 0

    def test_coverage_warning(self):
        pairs = [PairLabel("p1", "a", "b", 1), PairLabel("p2", "c", "d", -1)]
        anns = [AttributeAnnotation("p1", "animal", "w", 1)]
        with pytest.warns(CoverageWarning):
            m = aggregate_annotations(anns, pairs)
        assert m.entries.tolist() == [[1], [0]]
        assert m.coverage.tolist() == [[1], [0]]
        assert m.labels.tolist() == [1, -1]

    def test_unknown_pair(self):
        with pytest.raises(ViralityError) as err:
            aggregate_annotations([AttributeAnnotation("zz", "a", "w", 1)], [PairLabel("p", "a", "b", 1)])
        assert err.value.code == "UNKNOWN_PAIR"

    def test_explicit_columns(self):
        pairs = [PairLabel("p1", "a", "b", 1)]
        anns = [AttributeAnnotation("p1", "b", "w", 1), AttributeAnnotation("p1", "a", "w", -1)]
        m = aggregate_annotations(anns, pairs, attributes=["b", "a"])
        assert m.attributes == ("b", "a") and m.entries.tolist() == [[1, -1]]


class TestMatrix:
    def test_validation(self):
        with pytest.raises(ViralityError):
            matrix({"a": [2, 0]}, [1, -1])
        with pytest.raises(ViralityError):
            matrix({"a": [1, 0]}, [1, 0])

    def test_lookup_errors(self):
        m = matrix({"a": [1, 0]}, [1, -1])
        with pytest.raises(ViralityError) as err:
            m.column("b")
        assert err.value.code == "UNKNOWN_ATTRIBUTE"
        with pytest.raises(ViralityError):
            m.row_index("p9")


class TestCorrelation:
    def test_identical_and_negated(self):
        m = matrix({"a": [1, -1, 1, -1], "b": [-1, 1, -1, 1]}, [1, -1, 1, -1])
        assert attribute_virality_correlation(m, "a") == 1.0
        assert attribute_virality_correlation(m, "b") == -1.0

    def test_hand_value(self):
        # mean-centred column (0.75, -0.25, -1.25, 0.75) against labels (1, 1, -1, -1)
        m = matrix({"a": [1, 0, -1, 1]}, [1, 1, -1, -1])
        expected = 1 / math.sqrt(11)
        assert attribute_virality_correlation(m, "a") == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(float(np.corrcoef([1, 0, -1, 1], [1, 1, -1, -1])[0, 1]))

    def test_constant_column(self):
        m = matrix({"flat": [0, 0, 0], "a": [1, 0, -1]}, [1, 1, -1])
        rows = attribute_correlations(m)
        assert rows[0] == ("flat", 0.0, True)
        assert rows[1][2] is False
        assert correlations_csv(rows).splitlines()[:2] == ["attribute,correlation", "flat,0"]
        with pytest.warns(ConstantColumnWarning):
            assert pearson(m.column("flat"), m.labels) == 0.0

    def test_pearson_clipped(self):
        x = np.array([1e-8, 2e-8, 3e-8])
        assert -1.0 <= pearson(x, x) <= 1.0


class TestCombos:
    def test_empty(self):
        m = matrix({"A": [1]}, [1])
        assert combo_score(Combo(), m, "p0") == 0

    def test_sum(self):
        m = matrix({"A": [1], "B": [1]}, [1])
        combo = Combo((SignedAttribute("A", UP), SignedAttribute("B", DOWN)))
        assert combo_score(combo, m, "p0") == 0

    def test_force(self):
        m = matrix({"A": [0], "B": [-1]}, [1])
        combo = Combo((SignedAttribute("A"), SignedAttribute("B")), ComboMode.FORCE)
        assert combo_score(combo, m, "p0") == -1

    def test_force_takes_first_nonzero(self):
        m = matrix({"A": [1, 0, 0], "B": [-1, -1, 0]}, [1, 1, -1])
        combo = Combo((SignedAttribute("A"), SignedAttribute("B")), "force")
        assert combo_scores(combo, m).tolist() == [1, -1, 0]

    def test_duplicate_attribute(self):
        with pytest.raises(ViralityError) as err:
            Combo((SignedAttribute("A"), SignedAttribute("A", DOWN)))
        assert err.value.code == "DUPLICATE_ATTRIBUTE"

    def test_singleton_reduces_to_attribute(self):
        m = matrix({"A": [1, 0, -1, 1, 0]}, [1, 1, -1, -1, 1])
        assert combo_correlation(Combo((SignedAttribute("A"),)), m) == attribute_virality_correlation(m, "A")

    def test_flipped_negates(self):
        m = matrix({"A": [1, 0, -1, 1], "B": [0, 1, 1, -1]}, [1, 1, -1, -1])
        combo = Combo((SignedAttribute("A"), SignedAttribute("B", DOWN)))
        np.testing.assert_array_equal(combo_scores(combo.flipped(), m), -combo_scores(combo, m))

    def test_against_oracle(self):
        rng = np.random.default_rng(3)
        for trial in range(30):
            m = matrix({n: rng.integers(-1, 2, 25) for n in "ABCD"}, rng.choice([-1, 1], 25))
            signs = rng.choice([-1, 1], 3)
            names = list(rng.choice(list("ABCD"), 3, replace=False))
            for mode in ComboMode:
                combo = Combo(tuple(SignedAttribute(n, int(s)) for n, s in zip(names, signs)), mode)
                expected = oracle_combo_scores(m.entries.tolist(), m.attributes, list(zip(names, signs.tolist())), mode.value)
                assert combo_scores(combo, m).tolist() == expected

    def test_permuted_labels_weak(self):
        rng = np.random.default_rng(11)
        n = 400
        m = matrix({n_: rng.integers(-1, 2, n) for n_ in "ABC"}, rng.choice([-1, 1], n))
        combo = Combo(tuple(SignedAttribute(x) for x in "ABC"))
        # |r| of independent columns is below 3/sqrt(n) with overwhelming probability
        assert abs(combo_correlation(combo, m)) < 3 / math.sqrt(n)


class TestAccuracy:
    def test_perfect(self):
        m = matrix({"A": [1, -1, 1]}, [1, -1, 1])
        assert combo_accuracy(Combo((SignedAttribute("A"),)), m) == 1.0

    def test_all_neutral(self):
        m = matrix({"A": [0, 0, 0]}, [1, -1, 1])
        assert combo_accuracy(Combo((SignedAttribute("A"),)), m) == 0.0

    def test_three_of_four(self):
        m = matrix({"A": [1, -1, 1, 0]}, [1, -1, 1, 1])
        assert combo_accuracy(Combo((SignedAttribute("A"),)), m) == 0.75

    def test_coin_ties(self):
        m = matrix({"A": [0] * 200}, [1] * 200)
        combo = Combo((SignedAttribute("A"),))
        acc = combo_accuracy(combo, m, ties="coin", seed=1)
        assert 0.35 < acc < 0.65
        assert acc == combo_accuracy(combo, m, ties="coin", seed=1)
        with pytest.raises(ViralityError):
            combo_accuracy(combo, m, ties="other")


class TestGreedy:
    def test_perfect_attribute_stops(self):
        m = matrix({"A": [1, -1, 1, -1], "B": [1, 1, -1, 0]}, [1, -1, 1, -1])
        trace = greedy_select(m, 3, exclusions=())
        assert [(s.signed, s.correlation) for s in trace.steps] == [(SignedAttribute("A"), 1.0)]

    def test_negation_chosen(self):
        m = matrix({"A": [-1, 1, -1, 1]}, [1, -1, 1, -1])
        trace = greedy_select(m, 1, exclusions=())
        assert trace.steps[0].signed == SignedAttribute("A", DOWN)

    def test_tie_break_up_then_name(self):
        m = matrix({"B": [1, -1, 1, -1], "A": [1, -1, 1, -1]}, [1, -1, 1, -1])
        assert greedy_select(m, 1, exclusions=()).steps[0].signed == SignedAttribute("A")
        # a constant column scores 0 both ways; UP wins
        flat = matrix({"Z": [0, 0, 0, 0]}, [1, -1, 1, -1])
        assert greedy_select(flat, 1, exclusions=()).steps[0].signed == SignedAttribute("Z", UP)

    def test_default_exclusions(self):
        m = matrix({"memorable": [1, -1, 1, -1], "likely to go viral": [1, -1, 1, -1], "a": [1, 0, 0, -1]},
                   [1, -1, 1, -1])
        trace = greedy_select(m, 3)
        assert {s.signed.attribute for s in trace.steps} == {"a"}

    def test_no_attributes(self):
        m = matrix({"memorable": [1, -1]}, [1, -1])
        with pytest.raises(ViralityError) as err:
            greedy_select(m, 2)
        assert err.value.code == "NO_ATTRIBUTES"

    def test_seed_attribute(self):
        m = matrix({"A": [1, -1, 1, -1, 0], "B": [1, 1, -1, -1, 1]}, [1, -1, 1, -1, 1])
        trace = greedy_select(m, 2, seed_attribute=SignedAttribute("B", DOWN), exclusions=(), epsilon=1.0)
        assert trace.steps[0].signed == SignedAttribute("B", DOWN)
        assert trace.steps[1].signed.attribute == "A"
        assert trace.to_csv().splitlines()[1].startswith("1,down,B,")

    def test_seed_excluded(self):
        m = matrix({"memorable": [1, -1], "a": [1, 0]}, [1, -1])
        with pytest.raises(ViralityError) as err:
            greedy_select(m, 2, seed_attribute=SignedAttribute("memorable"))
        assert err.value.code == "SEED_EXCLUDED"

    def test_plateau_continues_and_drop_stops(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            m = matrix({n: rng.integers(-1, 2, 40) for n in "ABCDE"}, rng.choice([-1, 1], 40))
            trace = greedy_select(m, 5, exclusions=())
            r = trace.correlations
            assert all(b >= a for a, b in zip(r, r[1:]))
            if len(trace.steps) < 5:
                used = [s.signed.attribute for s in trace.steps]
                nxt, r_next = best_addition(trace.combo, m, [a for a in m.attributes if a not in used])
                assert r_next < r[-1]

    def test_matches_oracle_small(self):
        rng = np.random.default_rng(8)
        m = matrix({n: rng.integers(-1, 2, 30) for n in "ABC"}, rng.choice([-1, 1], 30))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            trace = greedy_select(m, 3, ComboMode.FORCE, exclusions=(), epsilon=2.0)
        combo = []
        for step in trace.steps:
            best, r, _ = oracle_greedy_step(m.entries.tolist(), m.labels.tolist(), m.attributes, combo, "force")
            assert (step.signed.attribute, int(step.signed.direction)) == best
            combo.append(best)
