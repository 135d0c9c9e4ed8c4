import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manovaboot.design import (
    Analysis,
    HypothesisSpec,
    between,
    build_hypothesis,
    cell_index,
    layout,
    partition_hypothesis,
    within,
)
from manovaboot.errors import SpecError
from manovaboot.linalg import numerical_rank, pseudo_inverse

MV, MG = Analysis.MULTIVARIATE, Analysis.MARGINAL


@pytest.fixture
def sex_diag():
    return layout(between("sex", ["F", "M"]), between("diagnosis", ["AD", "MCI", "SCC"]), p=6)


@pytest.fixture
def eeg_marginal():
    return layout(
        between("sex", ["F", "M"]),
        between("diagnosis", ["AD", "MCI", "SCC"]),
        within("feature", ["brainrate", "complexity"]),
        within("region", ["temporal", "frontal", "central"]),
    )


@st.composite
def layouts(draw):
    nb = draw(st.integers(1, 3))
    nw = draw(st.integers(0, 2))
    levels_b = [draw(st.integers(1, 3)) for _ in range(nb)]
    levels_w = [draw(st.integers(1, 3)) for _ in range(nw)]
    factors = [between(f"B{i}", l) for i, l in enumerate(levels_b)]
    factors += [within(f"W{i}", l) for i, l in enumerate(levels_w)]
    p = None if nw else draw(st.integers(1, 3))
    return layout(*factors, p=p)


class TestLayout:
    def test_cells_are_lexicographic(self, sex_diag):
        cells = sex_diag.cells()
        assert cells[0] == ("F", "AD") and cells[3] == ("M", "AD") and len(cells) == 6
        assert cells == sorted(cells, key=lambda c: (["F", "M"].index(c[0]), ["AD", "MCI", "SCC"].index(c[1])))

    def test_p_inferred_from_within(self, eeg_marginal):
        assert eeg_marginal.p == 6 and eeg_marginal.d == 6
        assert eeg_marginal.response_labels()[1] == ("brainrate", "frontal")

    def test_p_conflict(self):
        with pytest.raises(SpecError):
            layout(between("a", 2), within("w", 3), p=4)

    def test_missing_p(self):
        with pytest.raises(SpecError):
            layout(between("a", 2))

    def test_duplicate_levels(self):
        with pytest.raises(SpecError):
            between("a", ["x", "x"])

    def test_duplicate_factor_names(self):
        with pytest.raises(SpecError):
            layout(between("a", 2), between("a", 3), p=1)

    def test_effects_ordering(self, eeg_marginal):
        mv = eeg_marginal.effects(MV)
        assert [eeg_marginal.effect_label(e) for e in mv] == ["sex", "diagnosis", "sex*diagnosis"]
        assert len(eeg_marginal.effects(MG)) == 15


class TestCellIndex:
    def test_first_levels(self, sex_diag):
        assert cell_index(sex_diag, ["F", "AD"]) == 0

    def test_stride(self, sex_diag):
        assert cell_index(sex_diag, ["M", "AD"]) == 3

    def test_three_way_last_cell(self):
        lay = layout(between("sex", ["M", "F"]), between("age", ["<70", ">=70"]),
                     between("diagnosis", ["AD", "MCI", "SCC"]), p=6)
        assert cell_index(lay, ["F", ">=70", "SCC"]) == 11
        enumerated = list(itertools.product(["M", "F"], ["<70", ">=70"], ["AD", "MCI", "SCC"]))
        for i, cell in enumerate(enumerated):
            assert cell_index(lay, cell) == i

    def test_invalid_level(self, sex_diag):
        with pytest.raises(SpecError):
            cell_index(sex_diag, ["F", "XX"])

    def test_wrong_arity(self, sex_diag):
        with pytest.raises(SpecError):
            cell_index(sex_diag, ["F"])


class TestBuildHypothesis:
    def test_sex_multivariate(self, sex_diag):
        assert build_hypothesis(sex_diag, HypothesisSpec({"sex"})).df == 6

    def test_diagnosis_multivariate(self, sex_diag):
        assert build_hypothesis(sex_diag, HypothesisSpec({"diagnosis"})).df == 12

    def test_marginal_interaction(self, eeg_marginal):
        h = build_hypothesis(eeg_marginal, HypothesisSpec({"diagnosis", "feature"}, MG))
        assert h.df == 2 and h.label == "diagnosis*feature"

    def test_one_level_factor_is_degenerate(self):
        lay = layout(between("a", 1), between("b", 2), p=2)
        h = build_hypothesis(lay, HypothesisSpec({"a"}))
        assert h.df == 0 and numerical_rank(h.t) == 0 and h.basis.shape[0] == 0

    def test_explicit_kronecker(self):
        lay = layout(between("a", 2), p=2)
        h = build_hypothesis(lay, HypothesisSpec({"a"}))
        p2 = np.array([[0.5, -0.5], [-0.5, 0.5]])
        np.testing.assert_allclose(h.t, np.kron(p2, np.eye(2)))

    def test_marginal_without_within(self):
        lay = layout(between("a", 3), p=4)
        h = build_hypothesis(lay, HypothesisSpec({"a"}, MG))
        np.testing.assert_allclose(h.t, np.kron(np.eye(3) - 1 / 3, np.full((4, 4), 0.25)))
        assert h.df == 2

    def test_within_in_multivariate_rejected(self, eeg_marginal):
        with pytest.raises(SpecError, match="marginal"):
            build_hypothesis(eeg_marginal, HypothesisSpec({"region"}, MV))

    def test_unknown_factor(self, sex_diag):
        with pytest.raises(SpecError):
            build_hypothesis(sex_diag, HypothesisSpec({"age"}))

    def test_empty_effect(self):
        with pytest.raises(SpecError):
            HypothesisSpec(frozenset())

    @settings(max_examples=80, deadline=None)
    @given(layouts(), st.data())
    def test_properties(self, lay, data):
        analysis = data.draw(st.sampled_from([MV, MG]))
        effects = lay.effects(analysis)
        effect = data.draw(st.sampled_from(effects))
        h = build_hypothesis(lay, HypothesisSpec(effect, analysis))
        dp = lay.d * lay.p
        assert h.t.shape == (dp, dp)
        # contrasts annihilate constants
        assert np.abs(h.t @ np.ones(dp)).max() < 1e-12 or h.df == 0 and not h.t.any()
        # df agrees with an independent rank
        assert h.df == numerical_rank(h.t)
        assert h.basis.shape[0] == h.df
        np.testing.assert_allclose(h.basis.T @ h.basis, h.t, atol=1e-12)
        # idempotent projection form
        inv, _ = pseudo_inverse(h.t @ h.t.T)
        m = h.t.T @ inv @ h.t
        assert np.abs(m @ m - m).max() < 1e-10
        assert np.abs(h.t @ h.t - h.t).max() < 1e-12

    @settings(max_examples=60, deadline=None)
    @given(layouts(), st.data())
    def test_disjoint_effects_orthogonal(self, lay, data):
        effects = lay.effects(MG)
        a = data.draw(st.sampled_from(effects))
        b = data.draw(st.sampled_from(effects))
        if a & b:
            return
        ta = build_hypothesis(lay, HypothesisSpec(a, MG)).t
        tb = build_hypothesis(lay, HypothesisSpec(b, MG)).t
        assert np.abs(ta @ tb.T).max() < 1e-12

    def test_effects_decompose_identity(self, eeg_marginal):
        # sum of all effect projections plus grand mean is the identity
        total = sum(build_hypothesis(eeg_marginal, HypothesisSpec(e, MG)).t for e in eeg_marginal.effects(MG))
        total = total + np.full((36, 36), 1 / 36)
        np.testing.assert_allclose(total, np.eye(36), atol=1e-12)


class TestPartitionHypothesis:
    def test_full_block_matches_main_effect(self, sex_diag):
        h = partition_hypothesis(sex_diag, "diagnosis", [["AD", "MCI", "SCC"]])
        ref = build_hypothesis(sex_diag, HypothesisSpec({"diagnosis"}))
        np.testing.assert_allclose(h.t, ref.t, atol=1e-12)
        assert h.df == 12

    def test_pair(self, sex_diag):
        h = partition_hypothesis(sex_diag, "diagnosis", [["AD", "SCC"]])
        assert h.df == 6
        mu = np.zeros(36)
        for cell in range(6):
            if cell % 3 == 1:
                mu[cell * 6:(cell + 1) * 6] = 5.0  # MCI differs only
        assert np.abs(h.t @ mu).max() < 1e-12

    def test_singletons_impose_nothing(self, sex_diag):
        h = partition_hypothesis(sex_diag, "diagnosis", [["AD"], ["MCI"]])
        assert h.df == 0

    def test_within_factor_rejected(self, eeg_marginal):
        with pytest.raises(SpecError):
            partition_hypothesis(eeg_marginal, "region", [["temporal", "frontal"]])
