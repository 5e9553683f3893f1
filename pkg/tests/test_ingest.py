from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_cascade.core import EnvironmentSpec
from robust_cascade.ingest import (
    IngestError,
    ItemRatingSummary,
    bayesian_average,
    click_probabilities,
    load_summaries,
    rating_to_click_prob,
)

DATA = Path(__file__).resolve().parents[1] / "data"
FIXTURES = sorted(DATA.glob("synthetic_*_500.csv"))


def write(tmp_path, text, name="s.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestBayesianAverage:
    def test_worked_example(self):
        # (10 * 3.5 + 50 * 3.9) / 60
        s = ItemRatingSummary("a", 3.9, 50)
        assert bayesian_average(s, 3.5, 10) == pytest.approx(230 / 60)

    def test_zero_weight_is_raw_mean(self):
        assert bayesian_average(ItemRatingSummary("a", 4.2, 7), 3.0, 0) == pytest.approx(4.2)

    def test_many_ratings_dominate_prior(self):
        assert bayesian_average(ItemRatingSummary("a", 4.2, 10**9), 1.0, 10) == pytest.approx(4.2, abs=1e-6)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            bayesian_average(ItemRatingSummary("a", 4.2, 7), 3.0, -1)

    @given(
        st.floats(1, 5), st.floats(1, 5), st.integers(1, 10**6), st.floats(0.01, 1e6)
    )
    def test_shrinkage_between_prior_and_mean(self, r, m0, n, w):
        b = bayesian_average(ItemRatingSummary("a", r, n), m0, w)
        lo, hi = min(r, m0), max(r, m0)
        assert lo - 1e-12 <= b <= hi + 1e-12

    @given(st.floats(1, 5), st.floats(1, 5), st.integers(1, 10_000), st.floats(0.1, 1e4))
    def test_shrinkage_strict(self, r, m0, n, w):
        if abs(r - m0) < 1e-3:
            return
        b = bayesian_average(ItemRatingSummary("a", r, n), m0, w)
        assert min(r, m0) < b < max(r, m0)


class TestSigmoid:
    def test_center_is_half(self):
        assert rating_to_click_prob(3.7, 1.5, 3.7) == 0.5

    def test_worked_value(self):
        assert rating_to_click_prob(4.7, 1.5, 3.7) == pytest.approx(0.8175744761936437, rel=1e-12)

    def test_extremes_are_finite(self):
        assert rating_to_click_prob(-1e6) == 0.0
        assert rating_to_click_prob(1e6) == 1.0

    def test_bad_slope(self):
        with pytest.raises(ValueError):
            rating_to_click_prob(3.0, 0.0)

    @given(st.floats(1, 5), st.floats(1, 5))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert rating_to_click_prob(lo) <= rating_to_click_prob(hi)


class TestLoad:
    def test_three_rows(self, tmp_path):
        p = write(tmp_path, "item_id,avg_rating,num_ratings\na,4.5,10\nb,3.0,2\nc,1.5,100\n")
        got = load_summaries(p)
        assert [s.item_id for s in got] == ["a", "b", "c"]
        assert got[2] == ItemRatingSummary("c", 1.5, 100)

    @pytest.mark.parametrize(
        "body, needle",
        [
            ("a,4.5,10\nb,3.0,0\n", "line 3"),
            ("a,4.5\n", "line 2"),
            ("a,four,10\n", "line 2"),
            ("a,4.5,ten\n", "line 2"),
            ("a,4.5,10\nb,5.5,3\n", "line 3"),
            ("a,0.5,3\n", "line 2"),
            ("a,nan,3\n", "line 2"),
        ],
    )
    def test_bad_rows_name_their_line(self, tmp_path, body, needle):
        p = write(tmp_path, "item_id,avg_rating,num_ratings\n" + body)
        with pytest.raises(IngestError, match=needle):
            load_summaries(p)

    def test_missing_column_header(self, tmp_path):
        p = write(tmp_path, "item_id,avg_rating\na,4.5\n")
        with pytest.raises(IngestError, match="line 1"):
            load_summaries(p)

    def test_custom_scale(self, tmp_path):
        p = write(tmp_path, "item_id,avg_rating,num_ratings\na,9.0,4\n")
        with pytest.raises(IngestError):
            load_summaries(p)
        assert load_summaries(p, 0.0, 10.0)[0].avg_rating == 9.0

    def test_empty_file_has_no_items(self, tmp_path):
        p = write(tmp_path, "item_id,avg_rating,num_ratings\n")
        assert load_summaries(p) == []
        with pytest.raises(IngestError):
            click_probabilities([])


@pytest.mark.parametrize("path", FIXTURES, ids=lambda p: p.stem)
def test_fixture_gives_500_valid_arms(path):
    summaries = load_summaries(path)
    probs = click_probabilities(summaries)
    assert len(probs) == 500
    assert all(0 < p < 1 for p in probs)
    env = EnvironmentSpec(tuple(probs), 4, 100)
    assert env.n_items == 500


def test_three_fixtures_ship():
    assert len(FIXTURES) == 3


def test_monotone_in_rating_at_fixed_count():
    items = [ItemRatingSummary(str(i), r, 25) for i, r in enumerate((1.0, 2.2, 3.1, 3.9, 4.8))]
    probs = click_probabilities(items)
    assert probs == sorted(probs)
    assert len(set(probs)) == len(probs)


def test_defaults_center_on_dataset_mean():
    items = [ItemRatingSummary("a", 2.0, 10), ItemRatingSummary("b", 4.0, 10)]
    # prior mean 3.0, weight 10: shrunk ratings 2.5 and 3.5
    pa, pb = click_probabilities(items)
    assert pa == pytest.approx(rating_to_click_prob(2.5, 1.5, 3.0))
    assert pa + pb == pytest.approx(1.0)


@given(
    st.lists(
        st.tuples(st.floats(1, 5), st.integers(1, 10_000)), min_size=1, max_size=40
    )
)
def test_probabilities_open_unit_interval(rows):
    probs = click_probabilities([ItemRatingSummary(str(i), r, n) for i, (r, n) in enumerate(rows)])
    assert all(0 < p < 1 for p in probs)
