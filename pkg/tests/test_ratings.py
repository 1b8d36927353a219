import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dispocf.ratings import (Dataset, DatasetError, RatingsFormatError, dataset_stats, filter_by_users,
                             load_dataset, min_ratings_filter, parse_ratings_csv, save_dataset,
                             split_folds, write_folds_csv, write_ratings_csv)

from conftest import make_dataset, random_dataset

HEADER = "userId,movieId,rating,timestamp\n"


def test_parse_counts():
    ds = parse_ratings_csv(HEADER + "1,10,4.0,100\n1,11,3.5,101\n2,10,0.5,102\n")
    assert len(ds) == 3
    assert ds.n_users == 2
    assert ds.n_items == 2
    assert ds.user_ids == ("1", "2")
    assert ds[1].value == 3.5
    assert ds[2].timestamp == 102


def test_parse_first_seen_order():
    ds = parse_ratings_csv(HEADER + "9,b,4.0,1\n3,a,3.0,2\n9,a,2.0,3\n")
    assert ds.user_ids == ("9", "3")
    assert ds.item_ids == ("b", "a")
    assert list(ds.user_codes) == [0, 1, 0]


def test_off_grid_rating_names_line():
    with pytest.raises(RatingsFormatError) as err:
        parse_ratings_csv(HEADER + "1,10,4.0,1\n1,11,3.7,2\n")
    assert err.value.line == 3
    assert "half-star" in str(err.value)


@pytest.mark.parametrize("row", ["1,10\n", "1,10,abc,5\n", "1,10,4.0,notatime\n", ",10,4.0,1\n",
                                 "1,10,5.5,1\n", "1,10,0.0,1\n"])
def test_malformed_rows(row):
    with pytest.raises(RatingsFormatError) as err:
        parse_ratings_csv(HEADER + row)
    assert err.value.line == 2


def test_duplicate_pair_rejected():
    with pytest.raises(RatingsFormatError, match="duplicate"):
        parse_ratings_csv(HEADER + "1,10,4.0,1\n1,10,3.0,2\n")


def test_bad_header_and_empty():
    with pytest.raises(RatingsFormatError):
        parse_ratings_csv("user,item,rating\n1,2,3.0\n")
    with pytest.raises(RatingsFormatError, match="no ratings"):
        parse_ratings_csv("")
    with pytest.raises(RatingsFormatError, match="no ratings"):
        parse_ratings_csv(HEADER)


def test_comment_lines_before_header_skipped():
    ds = parse_ratings_csv("# provenance\n" + HEADER + "1,10,4.0,100\n")
    assert len(ds) == 1


def test_round_trip(toy):
    buf = io.StringIO()
    write_ratings_csv(toy, buf)
    again = parse_ratings_csv(buf.getvalue())
    assert again == toy


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_round_trip_property(seed):
    ds = random_dataset(np.random.default_rng(seed))
    buf = io.StringIO()
    write_ratings_csv(ds, buf)
    assert parse_ratings_csv(buf.getvalue()) == ds


def test_dataset_invariants(toy):
    assert toy.global_mean == pytest.approx(np.mean([4, 3, 5, 2, 2.5, 4.5, 1, 3.5]))
    assert toy.per_user_mean[toy.user_index["a"]] == 4.0
    assert toy.per_item_mean[toy.item_index["y"]] == pytest.approx((3.0 + 2.5 + 4.5) / 3)
    for r in toy:
        assert r.user_id in toy.user_index and r.item_id in toy.item_index
    with pytest.raises(AttributeError):
        toy.global_mean = 1.0
    with pytest.raises(ValueError):
        toy.values[0] = 1.0


def test_dataset_rejects_off_grid_and_duplicates():
    with pytest.raises(DatasetError):
        Dataset(["a"], ["x"], [3.3])
    with pytest.raises(DatasetError):
        Dataset(["a", "a"], ["x", "x"], [3.0, 4.0])


def test_stats_examples():
    s = dataset_stats(make_dataset([("a", "x", 3.0), ("a", "y", 4.0)]))
    assert s.global_mean == 3.5
    assert s.median == 3.0
    s = dataset_stats(make_dataset([("a", "x", 5.0)]))
    assert s.global_mean == s.median == 5.0
    with pytest.raises(DatasetError):
        dataset_stats(Dataset([], [], []))


def test_stats_describe(toy):
    text = dataset_stats(toy).describe()
    assert text.startswith("3 users, 4 items, 8 ratings")


def test_split_folds_round_robin():
    rows = [("a", f"i{k}", 4.0) for k in range(10)] + [("b", f"i{k}", 3.0) for k in range(3)]
    ds = make_dataset(rows)
    folds = split_folds(ds, 5, seed=3)
    a = folds.assignment[ds.user_codes == ds.user_index["a"]]
    b = folds.assignment[ds.user_codes == ds.user_index["b"]]
    assert sorted(np.bincount(a, minlength=5)) == [2, 2, 2, 2, 2]
    assert sorted(np.bincount(b, minlength=5)) == [0, 0, 1, 1, 1]


def test_split_folds_deterministic_and_errors(toy):
    f1 = split_folds(toy, 3, seed=9)
    f2 = split_folds(toy, 3, seed=9)
    assert np.array_equal(f1.assignment, f2.assignment)
    with pytest.raises(DatasetError):
        split_folds(toy, 1, seed=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 10))
def test_folds_partition_property(seed, k):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng)
    folds = split_folds(ds, k, seed)
    assert folds.assignment.min() >= 0 and folds.assignment.max() < k
    seen = np.concatenate([test for _, _, test in folds])
    assert sorted(seen.tolist()) == list(range(len(ds)))
    for f, train, test in folds:
        assert not set(train) & set(test)
    for u in range(ds.n_users):
        n_u = ds.user_counts[u]
        per_fold = np.bincount(folds.assignment[ds.user_codes == u], minlength=k)
        assert per_fold.max() - per_fold.min() <= 1
        assert all(abs(c - -(-n_u // k)) <= 1 for c in per_fold) or n_u < k


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_folds_invariant_under_row_permutation(seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng)
    perm = rng.permutation(len(ds))
    shuffled = ds.subset(perm)
    fa = split_folds(ds, 5, seed)
    fb = split_folds(shuffled, 5, seed)
    key_a = {(r.user_id, r.item_id): f for r, f in zip(ds, fa.assignment)}
    key_b = {(r.user_id, r.item_id): f for r, f in zip(shuffled, fb.assignment)}
    assert key_a == key_b


def test_write_folds_csv(toy):
    buf = io.StringIO()
    write_folds_csv(split_folds(toy, 2, 0), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "ratingIndex,fold"
    assert len(lines) == len(toy) + 1


def test_filter_by_users(toy):
    same = filter_by_users(toy, toy.user_ids)
    assert same == toy
    assert same.global_mean == toy.global_mean
    only_b = filter_by_users(toy, {"b"})
    assert only_b.user_ids == ("b",)
    assert list(only_b.values) == [2.0, 2.5]
    assert only_b.item_ids == ("x", "y")
    assert only_b.global_mean == 2.25
    with pytest.raises(DatasetError):
        filter_by_users(toy, {"nobody"})


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_filter_all_users_identity_property(seed):
    ds = random_dataset(np.random.default_rng(seed))
    out = filter_by_users(ds, set(ds.user_ids))
    assert sorted(out.values.tolist()) == sorted(ds.values.tolist())
    assert out.global_mean == ds.global_mean


def test_min_ratings_filter(toy):
    out = min_ratings_filter(toy, 3)
    assert set(out.user_ids) == {"a", "c"}
    assert min_ratings_filter(toy, 0) is toy


def test_cache_round_trip(toy, tmp_path):
    path = tmp_path / "ds.npz"
    save_dataset(toy, path)
    assert load_dataset(path) == toy
