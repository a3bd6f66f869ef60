import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zoocast.core import (
    Dataset,
    MultivariateSeries,
    NormStats,
    denormalize,
    load_csv,
    mape,
    mse,
    normalize,
    smape,
    trim_to_first,
    trim_to_last,
)

finite_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
series_strategy = st.lists(finite_floats, min_size=1, max_size=50).map(np.array)


def test_normalize_constant_series_uses_fallback():
    norm, stats = normalize([5.0, 5.0, 5.0])
    np.testing.assert_array_equal(norm, [0.0, 0.0, 0.0])
    assert stats.mean == 5.0
    assert stats.std == 1.0


def test_normalize_reference_values():
    norm, stats = normalize([1.0, 2.0, 3.0])
    # population std of [1,2,3] is sqrt(2/3)
    expected_std = np.sqrt(2.0 / 3.0)
    assert stats.mean == pytest.approx(2.0)
    assert stats.std == pytest.approx(expected_std)
    np.testing.assert_allclose(norm, [-1.0 / expected_std, 0.0, 1.0 / expected_std], atol=1e-12)


def test_normalize_long_zero_series():
    norm, stats = normalize(np.zeros(36))
    assert np.all(norm == 0.0)
    assert stats.std == 1.0


def test_normalize_rejects_empty_and_nonfinite():
    with pytest.raises(ValueError, match="empty series"):
        normalize([])
    with pytest.raises(ValueError, match="non-finite"):
        normalize([1.0, np.nan])
    with pytest.raises(ValueError, match="non-finite"):
        normalize([1.0, np.inf])


def test_denormalize_examples():
    np.testing.assert_array_equal(denormalize([0.0, 0.0, 0.0], NormStats(5.0, 1.0)), [5.0, 5.0, 5.0])
    np.testing.assert_array_equal(denormalize([1.0], NormStats(0.0, 2.0)), [2.0])
    norm, stats = normalize([1.0, 2.0, 3.0])
    np.testing.assert_allclose(denormalize(norm, stats), [1.0, 2.0, 3.0], atol=1e-9)


def test_normstats_requires_positive_std():
    with pytest.raises(ValueError):
        NormStats(mean=0.0, std=0.0)


@given(series_strategy)
def test_normalize_round_trip(x):
    norm, stats = normalize(x)
    np.testing.assert_allclose(denormalize(norm, stats), x, atol=1e-9)


@given(series_strategy)
def test_normalize_output_statistics(x):
    norm, stats = normalize(x)
    assert abs(norm.mean()) < 1e-9
    if np.asarray(x).std() >= 1e-8:
        assert abs(norm.std() - 1.0) < 1e-9


def test_trim_to_last():
    np.testing.assert_array_equal(trim_to_last([1, 2, 3, 4, 5], 3), [3, 4, 5])
    np.testing.assert_array_equal(trim_to_last([1, 2], 2), [1, 2])
    with pytest.raises(ValueError, match="insufficient history"):
        trim_to_last([1, 2, 3], 4)


def test_trim_to_first():
    np.testing.assert_array_equal(trim_to_first([9, 8, 7], 2), [9, 8])
    np.testing.assert_array_equal(trim_to_first([1], 1), [1])
    with pytest.raises(ValueError):
        trim_to_first(np.empty(0), 1)


@given(series_strategy, st.integers(min_value=0, max_value=50))
def test_trim_suffix_reconstruction(x, n):
    n = min(n, len(x))
    if n == 0:
        return
    rebuilt = np.concatenate([x[: len(x) - n], trim_to_last(x, n)])
    np.testing.assert_array_equal(rebuilt, x)


# -- metric oracles ----------------------------------------------------------


def _mse_loop(t, p):
    total = 0.0
    for i in range(t.shape[0]):
        for j in range(t.shape[1]):
            total += (t[i, j] - p[i, j]) ** 2
    return total / (t.shape[0] * t.shape[1])


def _smape_loop(t, p):
    per_channel = []
    for j in range(t.shape[1]):
        acc = 0.0
        for i in range(t.shape[0]):
            denom = abs(t[i, j]) + abs(p[i, j])
            if denom >= 1e-8:
                acc += abs(t[i, j] - p[i, j]) / denom
        per_channel.append(200.0 * acc / t.shape[0])
    return sum(per_channel) / len(per_channel)


def _mape_loop(t, p):
    per_channel = []
    for j in range(t.shape[1]):
        acc, count = 0.0, 0
        for i in range(t.shape[0]):
            if abs(t[i, j]) >= 1e-8:
                acc += abs(t[i, j] - p[i, j]) / abs(t[i, j])
                count += 1
        if count:
            per_channel.append(100.0 * acc / count)
    return sum(per_channel) / len(per_channel)


def test_metric_hand_values():
    assert mse(np.array([[1.0], [2.0]]), np.array([[2.0], [4.0]])) == pytest.approx(2.5)
    assert smape(np.array([[1.0]]), np.array([[3.0]])) == pytest.approx(100.0)
    assert mape(np.array([[2.0]]), np.array([[1.0]])) == pytest.approx(50.0)
    same = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert mse(same, same) == 0.0
    assert smape(same, same) == 0.0
    assert mape(same, same) == 0.0


def test_metrics_match_double_loop_oracle():
    rng = np.random.default_rng(7)
    for _ in range(100):
        h = int(rng.integers(1, 11))
        c = int(rng.integers(1, 11))
        t = rng.uniform(-10, 10, size=(h, c))
        p = rng.uniform(-10, 10, size=(h, c))
        assert mse(t, p) == pytest.approx(_mse_loop(t, p), abs=1e-9)
        assert smape(t, p) == pytest.approx(_smape_loop(t, p), abs=1e-9)
        assert mape(t, p) == pytest.approx(_mape_loop(t, p), abs=1e-9)


def test_metric_scale_behavior():
    rng = np.random.default_rng(11)
    t = rng.uniform(0.5, 5.0, size=(8, 3))
    p = rng.uniform(0.5, 5.0, size=(8, 3))
    for c in (0.1, 2.0, 17.5):
        assert smape(c * t, c * p) == pytest.approx(smape(t, p), abs=1e-9)
        assert mape(c * t, c * p) == pytest.approx(mape(t, p), abs=1e-9)
        assert mse(c * t, c * p) == pytest.approx(c**2 * mse(t, p), rel=1e-9)


def test_metric_shape_mismatch_and_zero_truth():
    with pytest.raises(ValueError, match="shape mismatch"):
        mse(np.zeros((2, 1)), np.zeros((3, 1)))
    with pytest.raises(ValueError, match="undefined MAPE"):
        mape(np.zeros((2, 1)), np.ones((2, 1)))


def test_mse_random8x3_equals_oracle():
    rng = np.random.default_rng(3)
    t, p = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
    assert mse(t, p) == pytest.approx(_mse_loop(t, p), abs=1e-12)


# -- containers and CSV ------------------------------------------------------


def test_multivariate_series_invariants():
    with pytest.raises(ValueError):
        MultivariateSeries(np.empty((0, 2)))
    with pytest.raises(ValueError):
        MultivariateSeries(np.array([[1.0, np.nan]]))
    s = MultivariateSeries(np.ones((4, 2)), channel_names=("a", "b"))
    assert s.length == 4 and s.num_channels == 2


def test_load_csv_basic(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("date,a,b\n2020-01-01,1.0,4\n2020-01-02,2.5,5\n2020-01-03,3e0,6\n")
    data = load_csv(path)
    assert data.name == "tiny"
    assert data.series.num_channels == 2
    assert data.series.length == 3
    np.testing.assert_array_equal(data.series.channel(0), [1.0, 2.5, 3.0])
    assert data.series.channel_names == ("a", "b")


def test_load_csv_errors(tmp_path):
    nan_file = tmp_path / "bad.csv"
    nan_file.write_text("date,a\n1,1.0\n2,NaN\n")
    with pytest.raises(ValueError, match="row 3"):
        load_csv(nan_file)

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("date,a,b\n1,1.0,2.0\n2,1.0\n")
    with pytest.raises(ValueError, match="row 3"):
        load_csv(ragged)

    narrow = tmp_path / "narrow.csv"
    narrow.write_text("date\n1\n")
    with pytest.raises(ValueError, match="2 columns"):
        load_csv(narrow)

    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty file"):
        load_csv(empty)

    text = tmp_path / "text.csv"
    text.write_text("date,a\n1,hello\n")
    with pytest.raises(ValueError, match="non-numeric"):
        load_csv(text)


def test_load_csv_etth_format(tmp_path):
    # benchmark layout: date column plus 7 numeric channels
    path = tmp_path / "etth_like.csv"
    header = "date," + ",".join(f"f{i}" for i in range(7))
    rows = [f"2016-07-0{r + 1}," + ",".join(str(r + i * 0.1) for i in range(7)) for r in range(5)]
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    data = load_csv(path)
    assert data.series.num_channels == 7
