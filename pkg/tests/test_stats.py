import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from driftlab.stats import (CI_Z, EstimateReport, agree, batch_means, combined_se, exact,
                            rows_to_csv_text, write_csv)


def test_batch_means_iid_se_matches_classical(rng):
    x = rng.normal(size=200_000)
    r = batch_means(x, "x")
    assert r.value == pytest.approx(x.mean())
    # batch-means SE of iid data scatters around sigma/sqrt(n) with ~7% error
    assert r.se == pytest.approx(1 / np.sqrt(len(x)), rel=0.3)
    assert r.batches.shape == (100,)


def test_batch_means_detects_correlation(rng):
    # AR(1) with phi=0.9: the iid formula underestimates the SE by sqrt(19)
    e = rng.normal(size=200_000)
    x = np.empty_like(e)
    x[0] = e[0]
    for i in range(1, len(e)):
        x[i] = 0.9 * x[i - 1] + e[i]
    naive = x.std() / np.sqrt(len(x))
    assert batch_means(x, "ar").se > 3 * naive


def test_small_and_empty_samples():
    with pytest.raises(ValueError):
        batch_means([], "e")
    r = batch_means([1.0], "one")
    assert r.value == 1 and np.isinf(r.se)
    assert len(batch_means(np.arange(40.0), "s").batches) == 40


def test_interval_helpers():
    r = EstimateReport("v", [1.0, -0.1], [0.1, 0.1], 10)
    assert r.halfwidth[0] == pytest.approx(CI_Z * 0.1)
    assert r.excludes_zero() and not r.contains(0.0)
    assert r.component(1).contains(0.0)
    assert exact("z", [0.0, 0.0]).contains(0.0)
    assert combined_se(3.0, 4.0) == 5.0
    assert agree(1.0, 1.25, 0.1) and not agree(1.0, 1.35, 0.1)


def test_dict_and_csv_round_trip(tmp_path):
    r = EstimateReport("v", [1.0, 2.0], [0.1, 0.2], 10, "plain")
    back = EstimateReport.from_dict(r.to_dict())
    assert back.to_dict() == r.to_dict()
    rows = list(r.rows(0.1, 0.5, 7))
    text = rows_to_csv_text(rows)
    assert text.splitlines()[0] == "name,component,value,se,n,variant,epsilon,lambda,seed"
    path = tmp_path / "e.csv"
    write_csv(path, rows)
    write_csv(path, rows)
    assert path.read_text().count("name,") == 1 and len(path.read_text().splitlines()) == 5


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.integers(30, 500), elements=st.floats(-1e3, 1e3)),
       st.floats(0.1, 10), st.floats(-5, 5))
def test_batch_means_affine_equivariance(x, a, b):
    r = batch_means(x, "x")
    s = batch_means(a * x + b, "y")
    assert s.value == pytest.approx(a * r.value + b, abs=1e-9 * (1 + abs(a * r.value) + abs(b)))
    assert s.se == pytest.approx(a * r.se, rel=1e-6, abs=1e-9)
