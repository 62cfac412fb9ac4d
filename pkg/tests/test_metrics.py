import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp

from sanp.metrics import MetricsReport, compute_metrics


def exact_mae_rmse(mu, truth):
    errs = [Fraction(float(a)) - Fraction(float(b)) for a, b in zip(mu, truth)]
    n = len(errs)
    mae = sum(abs(e) for e in errs) / n
    mse = sum(e * e for e in errs) / n
    mp.dps = 50
    return float(mae), float(mp.sqrt(mp.mpf(mse.numerator) / mse.denominator))


def test_against_exact_arithmetic(rng):
    mu, truth = rng.normal(size=2000) * 50, rng.normal(size=2000) * 50
    r = compute_metrics(mu, truth)
    mae, rmse = exact_mae_rmse(mu, truth)
    assert abs(r.mae - mae) <= 1e-9 * max(1, mae)
    assert abs(r.rmse - rmse) <= 1e-9 * max(1, rmse)
    assert r.nll is None and r.n_points == 2000


def test_nll_against_mpmath(rng):
    mu, truth, sigma = rng.normal(size=500), rng.normal(size=500), rng.uniform(0.05, 4, 500)
    mp.dps = 40
    ref = sum(mp.log(mp.mpf(s)) + mp.log(2 * mp.pi) / 2 + (mp.mpf(t) - mp.mpf(m)) ** 2 / (2 * mp.mpf(s) ** 2)
              for m, t, s in zip(mu, truth, sigma)) / 500
    assert compute_metrics(mu, truth, sigma).nll == pytest.approx(float(ref), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4)), min_size=1, max_size=50))
def test_rmse_never_below_mae(pairs):
    mu, truth = np.array(pairs).T
    r = compute_metrics(mu, truth)
    assert r.rmse >= r.mae * (1 - 1e-12) and r.mae >= 0


def test_perfect_prediction():
    r = compute_metrics([1.0, 2.0], [1.0, 2.0])
    assert r.mae == 0 and r.rmse == 0


def test_input_validation():
    with pytest.raises(ValueError):
        compute_metrics([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        compute_metrics([], [])
    with pytest.raises(ValueError):
        compute_metrics([1.0], [1.0], [0.0])
    with pytest.raises(ValueError):
        compute_metrics([1.0, 2.0], [1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        MetricsReport(mae=2.0, rmse=1.0, n_points=1)


def test_row_formatting():
    row = compute_metrics([0.0, 2.0], [1.0, 1.0], [1.0, 1.0]).as_row()
    assert row["mae"] == "1" and row["rmse"] == "1" and row["n_points"] == "2"
    assert float(row["nll"]) == pytest.approx(0.5 * math.log(2 * math.pi) + 0.5, rel=1e-5)
    assert compute_metrics([0.0], [1.0]).as_row()["nll"] == ""


def test_worked_examples():
    r = compute_metrics([1, 1, 1, 1], [0, 0, 0, 0])
    assert r.mae == 1 and r.rmse == 1
    r = compute_metrics([0, 2], [0, 0])
    assert r.mae == 1 and r.rmse == pytest.approx(math.sqrt(2))


def test_permutation_invariant(rng):
    mu, truth, s = rng.normal(size=300), rng.normal(size=300), rng.uniform(0.5, 2, 300)
    p = rng.permutation(300)
    a, b = compute_metrics(mu, truth, s), compute_metrics(mu[p], truth[p], s[p])
    assert a.mae == pytest.approx(b.mae, rel=1e-13) and a.rmse == pytest.approx(b.rmse, rel=1e-13)
    assert a.nll == pytest.approx(b.nll, rel=1e-13)
