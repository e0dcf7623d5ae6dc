import numpy as np
import pytest

import grnnlab as g
from grnnlab.dropout import dropout_apply


def vec(n, seed=0):
    rng = g.Rng(seed)
    return np.array([rng.standard_normal() for _ in range(n)])


def test_rate_zero_is_identity_for_both_kinds():
    v = vec(20)
    prev = vec(20, seed=1)
    for kind in ("regular", "recurrent"):
        out = dropout_apply(v, prev, 0.0, kind, g.Rng(0), training=True)
        assert np.array_equal(out, v)


def test_inference_mode_is_identity():
    v = vec(20)
    out = dropout_apply(v, None, 0.5, "regular", g.Rng(0), training=False)
    assert np.array_equal(out, v)


def test_regular_mask_statistics():
    n = 100_000
    v = vec(n, seed=2)
    out = dropout_apply(v, None, 0.3, "regular", g.Rng(7), training=True)
    zero_fraction = float((out == 0).mean())
    assert abs(zero_fraction - 0.3) < 0.01
    # inverted dropout preserves the expectation over the whole vector
    assert abs(out.mean() - v.mean()) < 0.02
    survivors = out != 0
    assert np.allclose(out[survivors], v[survivors] / 0.7)


def test_recurrent_extremes_are_exact():
    v = vec(30, seed=3)
    prev = vec(30, seed=4)
    assert np.array_equal(dropout_apply(v, prev, 0.0, "recurrent", g.Rng(0), True), v)
    out = dropout_apply(v, prev, 1.0, "recurrent", g.Rng(0), True)
    assert np.array_equal(out, prev)


def test_recurrent_mixes_without_rescaling():
    n = 50_000
    v = np.ones(n)
    prev = np.zeros(n)
    out = dropout_apply(v, prev, 0.25, "recurrent", g.Rng(9), training=True)
    assert set(np.unique(out)) <= {0.0, 1.0}  # values taken verbatim, no scaling
    kept_fraction = out.mean()
    assert abs(kept_fraction - 0.75) < 0.01


def test_parameter_errors():
    v = vec(4)
    with pytest.raises(g.ParameterError):
        dropout_apply(v, None, 1.0, "regular", g.Rng(0), True)
    with pytest.raises(g.ParameterError):
        dropout_apply(v, None, -0.1, "regular", g.Rng(0), True)
    with pytest.raises(g.ParameterError):
        dropout_apply(v, None, 1.1, "recurrent", g.Rng(0), True)
    with pytest.raises(g.ParameterError):
        dropout_apply(v, None, 0.5, "recurrent", g.Rng(0), True)  # prev missing
    with pytest.raises(g.ParameterError):
        dropout_apply(v, v, 0.5, "banana", g.Rng(0), True)


def test_deterministic_given_rng():
    v = vec(100, seed=5)
    a = dropout_apply(v, None, 0.4, "regular", g.Rng(33), True)
    b = dropout_apply(v, None, 0.4, "regular", g.Rng(33), True)
    assert np.array_equal(a, b)
