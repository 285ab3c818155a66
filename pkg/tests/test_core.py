import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from langanim.core import (ShapeError, code_add, from_uint8, normalized, sequence_deltas,
                           to_uint8)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_code_add_identity_and_inverse(gen):
    a = torch.randn(18, 512, generator=gen, dtype=torch.float64)
    assert torch.equal(code_add(a, torch.zeros_like(a)), a)
    assert torch.equal(code_add(a, -a), torch.zeros_like(a))


def test_code_add_matches_elementwise_loop(rng):
    a, b = rng.normal(size=(3, 512)), rng.normal(size=(3, 512))
    out = code_add(torch.from_numpy(a), torch.from_numpy(b)).numpy()
    for i in range(3):
        for j in range(512):
            assert out[i, j] == a[i, j] + b[i, j]


def test_code_add_shape_mismatch():
    with pytest.raises(ShapeError):
        code_add(torch.zeros(18, 512), torch.zeros(16, 512))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (2, 8), elements=finite), arrays(np.float64, (2, 8), elements=finite),
       arrays(np.float64, (2, 8), elements=finite))
def test_code_add_commutative_associative(a, b, c):
    a, b, c = map(torch.from_numpy, (a, b, c))
    assert torch.equal(code_add(a, b), code_add(b, a))
    lhs, rhs = code_add(code_add(a, b), c), code_add(a, code_add(b, c))
    scale = (a.abs() + b.abs() + c.abs()).max().clamp_min(1.0)
    assert float((lhs - rhs).abs().max() / scale) <= 1e-12


def test_sequence_deltas_constant_and_affine(gen):
    w0 = torch.randn(4, 512, generator=gen, dtype=torch.float64)
    v = torch.randn(4, 512, generator=gen, dtype=torch.float64)
    assert torch.equal(sequence_deltas([w0] * 5), torch.zeros(4, 4, 512, dtype=torch.float64))
    d = sequence_deltas([w0 + i * v for i in range(6)])
    assert d.shape == (5, 4, 512)
    assert torch.allclose(d, v.expand_as(d), atol=1e-12)


def test_sequence_deltas_matches_loop(rng):
    seq = [rng.normal(size=(2, 512)) for _ in range(4)]
    d = sequence_deltas([torch.from_numpy(s) for s in seq]).numpy()
    assert d.shape[0] == 3
    for i in range(3):
        for r in range(2):
            for c in range(512):
                assert d[i, r, c] == seq[i + 1][r, c] - seq[i][r, c]


def test_sequence_deltas_errors():
    with pytest.raises(ValueError):
        sequence_deltas([torch.zeros(2, 512)])
    with pytest.raises(ShapeError):
        sequence_deltas([torch.zeros(2, 512), torch.zeros(3, 512)])


def test_normalized_unit_norm(gen):
    v = torch.randn(7, 512, generator=gen, dtype=torch.float64)
    assert torch.allclose(normalized(v).norm(dim=-1), torch.ones(7, dtype=torch.float64), atol=1e-6)


def test_uint8_roundtrip():
    arr = np.arange(256, dtype=np.uint8).reshape(16, 16, 1).repeat(3, axis=2)
    img = from_uint8(arr)
    assert img.min() == -1 and img.max() == 1
    assert np.array_equal(to_uint8(img), arr)
