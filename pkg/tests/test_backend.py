"""Parity between the compiled kernels and the NumPy fallback."""

import numpy as np
import pytest

from uavtraj import _kernels_pure as pure
from uavtraj import backend

compiled = pytest.importorskip("uavtraj._kernels")

ACTS = (backend.LINEAR, backend.RELU, backend.TANH)


def _random_layer(rng, batch=7, n_in=5, n_out=4):
    x = rng.normal(size=(batch, n_in))
    w = rng.normal(size=(n_out, n_in))
    b = rng.normal(size=n_out)
    return x, w, b


@pytest.mark.parametrize("act", ACTS)
def test_dense_forward_parity(act):
    rng = np.random.default_rng(0)
    x, w, b = _random_layer(rng)
    got = compiled.dense_act_forward(x, w, b, act)
    want = pure.dense_act_forward(x, w, b, act)
    np.testing.assert_allclose(got, want, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("act", ACTS)
def test_dense_backward_parity(act):
    rng = np.random.default_rng(1)
    x, w, b = _random_layer(rng)
    a = pure.dense_act_forward(x, w, b, act)
    delta = rng.normal(size=a.shape)
    got = compiled.dense_act_backward(delta, a, x, w, act)
    want = pure.dense_act_backward(delta, a, x, w, act)
    for g, e in zip(got, want):
        np.testing.assert_allclose(g, e, rtol=1e-13, atol=1e-13)


def test_adam_parity():
    rng = np.random.default_rng(2)
    n = 257
    p1 = rng.normal(size=n)
    p2 = p1.copy()
    m1 = np.zeros(n)
    v1 = np.zeros(n)
    m2 = np.zeros(n)
    v2 = np.zeros(n)
    for t in range(1, 6):
        g = rng.normal(size=n)
        compiled.adam_update(p1, g, m1, v1, t, 1e-3, 0.9, 0.999, 1e-8)
        pure.adam_update(p2, g, m2, v2, t, 1e-3, 0.9, 0.999, 1e-8)
    np.testing.assert_allclose(p1, p2, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(m1, m2, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(v1, v2, rtol=1e-14, atol=1e-15)


def _random_boxes(rng, n=60, side=1000.0):
    x0 = rng.uniform(0, side - 60, size=n)
    y0 = rng.uniform(0, side - 60, size=n)
    w = rng.uniform(5, 60, size=n)
    h = rng.uniform(5, 60, size=n)
    height = rng.uniform(5, 60, size=n)
    return np.column_stack([x0, x0 + w, y0, y0 + h, height])


def test_segment_blocked_parity():
    rng = np.random.default_rng(3)
    boxes = _random_boxes(rng)
    p = np.column_stack([
        rng.uniform(0, 1000, size=500),
        rng.uniform(0, 1000, size=500),
        rng.uniform(0, 150, size=500),
    ])
    q = np.column_stack([
        rng.uniform(0, 1000, size=500),
        rng.uniform(0, 1000, size=500),
        np.zeros(500),
    ])
    got = compiled.segments_blocked(p, q, boxes)
    want = pure.segments_blocked(p, q, boxes)
    np.testing.assert_array_equal(got, want)
    for i in range(0, 500, 37):
        assert compiled.segment_blocked(p[i], q[i], boxes) == bool(want[i])


def test_segment_blocked_axis_parallel_parity():
    # Vertical probes and probes running exactly along box faces.
    boxes = np.array([[10.0, 20.0, 10.0, 20.0, 30.0]])
    cases = [
        ((15.0, 15.0, 100.0), (15.0, 15.0, 0.0)),   # straight down through roof
        ((10.0, 15.0, 100.0), (10.0, 15.0, 0.0)),   # down the x0 face
        ((0.0, 15.0, 15.0), (40.0, 15.0, 15.0)),    # horizontal through
        ((0.0, 10.0, 15.0), (40.0, 10.0, 15.0)),    # horizontal along y0 face
        ((0.0, 15.0, 30.0), (40.0, 15.0, 30.0)),    # horizontal along roof
    ]
    for p, q in cases:
        got = compiled.segment_blocked(np.array(p), np.array(q), boxes)
        want = pure.segment_blocked(np.array(p), np.array(q), boxes)
        assert got == want


def test_points_in_footprints_parity():
    rng = np.random.default_rng(4)
    boxes = _random_boxes(rng)
    pts = rng.uniform(0, 1000, size=(2000, 2))
    got = compiled.points_in_footprints(pts, boxes)
    want = pure.points_in_footprints(pts, boxes)
    np.testing.assert_array_equal(got, want)


def test_backend_selection_roundtrip():
    original = backend.backend_name()
    try:
        backend.select("pure")
        assert backend.backend_name() == "pure"
        backend.select("compiled")
        assert backend.backend_name() == "compiled"
    finally:
        backend.select(original)
    with pytest.raises(ValueError):
        backend.select("fpga")
