"""NumPy implementations of the hot kernels.

The compiled extension ``uavtraj._kernels`` mirrors these signatures; this
module is the fallback selected at import time when the extension is
unavailable, and the reference the extension is tested against.
"""

import numpy as np

LINEAR, RELU, TANH = 0, 1, 2

# Two segment/box slabs closer than this (in segment parameter units) count
# as a grazing touch, not a blockage.
_CHORD_TOL = 1e-12
_PARALLEL_TOL = 1e-15


def dense_act_forward(x, w, b, act):
    """act(x @ w.T + b) for a dense layer; x is (batch, n_in), w is (n_out, n_in)."""
    z = x @ w.T
    z += b
    if act == RELU:
        np.maximum(z, 0.0, out=z)
    elif act == TANH:
        np.tanh(z, out=z)
    return z


def dense_act_backward(delta, a, x, w, act):
    """Backward pass of dense_act_forward.

    delta is dL/da (batch, n_out) and a the activated output; returns
    (dL/dw, dL/db, dL/dx) with gradients summed over the batch.
    """
    if act == RELU:
        dpre = delta * (a > 0.0)
    elif act == TANH:
        dpre = delta * (1.0 - a * a)
    else:
        dpre = delta
    gw = dpre.T @ x
    gb = dpre.sum(axis=0)
    gx = dpre @ w
    return gw, gb, gx


def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    """In-place adaptive-moment step on flat float64 views p, m, v."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _slab_intervals(p, q, boxes):
    # boxes rows are (x0, x1, y0, y1, height); returns per-(segment, box)
    # entry/exit parameters of the open-interior intersection.
    o = p[:, None, :]
    d = (q - p)[:, None, :]
    nseg, nbox = p.shape[0], boxes.shape[0]
    lo = np.empty((nbox, 3))
    hi = np.empty((nbox, 3))
    lo[:, 0], hi[:, 0] = boxes[:, 0], boxes[:, 1]
    lo[:, 1], hi[:, 1] = boxes[:, 2], boxes[:, 3]
    lo[:, 2], hi[:, 2] = 0.0, boxes[:, 4]
    lo = lo[None]
    hi = hi[None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (lo - o) / d
        tb = (hi - o) / d
    tmin = np.minimum(ta, tb)
    tmax = np.maximum(ta, tb)
    par = np.abs(d) < _PARALLEL_TOL
    inside = (o > lo) & (o < hi)
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
    t0 = np.maximum(tmin.max(axis=2), 0.0)
    t1 = np.minimum(tmax.min(axis=2), 1.0)
    return t0, t1


def segments_blocked(p, q, boxes):
    """Whether each open segment p[i]-q[i] crosses the interior of any box."""
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    boxes = np.asarray(boxes, dtype=np.float64)
    if boxes.shape[0] == 0:
        return np.zeros(p.shape[0], dtype=np.uint8)
    t0, t1 = _slab_intervals(p, q, boxes)
    return ((t1 - t0) > _CHORD_TOL).any(axis=1).astype(np.uint8)


def segment_blocked(p, q, boxes):
    """Single-segment variant of segments_blocked."""
    return bool(segments_blocked(np.asarray(p)[None], np.asarray(q)[None], boxes)[0])


def points_in_footprints(xy, boxes):
    """Whether each 2-D point lies strictly inside any box footprint."""
    xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
    boxes = np.asarray(boxes, dtype=np.float64)
    if boxes.shape[0] == 0:
        return np.zeros(xy.shape[0], dtype=np.uint8)
    x = xy[:, 0:1]
    y = xy[:, 1:2]
    inside = (
        (x > boxes[None, :, 0])
        & (x < boxes[None, :, 1])
        & (y > boxes[None, :, 2])
        & (y < boxes[None, :, 3])
    )
    return inside.any(axis=1).astype(np.uint8)
