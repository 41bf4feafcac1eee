import numpy as np
import pytest

from charflow import _kernels
from charflow._kernels import RasterFlow, numpy_backend, trace_endpoints
from charflow.inpaint import normal_raster, raster_flow
from charflow.timefield import field_from_distance_grid


@pytest.fixture(scope="module")
def disk_flow():
    n = 64
    jj, ii = np.meshgrid(np.arange(n), np.arange(n))
    mask = (ii - n / 2) ** 2 + (jj - n / 2) ** 2 < (0.4 * n) ** 2
    tf = field_from_distance_grid(mask, spacing=1.0)
    flow = raster_flow(tf, normal_raster(tf))
    ii, jj = np.nonzero(tf.inside)
    starts = np.ascontiguousarray(np.c_[jj.astype(float), ii.astype(float)])
    return flow, starts


def test_compiled_backend_is_available():
    assert "compiled" in _kernels.available_backends()
    assert _kernels.default_backend() == "compiled"


def test_backends_agree_exactly(disk_flow):
    flow, starts = disk_flow
    e1, s1 = trace_endpoints(flow, starts, step=2e-3, max_steps=4000, backend="compiled")
    e2, s2 = trace_endpoints(flow, starts, step=2e-3, max_steps=4000, backend="numpy")
    assert np.array_equal(s1, s2)
    assert np.array_equal(e1, e2)


@pytest.mark.parametrize("backend", ["compiled", "numpy"])
def test_thread_count_does_not_change_results(disk_flow, backend):
    flow, starts = disk_flow
    e1, s1 = trace_endpoints(flow, starts, step=2e-3, max_steps=4000,
                             backend=backend, threads=1)
    e3, s3 = trace_endpoints(flow, starts, step=2e-3, max_steps=4000,
                             backend=backend, threads=3)
    assert np.array_equal(e1, e3)
    assert np.array_equal(s1, s3)


def test_arrival_status_and_negative_t0(disk_flow):
    flow, starts = disk_flow
    ends, status = trace_endpoints(flow, starts, step=2e-3, max_steps=4000)
    arrived = status == _kernels.STATUS_ARRIVED
    assert arrived.mean() > 0.95  # everything except ridge-stalled pixels
    # arrivals sit on the zero level of the extended T0
    t0 = numpy_backend._gather(flow.t0, ends[arrived, 0] - flow.origin[0],
                               ends[arrived, 1] - flow.origin[1])
    assert np.abs(t0).max() < 1e-6


def test_stalled_ridge_pixel(disk_flow):
    flow, starts = disk_flow
    # a start with zero velocity raster all around it stalls immediately
    still = RasterFlow(t0=np.ones_like(flow.t0) * 0.5, vx=np.zeros_like(flow.vx),
                       vy=np.zeros_like(flow.vy), origin=flow.origin, spacing=1.0)
    ends, status = trace_endpoints(still, starts[:4], step=1e-2, max_steps=50)
    assert (status == _kernels.STATUS_STALLED).all()
    assert np.array_equal(ends, starts[:4])


def test_step_limit_status():
    # constant velocity circling: never reaches the stop level
    n = 32
    flow = RasterFlow(t0=np.full((n, n), 0.5), vx=np.full((n, n), 1.0),
                      vy=np.zeros((n, n)), origin=(0.0, 0.0), spacing=1.0)
    starts = np.array([[5.0, 5.0]])
    ends, status = trace_endpoints(flow, starts, step=1e-2, max_steps=10)
    assert status[0] == _kernels.STATUS_STEP_LIMIT
