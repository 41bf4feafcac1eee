"""Raster-field trace kernels: compiled core with a pure-numpy fallback.

The hot loop of grid-backed solves (one backward characteristic per pixel,
RK4 with bilinear field interpolation) is implemented twice with identical
semantics: in Cython (`_trace`, built at install time) and in vectorized
numpy (`numpy_backend`).  The compiled kernel is selected at import when
available; `CHARFLOW_BACKEND=numpy|compiled` overrides, and
`CHARFLOW_THREADS` sets the parallel width.  Output is deterministic for a
given backend regardless of the thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import numpy_backend

try:
    from . import _trace as _compiled
except ImportError:  # pragma: no cover - source tree without built extension
    _compiled = None

STATUS_ARRIVED = 0
STATUS_STEP_LIMIT = 1
STATUS_STALLED = 2


@dataclass(frozen=True)
class RasterFlow:
    """Backward-velocity rasters for pixel tracing.

    t0 is the transformed time (negative outside the region), (vx, vy) the
    backward velocity -c0 sampled at pixel centers, all C-contiguous
    float64 of the same shape.
    """

    t0: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    origin: tuple
    spacing: float


def available_backends():
    out = ["numpy"]
    if _compiled is not None:
        out.insert(0, "compiled")
    return out


def default_backend():
    env = os.environ.get("CHARFLOW_BACKEND", "").strip().lower()
    if env in ("numpy", "compiled"):
        if env == "compiled" and _compiled is None:
            raise RuntimeError("CHARFLOW_BACKEND=compiled but the extension is not built")
        return env
    return "compiled" if _compiled is not None else "numpy"


def thread_count(threads=None):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("CHARFLOW_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def analytic_thread_count(threads=None):
    """Width for the closure-based (analytic) batch path.

    numpy's elementwise kernels hold the GIL long enough that chunking a
    vectorized batch across threads only adds contention, so the default is
    1; an explicit CHARFLOW_THREADS still applies (results are identical
    for any width).
    """
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("CHARFLOW_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return 1


def trace_endpoints(flow, starts, step=1e-3, max_steps=20000, stop_level=0.0,
                    backend=None, threads=None):
    """Backward-trace every start point to the stop level of t0.

    Returns (endpoints (N, 2), status (N,) uint8).  Work is split into
    contiguous chunks across threads; per-point arithmetic is independent of
    the chunking, so results do not depend on the thread count.
    """
    starts = np.ascontiguousarray(starts, dtype=float)
    n = len(starts)
    which = backend or default_backend()
    nthreads = thread_count(threads)
    ends = np.empty_like(starts)
    status = np.empty(n, dtype=np.uint8)

    def run(lo, hi):
        if which == "compiled":
            _compiled.trace_endpoints(flow.t0, flow.vx, flow.vy,
                                      flow.origin[0], flow.origin[1], flow.spacing,
                                      starts[lo:hi], step, max_steps, stop_level,
                                      ends[lo:hi], status[lo:hi])
        else:
            e, st = numpy_backend.trace_endpoints(flow, starts[lo:hi], step, max_steps, stop_level)
            ends[lo:hi] = e
            status[lo:hi] = st

    if nthreads == 1 or n < 2 * nthreads:
        run(0, n)
    else:
        bounds = np.linspace(0, n, nthreads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            futs = [pool.submit(run, bounds[i], bounds[i + 1]) for i in range(nthreads)]
            for f in futs:
                f.result()
    return ends, status
