#!/usr/bin/env python3
"""Benchmark the compiled trace kernel against the numpy fallback.

Runs the per-pixel backward-trace kernel (the grid-solve hot loop) on disk
masks of increasing size with both backends and reports wall time and the
maximal endpoint discrepancy.  Equivalent single-size runs are available as
`charflow bench`.
"""

import argparse
import time

import numpy as np

from charflow._kernels import available_backends, trace_endpoints
from charflow.inpaint import normal_raster, raster_flow
from charflow.timefield import field_from_distance_grid


def make_case(n):
    jj, ii = np.meshgrid(np.arange(n), np.arange(n))
    mask = (ii - n / 2) ** 2 + (jj - n / 2) ** 2 < (0.4 * n) ** 2
    tf = field_from_distance_grid(mask, spacing=1.0)
    flow = raster_flow(tf, normal_raster(tf))
    ii, jj = np.nonzero(tf.inside)
    starts = np.ascontiguousarray(np.c_[jj.astype(float), ii.astype(float)])
    return flow, starts


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="64,128,192")
    ap.add_argument("--step", type=float, default=1e-3)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    header = f"{'size':>6} {'pixels':>8} " + " ".join(f"{b:>12}" for b in backends)
    print(header + ("   max |diff|" if len(backends) == 2 else ""))
    for n in (int(s) for s in args.sizes.split(",")):
        flow, starts = make_case(n)
        times = {}
        ends = {}
        for b in backends:
            best = np.inf
            for _ in range(args.repeat):
                t0 = time.time()
                e, _ = trace_endpoints(flow, starts, step=args.step,
                                       max_steps=int(4.0 / args.step),
                                       backend=b, threads=args.threads)
                best = min(best, time.time() - t0)
            times[b] = best
            ends[b] = e
        row = f"{n:>6} {len(starts):>8} " + " ".join(f"{times[b]:>11.3f}s" for b in backends)
        if len(backends) == 2:
            row += f"   {np.abs(ends[backends[0]] - ends[backends[1]]).max():.2e}"
        print(row)


if __name__ == "__main__":
    main()
