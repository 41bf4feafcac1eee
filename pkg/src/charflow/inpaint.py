"""Transport-based image inpainting on raster masks.

The mask region is the domain, the one-pixel ring of known pixels around it
is the inflow boundary, the distance-map ridge is the stop set.  Every
masked pixel is filled with the known value at the foot of its backward
characteristic; the quasi-linear mode re-adapts the transport direction to
the evolving image.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ._kernels import RasterFlow, trace_endpoints
from .errors import MaskMismatch
from .linear_solver import GridFunction
from .quasilinear import build_inpainting_coefficients, solve_quasilinear
from .timefield import field_from_distance_grid


def _extend_nearest(field, valid):
    """Fill invalid pixels with their nearest valid value (for interpolation)."""
    if valid.all():
        return field
    _, (ii, jj) = ndimage.distance_transform_edt(~valid, return_indices=True)
    return field[ii, jj]


def raster_flow(tf, c_raster):
    """Backward-velocity rasters -c0 = -c/<c, grad T0> for the trace kernel."""
    t = tf.t_raster
    q = tf.q
    rem = np.maximum(1.0 - t, 0.0)
    on_sigma = tf.sigma_cells
    fac = np.zeros_like(t)
    ok = rem > 1e-12
    fac[ok] = (1.0 / q) * rem[ok] ** ((1.0 - q) / q)
    g0x = fac * tf.gx_raster
    g0y = fac * tf.gy_raster
    denom = c_raster[:, :, 0] * g0x + c_raster[:, :, 1] * g0y
    good = tf.inside & ~on_sigma & (denom > 1e-12)
    vx = np.where(good, -c_raster[:, :, 0] / np.where(good, denom, 1.0), 0.0)
    vy = np.where(good, -c_raster[:, :, 1] / np.where(good, denom, 1.0), 0.0)
    vx = _extend_nearest(vx, good)
    vy = _extend_nearest(vy, good)
    # the stop-set cells keep zero velocity: the flow stalls there
    vx[on_sigma] = 0.0
    vy[on_sigma] = 0.0
    return RasterFlow(t0=np.ascontiguousarray(tf.t0_raster()),
                      vx=np.ascontiguousarray(vx), vy=np.ascontiguousarray(vy),
                      origin=tf.origin, spacing=tf.spacing)


@dataclass
class InpaintProblem:
    """One scalar channel of the raster transport problem.

    Plays the template role of the analytic problem in the fixed-point
    iteration: solve_with freezes a transport raster and refills the mask.
    """

    tf: object  # GridTimeField
    known: np.ndarray  # channel raster with valid values outside the mask
    step: float = 1e-3
    beta: float = 0.2
    backend: str = None
    threads: int = None

    def __post_init__(self):
        inside = self.tf.inside
        ring = ndimage.binary_dilation(inside) & ~inside
        self.ring = ring
        ii, jj = np.nonzero(ring)
        self._ring_vals = self.known[ring]
        self._ring_tree = cKDTree(np.c_[self.tf.origin[0] + jj * self.tf.spacing,
                                        self.tf.origin[1] + ii * self.tf.spacing])
        ii, jj = np.nonzero(inside)
        self._starts = np.ascontiguousarray(
            np.c_[self.tf.origin[0] + jj * self.tf.spacing,
                  self.tf.origin[1] + ii * self.tf.spacing])

    def grid(self, values):
        return GridFunction(values=values, mask=self.tf.inside.astype(np.uint8),
                            spacing=self.tf.spacing, origin=self.tf.origin)

    def solve_with(self, c, f, like=None, step=None, threads=None, check_points=None):
        if f is not None:
            raise ValueError("raster transport supports zero right-hand side only")
        flow = raster_flow(self.tf, c)
        # the clock runs at unit rate, so a few units of budget suffice
        max_steps = int(np.ceil(4.0 / (step or self.step)))
        ends, status = trace_endpoints(flow, self._starts, step=step or self.step,
                                       max_steps=max_steps, backend=self.backend,
                                       threads=threads if threads is not None else self.threads)
        _, idx = self._ring_tree.query(ends)
        vals = self.known.astype(float).copy()
        vals[self.tf.inside] = self._ring_vals[idx]
        return self.grid(vals)


def normal_raster(tf):
    """Unit raster field N = gradT/|gradT| (the pure distance transport)."""
    mag = np.hypot(tf.gx_raster, tf.gy_raster)
    mag = np.where(mag > 0, mag, 1.0)
    return np.stack([tf.gx_raster / mag, tf.gy_raster / mag], axis=-1)


def field_beta_est(tf, c_raster):
    """Sampled min <c, N> over the mask interior (away from the ridge)."""
    n = normal_raster(tf)
    cells = tf.inside & ~ndimage.binary_dilation(tf.sigma_cells)
    dots = (c_raster[:, :, 0] * n[:, :, 0] + c_raster[:, :, 1] * n[:, :, 1])[cells]
    return float(dots.min()) if dots.size else 1.0


def inpaint_channel(problem, blend, smoothing, beta, tol, max_iter, step, threads):
    """Fill one scalar channel; returns (filled GridFunction, report dict)."""
    tf = problem.tf
    n_raster = normal_raster(tf)
    seed = problem.solve_with(n_raster, None, step=step, threads=threads)
    if blend == 0.0:
        return seed, {"iterations": 0, "residuals": [], "converged": True}
    fc = build_inpainting_coefficients(tf, beta=beta, smoothing=smoothing, blend=blend)
    u, rep = solve_quasilinear(fc, problem, seed, tol=tol, max_iter=max_iter,
                               step=step, threads=threads)
    return u, {"iterations": rep.n_iters, "residuals": rep.l1_residuals,
               "converged": rep.converged}


def inpaint_image(image, mask, blend=0.0, smoothing=2.0, q=2.0, beta=0.2,
                  step=1e-3, tol=1e-4, max_iter=8, threads=None, backend=None):
    """Fill the masked region of a unit-range image.

    image: (h, w) or (h, w, 3) floats in [0, 1]; mask: bool raster, True on
    the pixels to fill, strictly inside the image.  Returns (filled image,
    report dict).
    """
    image = np.asarray(image, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != image.shape[:2]:
        raise MaskMismatch(f"mask {mask.shape} vs image {image.shape[:2]}")
    if mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any():
        raise MaskMismatch("mask region must be strictly inside the image")
    tf = field_from_distance_grid(mask, spacing=1.0, q=q)
    report = {"q": q, "beta": beta, "blend": blend, "m0": tf.m0,
              "sigma_cells": int(tf.sigma_cells.sum()), "channels": []}
    channels = [image] if image.ndim == 2 else [image[:, :, k] for k in range(3)]
    filled = []
    for ch in channels:
        problem = InpaintProblem(tf=tf, known=ch, step=step, beta=beta,
                                 backend=backend, threads=threads)
        u, rep = inpaint_channel(problem, blend, smoothing, beta, tol,
                                 max_iter, step, threads)
        ch_out = ch.copy()
        ch_out[mask] = u.values[mask]
        filled.append(np.clip(ch_out, 0.0, 1.0))
        report["channels"].append(rep)
    out = filled[0] if image.ndim == 2 else np.stack(filled, axis=-1)
    return out, report
