"""Grid output: flat binary raster + JSON header, and PGM export."""

import os

import numpy as np

from .linear_solver import GridFunction
from .netpbm import write_image
from .reports import save_json


def save_grid(g, basepath):
    """Write <base>.bin, <base>.mask.bin, <base>.json and <base>.pgm.

    The PGM maps the finite values affinely onto [0, 255]; the mapping is
    recorded in the JSON header.
    """
    values_file = basepath + ".bin"
    mask_file = basepath + ".mask.bin"
    np.ascontiguousarray(g.values, dtype="<f8").tofile(values_file)
    np.ascontiguousarray(g.mask, dtype=np.uint8).tofile(mask_file)
    fin = g.finite()
    vmin = float(g.values[fin].min()) if fin.any() else 0.0
    vmax = float(g.values[fin].max()) if fin.any() else 1.0
    span = vmax - vmin if vmax > vmin else 1.0
    pgm = np.zeros_like(g.values)
    pgm[fin] = (g.values[fin] - vmin) / span * 255.0
    write_image(basepath + ".pgm", np.rint(pgm).astype(np.uint8))
    header = {
        "width": int(g.values.shape[1]),
        "height": int(g.values.shape[0]),
        "spacing": g.spacing,
        "origin": [g.origin[0], g.origin[1]],
        "values_file": os.path.basename(values_file),
        "values_dtype": "<f8",
        "mask_file": os.path.basename(mask_file),
        "mask_encoding": "uint8: 0 outside, 1 inside, 2 sigma-tube",
        "pgm_mapping": {"vmin": vmin, "vmax": vmax},
    }
    save_json(basepath + ".json", header)
    return header


def load_grid(basepath):
    import json

    with open(basepath + ".json", encoding="utf-8") as fh:
        header = json.load(fh)
    ny, nx = header["height"], header["width"]
    values = np.fromfile(basepath + ".bin", dtype="<f8").reshape(ny, nx)
    mask = np.fromfile(basepath + ".mask.bin", dtype=np.uint8).reshape(ny, nx)
    return GridFunction(values=values, mask=mask, spacing=header["spacing"],
                        origin=tuple(header["origin"]))
