"""Field snapshot files.

One JSON header line, then the raw samples: little-endian float64 in
row-major order, components concatenated.  The header records dimension,
points per axis, component count, a field name, and a time stamp.
"""

import json

import numpy as np

from .fields import Grid, PeriodicField, VectorField, grid

_MAGIC_KEYS = ("dimension", "n_per_axis", "components", "name", "time")


def write_snapshot(path, field, name="field", time=0.0):
    if isinstance(field, VectorField):
        comps = field.components
    else:
        comps = (field,)
    g = comps[0].grid
    if any(n != g.n for n in g.shape):
        raise ValueError("snapshot format requires a uniform grid")
    header = {
        "dimension": g.d,
        "n_per_axis": g.n,
        "components": len(comps),
        "name": str(name),
        "time": float(time),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("ascii") + b"\n")
        for c in comps:
            fh.write(np.ascontiguousarray(c.values, dtype="<f8").tobytes())


def read_snapshot(path):
    """Returns (field, header). Scalar snapshots come back as PeriodicField,
    multi-component ones as VectorField."""
    with open(path, "rb") as fh:
        line = fh.readline()
        header = json.loads(line.decode("ascii"))
        for key in _MAGIC_KEYS:
            if key not in header:
                raise ValueError(f"snapshot header missing {key!r}")
        d = int(header["dimension"])
        n = int(header["n_per_axis"])
        ncomp = int(header["components"])
        count = ncomp * n**d
        data = np.frombuffer(fh.read(count * 8), dtype="<f8")
        if data.size != count:
            raise ValueError("snapshot truncated")
        if fh.read(1):
            raise ValueError("trailing bytes after snapshot payload")
    g = grid(d, n)
    comps = [
        PeriodicField(g, data[i * n**d : (i + 1) * n**d].reshape(g.shape).copy())
        for i in range(ncomp)
    ]
    field = comps[0] if ncomp == 1 else VectorField(comps)
    return field, header
