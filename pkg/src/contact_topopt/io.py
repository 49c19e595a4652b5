"""Result writers: legacy ASCII VTK and CSV histories."""
import csv
import io as _io

import numpy as np

from .history import COLUMNS


def _fmt(x):
    return format(float(x), ".9g")


def write_vtk(mesh, fields, path, title="contact_topopt"):
    """Write a legacy ASCII VTK 3.0 unstructured grid of triangles.

    ``fields`` maps names to arrays: length ``n_vertices`` (point scalars),
    ``(n_vertices, 2)`` or ``2 n_vertices`` interleaved (point vectors), or
    length ``n_triangles`` (cell scalars). Names are written sorted so the
    output depends only on the inputs.
    """
    nv, nt = mesh.n_vertices, mesh.n_triangles
    point_scalars, point_vectors, cell_scalars = [], [], []
    for name in sorted(fields):
        if any(c.isspace() for c in name):
            raise ValueError(f"field name {name!r} contains whitespace")
        a = np.asarray(fields[name], dtype=float)
        if a.shape == (nv, 2):
            point_vectors.append((name, a))
        elif a.shape == (nv,):
            point_scalars.append((name, a))
        elif a.shape == (nt,):
            cell_scalars.append((name, a))
        elif a.shape == (2 * nv,):
            point_vectors.append((name, a.reshape(nv, 2)))
        else:
            raise ValueError(f"field {name!r} with shape {a.shape} matches neither vertices nor triangles")
    out = _io.StringIO()
    w = out.write
    w("# vtk DataFile Version 3.0\n")
    w(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
    w(f"POINTS {nv} double\n")
    for x, y in mesh.vertices:
        w(f"{_fmt(x)} {_fmt(y)} 0\n")
    w(f"CELLS {nt} {4 * nt}\n")
    for a, b, c in mesh.triangles:
        w(f"3 {a} {b} {c}\n")
    w(f"CELL_TYPES {nt}\n")
    w("5\n" * nt)
    if point_scalars or point_vectors:
        w(f"POINT_DATA {nv}\n")
        for name, a in point_scalars:
            w(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            w("".join(f"{_fmt(v)}\n" for v in a))
        for name, a in point_vectors:
            w(f"VECTORS {name} double\n")
            w("".join(f"{_fmt(x)} {_fmt(y)} 0\n" for x, y in a))
    if cell_scalars:
        w(f"CELL_DATA {nt}\n")
        for name, a in cell_scalars:
            w(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            w("".join(f"{_fmt(v)}\n" for v in a))
    with open(path, "w", newline="\n") as fh:
        fh.write(out.getvalue())


def write_history_csv(history, path):
    """CSV with a fixed header and CRLF line endings; floats in shortest round-trip form."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(COLUMNS)
        for r in history:
            writer.writerow([r.iter, repr(r.objective), repr(r.volume), repr(r.volume_fraction),
                             repr(r.ell), repr(r.gamma), r.newton_iters, r.wall_ms])


def read_history_csv(path):
    """Rows as dicts of floats/ints, mainly for checks and post-processing."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ints = {"iter", "newton_iters", "wall_ms"}
    return [{k: (int(v) if k in ints else float(v)) for k, v in row.items()} for row in rows]
