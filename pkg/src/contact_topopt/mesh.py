"""Conforming triangular meshes of the 2D design domains with boundary tags.

Boundary tags:

    D  clamped (Dirichlet)
    N  loaded (inhomogeneous Neumann)
    C  frictional contact with a rigid foundation
    F  traction free; the only part allowed to move in shape optimization

Side assignments use a small string syntax shared with the config file: a
default tag optionally followed by comma-separated ``TAG lo hi`` overrides,
where ``lo``/``hi`` are absolute coordinates along the side (x for horizontal
sides, y for vertical ones), e.g. ``"F, N 0.45 0.55"``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvertedElementError

TAGS = ("D", "N", "C", "F")
FIXED_TAGS = ("D", "N", "C")

_GEOM_TOL = 1e-9


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle mesh.

    ``vertices`` is (N, 2), ``triangles`` (M, 3) counterclockwise, and
    ``boundary_edges`` (K, 2) oriented with the domain on the left, each with
    one entry of ``edge_tags``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray

    def __post_init__(self):
        for name, dtype in (("vertices", float), ("triangles", np.int64),
                            ("boundary_edges", np.int64), ("edge_tags", "<U1")):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def signed_areas(self):
        return signed_areas(self.vertices, self.triangles)

    def areas(self):
        return self.signed_areas()

    @property
    def volume(self):
        return float(self.signed_areas().sum())

    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def edge_lengths(self, edges=None):
        edges = self.boundary_edges if edges is None else edges
        d = self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def max_edge_length(self):
        v = self.vertices[self.triangles]
        d = v - np.roll(v, 1, axis=1)
        return float(np.hypot(d[..., 0], d[..., 1]).max())

    def edges_with(self, *tags):
        """Boundary edges whose tag is in ``tags``."""
        return self.boundary_edges[np.isin(self.edge_tags, tags)]

    def vertices_on(self, *tags):
        """Sorted indices of vertices touching an edge with one of ``tags``."""
        return np.unique(self.edges_with(*tags))

    def fixed_vertex_mask(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.vertices_on(*FIXED_TAGS)] = True
        return mask

    def boundary_vertex_mask(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    def outward_normals(self, edges=None):
        edges = self.boundary_edges if edges is None else edges
        d = self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]]
        n = np.column_stack([d[:, 1], -d[:, 0]])
        return n / np.hypot(n[:, 0], n[:, 1])[:, None]

    def with_vertices(self, vertices):
        return Mesh(vertices, self.triangles, self.boundary_edges, self.edge_tags)

    def validate(self):
        """Raise :class:`ConfigurationError` if a mesh invariant is violated."""
        if np.any(self.signed_areas() <= 0):
            raise ConfigurationError("mesh has triangles with nonpositive area")
        if set(np.unique(self.edge_tags)) - set(TAGS):
            raise ConfigurationError(f"unknown boundary tags {set(self.edge_tags) - set(TAGS)}")
        expected = _boundary_edges(self.triangles)
        got = {tuple(e) for e in self.boundary_edges.tolist()}
        if got != {tuple(e) for e in expected.tolist()} or len(got) != len(self.boundary_edges):
            raise ConfigurationError("tagged edges do not cover the topological boundary exactly once")
        if not np.any(self.edge_tags == "D"):
            raise ConfigurationError("the clamped boundary (tag D) must be nonempty")
        contact_axis(self)
        return self


def signed_areas(vertices, triangles):
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def contact_axis(mesh):
    """Per contact edge, the index of the normal coordinate (0 = x, 1 = y).

    Contact edges must be axis aligned so the normal constraint acts on a
    single displacement component.
    """
    edges = mesh.edges_with("C")
    d = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    length = np.hypot(d[:, 0], d[:, 1])
    horizontal = np.abs(d[:, 1]) <= 1e-12 * np.maximum(length, 1.0)
    vertical = np.abs(d[:, 0]) <= 1e-12 * np.maximum(length, 1.0)
    if np.any(~(horizontal | vertical)):
        raise ConfigurationError("contact edges must be axis aligned")
    return np.where(horizontal, 1, 0)


def _boundary_edges(triangles):
    """Edges used by exactly one triangle, oriented as in that triangle."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return e[counts[inverse.ravel()] == 1]


# ---------------------------------------------------------------------------
# Domain specification and generation


def parse_side(value):
    """Parse a side assignment into ``(default_tag, [(tag, lo, hi), ...])``."""
    if isinstance(value, tuple) and len(value) == 2 and not isinstance(value[1], (int, float)):
        default, overrides = value
        return default, [tuple(o) for o in overrides]
    parts = [p.strip() for p in str(value).split(",") if p.strip()]
    if not parts:
        raise ConfigurationError("empty side assignment")
    default = parts[0].upper()
    if default not in TAGS:
        raise ConfigurationError(f"unknown boundary tag {parts[0]!r}")
    overrides = []
    for part in parts[1:]:
        tokens = part.split()
        if len(tokens) != 3 or tokens[0].upper() not in TAGS:
            raise ConfigurationError(f"bad side override {part!r}; expected 'TAG lo hi'")
        try:
            lo, hi = float(tokens[1]), float(tokens[2])
        except ValueError:
            raise ConfigurationError(f"bad side override {part!r}; expected 'TAG lo hi'") from None
        if not lo < hi:
            raise ConfigurationError(f"empty interval in side override {part!r}")
        overrides.append((tokens[0].upper(), lo, hi))
    return default, overrides


@dataclass
class DomainSpec:
    """Geometry, target mesh size and boundary assignment of a design domain.

    ``kind`` is ``rectangle`` (params ``width``, ``height``),
    ``square_with_hole`` (``side``, ``hole_center``, ``hole_radius``) or
    ``lshape`` (``outer``, ``notch``; the notch square is removed from the
    bottom-right corner).
    """

    kind: str
    params: dict
    h: float
    boundary: dict = field(default_factory=dict)

    def sides(self):
        """Map side name -> ((x0, y0), (x1, y1)) for the straight outer sides."""
        p = self.params
        if self.kind == "rectangle":
            w, ht = p["width"], p["height"]
            corners = {"bottom": ((0, 0), (w, 0)), "right": ((w, 0), (w, ht)),
                       "top": ((w, ht), (0, ht)), "left": ((0, ht), (0, 0))}
        elif self.kind == "square_with_hole":
            s = p["side"]
            corners = {"bottom": ((0, 0), (s, 0)), "right": ((s, 0), (s, s)),
                       "top": ((s, s), (0, s)), "left": ((0, s), (0, 0))}
        elif self.kind == "lshape":
            o, n = p["outer"], p["notch"]
            corners = {"bottom": ((0, 0), (o - n, 0)), "notch_side": ((o - n, 0), (o - n, n)),
                       "notch_top": ((o - n, n), (o, n)), "right": ((o, n), (o, o)),
                       "top": ((o, o), (0, o)), "left": ((0, o), (0, 0))}
        else:
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")
        return corners

    def area(self):
        p = self.params
        if self.kind == "rectangle":
            return p["width"] * p["height"]
        if self.kind == "square_with_hole":
            return p["side"] ** 2 - math.pi * p["hole_radius"] ** 2
        if self.kind == "lshape":
            return p["outer"] ** 2 - p["notch"] ** 2
        raise ConfigurationError(f"unknown domain kind {self.kind!r}")

    def check(self):
        if not self.h > 0:
            raise ConfigurationError(f"mesh size h must be positive, got {self.h}")
        sides = self.sides()
        names = set(sides) | ({"hole"} if self.kind == "square_with_hole" else set())
        unknown = set(self.boundary) - names
        if unknown:
            raise ConfigurationError(f"unknown boundary sides {sorted(unknown)} for {self.kind}")
        missing = names - set(self.boundary)
        if missing:
            raise ConfigurationError(f"no boundary tag given for sides {sorted(missing)}")
        p = self.params
        if self.kind == "rectangle" and not (p["width"] > 0 and p["height"] > 0):
            raise ConfigurationError("rectangle needs positive width and height")
        if self.kind == "lshape" and not (0 < p["notch"] < p["outer"]):
            raise ConfigurationError("lshape needs 0 < notch < outer")
        if self.kind == "square_with_hole":
            s, (cx, cy), r = p["side"], p["hole_center"], p["hole_radius"]
            if not (r > 0 and cx - r > 0 and cy - r > 0 and cx + r < s and cy + r < s):
                raise ConfigurationError("hole must lie strictly inside the square")
            if parse_side(self.boundary["hole"])[1]:
                raise ConfigurationError("the hole boundary takes a single tag")
        for name, value in self.boundary.items():
            parse_side(value)
        return self


def _side_breaks(spec):
    """Breakpoints along x (horizontal sides) and y (vertical sides)."""
    xs, ys = set(), set()
    for name, (p0, p1) in spec.sides().items():
        _, overrides = parse_side(spec.boundary[name])
        horizontal = p0[1] == p1[1]
        target = xs if horizontal else ys
        target.update([p0[0 if horizontal else 1], p1[0 if horizontal else 1]])
        lo_s, hi_s = sorted((p0[0 if horizontal else 1], p1[0 if horizontal else 1]))
        for _, lo, hi in overrides:
            target.update(v for v in (lo, hi) if lo_s < v < hi_s)
    return sorted(xs), sorted(ys)


def _subdivide(breaks, h):
    pts = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-9))
        pts.extend(np.linspace(a, b, n + 1)[1:])
    return np.array(pts)


def _tag_edges(spec, vertices, edges):
    tags = np.full(len(edges), "", dtype="<U1")
    mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    scale = max(1.0, float(np.abs(vertices).max()))
    for name, (p0, p1) in spec.sides().items():
        default, overrides = parse_side(spec.boundary[name])
        horizontal = p0[1] == p1[1]
        along, across = (0, 1) if horizontal else (1, 0)
        lo_s, hi_s = sorted((p0[along], p1[along]))
        on = ((np.abs(mid[:, across] - p0[across]) < _GEOM_TOL * scale)
              & (mid[:, along] > lo_s) & (mid[:, along] < hi_s))
        tags[on] = default
        for tag, lo, hi in overrides:
            tags[on & (mid[:, along] > lo) & (mid[:, along] < hi)] = tag
    if spec.kind == "square_with_hole":
        (cx, cy), r = spec.params["hole_center"], spec.params["hole_radius"]
        on = np.hypot(mid[:, 0] - cx, mid[:, 1] - cy) < r + _GEOM_TOL * scale
        tags[on] = parse_side(spec.boundary["hole"])[0]
    if np.any(tags == ""):
        raise ConfigurationError("internal: untagged boundary edge after generation")
    return tags


def _grid_mesh(xs, ys, keep_cell=None):
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            if keep_cell is not None and not keep_cell(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])):
                continue
            v00, v10 = j * nx + i, j * nx + i + 1
            v01, v11 = v00 + nx, v10 + nx
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return vertices, np.array(tris, dtype=np.int64)


def _hole_mesh(spec, xs, ys):
    s = spec.params["side"]
    c = np.asarray(spec.params["hole_center"], dtype=float)
    r = spec.params["hole_radius"]
    # perimeter points counterclockwise from the origin, corners included once
    ring = [(x, 0.0) for x in xs[:-1]]
    ring += [(s, y) for y in ys[:-1]]
    ring += [(x, s) for x in xs[::-1][:-1]]
    ring += [(0.0, y) for y in ys[::-1][:-1]]
    outer = np.array(ring)
    d = outer - c
    ang = np.arctan2(d[:, 1], d[:, 0])
    inner = c + r * np.column_stack([np.cos(ang), np.sin(ang)])
    span = np.hypot(*(outer - inner).T)
    n_r = max(1, math.ceil(span.max() / spec.h - 1e-9))
    t = np.linspace(0.0, 1.0, n_r + 1)
    n_t = len(outer)
    vertices = (inner[None, :, :] + t[:, None, None] * (outer - inner)[None, :, :]).reshape(-1, 2)
    tris = []
    for k in range(n_r):
        for i in range(n_t):
            i1 = (i + 1) % n_t
            a, b = k * n_t + i, k * n_t + i1
            cc, dd = (k + 1) * n_t + i1, (k + 1) * n_t + i
            diag_ac = np.linalg.norm(vertices[a] - vertices[cc])
            diag_bd = np.linalg.norm(vertices[b] - vertices[dd])
            if diag_ac <= diag_bd:
                tris += [(a, b, cc), (a, cc, dd)]
            else:
                tris += [(a, b, dd), (b, cc, dd)]
    return vertices, np.array(tris, dtype=np.int64)


def _compact(vertices, triangles):
    used = np.unique(triangles)
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return vertices[used], remap[triangles]


def generate_domain(spec):
    """Build a tagged, validated mesh for ``spec``.

    Rectangles and L-shapes use a split-quad tensor grid whose lines pass
    through every tag breakpoint; the holed square uses rays from the hole
    center to the outer boundary points.
    """
    spec.check()
    xs_b, ys_b = _side_breaks(spec)
    xs, ys = _subdivide(xs_b, spec.h), _subdivide(ys_b, spec.h)
    if spec.kind == "rectangle":
        vertices, tris = _grid_mesh(xs, ys)
    elif spec.kind == "lshape":
        o, n = spec.params["outer"], spec.params["notch"]
        vertices, tris = _grid_mesh(xs, ys, keep_cell=lambda x, y: not (x > o - n and y < n))
    else:
        vertices, tris = _hole_mesh(spec, xs, ys)
    vertices, tris = _compact(vertices, tris)
    areas = signed_areas(vertices, tris)
    flip = areas < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    edges = _boundary_edges(tris)
    tags = _tag_edges(spec, vertices, edges)
    return Mesh(vertices, tris, edges, tags).validate()


# ---------------------------------------------------------------------------
# Deformation and quality


def move_vertices(mesh, velocity, step):
    """Return the mesh with vertices moved by ``step * velocity``.

    Raises :class:`InvertedElementError` if any triangle loses positive area,
    and ``ValueError`` if a vertex on a fixed boundary has nonzero velocity.
    """
    velocity = np.asarray(velocity, dtype=float)
    if velocity.shape != mesh.vertices.shape:
        raise ValueError(f"velocity shape {velocity.shape} != vertices shape {mesh.vertices.shape}")
    if np.any(velocity[mesh.fixed_vertex_mask()] != 0.0):
        raise ValueError("vertices on D, N or C boundaries must have zero velocity")
    new = mesh.vertices + step * velocity
    areas = signed_areas(new, mesh.triangles)
    bad = np.flatnonzero(areas <= 0)
    if len(bad):
        raise InvertedElementError(f"{len(bad)} triangles inverted at step {step:g}", bad)
    return mesh.with_vertices(new)


def vertex_neighbors(mesh):
    """CSR-style (indptr, indices) adjacency of the vertex graph."""
    t = mesh.triangles
    rows = np.concatenate([t[:, 0], t[:, 1], t[:, 2], t[:, 1], t[:, 2], t[:, 0]])
    cols = np.concatenate([t[:, 1], t[:, 2], t[:, 0], t[:, 0], t[:, 1], t[:, 2]])
    pairs = np.unique(np.column_stack([rows, cols]), axis=0)
    indptr = np.searchsorted(pairs[:, 0], np.arange(mesh.n_vertices + 1))
    return indptr, pairs[:, 1]


def smooth_interior(mesh, iterations=3):
    """Laplacian smoothing of interior vertices; boundary vertices stay put.

    A vertex whose move would invert an adjacent triangle is reverted.
    """
    interior = ~mesh.boundary_vertex_mask()
    if not interior.any():
        return mesh
    indptr, nbrs = vertex_neighbors(mesh)
    counts = np.diff(indptr)
    owner = np.repeat(np.arange(mesh.n_vertices), counts)
    x = mesh.vertices.copy()
    for _ in range(iterations):
        sums = np.zeros_like(x)
        np.add.at(sums, owner, x[nbrs])
        avg = sums / counts[:, None]
        trial = np.where(interior[:, None], avg, x)
        while True:
            bad = signed_areas(trial, mesh.triangles) <= 0
            if not bad.any():
                break
            revert = np.unique(mesh.triangles[bad])
            if np.all(trial[revert] == x[revert]):
                break
            trial[revert] = x[revert]
        x = trial
    return mesh.with_vertices(x)


def triangle_quality(vertices, triangles):
    """Per-triangle ``2 * inradius / circumradius`` (1 for equilateral)."""
    p = vertices[triangles]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    area = np.abs(signed_areas(vertices, triangles))
    s = 0.5 * (a + b + c)
    return 8.0 * area**2 / (s * a * b * c)


def mesh_quality(mesh):
    return float(triangle_quality(mesh.vertices, mesh.triangles).min())


# ---------------------------------------------------------------------------
# Plain-text interchange format


def write_mesh(mesh, path):
    """Write the ASCII format: header, coordinates, triangles, ``(i j TAG)`` rows."""
    lines = [f"vertices {mesh.n_vertices} / triangles {mesh.n_triangles} / boundary {len(mesh.boundary_edges)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [f"({i} {j} {t})" for (i, j), t in zip(mesh.boundary_edges, mesh.edge_tags)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    with open(path) as fh:
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ConfigurationError(f"{path}: empty mesh file")
    head = rows[0].replace("/", " ").split()
    try:
        counts = dict(zip(head[0::2], (int(v) for v in head[1::2])))
        nv, nt, nb = counts["vertices"], counts["triangles"], counts["boundary"]
    except (KeyError, ValueError):
        raise ConfigurationError(f"{path}: bad header {rows[0]!r}", line=1) from None
    body = rows[1:]
    if len(body) != nv + nt + nb:
        raise ConfigurationError(f"{path}: expected {nv + nt + nb} data rows, found {len(body)}")
    vertices = np.array([[float(v) for v in r.split()] for r in body[:nv]])
    tris = np.array([[int(v) for v in r.split()] for r in body[nv:nv + nt]], dtype=np.int64)
    edges, tags = [], []
    for r in body[nv + nt:]:
        i, j, t = r.strip("()").split()
        edges.append((int(i), int(j)))
        tags.append(t.upper())
    return Mesh(vertices, tris, np.array(edges, dtype=np.int64).reshape(-1, 2), np.array(tags)).validate()
