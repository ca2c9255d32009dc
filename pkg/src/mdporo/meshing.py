"""Conforming simplicial meshes on a forest geometry.

The mesher produces matched grids: every fracture cell is paired one-to-one
with a boundary facet of the bulk mesh on each side (the skins), and every
fracture endpoint with a point subdomain.  Bulk triangulations are structured
criss-cross grids (four triangles per square, one center vertex), which keeps
two-point flux transmissibilities consistent, and vertices strictly inside a
fracture are duplicated per side so displacement can be discontinuous there.

Only axis-aligned rectangular domains with axis-aligned straight fractures
are meshed; everything else raises :class:`MeshingError`.  Tilted frames are
exercised through the analytic strain kernels, which are mesh-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryError, MdGeometry

__all__ = ["MdMesh", "MeshingError", "build_mesh"]


class MeshingError(RuntimeError):
    """Raised when the domain cannot be meshed (degenerate polygon, grid
    incompatible with a fracture breakpoint)."""


@dataclass
class InteriorFacet:
    cells: tuple[int, int]  # (left, right); normal points left -> right
    verts: tuple[int, int]
    length: float
    normal: np.ndarray
    midpoint: np.ndarray
    dist: float  # distance between the two cell centroids


@dataclass
class BoundaryFacet:
    cell: int
    verts: tuple[int, int]
    length: float
    normal: np.ndarray  # outward
    midpoint: np.ndarray
    kind: str  # "outer" or "skin"
    side: str = ""  # outer: "left"/"right"/"bottom"/"top"
    skin_node: int = -1
    skin_cell: int = -1
    dist: float = 0.0  # cell centroid to facet midpoint


@dataclass
class BulkMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    areas: np.ndarray
    centroids: np.ndarray
    interior_facets: list[InteriorFacet]
    boundary_facets: list[BoundaryFacet]
    outer_vertex_side: dict[int, set[str]]  # vertex -> outer sides it lies on


@dataclass
class FractureMesh:
    vertices: np.ndarray  # (Nv, 2) polyline along the segment
    cells: np.ndarray  # (Nc, 2) vertex index pairs
    lengths: np.ndarray
    midpoints: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray


@dataclass
class SkinMesh:
    node: int
    fracture: int
    sign: int  # side of the fracture normal
    bulk_vertex: np.ndarray  # (Nv,) bulk vertex id per polyline vertex
    bulk_facet: list[int]  # index into bulk boundary_facets per cell


@dataclass
class EndpointInfo:
    node: int
    fracture: int
    end: int  # 0 = first polyline vertex, 1 = last
    point_root: int
    active: bool  # jump across the endpoint is structurally nonzero


@dataclass
class MdMesh:
    """Per-node meshes plus the matched pairing between them."""

    geom: MdGeometry
    h: float
    bulk: dict[int, BulkMesh] = field(default_factory=dict)
    fractures: dict[int, FractureMesh] = field(default_factory=dict)
    skins: dict[int, SkinMesh] = field(default_factory=dict)
    endpoints: dict[int, EndpointInfo] = field(default_factory=dict)
    corner_vertex: dict[int, int] = field(default_factory=dict)  # corner node -> bulk vtx
    point_positions: dict[int, np.ndarray] = field(default_factory=dict)
    bulk_of: dict[int, int] = field(default_factory=dict)  # skin/corner node -> bulk root

    def fracture_of_skin(self, node: int) -> int:
        return self.skins[node].fracture

    def skin_pair(self, fracture: int) -> tuple[int, int]:
        """(positive side skin node, negative side skin node)."""
        pos = neg = -1
        for j, sk in self.skins.items():
            if sk.fracture == fracture:
                if sk.sign > 0:
                    pos = j
                else:
                    neg = j
        return pos, neg


def _axis_rectangle(poly: np.ndarray) -> tuple[float, float, float, float]:
    if poly.shape != (4, 2):
        raise MeshingError("boundary must be a quadrilateral")
    xs, ys = sorted(set(np.round(poly[:, 0], 12))), sorted(set(np.round(poly[:, 1], 12)))
    if len(xs) != 2 or len(ys) != 2:
        raise MeshingError("boundary polygon is not an axis-aligned rectangle")
    if xs[1] - xs[0] <= 0 or ys[1] - ys[0] <= 0:
        raise MeshingError("degenerate polygon")
    return xs[0], xs[1], ys[0], ys[1]


def _grid_count(length: float, h: float, breaks: list[float]) -> int:
    n0 = max(1, math.ceil(length / h - 1e-9))
    for n in range(n0, 64 * n0 + 1):
        dx = length / n
        if all(abs(b / dx - round(b / dx)) < 1e-9 for b in breaks):
            return n
    raise MeshingError("grid incompatible with fracture breakpoints")


def build_mesh(geom: MdGeometry, h: float) -> MdMesh:
    """Mesh every subdomain with target size ``h`` (max cell diameter <= 2h)."""
    if h <= 0:
        raise ValueError("mesh size must be positive")
    n = geom.ambient_dim
    if n != 2:
        raise MeshingError("only two-dimensional domains are meshed")

    x0, x1, y0, y1 = _axis_rectangle(geom.boundary)
    mesh = MdMesh(geom=geom, h=h)

    # Collect straight fracture segments and check they are axis aligned.
    segments: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    xbreaks: list[float] = []
    ybreaks: list[float] = []
    for i in geom.dim_index.get(1, []):
        a, b = geom.fracture_segment(i)
        if abs(a[1] - b[1]) < 1e-12:
            xbreaks += [a[0] - x0, b[0] - x0]
            ybreaks += [a[1] - y0]
        elif abs(a[0] - b[0]) < 1e-12:
            ybreaks += [a[1] - y0, b[1] - y0]
            xbreaks += [a[0] - x0]
        else:
            raise MeshingError(f"fracture {i} is not axis aligned")
        segments[i] = (a, b)

    nx = _grid_count(x1 - x0, h, xbreaks)
    ny = _grid_count(y1 - y0, h, ybreaks)
    dx, dy = (x1 - x0) / nx, (y1 - y0) / ny

    for i in geom.dim_index.get(0, []):
        mesh.point_positions[i] = geom.nodes[i].frame.origin.copy()

    bulk_roots = geom.dim_index.get(n, [])
    if len(bulk_roots) != 1:
        raise MeshingError("exactly one bulk subdomain is supported")
    bulk_id = bulk_roots[0]

    # --- structured criss-cross grid -------------------------------------
    def cidx(ix: int, iy: int) -> int:  # corner vertex index
        return iy * (nx + 1) + ix

    ncorner = (nx + 1) * (ny + 1)

    def midx(ix: int, iy: int) -> int:  # square-center vertex index
        return ncorner + iy * nx + ix

    verts = np.empty((ncorner + nx * ny, 2))
    for iy in range(ny + 1):
        for ix in range(nx + 1):
            verts[cidx(ix, iy)] = (x0 + ix * dx, y0 + iy * dy)
    for iy in range(ny):
        for ix in range(nx):
            verts[midx(ix, iy)] = (x0 + (ix + 0.5) * dx, y0 + (iy + 0.5) * dy)

    tris: list[tuple[int, int, int]] = []
    for iy in range(ny):
        for ix in range(nx):
            v00, v10 = cidx(ix, iy), cidx(ix + 1, iy)
            v01, v11 = cidx(ix, iy + 1), cidx(ix + 1, iy + 1)
            c = midx(ix, iy)
            tris += [(v00, v10, c), (v10, v11, c), (v11, v01, c), (v01, v00, c)]
    triangles = np.asarray(tris, dtype=int)

    # --- duplicate vertices along open fracture interiors ----------------
    def on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> bool:
        t = b - a
        L = np.linalg.norm(t)
        s = np.dot(p - a, t) / L
        return abs(np.cross(t / L, p - a)) < 1e-9 and -1e-9 < s < L + 1e-9

    cut_edges: set[tuple[int, int]] = set()
    for i, (a, b) in segments.items():
        for tri in triangles:
            for u, v in ((0, 1), (1, 2), (2, 0)):
                p, q = verts[tri[u]], verts[tri[v]]
                if on_segment(p, a, b) and on_segment(q, a, b):
                    cut_edges.add(tuple(sorted((tri[u], tri[v]))))

    cut_vertices = sorted({v for e in cut_edges for v in e})
    incident: dict[int, list[int]] = {v: [] for v in cut_vertices}
    for t_id, tri in enumerate(triangles):
        for v in tri:
            if v in incident:
                incident[v].append(t_id)

    def tri_edges(t_id: int) -> list[tuple[int, int]]:
        tri = triangles[t_id]
        return [tuple(sorted((tri[u], tri[v]))) for u, v in ((0, 1), (1, 2), (2, 0))]

    new_rows: list[np.ndarray] = []
    copies_of: dict[int, list[int]] = {}
    next_id = len(verts)
    for v in cut_vertices:
        fan = incident[v]
        # Union triangles of the fan across shared non-cut edges.
        parent = {t: t for t in fan}

        def find(t: int) -> int:
            while parent[t] != t:
                parent[t] = parent[parent[t]]
                t = parent[t]
            return t

        edge_map: dict[tuple[int, int], int] = {}
        for t_id in fan:
            for e in tri_edges(t_id):
                if v not in e or e in cut_edges:
                    continue
                if e in edge_map:
                    ra, rb = find(edge_map[e]), find(t_id)
                    if ra != rb:
                        parent[ra] = rb
                else:
                    edge_map[e] = t_id
        comps: dict[int, list[int]] = {}
        for t_id in fan:
            comps.setdefault(find(t_id), []).append(t_id)
        ordered = sorted(comps.values(), key=lambda ts: min(ts))
        ids = [v]
        for comp in ordered[1:]:
            for t_id in comp:
                tri = triangles[t_id]
                triangles[t_id] = [next_id if w == v else w for w in tri]
            new_rows.append(verts[v].copy())
            ids.append(next_id)
            next_id += 1
        copies_of[v] = ids

    if new_rows:
        verts = np.vstack([verts, np.asarray(new_rows)])

    # --- bulk facets ------------------------------------------------------
    areas = np.empty(len(triangles))
    centroids = np.empty((len(triangles), 2))
    for t_id, tri in enumerate(triangles):
        p = verts[tri]
        areas[t_id] = 0.5 * abs(np.cross(p[1] - p[0], p[2] - p[0]))
        centroids[t_id] = p.mean(axis=0)
    if np.any(areas <= 0):
        raise MeshingError("zero-area cell generated")

    edge_cells: dict[tuple[int, int], list[int]] = {}
    for t_id in range(len(triangles)):
        for e in tri_edges(t_id):
            edge_cells.setdefault(e, []).append(t_id)

    interior: list[InteriorFacet] = []
    boundary: list[BoundaryFacet] = []
    for e, cells in sorted(edge_cells.items()):
        p, q = verts[e[0]], verts[e[1]]
        length = float(np.linalg.norm(q - p))
        mid = 0.5 * (p + q)
        tang = (q - p) / length
        nrm = np.array([tang[1], -tang[0]])
        if len(cells) == 2:
            cl, cr = cells
            d = centroids[cr] - centroids[cl]
            if np.dot(d, nrm) < 0:
                nrm = -nrm
            interior.append(
                InteriorFacet(
                    cells=(cl, cr),
                    verts=e,
                    length=length,
                    normal=nrm,
                    midpoint=mid,
                    dist=float(np.linalg.norm(d)),
                )
            )
        else:
            (c,) = cells
            if np.dot(mid - centroids[c], nrm) < 0:
                nrm = -nrm
            bf = BoundaryFacet(
                cell=c,
                verts=e,
                length=length,
                normal=nrm,
                midpoint=mid,
                kind="outer",
                dist=float(np.linalg.norm(mid - centroids[c])),
            )
            if abs(mid[0] - x0) < 1e-9:
                bf.side = "left"
            elif abs(mid[0] - x1) < 1e-9:
                bf.side = "right"
            elif abs(mid[1] - y0) < 1e-9:
                bf.side = "bottom"
            elif abs(mid[1] - y1) < 1e-9:
                bf.side = "top"
            else:
                bf.kind = "skin"
            boundary.append(bf)

    outer_vertex_side: dict[int, set[str]] = {}
    for bf in boundary:
        if bf.kind != "outer":
            continue
        for v in bf.verts:
            outer_vertex_side.setdefault(v, set()).add(bf.side)

    mesh.bulk[bulk_id] = BulkMesh(
        vertices=verts,
        triangles=np.asarray(triangles, dtype=int),
        areas=areas,
        centroids=centroids,
        interior_facets=interior,
        boundary_facets=boundary,
        outer_vertex_side=outer_vertex_side,
    )

    # --- fracture polylines and skin pairing ------------------------------
    for i, (a, b) in segments.items():
        L = float(np.linalg.norm(b - a))
        t = (b - a) / L
        step = dx if abs(t[0]) > 0.5 else dy
        nc = int(round(L / step))
        fverts = np.array([a + t * (L * k / nc) for k in range(nc + 1)])
        cells = np.array([(k, k + 1) for k in range(nc)], dtype=int)
        nd = geom.nodes[i]
        mesh.fractures[i] = FractureMesh(
            vertices=fverts,
            cells=cells,
            lengths=np.full(nc, L / nc),
            midpoints=0.5 * (fverts[:-1] + fverts[1:]),
            tangent=nd.frame.tangents[:, 0].copy(),
            normal=nd.frame.normal.copy(),
        )

    bm = mesh.bulk[bulk_id]
    skin_facets: dict[tuple[int, int], list[int]] = {}
    for bf_id, bf in enumerate(bm.boundary_facets):
        if bf.kind != "skin":
            continue
        for i, (a, b) in segments.items():
            if on_segment(bf.midpoint, a, b):
                nrm = geom.nodes[i].frame.normal
                side = 1 if np.dot(bf.normal, nrm) < 0 else -1
                skin_facets.setdefault((i, side), []).append(bf_id)
                bf.skin_node = -2  # tagged; node id resolved below
                break
        else:
            raise MeshingError("boundary facet inside the domain off any fracture")

    for fr_id, fm in mesh.fractures.items():
        for j in geom.skins_of(fr_id):
            sign = next(iter(geom.nodes[j].orientation_to_parent.values()))
            facets = skin_facets.get((fr_id, sign), [])
            if len(facets) != len(fm.cells):
                raise MeshingError(
                    f"skin {j}: {len(facets)} facets vs {len(fm.cells)} fracture cells"
                )
            order = np.argsort(
                [np.dot(bm.boundary_facets[f].midpoint - fm.vertices[0], fm.tangent)
                 for f in facets]
            )
            facets = [facets[k] for k in order]
            bulk_vertex = np.full(len(fm.vertices), -1, dtype=int)
            for cell_k, bf_id in enumerate(facets):
                bf = bm.boundary_facets[bf_id]
                bf.skin_node = j
                bf.skin_cell = cell_k
                for v in bf.verts:
                    s = np.dot(bm.vertices[v] - fm.vertices[0], fm.tangent)
                    k = int(round(s / fm.lengths[0]))
                    bulk_vertex[k] = v
            if np.any(bulk_vertex < 0):
                raise MeshingError(f"skin {j}: unpaired polyline vertex")
            mesh.skins[j] = SkinMesh(
                node=j, fracture=fr_id, sign=sign, bulk_vertex=bulk_vertex,
                bulk_facet=facets,
            )
            mesh.bulk_of[j] = bulk_id

    # --- point subdomains: corner copies and fracture endpoints ----------
    vertex_at: dict[int, list[int]] = {}
    for i, pos in mesh.point_positions.items():
        hits = np.nonzero(np.linalg.norm(bm.vertices - pos, axis=1) < 1e-9)[0]
        vertex_at[i] = sorted(int(v) for v in hits)

    # corner nodes: assign each to one duplicated bulk vertex at the point
    for i in geom.dim_index.get(0, []):
        corner_nodes = sorted(
            j
            for j in geom.coinciding(i)
            if geom.nodes[next(iter(geom.nodes[j].orientation_to_parent))].dim == n
        )
        copies = vertex_at.get(i, [])
        if len(corner_nodes) != len(copies):
            raise MeshingError(
                f"point {i}: {len(corner_nodes)} corner nodes vs {len(copies)} vertex copies"
            )
        # deterministic pairing: order copies by fan angle around the point
        def fan_angle(v: int) -> float:
            cells = [t for t, tri in enumerate(bm.triangles) if v in tri]
            c = bm.centroids[cells].mean(axis=0)
            d = c - mesh.point_positions[i]
            return math.atan2(d[1], d[0])

        copies_sorted = sorted(copies, key=fan_angle)
        for j, v in zip(corner_nodes, copies_sorted):
            mesh.corner_vertex[j] = v
            mesh.bulk_of[j] = bulk_id

    for i in geom.dim_index.get(0, []):
        for j in geom.coinciding(i):
            parent = next(iter(geom.nodes[j].orientation_to_parent))
            pnd = geom.nodes[parent]
            if pnd.dim != 1:
                continue
            fr = parent if pnd.is_root else pnd.root_id
            fm = mesh.fractures[fr]
            pos = mesh.point_positions[i]
            end = 0 if np.linalg.norm(fm.vertices[0] - pos) < 1e-9 else 1
            if np.linalg.norm(fm.vertices[-end] - pos) > 1e-9:
                raise MeshingError(f"endpoint node {j} off fracture {fr}")
            pos_skin, neg_skin = mesh.skin_pair(fr)
            k = 0 if end == 0 else len(fm.vertices) - 1
            vp = mesh.skins[pos_skin].bulk_vertex[k]
            vn = mesh.skins[neg_skin].bulk_vertex[k]
            mesh.endpoints[j] = EndpointInfo(
                node=j, fracture=fr, end=end, point_root=i, active=(vp != vn)
            )

    _check_pairing(mesh)
    return mesh


def _check_pairing(mesh: MdMesh) -> None:
    """Matched-grid contract: skin cells biject with fracture cells."""
    for j, sk in mesh.skins.items():
        fm = mesh.fractures[sk.fracture]
        if len(sk.bulk_facet) != len(fm.cells):
            raise MeshingError(f"skin {j} pairing is not a bijection")
        if len(set(sk.bulk_facet)) != len(sk.bulk_facet):
            raise MeshingError(f"skin {j} pairing repeats a facet")
    for fm in mesh.fractures.values():
        if np.any(fm.lengths <= 0):
            raise MeshingError("nonpositive fracture cell measure")
