"""Forests of subdomains: the geometric bookkeeping of a fractured domain.

A fractured domain is described as a collection of non-overlapping subdomains
of different topological dimension (bulk matrix, fractures, fracture
intersections and tips).  Every subdomain is the root of a small directed
acyclic graph whose remaining nodes are pieces of its boundary; boundary
pieces that geometrically coincide with a lower-dimensional subdomain point
back to it through ``root_id``.  The collection of all DAGs is the forest.

Conventions used throughout the package:

* Each node carries a reference frame (origin, orthonormal tangent columns,
  and for codimension-one nodes a unit normal).  Reference domains equal the
  initial physical configuration expressed in this frame, so the frame
  derivative has orthonormal columns.
* Fracture normals point from the declared negative side to the positive
  side; a boundary piece stores the sign of its side in
  ``orientation_to_parent``.
* Apertures are positive transverse length scales; by convention the
  aperture of a full-dimensional node is 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Frame",
    "ForestNode",
    "MdGeometry",
    "GeometryError",
    "AmbiguousProjectionError",
    "load_geometry",
    "validate",
    "closest_point_projection",
    "project_to_polyline",
]


class GeometryError(ValueError):
    """Raised when a geometry file cannot be turned into a valid forest."""


class AmbiguousProjectionError(RuntimeError):
    """Closest-point projection has two minimizers; the configuration is
    outside the modeling scale."""


@dataclass(frozen=True)
class Frame:
    """Reference frame of a node: origin, orthonormal tangents, optional normal."""

    origin: np.ndarray
    tangents: np.ndarray  # shape (n, d): tangent column vectors
    normal: Optional[np.ndarray] = None

    def dim(self) -> int:
        return self.tangents.shape[1]

    def close_to(self, other: "Frame", tol: float = 1e-12) -> bool:
        if self.tangents.shape != other.tangents.shape:
            return False
        if not np.allclose(self.origin, other.origin, atol=tol):
            return False
        if not np.allclose(self.tangents, other.tangents, atol=tol):
            return False
        if (self.normal is None) != (other.normal is None):
            return False
        if self.normal is not None and not np.allclose(
            self.normal, other.normal, atol=tol
        ):
            return False
        return True


@dataclass
class ForestNode:
    """One node of the forest.

    ``root_id`` is the index of the subdomain this node coincides with in
    physical space; for a root node it equals ``id``.  ``descendants`` lists
    the nodes whose parent this node is.  ``orientation_to_parent`` maps each
    parent id to the orientation sign of this node relative to the frame of
    the subdomain it coincides with (+1 on the positive side of a fracture
    normal, -1 on the negative side).
    """

    id: int
    root_id: int
    dim: int
    frame: Frame
    aperture: float
    orientation_to_parent: dict[int, int] = field(default_factory=dict)
    descendants: list[int] = field(default_factory=list)

    @property
    def is_root(self) -> bool:
        return self.id == self.root_id and not self.orientation_to_parent


@dataclass
class MdGeometry:
    """An admissible mixed-dimensional partition with its forest.

    Besides the raw node table the object precomputes the index sets used by
    the operators: ``roots`` (subdomain ids), ``dim_index`` (roots by
    dimension), ``interface_sets`` mapping each lower-dimensional root ``i``
    to the boundary nodes of one-dimension-higher subdomains that coincide
    with it, and ``volume_weights`` holding the nonnegative opening weights
    of the volume measure.
    """

    ambient_dim: int
    nodes: dict[int, ForestNode]
    boundary: np.ndarray  # polygon vertices of the outer boundary, shape (m, n)
    roots: list[int] = field(default_factory=list)
    dim_index: dict[int, list[int]] = field(default_factory=dict)
    interface_sets: dict[int, list[int]] = field(default_factory=dict)
    volume_weights: dict[tuple[int, int], float] = field(default_factory=dict)

    def node(self, j: int) -> ForestNode:
        return self.nodes[j]

    def dag_of(self, root: int) -> list[int]:
        """All nodes of the DAG rooted at ``root`` (root first)."""
        out = [root]
        stack = [root]
        while stack:
            for j in self.nodes[stack.pop()].descendants:
                out.append(j)
                stack.append(j)
        return out

    def coinciding(self, root: int) -> list[int]:
        """Nodes j (excluding the root itself) with ``root_id == root``."""
        return [j for j, nd in self.nodes.items() if nd.root_id == root and j != root]

    def skins_of(self, fracture: int) -> list[int]:
        """Boundary nodes of bulk subdomains coinciding with ``fracture``."""
        return self.interface_sets.get(fracture, [])

    def fracture_segment(self, fracture: int) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints of a straight fracture, read from its endpoint roots.

        Falls back to the node frames of the fracture DAG when an endpoint
        does not coincide with a point root (it always does in shipped files).
        """
        nd = self.nodes[fracture]
        ends = [self.nodes[j] for j in nd.descendants]
        if len(ends) != 2:
            raise GeometryError(
                f"fracture {fracture} must have exactly two endpoint nodes"
            )
        pts = [self.nodes[e.root_id].frame.origin for e in ends]
        t = nd.frame.tangents[:, 0]
        if np.dot(pts[1] - pts[0], t) < 0.0:
            pts = [pts[1], pts[0]]
        return np.asarray(pts[0], dtype=float), np.asarray(pts[1], dtype=float)

    def weight(self, receiver: int, source: int) -> float:
        return self.volume_weights.get((receiver, source), 1.0)


# ----------------------------------------------------------------------------
# File loading
# ----------------------------------------------------------------------------

_NODE_KEYS = {"id", "root", "dim", "frame", "aperture", "parents"}
_FRAME_KEYS = {"origin", "tangents", "normal"}
_TOP_KEYS = {"ambient_dim", "nodes", "weights", "boundary"}
_WEIGHT_KEYS = {"node", "source", "omega"}


def _as_unit(v: Sequence[float], what: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(arr)
    if not math.isclose(nrm, 1.0, rel_tol=0, abs_tol=1e-9):
        raise GeometryError(f"{what} must be a unit vector, got norm {nrm}")
    return arr / nrm


def _parse_frame(raw: dict, dim: int, n: int, node_id: int) -> Frame:
    unknown = set(raw) - _FRAME_KEYS
    if unknown:
        raise GeometryError(f"node {node_id}: unknown frame keys {sorted(unknown)}")
    origin = np.asarray(raw.get("origin", [0.0] * n), dtype=float)
    if origin.shape != (n,):
        raise GeometryError(f"node {node_id}: origin must have {n} components")
    tang_raw = raw.get("tangents", [])
    if len(tang_raw) != dim:
        raise GeometryError(
            f"node {node_id}: expected {dim} tangent vectors, got {len(tang_raw)}"
        )
    if dim:
        cols = [_as_unit(t, f"node {node_id} tangent") for t in tang_raw]
        tangents = np.stack(cols, axis=1)
    else:
        tangents = np.zeros((n, 0))
    normal = None
    if "normal" in raw and raw["normal"] is not None:
        if dim == n:
            raise GeometryError(f"node {node_id}: full-dimensional node has no normal")
        normal = _as_unit(raw["normal"], f"node {node_id} normal")
    return Frame(origin=origin, tangents=tangents, normal=normal)


def load_geometry(path: str | Path) -> MdGeometry:
    """Read a geometry file and return a validated :class:`MdGeometry`.

    The file is UTF-8 JSON with top-level keys ``ambient_dim``, ``nodes``,
    ``weights`` and ``boundary``; unknown keys anywhere are rejected.  See
    ``docs`` in the repository README for the full schema.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GeometryError(f"cannot parse {path}: {exc}") from exc

    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise GeometryError(f"unknown top-level keys {sorted(unknown)}")
    try:
        n = int(raw["ambient_dim"])
        node_list = raw["nodes"]
        boundary = np.asarray(raw["boundary"], dtype=float)
    except KeyError as exc:
        raise GeometryError(f"missing required key {exc}") from exc

    nodes: dict[int, ForestNode] = {}
    parent_of: dict[int, list[tuple[int, int]]] = {}
    for entry in node_list:
        unknown = set(entry) - _NODE_KEYS
        if unknown:
            raise GeometryError(
                f"node {entry.get('id')}: unknown keys {sorted(unknown)}"
            )
        nid = int(entry["id"])
        if nid in nodes:
            raise GeometryError(f"duplicate node id {nid}")
        dim = int(entry["dim"])
        if not 0 <= dim <= n:
            raise GeometryError(f"node {nid}: dim {dim} outside [0, {n}]")
        frame = _parse_frame(entry.get("frame", {}), dim, n, nid)
        aperture = float(entry.get("aperture", 1.0))
        if aperture <= 0.0:
            raise GeometryError(f"node {nid}: aperture must be positive")
        parents = entry.get("parents", [])
        orient: dict[int, int] = {}
        for p in parents:
            unknown = set(p) - {"id", "sign"}
            if unknown:
                raise GeometryError(f"node {nid}: unknown parent keys {sorted(unknown)}")
            sign = int(p.get("sign", 1))
            if sign not in (-1, 1):
                raise GeometryError(f"node {nid}: parent sign must be +1 or -1")
            orient[int(p["id"])] = sign
            parent_of.setdefault(nid, []).append((int(p["id"]), sign))
        nodes[nid] = ForestNode(
            id=nid,
            root_id=int(entry["root"]),
            dim=dim,
            frame=frame,
            aperture=aperture,
            orientation_to_parent=orient,
        )

    # Wire descendants and check parent references.
    for nid, plist in parent_of.items():
        for pid, _sign in plist:
            if pid not in nodes:
                raise GeometryError(f"node {nid}: dangling parent id {pid}")
            nodes[pid].descendants.append(nid)
    for nd in nodes.values():
        nd.descendants.sort()
        for pid in nd.orientation_to_parent:
            if nodes[pid].dim <= nd.dim:
                raise GeometryError(
                    f"node {nd.id}: dimension gap violation against parent {pid}"
                )
        if nd.root_id not in nodes:
            raise GeometryError(f"node {nd.id}: dangling root id {nd.root_id}")

    geom = MdGeometry(ambient_dim=n, nodes=nodes, boundary=boundary)
    _index(geom)

    # Volume weights; entries default to 1 when a pair is not listed.
    for w in raw.get("weights", []):
        unknown = set(w) - _WEIGHT_KEYS
        if unknown:
            raise GeometryError(f"weight entry: unknown keys {sorted(unknown)}")
        omega = float(w["omega"])
        if omega < 0.0:
            raise GeometryError("volume weights must be nonnegative")
        geom.volume_weights[(int(w["node"]), int(w["source"]))] = omega

    report = validate(geom)
    if report:
        raise GeometryError("invalid geometry: " + "; ".join(report))
    return geom


def _index(geom: MdGeometry) -> None:
    """Populate roots, dim_index and the interface sets J_i."""
    geom.roots = sorted(j for j, nd in geom.nodes.items() if nd.is_root)
    geom.dim_index = {}
    for i in geom.roots:
        geom.dim_index.setdefault(geom.nodes[i].dim, []).append(i)
    geom.interface_sets = {}
    for i in geom.roots:
        di = geom.nodes[i].dim
        if di >= geom.ambient_dim:
            continue
        members = []
        for j, nd in geom.nodes.items():
            if nd.root_id != i or j == i:
                continue
            parents = list(nd.orientation_to_parent)
            if any(geom.nodes[geom.nodes[p].root_id].dim == di + 1 for p in parents):
                members.append(j)
        geom.interface_sets[i] = sorted(members)


# ----------------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------------


def validate(geom: MdGeometry) -> list[str]:
    """Check the forest invariants; returns a list of violations (empty = clean).

    Violations are data, not exceptions: constructing deliberately broken
    geometries to inspect the report is supported.
    """
    out: list[str] = []
    n = geom.ambient_dim

    for j, nd in geom.nodes.items():
        for d in nd.descendants:
            if geom.nodes[d].dim >= nd.dim:
                out.append(f"node {d}: descendant dim not smaller than parent {j}")
        t = nd.frame.tangents
        if t.shape[1]:
            gram = t.T @ t
            if not np.allclose(gram, np.eye(t.shape[1]), atol=1e-9):
                out.append(f"node {j}: tangent columns not orthonormal")
        if nd.frame.normal is not None and t.shape[1]:
            if not np.allclose(t.T @ nd.frame.normal, 0.0, atol=1e-9):
                out.append(f"node {j}: normal not orthogonal to tangents")
        if nd.dim == n - 1 and nd.frame.normal is None:
            out.append(f"node {j}: codimension-one node lacks a normal")
        if nd.is_root and nd.root_id != j:
            out.append(f"node {j}: root must reference itself")
        if nd.aperture <= 0.0:
            out.append(f"node {j}: nonpositive aperture")

    # Conformity: nodes sharing a root id share the reference frame.
    by_root: dict[int, list[int]] = {}
    for j, nd in geom.nodes.items():
        by_root.setdefault(nd.root_id, []).append(j)
    for i, members in by_root.items():
        if i not in geom.nodes:
            continue
        ref = geom.nodes[i].frame
        for j in members:
            if not geom.nodes[j].frame.close_to(ref):
                out.append(f"node {j}: conformity violation, frame differs from {i}")

    # Interface sets: members must come from one-dimension-higher subdomains.
    for i, members in geom.interface_sets.items():
        di = geom.nodes[i].dim
        for j in members:
            parents = list(geom.nodes[j].orientation_to_parent)
            dims = {geom.nodes[geom.nodes[p].root_id].dim for p in parents}
            if dims != {di + 1}:
                out.append(f"node {j}: interface member of {i} with wrong parent dim")

    # Covering: a fracture interior is claimed by exactly one skin per side.
    for i in geom.roots:
        nd = geom.nodes[i]
        if nd.dim != n - 1:
            continue
        sides: dict[int, int] = {}
        for j in geom.interface_sets.get(i, []):
            for _p, sign in geom.nodes[j].orientation_to_parent.items():
                sides[sign] = sides.get(sign, 0) + 1
        for sign, count in sides.items():
            if count > 1:
                out.append(
                    f"fracture {i}: side {sign:+d} claimed by {count} skins (covering)"
                )
        if set(sides) != {-1, 1}:
            out.append(f"fracture {i}: not covered on both sides")

    for (i, j), omega in geom.volume_weights.items():
        if omega < 0.0:
            out.append(f"weight ({i},{j}) negative")
        if i not in geom.nodes or j not in geom.nodes:
            out.append(f"weight ({i},{j}) references unknown nodes")

    return out


# ----------------------------------------------------------------------------
# Closest-point projection
# ----------------------------------------------------------------------------


def project_to_polyline(
    x: np.ndarray,
    points: np.ndarray,
    rel_tol: float = 1e-12,
) -> np.ndarray:
    """Project ``x`` onto the piecewise-linear curve through ``points``.

    Returns the closest point.  If two segments attain the minimal distance
    (beyond a relative tolerance) with distinct minimizers, the projection is
    declared ambiguous: the deformation has left the modeling scale.
    """
    x = np.asarray(x, dtype=float)
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise ValueError("polyline needs at least two points")
    best_d = np.inf
    best_p = pts[0]
    second_d = np.inf
    second_p = pts[0]
    for a, b in zip(pts[:-1], pts[1:]):
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            cand = a
        else:
            s = float(np.clip((x - a) @ ab / denom, 0.0, 1.0))
            cand = a + s * ab
        d = float(np.linalg.norm(x - cand))
        if d < best_d - 0.0:
            second_d, second_p = best_d, best_p
            best_d, best_p = d, cand
        elif d < second_d:
            second_d, second_p = d, cand
    scale = max(1.0, best_d)
    if (
        np.isfinite(second_d)
        and abs(second_d - best_d) <= rel_tol * scale
        and np.linalg.norm(second_p - best_p) > 1e-9 * max(1.0, np.linalg.norm(best_p))
    ):
        raise AmbiguousProjectionError(
            "two equally close cells: configuration outside modeling scale"
        )
    return best_p


def closest_point_projection(
    x: np.ndarray,
    target: int,
    geom: MdGeometry,
    polyline: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Closest point on subdomain ``target`` (current configuration).

    Without an explicit ``polyline`` the baseline configuration is used:
    point subdomains project to their origin and straight fractures to the
    segment between their endpoint roots.  Passing the deformed vertex chain
    of the target projects onto the current configuration instead.
    """
    nd = geom.nodes[target]
    x = np.asarray(x, dtype=float)
    if polyline is not None:
        return project_to_polyline(x, polyline)
    if nd.dim == 0:
        return geom.nodes[nd.root_id].frame.origin.copy()
    if nd.dim == 1:
        a, b = geom.fracture_segment(nd.root_id if not nd.is_root else target)
        return project_to_polyline(x, np.stack([a, b]))
    raise ValueError("projection targets must be fractures or points")
