"""Block-indexed L2 spaces over k-forests.

A space of order ``k`` collects coefficient blocks on exactly the nodes of
the k-forest: the nodes ``j`` of a DAG rooted at ``i`` with ``d_i >= n - k``
and ``d_i - d_j <= n - k``.  Four spaces matter here (``n`` is the ambient
dimension):

* ``(k=n, p=1)`` densities: one dof per cell of every subdomain (pressures).
* ``(k=n-1, p=1)`` fluxes: one dof per interior facet of every subdomain of
  dimension >= 1, plus one per skin cell and fracture endpoint (interface
  fluxes).
* ``(k=0, p=n)`` displacements: n dofs per mesh vertex of the bulk DAG nodes,
  vertices duplicated across fracture sides.
* ``(k=1, p=n)`` strains/stresses in the symmetry-constrained shape: a
  symmetric tensor per bulk cell (Voigt components xx, yy, xy), a tangential
  scalar per skin cell, and a (parallel, perpendicular) pair per fracture
  cell and active fracture endpoint.

Each dof carries a positive mass weight realizing the component-wise L2
inner product with exact cell measures (lumped at vertices), so weighted
transposes of the operator matrices are exact adjoints.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .meshing import MdMesh

__all__ = ["MdSpace", "MdFunction", "build_space", "inner_product", "member_nodes"]

VOIGT = 3  # xx, yy, xy at n = 2
GRAD = 4  # full 2x2 gradient components row-major


def member_nodes(mesh: MdMesh, k: int) -> list[int]:
    """Nodes of the k-forest (roots with d_i >= n-k, descendants of
    codimension <= n-k)."""
    geom = mesh.geom
    n = geom.ambient_dim
    out = []
    for i in geom.roots:
        di = geom.nodes[i].dim
        if di < n - k:
            continue
        for j in geom.dag_of(i):
            if di - geom.nodes[j].dim <= n - k:
                out.append(j)
    return sorted(out)


@dataclass
class Block:
    node: int
    offset: int
    length: int
    shape: tuple[int, ...]


@dataclass
class MdSpace:
    """Dof layout of one mixed-dimensional space over a mesh."""

    mesh: MdMesh
    k: int
    p: int
    kind: str
    member: list[int]
    blocks: dict[int, Block] = field(default_factory=dict)
    mass: np.ndarray = field(default_factory=lambda: np.zeros(0))
    drained: dict[int, list[int]] = field(default_factory=dict)  # flux only
    check_mask: np.ndarray | None = None  # strain only: fracture-DAG dofs

    @property
    def ndof(self) -> int:
        return int(self.mass.size)

    def zeros(self) -> "MdFunction":
        return MdFunction(self, np.zeros(self.ndof))

    def block(self, node: int) -> Block:
        return self.blocks[node]

    # Per-kind dof helpers -------------------------------------------------

    def cell_dof(self, node: int, cell: int = 0) -> int:
        """Density dof of a cell (pressure space)."""
        return self.blocks[node].offset + cell

    def vert_dof(self, node: int, vert: int, comp: int) -> int:
        """Displacement dof (vertex, component)."""
        return self.blocks[node].offset + 2 * vert + comp

    def point_dof(self, node: int, comp: int = 0) -> int:
        return self.blocks[node].offset + comp

    def strain_dof(self, node: int, cell: int, comp: int) -> int:
        """Strain dof; components are Voigt on bulk, (par, perp) on fracture
        DAG nodes, the single tangential component on skins."""
        b = self.blocks[node]
        ncomp = b.shape[-1]
        return b.offset + ncomp * cell + comp

    def facet_dof(self, node: int, facet: int) -> int:
        """Interior-facet flux dof of a subdomain."""
        return self.blocks[node].offset + facet

    def drained_dof(self, node: int, which: int) -> int:
        bm = self.mesh.bulk[node]
        n_int = len(bm.interior_facets)
        return self.blocks[node].offset + n_int + which

    def skin_dof(self, node: int, cell: int) -> int:
        return self.blocks[node].offset + cell

    def to_csv(self, coeffs: np.ndarray, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "index", "value"])
            for j in self.member:
                b = self.blocks[j]
                for loc in range(b.length):
                    w.writerow([j, loc, repr(float(coeffs[b.offset + loc]))])


@dataclass
class MdFunction:
    """Coefficient vector over an :class:`MdSpace`."""

    space: MdSpace
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        if self.coefficients.shape != (self.space.ndof,):
            raise ValueError("coefficient length does not match the space layout")

    def restrict(self, node: int) -> np.ndarray:
        """Writable view of the local block, in its local shape."""
        if node not in self.space.blocks:
            raise KeyError(f"node {node} is not in the {self.space.kind} forest")
        b = self.space.blocks[node]
        view = self.coefficients[b.offset : b.offset + b.length]
        return view.reshape(b.shape)

    def copy(self) -> "MdFunction":
        return MdFunction(self.space, self.coefficients.copy())

    def to_csv(self, path: str | Path) -> None:
        self.space.to_csv(self.coefficients, path)


def inner_product(a: MdFunction, b: MdFunction) -> float:
    if a.space is not b.space and a.space.kind != b.space.kind:
        raise ValueError("inner product requires functions on the same space")
    if a.space.ndof != b.space.ndof:
        raise ValueError("inner product requires functions on the same space")
    return float(np.sum(a.coefficients * a.space.mass * b.coefficients))


def norm(a: MdFunction) -> float:
    return float(np.sqrt(max(inner_product(a, a), 0.0)))


# ---------------------------------------------------------------------------
# Space builders
# ---------------------------------------------------------------------------


def _is_fracture_dag(mesh: MdMesh, node: int) -> bool:
    geom = mesh.geom
    nd = geom.nodes[node]
    if nd.is_root:
        return nd.dim == geom.ambient_dim - 1
    parent = next(iter(nd.orientation_to_parent))
    pnd = geom.nodes[parent]
    proot = parent if pnd.is_root else pnd.root_id
    return geom.nodes[proot].dim == geom.ambient_dim - 1


def build_space(
    mesh: MdMesh, k: int, p: int, open_sides: frozenset[str] | set[str] = frozenset()
) -> MdSpace:
    """Build the dof layout for one of the four supported (k, p) pairings.

    ``open_sides`` adds boundary flux dofs (exterior pressure zero) on the
    named outer sides of the flux space; the default is no-flow everywhere.
    """
    n = mesh.geom.ambient_dim
    if (k, p) == (n, 1):
        return _build_pressure(mesh)
    if (k, p) == (n - 1, 1):
        return _build_flux(mesh, frozenset(open_sides))
    if (k, p) == (0, n):
        return _build_displacement(mesh)
    if (k, p) == (1, n):
        return _build_strain(mesh)
    raise ValueError(f"unsupported space pairing (k={k}, p={p})")


def build_gradient_space(mesh: MdMesh) -> MdSpace:
    """Unconstrained companion of the strain space holding full gradients and
    jump vectors in global components (internal to the operator assembly)."""
    sp = MdSpace(mesh=mesh, k=1, p=mesh.geom.ambient_dim, kind="gradient",
                 member=member_nodes(mesh, 1))
    mass: list[float] = []
    off = 0
    for j in sp.member:
        nd = mesh.geom.nodes[j]
        if j in mesh.bulk:
            bm = mesh.bulk[j]
            ln = GRAD * len(bm.triangles)
            sp.blocks[j] = Block(j, off, ln, (len(bm.triangles), GRAD))
            mass += [a for a in bm.areas for _ in range(GRAD)]
        elif j in mesh.skins:
            fm = mesh.fractures[mesh.skins[j].fracture]
            ln = 2 * len(fm.cells)
            sp.blocks[j] = Block(j, off, ln, (len(fm.cells), 2))
            mass += [L for L in fm.lengths for _ in range(2)]
        elif nd.is_root and nd.dim == 1:
            fm = mesh.fractures[j]
            ln = 2 * len(fm.cells)
            sp.blocks[j] = Block(j, off, ln, (len(fm.cells), 2))
            mass += [L for L in fm.lengths for _ in range(2)]
        else:  # fracture endpoint
            sp.blocks[j] = Block(j, off, 2, (1, 2))
            mass += [1.0, 1.0]
        off += sp.blocks[j].length
    sp.mass = np.asarray(mass)
    return sp


def _build_pressure(mesh: MdMesh) -> MdSpace:
    geom = mesh.geom
    n = geom.ambient_dim
    sp = MdSpace(mesh=mesh, k=n, p=1, kind="pressure", member=member_nodes(mesh, n))
    mass: list[float] = []
    off = 0
    for i in sp.member:
        nd = geom.nodes[i]
        if nd.dim == n:
            bm = mesh.bulk[i]
            ln = len(bm.triangles)
            sp.blocks[i] = Block(i, off, ln, (ln,))
            mass += list(bm.areas)
        elif nd.dim == 1:
            fm = mesh.fractures[i]
            ln = len(fm.cells)
            sp.blocks[i] = Block(i, off, ln, (ln,))
            mass += list(fm.lengths)
        else:
            sp.blocks[i] = Block(i, off, 1, (1,))
            mass += [1.0]
        off += sp.blocks[i].length
    sp.mass = np.asarray(mass)
    return sp


def _build_flux(mesh: MdMesh, open_sides: frozenset[str]) -> MdSpace:
    geom = mesh.geom
    n = geom.ambient_dim
    sp = MdSpace(mesh=mesh, k=n - 1, p=1, kind="flux", member=member_nodes(mesh, n - 1))
    mass: list[float] = []
    off = 0
    for j in sp.member:
        nd = geom.nodes[j]
        if j in mesh.bulk:
            bm = mesh.bulk[j]
            w = [f.dist / f.length for f in bm.interior_facets]
            drained = [
                bf_id
                for bf_id, bf in enumerate(bm.boundary_facets)
                if bf.kind == "outer" and bf.side in open_sides
            ]
            sp.drained[j] = drained
            w += [bm.boundary_facets[b].dist / bm.boundary_facets[b].length
                  for b in drained]
            sp.blocks[j] = Block(j, off, len(w), (len(w),))
            mass += w
        elif j in mesh.skins:
            sk = mesh.skins[j]
            bm = mesh.bulk[mesh.bulk_of[j]]
            w = [bm.boundary_facets[b].dist / bm.boundary_facets[b].length
                 for b in sk.bulk_facet]
            sp.blocks[j] = Block(j, off, len(w), (len(w),))
            mass += w
        elif nd.is_root and nd.dim == 1:
            fm = mesh.fractures[j]
            w = [
                float(np.linalg.norm(fm.midpoints[c + 1] - fm.midpoints[c]))
                for c in range(len(fm.cells) - 1)
            ]
            sp.blocks[j] = Block(j, off, len(w), (len(w),))
            mass += w
        else:  # fracture endpoint interface
            fm = mesh.fractures[mesh.endpoints[j].fracture]
            sp.blocks[j] = Block(j, off, 1, (1,))
            mass += [0.5 * float(fm.lengths[0 if mesh.endpoints[j].end == 0 else -1])]
        off += sp.blocks[j].length
    sp.mass = np.asarray(mass)
    return sp


def _build_displacement(mesh: MdMesh) -> MdSpace:
    geom = mesh.geom
    sp = MdSpace(mesh=mesh, k=0, p=geom.ambient_dim, kind="displacement",
                 member=member_nodes(mesh, 0))
    mass: list[float] = []
    off = 0
    for j in sp.member:
        if j in mesh.bulk:
            bm = mesh.bulk[j]
            lumped = np.zeros(len(bm.vertices))
            for t, tri in enumerate(bm.triangles):
                lumped[tri] += bm.areas[t] / 3.0
            ln = 2 * len(bm.vertices)
            sp.blocks[j] = Block(j, off, ln, (len(bm.vertices), 2))
            mass += [m for m in lumped for _ in range(2)]
        elif j in mesh.skins:
            fm = mesh.fractures[mesh.skins[j].fracture]
            lumped = np.zeros(len(fm.vertices))
            for c, (a, b) in enumerate(fm.cells):
                lumped[[a, b]] += fm.lengths[c] / 2.0
            ln = 2 * len(fm.vertices)
            sp.blocks[j] = Block(j, off, ln, (len(fm.vertices), 2))
            mass += [m for m in lumped for _ in range(2)]
        else:  # corner node: point measure 1
            sp.blocks[j] = Block(j, off, 2, (1, 2))
            mass += [1.0, 1.0]
        off += sp.blocks[j].length
    sp.mass = np.asarray(mass)
    return sp


def _build_strain(mesh: MdMesh) -> MdSpace:
    geom = mesh.geom
    sp = MdSpace(mesh=mesh, k=1, p=geom.ambient_dim, kind="strain",
                 member=member_nodes(mesh, 1))
    mass: list[float] = []
    check: list[bool] = []
    off = 0
    for j in sp.member:
        nd = geom.nodes[j]
        frdag = _is_fracture_dag(mesh, j)
        if j in mesh.bulk:
            bm = mesh.bulk[j]
            nc = len(bm.triangles)
            sp.blocks[j] = Block(j, off, VOIGT * nc, (nc, VOIGT))
            for a in bm.areas:
                mass += [a, a, 2.0 * a]  # symmetric off-diagonal counts twice
                check += [False] * VOIGT
        elif j in mesh.skins:
            fm = mesh.fractures[mesh.skins[j].fracture]
            nc = len(fm.cells)
            sp.blocks[j] = Block(j, off, nc, (nc, 1))
            mass += list(fm.lengths)
            check += [False] * nc
        elif nd.is_root and nd.dim == 1:
            fm = mesh.fractures[j]
            nc = len(fm.cells)
            sp.blocks[j] = Block(j, off, 2 * nc, (nc, 2))
            for L in fm.lengths:
                mass += [L, L]
                check += [True, True]
        else:  # fracture endpoint: (par, perp) point values
            sp.blocks[j] = Block(j, off, 2, (1, 2))
            mass += [1.0, 1.0]
            check += [frdag, frdag]
        off += sp.blocks[j].length
    sp.mass = np.asarray(mass)
    sp.check_mask = np.asarray(check, dtype=bool)
    return sp


def build_extended_space(mesh: MdMesh) -> MdSpace:
    """Vertexwise vector values on every node of the full forest (the target
    of the extension operator; configurations live here)."""
    geom = mesh.geom
    sp = MdSpace(mesh=mesh, k=-1, p=geom.ambient_dim, kind="extended",
                 member=sorted(geom.nodes))
    mass: list[float] = []
    off = 0
    for j in sp.member:
        nd = geom.nodes[j]
        if j in mesh.bulk:
            nv = len(mesh.bulk[j].vertices)
        elif j in mesh.skins:
            nv = len(mesh.fractures[mesh.skins[j].fracture].vertices)
        elif nd.is_root and nd.dim == 1:
            nv = len(mesh.fractures[j].vertices)
        else:
            nv = 1
        sp.blocks[j] = Block(j, off, 2 * nv, (nv, 2))
        mass += [1.0] * (2 * nv)
        off += 2 * nv
    sp.mass = np.asarray(mass)
    return sp
