"""Sparse block operators between mixed-dimensional spaces.

All operators are assembled as sparse matrices between the dof layouts of
:mod:`mdporo.spaces`.  Adjoints are never discretized independently: the
co-operators are defined as weighted negative transposes of the primal
operators with boundary conditions, so every integration-by-parts identity
holds to machine precision by construction,

    M_cod @ co_op = -(primal op).T @ M_dom.

Orientation conventions:

* Interface flux dofs are positive when fluid leaves the higher-dimensional
  neighbor and enters the coinciding lower-dimensional subdomain.
* Displacement jumps across a fracture are the signed sum of the two skin
  traces with the side signs declared in the geometry file (positive side
  minus negative side for the shipped files), so a positive perpendicular
  component means opening.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sps
from scipy.io import mmwrite

from .meshing import MdMesh
from .spaces import MdSpace, build_space, build_gradient_space, build_extended_space

__all__ = [
    "MdOperator",
    "BoundarySpec",
    "assemble_jump",
    "assemble_divergence",
    "assemble_gradient",
    "assemble_co_ops",
    "assemble_symmetric_gradient",
    "assemble_co_symmetric_gradient",
    "assemble_matrix_trace",
    "assemble_extension",
    "constrained_displacement_dofs",
    "prolongation",
    "OperatorSet",
    "assemble_all",
]


@dataclass
class MdOperator:
    """A sparse operator with its two spaces and optional adjoint provenance."""

    domain: MdSpace
    codomain: MdSpace
    matrix: sps.csr_matrix
    adjoint_of: Optional["MdOperator"] = None

    def __post_init__(self) -> None:
        if self.matrix.shape != (self.codomain.ndof, self.domain.ndof):
            raise ValueError("matrix dimensions do not match the space layouts")

    def __matmul__(self, coeffs: np.ndarray) -> np.ndarray:
        return self.matrix @ coeffs

    def to_matrix_market(self, path: str | Path) -> None:
        mmwrite(str(path), sps.coo_matrix(self.matrix))

    def adjoint_residual(self) -> float:
        """Max-norm of M_cod @ A + B.T @ M_dom for A the adjoint of B."""
        if self.adjoint_of is None:
            raise ValueError("operator was not constructed as an adjoint")
        b = self.adjoint_of
        r = sps.diags(self.codomain.mass) @ self.matrix + b.matrix.T @ sps.diags(
            self.domain.mass
        )
        return float(np.abs(r).max()) if r.nnz else 0.0


def _weighted_adjoint(op: MdOperator, domain: MdSpace, codomain: MdSpace) -> MdOperator:
    mat = -sps.diags(1.0 / codomain.mass) @ op.matrix.T @ sps.diags(op.codomain.mass)
    return MdOperator(domain=domain, codomain=codomain, matrix=mat.tocsr(),
                      adjoint_of=op)


@dataclass
class BoundarySpec:
    """Boundary conditions on the outer boundary, by named side.

    Mechanics: every outer vertex is clamped unless its sides say otherwise
    ("free" releases both components, "roller_x"/"roller_y" fix only the
    named component).  Flow: sides listed in ``drained`` carry boundary flux
    dofs against zero exterior pressure; all other sides are no-flow.
    """

    mechanics: dict[str, str] = field(default_factory=dict)  # side -> kind
    drained: frozenset[str] = frozenset()

    def open_sides(self) -> frozenset[str]:
        return frozenset(self.drained)


def constrained_displacement_dofs(
    mesh: MdMesh, disp: MdSpace, bc: BoundarySpec | None = None
) -> np.ndarray:
    """Displacement dofs fixed to zero by the boundary conditions."""
    bc = bc or BoundarySpec()
    fixed: set[int] = set()
    for root, bm in mesh.bulk.items():
        for v, sides in bm.outer_vertex_side.items():
            kinds = {bc.mechanics.get(s, "clamp") for s in sides}
            comps: set[int] = set()
            for kind in kinds:
                if kind == "clamp":
                    comps |= {0, 1}
                elif kind == "roller_x":
                    comps.add(0)
                elif kind == "roller_y":
                    comps.add(1)
                elif kind != "free":
                    raise ValueError(f"unknown mechanical boundary kind {kind!r}")
            for c in comps:
                fixed.add(disp.vert_dof(root, v, c))
    return np.asarray(sorted(fixed), dtype=int)


def prolongation(
    mesh: MdMesh, disp: MdSpace, bc: BoundarySpec | None = None
) -> tuple[sps.csr_matrix, np.ndarray]:
    """Map from free bulk vertex dofs to the full displacement space.

    Skin and corner blocks are filled with the trace of their bulk copy, so
    the range is the subspace of fields continuous within each DAG.  Returns
    ``(P, free)`` with ``free`` the bulk dofs kept as unknowns.
    """
    fixed = set(constrained_displacement_dofs(mesh, disp, bc).tolist())
    free: list[int] = []
    col_of: dict[int, int] = {}
    for root in mesh.bulk:
        b = disp.block(root)
        for dof in range(b.offset, b.offset + b.length):
            if dof not in fixed:
                col_of[dof] = len(free)
                free.append(dof)
    rows, cols, vals = [], [], []
    for dof, col in col_of.items():
        rows.append(dof)
        cols.append(col)
        vals.append(1.0)
    for j, sk in mesh.skins.items():
        root = mesh.bulk_of[j]
        for k, v in enumerate(sk.bulk_vertex):
            for c in range(2):
                src = disp.vert_dof(root, int(v), c)
                if src in col_of:
                    rows.append(disp.vert_dof(j, k, c))
                    cols.append(col_of[src])
                    vals.append(1.0)
    for j, v in mesh.corner_vertex.items():
        root = mesh.bulk_of[j]
        for c in range(2):
            src = disp.vert_dof(root, int(v), c)
            if src in col_of:
                rows.append(disp.point_dof(j, c))
                cols.append(col_of[src])
                vals.append(1.0)
    P = sps.csr_matrix(
        (vals, (rows, cols)), shape=(disp.ndof, len(free))
    )
    return P, np.asarray(free, dtype=int)


# ---------------------------------------------------------------------------
# Jump operators
# ---------------------------------------------------------------------------


def assemble_jump(mesh: MdMesh, domain: MdSpace, codomain: MdSpace) -> MdOperator:
    """The signed-sum jump onto codimension-one subdomains.

    For displacements (k = 0) the output lives on fracture cells and
    endpoints as global vectors: (-1)^(n-0) * sum of side-signed skin traces
    at the paired cell midpoint.  For fluxes (k = n-1) the output is a
    density on the lower-dimensional subdomains: (-1)^(n-k) * side-signed
    interface fluxes per unit measure.
    """
    n = mesh.geom.ambient_dim
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    if domain.kind == "displacement":
        sign = (-1.0) ** n
        for fr_id, fm in mesh.fractures.items():
            for j in mesh.geom.skins_of(fr_id):
                sk = mesh.skins[j]
                eps = float(sk.sign)
                for c in range(len(fm.cells)):
                    a, b = fm.cells[c]
                    for comp in range(2):
                        r = codomain.strain_dof(fr_id, c, comp)
                        for v in (a, b):
                            rows.append(r)
                            cols.append(domain.vert_dof(j, int(v), comp))
                            vals.append(sign * eps * 0.5)
        for j, ep in mesh.endpoints.items():
            if not ep.active:
                continue
            fm = mesh.fractures[ep.fracture]
            k = 0 if ep.end == 0 else len(fm.vertices) - 1
            for sj in mesh.geom.skins_of(ep.fracture):
                eps = float(mesh.skins[sj].sign)
                for comp in range(2):
                    rows.append(codomain.strain_dof(j, 0, comp))
                    cols.append(domain.vert_dof(sj, k, comp))
                    vals.append(sign * eps)
    elif domain.kind == "flux":
        sign = (-1.0) ** (n - (n - 1))
        for fr_id, fm in mesh.fractures.items():
            for j in mesh.geom.skins_of(fr_id):
                sk = mesh.skins[j]
                for c in range(len(fm.cells)):
                    rows.append(codomain.cell_dof(fr_id, c))
                    cols.append(domain.skin_dof(j, c))
                    vals.append(sign * float(sk.sign) / fm.lengths[c])
        for j, ep in mesh.endpoints.items():
            eps = float(
                mesh.geom.nodes[j].orientation_to_parent[
                    next(iter(mesh.geom.nodes[j].orientation_to_parent))
                ]
            )
            rows.append(codomain.cell_dof(ep.point_root, 0))
            cols.append(domain.point_dof(j))
            vals.append(sign * eps)  # point measure is 1
    else:
        raise ValueError("jump domains are displacement or flux spaces")

    mat = sps.csr_matrix(
        (vals, (rows, cols)), shape=(codomain.ndof, domain.ndof)
    )
    return MdOperator(domain=domain, codomain=codomain, matrix=mat)


# ---------------------------------------------------------------------------
# Divergence (with no-flow boundary) and its weighted adjoint
# ---------------------------------------------------------------------------


def assemble_divergence(mesh: MdMesh, flux: MdSpace, pressure: MdSpace) -> MdOperator:
    """Net outflow per unit measure on every subdomain cell.

    Interface fluxes leave their bulk (or fracture) cell and enter the
    coinciding lower-dimensional cell, so the columns telescope: with no
    drained sides the constant density is a left null vector exactly.
    """
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    for root, bm in mesh.bulk.items():
        for f_id, f in enumerate(bm.interior_facets):
            dof = flux.facet_dof(root, f_id)
            cl, cr = f.cells
            rows += [pressure.cell_dof(root, cl), pressure.cell_dof(root, cr)]
            cols += [dof, dof]
            vals += [1.0 / bm.areas[cl], -1.0 / bm.areas[cr]]
        for which, bf_id in enumerate(flux.drained.get(root, [])):
            bf = bm.boundary_facets[bf_id]
            dof = flux.drained_dof(root, which)
            rows.append(pressure.cell_dof(root, bf.cell))
            cols.append(dof)
            vals.append(1.0 / bm.areas[bf.cell])
        for bf in bm.boundary_facets:
            if bf.kind != "skin" or bf.skin_node < 0:
                continue
            dof = flux.skin_dof(bf.skin_node, bf.skin_cell)
            rows.append(pressure.cell_dof(root, bf.cell))
            cols.append(dof)
            vals.append(1.0 / bm.areas[bf.cell])

    for fr_id, fm in mesh.fractures.items():
        nc = len(fm.cells)
        for f in range(nc - 1):
            dof = flux.facet_dof(fr_id, f)
            rows += [pressure.cell_dof(fr_id, f), pressure.cell_dof(fr_id, f + 1)]
            cols += [dof, dof]
            vals += [1.0 / fm.lengths[f], -1.0 / fm.lengths[f + 1]]
        for j in mesh.geom.skins_of(fr_id):
            for c in range(nc):
                rows.append(pressure.cell_dof(fr_id, c))
                cols.append(flux.skin_dof(j, c))
                vals.append(-1.0 / fm.lengths[c])

    for j, ep in mesh.endpoints.items():
        fm = mesh.fractures[ep.fracture]
        cell = 0 if ep.end == 0 else len(fm.cells) - 1
        dof = flux.point_dof(j)
        rows += [pressure.cell_dof(ep.fracture, cell), pressure.cell_dof(ep.point_root, 0)]
        cols += [dof, dof]
        vals += [1.0 / fm.lengths[cell], -1.0]

    mat = sps.csr_matrix((vals, (rows, cols)), shape=(pressure.ndof, flux.ndof))
    return MdOperator(domain=flux, codomain=pressure, matrix=mat)


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------


def _p1_gradients(p: np.ndarray) -> np.ndarray:
    """Gradients of the three P1 hat functions on a triangle, shape (3, 2)."""
    det = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[2, 0] - p[0, 0]) * (
        p[1, 1] - p[0, 1]
    )
    g = np.empty((3, 2))
    for i in range(3):
        a, b = p[(i + 1) % 3], p[(i + 2) % 3]
        g[i] = np.array([a[1] - b[1], b[0] - a[0]]) / det
    return g


def assemble_gradient(
    mesh: MdMesh,
    disp: MdSpace,
    codomain: MdSpace | None = None,
    clamped: np.ndarray | None = None,
) -> MdOperator:
    """The full vector gradient: cellwise P1 gradients on bulk DAG nodes plus
    the displacement jump on fracture cells.  ``clamped`` zeroes the listed
    displacement columns (vanishing-trace domain)."""
    codomain = codomain or build_gradient_space(mesh)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    for root, bm in mesh.bulk.items():
        for t_id, tri in enumerate(bm.triangles):
            g = _p1_gradients(bm.vertices[tri])
            for loc, v in enumerate(tri):
                for comp in range(2):  # value component
                    for d in range(2):  # derivative direction
                        rows.append(codomain.strain_dof(root, t_id, 2 * comp + d))
                        cols.append(disp.vert_dof(root, int(v), comp))
                        vals.append(g[loc, d])

    for j, sk in mesh.skins.items():
        fm = mesh.fractures[sk.fracture]
        for c, (a, b) in enumerate(fm.cells):
            L = fm.lengths[c]
            for comp in range(2):
                r = codomain.strain_dof(j, c, comp)
                rows += [r, r]
                cols += [disp.vert_dof(j, int(b), comp), disp.vert_dof(j, int(a), comp)]
                vals += [1.0 / L, -1.0 / L]

    jump = assemble_jump(mesh, disp, codomain)
    mat = sps.csr_matrix((vals, (rows, cols)), shape=(codomain.ndof, disp.ndof))
    mat = (mat + jump.matrix).tocsr()
    if clamped is not None and clamped.size:
        mat = mat.tolil()
        mat[:, clamped] = 0.0
        mat = mat.tocsr()
    return MdOperator(domain=disp, codomain=codomain, matrix=mat)


def assemble_symmetric_gradient(
    mesh: MdMesh,
    disp: MdSpace,
    strain: MdSpace,
    clamped: np.ndarray | None = None,
) -> MdOperator:
    """The symmetric gradient into the symmetry-constrained strain space.

    Bulk rows are the cellwise symmetric P1 gradient, skin rows the
    tangential stretch of the skin trace (normal rows are identically zero
    and carry no dofs), fracture rows the frame-decomposed displacement jump
    with the perpendicular component scaled by the inverse aperture.
    """
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    for root, bm in mesh.bulk.items():
        for t_id, tri in enumerate(bm.triangles):
            g = _p1_gradients(bm.vertices[tri])
            for loc, v in enumerate(tri):
                dx, dy = g[loc]
                ent = [
                    (0, 0, dx),  # e_xx from u_x
                    (1, 1, dy),  # e_yy from u_y
                    (2, 0, 0.5 * dy),
                    (2, 1, 0.5 * dx),
                ]
                for comp_row, comp_u, val in ent:
                    rows.append(strain.strain_dof(root, t_id, comp_row))
                    cols.append(disp.vert_dof(root, int(v), comp_u))
                    vals.append(val)

    for j, sk in mesh.skins.items():
        fm = mesh.fractures[sk.fracture]
        t = fm.tangent
        for c, (a, b) in enumerate(fm.cells):
            L = fm.lengths[c]
            r = strain.strain_dof(j, c, 0)
            for comp in range(2):
                rows += [r, r]
                cols += [disp.vert_dof(j, int(b), comp), disp.vert_dof(j, int(a), comp)]
                vals += [t[comp] / L, -t[comp] / L]

    for fr_id, fm in mesh.fractures.items():
        ell = mesh.geom.nodes[fr_id].aperture
        t, nrm = fm.tangent, fm.normal
        for j in mesh.geom.skins_of(fr_id):
            eps = float(mesh.skins[j].sign)
            for c in range(len(fm.cells)):
                a, b = fm.cells[c]
                for v in (a, b):
                    for comp in range(2):
                        col = disp.vert_dof(j, int(v), comp)
                        rows.append(strain.strain_dof(fr_id, c, 0))
                        cols.append(col)
                        vals.append(0.5 * eps * t[comp])
                        rows.append(strain.strain_dof(fr_id, c, 1))
                        cols.append(col)
                        vals.append(0.5 * eps * nrm[comp] / ell)

    for j, ep in mesh.endpoints.items():
        if not ep.active:
            continue
        fm = mesh.fractures[ep.fracture]
        ell = mesh.geom.nodes[ep.fracture].aperture
        t, nrm = fm.tangent, fm.normal
        k = 0 if ep.end == 0 else len(fm.vertices) - 1
        for sj in mesh.geom.skins_of(ep.fracture):
            eps = float(mesh.skins[sj].sign)
            for comp in range(2):
                col = disp.vert_dof(sj, k, comp)
                rows.append(strain.strain_dof(j, 0, 0))
                cols.append(col)
                vals.append(eps * t[comp])
                rows.append(strain.strain_dof(j, 0, 1))
                cols.append(col)
                vals.append(eps * nrm[comp] / ell)

    mat = sps.csr_matrix((vals, (rows, cols)), shape=(strain.ndof, disp.ndof))
    if clamped is not None and clamped.size:
        mat = mat.tolil()
        mat[:, clamped] = 0.0
        mat = mat.tocsr()
    return MdOperator(domain=disp, codomain=strain, matrix=mat)


# ---------------------------------------------------------------------------
# Weighted adjoints
# ---------------------------------------------------------------------------


def assemble_co_ops(
    gradient_bc: MdOperator, divergence_bc: MdOperator
) -> tuple[MdOperator, MdOperator]:
    """Co-gradient (strains to forces) and co-divergence (pressures to
    pressure differences), as exact weighted adjoints."""
    co_gradient = _weighted_adjoint(
        gradient_bc, gradient_bc.codomain, gradient_bc.domain
    )
    co_divergence = _weighted_adjoint(
        divergence_bc, divergence_bc.codomain, divergence_bc.domain
    )
    return co_gradient, co_divergence


def assemble_co_symmetric_gradient(symgrad_bc: MdOperator) -> MdOperator:
    return _weighted_adjoint(symgrad_bc, symgrad_bc.codomain, symgrad_bc.domain)


# ---------------------------------------------------------------------------
# Matrix trace / identity pair
# ---------------------------------------------------------------------------


def assemble_matrix_trace(
    mesh: MdMesh, strain: MdSpace, pressure: MdSpace
) -> tuple[MdOperator, MdOperator]:
    """Volumetric-change trace (strains to densities) and its weighted
    adjoint mapping pressures into the stress space.

    Bulk rows take the plain matrix trace; fracture rows add the weighted
    perpendicular opening to the mean tangential stretch of the two paired
    skins; point rows collect the weighted perpendicular components of the
    adjacent fracture endpoints; skin rows are zero.
    """
    geom = mesh.geom
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    for root, bm in mesh.bulk.items():
        for c in range(len(bm.triangles)):
            r = pressure.cell_dof(root, c)
            rows += [r, r]
            cols += [strain.strain_dof(root, c, 0), strain.strain_dof(root, c, 1)]
            vals += [1.0, 1.0]

    for fr_id, fm in mesh.fractures.items():
        skins = geom.skins_of(fr_id)
        omega = geom.weight(fr_id, fr_id)
        for c in range(len(fm.cells)):
            r = pressure.cell_dof(fr_id, c)
            rows.append(r)
            cols.append(strain.strain_dof(fr_id, c, 1))
            vals.append(omega)
            for j in skins:
                rows.append(r)
                cols.append(strain.strain_dof(j, c, 0))
                vals.append(1.0 / len(skins))

    for j, ep in mesh.endpoints.items():
        r = pressure.cell_dof(ep.point_root, 0)
        rows.append(r)
        cols.append(strain.strain_dof(j, 0, 1))
        vals.append(geom.weight(ep.point_root, j))

    mat = sps.csr_matrix((vals, (rows, cols)), shape=(pressure.ndof, strain.ndof))
    trace = MdOperator(domain=strain, codomain=pressure, matrix=mat)
    ident_mat = (
        sps.diags(1.0 / strain.mass) @ mat.T @ sps.diags(pressure.mass)
    ).tocsr()
    identity = MdOperator(domain=pressure, codomain=strain, matrix=ident_mat)
    return trace, identity


# ---------------------------------------------------------------------------
# Extension
# ---------------------------------------------------------------------------


def assemble_extension(mesh: MdMesh, disp: MdSpace) -> MdOperator:
    """Right inverse of the restriction to the displacement forest: identity
    on bulk DAG blocks, the mean of the neighboring traces on fractures and
    points."""
    geom = mesh.geom
    codomain = build_extended_space(mesh)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    for j in disp.member:
        b = disp.block(j)
        cb = codomain.block(j)
        for loc in range(b.length):
            rows.append(cb.offset + loc)
            cols.append(b.offset + loc)
            vals.append(1.0)

    for fr_id, fm in mesh.fractures.items():
        skins = geom.skins_of(fr_id)
        w = 1.0 / len(skins)
        for k in range(len(fm.vertices)):
            for comp in range(2):
                r = codomain.vert_dof(fr_id, k, comp)
                for j in skins:
                    rows.append(r)
                    cols.append(disp.vert_dof(j, k, comp))
                    vals.append(w)

    for j, ep in mesh.endpoints.items():
        fm = mesh.fractures[ep.fracture]
        k = 0 if ep.end == 0 else len(fm.vertices) - 1
        skins = geom.skins_of(ep.fracture)
        w = 1.0 / len(skins)
        for comp in range(2):
            r = codomain.point_dof(j, comp)
            for sj in skins:
                rows.append(r)
                cols.append(disp.vert_dof(sj, k, comp))
                vals.append(w)

    for i in geom.dim_index.get(0, []):
        corners = [j for j in geom.coinciding(i) if j in mesh.corner_vertex]
        if not corners:
            continue
        w = 1.0 / len(corners)
        for comp in range(2):
            r = codomain.point_dof(i, comp)
            for j in corners:
                rows.append(r)
                cols.append(disp.point_dof(j, comp))
                vals.append(w)

    mat = sps.csr_matrix((vals, (rows, cols)), shape=(codomain.ndof, disp.ndof))
    return MdOperator(domain=disp, codomain=codomain, matrix=mat)


# ---------------------------------------------------------------------------
# Bundle
# ---------------------------------------------------------------------------


@dataclass
class OperatorSet:
    """Every operator the solver and the verification suites need."""

    mesh: MdMesh
    bc: BoundarySpec
    pressure: MdSpace
    flux: MdSpace
    displacement: MdSpace
    strain: MdSpace
    divergence: MdOperator  # no-flow domain, so already the BC version
    co_divergence: MdOperator
    gradient: MdOperator
    gradient_bc: MdOperator
    co_gradient: MdOperator
    symgrad: MdOperator
    symgrad_bc: MdOperator
    co_symgrad: MdOperator
    trace: MdOperator
    identity: MdOperator
    extension: MdOperator
    jump0: MdOperator
    jump_flux: MdOperator
    clamped: np.ndarray
    P: sps.csr_matrix
    free: np.ndarray


def assemble_all(mesh: MdMesh, bc: BoundarySpec | None = None) -> OperatorSet:
    bc = bc or BoundarySpec()
    pressure = build_space(mesh, mesh.geom.ambient_dim, 1)
    flux = build_space(mesh, mesh.geom.ambient_dim - 1, 1, open_sides=bc.open_sides())
    displacement = build_space(mesh, 0, mesh.geom.ambient_dim)
    strain = build_space(mesh, 1, mesh.geom.ambient_dim)

    clamped = constrained_displacement_dofs(mesh, displacement, bc)
    P, free = prolongation(mesh, displacement, bc)

    divergence = assemble_divergence(mesh, flux, pressure)
    gradient = assemble_gradient(mesh, displacement)
    gradient_bc = assemble_gradient(mesh, displacement, gradient.codomain, clamped)
    co_gradient, co_divergence = assemble_co_ops(gradient_bc, divergence)
    symgrad = assemble_symmetric_gradient(mesh, displacement, strain)
    symgrad_bc = assemble_symmetric_gradient(mesh, displacement, strain, clamped)
    co_symgrad = assemble_co_symmetric_gradient(symgrad_bc)
    trace, identity = assemble_matrix_trace(mesh, strain, pressure)
    extension = assemble_extension(mesh, displacement)
    jump0 = assemble_jump(mesh, displacement, gradient.codomain)
    jump_flux = assemble_jump(mesh, flux, pressure)

    return OperatorSet(
        mesh=mesh,
        bc=bc,
        pressure=pressure,
        flux=flux,
        displacement=displacement,
        strain=strain,
        divergence=divergence,
        co_divergence=co_divergence,
        gradient=gradient,
        gradient_bc=gradient_bc,
        co_gradient=co_gradient,
        symgrad=symgrad,
        symgrad_bc=symgrad_bc,
        co_symgrad=co_symgrad,
        trace=trace,
        identity=identity,
        extension=extension,
        jump0=jump0,
        jump_flux=jump_flux,
        clamped=clamped,
        P=P,
        free=free,
    )
