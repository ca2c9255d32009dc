"""Finite-strain and volume measures with their linearization checks.

The finite measures are evaluated pointwise from configurations (one
position field per node of the forest).  Bulk and skin cells use the
cellwise deformation gradient of the piecewise-linear position field;
fracture cells use the displacement jump between their two sides, paired
through the closest-point projection *in the deformed state*, so sliding
contact remains local in physical space.

Dimension-generic kernels (``green_lagrange_*``) are exposed separately so
analytic configurations in any ambient dimension can be tested without a
mesh; the mesh-bound evaluators below are the two-dimensional
discretizations built on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import project_to_polyline
from .meshing import MdMesh
from .operators import OperatorSet
from .spaces import MdFunction

__all__ = [
    "Configuration",
    "baseline_configuration",
    "displaced_configuration",
    "rigid_configuration",
    "green_lagrange_bulk",
    "green_lagrange_boundary",
    "green_lagrange_fracture",
    "finite_strain",
    "volume_density",
    "linearized_volume",
    "linearization_consistency",
    "InvertedElementError",
]


class InvertedElementError(RuntimeError):
    """A configuration produced a nonpositive volume."""


# ---------------------------------------------------------------------------
# Pointwise kernels (any ambient dimension)
# ---------------------------------------------------------------------------


def green_lagrange_bulk(F: np.ndarray, Fbase: np.ndarray) -> np.ndarray:
    """(1/2) (F^T F - Fb^T Fb) for a full-dimensional deformation gradient."""
    return 0.5 * (F.T @ F - Fbase.T @ Fbase)


def green_lagrange_boundary(F: np.ndarray, Fbase: np.ndarray) -> np.ndarray:
    """Tangential strain block of a boundary node; the extended rows against
    the normal are identically zero and omitted."""
    return 0.5 * (F.T @ F - Fbase.T @ Fbase)


def green_lagrange_fracture(
    jump_deformed: np.ndarray,
    jump_base: np.ndarray,
    tangents: np.ndarray,
    normal: np.ndarray,
    aperture: float,
) -> np.ndarray:
    """Fracture strain [-Fb^T (jump of the base map) ; (gap change)/aperture].

    ``jump_deformed`` and ``jump_base`` are the side-signed sums of the
    deformed closest points and of the base-map values at those points;
    ``tangents`` are the columns of the base frame and ``normal`` its unit
    normal.  Parallel components measure slip, the perpendicular one the
    opening relative to the aperture scale.
    """
    par = -tangents.T @ jump_base
    perp = (normal @ jump_deformed - normal @ jump_base) / aperture
    return np.concatenate([np.atleast_1d(par), [perp]])


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------


@dataclass
class Configuration:
    """Positions of every node of the forest (piecewise linear per cell).

    ``positions[j]`` matches the vertex layout of node ``j``: bulk mesh
    vertices, fracture polyline vertices (shared by its skins), and single
    points for vertices of the zero-dimensional nodes.
    """

    mesh: MdMesh
    positions: dict[int, np.ndarray]
    is_baseline: bool = False

    def copy(self) -> "Configuration":
        return Configuration(
            self.mesh, {j: p.copy() for j, p in self.positions.items()}, self.is_baseline
        )


def baseline_configuration(mesh: MdMesh) -> Configuration:
    pos: dict[int, np.ndarray] = {}
    for root, bm in mesh.bulk.items():
        pos[root] = bm.vertices.copy()
    for fr, fm in mesh.fractures.items():
        pos[fr] = fm.vertices.copy()
        for j in mesh.geom.skins_of(fr):
            pos[j] = fm.vertices.copy()
    for j, ep in mesh.endpoints.items():
        fm = mesh.fractures[ep.fracture]
        pos[j] = fm.vertices[[0 if ep.end == 0 else -1]].copy()
    for j in mesh.corner_vertex:
        pos[j] = mesh.point_positions[mesh.geom.nodes[j].root_id][None, :].copy()
    for i, p in mesh.point_positions.items():
        pos[i] = p[None, :].copy()
    return Configuration(mesh, pos, is_baseline=True)


def displaced_configuration(mesh: MdMesh, extended: np.ndarray, ops: OperatorSet) -> Configuration:
    """Baseline plus a displacement given in the extended space layout."""
    base = baseline_configuration(mesh)
    xsp = ops.extension.codomain
    for j in base.positions:
        b = xsp.block(j)
        base.positions[j] = base.positions[j] + extended[
            b.offset : b.offset + b.length
        ].reshape(b.shape)
    base.is_baseline = False
    return base


def rigid_configuration(mesh: MdMesh, rotation: np.ndarray, shift: np.ndarray) -> Configuration:
    base = baseline_configuration(mesh)
    for j in base.positions:
        base.positions[j] = base.positions[j] @ rotation.T + shift
    base.is_baseline = False
    return base


def map_configuration(mesh: MdMesh, phi: Callable[[np.ndarray], np.ndarray]) -> Configuration:
    """Sample an analytic map onto every node (vectorized over points)."""
    base = baseline_configuration(mesh)
    for j in base.positions:
        base.positions[j] = np.apply_along_axis(phi, 1, base.positions[j])
    base.is_baseline = False
    return base


# ---------------------------------------------------------------------------
# Finite strain
# ---------------------------------------------------------------------------


def _cell_gradient(verts_ref: np.ndarray, verts_def: np.ndarray) -> np.ndarray:
    """Deformation gradient of the linear map taking a reference triangle to
    its deformed image (2x2)."""
    A = np.column_stack([verts_ref[1] - verts_ref[0], verts_ref[2] - verts_ref[0]])
    B = np.column_stack([verts_def[1] - verts_def[0], verts_def[2] - verts_def[0]])
    return B @ np.linalg.inv(A)


def _project_param(x: np.ndarray, chain: np.ndarray) -> tuple[np.ndarray, int, float]:
    """Closest point on a polyline plus its (segment, local coordinate)."""
    best = (np.inf, chain[0], 0, 0.0)
    for k in range(len(chain) - 1):
        a, b = chain[k], chain[k + 1]
        ab = b - a
        denom = float(ab @ ab)
        s = 0.0 if denom == 0 else float(np.clip((x - a) @ ab / denom, 0.0, 1.0))
        cand = a + s * ab
        d = float(np.linalg.norm(x - cand))
        if d < best[0]:
            best = (d, cand, k, s)
    _, point, k, s = best
    return point, k, s


def _fracture_jumps(
    config: Configuration, base: Configuration, fr: int, points_def: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Side-signed jumps (deformed, base-map) at deformed fracture points.

    The pairing projects each deformed point onto the deformed skin
    polylines; the base-map jump evaluates the baseline positions of the
    paired reference points, which measures accumulated slip.
    """
    mesh = config.mesh
    jump_def = np.zeros((len(points_def), 2))
    jump_base = np.zeros((len(points_def), 2))
    for j in mesh.geom.skins_of(fr):
        eps = float(mesh.skins[j].sign)
        chain_def = config.positions[j]
        chain_base = base.positions[j]
        for r, x in enumerate(points_def):
            pi, k, s = _project_param(x, chain_def)
            ref = (1.0 - s) * chain_base[k] + s * chain_base[k + 1]
            jump_def[r] += eps * pi
            jump_base[r] += eps * ref
    return jump_def, jump_base


def finite_strain(
    config: Configuration, base: Configuration, ops: OperatorSet
) -> MdFunction:
    """Rotation-invariant strain of ``config`` relative to ``base`` sampled
    at cell centroids (bulk, skins) and cell midpoints (fractures)."""
    mesh = config.mesh
    out = ops.strain.zeros()

    for root, bm in mesh.bulk.items():
        block = out.restrict(root)
        ref = base.positions[root]
        cur = config.positions[root]
        for t_id, tri in enumerate(bm.triangles):
            F = _cell_gradient(bm.vertices[tri], cur[tri])
            Fb = _cell_gradient(bm.vertices[tri], ref[tri])
            E = green_lagrange_bulk(F, Fb)
            block[t_id] = (E[0, 0], E[1, 1], E[0, 1])

    for j, sk in mesh.skins.items():
        fm = mesh.fractures[sk.fracture]
        block = out.restrict(j)
        ref = base.positions[j]
        cur = config.positions[j]
        for c, (a, b) in enumerate(fm.cells):
            L = fm.lengths[c]
            F = ((cur[b] - cur[a]) / L)[:, None]
            Fb = ((ref[b] - ref[a]) / L)[:, None]
            block[c, 0] = green_lagrange_boundary(F, Fb)[0, 0]

    for fr, fm in mesh.fractures.items():
        nd = mesh.geom.nodes[fr]
        tang = nd.frame.tangents
        nrm = nd.frame.normal
        cur = config.positions[fr]
        mids = 0.5 * (cur[fm.cells[:, 0]] + cur[fm.cells[:, 1]])
        jd, jb = _fracture_jumps(config, base, fr, mids)
        block = out.restrict(fr)
        for c in range(len(fm.cells)):
            block[c] = green_lagrange_fracture(jd[c], jb[c], tang, nrm, nd.aperture)

    for j, ep in mesh.endpoints.items():
        if not ep.active:
            continue
        nd = mesh.geom.nodes[ep.fracture]
        pt = config.positions[j]
        jd, jb = _fracture_jumps(config, base, ep.fracture, pt)
        out.restrict(j)[0] = green_lagrange_fracture(
            jd[0], jb[0], nd.frame.tangents, nd.frame.normal, nd.aperture
        )

    return out


# ---------------------------------------------------------------------------
# Volume measures
# ---------------------------------------------------------------------------


def volume_density(config: Configuration, ops: OperatorSet) -> MdFunction:
    """Volume per unit reference measure on every subdomain.

    Bulk cells carry det(F).  A fracture cell of aperture ``l`` carries
    ``l * (1 + omega * gap/l) * stretch``; a point subdomain collects the
    openings of the adjacent fracture endpoints weighted the same way.
    Boundary nodes carry no volume, so the result lives on the density
    space.  Raises :class:`InvertedElementError` on nonpositive volume.
    """
    mesh = config.mesh
    geom = mesh.geom
    n = geom.ambient_dim
    out = ops.pressure.zeros()

    for root, bm in mesh.bulk.items():
        block = out.restrict(root)
        cur = config.positions[root]
        for t_id, tri in enumerate(bm.triangles):
            J = float(np.linalg.det(_cell_gradient(bm.vertices[tri], cur[tri])))
            if J <= 0.0:
                raise InvertedElementError(f"bulk cell {t_id} inverted")
            block[t_id] = J

    gap_perp: dict[tuple[int, int], float] = {}
    base = baseline_configuration(mesh)
    for fr, fm in mesh.fractures.items():
        nd = geom.nodes[fr]
        cur = config.positions[fr]
        mids = 0.5 * (cur[fm.cells[:, 0]] + cur[fm.cells[:, 1]])
        jd, _ = _fracture_jumps(config, base, fr, mids)
        block = out.restrict(fr)
        omega = geom.weight(fr, fr)
        for c in range(len(fm.cells)):
            stretch = float(
                np.linalg.norm(cur[fm.cells[c, 1]] - cur[fm.cells[c, 0]]) / fm.lengths[c]
            )
            gp = float(nd.frame.normal @ jd[c])
            gap_perp[(fr, c)] = gp
            J = nd.aperture * (1.0 + omega * gp / nd.aperture) * stretch
            if J <= 0.0:
                raise InvertedElementError(f"fracture cell ({fr},{c}) inverted")
            block[c] = J

    for i in geom.dim_index.get(0, []):
        total = 1.0
        ell_i = geom.nodes[i].aperture
        for j in geom.coinciding(i):
            if j not in mesh.endpoints:
                continue
            ep = mesh.endpoints[j]
            fm = mesh.fractures[ep.fracture]
            ell_j = geom.nodes[ep.fracture].aperture
            if ep.active:
                pt = config.positions[j]
                jd, _ = _fracture_jumps(config, base, ep.fracture, pt)
                gp = float(geom.nodes[ep.fracture].frame.normal @ jd[0])
            else:
                gp = 0.0
            total += geom.weight(i, j) * gp / ell_j
        if total <= 0.0:
            raise InvertedElementError(f"point subdomain {i} inverted")
        out.restrict(i)[0] = ell_i ** (n - 0) * total

    return out


def linearized_volume(u: np.ndarray, ops: OperatorSet) -> MdFunction:
    """First-order volume change: baseline volume times the trace of the
    linearized strain of ``u`` (exact discrete identity)."""
    base = baseline_configuration(ops.mesh)
    J0 = volume_density(base, ops)
    e = ops.symgrad.matrix @ u
    tr = ops.trace.matrix @ e
    return MdFunction(ops.pressure, J0.coefficients * tr)


# ---------------------------------------------------------------------------
# Linearization consistency
# ---------------------------------------------------------------------------


def _weighted_norm(space, coeffs: np.ndarray) -> float:
    return float(np.sqrt(np.sum(coeffs * space.mass * coeffs)))


def linearization_consistency(
    ops: OperatorSet,
    u: np.ndarray,
    eps_list: Sequence[float],
    family: Callable[[float], Configuration] | None = None,
) -> dict:
    """Remainders of the strain and volume linearizations along a family of
    configurations (default: baseline plus eps times the extended field).

    Returns the sampled remainders ``r`` (strain) and ``s`` (volume) per
    epsilon together with their least-squares log-log slopes.
    """
    mesh = ops.mesh
    base = baseline_configuration(mesh)
    xi = ops.extension.matrix @ u
    if family is None:
        family = lambda eps: displaced_configuration(mesh, eps * xi, ops)

    e_lin = ops.symgrad.matrix @ u
    j_lin = linearized_volume(u, ops).coefficients
    J0 = volume_density(base, ops).coefficients

    rs, ss = [], []
    for eps in eps_list:
        cfg = family(float(eps))
        E = finite_strain(cfg, base, ops).coefficients
        J = volume_density(cfg, ops).coefficients
        rs.append(_weighted_norm(ops.strain, E - eps * e_lin))
        ss.append(_weighted_norm(ops.pressure, J - J0 - eps * j_lin))

    def slope(vals: list[float]) -> float:
        v = np.asarray(vals)
        e = np.asarray(eps_list, dtype=float)
        keep = v > 1e-14
        if keep.sum() < 2:
            return float("nan")
        A = np.vstack([np.log(e[keep]), np.ones(keep.sum())]).T
        coef, *_ = np.linalg.lstsq(A, np.log(v[keep]), rcond=None)
        return float(coef[0])

    return {
        "eps": [float(e) for e in eps_list],
        "strain_remainder": rs,
        "volume_remainder": ss,
        "strain_slope": slope(rs),
        "volume_slope": slope(ss),
    }


def consistency_report_csv(report: dict, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "strain_remainder", "volume_remainder"])
        for e, r, s in zip(
            report["eps"], report["strain_remainder"], report["volume_remainder"]
        ):
            w.writerow([e, r, s])
        w.writerow(
            ["slopes", report["strain_slope"], report["volume_slope"]]
        )
