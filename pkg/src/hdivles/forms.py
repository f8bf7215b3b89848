"""Assembly of the discrete operators and mesh-dependent norms.

Conventions.  The viscosity is folded into the diffusion matrix, so the
semidiscrete system reads  M du/dt + A u + C(b) u + B p = rhs,  B^T u = 0,
with A = nu * a_h and a_h the interior-penalty form: broken-gradient volume
term, penalty sigma/h_E on tangential jumps over all faces, and the two
symmetric consistency terms coupling the average normal derivative to the
tangential jump.  Boundary (wall) faces use the one-sided trace as both jump
and average, which imposes tangential no-slip weakly; faces across periodic
seams are ordinary interior faces.

The convection matrix C(b) realizes the upwind form for an exactly
divergence-free advecting field b: volume term ((b . grad) u, v) per cell,
minus the facet flux (b . mu)([u], <v>) plus the penalty-type upwind term
(|b . mu| [u], [v]) / 2 over interior faces.  Wall faces do not contribute
(b . n = 0 holds strongly).  Testing C(b) with v = u reproduces the upwind
jump seminorm exactly because all quadrature is exact for the trilinear
integrands (per-axis degree 3k+2 <= the space's rule).

Assembly batches cells and faces through einsum contractions; the per-face
work is chunked to bound peak memory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .fespace import PressureSpace, VelocitySpace, local_coefficients
from .mesh import INTERIOR, WALL

__all__ = [
    "sigma_default", "assemble_mass", "assemble_sip", "assemble_div",
    "assemble_load", "assemble_upwind_convection", "upwind_seminorm_sq",
    "compute_norms", "NormReport", "Operators", "assemble_operators",
]

_FACE_CHUNK_ENTRIES = 4_000_000


def sigma_default(k: int) -> float:
    """Default interior-penalty parameter, the standard order-squared scaling."""
    return 4.0 * (k + 1) ** 2


# ---------------------------------------------------------------------------
# cell/face bookkeeping shared by all assemblers
# ---------------------------------------------------------------------------

def _cell_geometry(vel: VelocitySpace):
    h = vel.mesh.cell_h
    detJ = np.prod(h, axis=1)
    s = h / detJ[:, None]
    return h, detJ, s


def _face_groups(vel: VelocitySpace):
    """Per-axis arrays of interior and wall faces (cached on the space)."""
    cache = getattr(vel, "_face_groups_cache", None)
    if cache is not None:
        return cache
    mesh = vel.mesh
    h = mesh.cell_h
    groups = []
    for axis in range(mesh.dim):
        interior = [f for f in mesh.faces if f.axis == axis and f.kind == INTERIOR]
        wall = [f for f in mesh.faces if f.axis == axis and f.kind == WALL]
        # penalty length: the smaller wall-normal extent of the two cells;
        # on stretched cells the face diameter (max edge) would weaken the
        # penalty by the aspect ratio
        h_pen_int = np.array([min(h[f.left_cell][axis], h[f.right_cell][axis])
                              for f in interior])
        h_pen_wall = np.array([h[f.left_cell][axis] for f in wall])
        g = {
            "interior": dict(
                fid=np.array([f.id for f in interior], dtype=np.int64),
                left=np.array([f.left_cell for f in interior], dtype=np.int64),
                right=np.array([f.right_cell for f in interior], dtype=np.int64),
                area=np.array([f.area for f in interior]),
                h_e=np.array([f.diameter for f in interior]),
                h_pen=h_pen_int,
            ),
            "wall": dict(
                fid=np.array([f.id for f in wall], dtype=np.int64),
                cell=np.array([f.left_cell for f in wall], dtype=np.int64),
                side=np.array([f.local_left for f in wall], dtype=np.int64),
                orient=np.array([f.orientation for f in wall], dtype=float),
                area=np.array([f.area for f in wall]),
                h_e=np.array([f.diameter for f in wall]),
                h_pen=h_pen_wall,
            ),
        }
        groups.append(g)
    vel._face_groups_cache = groups
    return groups


def _scatter_cell_blocks(vel, blocks, other=None):
    """Accumulate per-cell dense blocks into a global sparse matrix."""
    rows_map = vel.l2g
    cols_map = vel.l2g if other is None else other
    n_rows = vel.n_dofs
    n_cols = vel.n_dofs if other is None else cols_map.max() + 1
    nc, ni, nj = blocks.shape
    rows = np.repeat(rows_map[:, :, None], nj, axis=2)
    cols = np.repeat(cols_map[:, None, :], ni, axis=1)
    mask = (rows >= 0) & (cols >= 0)
    mat = sp.coo_matrix(
        (blocks[mask], (rows[mask], cols[mask])), shape=(n_rows, n_cols))
    return mat.tocsr()


def _chunks(n, width):
    i = 0
    while i < n:
        yield slice(i, min(i + width, n))
        i = min(i + width, n)


# ---------------------------------------------------------------------------
# mass, divergence, load
# ---------------------------------------------------------------------------

def assemble_mass(vel: VelocitySpace) -> sp.csr_matrix:
    """Velocity mass matrix: (M u) . v = integral of u_h . v_h."""
    _, detJ, s = _cell_geometry(vel)
    wq = vel.volume_rule.weights
    VW = vel.V * wq[None, :, None]
    SC = detJ[:, None] * s ** 2
    blocks = np.einsum("iqc,jqc,Kc->Kij", VW, vel.V, SC, optimize=True)
    return _scatter_cell_blocks(vel, blocks)


def assemble_div(vel: VelocitySpace, prs: PressureSpace) -> sp.csr_matrix:
    """Pressure-velocity coupling B with (B p)_i = -(p, div phi_i).

    The reference-level block is cell-independent: the 1/detJ of the Piola
    divergence cancels the volume element.
    """
    if prs.k != vel.k:
        raise ValueError("pressure order must match the velocity order")
    wq = vel.volume_rule.weights
    block = -(vel.Div * wq[None, :]) @ prs.P.T  # (n_local_u, n_local_p)
    n_cells = vel.mesh.n_cells
    rows_map = vel.l2g
    cols_map = np.arange(n_cells)[:, None] * prs.n_local + np.arange(prs.n_local)[None, :]
    blocks = np.broadcast_to(block, (n_cells,) + block.shape)
    rows = np.repeat(rows_map[:, :, None], prs.n_local, axis=2)
    cols = np.repeat(cols_map[:, None, :], vel.n_local, axis=1)
    mask = rows >= 0
    mat = sp.coo_matrix((blocks[mask], (rows[mask], cols[mask])),
                        shape=(vel.n_dofs, prs.n_dofs))
    return mat.tocsr()


def assemble_load(vel: VelocitySpace, f, t: float = 0.0) -> np.ndarray:
    """Load vector rhs_i = integral of f(t, x) . phi_i.

    Uses the fine interpolation rule: body forces are usually not
    polynomial, and load accuracy caps the pressure-robustness checks.
    """
    mesh = vel.mesh
    _, detJ, s = _cell_geometry(vel)
    rule, basis = vel._ivol, vel.Vi
    wq = rule.weights
    pts = mesh.cell_lo[:, None, :] + mesh.cell_h[:, None, :] * rule.points[None, :, :]
    fv = np.asarray(f(t, pts.reshape(-1, mesh.dim)), float).reshape(mesh.n_cells, -1, mesh.dim)
    loc = np.einsum("Kqc,iqc,q,Kc->Ki", fv, basis, wq, detJ[:, None] * s, optimize=True)
    rhs = np.zeros(vel.n_dofs)
    mask = vel.l2g >= 0
    np.add.at(rhs, vel.l2g[mask], loc[mask])
    return rhs


# ---------------------------------------------------------------------------
# interior-penalty diffusion
# ---------------------------------------------------------------------------

def assemble_sip(vel: VelocitySpace, nu: float, sigma: float) -> sp.csr_matrix:
    """Viscous matrix A = nu * (broken gradient + penalty + consistency)."""
    if sigma <= 0:
        raise ValueError(f"penalty parameter must be positive, got {sigma}")
    h, detJ, s = _cell_geometry(vel)
    wq = vel.volume_rule.weights

    GW = vel.Gr * wq[None, :, None, None]
    SCE = detJ[:, None, None] * (s[:, :, None] / h[:, None, :]) ** 2
    blocks = np.einsum("iqce,jqce,Kce->Kij", GW, vel.Gr, SCE, optimize=True)
    A = _scatter_cell_blocks(vel, blocks)

    A = A + _sip_facets(vel, sigma)
    A = A + A.T
    A = 0.5 * A  # symmetrize away roundoff
    return (nu * A).tocsr()


def _sip_facets(vel: VelocitySpace, sigma: float) -> sp.csr_matrix:
    """Penalty and consistency facet terms of the interior-penalty form."""
    mesh, d = vel.mesh, vel.dim
    _, _, s = _cell_geometry(vel)
    h = mesh.cell_h
    fw = vel.face_rule.weights
    nq = fw.shape[0]
    n2 = 2 * vel.n_local
    total = sp.csr_matrix((vel.n_dofs, vel.n_dofs))

    chunk = max(1, _FACE_CHUNK_ENTRIES // (n2 * nq * d))
    for axis in range(d):
        g = _face_groups(vel)[axis]
        tmask = np.ones(d)
        tmask[axis] = 0.0

        gi = g["interior"]
        for sl in _chunks(len(gi["fid"]), chunk):
            L, R = gi["left"][sl], gi["right"][sl]
            area, h_e = gi["area"][sl], gi["h_pen"][sl]
            nF = len(L)

            TL = vel.FV[(axis, 1)][None] * s[L][:, None, None, :]
            TR = vel.FV[(axis, 0)][None] * s[R][:, None, None, :]
            DL = vel.FDn[(axis, 1)][None] * (s[L] / h[L][:, [axis]])[:, None, None, :]
            DR = vel.FDn[(axis, 0)][None] * (s[R] / h[R][:, [axis]])[:, None, None, :]

            jump = np.concatenate([TL, -TR], axis=1) * tmask
            avg = 0.5 * np.concatenate([DL, DR], axis=1)

            wpen = fw[None, :] * (area * sigma / h_e)[:, None]
            warea = fw[None, :] * area[:, None]
            blocks = _face_quadratic(jump, wpen, jump)
            con = _face_quadratic(avg, warea, jump)
            blocks -= con + con.transpose(0, 2, 1)

            rows_map = np.concatenate([vel.l2g[L], vel.l2g[R]], axis=1)
            total = total + _scatter_face_blocks(vel, blocks, rows_map)

        gw = g["wall"]
        for sl in _chunks(len(gw["fid"]), chunk):
            cells = gw["cell"][sl]
            sides = gw["side"][sl]
            orient = gw["orient"][sl]
            area, h_e = gw["area"][sl], gw["h_pen"][sl]
            if len(cells) == 0:
                continue
            T = np.stack([vel.FV[(axis, int(sd))] for sd in sides]) * s[cells][:, None, None, :]
            D = np.stack([vel.FDn[(axis, int(sd))] for sd in sides]) \
                * (s[cells] / h[cells][:, [axis]])[:, None, None, :] \
                * orient[:, None, None, None]

            jump = T * tmask  # boundary jump = trace, average = one-sided
            wpen = fw[None, :] * (area * sigma / h_e)[:, None]
            warea = fw[None, :] * area[:, None]
            blocks = _face_quadratic(jump, wpen, jump)
            con = _face_quadratic(D, warea, jump)
            blocks -= con + con.transpose(0, 2, 1)
            total = total + _scatter_face_blocks(vel, blocks, vel.l2g[cells])
    return total


def _scatter_face_blocks(vel, blocks, rows_map):
    rows, cols, data = _face_block_entries(blocks, rows_map)
    return sp.coo_matrix((data, (rows, cols)),
                         shape=(vel.n_dofs, vel.n_dofs)).tocsr()


def _face_block_entries(blocks, rows_map):
    nF, nI, nJ = blocks.shape
    rows = np.repeat(rows_map[:, :, None], nJ, axis=2)
    cols = np.repeat(rows_map[:, None, :], nI, axis=1)
    mask = (rows >= 0) & (cols >= 0)
    return rows[mask], cols[mask], blocks[mask]


def _cell_block_entries(vel, blocks, other=None):
    rows_map = vel.l2g
    cols_map = vel.l2g if other is None else other
    nc, ni, nj = blocks.shape
    rows = np.repeat(rows_map[:, :, None], nj, axis=2)
    cols = np.repeat(cols_map[:, None, :], ni, axis=1)
    mask = (rows >= 0) & (cols >= 0)
    return rows[mask], cols[mask], blocks[mask]


# ---------------------------------------------------------------------------
# upwind convection
# ---------------------------------------------------------------------------

def check_divergence_free(B: sp.spmatrix, b: np.ndarray, M: Optional[sp.spmatrix] = None,
                          tol: float = 1e-8) -> float:
    """Scaled divergence residual of a coefficient vector."""
    scale = 1.0
    if M is not None:
        scale = max(1.0, float(np.sqrt(b @ (M @ b))))
    return float(np.abs(B.T @ b).max()) / scale


def assemble_upwind_convection(vel: VelocitySpace, b: np.ndarray,
                               B: Optional[sp.spmatrix] = None,
                               M: Optional[sp.spmatrix] = None,
                               div_tol: float = 1e-8) -> sp.csr_matrix:
    """Convection matrix C(b) with (C(b) u)_i = c_h(b; u, phi_i).

    Rejects advecting fields that are not divergence-free to tolerance:
    the energy identity tested downstream silently breaks otherwise.
    """
    if B is not None:
        res = check_divergence_free(B, b, M, div_tol)
        if res > div_tol:
            raise ValueError(
                f"advecting field is not divergence-free: residual {res:.3e} > {div_tol:.1e}")

    mesh, d = vel.mesh, vel.dim
    h, detJ, s = _cell_geometry(vel)
    wq = vel.volume_rule.weights
    loc_b = local_coefficients(vel, b)

    n_loc = vel.n_local
    n_q = vel.volume_rule.n_points
    bq = np.einsum("Kj,jqe,Ke->Kqe", loc_b, vel.V, s, optimize=True)
    # contract the advecting field against reference gradients per point:
    # T[K,j,q,c] = sum_e (b_e / h_e) dref_e phihat_{j,c}
    bqh = (bq / h[:, None, :]).transpose(1, 0, 2)                 # (q, K, e)
    Gr_r = np.ascontiguousarray(vel.Gr.transpose(1, 3, 0, 2)).reshape(n_q, d, -1)
    T = np.matmul(bqh, Gr_r)                                      # (q, K, j*c)
    T = np.ascontiguousarray(T.transpose(1, 2, 0)).reshape(-1, n_loc, d, n_q)
    T = T.transpose(0, 1, 3, 2)                                   # (K, j, q, c)
    # detJ * s_c^2: one Piola factor for the test value, one for the gradient
    T = T * (wq[None, None, :, None] * (detJ[:, None] * s ** 2)[:, None, None, :])
    Vf = vel.V.reshape(n_loc, -1)
    blocks = np.matmul(Vf[None, :, :], T.reshape(T.shape[0], n_loc, -1).transpose(0, 2, 1))

    rows_l, cols_l, data_l = _cell_block_entries(vel, blocks)
    entries = [(rows_l, cols_l, data_l)]

    fw = vel.face_rule.weights
    nq = fw.shape[0]
    n2 = 2 * vel.n_local
    chunk = max(1, _FACE_CHUNK_ENTRIES // (n2 * nq * d))
    for axis in range(d):
        g = _face_groups(vel)[axis]["interior"]
        for sl in _chunks(len(g["fid"]), chunk):
            L, R = g["left"][sl], g["right"][sl]
            area = g["area"][sl]
            TLr, TRr = vel.FV[(axis, 1)], vel.FV[(axis, 0)]
            TL = TLr[None] * s[L][:, None, None, :]
            TR = TRr[None] * s[R][:, None, None, :]
            # normal trace of b is single-valued; evaluate from the left cell
            bn = np.einsum("Fj,jq->Fq", loc_b[L] * s[L][:, [axis]], TLr[:, :, axis])

            jump = np.concatenate([TL, -TR], axis=1)
            avg = 0.5 * np.concatenate([TL, TR], axis=1)

            wflux = fw[None, :] * area[:, None] * bn
            wupw = fw[None, :] * area[:, None] * 0.5 * np.abs(bn)
            blocks = _face_quadratic(jump, wupw, jump) - _face_quadratic(avg, wflux, jump)

            rows_map = np.concatenate([vel.l2g[L], vel.l2g[R]], axis=1)
            entries.append(_face_block_entries(blocks, rows_map))

    rows = np.concatenate([e[0] for e in entries])
    cols = np.concatenate([e[1] for e in entries])
    data = np.concatenate([e[2] for e in entries])
    return sp.coo_matrix((data, (rows, cols)),
                         shape=(vel.n_dofs, vel.n_dofs)).tocsr()


def _face_quadratic(left, w, right):
    """Batched facet blocks sum_{q,c} left[F,I,q,c] w[F,q] right[F,J,q,c]."""
    nF, nI = left.shape[:2]
    lw = left * w[:, None, :, None]
    return np.matmul(lw.reshape(nF, nI, -1),
                     right.reshape(nF, right.shape[1], -1).transpose(0, 2, 1))


def upwind_seminorm_sq(vel: VelocitySpace, v: np.ndarray, b: np.ndarray) -> float:
    """|v|^2 upwind: half the |b.mu|-weighted squared jumps over interior faces."""
    mesh, d = vel.mesh, vel.dim
    _, _, s = _cell_geometry(vel)
    fw = vel.face_rule.weights
    loc_v = local_coefficients(vel, v)
    loc_b = local_coefficients(vel, b)
    total = 0.0
    for axis in range(d):
        g = _face_groups(vel)[axis]["interior"]
        L, R = g["left"], g["right"]
        if len(L) == 0:
            continue
        TLr, TRr = vel.FV[(axis, 1)], vel.FV[(axis, 0)]
        vL = np.einsum("Fj,jqc,Fc->Fqc", loc_v[L], TLr, s[L], optimize=True)
        vR = np.einsum("Fj,jqc,Fc->Fqc", loc_v[R], TRr, s[R], optimize=True)
        bn = np.einsum("Fj,jq->Fq", loc_b[L] * s[L][:, [axis]], TLr[:, :, axis])
        jump2 = ((vL - vR) ** 2).sum(axis=2)
        total += 0.5 * float(np.einsum("Fq,Fq,q,F->", np.abs(bn), jump2, fw, g["area"]))
    return total


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

@dataclass
class NormReport:
    """Mesh-dependent norms of a velocity coefficient vector.

    norm_1h: broken H1 norm (gradient + tangential-jump facet sum over all
    faces).  norm_1h_star additionally sums h_E * the averaged normal
    derivative.  upwind is the |b . mu|-weighted jump seminorm (0 without an
    advecting field).  energy is sqrt(a_h(v, v)) of the unit-viscosity form.
    """

    norm_1h: float
    norm_1h_star: float
    upwind: float
    energy: float


def compute_norms(vel: VelocitySpace, v: np.ndarray, b: Optional[np.ndarray] = None,
                  sigma: Optional[float] = None) -> NormReport:
    if sigma is None:
        sigma = sigma_default(vel.k)
    mesh, d = vel.mesh, vel.dim
    h, detJ, s = _cell_geometry(vel)
    wq = vel.volume_rule.weights
    fw = vel.face_rule.weights
    loc_v = local_coefficients(vel, v)

    grads = np.einsum("Kj,jqce,Kc,Ke->Kqce", loc_v, vel.Gr, s, 1.0 / h, optimize=True)
    grad_sq = float(np.einsum("Kqce,Kqce,q,K->", grads, grads, wq, detJ, optimize=True))

    jump_t_sq = 0.0      # sum over faces of h_E^-1 ||tangential jump||^2
    jump_pen_sq = 0.0    # same with the penalty length used by the form
    avg_dn_sq = 0.0      # sum over faces of h_E * ||averaged normal derivative||^2
    consistency = 0.0    # sum over faces of <dn v> . [v]_t

    for axis in range(d):
        groups = _face_groups(vel)[axis]
        tmask = np.ones(d)
        tmask[axis] = 0.0

        g = groups["interior"]
        if len(g["fid"]):
            L, R = g["left"], g["right"]
            area, h_e, h_pen = g["area"], g["h_e"], g["h_pen"]
            vL = np.einsum("Fj,jqc,Fc->Fqc", loc_v[L], vel.FV[(axis, 1)], s[L], optimize=True)
            vR = np.einsum("Fj,jqc,Fc->Fqc", loc_v[R], vel.FV[(axis, 0)], s[R], optimize=True)
            dL = np.einsum("Fj,jqc,Fc->Fqc", loc_v[L], vel.FDn[(axis, 1)],
                           s[L] / h[L][:, [axis]], optimize=True)
            dR = np.einsum("Fj,jqc,Fc->Fqc", loc_v[R], vel.FDn[(axis, 0)],
                           s[R] / h[R][:, [axis]], optimize=True)
            jt = (vL - vR) * tmask
            av = 0.5 * (dL + dR)
            jump_t_sq += float(np.einsum("Fqc,Fqc,q,F->", jt, jt, fw, area / h_e))
            jump_pen_sq += float(np.einsum("Fqc,Fqc,q,F->", jt, jt, fw, area / h_pen))
            avg_dn_sq += float(np.einsum("Fqc,Fqc,q,F->", av, av, fw, area * h_e))
            consistency += float(np.einsum("Fqc,Fqc,q,F->", av, jt, fw, area))

        g = groups["wall"]
        if len(g["fid"]):
            cells, sides, orient = g["cell"], g["side"], g["orient"]
            area, h_e, h_pen = g["area"], g["h_e"], g["h_pen"]
            T = np.stack([vel.FV[(axis, int(sd))] for sd in sides])
            D = np.stack([vel.FDn[(axis, int(sd))] for sd in sides])
            vT = np.einsum("Fjqc,Fj,Fc->Fqc", T, loc_v[cells], s[cells], optimize=True)
            dT = np.einsum("Fjqc,Fj,Fc->Fqc", D, loc_v[cells],
                           s[cells] / h[cells][:, [axis]], optimize=True) \
                * orient[:, None, None]
            jt = vT * tmask
            jump_t_sq += float(np.einsum("Fqc,Fqc,q,F->", jt, jt, fw, area / h_e))
            jump_pen_sq += float(np.einsum("Fqc,Fqc,q,F->", jt, jt, fw, area / h_pen))
            avg_dn_sq += float(np.einsum("Fqc,Fqc,q,F->", dT, dT, fw, area * h_e))
            consistency += float(np.einsum("Fqc,Fqc,q,F->", dT, jt, fw, area))

    norm_1h = np.sqrt(grad_sq + jump_t_sq)
    norm_1h_star = np.sqrt(grad_sq + jump_t_sq + avg_dn_sq)
    energy_sq = grad_sq + sigma * jump_pen_sq - 2.0 * consistency
    upwind = np.sqrt(upwind_seminorm_sq(vel, v, b)) if b is not None else 0.0
    return NormReport(norm_1h=float(norm_1h), norm_1h_star=float(norm_1h_star),
                      upwind=float(upwind), energy=float(np.sqrt(max(energy_sq, 0.0))))


# ---------------------------------------------------------------------------
# operator bundle
# ---------------------------------------------------------------------------

@dataclass
class Operators:
    """Static assembled operators of a discretization plus rebuild handles."""

    vel: VelocitySpace
    prs: PressureSpace
    nu: float
    sigma: float
    M: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    mean_p: np.ndarray          # pressure mean functional
    mean_u: np.ndarray          # (n_u, d) momentum functionals (velocity gauge)

    def convection(self, b, div_tol=1e-8) -> sp.csr_matrix:
        return assemble_upwind_convection(self.vel, b, B=self.B, M=self.M,
                                          div_tol=div_tol)

    def load(self, f, t=0.0) -> np.ndarray:
        return assemble_load(self.vel, f, t)

    def upwind_sq(self, v, b) -> float:
        return upwind_seminorm_sq(self.vel, v, b)

    @property
    def n_u(self):
        return self.vel.n_dofs

    @property
    def n_p(self):
        return self.prs.n_dofs


def assemble_operators(vel: VelocitySpace, prs: PressureSpace, nu: float,
                       sigma: Optional[float] = None) -> Operators:
    if sigma is None:
        sigma = sigma_default(vel.k)
    M = assemble_mass(vel)
    A = assemble_sip(vel, nu, sigma)
    B = assemble_div(vel, prs)
    mean_u = np.stack(
        [assemble_load(vel, lambda t, x, c=c: np.eye(vel.dim)[c] * np.ones((x.shape[0], 1)))
         for c in range(vel.dim)], axis=1)
    return Operators(vel=vel, prs=prs, nu=nu, sigma=sigma, M=M, A=A, B=B,
                     mean_p=prs.mean_vector(), mean_u=mean_u)
