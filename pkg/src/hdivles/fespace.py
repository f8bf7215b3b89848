"""Tensor-product Raviart-Thomas velocity spaces and discontinuous pressures.

On an axis-aligned cell the velocity element of order k has component c
spanned by polynomials of degree k+1 in the axis-c coordinate and degree k in
the others.  The 1D factor along the component's own axis uses a
Gauss-Lobatto Lagrange basis (degree k+1, endpoint functions isolate the face
traces); the transverse factors use a Gauss-point Lagrange basis (degree k).
Because both cells adjacent to a face see the same transverse geometry, a
face's normal-trace polynomials coincide from either side and normal
continuity is obtained by sharing the face coefficients.  Wall faces carry no
degrees of freedom at all, which imposes v.n = 0 strongly.

Fields live on physical cells through the contravariant Piola map; on a box
cell of extents h this reduces to the per-component scaling u_c = (h_c /
det J) * ref_c with det J = prod(h), and div u = (1 / det J) * ref_div.

Interpolation uses the canonical degrees of freedom (face moments of the
normal component against all transverse polynomials of degree k, interior
moments against per-axis degree (k-1, k, ..., k) test fields).  With these
functionals the interpolation of a divergence-free field is divergence-free
(commuting property), which the pressure space mirrors: per cell it is the
orthonormal tensor Legendre basis of degree k per axis, so that the
divergence of the velocity space is exactly the pressure space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .mesh import CartesianMesh, INTERIOR

__all__ = [
    "QuadratureRule", "gauss_rule", "VelocitySpace", "PressureSpace",
    "build_velocity_space", "build_pressure_space", "eval_velocity_basis",
    "interpolate_velocity", "interpolate_pressure", "sample_velocity",
    "default_quad_degree",
]


# ---------------------------------------------------------------------------
# 1D machinery
# ---------------------------------------------------------------------------

def gauss_points_1d(n):
    """n-point Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_lobatto_points_1d(n):
    """n-point Gauss-Lobatto nodes on [0, 1] (endpoints included), n >= 2."""
    if n < 2:
        raise ValueError("Gauss-Lobatto needs at least 2 nodes")
    if n == 2:
        return np.array([0.0, 1.0])
    interior = np.polynomial.legendre.Legendre.basis(n - 1).deriv().roots()
    return np.concatenate(([0.0], 0.5 * (np.real(interior) + 1.0), [1.0]))


class Lagrange1D:
    """Lagrange basis on given nodes, evaluated in stable product form."""

    def __init__(self, nodes):
        self.nodes = np.asarray(nodes, float)
        self.n = len(self.nodes)

    def eval(self, x, order=0):
        """Values (order 0) or derivatives of all basis functions at x.

        Returns an array of shape (n_basis, len(x)).
        """
        x = np.atleast_1d(np.asarray(x, float))
        xn = self.nodes
        n = self.n
        out = np.empty((n, x.shape[0]))

        def prod_skip(i, skip):
            v = np.ones_like(x)
            for j in range(n):
                if j == i or j in skip:
                    continue
                v *= (x - xn[j]) / (xn[i] - xn[j])
            return v

        if order == 0:
            for i in range(n):
                out[i] = prod_skip(i, ())
        elif order == 1:
            for i in range(n):
                acc = np.zeros_like(x)
                for m in range(n):
                    if m == i:
                        continue
                    acc += prod_skip(i, (m,)) / (xn[i] - xn[m])
                out[i] = acc
        elif order == 2:
            for i in range(n):
                acc = np.zeros_like(x)
                for m in range(n):
                    if m == i:
                        continue
                    for l in range(n):
                        if l == i or l == m:
                            continue
                        acc += prod_skip(i, (m, l)) / ((xn[i] - xn[m]) * (xn[i] - xn[l]))
                out[i] = acc
        else:
            raise ValueError(f"unsupported derivative order {order}")
        return out


class Legendre1D:
    """Orthonormal shifted Legendre basis on [0, 1], degrees 0..n-1."""

    def __init__(self, n):
        self.n = n
        self._polys = [np.polynomial.legendre.Legendre.basis(j) for j in range(n)]

    def eval(self, x, order=0):
        x = np.atleast_1d(np.asarray(x, float))
        s = 2.0 * x - 1.0
        out = np.empty((self.n, x.shape[0]))
        for j, p in enumerate(self._polys):
            q = p.deriv(order) if order else p
            out[j] = np.sqrt(2 * j + 1) * q(s) * (2.0 ** order)
        return out


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss rule on the reference box [0, 1]^dim."""

    points: np.ndarray   # (n_points, dim)
    weights: np.ndarray  # (n_points,)
    degree: int          # exact for per-axis polynomial degree <= degree

    @property
    def n_points(self):
        return self.points.shape[0]


def gauss_rule(degree, dim=1) -> QuadratureRule:
    """Tensor-product Gauss rule on [0,1]^dim exact up to `degree` per axis."""
    if degree < 0:
        raise ValueError(f"quadrature degree must be >= 0, got {degree}")
    n = (int(degree) + 2) // 2  # 2n - 1 >= degree
    x, w = gauss_points_1d(max(n, 1))
    if dim == 0:
        return QuadratureRule(np.zeros((1, 0)), np.ones(1), degree)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w_grids = np.meshgrid(*([w] * dim), indexing="ij")
    wts = np.prod(np.stack([g.ravel() for g in w_grids], axis=-1), axis=-1)
    return QuadratureRule(pts, wts, degree)


def default_quad_degree(k: int) -> int:
    """Quadrature exactness used by the spaces.

    3k+3 covers every assembled integrand exactly, including the trilinear
    convective term with a discrete advecting field (per-axis degree 3k+2);
    the quadratic forms alone would only need 2k+3.
    """
    return 3 * k + 3


# ---------------------------------------------------------------------------
# Velocity space
# ---------------------------------------------------------------------------

class VelocitySpace:
    """H(div)-conforming tensor Raviart-Thomas space of order k on a mesh.

    Local basis enumeration is component-major: for component c, the index
    a in 0..k+1 selects the Gauss-Lobatto factor along axis c (a = 0 and
    a = k+1 are the minus/plus face functions), and the multi-index b runs in
    C order over the Gauss-Lagrange factors of the remaining axes.

    Global numbering: one block of (k+1)^(d-1) DOFs per interior face (in
    face-id order), then per-cell interior DOFs.  Wall-face slots map to -1.
    """

    def __init__(self, mesh: CartesianMesh, k: int, quad_degree=None):
        if k < 0:
            raise ValueError(f"polynomial order must be >= 0, got {k}")
        self.mesh = mesh
        self.k = k
        d = mesh.dim
        self.dim = d

        self.quad_degree = default_quad_degree(k) if quad_degree is None else int(quad_degree)
        self.volume_rule = gauss_rule(self.quad_degree, d)
        self.face_rule = gauss_rule(self.quad_degree, d - 1)

        self._normal_nodes = gauss_lobatto_points_1d(k + 2)
        self._tangent_nodes, _ = gauss_points_1d(k + 1)
        self.normal_basis = Lagrange1D(self._normal_nodes)
        self.tangent_basis = Lagrange1D(self._tangent_nodes)
        self.moment_basis = Legendre1D(max(k, 1))  # interior moments, degree <= k-1

        self.n_face_dofs = (k + 1) ** (d - 1)
        self.n_local = d * (k + 2) * (k + 1) ** (d - 1)
        self._enumerate_local_dofs()
        self._build_global_numbering()
        self._build_reference_tables()
        self._build_interpolation_matrix()
        self._grid_cache = {}

    # -- local structure ----------------------------------------------------

    def _enumerate_local_dofs(self):
        d, k = self.dim, self.k
        dofs = []
        for c in range(d):
            for a in range(k + 2):
                for b in itertools.product(range(k + 1), repeat=d - 1):
                    dofs.append((c, a, b))
        self.local_dofs = dofs
        self.dof_component = np.array([c for c, _, _ in dofs])
        assert len(dofs) == self.n_local

    def _b_rank(self, b):
        k = self.k
        r = 0
        for bi in b:
            r = r * (k + 1) + bi
        return r

    # -- global numbering ----------------------------------------------------

    def _build_global_numbering(self):
        mesh, k, d = self.mesh, self.k, self.dim
        nfd = self.n_face_dofs
        self.face_dof_base = np.full(mesh.n_faces, -1, dtype=np.int64)
        offset = 0
        for f in mesh.faces:
            if f.kind == INTERIOR:
                self.face_dof_base[f.id] = offset
                offset += nfd
        self.n_face_dofs_total = offset
        self.n_interior_per_cell = d * k * (k + 1) ** (d - 1)
        self.n_dofs = offset + mesh.n_cells * self.n_interior_per_cell

        l2g = np.full((mesh.n_cells, self.n_local), -1, dtype=np.int64)
        owner = np.zeros((mesh.n_cells, self.n_local), dtype=bool)
        for cell in range(mesh.n_cells):
            int_base = self.n_face_dofs_total + cell * self.n_interior_per_cell
            int_count = 0
            for loc, (c, a, b) in enumerate(self.local_dofs):
                if a == 0 or a == k + 1:
                    side = 0 if a == 0 else 1
                    fid = mesh.cell_faces[cell, c, side]
                    base = self.face_dof_base[fid]
                    if base >= 0:
                        l2g[cell, loc] = base + self._b_rank(b)
                        owner[cell, loc] = side == 1
                else:
                    l2g[cell, loc] = int_base + int_count
                    owner[cell, loc] = True
                    int_count += 1
        self.l2g = l2g
        self.dof_owner = owner

    # -- reference evaluation -------------------------------------------------

    def _eval_reference(self, pts, order):
        """Reference values/derivatives of all local basis functions.

        Returns V (n_local, n, d) and, for order >= 1, Gr (n_local, n, d, d)
        with Gr[j, q, c, e] the e-derivative of component c, and for
        order >= 2 also H (n_local, n, d, d, d).
        """
        d, k = self.dim, self.k
        n = pts.shape[0]
        nvals = [self.normal_basis.eval(pts[:, e], 0) for e in range(d)]
        mvals = [self.tangent_basis.eval(pts[:, e], 0) for e in range(d)]
        nder = [self.normal_basis.eval(pts[:, e], 1) for e in range(d)] if order >= 1 else None
        mder = [self.tangent_basis.eval(pts[:, e], 1) for e in range(d)] if order >= 1 else None
        nd2 = [self.normal_basis.eval(pts[:, e], 2) for e in range(d)] if order >= 2 else None
        md2 = [self.tangent_basis.eval(pts[:, e], 2) for e in range(d)] if order >= 2 else None

        V = np.zeros((self.n_local, n, d))
        Gr = np.zeros((self.n_local, n, d, d)) if order >= 1 else None
        H = np.zeros((self.n_local, n, d, d, d)) if order >= 2 else None

        for loc, (c, a, b) in enumerate(self.local_dofs):
            t_axes = [e for e in range(d) if e != c]
            fac = {c: (nvals[c][a], nder[c][a] if order >= 1 else None,
                       nd2[c][a] if order >= 2 else None)}
            for e, bi in zip(t_axes, b):
                fac[e] = (mvals[e][bi], mder[e][bi] if order >= 1 else None,
                          md2[e][bi] if order >= 2 else None)

            val = np.ones(n)
            for e in range(d):
                val = val * fac[e][0]
            V[loc, :, c] = val
            if order >= 1:
                for e1 in range(d):
                    g = np.ones(n)
                    for e in range(d):
                        g = g * (fac[e][1] if e == e1 else fac[e][0])
                    Gr[loc, :, c, e1] = g
            if order >= 2:
                for e1 in range(d):
                    for e2 in range(d):
                        h = np.ones(n)
                        for e in range(d):
                            if e == e1 == e2:
                                h = h * fac[e][2]
                            elif e == e1 or e == e2:
                                h = h * fac[e][1]
                            else:
                                h = h * fac[e][0]
                        H[loc, :, c, e1, e2] = h
        return V, Gr, H

    def _build_reference_tables(self):
        d = self.dim
        vol_pts = self.volume_rule.points
        self.V, self.Gr, _ = self._eval_reference(vol_pts, order=1)
        self.Div = np.einsum("jqcc->jq", self.Gr[:, :, :, :])  # trace over (c, e=c)
        self._H = None

        # face traces: values and normal derivatives at face quadrature points
        self.face_points = {}
        self.FV = {}
        self.FDn = {}
        fpts = self.face_rule.points
        nf = fpts.shape[0]
        for axis in range(d):
            t_axes = [e for e in range(d) if e != axis]
            for side in (0, 1):
                ref = np.empty((nf, d))
                ref[:, axis] = float(side)
                for j, e in enumerate(t_axes):
                    ref[:, e] = fpts[:, j]
                V, Gr, _ = self._eval_reference(ref, order=1)
                self.face_points[(axis, side)] = ref
                self.FV[(axis, side)] = V
                self.FDn[(axis, side)] = Gr[:, :, :, axis]

    @property
    def hessian_table(self):
        """Reference second derivatives at volume points, built on demand."""
        if self._H is None:
            _, _, self._H = self._eval_reference(self.volume_rule.points, order=2)
        return self._H

    # -- Piola scalings -------------------------------------------------------

    def piola_scale(self, cells=None):
        """Component scalings s with u_c = s_c * ref_c, s_c = h_c / det J."""
        h = self.mesh.cell_h if cells is None else self.mesh.cell_h[cells]
        detJ = np.prod(h, axis=-1, keepdims=True)
        return h / detJ

    # -- canonical interpolation ----------------------------------------------

    def _build_interpolation_matrix(self):
        """Generalized Vandermonde G[i, j] = functional_i(basis_j).

        All functionals act on reference fields, so G is cell-independent:
        face moments of the normal trace against the transverse Lagrange
        basis, interior moments against Legendre (deg <= k-1) along the
        component axis times the transverse Lagrange basis.  Interpolation
        carries its own, finer quadrature so the moments of non-polynomial
        fields stay well below the divergence tolerance.
        """
        d, k = self.dim, self.k
        n = self.n_local
        deg = max(self.quad_degree, 25)
        self._ivol = gauss_rule(deg, d)
        self._iface = gauss_rule(deg, d - 1)
        vpts, vw = self._ivol.points, self._ivol.weights
        fpts, fw = self._iface.points, self._iface.weights

        Vv, _, _ = self._eval_reference(vpts, order=0)
        self._interp_face_points = {}
        FVv = {}
        for axis in range(d):
            t_axes = [e for e in range(d) if e != axis]
            for side in (0, 1):
                ref = np.empty((fpts.shape[0], d))
                ref[:, axis] = float(side)
                for j, e in enumerate(t_axes):
                    ref[:, e] = fpts[:, j]
                self._interp_face_points[(axis, side)] = ref
                FVv[(axis, side)], _, _ = self._eval_reference(ref, order=0)

        mom_vol = self.moment_basis.eval  # Legendre on [0,1]
        tang_face = [self.tangent_basis.eval(fpts[:, j], 0) for j in range(d - 1)]

        # basis values on the fine rule, reused for loads of non-polynomial f
        self.Vi = Vv

        G = np.zeros((n, n))
        self._w_face = {}
        self._w_int = {}
        for i, (c, a, b) in enumerate(self.local_dofs):
            if a == 0 or a == k + 1:
                side = 0 if a == 0 else 1
                wvec = fw.copy()
                for j, bj in enumerate(b):
                    wvec = wvec * tang_face[j][bj]
                # moment of the normal trace: component c on face (c, side)
                G[i, :] = FVv[(c, side)][:, :, c] @ wvec
                self._w_face[i] = wvec
            else:
                p = mom_vol(vpts[:, c], 0)[a - 1]
                wvec = vw * p
                t_axes = [e for e in range(d) if e != c]
                for e, bj in zip(t_axes, b):
                    wvec = wvec * self.tangent_basis.eval(vpts[:, e], 0)[bj]
                G[i, :] = Vv[:, :, c] @ wvec
                self._w_int[i] = wvec
        self._interp_lu = scipy.linalg.lu_factor(G)
        self._interp_G = G

    def interpolation_rhs_weights(self):
        """(W_vol, W_face) functional weight matrices used by interpolation."""
        d, k = self.dim, self.k
        nvol = self._ivol.n_points
        nface = self._iface.n_points
        W_vol = np.zeros((self.n_local, nvol))
        W_face = {(c, s): np.zeros((self.n_local, nface)) for c in range(d) for s in (0, 1)}
        for i, (c, a, b) in enumerate(self.local_dofs):
            if a == 0 or a == k + 1:
                side = 0 if a == 0 else 1
                W_face[(c, side)][i] = self._w_face[i]
            else:
                W_vol[i] = self._w_int[i]
        return W_vol, W_face


def build_velocity_space(mesh, k, quad_degree=None) -> VelocitySpace:
    """Build the order-k H(div)-conforming velocity space on a mesh."""
    return VelocitySpace(mesh, k, quad_degree=quad_degree)


def eval_velocity_basis(space: VelocitySpace, cell: int, points, order=1,
                        validate=False):
    """Physical basis values at reference points of one cell.

    Returns (values, gradients, divergences); gradients is None for order 0.
    values[j, q, c] is component c of basis j; gradients[j, q, c, e] is its
    e-derivative; divergences[j, q] the pointwise divergence.
    """
    points = np.atleast_2d(np.asarray(points, float))
    if validate and (points.min() < -1e-12 or points.max() > 1 + 1e-12):
        raise ValueError("reference points outside the unit cell")
    V, Gr, _ = space._eval_reference(points, order=max(order, 1))
    h = space.mesh.cell_h[cell]
    detJ = float(np.prod(h))
    s = h / detJ
    vals = V * s[None, None, :]
    grads = None
    if order >= 1:
        grads = Gr * s[None, None, :, None] / h[None, None, None, :]
    divs = np.einsum("jqcc->jq", Gr) / detJ
    return vals, grads, divs


# ---------------------------------------------------------------------------
# Pressure space
# ---------------------------------------------------------------------------

class PressureSpace:
    """Discontinuous tensor-product pressure space of degree k per axis.

    The per-cell basis is the orthonormal tensor Legendre basis on the
    reference cell mapped without scaling, so the cell mass matrix is
    det(J) * I and the only basis function with nonzero mean is the constant
    mode.  The divergence of the matching velocity space lies exactly in this
    space.  No inter-cell coupling; the zero-mean gauge is applied at solver
    level, not by constraining the basis.
    """

    def __init__(self, mesh: CartesianMesh, k: int, quad_degree=None):
        if k < 0:
            raise ValueError(f"polynomial order must be >= 0, got {k}")
        self.mesh = mesh
        self.k = k
        self.dim = mesh.dim
        self.quad_degree = default_quad_degree(k) if quad_degree is None else int(quad_degree)
        self.volume_rule = gauss_rule(self.quad_degree, mesh.dim)
        self.basis_1d = Legendre1D(k + 1)
        self.n_local = (k + 1) ** mesh.dim
        self.n_dofs = self.n_local * mesh.n_cells
        self.multi_indices = list(itertools.product(range(k + 1), repeat=mesh.dim))
        self._build_tables()
        self.mean_zero_by_solver = True

    def _build_tables(self):
        pts = self.volume_rule.points
        d = self.dim
        per_axis = [self.basis_1d.eval(pts[:, e], 0) for e in range(d)]
        P = np.ones((self.n_local, pts.shape[0]))
        for i, b in enumerate(self.multi_indices):
            for e in range(d):
                P[i] *= per_axis[e][b[e]]
        self.P = P

    def l2g(self, cell):
        return cell * self.n_local + np.arange(self.n_local)

    def mean_vector(self):
        """m with m . p = integral of p_h over the domain."""
        m = np.zeros(self.n_dofs)
        detJ = np.prod(self.mesh.cell_h, axis=1)
        m[0::self.n_local] = detJ  # only the constant mode has nonzero mean
        return m

    def eval_cell(self, pts):
        """Basis values (n_local, n_pts) at reference points."""
        d = self.dim
        pts = np.atleast_2d(pts)
        per_axis = [self.basis_1d.eval(pts[:, e], 0) for e in range(d)]
        P = np.ones((self.n_local, pts.shape[0]))
        for i, b in enumerate(self.multi_indices):
            for e in range(d):
                P[i] *= per_axis[e][b[e]]
        return P


def build_pressure_space(mesh, k, quad_degree=None) -> PressureSpace:
    """Pressure space matching the order-k velocity space on the same mesh."""
    return PressureSpace(mesh, k, quad_degree=quad_degree)


# ---------------------------------------------------------------------------
# Interpolation and field evaluation
# ---------------------------------------------------------------------------

def _physical_points(space, ref_pts):
    """Map reference points into every cell: (n_cells, n_pts, d)."""
    lo = space.mesh.cell_lo[:, None, :]
    h = space.mesh.cell_h[:, None, :]
    return lo + h * ref_pts[None, :, :]


def interpolate_local(space: VelocitySpace, fn) -> np.ndarray:
    """Per-cell canonical interpolation, ignoring inter-cell coupling.

    Returns local coefficients of shape (n_cells, n_local).  On fields whose
    face moments agree from both sides (periodic-compatible, or zero normal
    flux at walls) the per-cell solutions glue into a conforming field.
    """
    mesh, d, k = space.mesh, space.dim, space.k
    W_vol, W_face = space.interpolation_rhs_weights()
    nvol = space._ivol.n_points
    nface = space._iface.n_points

    blocks = [space._ivol.points] + \
             [space._interp_face_points[(c, s)] for c in range(d) for s in (0, 1)]
    ref_all = np.concatenate(blocks, axis=0)
    phys = _physical_points(space, ref_all)
    u = np.asarray(fn(phys.reshape(-1, d)), float).reshape(mesh.n_cells, -1, d)

    detJ = np.prod(mesh.cell_h, axis=1)
    inv_piola = detJ[:, None, None] / mesh.cell_h[:, None, :]  # uhat = u * detJ / h_c

    uhat = u * inv_piola
    rhs = np.zeros((mesh.n_cells, space.n_local))
    # interior functionals (volume block), per component
    u_vol = uhat[:, :nvol, :]
    for c in range(d):
        rows = [i for i, (cc, a, _) in enumerate(space.local_dofs)
                if cc == c and 0 < a < k + 1]
        if rows:
            rhs[:, rows] += u_vol[:, :, c] @ W_vol[rows].T
    # face functionals
    off = nvol
    for c in range(d):
        for s in (0, 1):
            u_f = uhat[:, off:off + nface, c]
            rows = [i for i, (cc, a, _) in enumerate(space.local_dofs)
                    if cc == c and ((a == 0 and s == 0) or (a == k + 1 and s == 1))]
            rhs[:, rows] += u_f @ W_face[(c, s)][rows].T
            off += nface

    return scipy.linalg.lu_solve(space._interp_lu, rhs.T).T


def interpolate_velocity(space: VelocitySpace, fn) -> np.ndarray:
    """Canonical (commuting) interpolation of a velocity field.

    `fn` maps an (n, d) array of physical points to (n, d) velocity values.
    Face moments are written by the face's plus-side cell, so shared
    coefficients are assigned exactly once; wall-face moments are dropped
    (the space carries no normal flux there).
    """
    coeffs_loc = interpolate_local(space, fn)
    out = np.zeros(space.n_dofs)
    mask = space.dof_owner & (space.l2g >= 0)
    out[space.l2g[mask]] = coeffs_loc[mask]
    return out


def interpolate_pressure(prs: PressureSpace, fn) -> np.ndarray:
    """L2 projection of a scalar field onto the pressure space."""
    mesh = prs.mesh
    phys = _physical_points(prs, prs.volume_rule.points)
    vals = np.asarray(fn(phys.reshape(-1, mesh.dim)), float).reshape(mesh.n_cells, -1)
    w = prs.volume_rule.weights
    # orthonormal reference basis: coefficients are plain weighted moments
    return (vals * w[None, :]) @ prs.P.T


def local_coefficients(space: VelocitySpace, u: np.ndarray) -> np.ndarray:
    """Gather global coefficients into per-cell local vectors (wall slots 0)."""
    loc = np.where(space.l2g >= 0, u[np.maximum(space.l2g, 0)], 0.0)
    return loc


def velocity_at_quadrature(space, u, order=0):
    """Field values (n_cells, n_q, d) (and gradients) at volume points."""
    loc = local_coefficients(space, u)
    s = space.piola_scale()
    vals = np.einsum("Kj,jqc,Kc->Kqc", loc, space.V, s)
    if order == 0:
        return vals
    grads = np.einsum("Kj,jqce,Kc,Ke->Kqce", loc, space.Gr, s,
                      1.0 / space.mesh.cell_h)
    return vals, grads


def divergence_at_quadrature(space, u):
    loc = local_coefficients(space, u)
    detJ = np.prod(space.mesh.cell_h, axis=1)
    return np.einsum("Kj,jq->Kq", loc, space.Div) / detJ[:, None]


def _grid_axis_layout(mesh, m):
    """Sample coordinates, owning cells and reference coords along each axis."""
    coords, cells, refs = [], [], []
    for a in range(mesh.dim):
        lo, hi = mesh.domain_box[a]
        s = lo + (np.arange(m[a]) + 0.5) * (hi - lo) / m[a]
        idx = np.clip(np.searchsorted(mesh.nodes[a], s, side="right") - 1,
                      0, mesh.cells_per_axis[a] - 1)
        node_lo = mesh.nodes[a][idx]
        h = np.diff(mesh.nodes[a])[idx]
        coords.append(s)
        cells.append(idx)
        refs.append((s - node_lo) / h)
    return coords, cells, refs


def sample_velocity(space: VelocitySpace, u: np.ndarray, m_per_axis,
                    deriv=False):
    """Sample the discrete velocity on a uniform cell-centered grid.

    Points sit at (j + 1/2) * L / m along each axis so none falls on a face.
    Returns (coords, values) with values of shape (*m, d); with deriv=True
    also the velocity gradient of shape (*m, d, d).
    """
    mesh, d, k = space.mesh, space.dim, space.k
    m = tuple(int(x) for x in m_per_axis)
    coords, cell_idx, refs = _grid_axis_layout(mesh, m)

    # per-axis 1D basis values at every sample coordinate
    nv = [space.normal_basis.eval(refs[a], 0) for a in range(d)]
    mv = [space.tangent_basis.eval(refs[a], 0) for a in range(d)]
    if deriv:
        nd = [space.normal_basis.eval(refs[a], 1) for a in range(d)]
        md = [space.tangent_basis.eval(refs[a], 1) for a in range(d)]

    # contiguous sample-index ranges per cell along each axis
    slices = []
    for a in range(d):
        edges = np.searchsorted(cell_idx[a], np.arange(mesh.cells_per_axis[a] + 1))
        slices.append([slice(edges[i], edges[i + 1])
                       for i in range(mesh.cells_per_axis[a])])

    loc = local_coefficients(space, u)
    values = np.zeros(m + (d,))
    grads = np.zeros(m + (d, d)) if deriv else None

    # per component: local coefficients as a tensor with the normal axis first
    comp_rows = []
    per_comp = (k + 2) * (k + 1) ** (d - 1)
    for c in range(d):
        comp_rows.append(slice(c * per_comp, (c + 1) * per_comp))

    for cell in range(mesh.n_cells):
        index = space.mesh.cell_index[cell]
        sl = tuple(slices[a][index[a]] for a in range(d))
        if any(s.start == s.stop for s in sl):
            continue
        h = mesh.cell_h[cell]
        detJ = float(np.prod(h))
        for c in range(d):
            t_axes = [e for e in range(d) if e != c]
            shape = (k + 2,) + (k + 1,) * (d - 1)
            C = loc[cell, comp_rows[c]].reshape(shape)
            # move the normal factor into grid-axis order (c, *t_axes) -> (0..d-1)
            order = [c] + t_axes
            C = np.moveaxis(C, range(d), order)

            def contract(mats):
                out = C
                for a in range(d):
                    out = np.tensordot(out, mats[a], axes=([0], [0]))
                return out

            base = [nv[a][:, sl[a]] if a == c else mv[a][:, sl[a]] for a in range(d)]
            values[sl + (c,)] += contract(base) * (h[c] / detJ)
            if deriv:
                for e in range(d):
                    mats = list(base)
                    mats[e] = (nd[e] if e == c else md[e])[:, sl[e]]
                    grads[sl + (c, e)] += contract(mats) * (h[c] / detJ) / h[e]

    if deriv:
        return coords, values, grads
    return coords, values
