"""Scalar and field observables: energies, dissipation budget, errors,
shell-averaged spectra, Q-criterion samples, and channel wall statistics.

Curls and their gradients are evaluated elementwise (broken); facet jumps are
not added to enstrophy or palinstrophy.  The energy budget residual is the
scheme-exact per-step identity carried over from the stepper, so it is a
machine-precision check rather than a time-discretization estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import forms
from .fespace import (VelocitySpace, local_coefficients, sample_velocity,
                      velocity_at_quadrature)
from .mesh import PERIODIC, WALL

__all__ = [
    "DiagnosticsRecord", "SpectrumRecord", "ChannelStats", "record",
    "error_vs_exact", "spectrum", "q_criterion", "vorticity_samples",
    "channel_stats",
]


@dataclass
class DiagnosticsRecord:
    t: float
    ke: float
    enstrophy: float
    palinstrophy: float
    eps_visc: float
    eps_upw: float
    dke_dt: float
    budget_residual: float
    div_max: float
    err_l2: float = math.nan
    err_h1: float = math.nan

    FIELDS = ("t", "ke", "enstrophy", "palinstrophy", "eps_visc", "eps_upw",
              "dke_dt", "budget_residual", "div_max", "err_l2", "err_h1")

    def astuple(self):
        return tuple(getattr(self, name) for name in self.FIELDS)


# ---------------------------------------------------------------------------
# broken curl quantities
# ---------------------------------------------------------------------------

def _curl_integrals(vel: VelocitySpace, u):
    """(enstrophy, palinstrophy) from elementwise curl and its gradient."""
    mesh, d = vel.mesh, vel.dim
    h = mesh.cell_h
    detJ = np.prod(h, axis=1)
    s = h / detJ[:, None]
    wq = vel.volume_rule.weights
    loc = local_coefficients(vel, u)

    grads = np.einsum("Kj,jqce,Kc,Ke->Kqce", loc, vel.Gr, s, 1.0 / h, optimize=True)
    H = vel.hessian_table
    hess = np.einsum("Kj,jqcef,Kc,Ke,Kf->Kqcef", loc, H, s, 1.0 / h, 1.0 / h,
                     optimize=True)

    if d == 2:
        omega = grads[:, :, 1, 0] - grads[:, :, 0, 1]
        ens = 0.5 * float(np.einsum("Kq,Kq,q,K->", omega, omega, wq, detJ))
        gomega = hess[:, :, 1, 0, :] - hess[:, :, 0, 1, :]
        pal = 0.5 * float(np.einsum("Kqe,Kqe,q,K->", gomega, gomega, wq, detJ))
    else:
        omega = np.stack([
            grads[:, :, 2, 1] - grads[:, :, 1, 2],
            grads[:, :, 0, 2] - grads[:, :, 2, 0],
            grads[:, :, 1, 0] - grads[:, :, 0, 1],
        ], axis=-1)
        ens = 0.5 * float(np.einsum("Kqc,Kqc,q,K->", omega, omega, wq, detJ))
        gomega = np.stack([
            hess[:, :, 2, 1, :] - hess[:, :, 1, 2, :],
            hess[:, :, 0, 2, :] - hess[:, :, 2, 0, :],
            hess[:, :, 1, 0, :] - hess[:, :, 0, 1, :],
        ], axis=-2)
        pal = 0.5 * float(np.einsum("Kqce,Kqce,q,K->", gomega, gomega, wq, detJ))
    return ens, pal


# ---------------------------------------------------------------------------
# per-record observables
# ---------------------------------------------------------------------------

def record(state, ops, exact=None, step_stats=None, prev_record=None) -> DiagnosticsRecord:
    """All scalar observables of one time level.

    dke_dt is the backward difference of recorded kinetic energies;
    budget_residual is taken from the step statistics when available.
    """
    vel = ops.vel
    u = state.u
    ke = 0.5 * float(u @ (ops.M @ u))
    ens, pal = _curl_integrals(vel, u)
    eps_visc = float(u @ (ops.A @ u))
    eps_upw = forms.upwind_seminorm_sq(vel, u, u)
    div_max = float(np.abs(ops.B.T @ u).max()) / max(1.0, math.sqrt(2.0 * ke))

    dke = 0.0
    if prev_record is not None and state.t > prev_record.t:
        dke = (ke - prev_record.ke) / (state.t - prev_record.t)
    elif step_stats is not None:
        dke = step_stats.dke_dt
    budget = step_stats.budget_residual if step_stats is not None else 0.0

    err_l2, err_h1 = math.nan, math.nan
    if exact is not None:
        err_l2, err_h1 = error_vs_exact(state, ops, exact)

    return DiagnosticsRecord(
        t=state.t, ke=ke, enstrophy=ens, palinstrophy=pal,
        eps_visc=eps_visc, eps_upw=eps_upw, dke_dt=dke,
        budget_residual=budget, div_max=div_max,
        err_l2=err_l2, err_h1=err_h1)


def error_vs_exact(state, ops, exact=None):
    """(L2, broken H1) velocity errors against a closed-form solution.

    The broken H1 error adds the h_E^-1-weighted tangential jumps of the
    error over all faces; the exact field is single-valued, so on interior
    faces only the discrete jump survives while wall faces see the trace
    difference.
    """
    if exact is None:
        raise ValueError("no exact solution attached to this case")
    vel = ops.vel
    mesh, d = vel.mesh, vel.dim
    t = state.t
    h = mesh.cell_h
    detJ = np.prod(h, axis=1)
    s = h / detJ[:, None]
    wq = vel.volume_rule.weights

    pts = mesh.cell_lo[:, None, :] + h[:, None, :] * vel.volume_rule.points[None, :, :]
    flat = pts.reshape(-1, d)
    uex = np.asarray(exact.u(t, flat), float).reshape(mesh.n_cells, -1, d)
    gex = np.asarray(exact.grad(t, flat), float).reshape(mesh.n_cells, -1, d, d)

    uh, gh = velocity_at_quadrature(vel, state.u, order=1)
    derr = uh - uex
    err_l2_sq = float(np.einsum("Kqc,Kqc,q,K->", derr, derr, wq, detJ))
    gerr = gh - gex
    err_h1_sq = float(np.einsum("Kqce,Kqce,q,K->", gerr, gerr, wq, detJ))

    fw = vel.face_rule.weights
    loc = local_coefficients(vel, state.u)
    for axis in range(d):
        groups = forms._face_groups(vel)[axis]
        tmask = np.ones(d)
        tmask[axis] = 0.0
        g = groups["interior"]
        if len(g["fid"]):
            L, R = g["left"], g["right"]
            vL = np.einsum("Fj,jqc,Fc->Fqc", loc[L], vel.FV[(axis, 1)], s[L], optimize=True)
            vR = np.einsum("Fj,jqc,Fc->Fqc", loc[R], vel.FV[(axis, 0)], s[R], optimize=True)
            jt = (vL - vR) * tmask
            err_h1_sq += float(np.einsum("Fqc,Fqc,q,F->", jt, jt, fw,
                                         g["area"] / g["h_e"]))
        g = groups["wall"]
        if len(g["fid"]):
            cells, sides = g["cell"], g["side"]
            T = np.stack([vel.FV[(axis, int(sd))] for sd in sides])
            vT = np.einsum("Fjqc,Fj,Fc->Fqc", T, loc[cells], s[cells], optimize=True)
            ref = np.stack([vel.face_points[(axis, int(sd))] for sd in sides])
            phys = mesh.cell_lo[cells][:, None, :] + h[cells][:, None, :] * ref
            uex_f = np.asarray(exact.u(t, phys.reshape(-1, d)), float).reshape(vT.shape)
            jt = (vT - uex_f) * tmask
            err_h1_sq += float(np.einsum("Fqc,Fqc,q,F->", jt, jt, fw,
                                         g["area"] / g["h_e"]))

    return math.sqrt(err_l2_sq), math.sqrt(err_h1_sq)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass
class SpectrumRecord:
    t: float
    kappa: np.ndarray      # integer shell centers
    energy: np.ndarray     # shell energies, sum = sampled-grid kinetic energy
    grid_ke: float


def spectrum(vel: VelocitySpace, u, t=0.0, samples_per_axis=None) -> SpectrumRecord:
    """Shell-averaged kinetic energy spectrum on a uniform sampling grid.

    The velocity is sampled on an M^d grid (default M = N (k+1) per axis),
    transformed per component, and |u_hat|^2 is summed over integer-lattice
    shells m <= |n| < m+1.  Normalization satisfies Parseval on the sampled
    field: sum_m E(m) = 0.5 |Omega| mean(|u|^2).
    """
    mesh = vel.mesh
    if not mesh.fully_periodic:
        raise ValueError("energy spectra need a fully periodic domain")
    d = mesh.dim
    if samples_per_axis is None:
        m = tuple(n * (vel.k + 1) for n in mesh.cells_per_axis)
    elif np.isscalar(samples_per_axis):
        m = (int(samples_per_axis),) * d
    else:
        m = tuple(int(x) for x in samples_per_axis)

    _, vals = sample_velocity(vel, u, m)
    volume = float(np.prod([b - a for a, b in mesh.domain_box]))
    npts = float(np.prod(m))

    density = np.zeros(m)
    for c in range(d):
        uh = np.fft.fftn(vals[..., c]) / npts
        density += np.abs(uh) ** 2
    density *= 0.5 * volume

    freqs = [np.fft.fftfreq(m[a], d=1.0 / m[a]) for a in range(d)]
    grids = np.meshgrid(*freqs, indexing="ij")
    radius = np.sqrt(sum(g ** 2 for g in grids))
    shell = np.floor(radius).astype(int)
    n_shells = shell.max() + 1
    energy = np.bincount(shell.ravel(), weights=density.ravel(), minlength=n_shells)

    grid_ke = 0.5 * volume * float(np.mean(np.sum(vals ** 2, axis=-1)))
    return SpectrumRecord(t=t, kappa=np.arange(n_shells), energy=energy,
                          grid_ke=grid_ke)


# ---------------------------------------------------------------------------
# sampled vorticity and Q-criterion
# ---------------------------------------------------------------------------

def vorticity_samples(vel: VelocitySpace, u, m_per_axis):
    """Broken curl on a uniform sampling grid: (*m,) in 2D, (*m, 3) in 3D."""
    _, _, grads = sample_velocity(vel, u, m_per_axis, deriv=True)
    if vel.dim == 2:
        return grads[..., 1, 0] - grads[..., 0, 1]
    return np.stack([
        grads[..., 2, 1] - grads[..., 1, 2],
        grads[..., 0, 2] - grads[..., 2, 0],
        grads[..., 1, 0] - grads[..., 0, 1],
    ], axis=-1)


def q_criterion(vel: VelocitySpace, u, m_per_axis):
    """Q = (||antisymmetric part||_F^2 - ||symmetric part||_F^2) / 2 of the
    sampled velocity gradient; only meaningful for 3D states."""
    if vel.dim != 3:
        raise ValueError("the Q-criterion is only defined for 3D states")
    _, _, grads = sample_velocity(vel, u, m_per_axis, deriv=True)
    S = 0.5 * (grads + np.swapaxes(grads, -1, -2))
    W = 0.5 * (grads - np.swapaxes(grads, -1, -2))
    return 0.5 * (np.sum(W ** 2, axis=(-2, -1)) - np.sum(S ** 2, axis=(-2, -1)))


# ---------------------------------------------------------------------------
# channel statistics
# ---------------------------------------------------------------------------

@dataclass
class ChannelStats:
    """Wall-unit statistics of a channel run, averaged over planes and time."""

    x2: np.ndarray
    y_plus: np.ndarray
    u_mean: np.ndarray
    u_plus: np.ndarray
    uv_stress: np.ndarray
    uv_stress_plus: np.ndarray
    rms: np.ndarray              # (n_points, dim)
    rms_plus: np.ndarray
    tau_w: float
    u_tau: float
    re_tau: float
    nu: float
    n_samples: int
    window: tuple


def channel_stats(vel: VelocitySpace, states, nu: float, half_width: float,
                  window=None) -> ChannelStats:
    """Average a stream of states over time and the homogeneous directions.

    Geometry contract: walls on axis 1, all other axes periodic.  Averages
    are taken at the Gauss points of every wall-normal mesh layer; the wall
    shear stress comes from the one-sided elementwise gradient trace at both
    walls.  `window` restricts the (t, state) stream to t in [t0, t1].
    """
    mesh, d = vel.mesh, vel.dim
    if mesh.axis_bc[1] != WALL or any(mesh.axis_bc[a] != PERIODIC
                                      for a in range(d) if a != 1):
        raise ValueError("channel statistics need walls on axis 1 and "
                         "periodic remaining axes")
    pairs = []
    for item in states:
        t, st = item if isinstance(item, tuple) else (item.t, item)
        if window is None or (window[0] <= t <= window[1]):
            pairs.append((t, st))
    if not pairs:
        raise ValueError(f"no states inside averaging window {window}")

    n1d = int(round(vel.volume_rule.n_points ** (1.0 / d)))
    q_shape = (n1d,) * d
    wq = vel.volume_rule.weights.reshape(q_shape)
    plane_axes = tuple(a for a in range(d) if a != 1)

    # plane measure of each quadrature point within its cell
    h = mesh.cell_h
    detJ = np.prod(h, axis=1)
    plane_area = float(np.prod([mesh.domain_box[a][1] - mesh.domain_box[a][0]
                                for a in plane_axes]))

    n_layers = mesh.cells_per_axis[1]
    n_prof = n_layers * n1d
    sums = {key: np.zeros(n_prof) for key in
            ("u1", "u2", "u1u1", "u2u2", "u3u3", "u1u2")}
    weight = np.zeros(n_prof)
    tau_sum = 0.0

    layer_of_cell = mesh.cell_index[:, 1]
    # profile x2 coordinates (Gauss points of each layer)
    x2_nodes = mesh.nodes[1]
    xi = vel.volume_rule.points[:, 1].reshape(q_shape)
    xi_1d = xi[tuple(0 if a != 1 else slice(None) for a in range(d))]
    x2 = np.concatenate([x2_nodes[j] + np.diff(x2_nodes)[j] * xi_1d
                         for j in range(n_layers)])

    # tensor weights collapsed onto the wall-normal axis leave just w2
    # (the per-axis weights each sum to one)
    w_plane = wq.sum(axis=plane_axes)
    for t, st in pairs:
        vals = velocity_at_quadrature(vel, st.u)
        vals = vals.reshape((mesh.n_cells,) + q_shape + (d,))
        for cell in range(mesh.n_cells):
            j = layer_of_cell[cell]
            cell_plane = np.prod([h[cell][a] for a in plane_axes])
            v = vals[cell]
            w = wq
            u1 = (v[..., 0] * w).sum(axis=plane_axes)
            u2 = (v[..., 1] * w).sum(axis=plane_axes)
            u1u1 = (v[..., 0] ** 2 * w).sum(axis=plane_axes)
            u2u2 = (v[..., 1] ** 2 * w).sum(axis=plane_axes)
            u3u3 = (v[..., 2] ** 2 * w).sum(axis=plane_axes) if d == 3 else np.zeros(n1d)
            u1u2 = (v[..., 0] * v[..., 1] * w).sum(axis=plane_axes)
            sl = slice(j * n1d, (j + 1) * n1d)
            scale = cell_plane / w_plane
            sums["u1"][sl] += u1 * scale
            sums["u2"][sl] += u2 * scale
            sums["u1u1"][sl] += u1u1 * scale
            sums["u2u2"][sl] += u2u2 * scale
            sums["u3u3"][sl] += u3u3 * scale
            sums["u1u2"][sl] += u1u2 * scale
            weight[sl] += cell_plane
        tau_sum += _wall_shear(vel, st.u, nu, plane_area)

    n_samples = len(pairs)
    for key in sums:
        sums[key] /= weight
    tau_w = tau_sum / n_samples

    u_mean = sums["u1"]
    uv = sums["u1u2"] - sums["u1"] * sums["u2"]
    rms = np.stack([
        np.sqrt(np.maximum(sums["u1u1"] - sums["u1"] ** 2, 0.0)),
        np.sqrt(np.maximum(sums["u2u2"] - sums["u2"] ** 2, 0.0)),
    ] + ([np.sqrt(np.maximum(sums["u3u3"], 0.0))] if d == 3 else []), axis=-1)

    u_tau = math.sqrt(max(tau_w, 0.0))
    re_tau = u_tau * half_width / nu
    center = 0.5 * (mesh.domain_box[1][0] + mesh.domain_box[1][1])
    y = half_width - np.abs(x2 - center)
    y_plus = u_tau * y / nu if u_tau > 0 else np.zeros_like(y)
    inv_ut = 1.0 / u_tau if u_tau > 0 else 0.0

    return ChannelStats(
        x2=x2, y_plus=y_plus, u_mean=u_mean, u_plus=u_mean * inv_ut,
        uv_stress=uv, uv_stress_plus=uv * inv_ut ** 2,
        rms=rms, rms_plus=rms * inv_ut,
        tau_w=tau_w, u_tau=u_tau, re_tau=re_tau, nu=nu,
        n_samples=n_samples,
        window=(pairs[0][0], pairs[-1][0]))


def _wall_shear(vel, u, nu, plane_area):
    """nu * d<u1>/dy averaged one-sidedly over both walls."""
    mesh, d = vel.mesh, vel.dim
    h = mesh.cell_h
    detJ = np.prod(h, axis=1)
    s = h / detJ[:, None]
    fw = vel.face_rule.weights
    loc = local_coefficients(vel, u)
    g = forms._face_groups(vel)[1]["wall"]
    total = 0.0
    for F in range(len(g["fid"])):
        cell, side, orient = g["cell"][F], int(g["side"][F]), g["orient"][F]
        dn = np.einsum("j,jq->q", loc[cell],
                       vel.FDn[(1, side)][:, :, 0]) * s[cell, 0] / h[cell, 1]
        # wall-shear contribution: du1/dy at the bottom wall, -du1/dy at the top
        total += -orient * float((dn * fw).sum()) * g["area"][F]
    return nu * total / (2.0 * plane_area)
