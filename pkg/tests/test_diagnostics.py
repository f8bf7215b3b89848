import math

import numpy as np
import pytest

from hdivles import diagnostics as dg
from hdivles import fespace as fes
from hdivles import forms, timestepping as ts
from hdivles.cases import channel, lattice2d, lattice3d
from hdivles.mesh import PERIODIC, WALL, build_cartesian_mesh
from hdivles.timestepping import FieldState, SchemeConfig


# ---------------------------------------------------------------------------
# scalar records
# ---------------------------------------------------------------------------

def test_zero_state_record_is_zero(lattice_problem_k1):
    ops = lattice_problem_k1.ops
    st = FieldState(t=0.0, u=np.zeros(ops.n_u), p=np.zeros(ops.n_p))
    rec = dg.record(st, ops)
    for name in ("ke", "enstrophy", "palinstrophy", "eps_visc", "eps_upw",
                 "dke_dt", "budget_residual", "div_max"):
        assert getattr(rec, name) == 0.0


def test_lattice_energy_and_enstrophy_oracles():
    """Closed forms on (-1,1)^2: KE = 1 and enstrophy = 8 pi^2.

    The vorticity carries an extra factor 4 pi, so resolving enstrophy to
    1e-6 takes k = 8 where the energy is already exact at k = 6.
    """
    case = lattice2d(1e-2)
    mesh = build_cartesian_mesh(2, (8, 8), ((-1, 1), (-1, 1)),
                                (PERIODIC, PERIODIC))
    vel = fes.build_velocity_space(mesh, 8)
    prs = fes.build_pressure_space(mesh, 8)
    ops = forms.assemble_operators(vel, prs, case.nu)
    u = fes.interpolate_velocity(vel, case.u0)
    rec = dg.record(FieldState(t=0.0, u=u, p=np.zeros(ops.n_p)), ops)
    assert abs(rec.ke - 1.0) <= 1e-8
    assert abs(rec.enstrophy - 8 * math.pi ** 2) <= 1e-6
    assert rec.palinstrophy > 0.0
    assert rec.div_max <= 1e-12


def test_lattice3d_energy_oracle():
    case = lattice3d(5e-4)
    prob = ts.discretize(case, k=4, cells=4)
    rec = dg.record(prob.state0, prob.ops)
    assert abs(rec.ke - (0.25 + 1 / (16 * math.pi ** 2))) <= 1e-8


def test_record_errors_require_exact_solution(lattice_problem_k1):
    st = lattice_problem_k1.state0
    with pytest.raises(ValueError):
        dg.error_vs_exact(st, lattice_problem_k1.ops, None)


# ---------------------------------------------------------------------------
# errors against exact solutions
# ---------------------------------------------------------------------------

def test_error_vanishes_for_representable_exact_solution():
    case = channel(H=1.0, force=1.0, nu=1.0, laminar=True, dim=2)
    prob = ts.discretize(case, k=2, cells=(2, 8))
    u, p = ts.solve_stokes(prob.ops, prob.ops.load(case.force))
    err_l2, err_h1 = dg.error_vs_exact(FieldState(t=0.0, u=u, p=p),
                                       prob.ops, case.exact)
    assert err_l2 <= 1e-12
    assert err_h1 <= 1e-11


def test_error_growth_in_underresolved_regime():
    """At vanishing viscosity the error climbs away from its initial value
    and never recovers (the strictly-increasing breakdown stretch itself is
    exercised by the long acceptance run)."""
    case = lattice2d(1e-6)
    prob = ts.discretize(case, k=2, cells=8)
    cfg = SchemeConfig(scheme="bdf2", dt=5e-3, t_end=2.0)
    res = ts.run(prob, cfg, record_every=40)
    errs = [r.err_l2 for r in res.records]
    assert errs[1] > errs[0]
    assert all(e > errs[0] for e in errs[1:])


def test_halving_h_reduces_short_time_error():
    case = lattice2d(1e-2)
    errs = []
    for n in (4, 8):
        prob = ts.discretize(case, k=1, cells=n)
        cfg = SchemeConfig(scheme="bdf2", dt=1e-3, t_end=0.02)
        res = ts.run(prob, cfg, record_every=0)
        errs.append(res.records[-1].err_l2)
    assert errs[1] <= errs[0] / 2 ** 1.7


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

def test_spectrum_single_mode():
    mesh = build_cartesian_mesh(2, (4, 4), ((0, 1), (0, 1)),
                                (PERIODIC, PERIODIC))
    vel = fes.build_velocity_space(mesh, 6)   # resolve the mode below the shell tolerance
    u = fes.interpolate_velocity(vel, lambda x: np.stack(
        [np.sin(2 * np.pi * x[:, 1]), np.zeros(len(x))], -1))
    spec = dg.spectrum(vel, u)
    total = spec.energy.sum()
    assert spec.energy[1] >= (1 - 1e-10) * total
    assert np.abs(np.delete(spec.energy, 1)).max() <= 1e-12 * total
    assert abs(total - spec.grid_ke) <= 1e-12 * total


def test_spectrum_lattice_concentrates_in_shell_two():
    # modes (+-2, +-2) on the (-1,1)^2 box: radius 2.83 falls in shell 2
    case = lattice2d(1e-2)
    mesh = build_cartesian_mesh(2, (8, 8), ((-1, 1), (-1, 1)),
                                (PERIODIC, PERIODIC))
    vel = fes.build_velocity_space(mesh, 3)
    u = fes.interpolate_velocity(vel, case.u0)
    spec = dg.spectrum(vel, u)
    assert spec.energy[2] >= 0.999 * spec.energy.sum()


def test_spectrum_parseval(lattice_problem_k2, rng):
    vel = lattice_problem_k2.vel
    u = rng.standard_normal(lattice_problem_k2.ops.n_u)
    spec = dg.spectrum(vel, u)
    assert abs(spec.energy.sum() - spec.grid_ke) <= 1e-6 * max(spec.grid_ke, 1e-300)


def test_spectrum_requires_periodic_domain():
    case = channel(H=1.0, force=1.0, nu=1.0, laminar=True, dim=2)
    prob = ts.discretize(case, k=1, cells=(4, 4))
    with pytest.raises(ValueError):
        dg.spectrum(prob.vel, prob.state0.u)


# ---------------------------------------------------------------------------
# Q-criterion
# ---------------------------------------------------------------------------

def test_q_criterion_pure_shear_is_zero():
    case = channel(H=1.0, force=1.0, nu=1.0, laminar=True, dim=3)
    mesh = build_cartesian_mesh(3, (2, 4, 2), case.domain_box, case.axis_bc)
    vel = fes.build_velocity_space(mesh, 1)
    u = fes.interpolate_velocity(vel, lambda x: np.stack(
        [x[:, 1], np.zeros(len(x)), np.zeros(len(x))], -1))
    q = dg.q_criterion(vel, u, (4, 8, 4))
    assert np.abs(q).max() <= 1e-12


def test_q_criterion_rigid_rotation_local():
    """Q = 1 for the rotation field, evaluated on local cell coefficients
    (the field carries flux through box walls, so it lives cell-locally)."""
    mesh = build_cartesian_mesh(3, (2, 2, 2), ((-1, 1),) * 3, (WALL,) * 3)
    vel = fes.build_velocity_space(mesh, 1)
    fn = lambda x: np.stack([-x[:, 1], x[:, 0], np.zeros(len(x))], -1)
    loc = fes.interpolate_local(vel, fn)
    pts = np.random.default_rng(2).uniform(0.1, 0.9, (6, 3))
    for cell in (0, 3, 7):
        _, grads, _ = fes.eval_velocity_basis(vel, cell, pts)
        G = np.einsum("j,jqce->qce", loc[cell], grads)
        S = 0.5 * (G + np.swapaxes(G, -1, -2))
        W = 0.5 * (G - np.swapaxes(G, -1, -2))
        q = 0.5 * (np.sum(W ** 2, axis=(-2, -1)) - np.sum(S ** 2, axis=(-2, -1)))
        assert np.abs(q - 1.0).max() <= 1e-12


def test_q_criterion_matches_closed_form_gradients():
    """Sampled Q against Q built from the exact velocity gradient."""
    case = lattice3d(5e-4)
    prob = ts.discretize(case, k=3, cells=4)
    m = (8, 8, 8)
    q = dg.q_criterion(prob.vel, prob.state0.u, m)
    coords, _ = fes.sample_velocity(prob.vel, prob.state0.u, m)
    X = np.stack([g.ravel() for g in np.meshgrid(*coords, indexing="ij")], -1)
    G = case.exact.grad(0.0, X).reshape(m + (3, 3))
    S = 0.5 * (G + np.swapaxes(G, -1, -2))
    W = 0.5 * (G - np.swapaxes(G, -1, -2))
    q_exact = 0.5 * (np.sum(W ** 2, axis=(-2, -1)) - np.sum(S ** 2, axis=(-2, -1)))
    scale = np.abs(q_exact).max()
    assert np.abs(q - q_exact).max() <= 2e-2 * scale


def test_q_criterion_rejects_2d(lattice_problem_k1):
    with pytest.raises(ValueError):
        dg.q_criterion(lattice_problem_k1.vel, lattice_problem_k1.state0.u,
                       (4, 4))


# ---------------------------------------------------------------------------
# channel statistics
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def laminar_channel_state():
    case = channel(H=1.0, force=1.0, nu=1.0, laminar=True, dim=3)
    prob = ts.discretize(case, k=2, cells=(2, 8, 2))
    u, p = ts.solve_stokes(prob.ops, prob.ops.load(case.force))
    return case, prob, FieldState(t=0.0, u=u, p=p)


def test_channel_stats_poiseuille(laminar_channel_state):
    case, prob, st = laminar_channel_state
    stats = dg.channel_stats(prob.vel, [(0.0, st)], case.nu, case.params["H"])
    profile = case.params["F"] * (1 - stats.x2 ** 2) / (2 * case.nu)
    assert np.abs(stats.u_mean - profile).max() <= 1e-12
    assert abs(stats.u_tau - math.sqrt(case.params["F"] * case.params["H"])) <= 1e-8
    assert abs(stats.re_tau - 1.0) <= 1e-8
    assert np.abs(stats.uv_stress).max() <= 1e-12
    # rms floors at sqrt(eps * <u^2>) from the variance cancellation
    assert np.abs(stats.rms).max() <= 1e-7
    # wall-unit profiles and monotone wall distance
    assert np.abs(stats.u_plus - stats.u_mean / stats.u_tau).max() <= 1e-12
    half = len(stats.x2) // 2
    assert np.all(np.diff(stats.y_plus[:half]) > 0)


def test_channel_stats_window_and_geometry_errors(laminar_channel_state):
    case, prob, st = laminar_channel_state
    with pytest.raises(ValueError):
        dg.channel_stats(prob.vel, [(0.0, st)], case.nu, 1.0,
                         window=(0.5, 1.0))
    lat = ts.discretize(lattice2d(1e-2), k=1, cells=4)
    with pytest.raises(ValueError):
        dg.channel_stats(lat.vel, [(0.0, lat.state0)], 1e-2, 1.0)


def test_channel_stats_averages_over_snapshots(laminar_channel_state):
    case, prob, st = laminar_channel_state
    stats1 = dg.channel_stats(prob.vel, [(0.0, st)], case.nu, 1.0)
    stats3 = dg.channel_stats(prob.vel, [(0.0, st), (1.0, st), (2.0, st)],
                              case.nu, 1.0, window=(0.0, 2.0))
    assert stats3.n_samples == 3
    assert np.abs(stats3.u_mean - stats1.u_mean).max() <= 1e-13
