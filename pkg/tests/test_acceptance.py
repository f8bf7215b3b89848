"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  The long implicit-LES
runs (criterion 9) dominate the runtime (tens of minutes).
"""

import math

import numpy as np
import pytest

from hdivles import diagnostics as dg
from hdivles import fespace as fes
from hdivles import forms, timestepping as ts
from hdivles.cases import channel, ke_decay_rate, lattice2d, lattice3d, tgv3d
from hdivles.cli import observed_orders, temporal_convergence
from hdivles.timestepping import FieldState, FrozenLUSolver, SchemeConfig


def report(criterion, ok, detail):
    print(f"\n[criterion {criterion:>2}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {criterion}: {detail}"


# ---------------------------------------------------------------------------
# shared runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def lattice_k4_run():
    """Criterion-5 configuration; also the k=4 entry of criterion 1."""
    case = lattice2d(1e-2)
    prob = ts.discretize(case, k=4, cells=8)
    cfg = SchemeConfig(scheme="bdf2", dt=1e-3, t_end=0.1)
    return case, ts.run(prob, cfg, record_every=5)


@pytest.fixture(scope="module")
def tgv_run():
    """Criterion-9b configuration; also the tgv entry of criterion 1."""
    case = tgv3d(1600.0)
    prob = ts.discretize(case, k=1, cells=8)
    cfg = SchemeConfig(scheme="bdf2", dt=2.5e-2, t_end=14.0)
    return case, ts.run(prob, cfg, record_every=20, with_errors=False)


@pytest.fixture(scope="module")
def iles_lattice_run():
    """Criterion-9a: vanishing viscosity planar lattice flow to t = 30."""
    case = lattice2d(1e-6)
    prob = ts.discretize(case, k=4, cells=8)
    cfg = SchemeConfig(scheme="be", dt=1e-2, t_end=30.0)
    return case, ts.run(prob, cfg, record_every=25)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_criterion_1_exact_divergence_freeness(lattice_k4_run, tgv_run):
    worst = {}

    _, res5 = lattice_k4_run
    worst["lattice2d k=4"] = max(r.div_max for r in res5.records)

    prob = ts.discretize(lattice2d(1e-2), k=2, cells=8)
    res = ts.run(prob, SchemeConfig(scheme="bdf2", dt=5e-3, t_end=5e-2),
                 record_every=1)
    worst["lattice2d k=2"] = max(r.div_max for r in res.records)

    prob = ts.discretize(lattice3d(5e-4), k=1, cells=4)
    res = ts.run(prob, SchemeConfig(scheme="bdf2", dt=5e-3, t_end=5e-2),
                 record_every=1, with_errors=False)
    worst["lattice3d k=1"] = max(r.div_max for r in res.records)

    _, res_tgv = tgv_run
    worst["tgv3d k=1"] = max(r.div_max for r in res_tgv.records)

    case = channel(H=1.0, force=1.0, nu=1.0, laminar=True, dim=3)
    prob = ts.discretize(case, k=2, cells=(2, 8, 2))
    res = ts.run(prob, SchemeConfig(scheme="be", dt=1e-2, t_end=0.1),
                 record_every=1, with_errors=False)
    worst["channel laminar k=2"] = max(r.div_max for r in res.records)

    overall = max(worst.values())
    report(1, overall <= 1e-9,
           "max scaled ||B^T u||_inf over all benchmark runs = "
           + ", ".join(f"{k}: {v:.2e}" for k, v in worst.items()))


def test_criterion_2_sip_coercivity():
    rng = np.random.default_rng(2024)
    violations = 0
    margin = np.inf
    for k in (1, 2):
        prob = ts.discretize(lattice2d(1e-2), k=k, cells=4)
        A, nu = prob.ops.A, prob.case.nu
        for _ in range(200):
            v = rng.standard_normal(prob.ops.n_u)
            lhs = v @ (A @ v)
            bound = 0.5 * nu * forms.compute_norms(
                prob.vel, v, sigma=prob.ops.sigma).norm_1h ** 2
            margin = min(margin, lhs / bound)
            if lhs < bound:
                violations += 1
    report(2, violations == 0,
           f"0 required violations; observed {violations} "
           f"(min a_h(v,v) / (nu/2 ||v||_1h^2) = {margin:.3f})")


def test_criterion_3_upwind_identity():
    rng = np.random.default_rng(7)
    worst = 0.0
    for k in (1, 2):
        prob = ts.discretize(lattice2d(1e-2), k=k, cells=4)
        shared = FrozenLUSolver()
        for _ in range(50):
            b = ts.leray_project(prob.ops, rng.standard_normal(prob.ops.n_u),
                                 solver=shared)
            v = rng.standard_normal(prob.ops.n_u)
            C = prob.ops.convection(b)
            lhs = v @ (C @ v)
            rhs = forms.upwind_seminorm_sq(prob.vel, v, b)
            worst = max(worst, abs(lhs - rhs) / (1.0 + abs(rhs)))
    report(3, worst <= 1e-11,
           f"max relative discrepancy over 100 div-free pairs = {worst:.2e}")


def test_criterion_4_discrete_energy_balance():
    prob = ts.discretize(lattice2d(1e-3), k=2, cells=8)
    cfg = SchemeConfig(scheme="be", dt=2e-3, t_end=0.2)   # 100 steps
    res = ts.run(prob, cfg, record_every=1)

    scale = max(max(s.eps_visc for s in res.stats), 1.0)
    budget = max(s.budget_residual for s in res.stats) / scale
    kes = [r.ke for r in res.records]
    monotone = all(b <= a + 1e-14 for a, b in zip(kes, kes[1:]))
    t = np.array([r.t for r in res.records])
    diss = np.array([0.5 * r.eps_visc + r.eps_upw for r in res.records])
    cumulative = float(np.trapezoid(diss, t))

    ok = budget <= 1e-10 and monotone and cumulative <= kes[0]
    report(4, ok,
           f"per-step budget residual {budget:.2e} (<= 1e-10), KE monotone: "
           f"{monotone}, cumulative dissipation {cumulative:.4f} <= KE(0) = {kes[0]:.4f}")


def test_criterion_5_exact_solution_accuracy(lattice_k4_run):
    case, res = lattice_k4_run
    rate = ke_decay_rate(case.nu)    # 16 pi^2 nu: the PDE-consistent KE rate
    ke0 = res.records[0].ke
    err_max = max(r.err_l2 for r in res.records)
    ke_rel = max(abs(r.ke - ke0 * math.exp(-rate * r.t))
                 / (ke0 * math.exp(-rate * r.t)) for r in res.records)

    ke_ok = ke_rel <= 1e-4
    err_ok = err_max <= 1e-4
    report(5, err_ok and ke_ok,
           f"max ||u_h - u||_L2 = {err_max:.3e} against the required 1e-4 "
           f"(unattainable at k=4, N=8: the best approximation of u0 in this "
           f"velocity space already has error 1.33e-4; see the decisions "
           f"notes); KE tracks the exact decay to {ke_rel:.2e} relative "
           f"(<= 1e-4, with the decay exponent fixed by the momentum-equation "
           f"residual)")


def test_criterion_6_convergence_orders():
    case_nu = 1e-2
    spatial = {}
    for k in (1, 2):
        errs = []
        for n in (4, 8, 16):
            prob = ts.discretize(lattice2d(case_nu), k=k, cells=n)
            cfg = SchemeConfig(scheme="bdf2", dt=5e-4, t_end=0.05)
            res = ts.run(prob, cfg, record_every=0)
            errs.append(res.records[-1].err_l2)
        spatial[k] = observed_orders(errs)[-1]

    dts = [4e-3, 2e-3, 1e-3]
    _, _, orders_t = temporal_convergence("lattice2d", dts, nu=1e-1, k=3,
                                          n=6, t_end=0.1, scheme="bdf2")
    temporal_order = min(orders_t)

    ok = spatial[1] >= 1.7 and spatial[2] >= 2.7 and temporal_order >= 1.8
    report(6, ok,
           f"spatial L2 orders k=1: {spatial[1]:.2f} (>= 1.7), "
           f"k=2: {spatial[2]:.2f} (>= 2.7); BDF2 temporal order "
           f"{temporal_order:.2f} (>= 1.8)")


def test_criterion_7_pressure_robustness():
    def psi(x):
        return np.sin(2 * np.pi * x[:, 0]) * np.cos(2 * np.pi * x[:, 1])

    def gradpsi(t, x):
        g = np.zeros_like(x)
        g[:, 0] = 2 * np.pi * np.cos(2 * np.pi * x[:, 0]) * np.cos(2 * np.pi * x[:, 1])
        g[:, 1] = -2 * np.pi * np.sin(2 * np.pi * x[:, 0]) * np.sin(2 * np.pi * x[:, 1])
        return g

    prob = ts.discretize(lattice2d(1e-2), k=2, cells=8)
    proj = fes.interpolate_pressure(prob.prs, psi).ravel()
    proj -= (prob.ops.mean_p @ proj) / prob.ops.mean_p.sum()

    # twin Stokes solves
    f0 = prob.ops.load(lambda t, x: np.stack(
        [np.sin(2 * np.pi * x[:, 1]), np.cos(2 * np.pi * x[:, 0])], -1))
    u_a, p_a = ts.solve_stokes(prob.ops, f0)
    u_b, p_b = ts.solve_stokes(prob.ops, f0 + prob.ops.load(gradpsi))
    du_stokes = np.abs(u_a - u_b).max() / max(1.0, np.abs(u_a).max())
    dp_stokes = np.abs((p_b - p_a) - proj).max()

    # twin 20-step transient runs
    cfg = SchemeConfig(scheme="be", dt=1e-3, t_end=0.02)
    case_a = lattice2d(1e-2)
    res_a = ts.run(ts.discretize(case_a, k=2, cells=8), cfg, record_every=0)
    case_b = lattice2d(1e-2)
    case_b.f = gradpsi
    res_b = ts.run(ts.discretize(case_b, k=2, cells=8), cfg, record_every=0)
    ua, ub = res_a.final_state.u, res_b.final_state.u
    du_ns = np.abs(ua - ub).max() / max(1.0, np.abs(ua).max())
    dp_ns = np.abs((res_b.final_state.p - res_a.final_state.p) - proj).max()

    ok = du_stokes <= 1e-9 and du_ns <= 1e-9 and dp_stokes <= 1e-8 and dp_ns <= 1e-8
    report(7, ok,
           f"velocity shifts: stokes {du_stokes:.2e}, transient {du_ns:.2e} "
           f"(<= 1e-9); pressure minus projected potential: stokes "
           f"{dp_stokes:.2e}, transient {dp_ns:.2e} (<= 1e-8)")


def test_criterion_8_laminar_channel():
    case = channel(H=1.0, force=1.0, nu=1.0, laminar=True, dim=3)
    prob = ts.discretize(case, k=2, cells=(2, 8, 2))
    u, p = ts.solve_stokes(prob.ops, prob.ops.load(case.force))
    st = FieldState(t=0.0, u=u, p=p)
    stats = dg.channel_stats(prob.vel, [(0.0, st)], case.nu, case.params["H"])

    profile = case.params["F"] * (case.params["H"] ** 2 - stats.x2 ** 2) / (2 * case.nu)
    prof_err = np.abs(stats.u_mean - profile).max()
    utau_err = abs(stats.u_tau - math.sqrt(case.params["F"] * case.params["H"]))

    ok = prof_err <= 1e-8 and utau_err <= 1e-8
    report(8, ok,
           f"max |<u1> - poiseuille| = {prof_err:.2e} (<= 1e-8), "
           f"|U_tau - sqrt(F H)| = {utau_err:.2e} (<= 1e-8); "
           f"Re_tau = {stats.re_tau:.3f} (turbulent statistics not asserted)")


def test_criterion_9a_lattice_breakdown(iles_lattice_run):
    case, res = iles_lattice_run
    rate = ke_decay_rate(case.nu)
    ke0 = res.records[0].ke
    errs = np.array([r.err_l2 for r in res.records])
    ke_dep = np.array([abs(r.ke / (ke0 * math.exp(-rate * r.t)) - 1.0)
                       for r in res.records])

    # exponential-growth event: a contiguous strictly increasing stretch of
    # records gaining at least two orders of magnitude
    best_gain, gain, start = 0.0, 1.0, 0
    for i in range(1, len(errs)):
        if errs[i] > errs[i - 1]:
            gain = errs[i] / errs[start]
            best_gain = max(best_gain, gain)
        else:
            start = i
    growth_event = best_gain >= 100.0
    departure = ke_dep.max() > 0.05

    ok = growth_event and departure
    report(9, ok,
           f"(a) error growth event: strictly increasing stretch gains "
           f"{best_gain:.1e}x (>= 1e2); KE departs from exact decay by "
           f"{100 * ke_dep.max():.1f}% (> 5%) -- part (b) reported separately")


def test_criterion_9b_tgv_dissipation_peak(tgv_run):
    _, res = tgv_run
    total = np.array([r.eps_visc + r.eps_upw for r in res.records])
    times = np.array([r.t for r in res.records])
    t_peak = float(times[np.argmax(total)])
    ok = 6.0 <= t_peak <= 12.0
    report(9, ok,
           f"(b) total dissipation rate peaks at t = {t_peak:.2f} "
           f"(required within [6, 12]); peak value {total.max():.4f}")


def test_criterion_10_spectrum_sanity():
    # Parseval on a generic state
    prob = ts.discretize(lattice2d(1e-2), k=2, cells=4)
    rng = np.random.default_rng(5)
    u = rng.standard_normal(prob.ops.n_u)
    spec = dg.spectrum(prob.vel, u)
    parseval = abs(spec.energy.sum() - spec.grid_ke) / max(spec.grid_ke, 1e-300)

    # single-mode concentration
    from hdivles.mesh import PERIODIC, build_cartesian_mesh
    mesh = build_cartesian_mesh(2, (4, 4), ((0, 1), (0, 1)),
                                (PERIODIC, PERIODIC))
    vel = fes.build_velocity_space(mesh, 6)
    u1 = fes.interpolate_velocity(vel, lambda x: np.stack(
        [np.sin(2 * np.pi * x[:, 1]), np.zeros(len(x))], -1))
    s1 = dg.spectrum(vel, u1)
    off_shell = np.abs(np.delete(s1.energy, 1)).max() / s1.energy.sum()

    ok = parseval <= 1e-6 and off_shell <= 1e-10
    report(10, ok,
           f"Parseval defect {parseval:.2e} (<= 1e-6); single-mode field "
           f"leaks {off_shell:.2e} outside its shell; the -5/3 range is not "
           f"asserted at this Reynolds number")
