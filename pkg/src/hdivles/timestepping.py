"""Time integration of the semidiscrete saddle-point system.

Both schemes are linearly implicit: the advecting field of the convection
matrix is taken from previous levels (frozen for backward Euler, the
two-level extrapolation for BDF2), so each step solves one linear
saddle-point system while the advecting field stays exactly divergence-free
and the upwind energy identity survives discretely:

    BE-IMEX:    (M/dt + A + C(u^n)) u' + B p'       = M u^n / dt + rhs
    BDF2-IMEX:  (3M/(2dt) + A + C(b)) u' + B p'     = M (4u^n - u^{n-1}) / (2dt) + rhs
                with b = 2u^n - u^{n-1};  B^T u' = 0 in both cases.

The first BDF2 step is bootstrapped with one BE step.  Systems are solved by
sparse LU; the pressure is gauged by a mean-zero constraint row/column (or a
pinned DOF).  On fully periodic domains the steady Stokes operator is also
singular on constant velocities, so the Stokes solver gauges those with
momentum-mean constraints.

Testing the scheme's momentum equation with u' yields an exact discrete
energy identity; for BE it decomposes into

    (KE' - KE)/dt + ||u'-u||_M^2/(2dt) + u'^T A u' + |u'|_{b,upw}^2 - rhs.u' = 0

whose residual is recorded per step as the energy-budget check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import forms
from .cases import CaseSpec
from .fespace import build_pressure_space, build_velocity_space, interpolate_velocity
from .forms import Operators, assemble_operators
from .mesh import build_cartesian_mesh

__all__ = [
    "SchemeConfig", "FieldState", "StepStats", "GaugeError", "DivergenceError",
    "solve_stokes", "leray_project", "step", "Problem", "discretize", "run",
    "RunResult",
]


class GaugeError(RuntimeError):
    """The linear system is singular without a pressure/velocity gauge."""


class DivergenceError(RuntimeError):
    """A solution state violated the divergence invariant (internal error)."""


@dataclass
class SchemeConfig:
    scheme: str = "bdf2"          # "be" or "bdf2"
    dt: float = 1e-3
    t_end: float = 1.0
    div_tol: float = 1e-10
    gauge: str = "mean_zero"      # "mean_zero", "pin" or "none"
    solver: str = "auto"          # "auto", "monolithic" or "schur"

    def __post_init__(self):
        if self.scheme not in ("be", "bdf2"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.solver not in ("auto", "monolithic", "schur"):
            raise ValueError(f"unknown solver {self.solver!r}")


def make_step_solver(ops, cfg: SchemeConfig):
    """Pick the per-step linear solver: monolithic frozen LU for small
    systems, the Schur iteration for large (3D-sized) ones."""
    choice = cfg.solver
    if choice == "auto":
        big = ops.n_u + ops.n_p > 9000
        choice = "schur" if (big and cfg.gauge == "mean_zero") else "monolithic"
    if choice == "schur":
        return SchurStepSolver(ops)
    return FrozenLUSolver()


@dataclass
class FieldState:
    """Velocity/pressure coefficients at one time level (+ one history level)."""

    t: float
    u: np.ndarray
    p: np.ndarray
    u_prev: Optional[np.ndarray] = None


@dataclass
class StepStats:
    """Per-step scalars of the discrete energy identity."""

    ke: float
    dke_dt: float                # (KE' - KE)/dt over the step
    increment_sq: float          # ||u' - u||_M^2 / (2 dt)   (BE only; 0 for BDF2)
    eps_visc: float              # u'^T A u'
    eps_upw: float               # u'^T C(b) u' = |u'|^2_{b,upw}
    power_in: float              # rhs . u'
    budget_residual: float
    div_residual: float


# ---------------------------------------------------------------------------
# linear algebra helpers
# ---------------------------------------------------------------------------

class FrozenLUSolver:
    """Direct solves with a reused factorization and iterative refinement.

    Successive step matrices differ only in the convection block, so the LU
    of a recent step remains an excellent preconditioner; refinement against
    it converges in a few sweeps and a fresh factorization is triggered only
    when the residual stops contracting.
    """

    def __init__(self, rtol: float = 1e-13, max_sweeps: int = 12):
        self.rtol = rtol
        self.max_sweeps = max_sweeps
        self._lu = None
        self.n_factorizations = 0

    def _factor(self, K):
        try:
            self._lu = spla.splu(K)
        except RuntimeError as exc:
            raise GaugeError(f"saddle-point factorization failed: {exc}") from exc
        self.n_factorizations += 1

    def solve(self, K, rhs):
        scale = max(float(np.abs(rhs).max()), 1e-300)
        if self._lu is not None:
            x = self._lu.solve(rhs)
            res_prev = np.inf
            for _ in range(self.max_sweeps):
                r = rhs - K @ x
                res = float(np.abs(r).max())
                if res <= self.rtol * scale:
                    return x
                if not res < 0.5 * res_prev:
                    break  # frozen factor no longer contracts
                res_prev = res
                x = x + self._lu.solve(r)
        self._factor(K)
        x = self._lu.solve(rhs)
        r = rhs - K @ x
        x = x + self._lu.solve(r)
        return x


class SchurStepSolver:
    """Saddle-point step solver for larger (3D) systems.

    The monolithic saddle matrix fills catastrophically under sparse LU,
    while the velocity block alone stays cheap.  Each step therefore solves
    the pressure Schur system by preconditioned Richardson iteration: the
    preconditioner is the exact dense Schur complement of the first step
    (dominated by the time-derivative mass term, it barely drifts), and
    velocity solves run refinement sweeps against a frozen LU of the
    velocity block that is refreshed when contraction degrades.  Pressures
    come out mean-zero through explicit projection.
    """

    def __init__(self, ops, rtol: float = 1e-13, max_outer: int = 40):
        self.ops = ops
        self.rtol = rtol
        self.max_outer = max_outer
        self.B = ops.B.tocsr()
        m = ops.mean_p
        self._mhat = m / np.linalg.norm(m)
        self._luS = None
        self._luP = None
        self._S = None
        self._alpha_built = 1.0
        self._alpha = 1.0
        self.n_factorizations = 0

    # -- velocity block -----------------------------------------------------

    def _factor_velocity(self, S):
        self._luS = spla.splu(S.tocsc())
        self._S = S
        self.n_factorizations += 1

    def _vsolve(self, S, b):
        x = self._luS.solve(b)
        scale = max(float(np.abs(b).max()), 1e-300)
        res_prev = np.inf
        for _ in range(8):
            r = b - S @ x
            res = float(np.abs(r).max())
            if res <= 0.1 * self.rtol * scale:
                return x
            if not res < 0.5 * res_prev:
                break
            res_prev = res
            x = x + self._luS.solve(r)
        self._factor_velocity(S)
        x = self._luS.solve(b)
        x = x + self._luS.solve(b - S @ x)
        return x

    # -- dense Schur preconditioner ------------------------------------------

    def _build_schur(self, S):
        import scipy.linalg

        if self._luS is None:
            self._factor_velocity(S)
        n_p = self.B.shape[1]
        schur = np.zeros((n_p, n_p))
        Bd = self.B.toarray()
        for lo in range(0, n_p, 512):
            hi = min(lo + 512, n_p)
            X = self._luS.solve(Bd[:, lo:hi])
            schur[:, lo:hi] = self.B.T @ X
        # shift the constant-pressure null direction before factoring
        schur += np.outer(self._mhat, self._mhat) * np.abs(schur).max()
        self._luP = scipy.linalg.lu_factor(schur)
        self._alpha_built = self._alpha

    def _psolve(self, r):
        import scipy.linalg

        p = scipy.linalg.lu_solve(self._luP, r)
        # the Schur complement is dominated by the (alpha M)^-1 block, so a
        # different time-derivative coefficient rescales it almost uniformly
        p *= self._alpha / self._alpha_built
        return p - self._mhat * (self._mhat @ p)

    # -- public solve ---------------------------------------------------------

    def solve_saddle(self, S, rhs_u, alpha: float = 1.0):
        """Solve S u + B p = rhs_u, B^T u = 0 with mean-zero pressure.

        `alpha` is the coefficient of the mass block inside S; the frozen
        preconditioner is rescaled by it.
        """
        self._alpha = alpha
        if self._luP is None:
            self._build_schur(S)
        elif alpha != self._alpha_built:
            # the time-derivative coefficient changed (scheme bootstrap):
            # rebuild once so the preconditioner matches the new scaling
            self._factor_velocity(S)
            self._build_schur(S)
        P = lambda q: q - self._mhat * (self._mhat @ q)
        g = P(self.B.T @ self._vsolve(S, rhs_u))
        scale = max(float(np.abs(g).max()), 1e-300)

        p = self._psolve(g)
        for outer in range(self.max_outer):
            r = P(g - self.B.T @ self._vsolve(S, self.B @ p))
            if float(np.abs(r).max()) <= self.rtol * scale:
                break
            p = p + self._psolve(r)
        else:
            # preconditioner too stale: rebuild everything once
            self._factor_velocity(S)
            self._build_schur(S)
            p = self._psolve(g)
            for outer in range(self.max_outer):
                r = P(g - self.B.T @ self._vsolve(S, self.B @ p))
                if float(np.abs(r).max()) <= self.rtol * scale:
                    break
                p = p + self._psolve(r)
        u = self._vsolve(S, rhs_u - self.B @ p)
        return u, p


def _saddle_solve(S, ops: Operators, rhs_u, rhs_p=None, gauge="mean_zero",
                  velocity_gauge=False, solver: Optional[FrozenLUSolver] = None):
    """Solve [[S, B], [B^T, 0]] with the requested pressure gauge."""
    B = ops.B
    n_u, n_p = ops.n_u, ops.n_p
    rhs_p = np.zeros(n_p) if rhs_p is None else rhs_p

    blocks_rhs = [rhs_u, rhs_p]
    if gauge == "mean_zero":
        m = ops.mean_p[:, None]
        rows = [[S, B, None], [B.T, None, m], [None, m.T, None]]
        blocks_rhs.append(np.zeros(1))
    elif gauge == "pin":
        # replace the last pressure equation by p_last = 0
        pin = sp.csr_matrix(([1.0], ([0], [n_p - 1])), shape=(1, n_p))
        rows = [[S, B, None], [B.T, None, pin.T], [None, pin, None]]
        blocks_rhs.append(np.zeros(1))
    elif gauge == "none":
        raise GaugeError(
            "pressure gauge required: the divergence constraint only determines "
            "the pressure up to constants on closed domains")
    else:
        raise ValueError(f"unknown gauge {gauge!r}")

    if velocity_gauge:
        R = sp.csr_matrix(ops.mean_u)
        pad = [None] * (len(rows[0]) - 1)
        rows = [r + [R if i == 0 else None] for i, r in enumerate(rows)]
        rows.append([R.T] + pad + [None])
        blocks_rhs.append(np.zeros(R.shape[1]))

    K = sp.bmat(rows, format="csc")
    rhs = np.concatenate(blocks_rhs)
    if solver is None:
        solver = FrozenLUSolver()
    sol = solver.solve(K, rhs)
    if not np.all(np.isfinite(sol)):
        raise GaugeError("saddle-point solve returned non-finite values "
                         "(system singular without an appropriate gauge?)")
    return sol[:n_u], sol[n_u:n_u + n_p]


def solve_stokes(ops: Operators, rhs=None, gauge="mean_zero"):
    """Steady Stokes solve A u + B p = rhs, B^T u = 0.

    On fully periodic domains the constant velocities span the kernel of A
    and are removed by momentum-mean constraints.
    """
    if rhs is None:
        raise ValueError("solve_stokes needs an assembled load vector")
    velocity_gauge = ops.vel.mesh.fully_periodic
    u, p = _saddle_solve(ops.A, ops, rhs, gauge=gauge,
                         velocity_gauge=velocity_gauge)
    res = forms.check_divergence_free(ops.B, u, ops.M)
    if res > 1e-8:
        raise DivergenceError(f"Stokes solution violates divergence: {res:.3e}")
    return u, p


def leray_project(ops: Operators, u: np.ndarray, gauge="mean_zero",
                  solver: Optional[FrozenLUSolver] = None) -> np.ndarray:
    """M-orthogonal projection onto the discretely divergence-free subspace.

    Pass a shared solver to amortize the factorization over many projections.
    """
    v, _ = _saddle_solve(ops.M, ops, ops.M @ u, gauge=gauge, solver=solver)
    return v


# ---------------------------------------------------------------------------
# one time step
# ---------------------------------------------------------------------------

def step(state: FieldState, ops: Operators, cfg: SchemeConfig,
         rhs_fn: Optional[Callable] = None,
         solver: Optional[FrozenLUSolver] = None):
    """Advance one step; returns (new_state, StepStats).

    `rhs_fn(t)` supplies the load vector at the new time level (None = 0);
    `solver` lets a time loop reuse factorizations across steps.
    """
    dt = cfg.dt
    M = ops.M
    bdf2 = cfg.scheme == "bdf2" and state.u_prev is not None

    if bdf2:
        b = 2.0 * state.u - state.u_prev
        alpha = 1.5 / dt
        hist = M @ (4.0 * state.u - state.u_prev) / (2.0 * dt)
    else:
        b = state.u
        alpha = 1.0 / dt
        hist = M @ state.u / dt

    C = ops.convection(b, div_tol=max(cfg.div_tol * 100, 1e-8))
    t_new = state.t + dt
    rhs = hist if rhs_fn is None else hist + rhs_fn(t_new)
    S = (alpha * M + ops.A + C).tocsr()
    if isinstance(solver, SchurStepSolver):
        u_new, p_new = solver.solve_saddle(S, rhs, alpha=alpha)
    else:
        u_new, p_new = _saddle_solve(S, ops, rhs, gauge=cfg.gauge, solver=solver)

    norm_u = math.sqrt(max(u_new @ (M @ u_new), 0.0))
    div_res = float(np.abs(ops.B.T @ u_new).max()) / max(1.0, norm_u)
    if div_res > cfg.div_tol:
        raise DivergenceError(
            f"step to t={t_new:.6g} violates the divergence invariant: "
            f"{div_res:.3e} > {cfg.div_tol:.1e} (assembly or gauge bug)")

    ke_old = 0.5 * float(state.u @ (M @ state.u))
    ke_new = 0.5 * float(u_new @ (M @ u_new))
    eps_visc = float(u_new @ (ops.A @ u_new))
    eps_upw = float(u_new @ (C @ u_new))
    power = float((rhs - hist) @ u_new)
    if bdf2:
        # tested momentum equation; the G-norm KE decomposition is not tracked
        mass_term = float(u_new @ (M @ (3.0 * u_new - 4.0 * state.u + state.u_prev))) / (2.0 * dt)
        residual = mass_term + eps_visc + eps_upw - power
        inc = 0.0
        dke = (ke_new - ke_old) / dt
    else:
        inc = 0.5 * float((u_new - state.u) @ (M @ (u_new - state.u))) / dt
        dke = (ke_new - ke_old) / dt
        residual = dke + inc + eps_visc + eps_upw - power

    stats = StepStats(ke=ke_new, dke_dt=dke, increment_sq=inc,
                      eps_visc=eps_visc, eps_upw=eps_upw, power_in=power,
                      budget_residual=abs(residual), div_residual=div_res)
    new_state = FieldState(t=t_new, u=u_new, p=p_new, u_prev=state.u)
    return new_state, stats


# ---------------------------------------------------------------------------
# problem setup and time loop
# ---------------------------------------------------------------------------

@dataclass
class Problem:
    """A case bound to a concrete discretization."""

    case: CaseSpec
    mesh: object
    vel: object
    prs: object
    ops: Operators
    state0: FieldState
    rhs_fn: Optional[Callable] = None

    def exact_velocity(self, t):
        if self.case.exact is None:
            return None
        return lambda x: self.case.exact.u(t, x)


def discretize(case: CaseSpec, k: int, cells, sigma=None,
               quad_degree=None) -> Problem:
    """Mesh the case's box, build spaces/operators, interpolate + project u0."""
    if np.isscalar(cells):
        cells = (int(cells),) * case.dim
    elif len(cells) == 1:
        cells = (int(cells[0]),) * case.dim
    mesh = build_cartesian_mesh(case.dim, cells, case.domain_box, case.axis_bc,
                                grading=case.grading)
    vel = build_velocity_space(mesh, k, quad_degree=quad_degree)
    prs = build_pressure_space(mesh, k, quad_degree=quad_degree)
    ops = assemble_operators(vel, prs, case.nu, sigma=sigma)

    u0 = interpolate_velocity(vel, case.u0)
    res = forms.check_divergence_free(ops.B, u0, ops.M)
    if res > 1e-13:
        u0 = leray_project(ops, u0)

    rhs_fn = None
    if case.f is not None:
        rhs_fn = lambda t: ops.load(case.force, t)

    state0 = FieldState(t=0.0, u=u0, p=np.zeros(prs.n_dofs))
    return Problem(case=case, mesh=mesh, vel=vel, prs=prs, ops=ops,
                   state0=state0, rhs_fn=rhs_fn)


@dataclass
class RunResult:
    records: list
    snapshots: list              # (t, FieldState) pairs
    final_state: FieldState
    stats: list = field(default_factory=list)
    spectra: list = field(default_factory=list)


def run(problem: Problem, cfg: SchemeConfig, record_every: int = 1,
        snapshot_every: int = 0, spectrum_every: int = 0, sink=None,
        with_errors=None) -> RunResult:
    """March from t=0 to t_end, emitting diagnostics records and snapshots.

    `sink`, if given, receives every record via sink.record(rec), every
    snapshot via sink.snapshot(t, state) and every spectrum via
    sink.spectrum(t, state) as they are produced, so partial output survives
    an aborted run.  `with_errors` toggles errors against the case's exact
    solution (default: whenever one is attached).
    """
    from . import diagnostics

    if with_errors is None:
        with_errors = problem.case.exact is not None
    exact = problem.case.exact if with_errors else None

    n_steps = int(round(cfg.t_end / cfg.dt))
    state = problem.state0
    solver = make_step_solver(problem.ops, cfg)
    records, snaps, stats_list, spectra = [], [], [], []

    def emit_record(stats=None, prev_rec=None):
        rec = diagnostics.record(state, problem.ops, exact=exact,
                                 step_stats=stats, prev_record=prev_rec)
        records.append(rec)
        if sink is not None:
            sink.record(rec)
        return rec

    def emit_snapshot():
        snaps.append((state.t, state))
        if sink is not None:
            sink.snapshot(state.t, state)

    def emit_spectrum():
        spectra.append(diagnostics.spectrum(problem.vel, state.u, t=state.t))
        if sink is not None:
            sink.spectrum(state.t, state)

    last_rec = emit_record()
    if snapshot_every:
        emit_snapshot()
    if spectrum_every:
        emit_spectrum()

    for n in range(1, n_steps + 1):
        state, stats = step(state, problem.ops, cfg, rhs_fn=problem.rhs_fn,
                            solver=solver)
        stats_list.append(stats)
        # the final level is always recorded, whatever the cadence
        if (record_every and n % record_every == 0) or n == n_steps:
            last_rec = emit_record(stats=stats, prev_rec=last_rec)
        if snapshot_every and (n % snapshot_every == 0 or n == n_steps):
            emit_snapshot()
        if spectrum_every and (n % spectrum_every == 0 or n == n_steps):
            emit_spectrum()

    return RunResult(records=records, snapshots=snaps, final_state=state,
                     stats=stats_list, spectra=spectra)
