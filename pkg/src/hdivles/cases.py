"""Benchmark flow definitions: domains, initial data, forces, exact solutions.

All field callables are vectorized: they take an (n, d) array of points and
return (n,) or (n, d) arrays.  Exact solutions carry closed-form derivatives
so the momentum-equation residual can be checked pointwise.

The two lattice flows are generalized Beltrami flows: every velocity
component is a Laplacian eigenfield with eigenvalue -8 pi^2 (frequency 2 pi
in both active axes) and the convective term is a pure gradient, so
u(t) = u0 * exp(-8 pi^2 nu t) solves the momentum equation with the matching
pressure.  Kinetic energy consequently decays like exp(-16 pi^2 nu t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .mesh import PERIODIC, WALL

TWO_PI = 2.0 * math.pi

#: Laplacian eigenvalue of the lattice initial data (frequency 2*pi, 2*pi)
LATTICE_EIGENVALUE = 8.0 * math.pi ** 2


def velocity_decay_rate(nu: float) -> float:
    """Exponential decay rate of the lattice velocity: 8 pi^2 nu."""
    return LATTICE_EIGENVALUE * nu


def ke_decay_rate(nu: float) -> float:
    """Exponential decay rate of the lattice kinetic energy: 16 pi^2 nu."""
    return 2.0 * LATTICE_EIGENVALUE * nu


@dataclass
class ExactSolution:
    """Closed-form solution bundle; all callables are (t, points) -> arrays."""

    u: Callable
    grad: Callable             # (n, d, d): grad[i, c, e] = d u_c / d x_e
    dudt: Callable
    lap: Callable
    p: Optional[Callable] = None
    gradp: Optional[Callable] = None
    formal: bool = False       # discrete solutions may depart in finite time


@dataclass
class CaseSpec:
    """A benchmark flow: geometry, viscosity, data and optional exact fields."""

    name: str
    dim: int
    nu: float
    domain_box: tuple
    axis_bc: tuple
    u0: Callable
    f: Optional[Callable] = None        # body force f(t, x) -> (n, d); None = 0
    exact: Optional[ExactSolution] = None
    params: dict = field(default_factory=dict)
    grading: Optional[tuple] = None

    def force(self, t, x):
        if self.f is None:
            return np.zeros_like(np.atleast_2d(x), dtype=float)
        return self.f(t, x)

    @property
    def fully_periodic(self):
        return all(bc == PERIODIC for bc in self.axis_bc)


# ---------------------------------------------------------------------------
# lattice flows
# ---------------------------------------------------------------------------

def _lattice_trig(x):
    s1, c1 = np.sin(TWO_PI * x[:, 0]), np.cos(TWO_PI * x[:, 0])
    s2, c2 = np.sin(TWO_PI * x[:, 1]), np.cos(TWO_PI * x[:, 1])
    return s1, c1, s2, c2


def _lattice_pressure(t, x, nu):
    decay2 = math.exp(-2.0 * velocity_decay_rate(nu) * t)
    return 0.25 * (np.cos(2 * TWO_PI * x[:, 0]) - np.cos(2 * TWO_PI * x[:, 1])) * decay2


def _lattice_pressure_grad(t, x, nu):
    # grad p = (-pi sin(4 pi x1), +pi sin(4 pi x2)) * decay^2, zero along x3
    decay2 = math.exp(-2.0 * velocity_decay_rate(nu) * t)
    g = np.zeros((x.shape[0], x.shape[1]))
    g[:, 0] = -math.pi * np.sin(2 * TWO_PI * x[:, 0]) * decay2
    g[:, 1] = math.pi * np.sin(2 * TWO_PI * x[:, 1]) * decay2
    return g


def lattice2d(nu: float) -> CaseSpec:
    """Planar lattice flow on (-1, 1)^2, fully periodic, f = 0.

    Stream function (1/2pi) sin(2 pi x1) cos(2 pi x2); the rotated gradient
    gives u0 = (sin sin, cos cos).  The unique decaying solution is
    u0 * exp(-8 pi^2 nu t).
    """
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    lam = velocity_decay_rate(nu)

    def u0(x):
        s1, c1, s2, c2 = _lattice_trig(np.atleast_2d(x))
        return np.stack([s1 * s2, c1 * c2], axis=-1)

    def u(t, x):
        return u0(x) * math.exp(-lam * t)

    def grad(t, x):
        s1, c1, s2, c2 = _lattice_trig(np.atleast_2d(x))
        g = np.empty((x.shape[0], 2, 2))
        g[:, 0, 0] = TWO_PI * c1 * s2
        g[:, 0, 1] = TWO_PI * s1 * c2
        g[:, 1, 0] = -TWO_PI * s1 * c2
        g[:, 1, 1] = -TWO_PI * c1 * s2
        return g * math.exp(-lam * t)

    def dudt(t, x):
        return -lam * u(t, x)

    def lap(t, x):
        return -LATTICE_EIGENVALUE * u(t, x)

    exact = ExactSolution(
        u=u, grad=grad, dudt=dudt, lap=lap,
        p=lambda t, x: _lattice_pressure(t, np.atleast_2d(x), nu),
        gradp=lambda t, x: _lattice_pressure_grad(t, np.atleast_2d(x), nu),
    )
    return CaseSpec(
        name="lattice2d", dim=2, nu=nu,
        domain_box=((-1.0, 1.0), (-1.0, 1.0)),
        axis_bc=(PERIODIC, PERIODIC),
        u0=u0, f=None, exact=exact,
        params={"ke0": 1.0, "enstrophy0": LATTICE_EIGENVALUE},
    )


def lattice3d(nu: float) -> CaseSpec:
    """3D lattice flow on the unit cube: the planar flow plus a third
    component sqrt(2) * Psi, all independent of x3.

    The closed-form decaying field remains a solution of the momentum
    equation, but discrete solutions develop vortex stretching and depart
    from it in finite time, so the bundle is flagged formal.
    """
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    lam = velocity_decay_rate(nu)
    amp3 = math.sqrt(2.0) / TWO_PI

    def u0(x):
        x = np.atleast_2d(x)
        s1, c1, s2, c2 = _lattice_trig(x)
        return np.stack([s1 * s2, c1 * c2, amp3 * s1 * c2], axis=-1)

    def u(t, x):
        return u0(x) * math.exp(-lam * t)

    def grad(t, x):
        x = np.atleast_2d(x)
        s1, c1, s2, c2 = _lattice_trig(x)
        g = np.zeros((x.shape[0], 3, 3))
        g[:, 0, 0] = TWO_PI * c1 * s2
        g[:, 0, 1] = TWO_PI * s1 * c2
        g[:, 1, 0] = -TWO_PI * s1 * c2
        g[:, 1, 1] = -TWO_PI * c1 * s2
        g[:, 2, 0] = amp3 * TWO_PI * c1 * c2
        g[:, 2, 1] = -amp3 * TWO_PI * s1 * s2
        return g * math.exp(-lam * t)

    def dudt(t, x):
        return -lam * u(t, x)

    def lap(t, x):
        return -LATTICE_EIGENVALUE * u(t, x)

    exact = ExactSolution(
        u=u, grad=grad, dudt=dudt, lap=lap,
        p=lambda t, x: _lattice_pressure(t, np.atleast_2d(x), nu),
        gradp=lambda t, x: _lattice_pressure_grad(t, np.atleast_2d(x), nu),
        formal=True,
    )
    ke0 = 0.25 + 1.0 / (16.0 * math.pi ** 2)
    return CaseSpec(
        name="lattice3d", dim=3, nu=nu,
        domain_box=((0.0, 1.0),) * 3,
        axis_bc=(PERIODIC,) * 3,
        u0=u0, f=None, exact=exact,
        params={"ke0": ke0},
    )


# ---------------------------------------------------------------------------
# Taylor-Green vortex
# ---------------------------------------------------------------------------

def tgv3d(re: float, U: float = 1.0, L: float = 1.0) -> CaseSpec:
    """Taylor-Green vortex in the periodic box (0, 2 pi L)^3 at Re = U L / nu."""
    if re <= 0:
        raise ValueError("Reynolds number must be positive")
    nu = U * L / re

    def u0(x):
        x = np.atleast_2d(x)
        a1, a2, a3 = x[:, 0] / L, x[:, 1] / L, x[:, 2] / L
        return U * np.stack([
            np.sin(a1) * np.cos(a2) * np.cos(a3),
            -np.cos(a1) * np.sin(a2) * np.cos(a3),
            np.zeros_like(a1),
        ], axis=-1)

    return CaseSpec(
        name="tgv3d", dim=3, nu=nu,
        domain_box=((0.0, 2.0 * math.pi * L),) * 3,
        axis_bc=(PERIODIC,) * 3,
        u0=u0, f=None, exact=None,
        params={"re": re, "U": U, "L": L},
    )


# ---------------------------------------------------------------------------
# channel flow
# ---------------------------------------------------------------------------

def _poiseuille(force, H, nu):
    def profile(x2):
        return force * (H * H - x2 * x2) / (2.0 * nu)
    return profile


def _channel_trip(box, H, amplitude, seed, dim):
    """Divergence-free perturbation: curl of a random-coefficient potential.

    The potential components tangential to the wall carry the envelope
    (1 - (x2/H)^2)^2, so the perturbation and its wall-normal flux vanish at
    the walls.  Amplitude is normalized on a sample grid.
    """
    rng = np.random.default_rng(seed)
    modes = [(m1, m3) for m1 in (1, 2) for m3 in (1, 2)]
    coeff = rng.uniform(-1.0, 1.0, (len(modes), 4 if dim == 3 else 2))
    Lx = box[0][1] - box[0][0]
    Lz = box[2][1] - box[2][0] if dim == 3 else None

    def envelope(x2):
        s = x2 / H
        return (1.0 - s * s) ** 2

    def d_envelope(x2):
        s = x2 / H
        return -4.0 * s * (1.0 - s * s) / H

    if dim == 3:
        def perturbation(x):
            x = np.atleast_2d(x)
            x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
            g, dg = envelope(x2), d_envelope(x2)
            u = np.zeros((x.shape[0], 3))
            for (m1, m3), (a1, b1, a3, b3) in zip(modes, coeff):
                k1 = TWO_PI * m1 / Lx
                k3 = TWO_PI * m3 / Lz
                # A1 = g * a1 sin(k1 x1) sin(k3 x3); A3 = g * a3 cos(k1 x1) cos(k3 x3)
                A1 = a1 * np.sin(k1 * x1) * np.sin(k3 * x3) + b1 * np.cos(k1 * x1) * np.sin(k3 * x3)
                A3 = a3 * np.cos(k1 * x1) * np.cos(k3 * x3) + b3 * np.sin(k1 * x1) * np.cos(k3 * x3)
                dA1_d3 = k3 * (a1 * np.sin(k1 * x1) * np.cos(k3 * x3) + b1 * np.cos(k1 * x1) * np.cos(k3 * x3))
                dA3_d1 = k1 * (-a3 * np.sin(k1 * x1) * np.cos(k3 * x3) + b3 * np.cos(k1 * x1) * np.cos(k3 * x3))
                # u' = curl(A1, 0, A3)
                u[:, 0] += dg * A3
                u[:, 1] += g * (dA1_d3 - dA3_d1)
                u[:, 2] += -dg * A1
            return u
    else:
        def perturbation(x):
            x = np.atleast_2d(x)
            x1, x2 = x[:, 0], x[:, 1]
            g, dg = envelope(x2), d_envelope(x2)
            u = np.zeros((x.shape[0], 2))
            for (m1, _), (a, b) in zip(modes, coeff):
                k1 = TWO_PI * m1 / Lx
                psi = a * np.sin(k1 * x1) + b * np.cos(k1 * x1)
                dpsi = k1 * (a * np.cos(k1 * x1) - b * np.sin(k1 * x1))
                u[:, 0] += dg * psi
                u[:, 1] += -g * dpsi
            return u

    # normalize the peak to the requested amplitude
    n = 13
    axes = [np.linspace(box[a][0], box[a][1], n, endpoint=False) for a in range(dim)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    peak = np.abs(perturbation(grid)).max()
    scale = amplitude / peak if peak > 0 else 0.0

    return lambda x: scale * perturbation(x)


def channel(re_tau: float = 180.0, H: float = 1.0, laminar: bool = False,
            nu: float = None, force: float = None, dim: int = 3,
            trip_amplitude: float = 0.1, seed: int = 0,
            grading_gamma: float = 1.8) -> CaseSpec:
    """Pressure-driven channel between walls at x2 = +-H.

    The constant body force (F, 0, 0) with F = Re_tau^2 nu^2 / H^3 makes
    Re_tau the a-priori friction Reynolds number.  The laminar variant
    attaches the parabolic profile F (H^2 - x2^2) / (2 nu) as exact steady
    solution; the turbulent variant starts from that profile plus a
    divergence-free random perturbation (a fraction of the bulk velocity).
    Box defaults: 2 pi H x 2H x pi H, with tanh wall grading along x2.
    """
    if dim not in (2, 3):
        raise ValueError("channel dim must be 2 or 3")
    if force is None:
        force = 1.0 / H if not laminar else 1.0
    if nu is None:
        nu = math.sqrt(force * H) * H / re_tau
    u_tau = math.sqrt(force * H)
    re_tau_actual = u_tau * H / nu

    if dim == 3:
        box = ((0.0, 2.0 * math.pi * H), (-H, H), (0.0, math.pi * H))
        bc = (PERIODIC, WALL, PERIODIC)
    else:
        box = ((0.0, 2.0 * math.pi * H), (-H, H))
        bc = (PERIODIC, WALL)

    profile = _poiseuille(force, H, nu)

    def base(x):
        x = np.atleast_2d(x)
        u = np.zeros((x.shape[0], dim))
        u[:, 0] = profile(x[:, 1])
        return u

    if laminar:
        u0 = base

        def u_exact(t, x):
            return base(x)

        def grad(t, x):
            x = np.atleast_2d(x)
            g = np.zeros((x.shape[0], dim, dim))
            g[:, 0, 1] = -force * x[:, 1] / nu
            return g

        def lap(t, x):
            out = np.zeros((np.atleast_2d(x).shape[0], dim))
            out[:, 0] = -force / nu
            return out

        exact = ExactSolution(
            u=u_exact, grad=grad,
            dudt=lambda t, x: np.zeros((np.atleast_2d(x).shape[0], dim)),
            lap=lap,
            p=lambda t, x: np.zeros(np.atleast_2d(x).shape[0]),
            gradp=lambda t, x: np.zeros((np.atleast_2d(x).shape[0], dim)),
        )
    else:
        bulk = force * H * H / (3.0 * nu)
        trip = _channel_trip(box, H, trip_amplitude * bulk, seed, dim)

        def u0(x):
            return base(x) + trip(x)

        exact = None

    def f(t, x):
        x = np.atleast_2d(x)
        out = np.zeros((x.shape[0], dim))
        out[:, 0] = force
        return out

    from .mesh import tanh_grading
    grading = [None] * dim
    if grading_gamma is not None:
        grading[1] = tanh_grading(grading_gamma)

    return CaseSpec(
        name="channel_laminar" if laminar else "channel_turbulent",
        dim=dim, nu=nu, domain_box=box, axis_bc=bc,
        u0=u0, f=f, exact=exact, grading=tuple(grading),
        params={"H": H, "F": force, "u_tau": u_tau, "re_tau": re_tau_actual,
                "laminar": laminar, "seed": seed,
                "trip_amplitude": trip_amplitude,
                "grading_gamma": grading_gamma},
    )


# ---------------------------------------------------------------------------
# manufactured solutions
# ---------------------------------------------------------------------------

def manufactured(nu: float, velocity: str = "lattice2d",
                 extra_pressure: str = "none") -> CaseSpec:
    """Manufactured case: compute f = du/dt - nu lap(u) + (u.grad)u + grad p
    from closed forms for a chosen divergence-free velocity and pressure.

    With the lattice velocity and no extra pressure, the force evaluates to
    zero (the convective term is absorbed by the base pressure); an extra
    pressure shifts f by its gradient only.
    """
    if velocity != "lattice2d":
        raise ValueError(f"unknown manufactured velocity {velocity!r}")
    base = lattice2d(nu)
    ex = base.exact

    if extra_pressure == "none":
        def p_add(t, x):
            return np.zeros(np.atleast_2d(x).shape[0])

        def gradp_add(t, x):
            return np.zeros_like(np.atleast_2d(x), dtype=float)
    elif extra_pressure == "sine":
        def p_add(t, x):
            return np.sin(TWO_PI * np.atleast_2d(x)[:, 0])

        def gradp_add(t, x):
            x = np.atleast_2d(x)
            g = np.zeros_like(x, dtype=float)
            g[:, 0] = TWO_PI * np.cos(TWO_PI * x[:, 0])
            return g
    else:
        raise ValueError(f"unknown extra pressure {extra_pressure!r}")

    def f(t, x):
        x = np.atleast_2d(x)
        conv = np.einsum("ne,nce->nc", ex.u(t, x), ex.grad(t, x))
        return ex.dudt(t, x) - nu * ex.lap(t, x) + conv \
            + ex.gradp(t, x) + gradp_add(t, x)

    exact = ExactSolution(
        u=ex.u, grad=ex.grad, dudt=ex.dudt, lap=ex.lap,
        p=lambda t, x: ex.p(t, x) + p_add(t, x),
        gradp=lambda t, x: ex.gradp(t, x) + gradp_add(t, x),
    )
    return CaseSpec(
        name="manufactured", dim=2, nu=nu,
        domain_box=base.domain_box, axis_bc=base.axis_bc,
        u0=base.u0, f=f, exact=exact,
        params={"velocity": velocity, "extra_pressure": extra_pressure},
    )


_FACTORIES = {
    "lattice2d": lambda cfg: lattice2d(cfg["nu"]),
    "lattice3d": lambda cfg: lattice3d(cfg["nu"]),
    "tgv3d": lambda cfg: tgv3d(cfg.get("re", 1600.0), U=cfg.get("U", 1.0),
                               L=cfg.get("L", 1.0)),
    "channel_laminar": lambda cfg: channel(
        re_tau=cfg.get("re_tau", 1.0), H=cfg.get("H", 1.0), laminar=True,
        nu=cfg.get("nu"), force=cfg.get("F"), dim=cfg.get("dim", 3),
        grading_gamma=cfg.get("gamma", 1.8)),
    "channel_turbulent": lambda cfg: channel(
        re_tau=cfg.get("re_tau", 180.0), H=cfg.get("H", 1.0), laminar=False,
        nu=cfg.get("nu"), force=cfg.get("F"), dim=cfg.get("dim", 3),
        trip_amplitude=cfg.get("trip_amplitude", 0.1),
        seed=cfg.get("seed", 0), grading_gamma=cfg.get("gamma", 1.8)),
    "manufactured": lambda cfg: manufactured(
        cfg["nu"], velocity=cfg.get("velocity", "lattice2d"),
        extra_pressure=cfg.get("extra_pressure", "none")),
}


def make_case(name: str, **params) -> CaseSpec:
    """Build a case by name with keyword parameters (used by the config layer)."""
    if name not in _FACTORIES:
        raise ValueError(f"unknown case {name!r}; expected one of {sorted(_FACTORIES)}")
    return _FACTORIES[name](params)
