"""Exactly divergence-free H(div)-conforming DG solver for incompressible
Navier-Stokes flows, with the diagnostics needed to use it as an implicit
large-eddy simulation tool."""

__version__ = "0.1.0"

from .mesh import CartesianMesh, build_cartesian_mesh, face_trace_frame, tanh_grading
from .fespace import (QuadratureRule, VelocitySpace, PressureSpace, gauss_rule,
                      build_velocity_space, build_pressure_space,
                      eval_velocity_basis, interpolate_velocity,
                      interpolate_pressure, sample_velocity)
from .forms import (Operators, NormReport, assemble_operators, assemble_mass,
                    assemble_sip, assemble_div, assemble_load,
                    assemble_upwind_convection, compute_norms, sigma_default)
from .timestepping import (SchemeConfig, FieldState, Problem, discretize,
                           solve_stokes, leray_project, step, run)
from .cases import (CaseSpec, lattice2d, lattice3d, tgv3d, channel,
                    manufactured, make_case)
from .diagnostics import (DiagnosticsRecord, SpectrumRecord, ChannelStats,
                          record, error_vs_exact, spectrum, q_criterion,
                          channel_stats)
from .appio import RunConfig, parse_config, format_config, execute_run
