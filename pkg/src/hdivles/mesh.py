"""Structured Cartesian quad/hex meshes with periodic and wall boundaries.

A mesh is a tensor product of per-axis 1D node vectors on a box.  Each axis is
either fully periodic or closed by two walls.  Faces normal to a periodic axis
wrap around the seam and are treated exactly like interior faces; faces on a
wall carry a single adjacent cell.  Axis node spacing may be graded through a
monotone map of the unit interval onto itself (identity = uniform spacing).

Cell and face orderings are deterministic: cells are numbered in C order over
their (i_1, ..., i_d) index tuples, faces axis-by-axis in C order over their
plane/transverse indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

PERIODIC = "periodic"
WALL = "wall"

#: kinds a face can take
INTERIOR = "interior"


def uniform_grading(xi):
    """Identity node map: uniform spacing along the axis."""
    return xi


def tanh_grading(gamma: float = 1.8) -> Callable:
    """Symmetric hyperbolic-tangent stretch clustering nodes at both axis ends.

    Maps xi in [0, 1] to (1 + tanh(gamma*(2 xi - 1)) / tanh(gamma)) / 2.  Used
    for wall-normal refinement in channel meshes; gamma controls the strength.
    """
    if gamma <= 0:
        raise ValueError(f"grading strength must be positive, got {gamma}")
    tg = math.tanh(gamma)

    def grading(xi):
        return 0.5 * (1.0 + np.tanh(gamma * (2.0 * np.asarray(xi) - 1.0)) / tg)

    return grading


@dataclass(frozen=True)
class Face:
    """A single mesh face.

    ``normal`` is the unit normal, always aligned with coordinate axis
    ``axis``; for interior faces it points from ``left_cell`` to
    ``right_cell``, for wall faces outward.  ``orientation`` is the sign s.t.
    normal = orientation * e_axis.  ``local_left``/``local_right`` are the
    face slots (0 = minus side, 1 = plus side) within the adjacent cells.
    ``diameter`` is the maximal edge length of the face rectangle.
    """

    id: int
    axis: int
    kind: str
    left_cell: int
    right_cell: int | None
    orientation: int
    normal: np.ndarray
    diameter: float
    area: float
    corner: np.ndarray
    extents: np.ndarray
    local_left: int
    local_right: int | None


@dataclass(frozen=True)
class FaceFrame:
    """Orthonormal tangential frame of a face plus its reference-to-face map."""

    tangent_axes: tuple
    tangents: np.ndarray  # (d-1, d), axis-aligned unit vectors

    corner: np.ndarray
    extents: np.ndarray

    def map_points(self, ref_pts) -> np.ndarray:
        """Map reference-face points in [0,1]^(d-1) onto the physical face."""
        ref_pts = np.atleast_2d(np.asarray(ref_pts, float))
        phys = np.tile(self.corner, (ref_pts.shape[0], 1))
        for j, ax in enumerate(self.tangent_axes):
            phys[:, ax] += ref_pts[:, j] * self.extents[j]
        return phys


class CartesianMesh:
    """Axis-aligned box mesh of quadrilaterals (2D) or hexahedra (3D).

    Attributes
    ----------
    dim : int
    cells_per_axis : tuple of int
    domain_box : tuple of (lo, hi) per axis
    axis_bc : tuple of "periodic" / "wall"
    nodes : per-axis arrays of node coordinates (length N_i + 1)
    n_cells : int
    cell_lo, cell_h : (n_cells, dim) arrays of cell corners and extents
    faces : list of Face
    cell_faces : (n_cells, dim, 2) face ids; [c, a, s] is the face on side s
        (0 = minus, 1 = plus) of cell c along axis a
    """

    def __init__(self, dim, cells_per_axis, domain_box, axis_bc, grading=None):
        if dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {dim}")
        cells_per_axis = tuple(int(n) for n in cells_per_axis)
        if len(cells_per_axis) != dim:
            raise ValueError("cells_per_axis must have one entry per axis")
        if any(n < 1 for n in cells_per_axis):
            raise ValueError(f"cell counts must be >= 1, got {cells_per_axis}")
        domain_box = tuple((float(a), float(b)) for a, b in domain_box)
        if len(domain_box) != dim or any(b <= a for a, b in domain_box):
            raise ValueError("domain_box must give a nonempty interval per axis")
        axis_bc = tuple(axis_bc)
        if len(axis_bc) != dim or any(bc not in (PERIODIC, WALL) for bc in axis_bc):
            raise ValueError(f"axis_bc entries must be {PERIODIC!r} or {WALL!r}")
        if grading is None:
            grading = (None,) * dim
        grading = tuple(g if g is not None else uniform_grading for g in grading)

        self.dim = dim
        self.cells_per_axis = cells_per_axis
        self.domain_box = domain_box
        self.axis_bc = axis_bc
        self.grading = grading

        self.nodes = []
        for a in range(dim):
            xi = np.linspace(0.0, 1.0, cells_per_axis[a] + 1)
            g = np.asarray(grading[a](xi), float)
            self._check_grading(a, g)
            lo, hi = domain_box[a]
            self.nodes.append(lo + (hi - lo) * g)

        self.n_cells = int(np.prod(cells_per_axis))
        self._build_cells()
        self._build_faces()

    @staticmethod
    def _check_grading(axis, g):
        if abs(g[0]) > 1e-12 or abs(g[-1] - 1.0) > 1e-12:
            raise ValueError(f"grading on axis {axis} must map 0 -> 0 and 1 -> 1")
        if np.any(np.diff(g) <= 0):
            raise ValueError(f"grading on axis {axis} is not strictly increasing")

    # -- construction ------------------------------------------------------

    def _build_cells(self):
        d, N = self.dim, self.cells_per_axis
        idx = np.indices(N).reshape(d, -1)  # C order over index tuples
        self.cell_index = idx.T.copy()
        lo = np.empty((self.n_cells, d))
        h = np.empty((self.n_cells, d))
        for a in range(d):
            lo[:, a] = self.nodes[a][idx[a]]
            h[:, a] = np.diff(self.nodes[a])[idx[a]]
        self.cell_lo = lo
        self.cell_h = h

    def cell_id(self, index) -> int:
        return int(np.ravel_multi_index(tuple(index), self.cells_per_axis))

    def _build_faces(self):
        d, N = self.dim, self.cells_per_axis
        self.faces: list[Face] = []
        self.cell_faces = np.full((self.n_cells, d, 2), -1, dtype=np.int64)

        for a in range(d):
            periodic = self.axis_bc[a] == PERIODIC
            planes = range(N[a]) if periodic else range(N[a] + 1)
            t_axes = [e for e in range(d) if e != a]
            t_shape = tuple(N[e] for e in t_axes)
            for p in planes:
                for t_idx in np.ndindex(t_shape):
                    self._add_face(a, p, t_axes, t_idx, periodic)

    def _add_face(self, a, p, t_axes, t_idx, periodic):
        N = self.cells_per_axis
        d = self.dim

        def cell_of(plane_idx):
            index = [0] * d
            index[a] = plane_idx
            for e, i in zip(t_axes, t_idx):
                index[e] = i
            return self.cell_id(index)

        extents = np.array([self.nodes[e][i + 1] - self.nodes[e][i]
                            for e, i in zip(t_axes, t_idx)])
        corner = np.zeros(d)
        corner[a] = self.nodes[a][p]
        for e, i in zip(t_axes, t_idx):
            corner[e] = self.nodes[e][i]

        fid = len(self.faces)
        if periodic or 0 < p < N[a]:
            left = cell_of((p - 1) % N[a])
            right = cell_of(p % N[a])
            orientation = 1
            kind = INTERIOR
            self.cell_faces[left, a, 1] = fid
            self.cell_faces[right, a, 0] = fid
            local_left, local_right = 1, 0
        else:
            # wall face: single adjacent cell, outward normal
            if p == 0:
                left = cell_of(0)
                orientation = -1
                local_left = 0
            else:
                left = cell_of(N[a] - 1)
                orientation = 1
                local_left = 1
            right = None
            kind = WALL
            self.cell_faces[left, a, local_left] = fid
            local_right = None

        normal = np.zeros(d)
        normal[a] = float(orientation)
        self.faces.append(Face(
            id=fid, axis=a, kind=kind, left_cell=left, right_cell=right,
            orientation=orientation, normal=normal,
            diameter=float(extents.max()), area=float(np.prod(extents)),
            corner=corner, extents=extents,
            local_left=local_left, local_right=local_right,
        ))

    # -- queries -----------------------------------------------------------

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def fully_periodic(self) -> bool:
        return all(bc == PERIODIC for bc in self.axis_bc)

    def interior_faces(self):
        return [f for f in self.faces if f.kind == INTERIOR]

    def wall_faces(self):
        return [f for f in self.faces if f.kind == WALL]

    def face_frame(self, face: Face) -> FaceFrame:
        """Tangential frame completing the face normal, plus the affine map
        from the reference face [0,1]^(d-1) onto the face."""
        t_axes = tuple(e for e in range(self.dim) if e != face.axis)
        tangents = np.zeros((self.dim - 1, self.dim))
        for j, ax in enumerate(t_axes):
            tangents[j, ax] = 1.0
        return FaceFrame(tangent_axes=t_axes, tangents=tangents,
                         corner=face.corner, extents=face.extents)

    def cell_volume(self, cell: int) -> float:
        return float(np.prod(self.cell_h[cell]))


def build_cartesian_mesh(dim, cells_per_axis, domain_box, axis_bc,
                         grading=None) -> CartesianMesh:
    """Build a structured Cartesian mesh; see :class:`CartesianMesh`."""
    return CartesianMesh(dim, cells_per_axis, domain_box, axis_bc, grading)


def face_trace_frame(mesh: CartesianMesh, face: Face) -> FaceFrame:
    """Orthonormal tangential basis of a face and its reference-face map."""
    return mesh.face_frame(face)
