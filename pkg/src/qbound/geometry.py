"""Discretized domains and their boundary structure.

Two domain kinds are supported: unions of 1D intervals and flat 2D
rectangles, both on uniform grids with trapezoidal quadrature (diagonal
mass).  A mesh carries its boundary split into pieces: interval endpoints
ordered (a1, b1, a2, b2, ...), rectangle edges ordered (left, right,
bottom, top).  Corner nodes of a rectangle are owned by the horizontal
(bottom/top) edges so that every boundary node belongs to exactly one
piece and the boundary Hilbert space is a direct sum.

Node ordering is deterministic: interior nodes first (grid scan order),
then boundary nodes grouped by piece.  The outward-normal convention is
fixed here once and used everywhere else: at a left endpoint x=a of an
interval the outward derivative of a sampled function F is -F'(a); at a
right endpoint it is +F'(b).  Rectangle edges follow the same rule along
their normal axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ConfigError, DimensionMismatchError

__all__ = ["BoundaryPiece", "Mesh", "BoundaryOps", "make_mesh", "boundary_operators", "greens_residual"]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BoundaryPiece:
    """One connected piece of the boundary (an endpoint or an edge).

    ``node_indices`` point into the mesh node arrays, ordered along the
    piece.  ``weights`` are the boundary quadrature weights defining the
    L2 product on the piece (1.0 for endpoints, 1D trapezoid-like on
    edges).  ``param`` is the arclength parameter of each node along the
    piece, used by edge transfer maps.
    """

    name: str
    node_indices: np.ndarray
    weights: np.ndarray
    param: np.ndarray
    normal_axis: int
    normal_sign: float

    @property
    def size(self) -> int:
        return int(self.node_indices.size)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform-grid discretization of an interval union or a rectangle.

    Invariants (checked at construction):
      * quadrature weights strictly positive, summing to the total volume;
      * node ordering: interior first, then boundary grouped by piece;
      * every boundary node belongs to exactly one piece.

    Compared and hashed by identity, so meshes can key caches.
    """

    dimension: int
    segments: tuple[tuple[float, float], ...] | None
    rectangle: tuple[float, float] | None
    nodes: np.ndarray          # (N,) for 1D, (N, 2) for 2D; mesh ordering
    weights: np.ndarray        # (N,) volume quadrature weights
    pieces: tuple[BoundaryPiece, ...]
    spacings: tuple[float, ...]
    interior_count: int
    # grid bookkeeping: per-segment node indices in left-to-right order (1D)
    # or the (nx+1, ny+1) table of node indices (2D)
    segment_nodes: tuple[np.ndarray, ...] | None = None
    grid_index: np.ndarray | None = None

    @property
    def node_count(self) -> int:
        return int(self.weights.size)

    @property
    def boundary_count(self) -> int:
        return sum(p.size for p in self.pieces)

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.concatenate([p.node_indices for p in self.pieces])

    @property
    def h(self) -> float:
        return max(self.spacings)

    @property
    def volume(self) -> float:
        if self.dimension == 1:
            assert self.segments is not None
            return float(sum(b - a for a, b in self.segments))
        assert self.rectangle is not None
        return float(self.rectangle[0] * self.rectangle[1])

    def piece(self, name: str) -> BoundaryPiece:
        for p in self.pieces:
            if p.name == name:
                return p
        raise KeyError(f"no boundary piece named {name!r}")

    def position_fraction(self) -> np.ndarray:
        """A canonical coordinate in [0, 1) per node.

        For interval unions this is the arclength fraction along the
        concatenated segments (so chained ring gluings see a consistent
        angle); for rectangles it is a node-index ramp.  Used to seed
        deterministic Fourier probe vectors.
        """
        if self.dimension == 1:
            assert self.segments is not None and self.segment_nodes is not None
            total = self.volume
            out = np.empty(self.node_count)
            offset = 0.0
            for (a, b), seg in zip(self.segments, self.segment_nodes):
                out[seg] = (offset + (self.nodes[seg] - a)) / total
                offset += b - a
            return out
        return np.arange(self.node_count) / self.node_count

    def _validate(self) -> None:
        if np.any(self.weights <= 0.0):
            raise ConfigError("quadrature weights must be strictly positive")
        total = float(np.sum(self.weights))
        if abs(total - self.volume) > 1e-12 * max(1.0, self.volume):
            raise ConfigError(f"weight sum {total!r} does not match volume {self.volume!r}")
        bidx = self.boundary_indices
        if bidx.size != np.unique(bidx).size:
            raise ConfigError("boundary pieces overlap")
        expected = np.arange(self.interior_count, self.node_count)
        if not np.array_equal(np.sort(bidx), expected):
            raise ConfigError("boundary nodes must follow interior nodes in mesh ordering")


@dataclass(frozen=True)
class BoundaryOps:
    """Trace and outward-normal-derivative operators for a mesh.

    Rows follow the concatenation of boundary pieces in mesh order.  The
    trace rows are unit coordinate selectors; the normal-derivative rows
    are 3-point one-sided stencils (second order, exact on quadratics for
    uniform grids) signed so that they sample the derivative along the
    outward normal.
    """

    trace: np.ndarray              # (n_b, N)
    normal_derivative: np.ndarray  # (n_b, N)
    weights: np.ndarray            # (n_b,) boundary quadrature weights

    @property
    def boundary_dim(self) -> int:
        return int(self.weights.size)


def make_mesh(spec: Mapping, n: int) -> Mesh:
    """Build a mesh from a domain description.

    ``spec`` is either ``{"intervals": [[a1, b1], ...]}`` or
    ``{"rectangle": {"L": ..., "H": ...}}``.  ``n`` is the node density
    per unit length (n >= 8); each segment or edge gets round(n * length)
    cells.
    """
    if not isinstance(n, (int, np.integer)):
        raise ConfigError(f"n must be an integer, got {type(n).__name__}")
    if n < 8:
        raise ConfigError(f"n too small: need n >= 8, got {n}")
    keys = set(spec.keys())
    if keys == {"intervals"}:
        return _make_interval_mesh(spec["intervals"], int(n))
    if keys == {"rectangle"}:
        return _make_rectangle_mesh(spec["rectangle"], int(n))
    raise ConfigError(f"domain spec must have exactly one of 'intervals' or 'rectangle', got keys {sorted(keys)}")


def _cells(n: int, length: float) -> int:
    return max(1, int(round(n * length)))


def _make_interval_mesh(intervals, n: int) -> Mesh:
    if not intervals:
        raise ConfigError("intervals: need at least one interval")
    segments = []
    for k, pair in enumerate(intervals):
        a, b = float(pair[0]), float(pair[1])
        if not b - a > 0.0:
            raise ConfigError(f"intervals[{k}]: non-positive length (a={a}, b={b})")
        segments.append((a, b))

    seg_coords, spacings = [], []
    for a, b in segments:
        m = _cells(n, b - a)
        seg_coords.append(np.linspace(a, b, m + 1))
        spacings.append((b - a) / m)

    # natural order: segment by segment; then permute interior-first
    offsets = np.cumsum([0] + [c.size for c in seg_coords])
    total = int(offsets[-1])
    coords = np.concatenate(seg_coords)
    weights = np.empty(total)
    for k, c in enumerate(seg_coords):
        h = spacings[k]
        w = np.full(c.size, h)
        w[0] = w[-1] = h / 2.0
        weights[offsets[k]:offsets[k + 1]] = w

    boundary_nat = []   # natural indices in piece order a1, b1, a2, b2, ...
    piece_names = []
    piece_signs = []
    for k in range(len(segments)):
        boundary_nat.extend([int(offsets[k]), int(offsets[k + 1] - 1)])
        piece_names.extend([f"a{k + 1}", f"b{k + 1}"])
        piece_signs.extend([-1.0, +1.0])
    interior_nat = np.setdiff1d(np.arange(total), np.asarray(boundary_nat))

    perm = np.concatenate([interior_nat, np.asarray(boundary_nat)])  # mesh index -> natural index
    inv = np.empty(total, dtype=int)
    inv[perm] = np.arange(total)

    pieces = tuple(
        BoundaryPiece(
            name=piece_names[j],
            node_indices=_readonly(np.array([inv[boundary_nat[j]]])),
            weights=_readonly(np.array([1.0])),
            param=_readonly(np.array([0.0])),
            normal_axis=0,
            normal_sign=piece_signs[j],
        )
        for j in range(len(boundary_nat))
    )
    segment_nodes = tuple(
        _readonly(inv[np.arange(offsets[k], offsets[k + 1])]) for k in range(len(segments))
    )
    mesh = Mesh(
        dimension=1,
        segments=tuple(segments),
        rectangle=None,
        nodes=_readonly(coords[perm]),
        weights=_readonly(weights[perm]),
        pieces=pieces,
        spacings=tuple(spacings),
        interior_count=int(interior_nat.size),
        segment_nodes=segment_nodes,
    )
    mesh._validate()
    return mesh


def _make_rectangle_mesh(rect: Mapping, n: int) -> Mesh:
    extra = set(rect.keys()) - {"L", "H"}
    if extra:
        raise ConfigError(f"rectangle: unknown keys {sorted(extra)}")
    try:
        L, H = float(rect["L"]), float(rect["H"])
    except KeyError as err:
        raise ConfigError(f"rectangle: missing field {err.args[0]!r}") from None
    if L <= 0.0 or H <= 0.0:
        raise ConfigError(f"rectangle: non-positive extent (L={L}, H={H})")

    nx, ny = _cells(n, L), _cells(n, H)
    hx, hy = L / nx, H / ny
    xs, ys = np.linspace(0.0, L, nx + 1), np.linspace(0.0, H, ny + 1)
    wx = np.full(nx + 1, hx); wx[0] = wx[-1] = hx / 2.0
    wy = np.full(ny + 1, hy); wy[0] = wy[-1] = hy / 2.0

    def nat(i, j):
        return i * (ny + 1) + j

    interior_nat = np.array([nat(i, j) for i in range(1, nx) for j in range(1, ny)], dtype=int)
    # corner nodes belong to the horizontal (bottom/top) edges
    left_nat = np.array([nat(0, j) for j in range(1, ny)], dtype=int)
    right_nat = np.array([nat(nx, j) for j in range(1, ny)], dtype=int)
    bottom_nat = np.array([nat(i, 0) for i in range(nx + 1)], dtype=int)
    top_nat = np.array([nat(i, ny) for i in range(nx + 1)], dtype=int)

    perm = np.concatenate([interior_nat, left_nat, right_nat, bottom_nat, top_nat])
    total = (nx + 1) * (ny + 1)
    inv = np.empty(total, dtype=int)
    inv[perm] = np.arange(total)

    coords = np.array([[xs[i], ys[j]] for i in range(nx + 1) for j in range(ny + 1)])
    weights = np.array([wx[i] * wy[j] for i in range(nx + 1) for j in range(ny + 1)])

    # edge quadrature: vertical edges lack their corners, so they carry the
    # interior trapezoid weight hy per node; horizontal edges carry full
    # trapezoid weights including the endpoints they own.
    pieces = (
        BoundaryPiece("left", _readonly(inv[left_nat]), _readonly(np.full(ny - 1, hy)),
                      _readonly(ys[1:ny]), normal_axis=0, normal_sign=-1.0),
        BoundaryPiece("right", _readonly(inv[right_nat]), _readonly(np.full(ny - 1, hy)),
                      _readonly(ys[1:ny]), normal_axis=0, normal_sign=+1.0),
        BoundaryPiece("bottom", _readonly(inv[bottom_nat]), _readonly(wx.copy()),
                      _readonly(xs.copy()), normal_axis=1, normal_sign=-1.0),
        BoundaryPiece("top", _readonly(inv[top_nat]), _readonly(wx.copy()),
                      _readonly(xs.copy()), normal_axis=1, normal_sign=+1.0),
    )
    grid_index = inv.reshape(nx + 1, ny + 1)
    mesh = Mesh(
        dimension=2,
        segments=None,
        rectangle=(L, H),
        nodes=_readonly(coords[perm]),
        weights=_readonly(weights[perm]),
        pieces=pieces,
        spacings=(hx, hy),
        interior_count=int(interior_nat.size),
        grid_index=_readonly(grid_index),
    )
    mesh._validate()
    return mesh


def boundary_operators(mesh: Mesh) -> BoundaryOps:
    """Assemble trace and outward-normal-derivative matrices for ``mesh``."""
    N = mesh.node_count
    rows_tr, rows_nd = [], []
    if mesh.dimension == 1:
        assert mesh.segment_nodes is not None
        for seg in mesh.segment_nodes:
            if seg.size < 3:
                raise ConfigError("stencil error: need at least 3 nodes per segment")
        for p in mesh.pieces:
            k = int(p.name[1:]) - 1
            seg = mesh.segment_nodes[k]
            h = mesh.spacings[k]
            tr = np.zeros(N)
            nd = np.zeros(N)
            if p.normal_sign < 0:      # left endpoint: outward derivative = -F'(a)
                i0, i1, i2 = seg[0], seg[1], seg[2]
                nd[i0], nd[i1], nd[i2] = 3.0 / (2 * h), -4.0 / (2 * h), 1.0 / (2 * h)
                tr[i0] = 1.0
            else:                      # right endpoint: outward derivative = +F'(b)
                i0, i1, i2 = seg[-1], seg[-2], seg[-3]
                nd[i0], nd[i1], nd[i2] = 3.0 / (2 * h), -4.0 / (2 * h), 1.0 / (2 * h)
                tr[i0] = 1.0
            rows_tr.append(tr)
            rows_nd.append(nd)
    else:
        assert mesh.grid_index is not None
        gi = mesh.grid_index
        nx, ny = gi.shape[0] - 1, gi.shape[1] - 1
        if nx + 1 < 3 or ny + 1 < 3:
            raise ConfigError("stencil error: need at least 3 nodes per edge direction")
        hx, hy = mesh.spacings
        for p in mesh.pieces:
            h = hx if p.normal_axis == 0 else hy
            for local, idx in enumerate(p.node_indices):
                tr = np.zeros(N)
                nd = np.zeros(N)
                tr[idx] = 1.0
                if p.name == "left":
                    j = local + 1
                    line = (gi[0, j], gi[1, j], gi[2, j])
                elif p.name == "right":
                    j = local + 1
                    line = (gi[nx, j], gi[nx - 1, j], gi[nx - 2, j])
                elif p.name == "bottom":
                    i = local
                    line = (gi[i, 0], gi[i, 1], gi[i, 2])
                else:
                    i = local
                    line = (gi[i, ny], gi[i, ny - 1], gi[i, ny - 2])
                nd[line[0]], nd[line[1]], nd[line[2]] = 3.0 / (2 * h), -4.0 / (2 * h), 1.0 / (2 * h)
                rows_tr.append(tr)
                rows_nd.append(nd)
    weights = np.concatenate([p.weights for p in mesh.pieces])
    return BoundaryOps(
        trace=_readonly(np.vstack(rows_tr)),
        normal_derivative=_readonly(np.vstack(rows_nd)),
        weights=_readonly(weights),
    )


def _second_derivative_line(values: np.ndarray, h: float) -> np.ndarray:
    """Second derivative samples along one grid line, one-sided at the ends."""
    m = values.size
    out = np.empty_like(values)
    out[1:-1] = (values[:-2] - 2.0 * values[1:-1] + values[2:]) / h**2
    if m >= 4:
        out[0] = (2 * values[0] - 5 * values[1] + 4 * values[2] - values[3]) / h**2
        out[-1] = (2 * values[-1] - 5 * values[-2] + 4 * values[-3] - values[-4]) / h**2
    else:
        out[0] = (values[0] - 2 * values[1] + values[2]) / h**2
        out[-1] = out[0]
    return out


def _strong_laplacian(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Pointwise finite-difference Laplacian at every node (second order)."""
    out = np.zeros_like(values, dtype=np.result_type(values, float))
    if mesh.dimension == 1:
        assert mesh.segment_nodes is not None
        for k, seg in enumerate(mesh.segment_nodes):
            out[seg] = _second_derivative_line(values[seg], mesh.spacings[k])
    else:
        assert mesh.grid_index is not None
        gi = mesh.grid_index
        hx, hy = mesh.spacings
        for j in range(gi.shape[1]):
            line = gi[:, j]
            out[line] += _second_derivative_line(values[line], hx)
        for i in range(gi.shape[0]):
            line = gi[i, :]
            out[line] += _second_derivative_line(values[line], hy)
    return out


def greens_residual(mesh: Mesh, bops: BoundaryOps, Phi: np.ndarray, Psi: np.ndarray) -> complex:
    """Volume side minus boundary side of Green's formula for -Laplace.

    Computes <Phi, -Lap Psi> - <-Lap Phi, Psi> minus
    <dPhi/dn, psi>_b - <phi, dPsi/dn>_b for sampled functions; for smooth
    inputs the result tends to zero at second order in the grid spacing.
    """
    Phi = np.asarray(Phi)
    Psi = np.asarray(Psi)
    if Phi.shape != (mesh.node_count,) or Psi.shape != (mesh.node_count,):
        raise DimensionMismatchError(
            f"node value arrays must have shape ({mesh.node_count},), got {Phi.shape} and {Psi.shape}"
        )
    lap_phi = _strong_laplacian(mesh, Phi)
    lap_psi = _strong_laplacian(mesh, Psi)
    w = mesh.weights
    volume_side = np.vdot(Phi * w, -lap_psi) - np.vdot((-lap_phi) * w, Psi)
    phi, psi = bops.trace @ Phi, bops.trace @ Psi
    dphi, dpsi = bops.normal_derivative @ Phi, bops.normal_derivative @ Psi
    wb = bops.weights
    boundary_side = np.vdot(dphi * wb, psi) - np.vdot(phi * wb, dpsi)
    return complex(volume_side - boundary_side)
