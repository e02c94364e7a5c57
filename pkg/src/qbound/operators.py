"""Discrete Hermitian operators on constraint-reduced degrees of freedom.

Assembly is form-based: the stiffness of the Dirichlet energy, minus the
Robin boundary term of the Cayley-decomposed boundary condition, with the
Dirichlet constraints eliminated through an orthonormal lift Z.  The lift
columns are orthonormal in the full-mesh quadrature inner product, so the
reduced mass matrix is the identity (stored as a positive diagonal) and
Kx = lambda Mx is the discrete spectral problem.  This construction keeps
K exactly Hermitian for arbitrary coupling unitaries, unlike ghost-point
elimination.  Units: hbar = 1 and H = -Laplace throughout.

The twisted momentum and the flux-ramp (quantum Faraday) Hamiltonian are
assembled directly on the glued periodic grid, where their matrices are
Hermitian by construction.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse

from .boundary import SelfAdjointBC
from .errors import AssemblyError, ConfigError, DimensionMismatchError
from .geometry import BoundaryOps, Mesh

__all__ = [
    "ConstraintLift",
    "HermitianOperator",
    "Wavefunction",
    "assemble_laplacian",
    "assemble_momentum",
    "assemble_faraday",
]

NULLSPACE_THRESHOLD = 1e-10
HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class ConstraintLift:
    """Embedding of reduced degrees of freedom into mesh node values.

    ``matrix`` has orthonormal columns with respect to the quadrature
    inner product diag(``full_weights``); every lifted vector satisfies
    the Dirichlet-type constraint rows ``constraints`` (acting on node
    values) up to roundoff.
    """

    matrix: scipy.sparse.csr_matrix       # (N_full, dim_reduced)
    constraints: np.ndarray               # (k_D, N_full) rows r with r @ Phi = 0
    full_weights: np.ndarray              # (N_full,)

    @property
    def full_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def reduced_dim(self) -> int:
        return self.matrix.shape[1]

    def lift(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def project(self, values: np.ndarray) -> np.ndarray:
        """Quadrature-orthogonal projection coefficients of node values."""
        return self.matrix.conj().T @ (self.full_weights * values)

    def constraint_residual(self, values: np.ndarray) -> float:
        if self.constraints.size == 0:
            return 0.0
        return float(np.max(np.abs(self.constraints @ values)))

    def orthonormality_defect(self) -> float:
        Z = self.matrix
        gram = (Z.conj().T @ scipy.sparse.diags(self.full_weights) @ Z).toarray()
        return float(np.max(np.abs(gram - np.eye(self.reduced_dim))))


class HermitianOperator:
    """Reduced stiffness K with diagonal mass M and lift map Z.

    The generalized eigenproblem K x = lambda M x is the discrete spectral
    problem of the underlying differential operator; with the orthonormal
    lift convention M is the identity diagonal.
    """

    def __init__(
        self,
        K: scipy.sparse.csr_matrix,
        M: np.ndarray,
        lift: ConstraintLift,
        mesh: Mesh,
        descriptor: dict,
    ):
        self.K = K
        self.M = np.asarray(M, dtype=float)
        self.lift = lift
        self.mesh = mesh
        self.descriptor = descriptor
        self._check()

    def _check(self) -> None:
        if self.K.shape != (self.dim, self.dim):
            raise AssemblyError(f"K shape {self.K.shape} does not match reduced dimension {self.dim}")
        herm_defect = np.abs(self.K - self.K.conj().T)
        herm = herm_defect.max() if herm_defect.nnz else 0.0
        if herm >= HERMITICITY_TOL:
            raise AssemblyError(f"assembled K is not Hermitian: max |K - K^H| = {herm:.3e}")
        if np.any(self.M <= 0.0):
            raise AssemblyError("mass diagonal must be strictly positive")
        ortho = self.lift.orthonormality_defect()
        if ortho >= 1e-12:
            raise AssemblyError(f"lift columns not orthonormal: defect {ortho:.3e}")

    @property
    def dim(self) -> int:
        return self.lift.reduced_dim

    @cached_property
    def K_dense(self) -> np.ndarray:
        return self.K.toarray()

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.K @ x

    def __repr__(self) -> str:
        kind = self.descriptor.get("kind", "?")
        return f"HermitianOperator(kind={kind!r}, dim={self.dim})"


@dataclass
class Wavefunction:
    """Complex amplitudes on the reduced degrees of freedom of an operator."""

    values: np.ndarray
    op: HermitianOperator

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.op.dim,):
            raise DimensionMismatchError(f"state has shape {v.shape}, operator expects ({self.op.dim},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("wavefunction amplitudes must be finite")
        self.values = v

    def norm(self) -> float:
        return float(np.sqrt(np.real(np.vdot(self.values, self.op.M * self.values))))

    def normalized(self) -> "Wavefunction":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero state")
        return Wavefunction(self.values / n, self.op)

    def energy(self) -> float:
        return float(np.real(np.vdot(self.values, self.op.K @ self.values)))

    def node_values(self) -> np.ndarray:
        return self.op.lift.lift(self.values)

    def overlap(self, other: "Wavefunction") -> complex:
        """Quadrature inner product, valid across operators on one mesh."""
        if self.op is other.op:
            return complex(np.vdot(self.values, self.op.M * other.values))
        if self.op.mesh.node_count != other.op.mesh.node_count:
            raise DimensionMismatchError("states live on different meshes")
        w = self.op.mesh.weights
        return complex(np.vdot(self.node_values(), w * other.node_values()))


# ---------------------------------------------------------------------------
# stiffness and lift construction
# ---------------------------------------------------------------------------


def _segment_stiffness(N: int, segment_nodes, spacings) -> scipy.sparse.csr_matrix:
    rows, cols, data = [], [], []
    for seg, h in zip(segment_nodes, spacings):
        a, b = seg[:-1], seg[1:]
        c = 1.0 / h
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        data.extend([np.full(a.size, c), np.full(a.size, c), np.full(a.size, -c), np.full(a.size, -c)])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.concatenate(data)
    return scipy.sparse.coo_matrix((data, (rows, cols)), shape=(N, N)).tocsr()


def _line_stiffness(m_nodes: int, h: float) -> scipy.sparse.csr_matrix:
    main = np.full(m_nodes, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    off = np.full(m_nodes - 1, -1.0 / h)
    return scipy.sparse.diags([off, main, off], [-1, 0, 1]).tocsr()


_stiffness_cache: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _full_stiffness(mesh: Mesh) -> scipy.sparse.csr_matrix:
    cached = _stiffness_cache.get(mesh)
    if cached is None:
        cached = _build_full_stiffness(mesh)
        _stiffness_cache[mesh] = cached
    return cached


def _build_full_stiffness(mesh: Mesh) -> scipy.sparse.csr_matrix:
    N = mesh.node_count
    if mesh.dimension == 1:
        return _segment_stiffness(N, mesh.segment_nodes, mesh.spacings)
    gi = mesh.grid_index
    nx, ny = gi.shape[0] - 1, gi.shape[1] - 1
    hx, hy = mesh.spacings
    wx = np.full(nx + 1, hx); wx[0] = wx[-1] = hx / 2.0
    wy = np.full(ny + 1, hy); wy[0] = wy[-1] = hy / 2.0
    S_nat = scipy.sparse.kron(_line_stiffness(nx + 1, hx), scipy.sparse.diags(wy)) + scipy.sparse.kron(
        scipy.sparse.diags(wx), _line_stiffness(ny + 1, hy)
    )
    # natural (row-major) index of each mesh node, then permute
    nat_of_mesh = np.empty(N, dtype=int)
    for i in range(nx + 1):
        for j in range(ny + 1):
            nat_of_mesh[gi[i, j]] = i * (ny + 1) + j
    S_nat = S_nat.tocsr()
    return S_nat[nat_of_mesh][:, nat_of_mesh].tocsr()


def _build_lift(mesh: Mesh, bops: BoundaryOps, bc: SelfAdjointBC) -> ConstraintLift:
    """Orthonormal null-space lift of the Dirichlet constraint rows.

    Constraints only couple boundary nodes, so the lift is block diagonal:
    scaled unit columns on interior nodes plus an orthonormalized null
    basis of the constraint rows on the boundary block.  The boundary null
    basis comes from a complete orthogonal (SVD) decomposition with a
    fixed rank threshold, since constraints may couple distinct boundary
    points.
    """
    N = mesh.node_count
    n_int = mesh.interior_count
    bidx = mesh.boundary_indices
    n_b = bidx.size
    w = mesh.weights
    sqrt_wb = np.sqrt(bops.weights)

    rows_hat = bc.constraint_rows  # (k_D, n_b) acting on hat coordinates
    k_D = rows_hat.shape[0]
    R_node = rows_hat * sqrt_wb[None, :]  # acting on boundary node values

    if k_D == 0:
        null_basis = np.eye(n_b, dtype=complex)
    else:
        _, svals, vh = np.linalg.svd(R_node)
        rank = int(np.sum(svals > NULLSPACE_THRESHOLD * max(svals[0], 1.0)))
        if rank != k_D:
            raise AssemblyError(
                f"constraint elimination is rank deficient: {k_D} constraint rows, numerical rank {rank}"
            )
        null_basis = vh[rank:].conj().T  # (n_b, n_b - k_D), Euclidean-orthonormal

    m_b = null_basis.shape[1]
    if m_b:
        gram = null_basis.conj().T @ (w[bidx][:, None] * null_basis)
        gram = 0.5 * (gram + gram.conj().T)
        L = scipy.linalg.cholesky(gram, lower=True)
        Zb = scipy.linalg.solve_triangular(L, null_basis.conj().T, lower=True).conj().T
    else:
        Zb = null_basis.astype(complex)

    dim = n_int + m_b
    rows, cols, data = [], [], []
    interior = np.arange(n_int)
    rows.append(interior)
    cols.append(interior)
    data.append(1.0 / np.sqrt(w[:n_int]).astype(complex))
    if m_b:
        rr, cc = np.nonzero(np.ones_like(Zb, dtype=bool))
        rows.append(bidx[rr])
        cols.append(n_int + cc)
        data.append(Zb[rr, cc])
    Z = scipy.sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(N, dim)
    ).tocsr()

    constraints = np.zeros((k_D, N), dtype=complex)
    if k_D:
        constraints[:, bidx] = R_node
    return ConstraintLift(matrix=Z, constraints=constraints, full_weights=w)


def _symmetrized(K: scipy.sparse.spmatrix) -> scipy.sparse.csr_matrix:
    return (0.5 * (K + K.conj().T)).tocsr()


def assemble_laplacian(mesh: Mesh, bops: BoundaryOps, bc: SelfAdjointBC) -> HermitianOperator:
    """Assemble -Laplace under a Cayley-decomposed boundary condition.

    The quadratic form is <dF, dG> minus the Robin boundary term on the
    constraint complement; Dirichlet constraints are eliminated through
    the orthonormal lift.  For the all-constraints condition this reduces
    to the standard Dirichlet stiffness.
    """
    if bc.dim != bops.boundary_dim:
        raise DimensionMismatchError(
            f"boundary condition has dimension {bc.dim}, mesh boundary has {bops.boundary_dim} nodes"
        )
    S = _full_stiffness(mesh).astype(complex)
    bidx = mesh.boundary_indices
    sqrt_wb = np.sqrt(bops.weights)
    robin = bc.robin_on_boundary()
    if robin.size and np.any(robin != 0.0):
        term = sqrt_wb[:, None] * robin * sqrt_wb[None, :]
        S = S.tolil()
        S[np.ix_(bidx, bidx)] = S[np.ix_(bidx, bidx)].toarray() - term
        S = S.tocsr()
    lift = _build_lift(mesh, bops, bc)
    K = _symmetrized(lift.matrix.conj().T @ S @ lift.matrix)
    M = np.ones(lift.reduced_dim)
    return HermitianOperator(K, M, lift, mesh, {"kind": "laplacian", "bc_dim": bc.dim, "n_constraints": bc.n_constraints})


def _glued_ring_lift(mesh: Mesh, phase: complex) -> tuple[ConstraintLift, np.ndarray, float]:
    """Lift for a single interval with ends glued up to a phase.

    Reduced index r runs over grid points x_0 .. x_{m-1} (x_m identified
    with x_0); node values satisfy F(a) = phase * F(b).  Returns the lift,
    the grid coordinates of the reduced points, and the spacing.
    """
    assert mesh.segment_nodes is not None and len(mesh.segment_nodes) == 1
    seg = mesh.segment_nodes[0]
    h = mesh.spacings[0]
    m = seg.size - 1
    N = mesh.node_count
    inv_sqrt_h = 1.0 / np.sqrt(h)

    rows = [seg[0], seg[-1]]
    cols = [0, 0]
    data = [inv_sqrt_h, np.conj(phase) * inv_sqrt_h]
    rows.extend(seg[1:-1])
    cols.extend(range(1, m))
    data.extend([inv_sqrt_h] * (m - 1))
    Z = scipy.sparse.coo_matrix((data, (rows, cols)), shape=(N, m)).tocsr()

    constraints = np.zeros((1, N), dtype=complex)
    constraints[0, seg[0]] = np.conj(phase) / np.sqrt(2.0)
    constraints[0, seg[-1]] = -1.0 / np.sqrt(2.0)
    lift = ConstraintLift(matrix=Z, constraints=constraints, full_weights=mesh.weights)
    a = mesh.segments[0][0]
    coords = a + h * np.arange(m)
    return lift, coords, h


def assemble_momentum(mesh: Mesh, alpha: float) -> HermitianOperator:
    """Hermitian i d/dx with the twisted wraparound F(0) = e^{i alpha} F(1).

    Central differences on the glued grid; the wraparound hop carries the
    twist phase, so the matrix is Hermitian by construction and its low
    eigenvalues approach alpha + 2 pi n.
    """
    if mesh.dimension != 1 or mesh.segments is None or len(mesh.segments) != 1:
        raise ConfigError("unsupported domain: the momentum operator needs a single-interval mesh")
    phase = np.exp(1j * float(alpha))          # F(a) = phase * F(b)
    lift, coords, h = _glued_ring_lift(mesh, phase)
    m = lift.reduced_dim
    c = 1.0 / (2.0 * h)
    K = scipy.sparse.diags(
        [np.full(m - 1, -1j * c), np.full(m - 1, 1j * c)], [-1, 1], format="lil", dtype=complex
    )
    # wraparound hops carry the gluing phase F(x_m) = conj(phase) * F(x_0)
    K[m - 1, 0] = 1j * c * np.conj(phase)
    K[0, m - 1] = -1j * c * phase
    K = K.tocsr()
    M = np.ones(m)
    return HermitianOperator(
        K, M, lift, mesh, {"kind": "momentum", "alpha": float(alpha), "theta": coords, "grid_spacing": h}
    )


def assemble_faraday(mesh: Mesh, eps: float, eps_dot: float) -> HermitianOperator:
    """Flux-ramp Hamiltonian (i d/dtheta - eps)^2 + theta * eps_dot.

    Lives on the periodic reference domain over [0, 2 pi]: the magnetic
    stiffness is the squared twisted first difference (forward hops carry
    the phase e^{i eps h}), and the electromotive term multiplies by the
    branch theta in [0, 2 pi) as a plain real diagonal.
    """
    if mesh.dimension != 1 or mesh.segments is None or len(mesh.segments) != 1:
        raise ConfigError("domain error: the flux-ramp Hamiltonian needs a single-interval mesh")
    a, b = mesh.segments[0]
    if abs(a) > 1e-12 or abs(b - 2.0 * np.pi) > 1e-12:
        raise ConfigError(f"domain error: expected the interval [0, 2*pi], got [{a}, {b}]")
    lift, theta, h = _glued_ring_lift(mesh, phase=1.0 + 0.0j)
    m = lift.reduced_dim
    hop = -np.exp(1j * float(eps) * h) / h**2
    diag = np.full(m, 2.0 / h**2, dtype=complex) + float(eps_dot) * theta
    K = scipy.sparse.diags(
        [np.full(m - 1, np.conj(hop)), diag, np.full(m - 1, hop)], [-1, 0, 1], format="lil", dtype=complex
    )
    K[m - 1, 0] = hop
    K[0, m - 1] = np.conj(hop)
    K = K.tocsr()
    M = np.ones(m)
    return HermitianOperator(
        K, M, lift, mesh,
        {"kind": "faraday", "eps": float(eps), "eps_dot": float(eps_dot), "theta": theta, "grid_spacing": h},
    )
