"""Boundary unitaries and their conversion to implementable conditions.

A self-adjoint realization of the Laplace operator is selected by a
unitary matrix U on the (discretized) boundary Hilbert space through the
characteristic condition

    (phi - i*phidot) = U (phi + i*phidot),

where phi is the boundary trace and phidot the outward normal derivative.
All unitaries here act on *weight-orthonormalized* boundary coordinates
phi_hat = W_b^(1/2) phi, so that plain matrix unitarity is the right
notion regardless of edge quadrature; for interval endpoints the boundary
measure is counting measure and hat coordinates coincide with node values.

``cayley_decompose`` splits U into the eigenvalue -1 subspace (Dirichlet
constraints P_W phi = 0) and a Hermitian Robin operator A on the
complement with phidot = A phi there.  On an eigenvector with eigenphase
theta the characteristic condition forces A = -tan(theta/2), which is the
spectral form of i(I+U)^(-1)(U-I).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionMismatchError, ValidationError
from .geometry import BoundaryPiece

__all__ = [
    "BoundaryUnitary",
    "SelfAdjointBC",
    "BCPath",
    "TransferMap",
    "unitary_from_preset",
    "cayley_decompose",
    "spectral_gap",
    "edge_transfer_map",
    "pasting_unitary",
    "assemble_block_unitary",
    "interpolate_path",
    "unitary_condition_residual",
    "haar_unitary",
    "PRESET_NAMES",
]

UNITARITY_TOL = 1e-12
SNAP_TOL = 1e-8  # eigenphases within this distance of pi are snapped to exactly pi


def _eig_unitary(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenphases in (-pi, pi] and orthonormal eigenvectors of a unitary.

    Uses the complex Schur form, which for normal matrices yields an
    orthonormal eigenbasis even in the presence of degeneracies.
    """
    T, Z = scipy.linalg.schur(np.asarray(matrix, dtype=complex), output="complex")
    lam = np.diag(T)
    theta = np.angle(lam / np.abs(lam))
    order = np.argsort(theta, kind="stable")
    return theta[order], Z[:, order]


class BoundaryUnitary:
    """A unitary matrix on the boundary space, with cached eigenstructure.

    Eigenphases are reported in (-pi, pi]; phases closer than ``SNAP_TOL``
    to the -1 eigenvalue are snapped to exactly +pi (raw values remain
    available for tolerance-sensitive callers).
    """

    def __init__(self, matrix: np.ndarray):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"boundary unitary must be square, got shape {m.shape}")
        defect = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
        if defect >= UNITARITY_TOL:
            raise ValidationError(f"matrix is not unitary: max |U^H U - I| = {defect:.3e}")
        self.matrix = m
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def _eig(self) -> tuple[np.ndarray, np.ndarray]:
        return _eig_unitary(self.matrix)

    @property
    def raw_eigenphases(self) -> np.ndarray:
        return self._eig[0]

    @property
    def eigenphases(self) -> np.ndarray:
        theta = self._eig[0].copy()
        theta[np.pi - np.abs(theta) < SNAP_TOL] = np.pi
        return theta

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eig[1]

    def __repr__(self) -> str:
        return f"BoundaryUnitary(dim={self.dim})"


@dataclass(frozen=True)
class SelfAdjointBC:
    """Cayley decomposition of a boundary unitary.

    ``dirichlet_basis`` spans the eigenvalue -1 subspace W (constraints
    P_W phi = 0); ``complement_basis`` spans its orthogonal complement,
    where the boundary data satisfy phidot = A phi with the Hermitian
    ``robin_operator`` A expressed in complement-basis coordinates.
    """

    dirichlet_basis: np.ndarray    # (n_b, k_D), orthonormal columns
    complement_basis: np.ndarray   # (n_b, n_b - k_D), orthonormal columns
    robin_operator: np.ndarray     # (n_b - k_D, n_b - k_D), Hermitian
    source: BoundaryUnitary

    @property
    def dim(self) -> int:
        return self.dirichlet_basis.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.dirichlet_basis.shape[1]

    @property
    def constraint_rows(self) -> np.ndarray:
        """Rows r with the Dirichlet condition r @ phi = 0 (hat coordinates)."""
        return self.dirichlet_basis.conj().T

    def robin_on_boundary(self) -> np.ndarray:
        """The Robin operator as an n_b x n_b matrix in hat coordinates."""
        C, A = self.complement_basis, self.robin_operator
        full = C @ A @ C.conj().T
        return 0.5 * (full + full.conj().T)

    def condition_residual(self, phi: np.ndarray, phi_dot: np.ndarray) -> float:
        """Max residual of {P_W phi = 0, phidot = A phi on the complement}.

        phidot is unconstrained on W, so only these two residuals appear.
        """
        D, C, A = self.dirichlet_basis, self.complement_basis, self.robin_operator
        r1 = D.conj().T @ phi
        r2 = C.conj().T @ phi_dot - A @ (C.conj().T @ phi)
        return float(max(np.max(np.abs(r1), initial=0.0), np.max(np.abs(r2), initial=0.0)))

    def sample_boundary_data(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Random (phi, phidot) satisfying the decomposed conditions."""
        D, C, A = self.dirichlet_basis, self.complement_basis, self.robin_operator
        m, k = C.shape[1], D.shape[1]
        a = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        b = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        phi = C @ a
        phi_dot = C @ (A @ a) + (D @ b if k else 0.0)
        return phi, np.asarray(phi_dot)


def unitary_condition_residual(U: BoundaryUnitary, phi: np.ndarray, phi_dot: np.ndarray) -> float:
    """Norm of (phi - i*phidot) - U (phi + i*phidot)."""
    lhs = phi - 1j * phi_dot
    rhs = U.matrix @ (phi + 1j * phi_dot)
    return float(np.linalg.norm(lhs - rhs))


def cayley_decompose(U: BoundaryUnitary, tol: float = SNAP_TOL) -> SelfAdjointBC:
    """Split a boundary unitary into Dirichlet constraints plus Robin data.

    Eigenphases within ``tol`` of pi go to the constraint subspace; on the
    complement the Robin operator is assembled spectrally with eigenvalues
    -tan(theta/2).
    """
    if not 0.0 < tol <= 1e-6:
        raise ValidationError(f"tol must lie in (0, 1e-6], got {tol}")
    theta, vecs = U.raw_eigenphases, U.eigenvectors
    near_minus_one = (np.pi - np.abs(theta)) < tol
    D = vecs[:, near_minus_one]
    C = vecs[:, ~near_minus_one]
    a = -np.tan(theta[~near_minus_one] / 2.0)
    A = np.diag(a).astype(complex)
    return SelfAdjointBC(dirichlet_basis=D, complement_basis=C, robin_operator=A, source=U)


def spectral_gap(U: BoundaryUnitary) -> dict:
    """Distance from -1 to the rest of the spectrum of U (chordal metric).

    Returns ``{"gap": g, "classification": c}``; when the spectrum is
    exactly {-1} the gap is 2 by convention (the metric maximum, no Robin
    part exists).  The ``no_gap`` classification cannot occur for finite
    matrices and is retained for interface completeness only.
    """
    theta = U.eigenphases
    has_minus_one = bool(np.any(theta == np.pi))
    others = theta[theta != np.pi]
    if others.size == 0:
        gap = 2.0
    else:
        gap = float(np.min(np.abs(np.exp(1j * others) + 1.0)))
    classification = "isolated_minus_one" if has_minus_one else "invertible_I_plus_U"
    return {"gap": gap, "classification": classification}


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

PRESET_NAMES = (
    "dirichlet",
    "neumann",
    "periodic",
    "quasi_periodic",
    "two_interval_U1",
    "two_interval_U2",
    "block_pasting",
    "custom",
)

_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def unitary_from_preset(name: str, **params) -> BoundaryUnitary:
    """Construct one of the documented boundary unitaries.

    Presets: ``dirichlet(n_b)`` -> -I, ``neumann(n_b)`` -> I,
    ``periodic`` (ends joined), ``quasi_periodic(alpha)`` with
    phi(0) = e^{i alpha} phi(end), ``two_interval_U1`` (each interval
    closed into its own ring), ``two_interval_U2`` (both intervals joined
    into a single ring), ``block_pasting(T1, T2)``, ``custom(matrix)``.
    """
    def take(key, default=None):
        if key in params:
            return params.pop(key)
        if default is not None:
            return default
        raise ConfigError(f"preset {name!r} requires parameter {key!r}")

    if name == "dirichlet":
        U = BoundaryUnitary(-np.eye(int(take("n_b", 2)), dtype=complex))
    elif name == "neumann":
        U = BoundaryUnitary(np.eye(int(take("n_b", 2)), dtype=complex))
    elif name == "periodic":
        U = BoundaryUnitary(_SWAP)
    elif name == "quasi_periodic":
        alpha = float(take("alpha", 0.0))
        U = BoundaryUnitary(np.array([[0.0, np.exp(1j * alpha)], [np.exp(-1j * alpha), 0.0]]))
    elif name == "two_interval_U1":
        U = BoundaryUnitary(scipy.linalg.block_diag(_SWAP, _SWAP))
    elif name == "two_interval_U2":
        U = BoundaryUnitary(np.fliplr(np.eye(4, dtype=complex)))
    elif name == "block_pasting":
        U = pasting_unitary(take("T1"), take("T2"))
    elif name == "custom":
        U = BoundaryUnitary(np.asarray(take("matrix"), dtype=complex))
    else:
        raise ConfigError(f"unknown boundary preset {name!r}; known presets: {', '.join(PRESET_NAMES)}")
    if params:
        raise ConfigError(f"preset {name!r}: unknown parameters {sorted(params)}")
    return U


def haar_unitary(dim: int, rng: np.random.Generator) -> BoundaryUnitary:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return BoundaryUnitary(q)


# ---------------------------------------------------------------------------
# edge transfer maps and pasting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferMap:
    """Unitary identification of one boundary edge with a reference edge.

    ``matrix`` acts between weight-orthonormalized (hat) coordinates and is
    exactly unitary; ``node_matrix`` gives the same map between plain node
    values, where it is unitary with respect to the quadrature products.
    """

    matrix: np.ndarray
    edge_weights: np.ndarray
    ref_weights: np.ndarray

    @property
    def node_matrix(self) -> np.ndarray:
        return (self.matrix / np.sqrt(self.ref_weights)[:, None]) * np.sqrt(self.edge_weights)[None, :]


def edge_transfer_map(
    edge: BoundaryPiece,
    ref_param: np.ndarray,
    ref_weights: np.ndarray,
    g: np.ndarray | None = None,
) -> TransferMap:
    """Discrete pullback map from an edge onto a reference parametrization.

    ``g`` samples a strictly monotone diffeomorphism edge-parameter ->
    reference-parameter at the edge nodes (affine rescaling by default).
    The raw map interpolates along g and scales by the square root of the
    inverse Jacobian; a polar correction then restores exact unitarity in
    hat coordinates, which discrete interpolation alone cannot provide.
    """
    s = np.asarray(edge.param, dtype=float)
    y = np.asarray(ref_param, dtype=float)
    we = np.asarray(edge.weights, dtype=float)
    w0 = np.asarray(ref_weights, dtype=float)
    if y.size != s.size:
        raise DimensionMismatchError(
            f"transfer map needs matched node counts, got edge {s.size} vs reference {y.size}"
        )
    if s.size == 1:
        mat = np.array([[1.0 + 0.0j]])
        return TransferMap(matrix=mat, edge_weights=we, ref_weights=w0)

    if g is None:
        g = y[0] + (s - s[0]) * (y[-1] - y[0]) / (s[-1] - s[0])
    g = np.asarray(g, dtype=float)
    if g.shape != s.shape:
        raise DimensionMismatchError(f"g samples must match edge nodes, got {g.shape} vs {s.shape}")
    dg = np.diff(g)
    if not (np.all(dg > 0.0) or np.all(dg < 0.0)):
        raise ValidationError("g samples must be strictly monotone")
    if dg[0] < 0.0:
        g, s_sorted, we_sorted = g[::-1], s[::-1], we[::-1]
    else:
        s_sorted, we_sorted = s, we

    # inverse map sampled on the reference grid, then its Jacobian
    p = np.interp(y, g, s_sorted)
    jac = np.abs(np.gradient(p, y))

    m = y.size
    interp = np.zeros((m, s.size))
    idx = np.searchsorted(s_sorted, p, side="right") - 1
    idx = np.clip(idx, 0, s.size - 2)
    frac = (p - s_sorted[idx]) / (s_sorted[idx + 1] - s_sorted[idx])
    cols = np.arange(s.size)
    for r in range(m):
        interp[r, idx[r]] += 1.0 - frac[r]
        interp[r, idx[r] + 1] += frac[r]
    if dg[0] < 0.0:
        interp = interp[:, ::-1]

    raw = np.sqrt(jac)[:, None] * interp
    hat = np.sqrt(w0)[:, None] * raw / np.sqrt(we)[None, :]
    u, _, vt = np.linalg.svd(hat)
    return TransferMap(matrix=(u @ vt).astype(complex), edge_weights=we, ref_weights=w0)


def pasting_unitary(T1: TransferMap, T2: TransferMap) -> BoundaryUnitary:
    """Boundary unitary identifying two edges through their transfer maps.

    The block form [[0, T1^H T2], [T2^H T1, 0]] (hat coordinates) encodes
    T1 phi_1 = T2 phi_2 together with T1 phidot_1 = -T2 phidot_2, i.e.
    generalized periodic pasting of the two edges.
    """
    if T1.matrix.shape[0] != T2.matrix.shape[0]:
        raise DimensionMismatchError(
            f"transfer maps target different reference dimensions: {T1.matrix.shape[0]} vs {T2.matrix.shape[0]}"
        )
    B = T1.matrix.conj().T @ T2.matrix
    n1, n2 = T1.matrix.shape[1], T2.matrix.shape[1]
    U = np.zeros((n1 + n2, n1 + n2), dtype=complex)
    U[:n1, n1:] = B
    U[n1:, :n1] = B.conj().T
    return BoundaryUnitary(U)


def assemble_block_unitary(
    piece_sizes: Sequence[int],
    blocks: Sequence[tuple[Sequence[int], np.ndarray | BoundaryUnitary]],
) -> BoundaryUnitary:
    """Assemble a full-boundary unitary from per-piece-group blocks.

    ``blocks`` assigns to each tuple of piece indices a unitary acting on
    the concatenation of those pieces; every piece must be covered exactly
    once.  The result acts on the concatenation of all pieces in order.
    """
    sizes = [int(s) for s in piece_sizes]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n_b = int(offsets[-1])
    covered: set[int] = set()
    U = np.zeros((n_b, n_b), dtype=complex)
    for piece_idx, block in blocks:
        piece_idx = tuple(int(i) for i in piece_idx)
        for i in piece_idx:
            if i in covered:
                raise ConfigError(f"piece {i} assigned to more than one block")
            covered.add(i)
        sel = np.concatenate([np.arange(offsets[i], offsets[i + 1]) for i in piece_idx])
        mat = block.matrix if isinstance(block, BoundaryUnitary) else np.asarray(block, dtype=complex)
        if mat.shape != (sel.size, sel.size):
            raise DimensionMismatchError(
                f"block for pieces {piece_idx} has shape {mat.shape}, expected {(sel.size, sel.size)}"
            )
        U[np.ix_(sel, sel)] = mat
    if covered != set(range(len(sizes))):
        missing = sorted(set(range(len(sizes))) - covered)
        raise ConfigError(f"pieces {missing} not covered by any block")
    return BoundaryUnitary(U)


# ---------------------------------------------------------------------------
# paths of boundary conditions
# ---------------------------------------------------------------------------


def interpolate_path(
    U_a: BoundaryUnitary,
    U_b: BoundaryUnitary,
    rule: str = "eigenphase",
    s: float = 0.5,
) -> BoundaryUnitary:
    """Interpolate between two boundary unitaries at parameter s in [0, 1].

    The ``eigenphase`` rule follows U_a * exp(s * log(U_a^H U_b)) with
    principal-branch phases (-1 snapped to +pi); ``great_circle`` projects
    the linear blend back to the unitary group by polar decomposition.
    Both rules reproduce the endpoints exactly.
    """
    return BCPath(U_a, U_b, rule=rule).at(s)


class BCPath:
    """A path s -> U(s) of boundary unitaries with a cached gap profile."""

    def __init__(
        self,
        U_a: BoundaryUnitary,
        U_b: BoundaryUnitary,
        rule: str = "eigenphase",
        samples: int = 101,
        sampler: Callable[[float], BoundaryUnitary] | None = None,
    ):
        if U_a.dim != U_b.dim:
            raise DimensionMismatchError(f"endpoint dimensions differ: {U_a.dim} vs {U_b.dim}")
        self.U_a, self.U_b, self.rule = U_a, U_b, rule
        self.samples = int(samples)
        if sampler is not None:
            self._sampler = sampler
        elif rule == "eigenphase":
            theta, V = _eig_unitary(U_a.matrix.conj().T @ U_b.matrix)
            theta = theta.copy()
            theta[np.pi - np.abs(theta) < SNAP_TOL] = np.pi
            self._sampler = lambda s: BoundaryUnitary(
                self.U_a.matrix @ ((V * np.exp(1j * s * theta)) @ V.conj().T)
            )
        elif rule == "great_circle":
            def great_circle(s: float) -> BoundaryUnitary:
                blend = (1.0 - s) * self.U_a.matrix + s * self.U_b.matrix
                u, _, vt = np.linalg.svd(blend)
                return BoundaryUnitary(u @ vt)
            self._sampler = great_circle
        else:
            raise ConfigError(f"unknown path rule {rule!r}; known rules: eigenphase, great_circle")

    @classmethod
    def flux_family(cls, eps_start: float = 0.0, eps_end: float = 1.0, samples: int = 101) -> "BCPath":
        """Quasi-periodic ring family: U(s) has twist alpha = -2*pi*eps(s)."""
        def sampler(s: float) -> BoundaryUnitary:
            eps = eps_start + s * (eps_end - eps_start)
            return unitary_from_preset("quasi_periodic", alpha=-2.0 * np.pi * eps)
        return cls(sampler(0.0), sampler(1.0), rule="flux_family", samples=samples, sampler=sampler)

    def at(self, s: float) -> BoundaryUnitary:
        if not 0.0 <= s <= 1.0:
            raise ValidationError(f"path parameter must lie in [0, 1], got {s}")
        if s == 0.0:
            return self.U_a
        if s == 1.0:
            return self.U_b
        return self._sampler(float(s))

    @cached_property
    def gap_profile(self) -> tuple[np.ndarray, np.ndarray]:
        s_vals = np.linspace(0.0, 1.0, self.samples)
        gaps = np.array([spectral_gap(self.at(s))["gap"] for s in s_vals])
        return s_vals, gaps

    @property
    def min_gap(self) -> float:
        return float(np.min(self.gap_profile[1]))
