"""Eigensolves, spectral flow along boundary-condition paths, intertwiners.

Eigenpairs of the reduced problem K x = lambda M x are computed densely up
to moderate dimension and by shift-invert Lanczos above it, with the shift
placed below a Gershgorin lower bound so the factorization can never hit
an eigenvalue.  Degenerate subspaces get a deterministic gauge: clusters
are rotated onto fixed Fourier probes (or onto the previous sample of a
flow), then each vector's largest entry is made real positive.  Flow
curves are continued by greedy maximal-overlap matching with adaptive
step halving whenever the best overlap drops below 0.9.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .boundary import BCPath, BoundaryUnitary, cayley_decompose, spectral_gap, unitary_from_preset
from .errors import DimensionMismatchError, SolverError, ValidationError
from .geometry import BoundaryOps, Mesh
from .operators import HermitianOperator, assemble_laplacian

__all__ = [
    "SpectralResult",
    "FlowResult",
    "CrossingEvent",
    "Intertwiner",
    "cluster_indices",
    "eigensolve",
    "bracket_check",
    "spectral_flow",
    "build_intertwiner",
    "path_hypothesis_report",
]

CLUSTER_TOL_SCALE = 1e-6
DENSE_CUTOFF = 900
MATCH_OVERLAP_MIN = 0.9
# gauge rotations are only applied inside clusters split more finely than
# this, so they cannot push eigenpair residuals past the 1e-9 contract
ROTATE_SPLIT_TOL = 3e-10


def cluster_indices(eigenvalues: np.ndarray, tol_scale: float = CLUSTER_TOL_SCALE) -> list[np.ndarray]:
    """Group ascending eigenvalues into near-degenerate clusters.

    Neighbors closer than tol_scale * max(1, |lambda|) share a cluster;
    the scale separates physical degeneracy from discretization splitting.
    """
    lam = np.asarray(eigenvalues)
    clusters: list[list[int]] = [[0]] if lam.size else []
    for i in range(1, lam.size):
        tol = tol_scale * max(1.0, abs(lam[i]))
        if lam[i] - lam[i - 1] <= tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return [np.asarray(c) for c in clusters]


@dataclass
class SpectralResult:
    """Lowest eigenpairs of a reduced operator, M-orthonormal, ascending."""

    eigenvalues: np.ndarray
    vectors: np.ndarray          # (dim, k) reduced coordinates
    clusters: list[np.ndarray]
    op: HermitianOperator

    @property
    def k(self) -> int:
        return int(self.eigenvalues.size)

    def lifted(self) -> np.ndarray:
        """Eigenvectors as node-value columns (N_full, k)."""
        return np.asarray(self.op.lift.matrix @ self.vectors)

    def validate(self, residual_tol: float = 1e-9, ortho_tol: float = 1e-10) -> None:
        K, M = self.op.K, self.op.M
        res = K @ self.vectors - (M[:, None] * self.vectors) * self.eigenvalues[None, :]
        worst = float(np.max(np.linalg.norm(res, axis=0)))
        if worst >= residual_tol:
            raise SolverError(f"eigenpair residual {worst:.3e} exceeds {residual_tol:.1e}")
        gram = self.vectors.conj().T @ (M[:, None] * self.vectors)
        defect = float(np.max(np.abs(gram - np.eye(self.k))))
        if defect >= ortho_tol:
            raise SolverError(f"eigenvectors not M-orthonormal: defect {defect:.3e}")


def _probe_frequency(position: int) -> int:
    """Mode frequency for a sorted spectral position: 0, -1, +1, -2, +2, ..."""
    if position == 0:
        return 0
    half = (position + 1) // 2
    return -half if position % 2 == 1 else half


def _node_fourier_probes(op: HermitianOperator, positions: np.ndarray) -> np.ndarray:
    """Fourier probes in node space along the mesh's canonical coordinate.

    On a glued ring these are exactly the degenerate eigenvectors, so the
    Procrustes gauge lands on the physical angular modes; elsewhere they
    are an arbitrary but fixed deterministic target.
    """
    t = op.mesh.position_fraction()
    cols = [np.exp(2j * np.pi * _probe_frequency(int(p)) * t) for p in positions]
    return np.stack(cols, axis=1)


def _procrustes_rotate(block: np.ndarray, target: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """Unitary Q maximizing Re tr(Q^H block^H diag(metric) target)."""
    G = block.conj().T @ (metric[:, None] * target)
    u, _, vt = np.linalg.svd(G)
    return u @ vt


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for j in range(out.shape[1]):
        p = int(np.argmax(np.abs(out[:, j])))
        z = out[p, j]
        if z != 0.0:
            out[:, j] *= np.conj(z) / abs(z)
    return out


def _canonical_gauge(vals: np.ndarray, vecs: np.ndarray, op: HermitianOperator) -> np.ndarray:
    """Deterministic degenerate-subspace convention against Fourier probes.

    Only genuinely degenerate clusters (split below ROTATE_SPLIT_TOL) are
    rotated; rotating merely close eigenvectors would trade residual
    accuracy for gauge.
    """
    out = vecs.copy()
    w = op.mesh.weights
    Z = op.lift.matrix
    for cl in cluster_indices(vals):
        if cl.size > 1 and vals[cl[-1]] - vals[cl[0]] <= ROTATE_SPLIT_TOL:
            probes = _node_fourier_probes(op, cl)
            lifted = np.asarray(Z @ out[:, cl])
            Q = _procrustes_rotate(lifted, probes, w)
            out[:, cl] = out[:, cl] @ Q
    return _fix_phases(out)


def _gershgorin_lower(K) -> float:
    diag = np.real(K.diagonal())
    radius = np.asarray(abs(K).sum(axis=1)).ravel() - np.abs(K.diagonal())
    return float(np.min(diag - radius))


def eigensolve(op: HermitianOperator, k: int, validate: bool = True) -> SpectralResult:
    """The k lowest eigenpairs of K x = lambda M x, ascending, M-orthonormal.

    Dense Hermitian solve up to dimension ~900 or for large k; otherwise
    shift-invert Lanczos with a deterministic start vector and the shift a
    safe margin below the Gershgorin bound of the spectrum.
    """
    dim = op.dim
    if not 1 <= k <= dim:
        raise ValidationError(f"need 1 <= k <= {dim}, got k={k}")
    M = op.M
    scale = 1.0 / np.sqrt(M)
    use_dense = dim <= DENSE_CUTOFF or k > min(dim // 3, 40)
    if use_dense:
        Ks = scale[:, None] * op.K_dense * scale[None, :]
        try:
            vals, vecs = scipy.linalg.eigh(Ks, subset_by_index=[0, k - 1])
        except scipy.linalg.LinAlgError as err:
            raise SolverError(f"dense eigensolver failed: {err}") from err
    else:
        Ks = (scipy.sparse.diags(scale) @ op.K @ scipy.sparse.diags(scale)).tocsc()
        sigma = _gershgorin_lower(Ks) - 1.0
        v0 = np.ones(dim) / np.sqrt(dim)
        try:
            vals, vecs = scipy.sparse.linalg.eigsh(Ks, k=k, sigma=sigma, which="LM", v0=v0)
        except scipy.sparse.linalg.ArpackError as err:
            raise SolverError(f"shift-invert eigensolver failed: {err}") from err
        order = np.argsort(vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
    vecs = scale[:, None] * vecs.astype(complex)  # back to M-orthonormal coordinates
    vecs = _canonical_gauge(vals, vecs, op)
    result = SpectralResult(eigenvalues=vals, vectors=vecs, clusters=cluster_indices(vals), op=op)
    if validate:
        result.validate()
    return result


# ---------------------------------------------------------------------------
# bracketing
# ---------------------------------------------------------------------------


def bracket_check(mesh: Mesh, bops: BoundaryOps, U: BoundaryUnitary, k: int) -> dict:
    """Check lambda_n(Neumann) <= lambda_n(U) <= lambda_n(Dirichlet).

    Requires sigma(U) inside {-1, 1} (eigenphases within 1e-8 of 0 or pi),
    where the inequality holds; the tolerance is ten times a per-mode
    discretization error estimate.
    """
    theta = U.raw_eigenphases
    off = np.minimum(np.abs(theta), np.pi - np.abs(theta))
    if np.any(off > 1e-8):
        raise ValidationError(
            f"bracketing requires eigenvalues in {{-1, 1}}; worst eigenphase offset {np.max(off):.3e}"
        )
    lam_U = eigensolve(assemble_laplacian(mesh, bops, cayley_decompose(U)), k).eigenvalues
    n_b = U.dim
    lam_N = eigensolve(
        assemble_laplacian(mesh, bops, cayley_decompose(unitary_from_preset("neumann", n_b=n_b))), k
    ).eigenvalues
    lam_D = eigensolve(
        assemble_laplacian(mesh, bops, cayley_decompose(unitary_from_preset("dirichlet", n_b=n_b))), k
    ).eigenvalues
    modes = np.arange(1, k + 1)
    tol = 10.0 * lam_D * (modes * np.pi * mesh.h) ** 2 / 12.0 + 1e-9
    lower_margin = lam_U - lam_N
    upper_margin = lam_D - lam_U
    ok = bool(np.all(lower_margin >= -tol) and np.all(upper_margin >= -tol))
    return {
        "pass": ok,
        "lambda_U": lam_U,
        "lambda_N": lam_N,
        "lambda_D": lam_D,
        "lower_margins": lower_margin,
        "upper_margins": upper_margin,
        "tolerances": tol,
    }


# ---------------------------------------------------------------------------
# spectral flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossingEvent:
    """Two matched curves exchanging order or touching within cluster_tol."""

    kind: str            # "exchange" or "near_degenerate"
    s_lo: float
    s_hi: float
    s_estimate: float
    curves: tuple[int, int]
    min_separation: float
    value: float         # eigenvalue near the event


@dataclass
class FlowResult:
    """Eigenvalue curves along a path, continued by maximal overlap."""

    samples: np.ndarray           # accepted path parameters, ascending
    curves: np.ndarray            # (n_samples, k) matched eigenvalue curves
    vectors: np.ndarray           # (n_samples, N_full, k) lifted, gauge-continued
    permutations: list[np.ndarray]  # per step: curve -> sorted position at that sample
    crossings: list[CrossingEvent]
    min_gap: float
    min_ground: float
    lipschitz: float              # max |d lambda| / ds observed
    match_quality: float          # worst accepted matching overlap
    metric: np.ndarray            # full-mesh quadrature weights

    @property
    def k(self) -> int:
        return int(self.curves.shape[1])

    def closed_path_permutation(self) -> np.ndarray:
        """Overlap matching of final curve vectors against the initial ones.

        Meaningful when the endpoint operators coincide (a closed path);
        a non-identity permutation is the spectral-flow label shift.
        """
        first, last = self.vectors[0], self.vectors[-1]
        return _greedy_match(np.abs(first.conj().T @ (self.metric[:, None] * last)))


def _greedy_match(absO: np.ndarray) -> np.ndarray:
    """Greedy assignment row -> column by descending |overlap|."""
    n = absO.shape[0]
    O = absO.copy()
    perm = np.full(n, -1)
    for _ in range(n):
        c, j = np.unravel_index(np.argmax(O), O.shape)
        perm[c] = j
        O[c, :] = -1.0
        O[:, j] = -1.0
    return perm


def _solve_at(path: BCPath, mesh: Mesh, bops: BoundaryOps, s: float, k_solve: int):
    U = path.at(float(s))
    op = assemble_laplacian(mesh, bops, cayley_decompose(U))
    res = eigensolve(op, min(k_solve, op.dim))
    return res.eigenvalues, res.lifted()


def _pad_to_cluster(vals_probe: np.ndarray, k: int) -> int:
    """Extend the solve count so a degenerate cluster is never split."""
    k_solve = k
    while k_solve < vals_probe.size and (
        vals_probe[k_solve] - vals_probe[k_solve - 1]
        <= CLUSTER_TOL_SCALE * max(1.0, abs(vals_probe[k_solve]))
    ):
        k_solve += 1
    return k_solve


def spectral_flow(
    path: BCPath,
    mesh: Mesh,
    bops: BoundaryOps,
    k: int,
    steps: int,
    max_refinements: int = 48,
) -> FlowResult:
    """Track the k lowest eigenvalue curves along a path of unitaries.

    Eigenpairs at consecutive samples are matched by greedy maximal
    quadrature overlap; when the best overlap falls below 0.9 a midpoint
    sample is inserted (up to ``max_refinements`` times).  Matched vectors
    are phase-aligned to the previous sample, with orthogonal Procrustes
    alignment inside degenerate clusters, so the returned vector curves
    are smoothly gauged.
    """
    if steps < 2:
        raise ValidationError(f"steps must be >= 2, got {steps}")
    w = mesh.weights
    pad = 4

    probe_vals, _ = _solve_at(path, mesh, bops, 0.0, k + pad + 4)
    k_solve = _pad_to_cluster(probe_vals, k + pad)

    s_list = list(np.linspace(0.0, 1.0, steps))
    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def solve(s: float):
        if s not in cache:
            try:
                cache[s] = _solve_at(path, mesh, bops, s, k_solve)
            except SolverError as err:
                raise SolverError(f"eigensolve failed at path parameter s={s}: {err}") from err
        return cache[s]

    vals0, vecs0 = solve(s_list[0])
    kc = min(k_solve, vals0.size)
    accepted_s = [s_list[0]]
    curve_vals = [vals0[:kc]]
    curve_vecs = [vecs0[:, :kc]]
    permutations = [np.arange(kc)]
    worst_overlap = 1.0

    def value_groups(vals_in_curve_order: np.ndarray) -> list[np.ndarray]:
        order = np.argsort(vals_in_curve_order, kind="stable")
        groups, current = [], [int(order[0])]
        for p in range(1, order.size):
            a, b = vals_in_curve_order[order[p - 1]], vals_in_curve_order[order[p]]
            if b - a <= CLUSTER_TOL_SCALE * max(1.0, abs(b)):
                current.append(int(order[p]))
            else:
                groups.append(np.asarray(current))
                current = [int(order[p])]
        groups.append(np.asarray(current))
        return groups

    i = 1
    refinements = 0
    while i < len(s_list):
        s_prev, s_cur = accepted_s[-1], s_list[i]
        vals_c, vecs_c = solve(s_cur)
        vals_c, vecs_c = vals_c[:kc], vecs_c[:, :kc]
        prev_vecs = curve_vecs[-1]
        prev_groups = value_groups(curve_vals[-1])
        O = prev_vecs.conj().T @ (w[:, None] * vecs_c)
        perm = _greedy_match(np.abs(O))

        # quality per curve: subspace alignment inside degenerate groups
        # (gauge independent), plain |overlap| for isolated curves; groups
        # merge degeneracies on either side of the step
        quality = np.empty(kc)
        parent = np.arange(kc)

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for partition in (prev_groups, value_groups(vals_c[perm])):
            for g in partition:
                for member in g[1:]:
                    parent[find(int(member))] = find(int(g[0]))
        merged: dict[int, list[int]] = {}
        for c in range(kc):
            merged.setdefault(find(c), []).append(c)
        for members in merged.values():
            g = np.asarray(members)
            sub = O[np.ix_(g, perm[g])]
            quality[g] = abs(sub[0, 0]) if g.size == 1 else float(np.linalg.svd(sub, compute_uv=False)[-1])
        # only the k requested curves gate refinement: the padding curves
        # at the top of the pool may legitimately exchange with untracked
        # neighbors, which no step size can resolve
        quality_k = float(quality[:k].min())
        if quality_k < MATCH_OVERLAP_MIN and refinements < max_refinements and s_cur - s_prev > 1e-6:
            s_list.insert(i, 0.5 * (s_prev + s_cur))
            refinements += 1
            continue
        worst_overlap = min(worst_overlap, quality_k)

        new_vals = vals_c[perm]
        new_vecs = vecs_c[:, perm]
        new_groups = value_groups(new_vals)
        grouped_now = {tuple(sorted(g.tolist())) for g in new_groups if g.size > 1}
        # degenerate now: rotate the new cluster onto the previous gauge
        for g in new_groups:
            if g.size > 1:
                Q = _procrustes_rotate(new_vecs[:, g], prev_vecs[:, g], w)
                new_vecs[:, g] = new_vecs[:, g] @ Q
        # degenerate before but split now: the old gauge was arbitrary, so
        # rotate it (and the whole degenerate streak behind it) onto the
        # split eigenvectors to keep the curves smoothly gauged
        for g in prev_groups:
            if g.size > 1 and tuple(sorted(g.tolist())) not in grouped_now:
                Q = _procrustes_rotate(curve_vecs[-1][:, g], new_vecs[:, g], w)
                t = len(curve_vecs) - 1
                while t >= 0:
                    gv = curve_vals[t][g]
                    if gv.max() - gv.min() > CLUSTER_TOL_SCALE * max(1.0, float(np.abs(gv).max())):
                        break
                    curve_vecs[t] = curve_vecs[t].copy()
                    curve_vecs[t][:, g] = curve_vecs[t][:, g] @ Q
                    t -= 1
        prev_vecs = curve_vecs[-1]
        for c in range(kc):
            z = np.vdot(prev_vecs[:, c], w * new_vecs[:, c])
            if abs(z) > 0.0:
                new_vecs[:, c] *= np.conj(z) / abs(z)

        accepted_s.append(s_cur)
        curve_vals.append(new_vals)
        curve_vecs.append(new_vecs)
        permutations.append(perm)
        i += 1

    samples = np.asarray(accepted_s)
    curves = np.asarray(curve_vals)[:, :k]
    vectors = np.stack(curve_vecs, axis=0)[:, :, :k]

    crossings = _find_crossings(samples, curves)
    gaps = [spectral_gap(path.at(float(s)))["gap"] for s in samples]
    dlam = np.abs(np.diff(curves, axis=0))
    ds = np.diff(samples)[:, None]
    lipschitz = float(np.max(dlam / ds)) if samples.size > 1 else 0.0

    return FlowResult(
        samples=samples,
        curves=curves,
        vectors=vectors,
        permutations=[p[:k] for p in permutations],
        crossings=crossings,
        min_gap=float(np.min(gaps)),
        min_ground=float(np.min(curves)),
        lipschitz=lipschitz,
        match_quality=worst_overlap,
        metric=w,
    )


def _find_crossings(samples: np.ndarray, curves: np.ndarray) -> list[CrossingEvent]:
    """Order exchanges and degenerate contacts between matched curves.

    An exchange is a sign change of the curve difference across an
    interval whose interior may contain degenerate samples (the crossing
    itself); a contact that ends with the original order is reported as
    near_degenerate.
    """
    events: list[CrossingEvent] = []
    n_s, k = curves.shape
    for a in range(k):
        for b in range(a + 1, k):
            d = curves[:, a] - curves[:, b]
            tol = CLUSTER_TOL_SCALE * np.maximum(1.0, np.abs(curves[:, a]))
            degenerate = np.abs(d) < tol
            t = 0
            while t < n_s - 1:
                if degenerate[t]:
                    t += 1
                    continue
                # find the next non-degenerate sample
                t2 = t + 1
                while t2 < n_s and degenerate[t2]:
                    t2 += 1
                if t2 >= n_s:
                    if t2 - t > 1:  # contact at the end of the path
                        events.append(CrossingEvent(
                            kind="near_degenerate", s_lo=float(samples[t]), s_hi=float(samples[-1]),
                            s_estimate=float(samples[min(t + 1, n_s - 1)]), curves=(a, b),
                            min_separation=float(np.min(np.abs(d[t:]))), value=float(curves[min(t + 1, n_s - 1), a]),
                        ))
                    break
                touched = t2 - t > 1
                if d[t] * d[t2] < 0.0:
                    frac = abs(d[t]) / (abs(d[t]) + abs(d[t2]))
                    s_star = samples[t] + frac * (samples[t2] - samples[t])
                    value = curves[t, a] + frac * (curves[t2, a] - curves[t, a])
                    events.append(CrossingEvent(
                        kind="exchange", s_lo=float(samples[t]), s_hi=float(samples[t2]),
                        s_estimate=float(s_star), curves=(a, b),
                        min_separation=float(np.min(np.abs(d[t:t2 + 1]))), value=float(value),
                    ))
                elif touched:
                    mid = t + int(np.argmin(np.abs(d[t:t2 + 1])))
                    events.append(CrossingEvent(
                        kind="near_degenerate", s_lo=float(samples[t]), s_hi=float(samples[t2]),
                        s_estimate=float(samples[mid]), curves=(a, b),
                        min_separation=float(np.min(np.abs(d[t:t2 + 1]))), value=float(curves[mid, a]),
                    ))
                t = t2
    return events


# ---------------------------------------------------------------------------
# intertwiners
# ---------------------------------------------------------------------------


@dataclass
class Intertwiner:
    """Unitary mapping the eigenbasis of one extension onto a reference.

    Stored in factored form V = sum_n |ref_n><u_n| over the computed
    modes, with the u-side basis phase-fixed (and Procrustes-rotated on
    the reference side inside degenerate clusters) so that V u_n = ref_n.
    """

    ref_vectors: np.ndarray     # (N_full, k) lifted, possibly rotated
    u_vectors: np.ndarray       # (N_full, k) lifted, phase-aligned
    weights: np.ndarray         # full-mesh quadrature weights
    phase_record: dict

    @property
    def k(self) -> int:
        return int(self.ref_vectors.shape[1])

    def apply(self, node_values: np.ndarray) -> np.ndarray:
        """V acting on node values (projects onto the computed span)."""
        coeff = self.u_vectors.conj().T @ (self.weights * node_values)
        return self.ref_vectors @ coeff

    def matrix(self, op_u: HermitianOperator, op_ref: HermitianOperator) -> np.ndarray:
        """V as a reduced-DOF matrix (unitary when the modes span everything)."""
        if op_u.dim != op_ref.dim:
            raise DimensionMismatchError(f"reduced dimensions differ: {op_u.dim} vs {op_ref.dim}")
        Ru = op_u.lift.matrix.conj().T @ (self.weights[:, None] * self.u_vectors)
        Rr = op_ref.lift.matrix.conj().T @ (self.weights[:, None] * self.ref_vectors)
        return np.asarray(Rr) @ np.asarray(Ru).conj().T


def build_intertwiner(spec_u: SpectralResult, spec_ref: SpectralResult) -> Intertwiner:
    """Intertwiner from the eigenbasis of ``spec_u`` to that of ``spec_ref``.

    Mode n of the source is paired with mode n of the reference (both
    ascending).  A degenerate reference cluster is rotated by orthogonal
    Procrustes onto the corresponding source vectors when the two blocks
    span the same subspace (overlap Gram unitary to 1e-6), i.e. when the
    mismatch is pure gauge; when the source modes genuinely leak outside
    the cluster the canonical eigensolve gauge is kept, since no rotation
    could recover the physical pairing from the overlaps alone.  Every
    pair is then phase-aligned so the paired overlap is real nonnegative.
    """
    if spec_u.k != spec_ref.k:
        raise DimensionMismatchError(f"mode counts differ: {spec_u.k} vs {spec_ref.k}")
    if spec_u.op.mesh.node_count != spec_ref.op.mesh.node_count:
        raise DimensionMismatchError("operators live on different meshes")
    w = spec_ref.op.mesh.weights
    ref = spec_ref.lifted().copy()
    u = spec_u.lifted().copy()
    rotations = []
    for cl in spec_ref.clusters:
        if cl.size > 1:
            G = ref[:, cl].conj().T @ (w[:, None] * u[:, cl])
            if np.max(np.abs(G.conj().T @ G - np.eye(cl.size))) < 1e-6:
                uu, _, vt = np.linalg.svd(G)
                Q = uu @ vt
                ref[:, cl] = ref[:, cl] @ Q
                rotations.append((cl.tolist(), Q))
    phases = np.zeros(spec_u.k)
    for n in range(spec_u.k):
        z = np.vdot(ref[:, n], w * u[:, n])
        if abs(z) > 0.0:
            phases[n] = -np.angle(z)
            u[:, n] *= np.exp(1j * phases[n])
    return Intertwiner(
        ref_vectors=ref,
        u_vectors=u,
        weights=w,
        phase_record={"phases": phases, "cluster_rotations": rotations},
    )


# ---------------------------------------------------------------------------
# hypothesis diagnostics along a path
# ---------------------------------------------------------------------------


def path_hypothesis_report(
    path: BCPath,
    mesh: Mesh,
    bops: BoundaryOps,
    k: int,
    steps: int,
) -> dict:
    """Numerical proxies for the propagator-existence hypotheses.

    Emits, per sample along the path: (a) the maximal eigenvalue
    degeneracy, (b) the eigenvalue growth ratio against the start of the
    path, (c) first and second parameter derivatives of the intertwiner
    overlap matrix <v_p(0), v_q(s)>, (d) the first derivative of the
    transported-operator matrix elements, and (e) the minimum eigenvalue,
    whose infimum over the path is the uniform-semiboundedness check.
    The derivative proxies quantify smoothness; they do not decide it.
    """
    flow = spectral_flow(path, mesh, bops, k, steps)
    w = mesh.weights
    s = flow.samples
    n_s = s.size

    max_degeneracy = np.array(
        [max(len(c) for c in cluster_indices(np.sort(flow.curves[t]))) for t in range(n_s)]
    )
    denom = np.maximum(np.abs(flow.curves[0]), 1.0)
    growth_ratio = np.max(np.abs(flow.curves) / denom[None, :], axis=1)

    probes = flow.vectors[0]                      # curve vectors at s = 0
    overlaps = np.empty((n_s, k, k), dtype=complex)
    transported = np.empty((n_s, k, k), dtype=complex)
    for t in range(n_s):
        O = probes.conj().T @ (w[:, None] * flow.vectors[t])
        overlaps[t] = O
        transported[t] = (O * flow.curves[t][None, :]) @ O.conj().T

    dO = np.gradient(overlaps, s, axis=0)
    d2O = np.gradient(dO, s, axis=0)
    dT = np.gradient(transported, s, axis=0)
    h3_first = np.max(np.abs(dO), axis=(1, 2))
    h3_second = np.max(np.abs(d2O), axis=(1, 2))
    h4_first = np.max(np.abs(dT), axis=(1, 2))

    spike_level = 10.0 * max(float(np.median(h3_first)), 1e-12)
    spikes = s[h3_first > spike_level]

    return {
        "samples": s,
        "max_degeneracy": max_degeneracy,
        "eigenvalue_growth_ratio": growth_ratio,
        "h3_first_derivative_max": h3_first,
        "h3_second_derivative_max": h3_second,
        "h4_first_derivative_max": h4_first,
        "h5_min_eigenvalue": float(np.min(flow.curves)),
        "min_gap": flow.min_gap,
        "derivative_spike_samples": spikes,
        "flow": flow,
    }
