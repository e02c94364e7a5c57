"""Scratch validation of the core assembly pipeline (not part of the package)."""
import time

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from qbound.geometry import make_mesh, boundary_operators, greens_residual
from qbound.boundary import (
    unitary_from_preset, cayley_decompose, spectral_gap, haar_unitary,
    unitary_condition_residual, edge_transfer_map, pasting_unitary, assemble_block_unitary,
)
from qbound.operators import assemble_laplacian, assemble_momentum, assemble_faraday

rng = np.random.default_rng(7)

# --- 1D quasi-periodic spectrum, eps = 0.25 on [0, 2pi]
t0 = time.perf_counter()
mesh = make_mesh({"intervals": [[0.0, 2.0 * np.pi]]}, n=318)   # ~2000 nodes
bops = boundary_operators(mesh)
eps = 0.25
U = unitary_from_preset("quasi_periodic", alpha=-2.0 * np.pi * eps)
bc = cayley_decompose(U)
op = assemble_laplacian(mesh, bops, bc)
print("mesh nodes:", mesh.node_count, "reduced dim:", op.dim)
t1 = time.perf_counter()
Kd = op.K_dense
vals, vecs = scipy.linalg.eigh(Kd)
t2 = time.perf_counter()
print(f"assembly {t1-t0:.2f}s, dense eigh {t2-t1:.2f}s")
exact = np.sort([(n + eps) ** 2 for n in range(-5, 6)])[:8]
print("exact 8 :", exact)
print("disc  8 :", vals[:8])
print("rel err :", np.abs(vals[:8] - exact) / np.abs(exact))
# residual quality of dense eigh
res = np.linalg.norm(Kd @ vecs[:, :8] - vecs[:, :8] * vals[:8], axis=0)
print("dense eigh residuals (first 8):", res.max())

# shift-invert route
t3 = time.perf_counter()
v0 = np.ones(op.dim) / np.sqrt(op.dim)
svals, svecs = scipy.sparse.linalg.eigsh(op.K, k=8, sigma=-1.0, which="LM", v0=v0)
t4 = time.perf_counter()
sres = np.linalg.norm(op.K @ svecs - svecs * svals, axis=0)
print(f"eigsh shift-invert {t4-t3:.3f}s, max residual {sres.max():.2e}")
print("eigsh vals:", np.sort(svals))

# --- Cayley round trip on Haar unitaries
worst1 = worst2 = 0.0
for dim in (2, 4):
    for _ in range(100):
        Uh = haar_unitary(dim, rng)
        bch = cayley_decompose(Uh)
        phi, phidot = bch.sample_boundary_data(rng)
        worst1 = max(worst1, unitary_condition_residual(Uh, phi, phidot))
        # reverse: data satisfying the characteristic equation
        chi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        phi2 = 0.5 * ((np.eye(dim) + Uh.matrix) @ chi)
        phidot2 = (chi - Uh.matrix @ chi) / 2j
        worst2 = max(worst2, bch.condition_residual(phi2, phidot2))
print("cayley round trip residuals:", worst1, worst2)

# --- momentum
mesh1 = make_mesh({"intervals": [[0.0, 1.0]]}, n=500)
for alpha in (0.0, np.pi / 2):
    opm = assemble_momentum(mesh1, alpha)
    mv = np.linalg.eigvalsh(opm.K_dense)
    near = mv[np.argsort(np.abs(mv))[:3]]
    print(f"momentum alpha={alpha:.3f} eigenvalues near 0:", np.sort(near))

# --- faraday gauge equivalence: eps=0.25, eps_dot=0 vs quasi-periodic pipeline
mesh2 = make_mesh({"intervals": [[0.0, 2.0 * np.pi]]}, n=100)
bops2 = boundary_operators(mesh2)
opf = assemble_faraday(mesh2, eps, 0.0)
opq = assemble_laplacian(mesh2, bops2, cayley_decompose(unitary_from_preset("quasi_periodic", alpha=-2 * np.pi * eps)))
vf = np.linalg.eigvalsh(opf.K_dense)[:6]
vq = np.linalg.eigvalsh(opq.K_dense)[:6]
print("gauge equivalence max rel diff:", np.max(np.abs(vf - vq) / np.maximum(np.abs(vf), 1e-12)))

# --- two intervals U1 / U2
mesh3 = make_mesh({"intervals": [[0.0, 1.0], [0.0, 1.0]]}, n=100)
bops3 = boundary_operators(mesh3)
for name, oracle in (("two_interval_U1", [0, 0, 4*np.pi**2, 4*np.pi**2, 4*np.pi**2, 4*np.pi**2]),
                     ("two_interval_U2", [0, np.pi**2, np.pi**2, 4*np.pi**2, 4*np.pi**2, 9*np.pi**2])):
    U3 = unitary_from_preset(name)
    op3 = assemble_laplacian(mesh3, bops3, cayley_decompose(U3))
    v3 = np.linalg.eigvalsh(op3.K_dense)[:6]
    print(name, "eigs:", np.round(v3, 4), " oracle:", np.round(oracle, 4))

# --- 2D torus via pasting at 40x40
t5 = time.perf_counter()
mesh4 = make_mesh({"rectangle": {"L": 1.0, "H": 1.0}}, n=40)
bops4 = boundary_operators(mesh4)
piece_sizes = [p.size for p in mesh4.pieces]
left, right, bottom, top = mesh4.pieces
T_l = edge_transfer_map(left, left.param, left.weights)
T_r = edge_transfer_map(right, right.param, right.weights)
T_b = edge_transfer_map(bottom, bottom.param, bottom.weights)
T_t = edge_transfer_map(top, top.param, top.weights)
U_lr = pasting_unitary(T_l, T_r)
U_bt = pasting_unitary(T_b, T_t)
U_torus = assemble_block_unitary(piece_sizes, [((0, 1), U_lr), ((2, 3), U_bt)])
op4 = assemble_laplacian(mesh4, bops4, cayley_decompose(U_torus))
t6 = time.perf_counter()
print(f"torus assembly {t6-t5:.2f}s, reduced dim {op4.dim}")
v4 = np.linalg.eigvalsh(op4.K_dense)[:9]
t7 = time.perf_counter()
oracle4 = np.array([0, 1, 1, 1, 1, 2, 2, 2, 2]) * 4 * np.pi**2
print(f"dense eigh {t7-t6:.2f}s")
print("torus eigs :", np.round(v4, 3))
print("oracle     :", np.round(oracle4, 3))
print("rel err    :", np.abs(v4[1:] - oracle4[1:]) / oracle4[1:])

# --- green's residual example
meshg = make_mesh({"intervals": [[0.0, 1.0]]}, n=100)
bopsg = boundary_operators(meshg)
x = meshg.nodes
r = greens_residual(meshg, bopsg, x.astype(complex), (x**2).astype(complex))
print("greens residual (x, x^2):", r)
