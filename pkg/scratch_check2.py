"""Scratch validation of spectra + dynamics (not part of the package)."""
import time

import numpy as np

from qbound.geometry import make_mesh, boundary_operators
from qbound.boundary import BCPath, unitary_from_preset, cayley_decompose, haar_unitary
from qbound.operators import assemble_laplacian, assemble_faraday, Wavefunction
from qbound.spectra import eigensolve, spectral_flow, bracket_check, build_intertwiner, path_hypothesis_report
from qbound.dynamics import FluxSchedule, propagate, gauge_map, run_faraday, adiabatic_fidelity, frozen_domain_propagate

rng = np.random.default_rng(11)

mesh = make_mesh({"intervals": [[0.0, 2.0 * np.pi]]}, n=60)
bops = boundary_operators(mesh)
print("mesh cells:", mesh.node_count - 1)

# eigensolve + quasi-periodic
op = assemble_laplacian(mesh, bops, cayley_decompose(unitary_from_preset("quasi_periodic", alpha=-2*np.pi*0.25)))
res = eigensolve(op, 4)
print("qp eigs:", res.eigenvalues, " expect ~ [0.0625 0.5625 1.5625 3.0625]")

# flow of the flux family over eps 0 -> 1
t0 = time.perf_counter()
path = BCPath.flux_family(0.0, 1.0, samples=101)
flow = spectral_flow(path, mesh, bops, k=4, steps=101)
print(f"flow time {time.perf_counter()-t0:.1f}s, samples {flow.samples.size}, match_quality {flow.match_quality:.4f}")
print("flow curves at s=0:", flow.curves[0])
print("flow curves at s=1:", flow.curves[-1])
print("crossings:", [(c.kind, round(c.s_estimate,3), round(c.value,4), c.curves) for c in flow.crossings])
print("closed path perm:", flow.closed_path_permutation())
print("min gap:", flow.min_gap, "min ground:", flow.min_ground)

# intertwiner: quasi-periodic vs periodic, multiplication-operator check
op_ref = assemble_laplacian(mesh, bops, cayley_decompose(unitary_from_preset("periodic")))
res_ref = eigensolve(op_ref, 5)
res_u = eigensolve(op, 5)
V = build_intertwiner(res_u, res_ref)
# state in the span of u-modes
c = rng.standard_normal(5) + 1j * rng.standard_normal(5)
psi_nodes = res_u.lifted() @ c
out = V.apply(psi_nodes)
target = np.exp(-1j * 0.25 * mesh.nodes) * psi_nodes
print("intertwiner |V psi| vs |e^{-i eps theta} psi| max diff:",
      np.max(np.abs(np.abs(out) - np.abs(target))))

# bracket check with a random {-1,1} unitary
d = np.diag(np.array([1.0, -1.0]))
Q = haar_unitary(2, rng)
U = unitary_from_preset("custom", matrix=Q.matrix @ d @ Q.matrix.conj().T)
mesh1 = make_mesh({"intervals": [[0.0, 1.0]]}, n=200)
bops1 = boundary_operators(mesh1)
rep = bracket_check(mesh1, bops1, U, k=6)
print("bracket pass:", rep["pass"], "lower min:", rep["lower_margins"].min(), "upper min:", rep["upper_margins"].min())

# dynamics: constant-eps faraday vs spectral oracle
meshf = make_mesh({"intervals": [[0.0, 2.0 * np.pi]]}, n=163)   # 1024 cells
opf = assemble_faraday(meshf, 0.25, 0.0)
print("faraday dim:", opf.dim)
resf = eigensolve(opf, 6)
coef = rng.standard_normal(6) + 1j * rng.standard_normal(6)
coef /= np.linalg.norm(coef)
psi0 = Wavefunction(resf.vectors @ coef, opf)
sched = FluxSchedule.constant(0.25, T=1.0)
t0 = time.perf_counter()
traj = run_faraday(sched, psi0, dt=1e-3)
print(f"faraday const run {time.perf_counter()-t0:.1f}s, max norm drift {traj.max_norm_drift:.2e}")
# oracle: spectral propagation, compare in physical frame at t=1
phases = np.exp(-1j * resf.eigenvalues * 1.0)
psi_oracle = resf.vectors @ (phases * coef)
lifted_oracle = np.exp(1j * 0.25 * meshf.nodes) * (opf.lift.lift(psi_oracle))
w = meshf.weights
num = abs(np.vdot(lifted_oracle, w * traj.lifted_states[-1]))
den = np.sqrt(np.real(np.vdot(lifted_oracle, w*lifted_oracle)) * np.real(np.vdot(traj.lifted_states[-1], w*traj.lifted_states[-1])))
print("fidelity vs spectral oracle:", num / den)

# slow ramp adiabatic
mesh_s = make_mesh({"intervals": [[0.0, 2.0 * np.pi]]}, n=40)
op_s = assemble_faraday(mesh_s, 0.0, 0.0)
g = eigensolve(op_s, 1)
psi_g = Wavefunction(g.vectors[:, 0], op_s)
sched2 = FluxSchedule.smooth_ramp(0.0, 0.4, T=200.0)
t0 = time.perf_counter()
traj2 = run_faraday(sched2, psi_g, dt=0.02, record_every=100)
print(f"ramp run {time.perf_counter()-t0:.1f}s")
# flow sampled at the recorded schedule values
eps_records = np.array([sched2.eps(t) for t in traj2.times])
s_records = (traj2.times - traj2.times[0]) / (traj2.times[-1] - traj2.times[0])
path2 = BCPath(
    unitary_from_preset("quasi_periodic", alpha=0.0),
    unitary_from_preset("quasi_periodic", alpha=-2*np.pi*0.4),
    rule="flux_schedule", samples=s_records.size,
    sampler=lambda s: unitary_from_preset("quasi_periodic", alpha=-2*np.pi*sched2.eps(sched2.t0 + s*(sched2.t1-sched2.t0))),
)
bops_s = boundary_operators(mesh_s)
import qbound.spectra as sp
flow2 = sp.spectral_flow(path2, mesh_s, bops_s, k=3, steps=s_records.size)
t, fid = adiabatic_fidelity(traj2, flow2)
print("final adiabatic fidelity:", fid[-1])

# frozen domain vs faraday
sched3 = FluxSchedule.smooth_ramp(0.0, 0.2, T=10.0)
op3 = assemble_faraday(mesh_s, 0.0, 0.0)
g3 = eigensolve(op3, 4)
c3 = np.array([1.0, 0.5, 0.25j, 0.1])
c3 = c3 / np.linalg.norm(c3)
psi3 = Wavefunction(g3.vectors @ c3, op3)
t0 = time.perf_counter()
traj3 = run_faraday(sched3, psi3, dt=1e-3)
path3 = BCPath(
    unitary_from_preset("quasi_periodic", alpha=0.0),
    unitary_from_preset("quasi_periodic", alpha=-2*np.pi*0.2),
    rule="flux_schedule", samples=11,
    sampler=lambda s: unitary_from_preset("quasi_periodic", alpha=-2*np.pi*sched3.eps(s*10.0)),
)
# initial state for frozen: same physical state on the pipeline op at s=0
opp0 = assemble_laplacian(mesh_s, bops_s, cayley_decompose(path3.at(0.0)))
x0 = opp0.lift.project(psi3.node_values())
psi3f = Wavefunction(x0, opp0)
traj4 = frozen_domain_propagate(path3, mesh_s, bops_s, psi3f, 0.0, 10.0, dt=1e-3, record_every=1000)
print(f"frozen vs faraday time {time.perf_counter()-t0:.1f}s")
a = traj3.lifted_states[-1]
b = traj4.lifted_states[-1]
wS = mesh_s.weights
fidelity = abs(np.vdot(a, wS * b)) / np.sqrt(np.real(np.vdot(a, wS*a)) * np.real(np.vdot(b, wS*b)))
print("frozen-vs-faraday final fidelity:", fidelity, "cum loss:", traj4.cumulative_projection_loss)

# hypothesis report on the flux family
rep2 = path_hypothesis_report(BCPath.flux_family(0.0, 1.0, samples=21), mesh_s, bops_s, k=3, steps=21)
print("H5 min eigenvalue:", rep2["h5_min_eigenvalue"], "max degeneracy:", rep2["max_degeneracy"].max())
