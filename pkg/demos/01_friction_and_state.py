"""Slip-weakening friction and one contact state solve.

Prints the friction bound and its smoothed potential near zero slip, then
solves the supported-cantilever state problem and reports the Newton trace
and the tangential traction along the support.

    python demos/01_friction_and_state.py
"""
import numpy as np

from contact_topopt import FrictionParams, dj_eps, j_eps, make_config, mu_friction, solve_state
from contact_topopt.config import build_problem
from contact_topopt.fem import contact_slip

fp = FrictionParams()
print(f"friction bound drops from a = {fp.a:g} to b = {fp.b:g} at rate alpha = {fp.alpha:g}")
print(f"{'slip':>10} {'mu(|s|)':>11} {'j_eps':>11} {'dj_eps':>11}")
for s in (0.0, 0.5 * fp.eps, fp.eps, 2 * fp.eps, 1e-2, 5e-2):
    print(f"{s:10.4g} {mu_friction(fp, s):11.4e} {j_eps(fp, s):11.4e} {dj_eps(fp, s):11.4e}")

prob = build_problem(make_config(example="ex3a"))
st = solve_state(prob.mesh, 1.0, prob.elas, prob.fp, prob.loads, **prob.newton)
print(f"\nstate on {prob.mesh.n_vertices} vertices: {st.newton_iters} Newton iterations")
for it, res, t, step in st.trace:
    kind = "newton" if t > 0 else "convexified"
    print(f"  it {it}: |R| = {res:.3e}, step length {abs(t):g} ({kind}), relative step {step:.2e}")

slip = contact_slip(prob.mesh, st.u)
traction = dj_eps(prob.fp, slip)
print(f"support slip range [{slip.min():.3e}, {slip.max():.3e}]")
print(f"max |tangential traction| {np.abs(traction).max():.3e} (Coulomb bound {prob.fp.a:g})")
