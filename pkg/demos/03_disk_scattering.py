"""Scattering of a plane wave by a smooth disk, one wavelength across the box.

Each solve is checked against a fine n=400 solve by evaluating the coarse
solution's scattered field at the fine grid's nodes.

Run: python3 demos/03_disk_scattering.py
"""

import math

from volpot import analytic, solvers
from volpot.grid import GridSpec

k = 2 * math.pi
inc = analytic.IncidentField("plane_wave", k)
cfg = solvers.SolverConfig("bicgstab", tol=1e-12)


def run(n):
    grid = GridSpec(2, n)
    q = analytic.contrast_on_grid(analytic.ContrastFunction("disk"), grid)
    return solvers.scatter_solve(grid, k, q, inc, cfg)


ref = run(400)
print(" n    E2        Einf      products  T_solve")
for n in (16, 24, 32, 50, 100):
    res = run(n)
    e2, einf = solvers.self_convergence_errors(res, ref)
    print(f"{n:3d}  {e2:.2e}  {einf:.2e}  {res.report.n_matvec:8d}  {res.report.t_solve:.3f}s")
print("\nThe number of Krylov products does not grow with n; accuracy improves spectrally.")
