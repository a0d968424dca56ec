"""Speed curve of the limiting diffusion against finite-n ESJD.

Prints the asymptotic speed tau^2 c(tau) next to Monte Carlo estimates of
n E[(dX_1)^2] at n = 50 and n = 500, and the optimal scale.

    python demos/goldilocks.py
"""
import numpy as np

from mhrw_scaling import empirical_speed_curve, gaussian, optimize_tau

opt = optimize_tau(1.0)
print(f"optimal tau = {opt.tau_star:.6f}  speed = {opt.speed_star:.6f}  acceptance = {opt.acc_star:.6f}")

grid = np.round(np.linspace(0.5, 4.5, 17), 3)
curves = {n: empirical_speed_curve(gaussian(1.0), n, grid, reps=20_000, seed=1) for n in (50, 500)}
print(f"{'tau':>6} {'limit':>8} {'n=50':>8} {'n=500':>8} {'acc(500)':>9}")
for i, tau in enumerate(grid):
    r50, r500 = curves[50].rows[i], curves[500].rows[i]
    print(f"{tau:6.3f} {r500.asymptote:8.4f} {r50.esjd:8.4f} {r500.esjd:8.4f} {r500.acc_rate:9.4f}")
print("empirical argmax:", {n: c.argmax for n, c in curves.items()})
