"""Rescaled first coordinate of the chain against the Langevin limit.

Compares autocorrelations of h(x) = x_1 and the semigroup distance for a
bump observable at two dimensions.

    python demos/diffusion_limit.py
"""
from mhrw_scaling import ChainConfig, SdeConfig, autocorrelation_compare, bump, gaussian, semigroup_distance

target = gaussian(1.0)
sde = SdeConfig(2.38, target, dt=1e-3, horizon=2.0)
print("lag   chain acf        sde acf")
for r in autocorrelation_compare(ChainConfig(200, 2.38, target, seed=4), sde, [0.25, 0.5, 1.0, 2.0], reps=4000):
    print(f"{r.lag:4.2f}  {r.chain_acf:.3f} +- {r.chain_stderr:.3f}  {r.sde_acf:.3f} +- {r.sde_stderr:.3f}")

t_grid = [0.25, 0.5, 1.0]
tab = semigroup_distance(bump(2.0), t_grid, ChainConfig(10, 1.0, target, seed=5), 64, 128)
tab = semigroup_distance(bump(2.0), t_grid, ChainConfig(200, 1.0, target, seed=5), 16, 128, table=tab)
for r in tab.rows:
    print(f"n={r.n:4d} t={r.t:4.2f}  rms distance {r.rms:.4f}  [{r.rms_lo:.4f}, {r.rms_hi:.4f}]  sde bias {r.sde_bias:.4f}")
print("(this budget is too small to separate n=10 from n=200; the acceptance test uses 512x512 and 32x512 starts)")
