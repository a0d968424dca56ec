"""Discrete forms approaching the limit form, and the capacity nest shrinking.

    python demos/forms_and_capacity.py
"""
from mhrw_scaling import bump, capacity_bound, domination_check, gaussian, mosco_m2_curve

target = gaussian(1.0)
tab = mosco_m2_curve(bump(2.0), 1.0, target, [10, 30, 100, 300, 1000], reps=50_000, seed=2)
print(f"observable {tab.observable}, limit form {tab.rows[0].phi:.5f}")
for r in tab.rows:
    print(f"  n={r.n:5d}  Phi_n={r.phi_n:.5f} +- {r.phi_n_stderr:.5f}  rel gap {r.rel_gap:.4f}")

rep = domination_check(bump(2.0), 1.0, target, [10, 100, 1000], reps=20_000)
print(f"domination constant C = {rep.info['C']:.3f} (sum form {rep.info['C_sum']:.3f})")
for row in rep.rows:
    print(f"  n={row['n']:5d}  Phi_n={row['phi_n']:.5f} <= {row['bound']:.5f}: {row['ok']}")

print("capacity nest, L = 10^4:")
for n in (1, 3, 10, 30, 100):
    b = capacity_bound(target, 1.0, n, reps=500, seed=3)
    print(f"  n={n:4d}  ||u||^2 {b.l2_estimate:.4f} <= {b.l2_bound:.4f}   energy {b.gradient_sum:.3e} <= {b.gradient_cap:.3e}")
