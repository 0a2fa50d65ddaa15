#!/usr/bin/env python3
"""Why the residual test cannot see a structured injection.

Corrupting one measurement by hand trips the detector immediately. But any
attack of the form a = H c moves the state estimate by exactly c while
leaving the residual untouched, so the detector output is identical on
clean and attacked readings.
"""

import numpy as np

from fdilab import (
    AttackConfig,
    NoiseModel,
    bad_data_test,
    build_jacobian,
    calibrate_threshold,
    craft_attack,
    inject,
    load_builtin,
    measure,
    residual_norm,
    solve_dc_state,
    wls_estimate,
)

sys14 = load_builtin("ieee14")
jac = build_jacobian(sys14)
noise = NoiseModel(sigma=0.01)
var = noise.sigma ** 2
rng = np.random.default_rng(7)

x_true = solve_dc_state(sys14, jac, sys14.injections())
z = measure(jac, x_true, noise, rng)
thr = calibrate_threshold(sys14, noise, seed=0)

r0 = residual_norm(z, jac, wls_estimate(jac, var, z))
print(f"clean snapshot: residual {r0:.3f}, threshold {thr:.3f}, "
      f"flagged={bad_data_test(r0, thr)}")

# naive attacker: add 1.0 p.u. to a single flow reading
z_naive = z.copy()
z_naive[5] += 1.0
r_naive = residual_norm(z_naive, jac, wls_estimate(jac, var, z_naive))
print(f"naive +1.0 on {jac.row_labels[5]}: residual {r_naive:.1f}, "
      f"flagged={bad_data_test(r_naive, thr)}")

# informed attacker: pick target angles, shift them, project through H
cfg = AttackConfig(max_targets=4)
atk = craft_attack(jac, cfg, rng)
targets = np.flatnonzero(atk.c)
print(f"\ncrafted attack touches {len(targets)} state(s) "
      f"{targets.tolist()} and {np.count_nonzero(atk.a)} measurements")

z_bad = inject(z, atk)
x_clean = wls_estimate(jac, var, z)
x_bad = wls_estimate(jac, var, z_bad)
r_bad = residual_norm(z_bad, jac, x_bad)

print(f"stealthy snapshot: residual {r_bad:.3f}, flagged={bad_data_test(r_bad, thr)}")
print(f"residual change vs clean: {abs(r_bad - r0):.2e}")
print(f"estimate shift equals c exactly: "
      f"max |(x_bad - x_clean) - c| = {np.abs((x_bad - x_clean) - atk.c).max():.2e}")
print(f"largest injected angle error: {np.abs(atk.c).max():.4f} rad, "
      f"invisible to the residual test")
