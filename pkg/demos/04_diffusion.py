# %% [markdown]
# # Diffusion in the random drift
#
# Euler-Maruyama paths of `dX = b(X) dt + dW`.  Brownian increments are
# addressed by (step, path), so halving the step with two fine increments per
# coarse step gives coupled paths and a direct strong-error estimate.

# %%
import numpy as np

from driftlab import EnvironmentSpec, SdeConfig, annealed_slope, calibrate, make_env, simulate_quenched
from driftlab.sde import simulate_annealed, strong_error

spec = EnvironmentSpec(dimension=2, range=32.0, seed=0)

# %% [markdown]
# With `eps = 0` the process is Brownian motion: zero mean slope, variance T.

# %%
cfg = SdeConfig(T=10.0, M=4_000)
bm = simulate_annealed(spec, cfg, track=False)
print("slope", annealed_slope(spec, cfg, result=bm).value, "variance / T", bm.endpoint.var(axis=0) / 10)

# %% [markdown]
# A quenched run in one environment, with time averages of `phi` and `b`.

# %%
cal = calibrate(spec, 1.0, 50_000)
params = cal.params(lam=1.0)
res = simulate_quenched(make_env(spec, 1), SdeConfig(T=2_000.0, M=4), params)
print("endpoints\n", res.endpoint)
print("time average of phi per path", res.time_average("phi").ravel())
print("max |b| along paths", res.max_b, "<= eps = 1")

# %% [markdown]
# Strong error between step h and h/2 on the same Brownian path.

# %%
steps, errs = strong_error(spec, SdeConfig(T=20.0, M=50), params)
for h, e in zip(steps, errs):
    print(f"h={h:.3f}  mean |X_h - X_h/2| = {e:.2e}")
