# %% [markdown]
# # Expected local drift versus velocity
#
# Under the static law the expected local drift is `d0 (1 + lam g)` while
# the velocity (the drift averaged against `phi_eps`) is `lam d0`.  So the
# two vanish at different lambdas: the velocity at `lam = 0`, the drift at
# `lam = -1/g`.  For `lam` in `(-1/3, 0)` they point in opposite directions.

# %%
import numpy as np

from driftlab import EnvironmentSpec, calibrate, gamma_coeff, lambda_star, static_drift, velocity
from driftlab.statics import STATICS_FIRST, sample_origin

spec = EnvironmentSpec(dimension=2, range=32.0, seed=0)
n = 200_000
cal = calibrate(spec, 1.0, n)
sample = sample_origin(spec, n, STATICS_FIRST)
print("d0 =", cal.d_eps0.value, "+-", cal.d_eps0.se)

# %%
for lam in (0.0, -0.25, lambda_star(cal), 1.0):
    sd = static_drift(spec, 1.0, lam, cal, n, sample=sample)
    v = velocity(spec, 1.0, lam, cal, n, sample=sample)
    vp = velocity(spec, 1.0, lam, cal, n, "plain", sample=sample)
    print(f"lam={lam:+.5f}  drift {sd.direct.value} (identity {sd.identity.value})")
    print(f"               velocity {v.value} (plain MC {vp.value} +- {vp.se})")

# %% [markdown]
# The plain velocity estimate is much noisier than the drift estimate: its
# integrand contains the mean-zero term `grad phi_eps / 2 + eps c`, which the
# control-variate version removes exactly.

# %% [markdown]
# At `lam = -1/4` the drift is `-gamma` times the velocity with
# `gamma = -1/lam - g`, which is positive since `g < 3`.

# %%
print("gamma =", gamma_coeff(cal, -0.25), "  (g = 2 gives", gamma_coeff(2.0, -0.25), ")")
