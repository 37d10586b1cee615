# %% [markdown]
# # The drift family and its uniform bounds
#
# For a perturbation size `eps` the tilted density `phi_eps` stays within
# `[(d-eps)/(d+eps), (d+eps)/(d-eps)]` and the drift `b` never exceeds `eps`
# in norm.  Calibration supplies the two global constants the drift needs:
# the mean of `phi` and `a = E[c / phi_eps]`.

# %%
from driftlab import EnvironmentSpec, calibrate, drift_b, make_env, phi_eps, verify_field_properties

spec = EnvironmentSpec(dimension=2, range=32.0, seed=0)
cal = calibrate(spec, 0.5, 50_000)
print("E[phi] =", cal.mu_phi.value, "+-", cal.mu_phi.se)
print("g(eps) =", cal.g_eps.value, "+-", cal.g_eps.se)
print("kappa  =", cal.kappa_c.value)

# %% [markdown]
# Pointwise evaluation at one location.

# %%
env = make_env(spec, 3)
params = cal.params(lam=1.0)
print("phi_eps", phi_eps([1.0, 2.0], env, params).value)
print("b", drift_b([1.0, 2.0], env, params))

# %% [markdown]
# Sampled checks: bounds, Lipschitz constants, symmetry, shift covariance and
# the finite-range independence of the drift.  Every check lists its worst
# ratio to the bound.

# %%
report = verify_field_properties(spec, params, 20_000, n_pairs=2_000, n_probe=50)
print("all passed:", report.passed)
for c in report.checks:
    print(f"  {c.name:26s} worst {c.worst:.4f}")
