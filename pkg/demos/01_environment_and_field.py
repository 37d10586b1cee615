# %% [markdown]
# # A random environment and its smooth field
#
# An environment is a Poisson cloud of points drawn cell by cell from a
# counter-based generator, so any region can be regenerated on demand and two
# runs with the same seed agree bit for bit.  From the cloud we build a
# truncated bump sum and mollify it, which gives a field `phi` whose value,
# gradient and Hessian are all bounded by one.

# %%
import numpy as np

from driftlab import EnvironmentSpec, KernelParams, make_env, phi, phi_hat, points_in_ball, shifted_view

spec = EnvironmentSpec(dimension=2, range=32.0, seed=2024)
kernel = KernelParams.for_spec(spec)
env = make_env(spec, 0)
print("intensity", spec.nu, "normaliser m", kernel.m)

# %% [markdown]
# Points near the origin, and the field there.

# %%
pts = points_in_ball(env, [0.0, 0.0], 10.0)
print(len(pts.points), "points within distance 10")
f = phi([0.0, 0.0], env, kernel)
print("phi_hat", phi_hat([0.0, 0.0], env), "phi", f.value)
print("grad", f.gradient)
print("hessian\n", f.hessian)

# %% [markdown]
# Shifting the environment is exact: the field of the view shifted by `z`
# at `x` equals the original field at `x + z`, to the last bit.

# %%
z = np.array([7.25, -3.5])
a = phi([1.0, 2.0], shifted_view(env, z), kernel)
b = phi(np.array([1.0, 2.0]) + z, env, kernel)
print("bitwise equal:", a.value == b.value and np.array_equal(a.hessian, b.hessian))

# %% [markdown]
# A slice of the field along the first axis; fields vanish where no points are
# close and saturate near dense clusters.

# %%
xs = np.linspace(0, 64, 9)
print(np.round([phi([x, 0.0], env, kernel).value for x in xs], 4))
