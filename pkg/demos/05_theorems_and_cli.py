# %% [markdown]
# # Reproducing the headline statements
#
# Each statement has a pure verdict function of estimates and intervals that
# answers pass, fail or inconclusive; inconclusive comes with the sample size
# that would settle it.  Here we run them at reduced sample sizes, so some may
# come back inconclusive.  The full-size runs are in the acceptance tests.

# %%
import tempfile

from driftlab import ExperimentConfig, reproduce_theorem
from driftlab.cli import main

cfg = ExperimentConfig.from_text("""
[statics]
calibration_samples = 100000
samples = 100000
velocity_samples = 200000
""")
for tid in ("p1", "p2", "p3"):
    rep = reproduce_theorem(tid, cfg)
    print(tid, rep.verdict, rep.required_n, {k: v for k, v in rep.clauses.items()})

# %% [markdown]
# The same through the command line.  `theorem p3` writes `theorem_p3.json`
# and a CSV of estimates into the output directory; timings go to
# `timing.json` so the reports themselves are byte-reproducible.

# %%
with tempfile.TemporaryDirectory() as out:
    path = f"{out}/small.ini"
    cfg.save(path)
    status = main(["theorem", "p3", "--config", path, "--out", out])
    print("exit status", status)
    print(open(f"{out}/theorem_p3.json").read()[:600])
