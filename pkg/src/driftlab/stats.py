"""Batch-means estimates and their serialisation."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

# Half-width of every reported confidence interval, in standard errors.
CI_Z = 3.0
DEFAULT_BATCHES = 100
MIN_BATCHES = 30
CSV_COLUMNS = ("name", "component", "value", "se", "n", "variant", "epsilon", "lambda", "seed")


@dataclass
class EstimateReport:
    """Point estimate with batch-means standard error."""

    name: str
    value: np.ndarray
    se: np.ndarray
    n: int
    variant: str = "plain"
    batches: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=float)
        self.se = np.asarray(self.se, dtype=float)

    @property
    def halfwidth(self):
        return CI_Z * self.se

    def ci(self):
        return self.value - self.halfwidth, self.value + self.halfwidth

    def contains(self, target):
        """True if ``target`` lies in the CI (all components)."""
        return bool(np.all(np.abs(self.value - target) <= self.halfwidth))

    def excludes_zero(self):
        """True if some component's CI excludes zero."""
        return bool(np.any(np.abs(self.value) > self.halfwidth))

    def component(self, i, name=None):
        b = None if self.batches is None else self.batches[:, i]
        return EstimateReport(name or f"{self.name}[{i}]", self.value[i], self.se[i],
                              self.n, self.variant, b)

    def to_dict(self):
        return {"name": self.name, "value": self.value.tolist(), "se": self.se.tolist(),
                "n": int(self.n), "variant": self.variant}

    @classmethod
    def from_dict(cls, data):
        return cls(data["name"], data["value"], data["se"], data["n"], data["variant"])

    def rows(self, epsilon="", lam="", seed=""):
        vals = np.atleast_1d(self.value)
        ses = np.atleast_1d(self.se)
        for i, (v, s) in enumerate(zip(vals, ses)):
            yield {"name": self.name, "component": i if self.value.ndim else "",
                   "value": repr(float(v)), "se": repr(float(s)), "n": int(self.n),
                   "variant": self.variant, "epsilon": epsilon, "lambda": lam, "seed": seed}


def batch_means(samples, name, variant="plain", n_batches=DEFAULT_BATCHES):
    """Mean of ``samples`` along axis 0 with a batch-means standard error.

    The batches are contiguous, in sample order, so results are
    reproducible bit for bit.
    """
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    if n == 0:
        raise ValueError("no samples")
    nb = min(n_batches, n)
    if n >= MIN_BATCHES:
        nb = max(nb, MIN_BATCHES)
    parts = np.array_split(samples, nb)
    means = np.stack([p.mean(axis=0) for p in parts])
    value = samples.mean(axis=0)
    se = means.std(axis=0, ddof=1) / np.sqrt(nb) if nb > 1 else np.full_like(value, np.inf)
    return EstimateReport(name, value, se, n, variant, means)


def exact(name, value, n=0, variant="exact"):
    value = np.asarray(value, dtype=float)
    return EstimateReport(name, value, np.zeros_like(value), n, variant)


def combined_se(*ses):
    """Quadrature sum of standard errors."""
    return np.sqrt(sum(np.asarray(s, dtype=float) ** 2 for s in ses))


def agree(a, b, se, k=3.0):
    """``|a - b| <= k se`` componentwise."""
    return bool(np.all(np.abs(np.asarray(a) - np.asarray(b)) <= k * np.asarray(se)))


def write_csv(path, rows, append=True):
    """Write estimate rows to ``path`` (header only when the file is new)."""
    import os
    new = not (append and os.path.exists(path) and os.path.getsize(path) > 0)
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            w.writeheader()
        for r in rows:
            w.writerow(r)


def rows_to_csv_text(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
