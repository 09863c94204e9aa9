"""Synthetic data generation: ground-truth designs and the count process."""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from seppnet.model import (
    Bounds,
    CountMatrix,
    FeatureRecursion,
    InfluenceModel,
    ParameterError,
    rate_bounds,
    rates,
)
from seppnet.rng import stream

DEFAULT_VALUE_RANGE = (-0.7, 0.3)


@dataclass(frozen=True)
class DesignSpec:
    """Recipe for a ground-truth influence matrix.

    kind "sparse": s random nonzero entries, values uniform in value_range.
    kind "block": ceil(M/10) diagonal 10x10 blocks, 5 entries per in-block
    row, each a_max/5.
    kind "lowrank": rank-r product of uniform factors, rescaled so the
    largest row positive-part sum is a_max; r=2 with two_rows=True uses
    two orthogonal rows plus convex combinations.
    kind "hub": only s_G columns nonzero.
    """

    kind: str
    M: int
    seed: int = 0
    s: int = 0
    r: int = 1
    s_G: int = 0
    a_max: float = 0.3
    value_range: Tuple[float, float] = DEFAULT_VALUE_RANGE
    two_rows: bool = False

    def __post_init__(self):
        if self.M < 1:
            raise ParameterError("M must be >= 1")
        if self.kind == "sparse" and self.s > self.M * self.M:
            raise ParameterError("s exceeds M^2")
        if self.kind == "hub" and self.s_G > self.M:
            raise ParameterError("s_G exceeds M")
        if self.kind not in ("sparse", "block", "lowrank", "hub"):
            raise ParameterError(f"unknown design kind {self.kind!r}")


def _sparse_design(spec, rng):
    A = np.zeros(spec.M * spec.M)
    idx = rng.choice(spec.M * spec.M, size=spec.s, replace=False)
    lo, hi = spec.value_range
    A[idx] = rng.uniform(lo, hi, size=spec.s)
    return A.reshape(spec.M, spec.M)


def _block_design(spec, rng):
    A = np.zeros((spec.M, spec.M))
    block = 10
    for b0 in range(0, spec.M, block):
        b1 = min(b0 + block, spec.M)
        width = b1 - b0
        per_row = min(5, width)
        for row in range(b0, b1):
            cols = b0 + rng.choice(width, size=per_row, replace=False)
            A[row, cols] = spec.a_max / per_row
    return A


def _lowrank_design(spec, rng):
    if spec.two_rows:
        # two orthogonal (disjoint-support) positive rows with sum a_max
        half = spec.M // 2
        r1 = np.zeros(spec.M)
        r2 = np.zeros(spec.M)
        w1 = rng.uniform(0.5, 1.0, size=half)
        w2 = rng.uniform(0.5, 1.0, size=spec.M - half)
        r1[:half] = spec.a_max * w1 / w1.sum()
        r2[half:] = spec.a_max * w2 / w2.sum()
        theta = rng.uniform(0.0, 1.0, size=spec.M - 2)
        rest = theta[:, None] * r1[None, :] + (1 - theta[:, None]) * r2[None, :]
        return np.vstack([r1, r2, rest])
    # Center the factor entries so no rank-one mean component dominates the
    # spectrum; the overall scale is set by the rescale below anyway.
    lo, hi = spec.value_range
    mid = 0.5 * (lo + hi)
    left = rng.uniform(lo, hi, size=(spec.M, spec.r)) - mid
    right = rng.uniform(lo, hi, size=(spec.r, spec.M)) - mid
    A = left @ right
    pos = np.clip(A, 0.0, None).sum(axis=1).max()
    if pos > 0:
        A *= spec.a_max / pos
    return A


def _hub_design(spec, rng):
    A = np.zeros((spec.M, spec.M))
    cols = rng.choice(spec.M, size=spec.s_G, replace=False)
    lo, hi = spec.value_range
    A[:, cols] = rng.uniform(lo, hi, size=(spec.M, spec.s_G))
    return A


def make_design(spec):
    """Deterministic ground-truth matrix for a DesignSpec."""
    rng = stream(spec.seed, 0)
    builder = {
        "sparse": _sparse_design,
        "block": _block_design,
        "lowrank": _lowrank_design,
        "hub": _hub_design,
    }[spec.kind]
    return builder(spec, rng)


def simulate(model, T, seed, burn_in=0, check_rates=True):
    """Draw a CountMatrix of length T from the model.

    History starts empty (g = 0, so the first rate is exp(nu)).  With the
    clip saturation every conditional rate is asserted to stay inside
    [R_min, R_max].  Deterministic given seed.
    """
    if T < 1:
        raise ParameterError("T must be >= 1")
    if not model.feasible():
        raise ParameterError("model violates its declared bounds")
    rng = stream(seed, 0)
    r_min, r_max = rate_bounds(model)
    rec = FeatureRecursion(model.basis, model.saturation, model.M)
    total = T + burn_in
    X = np.empty((total, model.M), dtype=np.int64)
    for t in range(total):
        lam = rates(model, rec.g)
        if check_rates and model.saturation.kind == "clip":
            if lam.min() < r_min * (1 - 1e-9) or lam.max() > r_max * (1 + 1e-9):
                raise AssertionError("conditional rate escaped [R_min, R_max]")
        X[t] = rng.poisson(lam)
        rec.update(X[t])
    return CountMatrix(X[burn_in:])


def clip_rate(X, u):
    """Fraction of entries at or above the clip threshold u."""
    if u < 1:
        raise ParameterError("u must be >= 1")
    counts = X.counts if isinstance(X, CountMatrix) else np.asarray(X)
    return float(np.mean(counts >= u))
