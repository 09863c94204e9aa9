"""Core model: clipped feature recursion, Poisson rates, likelihood.

Counts X[t, m] are Poisson with log-rate nu_m + a_m . g(history), where
g stacks K basis-weighted sums of *clipped* past counts.  Clipping keeps
every feature bounded, which in turn bounds every rate between R_min and
R_max.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

EXP_CLAMP = 700.0


class DimensionError(ValueError):
    """Shapes of counts / model / features disagree."""


class ParameterError(ValueError):
    """A configuration value is out of its valid range."""


class NumericError(ArithmeticError):
    """A computation left the representable range (overflow in exp)."""


class InputFormatError(ValueError):
    """An input file violates its documented format."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountMatrix:
    """T x M nonnegative integer event counts, one row per time bin."""

    counts: np.ndarray
    bin_width: Optional[float] = None

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise DimensionError("counts must be a T x M matrix with T, M >= 1")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(np.equal(np.mod(c, 1), 0)):
                raise InputFormatError("E_COUNTS_NONINTEGER", "counts must be integers")
            c = c.astype(np.int64)
        if np.any(c < 0):
            raise InputFormatError("E_COUNTS_NEGATIVE", "counts must be nonnegative")
        object.__setattr__(self, "counts", np.ascontiguousarray(c, dtype=np.int64))
        if self.bin_width is not None and self.bin_width <= 0:
            raise ParameterError("bin_width must be positive")

    @property
    def T(self):
        return self.counts.shape[0]

    @property
    def M(self):
        return self.counts.shape[1]


@dataclass(frozen=True)
class BasisSet:
    """Temporal basis weighting the clipped count history.

    kind "geometric": K=1, weight alpha**j on the count j steps back.
    kind "lags": K=p indicator lags, block k holds the count k-1 steps back.
    kind "table": explicit (K, L) nonnegative weights, column j applies to
    the count j steps back.
    """

    kind: str
    alpha: float = 0.0
    p: int = 1
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "geometric":
            if not (0.0 <= self.alpha < 1.0):
                raise ParameterError("geometric basis needs alpha in [0, 1)")
        elif self.kind == "lags":
            if self.p < 1:
                raise ParameterError("lag basis needs p >= 1")
        elif self.kind == "table":
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != 2 or tab.size == 0:
                raise ParameterError("table basis needs a K x L weight matrix")
            if np.any(tab < 0):
                raise ParameterError("basis weights must be nonnegative")
            object.__setattr__(self, "table", tab)
        else:
            raise ParameterError(f"unknown basis kind {self.kind!r}")

    @classmethod
    def geometric(cls, alpha):
        return cls(kind="geometric", alpha=float(alpha))

    @classmethod
    def lags(cls, p):
        return cls(kind="lags", p=int(p))

    @classmethod
    def from_table(cls, values):
        return cls(kind="table", table=np.asarray(values, dtype=float))

    @property
    def K(self):
        if self.kind == "geometric":
            return 1
        if self.kind == "lags":
            return self.p
        return self.table.shape[0]

    @property
    def tau(self):
        """Largest total basis mass, sup_k sum_j phi_k[j]."""
        if self.kind == "geometric":
            return 1.0 / (1.0 - self.alpha)
        if self.kind == "lags":
            return 1.0
        return float(self.table.sum(axis=1).max())


@dataclass(frozen=True)
class Saturation:
    """Bounded monotone transform applied to past counts.

    Default is the hard clip min(x, u).  A generic saturation supplies a
    bounded nondecreasing differentiable func together with its bound u
    and (optionally) its derivative.
    """

    kind: str = "clip"
    u: float = 6.0
    func: Optional[Callable] = None
    deriv: Optional[Callable] = None

    def __post_init__(self):
        if self.kind == "clip":
            if self.u < 1:
                raise ParameterError("clip threshold must be >= 1")
        elif self.kind == "generic":
            if self.func is None:
                raise ParameterError("generic saturation needs func")
            if self.u <= 0:
                raise ParameterError("saturation bound must be positive")
        else:
            raise ParameterError(f"unknown saturation kind {self.kind!r}")

    @classmethod
    def clip(cls, u):
        return cls(kind="clip", u=float(u))

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "clip":
            return np.minimum(x, self.u)
        return np.asarray(self.func(x), dtype=float)

    def derivative_floor(self, r_max, grid_points=1000):
        """Smallest slope on [0, r_max]; 1 by convention for the hard clip."""
        if self.kind == "clip":
            return 1.0
        xs = np.linspace(0.0, r_max, grid_points)
        if self.deriv is not None:
            d = np.asarray(self.deriv(xs), dtype=float)
        else:
            h = max(r_max, 1.0) * 1e-7
            d = (self.apply(xs + h) - self.apply(xs - h)) / (2 * h)
        c = float(d.min())
        if c <= 0:
            raise ParameterError("saturation derivative floor must be positive")
        return c


@dataclass(frozen=True)
class Bounds:
    a_max: float = 0.0
    a_min: float = 0.0
    nu_min: float = 0.0
    nu_max: float = 0.0

    def __post_init__(self):
        if self.a_max < 0 or self.a_min < 0:
            raise ParameterError("a_max and a_min must be nonnegative")
        if self.nu_min > self.nu_max:
            raise ParameterError("nu_min must not exceed nu_max")


@dataclass(frozen=True)
class InfluenceModel:
    """Offset nu (M,), influence matrix A (M, M*K), basis, saturation, bounds."""

    nu: np.ndarray
    A: np.ndarray
    basis: BasisSet
    saturation: Saturation
    bounds: Bounds

    def __post_init__(self):
        nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        M = nu.shape[0]
        if A.shape != (M, M * self.basis.K):
            raise DimensionError(
                f"A must be {M} x {M * self.basis.K}, got {A.shape}"
            )
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "A", A)

    @property
    def M(self):
        return self.nu.shape[0]

    @property
    def K(self):
        return self.basis.K

    def feasible(self, atol=1e-9):
        """Do nu and the row norms of A respect the declared bounds?"""
        pos = np.clip(self.A, 0.0, None).sum(axis=1)
        neg = -np.clip(self.A, None, 0.0).sum(axis=1)
        b = self.bounds
        return bool(
            np.all(pos <= b.a_max + atol)
            and np.all(neg <= b.a_min + atol)
            and np.all(self.nu >= b.nu_min - atol)
            and np.all(self.nu <= b.nu_max + atol)
        )

    def with_A(self, A):
        return InfluenceModel(self.nu, A, self.basis, self.saturation, self.bounds)


def bounds_for(A, nu):
    """Tightest Bounds covering a given (A, nu) pair."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    return Bounds(
        a_max=float(np.clip(A, 0.0, None).sum(axis=1).max()),
        a_min=float((-np.clip(A, None, 0.0)).sum(axis=1).max()),
        nu_min=float(nu.min()),
        nu_max=float(nu.max()),
    )


# ---------------------------------------------------------------------------
# Feature recursion
# ---------------------------------------------------------------------------


def features_update(state, x_t, basis, sat):
    """Advance the feature vector by one observed count vector.

    Geometric basis: g' = f(x) + alpha * g elementwise per node.
    Lag basis: shift register, newest clipped counts enter block 1.
    Table basis needs the raw history; use FeatureRecursion for it.
    """
    x_t = np.atleast_1d(np.asarray(x_t))
    M = x_t.shape[0]
    state = np.asarray(state, dtype=float)
    if state.shape != (M * basis.K,):
        raise DimensionError(
            f"feature state must have length {M * basis.K}, got {state.shape}"
        )
    fx = sat.apply(x_t)
    if basis.kind == "geometric":
        return fx + basis.alpha * state
    if basis.kind == "lags":
        return np.concatenate([fx, state[: M * (basis.p - 1)]])
    raise ParameterError("table basis requires FeatureRecursion")


class FeatureRecursion:
    """Stateful computation of g(history) as counts stream in.

    `g` is the feature vector of everything seen so far (zero before any
    update, i.e. the empty-history convention).
    """

    def __init__(self, basis, sat, M):
        self.basis = basis
        self.sat = sat
        self.M = int(M)
        self.g = np.zeros(self.M * basis.K)
        if basis.kind == "table":
            # history[j] = clipped counts j steps back, newest first
            self._L = basis.table.shape[1]
            self._history = np.zeros((self._L, self.M))

    def update(self, x_t):
        if self.basis.kind == "table":
            fx = self.sat.apply(np.atleast_1d(np.asarray(x_t)))
            if fx.shape != (self.M,):
                raise DimensionError("count vector length mismatch")
            self._history = np.vstack([fx[None, :], self._history[:-1]])
            # block k is the table-weighted combination of recent counts
            self.g = (self.basis.table @ self._history).reshape(-1)
        else:
            self.g = features_update(self.g, x_t, self.basis, self.sat)
        return self.g


def feature_matrix(X, basis, sat):
    """Features for every prediction step.

    Row t is g of the history strictly before row t of X (row 0 is all
    zeros), so row t pairs with target X[t].
    """
    X = X.counts if isinstance(X, CountMatrix) else np.asarray(X)
    T, M = X.shape
    rec = FeatureRecursion(basis, sat, M)
    G = np.empty((T, M * basis.K))
    for t in range(T):
        G[t] = rec.g
        rec.update(X[t])
    return G


# ---------------------------------------------------------------------------
# Rates and likelihood
# ---------------------------------------------------------------------------


def rates(model, g):
    """Per-node Poisson rates exp(nu + A g) for a feature vector g."""
    g = np.asarray(g, dtype=float)
    if g.shape != (model.M * model.K,):
        raise DimensionError(
            f"feature vector must have length {model.M * model.K}, got {g.shape}"
        )
    eta = model.nu + model.A @ g
    if np.any(eta > EXP_CLAMP) or not np.all(np.isfinite(eta)):
        bad = int(np.argmax(~((eta <= EXP_CLAMP) & np.isfinite(eta))))
        raise NumericError(f"rate overflow at node {bad}: exponent {eta[bad]}")
    return np.exp(np.clip(eta, -EXP_CLAMP, EXP_CLAMP))


def rate_bounds(model):
    """(R_min, R_max): extreme Poisson rates any feasible history allows."""
    U = model.basis.tau * model.saturation.u
    b = model.bounds
    with np.errstate(over="ignore"):
        r_max = float(np.exp(min(b.nu_max + b.a_max * U, EXP_CLAMP + 1)))
        r_min = float(np.exp(b.nu_min - b.a_min * U))
    return r_min, r_max


def _linear_predictor(nu, A, G):
    return nu[None, :] + G @ A.T


def nll(model, X, G=None):
    """Negative log-likelihood (up to the X! term) with gradients.

    Returns (value, grad_A, grad_nu).  Term t predicts X[t] from the
    features of rows before t.
    """
    if isinstance(X, CountMatrix):
        counts = X.counts
    else:
        counts = CountMatrix(np.asarray(X)).counts
    if counts.shape[0] < 2:
        raise DimensionError("need at least 2 time bins")
    if counts.shape[1] != model.M:
        raise DimensionError("node count mismatch between model and data")
    if G is None:
        G = feature_matrix(counts, model.basis, model.saturation)
    eta = _linear_predictor(model.nu, model.A, G)
    if np.any(eta > EXP_CLAMP) or not np.all(np.isfinite(eta)):
        raise NumericError("overflow in likelihood exponent")
    lam = np.exp(eta)
    value = float(np.sum(lam - counts * eta))
    resid = lam - counts  # negated residual epsilon
    grad_A = resid.T @ G
    grad_nu = resid.sum(axis=0)
    return value, grad_A, grad_nu


def residuals(model, X, G=None):
    """Martingale residuals X[t] - exp(nu + a . g), a diagnostic."""
    counts = X.counts if isinstance(X, CountMatrix) else np.asarray(X)
    if G is None:
        G = feature_matrix(counts, model.basis, model.saturation)
    lam = np.exp(np.clip(_linear_predictor(model.nu, model.A, G), -EXP_CLAMP, EXP_CLAMP))
    return counts - lam
