"""Regularized maximum likelihood via spectral proximal gradient.

The estimator minimizes the Poisson negative log-likelihood plus a
penalty (elementwise l1, column group, nuclear, or l1 plus nuclear on a
sparse/low-rank split), with optional projection of each row onto the
feasible positive/negative l1 balls.  Steps use a Barzilai-Borwein
estimate safeguarded by monotone backtracking.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from seppnet.model import (
    Bounds,
    CountMatrix,
    DimensionError,
    EXP_CLAMP,
    InfluenceModel,
    NumericError,
    ParameterError,
    feature_matrix,
)

STEP_MIN = 1e-10
STEP_MAX = 1e10


@dataclass(frozen=True)
class RegularizerSpec:
    kind: str  # l1 | group_column | nuclear | l1_plus_nuclear | none
    lam: float = 0.0
    lam2: float = 0.0  # nuclear weight for the composite penalty

    def __post_init__(self):
        if self.kind not in ("l1", "group_column", "nuclear", "l1_plus_nuclear", "none"):
            raise ParameterError(f"unknown regularizer kind {self.kind!r}")
        if self.lam < 0 or self.lam2 < 0:
            raise ParameterError("penalty weights must be nonnegative")


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 5000
    rel_tol: float = 1e-8
    step_init: float = 1.0
    bb_step: bool = True
    backtrack_factor: float = 0.5
    fit_nu: bool = False
    project_feasible: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ParameterError("backtrack_factor must lie in (0, 1)")


@dataclass
class FitResult:
    model: InfluenceModel
    objective_trace: List[float]
    iterations: int
    converged: bool
    fit_nu: bool = False
    L: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# Proximal operators and feasibility projection
# ---------------------------------------------------------------------------


def _soft_threshold(Z, t):
    return np.sign(Z) * np.maximum(np.abs(Z) - t, 0.0)


def prox(reg, Z, step):
    """argmin_X 0.5 ||X - Z||_F^2 + step * penalty(X)."""
    if step <= 0:
        raise ParameterError("prox step must be positive")
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if reg.kind == "none":
        return Z.copy()
    t = step * reg.lam
    if reg.kind == "l1":
        return _soft_threshold(Z, t)
    if reg.kind == "group_column":
        norms = np.linalg.norm(Z, axis=0)
        scale = np.zeros_like(norms)
        nz = norms > 0
        scale[nz] = np.maximum(0.0, 1.0 - t / norms[nz])
        return Z * scale[None, :]
    if reg.kind == "nuclear":
        try:
            U, s, Vt = np.linalg.svd(Z, full_matrices=False)
        except np.linalg.LinAlgError as e:
            raise NumericError(f"SVD failed in nuclear prox: {e}") from e
        return (U * np.maximum(s - t, 0.0)) @ Vt
    raise ParameterError("composite penalty has no joint prox; fit handles it")


def _project_l1_nonneg(v, radius):
    """Project a nonnegative vector onto {x >= 0, sum x <= radius}."""
    if v.sum() <= radius:
        return v
    if radius <= 0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, len(v) + 1)
    valid = u - (css - radius) / ks > 0
    rho = int(np.nonzero(valid)[0].max()) + 1
    theta = (css[rho - 1] - radius) / rho
    return np.maximum(v - theta, 0.0)


def project_feasible(A, a_max, a_min):
    """Row-wise projection onto the positive/negative-part l1 balls."""
    if a_max < 0 or a_min < 0:
        raise ParameterError("a_max and a_min must be nonnegative")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    out = np.empty_like(A)
    for i, row in enumerate(A):
        pos = np.clip(row, 0.0, None)
        neg = -np.clip(row, None, 0.0)
        out[i] = _project_l1_nonneg(pos, a_max) - _project_l1_nonneg(neg, a_min)
    return out


def penalty_value(reg, A, S=None, L=None):
    if reg.kind == "none":
        return 0.0
    if reg.kind == "l1":
        return reg.lam * float(np.abs(A).sum())
    if reg.kind == "group_column":
        return reg.lam * float(np.linalg.norm(A, axis=0).sum())
    if reg.kind == "nuclear":
        return reg.lam * float(np.linalg.svd(A, compute_uv=False).sum())
    # composite: l1 on the sparse part, nuclear on the low-rank part
    return reg.lam * float(np.abs(S).sum()) + reg.lam2 * float(
        np.linalg.svd(L, compute_uv=False).sum()
    )


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def _loss_and_grads(counts, G, A, nu):
    """Mean NLL per observation with gradients; inf signals overflow.

    The per-observation scale makes the penalty weight comparable across
    (T, M), which is what the default 0.1/sqrt(T) weights are tuned for.
    """
    eta = nu[None, :] + G @ A.T
    if np.any(eta > EXP_CLAMP) or not np.all(np.isfinite(eta)):
        return np.inf, None, None
    lam = np.exp(eta)
    scale = 1.0 / counts.size
    value = float(np.sum(lam - counts * eta)) * scale
    resid = (lam - counts) * scale
    return value, resid.T @ G, resid.sum(axis=0)


def _init_nu(counts, bounds):
    means = counts.mean(axis=0)
    nu0 = np.log(np.maximum(means, 1e-3))
    return np.clip(nu0, bounds.nu_min, bounds.nu_max)


def _bb_step(dA, dnu, dgA, dgnu, fallback):
    num = float(np.sum(dA * dA))
    den = float(np.sum(dA * dgA))
    if dnu is not None:
        num += float(np.sum(dnu * dnu))
        den += float(np.sum(dnu * dgnu))
    if den <= 0 or num == 0:
        return fallback
    return float(np.clip(num / den, STEP_MIN, STEP_MAX))


def fit(X, basis, sat, reg, bounds, cfg=None, nu=None):
    """Proximal-gradient estimate of the influence matrix.

    nu is fitted within [nu_min, nu_max] when cfg.fit_nu, otherwise held
    at the given value (default: the constant-process MLE clamped to the
    nu bounds).
    """
    cfg = cfg or FitConfig()
    counts = (X.counts if isinstance(X, CountMatrix) else CountMatrix(np.asarray(X)).counts)
    if counts.shape[0] < 2:
        raise DimensionError("need at least 2 time bins to fit")
    M = counts.shape[1]
    G = feature_matrix(counts, basis, sat)
    if reg.kind == "l1_plus_nuclear":
        return _fit_split(counts, G, basis, sat, reg, bounds, cfg, nu)

    A = np.zeros((M, M * basis.K))
    nu_vec = _init_nu(counts, bounds) if nu is None else np.asarray(nu, dtype=float).copy()

    def objective(A_, nu_):
        value, gA, gnu = _loss_and_grads(counts, G, A_, nu_)
        return value + (penalty_value(reg, A_) if np.isfinite(value) else 0.0), gA, gnu

    F, gA, gnu = objective(A, nu_vec)
    if not np.isfinite(F):
        raise NumericError("objective not finite at the zero initializer")
    trace = [F]
    eta = cfg.step_init
    prev = None
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        if cfg.bb_step and prev is not None:
            dA = A - prev[0]
            dgA = gA - prev[2]
            dnu = (nu_vec - prev[1]) if cfg.fit_nu else None
            dgnu = (gnu - prev[3]) if cfg.fit_nu else None
            eta = _bb_step(dA, dnu, dgA, dgnu, eta)
        accepted = False
        step = eta
        for _ in range(60):
            A_new = prox(reg, A - step * gA, step)
            if cfg.project_feasible:
                A_new = project_feasible(A_new, bounds.a_max, bounds.a_min)
            if cfg.fit_nu:
                nu_new = np.clip(nu_vec - step * gnu, bounds.nu_min, bounds.nu_max)
            else:
                nu_new = nu_vec
            F_new, gA_new, gnu_new = objective(A_new, nu_new)
            if np.isfinite(F_new) and F_new <= F:
                accepted = True
                break
            step *= cfg.backtrack_factor
            if step < STEP_MIN:
                break
        if not accepted:
            converged = True  # no descent direction left: stationary
            break
        prev = (A, nu_vec, gA, gnu)
        rel = abs(F - F_new) / max(1.0, abs(F))
        A, nu_vec, F, gA, gnu = A_new, nu_new, F_new, gA_new, gnu_new
        trace.append(F)
        if rel < cfg.rel_tol:
            converged = True
            break
    model = InfluenceModel(nu_vec, A, basis, sat, bounds)
    return FitResult(model, trace, it, converged, fit_nu=cfg.fit_nu)


def _fit_split(counts, G, basis, sat, reg, bounds, cfg, nu):
    """Alternating sparse + low-rank decomposition A = L + S."""
    M = counts.shape[1]
    S = np.zeros((M, M * basis.K))
    L = np.zeros((M, M * basis.K))
    nu_vec = _init_nu(counts, bounds) if nu is None else np.asarray(nu, dtype=float).copy()
    l1 = RegularizerSpec("l1", reg.lam)
    nuc = RegularizerSpec("nuclear", reg.lam2)

    def objective(S_, L_, nu_):
        value, gA, gnu = _loss_and_grads(counts, G, S_ + L_, nu_)
        if not np.isfinite(value):
            return np.inf, None, None
        return value + penalty_value(reg, None, S=S_, L=L_), gA, gnu

    F, gA, gnu = objective(S, L, nu_vec)
    trace = [F]
    eta = cfg.step_init
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        progressed = False
        # sparse block
        step = eta
        for _ in range(60):
            S_new = prox(l1, S - step * gA, step)
            F_new, gA_new, gnu_new = objective(S_new, L, nu_vec)
            if np.isfinite(F_new) and F_new <= F:
                if F_new < F:
                    progressed = True
                S, F, gA, gnu = S_new, F_new, gA_new, gnu_new
                break
            step *= cfg.backtrack_factor
            if step < STEP_MIN:
                break
        # low-rank block
        step = eta
        for _ in range(60):
            L_new = prox(nuc, L - step * gA, step)
            F_new, gA_new, gnu_new = objective(S, L_new, nu_vec)
            if np.isfinite(F_new) and F_new <= F:
                if F_new < F:
                    progressed = True
                L, F, gA, gnu = L_new, F_new, gA_new, gnu_new
                break
            step *= cfg.backtrack_factor
            if step < STEP_MIN:
                break
        if cfg.fit_nu:
            step = eta
            for _ in range(60):
                nu_new = np.clip(nu_vec - step * gnu, bounds.nu_min, bounds.nu_max)
                F_new, gA_new, gnu_new = objective(S, L, nu_new)
                if np.isfinite(F_new) and F_new <= F:
                    if F_new < F:
                        progressed = True
                    nu_vec, F, gA, gnu = nu_new, F_new, gA_new, gnu_new
                    break
                step *= cfg.backtrack_factor
                if step < STEP_MIN:
                    break
        rel = abs(trace[-1] - F) / max(1.0, abs(trace[-1]))
        trace.append(F)
        if not progressed or rel < cfg.rel_tol:
            converged = True
            break
    A = S + L
    if cfg.project_feasible:
        A = project_feasible(A, bounds.a_max, bounds.a_min)
    model = InfluenceModel(nu_vec, A, basis, sat, bounds)
    return FitResult(model, trace, it, converged, fit_nu=cfg.fit_nu, L=L, S=S)


def fit_diagonal(X, basis, sat, bounds, cfg=None, nu=None):
    """Unregularized fit constrained to per-node self-influence.

    Only entries (m, k*M + m) may be nonzero, which makes the problem M
    independent small likelihoods; we run the same masked iteration.
    """
    cfg = cfg or FitConfig()
    counts = (X.counts if isinstance(X, CountMatrix) else CountMatrix(np.asarray(X)).counts)
    if counts.shape[0] < 2:
        raise DimensionError("need at least 2 time bins to fit")
    M = counts.shape[1]
    K = basis.K
    G = feature_matrix(counts, basis, sat)
    mask = np.zeros((M, M * K))
    for k in range(K):
        mask[np.arange(M), k * M + np.arange(M)] = 1.0

    A = np.zeros((M, M * K))
    nu_vec = _init_nu(counts, bounds) if nu is None else np.asarray(nu, dtype=float).copy()
    F, gA, gnu = _loss_and_grads(counts, G, A, nu_vec)
    trace = [F]
    eta = cfg.step_init
    prev = None
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gA_m = gA * mask
        if cfg.bb_step and prev is not None:
            dA = A - prev[0]
            dgA = gA_m - prev[2]
            dnu = (nu_vec - prev[1]) if cfg.fit_nu else None
            dgnu = (gnu - prev[3]) if cfg.fit_nu else None
            eta = _bb_step(dA, dnu, dgA, dgnu, eta)
        accepted = False
        step = eta
        for _ in range(60):
            A_new = (A - step * gA_m) * mask
            nu_new = (
                np.clip(nu_vec - step * gnu, bounds.nu_min, bounds.nu_max)
                if cfg.fit_nu
                else nu_vec
            )
            F_new, gA_new, gnu_new = _loss_and_grads(counts, G, A_new, nu_new)
            if np.isfinite(F_new) and F_new <= F:
                accepted = True
                break
            step *= cfg.backtrack_factor
            if step < STEP_MIN:
                break
        if not accepted:
            converged = True
            break
        prev = (A, nu_vec, gA_m, gnu)
        rel = abs(F - F_new) / max(1.0, abs(F))
        A, nu_vec, F, gA, gnu = A_new, nu_new, F_new, gA_new, gnu_new
        trace.append(F)
        if rel < cfg.rel_tol:
            converged = True
            break
    model = InfluenceModel(nu_vec, A, basis, sat, bounds)
    return FitResult(model, trace, it, converged, fit_nu=cfg.fit_nu)
