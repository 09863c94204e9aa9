"""Closed-form constants and error bounds for the clipped count model.

Everything here is a pure function of model constants: the clipping
severity kappa, the restricted-eigenvalue floors (omega for one-lag
memory, r_rho for two lags), subspace compatibility constants, the
recommended penalty weights, and the resulting squared-error / sample
complexity bounds.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from seppnet.model import ParameterError

EXP_LIMIT = 700.0


@dataclass
class TheoryReport:
    R_min: float
    R_max: float
    kappa: float
    omega: float
    p: int
    psi: float
    mu: float
    lambda_rec: float
    T_min: float
    mse_bound: float
    r_rho: Optional[float] = None
    vacuous: bool = False
    nu_fitted: Optional[bool] = None

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ---------------------------------------------------------------------------
# Clipping severity
# ---------------------------------------------------------------------------


def poisson_cdf(k, lam):
    """P(X <= k) for X ~ Poisson(lam), summed in log space."""
    if k < 0:
        return 0.0
    if lam <= 0:
        return 1.0
    if lam > 1e6:
        # normal tail approximation; desk-scale inputs never get here
        from scipy.stats import norm

        return float(norm.cdf((k + 0.5 - lam) / math.sqrt(lam)))
    i = np.arange(0, int(k) + 1)
    log_terms = -lam + i * math.log(lam) - gammaln(i + 1)
    return float(min(1.0, math.exp(logsumexp(log_terms))))


def kappa(R_max, u):
    """Variance of the indicator that a Poisson(R_max) draw reaches the clip.

    kappa = F(u-1; R_max) * (1 - F(u-1; R_max)), in [0, 1/4].  Tail
    underflow (huge R_max) maps to 0.
    """
    if R_max <= 0:
        raise ParameterError("R_max must be positive")
    if u < 1:
        raise ParameterError("clip threshold must be >= 1")
    if not math.isfinite(R_max) or R_max > math.exp(EXP_LIMIT):
        return 0.0
    F = poisson_cdf(int(u) - 1, R_max)
    return F * (1.0 - F)


def omega_arma(R_min, kap, refined=False):
    """Restricted-eigenvalue floor for one-lag geometric memory.

    min(R_min/2, kappa); the refined form adds the 4/25 cap that covers
    R_min > 1/5.
    """
    if R_min < 0 or kap < 0:
        raise ParameterError("inputs must be nonnegative")
    vals = [0.5 * R_min, kap]
    if refined:
        vals.append(4.0 / 25.0)
    return min(vals)


def r_rho_ar2(R_min, R_max, rho_p, rho_c, rho_s):
    """Diagonal-dominance eigenvalue floor for the two-lag model.

    Returns min over the two row families; values <= 0 mean the bound is
    vacuous (reported, never clamped).
    """
    if not (R_max >= R_min > 0):
        raise ParameterError("need R_max >= R_min > 0")
    if min(rho_p, rho_c, rho_s) < 0:
        raise ParameterError("relation counts must be nonnegative")
    gap = R_max - R_min
    cross = math.sqrt(R_max) * gap / 2.0
    bound1 = R_min - rho_c * cross
    bound2 = R_min - rho_p * cross - rho_s * gap * gap / 4.0
    return min(bound1, bound2)


# ---------------------------------------------------------------------------
# Regularizer constants and penalty weights
# ---------------------------------------------------------------------------


def subspace_constants(reg_kind, *, s=None, s_G=None, r=None, M=None, D=1.0):
    """(psi, mu) for the supported penalties."""
    if reg_kind == "l1":
        if s is None or s < 0:
            raise ParameterError("l1 constants need s >= 0")
        v = 4.0 * math.sqrt(s)
        return v, v
    if reg_kind == "group_column":
        if s_G is None or s_G < 0:
            raise ParameterError("group constants need s_G >= 0")
        return 4.0 * math.sqrt(s_G), 16.0 * s_G
    if reg_kind == "nuclear":
        if r is None or r < 0 or M is None:
            raise ParameterError("nuclear constants need r >= 0 and M")
        return math.sqrt(2.0 * r), 2.0 * D * math.sqrt(M)
    raise ParameterError(f"no subspace constants for kind {reg_kind!r}")


def recommended_lambda(reg_kind, M, T, R_max=1.0, C=1.0, mode="practical"):
    """Penalty weight: simulation-protocol defaults or 2x the deviation bound."""
    if M < 1 or T < 1:
        raise ParameterError("M and T must be >= 1")
    if mode == "practical":
        if reg_kind in ("l1", "group_column"):
            return 0.1 / math.sqrt(T)
        if reg_kind == "nuclear":
            return 0.1 * math.sqrt(M / T)
        raise ParameterError(f"no practical lambda rule for kind {reg_kind!r}")
    if mode == "theory":
        lg = math.log(M * T)
        if reg_kind == "l1":
            return 2.0 * C * R_max * lg**3 / math.sqrt(T)
        if reg_kind == "group_column":
            return 2.0 * C * R_max * lg**2 * math.sqrt(M / T)
        if reg_kind == "nuclear":
            return 2.0 * C * lg**4 * math.sqrt(M / T)
        raise ParameterError(f"no theory lambda rule for kind {reg_kind!r}")
    raise ParameterError(f"unknown lambda mode {mode!r}")


def mse_bound(psi, lam, R_min, omega, p, U, mu, M, square_psi=True):
    """(bound, T_min) for the general guarantee.

    bound = 36 p psi^2 lam^2 / (R_min^2 omega^2); square_psi=False
    reproduces the unsquared headline form.  T_min = 128 p^2 U^4 mu^2
    log(M) / omega^2.  omega = 0 flags a vacuous bound (inf, inf).
    """
    if omega <= 0:
        return math.inf, math.inf
    psi_term = psi * psi if square_psi else psi
    bound = 36.0 * p * psi_term * lam * lam / (R_min * R_min * omega * omega)
    t_min = 128.0 * p * p * U**4 * mu * mu * math.log(max(M, 2)) / (omega * omega)
    return bound, t_min


def theory_report(
    reg_kind,
    *,
    M,
    T,
    R_min,
    R_max,
    u,
    U,
    p=1,
    s=None,
    s_G=None,
    r=None,
    D=1.0,
    C=1.0,
    lambda_mode="practical",
    refined_omega=False,
    rho_counts=None,
    nu_fitted=None,
):
    """Assemble every constant and bound into a TheoryReport.

    p=1 uses the one-lag omega floor; p=2 needs rho_counts =
    (rho_p, rho_c, rho_s) and uses the diagonal-dominance floor.
    """
    kap = kappa(R_max, u)
    r_rho = None
    if p == 2:
        if rho_counts is None:
            raise ParameterError("p=2 needs rho_counts=(rho_p, rho_c, rho_s)")
        r_rho = r_rho_ar2(R_min, R_max, *rho_counts)
        omega = max(r_rho, 0.0)
    else:
        omega = omega_arma(R_min, kap, refined=refined_omega)
    psi, mu = subspace_constants(reg_kind, s=s, s_G=s_G, r=r, M=M, D=D)
    lam = recommended_lambda(reg_kind, M, T, R_max=R_max, C=C, mode=lambda_mode)
    bound, t_min = mse_bound(psi, lam, R_min, omega, p, U, mu, M)
    return TheoryReport(
        R_min=R_min,
        R_max=R_max,
        kappa=kap,
        omega=omega,
        p=p,
        psi=psi,
        mu=mu,
        lambda_rec=lam,
        T_min=t_min,
        mse_bound=bound,
        r_rho=r_rho,
        vacuous=not math.isfinite(bound),
        nu_fitted=nu_fitted,
    )


# ---------------------------------------------------------------------------
# Heatmap / contour and saturation generalization
# ---------------------------------------------------------------------------


def kappa_grid_value(a_max, u, nu_max=0.0, alpha=0.0):
    """kappa at the worst-case rate exp(nu_max + a_max * u / (1 - alpha))."""
    exponent = nu_max + a_max * u / (1.0 - alpha)
    if exponent > EXP_LIMIT:
        return 0.0
    return kappa(math.exp(exponent), u)


def kappa_heatmap(a_max_grid, u_grid, nu_max=0.0, alpha=0.0, contour_level=None):
    """Table of kappa over an (a_max, u) grid plus a level-crossing contour.

    Returns (values, contour): values[i, j] = kappa at (u_grid[i],
    a_max_grid[j]); contour is a list of (u, a_max) points where kappa
    crosses contour_level, found by linear interpolation in a_max.
    """
    a_max_grid = np.asarray(a_max_grid, dtype=float)
    u_grid = np.asarray(u_grid, dtype=float)
    if a_max_grid.size == 0 or u_grid.size == 0:
        raise ParameterError("grids must be nonempty")
    values = np.empty((u_grid.size, a_max_grid.size))
    for i, u in enumerate(u_grid):
        for j, a in enumerate(a_max_grid):
            values[i, j] = kappa_grid_value(a, u, nu_max=nu_max, alpha=alpha)
    contour = []
    if contour_level is not None:
        for i, u in enumerate(u_grid):
            row = values[i]
            for j in range(len(row) - 1):
                lo, hi = row[j], row[j + 1]
                if (lo - contour_level) * (hi - contour_level) < 0:
                    frac = (contour_level - lo) / (hi - lo)
                    a_cross = a_max_grid[j] + frac * (a_max_grid[j + 1] - a_max_grid[j])
                    contour.append((float(u), float(a_cross)))
    return values, contour


def saturation_re_floor(sat, R_min, R_max):
    """Eigenvalue floor for a general bounded monotone saturation.

    c^2 * min(R_min/2, kappa) with c the derivative floor on [0, R_max];
    c = 1 for the hard clip.
    """
    c = sat.derivative_floor(R_max)
    if c <= 0:
        raise ParameterError("derivative floor must be positive")
    return c * c * omega_arma(R_min, kappa(R_max, sat.u))
