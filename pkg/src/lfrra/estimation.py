"""Constrained least-squares estimation of the LFRRA parameters.

Fits (alpha, beta, sigma) to firm-level (markup, quantity) pairs by
minimizing the residual sum of squares of
1 - mu - (alpha q + beta)/(alpha sigma q + 1) subject to the
theoretical constraints alpha q + beta > 0, alpha sigma q + 1 > 0, and
0 < (alpha q + beta)/(alpha sigma q + 1) <= 1 at every observation.

The search splits into an inner problem over (beta, sigma) at fixed
alpha and an outer grid over alpha that re-brackets around interior
minima and shifts/expands at boundary hits, run from both a moderate
and a very large starting upper bound.  Inference is by nonparametric
bootstrap with percentile confidence intervals.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import (
    EmptyDataError,
    InadmissibleParametersError,
    InfeasibleError,
    MissingCIError,
    NonConvergenceError,
)
from .markup import soc_check
from .utility import LfrraParams, admissible_q_range, rra

CONSTRAINT_MARGIN = 1e-12


@dataclass(frozen=True)
class FirmObservation:
    sector_id: int
    firm_id: str
    year: int
    markup: float   # 1/mu, > 1
    quantity: float  # > 0


@dataclass(frozen=True)
class EstimationConfig:
    grid_steps: int = 100
    bootstrap_grid_steps: int = 50
    expansion_factor: float = 2.0          # xi > 1 for boundary expansion
    ascend_upper: float = 450.0
    descend_upper: float = 1.5e8
    convergence_tol: float = 1e-12
    trim_fraction: float = 0.03
    bootstrap_reps: int = 200
    seed: int = 0
    max_outer_iterations: int = 200
    # deterministic inner-search schedule over sigma
    sigma_search_lower: float = -25.0
    sigma_search_upper: float = 75.0
    sigma_coarse_points: int = 41
    refine_tol: float = 1e-9

    def __post_init__(self):
        if self.grid_steps < 2 or self.bootstrap_grid_steps < 2:
            raise ValueError("grid steps must be at least 2")
        if self.expansion_factor <= 1.0:
            raise ValueError("expansion_factor must exceed 1")
        if not 0.0 <= self.trim_fraction < 0.5:
            raise ValueError("trim_fraction must lie in [0, 0.5)")


@dataclass
class EstimationResult:
    alpha_hat: float
    beta_hat: float
    sigma_hat: float
    rss: float
    n_obs: int
    beta_minus_inv_sigma: float
    alpha_times_1_minus_beta_sigma: float
    rra_type: str = "NA"
    ci: dict[str, tuple[float, float]] | None = None
    soc_all_ok: bool = True
    skipped_replicates: int = 0
    spec_name: str = "lfrra"
    implicit: bool = False
    extras: dict = field(default_factory=dict)


def _derived_stats(alpha: float, beta: float, sigma: float) -> tuple[float, float]:
    inv = beta - 1.0 / sigma if sigma != 0.0 else -math.inf
    return inv, alpha * (1.0 - beta * sigma)


# ---------------------------------------------------------------------------
# data preparation


def prepare_data(rows: list[FirmObservation],
                 trim_fraction: float = 0.03) -> list[FirmObservation]:
    """Filter, trim per sector, and rescale quantities by the sample mean.

    Drops rows with missing or <= 1 markups (and missing quantities).
    Within each sector, the bottom and top ``trim_fraction`` of both the
    markup and the quantity distributions are removed: with k =
    floor(n * trim_fraction), the thresholds are the (k+1)-th smallest
    and (k+1)-th largest order statistics, kept inclusively, so tied
    samples are never split.  A row is dropped if either its markup or
    its quantity falls outside its sector's thresholds.  Surviving
    quantities are divided by their overall mean.
    """
    if not 0.0 <= trim_fraction < 0.5:
        raise ValueError("trim_fraction must lie in [0, 0.5)")
    valid = [r for r in rows
             if r.markup is not None and r.quantity is not None
             and r.markup > 1.0 and r.quantity > 0.0]
    if not valid:
        raise EmptyDataError("no observations with markup > 1 and quantity > 0")

    kept: list[FirmObservation] = []
    sectors = sorted({r.sector_id for r in valid})
    for sec in sectors:
        sec_rows = [r for r in valid if r.sector_id == sec]
        n = len(sec_rows)
        k = int(math.floor(n * trim_fraction))
        markups = np.sort(np.array([r.markup for r in sec_rows]))
        quantities = np.sort(np.array([r.quantity for r in sec_rows]))
        m_lo, m_hi = markups[k], markups[n - 1 - k]
        q_lo, q_hi = quantities[k], quantities[n - 1 - k]
        kept.extend(r for r in sec_rows
                    if m_lo <= r.markup <= m_hi and q_lo <= r.quantity <= q_hi)
    if not kept:
        raise EmptyDataError("trimming removed every observation")

    q_mean = sum(r.quantity for r in kept) / len(kept)
    return [replace(r, quantity=r.quantity / q_mean) for r in kept]


def _arrays(observations: list[FirmObservation]) -> tuple[np.ndarray, np.ndarray]:
    q = np.array([r.quantity for r in observations], dtype=float)
    y = 1.0 - 1.0 / np.array([r.markup for r in observations], dtype=float)
    return q, y


# ---------------------------------------------------------------------------
# objective


def rss(params: LfrraParams, observations: list[FirmObservation]) -> float:
    """Residual sum of squares; +inf when any constraint is violated."""
    q, y = _arrays(observations)
    return _rss_arrays(params.alpha, params.beta, params.sigma, q, y)


def _rss_arrays(alpha: float, beta: float, sigma: float,
                q: np.ndarray, y: np.ndarray) -> float:
    den = alpha * sigma * q + 1.0
    if den.min() <= 0.0:
        return math.inf
    num = alpha * q + beta
    if num.min() <= 0.0:
        return math.inf
    fitted = num / den
    if fitted.max() > 1.0:
        return math.inf
    r = y - fitted
    return float(r @ r)


# ---------------------------------------------------------------------------
# inner problem: (beta, sigma) at fixed alpha


def _beta_bounds(aq: np.ndarray, sigma: float,
                 beta_fixed: float | None) -> tuple[float, float] | None:
    """Feasible closed beta interval at (alpha, sigma), or None if empty."""
    lo = max(0.0, float((-aq).max()) + CONSTRAINT_MARGIN)
    hi = min(1.0, float((1.0 + aq * (sigma - 1.0)).min()))
    if beta_fixed is not None:
        if lo <= beta_fixed <= hi or (beta_fixed == 0.0 and float((-aq).max()) < 0.0):
            return beta_fixed, beta_fixed
        return None
    if lo > hi:
        return None
    return lo, hi


def _profile_beta(alpha: float, sigma: float, q: np.ndarray, y: np.ndarray,
                  beta_fixed: float | None) -> tuple[float, float]:
    """(beta, rss) minimizing the objective at fixed (alpha, sigma).

    Beta enters the fitted value as beta / (alpha sigma q + 1); the
    conditional optimum is a weighted least-squares coefficient,
    clipped to the feasible interval.
    """
    den = alpha * sigma * q + 1.0
    if den.min() <= 0.0:
        return math.nan, math.inf
    aq = alpha * q
    bounds = _beta_bounds(aq, sigma, beta_fixed)
    if bounds is None:
        return math.nan, math.inf
    lo, hi = bounds
    if beta_fixed is not None:
        beta = beta_fixed
    else:
        w = 1.0 / den
        e = y - aq * w
        beta = float((e @ w) / (w @ w))
        beta = min(max(beta, lo), hi)
    return beta, _rss_arrays(alpha, beta, sigma, q, y)


def _sigma_window(alpha: float, q_max: float,
                  cfg: EstimationConfig) -> tuple[float, float] | None:
    lo, hi = cfg.sigma_search_lower, cfg.sigma_search_upper
    if alpha > 0.0:
        lo = max(lo, -1.0 / (alpha * q_max) + CONSTRAINT_MARGIN)
    elif alpha < 0.0:
        hi = min(hi, -1.0 / (alpha * q_max) - CONSTRAINT_MARGIN)
    if lo >= hi:
        return None
    return lo, hi


def _coarse_sigma_scan(alpha: float, sigmas: np.ndarray, q: np.ndarray,
                       y: np.ndarray, beta_fixed: float | None) -> np.ndarray:
    """Vectorized profile RSS over a sigma grid (rows: sigma values)."""
    den = alpha * sigmas[:, None] * q[None, :] + 1.0
    aq = alpha * q
    valid = den.min(axis=1) > 0.0
    out = np.full(sigmas.shape, math.inf)
    if not valid.any():
        return out
    dv = den[valid]
    w = 1.0 / dv
    base = aq[None, :] * w
    lo = max(0.0, float((-aq).max()) + CONSTRAINT_MARGIN)
    hi = np.minimum(1.0, 1.0 + (aq[None, :] * (sigmas[valid, None] - 1.0)).min(axis=1))
    if beta_fixed is not None:
        betas = np.full(dv.shape[0], beta_fixed)
        feasible = (lo <= beta_fixed) & (beta_fixed <= hi)
        if beta_fixed == 0.0:
            feasible = (float((-aq).max()) < 0.0) & (beta_fixed <= hi)
    else:
        e = y[None, :] - base
        betas = np.clip((e * w).sum(axis=1) / (w * w).sum(axis=1), lo, hi)
        feasible = lo <= hi
    fitted = base + betas[:, None] * w
    r = y[None, :] - fitted
    vals = (r * r).sum(axis=1)
    bad = ~feasible | (fitted.max(axis=1) > 1.0) | \
        ((aq[None, :] + betas[:, None]).min(axis=1) <= 0.0)
    vals = np.where(bad, math.inf, vals)
    out[valid] = vals
    return out


def _golden_minimize(f, a: float, b: float, tol: float,
                     max_iter: int = 120) -> tuple[float, float]:
    """Golden-section minimum of f on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def fit_inner(alpha_fixed: float, observations: list[FirmObservation],
              cfg: EstimationConfig = EstimationConfig(),
              beta_fixed: float | None = None) -> tuple[float, float, float]:
    """(beta, sigma, rss) minimizing the objective at fixed alpha."""
    q, y = _arrays(observations)
    beta, sigma, val = _inner_arrays(alpha_fixed, q, y, cfg, beta_fixed)
    if not math.isfinite(val):
        raise InfeasibleError(
            f"no feasible (beta, sigma) at alpha={alpha_fixed!r}")
    return beta, sigma, val


def _inner_arrays(alpha: float, q: np.ndarray, y: np.ndarray,
                  cfg: EstimationConfig,
                  beta_fixed: float | None = None) -> tuple[float, float, float]:
    if alpha == 0.0:
        # the objective no longer depends on sigma (flat direction);
        # report sigma = 1 by convention
        if beta_fixed is not None:
            beta = beta_fixed
        else:
            beta = float(min(max(float(y.mean()), CONSTRAINT_MARGIN), 1.0))
        if beta <= 0.0:
            return math.nan, 1.0, math.inf
        r = y - beta
        return beta, 1.0, float(r @ r)

    window = _sigma_window(alpha, float(q.max()), cfg)
    if window is None:
        return math.nan, math.nan, math.inf
    lo, hi = window
    sigmas = np.linspace(lo, hi, cfg.sigma_coarse_points)
    vals = _coarse_sigma_scan(alpha, sigmas, q, y, beta_fixed)
    if not np.isfinite(vals).any():
        return math.nan, math.nan, math.inf

    def profile(s):
        return _profile_beta(alpha, s, q, y, beta_fixed)[1]

    # refine around every coarse local minimum (up to the best three)
    candidates = []
    for i in range(len(sigmas)):
        left = vals[i - 1] if i > 0 else math.inf
        right = vals[i + 1] if i < len(sigmas) - 1 else math.inf
        if math.isfinite(vals[i]) and vals[i] <= left and vals[i] <= right:
            candidates.append(i)
    candidates.sort(key=lambda i: vals[i])
    best = (math.nan, math.nan, math.inf)
    for i in candidates[:3]:
        a_br = sigmas[max(i - 1, 0)]
        b_br = sigmas[min(i + 1, len(sigmas) - 1)]
        s_star, v_star = _golden_minimize(profile, float(a_br), float(b_br),
                                          cfg.refine_tol)
        if v_star < best[2]:
            b_star, v2 = _profile_beta(alpha, s_star, q, y, beta_fixed)
            best = (b_star, s_star, v2)
    return best


# ---------------------------------------------------------------------------
# vectorized inner sweep over a whole alpha grid


def _profile_vectorized(A: np.ndarray, aq_lo: np.ndarray, aq_hi: np.ndarray,
                        y: np.ndarray, sigma: np.ndarray, mode: str,
                        q_min: float) -> tuple[np.ndarray, np.ndarray]:
    """(rss, beta) for each alpha row at its own sigma value.

    ``A`` is the (m, n) matrix alpha_i * q_j; ``aq_lo``/``aq_hi`` its
    per-row extremes; ``sigma`` one value per row.  ``mode`` is "free"
    (beta profiled in closed form), "fixed0"/"fixed1" (beta pinned), or
    "mnp" (beta = 1 with the shifted-CREMR constraint set).
    """
    m = A.shape[0]
    s_col = sigma[:, None]
    den = s_col * A + 1.0
    rss_out = np.full(m, math.inf)
    beta_out = np.full(m, math.nan)

    if mode == "mnp":
        alpha_row = np.where(aq_hi != 0.0, aq_hi / q_min, 0.0)  # sign carrier
        den_ok = (1.0 + np.minimum(sigma * aq_lo, sigma * aq_hi) > 0.0) | \
            (1.0 + np.maximum(sigma * aq_lo, sigma * aq_hi) < 0.0)
        gamma_ok = np.where(
            np.minimum(aq_lo, aq_hi) > 0.0, True,
            np.minimum(sigma * aq_lo, sigma * aq_hi) < -1.0)
        valid = (sigma > 0.0) & den_ok & gamma_ok & (alpha_row != 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            fitted = (A + 1.0) / den
            f_min = fitted.min(axis=1)
            f_max = fitted.max(axis=1)
            valid &= (f_min > 0.0) & (f_max <= 1.0)
            r = y[None, :] - fitted
            vals = (r * r).sum(axis=1)
        rss_out[valid] = vals[valid]
        beta_out[valid] = 1.0
        return rss_out, beta_out

    den_min = 1.0 + np.minimum(sigma * aq_lo, sigma * aq_hi)
    valid = den_min > 0.0
    blo = np.maximum(0.0, -aq_lo + CONSTRAINT_MARGIN)
    bhi = np.minimum(1.0, 1.0 + np.minimum((sigma - 1.0) * aq_lo,
                                           (sigma - 1.0) * aq_hi))
    if mode == "free":
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            w = 1.0 / den
            e = y[None, :] - A * w
            beta = (e * w).sum(axis=1) / (w * w).sum(axis=1)
        # keep strictly inside the upper constraint when clipping binds
        beta = np.clip(beta, blo, bhi - 1e-15 * (1.0 + np.abs(bhi)))
        valid &= blo <= bhi
    else:
        beta = np.full(m, 0.0 if mode == "fixed0" else 1.0)
        valid &= (blo <= beta) & (beta <= bhi)
        if mode == "fixed0":
            valid &= aq_lo > 0.0  # alpha q + beta > 0 needs alpha > 0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            w = 1.0 / den
    with np.errstate(invalid="ignore", over="ignore"):
        r = y[None, :] - (A + beta[:, None]) * w
        vals = (r * r).sum(axis=1)
    ok = valid & np.isfinite(vals)
    rss_out[ok] = vals[ok]
    beta_out[ok] = beta[ok]
    return rss_out, beta_out


_GOLDEN_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _sweep(alpha_grid: np.ndarray, q: np.ndarray, y: np.ndarray,
           cfg: EstimationConfig, mode: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Best (rss, beta, sigma) per alpha over the sigma search window.

    Coarse scan on a fixed sigma grid followed by a vectorized
    golden-section refinement around each row's best cell.
    """
    A = alpha_grid[:, None] * q[None, :]
    q_lo, q_hi = float(q.min()), float(q.max())
    aq_lo = np.minimum(alpha_grid * q_lo, alpha_grid * q_hi)
    aq_hi = np.maximum(alpha_grid * q_lo, alpha_grid * q_hi)
    s_lo = 1e-6 if mode == "mnp" else cfg.sigma_search_lower
    sigmas = np.linspace(s_lo, cfg.sigma_search_upper, cfg.sigma_coarse_points)

    m = alpha_grid.shape[0]
    coarse = np.empty((m, len(sigmas)))
    coarse_beta = np.empty((m, len(sigmas)))
    for j, s in enumerate(sigmas):
        s_vec = np.full(m, float(s))
        coarse[:, j], coarse_beta[:, j] = _profile_vectorized(
            A, aq_lo, aq_hi, y, s_vec, mode, q_lo)
    j_star = np.argmin(coarse, axis=1)
    rows = np.arange(m)
    best_rss = coarse[rows, j_star]
    best_beta = coarse_beta[rows, j_star]
    best_sigma = sigmas[j_star]

    # vectorized golden-section refinement within each row's bracket
    a_br = sigmas[np.maximum(j_star - 1, 0)]
    b_br = sigmas[np.minimum(j_star + 1, len(sigmas) - 1)]
    c = b_br - _GOLDEN_INVPHI * (b_br - a_br)
    d = a_br + _GOLDEN_INVPHI * (b_br - a_br)
    fc, _ = _profile_vectorized(A, aq_lo, aq_hi, y, c, mode, q_lo)
    fd, _ = _profile_vectorized(A, aq_lo, aq_hi, y, d, mode, q_lo)
    span = float(np.max(b_br - a_br)) if m else 0.0
    n_iter = max(8, int(math.ceil(math.log(max(cfg.refine_tol, 1e-14) / max(span, 1e-12))
                                  / math.log(_GOLDEN_INVPHI))))
    for _ in range(min(n_iter, 80)):
        take_c = fc < fd
        b_br = np.where(take_c, d, b_br)
        a_br = np.where(take_c, a_br, c)
        c_new = b_br - _GOLDEN_INVPHI * (b_br - a_br)
        d_new = a_br + _GOLDEN_INVPHI * (b_br - a_br)
        # re-evaluate only the fresh point per row
        probe = np.where(take_c, c_new, d_new)
        f_probe, _ = _profile_vectorized(A, aq_lo, aq_hi, y, probe, mode, q_lo)
        fd = np.where(take_c, fc, f_probe)
        fc = np.where(take_c, f_probe, fc)
        c, d = c_new, d_new
    sig_ref = np.where(fc < fd, c, d)
    rss_ref, beta_ref = _profile_vectorized(A, aq_lo, aq_hi, y, sig_ref, mode, q_lo)
    improved = rss_ref < best_rss
    best_rss = np.where(improved, rss_ref, best_rss)
    best_beta = np.where(improved, beta_ref, best_beta)
    best_sigma = np.where(improved, sig_ref, best_sigma)
    return best_rss, best_beta, best_sigma


# ---------------------------------------------------------------------------
# outer problem: grid search over alpha


def _outer_run(q: np.ndarray, y: np.ndarray, alpha_lo: float, alpha_hi: float,
               cfg: EstimationConfig, grid_steps: int, mode: str,
               floor: float | None = None) -> tuple[float, float, float, float]:
    """One grid-search run; returns (alpha, beta, sigma, rss).

    Interior minima re-bracket to the neighboring grid points; boundary
    hits shift and expand the domain in that direction, except at the
    theoretical lower ``floor``, where the domain shrinks toward it.
    """
    lo, hi = alpha_lo, alpha_hi
    prev_alpha = None
    best = (math.nan, math.nan, math.nan, math.inf)
    for _ in range(cfg.max_outer_iterations):
        grid = np.linspace(lo, hi, grid_steps)
        rss_vals, betas, sigmas = _sweep(grid, q, y, cfg, mode)
        if not np.isfinite(rss_vals).any():
            raise InfeasibleError(
                "no feasible parameters anywhere on the current alpha grid")
        i = int(np.argmin(rss_vals))
        a_hat = float(grid[i])
        v_hat, b_hat, s_hat = float(rss_vals[i]), float(betas[i]), float(sigmas[i])
        if v_hat < best[3]:
            best = (a_hat, b_hat, s_hat, v_hat)
        if prev_alpha is not None and abs(a_hat - prev_alpha) < cfg.convergence_tol:
            return best
        prev_alpha = a_hat
        if 0 < i < grid_steps - 1:
            lo, hi = float(grid[i - 1]), float(grid[i + 1])
        elif i == grid_steps - 1:
            # boundary hit above: shift and expand
            lo = hi
            hi = hi * cfg.expansion_factor if hi > 0.0 \
                else hi + cfg.expansion_factor * max(1.0, abs(hi))
        else:
            # boundary hit below
            at_floor = floor is not None and lo <= floor + 1e-300
            if at_floor:
                lo, hi = float(grid[0]), float(grid[1])
            else:
                hi = lo
                if lo < 0.0:
                    lo = lo * cfg.expansion_factor
                elif lo > 0.0:
                    lo = lo / cfg.expansion_factor
                else:
                    lo = -1.0
                if floor is not None:
                    lo = max(lo, floor)
    raise NonConvergenceError(
        f"outer grid search did not converge in {cfg.max_outer_iterations} iterations")


def _fit_generic(observations: list[FirmObservation], cfg: EstimationConfig,
                 grid_steps: int | None = None,
                 beta_fixed: float | None = None,
                 spec_name: str = "lfrra",
                 implicit: bool = False) -> EstimationResult:
    if len(observations) < 3:
        raise EmptyDataError("estimation requires at least 3 observations")
    q, y = _arrays(observations)
    steps = grid_steps if grid_steps is not None else cfg.grid_steps
    alpha_floor = -1.0 / float(q.max())

    def inner(a, qa, ya):
        return _inner_arrays(a, qa, ya, cfg, beta_fixed)

    runs = []
    for upper in (cfg.ascend_upper, cfg.descend_upper):
        runs.append(_outer_run(q, y, alpha_floor, upper, cfg, steps, inner,
                               floor=alpha_floor))
    a_hat, b_hat, s_hat, v_hat = min(runs, key=lambda r: r[3])

    inv, slope = _derived_stats(a_hat, b_hat, s_hat)
    result = EstimationResult(
        alpha_hat=a_hat, beta_hat=b_hat, sigma_hat=s_hat, rss=v_hat,
        n_obs=len(observations), beta_minus_inv_sigma=inv,
        alpha_times_1_minus_beta_sigma=slope, spec_name=spec_name,
        implicit=implicit)
    result.soc_all_ok = soc_verify_fitted(result, observations)
    return result


def fit_lfrra(observations: list[FirmObservation],
              cfg: EstimationConfig = EstimationConfig()) -> EstimationResult:
    """Unconstrained fit of (alpha, beta, sigma)."""
    return _fit_generic(observations, cfg)


def fit_constrained_beta(observations: list[FirmObservation],
                         cfg: EstimationConfig,
                         beta_fixed: float) -> EstimationResult:
    """Fit with beta pinned to 0 or 1."""
    if beta_fixed not in (0.0, 1.0):
        raise ValueError("beta_fixed must be 0 or 1")
    name = "beta0" if beta_fixed == 0.0 else "beta1"
    return _fit_generic(observations, cfg, beta_fixed=beta_fixed, spec_name=name)


def fit_implicit(observations: list[FirmObservation],
                 cfg: EstimationConfig = EstimationConfig()) -> EstimationResult:
    """Same objective as the direct fit; alpha_hat is alpha/U under
    implicit additivity (the utility level U is not separately identified)."""
    result = _fit_generic(observations, cfg, spec_name="implicit", implicit=True)
    result.extras["alpha_interpretation"] = "alpha_over_U"
    return result


# ---------------------------------------------------------------------------
# shifted-CREMR specification (beta = 1, alpha = -1/(gamma sigma))


def _mnp_rss_profile(alpha: float, q: np.ndarray, y: np.ndarray,
                     cfg: EstimationConfig) -> tuple[float, float, float]:
    """Inner sigma search for the shifted-CREMR spec at fixed alpha."""
    if alpha == 0.0:
        return math.nan, math.nan, math.inf
    q_min = float(q.min())

    def value(s):
        if s <= 0.0:
            return math.inf
        gamma = -1.0 / (alpha * s)
        if gamma >= q_min:
            return math.inf
        den = alpha * s * q + 1.0
        num = alpha * q + 1.0
        fitted = num / den
        if fitted.min() <= 0.0 or fitted.max() > 1.0:
            return math.inf
        r = y - fitted
        return float(r @ r)

    sigmas = np.linspace(max(1e-6, cfg.sigma_search_lower),
                         cfg.sigma_search_upper, cfg.sigma_coarse_points)
    vals = np.array([value(float(s)) for s in sigmas])
    if not np.isfinite(vals).any():
        return math.nan, math.nan, math.inf
    candidates = [i for i in range(len(sigmas))
                  if math.isfinite(vals[i])
                  and vals[i] <= (vals[i - 1] if i > 0 else math.inf)
                  and vals[i] <= (vals[i + 1] if i < len(sigmas) - 1 else math.inf)]
    candidates.sort(key=lambda i: vals[i])
    best = (math.nan, math.nan, math.inf)
    for i in candidates[:3]:
        a_br = float(sigmas[max(i - 1, 0)])
        b_br = float(sigmas[min(i + 1, len(sigmas) - 1)])
        s_star, v_star = _golden_minimize(value, a_br, b_br, cfg.refine_tol)
        if v_star < best[2]:
            best = (1.0, s_star, v_star)
    return best


def fit_mnp(observations: list[FirmObservation],
            cfg: EstimationConfig = EstimationConfig(),
            grid_steps: int | None = None) -> EstimationResult:
    """Fit the shifted-CREMR specification over (gamma, sigma).

    Parametrized by alpha = -1/(gamma sigma) with beta = 1 implied;
    gamma < q_min is required, covering both the gamma > 0 shifted
    region (alpha < 0) and gamma < 0 (equivalent to the plain beta = 1
    family with alpha > 0).
    """
    if len(observations) < 3:
        raise EmptyDataError("estimation requires at least 3 observations")
    q, y = _arrays(observations)
    q_min = float(q.min())
    if q_min <= 0.0:
        raise InfeasibleError("shifted CREMR requires a positive minimum quantity")
    steps = grid_steps if grid_steps is not None else cfg.grid_steps

    def inner(a, qa, ya):
        return _mnp_rss_profile(a, qa, ya, cfg)

    runs = []
    for upper in (cfg.ascend_upper, cfg.descend_upper):
        # symmetric domains: the feasible set splits into alpha > 0
        # (gamma < 0) and alpha < -1/(sigma q_min) (gamma in (0, q_min))
        runs.append(_outer_run(q, y, -upper, upper, cfg, steps, inner))
    a_hat, b_hat, s_hat, v_hat = min(runs, key=lambda r: r[3])
    gamma_hat = -1.0 / (a_hat * s_hat)

    inv, slope = _derived_stats(a_hat, b_hat, s_hat)
    result = EstimationResult(
        alpha_hat=a_hat, beta_hat=b_hat, sigma_hat=s_hat, rss=v_hat,
        n_obs=len(observations), beta_minus_inv_sigma=inv,
        alpha_times_1_minus_beta_sigma=slope, spec_name="mnp")
    result.extras["gamma_hat"] = gamma_hat
    result.soc_all_ok = soc_verify_fitted(result, observations)
    return result


# ---------------------------------------------------------------------------
# non-linear fractional RRA benchmark (RRA = q^(eps/sb) / sb)


@dataclass
class KlenowWillisResult:
    epsilon: float
    sigma_bar: float
    rss: float
    n_obs: int
    rra_type: str = "NA"
    ci: dict[str, tuple[float, float]] | None = None
    skipped_replicates: int = 0
    spec_name: str = "kw"


def fit_klenow_willis(observations: list[FirmObservation],
                      cfg: EstimationConfig = EstimationConfig()
                      ) -> KlenowWillisResult:
    """Fit RRA = q^(eps/sigma_bar) / sigma_bar with 0 < RRA <= 1.

    For a fixed exponent ratio rho = eps/sigma_bar the scale enters
    linearly, so the search is one-dimensional in rho with the scale
    profiled in closed form.
    """
    if len(observations) < 3:
        raise EmptyDataError("estimation requires at least 3 observations")
    q, y = _arrays(observations)
    logq = np.log(q)

    def value_and_scale(rho):
        v = np.exp(rho * logq)
        c = float((y @ v) / (v @ v))
        c_hi = 1.0 / float(v.max())
        c = min(max(c, CONSTRAINT_MARGIN), c_hi)
        r = y - c * v
        return float(r @ r), c

    def value(rho):
        return value_and_scale(rho)[0]

    rhos = np.linspace(-5.0, 5.0, 201)
    vals = np.array([value(float(r)) for r in rhos])
    i = int(np.argmin(vals))
    a_br = float(rhos[max(i - 1, 0)])
    b_br = float(rhos[min(i + 1, len(rhos) - 1)])
    rho_star, v_star = _golden_minimize(value, a_br, b_br, 1e-12)
    _, c_star = value_and_scale(rho_star)
    sigma_bar = 1.0 / c_star
    return KlenowWillisResult(epsilon=rho_star * sigma_bar, sigma_bar=sigma_bar,
                              rss=v_star, n_obs=len(observations))


# ---------------------------------------------------------------------------
# SOC verification, bootstrap, classification


def soc_verify_fitted(result: EstimationResult,
                      observations: list[FirmObservation],
                      grid_points: int = 256) -> bool:
    """Second-order condition at the fitted triple for every observed
    quantity and on a dense grid over [0, q_max]."""
    a, b, s = result.alpha_hat, result.beta_hat, result.sigma_hat
    try:
        params = LfrraParams(a, min(max(b, 0.0), 1.0), s)
    except InadmissibleParametersError:
        return False
    q_max = max(r.quantity for r in observations)
    qs = [r.quantity for r in observations]
    qs.extend(float(v) for v in np.linspace(0.0, q_max, grid_points))
    return all(soc_check(params, qv) for qv in qs)


def _bootstrap_indices(seed: int, rep: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(rep,)))
    return rng.integers(0, n, size=n)


_BOOTSTRAP_KEYS = ("alpha", "beta", "sigma", "beta_minus_inv_sigma",
                   "alpha_times_1_minus_beta_sigma")


def bootstrap(observations: list[FirmObservation],
              cfg: EstimationConfig = EstimationConfig(),
              spec_name: str = "lfrra",
              workers: int = 0) -> tuple[dict[str, tuple[float, float]],
                                         dict[str, np.ndarray], int]:
    """Percentile bootstrap over resamples of the prepared observations.

    Returns (confidence intervals, replicate distributions, skipped
    count).  Each replicate re-fits on a with-replacement resample with
    the coarser bootstrap grid; the random stream is split per
    replicate index, so serial and parallel runs agree exactly.
    """
    n = len(observations)
    steps = cfg.bootstrap_grid_steps

    def one(rep: int):
        idx = _bootstrap_indices(cfg.seed, rep, n)
        sample = [observations[i] for i in idx]
        try:
            if spec_name == "lfrra":
                r = _fit_generic(sample, cfg, grid_steps=steps)
            elif spec_name == "implicit":
                r = _fit_generic(sample, cfg, grid_steps=steps, implicit=True,
                                 spec_name="implicit")
            elif spec_name == "beta0":
                r = _fit_generic(sample, cfg, grid_steps=steps, beta_fixed=0.0,
                                 spec_name="beta0")
            elif spec_name == "beta1":
                r = _fit_generic(sample, cfg, grid_steps=steps, beta_fixed=1.0,
                                 spec_name="beta1")
            elif spec_name == "mnp":
                r = fit_mnp(sample, cfg, grid_steps=steps)
            else:
                raise ValueError(f"unknown spec {spec_name!r}")
        except (InfeasibleError, NonConvergenceError, EmptyDataError):
            return None
        return (r.alpha_hat, r.beta_hat, r.sigma_hat,
                r.beta_minus_inv_sigma, r.alpha_times_1_minus_beta_sigma)

    reps = range(cfg.bootstrap_reps)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, reps))
    else:
        results = [one(rep) for rep in reps]

    good = [r for r in results if r is not None]
    skipped = len(results) - len(good)
    if not good:
        raise InfeasibleError("every bootstrap replicate failed")
    arr = np.array(good)
    dists = {key: arr[:, j] for j, key in enumerate(_BOOTSTRAP_KEYS)}
    ci = {key: (float(np.percentile(v, 2.5)), float(np.percentile(v, 97.5)))
          for key, v in dists.items()}
    return ci, dists, skipped


def bootstrap_kw(observations: list[FirmObservation],
                 cfg: EstimationConfig = EstimationConfig(),
                 workers: int = 0) -> tuple[dict[str, tuple[float, float]],
                                            dict[str, np.ndarray], int]:
    """Percentile bootstrap for the non-linear fractional benchmark."""
    n = len(observations)

    def one(rep: int):
        idx = _bootstrap_indices(cfg.seed, rep, n)
        sample = [observations[i] for i in idx]
        try:
            r = fit_klenow_willis(sample, cfg)
        except (InfeasibleError, EmptyDataError):
            return None
        return (r.epsilon, r.sigma_bar)

    reps = range(cfg.bootstrap_reps)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, reps))
    else:
        results = [one(rep) for rep in reps]
    good = [r for r in results if r is not None]
    skipped = len(results) - len(good)
    if not good:
        raise InfeasibleError("every bootstrap replicate failed")
    arr = np.array(good)
    dists = {"epsilon": arr[:, 0], "sigma_bar": arr[:, 1]}
    ci = {key: (float(np.percentile(v, 2.5)), float(np.percentile(v, 97.5)))
          for key, v in dists.items()}
    return ci, dists, skipped


def classify_rra(result: EstimationResult) -> str:
    """RRA type from the bootstrap confidence intervals.

    CRRA when the interval for alpha or for beta - 1/sigma covers zero;
    otherwise IRRA/DRRA by the sign of the interval for
    alpha (1 - beta sigma); NA when that interval straddles zero.
    """
    if result.ci is None:
        raise MissingCIError("classification requires bootstrap confidence intervals")
    a_lo, a_hi = result.ci["alpha"]
    if a_lo <= 0.0 <= a_hi:
        return "CRRA"
    inv = result.ci.get("beta_minus_inv_sigma")
    if inv is not None and inv[0] <= 0.0 <= inv[1]:
        return "CRRA"
    slope = result.ci.get("alpha_times_1_minus_beta_sigma")
    if slope is None:
        return "NA"
    if slope[0] > 0.0:
        return "IRRA"
    if slope[1] < 0.0:
        return "DRRA"
    return "NA"


def classify_kw(result: KlenowWillisResult) -> str:
    """RRA type for the benchmark: the RRA slope sign equals sign(eps)."""
    if result.ci is None:
        raise MissingCIError("classification requires bootstrap confidence intervals")
    lo, hi = result.ci["epsilon"]
    if lo <= 0.0 <= hi:
        return "CRRA"
    return "IRRA" if lo > 0.0 else "DRRA"


# ---------------------------------------------------------------------------
# synthetic data


def synth_generate(params: LfrraParams, n: int, noise_sd: float, seed: int,
                   sector_id: int = 1, year: int = 2000,
                   q_scale: float = 1.0) -> list[FirmObservation]:
    """Synthetic observations with 1 - mu = RRA(q) + Gaussian noise.

    Quantities are drawn lognormal, rescaled by ``q_scale``, and
    rejected outside the admissible range or where the noiseless RRA
    leaves (0, 1); the noisy value is clipped to keep the markup above
    one.  Byte-identical under a fixed seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if noise_sd < 0.0:
        raise ValueError("noise_sd must be nonnegative")
    interval = admissible_q_range(params)  # validates the triple
    rng = np.random.default_rng(seed)
    rows: list[FirmObservation] = []
    attempts = 0
    while len(rows) < n:
        attempts += 1
        if attempts > 200 * n + 1000:
            raise InadmissibleParametersError(
                "admissible region with RRA in (0,1) is too thin to sample")
        q = float(rng.lognormal(mean=0.0, sigma=1.0)) * q_scale
        if not interval.contains(q) or q <= 0.0:
            continue
        try:
            level = rra(params, q)
        except Exception:
            continue
        if not 0.0 < level < 1.0:
            continue
        y = level
        if noise_sd > 0.0:
            y = level + float(rng.normal(0.0, noise_sd))
        y = min(max(y, 1e-9), 1.0 - 1e-9)
        rows.append(FirmObservation(sector_id=sector_id,
                                    firm_id=f"f{len(rows):06d}", year=year,
                                    markup=1.0 / (1.0 - y), quantity=q))
    return rows
