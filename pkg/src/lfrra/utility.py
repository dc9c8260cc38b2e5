"""The LFRRA utility family.

Relative risk aversion of the linear fractional form
(alpha q + beta) / (alpha sigma q + 1), the admissible quantity ranges,
utility and marginal-utility evaluation across the general
hypergeometric case, the HARA and CREMR limit families, all the named
special cases (CARA, quadratic, translated log, incomplete gamma,
incomplete beta, exponential integral, log, CRRA), and demand.

Utility values are evaluated from real-valued forms only: the power
series of the hypergeometric representation inside its convergence
region and real integral representations elsewhere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DomainError,
    InadmissibleParametersError,
    NoSolutionError,
    VariantMismatchError,
)
from .specfun import (
    DEFAULT_SERIES_CONFIG,
    SeriesConfig,
    exp_integral_ei,
    hyp2f1,
    hyp2f1_euler_integral,
    power_endpoint_integral,
)

# Switch from the power series to the integral continuation once the
# series argument magnitude exceeds this.
SERIES_ARG_THRESHOLD = 0.95


@dataclass(frozen=True)
class LfrraParams:
    """The (alpha, beta, sigma) triple of the linear fractional RRA."""

    alpha: float
    beta: float
    sigma: float

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise InadmissibleParametersError(
                f"beta must lie in [0, 1], got {self.beta!r}")
        for name in ("alpha", "beta", "sigma"):
            if not math.isfinite(getattr(self, name)):
                raise InadmissibleParametersError(f"{name} must be finite")

    @property
    def is_crra(self) -> bool:
        """RRA is constant iff alpha = 0 or beta * sigma = 1."""
        return self.alpha == 0.0 or self.beta * self.sigma == 1.0


@dataclass(frozen=True)
class MnpCremrParams:
    """Shifted CREMR parametrization (gamma, beta_tilde, sigma, kappa).

    Maps onto the fractional form with alpha = -1/(gamma sigma) and
    beta = 1; quantities must satisfy q > gamma when gamma > 0.
    """

    gamma: float
    beta_tilde: float
    sigma: float
    kappa: float = 0.0

    def __post_init__(self):
        if self.beta_tilde <= 0.0:
            raise InadmissibleParametersError("beta_tilde must be positive")
        if self.sigma <= 0.0 or self.sigma == 1.0:
            raise InadmissibleParametersError(
                "shifted CREMR requires sigma > 0 and sigma != 1")
        if self.gamma == 0.0:
            raise InadmissibleParametersError("gamma must be nonzero")

    def to_lfrra(self) -> LfrraParams:
        return LfrraParams(alpha=-1.0 / (self.gamma * self.sigma),
                           beta=1.0, sigma=self.sigma)


class Variant(enum.Enum):
    CRRA = "crra"
    GENERAL_HYPERGEOMETRIC = "general_hypergeometric"
    HARA_LIMIT = "hara_limit"
    CREMR_LIMIT = "cremr_limit"
    INC_GAMMA = "inc_gamma"
    INC_BETA = "inc_beta"
    CARA = "cara"
    QUADRATIC = "quadratic"
    TRANSLATED_LOG = "translated_log"
    EXP_INTEGRAL = "exp_integral"
    LOG = "log"
    MNP_CREMR = "mnp_cremr"


def infer_variant(params: LfrraParams) -> Variant:
    """Canonical variant for an exact parameter triple.

    Limit variants are selected only when beta is exactly 0 or 1 and
    sigma exactly 0, 1, or -1; nearby values stay in the general case.
    """
    a, b, s = params.alpha, params.beta, params.sigma
    if a == 0.0 or b * s == 1.0:
        if b == 1.0 and s == 1.0:
            return Variant.LOG
        return Variant.CRRA
    if b == 0.0:
        if s == 0.0:
            return Variant.CARA
        if s == -1.0:
            return Variant.QUADRATIC
        if s == 1.0:
            return Variant.TRANSLATED_LOG
        return Variant.HARA_LIMIT
    if b == 1.0:
        if s == 0.0:
            return Variant.EXP_INTEGRAL
        if s == 1.0:
            return Variant.LOG
        return Variant.CREMR_LIMIT
    if s == 0.0:
        return Variant.INC_GAMMA
    if s == 1.0:
        return Variant.INC_BETA
    return Variant.GENERAL_HYPERGEOMETRIC


def _check_variant(params: LfrraParams, variant: Variant) -> None:
    a, b, s = params.alpha, params.beta, params.sigma
    ok = True
    reason = ""
    if variant is Variant.CRRA:
        ok = (a == 0.0 and b > 0.0) or (b * s == 1.0 and s >= 1.0)
        reason = ("CRRA requires alpha = 0 with beta > 0, or beta*sigma = 1 "
                  "with sigma >= 1")
    elif variant is Variant.CARA:
        ok = b == 0.0 and s == 0.0 and a > 0.0
        reason = "CARA requires beta = 0, sigma = 0, alpha > 0"
    elif variant is Variant.QUADRATIC:
        ok = b == 0.0 and s == -1.0 and a > 0.0
        reason = "quadratic requires beta = 0, sigma = -1, alpha > 0"
    elif variant is Variant.TRANSLATED_LOG:
        ok = b == 0.0 and s == 1.0 and a > 0.0
        reason = "translated log requires beta = 0, sigma = 1, alpha > 0"
    elif variant is Variant.HARA_LIMIT:
        ok = b == 0.0 and s not in (0.0, 1.0) and a > 0.0
        reason = "HARA limit requires beta = 0, alpha > 0, sigma not in {0, 1}"
    elif variant is Variant.EXP_INTEGRAL:
        ok = b == 1.0 and s == 0.0 and a != 0.0
        reason = "exponential-integral case requires beta = 1, sigma = 0, alpha != 0"
    elif variant is Variant.LOG:
        ok = b == 1.0 and s == 1.0
        reason = "log case requires beta = 1, sigma = 1"
    elif variant is Variant.CREMR_LIMIT:
        ok = (b == 1.0 and s not in (0.0, 1.0) and a * s > 0.0
              and 1.0 + 1.0 / s > 0.0)
        reason = ("CREMR limit requires beta = 1, sigma not in {0, 1}, "
                  "alpha*sigma > 0 and 1 + 1/sigma > 0")
    elif variant is Variant.INC_GAMMA:
        ok = 0.0 < b < 1.0 and s == 0.0 and a != 0.0
        reason = "incomplete-gamma case requires beta in (0,1), sigma = 0, alpha != 0"
    elif variant is Variant.INC_BETA:
        ok = 0.0 < b < 1.0 and s == 1.0 and a != 0.0
        reason = "incomplete-beta case requires beta in (0,1), sigma = 1, alpha != 0"
    elif variant is Variant.GENERAL_HYPERGEOMETRIC:
        ok = 0.0 < b < 1.0 and s not in (0.0, 1.0) and b * s != 1.0 and a != 0.0
        reason = ("general case requires beta in (0,1), sigma not in {0, 1}, "
                  "beta*sigma != 1, alpha != 0")
    if not ok:
        raise VariantMismatchError(
            f"variant {variant.value} incompatible with "
            f"(alpha={a!r}, beta={b!r}, sigma={s!r}): {reason}")


@dataclass(frozen=True)
class UtilitySpec:
    """Parameter triple plus scale K > 0, shift C, and the evaluation variant."""

    params: LfrraParams
    k_scale: float = 1.0
    c_shift: float = 0.0
    variant: Variant = Variant.GENERAL_HYPERGEOMETRIC
    mnp: MnpCremrParams | None = None
    series_cfg: SeriesConfig = field(default=DEFAULT_SERIES_CONFIG)

    def __post_init__(self):
        if self.k_scale <= 0.0:
            raise InadmissibleParametersError(
                f"k_scale must be positive, got {self.k_scale!r}")
        if self.variant is Variant.MNP_CREMR:
            if self.mnp is None:
                raise VariantMismatchError(
                    "MNP_CREMR variant requires MnpCremrParams")
        else:
            _check_variant(self.params, self.variant)

    @classmethod
    def from_params(cls, params: LfrraParams, k_scale: float = 1.0,
                    c_shift: float = 0.0,
                    cfg: SeriesConfig = DEFAULT_SERIES_CONFIG) -> "UtilitySpec":
        return cls(params=params, k_scale=k_scale, c_shift=c_shift,
                   variant=infer_variant(params), series_cfg=cfg)

    @classmethod
    def mnp_cremr(cls, mnp: MnpCremrParams,
                  cfg: SeriesConfig = DEFAULT_SERIES_CONFIG) -> "UtilitySpec":
        return cls(params=mnp.to_lfrra(), k_scale=mnp.beta_tilde,
                   c_shift=mnp.kappa, variant=Variant.MNP_CREMR, mnp=mnp,
                   series_cfg=cfg)

    def admissible_range(self) -> "QuantityInterval":
        if self.variant is Variant.MNP_CREMR:
            lower = max(0.0, self.mnp.gamma)
            return QuantityInterval(lower=lower, upper=math.inf, lower_open=True)
        return admissible_q_range(self.params)


@dataclass(frozen=True)
class QuantityInterval:
    """Quantity range [lower, upper) on which u' > 0 and u'' < 0 hold."""

    lower: float = 0.0
    upper: float = math.inf
    lower_open: bool = False

    def __post_init__(self):
        if not self.lower < self.upper:
            raise InadmissibleParametersError(
                f"empty quantity interval [{self.lower}, {self.upper})")

    def contains(self, q: float) -> bool:
        if self.lower_open:
            if q <= self.lower:
                return False
        elif q < self.lower:
            return False
        return q < self.upper


def rra(params: LfrraParams, q: float) -> float:
    """Relative risk aversion (alpha q + beta) / (alpha sigma q + 1)."""
    if q < 0.0:
        raise DomainError(f"quantity must be nonnegative, got {q!r}")
    den = params.alpha * params.sigma * q + 1.0
    if den <= 0.0:
        raise DomainError(
            f"alpha*sigma*q + 1 must be positive, got {den!r} at q={q!r}")
    return (params.alpha * q + params.beta) / den


def rra_derivative(params: LfrraParams, q: float) -> float:
    """d RRA / dq = alpha (1 - beta sigma) / (1 + alpha sigma q)^2."""
    if q < 0.0:
        raise DomainError(f"quantity must be nonnegative, got {q!r}")
    den = params.alpha * params.sigma * q + 1.0
    if den <= 0.0:
        raise DomainError(
            f"alpha*sigma*q + 1 must be positive, got {den!r} at q={q!r}")
    return params.alpha * (1.0 - params.beta * params.sigma) / (den * den)


def admissible_q_range(params: LfrraParams) -> QuantityInterval:
    """Quantity range with u' > 0 and u'' < 0 for the parameter triple.

    The range follows the sign pattern of alpha and alpha*sigma:
    both monotonicity bounds -beta/alpha and -1/(alpha sigma) bind only
    on the side where their defining expression can turn negative.  The
    constant-RRA ray beta*sigma = 1 (sigma > 1) is unrestricted, the
    corner beta = 0 requires alpha > 0, and the corner beta = 1 with
    sigma outside {0, 1} requires alpha*sigma > 0 and 1 + 1/sigma > 0.
    """
    a, b, s = params.alpha, params.beta, params.sigma
    lower_open = b == 1.0

    if a == 0.0:
        if b == 0.0:
            raise InadmissibleParametersError(
                "alpha = 0 with beta = 0 yields linear utility (u'' = 0)")
        return QuantityInterval(0.0, math.inf, lower_open)

    if b * s == 1.0:
        if s < 1.0:
            raise InadmissibleParametersError(
                "constant RRA via beta*sigma = 1 requires sigma >= 1")
        return QuantityInterval(0.0, math.inf, lower_open)

    if b == 0.0:
        if a <= 0.0:
            raise InadmissibleParametersError(
                "beta = 0 requires alpha > 0 for u'' < 0")
        upper = math.inf if a * s >= 0.0 else -1.0 / (a * s)
        return QuantityInterval(0.0, upper, lower_open=False)

    if b == 1.0:
        if s == 0.0 or s == 1.0:
            # exponential-integral and log cases
            upper = math.inf if (a > 0.0 or s == 1.0) else -1.0 / a
            return QuantityInterval(0.0, upper, lower_open=True)
        if a * s <= 0.0 or 1.0 + 1.0 / s <= 0.0:
            raise InadmissibleParametersError(
                "beta = 1 with sigma outside {0, 1} requires alpha*sigma > 0 "
                "and 1 + 1/sigma > 0")
        upper = math.inf if a > 0.0 else -1.0 / a
        return QuantityInterval(0.0, upper, lower_open=True)

    # interior beta
    bounds = []
    if a < 0.0:
        bounds.append(-b / a)
    if a * s < 0.0:
        bounds.append(-1.0 / (a * s))
    upper = min(bounds) if bounds else math.inf
    return QuantityInterval(0.0, upper, lower_open=False)


def _require_admissible(spec: UtilitySpec, q: float) -> None:
    if not spec.admissible_range().contains(q):
        raise DomainError(
            f"q={q!r} outside the admissible range {spec.admissible_range()}")


def marginal_utility(spec: UtilitySpec, q: float) -> float:
    """u'(q) = K (1 + alpha sigma q)^(beta - 1/sigma) q^(-beta), with the
    sigma = 0 limit K e^(-alpha q) q^(-beta); +inf at q = 0 when beta > 0."""
    _require_admissible(spec, q)
    K = spec.k_scale
    if spec.variant is Variant.MNP_CREMR:
        m = spec.mnp
        return m.beta_tilde * (q - m.gamma) ** (1.0 - 1.0 / m.sigma) / q
    a, b, s = spec.params.alpha, spec.params.beta, spec.params.sigma
    if q == 0.0 and b > 0.0:
        return math.inf
    v = spec.variant
    if v is Variant.CRRA:
        return K * q ** (-b)
    if v in (Variant.CARA, Variant.INC_GAMMA, Variant.EXP_INTEGRAL):
        return K * math.exp(-a * q) * q ** (-b)
    if v is Variant.LOG:
        return K / q
    return K * (1.0 + a * s * q) ** (b - 1.0 / s) * q ** (-b)


def marginal_utility_second(spec: UtilitySpec, q: float) -> float:
    """u''(q) = -K (alpha q + beta) (1 + alpha sigma q)^(beta - 1/sigma - 1)
    q^(-1-beta); strictly negative on the admissible interior."""
    _require_admissible(spec, q)
    K = spec.k_scale
    if spec.variant is Variant.MNP_CREMR:
        m = spec.mnp
        return (-m.beta_tilde * (q - m.gamma) ** (-1.0 / m.sigma)
                * (q - m.gamma * m.sigma) / (m.sigma * q * q))
    a, b, s = spec.params.alpha, spec.params.beta, spec.params.sigma
    if q == 0.0:
        return -math.inf if b > 0.0 else -K * a
    v = spec.variant
    if v is Variant.CRRA:
        return -K * b * q ** (-1.0 - b)
    if v in (Variant.CARA, Variant.INC_GAMMA, Variant.EXP_INTEGRAL):
        return -K * (a * q + b) * math.exp(-a * q) * q ** (-1.0 - b)
    if v is Variant.LOG:
        return -K / (q * q)
    return (-K * (a * q + b) * (1.0 + a * s * q) ** (b - 1.0 / s - 1.0)
            * q ** (-1.0 - b))


def _hyp_general_factor(a: float, s: float, b: float, q: float,
                        cfg: SeriesConfig, method: str) -> float:
    """2F1(1 - 1/sigma, 1; 2 - beta; -alpha sigma q), series or continuation."""
    z = -a * s * q
    if method == "series" or (method == "auto" and abs(z) < SERIES_ARG_THRESHOLD):
        return hyp2f1(1.0 - 1.0 / s, 1.0, 2.0 - b, z, cfg)
    return hyp2f1_euler_integral(1.0 - 1.0 / s, 1.0, 2.0 - b, z, cfg)


def utility_general(params: LfrraParams, k_scale: float, c_shift: float,
                    q: float, cfg: SeriesConfig = DEFAULT_SERIES_CONFIG,
                    method: str = "auto") -> float:
    """General-case utility for beta in (0,1), sigma outside {0,1}.

    ``method`` picks the hypergeometric evaluation: "series" for the
    power series (|alpha sigma q| < 1), "integral" for the real
    integral continuation, "auto" to switch on the argument size.
    """
    a, b, s = params.alpha, params.beta, params.sigma
    if q == 0.0:
        return c_shift
    F = _hyp_general_factor(a, s, b, q, cfg, method)
    lead = (k_scale * s / (s - 1.0) * (1.0 + a * s * q) ** (b - 1.0 / s)
            * q ** (1.0 - b))
    return lead * (1.0 + (b - 1.0 / s) / (1.0 - b) * F) + c_shift


def _utility_cremr(params: LfrraParams, K: float, C: float, q: float,
                   cfg: SeriesConfig) -> float:
    """CREMR-limit utility: series inside |1/(alpha sigma q)| < 1, real
    integral continuation outside (one form per sign of sigma)."""
    a, s = params.alpha, params.sigma
    asq = a * s * q
    w = -1.0 / asq
    lead = K * s / (s - 1.0) * (1.0 + asq) ** (1.0 - 1.0 / s) / q
    if abs(w) <= SERIES_ARG_THRESHOLD:
        F = hyp2f1(1.0, 1.0, 1.0 + 1.0 / s, w, cfg)
        return lead * (q - (s - 1.0) / (a * s) * F) + C
    if s > 0.0:
        F = hyp2f1_euler_integral(1.0, 1.0, 1.0 + 1.0 / s, w, cfg)
        return lead * (q - (s - 1.0) / (a * s) * F) + C
    # sigma < 0: contiguous rearrangement keeps the integral's third
    # parameter above its second
    F = hyp2f1_euler_integral(1.0, 1.0, 2.0 + 1.0 / s, w, cfg)
    lead2 = K * s / (s - 1.0) * (1.0 + asq) ** (-1.0 / s) / q
    inner = (1.0 + asq) * q - (s - 1.0) * q - (s - 1.0) / (a * s * (s + 1.0)) * F
    return lead2 * inner + C


def _utility_inc_gamma(params: LfrraParams, K: float, C: float, q: float,
                       cfg: SeriesConfig) -> float:
    """sigma = 0, beta in (0,1): K * int_0^q s^(-beta) e^(-alpha s) ds + C.

    Real-integral form of the lower-incomplete-gamma utility, valid for
    either sign of alpha.
    """
    a, b = params.alpha, params.beta

    def g(s):
        return np.exp(-a * s)

    val = power_endpoint_integral(g, 1.0 - b, q, cfg.quad_abs_tol,
                                  cfg.quad_max_depth)
    return K * val + C


def _utility_inc_beta(params: LfrraParams, K: float, C: float, q: float,
                      cfg: SeriesConfig) -> float:
    """sigma = 1, beta in (0,1): K * int_0^q s^(-beta) (1+alpha s)^(beta-1) ds + C.

    Real-integral form of the incomplete-beta utility, valid for either
    sign of alpha on the admissible range.
    """
    a, b = params.alpha, params.beta

    def g(s):
        return np.power(1.0 + a * s, b - 1.0)

    val = power_endpoint_integral(g, 1.0 - b, q, cfg.quad_abs_tol,
                                  cfg.quad_max_depth)
    return K * val + C


def _utility_mnp(mnp: MnpCremrParams, q: float, cfg: SeriesConfig) -> float:
    """Shifted CREMR utility, real-valued for all q > gamma when gamma > 0."""
    g, bt, s, kappa = mnp.gamma, mnp.beta_tilde, mnp.sigma, mnp.kappa
    w = g / q
    if abs(w) <= SERIES_ARG_THRESHOLD:
        F = hyp2f1(1.0, 1.0, 1.0 + 1.0 / s, w, cfg)
    else:
        F = hyp2f1_euler_integral(1.0, 1.0, 1.0 + 1.0 / s, w, cfg)
    lead = bt * s / (s - 1.0) * (q - g) ** ((s - 1.0) / s) / q
    return kappa + lead * (q + g * (s - 1.0) * F)


def utility(spec: UtilitySpec, q: float) -> float:
    """Utility level u(q) for the spec's variant."""
    _require_admissible(spec, q)
    cfg = spec.series_cfg
    K, C = spec.k_scale, spec.c_shift
    v = spec.variant
    if v is Variant.MNP_CREMR:
        return _utility_mnp(spec.mnp, q, cfg)

    a, b, s = spec.params.alpha, spec.params.beta, spec.params.sigma
    if v is Variant.CRRA:
        if b == 1.0:
            return K * math.log(q) + C
        return K * q ** (1.0 - b) / (1.0 - b) + C
    if v is Variant.CARA:
        return K / a * (1.0 - math.exp(-a * q)) + C
    if v is Variant.QUADRATIC:
        return -K / 2.0 * (a * q * q - 2.0 * q) + C
    if v is Variant.TRANSLATED_LOG:
        return K / a * math.log(a * q + 1.0) + C
    if v is Variant.HARA_LIMIT:
        return K / (a * (s - 1.0)) * ((1.0 + a * s * q) ** ((s - 1.0) / s) - 1.0) + C
    if v is Variant.EXP_INTEGRAL:
        return K * exp_integral_ei(-a * q) + C
    if v is Variant.LOG:
        return K * math.log(q) + C
    if v is Variant.INC_GAMMA:
        return _utility_inc_gamma(spec.params, K, C, q, cfg)
    if v is Variant.INC_BETA:
        return _utility_inc_beta(spec.params, K, C, q, cfg)
    if v is Variant.CREMR_LIMIT:
        return _utility_cremr(spec.params, K, C, q, cfg)
    return utility_general(spec.params, K, C, q, cfg)


def utility_consistency_residual(spec: UtilitySpec, q: float) -> float:
    """|(-q u''/u') - (alpha q + beta)/(alpha sigma q + 1)| from closed forms."""
    up = marginal_utility(spec, q)
    upp = marginal_utility_second(spec, q)
    if spec.variant is Variant.MNP_CREMR:
        # the mapped triple has alpha*sigma*q + 1 < 0 for q > gamma > 0,
        # so evaluate the fractional form in its shifted arrangement
        m = spec.mnp
        target = (q - m.gamma * m.sigma) / (m.sigma * (q - m.gamma))
        return abs(-q * upp / up - target)
    return abs(-q * upp / up - rra(spec.params, q))


def _demand_closed_form(spec: UtilitySpec, nu: float, p: float) -> float | None:
    a, b, s = spec.params.alpha, spec.params.beta, spec.params.sigma
    ratio = nu * p / spec.k_scale
    v = spec.variant
    if v is Variant.CRRA:
        return ratio ** (-1.0 / b)
    if v is Variant.LOG:
        return 1.0 / ratio
    if v is Variant.CARA:
        return -math.log(ratio) / a
    if v in (Variant.HARA_LIMIT, Variant.QUADRATIC, Variant.TRANSLATED_LOG):
        return (ratio ** (-s) - 1.0) / (a * s)
    return None


def demand(spec: UtilitySpec, nu: float, p: float) -> float:
    """Quantity solving u'(q) = nu * p.

    Closed forms for the HARA family (including CARA) and constant-RRA
    cases; otherwise bracketed bisection on the admissible interval,
    where u' is strictly decreasing.
    """
    if nu <= 0.0 or p <= 0.0:
        raise DomainError("demand requires nu > 0 and p > 0")
    target = nu * p

    interval = spec.admissible_range()
    closed = _demand_closed_form(spec, nu, p)
    if closed is not None:
        if not interval.contains(closed):
            raise NoSolutionError(
                f"price {p!r} outside the range of u'/nu on {interval}")
        return closed

    lo = interval.lower
    hi = interval.upper

    # lower bracket endpoint: u' -> inf as q -> lower when beta > 0
    q_lo = lo + 1e-12 * max(1.0, abs(lo)) if (interval.lower_open or
                                              spec.params.beta > 0.0 or
                                              spec.variant is Variant.MNP_CREMR) else lo
    if math.isfinite(hi):
        q_hi = hi - 1e-12 * max(1.0, abs(hi))
    else:
        q_hi = max(2.0 * q_lo, 1.0)
        for _ in range(200):
            if marginal_utility(spec, q_hi) < target:
                break
            q_hi *= 2.0
        else:
            raise NoSolutionError(f"u' stays above nu*p = {target!r}")

    f_lo = marginal_utility(spec, q_lo) - target
    f_hi = marginal_utility(spec, q_hi) - target
    if f_lo < 0.0 and (interval.lower_open or spec.params.beta > 0.0):
        # u' diverges at the lower endpoint; move the bracket closer
        base = interval.lower
        while f_lo < 0.0 and q_lo - base > 1e-290:
            q_lo = base + (q_lo - base) * 1e-3
            f_lo = marginal_utility(spec, q_lo) - target
    if f_lo < 0.0:
        raise NoSolutionError(f"nu*p = {target!r} above u' at the lower endpoint")
    if f_hi > 0.0:
        raise NoSolutionError(f"nu*p = {target!r} below u' at the upper endpoint")

    for _ in range(200):
        mid = 0.5 * (q_lo + q_hi)
        if marginal_utility(spec, mid) - target > 0.0:
            q_lo = mid
        else:
            q_hi = mid
        if q_hi - q_lo <= 1e-15 * max(1.0, abs(q_hi)):
            break
    return 0.5 * (q_lo + q_hi)
