"""Monopolistic-competition price equilibrium for the LFRRA family.

Case classification on the signs of alpha and 1 - beta*sigma, the
admissible markup/quantity/normalized-cost ranges, the generalized
Lambert W solver for the inverse markup mu (bracketed monotone
root-finding on the first-order condition), second-order-condition
verification, the closed-form special cases, and comparative statics.

The normalized marginal cost is x = nu * m / K; the solved mu is the
inverse markup m/p in (0, 1].
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .exceptions import DomainError, InadmissibleParametersError, NoSolutionError
from .specfun import lambert_w0
from .utility import LfrraParams, QuantityInterval


class CaseLabel(enum.Enum):
    CASE_1A = "Case1a"
    CASE_1B = "Case1b"
    CASE_2A = "Case2a"
    CASE_2B = "Case2b"
    CES_ALPHA_ZERO = "CesAlphaZero"
    CES_BETA_SIGMA = "CesBetaSigma"


@dataclass(frozen=True)
class MarkupSolution:
    mu: float            # inverse markup in (0, 1]
    markup: float        # 1/mu >= 1
    q: float             # equilibrium quantity
    x: float             # normalized marginal cost nu*m/K
    case: CaseLabel
    soc_ok: bool


@dataclass(frozen=True)
class XDomain:
    """Admissible normalized-cost range (lower, upper), openness per side."""

    lower: float
    upper: float
    lower_closed: bool = False
    upper_closed: bool = False

    def contains(self, x: float) -> bool:
        if x < self.lower or (x == self.lower and not self.lower_closed):
            return False
        if x > self.upper or (x == self.upper and not self.upper_closed):
            return False
        return True


def _delta(beta: float, sigma: float) -> float:
    return math.sqrt((1.0 - beta) * (1.0 - beta * sigma))


def classify_case(params: LfrraParams) -> CaseLabel:
    """Unique equilibrium case for the parameter triple.

    Rejects combinations with no valid price equilibrium: alpha = 0
    outside beta in (0,1), the constant-RRA ray with sigma <= 1,
    beta = 0 with alpha < 0, beta = 1 with alpha < 0 (the second-order
    condition fails there), and beta = 1 with sigma < 1 for alpha > 0.
    """
    a, b, s = params.alpha, params.beta, params.sigma
    if a == 0.0:
        if not 0.0 < b < 1.0:
            raise InadmissibleParametersError(
                "alpha = 0 requires beta in (0, 1) for a valid equilibrium")
        return CaseLabel.CES_ALPHA_ZERO
    if b * s == 1.0:
        if s <= 1.0:
            raise InadmissibleParametersError(
                "beta*sigma = 1 requires sigma > 1 for a valid equilibrium")
        return CaseLabel.CES_BETA_SIGMA
    one_minus_bs = 1.0 - b * s
    if a > 0.0:
        if one_minus_bs > 0.0:
            if b == 1.0:
                raise InadmissibleParametersError(
                    "beta = 1 with 1 - beta*sigma > 0 leaves no room for mu > 0")
            return CaseLabel.CASE_1A
        return CaseLabel.CASE_1B
    # alpha < 0
    if b == 0.0:
        raise InadmissibleParametersError("beta = 0 requires alpha > 0")
    if b == 1.0:
        raise InadmissibleParametersError(
            "beta = 1 with alpha < 0 violates the second-order condition")
    if one_minus_bs > 0.0:
        return CaseLabel.CASE_2A
    return CaseLabel.CASE_2B


def _mu_bar(beta: float, sigma: float) -> float:
    """Upper inverse-markup bound of Case 2a (continuous at sigma = 1)."""
    d = _delta(beta, sigma)
    return ((1.0 - beta) * sigma + d) / ((1.0 - beta) * sigma + 1.0)


def markup_quantity_ranges(params: LfrraParams) -> tuple[tuple[float, float], QuantityInterval]:
    """Admissible (markup interval for 1/mu, quantity interval) per case."""
    a, b, s = params.alpha, params.beta, params.sigma
    case = classify_case(params)
    inf = math.inf
    if case is CaseLabel.CES_ALPHA_ZERO:
        m = 1.0 / (1.0 - b)
        return (m, m), QuantityInterval(0.0, inf)
    if case is CaseLabel.CES_BETA_SIGMA:
        m = s / (s - 1.0)
        return (m, m), QuantityInterval(0.0, inf)
    if case is CaseLabel.CASE_1A:
        lo = 1.0 / (1.0 - b)
        if s > 1.0:
            return (lo, s / (s - 1.0)), QuantityInterval(0.0, inf)
        q_hi = inf if s == 1.0 else -(1.0 - b) / (a * (s - 1.0))
        return (lo, inf), QuantityInterval(0.0, q_hi)
    if case is CaseLabel.CASE_1B:
        if b == 1.0:
            return (s / (s - 1.0), inf), QuantityInterval(0.0, inf, lower_open=True)
        return (s / (s - 1.0), 1.0 / (1.0 - b)), QuantityInterval(0.0, inf)
    if case is CaseLabel.CASE_2A:
        lo = 1.0 / _mu_bar(b, s)
        q_hi = -b / (2.0 * a) if s == 1.0 else -(1.0 - b - _delta(b, s)) / (a * (s - 1.0))
        return (lo, 1.0 / (1.0 - b)), QuantityInterval(0.0, q_hi)
    # Case 2b
    return (1.0 / (1.0 - b), inf), QuantityInterval(0.0, -(1.0 - b) / (a * (s - 1.0)))


def foc_lhs(params: LfrraParams, mu: float) -> float:
    """Left side of the first-order condition, as a function of mu.

    x = mu [ (1-beta*sigma)/(1-sigma(1-mu)) ]^(beta-1/sigma)
           [ (1/alpha)(1-beta-mu)/(1-sigma(1-mu)) ]^(-beta),
    with the sigma -> 0 limit mu e^(-(1-beta-mu)) ((1-beta-mu)/alpha)^(-beta).
    Strictly monotone in mu on each case's bracket.
    """
    a, b, s = params.alpha, params.beta, params.sigma
    if s == 0.0:
        if b == 0.0:
            return mu * math.exp(-(1.0 - mu))
        return mu * math.exp(-(1.0 - b - mu)) * ((1.0 - b - mu) / a) ** (-b)
    den = 1.0 - s * (1.0 - mu)
    t1 = (1.0 - b * s) / den
    if b == 0.0:
        return mu * t1 ** (-1.0 / s)
    t2 = (1.0 - b - mu) / (a * den)
    return mu * t1 ** (b - 1.0 / s) * t2 ** (-b)


def x_domain(params: LfrraParams) -> XDomain:
    """Admissible range of x = nu*m/K for which a unique markup exists."""
    a, b, s = params.alpha, params.beta, params.sigma
    case = classify_case(params)
    inf = math.inf
    if case in (CaseLabel.CES_ALPHA_ZERO, CaseLabel.CES_BETA_SIGMA):
        return XDomain(0.0, inf)
    if case is CaseLabel.CASE_1A:
        if b == 0.0:
            return XDomain(0.0, 1.0, upper_closed=True)
        return XDomain(0.0, inf)
    if case is CaseLabel.CASE_1B:
        if b == 1.0:
            return XDomain(0.0, a * (s - 1.0))
        return XDomain(0.0, inf)
    if case is CaseLabel.CASE_2A:
        return XDomain(foc_lhs(params, _mu_bar(b, s)), inf)
    return XDomain(0.0, inf)


def _solver_bracket(params: LfrraParams, case: CaseLabel) -> tuple[float, float]:
    """Open mu-interval on which the FOC is strictly monotone with a root."""
    b, s = params.beta, params.sigma
    if case is CaseLabel.CASE_1A:
        lo = (s - 1.0) / s if s > 1.0 else 0.0
        hi = 1.0 - b if b > 0.0 else 1.0
        return lo, hi
    if case is CaseLabel.CASE_1B:
        if b == 1.0:
            return 0.0, (s - 1.0) / s
        return 1.0 - b, (s - 1.0) / s
    if case is CaseLabel.CASE_2A:
        return 1.0 - b, _mu_bar(b, s)
    return 0.0, 1.0 - b  # Case 2b


def _brentq(f, a: float, b: float, xtol: float, max_iter: int = 200) -> float:
    """Brent's method on a sign-changing bracket [a, b]."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise NoSolutionError(f"root not bracketed on [{a}, {b}]")
    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if fb * fc > 0.0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * 2.22e-16 * abs(b) + 0.5 * xtol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            ss = fb / fa
            if a == c:
                p = 2.0 * xm * ss
                qq = 1.0 - ss
            else:
                qq = fa / fc
                r = fb / fc
                p = ss * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0))
                qq = (qq - 1.0) * (r - 1.0) * (ss - 1.0)
            if p > 0.0:
                qq = -qq
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * qq - abs(tol1 * qq), abs(e * qq)):
                e = d
                d = p / qq
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, xm)
        fb = f(b)
    raise NoSolutionError("Brent iteration did not converge")


def _quantity_from_mu(params: LfrraParams, mu: float, x: float) -> float:
    a, b, s = params.alpha, params.beta, params.sigma
    if a == 0.0 or b * s == 1.0:
        # pinned by the consumer's first-order condition u'(q) = nu p
        return (mu / x) ** (1.0 / b)
    if s == 0.0:
        return (1.0 - b - mu) / a
    return (1.0 - b - mu) / (a * (1.0 - s * (1.0 - mu)))


def soc_check(params: LfrraParams, q: float) -> bool:
    """Second-order condition alpha q/(alpha q + beta)
    + (1 - alpha q - beta)/(alpha sigma q + 1) > 0, with the
    beta = 0, q -> 0 limit equal to 2."""
    a, b, s = params.alpha, params.beta, params.sigma
    if b == 0.0 and q == 0.0:
        return True  # limit value 2
    num = a * q + b
    den = a * s * q + 1.0
    if num <= 0.0 or den <= 0.0:
        return False
    return a * q / num + (1.0 - a * q - b) / den > 0.0


def _log_x_of_q(params: LfrraParams, q: float) -> float:
    """ln of the normalized cost x = mu(q) u'(q)/K implied by quantity q.

    Strictly decreasing in q on the admissible range; the solver works
    in (log x, log q) space, where the weakly diverging mu endpoints
    stay representable.
    """
    a, b, s = params.alpha, params.beta, params.sigma
    asq = a * s * q
    mu = 1.0 - (a * q + b) / (asq + 1.0)
    if s == 0.0:
        return math.log(mu) - a * q - b * math.log(q)
    return math.log(mu) + (b - 1.0 / s) * math.log1p(asq) - b * math.log(q)


def _solve_q_from_x(params: LfrraParams, x: float, tol: float) -> float:
    """Quantity solving the FOC at normalized cost x, by log-space Brent."""
    _, qiv = markup_quantity_ranges(params)
    target = math.log(x)

    def f(w):
        return _log_x_of_q(params, math.exp(w)) - target

    q_hi_bound = qiv.upper
    # initial interior point
    q0 = 1.0 if not math.isfinite(q_hi_bound) else 0.5 * q_hi_bound
    w_lo = math.log(q0)
    f_lo = f(w_lo)
    # expand downward until log-x exceeds the target (x(q) -> inf as q -> 0
    # for beta > 0; for beta = 0 the boundary value is x = 1)
    for _ in range(600):
        if f_lo >= 0.0:
            break
        w_lo -= 1.4
        f_lo = f(w_lo)
    else:
        raise NoSolutionError(f"no bracket below at x={x!r}")
    w_hi = w_lo
    f_hi = f_lo
    for _ in range(600):
        if f_hi <= 0.0:
            break
        if math.isfinite(q_hi_bound):
            # approach the finite quantity bound geometrically
            gap = q_hi_bound - math.exp(w_hi)
            w_hi = math.log(q_hi_bound - 0.25 * gap)
        else:
            w_hi += 1.4
        f_hi = f(w_hi)
    else:
        raise NoSolutionError(f"no bracket above at x={x!r}")
    w = _brentq(f, w_lo, w_hi, xtol=tol)
    return math.exp(w)


def _solve_generic(params: LfrraParams, x: float,
                   tol: float = 1e-12) -> tuple[float, float]:
    """(mu, q) from the FOC by bracketed monotone root-finding.

    Works for every non-CES case, including the sigma = 0 row; used
    directly by ``solve_markup`` except where an exact branch exists.
    """
    case = classify_case(params)
    if case in (CaseLabel.CES_ALPHA_ZERO, CaseLabel.CES_BETA_SIGMA):
        raise InadmissibleParametersError(
            "CES cases have a constant markup; no equation to solve")
    dom = x_domain(params)
    if not dom.contains(x):
        raise DomainError(f"x={x!r} outside the admissible range {dom}")
    if params.beta == 0.0 and x == 1.0:
        return 1.0, 0.0  # marginal-cost pricing at the closed boundary
    q = _solve_q_from_x(params, x, tol)
    a, b, s = params.alpha, params.beta, params.sigma
    mu = 1.0 - (a * q + b) / (a * s * q + 1.0)
    return mu, q


def solve_markup_generic(params: LfrraParams, x: float,
                         tol: float = 1e-12) -> float:
    """Inverse markup from the generic bracketed solver (no exact branches)."""
    return _solve_generic(params, x, tol)[0]


def solve_markup(params: LfrraParams, x: float, tol: float = 1e-12) -> MarkupSolution:
    """Equilibrium inverse markup, markup, and quantity at normalized cost x.

    CES cases and the closed-form cells (CARA via the Lambert W
    function, beta = 1 CREMR) dispatch exactly; everything else goes
    through the generic bracketed solver.
    """
    if x <= 0.0:
        raise DomainError(f"normalized cost x must be positive, got {x!r}")
    a, b, s = params.alpha, params.beta, params.sigma
    case = classify_case(params)

    if case is CaseLabel.CES_ALPHA_ZERO:
        mu = 1.0 - b
        q = _quantity_from_mu(params, mu, x)
    elif case is CaseLabel.CES_BETA_SIGMA:
        mu = (s - 1.0) / s
        q = _quantity_from_mu(params, mu, x)
    else:
        dom = x_domain(params)
        if not dom.contains(x):
            raise DomainError(f"x={x!r} outside the admissible range {dom}")
        if b == 0.0 and s == 0.0:
            mu = lambert_w0(math.e * x)
            q = _quantity_from_mu(params, mu, x)
        elif b == 1.0:
            mu = (s - 1.0) / s * (1.0 - (x / (a * (s - 1.0))) ** s)
            q = _quantity_from_mu(params, mu, x)
        else:
            mu, q = _solve_generic(params, x, tol)

    if q < 0.0:
        q = 0.0  # round-off at the marginal-cost-pricing boundary
    return MarkupSolution(mu=mu, markup=1.0 / mu, q=q, x=x, case=case,
                          soc_ok=soc_check(params, q))


def markup_slope_dmu_dx(params: LfrraParams, x: float, mu: float) -> float:
    """d mu / d x at a solved point, from the implicit closed form.

    Continuous in beta across the corner cases; identically zero for
    the constant-markup CES cases.
    """
    a, b, s = params.alpha, params.beta, params.sigma
    if a == 0.0 or b * s == 1.0:
        return 0.0
    one_ms = 1.0 - s * (1.0 - mu)
    numer = one_ms / x
    if b == 1.0:
        return numer
    denom = 1.0 + (1.0 - b) * (1.0 - mu) / mu * one_ms / (1.0 - b - mu)
    return numer / denom


def comparative_statics(params: LfrraParams, x: float,
                        tol: float = 1e-12) -> tuple[float, int, int]:
    """(d mu/d x, sign of dp/dm, sign of dq/dm) at the solved equilibrium.

    Prices always increase and quantities always decrease in marginal
    cost; the markup slope sign equals -sign(alpha (1 - beta sigma)).
    """
    sol = solve_markup(params, x, tol)
    return markup_slope_dmu_dx(params, x, sol.mu), +1, -1


@dataclass(frozen=True)
class CurvePoint:
    m: float
    x: float
    mu: float | None
    markup: float | None
    price: float | None
    q: float | None
    soc_ok: bool
    in_domain: bool


def equilibrium_curve(params: LfrraParams, nu: float, k_scale: float,
                      m_grid: list[float], tol: float = 1e-12) -> list[CurvePoint]:
    """Solve the equilibrium along a marginal-cost grid, x = nu*m/K.

    Out-of-domain grid points are flagged rather than dropped.
    """
    if nu <= 0.0 or k_scale <= 0.0:
        raise DomainError("nu and k_scale must be positive")
    if not m_grid:
        raise DomainError("marginal-cost grid must be non-empty")
    rows = []
    for m in m_grid:
        x = nu * m / k_scale
        try:
            sol = solve_markup(params, x, tol)
        except DomainError:
            rows.append(CurvePoint(m=m, x=x, mu=None, markup=None, price=None,
                                   q=None, soc_ok=False, in_domain=False))
            continue
        rows.append(CurvePoint(m=m, x=x, mu=sol.mu, markup=sol.markup,
                               price=m / sol.mu, q=sol.q, soc_ok=sol.soc_ok,
                               in_domain=True))
    return rows
