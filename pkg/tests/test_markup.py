"""Tests for the markup equilibrium solver."""

import math

import numpy as np
import pytest

from lfrra.exceptions import DomainError, InadmissibleParametersError
from lfrra.markup import (
    CaseLabel,
    classify_case,
    comparative_statics,
    equilibrium_curve,
    foc_lhs,
    markup_quantity_ranges,
    markup_slope_dmu_dx,
    soc_check,
    solve_markup,
    solve_markup_generic,
    x_domain,
    _solver_bracket,
)
from lfrra.specfun import lambert_w0
from lfrra.utility import LfrraParams


def P(a, b, s):
    return LfrraParams(a, b, s)


def sample_case_params(rng, case, n):
    """Random parameter triples belonging to a given case."""
    out = []
    while len(out) < n:
        if case == CaseLabel.CASE_1A:
            beta = float(rng.uniform(0.05, 0.9))
            sigma = float(rng.uniform(-2.5, 1.0 / beta - 0.05))
            alpha = float(rng.uniform(0.1, 3.0))
        elif case == CaseLabel.CASE_1B:
            beta = float(rng.uniform(0.25, 0.95))
            sigma = float(rng.uniform(1.0 / beta + 0.05, 6.0))
            alpha = float(rng.uniform(0.1, 3.0))
        elif case == CaseLabel.CASE_2A:
            beta = float(rng.uniform(0.1, 0.9))
            sigma = float(rng.uniform(-2.5, 1.0 / beta - 0.05))
            alpha = float(rng.uniform(-3.0, -0.1))
        else:
            beta = float(rng.uniform(0.25, 0.95))
            sigma = float(rng.uniform(1.0 / beta + 0.05, 6.0))
            alpha = float(rng.uniform(-3.0, -0.1))
        if abs(sigma) < 1e-3 or abs(beta * sigma - 1.0) < 1e-3:
            continue
        params = P(alpha, beta, sigma)
        if classify_case(params) is not case:
            continue
        out.append(params)
    return out


def sample_x(rng, params):
    dom = x_domain(params)
    if math.isfinite(dom.upper):
        lo = dom.lower + 1e-6 * max(1.0, dom.upper - dom.lower)
        return float(rng.uniform(lo, dom.upper - 1e-6 * (dom.upper - dom.lower)))
    base = dom.lower if dom.lower > 0.0 else 0.0
    return base + float(rng.lognormal(mean=-0.5, sigma=1.0)) + 1e-4


class TestClassifyCase:
    def test_examples(self):
        assert classify_case(P(1.0, 0.2, 2.0)) is CaseLabel.CASE_1A
        assert classify_case(P(1.0, 0.5, 3.0)) is CaseLabel.CASE_1B
        with pytest.raises(InadmissibleParametersError):
            classify_case(P(-1.0, 0.0, 1.0))

    def test_ces_branches(self):
        assert classify_case(P(0.0, 0.3, 5.0)) is CaseLabel.CES_ALPHA_ZERO
        assert classify_case(P(2.0, 0.25, 4.0)) is CaseLabel.CES_BETA_SIGMA

    def test_rejections(self):
        with pytest.raises(InadmissibleParametersError):
            classify_case(P(0.0, 0.0, 1.0))
        with pytest.raises(InadmissibleParametersError):
            classify_case(P(0.0, 1.0, 1.0))
        with pytest.raises(InadmissibleParametersError):
            classify_case(P(1.0, 1.0, 1.0))  # beta*sigma = 1 with sigma <= 1
        with pytest.raises(InadmissibleParametersError):
            classify_case(P(-1.0, 1.0, 0.5))  # Case 2a with beta = 1
        with pytest.raises(InadmissibleParametersError):
            classify_case(P(1.0, 1.0, 0.5))  # alpha > 0, beta = 1, sigma < 1


class TestRanges:
    def test_case1a_sigma_above_one(self):
        (lo, hi), qiv = markup_quantity_ranges(P(1.0, 0.0, 2.0))
        assert (lo, hi) == (1.0, 2.0)
        assert qiv.upper == math.inf

    def test_case2a_sigma_one_replacements(self):
        (lo, hi), qiv = markup_quantity_ranges(P(-1.0, 0.5, 1.0))
        assert lo == pytest.approx(1.5)
        assert hi == pytest.approx(2.0)
        assert qiv.upper == pytest.approx(0.25)

    def test_case2b_row(self):
        (lo, hi), qiv = markup_quantity_ranges(P(-1.0, 0.5, 4.0))
        assert lo == pytest.approx(2.0)
        assert hi == math.inf
        assert qiv.upper == pytest.approx(1.0 / 6.0)

    def test_case1a_sigma_below_one_quantity_bound(self):
        (_, _), qiv = markup_quantity_ranges(P(2.0, 0.3, 0.5))
        assert qiv.upper == pytest.approx(-(1.0 - 0.3) / (2.0 * (0.5 - 1.0)))


class TestXDomain:
    def test_beta_zero_unit_interval(self):
        dom = x_domain(P(2.0, 0.0, 0.5))
        assert (dom.lower, dom.upper) == (0.0, 1.0)
        assert dom.upper_closed and not dom.lower_closed

    def test_beta_one_scaled_interval(self):
        dom = x_domain(P(2.0, 1.0, 3.0))
        assert (dom.lower, dom.upper) == (0.0, 4.0)
        assert not dom.upper_closed

    def test_case1a_interior_beta_unbounded(self):
        dom = x_domain(P(1.0, 0.3, 2.0))
        assert (dom.lower, dom.upper) == (0.0, math.inf)

    def test_case2a_lower_bound_is_lhs_at_mu_bar(self):
        params = P(-1.0, 0.5, 1.0)
        dom = x_domain(params)
        # the bound equals the FOC left side at the upper mu bound
        mu_bar = 2.0 * (1.0 - 0.5) / (2.0 - 0.5)
        assert dom.lower == pytest.approx(foc_lhs(params, mu_bar), rel=1e-12)
        assert dom.lower > 0.0

    def test_out_of_domain_rejected(self):
        with pytest.raises(DomainError):
            solve_markup(P(1.0, 0.0, 0.5), 1.5)
        params = P(-1.0, 0.5, 1.0)
        with pytest.raises(DomainError):
            solve_markup(params, x_domain(params).lower * 0.5)


class TestClosedForms:
    def test_quadratic(self):
        sol = solve_markup(P(1.0, 0.0, -1.0), 0.5)
        assert sol.markup == pytest.approx(1.5, rel=1e-12)

    def test_translated_log(self):
        sol = solve_markup(P(1.0, 0.0, 1.0), 0.25)
        assert sol.markup == pytest.approx(2.0, rel=1e-12)

    def test_cara_boundary(self):
        sol = solve_markup(P(1.0, 0.0, 0.0), 1.0)
        assert sol.mu == pytest.approx(1.0, abs=1e-12)
        assert sol.markup == pytest.approx(1.0, abs=1e-12)
        assert sol.q == pytest.approx(0.0, abs=1e-12)

    def test_cremr(self):
        sol = solve_markup(P(1.0, 1.0, 2.0), 0.5)
        assert sol.markup == pytest.approx(2.0 / (1.0 - 0.25), rel=1e-12)

    def test_generic_matches_quadratic_log_cara_cremr(self):
        rng = np.random.default_rng(60)
        xs = rng.uniform(0.01, 0.999, 100)
        for x in xs:
            x = float(x)
            generic = solve_markup_generic(P(1.0, 0.0, -1.0), x)
            assert abs(1.0 / generic - (1.0 + x) / (2.0 * x)) <= 1e-10 * (1.0 + 1.0 / x)
            generic = solve_markup_generic(P(1.0, 0.0, 1.0), x)
            assert abs(1.0 / generic - 1.0 / math.sqrt(x)) <= 1e-10 / x
            generic = solve_markup_generic(P(1.0, 0.0, 0.0), x)
            assert abs(generic - lambert_w0(math.e * x)) <= 1e-10
        alpha, sigma = 1.3, 2.4
        for x in rng.uniform(0.01, 0.99, 100) * alpha * (sigma - 1.0):
            x = float(x)
            generic = solve_markup_generic(P(alpha, 1.0, sigma), x)
            closed = (sigma - 1.0) / sigma * (1.0 - (x / (alpha * (sigma - 1.0))) ** sigma)
            assert abs(generic - closed) <= 1e-10


class TestSocCheck:
    def test_beta_zero_origin_limit(self):
        assert soc_check(P(2.0, 0.0, 1.5), 0.0) is True

    def test_case1a_convex_all_positive(self):
        params = P(1.0, 0.0, 2.0)
        for q in np.linspace(0.0, 50.0, 40):
            assert soc_check(params, float(q))

    def test_case2a_failure_point(self):
        assert soc_check(P(-1.0, 0.5, 1.0), 0.3) is False

    def test_case2a_fails_beyond_quantity_bound(self):
        rng = np.random.default_rng(61)
        for params in sample_case_params(rng, CaseLabel.CASE_2A, 50):
            _, qiv = markup_quantity_ranges(params)
            hard_upper = -params.beta / params.alpha
            if not qiv.upper < hard_upper:
                continue
            inside = 0.5 * qiv.upper
            beyond = qiv.upper + 0.25 * (hard_upper - qiv.upper)
            assert soc_check(params, inside)
            assert not soc_check(params, beyond)


class TestSolveMarkup:
    @pytest.mark.parametrize("case", [CaseLabel.CASE_1A, CaseLabel.CASE_1B,
                                      CaseLabel.CASE_2A, CaseLabel.CASE_2B])
    def test_containment_foc_soc(self, case):
        rng = np.random.default_rng(hash(case.value) % 2 ** 31)
        for params in sample_case_params(rng, case, 125):
            x = sample_x(rng, params)
            sol = solve_markup(params, x)
            lo, hi = _solver_bracket(params, case)
            # strictly inside, up to float rounding onto an endpoint
            pad = 4e-16 * max(1.0, abs(lo), abs(hi))
            assert lo - pad <= sol.mu <= hi + pad or \
                (params.beta == 0.0 and sol.mu == 1.0)
            # the defining fractional-form identity
            resid = abs(1.0 - sol.mu - (params.alpha * sol.q + params.beta)
                        / (params.alpha * params.sigma * sol.q + 1.0))
            assert resid <= 1e-10
            # x-side first-order condition; evaluating the mu-form of the
            # left side cancels ~sigma(1-mu)(1+asq)/(1-bs) digits, so widen
            # the tolerance by that conditioning factor
            amp = 1.0 + (abs(params.sigma) * (1.0 - sol.mu)
                         * (1.0 + params.alpha * params.sigma * sol.q)
                         / abs(1.0 - params.beta * params.sigma))
            assert abs(foc_lhs(params, sol.mu) - x) <= \
                max(1e-8, 1e-13 * amp) * max(1.0, x)
            assert sol.soc_ok
            (mlo, mhi), qiv = markup_quantity_ranges(params)
            assert mlo - 1e-9 <= sol.markup <= mhi + 1e-9 or mhi == math.inf
            assert qiv.contains(sol.q) or sol.q == 0.0

    def test_monotone_lhs_over_bracket(self):
        rng = np.random.default_rng(62)
        for case in (CaseLabel.CASE_1A, CaseLabel.CASE_1B,
                     CaseLabel.CASE_2A, CaseLabel.CASE_2B):
            expected = 1.0 if case in (CaseLabel.CASE_1A, CaseLabel.CASE_2B) else -1.0
            for params in sample_case_params(rng, case, 25):
                lo, hi = _solver_bracket(params, case)
                mus = np.linspace(lo + 1e-6 * (hi - lo), hi - 1e-6 * (hi - lo), 30)
                vals = [foc_lhs(params, float(m)) for m in mus]
                signs = np.sign(np.diff(vals))
                assert np.all(signs == expected)

    def test_ces_branches(self):
        sol = solve_markup(P(0.0, 0.3, 2.0), 0.7)
        assert sol.mu == pytest.approx(0.7)
        assert sol.case is CaseLabel.CES_ALPHA_ZERO
        sol = solve_markup(P(2.0, 0.25, 4.0), 1.3)
        assert sol.markup == pytest.approx(4.0 / 3.0)
        # quantity pinned by the consumer's first-order condition
        assert sol.q == pytest.approx((sol.mu / 1.3) ** 4.0, rel=1e-12)

    def test_ces_limit_of_generic_solver(self):
        # at huge alpha with the nesting normalization
        # K = (1-b)(1+as)^(1/s) + b(1+as)^(1/s-1), the generic markup
        # approaches sigma/(sigma-1)
        beta, sigma = 0.3, 2.0
        nu, m = 1.0, 1.0
        for alpha in (1e4, 1e6):
            K = ((1.0 - beta) * (1.0 + alpha * sigma) ** (1.0 / sigma)
                 + beta * (1.0 + alpha * sigma) ** (1.0 / sigma - 1.0))
            sol = solve_markup(P(alpha, beta, sigma), nu * m / K)
            assert sol.markup == pytest.approx(sigma / (sigma - 1.0), rel=50.0 / alpha)


class TestComparativeStatics:
    def test_ces_zero_slope(self):
        dmu, dp, dq = comparative_statics(P(0.0, 0.3, 2.0), 0.5)
        assert dmu == 0.0 and dp > 0 and dq < 0

    def test_signs_match_rra_slope(self):
        # markups decrease in m iff alpha (1 - beta sigma) > 0
        dmu, _, _ = comparative_statics(P(1.0, 0.2, 2.0), 0.5)
        assert dmu > 0.0  # case 1a: markup 1/mu decreasing
        dmu, _, _ = comparative_statics(P(1.0, 0.5, 3.0), 1.0)
        assert dmu < 0.0  # case 1b: markup increasing

    def test_dmu_dx_matches_finite_difference(self):
        rng = np.random.default_rng(63)
        for case in (CaseLabel.CASE_1A, CaseLabel.CASE_1B,
                     CaseLabel.CASE_2A, CaseLabel.CASE_2B):
            for params in sample_case_params(rng, case, 20):
                x = sample_x(rng, params)
                sol = solve_markup(params, x)
                closed = markup_slope_dmu_dx(params, x, sol.mu)
                h = 1e-6 * x
                up = solve_markup(params, x + h).mu
                dn = solve_markup(params, x - h).mu
                fd = (up - dn) / (2.0 * h)
                assert closed == pytest.approx(fd, rel=1e-6, abs=1e-9)
                want = math.copysign(
                    1.0, params.alpha * (1.0 - params.beta * params.sigma))
                assert math.copysign(1.0, closed) == want

    def test_beta_corners_slope_formula(self):
        # the closed form stays valid at beta = 0 and beta = 1
        for params, x in [(P(1.0, 0.0, 2.0), 0.7), (P(1.0, 1.0, 2.0), 0.5)]:
            sol = solve_markup(params, x)
            closed = markup_slope_dmu_dx(params, x, sol.mu)
            h = 1e-6 * x
            fd = (solve_markup(params, x + h).mu - solve_markup(params, x - h).mu) / (2 * h)
            assert closed == pytest.approx(fd, rel=1e-6)


class TestEquilibriumCurve:
    def test_crra_prices(self):
        rows = equilibrium_curve(P(0.0, 0.3, 2.0), 1.0, 1.0, [1.0, 2.0])
        assert [r.price for r in rows] == pytest.approx([1.0 / 0.7, 2.0 / 0.7])

    def test_cara_boundary_row(self):
        rows = equilibrium_curve(P(1.0, 0.0, 0.0), 1.0, 1.0, [1.0])
        assert rows[0].mu == pytest.approx(1.0)
        assert rows[0].price == pytest.approx(1.0)

    def test_quadratic_row(self):
        rows = equilibrium_curve(P(1.0, 0.0, -1.0), 1.0, 1.0, [0.5])
        assert rows[0].markup == pytest.approx(1.5, rel=1e-12)
        assert rows[0].price == pytest.approx(0.75, rel=1e-12)

    def test_out_of_domain_flagged(self):
        rows = equilibrium_curve(P(1.0, 0.0, 0.0), 1.0, 1.0, [0.5, 2.0])
        assert rows[0].in_domain and not rows[1].in_domain
        assert rows[1].mu is None

    def test_empty_grid_rejected(self):
        with pytest.raises(DomainError):
            equilibrium_curve(P(1.0, 0.0, 0.0), 1.0, 1.0, [])

    def test_price_increasing_quantity_decreasing(self):
        rng = np.random.default_rng(64)
        for case in (CaseLabel.CASE_1A, CaseLabel.CASE_1B,
                     CaseLabel.CASE_2A, CaseLabel.CASE_2B):
            for params in sample_case_params(rng, case, 10):
                dom = x_domain(params)
                lo = dom.lower + (0.05 if dom.lower > 0 else 0.01)
                hi = min(dom.upper * 0.98 if math.isfinite(dom.upper) else lo * 8.0,
                         lo * 8.0)
                if hi <= lo:
                    continue
                ms = list(np.linspace(lo, hi, 12))
                rows = equilibrium_curve(params, 1.0, 1.0, ms)
                prices = [r.price for r in rows if r.in_domain]
                qs = [r.q for r in rows if r.in_domain]
                assert len(prices) == len(ms)
                assert all(b > a for a, b in zip(prices, prices[1:]))
                assert all(b < a for a, b in zip(qs, qs[1:]))
