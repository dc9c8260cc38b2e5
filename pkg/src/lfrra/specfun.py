"""Real-valued special-function kernels.

Gauss hypergeometric 2F1 (power series and Euler-integral continuation),
the lower incomplete gamma function, the exponential integral Ei, the
principal branch of the Lambert W function, and a small adaptive
Gauss-Legendre quadrature engine used by the integral representations.

All functions are pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, DomainError, QuadratureError

EULER_GAMMA = 0.5772156649015328606065120900824024

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)


@dataclass(frozen=True)
class SeriesConfig:
    """Tolerances and budgets for series summation and quadrature."""

    rel_tol: float = 1e-14
    max_terms: int = 100_000
    quad_abs_tol: float = 1e-12
    quad_max_depth: int = 40

    def __post_init__(self):
        if self.rel_tol <= 0.0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")
        if self.quad_abs_tol <= 0.0:
            raise ValueError("quad_abs_tol must be positive")
        if self.quad_max_depth < 1:
            raise ValueError("quad_max_depth must be at least 1")


DEFAULT_SERIES_CONFIG = SeriesConfig()


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0.0 and x == math.floor(x)


def hyp2f1(a: float, b: float, c: float, z: float,
           cfg: SeriesConfig = DEFAULT_SERIES_CONFIG) -> float:
    """Gauss hypergeometric function by direct power-series summation.

    Sums sum_n (a)_n (b)_n / (c)_n * z^n / n! until the next term is
    below ``cfg.rel_tol`` relative to the partial sum.  Requires |z| < 1
    unless the series terminates (a or b a non-positive integer), in
    which case the finite polynomial is evaluated for any z.
    """
    terminates = _is_nonpositive_integer(a) or _is_nonpositive_integer(b)
    if abs(z) >= 1.0 and not terminates:
        raise DomainError(
            f"hyp2f1 series requires |z| < 1, got z={z!r} with non-terminating parameters")

    total = 1.0
    term = 1.0
    for n in range(cfg.max_terms):
        num = (a + n) * (b + n)
        if num == 0.0:
            return total
        den = c + n
        if den == 0.0:
            raise DomainError(
                f"hyp2f1 undefined: c={c!r} hits a non-positive integer before termination")
        term *= num / den * z / (n + 1)
        total += term
        if abs(term) <= cfg.rel_tol * max(abs(total), 1e-300):
            return total
    raise ConvergenceError(
        f"hyp2f1 series did not converge within {cfg.max_terms} terms at z={z!r}")


def adaptive_quadrature(f, a: float, b: float, abs_tol: float,
                        max_depth: int) -> float:
    """Adaptive composite 15-point Gauss-Legendre integration of f on [a, b].

    ``f`` must accept numpy arrays.  Segments are bisected until the
    whole-vs-halves discrepancy falls below the segment's share of
    ``abs_tol``; exceeding ``max_depth`` raises QuadratureError.
    """
    if a == b:
        return 0.0

    def gauss(lo, hi):
        h = 0.5 * (hi - lo)
        return h * float(np.dot(_GL_WEIGHTS, f(lo + h * (_GL_NODES + 1.0))))

    total = 0.0
    stack = [(a, b, gauss(a, b), abs_tol, 0)]
    while stack:
        lo, hi, whole, tol, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = gauss(lo, mid)
        right = gauss(mid, hi)
        err = abs(left + right - whole)
        # refining below the segment's own roundoff cannot help
        floor = 100.0 * 2.2e-16 * (abs(left) + abs(right))
        if err <= tol or err <= floor:
            total += left + right
        elif depth >= max_depth:
            raise QuadratureError(
                f"adaptive quadrature exceeded depth {max_depth} on [{lo}, {hi}]")
        else:
            stack.append((lo, mid, left, 0.5 * tol, depth + 1))
            stack.append((mid, hi, right, 0.5 * tol, depth + 1))
    return total


def power_endpoint_integral(g, p: float, upper: float, abs_tol: float,
                            max_depth: int) -> float:
    """Integrate s^(p-1) * g(s) over [0, upper] for p > 0, g smooth.

    Dyadic grading toward the origin keeps the power factor smooth on
    every segment regardless of p, and the innermost sliver is summed
    in closed form as g(0) * eps^p / p, which carries the near-divergent
    mass exactly when p is small.  Smooth whole powers integrate plainly.
    """
    if upper == 0.0:
        return 0.0
    if p == math.floor(p) and p <= 12.0:
        def integrand(s):
            return np.power(s, p - 1.0) * g(s)

        return adaptive_quadrature(integrand, 0.0, upper, abs_tol, max_depth)

    def integrand(s):
        return np.power(s, p - 1.0) * g(s)

    n_levels = 48
    eps = upper * 0.5 ** n_levels
    total = float(g(np.float64(0.0))) * eps ** p / p
    seg_tol = abs_tol / (n_levels + 1.0)
    hi = upper
    for _ in range(n_levels):
        lo = 0.5 * hi
        total += adaptive_quadrature(integrand, lo, hi, seg_tol, max_depth)
        hi = lo
    return total


def hyp2f1_euler_integral(a: float, b: float, c: float, z: float,
                          cfg: SeriesConfig = DEFAULT_SERIES_CONFIG) -> float:
    """Gauss hypergeometric function by the Euler integral representation.

    Evaluates Gamma(c)/(Gamma(b)Gamma(c-b)) * int_0^1 t^(b-1) (1-t)^(c-b-1)
    (1-zt)^(-a) dt, valid for c > b > 0 and z outside [1, inf).  The power
    factors at both endpoints, singular or merely non-smooth, are removed
    by the substitution in ``power_endpoint_integral`` before quadrature.
    """
    if not (c > b > 0.0):
        raise DomainError(f"Euler integral requires c > b > 0, got b={b!r}, c={c!r}")
    if z >= 1.0:
        raise DomainError(f"Euler integral requires z < 1, got z={z!r}")

    gamma_cb = c - b
    tol = 0.5 * cfg.quad_abs_tol
    depth = cfg.quad_max_depth

    def core(t):
        return np.power(1.0 - z * t, -a)

    # [0, 1/2]: weight t^(b-1), smooth remainder (1-t)^(c-b-1) * core.
    def left_smooth(t):
        return np.power(1.0 - t, gamma_cb - 1.0) * core(t)

    i_left = power_endpoint_integral(left_smooth, b, 0.5, tol, depth)

    # [1/2, 1]: weight (1-t)^(c-b-1) in s = 1-t, smooth remainder.
    def right_smooth(s):
        t = 1.0 - s
        return np.power(t, b - 1.0) * core(t)

    i_right = power_endpoint_integral(right_smooth, gamma_cb, 0.5, tol, depth)

    prefactor = math.gamma(c) / (math.gamma(b) * math.gamma(gamma_cb))
    return prefactor * (i_left + i_right)


def lower_incomplete_gamma(a: float, x: float) -> float:
    """Lower incomplete gamma function gamma(a, x) = int_0^x t^(a-1) e^(-t) dt.

    Series expansion for x < a + 1, complement of the Lentz continued
    fraction for the upper tail otherwise.  Requires a > 0 and x >= 0.
    """
    if a <= 0.0:
        raise DomainError(f"lower incomplete gamma requires a > 0, got {a!r}")
    if x < 0.0:
        raise DomainError(f"lower incomplete gamma requires x >= 0, got {x!r}")
    if x == 0.0:
        return 0.0

    if x < a + 1.0:
        # gamma(a,x) = x^a e^-x sum_n x^n / (a (a+1) ... (a+n))
        term = 1.0 / a
        total = term
        for n in range(1, 10_000):
            term *= x / (a + n)
            total += term
            if abs(term) <= 1e-16 * abs(total):
                break
        else:
            raise ConvergenceError("incomplete gamma series did not converge")
        return math.exp(a * math.log(x) - x) * total

    # Upper tail Gamma(a,x) via modified Lentz continued fraction.
    tiny = 1e-300
    b0 = x + 1.0 - a
    c0 = 1.0 / tiny
    d0 = 1.0 / b0 if b0 != 0.0 else 1.0 / tiny
    h = d0
    for i in range(1, 10_000):
        an = -i * (i - a)
        b0 += 2.0
        d0 = an * d0 + b0
        if d0 == 0.0:
            d0 = tiny
        c0 = b0 + an / c0
        if c0 == 0.0:
            c0 = tiny
        d0 = 1.0 / d0
        delta = d0 * c0
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:
        raise ConvergenceError("incomplete gamma continued fraction did not converge")
    upper = math.exp(a * math.log(x) - x) * h
    return math.gamma(a) - upper


def _e1_continued_fraction(y: float) -> float:
    """E1(y) for y > 0 via the modified Lentz continued fraction."""
    tiny = 1e-300
    b0 = y + 1.0
    c0 = 1.0 / tiny
    d0 = 1.0 / b0
    h = d0
    for i in range(1, 10_000):
        an = -float(i * i)
        b0 += 2.0
        d0 = an * d0 + b0
        if d0 == 0.0:
            d0 = tiny
        c0 = b0 + an / c0
        if c0 == 0.0:
            c0 = tiny
        d0 = 1.0 / d0
        delta = d0 * c0
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h * math.exp(-y)
    raise ConvergenceError("E1 continued fraction did not converge")


# Below this the alternating Ei series starts shedding digits to
# cancellation, so the negative tail switches to the continued fraction.
_EI_SERIES_CUTOFF = -6.0


def exp_integral_ei(x: float) -> float:
    """Exponential integral Ei(x), principal value for x > 0.

    Convergent series Ei(x) = gamma + ln|x| + sum x^n/(n n!) on
    (cutoff, 0) and on all of (0, inf) where every term is positive;
    continued fraction for the negative tail, where the alternating
    series cancels catastrophically.
    """
    if x == 0.0:
        raise DomainError("Ei is undefined at x = 0")
    if x < _EI_SERIES_CUTOFF:
        return -_e1_continued_fraction(-x)

    total = EULER_GAMMA + math.log(abs(x))
    factorial_term = 1.0
    for n in range(1, 100_000):
        factorial_term *= x / n
        total += factorial_term / n
        if abs(factorial_term) <= 1e-17 * max(1.0, abs(total)) and n > abs(x):
            return total
    raise ConvergenceError(f"Ei series did not converge at x={x!r}")


_INV_E = math.exp(-1.0)


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function, solving w e^w = x.

    Halley iteration from a piecewise initial guess: branch-point series
    near -1/e, log-based asymptote for large x, log1p otherwise.
    Requires x >= -1/e; the result satisfies w >= -1.
    """
    if x < -_INV_E:
        if x > -_INV_E - 1e-15:  # round-off at the branch point
            return -1.0
        raise DomainError(f"lambert_w0 requires x >= -1/e, got {x!r}")
    if x == 0.0:
        return 0.0

    if x < -0.25:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    elif x > math.e:
        lx = math.log(x)
        w = lx - math.log(lx)
    else:
        w = math.log1p(x) * 0.75

    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= 1e-15 * max(abs(x), 0.05):
            break
        wp1 = w + 1.0
        if wp1 == 0.0:  # Halley degenerates exactly at the branch point
            w += 1e-9
            continue
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= 1e-16 * (2.0 + abs(w)):
            break
    else:
        raise ConvergenceError(f"lambert_w0 did not converge at x={x!r}")

    if w < -1.0:  # round-off just below the branch point value
        w = -1.0
    return w
