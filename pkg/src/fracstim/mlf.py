"""Mittag-Leffler and fractional trigonometric numerics, plus x-side atoms.

The two-parameter Mittag-Leffler function is summed directly,

    E_{a,b}(z) = sum_k z^k / Gamma(a*k + b),

in log space so large intermediate terms do not overflow prematurely, with a
reported error bound (a safety factor times the first omitted term).  The
fractional cosine and sine are the alternating even/odd ladders

    cos_a(l, t) = sum_k (-1)^k l^(2k)   t^(2ka)     / Gamma(2ka+1)
    sin_a(l, t) = sum_k (-1)^k l^(2k+1) t^((2k+1)a) / Gamma((2k+1)a+1)

summed with compensated (Kahan) accumulation because the leading terms of the
alternating tail nearly cancel for larger arguments.

X-side atoms describe the spatial profiles initial data is built from: pure
powers ``x^(j*b)`` and the three ladder functions above with a monomial rate.
``atom_series`` expands an atom into an exact truncated ``FracSeries`` whose
validity equals the expansion window, which is what makes downstream
truncation bookkeeping honest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, NamedTuple, Union

from .errors import DomainError, NonConvergence
from .fracseries import FracSeries, make_exponent
from .symcoeff import GammaScalar, OrderSymbol, latex_symbol

_MAX_TERMS = 1000
_LOG_HUGE = 700.0


class MLValue(NamedTuple):
    value: float
    error_bound: float
    terms: int


def _signed_exp(log_mag: float, sign: float) -> float:
    if log_mag < -745.0:
        return 0.0
    return sign * math.exp(log_mag)


def mlf_eval(alpha: float, beta: float, z: float) -> MLValue:
    """Two-parameter Mittag-Leffler E_{alpha,beta}(z) for real z.

    Raises DomainError for alpha <= 0 and NonConvergence when the series
    needs more than the term budget or exceeds float range.
    """
    if not (alpha > 0.0) or not math.isfinite(alpha) or not math.isfinite(beta):
        raise DomainError(f"need alpha > 0, got alpha={alpha}, beta={beta}")
    if not math.isfinite(z):
        raise DomainError(f"non-finite argument {z}")
    if z == 0.0:
        if beta <= 0.0 and float(beta).is_integer():
            return MLValue(0.0, 0.0, 1)
        return MLValue(_signed_exp(-math.lgamma(beta), _gamma_sign(beta)), 0.0, 1)
    log_az = math.log(abs(z))
    total = 0.0
    comp = 0.0
    prev_mag = math.inf
    for k in range(_MAX_TERMS):
        g = alpha * k + beta
        if g <= 0.0 and float(g).is_integer():
            term = 0.0  # reciprocal Gamma vanishes at the pole
            mag = 0.0
        else:
            log_mag = (0.0 if k == 0 else k * log_az) - math.lgamma(g)
            if log_mag > _LOG_HUGE:
                raise NonConvergence(
                    f"E_({alpha},{beta})({z}) exceeds float range at term {k}")
            sign = (-1.0 if (z < 0 and k % 2) else 1.0) * _gamma_sign(g)
            term = _signed_exp(log_mag, sign)
            mag = abs(term)
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if k > 0 and mag <= prev_mag and mag <= 1e-16 * max(abs(total), 1e-300):
            return MLValue(total, 2.0 * _next_term_bound(alpha, beta, z, k + 1), k + 1)
        prev_mag = mag if mag > 0.0 else prev_mag
    raise NonConvergence(f"E_({alpha},{beta})({z}) did not converge in {_MAX_TERMS} terms")


def _gamma_sign(x: float) -> float:
    if x > 0.0:
        return 1.0
    return -1.0 if (math.floor(x) % 2 != 0) else 1.0


def _next_term_bound(alpha: float, beta: float, z: float, k: int) -> float:
    g = alpha * k + beta
    if g <= 0.0 and float(g).is_integer():
        return 0.0
    if z == 0.0:
        return 0.0
    log_mag = k * math.log(abs(z)) - math.lgamma(g)
    return 0.0 if log_mag < -745.0 else math.exp(log_mag)


def frac_trig_eval(alpha: float, lam: float, t: float, kind: str) -> float:
    """Fractional cosine/sine ladder value at (lam, t), t >= 0."""
    if kind not in ("sin", "cos"):
        raise ValueError(f"kind must be 'sin' or 'cos', got {kind!r}")
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"need alpha in (0, 1], got {alpha}")
    if t < 0.0:
        raise DomainError(f"need t >= 0, got {t}")
    if t == 0.0:
        return 1.0 if kind == "cos" else 0.0
    log_t = math.log(t)
    log_al = math.log(abs(lam)) if lam != 0.0 else None
    total = 0.0
    comp = 0.0
    for k in range(_MAX_TERMS):
        p = 2 * k if kind == "cos" else 2 * k + 1
        if lam == 0.0:
            if p > 0:
                return total
            term = 1.0
        else:
            log_mag = p * log_al + p * alpha * log_t - math.lgamma(p * alpha + 1.0)
            if log_mag > _LOG_HUGE:
                raise NonConvergence(f"{kind}_{alpha}({lam}, {t}) exceeds float range")
            sign = (-1.0) ** k * (1.0 if lam > 0 or p % 2 == 0 else -1.0)
            term = _signed_exp(log_mag, sign)
        y = term - comp
        s = total + y
        comp = (s - total) - y
        total = s
        if k > 0 and abs(term) <= 1e-16 * max(abs(total), 1e-300):
            return total
    raise NonConvergence(f"{kind}_{alpha}({lam}, {t}) did not converge in {_MAX_TERMS} terms")


# -- x-side atoms ------------------------------------------------------------


def _check_rate(rate: GammaScalar) -> None:
    m = rate.single_monomial()
    if m is None:
        raise ValueError("atom rate must be a single monomial")
    if m.gammas:
        raise ValueError("atom rate must be free of Gamma factors")


@dataclass(frozen=True)
class Power:
    """x^(j*b) for the ambient space order b; j = 0 is the constant 1."""

    j: int

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("power atom needs j >= 0")


@dataclass(frozen=True)
class MittagLeffler:
    """E_b(rate * x^b) with a monomial rate."""

    rate: GammaScalar

    def __post_init__(self):
        _check_rate(self.rate)


@dataclass(frozen=True)
class FracSin:
    """sin_b(rate, x) ladder atom with a monomial rate."""

    rate: GammaScalar

    def __post_init__(self):
        _check_rate(self.rate)


@dataclass(frozen=True)
class FracCos:
    """cos_b(rate, x) ladder atom with a monomial rate."""

    rate: GammaScalar

    def __post_init__(self):
        _check_rate(self.rate)


XAtom = Union[Power, MittagLeffler, FracSin, FracCos]


def atom_series(atom: XAtom, beta: OrderSymbol, j_max: int) -> FracSeries:
    """Expand an atom in powers of x^b up to x-weight j_max (exact window)."""
    if j_max < 0:
        raise ValueError("j_max must be nonnegative")
    b = beta.name
    if isinstance(atom, Power):
        xe = make_exponent(0, {b: atom.j})
        return FracSeries({(xe, make_exponent()): GammaScalar.one()})
    terms = {}
    if isinstance(atom, MittagLeffler):
        for k in range(j_max + 1):
            xe = make_exponent(0, {b: k})
            terms[(xe, make_exponent())] = (atom.rate ** k) * GammaScalar.gamma(xe.arg_plus_one(), -1)
    elif isinstance(atom, FracCos):
        for k in range(0, j_max // 2 + 1):
            xe = make_exponent(0, {b: 2 * k})
            coeff = (atom.rate ** (2 * k)) * GammaScalar.gamma(xe.arg_plus_one(), -1)
            terms[(xe, make_exponent())] = coeff if k % 2 == 0 else -coeff
    elif isinstance(atom, FracSin):
        for k in range(0, (j_max - 1) // 2 + 1 if j_max >= 1 else 0):
            xe = make_exponent(0, {b: 2 * k + 1})
            coeff = (atom.rate ** (2 * k + 1)) * GammaScalar.gamma(xe.arg_plus_one(), -1)
            terms[(xe, make_exponent())] = coeff if k % 2 == 0 else -coeff
    else:
        raise TypeError(f"unknown atom {atom!r}")
    return FracSeries(terms, valid_x=j_max, valid_t=None)


def atom_eval(atom: XAtom, assign: Mapping[str, Fraction], beta_probe: float, x: float) -> float:
    """Numeric atom value at a probe assignment and spatial point x >= 0."""
    if x < 0.0:
        raise DomainError(f"atoms are evaluated for x >= 0, got {x}")
    if isinstance(atom, Power):
        return x ** (atom.j * beta_probe)
    rate = atom.rate.evaluate(assign)
    if isinstance(atom, MittagLeffler):
        return mlf_eval(beta_probe, 1.0, rate * x ** beta_probe).value
    kind = "sin" if isinstance(atom, FracSin) else "cos"
    return frac_trig_eval(beta_probe, rate, x, kind)


def render_atom(atom: XAtom, beta_name: str, latex: bool = False, var: str = "x") -> str:
    b = latex_symbol(beta_name) if latex else beta_name
    xb = f"{var}^{{{b}}}" if latex else f"{var}^{b}"
    if isinstance(atom, Power):
        if atom.j == 0:
            return "1"
        if atom.j == 1:
            return xb
        return f"{var}^{{{atom.j}{b}}}" if latex else f"{var}^({atom.j}*{b})"
    rate = atom.rate.render_latex() if latex else atom.rate.render_text()
    if isinstance(atom, MittagLeffler):
        head = f"E_{{{b}}}" if latex else f"E_{b}"
        if rate == "1":
            return f"{head}({xb})"
        if rate == "-1":
            return f"{head}(-{xb})"
        sep = " " if latex else "*"
        return f"{head}({rate}{sep}{xb})"
    name = "sin" if isinstance(atom, FracSin) else "cos"
    head = f"\\{name}_{{{b}}}" if latex else f"{name}_{b}"
    if rate == "1":
        return f"{head}({xb})"
    if rate == "-1":
        return f"{head}(-{xb})"
    sep = " " if latex else "*"
    return f"{head}({rate}{sep}{xb})"
