"""Caputo derivatives and Riemann-Liouville integrals, termwise and exact.

Space side: the sequential Caputo derivative of order ``b`` repeated
``times`` times.  Each application acts on pure ``x^(j*b)`` powers through

    D_x^b x^(j*b) = Gamma(j*b+1) / Gamma((j-1)*b+1) * x^((j-1)*b),    j >= 1,

and annihilates x-constant terms.  A higher-order space derivative is always
the iterate of single applications, never one application of a larger order.

Time side: for a time order ``g`` (a pure positive integer or a positive
integer multiple of one order symbol) with ceiling ``m`` at the probe,

* a pure integer power ``t^p`` with ``p < m`` is annihilated (this covers
  constants and the initial-data polynomial),
* every other power follows the power rule
  ``D_t^g t^mu = Gamma(mu+1)/Gamma(mu-g+1) * t^(mu-g)``, which must stay in
  the nonnegative exponent cone.

The integral ``I_t^g`` is the exact inverse direction:
``t^mu -> Gamma(mu+1)/Gamma(mu+g+1) * t^(mu+g)``.  Composing the two gives
the identity back termwise because the Gamma factors cancel canonically.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

from .errors import NegativeExponent, OrderMismatch
from .fracseries import Exponent, FracSeries, TermKey, v_add
from .symcoeff import GammaScalar, OrderSymbol


def _ceil_fraction(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


def _check_time_order(gamma: Exponent) -> None:
    """Accept pure positive integers or k*symbol with integer k >= 1."""
    if gamma.mults:
        if len(gamma.mults) != 1 or gamma.const != 0:
            raise OrderMismatch(f"unsupported time order shape {gamma.render()}")
        _, k = gamma.mults[0]
        if k < 1:
            raise OrderMismatch(f"time order multiple must be positive, got {gamma.render()}")
    else:
        if gamma.const.denominator != 1 or gamma.const < 1:
            raise OrderMismatch(f"constant time order must be a positive integer, got {gamma.render()}")


def caputo_x(f: FracSeries, beta: OrderSymbol, times: int = 1) -> FracSeries:
    """Sequential space-fractional Caputo derivative of order beta, iterated."""
    if times < 0:
        raise ValueError("times must be nonnegative")
    out = f
    for _ in range(times):
        acc: dict[TermKey, GammaScalar] = {}
        for (xe, te), c in out._terms.items():  # noqa: SLF001 - same module family
            if xe.const == 0 and not xe.mults:
                continue
            if xe.const != 0 or len(xe.mults) != 1 or xe.mults[0][0] != beta.name:
                raise OrderMismatch(
                    f"x exponent {xe.render()} is not a pure multiple of {beta.name}")
            j = xe.mults[0][1]
            lower = Exponent(Fraction(0), ((beta.name, j - 1),) if j > 1 else ())
            factor = (GammaScalar.gamma(xe.arg_plus_one())
                      * GammaScalar.gamma(lower.arg_plus_one(), -1))
            key = (lower, te)
            coeff = c * factor
            acc[key] = acc[key] + coeff if key in acc else coeff
        out = FracSeries(acc, v_add(out.valid_x, -1), out.valid_t)
    return out


def caputo_t(f: FracSeries, gamma: Exponent, probes: Mapping[str, Fraction]) -> FracSeries:
    """Caputo time derivative of symbolic order gamma at the given probes.

    The probe values only decide the ceiling ``m``; everything else is exact
    symbol pushing.  The annihilation rule fires solely for pure integer
    exponents below ``m``, never because a symbolic exponent happens to probe
    to an integer.
    """
    _check_time_order(gamma)
    m = _ceil_fraction(gamma.probe(probes))
    if m < 1:
        raise OrderMismatch(f"time order {gamma.render()} probes to {gamma.probe(probes)} <= 0")
    acc: dict[TermKey, GammaScalar] = {}
    for (xe, te), c in f._terms.items():  # noqa: SLF001
        if te.is_integer() and te.const < m:
            continue
        try:
            shifted = te.sub(gamma)
        except NegativeExponent:
            raise NegativeExponent(
                f"cannot take order {gamma.render()} derivative of t^({te.render()})") from None
        factor = (GammaScalar.gamma(te.arg_plus_one())
                  * GammaScalar.gamma(shifted.arg_plus_one(), -1))
        key = (xe, shifted)
        coeff = c * factor
        acc[key] = acc[key] + coeff if key in acc else coeff
    return FracSeries(acc, f.valid_x, v_add(f.valid_t, -gamma.weight()))


def rl_integral_t(f: FracSeries, gamma: Exponent) -> FracSeries:
    """Riemann-Liouville time integral of symbolic order gamma."""
    _check_time_order(gamma)
    acc: dict[TermKey, GammaScalar] = {}
    for (xe, te), c in f._terms.items():  # noqa: SLF001
        shifted = te.add(gamma)
        factor = (GammaScalar.gamma(te.arg_plus_one())
                  * GammaScalar.gamma(shifted.arg_plus_one(), -1))
        key = (xe, shifted)
        coeff = c * factor
        acc[key] = acc[key] + coeff if key in acc else coeff
    return FracSeries(acc, f.valid_x, v_add(f.valid_t, gamma.weight()))
