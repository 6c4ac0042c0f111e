"""Exact scalar algebra for series coefficients.

Coefficients produced by fractional power rules are finite sums of monomials

    q * p1^e1 * ... * Gamma(arg1)^g1 * Gamma(arg2)^g2 * ...

where ``q`` is an exact rational, each ``pi`` is a named parameter with an
integer power, and every Gamma argument is affine in the fractional order
symbols: a rational offset plus integer multiples of order names.  Values of
this shape are closed under ring operations, so iterate coefficients stay
exact end to end.

Two rules matter for equality testing:

* Symbolic Gamma factors are never rewritten through the functional equation.
  ``Gamma[b+1]`` and ``b*Gamma[b]`` style rewrites do not happen; canonical
  equality is structural equality of the monomial multiset.
* A Gamma factor whose argument is a plain positive integer collapses to the
  exact factorial at construction time, so ``Gamma(3)`` is stored as ``2``.
  Nonpositive integer arguments are poles and refuse to construct.

Numeric evaluation assigns rationals (or floats) to every symbol and goes
through ``math.gamma``, falling back to ``exp(lgamma)`` with explicit sign
handling when the direct call overflows.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Union

from .errors import MissingSymbol, NotDivisible, PoleError, ZeroDivisor

RationalLike = Union[int, Fraction]

_GREEK = {
    "alpha": "\\alpha", "beta": "\\beta", "gamma": "\\gamma", "delta": "\\delta",
    "eta": "\\eta", "zeta": "\\zeta", "theta": "\\theta", "kappa": "\\kappa",
    "lambda": "\\lambda", "mu": "\\mu", "nu": "\\nu", "xi": "\\xi",
    "rho": "\\rho", "sigma": "\\sigma", "tau": "\\tau", "phi": "\\phi",
    "chi": "\\chi", "psi": "\\psi", "omega": "\\omega",
}


def as_fraction(value: RationalLike) -> Fraction:
    """Coerce an int or Fraction to Fraction; reject floats on purpose."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def latex_symbol(name: str) -> str:
    """LaTeX form of a symbol name: greek words map to commands."""
    if name in _GREEK:
        return _GREEK[name]
    if len(name) == 1:
        return name
    if name[:-1] in _GREEK and name[-1].isdigit():
        return f"{_GREEK[name[:-1]]}_{{{name[-1]}}}"
    return f"\\mathrm{{{name}}}"


class OrderSymbol(NamedTuple):
    """A named fractional order with its exact rational probe in (0, 1]."""

    name: str
    probe: Fraction

    @staticmethod
    def make(name: str, probe: RationalLike) -> "OrderSymbol":
        p = as_fraction(probe)
        if not (0 < p <= 1):
            raise ValueError(f"order probe for {name!r} must lie in (0, 1], got {p}")
        return OrderSymbol(name, p)


class ParamSymbol(NamedTuple):
    """A named scalar parameter with a nonzero exact rational probe."""

    name: str
    probe: Fraction

    @staticmethod
    def make(name: str, probe: RationalLike) -> "ParamSymbol":
        p = as_fraction(probe)
        if p == 0:
            raise ValueError(f"parameter probe for {name!r} must be nonzero")
        return ParamSymbol(name, p)


class AffineArg(NamedTuple):
    """Gamma argument: rational const plus integer multiples of order names."""

    const: Fraction
    coeffs: tuple[tuple[str, int], ...] = ()

    def value_at(self, assign: Mapping[str, object]) -> Fraction | float:
        total: Fraction | float = self.const
        for name, k in self.coeffs:
            try:
                v = assign[name]
            except KeyError:
                raise MissingSymbol(name) from None
            total = total + k * (v if isinstance(v, Fraction) else v)  # type: ignore[operator]
        return total

    def substitute(self, name: str, value: Fraction) -> "AffineArg":
        """Replace one order symbol by an exact rational value."""
        if all(n != name for n, _ in self.coeffs):
            return self
        const = self.const
        kept = []
        for n, k in self.coeffs:
            if n == name:
                const += k * value
            else:
                kept.append((n, k))
        return AffineArg(const, tuple(kept))

    def render(self, latex: bool = False) -> str:
        parts: list[str] = []
        for name, k in self.coeffs:
            sym = latex_symbol(name) if latex else name
            if k == 1:
                term = sym
            elif k == -1:
                term = f"-{sym}"
            else:
                term = f"{k}{sym}" if latex else f"{k}*{sym}"
            parts.append(term)
        if self.const != 0 or not parts:
            parts.append(_render_rational(self.const, latex))
        out = parts[0]
        for p in parts[1:]:
            out += p if p.startswith("-") else "+" + p
        return out


def affine(const: RationalLike = 0, coeffs: Mapping[str, int] | None = None) -> AffineArg:
    """Build a canonical AffineArg from a const and a name -> weight map."""
    items = tuple(sorted((n, int(k)) for n, k in (coeffs or {}).items() if k != 0))
    return AffineArg(as_fraction(const), items)


class Monomial(NamedTuple):
    coef: Fraction
    params: tuple[tuple[str, int], ...]
    gammas: tuple[tuple[AffineArg, int], ...]


def _merge_powers(a, b):
    """Merge two sorted (key, power) tuples, summing powers, dropping zeros."""
    acc: dict = {}
    for key, p in a:
        acc[key] = acc.get(key, 0) + p
    for key, p in b:
        acc[key] = acc.get(key, 0) + p
    return tuple(sorted((k, p) for k, p in acc.items() if p != 0))


def product_monomials(a: "GammaScalar", b: "GammaScalar"):
    """Yield the raw cross products of two scalars' monomials.

    Callers that accumulate many products into one coefficient (series
    convolution) collect these and canonicalize through one GammaScalar
    construction instead of re-merging after every pair.
    """
    for ma in a.monos:
        for mb in b.monos:
            yield Monomial(
                ma.coef * mb.coef,
                _merge_powers(ma.params, mb.params),
                _merge_powers(ma.gammas, mb.gammas),
            )


def _render_rational(q: Fraction, latex: bool = False) -> str:
    if latex and q.denominator != 1:
        sign = "-" if q < 0 else ""
        return f"{sign}\\frac{{{abs(q.numerator)}}}{{{q.denominator}}}"
    return str(q)


def _gamma_float(x: float) -> float:
    if x <= 0 and float(x).is_integer():
        raise PoleError(f"Gamma pole at {x}")
    try:
        return math.gamma(x)
    except OverflowError:
        sign = 1.0
        if x < 0:
            sign = -1.0 if (math.floor(x) % 2 != 0) else 1.0
        return sign * math.exp(math.lgamma(x))


class GammaScalar:
    """Canonical finite sum of rational/parameter/Gamma monomials.

    Instances are immutable by convention; every operation returns a fresh
    canonical value (like monomials merged, zero monomials dropped, factors
    sorted).  Equality and hashing are structural.
    """

    __slots__ = ("monos",)

    def __init__(self, monos: Iterable[Monomial] = ()):
        acc: dict[tuple, Fraction] = {}
        for m in monos:
            if m.coef == 0:
                continue
            key = (m.params, m.gammas)
            acc[key] = acc.get(key, Fraction(0)) + m.coef
        object.__setattr__(self, "monos", tuple(
            Monomial(c, p, g) for (p, g), c in sorted(acc.items()) if c != 0
        ))

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("GammaScalar is immutable")

    # -- constructors -----------------------------------------------------

    @staticmethod
    def zero() -> "GammaScalar":
        return _ZERO

    @staticmethod
    def one() -> "GammaScalar":
        return _ONE

    @staticmethod
    def rational(q: RationalLike) -> "GammaScalar":
        return GammaScalar((Monomial(as_fraction(q), (), ()),))

    @staticmethod
    def param(name: str, power: int = 1) -> "GammaScalar":
        if power == 0:
            return _ONE
        return GammaScalar((Monomial(Fraction(1), ((name, power),), ()),))

    @staticmethod
    def gamma(arg: AffineArg, power: int = 1) -> "GammaScalar":
        """Gamma(arg)^power with integer-argument collapse.

        A pure positive integer argument is folded into the rational
        coefficient as an exact factorial.  A pure nonpositive integer
        argument raises PoleError for positive powers; for negative powers
        the reciprocal of a pole is exactly zero.
        """
        if power == 0:
            return _ONE
        if not arg.coeffs:
            c = arg.const
            if c.denominator == 1:
                n = int(c)
                if n <= 0:
                    if power > 0:
                        raise PoleError(f"Gamma({n}) is a pole")
                    return _ZERO
                return GammaScalar.rational(Fraction(math.factorial(n - 1)) ** power)
            return GammaScalar((Monomial(Fraction(1), (), ((arg, power),)),))
        return GammaScalar((Monomial(Fraction(1), (), ((arg, power),)),))

    # -- predicates and views ---------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.monos

    @property
    def is_one(self) -> bool:
        return self.as_rational() == 1

    def as_rational(self) -> Fraction | None:
        """The exact rational value if no symbols occur, else None."""
        if not self.monos:
            return Fraction(0)
        if len(self.monos) == 1 and not self.monos[0].params and not self.monos[0].gammas:
            return self.monos[0].coef
        return None

    def single_monomial(self) -> Monomial | None:
        return self.monos[0] if len(self.monos) == 1 else None

    def mentions(self, name: str) -> bool:
        """True if the symbol occurs as a parameter or inside a Gamma argument."""
        for m in self.monos:
            if any(n == name for n, _ in m.params):
                return True
            for arg, _ in m.gammas:
                if any(n == name for n, _ in arg.coeffs):
                    return True
        return False

    # -- ring operations ---------------------------------------------------

    def __eq__(self, other) -> bool:
        return isinstance(other, GammaScalar) and self.monos == other.monos

    def __hash__(self) -> int:
        return hash(self.monos)

    def __add__(self, other: "GammaScalar") -> "GammaScalar":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        return GammaScalar(self.monos + other.monos)

    def __neg__(self) -> "GammaScalar":
        return GammaScalar(tuple(Monomial(-m.coef, m.params, m.gammas) for m in self.monos))

    def __sub__(self, other: "GammaScalar") -> "GammaScalar":
        return self + (-other)

    def __mul__(self, other: "GammaScalar") -> "GammaScalar":
        if self.is_zero or other.is_zero:
            return _ZERO
        return GammaScalar(product_monomials(self, other))

    def __pow__(self, n: int) -> "GammaScalar":
        if n == 0:
            return _ONE
        if n < 0:
            m = self.single_monomial()
            if m is None:
                if self.is_zero:
                    raise ZeroDivisor("0 has no inverse")
                raise NotDivisible("only single monomials can be inverted")
            inv = Monomial(
                Fraction(1) / m.coef,
                tuple((k, -p) for k, p in m.params),
                tuple((k, -p) for k, p in m.gammas),
            )
            return GammaScalar((inv,)) ** (-n)
        acc = _ONE
        base = self
        while n:
            if n & 1:
                acc = acc * base
            base = base * base if n > 1 else base
            n >>= 1
        return acc

    def try_divide(self, den: "GammaScalar") -> "GammaScalar":
        """Exact quotient self/den when den is a single monomial.

        Raises ZeroDivisor for a zero denominator and NotDivisible when the
        denominator has more than one monomial (no polynomial division here).
        """
        if den.is_zero:
            raise ZeroDivisor("division by the zero scalar")
        if den.single_monomial() is None:
            raise NotDivisible("denominator is not a single monomial")
        return self * (den ** -1)

    # -- substitution -------------------------------------------------------

    def substitute_params(self, mapping: Mapping[str, "GammaScalar"]) -> "GammaScalar":
        """Replace parameter symbols by scalars (constraint elimination).

        Positive powers expand; negative powers require the replacement to be
        a single monomial (NotDivisible otherwise).
        """
        if not mapping:
            return self
        total = _ZERO
        for m in self.monos:
            kept = tuple((n, p) for n, p in m.params if n not in mapping)
            piece = GammaScalar((Monomial(m.coef, kept, m.gammas),))
            for n, p in m.params:
                if n in mapping:
                    piece = piece * (mapping[n] ** p)
            total = total + piece
        return total

    def specialize_order(self, name: str, value: RationalLike) -> "GammaScalar":
        """Replace an order symbol inside Gamma arguments by an exact rational.

        Arguments that become positive integers collapse to factorials;
        nonpositive integers follow the pole rules of :meth:`gamma`.
        """
        v = as_fraction(value)
        total = _ZERO
        for m in self.monos:
            piece = GammaScalar((Monomial(m.coef, m.params, ()),))
            for arg, p in m.gammas:
                piece = piece * GammaScalar.gamma(arg.substitute(name, v), p)
                if piece.is_zero:
                    break
            total = total + piece
        return total

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, assign: Mapping[str, object]) -> float:
        """Float value at a symbol assignment (Fractions keep args exact)."""
        total = 0.0
        for m in self.monos:
            v = float(m.coef)
            for name, p in m.params:
                try:
                    base = assign[name]
                except KeyError:
                    raise MissingSymbol(name) from None
                v *= float(base) ** p
            for arg, p in m.gammas:
                a = arg.value_at(assign)
                if isinstance(a, Fraction) and a.denominator == 1 and a <= 0:
                    raise PoleError(f"Gamma pole at {a}")
                v *= _gamma_float(float(a)) ** p
            total += v
        return total

    # -- rendering -----------------------------------------------------------

    def render_text(self) -> str:
        if not self.monos:
            return "0"
        out = _mono_text(self.monos[0])
        for m in self.monos[1:]:
            if m.coef < 0:
                out += " - " + _mono_text(Monomial(-m.coef, m.params, m.gammas))
            else:
                out += " + " + _mono_text(m)
        return out

    def render_latex(self) -> str:
        if not self.monos:
            return "0"
        out = _mono_latex(self.monos[0])
        for m in self.monos[1:]:
            if m.coef < 0:
                out += " - " + _mono_latex(Monomial(-m.coef, m.params, m.gammas))
            else:
                out += " + " + _mono_latex(m)
        return out

    def to_json_obj(self) -> dict:
        return {
            "monomials": [
                {
                    "coef": str(m.coef),
                    "params": [[n, p] for n, p in m.params],
                    "gammas": [
                        {
                            "arg": {
                                "const": str(a.const),
                                "orders": [[n, k] for n, k in a.coeffs],
                            },
                            "power": p,
                        }
                        for a, p in m.gammas
                    ],
                }
                for m in self.monos
            ]
        }

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"GammaScalar<{self.render_text()}>"


def _mono_text(m: Monomial) -> str:
    factors: list[str] = []
    for name, p in m.params:
        factors.append(name if p == 1 else f"{name}^{p}")
    for arg, p in m.gammas:
        factors.append(f"Gamma[{arg.render()}]^{p}")
    if not factors:
        return str(m.coef)
    coef = m.coef
    head = ""
    if coef == -1:
        head = "-"
    elif coef != 1:
        head = (f"({coef})" if coef < 0 or coef.denominator != 1 else str(coef)) + "*"
    return head + "*".join(factors)


def _mono_latex(m: Monomial) -> str:
    factors: list[str] = []
    for name, p in m.params:
        sym = latex_symbol(name)
        factors.append(sym if p == 1 else f"{sym}^{{{p}}}")
    for arg, p in m.gammas:
        base = f"\\Gamma({arg.render(latex=True)})"
        factors.append(base if p == 1 else f"{base}^{{{p}}}")
    body = " ".join(factors)
    coef = m.coef
    if not factors:
        return _render_rational(coef, latex=True)
    if coef == 1:
        return body
    if coef == -1:
        return f"-{body}"
    return f"{_render_rational(coef, latex=True)} {body}"


_ZERO = GammaScalar.__new__(GammaScalar)
object.__setattr__(_ZERO, "monos", ())
_ONE = GammaScalar.__new__(GammaScalar)
object.__setattr__(_ONE, "monos", (Monomial(Fraction(1), (), ()),))


def gamma_of_exponent_plus_one(const: RationalLike, coeffs: Mapping[str, int] | None = None,
                               power: int = 1) -> GammaScalar:
    """Convenience for the ubiquitous Gamma(exponent + 1) factors."""
    return GammaScalar.gamma(affine(as_fraction(const) + 1, coeffs), power)
