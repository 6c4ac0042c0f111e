"""Finite bivariate series in fractional powers of x and t.

A series is a finite map from exponent pairs to exact coefficients.  Each
exponent is a nonnegative rational constant plus nonnegative integer
multiples of fractional order symbols, e.g. ``2*b`` for ``x^(2b)`` or
``a+1`` for ``t^(a+1)``.  The weight of an exponent is its value with every
order symbol set to 1; truncation windows and validity bookkeeping all speak
in weights.

Validity: ``valid_x`` / ``valid_t`` record the largest weight up to which the
stored terms are known to agree with the mathematically exact series
(``UNBOUNDED`` means the series is exact).  Constructors drop any term
beyond the declared validity, so "never carry a term you cannot trust" is a
structural invariant, not a convention.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Mapping, NamedTuple

from .errors import DomainError, NegativeExponent
from .symcoeff import (
    AffineArg,
    GammaScalar,
    RationalLike,
    affine,
    as_fraction,
    latex_symbol,
)

UNBOUNDED = None
Validity = int | Fraction | None


class Exponent(NamedTuple):
    """const + sum of (order symbol, positive integer multiple)."""

    const: Fraction
    mults: tuple[tuple[str, int], ...] = ()

    def weight(self) -> Fraction:
        return self.const + sum(k for _, k in self.mults)

    def probe(self, assign: Mapping[str, Fraction]) -> Fraction:
        total = self.const
        for name, k in self.mults:
            total += k * assign[name]
        return total

    def key(self) -> tuple:
        return (self.weight(), self.const, self.mults)

    def is_integer(self) -> bool:
        """Pure integer constant, no symbolic part."""
        return not self.mults and self.const.denominator == 1

    def add(self, other: "Exponent") -> "Exponent":
        mults: dict[str, int] = dict(self.mults)
        for name, k in other.mults:
            mults[name] = mults.get(name, 0) + k
        return Exponent(self.const + other.const,
                        tuple(sorted((n, k) for n, k in mults.items() if k != 0)))

    def sub(self, other: "Exponent") -> "Exponent":
        """Difference, restricted to the nonnegative cone."""
        out = self.sub_unchecked(other)
        if out.const < 0 or any(k < 0 for _, k in out.mults):
            raise NegativeExponent(f"{self.render('e')} - {other.render('e')} leaves the cone")
        return out

    def sub_unchecked(self, other: "Exponent") -> "Exponent":
        mults: dict[str, int] = dict(self.mults)
        for name, k in other.mults:
            mults[name] = mults.get(name, 0) - k
        return Exponent(self.const - other.const,
                        tuple(sorted((n, k) for n, k in mults.items() if k != 0)))

    def arg_plus_one(self) -> AffineArg:
        """The Gamma argument (exponent + 1)."""
        return affine(self.const + 1, dict(self.mults))

    def render(self, _var: str = "", latex: bool = False) -> str:
        parts: list[str] = []
        for name, k in self.mults:
            sym = latex_symbol(name) if latex else name
            if k == 1:
                parts.append(sym)
            else:
                parts.append(f"{k}{sym}" if latex else f"{k}*{sym}")
        if self.const != 0 or not parts:
            parts.append(str(self.const))
        out = parts[0]
        for p in parts[1:]:
            out += p if p.startswith("-") else "+" + p
        return out

    def to_json_obj(self) -> dict:
        return {"const": str(self.const), "multiples": [[n, k] for n, k in self.mults]}


def make_exponent(const: RationalLike = 0, mults: Mapping[str, int] | None = None) -> Exponent:
    items = tuple(sorted((n, int(k)) for n, k in (mults or {}).items() if k != 0))
    return Exponent(as_fraction(const), items)


ZERO_EXP = make_exponent()

TermKey = tuple[Exponent, Exponent]


def v_min(a: Validity, b: Validity) -> Validity:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def v_add(a: Validity, k: RationalLike) -> Validity:
    return None if a is None else a + k


def _within(weight: Fraction, bound: Validity) -> bool:
    return bound is None or weight <= bound


class FracSeries:
    """Immutable-by-convention sparse series with validity tracking."""

    __slots__ = ("_terms", "valid_x", "valid_t")

    def __init__(self, terms: Mapping[TermKey, GammaScalar] | Iterable[tuple[TermKey, GammaScalar]] = (),
                 valid_x: Validity = UNBOUNDED, valid_t: Validity = UNBOUNDED):
        items = terms.items() if isinstance(terms, Mapping) else terms
        store: dict[TermKey, GammaScalar] = {}
        for (xe, te), coeff in items:
            if coeff.is_zero:
                continue
            if xe.const < 0 or any(k < 0 for _, k in xe.mults):
                raise NegativeExponent(f"negative x exponent {xe.render()}")
            if te.const < 0 or any(k < 0 for _, k in te.mults):
                raise NegativeExponent(f"negative t exponent {te.render()}")
            if not _within(xe.weight(), valid_x) or not _within(te.weight(), valid_t):
                continue
            key = (xe, te)
            if key in store:
                merged = store[key] + coeff
                if merged.is_zero:
                    del store[key]
                else:
                    store[key] = merged
            else:
                store[key] = coeff
        object.__setattr__(self, "_terms", store)
        object.__setattr__(self, "valid_x", valid_x)
        object.__setattr__(self, "valid_t", valid_t)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("FracSeries is immutable")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero() -> "FracSeries":
        return FracSeries()

    @staticmethod
    def constant(coeff: GammaScalar) -> "FracSeries":
        return FracSeries({(ZERO_EXP, ZERO_EXP): coeff})

    @staticmethod
    def monomial(xe: Exponent, te: Exponent, coeff: GammaScalar) -> "FracSeries":
        return FracSeries({(xe, te): coeff})

    # -- views ----------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def coeff(self, xe: Exponent, te: Exponent) -> GammaScalar:
        return self._terms.get((xe, te), GammaScalar.zero())

    def sorted_items(self) -> list[tuple[TermKey, GammaScalar]]:
        return sorted(self._terms.items(), key=lambda kv: (kv[0][0].key(), kv[0][1].key()))

    def x_support(self) -> list[Exponent]:
        return sorted({xe for xe, _ in self._terms}, key=Exponent.key)

    def t_support(self) -> list[Exponent]:
        return sorted({te for _, te in self._terms}, key=Exponent.key)

    def lowest_x_weight(self) -> Fraction | None:
        return min((xe.weight() for xe, _ in self._terms), default=None)

    def lowest_t_weight(self) -> Fraction | None:
        return min((te.weight() for _, te in self._terms), default=None)

    def __eq__(self, other) -> bool:
        return (isinstance(other, FracSeries) and self._terms == other._terms
                and self.valid_x == other.valid_x and self.valid_t == other.valid_t)

    __hash__ = None  # type: ignore[assignment]

    def same_terms(self, other: "FracSeries") -> bool:
        """Termwise canonical equality, ignoring validity marks."""
        return self._terms == other._terms

    # -- arithmetic -------------------------------------------------------------

    def __add__(self, other: "FracSeries") -> "FracSeries":
        if not isinstance(other, FracSeries):
            return NotImplemented
        items = list(self._terms.items()) + list(other._terms.items())
        return FracSeries(items, v_min(self.valid_x, other.valid_x),
                          v_min(self.valid_t, other.valid_t))

    def __neg__(self) -> "FracSeries":
        return FracSeries({k: -c for k, c in self._terms.items()}, self.valid_x, self.valid_t)

    def __sub__(self, other: "FracSeries") -> "FracSeries":
        return self + (-other)

    def scale(self, factor: GammaScalar) -> "FracSeries":
        if factor.is_zero:
            return FracSeries((), self.valid_x, self.valid_t)
        return FracSeries({k: c * factor for k, c in self._terms.items()},
                          self.valid_x, self.valid_t)

    def __mul__(self, other: "FracSeries") -> "FracSeries":
        if not isinstance(other, FracSeries):
            return NotImplemented
        vx = _product_validity(self.valid_x, other.valid_x,
                               self.lowest_x_weight(), other.lowest_x_weight())
        vt = _product_validity(self.valid_t, other.valid_t,
                               self.lowest_t_weight(), other.lowest_t_weight())
        a = [(xe, te, xe.weight(), te.weight(), c) for (xe, te), c in self._terms.items()]
        b = [(xe, te, xe.weight(), te.weight(), c) for (xe, te), c in other._terms.items()]
        # Bucket raw monomials per term key and canonicalize once at the end;
        # merging after every pair is quadratic in the accumulated monomials.
        acc: dict[TermKey, list[Monomial]] = {}
        for xa, ta, wxa, wta, ca in a:
            for xb, tb, wxb, wtb, cb in b:
                if not _within(wxa + wxb, vx) or not _within(wta + wtb, vt):
                    continue
                key = (xa.add(xb), ta.add(tb))
                bucket = acc.get(key)
                if bucket is None:
                    acc[key] = list(product_monomials(ca, cb))
                else:
                    bucket.extend(product_monomials(ca, cb))
        return FracSeries({k: GammaScalar(monos) for k, monos in acc.items()}, vx, vt)

    # -- shaping -----------------------------------------------------------------

    def truncate(self, jx: Validity = UNBOUNDED, jt: Validity = UNBOUNDED) -> "FracSeries":
        """Drop terms beyond the given weight windows.

        The validity mark on an axis only tightens when a term is actually
        dropped there; trimming a window around an already-finite series
        keeps its (possibly unbounded) exactness.
        """
        kept: dict[TermKey, GammaScalar] = {}
        dropped_x = dropped_t = False
        for (xe, te), c in self._terms.items():
            ok_x = _within(xe.weight(), jx)
            ok_t = _within(te.weight(), jt)
            if ok_x and ok_t:
                kept[(xe, te)] = c
            else:
                dropped_x |= not ok_x
                dropped_t |= not ok_t
        vx = v_min(self.valid_x, jx) if dropped_x else self.valid_x
        vt = v_min(self.valid_t, jt) if dropped_t else self.valid_t
        return FracSeries(kept, vx, vt)

    def specialize_order(self, name: str, value: RationalLike) -> "FracSeries":
        """Substitute an order symbol by an exact rational >= 1 everywhere.

        Exponents that collide after substitution merge; validities carry
        over because weights never decrease for value >= 1.
        """
        v = as_fraction(value)
        if v < 1:
            raise ValueError("specialization below 1 would break validity bookkeeping")
        acc: dict[TermKey, GammaScalar] = {}
        for (xe, te), c in self._terms.items():
            xe2 = _specialize_exp(xe, name, v)
            te2 = _specialize_exp(te, name, v)
            c2 = c.specialize_order(name, v)
            if c2.is_zero:
                continue
            key = (xe2, te2)
            acc[key] = acc[key] + c2 if key in acc else c2
        return FracSeries(acc, self.valid_x, self.valid_t)

    # -- numerics -------------------------------------------------------------------

    def numeric_terms(self, assign: Mapping[str, Fraction]) -> list[tuple[float, float, float]]:
        """Per-term (coefficient, x exponent, t exponent) floats at a probe."""
        out = []
        for (xe, te), c in self.sorted_items():
            out.append((c.evaluate(assign), float(xe.probe(assign)), float(te.probe(assign))))
        return out

    def evaluate(self, assign: Mapping[str, Fraction], x: float, t: float) -> float:
        return self.numeric_fn(assign)(x, t)

    def numeric_fn(self, assign: Mapping[str, Fraction]) -> Callable[[float, float], float]:
        """Compile to a float evaluator; probe work happens once."""
        terms = self.numeric_terms(assign)

        def fn(x: float, t: float) -> float:
            total = 0.0
            for c, px, pt in terms:
                total += c * _fpow(x, px) * _fpow(t, pt)
            return total

        return fn

    # -- rendering ---------------------------------------------------------------------

    def render_text(self, var_x: str = "x", var_t: str = "t") -> str:
        if not self._terms:
            return "0"
        rendered = [_term_text(xe, te, c, var_x, var_t) for (xe, te), c in self.sorted_items()]
        out = rendered[0]
        for piece in rendered[1:]:
            if piece.startswith("-"):
                out += " - " + piece[1:]
            else:
                out += " + " + piece
        return out

    def render_latex(self, var_x: str = "x", var_t: str = "t") -> str:
        if not self._terms:
            return "0"
        rendered = [_term_latex(xe, te, c, var_x, var_t) for (xe, te), c in self.sorted_items()]
        out = rendered[0]
        for piece in rendered[1:]:
            if piece.startswith("-"):
                out += " - " + piece[1:]
            else:
                out += " + " + piece
        return out

    def to_json_obj(self) -> dict:
        return {
            "valid_x": _validity_json(self.valid_x),
            "valid_t": _validity_json(self.valid_t),
            "terms": [
                {"coeff": c.to_json_obj(), "x_exp": xe.to_json_obj(), "t_exp": te.to_json_obj()}
                for (xe, te), c in self.sorted_items()
            ],
        }

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"FracSeries<{self.render_text()}>"


def _product_validity(wa: Validity, wb: Validity,
                      la: Fraction | None, lb: Fraction | None) -> Validity:
    candidates = []
    if wa is not None and lb is not None:
        candidates.append(wa + lb)
    if wb is not None and la is not None:
        candidates.append(wb + la)
    if not candidates:
        return UNBOUNDED
    return min(candidates)


def _specialize_exp(e: Exponent, name: str, v: Fraction) -> Exponent:
    if all(n != name for n, _ in e.mults):
        return e
    const = e.const
    kept = []
    for n, k in e.mults:
        if n == name:
            const += k * v
        else:
            kept.append((n, k))
    return Exponent(const, tuple(kept))


def _fpow(base: float, exp: float) -> float:
    if exp == 0.0:
        return 1.0
    if base < 0.0 and not float(exp).is_integer():
        raise DomainError(f"negative base {base} under fractional exponent {exp}")
    return base ** exp


def _pow_text(var: str, e: Exponent) -> str:
    if e.const == 0 and not e.mults:
        return ""
    body = e.render()
    if body == "1":
        return var
    if any(ch in body for ch in "*+-/"):
        return f"{var}^({body})"
    return f"{var}^{body}"


def _pow_latex(var: str, e: Exponent) -> str:
    if e.const == 0 and not e.mults:
        return ""
    body = e.render(latex=True)
    if body == "1":
        return var
    return f"{var}^{{{body}}}"


def _term_text(xe: Exponent, te: Exponent, c: GammaScalar, var_x: str, var_t: str) -> str:
    powers = [p for p in (_pow_text(var_x, xe), _pow_text(var_t, te)) if p]
    coeff = c.render_text()
    if not powers:
        return coeff
    if coeff == "1":
        return "*".join(powers)
    if coeff == "-1":
        return "-" + "*".join(powers)
    if len(c.monos) > 1:
        coeff = f"({coeff})"
    return "*".join([coeff] + powers)


def _term_latex(xe: Exponent, te: Exponent, c: GammaScalar, var_x: str, var_t: str) -> str:
    powers = " ".join(p for p in (_pow_latex(var_x, xe), _pow_latex(var_t, te)) if p)
    coeff = c.render_latex()
    if not powers:
        return coeff
    if coeff == "1":
        return powers
    if coeff == "-1":
        return f"-{powers}"
    if len(c.monos) > 1:
        coeff = f"\\left({coeff}\\right)"
    return f"{coeff} {powers}"


def _validity_json(v: Validity):
    if v is None:
        return None
    if isinstance(v, Fraction):
        return str(v)
    return v
