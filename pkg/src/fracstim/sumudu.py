"""Termwise Sumudu transform on the time axis and its inverse.

On the algebraic class handled here the transform acts monomial by monomial:

    S[t^mu](w) = Gamma(mu+1) * w^mu

so transforming multiplies each coefficient by Gamma(exponent+1) and renames
the t axis to w; inverting divides it back out.  ``OmegaSeries`` is the
transform-side container.  Unlike ``FracSeries`` it tolerates negative w
exponents, because the shift ``w^-g * S[u]`` appearing in the derivative
identity temporarily leaves the nonnegative cone before initial-data terms
cancel the negative part.

``caputo_identity_holds`` rebuilds both sides of that identity

    S[D_t^g u] = w^-g * S[u] - sum_{k<m} w^(k-g) * d^k u/dt^k (x, 0)

as canonical OmegaSeries and compares them exactly, which is the package's
internal consistency check between the time-derivative rule and the
transform pair.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping

from .errors import NegativeOmegaExponent
from .fraccalc import _ceil_fraction, _check_time_order, caputo_t
from .fracseries import Exponent, FracSeries, TermKey, make_exponent
from .symcoeff import GammaScalar


class OmegaSeries:
    """Sparse series in x and the Sumudu variable w (exponents unrestricted)."""

    __slots__ = ("_terms", "valid_x", "valid_t")

    def __init__(self, terms=(), valid_x=None, valid_t=None):
        items = terms.items() if isinstance(terms, Mapping) else terms
        store: dict[TermKey, GammaScalar] = {}
        for key, coeff in items:
            if coeff.is_zero:
                continue
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
        raise AttributeError("OmegaSeries is immutable")

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other) -> bool:
        return isinstance(other, OmegaSeries) and self._terms == other._terms

    __hash__ = None  # type: ignore[assignment]

    def sorted_items(self):
        return sorted(self._terms.items(), key=lambda kv: (kv[0][0].key(), kv[0][1].key()))

    def shift_omega(self, delta: Exponent) -> "OmegaSeries":
        """Multiply by w^delta (delta may point out of the cone)."""
        return OmegaSeries({(xe, we.sub_unchecked(delta)): c for (xe, we), c in self._terms.items()},
                           self.valid_x, self.valid_t)

    def __sub__(self, other: "OmegaSeries") -> "OmegaSeries":
        items = list(self._terms.items()) + [(k, -c) for k, c in other._terms.items()]
        return OmegaSeries(items, self.valid_x, self.valid_t)

    def render_text(self) -> str:
        if not self._terms:
            return "0"
        from .fracseries import _term_text  # shared renderer
        rendered = [_term_text(xe, we, c, "x", "w") for (xe, we), c in self.sorted_items()]
        out = rendered[0]
        for piece in rendered[1:]:
            out += " - " + piece[1:] if piece.startswith("-") else " + " + piece
        return out

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"OmegaSeries<{self.render_text()}>"


def sumudu_t(f: FracSeries) -> OmegaSeries:
    """Termwise Sumudu transform along t; w exponents inherit t exponents."""
    acc: dict[TermKey, GammaScalar] = {}
    for (xe, te), c in f._terms.items():  # noqa: SLF001
        coeff = c * GammaScalar.gamma(te.arg_plus_one())
        key = (xe, te)
        acc[key] = acc[key] + coeff if key in acc else coeff
    return OmegaSeries(acc, f.valid_x, f.valid_t)


def inv_sumudu(F: OmegaSeries) -> FracSeries:
    """Inverse transform; every w exponent must lie in the nonnegative cone."""
    acc: dict[TermKey, GammaScalar] = {}
    for (xe, we), c in F._terms.items():  # noqa: SLF001
        if we.const < 0 or any(k < 0 for _, k in we.mults):
            raise NegativeOmegaExponent(f"w^({we.render()}) has no series preimage")
        coeff = c * GammaScalar.gamma(we.arg_plus_one(), -1)
        key = (xe, we)
        acc[key] = acc[key] + coeff if key in acc else coeff
    return FracSeries(acc, F.valid_x, F.valid_t)


def time_slice_at_zero(u: FracSeries, k: int) -> list[tuple[Exponent, GammaScalar]]:
    """x profile of d^k u / dt^k at t = 0: k! times the pure t^k coefficients."""
    out: dict[Exponent, GammaScalar] = {}
    for (xe, te), c in u._terms.items():  # noqa: SLF001
        if te.is_integer() and te.const == k:
            coeff = c * GammaScalar.rational(math.factorial(k))
            out[xe] = out[xe] + coeff if xe in out else coeff
    return sorted(out.items(), key=lambda kv: kv[0].key())


def caputo_identity_holds(u: FracSeries, gamma: Exponent,
                          probes: Mapping[str, Fraction]) -> bool:
    """Exact check of the transform identity for the Caputo derivative."""
    _check_time_order(gamma)
    m = _ceil_fraction(gamma.probe(probes))
    lhs = sumudu_t(caputo_t(u, gamma, probes))
    rhs = sumudu_t(u).shift_omega(gamma)
    for k in range(m):
        correction: dict[TermKey, GammaScalar] = {}
        for xe, coeff in time_slice_at_zero(u, k):
            we = make_exponent(k).sub_unchecked(gamma)
            key = (xe, we)
            correction[key] = correction.get(key, GammaScalar.zero()) + coeff
        rhs = rhs - OmegaSeries(correction)
    return lhs == rhs
