"""Closed-form recognition for computed series solutions.

The pipeline has three stages, each independent enough to catch the others'
mistakes:

1. Numeric separation.  The series is laid out as a coefficient matrix over
   (x exponent, t exponent) cells and evaluated at several seeded random
   probe assignments.  Greedy rank-1 peeling on the first probe picks a
   pivot skeleton; the same skeleton must explain the matrix at every other
   probe to residual 1e-10, otherwise the series is reported unseparable.

2. Symbolic replay.  The pivot skeleton is replayed over the exact
   coefficients.  Every pivot must be a single monomial (exact division is
   only defined there) and the exact residual after peeling must vanish
   identically; numeric rank estimates never stand alone.

3. Pattern matching.  Each rank-1 component factors into an x profile and a
   t profile.  Profiles are matched against generalized geometric ladders

       value(index) * Gamma(exponent+1) = scale * ratio^index

   with offset 0 or 1 and stride 1 or 2, which covers Mittag-Leffler,
   even-step Mittag-Leffler and the fractional sine/cosine shapes; anything
   genuinely finite becomes an explicit polynomial part.  The ratio comes
   from exact division when possible, otherwise from a small-rational
   numeric reconstruction that the mandatory re-expansion check then either
   proves or rejects: a reported closed form always re-expands to the input
   series termwise over the full window.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .errors import NotDivisible, ZeroDivisor
from .fracseries import UNBOUNDED, Exponent, FracSeries, ZERO_EXP, make_exponent, v_min
from .mlf import FracCos, FracSin, MittagLeffler, Power, XAtom, atom_series
from .symcoeff import GammaScalar, OrderSymbol, latex_symbol

AtomCombo = tuple[tuple[GammaScalar, XAtom], ...]

_NUMERIC_TOL = 1e-10
_PIVOT_TOL = 1e-12
_RATIONAL_TOL = 1e-12
_MAX_DENOM = 64


@dataclass(frozen=True)
class FinitePoly:
    """Explicit finite t part: sum of coeff * t^exponent."""

    terms: tuple[tuple[Exponent, GammaScalar], ...]


@dataclass(frozen=True)
class MLPattern:
    """sum_q rate^q * t^(q*step) / Gamma(q*step+1)."""

    rate: GammaScalar
    step: Exponent


TPattern = Union[FinitePoly, MLPattern]


@dataclass(frozen=True)
class Summand:
    coeff: GammaScalar
    x_combo: AtomCombo
    t_pattern: TPattern


@dataclass(frozen=True)
class ClosedForm:
    summands: tuple[Summand, ...]


@dataclass(frozen=True)
class RecognitionResult:
    closed_form: ClosedForm | None
    confirmed: bool
    confirmations: int
    detail: str


def _scale_exponent(e: Exponent, q: int) -> Exponent:
    return Exponent(e.const * q, tuple((n, k * q) for n, k in e.mults))


def expand_closed_form(cf: ClosedForm, beta: OrderSymbol, jx: int, jt: int) -> FracSeries:
    """Exact truncated re-expansion of a closed form."""
    total = FracSeries.zero()
    for s in cf.summands:
        xs = FracSeries.zero()
        for coeff, atom in s.x_combo:
            xs = xs + atom_series(atom, beta, jx).scale(coeff)
        ts = _t_pattern_series(s.t_pattern, jt)
        total = total + (xs * ts).scale(s.coeff)
    return total


def _t_pattern_series(pat: TPattern, jt: int) -> FracSeries:
    if isinstance(pat, FinitePoly):
        return FracSeries({(ZERO_EXP, te): c for te, c in pat.terms})
    if pat.step.weight() <= 0:
        raise ValueError("ladder step must have positive weight")
    terms = {}
    q = 0
    while True:
        te = _scale_exponent(pat.step, q)
        if te.weight() > jt:
            break
        terms[(ZERO_EXP, te)] = (pat.rate ** q) * GammaScalar.gamma(te.arg_plus_one(), -1)
        q += 1
    return FracSeries(terms, valid_x=UNBOUNDED, valid_t=jt)


# -- probe generation ----------------------------------------------------------


def _probe_assignments(order_names: Sequence[str], param_names: Sequence[str],
                       seed: int, count: int = 3) -> list[dict[str, Fraction]]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        assign: dict[str, Fraction] = {}
        for name in order_names:
            assign[name] = Fraction(rng.randint(40, 97), 101)
        for name in param_names:
            num = rng.randint(2, 12)
            den = rng.randint(2, 8)
            sign = rng.choice((-1, 1))
            assign[name] = Fraction(sign * num, den)
        out.append(assign)
    return out


# -- separation ------------------------------------------------------------------


class _Unseparable(Exception):
    pass


def _separate(series: FracSeries, probes: list[dict[str, Fraction]],
              max_rank: int) -> list[tuple[list[GammaScalar], list[GammaScalar]]]:
    """Exact rank-1 components (x vector, t vector) or _Unseparable."""
    x_exps = series.x_support()
    t_exps = series.t_support()
    xi = {e: i for i, e in enumerate(x_exps)}
    ti = {e: i for i, e in enumerate(t_exps)}
    sym = [[GammaScalar.zero() for _ in t_exps] for _ in x_exps]
    for (xe, te), c in series.sorted_items():
        sym[xi[xe]][ti[te]] = c

    mats = []
    for assign in probes:
        mats.append(np.array([[c.evaluate(assign) for c in row] for row in sym], dtype=float))

    # greedy pivots on the first probe
    R = mats[0].copy()
    norm0 = float(np.max(np.abs(R))) if R.size else 0.0
    if norm0 == 0.0:
        raise _Unseparable("series is numerically zero at the probe but not canonically zero")
    pivots: list[tuple[int, int]] = []
    for _ in range(max_rank + 1):
        amax = float(np.max(np.abs(R)))
        if amax <= _NUMERIC_TOL * norm0:
            break
        if len(pivots) == max_rank:
            raise _Unseparable(f"numeric rank exceeds {max_rank}")
        i, j = np.unravel_index(int(np.argmax(np.abs(R))), R.shape)
        pivots.append((int(i), int(j)))
        R = R - np.outer(R[:, j], R[i, :]) / R[i, j]

    # the same skeleton must explain every other probe
    for m in mats[1:]:
        R = m.copy()
        norm = float(np.max(np.abs(R)))
        if norm == 0.0:
            raise _Unseparable("degenerate probe (matrix vanished)")
        for i, j in pivots:
            if abs(R[i, j]) <= _PIVOT_TOL * norm:
                raise _Unseparable("pivot skeleton is probe-dependent")
            R = R - np.outer(R[:, j], R[i, :]) / R[i, j]
        if float(np.max(np.abs(R))) > _NUMERIC_TOL * norm:
            raise _Unseparable("rank structure is probe-dependent")

    # symbolic replay over the exact coefficients
    components = []
    for i, j in pivots:
        pivot = sym[i][j]
        if pivot.single_monomial() is None:
            raise _Unseparable("pivot coefficient is not a single monomial")
        inv = pivot ** -1
        x_vec = [sym[r][j] for r in range(len(x_exps))]
        t_vec = [sym[i][c] * inv for c in range(len(t_exps))]
        components.append((x_vec, t_vec))
        for r in range(len(x_exps)):
            if x_vec[r].is_zero:
                continue
            for c in range(len(t_exps)):
                if t_vec[c].is_zero:
                    continue
                sym[r][c] = sym[r][c] - x_vec[r] * t_vec[c]
    for row in sym:
        for cell in row:
            if not cell.is_zero:
                raise _Unseparable("exact residual after peeling is nonzero")
    return [(x_exps, t_exps, xv, tv) for (xv, tv) in components]  # type: ignore[misc]


# -- geometric fitting -------------------------------------------------------------


def _try_rational_ratio(num: GammaScalar, den: GammaScalar,
                        probes: list[dict[str, Fraction]]) -> GammaScalar | None:
    """Reconstruct num/den as a small rational consistent across probes."""
    recon: Fraction | None = None
    for assign in probes:
        d = den.evaluate(assign)
        if d == 0.0:
            return None
        val = num.evaluate(assign) / d
        cand = Fraction(val).limit_denominator(_MAX_DENOM)
        if abs(float(cand) - val) > _RATIONAL_TOL * max(1.0, abs(val)):
            return None
        if recon is None:
            recon = cand
        elif recon != cand:
            return None
    return None if recon is None else GammaScalar.rational(recon)


def _ratio(u_lo: GammaScalar, u_hi: GammaScalar,
           probes: list[dict[str, Fraction]]) -> GammaScalar | None:
    try:
        return u_hi.try_divide(u_lo)
    except (NotDivisible, ZeroDivisor):
        return _try_rational_ratio(u_hi, u_lo, probes)


def _monomial_sqrt(gs: GammaScalar) -> GammaScalar | None:
    """Exact square root of a Gamma-free positive-coefficient monomial."""
    m = gs.single_monomial()
    if m is None or m.gammas or m.coef <= 0:
        return None
    num = _isqrt_exact(m.coef.numerator)
    den = _isqrt_exact(m.coef.denominator)
    if num is None or den is None:
        return None
    if any(p % 2 for _, p in m.params):
        return None
    root = GammaScalar.rational(Fraction(num, den))
    for name, p in m.params:
        root = root * GammaScalar.param(name, p // 2)
    return root


def _isqrt_exact(n: int) -> int | None:
    r = int(n ** 0.5)
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand * cand == n:
            return cand
    return None


@dataclass
class _GeomFit:
    offset: int
    stride: int
    ratio: GammaScalar
    lead: GammaScalar  # u-value at the first ladder index (index = offset)
    bump: GammaScalar  # actual value at index 0 when the ladder starts at 1
    count: int


def _fit_ladder(indexed: list[tuple[int, GammaScalar]],
                gamma_of_index, probes: list[dict[str, Fraction]]) -> _GeomFit | None:
    """Fit value(i) * Gamma(arg(i)) = lead * ratio^k on i = offset + k*stride."""
    values = dict(indexed)
    support = sorted(values)
    bump0 = values.get(0, GammaScalar.zero())
    for offset, stride in ((0, 1), (0, 2), (1, 1), (1, 2)):
        tail = [i for i in support if i >= 1] if offset == 1 else support
        if offset == 0 and (not support or support[0] != 0):
            continue
        if offset == 1 and (not tail or tail[0] != 1):
            continue
        expected = list(range(offset, offset + stride * len(tail), stride))
        if tail != expected or len(tail) < 3:
            continue
        u = [values[i] * GammaScalar.gamma(gamma_of_index(i)) for i in tail]
        consistent = all(
            (u[k + 1] * u[0]) == (u[k] * u[1]) for k in range(len(u) - 1)
        )
        if not consistent:
            continue
        ratio = _ratio(u[0], u[1], probes)
        if ratio is None:
            continue
        bump = bump0 if offset == 1 else GammaScalar.zero()
        return _GeomFit(offset, stride, ratio, u[0], bump, len(tail))
    return None


# -- axis matching --------------------------------------------------------------------


def _match_x_profile(x_exps: list[Exponent], x_vec: list[GammaScalar], beta_name: str,
                     window: int | Fraction | None,
                     probes: list[dict[str, Fraction]]) -> tuple[AtomCombo, int] | None:
    """Return (atom combo, geometric confirmation count or 0 for finite)."""
    indexed: list[tuple[int, GammaScalar]] = []
    for e, v in zip(x_exps, x_vec):
        if v.is_zero:
            continue
        if e.const == 0 and not e.mults:
            indexed.append((0, v))
        elif e.const == 0 and len(e.mults) == 1 and e.mults[0][0] == beta_name:
            indexed.append((e.mults[0][1], v))
        else:
            return None
    if not indexed:
        return (), 0
    indexed.sort()
    maxj = max(i for i, _ in indexed)

    def gamma_of(j: int):
        return make_exponent(0, {beta_name: j}).arg_plus_one()

    fit = None
    if window is not None:
        fit = _fit_ladder(indexed, gamma_of, probes)
        if fit is not None and maxj + fit.stride <= window:
            fit = None  # room for another term: the profile is genuinely finite
    if fit is None:
        if window is not None and maxj + 1 > window:
            return None  # runs to the window edge but is not a ladder
        combo = tuple((v, Power(j)) for j, v in indexed)
        return combo, 0

    atoms: list[tuple[GammaScalar, XAtom]] = []
    if fit.stride == 1:
        try:
            ml = MittagLeffler(fit.ratio)
        except ValueError:
            return None
        if fit.offset == 0:
            scale = fit.lead
        else:
            try:
                scale = fit.lead.try_divide(fit.ratio)
            except (NotDivisible, ZeroDivisor):
                return None
        atoms.append((scale, ml))
        leftover = fit.bump - scale if fit.offset == 1 else GammaScalar.zero()
    else:
        kappa = _monomial_sqrt(-fit.ratio)
        if kappa is None:
            return None
        if fit.offset == 0:
            atoms.append((fit.lead, FracCos(kappa)))
            leftover = GammaScalar.zero()
        else:
            try:
                s = fit.lead.try_divide(kappa)
            except (NotDivisible, ZeroDivisor):
                return None
            atoms.append((s, FracSin(kappa)))
            leftover = fit.bump
    if not leftover.is_zero:
        atoms.append((leftover, Power(0)))
    return tuple(atoms), fit.count


def _match_t_profile(t_exps: list[Exponent], t_vec: list[GammaScalar],
                     window: int | Fraction | None,
                     probes: list[dict[str, Fraction]]) -> tuple[list[tuple[GammaScalar, TPattern]], int] | None:
    entries = [(e, v) for e, v in zip(t_exps, t_vec) if not v.is_zero]
    if not entries:
        return [], 0
    nonzero_exps = [e for e, _ in entries if e.weight() > 0]
    step = nonzero_exps[0] if nonzero_exps else None
    indexed: list[tuple[int, GammaScalar]] | None = []
    if step is None:
        indexed = [(0, entries[0][1])]
    else:
        for e, v in entries:
            q = _index_of(e, step)
            if q is None:
                indexed = None
                break
            indexed.append((q, v))
    fit = None
    if indexed is not None and step is not None and window is not None:
        indexed.sort()

        def gamma_of(q: int):
            return _scale_exponent(step, q).arg_plus_one()

        fit = _fit_ladder(indexed, gamma_of, probes)
        if fit is not None and fit.stride == 2:
            fit = None  # stride folding happens through the step itself
        if fit is not None:
            maxw = _scale_exponent(step, max(i for i, _ in indexed)).weight()
            if maxw + step.weight() <= window:
                fit = None  # room left: finite after all

    if fit is None:
        maxw = max(e.weight() for e, _ in entries)
        if window is not None and maxw + 1 > window:
            return None
        return [(GammaScalar.one(), FinitePoly(tuple((e, v) for e, v in entries)))], 0

    if fit.offset == 0:
        scale = fit.lead
    else:
        try:
            scale = fit.lead.try_divide(fit.ratio)
        except (NotDivisible, ZeroDivisor):
            return None
    pieces: list[tuple[GammaScalar, TPattern]] = [(scale, MLPattern(fit.ratio, step))]
    leftover = fit.bump - scale if fit.offset == 1 else GammaScalar.zero()
    if not leftover.is_zero:
        pieces.append((GammaScalar.one(), FinitePoly(((ZERO_EXP, leftover),))))
    return pieces, fit.count


def _index_of(e: Exponent, step: Exponent) -> int | None:
    if e.const == 0 and not e.mults:
        return 0
    w_step = step.weight()
    if w_step == 0:
        return None
    q = e.weight() / w_step
    if q.denominator != 1:
        return None
    q = int(q)
    return q if _scale_exponent(step, q) == e else None


# -- assembly ------------------------------------------------------------------------------


def _merge_summands(raw: list[Summand]) -> tuple[Summand, ...]:
    by_pattern: dict[TPattern, dict[XAtom, GammaScalar]] = {}
    order: list[TPattern] = []
    for s in raw:
        if s.t_pattern not in by_pattern:
            by_pattern[s.t_pattern] = {}
            order.append(s.t_pattern)
        combo = by_pattern[s.t_pattern]
        for c, atom in s.x_combo:
            coeff = c * s.coeff
            combo[atom] = combo.get(atom, GammaScalar.zero()) + coeff
    out = []
    for pat in order:
        combo = tuple((c, a) for a, c in by_pattern[pat].items() if not c.is_zero)
        if combo:
            out.append(Summand(GammaScalar.one(), combo, pat))
    return tuple(out)


def recognize(series: FracSeries, *, beta: OrderSymbol,
              order_names: Sequence[str], param_names: Sequence[str],
              jx: int, jt: int, min_confirm: int = 4, seed: int = 74321,
              max_rank: int = 6) -> RecognitionResult:
    """Attempt a verified closed form for a truncated series solution."""
    if series.is_zero:
        return RecognitionResult(ClosedForm(()), True, 0, "zero")
    window_x = v_min(series.valid_x, jx)
    window_t = v_min(series.valid_t, jt)
    probes = _probe_assignments(order_names, param_names, seed)
    try:
        components = _separate(series, probes, max_rank)
    except _Unseparable as exc:
        return RecognitionResult(None, False, 0, f"unseparable: {exc}")

    raw: list[Summand] = []
    counts: list[int] = []
    for x_exps, t_exps, x_vec, t_vec in components:
        xm = _match_x_profile(x_exps, x_vec, beta.name, window_x, probes)
        if xm is None:
            return RecognitionResult(None, False, 0, "no-match: x profile")
        tm = _match_t_profile(t_exps, t_vec, window_t, probes)
        if tm is None:
            return RecognitionResult(None, False, 0, "no-match: t profile")
        combo, xcount = xm
        pieces, tcount = tm
        if xcount:
            counts.append(xcount)
        if tcount:
            counts.append(tcount)
        for tscale, tpat in pieces:
            raw.append(Summand(tscale, combo, tpat))

    cf = ClosedForm(_merge_summands(raw))
    expansion = expand_closed_form(cf, beta, _as_int(window_x, jx), _as_int(window_t, jt))
    lhs = series.truncate(jx=window_x, jt=window_t)
    rhs = expansion.truncate(jx=window_x, jt=window_t)
    if not lhs.same_terms(rhs):
        return RecognitionResult(None, False, 0, "soundness: re-expansion mismatch")
    confirmations = min(counts) if counts else min_confirm
    if confirmations < min_confirm:
        return RecognitionResult(cf, False, confirmations,
                                 f"unconfirmed: only {confirmations} ladder coefficients")
    return RecognitionResult(cf, True, confirmations, "ok")


def _as_int(window, fallback: int) -> int:
    if window is None:
        return fallback
    return int(window)


# -- rendering ----------------------------------------------------------------------------


def _sub_label(step: Exponent, latex: bool) -> str:
    body = step.render(latex=latex)
    return body.replace("*", "")


def render_t_pattern(pat: TPattern, latex: bool = False, var: str = "t") -> str:
    if isinstance(pat, MLPattern):
        rate = pat.rate.render_latex() if latex else pat.rate.render_text()
        sub = _sub_label(pat.step, latex)
        body = pat.step.render(latex=latex)
        power = f"{var}^{{{body}}}" if latex else (
            f"{var}^({body})" if any(ch in body for ch in "*+-/") else f"{var}^{body}")
        if rate == "1":
            arg = power
        elif rate == "-1":
            arg = f"-{power}"
        else:
            if len(pat.rate.monos) > 1 or (not latex and ("+" in rate or " - " in rate)):
                rate = f"({rate})"
            arg = f"{rate} {power}" if latex else f"{rate}*{power}"
        return f"E_{{{sub}}}({arg})" if latex else f"E_{sub}({arg})"
    parts = []
    for te, c in sorted(pat.terms, key=lambda kv: kv[0].key()):
        coeff = c.render_latex() if latex else c.render_text()
        if te.const == 0 and not te.mults:
            parts.append(coeff)
            continue
        body = te.render(latex=latex)
        power = f"{var}^{{{body}}}" if latex else (
            f"{var}^({body})" if any(ch in body for ch in "*+-/") else f"{var}^{body}")
        if coeff == "1":
            parts.append(power)
        elif coeff == "-1":
            parts.append(f"-{power}")
        else:
            if len(c.monos) > 1:
                coeff = f"({coeff})"
            parts.append(f"{coeff} {power}" if latex else f"{coeff}*{power}")
    return " + ".join(parts).replace("+ -", "- ") if parts else "0"


def render_closed_form(cf: ClosedForm, beta_name: str, latex: bool = False) -> str:
    from .mlf import render_atom  # local import to keep module top light

    if not cf.summands:
        return "0"
    rendered = []
    for s in cf.summands:
        factors: list[str] = []
        combo_parts = []
        for c, atom in s.x_combo:
            coeff = c.render_latex() if latex else c.render_text()
            at = render_atom(atom, beta_name, latex)
            if at == "1":
                combo_parts.append(coeff)
            elif coeff == "1":
                combo_parts.append(at)
            elif coeff == "-1":
                combo_parts.append(f"-{at}")
            else:
                if len(c.monos) > 1:
                    coeff = f"({coeff})"
                combo_parts.append(f"{coeff} {at}" if latex else f"{coeff}*{at}")
        combo_txt = " + ".join(combo_parts).replace("+ -", "- ")
        if len(combo_parts) > 1:
            combo_txt = f"({combo_txt})" if not latex else f"\\left({combo_txt}\\right)"
        tpat = s.t_pattern
        spike = isinstance(tpat, FinitePoly) and len(tpat.terms) == 1 \
            and tpat.terms[0][0] == ZERO_EXP and tpat.terms[0][1].is_one
        if combo_txt and combo_txt != "1":
            factors.append(combo_txt)
        if not spike:
            factors.append(render_t_pattern(tpat, latex))
        if not factors:
            factors.append("1")
        sep = " " if latex else "*"
        rendered.append(sep.join(factors))
    return " + ".join(rendered).replace("+ -", "- ")
