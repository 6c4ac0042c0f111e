"""Independent numerical checks for computed solutions.

Nothing here trusts the symbolic pipeline: Caputo derivatives are redone by
Gauss-Jacobi quadrature applied to plain float callables, the transform can
be spot-checked by Gauss-Laguerre quadrature, and residual grids substitute
a solution back into its equation pointwise.  Exact coefficientwise audits
against an externally claimed closed form live in :func:`discrepancy_report`.

Quadrature notes.  With s = t*v the derivative of order g with m = ceil(g)
reads

    D^g f(t) = t^(m-g)/Gamma(m-g) * integral_0^1 (1-v)^(m-g-1) f^(m)(t*v) dv

so Gauss-Jacobi nodes for the weight (1-v)^(m-g-1) absorb the right-endpoint
singularity.  When f^(m) itself behaves like v^sigma at the left endpoint
(always the case for fractional power series), passing ``left_exponent``
moves that behavior into the Jacobi weight as well; the remaining integrand
is then smooth and 64 nodes reach full accuracy.  Residual grids compute
sigma themselves from the term data they integrate.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import roots_genlaguerre, roots_jacobi, roots_laguerre

from .closedform import ClosedForm, FinitePoly, MLPattern, expand_closed_form
from .errors import DomainError
from .expr import EvalContext, deriv_depth, expr_eval
from .fraccalc import _ceil_fraction, caputo_t
from .fracseries import Exponent, FracSeries
from .mlf import atom_eval
from .stim import ProblemSpec, SolutionReport
from .symcoeff import GammaScalar

_TERM_CUTOFF = 1e-22


# -- quadrature primitives --------------------------------------------------------


def caputo_quadrature(fprime, alpha: float, t: float, nodes: int = 64, *,
                      left_exponent: float = 0.0) -> float:
    """Caputo derivative of order alpha in (0,1) from the first derivative.

    Parameters
    ----------
    fprime:
        Callable returning f'(s) for s in [0, t].
    alpha:
        Derivative order, strictly between 0 and 1.
    t:
        Evaluation point, > 0.
    nodes:
        Gauss-Jacobi node count.
    left_exponent:
        Known power behavior of f' at 0 (f'(s) ~ s^sigma).  Defaults to 0
        for f' smooth at the origin; pass the true sigma when f' has a
        fractional leading power, otherwise accuracy degrades to the
        algebraic rate of the unmatched singularity.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha = {alpha} outside (0, 1)")
    if t <= 0.0:
        raise DomainError("quadrature needs t > 0")
    if left_exponent <= -1.0:
        raise DomainError("left exponent must exceed -1 for an integrable kernel")
    z, w = roots_jacobi(nodes, -alpha, left_exponent)
    v = 0.5 * (1.0 + z)
    if left_exponent == 0.0:
        g = np.array([fprime(t * vi) for vi in v])
    else:
        g = np.array([fprime(t * vi) / vi ** left_exponent for vi in v])
    integral = 2.0 ** (alpha - left_exponent - 1.0) * float(w @ g)
    return t ** (1.0 - alpha) / math.gamma(1.0 - alpha) * integral


def numeric_sumudu(f, omega: float, nodes: int = 96, *,
                   left_exponent: float = 0.0) -> float:
    """Transform value at omega > 0 by Gauss-Laguerre quadrature.

    ``left_exponent`` plays the same role as in :func:`caputo_quadrature`:
    for f(t) ~ t^sigma at 0 the generalized weight makes the monomial case
    exact instead of algebraically convergent.
    """
    if omega <= 0.0:
        raise DomainError("the transform variable must be positive")
    if left_exponent == 0.0:
        tau, w = roots_laguerre(nodes)
        vals = np.array([f(omega * ti) for ti in tau])
    else:
        if left_exponent <= -1.0:
            raise DomainError("left exponent must exceed -1")
        tau, w = roots_genlaguerre(nodes, left_exponent)
        vals = np.array([f(omega * ti) / ti ** left_exponent for ti in tau])
    return float(w @ vals)


def _falling(e: float, m: int) -> float:
    out = 1.0
    for j in range(m):
        out *= e - j
    return out


def _caputo_power_terms(terms: Sequence[tuple[float, float]], gamma_f: float,
                        t: float, nodes: int) -> float:
    """Order-gamma derivative of f(t) = sum c * t^e given as (e, c) pairs.

    The m-th classical derivative is taken termwise in floats (exactly
    annihilating integer powers below m), then the fractional integral is
    done by sigma-matched Gauss-Jacobi quadrature.  Integer gamma falls back
    to the classical derivative.
    """
    m = int(math.ceil(gamma_f)) if gamma_f != int(gamma_f) else int(gamma_f)
    if m == 0:
        m = 1 if gamma_f > 0 else 0
    deriv = [(e - m, c * _falling(e, m)) for e, c in terms
             if abs(c * _falling(e, m)) > _TERM_CUTOFF]
    if not deriv:
        return 0.0
    if gamma_f == m:
        return sum(c * t ** e for e, c in deriv)
    sigma = min(e for e, _ in deriv)
    if sigma <= -1.0:
        raise DomainError("term exponents leave a non-integrable kernel")
    a = m - gamma_f - 1.0
    z, w = roots_jacobi(nodes, a, sigma)
    v = 0.5 * (1.0 + z)
    g = np.zeros_like(v)
    for e, c in deriv:
        g += (c * t ** e) * v ** (e - sigma)
    integral = 2.0 ** (-a - sigma - 1.0) * float(w @ g)
    return t ** (m - gamma_f) / math.gamma(m - gamma_f) * integral


# -- residual grids ---------------------------------------------------------------


@dataclass(frozen=True)
class PointResidual:
    x: float
    t: float
    lhs: tuple[float, ...]
    rhs: tuple[float, ...]

    @property
    def residual(self) -> tuple[float, ...]:
        return tuple(abs(a - b) for a, b in zip(self.lhs, self.rhs))


@dataclass(frozen=True)
class ResidualReport:
    problem: str
    mode: str
    method: str
    grid: tuple[tuple[float, float], ...]
    points: tuple[PointResidual, ...]
    per_equation_max: tuple[float, ...]

    @property
    def max_abs(self) -> float:
        return max(self.per_equation_max, default=0.0)

    def to_json_obj(self) -> dict:
        return {
            "problem": self.problem,
            "mode": self.mode,
            "method": self.method,
            "max_residual": self.max_abs,
            "per_equation_max": list(self.per_equation_max),
            "points": [
                {"x": p.x, "t": p.t, "lhs": list(p.lhs), "rhs": list(p.rhs),
                 "residual": list(p.residual)}
                for p in self.points
            ],
        }


def default_grid(nx: int = 5, nt: int = 5, lo: float = 0.1,
                 hi: float = 0.8) -> list[tuple[float, float]]:
    """Tensor grid away from t = 0 (the quadrature route needs t > 0)."""
    xs = [lo + (hi - lo) * i / (nx - 1) for i in range(nx)] if nx > 1 else [lo]
    ts = [lo + (hi - lo) * i / (nt - 1) for i in range(nt)] if nt > 1 else [lo]
    return [(x, t) for x in xs for t in ts]


def _xpow(x: float, p: float) -> float:
    if p == 0.0:
        return 1.0
    return x ** p


def _series_t_terms(series: FracSeries, assign: Mapping[str, Fraction],
                    x: float) -> list[tuple[float, float]]:
    """Collapse a two-variable series to t-power terms at fixed x."""
    acc: dict[float, float] = {}
    for c, px, pt in series.numeric_terms(assign):
        key = round(pt, 12)
        acc[key] = acc.get(key, 0.0) + c * _xpow(x, px)
    return [(e, c) for e, c in sorted(acc.items()) if abs(c) > _TERM_CUTOFF]


def _closed_form_t_terms(cf: ClosedForm, assign: Mapping[str, Fraction],
                         beta_probe: float, x: float,
                         t_max: float) -> list[tuple[float, float]]:
    """Collapse a closed form to t-power terms at fixed x.

    Mittag-Leffler patterns are expanded until the tail at t_max drops below
    cutoff, so the result is independent of any solver truncation window.
    """
    acc: dict[float, float] = {}

    def put(e: float, c: float) -> None:
        key = round(e, 12)
        acc[key] = acc.get(key, 0.0) + c

    for s in cf.summands:
        cx = s.coeff.evaluate(assign)
        profile = sum(c.evaluate(assign) * atom_eval(atom, assign, beta_probe, x)
                      for c, atom in s.x_combo) if s.x_combo else 1.0
        cx *= profile
        if cx == 0.0:
            continue
        if isinstance(s.t_pattern, FinitePoly):
            for te, c in s.t_pattern.terms:
                put(float(te.probe(assign)), cx * c.evaluate(assign))
        else:
            pat: MLPattern = s.t_pattern
            w = float(pat.step.probe(assign))
            rv = pat.rate.evaluate(assign)
            coef = 1.0
            for k in range(0, 400):
                e = k * w
                term = coef / math.gamma(e + 1.0)
                put(e, cx * term)
                if k > 2 and abs(cx * term) * t_max ** e < _TERM_CUTOFF:
                    break
                coef *= rv
    return [(e, c) for e, c in sorted(acc.items()) if abs(c) > _TERM_CUTOFF]


def residual_grid(problem: ProblemSpec, solution: SolutionReport,
                  grid: Sequence[tuple[float, float]], mode: str = "series", *,
                  probes: Mapping[str, Fraction] | None = None,
                  nodes: int = 64) -> ResidualReport:
    """Substitute the solution into its equation on a grid.

    series mode: left side by the exact term rule on the partial sums, right
    side by exact expression evaluation; both then read off in floats, so
    the residual isolates the truncation tail.  closedform mode: left side
    recomputed by quadrature from the recognized closed form when one was
    confirmed (falling back to the partial-sum term data otherwise), right
    side as in series mode; this route shares no code with the term rule.
    """
    if mode not in ("series", "closedform"):
        raise ValueError(f"unknown residual mode {mode!r}")
    assign = dict(problem.probes())
    if probes:
        for k, v in probes.items():
            assign[k] = Fraction(v)
    n = problem.arity()
    depth = max((deriv_depth(g) for g in problem.equations), default=0)
    ctx = EvalContext(problem.beta, solution.jx + solution.iters * depth)
    sums = list(solution.partial_sums)
    memo: dict = {}
    rhs_fns = [expr_eval(problem.equations[i], sums, ctx, memo).numeric_fn(assign)
               for i in range(n)]

    points: list[PointResidual] = []
    if mode == "series":
        method = "series-exact"
        lhs_fns = [caputo_t(sums[i], problem.gammas[i], assign).numeric_fn(assign)
                   for i in range(n)]
        for x, t in grid:
            lhs = tuple(f(x, t) for f in lhs_fns)
            rhs = tuple(f(x, t) for f in rhs_fns)
            points.append(PointResidual(x, t, lhs, rhs))
    else:
        method = "quadrature"
        beta_probe = float(assign[problem.beta.name])
        t_max = max((t for _, t in grid), default=1.0)
        gamma_f = [float(problem.gammas[i].probe(assign)) for i in range(n)]
        term_cache: dict[tuple[int, float], list[tuple[float, float]]] = {}

        def t_terms(i: int, x: float) -> list[tuple[float, float]]:
            key = (i, x)
            if key not in term_cache:
                rec = solution.recognitions[i]
                if rec is not None and rec.closed_form is not None and rec.confirmed:
                    term_cache[key] = _closed_form_t_terms(
                        rec.closed_form, assign, beta_probe, x, t_max)
                else:
                    term_cache[key] = _series_t_terms(sums[i], assign, x)
            return term_cache[key]

        for x, t in grid:
            lhs = tuple(_caputo_power_terms(t_terms(i, x), gamma_f[i], t, nodes)
                        for i in range(n))
            rhs = tuple(f(x, t) for f in rhs_fns)
            points.append(PointResidual(x, t, lhs, rhs))

    per_eq = tuple(
        max((p.residual[i] for p in points), default=0.0) for i in range(n))
    return ResidualReport(
        problem=problem.name, mode=mode, method=method,
        grid=tuple((float(x), float(t)) for x, t in grid),
        points=tuple(points), per_equation_max=per_eq)


# -- coefficientwise audits -------------------------------------------------------


@dataclass(frozen=True)
class DiffRow:
    x_exp: Exponent
    t_exp: Exponent
    computed: GammaScalar
    claimed: GammaScalar

    @property
    def difference(self) -> GammaScalar:
        return self.computed - self.claimed

    @property
    def weight(self) -> Fraction:
        return self.x_exp.weight() + self.t_exp.weight()


@dataclass(frozen=True)
class DifferenceTable:
    rows: tuple[DiffRow, ...]
    jx: int
    jt: int

    @property
    def empty(self) -> bool:
        return not self.rows

    def lowest(self) -> DiffRow | None:
        return self.rows[0] if self.rows else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x_exp", "t_exp", "computed", "claimed", "difference"])
        for r in self.rows:
            writer.writerow([
                r.x_exp.render() or "0", r.t_exp.render() or "0",
                r.computed.render_text(), r.claimed.render_text(),
                r.difference.render_text(),
            ])
        return buf.getvalue()

    def to_json_obj(self) -> dict:
        return {
            "jx": self.jx,
            "jt": self.jt,
            "rows": [
                {"x_exp": r.x_exp.render() or "0", "t_exp": r.t_exp.render() or "0",
                 "computed": r.computed.render_text(),
                 "claimed": r.claimed.render_text(),
                 "difference": r.difference.render_text()}
                for r in self.rows
            ],
        }


def discrepancy_report(computed: FracSeries, claimed: ClosedForm, beta, jx: int,
                       jt: int, *,
                       specialize: Mapping[str, int | Fraction] | None = None
                       ) -> DifferenceTable:
    """Exact coefficientwise difference between a series and a claimed form.

    The claim is expanded to the (jx, jt) window and both sides compared
    term by term; an empty table is exact agreement on the window.  Pass
    ``specialize`` (e.g. the space order at 1) to audit a reduction instead
    of the fully symbolic series.
    """
    a = computed.truncate(jx=jx, jt=jt)
    b = expand_closed_form(claimed, beta, jx, jt).truncate(jx=jx, jt=jt)
    if specialize:
        for name, value in specialize.items():
            a = a.specialize_order(name, value)
            b = b.specialize_order(name, value)
    keys = set(k for k, _ in a.sorted_items()) | set(k for k, _ in b.sorted_items())
    rows = []
    for xe, te in keys:
        ca = a.coeff(xe, te)
        cb = b.coeff(xe, te)
        if ca != cb:
            rows.append(DiffRow(xe, te, ca, cb))
    rows.sort(key=lambda r: (r.weight, r.x_exp.key(), r.t_exp.key()))
    return DifferenceTable(rows=tuple(rows), jx=jx, jt=jt)
