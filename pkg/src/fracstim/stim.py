"""Iterative transform solver for fractional initial value problems.

Each equation has the normal form

    D_t^(g_i) u_i = G_i(u_1, ..., u_n)

with a Caputo time derivative of symbolic order ``g_i`` and a right-hand
side built from the expression nodes in :mod:`fracstim.expr`.  Writing
``S_r`` for the r-th partial sum, iterates follow the telescoped recurrence

    u^(0)_i   = sum_{k < m_i} t^k / k! * h_{i,k}(x)
    u^(1)_i   = I_t^(g_i) [ G_i(S_0) ]
    u^(r+1)_i = I_t^(g_i) [ G_i(S_r) - G_i(S_{r-1}) ]

which keeps every step a finite exact series operation: differences are
taken first, then integrated termwise.  Telescoping makes the partial sums
satisfy ``S_r = S_0 + I_t^g G(S_{r-1})`` identically, and
:func:`telescoping_holds` re-derives that from a finished report as a
self-check.

Window policy: x truncation follows a per-step schedule
``jx + (iters - r) * depth`` so the final window stays exact while early
states keep just enough extra weight for the stacked space derivatives;
t truncation is a flat window.  A run records whether any truncation event
dropped terms or any series carries finite validity; the exact-termination
flag (a genuinely zero iterate, so the series solution is a finite sum) is
only claimed when nothing was lost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import closedform
from .closedform import RecognitionResult
from .errors import ArityError
from .expr import (
    AtomCombo,
    EvalContext,
    Expr,
    IntPow,
    Prod,
    Scale,
    Sum,
    Unknown,
    XDeriv,
    deriv_depth,
    expr_eval,
)
from .fraccalc import _ceil_fraction, _check_time_order, rl_integral_t
from .fracseries import Exponent, FracSeries, make_exponent
from .mlf import atom_series
from .symcoeff import GammaScalar, OrderSymbol, ParamSymbol


@dataclass(frozen=True)
class ProblemSpec:
    """A validated fractional initial value problem."""

    name: str
    orders: tuple[OrderSymbol, ...]
    params: tuple[ParamSymbol, ...]
    beta: OrderSymbol
    gammas: tuple[Exponent, ...]
    equations: tuple[Expr, ...]
    initial: tuple[tuple[AtomCombo, ...], ...]
    unknowns: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.equations)
        if n == 0:
            raise ValueError("a problem needs at least one equation")
        if len(self.gammas) != n or len(self.initial) != n:
            raise ValueError("equations, time orders and initial data must align")
        names = [o.name for o in self.orders] + [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("order and parameter names must be unique")
        if self.beta not in self.orders:
            raise ValueError("the space order must be one of the declared orders")
        if not self.unknowns:
            object.__setattr__(self, "unknowns",
                               tuple(f"u{i+1}" for i in range(n)) if n > 1 else ("u",))
        if len(self.unknowns) != n:
            raise ValueError("unknown names must align with equations")
        probes = self.probes()
        for i, g in enumerate(self.gammas):
            _check_time_order(g)
            for sym, _ in g.mults:
                if sym not in {o.name for o in self.orders}:
                    raise ValueError(f"undeclared time order symbol {sym!r}")
                if sym == self.beta.name:
                    raise ValueError("time and space orders must use distinct symbols")
            gp = g.probe(probes)
            if not (0 < gp <= 2):
                raise ValueError(f"time order {g.render()} probes to {gp}, outside (0, 2]")
            if len(self.initial[i]) != self.m(i):
                raise ValueError(
                    f"{self.m(i)} initial conditions required for order {g.render()}, "
                    f"found {len(self.initial[i])}")
        for eq in self.equations:
            _check_expr(eq, n)

    def arity(self) -> int:
        return len(self.equations)

    def probes(self) -> dict[str, Fraction]:
        out = {o.name: o.probe for o in self.orders}
        out.update({p.name: p.probe for p in self.params})
        return out

    def m(self, i: int) -> int:
        return _ceil_fraction(self.gammas[i].probe(self.probes()))


def _check_expr(node: Expr, arity: int) -> None:
    if isinstance(node, Unknown):
        if not (1 <= node.index <= arity):
            raise ArityError(f"unknown u{node.index} out of range 1..{arity}")
    elif isinstance(node, XDeriv):
        if node.times < 1:
            raise ValueError("space derivative needs times >= 1")
        _check_expr(node.child, arity)
    elif isinstance(node, (Sum, Prod)):
        for c in node.children:
            _check_expr(c, arity)
    elif isinstance(node, (IntPow, Scale)):
        _check_expr(node.child, arity)


@dataclass
class SolutionReport:
    """Everything a solve produced, exact series first."""

    problem: ProblemSpec
    iters: int
    jx: int
    jt: int
    iterates: tuple[tuple[FracSeries, ...], ...]
    partial_sums: tuple[FracSeries, ...]
    exact_termination: int | None
    truncation_loss: bool
    recognitions: tuple[RecognitionResult | None, ...]
    diagnostics: tuple[str, ...] = field(default=())

    def to_json_obj(self) -> dict:
        p = self.problem
        return {
            "problem": p.name,
            "orders": {o.name: str(o.probe) for o in p.orders},
            "params": {q.name: str(q.probe) for q in p.params},
            "iters": self.iters,
            "jx": self.jx,
            "jt": self.jt,
            "exact_termination": self.exact_termination,
            "truncation_loss": self.truncation_loss,
            "unknowns": [
                {
                    "name": p.unknowns[i],
                    "time_order": self.problem.gammas[i].render(),
                    "iterates": [u.to_json_obj() for u in self.iterates[i]],
                    "partial_sum": self.partial_sums[i].to_json_obj(),
                    "closed_form": _recognition_json(self.recognitions[i], p.beta.name),
                }
                for i in range(p.arity())
            ],
            "diagnostics": list(self.diagnostics),
        }


def _recognition_json(rec: RecognitionResult | None, beta_name: str):
    if rec is None:
        return None
    return {
        "found": rec.closed_form is not None,
        "confirmed": rec.confirmed,
        "confirmations": rec.confirmations,
        "detail": rec.detail,
        "text": (closedform.render_closed_form(rec.closed_form, beta_name)
                 if rec.closed_form is not None else None),
    }


def initial_iterate(problem: ProblemSpec, atom_weight: int) -> list[FracSeries]:
    """u^(0)_i from the initial data, atoms expanded to the given x weight."""
    out = []
    for i in range(problem.arity()):
        u = FracSeries.zero()
        for k, combo in enumerate(problem.initial[i]):
            tk = make_exponent(k)
            factor = GammaScalar.rational(Fraction(1, math.factorial(k)))
            for coeff, atom in combo:
                profile = atom_series(atom, problem.beta, atom_weight)
                shifted = FracSeries(
                    {(xe, tk): c for (xe, te), c in profile.sorted_items()},
                    valid_x=profile.valid_x, valid_t=profile.valid_t)
                u = u + shifted.scale(coeff * factor)
        out.append(u)
    return out


def _truncate_tracked(s: FracSeries, jx, jt) -> tuple[FracSeries, bool]:
    out = s.truncate(jx=jx, jt=jt)
    return out, len(out) != len(s)


def _has_finite_validity(series_list: Sequence[FracSeries]) -> bool:
    return any(s.valid_x is not None or s.valid_t is not None for s in series_list)


def stim_solve(problem: ProblemSpec, *, iters: int = 6, jx: int = 12, jt: int = 8,
               recognize: bool = True, min_confirm: int = 4,
               seed: int = 74321) -> SolutionReport:
    """Run the iteration and (optionally) attempt closed-form recognition."""
    if iters < 1:
        raise ValueError("iters must be at least 1")
    n = problem.arity()
    depth = max((deriv_depth(g) for g in problem.equations), default=0)

    def sched_x(r: int) -> int:
        return jx + (iters - r) * depth

    diagnostics: list[str] = []
    u0 = initial_iterate(problem, jx + iters * depth)
    loss = _has_finite_validity(u0)
    state: list[FracSeries] = []
    for u in u0:
        tr, dropped = _truncate_tracked(u, sched_x(0), jt)
        loss |= dropped
        state.append(tr)
    iterates: list[list[FracSeries]] = [[s] for s in state]
    sums = list(state)
    prev_f: list[FracSeries] | None = None
    exact_termination: int | None = None

    for r in range(1, iters + 1):
        memo: dict = {}
        ctx = EvalContext(problem.beta, jx + iters * depth,
                          x_cap=sched_x(r), t_cap=jt)
        f = [expr_eval(problem.equations[i], sums, ctx, memo) for i in range(n)]
        diffs = f if prev_f is None else [f[i] - prev_f[i] for i in range(n)]
        if all(d.is_zero for d in diffs):
            if not loss and not _has_finite_validity(sums):
                exact_termination = r
            else:
                diagnostics.append(
                    f"iterate {r} vanished inside the truncation window; "
                    "not claimed as exact termination")
            for i in range(n):
                iterates[i].append(FracSeries.zero())
            break
        new = [rl_integral_t(diffs[i], problem.gammas[i]) for i in range(n)]
        for i in range(n):
            tr, dropped = _truncate_tracked(new[i], sched_x(r), jt)
            loss |= dropped
            iterates[i].append(tr)
            s, dropped2 = _truncate_tracked(sums[i] + tr, sched_x(r), jt)
            loss |= dropped2
            sums[i] = s
        prev_f = f

    partials = tuple(s.truncate(jx=jx, jt=jt) for s in sums)
    recognitions: list[RecognitionResult | None] = []
    if recognize:
        order_names = [o.name for o in problem.orders]
        param_names = [p.name for p in problem.params]
        for s in partials:
            recognitions.append(closedform.recognize(
                s, beta=problem.beta, order_names=order_names,
                param_names=param_names, jx=jx, jt=jt,
                min_confirm=min_confirm, seed=seed))
    else:
        recognitions = [None] * n

    return SolutionReport(
        problem=problem, iters=iters, jx=jx, jt=jt,
        iterates=tuple(tuple(us) for us in iterates),
        partial_sums=partials,
        exact_termination=exact_termination,
        truncation_loss=loss,
        recognitions=tuple(recognitions),
        diagnostics=tuple(diagnostics),
    )


def telescoping_holds(report: SolutionReport) -> bool:
    """Re-derive S_r = S_0 + I_t^g[G(S_{r-1})] from the stored iterates."""
    p = report.problem
    n = p.arity()
    depth = max((deriv_depth(g) for g in p.equations), default=0)

    def sched_x(r: int) -> int:
        return report.jx + (report.iters - r) * depth

    sums = [report.iterates[i][0] for i in range(n)]
    steps = len(report.iterates[0]) - 1
    for r in range(1, steps + 1):
        memo: dict = {}
        ctx = EvalContext(p.beta, report.jx + report.iters * depth,
                          x_cap=sched_x(r), t_cap=report.jt)
        for i in range(n):
            rhs = rl_integral_t(expr_eval(p.equations[i], sums, ctx, memo), p.gammas[i])
            rhs = (report.iterates[i][0] + rhs).truncate(jx=sched_x(r), jt=report.jt)
            lhs = (sums[i] + report.iterates[i][r]).truncate(jx=sched_x(r), jt=report.jt)
            if not lhs.same_terms(rhs):
                return False
        for i in range(n):
            sums[i] = (sums[i] + report.iterates[i][r]).truncate(jx=sched_x(r), jt=report.jt)
    return True


# -- report rendering -----------------------------------------------------------


def render_report(report: SolutionReport, fmt: str = "text") -> str:
    if fmt == "latex":
        return _render_report_any(report, latex=True)
    return _render_report_any(report, latex=False)


def _render_report_any(report: SolutionReport, latex: bool) -> str:
    p = report.problem
    lines: list[str] = []
    lines.append(f"problem: {p.name}")
    probes = ", ".join(f"{o.name}={o.probe}" for o in p.orders)
    if p.params:
        probes += "; " + ", ".join(f"{q.name}={q.probe}" for q in p.params)
    lines.append(f"probe values: {probes}")
    lines.append(f"windows: iters={report.iters} jx={report.jx} jt={report.jt}")
    for i in range(p.arity()):
        name = p.unknowns[i]
        lines.append("")
        lines.append(f"unknown {name} (time order {p.gammas[i].render(latex=latex)}):")
        for r, u in enumerate(report.iterates[i]):
            body = u.render_latex() if latex else u.render_text()
            lines.append(f"  {name}[{r}] = {body}")
        body = (report.partial_sums[i].render_latex() if latex
                else report.partial_sums[i].render_text())
        lines.append(f"  partial sum = {body}")
        rec = report.recognitions[i]
        if rec is not None:
            if rec.closed_form is not None:
                text = closedform.render_closed_form(rec.closed_form, p.beta.name, latex=latex)
                status = "confirmed" if rec.confirmed else f"candidate ({rec.detail})"
                lines.append(f"  closed form [{status}]: {text}")
            else:
                lines.append(f"  closed form: none ({rec.detail})")
    lines.append("")
    if report.exact_termination is not None:
        lines.append(f"exact termination at iterate {report.exact_termination}: "
                     "the series solution is a finite sum")
    else:
        lines.append("no exact termination detected within the computed iterates")
    if report.truncation_loss:
        lines.append("note: truncation dropped terms; series are exact only inside "
                     "their validity windows")
    for d in report.diagnostics:
        lines.append(f"note: {d}")
    return "\n".join(lines) + "\n"
