"""Right-hand-side expression trees over the series state.

An equation's right-hand side is a small algebraic tree whose leaves are
exact scalars, known spatial profiles and references to unknowns.  Evaluation
maps a tuple of current series (one per unknown) to a series, with space
derivatives applied sequentially; there is no chain or Leibniz rule anywhere,
products are evaluated first and then differentiated termwise.

``deriv_depth`` is the largest number of stacked single-order space
derivatives along any root-to-leaf path.  It controls how much extra x-weight
the solver must carry so that the requested output window stays exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .errors import ArityError
from .fraccalc import caputo_x
from .fracseries import FracSeries
from .mlf import FracCos, FracSin, MittagLeffler, Power, XAtom, atom_series, render_atom
from .symcoeff import GammaScalar, OrderSymbol

AtomCombo = tuple[tuple[GammaScalar, XAtom], ...]


@dataclass(frozen=True)
class Const:
    value: GammaScalar


@dataclass(frozen=True)
class KnownX:
    """A fixed spatial profile, a scalar combination of x-side atoms."""

    combo: AtomCombo


@dataclass(frozen=True)
class Unknown:
    """Reference to unknown number ``index`` (1-based)."""

    index: int


@dataclass(frozen=True)
class XDeriv:
    child: "Expr"
    times: int


@dataclass(frozen=True)
class Sum:
    children: tuple["Expr", ...]


@dataclass(frozen=True)
class Prod:
    children: tuple["Expr", ...]


@dataclass(frozen=True)
class IntPow:
    child: "Expr"
    power: int


@dataclass(frozen=True)
class Scale:
    factor: GammaScalar
    child: "Expr"


Expr = Union[Const, KnownX, Unknown, XDeriv, Sum, Prod, IntPow, Scale]


@dataclass(frozen=True)
class EvalContext:
    """What expression evaluation needs besides the state itself.

    ``x_cap``/``t_cap`` are optional weight windows for intermediate results.
    Terms above a cap cannot influence the capped output window (x weights
    only rise through products and fall through derivatives, which lift the
    cap for their subtree; t weights only rise), so dropping them early is
    exact within the window while keeping nonlinear products small.  Caps
    are off by default: plain evaluation keeps every term it can prove.
    """

    beta: OrderSymbol
    atom_weight: int
    x_cap: int | None = None
    t_cap: int | None = None


def expr_eval(node: Expr, state: Sequence[FracSeries], ctx: EvalContext,
              _memo: dict | None = None, _lift: int = 0) -> FracSeries:
    """Evaluate a tree at the given state; repeated subtrees are shared.

    ``_lift`` is the total space-derivative multiplicity applied above the
    current node; it widens the node's x cap so the derivative's weight drop
    lands back inside the requested window.
    """
    memo = {} if _memo is None else _memo
    key = (node, _lift)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(node, Const):
        out = FracSeries.constant(node.value)
    elif isinstance(node, KnownX):
        out = FracSeries.zero()
        for coeff, atom in node.combo:
            out = out + atom_series(atom, ctx.beta, ctx.atom_weight).scale(coeff)
    elif isinstance(node, Unknown):
        if not (1 <= node.index <= len(state)):
            raise ArityError(f"unknown u{node.index} out of range 1..{len(state)}")
        out = state[node.index - 1]
    elif isinstance(node, XDeriv):
        child = expr_eval(node.child, state, ctx, memo, _lift + node.times)
        out = caputo_x(child, ctx.beta, node.times)
    elif isinstance(node, Sum):
        out = FracSeries.zero()
        for child in node.children:
            out = out + expr_eval(child, state, ctx, memo, _lift)
    elif isinstance(node, Prod):
        out = FracSeries.constant(GammaScalar.one())
        for child in node.children:
            out = out * expr_eval(child, state, ctx, memo, _lift)
            out = _capped(out, ctx, _lift)
    elif isinstance(node, IntPow):
        if node.power < 2:
            raise ValueError("IntPow is for powers >= 2")
        base = expr_eval(node.child, state, ctx, memo, _lift)
        out = base
        for _ in range(node.power - 1):
            out = _capped(out * base, ctx, _lift)
    elif isinstance(node, Scale):
        out = expr_eval(node.child, state, ctx, memo, _lift).scale(node.factor)
    else:
        raise TypeError(f"not an expression node: {node!r}")
    out = _capped(out, ctx, _lift)
    memo[key] = out
    return out


def _capped(s: FracSeries, ctx: EvalContext, lift: int) -> FracSeries:
    if ctx.x_cap is None and ctx.t_cap is None:
        return s
    jx = None if ctx.x_cap is None else ctx.x_cap + lift
    return s.truncate(jx=jx, jt=ctx.t_cap)


def deriv_depth(node: Expr) -> int:
    """Largest stacked space-derivative count along any path."""
    if isinstance(node, XDeriv):
        return node.times + deriv_depth(node.child)
    if isinstance(node, (Sum, Prod)):
        return max((deriv_depth(c) for c in node.children), default=0)
    if isinstance(node, IntPow):
        return deriv_depth(node.child)
    if isinstance(node, Scale):
        return deriv_depth(node.child)
    return 0


def substitute_params(node: Expr, mapping: Mapping[str, GammaScalar]) -> Expr:
    """Eliminate constrained parameters from every scalar in the tree."""
    if isinstance(node, Const):
        return Const(node.value.substitute_params(mapping))
    if isinstance(node, KnownX):
        return KnownX(tuple((c.substitute_params(mapping), _subs_atom(a, mapping))
                            for c, a in node.combo))
    if isinstance(node, Unknown):
        return node
    if isinstance(node, XDeriv):
        return XDeriv(substitute_params(node.child, mapping), node.times)
    if isinstance(node, Sum):
        return Sum(tuple(substitute_params(c, mapping) for c in node.children))
    if isinstance(node, Prod):
        return Prod(tuple(substitute_params(c, mapping) for c in node.children))
    if isinstance(node, IntPow):
        return IntPow(substitute_params(node.child, mapping), node.power)
    if isinstance(node, Scale):
        return Scale(node.factor.substitute_params(mapping),
                     substitute_params(node.child, mapping))
    raise TypeError(f"not an expression node: {node!r}")


def _subs_atom(atom: XAtom, mapping: Mapping[str, GammaScalar]) -> XAtom:
    if isinstance(atom, Power):
        return atom
    rate = atom.rate.substitute_params(mapping)
    return type(atom)(rate)


def render_expr(node: Expr, beta_name: str, unknowns: Sequence[str],
                latex: bool = False) -> str:
    """Human-readable form, mostly for reports and --dump-ast companions."""
    txt, _ = _render(node, beta_name, unknowns, latex)
    return txt


def _render(node: Expr, b: str, unknowns: Sequence[str], latex: bool) -> tuple[str, bool]:
    """Returns (text, atomic) where atomic means no top-level + or -."""
    if isinstance(node, Const):
        txt = node.value.render_latex() if latex else node.value.render_text()
        return txt, len(node.value.monos) <= 1 and not txt.startswith("-")
    if isinstance(node, KnownX):
        parts = []
        for c, a in node.combo:
            atom = render_atom(a, b, latex)
            coeff = c.render_latex() if latex else c.render_text()
            if atom == "1":
                parts.append(coeff)
            elif coeff == "1":
                parts.append(atom)
            elif coeff == "-1":
                parts.append(f"-{atom}")
            else:
                parts.append(f"{coeff} {atom}" if latex else f"{coeff}*{atom}")
        txt = " + ".join(parts).replace("+ -", "- ")
        return txt, len(parts) <= 1 and not txt.startswith("-")
    if isinstance(node, Unknown):
        return unknowns[node.index - 1], True
    if isinstance(node, XDeriv):
        inner, _ = _render(node.child, b, unknowns, latex)
        order = latex_order(node.times, b, latex)
        if latex:
            return f"D_x^{{{order}}}\\left({inner}\\right)", True
        return f"D({inner}, x, {order})", True
    if isinstance(node, Sum):
        parts = [_render(c, b, unknowns, latex)[0] for c in node.children]
        txt = " + ".join(parts).replace("+ -", "- ")
        return txt, len(parts) <= 1
    if isinstance(node, Prod):
        parts = []
        for c in node.children:
            t, atomic = _render(c, b, unknowns, latex)
            parts.append(t if atomic else f"({t})")
        sep = " " if latex else "*"
        return sep.join(parts), True
    if isinstance(node, IntPow):
        t, atomic = _render(node.child, b, unknowns, latex)
        base = t if atomic else f"({t})"
        return (f"{base}^{{{node.power}}}" if latex else f"{base}^{node.power}"), True
    if isinstance(node, Scale):
        t, atomic = _render(node.child, b, unknowns, latex)
        body = t if atomic else f"({t})"
        f = node.factor
        if f.is_one:
            return t, atomic
        if f.as_rational() == -1:
            return f"-{body}", False
        coeff = f.render_latex() if latex else f.render_text()
        if len(f.monos) > 1 or coeff.startswith("-"):
            coeff = f"({coeff})"
        return (f"{coeff} {body}" if latex else f"{coeff}*{body}"), True
    raise TypeError(f"not an expression node: {node!r}")


def latex_order(times: int, b: str, latex: bool) -> str:
    if times == 1:
        return b
    return f"{times}{b}" if latex else f"{times}*{b}"


# -- JSON (for --dump-ast) ----------------------------------------------------


def expr_to_json(node: Expr) -> dict:
    if isinstance(node, Const):
        return {"node": "const", "value": node.value.to_json_obj()}
    if isinstance(node, KnownX):
        return {"node": "known_x",
                "combo": [{"coeff": c.to_json_obj(), "atom": _atom_json(a)}
                          for c, a in node.combo]}
    if isinstance(node, Unknown):
        return {"node": "unknown", "index": node.index}
    if isinstance(node, XDeriv):
        return {"node": "x_deriv", "times": node.times, "child": expr_to_json(node.child)}
    if isinstance(node, Sum):
        return {"node": "sum", "children": [expr_to_json(c) for c in node.children]}
    if isinstance(node, Prod):
        return {"node": "prod", "children": [expr_to_json(c) for c in node.children]}
    if isinstance(node, IntPow):
        return {"node": "int_pow", "power": node.power, "child": expr_to_json(node.child)}
    if isinstance(node, Scale):
        return {"node": "scale", "factor": node.factor.to_json_obj(),
                "child": expr_to_json(node.child)}
    raise TypeError(f"not an expression node: {node!r}")


def _atom_json(atom: XAtom) -> dict:
    if isinstance(atom, Power):
        return {"atom": "power", "j": atom.j}
    kind = {MittagLeffler: "ml", FracSin: "sin", FracCos: "cos"}[type(atom)]
    return {"atom": kind, "rate": atom.rate.to_json_obj()}
