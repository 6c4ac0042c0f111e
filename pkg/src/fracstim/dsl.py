"""Problem-file parser and renderer.

A ``.fps`` file declares a fractional initial value problem in five blocks,
one entry per line::

    orders {
      alpha = 7/10
      beta = 9/10
    }
    params {
      zeta = 2
      mu = 1/3
      eta = 8/3 where eta = 4*zeta - 16*mu
    }
    unknowns { u }
    equations {
      D(u, t, 2*alpha) = zeta*D(u, x, 2*beta) - u^2
    }
    initial {
      u = 1*ML(2)
      u, dt = 1 = 0
    }

Numbers are exact rationals (``8/3``), ``#`` starts a line comment, and
entries end at the end of a line.  Initial-condition atoms (``1``, ``X^j``,
``ML(r)``, ``SIN(r)``, ``COS(r)``) live implicitly in powers of ``x^beta``
for the declared space order; ``dt = k`` gives the k-th time derivative at
t = 0.  A ``where`` clause removes its parameter: the declared rational is
checked against the constraint evaluated at the other probe values, then
every occurrence of the name is replaced by the constraint expression, so
downstream symbolic work sees the relation and not a free symbol.

Parsing is a hand-rolled recursive descent over a small token stream; all
failures carry 1-based positions.  :func:`render_problem` writes a spec back
out in the same grammar, and parsing the rendered text reproduces the spec.
"""

from __future__ import annotations

import re
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

from .errors import SourceError
from .expr import Const, Expr, IntPow, Prod, Scale, Sum, Unknown, XDeriv
from .fracseries import Exponent, make_exponent
from .mlf import FracCos, FracSin, MittagLeffler, Power, XAtom
from .stim import AtomCombo, ProblemSpec
from .symcoeff import GammaScalar, OrderSymbol, ParamSymbol

_BLOCKS = ("orders", "params", "unknowns", "equations", "initial")
_RESERVED = set(_BLOCKS) | {"D", "X", "ML", "SIN", "COS", "dt", "t", "x", "where"}

_TOKEN_RE = re.compile(r"""
    (?P<number>\d+(?:/\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[{}(),=+\-*^])
  | (?P<bad>\S)
""", re.VERBOSE)


class Token(NamedTuple):
    kind: str
    value: object
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for m in _TOKEN_RE.finditer(line):
            col = m.start() + 1
            if m.lastgroup == "number":
                out.append(Token("number", Fraction(m.group()), lineno, col))
            elif m.lastgroup == "name":
                out.append(Token("name", m.group(), lineno, col))
            elif m.lastgroup == "op":
                out.append(Token(m.group(), m.group(), lineno, col))
            else:
                raise SourceError(f"unexpected character {m.group()!r}", lineno, col)
        if line.strip():
            out.append(Token("newline", None, lineno, len(raw) + 1))
    last = out[-1] if out else None
    out.append(Token("eof", None, last.line if last else 1,
                     (last.col + 1) if last else 1))
    return out


class _Parser:
    """Token cursor with error helpers; newlines are skipped on demand."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, skip_newlines: bool = True) -> Token:
        i = self.pos
        while skip_newlines and self.tokens[i].kind == "newline":
            i += 1
        return self.tokens[i]

    def advance(self, skip_newlines: bool = True) -> Token:
        while skip_newlines and self.tokens[self.pos].kind == "newline":
            self.pos += 1
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise SourceError(f"found {_describe(tok)}", tok.line, tok.col,
                              expected=(what or kind,))
        return self.advance()

    def at_entry_end(self) -> bool:
        return self.peek(skip_newlines=False).kind in ("newline", "}", "eof")

    def end_entry(self) -> None:
        tok = self.peek(skip_newlines=False)
        if tok.kind == "newline":
            self.advance(skip_newlines=False)
        elif tok.kind not in ("}", "eof"):
            raise SourceError(f"found {_describe(tok)}", tok.line, tok.col,
                              expected=("end of line", "}"))


def _describe(tok: Token) -> str:
    if tok.kind == "eof":
        return "end of input"
    if tok.kind == "newline":
        return "end of line"
    if tok.kind in ("name", "number"):
        return f"{tok.kind} {tok.value!r}" if tok.kind == "name" else f"number {tok.value}"
    return repr(tok.value)


# -- raw (unresolved) expression nodes -------------------------------------------
# Names cannot be classified until every block is read, so expressions parse
# into small tagged tuples first and resolve in a second pass.

_Raw = tuple


def _parse_expr(p: _Parser) -> _Raw:
    terms: list[tuple[int, _Raw]] = []
    sign = 1
    if p.peek().kind == "-":
        p.advance()
        sign = -1
    terms.append((sign, _parse_term(p)))
    while p.peek(skip_newlines=False).kind in ("+", "-"):
        op = p.advance(skip_newlines=False)
        terms.append((1 if op.kind == "+" else -1, _parse_term(p)))
    return ("sum", terms)


def _parse_term(p: _Parser) -> _Raw:
    factors = [_parse_factor(p)]
    while p.peek(skip_newlines=False).kind == "*":
        p.advance(skip_newlines=False)
        factors.append(_parse_factor(p))
    return ("prod", factors)


def _parse_factor(p: _Parser) -> _Raw:
    tok = p.peek()
    if tok.kind == "number":
        p.advance()
        node: _Raw = ("num", tok.value)
    elif tok.kind == "(":
        p.advance()
        node = _parse_expr(p)
        p.expect(")")
    elif tok.kind == "name" and tok.value == "D":
        node = _parse_deriv(p)
    elif tok.kind == "name":
        p.advance()
        node = ("name", tok.value, tok.line, tok.col)
    else:
        raise SourceError(f"found {_describe(tok)}", tok.line, tok.col,
                          expected=("number", "name", "D(", "("))
    while p.peek(skip_newlines=False).kind == "^":
        caret = p.advance(skip_newlines=False)
        ptok = p.expect("number", "integer exponent")
        if ptok.value.denominator != 1 or ptok.value < 0:
            raise SourceError("exponent must be a nonnegative integer",
                              ptok.line, ptok.col)
        node = ("pow", node, int(ptok.value), caret.line, caret.col)
    return node


def _parse_deriv(p: _Parser) -> _Raw:
    dtok = p.expect("name", "D")
    p.expect("(")
    child = _parse_expr(p)
    p.expect(",")
    var = p.expect("name", "t or x")
    if var.value not in ("t", "x"):
        raise SourceError(f"derivative variable must be t or x, found {var.value!r}",
                          var.line, var.col)
    p.expect(",")
    order = _parse_order_term(p)
    p.expect(")")
    return ("d", child, var.value, order, dtok.line, dtok.col)


def _parse_order_term(p: _Parser) -> tuple[str, int, int, int]:
    """[integer *] ordername, returned as (name, multiple, line, col)."""
    tok = p.peek()
    mult = 1
    if tok.kind == "number":
        p.advance()
        if tok.value.denominator != 1 or tok.value < 1:
            raise SourceError("order multiple must be a positive integer",
                              tok.line, tok.col)
        mult = int(tok.value)
        p.expect("*")
    name = p.expect("name", "order name")
    return (name.value, mult, name.line, name.col)


# -- block parsing ----------------------------------------------------------------


def parse(text: str, name: str = "problem") -> ProblemSpec:
    """Parse problem text; raises :class:`SourceError` on any failure."""
    p = _Parser(_tokenize(text))
    blocks: dict[str, object] = {}
    positions: dict[str, Token] = {}
    while p.peek().kind != "eof":
        tok = p.expect("name", "block keyword")
        if tok.value not in _BLOCKS:
            raise SourceError(f"unknown block {tok.value!r}", tok.line, tok.col,
                              expected=_BLOCKS)
        if tok.value in blocks:
            raise SourceError(f"duplicate block {tok.value!r}", tok.line, tok.col)
        positions[tok.value] = tok
        p.expect("{")
        parser = {
            "orders": _parse_orders,
            "params": _parse_params,
            "unknowns": _parse_unknowns,
            "equations": _parse_equations,
            "initial": _parse_initial,
        }[tok.value]
        blocks[tok.value] = parser(p)
        p.expect("}")
    eof = p.peek()
    for required in ("orders", "unknowns", "equations", "initial"):
        if required not in blocks:
            raise SourceError(f"missing {required!r} block", eof.line, eof.col)
    return _assemble(name, blocks, positions)


def parse_file(path: str | Path) -> ProblemSpec:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), name=path.stem)


def _parse_orders(p: _Parser) -> list[tuple[str, Fraction, Token]]:
    out = []
    while p.peek().kind != "}":
        nm = p.expect("name", "order name")
        p.expect("=")
        val = p.expect("number", "rational probe value")
        out.append((nm.value, val.value, nm))
        p.end_entry()
    return out


def _parse_params(p: _Parser) -> list[tuple[str, Fraction, _Raw | None, Token]]:
    out = []
    while p.peek().kind != "}":
        nm = p.expect("name", "parameter name")
        p.expect("=")
        sign = 1
        if p.peek().kind == "-":
            p.advance()
            sign = -1
        val = p.expect("number", "rational probe value")
        constraint: _Raw | None = None
        if p.peek(skip_newlines=False).kind == "name" and \
                p.peek(skip_newlines=False).value == "where":
            p.advance(skip_newlines=False)
            again = p.expect("name", "the same parameter name")
            if again.value != nm.value:
                raise SourceError(
                    f"where clause must restate {nm.value!r}, found {again.value!r}",
                    again.line, again.col)
            p.expect("=")
            constraint = _parse_expr(p)
        out.append((nm.value, sign * val.value, constraint, nm))
        p.end_entry()
    return out


def _parse_unknowns(p: _Parser) -> list[Token]:
    out = []
    while p.peek().kind != "}":
        out.append(p.expect("name", "unknown name"))
        if p.peek(skip_newlines=False).kind == ",":
            p.advance(skip_newlines=False)
    return out


def _parse_equations(p: _Parser) -> list[tuple]:
    out = []
    while p.peek().kind != "}":
        head = p.peek()
        d = _parse_deriv(p)
        _, child, var, order, line, col = d
        if var != "t":
            raise SourceError("an equation head must be a time derivative",
                              line, col)
        if child[0] != "sum" or len(child[1]) != 1 or child[1][0][0] != 1 \
                or child[1][0][1][0] != "prod" or len(child[1][0][1][1]) != 1 \
                or child[1][0][1][1][0][0] != "name":
            raise SourceError("an equation head must be D(name, t, order)",
                              head.line, head.col)
        lhs_name = child[1][0][1][1][0]
        p.expect("=")
        rhs = _parse_expr(p)
        out.append((lhs_name, order, rhs, head))
        p.end_entry()
    return out


def _parse_initial(p: _Parser) -> list[tuple]:
    out = []
    while p.peek().kind != "}":
        nm = p.expect("name", "unknown name")
        k = 0
        if p.peek().kind == ",":
            p.advance()
            dt = p.expect("name", "dt")
            if dt.value != "dt":
                raise SourceError(f"found {dt.value!r}", dt.line, dt.col,
                                  expected=("dt",))
            p.expect("=")
            ktok = p.expect("number", "derivative index")
            if ktok.value.denominator != 1 or ktok.value < 0:
                raise SourceError("derivative index must be a nonnegative integer",
                                  ktok.line, ktok.col)
            k = int(ktok.value)
        p.expect("=")
        combo = _parse_icexpr(p)
        out.append((nm, k, combo))
        p.end_entry()
    return out


def _parse_icexpr(p: _Parser) -> list[tuple]:
    """Sum of products; each product holds scalars and at most one atom."""
    terms = []
    sign = 1
    if p.peek().kind == "-":
        p.advance()
        sign = -1
    terms.append((sign, _parse_icterm(p)))
    while p.peek(skip_newlines=False).kind in ("+", "-"):
        op = p.advance(skip_newlines=False)
        terms.append((1 if op.kind == "+" else -1, _parse_icterm(p)))
    return terms


def _parse_icterm(p: _Parser) -> list[tuple]:
    factors = [_parse_icfactor(p)]
    while p.peek(skip_newlines=False).kind == "*":
        p.advance(skip_newlines=False)
        factors.append(_parse_icfactor(p))
    return factors


def _parse_icfactor(p: _Parser) -> tuple:
    tok = p.peek()
    if tok.kind == "number":
        p.advance()
        return ("num", tok.value)
    if tok.kind != "name":
        raise SourceError(f"found {_describe(tok)}", tok.line, tok.col,
                          expected=("number", "parameter", "atom"))
    if tok.value == "X":
        p.advance()
        j = 1
        if p.peek(skip_newlines=False).kind == "^":
            p.advance(skip_newlines=False)
            jt = p.expect("number", "integer power")
            if jt.value.denominator != 1 or jt.value < 0:
                raise SourceError("atom power must be a nonnegative integer",
                                  jt.line, jt.col)
            j = int(jt.value)
        return ("atom_power", j, tok.line, tok.col)
    if tok.value in ("ML", "SIN", "COS"):
        p.advance()
        p.expect("(")
        rate = _parse_expr(p)
        p.expect(")")
        return ("atom_rate", tok.value, rate, tok.line, tok.col)
    p.advance()
    return ("name", tok.value, tok.line, tok.col)


# -- assembly ---------------------------------------------------------------------


def _exact_value(gs: GammaScalar, probes: dict[str, Fraction]) -> Fraction:
    """Exact rational value of a Gamma-free scalar at probe values."""
    total = Fraction(0)
    for mono in gs.monos:
        if mono.gammas:
            raise ValueError("constraint expressions cannot contain Gamma factors")
        v = mono.coef
        for nm, k in mono.params:
            v *= probes[nm] ** k
        total += v
    return total


def _assemble(name: str, blocks: dict, positions: dict) -> ProblemSpec:
    order_rows = blocks["orders"]
    param_rows = blocks.get("params", [])
    unknown_toks = blocks["unknowns"]
    eq_rows = blocks["equations"]
    ic_rows = blocks["initial"]

    orders: list[OrderSymbol] = []
    seen: dict[str, Token] = {}
    for nm, val, tok in order_rows:
        _check_fresh(nm, tok, seen)
        try:
            orders.append(OrderSymbol.make(nm, val))
        except ValueError as e:
            raise SourceError(str(e), tok.line, tok.col) from e
    order_names = {o.name for o in orders}

    # Parameters resolve in declaration order so a where clause may use any
    # previously declared parameter, constrained ones included.
    params: list[ParamSymbol] = []
    substitution: dict[str, GammaScalar] = {}
    probes: dict[str, Fraction] = {o.name: o.probe for o in orders}
    pending: list[tuple[str, Fraction, _Raw, Token]] = []
    for nm, val, constraint, tok in param_rows:
        _check_fresh(nm, tok, seen)
        probes[nm] = val
        if constraint is None:
            try:
                params.append(ParamSymbol.make(nm, val))
            except ValueError as e:
                raise SourceError(str(e), tok.line, tok.col) from e
        else:
            pending.append((nm, val, constraint, tok))
    param_names = {q.name for q in params}
    for nm, val, constraint, tok in pending:
        scalar = _scalar_from_raw(constraint, param_names, substitution, order_names)
        got = _exact_value(scalar, probes)
        if got != val:
            raise SourceError(
                f"parameter {nm} declares {val} but its constraint gives {got}",
                tok.line, tok.col)
        substitution[nm] = scalar

    unknowns: list[str] = []
    for tok in unknown_toks:
        _check_fresh(tok.value, tok, seen)
        unknowns.append(tok.value)
    index = {nm: i + 1 for i, nm in enumerate(unknowns)}

    # Equations: one per unknown, resolved expressions, single space order.
    space_name: str | None = None
    space_uses: list[tuple[str, int, int]] = []

    def note_space(nm: str, line: int, col: int) -> None:
        nonlocal space_name
        if nm not in order_names:
            raise SourceError(f"undeclared order {nm!r}", line, col)
        if space_name is None:
            space_name = nm
        elif space_name != nm:
            raise SourceError(
                f"space derivatives must share one order symbol; "
                f"saw {space_name!r} and {nm!r}", line, col)
        space_uses.append((nm, line, col))

    by_unknown: dict[str, tuple[Exponent, Expr]] = {}
    for lhs_name, order, rhs, head in eq_rows:
        _, u_name, u_line, u_col = lhs_name
        if u_name not in index:
            raise SourceError(f"equation for undeclared unknown {u_name!r}",
                              u_line, u_col)
        if u_name in by_unknown:
            raise SourceError(f"second equation for {u_name!r}", u_line, u_col)
        o_name, mult, o_line, o_col = order
        if o_name not in order_names:
            raise SourceError(f"undeclared order {o_name!r}", o_line, o_col)
        gamma = make_exponent(0, {o_name: mult})
        expr = _expr_from_raw(rhs, index, param_names, substitution,
                              order_names, note_space)
        by_unknown[u_name] = (gamma, expr)
    for nm in unknowns:
        if nm not in by_unknown:
            tok = positions["equations"]
            raise SourceError(f"no equation for unknown {nm!r}", tok.line, tok.col)

    if space_name is None:
        time_syms = {s for gamma, _ in by_unknown.values() for s, _ in gamma.mults}
        free = [o for o in orders if o.name not in time_syms]
        if not free:
            tok = positions["orders"]
            raise SourceError("no order symbol left to act as the space order",
                              tok.line, tok.col)
        space_name = free[0].name
    beta = next(o for o in orders if o.name == space_name)

    # Initial data, grouped per unknown and derivative index.
    ic_map: dict[str, dict[int, AtomCombo]] = {nm: {} for nm in unknowns}
    for nm_tok, k, combo_raw in ic_rows:
        nm = nm_tok.value
        if nm not in index:
            raise SourceError(f"initial condition for undeclared unknown {nm!r}",
                              nm_tok.line, nm_tok.col)
        if k in ic_map[nm]:
            raise SourceError(f"duplicate initial condition for {nm!r} at dt = {k}",
                              nm_tok.line, nm_tok.col)
        ic_map[nm][k] = _combo_from_raw(combo_raw, param_names, substitution,
                                        order_names)

    gammas = tuple(by_unknown[nm][0] for nm in unknowns)
    equations = tuple(by_unknown[nm][1] for nm in unknowns)
    initial: list[tuple[AtomCombo, ...]] = []
    ic_tok = positions["initial"]
    for i, nm in enumerate(unknowns):
        m = _ceil_probe(gammas[i], probes)
        have = ic_map[nm]
        for k in have:
            if k >= m:
                raise SourceError(
                    f"{nm!r} has order {gammas[i].render()} needing {m} conditions; "
                    f"dt = {k} is out of range", ic_tok.line, ic_tok.col)
        missing = [k for k in range(m) if k not in have]
        if missing:
            raise SourceError(
                f"{m} initial conditions required for order {gammas[i].render()}, "
                f"found {len(have)}", ic_tok.line, ic_tok.col)
        initial.append(tuple(have[k] for k in range(m)))

    try:
        return ProblemSpec(
            name=name, orders=tuple(orders), params=tuple(params), beta=beta,
            gammas=gammas, equations=equations, initial=tuple(initial),
            unknowns=tuple(unknowns))
    except ValueError as e:
        tok = positions.get("equations", positions["orders"])
        raise SourceError(str(e), tok.line, tok.col) from e


def _ceil_probe(gamma: Exponent, probes: dict[str, Fraction]) -> int:
    g = gamma.probe(probes)
    return int(-(-g.numerator // g.denominator))


def _check_fresh(nm: str, tok: Token, seen: dict[str, Token]) -> None:
    if nm in _RESERVED:
        raise SourceError(f"{nm!r} is reserved", tok.line, tok.col)
    if nm in seen:
        raise SourceError(f"{nm!r} already declared", tok.line, tok.col)
    seen[nm] = tok


# -- raw -> resolved --------------------------------------------------------------


def _scalar_from_raw(node: _Raw, param_names: set[str],
                     substitution: dict[str, GammaScalar],
                     order_names: set[str]) -> GammaScalar:
    """Resolve a raw expression that must be a pure parameter scalar."""
    kind = node[0]
    if kind == "num":
        return GammaScalar.rational(node[1])
    if kind == "name":
        _, nm, line, col = node
        if nm in substitution:
            return substitution[nm]
        if nm in param_names:
            return GammaScalar.param(nm)
        if nm in order_names:
            raise SourceError("order symbols cannot appear in scalar expressions",
                              line, col)
        raise SourceError(f"unknown symbol {nm!r}", line, col)
    if kind == "sum":
        total = GammaScalar.zero()
        for sign, term in node[1]:
            v = _scalar_from_raw(term, param_names, substitution, order_names)
            total = total + v if sign > 0 else total - v
        return total
    if kind == "prod":
        total = GammaScalar.one()
        for factor in node[1]:
            total = total * _scalar_from_raw(factor, param_names, substitution,
                                             order_names)
        return total
    if kind == "pow":
        base = _scalar_from_raw(node[1], param_names, substitution, order_names)
        return base ** node[2]
    _, _, _, order, line, col = node
    raise SourceError("derivatives cannot appear in scalar expressions", line, col)


def _expr_from_raw(node: _Raw, index: dict[str, int], param_names: set[str],
                   substitution: dict[str, GammaScalar], order_names: set[str],
                   note_space) -> Expr:
    """Resolve a raw equation right-hand side into an expression tree.

    Constant subtrees fold into scalars as they resolve, so a parsed tree
    carries Const/Scale nodes only where a series value is actually scaled.
    """

    def build(n: _Raw) -> Expr:
        kind = n[0]
        if kind == "num":
            return Const(GammaScalar.rational(n[1]))
        if kind == "name":
            _, nm, line, col = n
            if nm in index:
                return Unknown(index[nm])
            if nm in substitution:
                return Const(substitution[nm])
            if nm in param_names:
                return Const(GammaScalar.param(nm))
            if nm in order_names:
                raise SourceError("order symbols cannot appear as factors",
                                  line, col)
            raise SourceError(f"unknown symbol {nm!r}", line, col)
        if kind == "sum":
            children: list[Expr] = []
            const = GammaScalar.zero()
            for sign, term in n[1]:
                child = build(term)
                if sign < 0:
                    child = _negate(child)
                if isinstance(child, Const):
                    const = const + child.value
                else:
                    children.append(child)
            if not const.is_zero or not children:
                children.append(Const(const))
            return children[0] if len(children) == 1 else Sum(tuple(children))
        if kind == "prod":
            factor = GammaScalar.one()
            series: list[Expr] = []
            for raw_f in n[1]:
                child = build(raw_f)
                if isinstance(child, Const):
                    factor = factor * child.value
                elif isinstance(child, Scale):
                    factor = factor * child.factor
                    series.append(child.child)
                else:
                    series.append(child)
            if not series or factor.is_zero:
                return Const(factor if not series else GammaScalar.zero())
            core = series[0] if len(series) == 1 else Prod(tuple(series))
            return core if factor.is_one else Scale(factor, core)
        if kind == "pow":
            _, base_raw, power, line, col = n
            base = build(base_raw)
            if power == 0:
                return Const(GammaScalar.one())
            if power == 1:
                return base
            if isinstance(base, Const):
                return Const(base.value ** power)
            if isinstance(base, Scale):
                return Scale(base.factor ** power, IntPow(base.child, power))
            return IntPow(base, power)
        # derivative
        _, child_raw, var, order, line, col = n
        if var == "t":
            raise SourceError("time derivatives may only head an equation",
                              line, col)
        o_name, mult, o_line, o_col = order
        note_space(o_name, o_line, o_col)
        return XDeriv(build(child_raw), mult)

    return build(node)


def _negate(e: Expr) -> Expr:
    minus_one = -GammaScalar.one()
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Scale):
        factor = -e.factor
        return e.child if factor.is_one else Scale(factor, e.child)
    return Scale(minus_one, e)


def _combo_from_raw(terms: list, param_names: set[str],
                    substitution: dict[str, GammaScalar],
                    order_names: set[str]) -> AtomCombo:
    out: list[tuple[GammaScalar, XAtom]] = []
    for sign, factors in terms:
        coeff = GammaScalar.rational(sign)
        atom: XAtom | None = None
        for f in factors:
            if f[0] == "num":
                coeff = coeff * GammaScalar.rational(f[1])
            elif f[0] == "name":
                coeff = coeff * _scalar_from_raw(f, param_names, substitution,
                                                 order_names)
            else:
                if atom is not None:
                    raise SourceError("at most one atom per initial-data term",
                                      f[-2], f[-1])
                atom = _atom_from_raw(f, param_names, substitution, order_names)
        if atom is None:
            atom = Power(0)
        if coeff.is_zero:
            continue
        merged = False
        for i, (c0, a0) in enumerate(out):
            if a0 == atom:
                out[i] = (c0 + coeff, a0)
                merged = True
                break
        if not merged:
            out.append((coeff, atom))
    return tuple((c, a) for c, a in out if not c.is_zero)


def _atom_from_raw(f: tuple, param_names: set[str],
                   substitution: dict[str, GammaScalar],
                   order_names: set[str]) -> XAtom:
    if f[0] == "atom_power":
        return Power(f[1])
    _, which, rate_raw, line, col = f
    rate = _scalar_from_raw(rate_raw, param_names, substitution, order_names)
    try:
        if which == "ML":
            return MittagLeffler(rate)
        if which == "SIN":
            return FracSin(rate)
        return FracCos(rate)
    except ValueError as e:
        raise SourceError(str(e), line, col) from e


# -- rendering --------------------------------------------------------------------


def render_problem(p: ProblemSpec) -> str:
    """Write a spec back out in the file grammar (parseable, stable order)."""
    lines: list[str] = []
    lines.append("orders {")
    for o in p.orders:
        lines.append(f"  {o.name} = {o.probe}")
    lines.append("}")
    if p.params:
        lines.append("params {")
        for q in p.params:
            lines.append(f"  {q.name} = {q.probe}")
        lines.append("}")
    lines.append("unknowns { " + " ".join(p.unknowns) + " }")
    lines.append("equations {")
    for i, eq in enumerate(p.equations):
        head = _render_order_head(p.unknowns[i], p.gammas[i])
        lines.append(f"  {head} = {_render_expr_dsl(eq, p)}")
    lines.append("}")
    lines.append("initial {")
    for i, conds in enumerate(p.initial):
        for k, combo in enumerate(conds):
            prefix = p.unknowns[i] if k == 0 else f"{p.unknowns[i]}, dt = {k}"
            lines.append(f"  {prefix} = {_render_combo(combo)}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _render_order_head(unknown: str, gamma: Exponent) -> str:
    (sym, k), = gamma.mults
    order = sym if k == 1 else f"{k}*{sym}"
    return f"D({unknown}, t, {order})"


def _render_scalar_dsl(gs: GammaScalar) -> str:
    """Gamma-free scalar in file syntax; sums come back parenthesized."""
    parts: list[str] = []
    for mono in gs.monos:
        if mono.gammas:
            raise ValueError("Gamma factors cannot be rendered in file syntax")
        bits = [str(mono.coef)]
        for nm, k in mono.params:
            bits.append(nm if k == 1 else f"{nm}^{k}")
        parts.append("*".join(bits))
    if not parts:
        return "0"
    body = parts[0]
    for part in parts[1:]:
        body += " + " + part if not part.startswith("-") else " - " + part[1:]
    return body if len(parts) == 1 else f"({body})"


def _render_expr_dsl(e: Expr, p: ProblemSpec) -> str:
    if isinstance(e, Const):
        return _render_scalar_dsl(e.value)
    if isinstance(e, Unknown):
        return p.unknowns[e.index - 1]
    if isinstance(e, XDeriv):
        order = p.beta.name if e.times == 1 else f"{e.times}*{p.beta.name}"
        return f"D({_render_expr_dsl(e.child, p)}, x, {order})"
    if isinstance(e, Sum):
        parts = [_render_expr_dsl(c, p) for c in e.children]
        body = parts[0]
        for part in parts[1:]:
            body += " - " + part[1:] if part.startswith("-") else " + " + part
        return body
    if isinstance(e, Prod):
        return "*".join(_wrap(c, p) for c in e.children)
    if isinstance(e, IntPow):
        return f"{_wrap(e.child, p)}^{e.power}"
    if isinstance(e, Scale):
        return f"{_render_scalar_dsl(e.factor)}*{_wrap(e.child, p)}"
    raise TypeError(f"cannot render {e!r}")


def _wrap(e: Expr, p: ProblemSpec) -> str:
    body = _render_expr_dsl(e, p)
    if isinstance(e, (Sum, Scale)) or (isinstance(e, Const) and "-" in body):
        return f"({body})"
    return body


def _render_combo(combo: AtomCombo) -> str:
    if not combo:
        return "0"
    parts = []
    for coeff, atom in combo:
        c = _render_scalar_dsl(coeff)
        a = _render_atom_dsl(atom)
        if a == "1":
            parts.append(c)
        elif c == "1":
            parts.append(a)
        elif c == "-1":
            parts.append(f"-{a}")
        else:
            parts.append(f"{c}*{a}")
    body = parts[0]
    for part in parts[1:]:
        body += " - " + part[1:] if part.startswith("-") else " + " + part
    return body


def _render_atom_dsl(atom: XAtom) -> str:
    if isinstance(atom, Power):
        return "1" if atom.j == 0 else f"X^{atom.j}"
    rate = _render_scalar_dsl(atom.rate)
    if isinstance(atom, MittagLeffler):
        return f"ML({rate})"
    if isinstance(atom, FracSin):
        return f"SIN({rate})"
    return f"COS({rate})"
