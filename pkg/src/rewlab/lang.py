"""Abstract syntax, parser and pretty-printer for the guarded-command dialect.

Programs are built from skip, assignment, (multi-)reward statements,
sequential composition, probabilistic choice {S1}[p]{S2}, conditionals and
while loops with optional invariant annotations. All program values live in
R>=0 + infinity; booleans are encoded as 0/1-valued variables (`true`/`false`
are accepted as sugar for 1/0 on assignment right-hand sides).

Logical parameters are declared with `param NAME (: range)?` and are never
assigned by programs; they are bound once per analysis run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union

from .extreal import ExtReal, ZERO, ONE, INF


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


class Expr:
    __slots__ = ()


class BExpr:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: ExtReal


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Monus(Expr):
    """Truncated subtraction max(0, left - right); inf - x = inf."""

    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    """Division, restricted to variable-free (constant/param) expressions."""

    left: Expr
    right: Expr


@dataclass(frozen=True)
class PowN(Expr):
    """base ** k for a literal natural exponent."""

    base: Expr
    exponent: int


@dataclass(frozen=True)
class GPow(Expr):
    """base ** exponent with a variable-free base and arbitrary exponent."""

    base: Expr
    exponent: Expr


@dataclass(frozen=True)
class Min(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Max(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Iverson(Expr):
    cond: BExpr


@dataclass(frozen=True)
class ExpScaled(Expr):
    """e^(scale * arg) with a variable-free, non-negative scale."""

    scale: Expr
    arg: Expr


@dataclass(frozen=True)
class BoolLit(BExpr):
    value: bool


@dataclass(frozen=True)
class Cmp(BExpr):
    op: str  # one of = != < <= > >=
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And(BExpr):
    left: BExpr
    right: BExpr


@dataclass(frozen=True)
class Or(BExpr):
    left: BExpr
    right: BExpr


@dataclass(frozen=True)
class Not(BExpr):
    arg: BExpr


class Stmt:
    __slots__ = ()


@dataclass(frozen=True)
class Skip(Stmt):
    pass


@dataclass(frozen=True)
class Assign(Stmt):
    var: str
    expr: Expr


@dataclass(frozen=True)
class Reward(Stmt):
    args: tuple[Expr, ...]


@dataclass(frozen=True, eq=False)
class Seq(Stmt):
    """Sequential composition; equality and hashing are modulo associativity."""

    first: Stmt
    second: Stmt

    def __eq__(self, other):
        if not isinstance(other, Seq):
            return NotImplemented
        return stmt_spine(self) == stmt_spine(other)

    def __hash__(self):
        return hash(stmt_spine(self))


def stmt_spine(s: Stmt) -> tuple[Stmt, ...]:
    """The Seq tree flattened to its statement sequence."""
    if isinstance(s, Seq):
        return stmt_spine(s.first) + stmt_spine(s.second)
    return (s,)


@dataclass(frozen=True)
class Prob(Stmt):
    prob: Expr
    left: Stmt
    right: Stmt


@dataclass(frozen=True)
class If(Stmt):
    cond: BExpr
    then: Stmt
    orelse: Stmt


@dataclass(frozen=True)
class While(Stmt):
    cond: BExpr
    body: Stmt
    invariant: Optional[Expr] = None
    # source position of the invariant annotation, if parsed from text
    invariant_loc: Optional[tuple[int, int]] = field(default=None, compare=False)


@dataclass(frozen=True)
class ParamDecl:
    name: str
    # closed interval [lo, hi] or integer range lo..hi; both optional
    lo: Optional[ExtReal] = None
    hi: Optional[ExtReal] = None
    integer: bool = False


@dataclass(frozen=True)
class Program:
    body: Stmt
    params: tuple[ParamDecl, ...] = ()
    reward_arity: int = 1

    @property
    def param_names(self) -> set[str]:
        return {d.name for d in self.params}


def seq(*stmts: Stmt) -> Stmt:
    """Right-nested sequential composition of one or more statements."""
    if not stmts:
        return Skip()
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def const(v) -> Const:
    return Const(v if isinstance(v, ExtReal) else ExtReal(v))


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


class UnboundVariableError(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return "unbound variable or parameter '%s'" % self.name


class State:
    """A total map from variable/parameter names to ExtReal values."""

    __slots__ = ("_map", "_hash")

    def __init__(self, mapping=None, **kw):
        items = dict(mapping or {})
        items.update(kw)
        self._map = {k: v if isinstance(v, ExtReal) else ExtReal(v) for k, v in items.items()}
        self._hash = None

    def get(self, name: str) -> ExtReal:
        try:
            return self._map[name]
        except KeyError:
            raise UnboundVariableError(name) from None

    def updated(self, name: str, value: ExtReal) -> "State":
        out = object.__new__(State)
        m = dict(self._map)
        m[name] = value
        out._map = m
        out._hash = None
        return out

    def as_dict(self) -> dict[str, ExtReal]:
        return dict(self._map)

    def __contains__(self, name: str) -> bool:
        return name in self._map

    def __eq__(self, other):
        return isinstance(other, State) and self._map == other._map

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._map.items()))
        return self._hash

    def __repr__(self):
        inner = ", ".join("%s=%s" % (k, v) for k, v in sorted(self._map.items()))
        return "State(%s)" % inner


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------


class ParseError(SyntaxError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__("%d:%d: %s" % (line, col, message))
        self.line = line
        self.col = col


_KEYWORDS = {
    "skip", "reward", "if", "else", "while", "invariant", "param",
    "not", "and", "or", "true", "false", "inf", "min", "max", "exp",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<number>\d+\.\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>:=|<=|>=|!=|\.\.|[-+*/^(){}\[\],;=<>:])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str  # number | ident | keyword | op | eof
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise ParseError("unexpected character %r" % source[pos], line, col)
        text = m.group()
        kind = m.lastgroup
        if kind != "ws":
            if kind == "ident" and text in _KEYWORDS:
                kind = "keyword"
            tokens.append(_Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent)
# ---------------------------------------------------------------------------

_CMP_OPS = {"=", "!=", "<", "<=", ">", ">="}


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.params: dict[str, ParamDecl] = {}
        self.reward_arity: Optional[int] = None

    # -- token helpers

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[_Token] = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    def accept(self, text: str) -> Optional[_Token]:
        tok = self.peek()
        if tok.text == text and tok.kind in ("op", "keyword"):
            return self.next()
        return None

    def expect(self, text: str) -> _Token:
        tok = self.accept(text)
        if tok is None:
            self.error("expected %r, found %r" % (text, self.peek().text or "end of input"))
        return tok

    # -- entry points

    def parse_program(self) -> Program:
        while self.peek().text == "param":
            self.parse_param_decl()
        body = self.parse_stmt_list()
        if self.peek().kind != "eof":
            self.error("unexpected %r after program" % self.peek().text)
        return Program(body=body, params=tuple(self.params.values()),
                       reward_arity=self.reward_arity or 1)

    def parse_param_decl(self):
        self.expect("param")
        name_tok = self.next()
        if name_tok.kind != "ident":
            self.error("expected parameter name", name_tok)
        lo = hi = None
        integer = False
        if self.accept(":"):
            if self.accept("["):
                lo = self.parse_const_value()
                self.expect(",")
                hi = self.parse_const_value()
                self.expect("]")
            else:
                lo = self.parse_const_value()
                self.expect("..")
                hi = self.parse_const_value()
                integer = True
        if name_tok.text in self.params:
            self.error("duplicate parameter '%s'" % name_tok.text, name_tok)
        self.params[name_tok.text] = ParamDecl(name_tok.text, lo, hi, integer)
        self.accept(";")

    def parse_const_value(self) -> ExtReal:
        e = self.parse_expr()
        try:
            from .expectation import evaluate

            return evaluate(e, State({}))
        except Exception:
            self.error("expected a constant")

    def parse_stmt_list(self) -> Stmt:
        stmts = [self.parse_stmt()]
        while self.accept(";"):
            if self.peek().text in ("}", "") or self.peek().kind == "eof":
                break  # tolerate a trailing separator
            stmts.append(self.parse_stmt())
        return seq(*stmts)

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        if tok.text == "skip":
            self.next()
            return Skip()
        if tok.text == "reward":
            return self.parse_reward()
        if tok.text == "if":
            return self.parse_if()
        if tok.text == "while":
            return self.parse_while()
        if tok.text == "{":
            return self.parse_prob_choice()
        if tok.kind == "ident":
            return self.parse_assign()
        self.error("expected a statement, found %r" % (tok.text or "end of input"))

    def parse_assign(self) -> Stmt:
        name_tok = self.next()
        if name_tok.text in self.params:
            self.error("cannot assign to parameter '%s'" % name_tok.text, name_tok)
        self.expect(":=")
        tok = self.peek()
        if tok.text in ("true", "false"):  # boolean sugar
            self.next()
            return Assign(name_tok.text, const(1 if tok.text == "true" else 0))
        return Assign(name_tok.text, self.parse_expr())

    def parse_reward(self) -> Stmt:
        kw = self.expect("reward")
        self.expect("(")
        args = [self.parse_expr()]
        while self.accept(","):
            args.append(self.parse_expr())
        self.expect(")")
        if self.reward_arity is None:
            self.reward_arity = len(args)
        elif self.reward_arity != len(args):
            self.error(
                "reward arity mismatch: expected %d argument(s), found %d"
                % (self.reward_arity, len(args)),
                kw,
            )
        return Reward(tuple(args))

    def parse_if(self) -> Stmt:
        self.expect("if")
        cond = self.parse_bexpr()
        self.expect("{")
        then = self.parse_stmt_list()
        self.expect("}")
        orelse: Stmt = Skip()
        if self.accept("else"):
            self.expect("{")
            orelse = self.parse_stmt_list()
            self.expect("}")
        return If(cond, then, orelse)

    def parse_while(self) -> Stmt:
        self.expect("while")
        cond = self.parse_bexpr()
        invariant = None
        invariant_loc = None
        if self.accept("invariant"):
            tok = self.peek()
            invariant_loc = (tok.line, tok.col)
            invariant = self.parse_expr()
        self.expect("{")
        body = self.parse_stmt_list()
        self.expect("}")
        return While(cond, body, invariant, invariant_loc)

    def parse_prob_choice(self) -> Stmt:
        self.expect("{")
        left = self.parse_stmt_list()
        self.expect("}")
        bracket = self.expect("[")
        prob = self.parse_expr()
        self.expect("]")
        if isinstance(prob, Const) and not (ZERO <= prob.value <= ONE):
            self.error("probability literal %s outside [0, 1]" % prob.value, bracket)
        if _has_var(prob):
            self.error("probability must be a constant/parameter expression", bracket)
        if isinstance(prob, Param):
            decl = self.params[prob.name]
            if decl.lo is not None and (decl.lo < ZERO or decl.hi > ONE):
                self.error(
                    "parameter '%s' is used as a probability but its declared "
                    "range is not within [0, 1]" % prob.name,
                    bracket,
                )
        self.expect("{")
        right = self.parse_stmt_list()
        self.expect("}")
        return Prob(prob, left, right)

    # -- boolean expressions

    def parse_bexpr(self) -> BExpr:
        out = self.parse_bconj()
        while self.accept("or"):
            out = Or(out, self.parse_bconj())
        return out

    def parse_bconj(self) -> BExpr:
        out = self.parse_batom()
        while self.accept("and"):
            out = And(out, self.parse_batom())
        return out

    def parse_batom(self) -> BExpr:
        tok = self.peek()
        if tok.text == "not":
            self.next()
            return Not(self.parse_batom())
        if tok.text == "true":
            self.next()
            return BoolLit(True)
        if tok.text == "false":
            self.next()
            return BoolLit(False)
        if tok.text == "(":
            # either a parenthesized bexpr or a parenthesized arithmetic
            # operand of a comparison; try bexpr first by lookahead
            save = self.pos
            try:
                self.next()
                inner = self.parse_bexpr()
                self.expect(")")
                return inner
            except ParseError:
                self.pos = save
        left = self.parse_expr()
        op = self.peek()
        if op.text not in _CMP_OPS:
            self.error("expected comparison operator, found %r" % (op.text or "end of input"))
        self.next()
        right = self.parse_expr()
        return Cmp(op.text, left, right)

    # -- arithmetic expressions

    def parse_expr(self) -> Expr:
        out = self.parse_term()
        while True:
            if self.accept("+"):
                out = Add(out, self.parse_term())
            elif self.accept("-"):
                out = Monus(out, self.parse_term())
            else:
                return out

    def parse_term(self) -> Expr:
        out = self.parse_power()
        while True:
            if self.accept("*"):
                out = Mul(out, self.parse_power())
            elif self.peek().text == "/":
                slash = self.next()
                right = self.parse_power()
                if _has_var(right):
                    self.error("division by a variable is not supported", slash)
                if isinstance(out, Const) and isinstance(right, Const):
                    if right.value.is_zero:
                        self.error("division by zero", slash)
                    out = Const(out.value / right.value)
                else:
                    out = Div(out, right)
            else:
                return out

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek().text == "^":
            caret = self.next()
            exp_tok = self.peek()
            if exp_tok.kind == "number" and "." not in exp_tok.text:
                self.next()
                return PowN(base, int(exp_tok.text))
            exponent = self.parse_atom()
            if _has_var(base):
                self.error(
                    "exponent must be a literal natural, or the base must be "
                    "a constant/parameter expression",
                    caret,
                )
            return GPow(base, exponent)
        return base

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.next()
            return const(ExtReal(Fraction(tok.text)))
        if tok.text == "inf":
            self.next()
            return const(INF)
        if tok.text == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.text == "[":
            self.next()
            cond = self.parse_bexpr()
            self.expect("]")
            return Iverson(cond)
        if tok.text in ("min", "max"):
            self.next()
            self.expect("(")
            a = self.parse_expr()
            self.expect(",")
            b = self.parse_expr()
            self.expect(")")
            return Min(a, b) if tok.text == "min" else Max(a, b)
        if tok.text == "exp":
            self.next()
            self.expect("(")
            scale = self.parse_expr()
            comma = self.expect(",")
            if _has_var(scale):
                self.error("exp scale must be a constant/parameter expression", comma)
            arg = self.parse_expr()
            self.expect(")")
            return ExpScaled(scale, arg)
        if tok.kind == "ident":
            self.next()
            if tok.text in self.params:
                return Param(tok.text)
            return Var(tok.text)
        self.error("expected an expression, found %r" % (tok.text or "end of input"))


def _has_var(e: Expr) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Const) or isinstance(e, Param):
        return False
    if isinstance(e, (Add, Monus, Mul, Div, Min, Max)):
        return _has_var(e.left) or _has_var(e.right)
    if isinstance(e, PowN):
        return _has_var(e.base)
    if isinstance(e, GPow):
        return _has_var(e.base) or _has_var(e.exponent)
    if isinstance(e, ExpScaled):
        return _has_var(e.scale) or _has_var(e.arg)
    if isinstance(e, Iverson):
        return _bexpr_has_var(e.cond)
    raise TypeError("unknown expression node %r" % (e,))


def _bexpr_has_var(b: BExpr) -> bool:
    if isinstance(b, BoolLit):
        return False
    if isinstance(b, Cmp):
        return _has_var(b.left) or _has_var(b.right)
    if isinstance(b, (And, Or)):
        return _bexpr_has_var(b.left) or _bexpr_has_var(b.right)
    if isinstance(b, Not):
        return _bexpr_has_var(b.arg)
    raise TypeError("unknown boolean node %r" % (b,))


def parse(text: str) -> Program:
    """Parse a program file; raises ParseError with line/column on failure."""
    return _Parser(text).parse_program()


def parse_expr(text: str, params: set[str] = frozenset()) -> Expr:
    """Parse a single expression (used for posts, bounds and invariants)."""
    p = _Parser(text)
    p.params = {name: ParamDecl(name) for name in params}
    out = p.parse_expr()
    if p.peek().kind != "eof":
        p.error("unexpected %r after expression" % p.peek().text)
    return out


def parse_bexpr(text: str, params: set[str] = frozenset()) -> BExpr:
    p = _Parser(text)
    p.params = {name: ParamDecl(name) for name in params}
    out = p.parse_bexpr()
    if p.peek().kind != "eof":
        p.error("unexpected %r after condition" % p.peek().text)
    return out


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------

# precedence levels: additive 1, multiplicative 2, power 3, atom 4
def _fmt_expr(e: Expr, level: int = 0) -> str:
    if isinstance(e, Const):
        s = str(e.value)
        # a fractional literal p/q reads as a division: same precedence rules
        return "(%s)" % s if "/" in s and level > 2 else s
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Add):
        s = "%s + %s" % (_fmt_expr(e.left, 1), _fmt_expr(e.right, 2))
        return "(%s)" % s if level > 1 else s
    if isinstance(e, Monus):
        s = "%s - %s" % (_fmt_expr(e.left, 1), _fmt_expr(e.right, 2))
        return "(%s)" % s if level > 1 else s
    if isinstance(e, Mul):
        s = "%s * %s" % (_fmt_expr(e.left, 2), _fmt_expr(e.right, 3))
        return "(%s)" % s if level > 2 else s
    if isinstance(e, Div):
        s = "%s / %s" % (_fmt_expr(e.left, 2), _fmt_expr(e.right, 3))
        return "(%s)" % s if level > 2 else s
    if isinstance(e, PowN):
        s = "%s ^ %d" % (_fmt_expr(e.base, 4), e.exponent)
        return "(%s)" % s if level > 3 else s
    if isinstance(e, GPow):
        s = "%s ^ %s" % (_fmt_expr(e.base, 4), _fmt_expr(e.exponent, 4))
        return "(%s)" % s if level > 3 else s
    if isinstance(e, Min):
        return "min(%s, %s)" % (_fmt_expr(e.left), _fmt_expr(e.right))
    if isinstance(e, Max):
        return "max(%s, %s)" % (_fmt_expr(e.left), _fmt_expr(e.right))
    if isinstance(e, Iverson):
        return "[%s]" % _fmt_bexpr(e.cond)
    if isinstance(e, ExpScaled):
        return "exp(%s, %s)" % (_fmt_expr(e.scale), _fmt_expr(e.arg))
    raise TypeError("unknown expression node %r" % (e,))


def _fmt_bexpr(b: BExpr, level: int = 0) -> str:
    if isinstance(b, BoolLit):
        return "true" if b.value else "false"
    if isinstance(b, Cmp):
        return "%s %s %s" % (_fmt_expr(b.left), b.op, _fmt_expr(b.right))
    if isinstance(b, Or):
        s = "%s or %s" % (_fmt_bexpr(b.left, 1), _fmt_bexpr(b.right, 2))
        return "(%s)" % s if level > 1 else s
    if isinstance(b, And):
        s = "%s and %s" % (_fmt_bexpr(b.left, 2), _fmt_bexpr(b.right, 3))
        return "(%s)" % s if level > 2 else s
    if isinstance(b, Not):
        inner = _fmt_bexpr(b.arg, 4)
        if not isinstance(b.arg, (BoolLit,)):
            inner = "(%s)" % inner
        return "not %s" % inner
    raise TypeError("unknown boolean node %r" % (b,))


def _stmt_seq(s: Stmt) -> list[Stmt]:
    if isinstance(s, Seq):
        return _stmt_seq(s.first) + _stmt_seq(s.second)
    return [s]


def _fmt_stmt(s: Stmt, indent: int) -> str:
    pad = "    " * indent
    if isinstance(s, Skip):
        return pad + "skip"
    if isinstance(s, Assign):
        return pad + "%s := %s" % (s.var, _fmt_expr(s.expr))
    if isinstance(s, Reward):
        return pad + "reward(%s)" % ", ".join(_fmt_expr(a) for a in s.args)
    if isinstance(s, Prob):
        left = _fmt_block(s.left, indent)
        right = _fmt_block(s.right, indent)
        return pad + "%s [%s] %s" % (left, _fmt_expr(s.prob), right)
    if isinstance(s, If):
        out = pad + "if %s {\n%s\n%s}" % (_fmt_bexpr(s.cond), _fmt_body(s.then, indent + 1), pad)
        if not isinstance(s.orelse, Skip):
            out += " else {\n%s\n%s}" % (_fmt_body(s.orelse, indent + 1), pad)
        return out
    if isinstance(s, While):
        head = "while %s" % _fmt_bexpr(s.cond)
        if s.invariant is not None:
            head += " invariant %s" % _fmt_expr(s.invariant)
        return pad + "%s {\n%s\n%s}" % (head, _fmt_body(s.body, indent + 1), pad)
    if isinstance(s, Seq):
        return _fmt_body(s, indent)
    raise TypeError("unknown statement node %r" % (s,))


def _fmt_block(s: Stmt, indent: int) -> str:
    parts = _stmt_seq(s)
    if len(parts) == 1 and isinstance(parts[0], (Skip, Assign, Reward)):
        return "{ %s }" % _fmt_stmt(parts[0], 0)
    return "{\n%s\n%s}" % (_fmt_body(s, indent + 1), "    " * indent)


def _fmt_body(s: Stmt, indent: int) -> str:
    return ";\n".join(_fmt_stmt(part, indent) for part in _stmt_seq(s))


def format_expr(e: Expr) -> str:
    return _fmt_expr(e)


def format_bexpr(b: BExpr) -> str:
    return _fmt_bexpr(b)


def pretty_print(program: Union[Program, Stmt]) -> str:
    """Canonical text form; parse(pretty_print(p)) is structurally equal to p."""
    if isinstance(program, Stmt):
        return _fmt_body(program, 0) + "\n"
    lines = []
    for d in program.params:
        if d.integer:
            lines.append("param %s : %s..%s" % (d.name, d.lo, d.hi))
        elif d.lo is not None:
            lines.append("param %s : [%s, %s]" % (d.name, d.lo, d.hi))
        else:
            lines.append("param %s" % d.name)
    if lines:
        lines.append("")
    lines.append(_fmt_body(program.body, 0))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Variables
# ---------------------------------------------------------------------------


def expr_vars(e: Expr, out: set[str]):
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, (Add, Monus, Mul, Div, Min, Max)):
        expr_vars(e.left, out)
        expr_vars(e.right, out)
    elif isinstance(e, PowN):
        expr_vars(e.base, out)
    elif isinstance(e, GPow):
        expr_vars(e.base, out)
        expr_vars(e.exponent, out)
    elif isinstance(e, ExpScaled):
        expr_vars(e.scale, out)
        expr_vars(e.arg, out)
    elif isinstance(e, Iverson):
        bexpr_vars(e.cond, out)


def expr_params(e: Expr, out: set[str]):
    if isinstance(e, Param):
        out.add(e.name)
    elif isinstance(e, (Add, Monus, Mul, Div, Min, Max)):
        expr_params(e.left, out)
        expr_params(e.right, out)
    elif isinstance(e, PowN):
        expr_params(e.base, out)
    elif isinstance(e, GPow):
        expr_params(e.base, out)
        expr_params(e.exponent, out)
    elif isinstance(e, ExpScaled):
        expr_params(e.scale, out)
        expr_params(e.arg, out)
    elif isinstance(e, Iverson):
        for sub in _bexpr_cmps(e.cond):
            expr_params(sub.left, out)
            expr_params(sub.right, out)


def _bexpr_cmps(b: BExpr) -> Iterator[Cmp]:
    if isinstance(b, Cmp):
        yield b
    elif isinstance(b, (And, Or)):
        yield from _bexpr_cmps(b.left)
        yield from _bexpr_cmps(b.right)
    elif isinstance(b, Not):
        yield from _bexpr_cmps(b.arg)


def bexpr_vars(b: BExpr, out: set[str]):
    for cmp in _bexpr_cmps(b):
        expr_vars(cmp.left, out)
        expr_vars(cmp.right, out)


def stmt_vars(s: Stmt, out: set[str]):
    if isinstance(s, Assign):
        out.add(s.var)
        expr_vars(s.expr, out)
    elif isinstance(s, Reward):
        for a in s.args:
            expr_vars(a, out)
    elif isinstance(s, Seq):
        stmt_vars(s.first, out)
        stmt_vars(s.second, out)
    elif isinstance(s, Prob):
        expr_vars(s.prob, out)
        stmt_vars(s.left, out)
        stmt_vars(s.right, out)
    elif isinstance(s, If):
        bexpr_vars(s.cond, out)
        stmt_vars(s.then, out)
        stmt_vars(s.orelse, out)
    elif isinstance(s, While):
        bexpr_vars(s.cond, out)
        if s.invariant is not None:
            expr_vars(s.invariant, out)
        stmt_vars(s.body, out)


def free_vars(program: Union[Program, Stmt]) -> set[str]:
    """All program-variable names occurring in the program (params excluded)."""
    out: set[str] = set()
    stmt_vars(program.body if isinstance(program, Program) else program, out)
    return out


def fresh_var(program: Union[Program, Stmt], hint: str) -> str:
    """A name not occurring in the program: hint, hint', hint'', ..."""
    used = free_vars(program)
    if isinstance(program, Program):
        used |= program.param_names
    name = hint
    while name in used:
        name += "'"
    return name
