"""The `ecdsl` formulation language: extraction, parsing, compilation.

A model adapter answers formulation prompts with a fenced text document in
a closed, line-oriented grammar.  Parsing surfaces *syntactic* failures;
compiling a parsed document into an OptInstance surfaces *semantic* ones.
That two-way split is load-bearing: the pipeline's debug prompts embed the
category, code, span and message of the first failure, and nothing else.

Grammar (one statement per line, blank lines ignored):

    doc      := header stmt+
    header   := 'problem' STRING
    stmt     := var | param | minimize | subject
    var      := 'var' IDENT ('[' INT ']')? bound*
    bound    := ('>=' | '<=') NUMBER
    param    := 'param' IDENT ('[' INT ']')? '=' (NUMBER | '[' NUMBER (',' NUMBER)* ']')
    minimize := 'minimize' expr
    subject  := 'subject' expr REL NUMBER          REL := '<=' | '==' | '>='
    expr     := term (('+'|'-') term)*
    term     := factor ('*' factor)*
    factor   := NUMBER | atom | 'abs(' expr ')' | 'max0(' expr ')'
              | 'sq(' atom ')' | 'sum(' IDENT ',' expr ')'
    atom     := IDENT ('[' (INT|IDENT) ']')?

At most one factor of a product may involve variables (linearity); sums
bind their index over the shared length of the vectors they touch; sq is
rejected under sum; sums do not nest.  NUMBER is unsigned in expressions
(signs live on '+'/'-'), and may be signed in bounds, param literals and
constraint right-hand sides.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .ir import Constraint, ConvexTerm, LinExpr, OptInstance, VarDecl, VarRef, validate

SYNTACTIC = "syntactic"
SEMANTIC = "semantic"


class DslError(Exception):
    """A categorized failure with a source span.

    category 'syntactic': raised by extract_block and parse.
    category 'semantic':  raised by compile_doc.
    """

    def __init__(self, category: str, code: str, span: Tuple[int, int], message: str):
        super().__init__(f"{category} {code} at {span[0]}:{span[1]}: {message}")
        self.category = category
        self.code = code
        self.span = span
        self.message = message

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "code": self.code,
            "line": self.span[0],
            "column": self.span[1],
            "message": self.message,
        }


# ---------------------------------------------------------------------------
# Code-block extraction

FENCE_RE = re.compile(r"^```([A-Za-z0-9_-]*)\s*$")


def extract_block(raw_model_output: str) -> str:
    """Text of the fenced formulation block inside a model reply.

    Fences are lines of three backticks, optionally tagged.  With several
    complete blocks, a single block tagged `ecdsl` wins; otherwise the
    choice is ambiguous.  Leading/trailing blank lines are trimmed.
    """
    lines = raw_model_output.splitlines()
    blocks: List[Tuple[str, int, List[str]]] = []  # (tag, open line no, body)
    open_tag: Optional[str] = None
    open_line = 0
    body: List[str] = []
    for i, line in enumerate(lines, start=1):
        m = FENCE_RE.match(line.strip())
        if not m:
            if open_tag is not None:
                body.append(line)
            continue
        if open_tag is None:
            open_tag = m.group(1)
            open_line = i
            body = []
        else:
            blocks.append((open_tag, open_line, body))
            open_tag = None
    if not blocks:
        raise DslError(SYNTACTIC, "NoBlockFound", (1, 1), "no fenced formulation block in the reply")
    if len(blocks) > 1:
        tagged = [b for b in blocks if b[0] == "ecdsl"]
        if len(tagged) == 1:
            blocks = tagged
        else:
            raise DslError(
                SYNTACTIC,
                "AmbiguousBlocks",
                (blocks[1][1], 1),
                f"{len(blocks)} fenced blocks and no single `ecdsl` tag to disambiguate",
            )
    text = "\n".join(blocks[0][2])
    return text.strip("\n")


# ---------------------------------------------------------------------------
# Tokens and AST

NUMBER_RE = re.compile(r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?")
IDENT_TOKEN_RE = re.compile(r"[a-z][a-z0-9_]*")
KEYWORDS = ("problem", "var", "param", "minimize", "subject")
FUNCS = ("abs", "max0", "sq", "sum")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | string | symbol | end
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class Atom:
    name: str
    index: Union[None, int, str]
    span: Tuple[int, int]


@dataclass(frozen=True)
class Num:
    value: float
    span: Tuple[int, int]


@dataclass(frozen=True)
class Call:
    func: str  # abs | max0 | sq | sum
    arg: Union["Expr", Atom]
    index_ident: Optional[str] = None  # for sum
    span: Tuple[int, int] = (1, 1)


Factor = Union[Num, Atom, Call]


@dataclass(frozen=True)
class Term:
    sign: int  # +1 / -1
    factors: Tuple[Factor, ...]
    span: Tuple[int, int]


@dataclass(frozen=True)
class Expr:
    terms: Tuple[Term, ...]
    span: Tuple[int, int]


@dataclass(frozen=True)
class VarStmt:
    name: str
    length: Optional[int]
    bounds: Tuple[Tuple[str, float], ...]  # ('>=' | '<=', value)
    span: Tuple[int, int]


@dataclass(frozen=True)
class ParamStmt:
    name: str
    length: Optional[int]
    value: Union[float, Tuple[float, ...]]
    span: Tuple[int, int]


@dataclass(frozen=True)
class MinimizeStmt:
    expr: Expr
    span: Tuple[int, int]


@dataclass(frozen=True)
class SubjectStmt:
    expr: Expr
    relation: str
    rhs: float
    span: Tuple[int, int]


Stmt = Union[VarStmt, ParamStmt, MinimizeStmt, SubjectStmt]


@dataclass(frozen=True)
class FormulationDoc:
    name: str
    statements: Tuple[Stmt, ...]

    def signature(self):
        """Structure without spans, for round-trip comparison."""

        def strip(node):
            if isinstance(node, Expr):
                return ("expr", tuple(strip(t) for t in node.terms))
            if isinstance(node, Term):
                return ("term", node.sign, tuple(strip(f) for f in node.factors))
            if isinstance(node, Num):
                return ("num", node.value)
            if isinstance(node, Atom):
                return ("atom", node.name, node.index)
            if isinstance(node, Call):
                return ("call", node.func, node.index_ident, strip(node.arg))
            if isinstance(node, VarStmt):
                return ("var", node.name, node.length, node.bounds)
            if isinstance(node, ParamStmt):
                return ("param", node.name, node.length, node.value)
            if isinstance(node, MinimizeStmt):
                return ("minimize", strip(node.expr))
            if isinstance(node, SubjectStmt):
                return ("subject", strip(node.expr), node.relation, node.rhs)
            raise TypeError(node)

        return (self.name, tuple(strip(s) for s in self.statements))


# ---------------------------------------------------------------------------
# Parser (recursive descent over per-line token streams; first error wins)

def _tokenize_line(line: str, line_no: int) -> List[Token]:
    tokens: List[Token] = []
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if ch in " \t\r":
            i += 1
            continue
        col = i + 1
        if ch == '"':
            j = line.find('"', i + 1)
            if j < 0:
                raise DslError(SYNTACTIC, "UnexpectedToken", (line_no, col), "unterminated string")
            tokens.append(Token("string", line[i + 1 : j], line_no, col))
            i = j + 1
            continue
        m = NUMBER_RE.match(line, i)
        if m and m.start() == i:
            tokens.append(Token("number", m.group(0), line_no, col))
            i = m.end()
            continue
        m = IDENT_TOKEN_RE.match(line, i)
        if m and m.start() == i:
            tokens.append(Token("ident", m.group(0), line_no, col))
            i = m.end()
            continue
        two = line[i : i + 2]
        if two in ("<=", ">=", "=="):
            tokens.append(Token("symbol", two, line_no, col))
            i += 2
            continue
        if ch in "[](),*+-=":
            tokens.append(Token("symbol", ch, line_no, col))
            i += 1
            continue
        raise DslError(SYNTACTIC, "UnexpectedToken", (line_no, col), f"unexpected character {ch!r}")
    tokens.append(Token("end", "", line_no, len(line) + 1))
    return tokens


class _LineParser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "end":
            self.pos += 1
        return tok

    def fail(self, message: str, tok: Optional[Token] = None, code: str = "UnexpectedToken"):
        tok = tok or self.peek()
        raise DslError(SYNTACTIC, code, (tok.line, tok.col), message)

    def expect_symbol(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind != "symbol" or tok.text != text:
            self.fail(f"expected {text!r}", tok)
        return self.next()

    def expect_ident(self, what: str = "identifier") -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            self.fail(f"expected {what}", tok)
        return self.next()

    def at_symbol(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind == "symbol" and tok.text in texts

    def number(self, signed: bool = False) -> float:
        sign = 1.0
        tok = self.peek()
        if signed and tok.kind == "symbol" and tok.text == "-":
            self.next()
            sign = -1.0
            tok = self.peek()
        if tok.kind != "number":
            self.fail("expected a number", tok)
        self.next()
        value = sign * float(tok.text)
        if value != value or value in (float("inf"), float("-inf")):
            self.fail("number literal out of range", tok, code="BadNumber")
        return value

    def end(self) -> None:
        tok = self.peek()
        if tok.kind != "end":
            self.fail("unexpected trailing input", tok)


def parse(doc_text: str) -> FormulationDoc:
    """Parse a formulation document; raises a syntactic DslError on the
    first violation (no recovery)."""
    lines = doc_text.splitlines()
    physical: List[Tuple[int, str]] = [
        (i + 1, line) for i, line in enumerate(lines) if line.strip()
    ]
    if not physical:
        raise DslError(SYNTACTIC, "UnexpectedToken", (1, 1), "empty document; expected 'problem \"name\"'")

    line_no, header = physical[0]
    lp = _LineParser(_tokenize_line(header, line_no))
    tok = lp.peek()
    if tok.kind != "ident" or tok.text != "problem":
        lp.fail("expected 'problem \"name\"' header")
    lp.next()
    name_tok = lp.peek()
    if name_tok.kind != "string":
        lp.fail("expected a quoted problem name", name_tok)
    lp.next()
    lp.end()

    statements: List[Stmt] = []
    for line_no, line in physical[1:]:
        lp = _LineParser(_tokenize_line(line, line_no))
        statements.append(_parse_stmt(lp))
        lp.end()
    if not statements:
        raise DslError(SYNTACTIC, "UnexpectedToken", (line_no, len(header) + 1), "document has no statements")
    return FormulationDoc(name_tok.text, tuple(statements))


def _parse_stmt(lp: _LineParser) -> Stmt:
    tok = lp.peek()
    if tok.kind != "ident" or tok.text not in ("var", "param", "minimize", "subject"):
        lp.fail("expected 'var', 'param', 'minimize' or 'subject'")
    lp.next()
    span = (tok.line, tok.col)
    if tok.text == "var":
        name = lp.expect_ident("variable name")
        length = _parse_opt_length(lp)
        bounds: List[Tuple[str, float]] = []
        while lp.at_symbol(">=", "<="):
            op = lp.next().text
            bounds.append((op, lp.number(signed=True)))
        return VarStmt(name.text, length, tuple(bounds), span)
    if tok.text == "param":
        name = lp.expect_ident("parameter name")
        length = _parse_opt_length(lp)
        lp.expect_symbol("=")
        if lp.at_symbol("["):
            lp.next()
            values = [lp.number(signed=True)]
            while lp.at_symbol(","):
                lp.next()
                values.append(lp.number(signed=True))
            lp.expect_symbol("]")
            return ParamStmt(name.text, length, tuple(values), span)
        return ParamStmt(name.text, length, lp.number(signed=True), span)
    if tok.text == "minimize":
        return MinimizeStmt(_parse_expr(lp), span)
    expr = _parse_expr(lp)
    rel_tok = lp.peek()
    if not (rel_tok.kind == "symbol" and rel_tok.text in ("<=", "==", ">=")):
        lp.fail("expected '<=', '==' or '>='", rel_tok)
    lp.next()
    rhs = lp.number(signed=True)
    return SubjectStmt(expr, rel_tok.text, rhs, span)


def _parse_opt_length(lp: _LineParser) -> Optional[int]:
    if not lp.at_symbol("["):
        return None
    lp.next()
    tok = lp.peek()
    if tok.kind != "number" or not tok.text.isdigit():
        lp.fail("expected an integer length", tok)
    lp.next()
    lp.expect_symbol("]")
    return int(tok.text)


def _parse_expr(lp: _LineParser) -> Expr:
    start = lp.peek()
    terms: List[Term] = []
    sign = 1
    if lp.at_symbol("+", "-"):
        sign = -1 if lp.next().text == "-" else 1
    terms.append(_parse_term(lp, sign))
    while lp.at_symbol("+", "-"):
        sign = -1 if lp.next().text == "-" else 1
        terms.append(_parse_term(lp, sign))
    return Expr(tuple(terms), (start.line, start.col))


def _parse_term(lp: _LineParser, sign: int) -> Term:
    start = lp.peek()
    factors: List[Factor] = [_parse_factor(lp)]
    while lp.at_symbol("*"):
        lp.next()
        factors.append(_parse_factor(lp))
    return Term(sign, tuple(factors), (start.line, start.col))


def _parse_factor(lp: _LineParser) -> Factor:
    tok = lp.peek()
    if tok.kind == "number":
        value = lp.number()
        return Num(value, (tok.line, tok.col))
    if tok.kind != "ident":
        lp.fail("expected a number, name or function call", tok)
    lp.next()
    span = (tok.line, tok.col)
    if tok.text in FUNCS and lp.at_symbol("("):
        lp.next()
        if tok.text == "sum":
            index = lp.expect_ident("sum index")
            lp.expect_symbol(",")
            body = _parse_expr(lp)
            lp.expect_symbol(")")
            return Call("sum", body, index.text, span)
        if tok.text == "sq":
            inner = _parse_atom(lp)
            lp.expect_symbol(")")
            return Call("sq", inner, None, span)
        body = _parse_expr(lp)
        lp.expect_symbol(")")
        return Call(tok.text, body, None, span)
    return _finish_atom(lp, tok)


def _parse_atom(lp: _LineParser) -> Atom:
    tok = lp.expect_ident()
    return _finish_atom(lp, tok)


def _finish_atom(lp: _LineParser, tok: Token) -> Atom:
    index: Union[None, int, str] = None
    if lp.at_symbol("["):
        lp.next()
        itok = lp.peek()
        if itok.kind == "number" and itok.text.isdigit():
            index = int(itok.text)
            lp.next()
        elif itok.kind == "ident":
            index = itok.text
            lp.next()
        else:
            lp.fail("expected an index (integer or sum index)", itok)
        lp.expect_symbol("]")
    return Atom(tok.text, index, (tok.line, tok.col))


# ---------------------------------------------------------------------------
# Pretty printer (canonical text; parse(print(doc)) is structurally equal)

def _fmt(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def print_doc(doc: FormulationDoc) -> str:
    out = [f'problem "{doc.name}"']
    for s in doc.statements:
        if isinstance(s, VarStmt):
            line = f"var {s.name}"
            if s.length is not None:
                line += f"[{s.length}]"
            for op, v in s.bounds:
                line += f" {op} {_fmt(v)}"
            out.append(line)
        elif isinstance(s, ParamStmt):
            line = f"param {s.name}"
            if s.length is not None:
                line += f"[{s.length}]"
            if isinstance(s.value, tuple):
                line += " = [" + ", ".join(_fmt(v) for v in s.value) + "]"
            else:
                line += f" = {_fmt(s.value)}"
            out.append(line)
        elif isinstance(s, MinimizeStmt):
            out.append(f"minimize {_print_expr(s.expr)}")
        else:
            out.append(f"subject {_print_expr(s.expr)} {s.relation} {_fmt(s.rhs)}")
    return "\n".join(out) + "\n"


def _print_expr(e: Expr) -> str:
    chunks: List[str] = []
    for i, t in enumerate(e.terms):
        body = " * ".join(_print_factor(f) for f in t.factors)
        if i == 0:
            chunks.append(body if t.sign > 0 else f"-{body}")
        else:
            chunks.append(("+ " if t.sign > 0 else "- ") + body)
    return " ".join(chunks)


def _print_factor(f: Factor) -> str:
    if isinstance(f, Num):
        return _fmt(f.value)
    if isinstance(f, Atom):
        if f.index is None:
            return f.name
        return f"{f.name}[{f.index}]"
    if f.func == "sum":
        return f"sum({f.index_ident}, {_print_expr(f.arg)})"
    if f.func == "sq":
        return f"sq({_print_factor(f.arg)})"
    return f"{f.func}({_print_expr(f.arg)})"


# ---------------------------------------------------------------------------
# Compiler

@dataclass
class _Scope:
    variables: Dict[str, VarStmt] = field(default_factory=dict)
    params: Dict[str, ParamStmt] = field(default_factory=dict)

    def declared(self, name: str) -> bool:
        return name in self.variables or name in self.params


@dataclass(frozen=True)
class _Linear:
    """Affine value during compilation: coefficient map + constant."""

    coefs: Tuple[Tuple[VarRef, float], ...]
    constant: float

    @staticmethod
    def const(v: float) -> "_Linear":
        return _Linear((), v)

    def is_const(self) -> bool:
        return not self.coefs

    def plus(self, other: "_Linear") -> "_Linear":
        merged: Dict[VarRef, float] = dict(self.coefs)
        for r, c in other.coefs:
            merged[r] = merged.get(r, 0.0) + c
        return _Linear(tuple(sorted(merged.items())), self.constant + other.constant)

    def times(self, k: float) -> "_Linear":
        return _Linear(tuple((r, c * k) for r, c in self.coefs), self.constant * k)

    def to_expr(self) -> LinExpr:
        return LinExpr.of([(c, r) for r, c in self.coefs], self.constant)


def _sem(code: str, span: Tuple[int, int], message: str) -> DslError:
    return DslError(SEMANTIC, code, span, message)


def compile_doc(doc: FormulationDoc) -> OptInstance:
    """Compile a parsed document to a validated OptInstance.

    All parameters are inlined as constants; abs/max0/sq become the
    corresponding convex objective terms.  Raises a semantic DslError on
    the first violation.
    """
    scope = _Scope()
    minimizes: List[MinimizeStmt] = []
    subjects: List[SubjectStmt] = []

    for s in doc.statements:
        if isinstance(s, (VarStmt, ParamStmt)):
            if scope.declared(s.name):
                raise _sem("DuplicateDeclaration", s.span, f"{s.name!r} is declared twice")
            if isinstance(s, VarStmt):
                scope.variables[s.name] = s
            else:
                if s.length is not None:
                    if not isinstance(s.value, tuple):
                        raise _sem("ArityMismatch", s.span, f"param {s.name!r} declares length {s.length} but has a scalar value")
                    if len(s.value) != s.length:
                        raise _sem("ArityMismatch", s.span,
                                   f"param {s.name!r} declares length {s.length} but lists {len(s.value)} values")
                elif isinstance(s.value, tuple):
                    raise _sem("ArityMismatch", s.span, f"param {s.name!r} lists a vector but declares no length")
                scope.params[s.name] = s
        elif isinstance(s, MinimizeStmt):
            if minimizes:
                raise _sem("DuplicateMinimize", s.span, "a second minimize statement is not allowed")
            minimizes.append(s)
            _check_refs_declared(s.expr, scope, s.span)
        else:
            subjects.append(s)
            _check_refs_declared(s.expr, scope, s.span)
    if not minimizes:
        last = doc.statements[-1].span if doc.statements else (1, 1)
        raise _sem("MissingMinimize", last, "document has no minimize statement")

    convex_terms: List[ConvexTerm] = []
    linear_acc = _Linear.const(0.0)
    for term in minimizes[0].expr.terms:
        lin, extra = _compile_term(term, scope, allow_convex=True)
        linear_acc = linear_acc.plus(lin)
        convex_terms.extend(extra)
    objective: List[ConvexTerm] = []
    if linear_acc.coefs or linear_acc.constant != 0.0 or not convex_terms:
        objective.append(ConvexTerm("linear", linear_acc.to_expr()))
    objective.extend(convex_terms)

    constraints: List[Constraint] = []
    for idx, s in enumerate(subjects):
        lin, extra = _compile_term_sum(s.expr, scope, allow_convex=False)
        if extra:
            raise _sem("NonConvexUse", s.span, "abs/max0/sq are not allowed in constraints")
        constraints.append(Constraint(lin.to_expr(), s.relation, s.rhs, label=f"c{idx}"))

    variables = []
    for v in scope.variables.values():
        lo: Optional[float] = None
        hi: Optional[float] = None
        for op, value in v.bounds:
            if op == ">=":
                lo = value if lo is None else max(lo, value)
            else:
                hi = value if hi is None else min(hi, value)
        if v.length is None:
            variables.append(VarDecl.scalar(v.name, lo, hi))
        else:
            variables.append(VarDecl.vector(v.name, v.length, lo, hi))

    instance = OptInstance.of(variables, objective, constraints, metadata={"kind": doc.name})
    issues = validate(instance)
    if issues:
        first = issues[0]
        code = {"NonConvexWeight": "NonConvexUse", "UnboundVar": "UnknownIdentifier"}.get(first.code, first.code)
        raise _sem(code, minimizes[0].span, str(first))
    return instance


def _check_refs_declared(e: Expr, scope: _Scope, span: Tuple[int, int], index_ident: Optional[str] = None) -> None:
    for term in e.terms:
        for f in term.factors:
            if isinstance(f, Atom):
                if f.name == index_ident:
                    raise _sem("UnknownIdentifier", f.span,
                               f"sum index {f.name!r} may only be used as an index")
                if not scope.declared(f.name):
                    raise _sem("UnknownIdentifier", f.span, f"{f.name!r} is not declared")
                if isinstance(f.index, str) and f.index != index_ident:
                    raise _sem("UnknownIdentifier", f.span, f"index {f.index!r} is not bound by a sum here")
            elif isinstance(f, Call):
                if f.func == "sum":
                    if index_ident is not None:
                        raise _sem("NonConvexUse", f.span, "sums do not nest")
                    if scope.declared(f.index_ident or ""):
                        raise _sem("DuplicateDeclaration", f.span,
                                   f"sum index {f.index_ident!r} shadows a declaration")
                    _check_refs_declared(f.arg, scope, f.span, f.index_ident)
                elif f.func == "sq":
                    if index_ident is not None:
                        raise _sem("NonConvexUse", f.span, "sq of a vector element inside a sum is not convex-representable here")
                    atom = f.arg
                    assert isinstance(atom, Atom)
                    if not scope.declared(atom.name):
                        raise _sem("UnknownIdentifier", atom.span, f"{atom.name!r} is not declared")
                else:
                    _check_refs_declared(f.arg, scope, f.span, index_ident)


def _compile_term_sum(e: Expr, scope: _Scope, allow_convex: bool, index_value=None):
    lin = _Linear.const(0.0)
    convex: List[ConvexTerm] = []
    for term in e.terms:
        l, c = _compile_term(term, scope, allow_convex, index_value)
        lin = lin.plus(l)
        convex.extend(c)
    return lin, convex


def _compile_term(term: Term, scope: _Scope, allow_convex: bool, index_value: Optional[Tuple[str, int]] = None):
    """One product.  Returns (linear part, convex terms).  At most one factor
    may involve variables or a call; the rest must fold to constants."""
    constant = float(term.sign)
    payload: Optional[Factor] = None
    for f in term.factors:
        c = _try_constant(f, scope, index_value)
        if c is not None:
            constant *= c
            continue
        if payload is not None:
            raise _sem("NonConvexUse", term.span, "a product may involve variables in at most one factor")
        payload = f
    if payload is None:
        return _Linear.const(constant), []
    if isinstance(payload, Atom):
        lin = _atom_linear(payload, scope, index_value)
        return lin.times(constant), []
    assert isinstance(payload, Call)
    return _compile_call(payload, constant, scope, allow_convex, index_value)


def _compile_call(call: Call, weight: float, scope: _Scope, allow_convex: bool, index_value):
    if call.func == "sum":
        length = _sum_length(call, scope)
        lin = _Linear.const(0.0)
        convex: List[ConvexTerm] = []
        for k in range(length):
            for term in call.arg.terms:  # type: ignore[union-attr]
                l, c = _compile_term(term, scope, allow_convex, (call.index_ident or "", k))
                lin = lin.plus(l)
                convex.extend(c)
        if convex and not allow_convex:
            raise _sem("NonConvexUse", call.span, "abs/max0 are not allowed here")
        return lin.times(weight), [ConvexTerm(t.kind, t.inner, t.weight * weight) for t in convex]
    if call.func == "sq":
        atom = call.arg
        assert isinstance(atom, Atom)
        if index_value is not None:
            raise _sem("NonConvexUse", call.span, "sq of a vector element inside a sum is not supported")
        if atom.name in scope.params:
            v = _atom_constant(atom, scope, None)
            return _Linear.const(weight * v * v), []
        if not allow_convex:
            raise _sem("NonConvexUse", call.span, "sq is not allowed here; this expression must be linear")
        lin = _atom_linear(atom, scope, None)
        if weight < 0:
            raise _sem("NonConvexUse", call.span, "negative weight on sq breaks convexity")
        return _Linear.const(0.0), [ConvexTerm("square", lin.to_expr(), weight)]
    # abs / max0
    if not allow_convex:
        raise _sem("NonConvexUse", call.span, f"{call.func} is not allowed here; this expression must be linear")
    inner_lin, inner_convex = _compile_term_sum(call.arg, scope, False, index_value)  # type: ignore[arg-type]
    if inner_convex:
        raise _sem("NonConvexUse", call.span, f"nested convex calls inside {call.func} are not supported")
    if weight < 0:
        raise _sem("NonConvexUse", call.span, f"negative weight on {call.func} breaks convexity")
    kind = "abs" if call.func == "abs" else "hinge0"
    return _Linear.const(0.0), [ConvexTerm(kind, inner_lin.to_expr(), weight)]


def _sum_length(call: Call, scope: _Scope) -> int:
    ident = call.index_ident or ""
    lengths: Dict[str, int] = {}

    def walk(e: Expr) -> None:
        for term in e.terms:
            for f in term.factors:
                if isinstance(f, Atom) and f.index == ident:
                    decl_len = _declared_length(f.name, scope)
                    if decl_len is None:
                        raise _sem("ArityMismatch", f.span, f"{f.name!r} is scalar but indexed by the sum")
                    lengths[f.name] = decl_len
                elif isinstance(f, Call) and f.func in ("abs", "max0"):
                    walk(f.arg)  # type: ignore[arg-type]

    walk(call.arg)  # type: ignore[arg-type]
    if not lengths:
        raise _sem("SumLengthMismatch", call.span, "sum binds no vector; nothing determines its length")
    distinct = sorted(set(lengths.values()))
    if len(distinct) > 1:
        raise _sem("SumLengthMismatch", call.span,
                   f"vectors under one sum must share a length, found {distinct}")
    return distinct[0]


def _declared_length(name: str, scope: _Scope) -> Optional[int]:
    if name in scope.variables:
        return scope.variables[name].length
    if name in scope.params:
        return scope.params[name].length
    return None


def _try_constant(f: Factor, scope: _Scope, index_value) -> Optional[float]:
    if isinstance(f, Num):
        return f.value
    if isinstance(f, Atom) and f.name in scope.params:
        return _atom_constant(f, scope, index_value)
    return None


def _atom_constant(atom: Atom, scope: _Scope, index_value) -> float:
    stmt = scope.params[atom.name]
    idx = _resolve_index(atom, stmt.length, index_value)
    if stmt.length is None:
        return float(stmt.value)  # type: ignore[arg-type]
    assert isinstance(stmt.value, tuple)
    return stmt.value[idx]  # type: ignore[index]


def _atom_linear(atom: Atom, scope: _Scope, index_value) -> _Linear:
    if atom.name not in scope.variables:
        raise _sem("UnknownIdentifier", atom.span, f"{atom.name!r} is not declared")
    stmt = scope.variables[atom.name]
    idx = _resolve_index(atom, stmt.length, index_value)
    ref = VarRef(atom.name, idx if stmt.length is not None else None)
    return _Linear(((ref, 1.0),), 0.0)


def _resolve_index(atom: Atom, declared_length: Optional[int], index_value) -> int:
    if declared_length is None:
        if atom.index is not None:
            raise _sem("ArityMismatch", atom.span, f"{atom.name!r} is scalar; it takes no index")
        return 0
    if atom.index is None:
        raise _sem("ArityMismatch", atom.span, f"{atom.name!r} is a vector; an index is required")
    if isinstance(atom.index, str):
        if index_value is None or atom.index != index_value[0]:
            raise _sem("UnknownIdentifier", atom.span, f"index {atom.index!r} is not bound by a sum here")
        idx = index_value[1]
    else:
        idx = atom.index
    if not 0 <= idx < declared_length:
        raise _sem("ArityMismatch", atom.span, f"index {idx} outside {atom.name!r}'s length {declared_length}")
    return idx
