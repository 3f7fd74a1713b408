"""Extraction rules: a small declarative language over the markup
algebra, evaluated against pages to yield nested string lists and
advert records.

Rule files look like:

    # one block per advert category
    category vehicles.cars {
      date_format: "dd/MM/yyyy"
      list: elem(div) contain elem(h1)
      title = pcdata() inside elem(h1)
      price = pat("Rs [0-9,]+")
    }

Binary operators are left-associative, indexing binds tightest, and
"{today}" inside pat strings is replaced by the evaluation date
(formatted per date_format, regex-escaped) before the pattern compiles.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime

from . import markup_algebra as algebra
from .dates import today_regex
from .datastore import AdvertRecord, content_hash
from .html_model import PageHandle, text_content
from .markup_algebra import PieceSet, Scope, SeqPattern

__all__ = [
    "CategoryRule",
    "DuplicateCategory",
    "DuplicateField",
    "EvalError",
    "Expr",
    "RuleSet",
    "RuleSyntaxError",
    "ShapeMismatch",
    "eval_expr",
    "extract_records",
    "nsl_to_advert",
    "parse_rules",
]

# NSL: a string or an arbitrarily nested list of NSLs.
NSL = "str | list"

BINARY_OPS = {
    "+",
    "-",
    "before",
    "!before",
    "after",
    "!after",
    "inside",
    "!inside",
    "contain",
    "!contain",
    "without",
    "intersect",
}

TODAY_PLACEHOLDER = "{today}"


class RuleSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class DuplicateCategory(Exception):
    pass


class DuplicateField(Exception):
    pass


class ShapeMismatch(Exception):
    pass


class EvalError(Exception):
    """Evaluation failure, tagged with the expression's rule-file location."""

    def __init__(self, message: str, line: int, col: int, cause: Exception | None = None):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col
        self.cause = cause


# --- abstract syntax ----------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    line: int
    col: int


@dataclass(frozen=True)
class ElemExpr(Expr):
    name: str


@dataclass(frozen=True)
class PatExpr(Expr):
    pattern: str


@dataclass(frozen=True)
class PcdataExpr(Expr):
    pass


@dataclass(frozen=True)
class SeqExpr(Expr):
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class BinaryExpr(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class IndexExpr(Expr):
    base: Expr
    index: int


@dataclass(frozen=True)
class CategoryRule:
    name: str
    date_format: str
    list_expr: Expr
    fields: tuple[tuple[str, Expr], ...]

    def field_names(self) -> list[str]:
        return [name for name, _ in self.fields]


@dataclass(frozen=True)
class RuleSet:
    categories: tuple[CategoryRule, ...] = ()

    def category(self, name: str) -> CategoryRule:
        for rule in self.categories:
            if rule.name == name:
                return rule
        raise KeyError(name)

    def names(self) -> list[str]:
        return [rule.name for rule in self.categories]


# --- tokenizer ----------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # ident, string, int, punct, op
    value: str
    line: int
    col: int


_PUNCT = "{}()[]=:"
_WORD_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-")


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)

    def bump(k: int = 1) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            bump()
        elif ch == "#":
            while i < n and text[i] != "\n":
                bump()
        elif ch == '"':
            start_line, start_col = line, col
            bump()
            out = []
            while i < n and text[i] != '"':
                if text[i] == "\\" and i + 1 < n and text[i + 1] in '\\"':
                    out.append(text[i + 1])
                    bump(2)
                else:
                    out.append(text[i])
                    bump()
            if i >= n:
                raise RuleSyntaxError("unterminated string", start_line, start_col)
            bump()
            tokens.append(_Token("string", "".join(out), start_line, start_col))
        elif ch in "+-":
            tokens.append(_Token("op", ch, line, col))
            bump()
        elif ch == "!":
            start_line, start_col = line, col
            bump()
            word = []
            while i < n and text[i] in _WORD_CHARS:
                word.append(text[i])
                bump()
            name = "!" + "".join(word)
            if name not in BINARY_OPS:
                raise RuleSyntaxError(f"unknown operator {name!r}", start_line, start_col)
            tokens.append(_Token("op", name, start_line, start_col))
        elif ch in _PUNCT:
            tokens.append(_Token("punct", ch, line, col))
            bump()
        elif ch in _WORD_CHARS:
            start_line, start_col = line, col
            word = []
            while i < n and text[i] in _WORD_CHARS:
                word.append(text[i])
                bump()
            value = "".join(word)
            if value.isdigit():
                tokens.append(_Token("int", value, start_line, start_col))
            else:
                tokens.append(_Token("ident", value, start_line, start_col))
        else:
            raise RuleSyntaxError(f"unexpected character {ch!r}", line, col)
    return tokens


# --- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token], length_hint: tuple[int, int]):
        self.tokens = tokens
        self.pos = 0
        self.eof_at = length_hint

    def peek(self, ahead: int = 0) -> _Token | None:
        idx = self.pos + ahead
        return self.tokens[idx] if idx < len(self.tokens) else None

    def next(self) -> _Token:
        token = self.peek()
        if token is None:
            raise RuleSyntaxError("unexpected end of input", *self.eof_at)
        self.pos += 1
        return token

    def expect(self, kind: str, value: str | None = None) -> _Token:
        token = self.next()
        if token.kind != kind or (value is not None and token.value != value):
            want = value or kind
            raise RuleSyntaxError(
                f"expected {want!r}, found {token.value!r}", token.line, token.col
            )
        return token

    def parse_ruleset(self) -> RuleSet:
        categories: list[CategoryRule] = []
        names: set[str] = set()
        while self.peek() is not None:
            rule = self.parse_category()
            if rule.name in names:
                raise DuplicateCategory(rule.name)
            names.add(rule.name)
            categories.append(rule)
        return RuleSet(tuple(categories))

    def parse_category(self) -> CategoryRule:
        self.expect("ident", "category")
        name = self.expect("ident").value
        self.expect("punct", "{")
        self.expect("ident", "date_format")
        self.expect("punct", ":")
        date_format = self.expect("string").value
        self.expect("ident", "list")
        self.expect("punct", ":")
        list_expr = self.parse_expr()
        fields: list[tuple[str, Expr]] = []
        seen: set[str] = set()
        while True:
            token = self.peek()
            if token is None:
                raise RuleSyntaxError("unexpected end of input", *self.eof_at)
            if token.kind == "punct" and token.value == "}":
                self.next()
                break
            field_name = self.expect("ident").value
            self.expect("punct", "=")
            expr = self.parse_expr()
            if field_name in seen:
                raise DuplicateField(f"{name}.{field_name}")
            seen.add(field_name)
            fields.append((field_name, expr))
        if not fields:
            raise RuleSyntaxError(f"category {name!r} has no fields", token.line, token.col)
        return CategoryRule(name, date_format, list_expr, tuple(fields))

    def parse_expr(self) -> Expr:
        left = self.parse_term()
        while True:
            token = self.peek()
            if token is None:
                return left
            is_word_op = token.kind == "ident" and token.value in BINARY_OPS
            if is_word_op:
                follow = self.peek(1)
                if follow is not None and follow.kind == "punct" and follow.value == "=":
                    return left  # a field named like an operator
            if token.kind == "op" or is_word_op:
                self.next()
                right = self.parse_term()
                left = BinaryExpr(token.line, token.col, token.value, left, right)
            else:
                return left

    def parse_term(self) -> Expr:
        expr = self.parse_primary()
        while True:
            token = self.peek()
            if token is None or token.kind != "punct" or token.value != "[":
                return expr
            self.next()
            number = self.expect("int")
            self.expect("punct", "]")
            expr = IndexExpr(token.line, token.col, expr, int(number.value))

    def parse_primary(self) -> Expr:
        token = self.next()
        if token.kind == "punct" and token.value == "(":
            expr = self.parse_expr()
            self.expect("punct", ")")
            return expr
        if token.kind != "ident":
            raise RuleSyntaxError(
                f"expected expression, found {token.value!r}", token.line, token.col
            )
        name = token.value
        self.expect("punct", "(")
        if name == "elem":
            arg = self.expect("ident").value
            self.expect("punct", ")")
            return ElemExpr(token.line, token.col, arg.lower())
        if name == "pat":
            arg = self.expect("string").value
            self.expect("punct", ")")
            return PatExpr(token.line, token.col, arg)
        if name == "pcdata":
            self.expect("punct", ")")
            return PcdataExpr(token.line, token.col)
        if name == "seq":
            arg = self.expect("string").value
            self.expect("punct", ")")
            try:
                pattern = SeqPattern.parse(arg)
            except ValueError as exc:
                raise RuleSyntaxError(str(exc), token.line, token.col) from exc
            return SeqExpr(token.line, token.col, pattern.tokens)
        raise RuleSyntaxError(f"unknown search {name!r}", token.line, token.col)


def parse_rules(text: str) -> RuleSet:
    """Parse a rule file; empty input yields an empty rule set."""
    lines = text.split("\n")
    eof_at = (len(lines), len(lines[-1]) + 1)
    return _Parser(_tokenize(text), eof_at).parse_ruleset()


# --- evaluation ---------------------------------------------------------------


def eval_expr(
    expr: Expr, scope: Scope, today: date, date_format: str = "dd/MM/yyyy"
) -> PieceSet:
    """Evaluate an expression within a scope; algebra errors are re-raised
    as EvalError carrying the rule-file location."""
    try:
        if isinstance(expr, ElemExpr):
            return algebra.elem(scope, expr.name)
        if isinstance(expr, PatExpr):
            pattern = expr.pattern
            if TODAY_PLACEHOLDER in pattern:
                pattern = pattern.replace(TODAY_PLACEHOLDER, today_regex(today, date_format))
            return algebra.pat(scope, pattern)
        if isinstance(expr, PcdataExpr):
            return algebra.pcdata(scope)
        if isinstance(expr, SeqExpr):
            return algebra.seq(scope, SeqPattern(expr.tokens))
        if isinstance(expr, BinaryExpr):
            left = eval_expr(expr.left, scope, today, date_format)
            right = eval_expr(expr.right, scope, today, date_format)
            return _apply_binary(expr.op, left, right)
        if isinstance(expr, IndexExpr):
            base = eval_expr(expr.base, scope, today, date_format)
            piece = algebra.index(base, expr.index)
            return PieceSet(base.page, [piece])
    except EvalError:
        raise
    except (algebra.BadPattern, algebra.PageMismatch, algebra.OutOfBounds) as exc:
        raise EvalError(str(exc), expr.line, expr.col, exc) from exc
    raise TypeError(f"not an expression: {expr!r}")


def _apply_binary(op: str, left: PieceSet, right: PieceSet) -> PieceSet:
    if op == "+":
        return algebra.union(left, right)
    if op == "-":
        return algebra.exclude(left, right)
    if op in ("before", "!before", "after", "!after"):
        return algebra.positional(left, right, op)
    if op in ("inside", "!inside", "contain", "!contain"):
        return algebra.hierarchical(left, right, op)
    return algebra.regional(left, right, op)


def extract_records(page: PageHandle, rule: CategoryRule, today: date) -> list:
    """One nested string list per advert piece: each record holds, per
    field, the list of matched pieces' trimmed texts."""
    adverts = eval_expr(rule.list_expr, page, today, rule.date_format)
    records = []
    for advert_piece in adverts:
        record = []
        for field_name, expr in rule.fields:
            try:
                pieces = eval_expr(expr, advert_piece, today, rule.date_format)
            except EvalError as exc:
                raise EvalError(
                    f"field {rule.name}.{field_name}: {exc}", exc.line, exc.col, exc.cause
                ) from exc
            record.append([text_content(p).strip() for p in pieces])
        records.append(record)
    return records


def normalize_whitespace(value: str) -> str:
    return " ".join(value.split())


def nsl_to_advert(nsl: list, rule: CategoryRule, url: str, seen_at: datetime) -> AdvertRecord:
    """Collapse a record NSL to one advert: first match per field,
    whitespace-normalized; missing fields become empty strings."""
    if len(nsl) != len(rule.fields):
        raise ShapeMismatch(
            f"record has {len(nsl)} field lists, rule {rule.name} defines {len(rule.fields)}"
        )
    fields: dict[str, str] = {}
    for (field_name, _), matches in zip(rule.fields, nsl):
        fields[field_name] = normalize_whitespace(matches[0]) if matches else ""
    return AdvertRecord(
        id=None,
        category=rule.name,
        fields=fields,
        source_url=url,
        content_hash=content_hash(rule.name, fields),
        first_seen=seen_at,
    )
