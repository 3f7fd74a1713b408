"""Region algebra over page pieces: the four search methods plus the
set, positional, hierarchical and regional operators.

All operations are pure functions over immutable inputs and return
canonical piece sets (sorted by start ascending then end descending,
duplicate spans removed, all pieces from one page).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .html_model import PageHandle, Piece

__all__ = [
    "BadPattern",
    "OutOfBounds",
    "PageMismatch",
    "PieceSet",
    "SeqPattern",
    "elem",
    "exclude",
    "hierarchical",
    "index",
    "pat",
    "pcdata",
    "positional",
    "regional",
    "seq",
    "union",
]

PCDATA_TOKEN = "#pcdata"

Scope = PageHandle | Piece


class BadPattern(Exception):
    """Regular expression failed to compile."""


class PageMismatch(Exception):
    """Operands belong to different pages."""


class OutOfBounds(Exception):
    """Index outside the piece set."""


@dataclass(frozen=True)
class SeqPattern:
    """Linear pattern of element names and #pcdata markers."""

    tokens: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "SeqPattern":
        tokens = tuple(t.lower() for t in text.split())
        if not tokens:
            raise ValueError("empty sequence pattern")
        return cls(tokens)


class PieceSet:
    """Ordered, duplicate-free collection of pieces from one page."""

    def __init__(self, page: PageHandle, pieces=()):
        self.page = page
        seen: set[tuple[int, int]] = set()
        unique: list[Piece] = []
        for p in sorted(pieces, key=lambda p: (p.start, -p.end)):
            if p.span not in seen:
                seen.add(p.span)
                unique.append(p)
        self.pieces: tuple[Piece, ...] = tuple(unique)

    def __len__(self) -> int:
        return len(self.pieces)

    def __iter__(self):
        return iter(self.pieces)

    def __getitem__(self, i: int) -> Piece:
        return index(self, i)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PieceSet):
            return NotImplemented
        return self.page is other.page and self.pieces == other.pieces

    def __repr__(self) -> str:
        return f"PieceSet({[p.span for p in self.pieces]})"

    def spans(self) -> list[tuple[int, int]]:
        return [p.span for p in self.pieces]


def _scope_parts(scope: Scope) -> tuple[PageHandle, tuple[int, int]]:
    if isinstance(scope, Piece):
        return scope.page, scope.span
    return scope, (0, len(scope.source))


def _within(span: tuple[int, int], bound: tuple[int, int]) -> bool:
    return bound[0] <= span[0] and span[1] <= bound[1]


def _require_same_page(p: PieceSet, q: PieceSet) -> None:
    if p.page is not q.page:
        raise PageMismatch("piece sets belong to different pages")


def elem(scope: Scope, name: str) -> PieceSet:
    """All elements with the given (case-insensitive) name whose span
    lies in scope, in document order."""
    page, bound = _scope_parts(scope)
    want = name.lower()
    found = [
        Piece(page, node.span[0], node.span[1], anchor=nid)
        for nid, node in _elements(page)
        if node.name == want and _within(node.span, bound)
    ]
    return PieceSet(page, found)


def _elements(page: PageHandle):
    for nid in page.walk():
        node = page.nodes[nid]
        if node.kind == "element":
            yield nid, node


def pat(scope: Scope, pattern: str) -> PieceSet:
    """Leftmost non-overlapping regex matches over the tag-stripped text
    stream of the scope, mapped back to source spans."""
    try:
        rx = re.compile(pattern)
    except re.error as exc:
        raise BadPattern(f"bad pattern {pattern!r}: {exc}") from exc
    page, bound = _scope_parts(scope)
    stream = page.text_stream
    lo, hi = stream.slice_for_span(bound[0], bound[1])
    found = []
    for m in rx.finditer(stream.text, lo, hi):
        if m.end() > m.start():
            span = (stream.starts[m.start()], stream.ends[m.end() - 1])
        elif m.start() < hi:
            span = (stream.starts[m.start()],) * 2
        else:
            # zero-width match at the end of the scope's stream slice:
            # clamp to the last covered source offset so the piece stays
            # inside the scope
            at = stream.ends[hi - 1] if hi > lo else bound[0]
            span = (at, at)
        found.append(Piece(page, span[0], span[1]))
    return PieceSet(page, found)


def pcdata(scope: Scope) -> PieceSet:
    """One piece per text segment with non-whitespace content within
    scope, in document order."""
    page, bound = _scope_parts(scope)
    found = [
        Piece(page, node.span[0], node.span[1])
        for _, node in _text_segments(page)
        if _within(node.span, bound)
    ]
    return PieceSet(page, found)


def _text_segments(page: PageHandle):
    for nid in page.walk():
        node = page.nodes[nid]
        if node.kind == "text" and node.text.strip():
            yield nid, node


def seq(scope: Scope, pattern: SeqPattern | str) -> PieceSet:
    """Occurrences of a linear item sequence over the flattened document.

    Items are elements and non-whitespace text segments in document
    order; a matched element consumes its whole subtree, #pcdata matches
    exactly one text segment. Matches are leftmost and non-overlapping.
    """
    if isinstance(pattern, str):
        pattern = SeqPattern.parse(pattern)
    page, bound = _scope_parts(scope)
    items = _item_sequence(page, bound)
    found = []
    i = 0
    while i < len(items):
        end_idx = _match_items(items, i, pattern.tokens)
        if end_idx is None:
            i += 1
            continue
        match_start = items[i][2][0]
        match_end = items[end_idx][2][1]
        found.append(Piece(page, match_start, match_end))
        while i < len(items) and items[i][2][0] < match_end:
            i += 1
    return PieceSet(page, found)


def _item_sequence(page: PageHandle, bound: tuple[int, int]):
    """(kind, name, span) items in pre-order, confined to bound; the
    synthetic root is not an item."""
    items = []
    for nid in page.walk():
        node = page.nodes[nid]
        if nid == page.root:
            continue
        if node.kind == "element" and _within(node.span, bound):
            items.append(("element", node.name, node.span))
        elif node.kind == "text" and node.text.strip() and _within(node.span, bound):
            items.append(("text", "", node.span))
    return items


def _match_items(items, start: int, tokens) -> int | None:
    """Try to match tokens beginning at items[start]; a matched element
    skips past its subtree. Returns index of the last matched item."""
    i = start
    last = None
    for token in tokens:
        if i >= len(items):
            return None
        kind, name, span = items[i]
        if token == PCDATA_TOKEN:
            if kind != "text":
                return None
            last = i
            i += 1
        else:
            if kind != "element" or name != token:
                return None
            last = i
            i += 1
            while i < len(items) and items[i][2][0] < span[1]:
                i += 1  # skip the matched element's subtree
    return last


def union(p: PieceSet, q: PieceSet) -> PieceSet:
    _require_same_page(p, q)
    return PieceSet(p.page, list(p.pieces) + list(q.pieces))


def exclude(p: PieceSet, q: PieceSet) -> PieceSet:
    _require_same_page(p, q)
    drop = {piece.span for piece in q.pieces}
    return PieceSet(p.page, [piece for piece in p.pieces if piece.span not in drop])


def index(p: PieceSet, i: int) -> Piece:
    if not 0 <= i < len(p.pieces):
        raise OutOfBounds(f"index {i} outside piece set of size {len(p.pieces)}")
    return p.pieces[i]


POSITIONAL_RELS = ("before", "!before", "after", "!after")
HIERARCHICAL_RELS = ("inside", "!inside", "contain", "!contain")
REGIONAL_RELS = ("without", "intersect")


def positional(p: PieceSet, q: PieceSet, rel: str) -> PieceSet:
    """before: keep pieces of P that end at or before the start of some
    piece of Q; after is the mirror; ! forms are complements within P."""
    _require_same_page(p, q)
    if rel not in POSITIONAL_RELS:
        raise ValueError(f"unknown positional relation {rel!r}")
    base = rel.lstrip("!")
    if base == "before":
        cond = lambda a: any(a.end <= b.start for b in q.pieces)
    else:
        cond = lambda a: any(b.end <= a.start for b in q.pieces)
    return _select(p, cond, negate=rel.startswith("!"))


def hierarchical(p: PieceSet, q: PieceSet, rel: str) -> PieceSet:
    """inside: pieces of P spatially contained in some piece of Q;
    contain: pieces of P containing some piece of Q; ! complements."""
    _require_same_page(p, q)
    if rel not in HIERARCHICAL_RELS:
        raise ValueError(f"unknown hierarchical relation {rel!r}")
    base = rel.lstrip("!")
    if base == "inside":
        cond = lambda a: any(b.start <= a.start and a.end <= b.end for b in q.pieces)
    else:
        cond = lambda a: any(a.start <= b.start and b.end <= a.end for b in q.pieces)
    return _select(p, cond, negate=rel.startswith("!"))


def regional(p: PieceSet, q: PieceSet, rel: str) -> PieceSet:
    """intersect: pieces of P overlapping some piece of Q (zero-width
    pieces overlap nothing); without: the rest of P. Whole pieces are
    selected, never clipped."""
    _require_same_page(p, q)
    if rel not in REGIONAL_RELS:
        raise ValueError(f"unknown regional relation {rel!r}")
    cond = lambda a: any(max(a.start, b.start) < min(a.end, b.end) for b in q.pieces)
    return _select(p, cond, negate=(rel == "without"))


def _select(p: PieceSet, cond, negate: bool) -> PieceSet:
    kept = [piece for piece in p.pieces if cond(piece) != negate]
    return PieceSet(p.page, kept)
