"""Seeded random document and piece-set generators for the oracle suites."""

from __future__ import annotations

import random

from adharvest.html_model import PageHandle, Piece
from adharvest.markup_algebra import PieceSet, elem, pcdata

TAGS = ["div", "span", "b", "i", "h1", "table", "tr", "td", "ul", "li", "a", "p"]
WORDS = ["Honda", "Civic", "Rs", "100", "sale", "rent", "2004", "call", "now", "deal"]
SOUP_CHARS = "<>/=\"' abZ&;#x1-!"


def random_document(rng: random.Random, max_nodes: int = 50) -> str:
    """Render a random well-formed-ish document; '<' and '&' appear only
    as markup so the naive strip oracle applies."""
    budget = rng.randint(1, max_nodes)
    parts: list[str] = []

    def emit(depth: int) -> None:
        nonlocal budget
        while budget > 0 and rng.random() > 0.3:
            budget -= 1
            kind = rng.random()
            if kind < 0.4 or depth >= 5:
                parts.append(" ".join(rng.sample(WORDS, rng.randint(1, 3))))
                if rng.random() < 0.3:
                    parts.append(" ")
            elif kind < 0.5:
                parts.append("<br>")
            else:
                tag = rng.choice(TAGS)
                parts.append(f"<{tag}>")
                emit(depth + 1)
                parts.append(f"</{tag}>")

    emit(0)
    return "".join(parts)


def random_tag_soup(rng: random.Random, max_len: int = 2048) -> str:
    """Arbitrary character soup for parser totality fuzzing."""
    n = rng.randint(0, max_len)
    return "".join(rng.choice(SOUP_CHARS) for _ in range(n))


def random_piece_set(rng: random.Random, page: PageHandle) -> PieceSet:
    """Sample pieces from element/text searches plus raw random spans."""
    pool: list[Piece] = []
    pool.extend(pcdata(page).pieces)
    pool.extend(elem(page, rng.choice(TAGS)).pieces)
    n = len(page.source)
    for _ in range(rng.randint(0, 6)):
        a = rng.randint(0, n)
        b = rng.randint(0, n)
        pool.append(Piece(page, min(a, b), max(a, b)))
    if not pool:
        return PieceSet(page, [])
    return PieceSet(page, rng.sample(pool, rng.randint(0, min(len(pool), 8))))


def check_page_invariants(page: PageHandle) -> None:
    """Assert the structural contract of a parsed page."""
    n = len(page.source)
    root = page.nodes[page.root]
    assert root.span == (0, n)
    for nid, node in enumerate(page.nodes):
        start, end = node.span
        assert 0 <= start <= end <= n, f"node {nid} span {node.span} out of range"
        if node.kind == "element":
            assert node.name == node.name.lower()
        else:
            assert not node.children, f"{node.kind} node {nid} has children"
        prev_end = None
        for child in node.children:
            c = page.nodes[child]
            assert c.parent == nid
            assert start <= c.span[0] and c.span[1] <= end, (
                f"child {child} span {c.span} outside parent {nid} span {node.span}"
            )
            if prev_end is not None:
                assert c.span[0] >= prev_end, f"siblings overlap at node {child}"
            prev_end = c.span[1]
    stream = page.text_stream
    assert len(stream.starts) == len(stream.text) == len(stream.ends)
    assert all(a < b for a, b in zip(stream.starts, stream.starts[1:]))
    assert all(s < e for s, e in zip(stream.starts, stream.ends))
