"""Lenient HTML parsing into an offset-preserving document tree.

Every node records the exact character span it covers in the decoded
source, so downstream region operations can slice, compare and map text
offsets back to the original markup. The parser never fails: unclosed
tags are auto-closed, stray close tags are ignored, and anything that
does not look like markup is kept as text.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

__all__ = [
    "Node",
    "NoAnchor",
    "PageHandle",
    "Piece",
    "TextStream",
    "build_text_stream",
    "node_path",
    "parse_html",
    "piece_text",
]

# Elements that never take children. Fixed list; anything else is
# treated as a container.
VOID_ELEMENTS = frozenset({"br", "hr", "img", "input", "meta", "link"})

# Opening tag X implicitly closes an open element whose name is in
# CLOSED_BY[X] (checked repeatedly against the top of the open stack).
CLOSED_BY = {
    "p": {"p"},
    "li": {"li"},
    "td": {"td", "th"},
    "th": {"td", "th"},
    "tr": {"tr", "td", "th"},
    "option": {"option"},
}

# Content of these elements is scanned as raw text up to the matching
# close tag, so stray '<' inside them cannot open bogus tags.
RAWTEXT_ELEMENTS = frozenset({"script", "style"})

ROOT_NAME = "html-root"

NAMED_ENTITIES = {
    "amp": "&",
    "lt": "<",
    "gt": ">",
    "quot": '"',
    "apos": "'",
    "nbsp": " ",
}


class NoAnchor(Exception):
    """Raised when an operation needs an element anchor the piece lacks."""


@dataclass
class Node:
    kind: str  # "element" | "text" | "comment"
    name: str  # lowercase element name; "" for text/comment
    attrs: dict[str, str]
    span: tuple[int, int]
    children: list[int]
    parent: int | None
    text: str = ""  # decoded content for text nodes


@dataclass
class TextStream:
    """Tag-stripped text with a per-character map back to source offsets.

    ``starts[i]`` is the source offset where decoded character ``text[i]``
    begins and ``ends[i]`` the offset just past its source extent (an
    entity reference is several source characters wide).
    """

    text: str
    starts: list[int]
    ends: list[int]

    def slice_for_span(self, start: int, end: int) -> tuple[int, int]:
        """Index range [lo, hi) of stream characters whose source extent
        lies within [start, end)."""
        lo = bisect.bisect_left(self.starts, start)
        hi = bisect.bisect_right(self.ends, end)
        return lo, max(lo, hi)

    def text_in_span(self, start: int, end: int) -> str:
        lo, hi = self.slice_for_span(start, end)
        return self.text[lo:hi]


@dataclass
class PageHandle:
    url: str
    source: str
    nodes: list[Node]
    root: int = 0
    text_stream: TextStream = field(default_factory=lambda: TextStream("", [], []))

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def walk(self, node_id: int | None = None):
        """Yield node ids in document (pre-) order."""
        stack = [self.root if node_id is None else node_id]
        while stack:
            nid = stack.pop()
            yield nid
            stack.extend(reversed(self.nodes[nid].children))


@dataclass(frozen=True)
class Piece:
    """A contiguous source region of one page."""

    page: PageHandle
    start: int
    end: int
    anchor: int | None = None  # NodeId when the piece is a whole element

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Piece):
            return NotImplemented
        return self.page is other.page and self.span == other.span

    def __hash__(self) -> int:
        return hash((id(self.page), self.start, self.end))


def _decode_text(source: str, start: int, end: int) -> tuple[str, list[int], list[int]]:
    """Decode entities in source[start:end], tracking per-character extents."""
    out: list[str] = []
    starts: list[int] = []
    ends: list[int] = []
    i = start
    while i < end:
        ch = source[i]
        if ch == "&":
            semi = source.find(";", i + 1, min(end, i + 32))
            if semi != -1:
                body = source[i + 1 : semi]
                decoded = _decode_entity(body)
                if decoded is not None:
                    out.append(decoded)
                    starts.append(i)
                    ends.append(semi + 1)
                    i = semi + 1
                    continue
        out.append(ch)
        starts.append(i)
        ends.append(i + 1)
        i += 1
    return "".join(out), starts, ends


def _decode_entity(body: str) -> str | None:
    if body in NAMED_ENTITIES:
        return NAMED_ENTITIES[body]
    if body.startswith("#"):
        digits = body[1:]
        try:
            code = int(digits[1:], 16) if digits[:1] in ("x", "X") else int(digits)
        except ValueError:
            return None
        if 0 < code <= 0x10FFFF:
            return chr(code)
    return None


class _TreeBuilder:
    def __init__(self, source: str, url: str):
        self.source = source
        self.url = url
        root = Node("element", ROOT_NAME, {}, (0, len(source)), [], None)
        self.nodes = [root]
        self.stack = [0]  # open element ids, bottom is the root

    def parse(self) -> PageHandle:
        src = self.source
        n = len(src)
        i = 0
        text_start = 0
        while i < n:
            if src[i] != "<":
                i += 1
                continue
            nxt = src[i + 1] if i + 1 < n else ""
            if not (nxt.isalpha() or nxt in "/!?"):
                i += 1  # literal '<'
                continue
            self._flush_text(text_start, i)
            if src.startswith("<!--", i):
                close = src.find("-->", i + 4)
                end = n if close == -1 else close + 3
                self._add_comment(i, end)
                i = end
            elif nxt in "!?":
                close = src.find(">", i)
                i = n if close == -1 else close + 1  # doctype/PI dropped
            elif nxt == "/":
                i = self._close_tag(i)
            else:
                i = self._open_tag(i)
            text_start = i
        self._flush_text(text_start, n)
        self._close_all(n)
        page = PageHandle(self.url, src, self.nodes)
        page.text_stream = build_text_stream(page)
        return page

    def _flush_text(self, start: int, end: int) -> None:
        if end > start:
            decoded, _, _ = _decode_text(self.source, start, end)
            self._append(Node("text", "", {}, (start, end), [], None, decoded))

    def _add_comment(self, start: int, end: int) -> None:
        self._append(Node("comment", "", {}, (start, end), [], None))

    def _append(self, node: Node) -> int:
        node_id = len(self.nodes)
        parent = self.stack[-1]
        node.parent = parent
        self.nodes.append(node)
        self.nodes[parent].children.append(node_id)
        return node_id

    def _open_tag(self, pos: int) -> int:
        name, attrs, self_closing, end = self._scan_tag(pos)
        if end == -1:  # unterminated tag at EOF: keep as text
            self._flush_text(pos, len(self.source))
            return len(self.source)
        closers = CLOSED_BY.get(name)
        if closers:
            while len(self.stack) > 1 and self.nodes[self.stack[-1]].name in closers:
                self._close_top(pos)
        node = Node("element", name, attrs, (pos, end), [], None)
        node_id = self._append(node)
        if name in VOID_ELEMENTS or self_closing:
            return end
        if name in RAWTEXT_ELEMENTS:
            return self._rawtext(node_id, name, end)
        self.stack.append(node_id)
        return end

    def _rawtext(self, node_id: int, name: str, content_start: int) -> int:
        src = self.source
        lower = src.lower()
        close = lower.find("</" + name, content_start)
        content_end = len(src) if close == -1 else close
        if content_end > content_start:
            decoded, _, _ = _decode_text(src, content_start, content_end)
            child = Node("text", "", {}, (content_start, content_end), [], node_id, decoded)
            child_id = len(self.nodes)
            self.nodes.append(child)
            self.nodes[node_id].children.append(child_id)
        if close == -1:
            self.nodes[node_id].span = (self.nodes[node_id].span[0], len(src))
            return len(src)
        gt = src.find(">", close)
        tag_end = len(src) if gt == -1 else gt + 1
        self.nodes[node_id].span = (self.nodes[node_id].span[0], tag_end)
        return tag_end

    def _close_tag(self, pos: int) -> int:
        src = self.source
        gt = src.find(">", pos)
        end = len(src) if gt == -1 else gt + 1
        name = self._tag_name(src[pos + 2 : gt if gt != -1 else len(src)])
        open_idx = None
        for depth in range(len(self.stack) - 1, 0, -1):
            if self.nodes[self.stack[depth]].name == name:
                open_idx = depth
                break
        if open_idx is None:
            return end  # stray close tag: ignored
        while len(self.stack) > open_idx + 1:
            self._close_top(pos)  # inner unclosed tags end where the parent closes
        node_id = self.stack.pop()
        self.nodes[node_id].span = (self.nodes[node_id].span[0], end)
        return end

    def _close_top(self, at: int) -> None:
        node_id = self.stack.pop()
        self.nodes[node_id].span = (self.nodes[node_id].span[0], at)

    def _close_all(self, at: int) -> None:
        while len(self.stack) > 1:
            self._close_top(at)

    @staticmethod
    def _tag_name(text: str) -> str:
        name = []
        for ch in text.strip():
            if ch.isspace() or ch == "/":
                break
            name.append(ch)
        return "".join(name).lower()

    def _scan_tag(self, pos: int) -> tuple[str, dict[str, str], bool, int]:
        """Scan an open tag starting at '<'. Returns (name, attrs,
        self_closing, offset past '>'), or end == -1 when unterminated."""
        src = self.source
        n = len(src)
        i = pos + 1
        start = i
        while i < n and not src[i].isspace() and src[i] not in ">/":
            i += 1
        name = src[start:i].lower()
        attrs: dict[str, str] = {}
        self_closing = False
        while i < n:
            while i < n and src[i].isspace():
                i += 1
            if i >= n:
                return name, attrs, self_closing, -1
            if src[i] == ">":
                return name, attrs, self_closing, i + 1
            if src[i] == "/":
                self_closing = True
                i += 1
                continue
            a_start = i
            while i < n and not src[i].isspace() and src[i] not in "=>/":
                i += 1
            attr_name = src[a_start:i].lower()
            while i < n and src[i].isspace():
                i += 1
            value = ""
            if i < n and src[i] == "=":
                i += 1
                while i < n and src[i].isspace():
                    i += 1
                if i < n and src[i] in "\"'":
                    quote = src[i]
                    i += 1
                    v_start = i
                    while i < n and src[i] != quote:
                        i += 1
                    value = src[v_start:i]
                    i = min(i + 1, n)
                else:
                    v_start = i
                    while i < n and not src[i].isspace() and src[i] != ">":
                        i += 1
                    value = src[v_start:i]
            if attr_name and attr_name not in attrs:
                attrs[attr_name] = _decode_text(value, 0, len(value))[0] if "&" in value else value
        return name, attrs, self_closing, -1


def parse_html(source: str, url: str = "") -> PageHandle:
    """Parse possibly-malformed HTML into a span-annotated tree.

    Total over any character input: recovery auto-closes unclosed tags at
    the parent's close (or end of input) and drops close tags that match
    no open element.
    """
    return _TreeBuilder(source, url).parse()


def build_text_stream(page: PageHandle) -> TextStream:
    """Concatenate all text-node content in document order, keeping the
    offset map back into the page source. Comments and attribute values
    are excluded."""
    parts: list[str] = []
    starts: list[int] = []
    ends: list[int] = []
    for nid in page.walk():
        node = page.nodes[nid]
        if node.kind != "text":
            continue
        decoded, s, e = _decode_text(page.source, node.span[0], node.span[1])
        parts.append(decoded)
        starts.extend(s)
        ends.extend(e)
    return TextStream("".join(parts), starts, ends)


def piece_text(piece: Piece) -> str:
    """Raw source slice the piece covers, markup included."""
    return piece.page.source[piece.start : piece.end]


def text_content(piece: Piece) -> str:
    """Tag-stripped, entity-decoded text within the piece span."""
    return piece.page.text_stream.text_in_span(piece.start, piece.end)


def node_path(piece: Piece) -> list[tuple[str, int]]:
    """Path of (element name, sibling index) from the document root to
    the piece's anchored element; index counts element siblings only."""
    if piece.anchor is None:
        raise NoAnchor("piece has no element anchor")
    page = piece.page
    path: list[tuple[str, int]] = []
    nid: int | None = piece.anchor
    while nid is not None:
        node = page.nodes[nid]
        parent = node.parent
        if parent is None:
            path.append((node.name, 0))
        else:
            siblings = [c for c in page.nodes[parent].children if page.nodes[c].kind == "element"]
            path.append((node.name, siblings.index(nid)))
        nid = parent
    path.reverse()
    return path
