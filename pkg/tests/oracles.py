"""Independent brute-force implementations used to cross-check the
algebra operators and text-stream mapping. These deliberately avoid the
production code paths: the stripper is a naive scanner, the operators
test their defining conditions pairwise."""

from __future__ import annotations

import re

ENTITY_TABLE = {
    "&amp;": "&",
    "&lt;": "<",
    "&gt;": ">",
    "&quot;": '"',
    "&apos;": "'",
    "&nbsp;": " ",
}


def naive_strip(source: str) -> tuple[str, list[int]]:
    """Delete everything between '<' and '>'; return the leftover text
    and each character's source offset. Assumes '<' only opens markup."""
    out = []
    offsets = []
    in_tag = False
    for i, ch in enumerate(source):
        if ch == "<":
            in_tag = True
        elif ch == ">" and in_tag:
            in_tag = False
        elif not in_tag:
            out.append(ch)
            offsets.append(i)
    return "".join(out), offsets


def decode_entities(text: str) -> str:
    """Entity decoding via direct table substitution plus numeric refs."""
    for ref, ch in ENTITY_TABLE.items():
        text = text.replace(ref, ch)
    text = re.sub(r"&#x([0-9a-fA-F]+);", lambda m: chr(int(m.group(1), 16)), text)
    text = re.sub(r"&#([0-9]+);", lambda m: chr(int(m.group(1))), text)
    return text


def pat_spans(source: str, pattern: str) -> list[tuple[int, int]]:
    """strip-then-match oracle: run the pattern over naively stripped
    text and map match offsets back to source spans."""
    stripped, offsets = naive_strip(source)
    spans = []
    for m in re.finditer(pattern, stripped):
        if m.end() == m.start():
            continue
        spans.append((offsets[m.start()], offsets[m.end() - 1] + 1))
    return spans


def before_spans(p_spans, q_spans):
    return [a for a in p_spans if any(a[1] <= b[0] for b in q_spans)]


def after_spans(p_spans, q_spans):
    return [a for a in p_spans if any(b[1] <= a[0] for b in q_spans)]


def inside_spans(p_spans, q_spans):
    return [a for a in p_spans if any(b[0] <= a[0] and a[1] <= b[1] for b in q_spans)]


def contain_spans(p_spans, q_spans):
    return [a for a in p_spans if any(a[0] <= b[0] and b[1] <= a[1] for b in q_spans)]


def intersect_spans(p_spans, q_spans):
    return [
        a for a in p_spans if any(max(a[0], b[0]) < min(a[1], b[1]) for b in q_spans)
    ]


def complement(p_spans, selected):
    chosen = set(selected)
    return [a for a in p_spans if a not in chosen]


def union_spans(p_spans, q_spans):
    return sorted(set(p_spans) | set(q_spans), key=lambda s: (s[0], -s[1]))


def exclude_spans(p_spans, q_spans):
    return sorted(set(p_spans) - set(q_spans), key=lambda s: (s[0], -s[1]))


def canonical(spans):
    return sorted(set(spans), key=lambda s: (s[0], -s[1]))


def walk_elements(page, name=None):
    """Recursive element collector, independent of the iterative walk."""
    found = []

    def visit(nid):
        node = page.nodes[nid]
        if node.kind == "element" and (name is None or node.name == name):
            found.append(nid)
        for child in node.children:
            visit(child)

    for child in page.nodes[page.root].children:
        visit(child)
    return found


def seq_spans(items, tokens) -> list[tuple[int, int]]:
    """Brute-force scan over (kind, name, span) items: attempt a match at
    every position, skip a matched element's subtree, collect leftmost
    non-overlapping occurrences."""

    def attempt(start):
        i = start
        last_end = None
        for token in tokens:
            if i >= len(items):
                return None
            kind, name, span = items[i]
            if token == "#pcdata":
                if kind != "text":
                    return None
            elif kind != "element" or name != token:
                return None
            last_end = span[1]
            i += 1
            if kind == "element":
                while i < len(items) and items[i][2][0] < span[1]:
                    i += 1
        return last_end

    spans = []
    i = 0
    while i < len(items):
        end = attempt(i)
        if end is None:
            i += 1
            continue
        spans.append((items[i][2][0], end))
        while i < len(items) and items[i][2][0] < end:
            i += 1
    return spans
