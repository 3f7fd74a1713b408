"""The tiny date-format language used by rules and fixtures.

Supported tokens: dd (zero-padded day), MM (month), yyyy (year). A
backslash keeps the next character literal; everything else is copied
through verbatim.
"""

from __future__ import annotations

import re
from datetime import date

__all__ = ["BadFormat", "format_date", "today_regex"]


class BadFormat(Exception):
    """Unknown token in a date format string."""


def format_date(value: date, fmt: str) -> str:
    out = []
    i = 0
    n = len(fmt)
    while i < n:
        ch = fmt[i]
        if ch == "\\" and i + 1 < n:
            out.append(fmt[i + 1])
            i += 2
        elif ch.isalpha():
            if fmt.startswith("dd", i):
                out.append(f"{value.day:02d}")
                i += 2
            elif fmt.startswith("MM", i):
                out.append(f"{value.month:02d}")
                i += 2
            elif fmt.startswith("yyyy", i):
                out.append(f"{value.year:04d}")
                i += 4
            else:
                raise BadFormat(f"unknown token at {i} in date format {fmt!r}")
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def today_regex(value: date, fmt: str) -> str:
    """Format the date and escape it for literal regex use."""
    return re.escape(format_date(value, fmt))
