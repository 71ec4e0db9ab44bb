"""Text formats for trees and sin-trees.

LUK v1     header line, then the DFS child counts separated by single spaces.
PAREN v1   header line, then one line where every vertex prints "(" followed
           by the prints of its children and ")"; the root's print is the line.
SIN v1     header line, then one line per spine vertex: "k j" followed by the
           k-1 bushes in birth order (left ones first), each as " [counts]".

Every file ends with a newline. Parsers report the byte offset of the first
problem and what was expected there.
"""
from __future__ import annotations

from .ordered import OrderedTree, PathFormatError
from .sintree import SinTree, SpineRecord

__all__ = ["TreeFormatError", "dumps_luk", "loads_luk", "dumps_paren", "loads_paren", "dumps_sin", "loads_sin", "loads_any"]


class TreeFormatError(ValueError):
    def __init__(self, offset: int, expected: str, found: str = ""):
        msg = f"at byte {offset}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)
        self.offset = offset
        self.expected = expected


def _header(text: str, name: str) -> int:
    # Restricting to ASCII makes character and byte offsets coincide.
    if not text.isascii():
        bad = next(i for i, c in enumerate(text) if not c.isascii())
        raise TreeFormatError(_byte_offset(text, bad), "ASCII text", text[bad])
    head = f"{name} v1\n"
    if not text.startswith(head):
        line = text.split("\n", 1)[0]
        raise TreeFormatError(0, f"header {head[:-1]!r}", line[:20])
    return len(head.encode())


def _parse_counts(text: str, start: int, stop_chars: str) -> tuple[list[int], int]:
    """Reads space-separated decimal counts from ``start`` until a char in ``stop_chars``."""
    counts = []
    i = start
    while True:
        j = i
        while j < len(text) and text[j].isdigit() and text[j].isascii():
            j += 1
        if j == i:
            raise TreeFormatError(i, "a decimal child count", text[i : i + 1])
        counts.append(int(text[i:j]))
        if j >= len(text):
            raise TreeFormatError(j, f"one of {stop_chars!r} or a space")
        if text[j] == " ":
            i = j + 1
            continue
        if text[j] in stop_chars:
            return counts, j
        raise TreeFormatError(j, f"one of {stop_chars!r} or a space", text[j])


def _tree(counts: list[int], offset: int) -> OrderedTree:
    try:
        return OrderedTree(tuple(counts))
    except PathFormatError as exc:
        raise TreeFormatError(offset, f"child counts of one tree ({exc})") from None


def _byte_offset(text: str, i: int) -> int:
    return len(text[:i].encode())


def dumps_luk(t: OrderedTree) -> str:
    return "LUK v1\n" + " ".join(map(str, t.kids)) + "\n"


def loads_luk(text: str) -> OrderedTree:
    start = _header(text, "LUK")
    counts, end = _parse_counts(text, start, "\n")
    if end + 1 != len(text):
        raise TreeFormatError(end + 1, "end of input", text[end + 1 : end + 21])
    return _tree(counts, start)


def dumps_paren(t: OrderedTree) -> str:
    parts = []
    open_kids = []  # remaining children of each open vertex
    for k in t.kids:
        parts.append("(")
        open_kids.append(k)
        while open_kids and open_kids[-1] == 0:
            open_kids.pop()
            parts.append(")")
            if open_kids:
                open_kids[-1] -= 1
    return "PAREN v1\n" + "".join(parts) + "\n"


def loads_paren(text: str) -> OrderedTree:
    start = _header(text, "PAREN")
    kids: list[int] = []
    stack: list[int] = []  # DFS index of each open vertex
    i = start
    while i < len(text):
        ch = text[i]
        if ch == "(":
            if not stack and kids:
                raise TreeFormatError(i, "newline after the root closes", ch)
            if stack:
                kids[stack[-1]] += 1
            stack.append(len(kids))
            kids.append(0)
        elif ch == ")":
            if not stack:
                raise TreeFormatError(i, "'(' opening a vertex", ch)
            stack.pop()
        elif ch == "\n":
            if stack or not kids:
                raise TreeFormatError(i, "')'" if stack else "'('", "\\n")
            if i + 1 != len(text):
                raise TreeFormatError(i + 1, "end of input", text[i + 1 : i + 21])
            return OrderedTree(tuple(kids))
        else:
            raise TreeFormatError(i, "'(' or ')'", ch)
        i += 1
    raise TreeFormatError(len(text), "')'" if stack else "newline")


def dumps_sin(st: SinTree) -> str:
    lines = ["SIN v1"]
    for s in st.spine:
        bushes = "".join(" [" + " ".join(map(str, b.kids)) + "]" for b in s.left + s.right)
        lines.append(f"{s.k} {s.j}{bushes}")
    return "\n".join(lines) + "\n"


def loads_sin(text: str) -> SinTree:
    i = _header(text, "SIN")
    spine = []
    while i < len(text):
        line = i
        (k, j), i = _parse_pair(text, i)
        bushes = []
        while text[i] == " ":
            if i + 1 >= len(text) or text[i + 1] != "[":
                raise TreeFormatError(i + 1, "'[' opening a bush")
            counts, end = _parse_counts(text, i + 2, "]")
            bushes.append(_tree(counts, i + 2))
            i = end + 1
            if i >= len(text):
                raise TreeFormatError(i, "a space or newline")
        if text[i] != "\n":
            raise TreeFormatError(i, "a space or newline", text[i])
        if not 1 <= j <= k:
            raise TreeFormatError(line + len(str(k)) + 1, f"spine rank 1 <= j <= k (got k={k}, j={j})")
        if len(bushes) != k - 1:
            raise TreeFormatError(i, f"{k - 1} bushes for k={k}, got {len(bushes)}")
        spine.append(SpineRecord(k, j, tuple(bushes[: j - 1]), tuple(bushes[j - 1 :])))
        i += 1
    if not spine:
        raise TreeFormatError(i, "at least one spine line")
    return SinTree(tuple(spine))


def _parse_pair(text: str, i: int) -> tuple[tuple[int, int], int]:
    values = []
    for sep in " ", " \n":
        j = i
        while j < len(text) and "0" <= text[j] <= "9":
            j += 1
        if j == i:
            raise TreeFormatError(i, "a decimal count", text[i : i + 1])
        values.append(int(text[i:j]))
        if j >= len(text) or text[j] not in sep:
            raise TreeFormatError(j, "a space" if sep == " " else "a space or newline", text[j : j + 1])
        i = j + 1 if sep == " " else j
    return (values[0], values[1]), i


def loads_any(text: str):
    """Dispatches on the header line."""
    head = text.split("\n", 1)[0]
    if head == "LUK v1":
        return loads_luk(text)
    if head == "PAREN v1":
        return loads_paren(text)
    if head == "SIN v1":
        return loads_sin(text)
    raise TreeFormatError(0, "one of the headers 'LUK v1', 'PAREN v1', 'SIN v1'", head[:20])
