"""Pure-Python implementations of the hot kernels.

Used when the compiled extension is unavailable or when
``RDPIPE_PURE_PYTHON=1`` is set. Semantics must match ``_kernels.pyx``
exactly; the test-suite runs both backends against the same oracles.
"""

from __future__ import annotations

_CLOSERS = {"{": "}", "[": "]"}


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance between two strings (two-row DP)."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cost = 0 if ca == cb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def find_balanced_end(text: str, start: int) -> int:
    """Return the index just past the bracket closing ``text[start]``.

    ``text[start]`` must be ``{`` or ``[``. Brackets inside JSON string
    literals are ignored. Returns -1 when the value never closes or when
    the nesting is inconsistent (e.g. ``{]``).
    """
    opener = text[start]
    if opener not in _CLOSERS:
        raise ValueError(f"no opening bracket at position {start}")
    stack = [_CLOSERS[opener]]
    in_string = False
    escaped = False
    i = start + 1
    n = len(text)
    while i < n:
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == "{" or ch == "[":
            stack.append(_CLOSERS[ch])
        elif ch == "}" or ch == "]":
            if stack.pop() != ch:
                return -1
            if not stack:
                return i + 1
        i += 1
    return -1
