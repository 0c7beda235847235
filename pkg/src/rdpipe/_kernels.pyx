# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled hot kernels: edit distance and string-aware bracket matching."""

from libc.stdlib cimport malloc, free


def levenshtein(str a, str b):
    cdef Py_ssize_t n, m, i, j
    cdef Py_ssize_t *prev
    cdef Py_ssize_t *cur
    cdef Py_ssize_t *tmp
    cdef Py_ssize_t best, cand
    cdef Py_UCS4 ca
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    n = len(a)
    m = len(b)
    if m == 0:
        return n
    prev = <Py_ssize_t *> malloc((m + 1) * sizeof(Py_ssize_t))
    cur = <Py_ssize_t *> malloc((m + 1) * sizeof(Py_ssize_t))
    if prev == NULL or cur == NULL:
        free(prev)
        free(cur)
        raise MemoryError()
    try:
        for j in range(m + 1):
            prev[j] = j
        for i in range(1, n + 1):
            ca = a[i - 1]
            cur[0] = i
            for j in range(1, m + 1):
                best = prev[j] + 1
                cand = cur[j - 1] + 1
                if cand < best:
                    best = cand
                cand = prev[j - 1] + (0 if ca == b[j - 1] else 1)
                if cand < best:
                    best = cand
                cur[j] = best
            tmp = prev
            prev = cur
            cur = tmp
        return prev[m]
    finally:
        free(prev)
        free(cur)


def find_balanced_end(str text, Py_ssize_t start):
    cdef Py_ssize_t n = len(text)
    cdef Py_ssize_t i
    cdef Py_UCS4 ch
    cdef bint in_string = False
    cdef bint escaped = False
    cdef bytearray stack
    cdef Py_UCS4 opener = text[start]
    if opener != u'{' and opener != u'[':
        raise ValueError(f"no opening bracket at position {start}")
    stack = bytearray(b'}' if opener == u'{' else b']')
    for i in range(start + 1, n):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == u'\\':
                escaped = True
            elif ch == u'"':
                in_string = False
        elif ch == u'"':
            in_string = True
        elif ch == u'{':
            stack.append(125)
        elif ch == u'[':
            stack.append(93)
        elif ch == u'}' or ch == u']':
            if stack.pop() != <int> ch:
                return -1
            if len(stack) == 0:
                return i + 1
    return -1
