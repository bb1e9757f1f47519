# cython: language_level=3
"""Compiled kernels: automaton text scan and LCS table fill.

Mirrors radmask._kernels.pure; the two must agree exactly.
"""

import numpy as np

cdef extern from "Python.h":
    bint Py_UNICODE_ISALNUM(Py_UCS4 ch)

BACKEND = "native"


def prepare_automaton(raw: dict) -> dict:
    return {
        k: np.ascontiguousarray(np.asarray(v, dtype=np.int32))
        for k, v in raw.items()
    }


def scan_candidates(state: dict, text: unicode) -> list:
    """All boundary-valid pattern occurrences in text as (start, end, pid)."""
    cdef int[::1] edge_starts = state["edge_starts"]
    cdef int[::1] edge_chars = state["edge_chars"]
    cdef int[::1] edge_next = state["edge_next"]
    cdef int[::1] fail = state["fail"]
    cdef int[::1] term_pid = state["term_pid"]
    cdef int[::1] out_link = state["out_link"]
    cdef int[::1] pat_len = state["pat_len"]

    cdef Py_ssize_t n = len(text)
    cdef unsigned char[::1] alnum = np.empty(n if n else 1, dtype=np.uint8)
    cdef Py_ssize_t i
    for i in range(n):
        alnum[i] = Py_UNICODE_ISALNUM(text[i])

    out = []
    cdef int s = 0
    cdef int c, nxt, lo, hi, mid, ec, t, pid
    cdef Py_ssize_t start, end
    for i in range(n):
        c = <int> (<Py_UCS4> text[i])
        while True:
            lo = edge_starts[s]
            hi = edge_starts[s + 1]
            nxt = -1
            while lo < hi:
                mid = (lo + hi) >> 1
                ec = edge_chars[mid]
                if ec == c:
                    nxt = edge_next[mid]
                    break
                if ec < c:
                    lo = mid + 1
                else:
                    hi = mid
            if nxt != -1:
                s = nxt
                break
            if s == 0:
                break
            s = fail[s]
        t = s if term_pid[s] != -1 else out_link[s]
        while t != -1:
            pid = term_pid[t]
            end = i + 1
            start = end - pat_len[pid]
            if (start == 0 or alnum[start - 1] != alnum[start]) and (
                end == n or alnum[end - 1] != alnum[end]
            ):
                out.append((start, end, pid))
            t = out_link[t]
    return out


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence of two int sequences."""
    cdef int[::1] av = np.ascontiguousarray(np.asarray(a, dtype=np.int32))
    cdef int[::1] bv = np.ascontiguousarray(np.asarray(b, dtype=np.int32))
    if av.shape[0] < bv.shape[0]:
        av, bv = bv, av
    cdef Py_ssize_t n = av.shape[0]
    cdef Py_ssize_t m = bv.shape[0]
    if m == 0:
        return 0
    cdef int[::1] prev = np.zeros(m + 1, dtype=np.int32)
    cdef int[::1] curr = np.zeros(m + 1, dtype=np.int32)
    cdef int[::1] tmp
    cdef Py_ssize_t i, j
    cdef int x, pj, cj
    for i in range(n):
        x = av[i]
        curr[0] = 0
        for j in range(1, m + 1):
            if x == bv[j - 1]:
                curr[j] = prev[j - 1] + 1
            else:
                pj = prev[j]
                cj = curr[j - 1]
                curr[j] = pj if pj >= cj else cj
        tmp = prev
        prev = curr
        curr = tmp
    return prev[m]
