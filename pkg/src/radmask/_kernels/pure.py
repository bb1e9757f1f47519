"""Pure-Python kernels, interface-identical to the compiled module.

Both backends consume the flattened automaton produced by
radmask.lexicon (CSR edge arrays, failure links, output links) and must
return identical results; tests assert parity on fuzzed inputs.
"""

from __future__ import annotations

BACKEND = "pure"


def prepare_automaton(raw: dict) -> dict:
    # Plain lists are fastest for the interpreter loop.
    return {k: list(v) for k, v in raw.items()}


def scan_candidates(state: dict, text: str) -> list[tuple[int, int, int]]:
    """All boundary-valid pattern occurrences in text as (start, end, pid).

    Single left-to-right pass; candidates may overlap, selection policy is
    applied by the caller. A boundary sits at position i when i is at either
    end of the text or the alnum-ness of text[i-1] and text[i] differs.
    """
    edge_starts = state["edge_starts"]
    edge_chars = state["edge_chars"]
    edge_next = state["edge_next"]
    fail = state["fail"]
    term_pid = state["term_pid"]
    out_link = state["out_link"]
    pat_len = state["pat_len"]

    n = len(text)
    alnum = [ch.isalnum() for ch in text]
    out: list[tuple[int, int, int]] = []
    s = 0
    for i in range(n):
        c = ord(text[i])
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
    a = list(a)
    b = list(b)
    if len(b) > len(a):
        a, b = b, a
    if not b:
        return 0
    m = len(b)
    prev = [0] * (m + 1)
    for x in a:
        curr = [0] * (m + 1)
        for j in range(1, m + 1):
            if x == b[j - 1]:
                curr[j] = prev[j - 1] + 1
            else:
                pj = prev[j]
                cj = curr[j - 1]
                curr[j] = pj if pj >= cj else cj
        prev = curr
    return prev[m]
