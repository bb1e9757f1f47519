"""Kernel contracts: scan and LCS against brute-force oracles, plus
pure/native parity on identical inputs."""

import os
import subprocess
import sys
from itertools import combinations

import numpy as np
import pytest

from radmask import _kernels
from radmask._kernels import pure
from radmask.lexicon import _build_automaton

try:
    from radmask._kernels import _native
except ImportError:  # pragma: no cover - build without a compiler
    _native = None

needs_native = pytest.mark.skipif(_native is None, reason="native kernels not built")
default_selection = pytest.mark.skipif(
    os.environ.get("RADMASK_PURE") == "1", reason="pure backend forced by env"
)


# ---------------------------------------------------------------- oracles


def _boundary(text: str, i: int) -> bool:
    if i == 0 or i == len(text):
        return True
    return text[i - 1].isalnum() != text[i].isalnum()


def oracle_scan(patterns, text):
    """Find every boundary-valid occurrence of every pattern, one find()
    loop per pattern. Quadratic and obviously correct."""
    hits = []
    for pid, pat in enumerate(patterns):
        at = text.find(pat)
        while at != -1:
            end = at + len(pat)
            if _boundary(text, at) and _boundary(text, end):
                hits.append((at, end, pid))
            at = text.find(pat, at + 1)
    return sorted(hits)


def oracle_lcs(a, b):
    """Exhaustive subsequence enumeration, longest first."""
    if len(a) > len(b):
        a, b = b, a
    for k in range(len(a), 0, -1):
        for keep in combinations(range(len(a)), k):
            it = iter(b)
            if all(a[i] in it for i in keep):
                return k
    return 0


def _random_patterns(rng, n):
    vocab = ["ab", "ba", "abc", "a", "b", "c", "cab"]
    pats = set()
    while len(pats) < n:
        words = rng.integers(1, 4)
        pats.add(" ".join(vocab[rng.integers(len(vocab))] for _ in range(words)))
    return sorted(pats)


def _random_text(rng, length):
    chars = "abc c. ,"
    return "".join(chars[rng.integers(len(chars))] for _ in range(length))


# ----------------------------------------------------------------- tests


def test_scan_matches_bruteforce():
    rng = np.random.default_rng(101)
    for _ in range(150):
        pats = _random_patterns(rng, int(rng.integers(1, 8)))
        text = _random_text(rng, int(rng.integers(0, 60)))
        state = pure.prepare_automaton(_build_automaton(tuple(pats)))
        got = sorted(pure.scan_candidates(state, text))
        assert got == oracle_scan(pats, text), (pats, text)


def test_lcs_matches_bruteforce():
    rng = np.random.default_rng(202)
    for _ in range(200):
        a = [int(x) for x in rng.integers(0, 4, size=rng.integers(0, 9))]
        b = [int(x) for x in rng.integers(0, 4, size=rng.integers(0, 9))]
        assert pure.lcs_length(a, b) == oracle_lcs(a, b), (a, b)


def test_lcs_basics():
    assert pure.lcs_length([], []) == 0
    assert pure.lcs_length([1, 2, 3], []) == 0
    assert pure.lcs_length(list("abcbdab"), list("bdcaba")) == 4
    assert pure.lcs_length(list("abcd"), list("bd")) == 2


def test_edges_sorted_for_binary_search():
    table = _build_automaton(("ab", "abc", "ba", "ca"))
    starts, chars = table["edge_starts"], table["edge_chars"]
    for s in range(len(starts) - 1):
        row = chars[starts[s] : starts[s + 1]]
        assert row == sorted(row)
        assert len(set(row)) == len(row)


def test_scan_emits_nested_suffix_matches():
    # "abc" hit must also report the nested suffix "bc" via out links.
    pats = ("abc", "bc")
    state = pure.prepare_automaton(_build_automaton(pats))
    got = sorted(pure.scan_candidates(state, "x abc y"))
    # "bc" inside "abc" starts mid-word, so the boundary rule rejects it;
    # standalone it is accepted.
    assert got == [(2, 5, 0)]
    got2 = sorted(pure.scan_candidates(state, "x bc y"))
    assert got2 == [(2, 4, 1)]


@needs_native
@default_selection
def test_native_backend_selected_by_default():
    assert _kernels.BACKEND == "native"


@needs_native
def test_native_pure_parity_scan():
    rng = np.random.default_rng(303)
    for _ in range(150):
        pats = tuple(_random_patterns(rng, int(rng.integers(1, 8))))
        text = _random_text(rng, int(rng.integers(0, 80)))
        table = _build_automaton(pats)
        got_p = sorted(pure.scan_candidates(pure.prepare_automaton(table), text))
        got_n = sorted(_native.scan_candidates(_native.prepare_automaton(table), text))
        assert got_p == got_n, (pats, text)


@needs_native
def test_native_pure_parity_scan_unicode():
    # isalnum must agree across backends outside ASCII too.
    pats = ("caf", "cafe")
    table = _build_automaton(pats)
    for text in ("café cafe", "µ caf x", "caf́ cafe"):
        got_p = sorted(pure.scan_candidates(pure.prepare_automaton(table), text))
        got_n = sorted(_native.scan_candidates(_native.prepare_automaton(table), text))
        assert got_p == got_n, text


@needs_native
def test_native_pure_parity_lcs():
    rng = np.random.default_rng(404)
    for _ in range(300):
        a = [int(x) for x in rng.integers(0, 6, size=rng.integers(0, 40))]
        b = [int(x) for x in rng.integers(0, 6, size=rng.integers(0, 40))]
        assert pure.lcs_length(a, b) == _native.lcs_length(a, b)


def test_pure_env_override_forces_pure_backend():
    env = dict(os.environ, RADMASK_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "from radmask import _kernels; print(_kernels.BACKEND)"],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    assert out.stdout.strip() == "pure"
