"""Compare the compiled matcher/LCS kernels against the pure-Python mirror.

Times dictionary scanning over synthetic report text at several text sizes
and two lexicon sizes (scan time should grow with text length, not pattern
count), then LCS on random int sequences. Run from the repo root:

    python3 benchmarks/bench_kernels.py [--repeats 5] [--seed 0]
"""

import argparse
import time

import numpy as np

from radmask._kernels import pure
from radmask.lexicon import _build_automaton

try:
    from radmask._kernels import _native
except ImportError:
    _native = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def make_words(rng, n, lo=3, hi=10):
    letters = "abcdefghijklmnopqrstuvwxyz"
    return [
        "".join(letters[i] for i in rng.integers(0, 26, size=rng.integers(lo, hi)))
        for _ in range(n)
    ]


def make_text(rng, words, phrases, n_chars):
    parts = []
    total = 0
    while total < n_chars:
        chunk = words[int(rng.integers(0, len(words)))]
        if rng.random() < 0.05:  # sprinkle real mentions so hits occur
            chunk = phrases[int(rng.integers(0, len(phrases)))]
        parts.append(chunk)
        total += len(chunk) + 1
    return " ".join(parts)


def bench_scan(rng, repeats):
    backends = [("pure", pure)] + ([("native", _native)] if _native else [])
    word_pool = make_words(rng, 400)
    print("\ndictionary scan (times in ms, best of %d)" % repeats)
    header = f"{'chars':>9} {'patterns':>9}" + "".join(f"{name:>10}" for name, _ in backends)
    if _native:
        header += f"{'speedup':>9}"
    print(header)
    for n_patterns in (500, 2000):
        phrases = [
            " ".join(word_pool[int(i)] for i in rng.integers(0, 400, size=2))
            for _ in range(n_patterns)
        ]
        raw = _build_automaton(tuple(dict.fromkeys(phrases)))
        states = {name: mod.prepare_automaton(raw) for name, mod in backends}
        for n_chars in (100_000, 400_000, 1_600_000):
            text = make_text(rng, word_pool, phrases, n_chars)
            row = f"{len(text):>9} {n_patterns:>9}"
            times = {}
            for name, mod in backends:
                times[name] = best_of(lambda m=mod, s=states[name]: m.scan_candidates(s, text), repeats)
                row += f"{times[name] * 1e3:>10.1f}"
            if _native:
                row += f"{times['pure'] / times['native']:>8.1f}x"
            print(row)


def bench_lcs(rng, repeats):
    backends = [("pure", pure)] + ([("native", _native)] if _native else [])
    print("\nLCS length (times in ms, best of %d)" % repeats)
    header = f"{'len a':>9} {'len b':>9}" + "".join(f"{name:>10}" for name, _ in backends)
    if _native:
        header += f"{'speedup':>9}"
    print(header)
    for n in (200, 500, 1000, 2000):
        a = rng.integers(0, 50, size=n).tolist()
        b = rng.integers(0, 50, size=n).tolist()
        row = f"{n:>9} {n:>9}"
        times = {}
        for name, mod in backends:
            times[name] = best_of(lambda m=mod: m.lcs_length(a, b), repeats)
            row += f"{times[name] * 1e3:>10.1f}"
        if _native:
            row += f"{times['pure'] / times['native']:>8.1f}x"
        print(row)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _native is None:
        print("compiled kernels not built; timing the pure backend only")
    rng = np.random.Generator(np.random.PCG64(args.seed))
    bench_scan(rng, args.repeats)
    bench_lcs(rng, args.repeats)


if __name__ == "__main__":
    main()
