"""Kernel backend selection.

Prefers the compiled extension; falls back to the pure-Python mirror when the
extension is absent or RADMASK_PURE=1 is set. Downstream code imports the
module-level names and never needs to know which backend won.
"""

from __future__ import annotations

import os

if os.environ.get("RADMASK_PURE") == "1":
    from radmask._kernels import pure as _impl
else:
    try:
        from radmask._kernels import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        from radmask._kernels import pure as _impl

BACKEND = _impl.BACKEND
prepare_automaton = _impl.prepare_automaton
scan_candidates = _impl.scan_candidates
lcs_length = _impl.lcs_length
