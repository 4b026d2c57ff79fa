"""Collects one pass/fail line per acceptance criterion."""

import time
from contextlib import contextmanager

LINES = []


def _record(number, title, status, took, budget, detail=""):
    line = f"criterion {number:2d} {status}: {title} [{took:.2f}s / {budget:g}s]{detail}"
    LINES.append(line)
    print(line)
    return line


@contextmanager
def criterion(number: int, title: str, budget: float):
    """Time a criterion; it passes only if the body raises nothing and
    finishes within ``budget`` seconds."""
    start = time.perf_counter()
    try:
        yield
    except Exception as exc:
        msg = str(exc).splitlines()[0][:160] if str(exc) else type(exc).__name__
        _record(number, title, "FAIL", time.perf_counter() - start, budget, f" ({msg})")
        raise
    took = time.perf_counter() - start
    if took >= budget:
        line = _record(number, title, "FAIL", took, budget, " (over budget)")
        raise AssertionError(line)
    _record(number, title, "PASS", took, budget)
