"""Collects one pass/fail line per acceptance criterion."""

RESULTS = {}


def record(number, title, ok, detail=""):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
    RESULTS[number] = line
    print(line)
    return ok
