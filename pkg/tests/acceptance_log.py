"""Collects one verdict per acceptance criterion for the end-of-run summary."""

RESULTS = {}


def record(number, ok, detail):
    RESULTS[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    assert ok, detail
