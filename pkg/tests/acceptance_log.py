"""Per-criterion outcomes collected by the acceptance tests."""

RESULTS: dict[int, tuple[bool, str]] = {}


def record(k: int, ok: bool, detail: str) -> bool:
    RESULTS[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    return bool(ok)
