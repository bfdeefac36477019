"""Collects one PASS/FAIL line per release criterion for the run summary."""

LINES: list[str] = []


def record(name: str, ok: bool, detail: str) -> bool:
    """Append a summary line and return ``ok`` so callers can assert on it."""
    LINES.append(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok
