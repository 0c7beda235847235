"""Collected pass/fail lines for the acceptance suite, printed at session end."""

REPORT: list[str] = []


def record(number: int, title: str, ok: bool, detail: str) -> str:
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    REPORT.append(line)
    print(line)
    return line
