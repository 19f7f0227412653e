"""Collects one verdict per acceptance criterion for the terminal summary."""

RESULTS: dict[int, list[tuple[str, str]]] = {}


def record(criterion: int, status: str, detail: str) -> None:
    RESULTS.setdefault(criterion, []).append((status, detail))


def verdict(parts: list[tuple[str, str]]) -> str:
    statuses = {s for s, _ in parts}
    if "FAIL" in statuses:
        return "FAIL"
    if "SKIP" in statuses:
        return "SKIP"
    return "PASS"
