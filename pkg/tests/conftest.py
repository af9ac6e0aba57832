import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_circumcircle_ok(coords, edges, tol=1e-9):
    """An edge (a, b) is Delaunay iff some circle through a and b has no site strictly inside.

    Checked over every third site c that forms a triangle with (a, b): the
    edge is valid if at least one such triangle has an empty circumcircle.
    Independent of scipy: plain determinant arithmetic.
    """
    pts = [tuple(map(float, p)) for p in coords]
    n = len(pts)

    def in_circle(a, b, c, d):
        # > 0 when d lies strictly inside the circumcircle of counter-clockwise (a, b, c)
        rows = [(p[0] - d[0], p[1] - d[1]) for p in (a, b, c)]
        m = [(x, y, x * x + y * y) for x, y in rows]
        return (
            m[0][0] * (m[1][1] * m[2][2] - m[2][1] * m[1][2])
            - m[0][1] * (m[1][0] * m[2][2] - m[2][0] * m[1][2])
            + m[0][2] * (m[1][0] * m[2][1] - m[2][0] * m[1][1])
        )

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    scale = max(max(abs(v) for p in pts for v in p), 1.0) ** 4
    for a, b in edges:
        ok = False
        for c in range(n):
            if c in (a, b) or abs(orient(pts[a], pts[b], pts[c])) < 1e-12:
                continue
            p, q, r = (pts[a], pts[b], pts[c]) if orient(pts[a], pts[b], pts[c]) > 0 else (pts[a], pts[c], pts[b])
            if all(in_circle(p, q, r, pts[d]) <= tol * scale for d in range(n) if d not in (a, b, c)):
                ok = True
                break
        if not ok:
            return False
    return True


CRITERIA_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} ({detail})"
    CRITERIA_LINES.append(line)
    print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)
