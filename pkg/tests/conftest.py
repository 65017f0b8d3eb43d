from fractions import Fraction

from hypothesis import settings, strategies as st

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")


@st.composite
def rational_in(draw, lo: Fraction, hi: Fraction, max_den: int = 60):
    """A rational strictly inside (lo, hi)."""
    den = draw(st.integers(2, max_den))
    k_lo = int(lo * den) + 1
    k_hi = -int(-hi * den) - 1
    if k_lo > k_hi:
        den = 4 * den
        k_lo, k_hi = int(lo * den) + 1, -int(-hi * den) - 1
    return Fraction(draw(st.integers(k_lo, k_hi)), den)


@st.composite
def subcritical_pair(draw, limit_name="1+4/(3d)"):
    """``(d, p)`` with ``1 < p < limit(d)``."""
    from dissnls.types import thresholds

    d = draw(st.integers(1, 3))
    return d, draw(rational_in(Fraction(1), thresholds(d)[limit_name]))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines.items()):
            terminalreporter.write_line(line)
