import mpmath
import pytest

from structdamp import DampingParams

mpmath.mp.dps = 40

# criterion number -> (title, passed); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[num]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {status}  {title}  [{detail}]")


def exact_roots(lam, theta, sigma):
    """High-precision characteristic roots (tau_plus, tau_minus)."""
    lam = mpmath.mpf(lam)
    damping = lam**theta if lam > 0 else (mpmath.mpf(1) if theta == 0 else mpmath.mpf(0))
    stiffness = lam**sigma if lam > 0 else mpmath.mpf(0)
    disc = mpmath.sqrt(mpmath.mpc(damping**2 / 4 - stiffness))
    return -damping / 2 + disc, -damping / 2 - disc, stiffness


def exact_dtk(lam, theta, sigma, t, k):
    """``(d^k E0, d^k E1)`` from the explicit two-root / double-root formulas."""
    tp, tm, stiffness = exact_roots(lam, theta, sigma)
    t = mpmath.mpf(t)
    if abs(tp - tm) < mpmath.mpf(10) ** -30:
        tau = tp
        e1 = lambda j: (j * tau ** (j - 1) if j else 0) * mpmath.exp(tau * t) + tau**j * t * mpmath.exp(tau * t)
    else:
        e1 = lambda j: (tp**j * mpmath.exp(tp * t) - tm**j * mpmath.exp(tm * t)) / (tp - tm)
    if k == 0:
        if abs(tp - tm) < mpmath.mpf(10) ** -30:
            e0 = (1 - tp * t) * mpmath.exp(tp * t)
        else:
            e0 = (tp * mpmath.exp(tm * t) - tm * mpmath.exp(tp * t)) / (tp - tm)
    else:
        e0 = -stiffness * e1(k - 1)
    return float(mpmath.re(e0)), float(mpmath.re(e1(k)))


@pytest.fixture
def effective():
    return DampingParams(1.0, 3.0)
