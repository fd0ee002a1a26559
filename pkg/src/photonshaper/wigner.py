"""Angular-momentum coupling coefficients via Racah factorial sums.

All symbols are evaluated exactly with integer/Fraction arithmetic inside the
factorial sums, so results are exact up to the final floating-point square
root.  Quantum numbers may be integers or half-integers; they are validated
against twice-integer representability.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

__all__ = ["wigner_3j", "wigner_6j", "clebsch_gordan"]


def _two(j) -> int:
    """Return 2*j as an exact int, rejecting non-(half-)integer input."""
    twoj = 2 * j
    rounded = round(twoj)
    if abs(twoj - rounded) > 1e-9:
        raise ValueError(f"quantum number {j} is not integer or half-integer")
    return int(rounded)


def _triangle_ok(tj1: int, tj2: int, tj3: int) -> bool:
    return (
        abs(tj1 - tj2) <= tj3 <= tj1 + tj2
        and (tj1 + tj2 + tj3) % 2 == 0
    )


def _fac(n: int) -> int:
    if n < 0:
        raise ValueError("negative factorial in coupling sum")
    return math.factorial(n)


@lru_cache(maxsize=None)
def _wigner_3j_squared_and_sign(tj1, tj2, tj3, tm1, tm2, tm3):
    """Core Racah evaluation on doubled quantum numbers.

    Returns (value**2 as Fraction, sign in {-1, 0, +1}).
    """
    if tm1 + tm2 + tm3 != 0:
        return Fraction(0), 0
    if not _triangle_ok(tj1, tj2, tj3):
        return Fraction(0), 0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tm3) > tj3:
        return Fraction(0), 0
    if (tj1 - tm1) % 2 or (tj2 - tm2) % 2 or (tj3 - tm3) % 2:
        # m must differ from j by an integer
        return Fraction(0), 0

    # All arguments below are guaranteed integers (sums of doubled values
    # with matching parity, divided by 2).
    def half(x):
        assert x % 2 == 0
        return x // 2

    j1pj2mj3 = half(tj1 + tj2 - tj3)
    j1mj2pj3 = half(tj1 - tj2 + tj3)
    mj1pj2pj3 = half(-tj1 + tj2 + tj3)
    j1mm1 = half(tj1 - tm1)
    j1pm1 = half(tj1 + tm1)
    j2mm2 = half(tj2 - tm2)
    j2pm2 = half(tj2 + tm2)
    j3mm3 = half(tj3 - tm3)
    j3pm3 = half(tj3 + tm3)

    delta = Fraction(
        _fac(j1pj2mj3) * _fac(j1mj2pj3) * _fac(mj1pj2pj3),
        _fac(half(tj1 + tj2 + tj3) + 1),
    )

    norm = (
        _fac(j1mm1) * _fac(j1pm1) * _fac(j2mm2) * _fac(j2pm2)
        * _fac(j3mm3) * _fac(j3pm3)
    )

    kmin = max(0, half(tj2 - tj3 - tm1), half(tj1 - tj3 + tm2))
    kmax = min(j1pj2mj3, j1mm1, j2pm2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        denom = (
            _fac(k)
            * _fac(j1pj2mj3 - k)
            * _fac(j1mm1 - k)
            * _fac(j2pm2 - k)
            * _fac(half(tj3 - tj2 + tm1) + k)
            * _fac(half(tj3 - tj1 - tm2) + k)
        )
        term = Fraction((-1) ** k, denom)
        total += term

    phase = (-1) ** half(tj1 - tj2 - tm3)
    value_sq = delta * norm * total * total
    if total == 0:
        return Fraction(0), 0
    sign = phase * (1 if total > 0 else -1)
    return value_sq, sign


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3-j symbol (j1 j2 j3; m1 m2 m3).

    Selection-rule violations return exactly 0.0 rather than raising.
    """
    value_sq, sign = _wigner_3j_squared_and_sign(
        _two(j1), _two(j2), _two(j3), _two(m1), _two(m2), _two(m3)
    )
    return sign * math.sqrt(float(value_sq))


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | j m>."""
    if _two(m1) + _two(m2) != _two(m):
        return 0.0
    phase = (-1) ** ((_two(j1) - _two(j2) + _two(m)) // 2)
    return phase * math.sqrt(_two(j) + 1.0) * wigner_3j(j1, j2, j, m1, m2, -m)


@lru_cache(maxsize=None)
def _wigner_6j_two(tj1, tj2, tj3, tj4, tj5, tj6):
    triads = (
        (tj1, tj2, tj3),
        (tj1, tj5, tj6),
        (tj4, tj2, tj6),
        (tj4, tj5, tj3),
    )
    for ta, tb, tc in triads:
        if not _triangle_ok(ta, tb, tc):
            return 0.0

    def half(x):
        assert x % 2 == 0
        return x // 2

    def tri(ta, tb, tc):
        return Fraction(
            _fac(half(ta + tb - tc)) * _fac(half(ta - tb + tc)) * _fac(half(-ta + tb + tc)),
            _fac(half(ta + tb + tc) + 1),
        )

    pre = tri(*triads[0]) * tri(*triads[1]) * tri(*triads[2]) * tri(*triads[3])

    a1 = half(tj1 + tj2 + tj3)
    a2 = half(tj1 + tj5 + tj6)
    a3 = half(tj4 + tj2 + tj6)
    a4 = half(tj4 + tj5 + tj3)
    b1 = half(tj1 + tj2 + tj4 + tj5)
    b2 = half(tj2 + tj3 + tj5 + tj6)
    b3 = half(tj3 + tj1 + tj6 + tj4)

    total = Fraction(0)
    for k in range(max(a1, a2, a3, a4), min(b1, b2, b3) + 1):
        num = _fac(k + 1)
        den = (
            _fac(k - a1) * _fac(k - a2) * _fac(k - a3) * _fac(k - a4)
            * _fac(b1 - k) * _fac(b2 - k) * _fac(b3 - k)
        )
        total += Fraction((-1) ** k * num, den)

    if total == 0:
        return 0.0
    sign = 1 if total > 0 else -1
    return sign * math.sqrt(float(pre * total * total))


def wigner_6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6-j symbol {j1 j2 j3; j4 j5 j6}.

    Triangle violations return exactly 0.0.
    """
    return _wigner_6j_two(
        _two(j1), _two(j2), _two(j3), _two(j4), _two(j5), _two(j6)
    )
