"""Arithmetic on the extended non-negative reals, R>=0 together with infinity.

Values are exact rationals by default (unbounded numerator/denominator).
Floats enter only through scaled exponentials or explicit float input and
taint every result they touch. Subtraction is truncated ("monus"):
a - b = max(0, a - b), and infinity - x = infinity for every x, including
infinity - infinity. Multiplication uses the measure-theoretic convention
0 * infinity = 0 so that probability-zero branches with infinite reward
contribute nothing to expected-value sums.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

_Numeric = Union[int, float, Fraction, "ExtReal"]


class ExtRealError(ValueError):
    pass


class ExtReal:
    """A value in R>=0 or infinity; exact (Fraction) or float-tagged."""

    __slots__ = ("_val",)

    # _val is a Fraction (exact), a float (inexact), or None (infinity).

    def __init__(self, value: _Numeric):
        if isinstance(value, ExtReal):
            self._val = value._val
            return
        if isinstance(value, bool):
            raise ExtRealError("booleans are not extended reals")
        if isinstance(value, (int, Fraction)):
            if value < 0:
                raise ExtRealError("negative value %r" % (value,))
            self._val = Fraction(value)
        elif isinstance(value, float):
            if math.isnan(value):
                raise ExtRealError("NaN is not an extended real")
            if value == math.inf:
                self._val = None
            elif value < 0:
                raise ExtRealError("negative value %r" % (value,))
            else:
                self._val = value
        else:
            raise ExtRealError("cannot build ExtReal from %r" % (value,))

    @classmethod
    def _wrap(cls, val) -> "ExtReal":
        out = object.__new__(cls)
        out._val = val
        return out

    @classmethod
    def infinity(cls) -> "ExtReal":
        return cls._wrap(None)

    # -- predicates ---------------------------------------------------------

    @property
    def is_infinite(self) -> bool:
        return self._val is None

    @property
    def is_exact(self) -> bool:
        """Exact means rational or infinite; floats are inexact."""
        return not isinstance(self._val, float)

    @property
    def is_zero(self) -> bool:
        return self._val == 0

    def as_fraction(self) -> Fraction:
        if self._val is None or isinstance(self._val, float):
            raise ExtRealError("%s is not an exact rational" % self)
        return self._val

    def __float__(self) -> float:
        return math.inf if self._val is None else float(self._val)

    def is_integral(self) -> bool:
        v = self._val
        if v is None:
            return False
        if isinstance(v, float):
            return v.is_integer()
        return v.denominator == 1

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: _Numeric) -> "ExtReal":
        other = _coerce(other)
        if self._val is None or other._val is None:
            return INF
        return ExtReal._wrap(self._val + other._val)

    __radd__ = __add__

    def __sub__(self, other: _Numeric) -> "ExtReal":
        """Monus: max(0, self - other); infinity - x = infinity."""
        other = _coerce(other)
        if self._val is None:
            return INF
        if other._val is None:
            return ExtReal._wrap(self._val * 0)  # keeps float taint
        diff = self._val - other._val
        if diff < 0:
            diff = diff * 0
        return ExtReal._wrap(diff)

    def monus(self, other: _Numeric) -> "ExtReal":
        return self - other

    def __mul__(self, other: _Numeric) -> "ExtReal":
        other = _coerce(other)
        a, b = self._val, other._val
        if a is None:
            return ZERO if b == 0 else INF
        if b is None:
            return ZERO if a == 0 else INF
        return ExtReal._wrap(a * b)

    __rmul__ = __mul__

    def __truediv__(self, other: _Numeric) -> "ExtReal":
        other = _coerce(other)
        a, b = self._val, other._val
        if b is None:
            if a is None:
                raise ExtRealError("infinity / infinity is undefined")
            return ZERO
        if b == 0:
            raise ZeroDivisionError("division by zero")
        if a is None:
            return INF
        return ExtReal._wrap(a / b)

    def __pow__(self, k: int) -> "ExtReal":
        """Exact k-fold product for natural k; 0^0 = 1, inf^0 = 1."""
        if not isinstance(k, int) or k < 0:
            raise ExtRealError("pow exponent must be a natural number, got %r" % (k,))
        if k == 0:
            return ONE
        if self._val is None:
            return INF
        return ExtReal._wrap(self._val**k)

    # -- ordering -----------------------------------------------------------

    def _cmp_key(self):
        return math.inf if self._val is None else self._val

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, float, Fraction)):
            other = _coerce(other)
        if not isinstance(other, ExtReal):
            return NotImplemented
        return self._cmp_key() == other._cmp_key()

    def __hash__(self):
        return hash(self._cmp_key())

    def __lt__(self, other: _Numeric) -> bool:
        return self._cmp_key() < _coerce(other)._cmp_key()

    def __le__(self, other: _Numeric) -> bool:
        return self._cmp_key() <= _coerce(other)._cmp_key()

    def __gt__(self, other: _Numeric) -> bool:
        return self._cmp_key() > _coerce(other)._cmp_key()

    def __ge__(self, other: _Numeric) -> bool:
        return self._cmp_key() >= _coerce(other)._cmp_key()

    # -- rendering ----------------------------------------------------------

    def __repr__(self):
        return "ExtReal(%s)" % self

    def __str__(self):
        v = self._val
        if v is None:
            return "inf"
        if isinstance(v, float):
            return repr(v)
        if v.denominator == 1:
            return str(v.numerator)
        return "%d/%d" % (v.numerator, v.denominator)


def _coerce(x: _Numeric) -> ExtReal:
    return x if isinstance(x, ExtReal) else ExtReal(x)


ZERO = ExtReal(0)
ONE = ExtReal(1)
INF = ExtReal.infinity()


def gpow(base: _Numeric, exponent: _Numeric) -> ExtReal:
    """base ** exponent for base, exponent in R>=0 or infinity.

    Exact when the exponent is a natural number and the base exact;
    float otherwise. base^inf is 0, 1 or inf as base compares to 1.
    """
    base, exponent = _coerce(base), _coerce(exponent)
    if exponent.is_infinite:
        if base < ONE:
            return ZERO
        if base == ONE:
            return ONE
        return INF
    if base.is_infinite:
        return ONE if exponent.is_zero else INF
    if exponent.is_exact and exponent.as_fraction().denominator == 1:
        n = exponent.as_fraction().numerator
        if base.is_exact:
            return ExtReal._wrap(base.as_fraction() ** n)
        try:
            return ExtReal._wrap(float(base) ** n)
        except OverflowError:
            return INF
    try:
        return ExtReal(float(base) ** float(exponent))
    except OverflowError:
        return INF


def exp_scaled(t: _Numeric, x: _Numeric) -> ExtReal:
    """e^(t*x) for t >= 0. Exactly 1 when t = 0, float-tagged otherwise."""
    t, x = _coerce(t), _coerce(x)
    if t < ZERO:
        raise ExtRealError("exp_scaled requires t >= 0, got %s" % t)
    if t.is_zero:
        return ONE
    if x.is_infinite or t.is_infinite:
        return INF
    try:
        return ExtReal(math.exp(float(t) * float(x)))
    except OverflowError:
        return INF


def parse_extreal(text: str) -> ExtReal:
    """Parse `p/q`, decimal, integer, or `inf` (decimals become exact)."""
    text = text.strip()
    if text == "inf":
        return INF
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return ExtReal(Fraction(int(num), int(den)))
        return ExtReal(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ExtRealError("cannot parse %r as an extended real" % text) from exc
