"""Exact scalars: arbitrary-precision rationals extended with two infinities.

Every length, slope, log-norm and epsilon bound in this library is either a
``fractions.Fraction`` (when it is known to be finite) or an
:class:`ExtendedRational` (when an infinity may occur).  No floating point is
used anywhere; all comparisons and acceptance checks are exact.
"""

from __future__ import annotations

from fractions import Fraction
from functools import total_ordering
from typing import Union

RationalLike = Union[int, Fraction, "ExtendedRational"]


@total_ordering
class ExtendedRational:
    """A rational number, ``+inf`` or ``-inf``, with exact arithmetic.

    The indeterminate forms ``inf - inf``, ``0 * inf`` and division involving
    two infinities raise :class:`ArithmeticError`; they are never silently
    collapsed to a value.  Comparison is total, with
    ``-inf < every rational < +inf``.
    """

    __slots__ = ("_inf", "_q")

    def __init__(self, value: RationalLike | str = 0):
        if isinstance(value, ExtendedRational):
            self._inf, self._q = value._inf, value._q
        elif isinstance(value, (int, Fraction)):
            self._inf, self._q = 0, Fraction(value)
        elif isinstance(value, str):
            text = value.strip()
            if text in ("inf", "+inf"):
                self._inf, self._q = 1, None
            elif text == "-inf":
                self._inf, self._q = -1, None
            else:
                self._inf, self._q = 0, Fraction(text)
        else:
            raise TypeError(f"cannot build an ExtendedRational from {value!r}")

    # ------------------------------------------------------------- predicates

    @property
    def finite(self) -> bool:
        return self._inf == 0

    @property
    def infinite(self) -> bool:
        return self._inf != 0

    def as_fraction(self) -> Fraction:
        """The underlying Fraction; raises if the value is infinite."""
        if self._inf != 0:
            raise ArithmeticError(f"{self} is not a finite rational")
        return self._q

    def sign(self) -> int:
        if self._inf != 0:
            return self._inf
        return (self._q > 0) - (self._q < 0)

    # ------------------------------------------------------------- arithmetic

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self._inf == 0 and other._inf == 0:
            return ExtendedRational(self._q + other._q)
        if self._inf != 0 and other._inf != 0:
            if self._inf != other._inf:
                raise ArithmeticError("inf + (-inf) is undefined")
            return self
        return self if self._inf != 0 else other

    __radd__ = __add__

    def __neg__(self):
        if self._inf != 0:
            return NEG_INF if self._inf > 0 else INF
        return ExtendedRational(-self._q)

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self._inf == 0 and other._inf == 0:
            return ExtendedRational(self._q * other._q)
        s = self.sign() * other.sign()
        if s == 0:
            raise ArithmeticError("0 * inf is undefined")
        return INF if s > 0 else NEG_INF

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other._inf != 0:
            if self._inf != 0:
                raise ArithmeticError("inf / inf is undefined")
            return ExtendedRational(0)
        if other._q == 0:
            raise ZeroDivisionError("division by zero")
        if self._inf != 0:
            return INF if self._inf * other.sign() > 0 else NEG_INF
        return ExtendedRational(self._q / other._q)

    # -------------------------------------------------------------- ordering

    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._inf == other._inf and self._q == other._q

    def __lt__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self._inf != other._inf:
            return self._inf < other._inf
        if self._inf != 0:
            return False
        return self._q < other._q

    def __hash__(self):
        if self._inf != 0:
            return hash(("ExtendedRational", self._inf))
        return hash(self._q)

    def __repr__(self):
        return f"ExtendedRational({str(self)!r})"

    def __str__(self):
        if self._inf > 0:
            return "inf"
        if self._inf < 0:
            return "-inf"
        return str(self._q)

    def __bool__(self):
        return self._inf != 0 or self._q != 0


INF = ExtendedRational("inf")
NEG_INF = ExtendedRational("-inf")
ZERO = ExtendedRational(0)


def _coerce(value):
    if isinstance(value, ExtendedRational):
        return value
    if isinstance(value, (int, Fraction)):
        return ExtendedRational(value)
    return NotImplemented


def ext(value: RationalLike | str) -> ExtendedRational:
    """Coerce ints, Fractions and strings to :class:`ExtendedRational`."""
    return ExtendedRational(value)


def parse_fraction(value) -> Fraction:
    """Parse a finite rational from an int or a ``"p/q"`` string."""
    if isinstance(value, bool):
        raise ValueError(f"not a rational: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise ValueError(f"not a rational: {value!r}")


def parse_extended(value) -> ExtendedRational:
    """Parse a rational or ``"inf"``/``"-inf"`` into an ExtendedRational."""
    if isinstance(value, bool):
        raise ValueError(f"not a rational: {value!r}")
    if isinstance(value, (int, Fraction, str, ExtendedRational)):
        return ExtendedRational(value)
    raise ValueError(f"not a rational: {value!r}")


def encode_value(value) -> int | str:
    """Scene-file encoding: integers stay integers, otherwise ``"p/q"`` text."""
    if isinstance(value, ExtendedRational):
        if not value.finite:
            return str(value)
        value = value.as_fraction()
    value = Fraction(value)
    if value.denominator == 1:
        return int(value)
    return str(value)


def format_exact(value) -> str:
    """CLI encoding: always ``p/q`` (so ``0`` prints as ``0/1``), or ``inf``."""
    if isinstance(value, ExtendedRational):
        if not value.finite:
            return str(value)
        value = value.as_fraction()
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"
