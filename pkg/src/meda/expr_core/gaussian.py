"""Exact complex-rational arithmetic.

A GaussianRational is a + b*i with a, b exact `fractions.Fraction` values.
All arithmetic stays exact; conversion to a machine complex happens only on
request.
"""

from __future__ import annotations

from fractions import Fraction
from math import isqrt


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        # floats are dyadic rationals; keep them exact
        return Fraction(x)
    raise TypeError(f"cannot build an exact rational from {type(x).__name__}")


class GaussianRational:
    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", _as_fraction(re))
        object.__setattr__(self, "im", _as_fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("GaussianRational is immutable")

    # -- constructors -------------------------------------------------
    @classmethod
    def from_value(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, complex):
            return cls(Fraction(value.real), Fraction(value.imag))
        return cls(_as_fraction(value))

    # -- predicates ---------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    @property
    def is_one(self) -> bool:
        return self.re == 1 and self.im == 0

    @property
    def is_real(self) -> bool:
        return self.im == 0

    @property
    def is_imaginary(self) -> bool:
        return self.re == 0 and self.im != 0

    @property
    def is_integer(self) -> bool:
        return self.im == 0 and self.re.denominator == 1

    def is_negative(self) -> bool:
        """Canonical sign: negative real part, or on the imaginary axis a
        negative imaginary part."""
        if self.re != 0:
            return self.re < 0
        return self.im < 0

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        other = GaussianRational.from_value(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = GaussianRational.from_value(other)
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return GaussianRational.from_value(other) - self

    def __mul__(self, other):
        other = GaussianRational.from_value(other)
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = GaussianRational.from_value(other)
        norm = other.re * other.re + other.im * other.im
        if norm == 0:
            raise ZeroDivisionError("division by zero GaussianRational")
        return GaussianRational(
            (self.re * other.re + self.im * other.im) / norm,
            (self.im * other.re - self.re * other.im) / norm,
        )

    def __rtruediv__(self, other):
        return GaussianRational.from_value(other) / self

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("GaussianRational powers must be integers")
        if k < 0:
            return GaussianRational(1) / self ** (-k)
        result = GaussianRational(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    # -- comparisons / hashing ----------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        if not isinstance(other, GaussianRational):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def sort_key(self):
        return (self.re, self.im)

    # -- conversions ---------------------------------------------------
    def to_complex(self) -> complex:
        return complex(float(self.re), float(self.im))

    def exact_sqrt(self):
        """Exact square root when the value is +/- a perfect rational square.

        Returns a GaussianRational or None (no exact root of the required
        form).  Only real inputs are attempted.
        """
        if self.im != 0:
            return None
        q = self.re
        neg = q < 0
        if neg:
            q = -q
        num, den = q.numerator, q.denominator
        rn, rd = isqrt(num), isqrt(den)
        if rn * rn != num or rd * rd != den:
            return None
        root = Fraction(rn, rd)
        if neg:
            return GaussianRational(0, root)
        return GaussianRational(root)

    # -- rendering ------------------------------------------------------
    def render(self) -> str:
        """Grammar-compatible text: re-parses to the same value."""

        def frac(f: Fraction) -> str:
            return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"

        if self.im == 0:
            return frac(self.re)
        if self.re == 0:
            if self.im == 1:
                return "i"
            if self.im == -1:
                return "-i"
            return f"{frac(self.im)}*i"
        im_part = "i" if self.im == 1 else ("-i" if self.im == -1 else f"{frac(self.im)}*i")
        sign = "+" if not im_part.startswith("-") else "-"
        im_body = im_part.lstrip("-")
        return f"({frac(self.re)} {sign} {im_body})"

    def __repr__(self):
        return f"GaussianRational({self.render()})"


ZERO = GaussianRational(0)
ONE = GaussianRational(1)
IUNIT = GaussianRational(0, 1)
