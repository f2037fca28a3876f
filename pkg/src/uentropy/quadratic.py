"""Exact arithmetic in a real quadratic field Q(sqrt(D)).

Used to store Markov-cell geometry without rounding: all anchors and side
lengths of the partition boxes are elements of Q(sqrt(D)) for the field of the
matrix eigenvalues, so containment and crossing computations can be verified
bit-stably.
"""

from __future__ import annotations

from fractions import Fraction


class Quad:
    """Number a + b*sqrt(D) with rational a, b and a fixed square-free D > 1."""

    __slots__ = ("a", "b", "D")

    def __init__(self, a, b=0, D=5):
        self.a = Fraction(a)
        self.b = Fraction(b)
        self.D = int(D)

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def of(x, D=5):
        if isinstance(x, Quad):
            return x
        return Quad(x, 0, D)

    def _coerce(self, other):
        if isinstance(other, Quad):
            if other.D != self.D:
                raise ValueError("mixed quadratic fields")
            return other
        return Quad(other, 0, self.D)

    # -- ring operations ------------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        return Quad(self.a + o.a, self.b + o.b, self.D)

    __radd__ = __add__

    def __neg__(self):
        return Quad(-self.a, -self.b, self.D)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return Quad(self.a * o.a + self.D * self.b * o.b,
                    self.a * o.b + self.b * o.a, self.D)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        den = o.a * o.a - self.D * o.b * o.b
        if den == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt(D))")
        conj_num = self * Quad(o.a, -o.b, self.D)
        return Quad(conj_num.a / den, conj_num.b / den, self.D)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    # -- order ----------------------------------------------------------------

    def sign(self):
        """Exact sign of a + b*sqrt(D)."""
        a, b = self.a, self.b
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return (b > 0) - (b < 0)
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: compare a^2 against D b^2; sign follows the larger part
        lhs, rhs = a * a, self.D * b * b
        if lhs == rhs:
            return 0
        big_is_a = lhs > rhs
        return (1 if a > 0 else -1) if big_is_a else (1 if b > 0 else -1)

    def __eq__(self, other):
        o = self._coerce(other)
        return self.a == o.a and self.b == o.b

    def __lt__(self, other):
        return (self - self._coerce(other)).sign() < 0

    def __le__(self, other):
        return (self - self._coerce(other)).sign() <= 0

    def __gt__(self, other):
        return (self - self._coerce(other)).sign() > 0

    def __ge__(self, other):
        return (self - self._coerce(other)).sign() >= 0

    def __hash__(self):
        return hash((self.a, self.b, self.D))

    # -- conversion -----------------------------------------------------------

    def __float__(self):
        return float(self.a) + float(self.b) * float(self.D) ** 0.5

    def __repr__(self):
        return f"Quad({self.a}, {self.b}, D={self.D})"


def golden(D=5):
    """Convenient constants (g, phi, sqrt5) for the golden field D=5."""
    g = Quad(Fraction(-1, 2), Fraction(1, 2), D)      # (sqrt5 - 1)/2
    phi = Quad(Fraction(1, 2), Fraction(1, 2), D)     # (sqrt5 + 1)/2
    root = Quad(0, 1, D)
    return g, phi, root
