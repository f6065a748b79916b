"""Arithmetic in GF(2^m) via log/antilog tables.

Elements are plain ints in ``[0, 2^m)``; addition is XOR.
"""

from __future__ import annotations

from functools import lru_cache

# primitive polynomials, bit i = coefficient of x^i
PRIMITIVE_POLYS = {
    3: 0b1011,        # x^3 + x + 1
    4: 0b10011,       # x^4 + x + 1
    8: 0b100011101,   # x^8 + x^4 + x^3 + x^2 + 1
}


class FieldError(ValueError):
    pass


class GF2m:
    def __init__(self, m: int):
        if m not in PRIMITIVE_POLYS:
            raise FieldError(f"GF(2^{m}) is not supported; choose m in {sorted(PRIMITIVE_POLYS)}")
        self.m = m
        self.order = 1 << m
        self.modulus = PRIMITIVE_POLYS[m]
        n = self.order - 1
        self.exp = [0] * (2 * n)
        self.log = [0] * self.order
        x = 1
        for i in range(n):
            self.exp[i] = x
            self.log[x] = i
            x <<= 1
            if x & self.order:
                x ^= self.modulus
        if x != 1:
            raise FieldError(f"modulus {self.modulus:#x} is not primitive")
        for i in range(n, 2 * n):
            self.exp[i] = self.exp[i - n]

    def __repr__(self):
        return f"GF2m(m={self.m})"

    def check(self, a: int) -> int:
        if not 0 <= a < self.order:
            raise FieldError(f"{a} is not an element of GF(2^{self.m})")
        return a

    @staticmethod
    def add(a: int, b: int) -> int:
        return a ^ b

    sub = add

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return self.exp[(self.order - 1) - self.log[a]]

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise ZeroDivisionError("division by 0")
        if a == 0:
            return 0
        return self.exp[(self.log[a] - self.log[b]) % (self.order - 1)]

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            return 0 if e > 0 else 1
        return self.exp[(self.log[a] * e) % (self.order - 1)]

    def generator_powers(self, count: int) -> list[int]:
        """alpha^0, alpha^1, ..., the first ``count`` nonzero elements."""
        if count > self.order - 1:
            raise FieldError(f"only {self.order - 1} nonzero elements in GF(2^{self.m})")
        return self.exp[:count]

    # polynomials are coefficient lists, ascending degree

    def poly_eval(self, coeffs: list[int], x: int) -> int:
        acc = 0
        for c in reversed(coeffs):
            acc = self.mul(acc, x) ^ c
        return acc

    def poly_scale(self, coeffs: list[int], s: int) -> list[int]:
        return [self.mul(c, s) for c in coeffs]

    def poly_add(self, a: list[int], b: list[int]) -> list[int]:
        if len(a) < len(b):
            a, b = b, a
        return [x ^ (b[i] if i < len(b) else 0) for i, x in enumerate(a)]


@lru_cache(maxsize=None)
def field(m: int) -> GF2m:
    return GF2m(m)
