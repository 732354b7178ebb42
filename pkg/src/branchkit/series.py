"""Truncated univariate power series.

A series of order N stores c_0..c_N and every operation is exact through
order N; higher coefficients are unknown and dropped.
"""
from __future__ import annotations

import math

import numpy as np


class TruncatedSeries:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.array(coeffs)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a nonempty 1-d sequence")
        if not np.iscomplexobj(c):
            c = c.astype(float)
        self.coeffs = c

    @classmethod
    def constant(cls, value, order: int) -> "TruncatedSeries":
        c = np.zeros(order + 1, dtype=np.result_type(value, float))
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, order: int) -> "TruncatedSeries":
        """The series of s itself."""
        c = np.zeros(order + 1)
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def __repr__(self):
        return f"TruncatedSeries({self.coeffs.tolist()})"

    def __getitem__(self, n):
        return self.coeffs[n]

    def _coerce(self, other):
        if isinstance(other, TruncatedSeries):
            if other.order != self.order:
                raise ValueError(f"truncation order mismatch: {self.order} vs {other.order}")
            return other
        return TruncatedSeries.constant(other, self.order)

    def __add__(self, other):
        other = self._coerce(other)
        return TruncatedSeries(self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(-self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries(self.coeffs * other)
        other = self._coerce(other)
        return TruncatedSeries(np.convolve(self.coeffs, other.coeffs)[: self.order + 1])

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if int(n) != n or n < 0:
            raise ValueError("only nonnegative integer powers are supported")
        out = TruncatedSeries.constant(1.0, self.order)
        base = self
        n = int(n)
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def compose(self, derivatives) -> "TruncatedSeries":
        """Series of g(self) given g, g', ..., g^(N) at the constant term."""
        derivatives = np.asarray(derivatives)
        if derivatives.size < self.order + 1:
            raise ValueError(f"need {self.order + 1} derivatives, got {derivatives.size}")
        h = self - self.coeffs[0]
        out = TruncatedSeries.constant(derivatives[0], self.order)
        power = TruncatedSeries.constant(1.0, self.order)
        for m in range(1, self.order + 1):
            power = power * h
            out = out + power * (derivatives[m] / math.factorial(m))
        return out

    def __call__(self, x):
        return np.polyval(self.coeffs[::-1], x)
