"""Coefficient functions with closed-form calculus.

Coefficients are linear combinations of a few elementary terms (powers,
sines, cosines, exponentials).  Every term knows its derivative and its
integral, so the integrating factor ``A(t) = int_0^t a`` is always
available in closed form.  Integrals over short windows are evaluated
through width-aware formulas so that ``A(t) - A(t - d)`` keeps full
relative accuracy even when ``d`` is many orders below ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

_KINDS = ("power", "sin", "cos", "exp")


@dataclass(frozen=True)
class Term:
    """``scale * phi(t)`` where ``phi`` is ``t**k``, ``sin(w t)``, ``cos(w t)`` or ``exp(r t)``."""

    kind: str
    scale: float = 1.0
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown term kind {self.kind!r}")
        if self.kind == "power" and (self.param < 0 or int(self.param) != self.param):
            raise ValueError("power terms need a nonnegative integer exponent")
        if self.kind in ("sin", "cos", "exp") and self.param == 0:
            raise ValueError(f"{self.kind} term needs a nonzero rate")

    def value(self, t):
        c, p = self.scale, self.param
        if self.kind == "power":
            return c * np.ones_like(t) if p == 0 else c * t ** int(p)
        if self.kind == "sin":
            return c * np.sin(p * t)
        if self.kind == "cos":
            return c * np.cos(p * t)
        return c * np.exp(p * t)

    def derivative(self, t):
        c, p = self.scale, self.param
        if self.kind == "power":
            k = int(p)
            return np.zeros_like(t) if k == 0 else c * k * t ** (k - 1)
        if self.kind == "sin":
            return c * p * np.cos(p * t)
        if self.kind == "cos":
            return -c * p * np.sin(p * t)
        return c * p * np.exp(p * t)

    def window_integral(self, t, d):
        """Integral over ``[t - d, t]`` without cancellation in ``d``."""
        c, p = self.scale, self.param
        s = t - d
        if self.kind == "power":
            k = int(p)
            # t^{k+1} - s^{k+1} = d * sum_i t^i s^{k-i}
            acc = np.zeros_like(t * d)
            for i in range(k + 1):
                acc = acc + t ** i * s ** (k - i)
            return c * d * acc / (k + 1)
        mid = t - 0.5 * d
        half = np.sin(0.5 * p * d)
        if self.kind == "sin":
            return c * 2.0 * np.sin(p * mid) * half / p
        if self.kind == "cos":
            return c * 2.0 * np.cos(p * mid) * half / p
        return c * np.exp(p * s) * np.expm1(p * d) / p


@dataclass(frozen=True)
class Coefficient:
    """Linear combination of :class:`Term` objects.

    Supports ``+``, ``-`` and multiplication by scalars, which is the whole
    of the "linear-combination constructor"::

        a = 2 * BASIS["one"] + BASIS["sin_pi"]
    """

    terms: tuple[Term, ...]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return sum((term.value(t) for term in self.terms), np.zeros_like(t))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return sum((term.derivative(t) for term in self.terms), np.zeros_like(t))

    def antiderivative(self, t):
        """``A(t) = int_0^t a``; exact zero at ``t = 0``."""
        t = np.asarray(t, dtype=float)
        return self.window_integral(t, t)

    def window_integral(self, t, d):
        t = np.asarray(t, dtype=float)
        d = np.asarray(d, dtype=float)
        out = np.zeros(np.broadcast(t, d).shape)
        for term in self.terms:
            out = out + term.window_integral(t, d)
        return out

    @property
    def is_constant(self) -> bool:
        return all(term.kind == "power" and term.param == 0 for term in self.terms)

    @property
    def constant_value(self) -> float:
        if not self.is_constant:
            raise ValueError("coefficient is not constant")
        return float(sum(term.scale for term in self.terms))

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = constant(other)
        if not isinstance(other, Coefficient):
            return NotImplemented
        return Coefficient(self.terms + other.terms)

    __radd__ = __add__

    def __mul__(self, k):
        if not isinstance(k, (int, float)):
            return NotImplemented
        return Coefficient(tuple(Term(t.kind, t.scale * k, t.param) for t in self.terms))

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-other)


def constant(c: float) -> Coefficient:
    return Coefficient((Term("power", float(c), 0),))


BASIS: dict[str, Coefficient] = {
    "one": constant(1.0),
    "t": Coefficient((Term("power", 1.0, 1),)),
    "t2": Coefficient((Term("power", 1.0, 2),)),
    "t3": Coefficient((Term("power", 1.0, 3),)),
    "sin_pi": Coefficient((Term("sin", 1.0, math.pi),)),
    "cos_pi": Coefficient((Term("cos", 1.0, math.pi),)),
    "exp": Coefficient((Term("exp", 1.0, 1.0),)),
    "exp_neg": Coefficient((Term("exp", 1.0, -1.0),)),
}


def combine(weights: Mapping[str, float]) -> Coefficient:
    """Build ``sum_k w_k * BASIS[k]`` from a ``{name: weight}`` mapping."""
    if not weights:
        raise ValueError("empty combination")
    out = None
    for name, w in weights.items():
        if name not in BASIS:
            raise KeyError(f"unknown basis function {name!r}; known: {sorted(BASIS)}")
        piece = float(w) * BASIS[name]
        out = piece if out is None else out + piece
    return out
