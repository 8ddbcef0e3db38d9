"""Truncated Laurent series over complex coefficients.

Everything in this package is built on one container: a finite window of
exponents ``[lo, hi]`` with a complex coefficient for each exponent, plus a
tag saying which end of the Laurent expansion is trusted.

``"inf"``
    Expansion around w = infinity.  Exponents above ``hi`` are identically
    zero; exponents below ``lo`` have been truncated away and are unknown.

``"orig"``
    Expansion around w = 0.  Exponents below ``lo`` are identically zero;
    exponents above ``hi`` are unknown.

Operations propagate the window so that every stored coefficient is exact
(up to rounding): e.g. for two "inf" series the product is trusted down to
``max(a.lo + deg(b), b.lo + deg(a))`` where ``deg`` is the top nonzero
exponent, because an unknown coefficient of ``a`` below ``a.lo`` can only
pollute product exponents below ``a.lo + deg(b)``.  Windows therefore shrink
under multiplication and composition instead of silently keeping noise.
"""

from __future__ import annotations

import enum
import math
from typing import Callable, Iterable, Mapping

import numpy as np

DEFAULT_DEPTH = 16

INF = "inf"
ORIG = "orig"
_TAGS = (INF, ORIG)


class Region(enum.Enum):
    """Exponent regions for projections."""

    GE0 = "ge0"
    GT0 = "gt0"
    EQ0 = "eq0"
    LT0 = "lt0"
    LE0 = "le0"

    def keeps(self, exponent: int) -> bool:
        if self is Region.GE0:
            return exponent >= 0
        if self is Region.GT0:
            return exponent > 0
        if self is Region.EQ0:
            return exponent == 0
        if self is Region.LT0:
            return exponent < 0
        return exponent <= 0


class TagMismatchError(ValueError):
    """Operands expanded around different points."""


class WindowError(ValueError):
    """The requested operation is not supported by the stored window."""


class Series:
    """One truncated Laurent series; immutable."""

    __slots__ = ("lo", "hi", "tag", "coeffs")

    def __init__(self, lo: int, coeffs, tag: str):
        if tag not in _TAGS:
            raise ValueError(f"unknown tag {tag!r}")
        arr = np.asarray(coeffs, dtype=np.complex128)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("coefficients must be a nonempty 1-d array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite coefficient")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "lo", int(lo))
        object.__setattr__(self, "hi", int(lo) + arr.size - 1)
        object.__setattr__(self, "tag", tag)
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("Series is immutable")

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------

    @classmethod
    def from_terms(
        cls,
        terms: Mapping[int, complex],
        tag: str = INF,
        depth: int = DEFAULT_DEPTH,
        window: tuple[int, int] | None = None,
    ) -> "Series":
        """Build a series from an exponent -> coefficient mapping.

        Exponents not listed are exact zeros inside the window.  The default
        window extends ``depth`` past the terms on the truncated side.
        """
        keys = sorted(terms)
        if window is not None:
            lo, hi = int(window[0]), int(window[1])
            if keys and (keys[0] < lo or keys[-1] > hi):
                raise WindowError("terms outside requested window")
        elif tag == INF:
            hi = max(keys[-1] if keys else 0, 0)
            lo = min(-depth, keys[0] if keys else 0)
        else:
            lo = min(keys[0] if keys else 0, 0)
            hi = max(depth, keys[-1] if keys else 0)
        arr = np.zeros(hi - lo + 1, dtype=np.complex128)
        for k, v in terms.items():
            arr[k - lo] = v
        return cls(lo, arr, tag)

    @classmethod
    def zero(cls, tag: str = INF, window: tuple[int, int] = (0, 0)) -> "Series":
        lo, hi = window
        return cls(lo, np.zeros(hi - lo + 1), tag)

    @classmethod
    def constant(cls, value: complex, tag: str = INF, depth: int = DEFAULT_DEPTH) -> "Series":
        return cls.from_terms({0: value}, tag=tag, depth=depth)

    @classmethod
    def one(cls, tag: str = INF, depth: int = DEFAULT_DEPTH) -> "Series":
        return cls.constant(1.0, tag, depth)

    @classmethod
    def monomial(cls, exponent: int, tag: str = INF, depth: int = DEFAULT_DEPTH) -> "Series":
        return cls.from_terms({exponent: 1.0}, tag=tag, depth=depth)

    @classmethod
    def w(cls, tag: str = INF, depth: int = DEFAULT_DEPTH) -> "Series":
        return cls.monomial(1, tag, depth)

    # ------------------------------------------------------------------
    # basic queries
    # ------------------------------------------------------------------

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    def coeff(self, exponent: int) -> complex:
        """Coefficient at ``exponent``; exact zeros outside the stored window
        are returned as 0, truncated (unknown) exponents raise."""
        if self.lo <= exponent <= self.hi:
            return complex(self.coeffs[exponent - self.lo])
        if self.tag == INF:
            if exponent > self.hi:
                return 0.0
        else:
            if exponent < self.lo:
                return 0.0
        raise WindowError(f"exponent {exponent} below truncation of window [{self.lo},{self.hi}]")

    def edge_exponent(self) -> int | None:
        """Top nonzero exponent for "inf", bottom nonzero for "orig".

        None when every stored coefficient is zero.
        """
        nz = np.nonzero(self.coeffs)[0]
        if nz.size == 0:
            return None
        if self.tag == INF:
            return self.lo + int(nz[-1])
        return self.lo + int(nz[0])

    def is_zero(self) -> bool:
        return self.edge_exponent() is None

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def __repr__(self) -> str:
        terms = []
        order = range(self.hi, self.lo - 1, -1) if self.tag == INF else range(self.lo, self.hi + 1)
        for k in order:
            c = self.coeffs[k - self.lo]
            if c != 0:
                terms.append(f"({c:.6g})*w^{k}")
            if len(terms) == 4:
                terms.append("...")
                break
        body = " + ".join(terms) if terms else "0"
        return f"Series[{self.tag}, {self.lo}..{self.hi}]({body})"

    # ------------------------------------------------------------------
    # ring operations
    # ------------------------------------------------------------------

    def _require_same_tag(self, other: "Series") -> None:
        if self.tag != other.tag:
            raise TagMismatchError(f"{self.tag} vs {other.tag}")

    def __add__(self, other):
        if isinstance(other, (int, float, complex, np.complexfloating, np.floating)):
            other = Series.from_terms(
                {0: complex(other)},
                tag=self.tag,
                window=(min(self.lo, 0), max(self.hi, 0)),
            )
        if not isinstance(other, Series):
            return NotImplemented
        self._require_same_tag(other)
        if self.tag == INF:
            lo = max(self.lo, other.lo)
            hi = max(self.hi, other.hi)
        else:
            lo = min(self.lo, other.lo)
            hi = min(self.hi, other.hi)
        out = np.zeros(hi - lo + 1, dtype=np.complex128)
        for s in (self, other):
            a = max(lo, s.lo)
            b = min(hi, s.hi)
            if a <= b:
                out[a - lo : b - lo + 1] += s.coeffs[a - s.lo : b - s.lo + 1]
        return Series(lo, out, self.tag)

    __radd__ = __add__

    def __neg__(self):
        return Series(self.lo, -self.coeffs, self.tag)

    def __sub__(self, other):
        if isinstance(other, (int, float, complex, np.complexfloating, np.floating)):
            return self + (-complex(other))
        if not isinstance(other, Series):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, factor: complex) -> "Series":
        return Series(self.lo, self.coeffs * complex(factor), self.tag)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.complexfloating, np.floating)):
            return self.scale(other)
        if not isinstance(other, Series):
            return NotImplemented
        self._require_same_tag(other)
        ea = self.edge_exponent()
        eb = other.edge_exponent()
        if ea is None or eb is None:
            # product is exactly zero wherever the unknown tails cannot reach
            if ea is None and eb is None:
                lo, hi = self.lo + other.lo, self.hi + other.hi
            elif ea is None:
                lo, hi = self.lo + eb, self.hi + eb
            else:
                lo, hi = other.lo + ea, other.hi + ea
            return Series.zero(self.tag, (lo, hi))
        full = np.convolve(self.coeffs, other.coeffs)
        base = self.lo + other.lo
        if self.tag == INF:
            hi = ea + eb
            lo = max(self.lo + eb, other.lo + ea)
        else:
            lo = ea + eb
            hi = min(self.hi + eb, other.hi + ea)
        return Series(lo, full[lo - base : hi - base + 1], self.tag)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.reciprocal() ** (-n)
        if n == 0:
            return Series.one(self.tag, depth=max(1, -self.lo if self.tag == INF else self.hi))
        out = self
        for _ in range(n - 1):
            out = out * self
        return out

    # ------------------------------------------------------------------
    # projections and coefficient surgery
    # ------------------------------------------------------------------

    def project(self, region: Region) -> "Series":
        """Zero out the coefficients whose exponent is outside ``region``.

        The window is unchanged; the surviving coefficients are exact.
        """
        exps = np.arange(self.lo, self.hi + 1)
        keep = np.fromiter((region.keeps(int(k)) for k in exps), dtype=bool, count=exps.size)
        return Series(self.lo, np.where(keep, self.coeffs, 0.0), self.tag)

    def restrict(self, lo: int, hi: int) -> "Series":
        """View of the window ``[lo, hi]``.

        Tightening the truncated side discards information (allowed); moving
        the exact side inward is only allowed when the discarded coefficients
        are exact zeros, so the contract stays truthful.
        """
        if lo > hi:
            raise WindowError("empty window")
        edge = self.edge_exponent()
        if self.tag == INF:
            if lo < self.lo:
                raise WindowError("cannot extend below the truncation")
            if edge is not None and hi < edge:
                raise WindowError("window would drop a nonzero exact coefficient")
        else:
            if hi > self.hi:
                raise WindowError("cannot extend above the truncation")
            if edge is not None and lo > edge:
                raise WindowError("window would drop a nonzero exact coefficient")
        out = np.zeros(hi - lo + 1, dtype=np.complex128)
        a = max(lo, self.lo)
        b = min(hi, self.hi)
        if a <= b:
            out[a - lo : b - lo + 1] = self.coeffs[a - self.lo : b - self.lo + 1]
        return Series(lo, out, self.tag)

    def retag(self, tag: str) -> "Series":
        """Reinterpret a (Laurent-)polynomial around the other point.

        Valid only when the stored window holds the whole series, i.e. the
        truncated side carries nothing: then both contracts are true.
        """
        if tag == self.tag:
            return self
        return Series(self.lo, self.coeffs, tag)

    def conj(self) -> "Series":
        """Coefficient-wise conjugate: represents conj(s(conj(w)))."""
        return Series(self.lo, np.conj(self.coeffs), self.tag)

    def chop(self, tol: float | None = None) -> "Series":
        """Zero out coefficients below tol (default 1e-14 * max_abs).

        For closed-form constructions whose structural zeros pick up ulp-level
        dust from differently-ordered float products; the dust corrupts edge
        detection. Calling this asserts the tiny entries are structural.
        """
        if tol is None:
            tol = 1e-14 * self.max_abs()
        out = self.coeffs.copy()
        out[np.abs(out) <= tol] = 0.0
        return Series(self.lo, out, self.tag)

    def invert_variable(self) -> "Series":
        """Substitute w -> 1/w.  Exponents flip sign, the tag flips."""
        return Series(-self.hi, self.coeffs[::-1], ORIG if self.tag == INF else INF)

    # ------------------------------------------------------------------
    # calculus
    # ------------------------------------------------------------------

    def derivative(self) -> "Series":
        """d/dw."""
        exps = np.arange(self.lo, self.hi + 1)
        return Series(self.lo - 1, self.coeffs * exps, self.tag)

    def euler(self) -> "Series":
        """w d/dw (exponent multiplier); window unchanged."""
        exps = np.arange(self.lo, self.hi + 1)
        return Series(self.lo, self.coeffs * exps, self.tag)

    def evaluate(self, w: complex) -> complex:
        """Numeric value at a point; Horner on each side of exponent zero."""
        w = complex(w)

        def coeff_at(k: int) -> complex:
            return complex(self.coeffs[k - self.lo]) if self.lo <= k <= self.hi else 0.0

        pos = 0.0 + 0.0j
        if self.hi >= 0:
            start = max(self.lo, 0)
            pos = coeff_at(self.hi)
            for k in range(self.hi - 1, start - 1, -1):
                pos = pos * w + coeff_at(k)
            pos *= w**start
        neg = 0.0 + 0.0j
        if self.lo < 0:
            v = 1.0 / w
            stop = min(self.hi, -1)
            neg = coeff_at(self.lo) if self.lo <= stop else 0.0
            for k in range(self.lo + 1, stop + 1):
                neg = neg * v + coeff_at(k)
            neg *= v ** (-stop)
        return complex(pos + neg)

    # ------------------------------------------------------------------
    # multiplicative inverses, logs, roots
    # ------------------------------------------------------------------

    def reciprocal(self) -> "Series":
        """1/s, trusted to the same relative depth as s."""
        edge = self.edge_exponent()
        if edge is None:
            raise WindowError("cannot invert the zero series")
        # relative coefficients, offset 0 at the edge, walking into the window
        if self.tag == INF:
            rel = self.coeffs[: edge - self.lo + 1][::-1]
        else:
            rel = self.coeffs[edge - self.lo :]
        n = rel.size
        inv = np.zeros(n, dtype=np.complex128)
        inv[0] = 1.0 / rel[0]
        for k in range(1, n):
            inv[k] = -np.dot(rel[1 : k + 1], inv[k - 1 :: -1]) / rel[0]
        if self.tag == INF:
            return Series(-edge - (n - 1), inv[::-1], INF)
        return Series(-edge, inv, ORIG)

    def log(self) -> "Series":
        """log s for s = c(1 + o(1)), principal branch of log c."""
        edge = self.edge_exponent()
        if edge != 0:
            raise WindowError("log needs a series with nonzero constant leading term")
        c = self.coeffs[0 - self.lo]
        u = self.scale(1.0 / c) - 1.0
        # u lives strictly on the truncated side of exponent 0
        acc = Series.zero(self.tag, (u.lo, u.hi))
        term = None
        depth = u.width
        for j in range(1, depth + 1):
            term = u if term is None else term * u
            if term.is_zero():
                break
            acc = acc + term.scale((-1.0) ** (j + 1) / j)
        return acc + complex(np.log(complex(c)))

    def exp(self) -> "Series":
        """exp s for s = c + u with u strictly o(1)."""
        edge = self.edge_exponent()
        if edge is not None and (edge > 0 if self.tag == INF else edge < 0):
            raise WindowError("exp needs a series bounded at its expansion point")
        c = self.coeff(0) if (self.lo <= 0 <= self.hi) else 0.0
        u = self - c
        term = Series.one(self.tag, depth=max(1, -u.lo if self.tag == INF else u.hi))
        total = term
        for j in range(1, u.width + 1):
            term = term * u
            if term.is_zero():
                break
            total = total + term.scale(1.0 / math.factorial(j))
        return total.scale(np.exp(complex(c)))

    def sqrt(self) -> "Series":
        """Principal square root via exp(log/2)."""
        return self.log().scale(0.5).exp()

    # ------------------------------------------------------------------
    # composition and reversion
    # ------------------------------------------------------------------

    def compose(self, inner: "Series") -> "Series":
        """self(inner(w)); inner must be a degree/order one series of the
        same tag with nonzero linear coefficient."""
        self._require_same_tag(inner)
        if inner.edge_exponent() != 1:
            raise WindowError("composition needs an inner series with leading exponent 1")

        def stored(k: int) -> complex:
            # exponents beyond self's truncation enter as zero; the final
            # window clamp removes everything they could have polluted
            return complex(self.coeffs[k - self.lo]) if self.lo <= k <= self.hi else 0.0

        # halves that are explicit zeros contribute nothing but would
        # needlessly narrow the window arithmetic, so skip them
        has_pos = self.hi >= 0 and any(stored(k) != 0 for k in range(max(self.lo, 0), self.hi + 1))
        has_neg = self.lo <= -1 and any(stored(k) != 0 for k in range(self.lo, min(self.hi, -1) + 1))
        out = None
        if has_pos:
            acc = Series.constant(stored(self.hi), self.tag, depth=inner.width)
            for k in range(self.hi - 1, -1, -1):
                acc = acc * inner + stored(k)
            out = acc
        if has_neg:
            rec = inner.reciprocal()
            acc = Series.constant(stored(self.lo), self.tag, depth=inner.width)
            for k in range(self.lo + 1, 0):
                acc = acc * rec + stored(k)
            acc = acc * rec
            out = acc if out is None else out + acc
        if out is None:
            out = Series.zero(self.tag, (self.lo, self.hi))
        # self's own truncation: unknown outer terms only touch exponents
        # beyond self's window edge, so clamp the result there
        if self.tag == INF:
            lo = max(out.lo, self.lo)
            return out.restrict(lo, max(out.hi, lo))
        hi = min(out.hi, self.hi)
        return out.restrict(min(out.lo, hi), hi)

    def revert(self) -> "Series":
        """Functional inverse.

        Accepts c1*w + c0 + ... ("inf"), c1*w + c2*w^2 + ... ("orig"), and the
        reciprocal-like shapes with leading exponent -1, which are routed
        through w -> 1/w.
        """
        edge = self.edge_exponent()
        if edge == -1:
            # s maps one expansion point to the other; work in v = 1/w
            return self.invert_variable().revert_linear().reciprocal()
        if edge != 1:
            raise WindowError("reversion needs leading exponent 1 or -1")
        return self.revert_linear()

    def revert_linear(self) -> "Series":
        """Newton iteration for the inverse of a leading-exponent-1 series."""
        edge = self.edge_exponent()
        if edge != 1:
            raise WindowError("reversion needs leading exponent 1")
        c1 = self.coeff(1)
        c0 = self.coeff(0) if (self.lo <= 0 <= self.hi) else 0.0
        if self.tag == INF:
            z = Series.from_terms({1: 1.0}, INF, window=(min(self.lo, 1), 1))
        else:
            z = Series.from_terms({1: 1.0}, ORIG, window=(1, max(self.hi, 1)))
        k = (z - c0).scale(1.0 / c1)
        dself = self.derivative()
        n_it = 2 * max(1, math.ceil(math.log2(max(2, self.width))))
        for _ in range(n_it):
            err = self.compose(k) - z
            if err.is_zero():
                break
            k = k - err * dself.compose(k).reciprocal()
        return k

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "tag": self.tag,
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "Series":
        lo = int(obj["lo"])
        hi = int(obj["hi"])
        tag = str(obj["tag"])
        coeffs = np.array([complex(re, im) for re, im in obj["coeffs"]], dtype=np.complex128)
        if coeffs.size != hi - lo + 1:
            raise ValueError("coefficient count does not match window")
        return cls(lo, coeffs, tag)


# ----------------------------------------------------------------------
# module-level functional aliases
# ----------------------------------------------------------------------


def add(a: Series, b: Series) -> Series:
    return a + b


def mul(a: Series, b: Series) -> Series:
    return a * b


def scale(a: Series, c: complex) -> Series:
    return a.scale(c)


def power_int(a: Series, n: int) -> Series:
    if n < 1:
        raise ValueError("power_int expects n >= 1")
    return a**n


def project(a: Series, region: Region) -> Series:
    return a.project(region)


def compose(outer: Series, inner: Series) -> Series:
    return outer.compose(inner)


def revert(a: Series) -> Series:
    return a.revert()


def log_series(a: Series) -> Series:
    return a.log()


def exp_series(a: Series) -> Series:
    return a.exp()


def sqrt_series(a: Series) -> Series:
    return a.sqrt()


def reciprocal(a: Series) -> Series:
    return a.reciprocal()


def derivative(a: Series) -> Series:
    return a.derivative()


def evaluate(a: Series, w: complex) -> complex:
    return a.evaluate(w)


def diff_max(a: Series, b: Series, lo: int | None = None, hi: int | None = None) -> float:
    """Max coefficient difference on the overlap of the stored windows."""
    cl = max(a.lo, b.lo) if lo is None else lo
    ch = min(a.hi, b.hi) if hi is None else hi
    if cl > ch:
        raise WindowError("windows do not overlap")
    out = 0.0
    for k in range(cl, ch + 1):
        out = max(out, abs(a.coeff(k) - b.coeff(k)))
    return out
