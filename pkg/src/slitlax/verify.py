"""Residual certification for reduced hierarchies.

Every check in this module differentiates through the full pipeline --
perturb the time vector, re-solve the hodograph relation, re-evaluate the
map family -- with central finite differences.  Nothing reuses the analytic
structure of the construction being checked, so a wrong sign or a wrong
coefficient anywhere upstream shows up as a residual here instead of
cancelling silently.

Flow derivatives on the dToda side never leave the reality slice: a shift of
``t_n`` alone would break ``t_{-n} = -conj(t_n)`` and push the hodograph
root into the complex plane.  Instead the paired shifts
``(t_n + u, t_{-n} - conj(u))`` with ``u`` in ``{d, i d}`` stay admissible,
and the two measured directional derivatives combine to the one-sided
partials:

    d/du|_real  = dL/dt_n - dL/dt_{-n}
    d/du|_imag  = i (dL/dt_n + dL/dt_{-n})

so ``dL/dt_n = (D1 - i D2)/2`` and ``dL/dt_{-n} = -(D1 + i D2)/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .faber import grunsky
from .reduction import DKP, DTODA, ReducedSolution, TimeVector
from .series import INF, ORIG, Region, Series

__all__ = [
    "ResidualReport",
    "grunsky_flow_symmetry",
    "hydro_residual",
    "lax_residual_dkp",
    "lax_residual_dtoda",
    "poisson_dkp",
    "poisson_dtoda",
]

DEFAULT_FD_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4


@dataclass(frozen=True)
class ResidualReport:
    """Pure data: one equation's coefficientwise residual magnitudes."""

    equation: str
    labels: tuple[str, ...]
    residuals: tuple[float, ...]
    max_residual: float
    fd_step: float
    tolerance: float
    passed: bool

    @classmethod
    def from_pieces(
        cls,
        equation: str,
        pieces: Iterable[tuple[str, Series]],
        fd_step: float,
        tolerance: float,
    ) -> "ResidualReport":
        labels: list[str] = []
        mags: list[float] = []
        for prefix, s in pieces:
            for k in range(s.lo, s.hi + 1):
                labels.append(f"{prefix}w^{k}")
                mags.append(float(abs(s.coeff(k))))
        top = max(mags)
        return cls(
            equation=equation,
            labels=tuple(labels),
            residuals=tuple(mags),
            max_residual=top,
            fd_step=float(fd_step),
            tolerance=float(tolerance),
            passed=bool(top < tolerance),
        )

    def summary(self) -> dict:
        return {
            "equation": self.equation,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


# ----------------------------------------------------------------------
# Poisson brackets
# ----------------------------------------------------------------------


def poisson_dkp(
    h1: Callable[[TimeVector], Series],
    h2: Callable[[TimeVector], Series],
    t: TimeVector,
    delta: float | None = None,
) -> Series:
    """Bracket ``dh1/dw dh2/dx - dh1/dx dh2/dw`` at the time vector ``t``.

    The w-derivative is the exact series derivative; the x-derivative is a
    central difference of the argument callables, which are expected to go
    through the hodograph solve.
    """
    if t.kind != DKP:
        raise ValueError("poisson_dkp needs a dKP time vector")
    d = DEFAULT_FD_STEP * max(1.0, abs(t.x)) if delta is None else float(delta)
    tp, tm = t.with_x(t.x + d), t.with_x(t.x - d)
    dh1 = (h1(tp) - h1(tm)).scale(0.5 / d)
    dh2 = (h2(tp) - h2(tm)).scale(0.5 / d)
    return h1(t).derivative() * dh2 - dh1 * h2(t).derivative()


def poisson_dtoda(
    h1: Callable[[TimeVector], Series],
    h2: Callable[[TimeVector], Series],
    t: TimeVector,
    delta: float | None = None,
) -> Series:
    """Bracket ``w dh1/dw dh2/dt0 - w dh1/dt0 dh2/dw`` at ``t``."""
    if t.kind != DTODA:
        raise ValueError("poisson_dtoda needs a dToda time vector")
    d = DEFAULT_FD_STEP * max(1.0, abs(t.t0)) if delta is None else float(delta)
    tp, tm = t.with_t0(t.t0 + d), t.with_t0(t.t0 - d)
    dh1 = (h1(tp) - h1(tm)).scale(0.5 / d)
    dh2 = (h2(tp) - h2(tm)).scale(0.5 / d)
    return h1(t).euler() * dh2 - dh1 * h2(t).euler()


# ----------------------------------------------------------------------
# generator polynomials
# ----------------------------------------------------------------------


def _repoly(poly: Series, tag: str, lo: int, hi: int) -> Series:
    """Re-window a fully stored (Laurent-)polynomial with exact zero padding.

    Legal because every coefficient of ``poly`` is inside its stored window;
    widening with zeros and switching the expansion tag both stay truthful.
    """
    terms = {k: poly.coeff(k) for k in range(poly.lo, poly.hi + 1) if poly.coeff(k) != 0}
    return Series.from_terms(terms, tag, window=(lo, hi))


def _generator_dkp(L: Series, n: int) -> Series:
    """``(L^n)_{>=0}`` on its exact polynomial window ``[0, n]``."""
    p = L**n
    q = p.project(Region.GE0)
    return q.restrict(0, q.hi)


def _generator_plus(L: Series, n: int) -> Series:
    """``(L^n)_{>0} + (L^n)_0 / 2`` on ``[0, n]``."""
    p = L**n
    q = p.project(Region.GE0) - 0.5 * p.coeff(0)
    return q.restrict(0, q.hi)


def _generator_minus(F: Series, p: int) -> Series:
    """``(F^{-p})_{<0} + (F^{-p})_0 / 2`` on ``[-p, 0]``."""
    r = F.reciprocal() ** p
    q = r.project(Region.LE0) - 0.5 * r.coeff(0)
    return q.restrict(q.lo, 0)


# ----------------------------------------------------------------------
# Lax residuals
# ----------------------------------------------------------------------


def lax_residual_dkp(
    sol: ReducedSolution,
    t: TimeVector,
    n: int,
    fd_step: float = DEFAULT_FD_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
    off_root_shift: float = 0.0,
) -> ResidualReport:
    """Coefficientwise residual of ``dL/dt_n - {B_n, L}`` with ``B_n = (L^n)_{>=0}``.

    ``off_root_shift`` displaces every map evaluation off the hodograph root
    by a fixed amount; nonzero values are the negative control that proves
    the residual can detect a broken reduction.
    """
    if sol.kind != DKP or t.kind != DKP:
        raise ValueError("lax_residual_dkp needs a dKP reduction and time vector")
    n = int(n)
    if n < 1:
        raise ValueError("dKP flows are indexed n >= 1")
    base = sol.solve(t)
    shift = float(off_root_shift)

    def L_of(tv: TimeVector) -> Series:
        return sol.map_at(sol.solve(tv, warm_start=base) + shift)

    def B_of(tv: TimeVector) -> Series:
        L = L_of(tv)
        return _repoly(_generator_dkp(L, n), INF, lo=L.lo - n - 2, hi=n)

    dn = fd_step * max(1.0, abs(t.value(n)))
    dL = (L_of(t.perturbed(n, dn)) - L_of(t.perturbed(n, -dn))).scale(0.5 / dn)
    bracket = poisson_dkp(B_of, L_of, t, delta=fd_step * max(1.0, abs(t.x)))
    return ResidualReport.from_pieces(
        f"dKP Lax n={n}", [("", dL - bracket)], fd_step, tolerance
    )


def lax_residual_dtoda(
    sol: ReducedSolution,
    t: TimeVector,
    n: int,
    fd_step: float = DEFAULT_FD_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
    off_root_shift: float = 0.0,
) -> ResidualReport:
    """Residuals of the flow-n equations on both Lax series.

    Positive flows use the exterior generator ``(L^n)_{>0} + (L^n)_0/2``,
    negative flows the interior one ``(F^{-|n|})_{<0} + (F^{-|n|})_0/2``;
    each is bracketed against both the exterior and the interior Lax series,
    and the report concatenates the two coefficient lists.
    """
    if sol.kind != DTODA or t.kind != DTODA:
        raise ValueError("lax_residual_dtoda needs a dToda reduction and time vector")
    n = int(n)
    if n == 0:
        raise ValueError("the t0 flow is the bracket's base variable, not a Lax flow")
    p = abs(n)
    base = sol.solve(t)
    shift = float(off_root_shift)

    def lam_of(tv: TimeVector) -> float:
        return sol.solve(tv, warm_start=base) + shift

    def G_of(tv: TimeVector) -> Series:
        return sol.map_at(lam_of(tv))

    def F_of(tv: TimeVector) -> Series:
        return sol.interior_at(lam_of(tv))

    if n > 0:
        def poly_of(tv: TimeVector) -> Series:
            return _generator_plus(G_of(tv), n)
    else:
        def poly_of(tv: TimeVector) -> Series:
            return _generator_minus(F_of(tv), p)

    def gen_inf(tv: TimeVector) -> Series:
        q = poly_of(tv)
        return _repoly(q, INF, lo=G_of(tv).lo - p - 2, hi=q.hi)

    def gen_orig(tv: TimeVector) -> Series:
        q = poly_of(tv)
        return _repoly(q, ORIG, lo=q.lo, hi=F_of(tv).hi + p + 2)

    dn = fd_step * max(1.0, abs(t.value(p)))

    def flow_derivative(series_of: Callable[[TimeVector], Series]) -> Series:
        d1 = (series_of(t.perturbed(p, dn)) - series_of(t.perturbed(p, -dn))).scale(0.5 / dn)
        d2 = (series_of(t.perturbed(p, 1j * dn)) - series_of(t.perturbed(p, -1j * dn))).scale(
            0.5 / dn
        )
        if n > 0:
            return (d1 + d2.scale(-1j)).scale(0.5)
        return (d1 + d2.scale(1j)).scale(-0.5)

    d0 = fd_step * max(1.0, abs(t.t0))
    resid_ext = flow_derivative(G_of) - poisson_dtoda(gen_inf, G_of, t, delta=d0)
    resid_int = flow_derivative(F_of) - poisson_dtoda(gen_orig, F_of, t, delta=d0)
    return ResidualReport.from_pieces(
        f"dToda Lax n={n}",
        [("", resid_ext), ("interior ", resid_int)],
        fd_step,
        tolerance,
    )


# ----------------------------------------------------------------------
# hydrodynamic-type equations
# ----------------------------------------------------------------------


def _dlam(sol: ReducedSolution, t: TimeVector, n: int, base: float, fd_step: float) -> complex:
    """One-sided derivative of the hodograph root along flow ``n``."""
    if sol.kind == DKP:
        d = fd_step * max(1.0, abs(t.value(n)))
        return complex(
            sol.solve(t.perturbed(n, d), warm_start=base)
            - sol.solve(t.perturbed(n, -d), warm_start=base)
        ) / (2 * d)
    if n == 0:
        d = fd_step * max(1.0, abs(t.t0))
        return complex(
            sol.solve(t.with_t0(t.t0 + d), warm_start=base)
            - sol.solve(t.with_t0(t.t0 - d), warm_start=base)
        ) / (2 * d)
    p = abs(n)
    d = fd_step * max(1.0, abs(t.value(p)))
    d1 = (
        sol.solve(t.perturbed(p, d), warm_start=base)
        - sol.solve(t.perturbed(p, -d), warm_start=base)
    ) / (2 * d)
    d2 = (
        sol.solve(t.perturbed(p, 1j * d), warm_start=base)
        - sol.solve(t.perturbed(p, -1j * d), warm_start=base)
    ) / (2 * d)
    if n > 0:
        return 0.5 * (d1 - 1j * d2)
    return -0.5 * (d1 + 1j * d2)


def hydro_residual(
    sol: ReducedSolution,
    t: TimeVector,
    n: int,
    fd_step: float = DEFAULT_FD_STEP,
) -> float:
    """Relative residual of the hydrodynamic-type equation for flow ``n``.

    dKP:    d(lambda)/dt_n = chi_n(lambda) d(lambda)/dt_1
    dToda:  d(lambda)/dt_n = xi_n(lambda)  d(lambda)/dt_0

    Both sides are central differences through the hodograph; the reference
    flow (n = 1 resp. n = 0) therefore reproduces itself exactly.
    """
    n = int(n)
    if sol.kind == DKP and n < 1:
        raise ValueError("dKP flows are indexed n >= 1")
    base = sol.solve(t)
    reference = 1 if sol.kind == DKP else 0
    lhs = _dlam(sol, t, n, base, fd_step)
    rhs = complex(sol.coefficient(n, base)) * _dlam(sol, t, reference, base, fd_step)
    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-300))


# ----------------------------------------------------------------------
# Grunsky flow symmetry
# ----------------------------------------------------------------------


def grunsky_flow_symmetry(
    sol: ReducedSolution,
    t: TimeVector,
    triple: tuple[int, int, int],
    fd_step: float = DEFAULT_FD_STEP,
    table_size: int | None = None,
    cache: dict | None = None,
) -> float:
    """Max pairwise discrepancy of the symmetric flow expression over a triple.

    For each way of splitting ``(m, n, k)`` into a Grunsky pair and a flow
    index, the expression

        dKP:    -m n  d(b_{m,n})/dt_k
        dToda:  -|m n| d(b_{m,n})/dt_k          (m, n != 0)
                 |m|   d(b_{m,0})/dt_k          (one index zero)
                -2     d(b_{0,0})/dt_k          (both zero; b_00 = -log r)

    must come out the same; their agreement is the mixed-derivative symmetry
    that makes a tau function exist, tested without ever constructing it.
    ``cache`` (a plain dict) may be shared between calls on the same
    reduction to reuse Grunsky tables across triples.
    """
    m, n, k = (int(i) for i in triple)
    if sol.kind == DKP and min(m, n, k) < 1:
        raise ValueError("dKP Grunsky flows are indexed n >= 1")
    base = sol.solve(t)
    M = max(2, abs(m), abs(n), abs(k)) + 1 if table_size is None else int(table_size)
    tables: dict = {} if cache is None else cache

    def table_at(tv: TimeVector):
        key = (M, tv.x, tv.t0, tv.items)
        hit = tables.get(key)
        if hit is None:
            lam = sol.solve(tv, warm_start=base)
            g = sol.map_at(lam).revert()
            f = sol.interior_at(lam).revert() if sol.kind == DTODA else None
            hit = grunsky(f, g, M=M)
            tables[key] = hit
        return hit

    def entry(a: int, b: int, tv: TimeVector) -> complex:
        return table_at(tv).b(a, b)

    def d_entry(a: int, b: int, c: int) -> complex:
        if sol.kind == DKP:
            d = fd_step * max(1.0, abs(t.value(c)))
            return (entry(a, b, t.perturbed(c, d)) - entry(a, b, t.perturbed(c, -d))) / (2 * d)
        if c == 0:
            d = fd_step * max(1.0, abs(t.t0))
            return (entry(a, b, t.with_t0(t.t0 + d)) - entry(a, b, t.with_t0(t.t0 - d))) / (2 * d)
        p = abs(c)
        d = fd_step * max(1.0, abs(t.value(p)))
        d1 = (entry(a, b, t.perturbed(p, d)) - entry(a, b, t.perturbed(p, -d))) / (2 * d)
        d2 = (entry(a, b, t.perturbed(p, 1j * d)) - entry(a, b, t.perturbed(p, -1j * d))) / (2 * d)
        if c > 0:
            return 0.5 * (d1 - 1j * d2)
        return -0.5 * (d1 + 1j * d2)

    def expression(a: int, b: int, c: int) -> complex:
        if sol.kind == DKP:
            return -a * b * d_entry(a, b, c)
        if a != 0 and b != 0:
            return -abs(a * b) * d_entry(a, b, c)
        if a == 0 and b == 0:
            return -2.0 * d_entry(0, 0, c)
        nz = a if a != 0 else b
        return abs(nz) * d_entry(a, b, c)

    vals = (expression(m, n, k), expression(m, k, n), expression(n, k, m))
    return float(max(abs(v1 - v2) for v1 in vals for v2 in vals))
