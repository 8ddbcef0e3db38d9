"""One-variable reductions of the dKP and dToda hierarchies.

A reduced solution is a one-parameter family of conformal maps
``lambda -> (exterior map, optional interior partner)`` closed by a hodograph
relation that picks the parameter value ``lambda(t)`` for each admissible
time vector.  All time dependence of the Lax series enters through that one
scalar:

    dKP      x  + sum_{n>=1}  chi_n(lambda) t_n  =  R(lambda)
    dToda    t0 + sum_{n!=0}  xi_n(lambda)  t_n  =  R(lambda)

where ``chi_n = Phi_n'(U(lambda))`` is the Faber-polynomial derivative at the
chordal driving point and ``xi_n = sigma Phi_n'(sigma)`` (resp.
``sigma Psi_{|n|}'(sigma)`` for n < 0) at the radial driving point.  ``R`` is
a free real function of lambda, zero by default; every choice of ``R`` closes
one reduction.

Reality of the dToda residual is structural, not accidental: time vectors
enforce ``t_{-n} = -conj(t_n)`` at construction, and when the interior
partner is the reflection of the exterior map the coefficients obey
``xi_{-n} = -conj(xi_n)``, so each +-n pair contributes ``2 Re(xi_n t_n)``.
The residual therefore stays real along every admissible perturbation,
including the paired shifts `TimeVector.perturbed` uses to explore single
flows without leaving the reality slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, newton

from .faber import faber_phi, faber_psi
from .loewner import ConformalFamily, Orientation, closed_form_family
from .series import Series

__all__ = [
    "DKP",
    "DTODA",
    "NoRootError",
    "NonRealResidualError",
    "ReducedSolution",
    "TimeVector",
    "build_lax",
    "chi",
    "hodograph_residual",
    "hodograph_solve",
    "xi",
]

DKP = "dkp"
DTODA = "dtoda"

#: largest flow index a time vector will accept; deeper flows need series
#: windows wider than anything the integrators are calibrated for.
SUPPORT_CAP = 32

#: absolute ceiling on the imaginary part of a dToda hodograph residual.
REALITY_TOL = 1e-10


class NoRootError(ArithmeticError):
    """The hodograph residual has no admissible root in the bracket."""


class NonRealResidualError(ArithmeticError):
    """The hodograph residual failed its reality check."""


# ----------------------------------------------------------------------
# time vectors
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class TimeVector:
    """Finite-support collection of hierarchy times.

    dKP vectors carry the spatial variable ``x`` and real flows ``t_n`` for
    n >= 1.  dToda vectors carry a real ``t0`` and complex flows ``t_n`` for
    n != 0, subject to the reality condition ``t_{-n} = -conj(t_n)`` which is
    checked exactly at construction (use :meth:`dtoda` to have the negative
    half filled in automatically).  ``items`` is the sorted tuple of
    ``(index, value)`` pairs; indices beyond ``SUPPORT_CAP`` are rejected.
    """

    kind: str
    x: float = 0.0
    t0: float = 0.0
    items: tuple[tuple[int, complex], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in (DKP, DTODA):
            raise ValueError(f"kind must be {DKP!r} or {DTODA!r}")
        if not (math.isfinite(self.x) and math.isfinite(self.t0)):
            raise ValueError("x and t0 must be finite reals")
        indices = [n for n, _ in self.items]
        if indices != sorted(indices) or len(set(indices)) != len(indices):
            raise ValueError("items must be sorted with distinct indices")
        for n, v in self.items:
            if n != int(n):
                raise ValueError("flow indices must be integers")
            if abs(n) > SUPPORT_CAP:
                raise ValueError(f"flow index {n} beyond the supported cap {SUPPORT_CAP}")
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError("times must be finite")
            if self.kind == DKP:
                if n < 1:
                    raise ValueError("dKP flows are indexed n >= 1; the spatial variable is x")
                if v.imag != 0.0:
                    raise ValueError("dKP times are real")
            elif n == 0:
                raise ValueError("the zeroth dToda time lives in the t0 slot")
        if self.kind == DTODA:
            table = dict(self.items)
            for n, v in self.items:
                partner = table.get(-n, 0.0 + 0.0j)
                if partner != -v.conjugate():
                    raise ValueError(
                        f"dToda reality requires t(-n) = -conj(t(n)), violated at n = {n}; "
                        "construct with TimeVector.dtoda to fill the missing half"
                    )

    # -- constructors ---------------------------------------------------

    @classmethod
    def dkp(cls, x: float, times: Mapping[int, float] | None = None) -> "TimeVector":
        items = tuple(sorted((int(n), complex(v)) for n, v in (times or {}).items()))
        return cls(DKP, x=float(x), items=items)

    @classmethod
    def dtoda(
        cls,
        t0: float,
        times: Mapping[int, complex] | None = None,
        autofill: bool = True,
    ) -> "TimeVector":
        table = {int(n): complex(v) for n, v in (times or {}).items()}
        if autofill:
            for n, v in list(table.items()):
                table.setdefault(-n, -v.conjugate())
        return cls(DTODA, t0=float(t0), items=tuple(sorted(table.items())))

    # -- accessors ------------------------------------------------------

    def value(self, n: int) -> complex:
        for m, v in self.items:
            if m == n:
                return v
        return 0.0 + 0.0j

    def support(self) -> tuple[int, ...]:
        """Indices with a nonzero entry, ascending."""
        return tuple(n for n, v in self.items if v != 0)

    # -- perturbations --------------------------------------------------

    def with_x(self, x: float) -> "TimeVector":
        if self.kind != DKP:
            raise ValueError("only dKP vectors carry x")
        return TimeVector(self.kind, x=float(x), t0=self.t0, items=self.items)

    def with_t0(self, t0: float) -> "TimeVector":
        if self.kind != DTODA:
            raise ValueError("only dToda vectors carry t0")
        return TimeVector(self.kind, x=self.x, t0=float(t0), items=self.items)

    def perturbed(self, n: int, delta: complex) -> "TimeVector":
        """Shift flow ``n`` without leaving the admissible set.

        dKP: ``t_n += delta`` with real ``delta``.  dToda: ``n = 0`` shifts
        ``t0``; otherwise the shift is applied as the pair
        ``t_n += delta, t_{-n} -= conj(delta)`` so the reality condition is
        preserved exactly.  Combining the pair directions ``delta`` and
        ``i*delta`` lets callers reconstruct the one-sided derivatives in
        ``t_n`` and ``t_{-n}`` separately (Wirtinger algebra), all while the
        hodograph residual stays real.
        """
        n = int(n)
        u = complex(delta)
        if self.kind == DKP:
            if n < 1:
                raise ValueError("dKP flows are indexed n >= 1; shift x with with_x")
            if u.imag != 0.0:
                raise ValueError("dKP perturbations are real")
            table = dict(self.items)
            table[n] = table.get(n, 0.0 + 0.0j) + u
            return TimeVector(self.kind, x=self.x, items=tuple(sorted(table.items())))
        if n == 0:
            if u.imag != 0.0:
                raise ValueError("t0 is real")
            return self.with_t0(self.t0 + u.real)
        table = dict(self.items)
        table[n] = table.get(n, 0.0 + 0.0j) + u
        table[-n] = table.get(-n, 0.0 + 0.0j) - u.conjugate()
        return TimeVector(self.kind, t0=self.t0, items=tuple(sorted(table.items())))


# ----------------------------------------------------------------------
# hodograph coefficients
# ----------------------------------------------------------------------


def chi(L: Series, u: float, n: int) -> float:
    """Derivative of the n-th Faber polynomial of ``L`` at the point ``u``.

    ``chi_1 = 1`` for any map normalized to ``w + O(1/w)``.
    """
    if n < 1:
        raise ValueError("chi is defined for flows n >= 1")
    d = faber_phi(L, n).derivative()
    # drop the zeroed principal slots so evaluation at u = 0 stays legal
    val = d.restrict(0, max(d.hi, 0)).evaluate(u)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val)):
        raise ValueError("chi came out non-real; dKP data should be real")
    return float(val.real)


def xi(L: Series | None, Ltilde: Series | None, sigma: complex, n: int) -> complex:
    """Hodograph coefficient of the n-th dToda flow at driving point sigma.

    Positive flows read the exterior map (``sigma Phi_n'(sigma)``), negative
    flows the interior partner (``sigma Psi_{|n|}'(sigma)``), and ``n = 0``
    is identically 1.
    """
    if n == 0:
        return 1.0 + 0.0j
    if n > 0:
        if L is None:
            raise ValueError("positive flows need the exterior map")
        return sigma * faber_phi(L, n).derivative().evaluate(sigma)
    if Ltilde is None:
        raise ValueError("negative flows need the interior map")
    return sigma * faber_psi(Ltilde, -n).derivative().evaluate(sigma)


# ----------------------------------------------------------------------
# hodograph relation
# ----------------------------------------------------------------------


def hodograph_residual(
    coefficients: Mapping[int, Callable[[float], complex]],
    r_func: Callable[[float], float],
    t: TimeVector,
) -> Callable[[float], float]:
    """Residual ``lambda -> base + sum_n t_n c_n(lambda) - R(lambda)``.

    ``base`` is ``x`` for dKP and ``t0`` for dToda.  The returned callable
    raises :class:`NonRealResidualError` when the imaginary part exceeds
    ``REALITY_TOL``; on-slice dToda data keeps it at rounding level.
    """
    base = t.x if t.kind == DKP else t.t0
    active = [(n, v) for n, v in t.items if v != 0]
    for n, _ in active:
        if n not in coefficients:
            raise ValueError(f"no hodograph coefficient supplied for flow {n}")
    fns = {n: coefficients[n] for n, _ in active}

    def residual(lam: float) -> float:
        acc = complex(base)
        for n, tv in active:
            acc += tv * complex(fns[n](lam))
        acc -= complex(r_func(lam))
        if abs(acc.imag) > REALITY_TOL:
            raise NonRealResidualError(
                f"hodograph residual has imaginary part {acc.imag:.3e} at lambda = {lam:.6g}"
            )
        return acc.real

    return residual


def hodograph_solve(
    coefficients: Mapping[int, Callable[[float], complex]],
    r_func: Callable[[float], float],
    t: TimeVector,
    bracket: tuple[float, float],
    warm_start: float | None = None,
    tol: float = 1e-12,
    scan: int = 64,
) -> float:
    """Root of the hodograph residual inside ``bracket``.

    Secant iteration from ``warm_start`` (bracket midpoint when absent); when
    that fails or leaves the bracket, the residual is sampled on ``scan``
    panels and every sign change is polished with Brent's method, keeping the
    root closest to the warm start so continuation along a time path follows
    one branch.  Raises :class:`NoRootError` when nothing brackets.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")
    residual = hodograph_residual(coefficients, r_func, t)
    x0 = 0.5 * (lo + hi) if warm_start is None else float(warm_start)
    x0 = min(max(x0, lo), hi)

    try:
        root = float(newton(residual, x0, tol=1e-13, maxiter=60))
        if lo <= root <= hi and abs(residual(root)) < tol:
            return root
    except (RuntimeError, OverflowError, ValueError):
        pass  # secant wandered off; fall back to the bracketed scan

    xs = np.linspace(lo, hi, scan + 1)
    vals = [residual(float(x)) for x in xs]
    roots = []
    for a, b, fa, fb in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0.0:
            roots.append(float(brentq(residual, float(a), float(b), xtol=1e-15, rtol=1e-15)))
    if vals[-1] == 0.0:
        roots.append(float(xs[-1]))
    if not roots:
        raise NoRootError(
            f"no sign change of the hodograph residual in [{lo:.6g}, {hi:.6g}] "
            f"across {scan} panels"
        )
    root = min(roots, key=lambda r: abs(r - x0))
    if abs(residual(root)) >= tol:
        raise NoRootError(
            f"bracketed root at lambda = {root:.6g} left residual "
            f"{abs(residual(root)):.3e} >= {tol:.1e}; the relation is too steep there"
        )
    return root


# ----------------------------------------------------------------------
# reduced solutions
# ----------------------------------------------------------------------


class _FamilyInterpolant:
    """Monotone-cubic interpolation of a map family's coefficients in lambda.

    Exact at the grid nodes (the stored map is returned, not a spline value).
    Outside the grid the family is unknown and evaluation raises.
    """

    def __init__(self, family: ConformalFamily):
        first = family.maps[0]
        for m in family.maps:
            if (m.lo, m.hi, m.tag) != (first.lo, first.hi, first.tag):
                raise ValueError("family maps must share one window to interpolate")
        self._grid = np.asarray(family.grid, dtype=float)
        self._maps = family.maps
        self._lo = first.lo
        self._tag = first.tag
        if len(family.grid) >= 2:
            data = np.stack([m.coeffs for m in family.maps])
            self._re = PchipInterpolator(self._grid, data.real, axis=0)
            self._im = PchipInterpolator(self._grid, data.imag, axis=0)
        else:
            self._re = self._im = None

    def __call__(self, lam: float) -> Series:
        grid = self._grid
        if not (grid[0] <= lam <= grid[-1]):
            raise ValueError(
                f"lambda = {lam:.6g} outside the family grid [{grid[0]:.6g}, {grid[-1]:.6g}]"
            )
        idx = int(np.searchsorted(grid, lam))
        if idx < grid.size and grid[idx] == lam:
            return self._maps[idx]
        return Series(self._lo, self._re(lam) + 1j * self._im(lam), self._tag)


def _zero_r(lam: float) -> float:
    return 0.0


@dataclass
class ReducedSolution:
    """A one-variable reduction: map family plus hodograph closure.

    ``lam_star`` caches the most recent hodograph root and seeds the next
    solve, so walking a path through time space follows one branch.
    """

    kind: str
    provenance: str
    lam_range: tuple[float, float]
    map_fn: Callable[[float], Series] = field(repr=False)
    point_fn: Callable[[float], complex] = field(repr=False)
    interior_fn: Callable[[float], Series] | None = field(repr=False, default=None)
    r_func: Callable[[float], float] = field(repr=False, default=_zero_r)
    lam_star: float | None = None
    _map_cache: dict = field(default_factory=dict, repr=False, compare=False)
    _coef_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in (DKP, DTODA):
            raise ValueError(f"kind must be {DKP!r} or {DTODA!r}")
        if self.kind == DTODA and self.interior_fn is None:
            raise ValueError("dToda reductions need the interior partner map")
        lo, hi = self.lam_range
        if not lo < hi:
            raise ValueError("lam_range must satisfy lo < hi")

    # -- constructors ---------------------------------------------------

    @classmethod
    def from_family(
        cls,
        family: ConformalFamily,
        interior: ConformalFamily | None = None,
        r_func: Callable[[float], float] | None = None,
    ) -> "ReducedSolution":
        """Reduction backed by integrated (or tabulated) map families."""
        if family.orientation == Orientation.HALF_PLANE_H:
            if interior is not None:
                raise ValueError("half-plane reductions have no interior partner")
            kind = DKP
            point_fn = family.driving.u
            interior_fn = None
        elif family.orientation == Orientation.EXTERIOR_G:
            if interior is None or interior.orientation != Orientation.INTERIOR_F:
                raise ValueError("exterior families need their interior reflection partner")
            if interior.grid != family.grid:
                raise ValueError("exterior and interior families must share a grid")
            kind = DTODA
            point_fn = family.driving.sigma
            interior_fn = _FamilyInterpolant(interior)
        else:
            raise ValueError("pass the exterior family first, the interior one second")
        return cls(
            kind=kind,
            provenance=f"interpolated family of {len(family)} maps",
            lam_range=(family.grid[0], family.grid[-1]),
            map_fn=_FamilyInterpolant(family),
            point_fn=point_fn,
            interior_fn=interior_fn,
            r_func=r_func or _zero_r,
        )

    @classmethod
    def from_closed_form(
        cls,
        example_id: str,
        params: Mapping[str, complex] | None = None,
        lam_range: tuple[float, float] = (0.0, 1.5),
        depth: int = 16,
        r_func: Callable[[float], float] | None = None,
    ) -> "ReducedSolution":
        """Reduction whose maps are evaluated exactly at every lambda."""
        lo, hi = float(lam_range[0]), float(lam_range[1])
        probe = closed_form_family(example_id, (lo,), params, depth=depth)
        if probe.orientation == Orientation.HALF_PLANE_H:
            kind = DKP
            point_fn = probe.driving.u
            interior_fn = None
        else:
            kind = DTODA
            point_fn = probe.driving.sigma

            def interior_fn(lam: float, _id=example_id, _p=params, _d=depth) -> Series:
                if not lo <= lam <= hi:
                    raise ValueError(f"lambda = {lam:.6g} outside the family grid [{lo:.6g}, {hi:.6g}]")
                return closed_form_family(
                    _id, (lam,), _p, depth=_d, orientation=Orientation.INTERIOR_F
                ).final

        def map_fn(lam: float, _id=example_id, _p=params, _d=depth) -> Series:
            if not lo <= lam <= hi:
                raise ValueError(f"lambda = {lam:.6g} outside the family grid [{lo:.6g}, {hi:.6g}]")
            return closed_form_family(_id, (lam,), _p, depth=_d).final

        return cls(
            kind=kind,
            provenance=f"closed form {example_id}",
            lam_range=(lo, hi),
            map_fn=map_fn,
            point_fn=point_fn,
            interior_fn=interior_fn,
            r_func=r_func or _zero_r,
        )

    # -- evaluation -----------------------------------------------------

    def map_at(self, lam: float) -> Series:
        lam = float(lam)
        key = ("ext", lam)
        hit = self._map_cache.get(key)
        if hit is None:
            hit = self.map_fn(lam)
            self._remember(key, hit)
        return hit

    def interior_at(self, lam: float) -> Series:
        if self.interior_fn is None:
            raise ValueError("this reduction has no interior partner")
        lam = float(lam)
        key = ("int", lam)
        hit = self._map_cache.get(key)
        if hit is None:
            hit = self.interior_fn(lam)
            self._remember(key, hit)
        return hit

    def point_at(self, lam: float) -> complex:
        return self.point_fn(float(lam))

    def _remember(self, key, value) -> None:
        if len(self._map_cache) > 4096:
            self._map_cache.clear()
            self._coef_cache.clear()
        self._map_cache[key] = value

    def coefficient(self, n: int, lam: float) -> complex:
        """``chi_n(lambda)`` for dKP, ``xi_n(lambda)`` for dToda."""
        lam = float(lam)
        key = (n, lam)
        hit = self._coef_cache.get(key)
        if hit is not None:
            return hit
        if self.kind == DKP:
            val = complex(chi(self.map_at(lam), float(self.point_at(lam).real), n))
        elif n == 0:
            val = 1.0 + 0.0j
        elif n > 0:
            val = xi(self.map_at(lam), None, self.point_at(lam), n)
        else:
            val = xi(None, self.interior_at(lam), self.point_at(lam), n)
        self._coef_cache[key] = val
        return val

    def coefficient_fns(self, support: Iterable[int]) -> dict[int, Callable[[float], complex]]:
        return {int(n): (lambda lam, _n=int(n): self.coefficient(_n, lam)) for n in support}

    # -- hodograph ------------------------------------------------------

    def solve(
        self,
        t: TimeVector,
        bracket: tuple[float, float] | None = None,
        warm_start: float | None = None,
        tol: float = 1e-12,
    ) -> float:
        if t.kind != self.kind:
            raise ValueError(f"time vector kind {t.kind!r} does not match reduction {self.kind!r}")
        ws = self.lam_star if warm_start is None else warm_start
        lam = hodograph_solve(
            self.coefficient_fns(t.support()),
            self.r_func,
            t,
            self.lam_range if bracket is None else bracket,
            warm_start=ws,
            tol=tol,
        )
        self.lam_star = lam
        return lam


def build_lax(
    sol: ReducedSolution,
    t: TimeVector,
    bracket: tuple[float, float] | None = None,
    warm_start: float | None = None,
    tol: float = 1e-12,
) -> tuple[Series, Series | None]:
    """Lax series at the hodograph root ``lambda(t)``.

    Returns ``(L, Ltilde)``; the second slot is ``None`` for dKP.  The root
    search and the interpolation both raise when ``lambda(t)`` falls outside
    the family's lambda range.
    """
    lam = sol.solve(t, bracket=bracket, warm_start=warm_start, tol=tol)
    L = sol.map_at(lam)
    Ltilde = sol.interior_at(lam) if sol.kind == DTODA else None
    return L, Ltilde
