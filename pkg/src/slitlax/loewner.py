"""Slit-growth (Loewner) evolution of conformal maps as coefficient ODEs.

Three normalizations evolve here:

* ``ExteriorG``: G(w, l) = e^{phi(l)} w + c_0(l) + c_{-1}(l)/w + ... maps
  |w| > 1 onto the complement of a growing compact set.  The driving data
  are a point sigma(l) on the unit circle and the increasing logarithmic
  capacity phi(l).
* ``InteriorF``: F(w, l) = c_1(l) w + c_2(l) w^2 + ... on the unit disk,
  the reflection partner of ExteriorG (same driving data).
* ``HalfPlaneH``: H(w, l) = w + a_1(l)/w + ... in hydrodynamic
  normalization; the driving data are a real point U(l) and the monotone
  half-plane capacity a_1(l).

The evolution equations are

    dG/dl = -w dG/dw * (sigma + w)/(sigma - w) * phi'(l)
    dF/dl = -w dF/dw * (sigma + w)/(sigma - w) * phi'(l)
    dH/dl = -dH/dw * a_1'(l) / (U - w)

with the rational multiplier expanded geometrically on the relevant side:

    (sigma+w)/(sigma-w) = -1 - 2 sum_{k>=1} sigma^k  w^{-k}    (|w| > 1)
    (sigma+w)/(sigma-w) = +1 + 2 sum_{k>=1} sigma^-k w^k       (|w| < 1)
    1/(U-w)             = - sum_{k>=0} U^k w^{-k-1}            (|w| > |U|)

In coefficient space each multiplier moves exponents toward the truncated
side only, so the ODE for every retained mode closes over the stored
window: truncating the series drops modes but introduces no error in the
modes that are kept.  A fixed-step classical Runge-Kutta scheme (default
step 1e-3 in l, each grid interval subdivided evenly) keeps runs
deterministic, which the golden tests rely on.

``closed_form_family`` provides four analytic reference families, expanded
to the window through the series square root (principal branch): a
vertical half-plane slit, a pair of real rays, a radial slit, and a
degree-two exterior polynomial whose image boundary is a cardioid-like
curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .series import INF, ORIG, Series

DEFAULT_STEP = 1e-3
UNIT_MODULUS_TOL = 1e-12
_NORM_TOL = 1e-9


class DrivingError(ValueError):
    """Driving data breaks its contract (modulus, monotonicity, shape)."""


class IntegrationError(ArithmeticError):
    """An integration step produced a non-finite coefficient."""


class Orientation(Enum):
    EXTERIOR_G = "exterior_g"
    INTERIOR_F = "interior_f"
    HALF_PLANE_H = "half_plane_h"


# ----------------------------------------------------------------------
# driving data
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RadialDriving:
    """Circle point sigma(l) and capacity phi(l) for the radial equations.

    ``relaxed`` lifts the unit-modulus requirement on sigma; the flow still
    makes sense coefficientwise, but the image is no longer a slit
    complement and the reflection identity is lost.
    """

    sigma: Callable[[float], complex]
    phi: Callable[[float], float]
    phi_prime: Callable[[float], float]
    relaxed: bool = False

    @classmethod
    def constant(cls, sigma: complex, phi_slope: float = 1.0,
                 relaxed: bool = False) -> "RadialDriving":
        if not phi_slope > 0:
            raise DrivingError("phi must increase")
        s = complex(sigma)
        slope = float(phi_slope)
        return cls(lambda lam: s, lambda lam: slope * lam,
                   lambda lam: slope, relaxed)

    @classmethod
    def from_callables(cls, sigma, phi, phi_prime,
                       relaxed: bool = False) -> "RadialDriving":
        return cls(sigma, phi, phi_prime, relaxed)

    @classmethod
    def from_table(cls, lam: Sequence[float], sigma_values, phi_values,
                   relaxed: bool = False) -> "RadialDriving":
        """Monotone-cubic interpolation of sampled driving data.

        Unit-modulus data is interpolated through its unwrapped phase, so
        |sigma(l)| = 1 holds exactly between the nodes; relaxed tables
        interpolate real and imaginary parts separately.
        """
        lam = np.asarray(lam, dtype=float)
        sig = np.asarray(sigma_values, dtype=complex)
        phi = np.asarray(phi_values, dtype=float)
        if lam.ndim != 1 or lam.size < 2 or np.any(np.diff(lam) <= 0):
            raise DrivingError("table nodes must be strictly ascending, at least two")
        if sig.shape != lam.shape or phi.shape != lam.shape:
            raise DrivingError("table columns must match the node count")
        if np.any(np.diff(phi) <= 0):
            raise DrivingError("phi must increase")
        drift = float(np.max(np.abs(np.abs(sig) - 1.0)))
        if not relaxed and drift > UNIT_MODULUS_TOL:
            raise DrivingError(
                f"|sigma| deviates from 1 by {drift:.3e}; set relaxed to allow")
        phi_ip = PchipInterpolator(lam, phi)
        dphi = phi_ip.derivative()
        if relaxed:
            re = PchipInterpolator(lam, sig.real)
            im = PchipInterpolator(lam, sig.imag)

            def sigma_fn(l: float) -> complex:
                return complex(re(l)) + 1j * complex(im(l))
        else:
            theta = PchipInterpolator(lam, np.unwrap(np.angle(sig)))

            def sigma_fn(l: float) -> complex:
                return complex(np.exp(1j * float(theta(l))))

        return cls(sigma_fn, lambda l: float(phi_ip(l)),
                   lambda l: float(dphi(l)), relaxed)

    def check(self, nodes: np.ndarray) -> None:
        """Validate the contract on the nodes an integration will visit."""
        if not self.relaxed and nodes.size:
            moduli = np.array([abs(self.sigma(float(l))) for l in nodes])
            drift = float(np.max(np.abs(moduli - 1.0)))
            if drift > UNIT_MODULUS_TOL:
                raise DrivingError(
                    f"|sigma| deviates from 1 by {drift:.3e}; set relaxed to allow")
        if nodes.size >= 2:
            vals = np.array([self.phi(float(l)) for l in nodes])
            if np.any(np.diff(vals) <= 0):
                raise DrivingError("phi must increase along the grid")


@dataclass(frozen=True)
class ChordalDriving:
    """Real point U(l) and half-plane capacity a_1(l)."""

    u: Callable[[float], float]
    a1: Callable[[float], float]
    a1_prime: Callable[[float], float]

    @classmethod
    def constant(cls, u: float, a1_slope: float = -1.0) -> "ChordalDriving":
        if a1_slope == 0:
            raise DrivingError("a1 must move")
        uv = float(u)
        slope = float(a1_slope)
        return cls(lambda lam: uv, lambda lam: slope * lam, lambda lam: slope)

    @classmethod
    def from_callables(cls, u, a1, a1_prime) -> "ChordalDriving":
        return cls(u, a1, a1_prime)

    @classmethod
    def from_table(cls, lam: Sequence[float], u_values,
                   a1_values) -> "ChordalDriving":
        lam = np.asarray(lam, dtype=float)
        uv = np.asarray(u_values, dtype=float)
        av = np.asarray(a1_values, dtype=float)
        if lam.ndim != 1 or lam.size < 2 or np.any(np.diff(lam) <= 0):
            raise DrivingError("table nodes must be strictly ascending, at least two")
        if uv.shape != lam.shape or av.shape != lam.shape:
            raise DrivingError("table columns must match the node count")
        d = np.diff(av)
        if not (np.all(d >= 0) or np.all(d <= 0)):
            raise DrivingError("a1 must be monotone")
        u_ip = PchipInterpolator(lam, uv)
        a_ip = PchipInterpolator(lam, av)
        da = a_ip.derivative()
        return cls(lambda l: float(u_ip(l)), lambda l: float(a_ip(l)),
                   lambda l: float(da(l)))

    def a1_direction(self, nodes: np.ndarray) -> int:
        """Sign of the capacity's motion along the nodes (+1, -1, or 0).

        Raises when a1 is not monotone, which would make the evolution
        retrace itself.
        """
        vals = np.array([self.a1(float(l)) for l in nodes])
        d = np.diff(vals)
        if d.size == 0 or np.all(d == 0):
            return 0
        if np.all(d >= 0):
            return 1
        if np.all(d <= 0):
            return -1
        raise DrivingError("a1 must be monotone along the grid")


# ----------------------------------------------------------------------
# families
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ConformalFamily:
    """One truncated map per grid value, produced by a single evolution."""

    driving: object
    grid: tuple[float, ...]
    maps: tuple[Series, ...]
    orientation: Orientation

    def __post_init__(self):
        if len(self.grid) == 0:
            raise ValueError("family needs at least one grid point")
        if len(self.grid) != len(self.maps):
            raise ValueError("one map per grid point")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly ascending")

    def __len__(self) -> int:
        return len(self.maps)

    def __iter__(self) -> Iterator[tuple[float, Series]]:
        return iter(zip(self.grid, self.maps))

    @property
    def final(self) -> Series:
        return self.maps[-1]

    def normalization_error(self) -> float:
        """Worst deviation from the normalization the orientation pins.

        Exterior maps must carry linear coefficient e^{phi(l)}; half-plane
        maps carry linear coefficient 1, zero constant term, and a_1(l) on
        the 1/w slot; interior maps carry c_1(l0) e^{-(phi(l)-phi(l0))} on
        the linear slot (the capacity seen from inside).
        """
        if self.orientation is Orientation.HALF_PLANE_H:
            worst = 0.0
            for lam, m in self:
                worst = max(worst,
                            abs(m.coeff(1) - 1.0),
                            abs(m.coeff(0)),
                            abs(m.coeff(-1) - self.driving.a1(lam)))
            return worst
        phi = self.driving.phi
        if self.orientation is Orientation.EXTERIOR_G:
            return max(abs(m.coeff(1) - math.exp(phi(lam))) for lam, m in self)
        phi0 = phi(self.grid[0])
        c0 = self.maps[0].coeff(1)
        return max(abs(m.coeff(1) - c0 * math.exp(-(phi(lam) - phi0)))
                   for lam, m in self)


# ----------------------------------------------------------------------
# geometric multipliers
# ----------------------------------------------------------------------


def _exterior_multiplier(sigma: complex, lo: int) -> Series:
    depth = -lo
    c = np.zeros(depth + 1, dtype=np.complex128)
    c[depth] = -1.0
    p = 1.0 + 0.0j
    for k in range(1, depth + 1):
        p *= sigma
        c[depth - k] = -2.0 * p
    return Series(lo, c, INF)


def _interior_multiplier(sigma: complex, hi: int) -> Series:
    if sigma == 0:
        raise DrivingError("driving point must be nonzero")
    inv = 1.0 / complex(sigma)
    c = np.zeros(hi + 1, dtype=np.complex128)
    c[0] = 1.0
    p = 1.0 + 0.0j
    for k in range(1, hi + 1):
        p *= inv
        c[k] = 2.0 * p
    return Series(0, c, ORIG)


def _chordal_multiplier(u: float, lo: int) -> Series:
    c = np.zeros(-lo, dtype=np.complex128)
    p = 1.0 + 0.0j
    for k in range(1, -lo + 1):
        c[-lo - k] = -p
        p *= u
    return Series(lo, c, INF)


# ----------------------------------------------------------------------
# integration core
# ----------------------------------------------------------------------


def _validate_grid(grid) -> tuple[float, ...]:
    g = tuple(float(x) for x in np.atleast_1d(np.asarray(grid, dtype=float)))
    if len(g) == 0:
        raise ValueError("grid needs at least one point")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise ValueError("grid must be strictly ascending")
    return g


def _subdivision(a: float, b: float, step: float) -> tuple[int, float]:
    n = max(1, math.ceil((b - a) / step - 1e-12))
    return n, (b - a) / n


def _visited_nodes(grid: tuple[float, ...], step: float) -> np.ndarray:
    nodes = [grid[0]]
    for a, b in zip(grid, grid[1:]):
        n, h = _subdivision(a, b, step)
        nodes.extend(a + (k + 1) * h for k in range(n - 1))
        nodes.append(b)
    return np.array(nodes)


def _rk4_interval(rhs, a: float, b: float, y: Series, step: float) -> Series:
    n, h = _subdivision(a, b, step)
    for i in range(n):
        t = a + i * h
        try:
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + k1.scale(0.5 * h))
            k3 = rhs(t + 0.5 * h, y + k2.scale(0.5 * h))
            k4 = rhs(t + h, y + k3.scale(h))
            y = y + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0)
        except ValueError as exc:
            if "non-finite" in str(exc):
                raise IntegrationError(
                    f"non-finite coefficient near lambda = {t:.6g}") from exc
            raise
    return y


def _march(driving, grid, initial, rhs, step, orientation) -> ConformalFamily:
    maps = [initial]
    y = initial
    for a, b in zip(grid, grid[1:]):
        y = _rk4_interval(rhs, a, b, y, step)
        maps.append(y)
    return ConformalFamily(driving, grid, tuple(maps), orientation)


def integrate_radial(driving: RadialDriving, initial: Series, grid,
                     step: float = DEFAULT_STEP) -> ConformalFamily:
    """March an exterior map along the grid; the first entry is ``initial``.

    A one-point grid returns the initial map unchanged (zero total growth).
    """
    g = _validate_grid(grid)
    if not step > 0:
        raise ValueError("step must be positive")
    driving.check(_visited_nodes(g, step))
    if initial.tag != INF or initial.edge_exponent() != 1:
        raise DrivingError("exterior maps read c w + O(1): leading exponent 1")
    want = math.exp(driving.phi(g[0]))
    if abs(initial.coeff(1) - want) > _NORM_TOL * max(1.0, want):
        raise DrivingError(
            "linear coefficient of the initial map must equal e^{phi} at the start")

    def rhs(lam: float, s: Series) -> Series:
        m = _exterior_multiplier(driving.sigma(lam), s.lo - 1)
        return (s.euler() * m).scale(-driving.phi_prime(lam)).restrict(s.lo, s.hi)

    return _march(driving, g, initial, rhs, step, Orientation.EXTERIOR_G)


def integrate_interior(driving: RadialDriving, initial: Series, grid,
                       step: float = DEFAULT_STEP) -> ConformalFamily:
    """March the disk-side partner map; same driving data as the exterior."""
    g = _validate_grid(grid)
    if not step > 0:
        raise ValueError("step must be positive")
    driving.check(_visited_nodes(g, step))
    if initial.tag != ORIG or initial.edge_exponent() != 1:
        raise DrivingError("interior maps vanish at 0 with nonzero derivative")

    def rhs(lam: float, s: Series) -> Series:
        m = _interior_multiplier(driving.sigma(lam), s.hi - 1)
        return (s.euler() * m).scale(-driving.phi_prime(lam)).restrict(s.lo, s.hi)

    return _march(driving, g, initial, rhs, step, Orientation.INTERIOR_F)


def integrate_chordal(driving: ChordalDriving, initial: Series, grid,
                      step: float = DEFAULT_STEP) -> ConformalFamily:
    """March a half-plane map w + a_1/w + ... along the grid."""
    g = _validate_grid(grid)
    if not step > 0:
        raise ValueError("step must be positive")
    driving.a1_direction(_visited_nodes(g, step))
    if initial.tag != INF or initial.edge_exponent() != 1 or initial.lo > -1:
        raise DrivingError("half-plane maps read w + a1/w + O(1/w^2)")
    if abs(initial.coeff(1) - 1.0) > UNIT_MODULUS_TOL or abs(initial.coeff(0)) > UNIT_MODULUS_TOL:
        raise DrivingError("half-plane normalization: linear coefficient 1, no constant")
    if abs(initial.coeff(-1) - driving.a1(g[0])) > _NORM_TOL:
        raise DrivingError("the 1/w coefficient of the initial map must equal a1 at the start")

    def rhs(lam: float, s: Series) -> Series:
        c = _chordal_multiplier(driving.u(lam), s.lo - 1)
        return (s.derivative() * c).scale(-driving.a1_prime(lam)).restrict(s.lo, s.hi)

    return _march(driving, g, initial, rhs, step, Orientation.HALF_PLANE_H)


# ----------------------------------------------------------------------
# reflection
# ----------------------------------------------------------------------


def reflect(series: Series) -> Series:
    """Swap an exterior map with its disk-side partner.

    Conjugate the coefficients, substitute w -> 1/w, and take the
    multiplicative reciprocal; for unit-circle driving this exchanges the
    two maps of the same growth process.  The recipe is its own inverse,
    so it also carries interior maps back to exterior form.
    """
    if series.edge_exponent() != 1:
        raise ValueError("reflection needs a nonzero linear coefficient")
    return series.conj().invert_variable().reciprocal()


# ----------------------------------------------------------------------
# analytic reference families
# ----------------------------------------------------------------------

EXAMPLE_IDS = ("chordal_slit", "chordal_two_rays", "radial_slit", "radial_cardioid")


def _chordal_slit_map(lam: float, u: float, depth: int) -> Series:
    inner = Series.from_terms(
        {0: 1.0, -1: -2.0 * u, -2: u * u - 2.0 * lam}, INF, depth=depth)
    return Series.w(depth=depth) * inner.sqrt() + u


def _chordal_two_rays_map(lam: float, depth: int) -> Series:
    # w + l^2/(w - 2l) expanded geometrically
    terms: dict[int, complex] = {1: 1.0}
    c = lam * lam
    for k in range(1, depth + 1):
        terms[-k] = c
        c *= 2.0 * lam
    return Series.from_terms(terms, INF, window=(-depth, 1))


def _radial_slit_exterior(lam: float, sigma: complex, depth: int) -> Series:
    if lam == 0.0:
        # the formula collapses to the identity with heavy cancellation;
        # return the exact degenerate value instead of its rounding dust,
        # on the same window the generic branch produces
        return Series.from_terms({1: 1.0}, INF, window=(1 - depth, 1))
    s = Series.from_terms({0: 1.0, -1: sigma}, INF, depth=depth)
    inner = Series.from_terms(
        {0: 1.0, -1: 2.0 * sigma * (1.0 - 2.0 * math.exp(-lam)), -2: sigma * sigma},
        INF, depth=depth)
    out = (Series.w(depth=depth) * (s * s + s * inner.sqrt())).scale(
        0.5 * math.exp(lam)) - sigma
    return out.chop()


def _radial_slit_interior(lam: float, sigma: complex, depth: int) -> Series:
    if lam == 0.0:
        return Series.w(ORIG, depth=depth).restrict(1, depth - 1)
    si = 1.0 / sigma
    ws = Series.from_terms({0: sigma, 1: 1.0}, ORIG, depth=depth)
    inner = Series.from_terms(
        {0: 1.0, 1: 2.0 * si * (1.0 - 2.0 * math.exp(-lam)), 2: si * si},
        ORIG, depth=depth)
    num = ws * ws - (ws * inner.sqrt()).scale(sigma)
    out = (num * Series.monomial(-1, ORIG, depth=depth)).scale(
        0.5 * math.exp(lam)) - sigma
    out = out.chop()
    # the w^{-1} and constant slots cancel exactly; drop them from the window
    return out.restrict(1, out.hi)


def _radial_cardioid_exterior(lam: float, sigma: complex, depth: int) -> Series:
    e = math.exp(lam)
    return Series.from_terms(
        {1: e, 0: 2.0 * sigma * e, -1: sigma * sigma * e}, INF, depth=depth)


def _radial_cardioid_interior(lam: float, sigma: complex, depth: int) -> Series:
    sb = np.conj(sigma)
    den = Series.from_terms({0: 1.0, 1: sb}, ORIG, depth=depth)
    return (Series.w(ORIG, depth=depth) * (den * den).reciprocal()).scale(
        math.exp(-lam))


def _require_params(params: dict, wanted: set[str], example_id: str) -> None:
    missing = wanted - params.keys()
    unknown = params.keys() - wanted
    if missing:
        raise ValueError(f"{example_id} needs parameter(s): {', '.join(sorted(missing))}")
    if unknown:
        raise ValueError(f"{example_id} does not take: {', '.join(sorted(unknown))}")


def closed_form_family(example_id: str, grid, params=None, depth: int = 16,
                       orientation: Orientation | None = None) -> ConformalFamily:
    """Analytic reference families, series-expanded on the window.

    ====================  ==================  =================================
    id                    params              geometry
    ====================  ==================  =================================
    ``chordal_slit``      ``{"u": real}``     vertical slit over U, a1 = -l
    ``chordal_two_rays``  none                rays (-inf, 0] and [4l, inf),
                                              U = 3l, a1 = l^2
    ``radial_slit``       ``{"sigma"}``       radial slit at sigma, phi = l
    ``radial_cardioid``   ``{"sigma"}``       degree-two exterior map, phi = l
    ====================  ==================  =================================

    The radial ids also accept ``orientation=Orientation.INTERIOR_F`` for the
    disk-side partner.  The formulas are analytic in lambda, negative values
    included; the slit geometries are genuine growth processes only for
    lambda >= 0, but the hodograph of a reduction may wander below zero.
    """
    if example_id not in EXAMPLE_IDS:
        raise ValueError(
            f"unknown example id {example_id!r}; known: {', '.join(EXAMPLE_IDS)}")
    if isinstance(orientation, str):
        orientation = Orientation(orientation)
    params = dict(params or {})
    g = _validate_grid(grid)

    if example_id in ("chordal_slit", "chordal_two_rays"):
        if orientation not in (None, Orientation.HALF_PLANE_H):
            raise ValueError(f"{example_id} exists only in the half-plane form")
        if example_id == "chordal_slit":
            _require_params(params, {"u"}, example_id)
            u = params["u"]
            if isinstance(u, complex) and u.imag != 0:
                raise ValueError("u must be real")
            u = float(np.real(u))
            driving = ChordalDriving.constant(u, a1_slope=-1.0)
            maps = tuple(_chordal_slit_map(l, u, depth) for l in g)
        else:
            _require_params(params, set(), example_id)
            driving = ChordalDriving.from_callables(
                lambda l: 3.0 * l, lambda l: l * l, lambda l: 2.0 * l)
            maps = tuple(_chordal_two_rays_map(l, depth) for l in g)
        return ConformalFamily(driving, g, maps, Orientation.HALF_PLANE_H)

    _require_params(params, {"sigma"}, example_id)
    sigma = complex(params["sigma"])
    if abs(abs(sigma) - 1.0) > UNIT_MODULUS_TOL:
        raise ValueError("sigma must lie on the unit circle")
    ori = orientation or Orientation.EXTERIOR_G
    if ori is Orientation.HALF_PLANE_H:
        raise ValueError(f"{example_id} has no half-plane form")
    driving = RadialDriving.constant(sigma)
    if example_id == "radial_slit":
        build = (_radial_slit_exterior if ori is Orientation.EXTERIOR_G
                 else _radial_slit_interior)
    else:
        build = (_radial_cardioid_exterior if ori is Orientation.EXTERIOR_G
                 else _radial_cardioid_interior)
    maps = tuple(build(l, sigma, depth) for l in g)
    return ConformalFamily(driving, g, maps, ori)
