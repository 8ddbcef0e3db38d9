"""Discrete log-gas equilibria on embedded curves.

N point charges z_k = gamma(s_k), confined to a fixed curve, interact through
the planar Coulomb kernel under an external polynomial potential:

    E(s) = -2 sum_{i<j} log|z_i - z_j| - (2/hbar) sum_k sum_{n>=1} Re(t_n z_k^n)

The minimizer over the curve parameters s is the discrete equilibrium
configuration.  For a quadratic well on the real line it coincides with
scaled roots of the Hermite polynomial (Stieltjes' electrostatic
characterization), which the tests use as an exact oracle; its large-N
density is the semicircle law, recovered here through spacing-based
estimates.

Everything is deterministic.  Descent uses projected gradients with a
backtracking line search, never sampling, and the energy accumulates through
a fixed-order pairwise summation tree so results are bit-stable regardless
of threading or vector width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .reduction import DTODA, TimeVector

__all__ = [
    "CIRCLE_ARC",
    "ConfinementError",
    "CurveSpec",
    "DensityProfile",
    "ExteriorMapReport",
    "GasState",
    "HALF_RAY",
    "REAL_LINE",
    "RelaxResult",
    "SAMPLED",
    "SupportError",
    "SupportInfo",
    "density_profile",
    "energy",
    "energy_gradient",
    "exterior_map_check",
    "initial_state",
    "relax",
    "smooth_samples",
    "support",
]

REAL_LINE = "real_line"
HALF_RAY = "half_ray"
CIRCLE_ARC = "circle_arc"
SAMPLED = "sampled"
_KINDS = (REAL_LINE, HALF_RAY, CIRCLE_ARC, SAMPLED)

# ratio |a_1| / (a_2 - a_1) of the first two Airy-function zeros; the last
# interparticle gap scaled by it extrapolates from the outermost charge to
# the continuum support edge
_AIRY_EDGE_RATIO = 2.33810741 / (4.08794944 - 2.33810741)


class ConfinementError(ValueError):
    """The potential does not hold the gas together on an unbounded curve."""


class SupportError(ValueError):
    """The configuration splits into several arcs."""


def _pairwise_sum(a: np.ndarray) -> float:
    """Fixed-shape binary summation tree; order never depends on threading."""
    n = a.size
    if n <= 64:
        return float(np.add.reduce(a)) if n else 0.0
    m = n // 2
    return _pairwise_sum(a[:m]) + _pairwise_sum(a[m:])


# ----------------------------------------------------------------------
# curves
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CurveSpec:
    """A parametrized curve s -> gamma(s) in the plane.

    ``gamma`` and ``gamma_prime`` must accept float arrays and return complex
    arrays of the same shape.  ``domain`` may be unbounded; ``arc_length``
    records whether s measures length along the curve.
    """

    kind: str
    gamma: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    gamma_prime: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    domain: tuple[float, float] = (-math.inf, math.inf)
    arc_length: bool = True
    label: str = ""

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}")
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError("curve domain must satisfy lo < hi")
        probe = self._probe_grid(193)
        z = np.asarray(self.gamma(probe))
        if not np.all(np.isfinite(z)):
            raise ValueError("curve parametrization is not finite on its domain")
        scale = 1.0 + float(np.max(np.abs(z)))
        d = np.abs(z[:, None] - z[None, :])
        np.fill_diagonal(d, np.inf)
        if float(d.min()) < 1e-9 * scale:
            raise ValueError("curve parametrization is not injective (sampled check)")

    def _probe_grid(self, k: int) -> np.ndarray:
        lo, hi = self.window()
        # open grid: a closed curve may pinch only at the seam endpoints
        return np.linspace(lo, hi, k + 2)[1:-1]

    def window(self) -> tuple[float, float]:
        """A finite parameter window, clipping unbounded ends."""
        lo, hi = self.domain
        if not math.isfinite(lo):
            lo = min(-32.0, hi - 64.0) if math.isfinite(hi) else -32.0
        if not math.isfinite(hi):
            hi = max(32.0, lo + 64.0)
        return lo, hi

    def clip(self, s: np.ndarray) -> np.ndarray:
        lo, hi = self.domain
        return np.minimum(np.maximum(s, lo), hi)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.domain[0]) and math.isfinite(self.domain[1])

    @classmethod
    def real_line(cls) -> "CurveSpec":
        return cls(
            kind=REAL_LINE,
            gamma=lambda s: np.asarray(s, dtype=float) + 0j,
            gamma_prime=lambda s: np.ones_like(np.asarray(s, dtype=float)) + 0j,
            domain=(-math.inf, math.inf),
            arc_length=True,
            label="real line",
        )

    @classmethod
    def half_ray(cls, origin: complex = 0j, angle: float = 0.0) -> "CurveSpec":
        w = complex(np.exp(1j * angle))
        p0 = complex(origin)
        return cls(
            kind=HALF_RAY,
            gamma=lambda s: p0 + np.asarray(s, dtype=float) * w,
            gamma_prime=lambda s: np.full(np.shape(s), w, dtype=complex),
            domain=(0.0, math.inf),
            arc_length=True,
            label=f"ray from {p0:g} at angle {angle:g}",
        )

    @classmethod
    def unit_circle_arc(cls, lo: float = -math.pi, hi: float = math.pi) -> "CurveSpec":
        if hi - lo > 2 * math.pi + 1e-12:
            raise ValueError("an arc covers at most one turn of the circle")
        return cls(
            kind=CIRCLE_ARC,
            gamma=lambda s: np.exp(1j * np.asarray(s, dtype=float)),
            gamma_prime=lambda s: 1j * np.exp(1j * np.asarray(s, dtype=float)),
            domain=(lo, hi),
            arc_length=True,
            label=f"unit-circle arc [{lo:g}, {hi:g}]",
        )

    @classmethod
    def from_samples(cls, s_nodes, z_nodes, arc_length: bool = False) -> "CurveSpec":
        s_nodes = np.asarray(s_nodes, dtype=float)
        z_nodes = np.asarray(z_nodes, dtype=complex)
        if s_nodes.ndim != 1 or s_nodes.size < 4:
            raise ValueError("a sampled curve needs at least 4 nodes")
        if s_nodes.shape != z_nodes.shape:
            raise ValueError("parameter and position nodes must align")
        if np.any(np.diff(s_nodes) <= 0):
            raise ValueError("parameter nodes must be strictly increasing")
        re = PchipInterpolator(s_nodes, z_nodes.real)
        im = PchipInterpolator(s_nodes, z_nodes.imag)
        dre, dim = re.derivative(), im.derivative()
        return cls(
            kind=SAMPLED,
            gamma=lambda s: re(s) + 1j * im(s),
            gamma_prime=lambda s: dre(s) + 1j * dim(s),
            domain=(float(s_nodes[0]), float(s_nodes[-1])),
            arc_length=arc_length,
            label=f"sampled curve ({s_nodes.size} nodes)",
        )


# ----------------------------------------------------------------------
# gas states
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class GasState:
    """Particle parameters on a curve plus the potential couplings.

    ``t`` carries t0 = hbar * n; the couplings t_n with n >= 1 drive the
    external potential while the mirror entries keep the energy real.
    """

    n: int
    s: np.ndarray
    t: TimeVector
    hbar: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("a gas needs at least one particle")
        s = np.array(self.s, dtype=float, copy=True)
        if s.shape != (self.n,):
            raise ValueError("positions must be a length-n real vector")
        if not np.all(np.isfinite(s)):
            raise ValueError("positions must be finite")
        if np.any(np.diff(s) < 0):
            raise ValueError("positions must be sorted ascending")
        s.flags.writeable = False
        object.__setattr__(self, "s", s)
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise ValueError("hbar must be positive")
        if self.t.kind != DTODA:
            raise ValueError("gas couplings live in a dToda time vector")
        want = self.hbar * self.n
        if abs(self.t.t0 - want) > 1e-9 * max(1.0, abs(want)):
            raise ValueError("gas states carry t0 = hbar * n")

    @classmethod
    def make(cls, n: int, s, times=None, hbar: float = 1.0, seed: int = 0) -> "GasState":
        t = TimeVector.dtoda(hbar * n, dict(times or {}))
        return cls(n=n, s=np.asarray(s, dtype=float), t=t, hbar=hbar, seed=seed)

    def with_positions(self, s) -> "GasState":
        return replace(self, s=np.asarray(s, dtype=float))

    def couplings(self) -> list[tuple[int, complex]]:
        return [(m, v) for m, v in self.t.items if m >= 1]


def _heuristic_scale(n: int, couplings, hbar: float) -> float:
    if not couplings:
        return 1.0
    m, c = max(couplings, key=lambda mv: mv[0])
    if abs(c) == 0:
        return 1.0
    scale = (hbar * n / (m * abs(c))) ** (1.0 / m)
    return float(min(max(scale, 1e-3), 1e6))


def initial_state(
    curve: CurveSpec,
    n: int,
    times=None,
    hbar: float = 1.0,
    seed: int = 0,
    jitter: float = 0.0,
) -> GasState:
    """Equally spaced start on a heuristic interval set by the couplings.

    ``jitter`` (a fraction of the mean spacing) adds seeded uniform noise;
    the default start is deterministic and symmetric where the curve is.
    """
    state = GasState.make(n, np.zeros(n), times, hbar, seed)
    L = _heuristic_scale(n, state.couplings(), hbar)
    lo, hi = curve.domain
    if curve.kind == REAL_LINE:
        s = np.linspace(-L, L, n) if n > 1 else np.zeros(1)
    elif curve.kind == HALF_RAY:
        s = np.linspace(L / (n + 1.0), L, n)
    else:
        a, b = curve.window()
        pad = 0.02 * (b - a)
        s = np.linspace(a + pad, b - pad, n)
    if jitter:
        rng = np.random.default_rng(seed)
        gap = (s[-1] - s[0]) / max(n - 1, 1)
        s = np.sort(curve.clip(s + rng.uniform(-1.0, 1.0, n) * jitter * gap))
    return state.with_positions(np.sort(s))


# ----------------------------------------------------------------------
# energy and forces
# ----------------------------------------------------------------------


def energy(state: GasState, curve: CurveSpec) -> float:
    """Total electrostatic energy; +inf when particles coincide."""
    z = np.asarray(curve.gamma(state.s))
    if state.n >= 2:
        i, j = np.triu_indices(state.n, 1)
        gaps = np.abs(z[i] - z[j])
        if np.any(gaps == 0.0):
            return math.inf
        e_pair = -2.0 * _pairwise_sum(np.log(gaps))
    else:
        e_pair = 0.0
    pot = np.zeros(state.n)
    for m, v in state.couplings():
        pot += np.real(v * z**m)
    return e_pair - (2.0 / state.hbar) * _pairwise_sum(pot)


def energy_gradient(state: GasState, curve: CurveSpec) -> np.ndarray:
    """dE/ds_k via the chain rule through the curve parametrization."""
    z = np.asarray(curve.gamma(state.s))
    zp = np.asarray(curve.gamma_prime(state.s))
    if state.n >= 2:
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        # np.add.reduce over a fixed row layout is itself a pairwise tree
        force = np.add.reduce(inv, axis=1)
    else:
        force = np.zeros(1, dtype=complex)
    dv = np.zeros_like(z)
    for m, v in state.couplings():
        dv += m * v * z ** (m - 1)
    de_dz = -force - dv / state.hbar
    return 2.0 * np.real(de_dz * zp)


def _confinement_probe(curve: CurveSpec, state: GasState) -> None:
    """Reject potentials that favor escape to an unbounded curve end."""
    if curve.bounded:
        return
    couplings = state.couplings()
    if not couplings:
        raise ConfinementError(
            "no positive-index couplings: the gas spreads without bound"
        )
    L = 4.0 * _heuristic_scale(state.n, couplings, state.hbar)
    lo, hi = curve.domain
    ends = []
    if not math.isfinite(hi):
        ends.append(np.array([L, 2 * L, 4 * L]))
    if not math.isfinite(lo):
        ends.append(np.array([-L, -2 * L, -4 * L]))
    for ladder in ends:
        z = np.asarray(curve.gamma(ladder))
        u = np.zeros(3)
        for m, v in couplings:
            u -= (2.0 / state.hbar) * np.real(v * z**m)
        if not (u[1] > u[0] and u[2] > u[1]):
            raise ConfinementError(
                "potential decreases toward an unbounded curve end; "
                "the gas has no equilibrium there"
            )


# ----------------------------------------------------------------------
# relaxation
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RelaxResult:
    """Best state found, with the descent record."""

    state: GasState
    converged: bool
    iterations: int
    energy: float
    max_gradient: float
    energies: tuple[float, ...]


def _projected_gradient(s: np.ndarray, g: np.ndarray, lo: float, hi: float) -> np.ndarray:
    pg = g.copy()
    pg[(s <= lo) & (g > 0)] = 0.0
    pg[(s >= hi) & (g < 0)] = 0.0
    return pg


def relax(
    state: GasState,
    curve: CurveSpec,
    max_iters: int = 5000,
    tol: float = 1e-8,
) -> RelaxResult:
    """Projected gradient descent with a backtracking line search.

    Steps are scaled by the Barzilai-Borwein secant estimate and halved until
    the Armijo decrease test passes, so the recorded energies are strictly
    decreasing.  Terminates when the projected gradient's max norm drops
    below ``tol`` or after ``max_iters`` accepted steps; a result with
    ``converged=False`` carries the best state reached.
    """
    _confinement_probe(curve, state)
    lo, hi = curve.domain
    s = np.array(state.s, dtype=float)
    e = energy(state.with_positions(s), curve)
    if not math.isfinite(e):
        raise ValueError("initial configuration has infinite energy")
    g = energy_gradient(state.with_positions(s), curve)
    energies = [e]
    alpha = 1.0 / (1.0 + float(np.max(np.abs(g))))
    s_prev: np.ndarray | None = None
    g_prev: np.ndarray | None = None
    iterations = 0
    while iterations < max_iters:
        pg = _projected_gradient(s, g, lo, hi)
        if float(np.max(np.abs(pg))) < tol:
            break
        if s_prev is not None:
            ds = s - s_prev
            dg = g - g_prev
            denom = float(ds @ dg)
            if denom > 0:
                alpha = float(ds @ ds) / denom
            else:
                alpha *= 2.0
        alpha = float(min(max(alpha, 1e-18), 1e8))
        accepted = False
        step = alpha
        for _ in range(60):
            cand = np.sort(curve.clip(s - step * g))
            decrease = float(g @ (s - cand))
            e_cand = energy(state.with_positions(cand), curve)
            # strict inequality so accepted energies always decrease, even
            # when the Armijo margin rounds away near the float plateau
            if math.isfinite(e_cand) and decrease > 0 and e_cand < e - 1e-4 * decrease:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        s_prev, g_prev = s, g
        s, e = cand, e_cand
        g = energy_gradient(state.with_positions(s), curve)
        energies.append(e)
        alpha = step
        iterations += 1
    gmax = float(np.max(np.abs(_projected_gradient(s, g, lo, hi))))
    return RelaxResult(
        state=state.with_positions(s),
        converged=gmax < tol,
        iterations=iterations,
        energy=e,
        max_gradient=gmax,
        energies=tuple(energies),
    )


# ----------------------------------------------------------------------
# support and density
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SupportInfo:
    lo: float
    hi: float
    gapped: bool
    widest_gap: float
    typical_gap: float


def support(state: GasState, gap_ratio: float = 8.0) -> SupportInfo:
    """Endpoints of the occupied parameter range, with a multi-arc flag.

    A gap is declared when the widest interparticle spacing exceeds
    ``gap_ratio`` times the median spacing; the Hermite-type edge spacing of
    a connected gas stays near three times the median, well below the
    default threshold.
    """
    s = state.s
    if state.n == 1:
        return SupportInfo(float(s[0]), float(s[0]), False, 0.0, 0.0)
    gaps = np.diff(s)
    med = float(np.median(gaps))
    widest = float(gaps.max())
    gapped = med > 0 and widest > gap_ratio * med
    return SupportInfo(float(s[0]), float(s[-1]), gapped, widest, med)


def _edge_estimates(state: GasState, edge_correct: bool) -> tuple[float, float]:
    s = state.s
    if not edge_correct or state.n < 8:
        return float(s[0]), float(s[-1])
    lo = float(s[0] - _AIRY_EDGE_RATIO * (s[1] - s[0]))
    hi = float(s[-1] + _AIRY_EDGE_RATIO * (s[-1] - s[-2]))
    return lo, hi


def _nw_smooth(s: np.ndarray, vals: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    w = np.exp(-0.5 * ((grid[:, None] - s[None, :]) / h) ** 2)
    return (w @ vals) / np.add.reduce(w, axis=1)


@dataclass(frozen=True)
class DensityProfile:
    grid: np.ndarray
    values: np.ndarray
    raw: np.ndarray
    kernel_width: float


def _spacing_reciprocal(s: np.ndarray) -> np.ndarray:
    v = np.empty(s.size)
    v[1:-1] = 2.0 / (s[2:] - s[:-2])
    v[0] = 1.0 / (s[1] - s[0])
    v[-1] = 1.0 / (s[-1] - s[-2])
    return v


def density_profile(state: GasState, grid_points: int = 257) -> DensityProfile:
    """Linear particle density along the curve parameter.

    Raw values are reciprocal nearest-neighbor spacings (so they integrate
    to the particle number); a fixed-width Gaussian kernel, width
    (hi - lo)/sqrt(n), smooths them onto a uniform grid over the support.
    """
    if state.n < 3:
        raise ValueError("density estimation needs at least 3 particles")
    s = state.s
    if np.any(np.diff(s) <= 0):
        raise ValueError("density estimation needs distinct sorted positions")
    raw = _spacing_reciprocal(s)
    h = (s[-1] - s[0]) / math.sqrt(state.n)
    grid = np.linspace(s[0], s[-1], grid_points)
    return DensityProfile(grid=grid, values=_nw_smooth(s, raw, grid, h), raw=raw, kernel_width=h)


def smooth_samples(state: GasState, samples, grid_points: int = 257) -> np.ndarray:
    """Run per-particle reference values through the same smoothing operator.

    Comparing a density estimate against a candidate law only makes sense
    after both pass through one kernel; this exposes the operator that
    ``density_profile`` applies to the spacing data.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape != state.s.shape:
        raise ValueError("need one sample per particle")
    s = state.s
    h = (s[-1] - s[0]) / math.sqrt(state.n)
    grid = np.linspace(s[0], s[-1], grid_points)
    return _nw_smooth(s, samples, grid, h)


# ----------------------------------------------------------------------
# conformal-map cross-check
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ExteriorMapReport:
    alpha: float
    beta: float
    raw_lo: float
    raw_hi: float
    r: float
    a: float
    sample_points: tuple[complex, ...]
    identity_error: float
    identity_ok: bool
    moments: tuple[float, float, float]
    reference_moments: tuple[float, float, float]
    moment_errors: tuple[float, float, float]
    moments_ok: bool

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "raw_lo": self.raw_lo,
            "raw_hi": self.raw_hi,
            "r": self.r,
            "a": self.a,
            "identity_error": self.identity_error,
            "identity_ok": self.identity_ok,
            "moments": list(self.moments),
            "reference_moments": list(self.reference_moments),
            "moment_errors": list(self.moment_errors),
            "moments_ok": self.moments_ok,
        }


def _inverse_joukowski(zeta: np.ndarray) -> np.ndarray:
    root = np.sqrt(zeta * zeta - 1.0)
    p = zeta + root
    flip = np.abs(p) < 1.0
    p[flip] = (zeta - root)[flip]
    return p


def exterior_map_check(
    state: GasState,
    samples: Sequence[complex] | None = None,
    edge_correct: bool = True,
    identity_tol: float = 1e-12,
    moment_tol: float = 0.05,
) -> ExteriorMapReport:
    """Cross-check a real-segment gas against its exterior uniformization.

    For a single segment [alpha, beta] the normalized exterior map is
    p(z) = zeta + sqrt(zeta^2 - 1) with zeta = (2z - alpha - beta)/(beta -
    alpha), and z is recovered as r (p + 1/p) + a with r = (beta - alpha)/4,
    a = (alpha + beta)/2.  The report records the worst identity defect at
    the sample points and the first three moments of the configuration
    against those of the semicircle on the same segment; odd/even moment
    errors are normalized by the matching power of the half-width.

    Positions are read directly from the curve parameters, so the check
    applies to gases on the real line.  Edge estimates extrapolate past the
    outermost charges by the Airy-zero ratio unless ``edge_correct`` is off.
    """
    info = support(state)
    if info.gapped:
        raise SupportError("support splits into several arcs; single-segment check only")
    alpha, beta = _edge_estimates(state, edge_correct)
    if not beta > alpha:
        raise SupportError("degenerate support segment")
    r = (beta - alpha) / 4.0
    a = (alpha + beta) / 2.0
    half = (beta - alpha) / 2.0
    if samples is None:
        rel = np.array([1.5 + 0.5j, -1.8 + 0.3j, 2.2j, 1.1 - 1.3j, -0.7 - 2.1j])
        pts = a + half * rel
    else:
        pts = np.asarray(list(samples), dtype=complex)
    zeta = (2.0 * pts - alpha - beta) / (beta - alpha)
    p = _inverse_joukowski(zeta)
    k = r * (p + 1.0 / p) + a
    identity_error = float(np.max(np.abs(k - pts)))
    z = state.s.astype(float)
    m = tuple(float(np.mean(z**j)) for j in (1, 2, 3))
    ref = (a, a * a + half * half / 4.0, a**3 + 3.0 * a * half * half / 4.0)
    errs = tuple(abs(m[j] - ref[j]) / half ** (j + 1) for j in range(3))
    return ExteriorMapReport(
        alpha=alpha,
        beta=beta,
        raw_lo=info.lo,
        raw_hi=info.hi,
        r=r,
        a=a,
        sample_points=tuple(complex(p) for p in pts),
        identity_error=identity_error,
        identity_ok=identity_error < identity_tol,
        moments=m,
        reference_moments=ref,
        moment_errors=errs,
        moments_ok=max(errs) < moment_tol,
    )
