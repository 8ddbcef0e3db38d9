"""Faber polynomials and Grunsky coefficients of a conformal pair.

Conventions.  The exterior object is a series L = r*w + u1 + u2/w + ...
("inf" tag, leading exponent 1); its functional inverse g = revert(L) has
the shape g(z) = z/r + b0 + b1/z + ....  The interior object is a series
Ltilde with leading exponent 1 at the origin whose reciprocal
Ltilde^{-1} = r/w + ... appears in all negative-index formulas; the inverse
f = revert(Ltilde) has the shape f(z) = r*z + a2 z^2 + ....

Faber polynomials are coefficient projections of powers:

    Phi_n(w) = (L(w)^n)_{>=0}         (polynomial in w)
    Psi_n(w) = ((Ltilde^{-1})(w)^n)_{<=0}   (polynomial in 1/w)

Grunsky coefficients b_{m,n}, m, n in [-M, M], are read off the bilinear
log expansions of the pair (f, g); the table is symmetric and its corner
blocks come from independent expansions, which this module cross-checks
numerically instead of trusting any single one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .series import INF, ORIG, Region, Series, WindowError


class GrunskyConsistencyError(ArithmeticError):
    """Two independent expansions of the same block disagreed."""


class ConvergenceError(ArithmeticError):
    """A sampled generating-function sum shows term growth."""


# ----------------------------------------------------------------------
# Faber polynomials
# ----------------------------------------------------------------------


def faber_phi(L: Series, n: int) -> Series:
    """Polynomial part of L^n; L must look like r*w + ... at infinity."""
    if n < 1:
        raise ValueError("need n >= 1")
    if L.tag != INF or L.edge_exponent() != 1:
        raise WindowError("faber_phi expects an exterior series with leading exponent 1")
    p = L**n
    if p.lo > 0:
        raise WindowError(f"window too shallow to certify the polynomial part of L^{n}")
    return p.project(Region.GE0)


def faber_psi(Ltilde: Series, n: int) -> Series:
    """Non-positive part of Ltilde^{-n}.

    Accepts the interior map itself (leading exponent 1 at the origin, in
    which case its reciprocal is formed here) or the already-inverted
    r/w + ... series (leading exponent -1)."""
    if n < 1:
        raise ValueError("need n >= 1")
    if Ltilde.tag != ORIG:
        raise WindowError("faber_psi expects an origin series")
    edge = Ltilde.edge_exponent()
    if edge == 1:
        inv = Ltilde.reciprocal()
    elif edge == -1:
        inv = Ltilde
    else:
        raise WindowError("faber_psi expects leading exponent 1 or -1 at the origin")
    p = inv**n
    if p.hi < 0:
        raise WindowError(f"window too shallow to certify the constant part of Ltilde^-{n}")
    return p.project(Region.LE0)


@dataclass(frozen=True)
class FaberSet:
    """Phi_1..Phi_n_max and, when an interior map is supplied, Psi_1..Psi_n_max."""

    n_max: int
    phi: tuple[Series, ...]
    psi: tuple[Series, ...] | None = None

    @classmethod
    def build(cls, L: Series, n_max: int, Ltilde: Series | None = None) -> "FaberSet":
        phi = tuple(faber_phi(L, n) for n in range(1, n_max + 1))
        psi = None
        if Ltilde is not None:
            psi = tuple(faber_psi(Ltilde, n) for n in range(1, n_max + 1))
        return cls(n_max=n_max, phi=phi, psi=psi)


# ----------------------------------------------------------------------
# bivariate helpers (coefficient arrays on [0..K] x [0..K]; the index is
# the distance from the expansion edge in each variable)
# ----------------------------------------------------------------------


def _bi_log1p(U: np.ndarray) -> np.ndarray:
    """log(1 + U) for a bivariate array with U[0, 0] = 0 and no entries on
    the zero diagonal edge below total index 1."""
    K = U.shape[0] - 1
    acc = np.zeros_like(U)
    term = None
    for j in range(1, 2 * K + 2):
        term = U if term is None else convolve2d(term, U)[: K + 1, : K + 1]
        if not np.any(term):
            break
        acc += ((-1.0) ** (j + 1) / j) * term
    return acc


def _pair_r(f: Series | None, g: Series) -> complex:
    rg = g.coeff(1)
    if rg == 0:
        raise WindowError("g must have a nonzero linear coefficient")
    if f is None:
        return 1.0 / rg
    rf = f.coeff(1)
    if abs(rf * rg - 1.0) > 1e-8 * max(1.0, abs(rf * rg)):
        raise ValueError("pair mismatch: f'(0) and the linear coefficient of g are not reciprocal")
    return rf


def _quadrant_gg(g: Series, r: complex, M: int) -> np.ndarray:
    """b_{m,n}, m, n >= 1 from the g-g expansion."""
    K = M
    U = np.zeros((K + 1, K + 1), dtype=np.complex128)
    for k in range(1, 2 * M):
        beta = g.coeff(-k)
        if beta == 0:
            continue
        for i in range(k):
            a, b = k - i, 1 + i
            if a <= K and b <= K:
                U[a, b] -= r * beta
    return -_bi_log1p(U)


def _quadrant_ff(f: Series, r: complex, M: int) -> np.ndarray:
    """b_{-m,-n}, m, n >= 0 from the f-f expansion; entry [0,0] is -log r."""
    K = M
    U = np.zeros((K + 1, K + 1), dtype=np.complex128)
    for k in range(2, 2 * M + 2):
        alpha = f.coeff(k)
        if alpha == 0:
            continue
        for i in range(k):
            a, b = i, k - 1 - i
            if a <= K and b <= K:
                U[a, b] += alpha / r
    out = -_bi_log1p(U)
    out[0, 0] = -np.log(complex(r))
    return out


def _quadrant_mixed_ratio(f: Series, g: Series, M: int) -> np.ndarray:
    """b_{m,-n}, m, n >= 1 from log(1 - f(z2)/g(z1))."""
    K = M
    recg = g.reciprocal()  # exponents <= -1
    gvec = np.array([recg.coeff(-i) if recg.lo <= -i <= recg.hi else 0.0 for i in range(K + 1)])
    fvec = np.array([f.coeff(j) if j <= f.hi else 0.0 for j in range(K + 1)])
    gvec[0] = 0.0
    fvec[0] = 0.0
    U = -np.outer(gvec, fvec)
    return -_bi_log1p(U)


def _quadrant_mixed_direct(f: Series, g: Series, r: complex, M: int) -> np.ndarray:
    """b_{m,-n}, m >= 1, n >= 0 from log(r*(g(z1) - f(z2))/z1)."""
    K = M
    U = np.zeros((K + 1, K + 1), dtype=np.complex128)
    for a in range(1, K + 1):
        # coefficient of z1^{-a} in g(z1)/z1 is the g coefficient at 1 - a
        c = g.coeff(1 - a)
        if c != 0:
            U[a, 0] += r * c
    for j in range(1, K + 1):
        if j <= f.hi:
            c = f.coeff(j)
            if c != 0:
                U[1, j] -= r * c
    return -_bi_log1p(U)


def _edge_from_log(s: Series, which: str, M: int) -> tuple[np.ndarray, complex]:
    """Edge rows b_{n,0} (from g) or b_{-n,0} (from f) via univariate logs."""
    over_z = s * Series.monomial(-1, s.tag, depth=max(2 * M + 2, 16))
    l = over_z.log()
    out = np.zeros(M + 1, dtype=np.complex128)
    if which == "g":
        for n in range(1, M + 1):
            out[n] = -l.coeff(-n)
        const = l.coeff(0)  # equals -log r
    else:
        for n in range(1, M + 1):
            out[n] = -l.coeff(n)
        const = l.coeff(0)  # equals +log r
    return out, complex(const)


@dataclass(frozen=True)
class GrunskyTable:
    """Symmetric table b_{m,n}, indices in [-M, M].

    ``half`` marks tables built from g alone, where only m, n >= 0 is
    meaningful (the rest is zero-filled).
    """

    M: int
    r: complex
    data: np.ndarray
    half: bool = False

    def b(self, m: int, n: int) -> complex:
        if abs(m) > self.M or abs(n) > self.M:
            raise IndexError(f"index out of range [-{self.M}, {self.M}]")
        if self.half and (m < 0 or n < 0):
            raise IndexError("table was built from g alone; negative indices unavailable")
        return complex(self.data[m + self.M, n + self.M])

    def symmetry_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.T)))

    def scale(self) -> float:
        return float(max(1.0, np.max(np.abs(self.data))))

    def rows(self):
        for m in range(-self.M, self.M + 1):
            for n in range(-self.M, self.M + 1):
                if self.half and (m < 0 or n < 0):
                    continue
                yield m, n, self.b(m, n)


def _require_depth(cond: bool, msg: str) -> None:
    if not cond:
        raise WindowError(msg)


def grunsky(f: Series | None, g: Series, M: int = 8) -> GrunskyTable:
    """Grunsky table of the pair (f, g); pass f=None for the g-only block.

    The three corner blocks come from three different log expansions, and
    the mixed block is computed twice (ratio form and direct form) and
    cross-checked; disagreement raises GrunskyConsistencyError.
    """
    if g.tag != INF or g.edge_exponent() != 1:
        raise WindowError("g must be an exterior series with leading exponent 1")
    _require_depth(g.lo <= -(2 * M - 1), f"g must be trusted down to exponent -{2 * M - 1} for M={M}")
    if f is not None:
        if f.tag != ORIG or f.edge_exponent() != 1:
            raise WindowError("f must be an origin series with leading exponent 1")
        _require_depth(f.hi >= 2 * M + 1, f"f must be trusted up to exponent {2 * M + 1} for M={M}")
    r = _pair_r(f, g)

    size = 2 * M + 1
    data = np.zeros((size, size), dtype=np.complex128)

    gg = _quadrant_gg(g, r, M)
    edge_g, neg_log_r = _edge_from_log(g, "g", M)
    tol = 1e-10 * max(1.0, float(np.max(np.abs(gg))), float(np.max(np.abs(edge_g))))
    if abs(neg_log_r + np.log(complex(r))) > tol:
        raise GrunskyConsistencyError("constant term of log(g/z) does not match -log r")

    for m in range(1, M + 1):
        for n in range(1, M + 1):
            data[m + M, n + M] = gg[m, n]
        data[m + M, 0 + M] = edge_g[m]
        data[0 + M, m + M] = edge_g[m]
    data[0 + M, 0 + M] = -np.log(complex(r))

    if f is None:
        return GrunskyTable(M=M, r=complex(r), data=data, half=True)

    ff = _quadrant_ff(f, r, M)
    edge_f, log_r = _edge_from_log(f, "f", M)
    mixed_ratio = _quadrant_mixed_ratio(f, g, M)
    mixed_direct = _quadrant_mixed_direct(f, g, r, M)

    scale = max(
        1.0,
        float(np.max(np.abs(ff))),
        float(np.max(np.abs(mixed_ratio))),
        float(np.max(np.abs(edge_f))),
    )
    tol = 1e-10 * scale
    if abs(log_r - np.log(complex(r))) > tol:
        raise GrunskyConsistencyError("constant term of log(f/z) does not match log r")
    # mixed block, two derivations
    err = float(np.max(np.abs(mixed_ratio[1:, 1:] - mixed_direct[1:, 1:])))
    if err > tol:
        raise GrunskyConsistencyError(f"mixed Grunsky block disagrees between expansions: {err:g}")
    # f-edge appears in both the f-f block and log(f/z)
    err = float(np.max(np.abs(ff[0, 1:] - edge_f[1:])))
    if err > tol:
        raise GrunskyConsistencyError(f"f edge disagrees between expansions: {err:g}")
    # g-edge appears in both the direct mixed block and log(g/z)
    err = float(np.max(np.abs(mixed_direct[1:, 0] - edge_g[1:])))
    if err > tol:
        raise GrunskyConsistencyError(f"g edge disagrees between expansions: {err:g}")

    for m in range(1, M + 1):
        for n in range(1, M + 1):
            data[m + M, -n + M] = mixed_ratio[m, n]
            data[-n + M, m + M] = mixed_ratio[m, n]
            data[-m + M, -n + M] = ff[m, n]
    for m in range(1, M + 1):
        data[-m + M, 0 + M] = edge_f[m]
        data[0 + M, -m + M] = edge_f[m]
    data[0 + M, 0 + M] = -np.log(complex(r))

    return GrunskyTable(M=M, r=complex(r), data=data, half=False)


# ----------------------------------------------------------------------
# sampled generating-function check
# ----------------------------------------------------------------------


def faber_generating_check(
    L: Series,
    n_max: int,
    z_points=(5.0 + 0.0j,),
    w_points=(2.0 + 0.0j,),
    Ltilde: Series | None = None,
    interior_z_points=(0.05 + 0.0j,),
    interior_w_points=(0.5 + 0.0j,),
) -> float:
    """Evaluate the Faber generating identities at sample points.

    Exterior: w/(w - g(z)) + sum_n w Phi_n'(w) z^{-n} / n -> 0, g = revert(L).
    Interior (when Ltilde given, f = revert(Ltilde)):
    f(z)/(w - f(z)) + sum_n w Psi_n'(w) z^n / n -> 0, sampled at the
    interior points (|z| small there).

    Returns the max residual; raises ConvergenceError when the sampled
    terms grow instead of decaying.
    """
    worst = 0.0
    g = L.revert()
    phis = [faber_phi(L, n) for n in range(1, n_max + 1)]
    for z in z_points:
        gz = g.evaluate(z)
        for w in w_points:
            terms = [w * phis[n - 1].derivative().evaluate(w) * z ** (-n) / n for n in range(1, n_max + 1)]
            _guard_growth(terms)
            resid = abs(w / (w - gz) + sum(terms))
            worst = max(worst, resid)
    if Ltilde is not None:
        if Ltilde.edge_exponent() == -1:
            Ltilde = Ltilde.reciprocal()
        fmap = Ltilde.revert()
        psis = [faber_psi(Ltilde, n) for n in range(1, n_max + 1)]
        for z in interior_z_points:
            fz = fmap.evaluate(z)
            for w in interior_w_points:
                terms = [w * psis[n - 1].derivative().evaluate(w) * z**n / n for n in range(1, n_max + 1)]
                _guard_growth(terms)
                resid = abs(fz / (w - fz) + sum(terms))
                worst = max(worst, resid)
    return worst


def _guard_growth(terms) -> None:
    if len(terms) >= 6:
        head = max(abs(t) for t in terms[-6:-3])
        tail = max(abs(t) for t in terms[-3:])
        if tail > head and tail > 1e-14:
            raise ConvergenceError("sampled generating series is growing; point outside convergence region")
