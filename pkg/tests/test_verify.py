"""Residual checks: Poisson brackets, Lax flows, transport equations, flow symmetry."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import binom

from slitlax.loewner import Orientation, closed_form_family
from slitlax.reduction import ReducedSolution, TimeVector
from slitlax.series import INF, Series
from slitlax.verify import (
    ResidualReport,
    grunsky_flow_symmetry,
    hydro_residual,
    lax_residual_dkp,
    lax_residual_dtoda,
    poisson_dkp,
    poisson_dtoda,
)

SIGMA = np.exp(0.4j * np.pi)


def slit_reduction(u=0.3):
    return ReducedSolution.from_closed_form("chordal_slit", {"u": u})


def rays_reduction():
    return ReducedSolution.from_closed_form("chordal_two_rays")


def radial_slit_reduction(lam_range=(0.0, 1.5)):
    return ReducedSolution.from_closed_form("radial_slit", {"sigma": SIGMA}, lam_range=lam_range)


def cardioid_reduction():
    return ReducedSolution.from_closed_form("radial_cardioid", {"sigma": SIGMA})


def lax_series_of(sol):
    """Time vector -> exterior Lax series, re-solving the hodograph each call."""

    def L_of(tv):
        return sol.map_at(sol.solve(tv))

    return L_of


def frozen_family(example_id, params, orientation=None):
    """Two-node family holding one fixed map, so the interpolant is constant."""
    fam = closed_form_family(example_id, (0.2, 0.8), params, orientation=orientation)
    return dataclasses.replace(fam, maps=(fam.maps[0], fam.maps[0]))


class TestResidualReport:
    def test_labels_follow_windows(self):
        s = Series.from_terms({-1: 3e-5, 0: 1e-6}, INF, window=(-1, 0))
        rep = ResidualReport.from_pieces("demo", [("", s)], 1e-5, 1e-4)
        assert rep.labels == ("w^-1", "w^0")
        assert rep.max_residual == pytest.approx(3e-5)
        assert rep.passed

    def test_summary_is_plain_data(self):
        s = Series.from_terms({0: 1.0}, INF, window=(0, 0))
        rep = ResidualReport.from_pieces("demo", [("", s)], 1e-5, 1e-4)
        assert not rep.passed
        assert rep.summary() == {
            "equation": "demo",
            "max_residual": 1.0,
            "tolerance": 1e-4,
            "pass": False,
        }

    def test_pieces_concatenate_with_prefix(self):
        a = Series.from_terms({1: 2.0}, INF, window=(1, 1))
        b = Series.from_terms({0: 1.0}, INF, window=(0, 0))
        rep = ResidualReport.from_pieces("demo", [("", a), ("interior ", b)], 1e-5, 1e-4)
        assert rep.labels == ("w^1", "interior w^0")
        assert rep.residuals == (2.0, 1.0)


class TestPoissonDKP:
    def test_bracket_with_w_is_x_transport(self):
        # straight slit with U = 0: the Lax series is w (1 - 2 lambda/w^2)^{1/2}
        # and lambda = (x + t1)/(3 t3), so d L/dx is known in closed form.
        sol = slit_reduction(u=0.0)
        t = TimeVector.dkp(-0.5, {1: 0.1, 3: -0.4})
        lam = sol.solve(t)
        assert lam == pytest.approx(1.0 / 3.0, abs=1e-12)
        w_of = lambda tv: Series.w()
        got = poisson_dkp(w_of, lax_series_of(sol), t)
        dlam_dx = 1.0 / (3.0 * -0.4)
        for k in range(got.lo, got.hi + 1):
            power = (1 - k) // 2
            if k > 1 or (1 - k) % 2:
                expect = 0.0
            else:
                expect = binom(0.5, power) * power * (-2.0 * lam) ** (power - 1) * -2.0 * dlam_dx
            assert abs(got.coeff(k) - expect) < 1e-9

    def test_self_bracket_vanishes(self):
        sol = slit_reduction()
        t = TimeVector.dkp(-0.5, {1: 0.1, 3: -0.4})
        L_of = lax_series_of(sol)
        z = poisson_dkp(L_of, L_of, t)
        assert max(abs(z.coeff(k)) for k in range(z.lo, z.hi + 1)) < 1e-9

    @settings(max_examples=15, deadline=None)
    @given(x=st.floats(-0.44, -0.12), t3=st.floats(-0.6, -0.25))
    def test_antisymmetry(self, x, t3):
        # the domain keeps the root's lambda moderate; at large lambda the
        # truncated sqrt coefficients grow geometrically and rounding noise in
        # the bracket products would swamp an absolute bound
        sol = slit_reduction()
        t = TimeVector.dkp(x, {1: 0.1, 3: t3})
        h1 = lax_series_of(sol)
        h2 = lambda tv: h1(tv) * h1(tv)
        r = poisson_dkp(h1, h2, t) + poisson_dkp(h2, h1, t)
        assert max(abs(r.coeff(k)) for k in range(r.lo, r.hi + 1)) < 1e-8

    def test_leibniz(self):
        sol = slit_reduction()
        t = TimeVector.dkp(-0.5, {1: 0.1, 3: -0.4})
        a = lax_series_of(sol)
        b = lambda tv: a(tv) * a(tv)
        c = lambda tv: a(tv) + 2.0
        bc = lambda tv: b(tv) * c(tv)
        lhs = poisson_dkp(a, bc, t)
        rhs = poisson_dkp(a, b, t) * c(t) + b(t) * poisson_dkp(a, c, t)
        d = lhs - rhs
        assert max(abs(d.coeff(k)) for k in range(d.lo, d.hi + 1)) < 1e-8

    def test_kind_guard(self):
        t = TimeVector.dtoda(1.0, {1: 1j})
        with pytest.raises(ValueError, match="dKP"):
            poisson_dkp(lambda tv: Series.w(), lambda tv: Series.w(), t)


class TestPoissonDToda:
    def test_self_bracket_vanishes(self):
        sol = radial_slit_reduction()
        t = TimeVector.dtoda(2.0, {1: -0.55 / SIGMA})
        G_of = lax_series_of(sol)
        z = poisson_dtoda(G_of, G_of, t)
        assert max(abs(z.coeff(k)) for k in range(z.lo, z.hi + 1)) < 1e-9

    @settings(max_examples=15, deadline=None)
    @given(t0=st.floats(1.6, 2.6), c=st.floats(-0.55, -0.45))
    def test_antisymmetry(self, t0, c):
        sol = radial_slit_reduction()
        t = TimeVector.dtoda(t0, {1: c / SIGMA})
        h1 = lax_series_of(sol)
        h2 = lambda tv: h1(tv) * h1(tv)
        r = poisson_dtoda(h1, h2, t) + poisson_dtoda(h2, h1, t)
        assert max(abs(r.coeff(k)) for k in range(r.lo, r.hi + 1)) < 1e-8

    def test_leibniz(self):
        sol = cardioid_reduction()
        t = TimeVector.dtoda(1.2, {1: (-0.4 + 0.3j) / SIGMA})
        a = lax_series_of(sol)
        b = lambda tv: a(tv) * a(tv)
        c = lambda tv: a(tv) + 1.0
        bc = lambda tv: b(tv) * c(tv)
        lhs = poisson_dtoda(a, bc, t)
        rhs = poisson_dtoda(a, b, t) * c(t) + b(t) * poisson_dtoda(a, c, t)
        d = lhs - rhs
        assert max(abs(d.coeff(k)) for k in range(d.lo, d.hi + 1)) < 1e-8

    def test_kind_guard(self):
        t = TimeVector.dkp(0.0, {1: 1.0})
        with pytest.raises(ValueError, match="dToda"):
            poisson_dtoda(lambda tv: Series.w(), lambda tv: Series.w(), t)


class TestLaxDKP:
    def test_slit_flows(self):
        sol = slit_reduction()
        t = TimeVector.dkp(0.4, {1: 0.05, 2: 0.1, 3: 0.25})
        for n in (2, 3):
            rep = lax_residual_dkp(sol, t, n)
            assert rep.equation == f"dKP Lax n={n}"
            assert rep.passed
            assert rep.max_residual < 1e-4

    def test_first_flow_is_exact_transport(self):
        # B_1 = w, so both sides of the n = 1 equation are the same
        # x-derivative and only solver noise remains.
        sol = slit_reduction()
        t = TimeVector.dkp(0.4, {1: 0.05, 2: 0.1, 3: 0.25})
        rep = lax_residual_dkp(sol, t, 1, tolerance=1e-9)
        assert rep.passed
        assert rep.max_residual < 1e-9

    def test_rays_second_flow(self):
        rep = lax_residual_dkp(rays_reduction(), TimeVector.dkp(-1.0, {2: 0.5}), 2)
        assert rep.max_residual < 1e-4

    def test_off_root_control_fires(self):
        sol = slit_reduction()
        t = TimeVector.dkp(0.4, {1: 0.05, 2: 0.1, 3: 0.25})
        broken = lax_residual_dkp(sol, t, 3, off_root_shift=0.01)
        assert broken.max_residual > 1e-2
        assert not broken.passed
        rep = lax_residual_dkp(rays_reduction(), TimeVector.dkp(-1.0, {2: 0.5}), 2,
                               off_root_shift=0.01)
        assert rep.max_residual > 1e-2

    def test_off_root_control_needs_lambda_sensitivity(self):
        # A rigid shift of the root changes the residual by roughly
        # chi_n(lam) - chi_n(lam + c).  For the straight slit chi_2 = 2U is
        # independent of lambda, so the n = 2 equation survives the shift;
        # any control must ride a flow whose coefficient actually moves.
        sol = slit_reduction()
        t = TimeVector.dkp(0.4, {1: 0.05, 2: 0.1, 3: 0.25})
        blind = lax_residual_dkp(sol, t, 2, off_root_shift=0.01)
        assert blind.max_residual < 1e-4

    def test_flow_and_kind_validation(self):
        sol = slit_reduction()
        t = TimeVector.dkp(0.4, {1: 0.05})
        with pytest.raises(ValueError, match="n >= 1"):
            lax_residual_dkp(sol, t, 0)
        with pytest.raises(ValueError, match="dKP"):
            lax_residual_dkp(sol, TimeVector.dtoda(1.0, {1: 1j}), 2)
        with pytest.raises(ValueError, match="dKP"):
            lax_residual_dkp(radial_slit_reduction(), t, 2)


class TestLaxDToda:
    def test_radial_slit_flows(self):
        sol = radial_slit_reduction()
        t = TimeVector.dtoda(2.0, {1: -0.55 / SIGMA, 2: -0.04 / SIGMA**2})
        for n in (1, 2, -1, -2):
            rep = lax_residual_dtoda(sol, t, n)
            assert rep.equation == f"dToda Lax n={n}"
            assert rep.max_residual < 1e-4

    def test_reports_cover_both_series(self):
        sol = radial_slit_reduction()
        t = TimeVector.dtoda(2.0, {1: -0.55 / SIGMA})
        rep = lax_residual_dtoda(sol, t, 1)
        assert any(lbl.startswith("interior ") for lbl in rep.labels)
        assert any(not lbl.startswith("interior ") for lbl in rep.labels)

    def test_cardioid_flows(self):
        sol = cardioid_reduction()
        t = TimeVector.dtoda(1.2, {1: (-0.4 + 0.3j) / SIGMA})
        for n in (1, -1):
            rep = lax_residual_dtoda(sol, t, n)
            assert rep.max_residual < 1e-4

    def test_off_support_flow_still_holds(self):
        # t_3 = 0, but xi_3 is finite and the flow equation applies unchanged
        sol = radial_slit_reduction()
        t = TimeVector.dtoda(2.0, {1: -0.55 / SIGMA, 2: -0.04 / SIGMA**2})
        rep = lax_residual_dtoda(sol, t, 3)
        assert rep.max_residual < 1e-4

    def test_off_root_control_fires(self):
        sol = radial_slit_reduction()
        t = TimeVector.dtoda(2.0, {1: -0.55 / SIGMA, 2: -0.04 / SIGMA**2})
        rep = lax_residual_dtoda(sol, t, 1, off_root_shift=0.01)
        assert rep.max_residual > 1e-2
        card = cardioid_reduction()
        tc = TimeVector.dtoda(1.2, {1: (-0.4 + 0.3j) / SIGMA})
        assert lax_residual_dtoda(card, tc, -1, off_root_shift=0.01).max_residual > 1e-2

    def test_zero_flow_rejected(self):
        sol = radial_slit_reduction()
        t = TimeVector.dtoda(2.0, {1: -0.55 / SIGMA})
        with pytest.raises(ValueError, match="base variable"):
            lax_residual_dtoda(sol, t, 0)

    def test_kind_validation(self):
        with pytest.raises(ValueError, match="dToda"):
            lax_residual_dtoda(slit_reduction(), TimeVector.dtoda(1.0, {1: 1j}), 1)


class TestHydro:
    def test_rays_second_flow(self):
        r = rays_reduction()
        t = TimeVector.dkp(-1.0, {2: 0.5})
        assert hydro_residual(r, t, 2) < 1e-6

    def test_off_support_flow(self):
        r = rays_reduction()
        t = TimeVector.dkp(-1.0, {2: 0.5})
        assert hydro_residual(r, t, 3) < 1e-6

    def test_reference_flow_is_exact(self):
        r = rays_reduction()
        t = TimeVector.dkp(-1.0, {2: 0.5})
        assert hydro_residual(r, t, 1) == 0.0

    def test_radial_slit_with_negative_root(self):
        # log(-t0 / (t1 sigma + conj(t1 sigma))) = log(1/2) < 0 here: the
        # transport equations hold on the analytic continuation of the family.
        sol = radial_slit_reduction(lam_range=(-1.0, 1.0))
        t = TimeVector.dtoda(1.0, {1: -1.0 / SIGMA})
        assert abs(sol.solve(t) - np.log(0.5)) < 1e-12
        assert hydro_residual(sol, t, 1) < 1e-6
        assert hydro_residual(sol, t, -1) < 1e-6
        assert hydro_residual(sol, t, 0) == 0.0

    def test_slit_flows(self):
        sol = slit_reduction()
        t = TimeVector.dkp(0.4, {1: 0.05, 2: 0.1, 3: 0.25})
        for n in (2, 3):
            assert hydro_residual(sol, t, n) < 1e-6

    def test_wrong_sign_is_loud(self):
        # flipping the transport coefficient's sign leaves a relative residual
        # of order one, far beyond any passing tolerance
        r = rays_reduction()
        t = TimeVector.dkp(-1.0, {2: 0.5})
        d = 1e-5
        dl2 = (r.solve(t.perturbed(2, d)) - r.solve(t.perturbed(2, -d))) / (2 * d)
        dl1 = (r.solve(t.perturbed(1, d)) - r.solve(t.perturbed(1, -d))) / (2 * d)
        chi2 = r.coefficient(2, r.solve(t))
        wrong = abs(dl2 - (-chi2) * dl1) / (abs(dl2) + abs(chi2 * dl1))
        assert wrong > 1e-2

    def test_dkp_flow_validation(self):
        with pytest.raises(ValueError, match="n >= 1"):
            hydro_residual(rays_reduction(), TimeVector.dkp(-1.0, {2: 0.5}), 0)


class TestFiniteDifferenceOrder:
    def test_dkp_root_derivative_is_second_order(self):
        # lambda = -(x + t1)/(6 t2) so d lambda/d t2 = (x + t1)/(6 t2^2);
        # central differences must gain a factor of four per halving
        r = rays_reduction()
        t = TimeVector.dkp(-1.0, {2: 0.5})
        exact = -2.0 / 3.0
        errs = []
        for d in (1e-3, 5e-4, 2.5e-4):
            fd = (r.solve(t.perturbed(2, d)) - r.solve(t.perturbed(2, -d))) / (2 * d)
            errs.append(abs(fd - exact))
        assert 3.5 < errs[0] / errs[1] < 4.5
        assert 3.5 < errs[1] / errs[2] < 4.5

    def test_dtoda_root_derivative_is_second_order(self):
        # lambda = log(-t0 / 2 Re(t1 sigma)) has d lambda/d t0 = 1/t0
        sol = radial_slit_reduction()
        t = TimeVector.dtoda(2.0, {1: -0.55 / SIGMA})
        errs = []
        for d in (1e-3, 5e-4, 2.5e-4):
            fd = (sol.solve(t.with_t0(2.0 + d)) - sol.solve(t.with_t0(2.0 - d))) / (2 * d)
            errs.append(abs(fd - 0.5))
        assert 3.5 < errs[0] / errs[1] < 4.5
        assert 3.5 < errs[1] / errs[2] < 4.5


class TestFlowSymmetry:
    def test_slit_triple(self):
        sol = slit_reduction()
        t = TimeVector.dkp(0.4, {1: 0.05, 2: 0.1, 3: 0.25})
        assert grunsky_flow_symmetry(sol, t, (1, 2, 3)) < 1e-6

    def test_radial_slit_triples(self):
        sol = radial_slit_reduction()
        t = TimeVector.dtoda(2.0, {1: -0.55 / SIGMA, 2: -0.04 / SIGMA**2})
        cache = {}
        for triple in ((1, 1, 2), (0, 1, 2), (0, 0, 1), (-2, 1, 2)):
            assert grunsky_flow_symmetry(sol, t, triple, cache=cache) < 1e-6
        assert cache  # tables were shared across the triples

    def test_cardioid_triple(self):
        # the cardioid's entries grow like e^{k lambda}, so the third
        # derivatives driving the O(step^2) truncation are much larger than
        # for the slit geometries; a finer step keeps truncation below the
        # target while staying far above the rounding floor
        sol = cardioid_reduction()
        t = TimeVector.dtoda(1.2, {1: (-0.4 + 0.3j) / SIGMA})
        assert grunsky_flow_symmetry(sol, t, (1, 1, 2), fd_step=1e-6) < 1e-6

    def test_dkp_rejects_nonpositive_indices(self):
        sol = slit_reduction()
        t = TimeVector.dkp(0.4, {1: 0.05})
        with pytest.raises(ValueError, match="n >= 1"):
            grunsky_flow_symmetry(sol, t, (0, 1, 2))

    def test_frozen_family_moves_nothing(self):
        # lambda-independent maps: every Grunsky entry is constant along every
        # flow, so all three permutation values are exactly zero
        fam = frozen_family("chordal_slit", {"u": 0.3})
        sol = ReducedSolution.from_family(fam, r_func=lambda lam: lam)
        t = TimeVector.dkp(0.3, {1: 0.1, 2: 0.05, 3: 0.02})
        assert grunsky_flow_symmetry(sol, t, (1, 2, 3)) == 0.0

    def test_frozen_dtoda_family_moves_nothing(self):
        ext = frozen_family("radial_cardioid", {"sigma": SIGMA})
        itr = frozen_family("radial_cardioid", {"sigma": SIGMA},
                            orientation=Orientation.INTERIOR_F)
        sol = ReducedSolution.from_family(ext, interior=itr, r_func=lambda lam: lam)
        t = TimeVector.dtoda(0.5, {1: -0.05 / SIGMA})
        assert grunsky_flow_symmetry(sol, t, (0, 1, 2)) == 0.0
        assert grunsky_flow_symmetry(sol, t, (0, 0, 1)) == 0.0
