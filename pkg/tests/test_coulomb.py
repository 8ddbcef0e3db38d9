"""Log-gas equilibria: energy goldens, descent oracles, density and map checks.

The quadratic-well gas on the real line has an exact finite-N equilibrium,
the scaled Hermite zeros (Stieltjes), so most derived assertions here run
against `numpy.polynomial.hermite.hermgauss` rather than against the module's
own output.  The two-charge well is additionally cross-checked with a direct
two-variable minimizer from scipy.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from slitlax.coulomb import (
    ConfinementError,
    CurveSpec,
    GasState,
    SupportError,
    density_profile,
    energy,
    energy_gradient,
    exterior_map_check,
    initial_state,
    relax,
    smooth_samples,
    support,
)
from slitlax.reduction import TimeVector

LINE = CurveSpec.real_line()


def hermite_equilibrium(n: int, hbar: float, t2: float) -> np.ndarray:
    """Exact minimizer for the quadratic well: scaled zeros of H_n."""
    u = np.polynomial.hermite.hermgauss(n)[0]
    return u * math.sqrt(hbar / (2.0 * abs(t2)))


def semicircle_density(x, n: int, radius: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (2.0 * n / (math.pi * radius**2)) * np.sqrt(np.maximum(radius**2 - x * x, 0.0))


@pytest.fixture(scope="module")
def gaussian_gas():
    """N=200 quadratic-well equilibrium, radius sqrt(hbar N / |t2|) = 20."""
    state = initial_state(LINE, 200, {2: -0.5}, hbar=1.0)
    result = relax(state, LINE, max_iters=20000, tol=1e-5)
    assert result.converged
    return result


class TestEnergyGoldens:
    def test_two_charges_at_unit_positions(self):
        state = GasState.make(2, [-1.0, 1.0], {}, hbar=1.0)
        assert energy(state, LINE) == pytest.approx(-2.0 * math.log(2.0), rel=1e-15)

    def test_single_charge_linear_potential(self):
        """With only t1 the energy is -(2/hbar) t1 x: monotone in x, so its
        minimum over any parameter window sits at the window boundary."""
        t1, hbar = 0.8, 0.5
        xs = np.linspace(-3.0, 3.0, 7)
        vals = [
            energy(GasState.make(1, [x], {1: t1}, hbar=hbar), LINE) for x in xs
        ]
        assert np.allclose(vals, -(2.0 / hbar) * t1 * xs, rtol=1e-14)
        assert np.all(np.diff(vals) < 0)

    def test_coincident_charges_have_infinite_energy(self):
        state = GasState.make(3, [0.0, 0.5, 0.5], {2: -1.0}, hbar=1.0)
        assert energy(state, LINE) == math.inf

    def test_only_positive_couplings_enter_the_potential(self):
        """The time vector always carries the mirror entry t_{-2}, but the
        potential sums over positive indices only."""
        state = GasState.make(2, [-1.0, 2.0], {2: -0.3}, hbar=1.0)
        assert any(m < 0 for m, _ in state.t.items)
        expected = -2.0 * math.log(3.0) - 2.0 * (-0.3) * ((-1.0) ** 2 + 2.0**2)
        assert energy(state, LINE) == pytest.approx(expected, rel=1e-14)

    def test_pair_term_matches_direct_double_loop(self):
        rng = np.random.default_rng(5)
        s = np.sort(rng.uniform(-2.0, 2.0, 17))
        state = GasState.make(17, s, {}, hbar=1.0)
        direct = -2.0 * math.fsum(
            math.log(abs(s[j] - s[i])) for i in range(17) for j in range(i + 1, 17)
        )
        assert energy(state, LINE) == pytest.approx(direct, rel=1e-13)

    def test_complex_coupling_enters_through_real_part(self):
        t1 = 0.4 - 0.9j
        x = 1.3
        state = GasState.make(1, [x], {1: t1}, hbar=2.0)
        assert energy(state, LINE) == pytest.approx(-(2.0 / 2.0) * (t1 * x).real)


class TestGradient:
    """The gradient is checked against central differences of the energy."""

    def fd_gradient(self, state, curve, delta=1e-6):
        g = np.zeros(state.n)
        for k in range(state.n):
            up = np.array(state.s)
            dn = np.array(state.s)
            up[k] += delta
            dn[k] -= delta
            g[k] = (
                energy(state.with_positions(np.sort(up)), curve)
                - energy(state.with_positions(np.sort(dn)), curve)
            ) / (2.0 * delta)
        return g

    def test_matches_finite_differences_on_line(self):
        s = np.array([-1.7, -0.4, 0.1, 0.9, 1.3, 2.6])
        state = GasState.make(6, s, {1: 0.3, 2: -0.5, 3: -0.02}, hbar=0.8)
        g = energy_gradient(state, LINE)
        fd = self.fd_gradient(state, LINE)
        assert np.max(np.abs(g - fd)) < 1e-6 * max(1.0, np.max(np.abs(g)))

    def test_chain_rule_through_arc_parametrization(self):
        arc = CurveSpec.unit_circle_arc(-1.2, 1.2)
        state = GasState.make(4, [-1.0, -0.3, 0.4, 1.1], {1: -0.6, 2: 0.1j}, hbar=1.0)
        g = energy_gradient(state, arc)
        fd = self.fd_gradient(state, arc)
        assert np.max(np.abs(g - fd)) < 1e-6 * max(1.0, np.max(np.abs(g)))

    @settings(max_examples=25, deadline=None)
    @given(
        shift=st.floats(-0.5, 0.5),
        spread=st.floats(0.5, 2.0),
        t2=st.floats(-1.5, -0.2),
    )
    def test_random_configurations(self, shift, spread, t2):
        s = shift + spread * np.array([-1.0, -0.55, 0.2, 0.8, 1.4])
        state = GasState.make(5, s, {2: t2}, hbar=1.0)
        g = energy_gradient(state, LINE)
        fd = self.fd_gradient(state, LINE)
        assert np.max(np.abs(g - fd)) < 1e-5 * max(1.0, np.max(np.abs(g)))


class TestTwoChargeWell:
    """N=2 in a quadratic well: closed form and an independent minimizer."""

    HBAR, T2 = 0.7, -0.6

    def equilibrium(self):
        state = initial_state(LINE, 2, {2: self.T2}, hbar=self.HBAR)
        return relax(state, LINE, tol=1e-11)

    def test_closed_form_positions(self):
        a = math.sqrt(self.HBAR / (4.0 * abs(self.T2)))
        result = self.equilibrium()
        assert result.converged
        assert np.max(np.abs(result.state.s - [-a, a])) < 1e-10

    def test_direct_two_variable_minimizer_agrees(self):
        def raw_energy(x):
            return -2.0 * math.log(abs(x[1] - x[0])) - (2.0 / self.HBAR) * self.T2 * (
                x[0] ** 2 + x[1] ** 2
            )

        oracle = minimize(
            raw_energy,
            [-1.0, 1.2],
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 10000},
        )
        assert oracle.success
        result = self.equilibrium()
        assert np.max(np.abs(result.state.s - np.sort(oracle.x))) < 1e-8


class TestRelax:
    def test_single_charge_finds_potential_minimum(self):
        # -(2/hbar)(t1 x + t2 x^2) is minimized where t1 + 2 t2 x = 0
        result = relax(initial_state(LINE, 1, {1: 0.3, 2: -0.5}, hbar=1.0), LINE, tol=1e-12)
        assert result.converged
        assert result.state.s[0] == pytest.approx(0.3, abs=1e-10)

    def test_energy_strictly_decreases(self):
        result = relax(initial_state(LINE, 50, {2: -0.5}, hbar=1.0), LINE, tol=1e-6)
        assert result.converged
        steps = np.diff(result.energies)
        assert steps.size > 0
        assert np.all(steps < 0)

    def test_jittered_start_reaches_the_same_equilibrium(self):
        reference = relax(initial_state(LINE, 12, {2: -0.4}, hbar=1.0), LINE, tol=1e-9)
        jittered = initial_state(LINE, 12, {2: -0.4}, hbar=1.0, seed=7, jitter=0.3)
        assert not np.allclose(jittered.s, reference.state.s)
        result = relax(jittered, LINE, tol=1e-9)
        assert np.all(np.diff(result.energies) < 0)
        assert np.max(np.abs(result.state.s - reference.state.s)) < 1e-5

    def test_bitwise_deterministic(self):
        runs = []
        for _ in range(2):
            state = initial_state(LINE, 60, {2: -0.5}, hbar=1.0)
            runs.append(relax(state, LINE, max_iters=40, tol=1e-14))
        assert runs[0].state.s.tobytes() == runs[1].state.s.tobytes()
        assert runs[0].energies == runs[1].energies

    def test_iteration_cap_reports_non_convergence(self):
        result = relax(initial_state(LINE, 30, {2: -0.5}, hbar=1.0), LINE, max_iters=3, tol=1e-14)
        assert not result.converged
        assert result.iterations == 3
        assert math.isfinite(result.energy)
        assert result.max_gradient > 0

    def test_rejects_coincident_start(self):
        state = GasState.make(2, [0.1, 0.1], {2: -0.5}, hbar=1.0)
        with pytest.raises(ValueError, match="infinite energy"):
            relax(state, LINE)

    def test_boundary_minimum_on_bounded_arc(self):
        """A linear coupling on the unit-circle arc drives the charge to the
        parameter boundary, the bounded analogue of escaping to infinity."""
        arc = CurveSpec.unit_circle_arc(-math.pi / 3.0, math.pi / 3.0)
        result = relax(initial_state(arc, 1, {1: -1.0}, hbar=1.0), arc, tol=1e-10)
        assert result.converged
        assert result.state.s[0] == pytest.approx(-math.pi / 3.0, abs=1e-12)

    def test_half_ray_pins_lower_endpoint(self):
        ray = CurveSpec.half_ray()
        result = relax(initial_state(ray, 12, {1: -1.0}, hbar=1.0), ray, max_iters=2000, tol=1e-5)
        assert result.converged
        assert result.state.s[0] == 0.0
        assert np.all(np.diff(result.state.s) > 0)

    def test_unconfined_potentials_are_rejected(self):
        with pytest.raises(ConfinementError):
            relax(initial_state(LINE, 5, {2: 0.5}, hbar=1.0), LINE)
        with pytest.raises(ConfinementError):
            relax(GasState.make(5, np.linspace(-1, 1, 5), {}, hbar=1.0), LINE)

    def test_growing_potential_is_fine_on_a_bounded_curve(self):
        arc = CurveSpec.unit_circle_arc(-1.0, 1.0)
        result = relax(initial_state(arc, 3, {1: 1.0}, hbar=1.0), arc, tol=1e-8)
        assert math.isfinite(result.energy)

    def test_quartic_well(self):
        result = relax(initial_state(LINE, 10, {4: -0.1}, hbar=1.0), LINE, tol=1e-5)
        assert np.all(np.diff(result.energies) < 0)
        assert np.max(np.abs(result.state.s + result.state.s[::-1])) < 1e-8

    def test_fifty_charges_converge_monotonically(self):
        state = initial_state(LINE, 50, {2: -1.0}, hbar=0.5)
        result = relax(state, LINE, tol=1e-5)
        assert result.converged
        energies = np.array(result.energies)
        assert np.all(np.diff(energies) < 0)
        assert result.energy == energies[-1]


class TestHermiteOracle:
    """The N=200 quadratic well against its exact finite-N equilibrium."""

    def test_positions_match_scaled_hermite_zeros(self, gaussian_gas):
        oracle = hermite_equilibrium(200, 1.0, -0.5)
        assert np.max(np.abs(gaussian_gas.state.s - oracle)) < 1e-5

    def test_reflection_symmetry(self, gaussian_gas):
        s = gaussian_gas.state.s
        assert np.max(np.abs(s + s[::-1])) < 1e-6

    def test_raw_endpoints_match_finite_oracle(self, gaussian_gas):
        oracle = hermite_equilibrium(200, 1.0, -0.5)
        info = support(gaussian_gas.state)
        assert abs(info.hi - oracle[-1]) < 1e-5
        assert abs(info.lo - oracle[0]) < 1e-5

    def test_outermost_charge_sits_inside_the_continuum_edge(self, gaussian_gas):
        # the finite-N cloud ends an O(N^{-2/3}) Airy width short of the
        # continuum support edge; at N=200 that inset is a bit over 3%
        info = support(gaussian_gas.state)
        inset = (20.0 - info.hi) / 20.0
        assert 0.02 < inset < 0.05

    def test_corrected_edges_within_three_percent(self, gaussian_gas):
        report = exterior_map_check(gaussian_gas.state)
        assert abs(report.beta - 20.0) / 20.0 < 0.03
        assert abs(report.alpha + 20.0) / 20.0 < 0.03

    def test_density_matches_semicircle_after_smoothing(self, gaussian_gas):
        state = gaussian_gas.state
        profile = density_profile(state)
        law = smooth_samples(state, semicircle_density(state.s, 200, 20.0))
        sup_err = np.max(np.abs(profile.values - law)) / np.max(law)
        assert sup_err < 0.05

    def test_raw_law_comparison_is_edge_biased(self, gaussian_gas):
        """Comparing the smoothed estimate against the unsmoothed law mixes
        the kernel's edge bias into the result; this pins why the smoothing
        operator is exposed for the reference side as well."""
        state = gaussian_gas.state
        profile = density_profile(state)
        law_on_grid = semicircle_density(profile.grid, 200, 20.0)
        sup_err = np.max(np.abs(profile.values - law_on_grid)) / np.max(law_on_grid)
        assert sup_err > 0.05

    def test_density_normalization(self, gaussian_gas):
        profile = density_profile(gaussian_gas.state)
        raw_mass = np.trapezoid(profile.raw, gaussian_gas.state.s)
        smooth_mass = np.trapezoid(profile.values, profile.grid)
        assert raw_mass == pytest.approx(199.0, rel=1e-12)
        assert abs(smooth_mass - 200.0) / 200.0 < 0.03

    def test_moments_match_semicircle_on_corrected_segment(self, gaussian_gas):
        report = exterior_map_check(gaussian_gas.state)
        assert report.moments_ok
        assert max(report.moment_errors) < 0.05

    def test_map_identity_on_measured_segment(self, gaussian_gas):
        report = exterior_map_check(gaussian_gas.state)
        assert report.identity_ok
        assert report.identity_error < 1e-12

    def test_support_is_a_single_arc(self, gaussian_gas):
        info = support(gaussian_gas.state)
        assert not info.gapped
        # Hermite-type edge spacing stays near 3x the median, far from the flag
        assert 2.0 < info.widest_gap / info.typical_gap < 8.0


class TestScalingCovariance:
    def test_fixed_case(self):
        c = 1.7
        base = relax(initial_state(LINE, 40, {2: -0.5}, hbar=1.0), LINE, tol=1e-9)
        scaled = relax(
            initial_state(LINE, 40, {2: -0.5 / c**2}, hbar=1.0), LINE, tol=1e-9
        )
        assert np.max(np.abs(scaled.state.s - c * base.state.s)) < 1e-6 * c

    @settings(max_examples=10, deadline=None)
    @given(c=st.floats(0.5, 2.0), n=st.integers(4, 12))
    def test_positions_rescale_with_the_couplings(self, c, n):
        base = relax(initial_state(LINE, n, {2: -0.5}, hbar=1.0), LINE, tol=1e-10)
        scaled = relax(
            initial_state(LINE, n, {2: -0.5 / c**2}, hbar=1.0), LINE, tol=1e-10
        )
        scale = max(1.0, c * np.max(np.abs(base.state.s)))
        assert np.max(np.abs(scaled.state.s - c * base.state.s)) < 1e-6 * scale


class TestReflectionSymmetry:
    @settings(max_examples=15, deadline=None)
    @given(n=st.integers(4, 20), t2=st.floats(-1.2, -0.2))
    def test_even_potentials_give_symmetric_clouds(self, n, t2):
        result = relax(initial_state(LINE, n, {2: t2}, hbar=1.0), LINE, tol=1e-9)
        s = result.state.s
        assert np.max(np.abs(s + s[::-1])) < 1e-6


class TestSupport:
    def test_two_charges(self):
        state = GasState.make(2, [-0.8, 0.8], {2: -0.5}, hbar=1.0)
        info = support(state)
        assert (info.lo, info.hi) == (-0.8, 0.8)
        assert not info.gapped

    def test_single_charge(self):
        info = support(GasState.make(1, [0.4], {2: -0.5}, hbar=1.0))
        assert info.lo == info.hi == 0.4
        assert not info.gapped

    def test_two_arcs_raise_the_flag(self):
        s = np.concatenate([np.linspace(-3, -1, 10), np.linspace(4, 6, 10)])
        info = support(GasState.make(20, s, {2: -0.5}, hbar=1.0))
        assert info.gapped
        assert info.widest_gap == pytest.approx(5.0)


class TestExteriorMap:
    def test_reference_segment_at_a_point(self):
        # [-2, 2] has r = 1, a = 0; the map identity is exact algebra
        state = GasState.make(2, [-2.0, 2.0], {2: -0.5}, hbar=1.0)
        report = exterior_map_check(state, samples=[3.0 + 1.0j], edge_correct=False)
        assert report.r == pytest.approx(1.0)
        assert report.a == pytest.approx(0.0)
        assert report.identity_error < 1e-12

    def test_translated_segment(self):
        state = GasState.make(2, [0.0, 4.0], {2: -0.5}, hbar=1.0)
        report = exterior_map_check(
            state, samples=[3.0 + 1.0j, 5.0 - 2.0j, -1.0 - 0.5j], edge_correct=False
        )
        assert report.a == pytest.approx(2.0)
        assert report.identity_error < 1e-12

    def test_identity_holds_on_both_sides_of_the_cut(self, gaussian_gas):
        pts = [25.0 + 4.0j, -25.0 - 4.0j, 30.0j, -1.0 - 24.0j]
        report = exterior_map_check(gaussian_gas.state, samples=pts)
        assert report.identity_error < 1e-12

    def test_gapped_support_is_refused(self):
        s = np.concatenate([np.linspace(-3, -1, 5), np.linspace(4, 6, 5)])
        state = GasState.make(10, s, {2: -0.5}, hbar=1.0)
        with pytest.raises(SupportError):
            exterior_map_check(state)


class TestDensityEstimator:
    def test_uniform_spacing_gives_a_flat_profile(self):
        state = GasState.make(20, np.linspace(-2.0, 2.0, 20), {2: -0.5}, hbar=1.0)
        profile = density_profile(state)
        assert np.max(np.abs(profile.values - profile.raw[0])) < 1e-12

    def test_kernel_width_follows_the_support(self):
        state = GasState.make(16, np.linspace(0.0, 8.0, 16), {2: -0.5}, hbar=1.0)
        profile = density_profile(state)
        assert profile.kernel_width == pytest.approx(8.0 / 4.0)

    def test_needs_at_least_three_charges(self):
        state = GasState.make(2, [-1.0, 1.0], {2: -0.5}, hbar=1.0)
        with pytest.raises(ValueError, match="at least 3"):
            density_profile(state)

    def test_smooth_samples_requires_one_value_per_charge(self):
        state = GasState.make(5, np.linspace(-1, 1, 5), {2: -0.5}, hbar=1.0)
        with pytest.raises(ValueError, match="one sample per particle"):
            smooth_samples(state, np.ones(4))


class TestCurveSpec:
    def test_real_line_basics(self):
        z = LINE.gamma(np.array([-1.0, 2.5]))
        assert np.allclose(z, [-1.0, 2.5])
        assert np.allclose(LINE.gamma_prime(np.array([0.0, 1.0])), [1.0, 1.0])
        assert LINE.window() == (-32.0, 32.0)

    def test_half_ray_geometry(self):
        ray = CurveSpec.half_ray(origin=1.0 + 1.0j, angle=math.pi / 2.0)
        z = ray.gamma(np.array([0.0, 2.0]))
        assert np.allclose(z, [1.0 + 1.0j, 1.0 + 3.0j])
        assert np.allclose(ray.clip(np.array([-1.0, 3.0])), [0.0, 3.0])

    def test_full_circle_is_accepted(self):
        # coincidence only at the seam endpoints is not an injectivity failure
        circle = CurveSpec.unit_circle_arc()
        assert circle.domain == (-math.pi, math.pi)

    def test_overlong_arc_is_rejected(self):
        with pytest.raises(ValueError, match="one turn"):
            CurveSpec.unit_circle_arc(0.0, 7.0)

    def test_non_injective_sampled_curve_is_rejected(self):
        # a flat stretch maps an interval of parameters to one point
        with pytest.raises(ValueError, match="injective"):
            CurveSpec.from_samples([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 1.0, 2.0])

    def test_sampled_curve_interpolates_its_nodes(self):
        s_nodes = np.linspace(0.0, 1.0, 9)
        z_nodes = s_nodes + 1j * s_nodes**2
        curve = CurveSpec.from_samples(s_nodes, z_nodes)
        assert np.allclose(curve.gamma(s_nodes), z_nodes, atol=1e-12)
        mid = curve.gamma(np.array([0.5]))
        assert abs(mid[0] - (0.5 + 0.25j)) < 1e-6

    def test_sampled_curve_needs_enough_nodes(self):
        with pytest.raises(ValueError, match="at least 4"):
            CurveSpec.from_samples([0.0, 1.0, 2.0], [0.0, 1.0, 2.0])

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown curve kind"):
            CurveSpec(
                kind="spiral",
                gamma=lambda s: s + 0j,
                gamma_prime=lambda s: np.ones_like(s) + 0j,
            )

    def test_degenerate_parameter_nodes_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            CurveSpec.from_samples([1.0, 1.0, 1.0, 1.0], [0.0, 1.0, 2.0, 3.0])


class TestGasState:
    def test_t0_must_track_hbar_times_n(self):
        t = TimeVector.dtoda(3.0, {2: -0.5})
        with pytest.raises(ValueError, match="t0 = hbar"):
            GasState(n=2, s=np.array([-1.0, 1.0]), t=t, hbar=1.0)

    def test_make_sets_t0(self):
        state = GasState.make(4, np.linspace(-1, 1, 4), {2: -0.5}, hbar=0.25)
        assert state.t.t0 == pytest.approx(1.0)

    def test_positions_must_be_sorted(self):
        with pytest.raises(ValueError, match="sorted"):
            GasState.make(3, [1.0, 0.0, 2.0], {2: -0.5}, hbar=1.0)

    def test_hbar_must_be_positive(self):
        with pytest.raises(ValueError, match="hbar"):
            GasState.make(2, [-1.0, 1.0], {2: -0.5}, hbar=0.0)

    def test_couplings_live_in_a_dtoda_vector(self):
        t = TimeVector.dkp(0.0, {2: -0.5})
        with pytest.raises(ValueError, match="dToda"):
            GasState(n=2, s=np.array([-1.0, 1.0]), t=t, hbar=1.0)

    def test_positions_are_read_only(self):
        state = GasState.make(2, [-1.0, 1.0], {2: -0.5}, hbar=1.0)
        with pytest.raises(ValueError):
            state.s[0] = 5.0

    def test_couplings_helper_drops_mirror_entries(self):
        state = GasState.make(2, [-1.0, 1.0], {2: -0.5, -2: 0.5}, hbar=1.0)
        assert state.couplings() == [(2, -0.5)]
