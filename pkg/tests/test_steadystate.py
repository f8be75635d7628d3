import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wbltransport.device import DeviceSpec, LeadSpec, SystemSpec
from wbltransport.propagate import equilibrium_density, rhs, initial_states
from wbltransport.steadystate import (
    QuadratureNotConverged,
    SingularSylvester,
    SteadyConfig,
    greens_retarded,
    landauer_current,
    p_alpha_steady,
    steady_currents,
    steady_residual,
    steady_sigma,
    transmission,
)
from wbltransport.units import CURRENT_SCALE, HBAR


def single_site(h=0.0, lam_l=0.1, lam_r=0.1, bias_l=0.0, bias_r=0.0, band_bottom=-200.0, u=0.0):
    return SystemSpec(
        DeviceSpec([[h]], charging_strength=u),
        LeadSpec("L", [[lam_l]], bias=bias_l),
        LeadSpec("R", [[lam_r]], bias=bias_r),
        band_bottom=band_bottom,
    )


def chain(n=3, lam=0.2, bias=(0.0, 0.0), onsite=None):
    onsite = np.zeros(n) if onsite is None else np.asarray(onsite)
    h0 = -1.0 * (np.eye(n, k=1) + np.eye(n, k=-1)) + np.diag(onsite)
    lam_l = np.zeros((n, n))
    lam_l[0, 0] = lam
    lam_r = np.zeros((n, n))
    lam_r[-1, -1] = lam
    return SystemSpec(DeviceSpec(h0), LeadSpec("L", lam_l, bias=bias[0]), LeadSpec("R", lam_r, bias=bias[1]), band_bottom=-50.0)


class TestGreens:
    def test_scalar(self):
        cfg = SteadyConfig.from_spec(single_site())
        assert abs(greens_retarded(cfg, 0.0)[0, 0] - (-5j)) < 1e-14

    def test_chain_direct_inversion(self):
        spec = chain()
        cfg = SteadyConfig.from_spec(spec)
        for eps in (-1.3, 0.0, 0.7):
            ref = np.linalg.inv(eps * np.eye(3) - spec.device.h0 + 1j * spec.lam_total)
            np.testing.assert_allclose(greens_retarded(cfg, eps), ref, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-10, 10))
    def test_advanced_is_adjoint(self, eps):
        cfg = SteadyConfig.from_spec(chain(bias=(0.5, -0.5)))
        g = greens_retarded(cfg, eps)
        ga = np.linalg.inv(eps * np.eye(3) - cfg.h_inf - 1j * cfg.spec.lam_total)
        assert np.linalg.norm(ga - g.conj().T) < 1e-12 * max(1.0, np.linalg.norm(g))

    def test_settled_hamiltonian(self):
        cfg = SteadyConfig.from_spec(single_site(bias_r=-2.0))
        assert cfg.h_inf[0, 0] == 1.0
        assert (cfg.mu_left, cfg.mu_right) == (0.0, 2.0)

    def test_quadrature_points_invariant(self):
        with pytest.raises(ValueError):
            SteadyConfig(single_site(), 0.0, 0.0, np.zeros((1, 1)), points=8)


class TestTransmission:
    def test_decoupled(self):
        cfg = SteadyConfig.from_spec(single_site(lam_r=0.0))
        assert transmission(cfg, 0.0) == 0.0

    def test_resonance_is_unity_and_symmetric(self):
        cfg = SteadyConfig.from_spec(single_site(h=0.4))
        peak = transmission(cfg, 0.4)
        assert abs(peak - 1.0) < 1e-6
        for d in (0.01, 0.1, 1.0):
            assert transmission(cfg, 0.4 + d) == pytest.approx(transmission(cfg, 0.4 - d), rel=1e-12)
            assert transmission(cfg, 0.4 + d) < peak

    def test_breit_wigner(self):
        # 4 lam_L lam_R / ((eps - e_d)^2 + (lam_L + lam_R)^2)
        cfg = SteadyConfig.from_spec(single_site(h=0.2, lam_l=0.05, lam_r=0.15))
        for eps in (-1.0, 0.2, 0.5):
            ref = 4 * 0.05 * 0.15 / ((eps - 0.2) ** 2 + 0.2**2)
            assert transmission(cfg, eps) == pytest.approx(ref, rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-5, 5))
    def test_non_negative(self, seed, eps):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        c = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        spec = SystemSpec(
            DeviceSpec(a + a.conj().T),
            LeadSpec("L", 0.1 * b @ b.conj().T),
            LeadSpec("R", 0.1 * c @ c.conj().T),
        )
        assert transmission(SteadyConfig.from_spec(spec), eps) >= -1e-12


class TestLandauer:
    def test_zero_bias(self):
        assert landauer_current(SteadyConfig.from_spec(single_site())) == 0.0

    def test_linear_response(self):
        v = 1e-3
        cfg = SteadyConfig.from_spec(single_site(h=0.3, bias_l=v / 2, bias_r=-v / 2))
        # electrons flow from the higher electrochemical potential (right lead here)
        t0 = transmission(cfg, 0.0)
        ref = -t0 * v / (np.pi * HBAR) * CURRENT_SCALE["nA"]
        assert landauer_current(cfg) == pytest.approx(ref, rel=1e-5)

    def test_conductance_quantum(self):
        # on resonance with symmetric coupling the conductance is 2e^2/h
        v = 1e-4
        cfg = SteadyConfig.from_spec(single_site(bias_r=-v))
        g0 = 7.748091729e-5  # siemens
        assert abs(landauer_current(cfg)) * 1e-9 / v == pytest.approx(g0, rel=1e-6)

    def test_antisymmetric_under_bias_exchange(self):
        a = landauer_current(SteadyConfig.from_spec(chain(bias=(0.3, -0.8))))
        b = landauer_current(SteadyConfig.from_spec(chain(bias=(-0.8, 0.3))))
        assert a == pytest.approx(-b, rel=1e-12)

    def test_unit(self):
        cfg = SteadyConfig.from_spec(single_site(bias_r=-1.0))
        assert landauer_current(cfg, "nA") == pytest.approx(1e3 * landauer_current(cfg, "uA"), rel=1e-14)

    def test_refinement_failure(self):
        spec = single_site(h=1.0, lam_l=0.001, lam_r=0.001, bias_r=-2.0)
        cfg = SteadyConfig.from_spec(spec, panels=1, points=16)
        with pytest.raises(QuadratureNotConverged):
            landauer_current(cfg)

    def test_matches_dissipation_route(self):
        # -tr Q / hbar at the stationary sigma against the transmission integral
        cfg = SteadyConfig.from_spec(single_site(h=0.2, bias_r=-1.5))
        j_l, j_r = steady_currents(cfg)
        assert j_l == pytest.approx(-j_r, rel=1e-12)
        assert j_l == pytest.approx(landauer_current(cfg), rel=1e-4)


class TestStationary:
    def test_decoupled_lead(self):
        cfg = SteadyConfig.from_spec(single_site(lam_l=0.0))
        assert not np.any(p_alpha_steady(cfg, cfg.spec.left))

    def test_zero_bias_stationarity(self):
        spec = chain()
        cfg = SteadyConfig.from_spec(spec)
        sigma = equilibrium_density(spec)
        assert steady_residual(cfg, sigma) < 1e-6
        assert np.linalg.norm(rhs(spec, 0.0, sigma, initial_states(spec))) < 1e-6

    def test_zero_bias_sigma_is_equilibrium(self):
        spec = chain(onsite=[0.2, -0.1, 0.4])
        np.testing.assert_allclose(steady_sigma(SteadyConfig.from_spec(spec)), equilibrium_density(spec), atol=1e-8)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-2, 2), st.floats(-2, 2))
    def test_hermitian_and_stationary(self, vl, vr):
        cfg = SteadyConfig.from_spec(chain(bias=(vl, vr), onsite=[0.1, 0.0, -0.3]))
        sigma = steady_sigma(cfg)
        assert np.linalg.norm(sigma - sigma.conj().T) < 1e-10
        assert steady_residual(cfg, sigma) < 1e-8

    def test_lead_labels_are_irrelevant(self):
        spec = chain(bias=(0.4, -0.4))
        swapped = SystemSpec(
            spec.device,
            LeadSpec("L", spec.right.lam, bias=spec.right.bias),
            LeadSpec("R", spec.left.lam, bias=spec.left.bias),
            band_bottom=spec.band_bottom,
        )
        s1 = steady_sigma(SteadyConfig.from_spec(spec))
        s2 = steady_sigma(SteadyConfig.from_spec(swapped))
        np.testing.assert_allclose(s1, s2, atol=1e-12)

    def test_mirror_symmetry(self):
        # mirroring a symmetric device exchanges which lead carries +V/2
        v = 0.8
        s1 = steady_sigma(SteadyConfig.from_spec(chain(bias=(v / 2, -v / 2))))
        s2 = steady_sigma(SteadyConfig.from_spec(chain(bias=(-v / 2, v / 2))))
        mirror = np.fliplr(np.eye(3))
        np.testing.assert_allclose(mirror @ s1 @ mirror, s2, atol=1e-12)

    def test_singular_sylvester(self):
        h0 = np.diag([0.3, 3.0])
        lam = np.diag([0.1, 0.0])
        spec = SystemSpec(DeviceSpec(h0), LeadSpec("L", lam), LeadSpec("R", lam, bias=-1.0))
        with pytest.raises(SingularSylvester):
            steady_sigma(SteadyConfig.from_spec(spec))

    def test_charging_self_consistency(self):
        spec = single_site(h=0.3, bias_r=-1.0, u=1.0)
        cfg = SteadyConfig.from_spec(spec)
        sigma = steady_sigma(cfg)
        trace0 = np.trace(equilibrium_density(spec)).real
        shift = cfg.h_inf[0, 0].real - 0.3 - 0.5
        assert shift == pytest.approx(1.0 * (np.trace(sigma).real - trace0), abs=1e-10)
        assert steady_residual(cfg, sigma) < 1e-10
