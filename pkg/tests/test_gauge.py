"""Gauge group tests: Cauchy powers, transforms, group laws, pushforward."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlgauge import (
    CauchyPower,
    GaugeTransform,
    WaveFunction,
    apply,
    apply_local_unitary,
    c_prime,
    compose,
    invert,
    local_unitary,
    make_gaussian,
    norm,
    pure_gauge,
    pushforward_params,
)
from nlgauge.evolution import params_from_gauge, params_from_linear, rhs_unified
from nlgauge.observables import BorelBin, p_B
from nlgauge.paths import ScalarPath, coef_value

from conftest import make_floor_free, make_nodeless


def state_distance(a: WaveFunction, b: WaveFunction) -> float:
    return norm(a.with_amplitudes(a.amplitudes - b.amplitudes))


nonzero_complex = st.builds(
    complex,
    st.floats(-10, 10, allow_nan=False),
    st.floats(-10, 10, allow_nan=False),
).filter(lambda c: abs(c) > 1e-3)


class TestCauchyPower:
    @pytest.mark.parametrize("delta,gamma,lam", [(1, 0, 1), (1, 2, -1), (0.5, -3, 2)])
    def test_unity_fixed_point(self, delta, gamma, lam):
        assert c_prime(CauchyPower(delta, gamma, lam), 1.0) == pytest.approx(1.0)

    @settings(max_examples=100, deadline=None)
    @given(c1=nonzero_complex, c2=nonzero_complex)
    def test_multiplicativity(self, c1, c2):
        p = CauchyPower(1.0, 2.0, 1)
        lhs = c_prime(p, c1 * c2)
        rhs = c_prime(p, c1) * c_prime(p, c2)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_closed_form_value(self):
        p = CauchyPower(1.0, 2.0, 1)
        val = c_prime(p, np.e)
        expected = np.e * complex(np.cos(2.0), np.sin(2.0))
        assert abs(val - expected) < 1e-15 * abs(expected) + 1e-15

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            c_prime(CauchyPower(), 0.0)

    def test_matches_apply_on_constant_fields(self, grid1d):
        c = 0.7 - 1.2j
        psi = WaveFunction(grid1d, np.full(grid1d.shape, c))
        for gamma, lam in ((0.0, 1), (1.5, 1), (0.8, -1)):
            n = GaugeTransform(gamma=gamma, lam=lam)
            mapped = apply(n, psi)
            expected = c_prime(CauchyPower(1.0, gamma, lam), c)
            assert np.max(np.abs(mapped.amplitudes - expected)) < 1e-12


class TestApply:
    def test_identity(self, gaussian):
        out = apply(GaugeTransform(), gaussian)
        assert np.array_equal(out.amplitudes, gaussian.amplitudes)

    def test_constant_state_pure_gauge(self, grid1d):
        gamma = 0.9
        psi = WaveFunction(grid1d, np.full(grid1d.shape, 2.0 + 0.0j))
        out = apply(pure_gauge(gamma), psi)
        expected = 2.0 * np.exp(1j * gamma * np.log(2.0))
        assert np.max(np.abs(out.amplitudes - expected)) < 1e-14

    def test_norm_preserved(self, nodeless_states):
        n = pure_gauge(1.7)
        for psi in nodeless_states[:5]:
            assert abs(norm(apply(n, psi)) - norm(psi)) < 1e-14

    def test_conjugation_for_lambda_minus(self, gaussian):
        n = GaugeTransform(lam=-1)
        out = apply(n, gaussian)
        assert np.max(np.abs(out.amplitudes - np.conj(gaussian.amplitudes))) < 1e-15

    def test_delta_not_one_needs_formal(self):
        with pytest.raises(ValueError, match="formal"):
            GaugeTransform(delta=2.0)
        GaugeTransform(delta=2.0, formal=True)  # accepted in formal mode

    def test_kappa_must_be_positive(self, grid1d):
        with pytest.raises(ValueError, match="positive"):
            GaugeTransform(kappa=np.zeros(grid1d.shape))

    def test_norm_preserving_flag(self, grid1d):
        assert GaugeTransform().norm_preserving
        assert GaugeTransform(kappa=np.ones(grid1d.shape)).norm_preserving
        assert not GaugeTransform(kappa=2.0 * np.ones(grid1d.shape)).norm_preserving

    def test_position_probabilities_invariant(self, grid1d, rng):
        psi = make_nodeless(grid1d, rng)
        n = pure_gauge(2.2)
        mapped = apply(n, psi)
        for thr in (-3.0, 0.0, 1.5):
            b = BorelBin.half_space(grid1d, 0, thr)
            assert p_B(mapped, b) == pytest.approx(p_B(psi, b), abs=1e-14)


class TestInvert:
    def test_pure_gauge_roundtrip(self, gaussian):
        n = pure_gauge(1.3)
        roundtrip = apply(invert(n), apply(n, gaussian))
        assert state_distance(roundtrip, gaussian) <= 1e-10

    def test_invert_pure_gauge_is_negated_gamma(self):
        n_inv = invert(pure_gauge(0.7))
        assert n_inv.gamma_at(0.0) == pytest.approx(-0.7)
        assert n_inv.lam == 1

    def test_invert_identity(self, gaussian):
        n_inv = invert(GaugeTransform())
        assert state_distance(apply(n_inv, gaussian), gaussian) == 0.0

    def test_conjugation_is_involution(self, gaussian):
        n = GaugeTransform(lam=-1)
        twice = apply(n, apply(n, gaussian))
        assert state_distance(twice, gaussian) < 1e-14

    def test_roundtrip_with_kappa_and_theta(self, grid1d, rng):
        x = grid1d.axis_coordinates(0)
        kappa = 1.0 + 0.5 * np.exp(-(x**2) / 8)
        theta = 0.3 * np.sin(2 * np.pi * x / 40.0)
        n = GaugeTransform(gamma=0.9, kappa=kappa, theta=theta)
        psi = make_floor_free(grid1d, rng)  # kappa shifts the floor radius
        roundtrip = apply(invert(n), apply(n, psi))
        assert state_distance(roundtrip, psi) <= 1e-10

    def test_non_invertible_rejected(self):
        n = GaugeTransform(delta=1.5, formal=True)
        with pytest.raises(ValueError, match="invertible"):
            invert(n)


class TestCompose:
    def test_pure_gauges_add(self, gaussian):
        lhs = apply(compose(pure_gauge(1.0), pure_gauge(1.0)), gaussian)
        rhs = apply(pure_gauge(2.0), gaussian)
        assert state_distance(lhs, rhs) <= 1e-12

    def test_semidirect_relation(self, grid1d, rng):
        # U_(Lambda theta) o N_(gamma, Lambda, 0) == N_(gamma, Lambda, 0) o U_theta
        x = grid1d.axis_coordinates(0)
        theta = 0.8 * np.cos(2 * np.pi * x / 40.0)
        psi = make_nodeless(grid1d, rng)
        for lam in (+1, -1):
            n = GaugeTransform(gamma=1.1, lam=lam)
            left = apply(local_unitary(lam * theta), apply(n, psi))
            right = apply(n, apply_local_unitary(theta, psi))
            assert np.max(np.abs(left.amplitudes - right.amplitudes)) <= 1e-12

    def test_compose_with_identity(self, gaussian):
        n = GaugeTransform(gamma=0.6, lam=-1)
        for combo in (compose(n, GaugeTransform()), compose(GaugeTransform(), n)):
            assert state_distance(apply(combo, gaussian), apply(n, gaussian)) < 1e-13

    def test_compose_matches_sequential_application(self, grid1d, rng):
        x = grid1d.axis_coordinates(0)
        n1 = GaugeTransform(gamma=0.5, lam=-1, theta=0.2 * np.sin(2 * np.pi * x / 40))
        n2 = GaugeTransform(gamma=-0.9, lam=1,
                            kappa=1.0 + 0.25 * np.cos(2 * np.pi * x / 40) ** 2)
        psi = make_floor_free(grid1d, rng)  # kappa shifts the floor radius
        sequential = apply(n1, apply(n2, psi))
        combined = apply(compose(n1, n2), psi)
        assert state_distance(sequential, combined) <= 1e-10

    def test_group_axioms_on_states(self, grid1d, rng):
        psi = make_nodeless(grid1d, rng)
        n1, n2, n3 = pure_gauge(0.4), GaugeTransform(gamma=-0.8, lam=-1), pure_gauge(1.2)
        assoc_l = apply(compose(compose(n1, n2), n3), psi)
        assoc_r = apply(compose(n1, compose(n2, n3)), psi)
        assert state_distance(assoc_l, assoc_r) <= 1e-12
        inv = apply(compose(invert(n2), n2), psi)
        assert state_distance(inv, psi) <= 1e-10

    def test_pure_subgroup_abelian(self, gaussian):
        a, b = pure_gauge(0.7), pure_gauge(-1.9)
        ab = apply(compose(a, b), gaussian)
        ba = apply(compose(b, a), gaussian)
        assert state_distance(ab, ba) <= 1e-13


class TestLocalUnitary:
    def test_zero_theta_identity(self, gaussian):
        out = apply_local_unitary(np.zeros(gaussian.grid.shape), gaussian)
        assert np.array_equal(out.amplitudes, gaussian.amplitudes)

    def test_modulus_preserved(self, grid1d, rng):
        psi = make_nodeless(grid1d, rng)
        theta = rng.normal(size=grid1d.shape)
        out = apply_local_unitary(theta, psi)
        assert np.max(np.abs(np.abs(out.amplitudes) - np.abs(psi.amplitudes))) < 1e-14

    def test_additive_in_theta(self, gaussian, rng):
        t1 = rng.normal(size=gaussian.grid.shape)
        t2 = rng.normal(size=gaussian.grid.shape)
        lhs = apply_local_unitary(t1, apply_local_unitary(t2, gaussian))
        rhs = apply_local_unitary(t1 + t2, gaussian)
        assert np.max(np.abs(lhs.amplitudes - rhs.amplitudes)) < 1e-15


class TestPushforward:
    def test_identity_gauge_is_identity(self):
        p = params_from_linear()
        p2 = pushforward_params(p, 0.0, 0.0)
        for key in ("nu1", "nu2", "mu1", "mu2", "mu3", "mu4", "mu5", "alpha1"):
            assert getattr(p2, key) == pytest.approx(getattr(p, key))

    def test_linear_pushforward_matches_constructor(self):
        # gamma=2 at hbar=m=1: the documented coefficient set
        p = pushforward_params(params_from_linear(), 2.0, 0.0)
        assert p.nu2 == pytest.approx(0.5)
        assert p.mu1 == pytest.approx(1.0)
        assert p.mu4 == pytest.approx(-1.0)
        assert p.mu2 == pytest.approx(-0.25 - 1.0)
        assert p.mu5 == pytest.approx(0.125 + 0.5)
        assert p.alpha1 == pytest.approx(0.0)
        q = params_from_gauge(2.0, 0.0)
        for key in ("nu1", "nu2", "mu1", "mu2", "mu3", "mu4", "mu5", "alpha1"):
            assert getattr(p, key) == pytest.approx(getattr(q, key))

    @settings(max_examples=30, deadline=None)
    @given(
        g1=st.floats(-2, 2, allow_nan=False),
        g2=st.floats(-2, 2, allow_nan=False),
        nu2=st.floats(-1, 1, allow_nan=False),
        mu1=st.floats(-1, 1, allow_nan=False),
        mu3=st.floats(-1, 1, allow_nan=False),
    )
    def test_group_property_on_random_params(self, g1, g2, nu2, mu1, mu3):
        from dataclasses import replace

        p = replace(params_from_linear(), nu2=nu2, mu1=mu1, mu3=mu3, alpha1=0.3)
        seq = pushforward_params(pushforward_params(p, g2, 0.1), g1, 0.2)
        once = pushforward_params(p, g1 + g2, 0.3)
        for key in ("nu1", "nu2", "mu1", "mu2", "mu3", "mu4", "mu5", "alpha1"):
            a, b = getattr(seq, key), getattr(once, key)
            assert float(a) == pytest.approx(float(b), abs=1e-12)

    def test_time_dependent_gamma_gives_paths(self):
        path = ScalarPath(np.sin, np.cos)
        p = pushforward_params(params_from_linear(), path)
        assert coef_value(p.nu2, 0.5) == pytest.approx(np.sin(0.5) / 4.0)
        assert coef_value(p.alpha1, 0.5) == pytest.approx(-np.cos(0.5) / 2.0)

    def test_residual_oracle_constant_gamma(self, grid1d):
        """Plug N_gamma[U(t) psi0] into the pushforward equation: the
        time-derivative (central differences) must match rhs_unified on the
        packet core."""
        gamma = 1.0
        psi0 = make_gaussian(grid1d, 0.0, 1.0, 0.5)
        n = pure_gauge(gamma)
        p = params_from_gauge(gamma, 0.0)

        k2 = grid1d.k_squared()

        def linear_flow(t):
            hat = np.fft.fftn(psi0.amplitudes)
            return psi0.with_amplitudes(np.fft.ifftn(np.exp(-0.5j * k2 * t) * hat))

        t0, h = 0.3, 1e-5
        xi = lambda t: apply(n, linear_flow(t), t=t)
        dpsi_dt = (xi(t0 + h).amplitudes - xi(t0 - h).amplitudes) / (2 * h)
        rhs = rhs_unified(xi(t0), p, t0)
        x = grid1d.axis_coordinates(0)
        core = np.abs(x) < 3.0
        scale = np.abs(xi(t0).amplitudes).max()
        assert np.max(np.abs((dpsi_dt - rhs)[core])) / scale < 1e-6

    def test_residual_oracle_time_dependent_gamma(self, grid1d):
        path = ScalarPath(np.sin, np.cos)
        psi0 = make_gaussian(grid1d, 0.0, 1.0, 0.0)
        n = GaugeTransform(gamma=path)
        p = params_from_gauge(path)

        k2 = grid1d.k_squared()

        def linear_flow(t):
            hat = np.fft.fftn(psi0.amplitudes)
            return psi0.with_amplitudes(np.fft.ifftn(np.exp(-0.5j * k2 * t) * hat))

        t0, h = 0.4, 1e-5
        xi = lambda t: apply(n, linear_flow(t), t=t)
        dpsi_dt = (xi(t0 + h).amplitudes - xi(t0 - h).amplitudes) / (2 * h)
        rhs = rhs_unified(xi(t0), p, t0)
        x = grid1d.axis_coordinates(0)
        core = np.abs(x) < 3.0
        scale = np.abs(xi(t0).amplitudes).max()
        assert np.max(np.abs((dpsi_dt - rhs)[core])) / scale < 1e-6


class TestScalarPath:
    def test_sampled_path_with_fd_derivative(self):
        ts = np.linspace(0, 2, 2001)
        path = ScalarPath(0.0, samples=(ts, np.sin(ts)))
        assert path.value(0.7) == pytest.approx(np.sin(0.7), abs=1e-6)
        # central-difference fallback: second-order in the sample spacing
        assert path.dot(0.7) == pytest.approx(np.cos(0.7), abs=1e-5)

    def test_callable_fd_fallback(self):
        path = ScalarPath(lambda t: t**3)
        assert path.dot(2.0) == pytest.approx(12.0, abs=1e-6)
