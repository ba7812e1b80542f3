import math

import numpy as np
import numpy.testing as npt
import pytest

from conftest import random_density
from lossyphase import estimator as est
from lossyphase import fock
from lossyphase import gaussian as ga
from lossyphase.errors import DomainError

SPEC = ga.InputSpec(0.8, 0.5, 0.2)


@pytest.fixture(scope="module")
def lossy():
    state = fock.lossy_input_state(SPEC)
    padded = fock.pad(state, 1)
    return state, padded, est.EstimatorSpec.from_input(SPEC, padded.dims)


def ladder_pair(dims):
    return fock.annihilation(dims, 0).matrix, fock.annihilation(dims, 1).matrix


# -- operators -------------------------------------------------------------


def test_g1_without_coherent_amplitude():
    dims = (4, 5)
    a1, a2 = ladder_pair(dims)
    g1 = est.g1_operator(est.EstimatorSpec(0.0, 0.25, dims))
    npt.assert_allclose(g1.matrix, -(a1.conj().T @ a2 + a2.conj().T @ a1), atol=0)
    assert g1.hermitian


def test_g2_examples():
    dims = (3, 6)
    assert np.all(est.g2_operator(est.EstimatorSpec(0.0, 0.1, dims)).matrix == 0)
    x2, _ = est.quadratures(dims, 1)
    npt.assert_allclose(est.g2_operator(est.EstimatorSpec(0.7, 0.25, dims)).matrix, 1.4 * x2.matrix, atol=1e-15)


def test_estimator_is_sum_of_parts(lossy):
    _, _, spec = lossy
    g = est.optimal_estimator(spec)
    npt.assert_allclose(g.matrix, est.g1_operator(spec).matrix + est.g2_operator(spec).matrix, atol=1e-14)


def test_estimator_in_displaced_form(lossy):
    # G = b^dag a2 + a2^dag b with b = c - a1
    _, _, spec = lossy
    a1, a2 = ladder_pair(spec.dims)
    b = spec.b_offset * np.eye(a1.shape[0]) - a1
    npt.assert_allclose(est.optimal_estimator(spec).matrix, b.conj().T @ a2 + a2.conj().T @ b, atol=1e-13)


def test_b_offset():
    spec = est.EstimatorSpec(2.0, 0.25, (3, 3))
    assert spec.b_offset == 4.0
    with pytest.raises(DomainError):
        est.EstimatorSpec(1.0, 0.0, (3, 3))


def test_quadratures_commutator_interior():
    dims = (2, 12)
    x, y = est.quadratures(dims, 1)
    comm = x.matrix @ y.matrix - y.matrix @ x.matrix
    npt.assert_allclose(fock.interior_max(comm - 0.5j * np.eye(24), dims), 0.0, atol=1e-14)


# -- identities on the lossy input -------------------------------------------


def test_quadrature_identity(lossy):
    state, _, _ = lossy
    g = ga.LossyGaussianState.from_input(SPEC)
    rho2 = fock.partial_trace(state, 1)
    assert est.quadrature_identity_residual(rho2, g.lam, g.r_red) <= 1e-8


def test_quadrature_identity_fails_for_wrong_parameters(lossy):
    state, _, _ = lossy
    g = ga.LossyGaussianState.from_input(SPEC)
    assert est.quadrature_identity_residual(fock.partial_trace(state, 1), g.lam, g.r_red + 0.1) > 1e-3


def test_g1_relation(lossy):
    state, _, _ = lossy
    spec = est.EstimatorSpec.from_input(SPEC, state.dims)
    assert est.g1_relation_residual(state, spec) <= 1e-8


def test_g2_relation(lossy):
    # g2 rho + rho g2 = -alpha_red ((a2 - a2^dag) rho - rho (a2 - a2^dag))
    state, _, _ = lossy
    spec = est.EstimatorSpec.from_input(SPEC, state.dims)
    _, a2 = ladder_pair(state.dims)
    rho, g2 = state.matrix, est.g2_operator(spec).matrix
    q = a2 - a2.conj().T
    rhs = -spec.alpha_red * (q @ rho - rho @ q)
    assert fock.interior_max(g2 @ rho + rho @ g2 - rhs, state.dims) <= 1e-8


def test_g1_has_zero_mean(lossy):
    state, _, _ = lossy
    spec = est.EstimatorSpec.from_input(SPEC, state.dims)
    assert abs(fock.expectation(state, est.g1_operator(spec))) <= 1e-10


def test_sld_relation(lossy):
    state, _, _ = lossy
    spec = est.EstimatorSpec.from_input(SPEC, state.dims)
    g = est.optimal_estimator(spec)
    residual = est.sld_relation_residual(state, g, fock.generator_h(state.dims))
    assert residual <= 1e-8 * np.abs(state.matrix).max()


def test_second_moment(lossy):
    _, padded, spec = lossy
    g = ga.LossyGaussianState.from_input(SPEC)
    second = fock.qfi(padded, est.optimal_estimator(spec))
    npt.assert_allclose(second, g.alpha_red**2 / (4 * g.var_x) + g.n2, rtol=1e-6)


def test_estimator_attains_fisher_information(lossy):
    _, padded, spec = lossy
    h = fock.generator_h(padded.dims)
    sens = fock.estimator_sensitivity(padded, est.optimal_estimator(spec), h)
    npt.assert_allclose(sens, ga.fisher_information(SPEC), rtol=1e-6)


def test_oracle_report():
    report, residual = est.oracle_report(SPEC)
    f = ga.fisher_information(SPEC)
    npt.assert_allclose(report.qfi, f, rtol=1e-6)
    npt.assert_allclose(report.estimator_sensitivity, f, rtol=1e-6)
    assert report.sld_residual < 1e-8
    assert residual < 1e-8
    assert report.tail_mass < 1e-10


# -- measurement -------------------------------------------------------------


def test_setup_validation():
    with pytest.raises(DomainError):
        est.MeasurementSetup(1.0, bs4_transmittance=0.6)
    for t in (0.0, 1.0, 1.5):
        with pytest.raises(DomainError):
            est.MeasurementSetup(1.0, t)


def test_measurement_of_vacuum():
    vac = fock.two_mode_product(fock.coherent_state(0.0, 3), fock.coherent_state(0.0, 3))
    res = est.simulate_measurement(est.MeasurementSetup(0.0), vac)
    assert res.mean == pytest.approx(0.0, abs=1e-15)
    assert res.sensitivity == 0.0


def test_measurement_coherent_only():
    spec = ga.InputSpec(1.0, 0.0, 0.0)
    state = fock.lossy_input_state(spec)
    setup = est.MeasurementSetup.for_estimator(est.EstimatorSpec.from_input(spec, state.dims))
    res = est.simulate_measurement(setup, state)
    npt.assert_allclose(res.sensitivity, 1.0, rtol=1e-6)


def test_measurement_lossless():
    spec = ga.InputSpec(0.8, 0.5, 0.0)
    state = fock.lossy_input_state(spec)
    setup = est.MeasurementSetup.for_estimator(est.EstimatorSpec.from_input(spec, state.dims))
    res = est.simulate_measurement(setup, state)
    npt.assert_allclose(res.sensitivity, 0.64 * math.exp(1.0) + math.sinh(0.5) ** 2, rtol=1e-6)


@pytest.mark.parametrize("phi", [0.0, 0.05])
def test_operational_readout_equals_estimator_moments(lossy, phi):
    state, padded, spec = lossy
    setup = est.MeasurementSetup.for_estimator(spec)
    res = est.simulate_measurement(setup, state, phi)
    h = fock.generator_h(padded.dims)
    ref = est.estimator_moments(fock.phase_shifted(padded, h, phi), est.optimal_estimator(spec), h)
    npt.assert_allclose([res.mean, res.variance, res.slope], [ref.mean, ref.variance, ref.slope],
                        rtol=1e-10, atol=1e-10)


def test_slope_matches_finite_difference(lossy):
    state, _, spec = lossy
    setup = est.MeasurementSetup.for_estimator(spec)
    eps = 1e-4
    plus = est.simulate_measurement(setup, state, eps).mean
    minus = est.simulate_measurement(setup, state, -eps).mean
    npt.assert_allclose((plus - minus) / (2 * eps), est.simulate_measurement(setup, state).slope, rtol=1e-6)


def test_finite_transmittance_approaches_ideal(lossy):
    state, _, spec = lossy
    ideal = est.simulate_measurement(est.MeasurementSetup.for_estimator(spec), state).sensitivity
    devs = [ideal - est.simulate_measurement(est.MeasurementSetup.for_estimator(spec, t), state).sensitivity
            for t in (0.1, 0.01)]
    assert 0 < devs[1] < devs[0]


def test_displacement_is_unitary_in_interior():
    d = est.displacement_matrix(0.7, 40, 10)
    npt.assert_allclose(d.conj().T @ d, np.eye(10), atol=1e-12)
    # D(beta)|0> is the coherent state |beta>
    npt.assert_allclose(np.abs(d[:, 0]), np.sqrt(np.diag(fock.coherent_state(0.7, 40).matrix)), atol=1e-12)


def test_weak_beam_splitter_reduces_to_loss_and_displacement():
    rng = np.random.default_rng(3)
    rho1 = random_density(rng, (4,))
    t, beta = 0.3, 1.0
    explicit = est.bs3_channel_explicit(rho1, beta, t, 22, 14)
    setup = est.MeasurementSetup(math.sqrt(t) * beta, t)
    reduced = fock.apply_kraus(rho1, est.mode1_kraus(setup, 4, 14))
    npt.assert_allclose(explicit.matrix, reduced.matrix, atol=1e-12)


def test_balanced_splitter_maps_readout_to_estimator():
    # (N_c - N_d) after the balanced splitter is b^dag a2 + a2^dag b up to sign convention
    n = 5
    u = est._bs4_unitary(n)
    k = np.arange(n + 1, dtype=float)
    m = np.zeros((n + 1, n + 1))
    m[np.arange(1, n + 1), np.arange(n)] = np.sqrt((k[:-1] + 1.0) * (n - k[:-1]))
    readout = u.T @ np.diag(2 * k - n) @ u
    npt.assert_allclose(np.abs(readout), np.abs(m + m.T), atol=1e-12)
