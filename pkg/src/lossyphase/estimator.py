"""Explicit optimal estimator and the local-oscillator measurement that realizes it.

The optimal estimator is an interference term ``G = b^dag a2 + a2^dag b`` of
the squeezed mode with the displaced coherent mode ``b = c - a1``, where
``c = alpha_red (1/(4 var_x) + 1)``. It splits as ``G = g1 + g2`` with ``g1``
handling the coherent-state transitions and ``g2`` proportional to the
squeezed quadrature ``x2``.

The measurement displaces mode 1 (the ideal limit of a weak beam splitter with a
strong local oscillator), mixes it with mode 2 on a balanced beam splitter
and reads out the photon-number difference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg

from . import fock
from .errors import DomainError, EstimatorError
from .fock import FockOperator, FockState, SensitivityReport
from .gaussian import InputSpec, LossyGaussianState

__all__ = [
    "EstimatorSpec",
    "MeasurementSetup",
    "MeasurementResult",
    "g1_operator",
    "g2_operator",
    "optimal_estimator",
    "quadratures",
    "quadrature_identity_residual",
    "g1_relation_residual",
    "sld_relation_residual",
    "estimator_moments",
    "displacement_matrix",
    "mode1_kraus",
    "bs3_channel_explicit",
    "simulate_measurement",
    "oracle_report",
]


@dataclass(frozen=True)
class EstimatorSpec:
    """Post-loss inputs of the optimal estimator on a given truncated space."""

    alpha_red: float
    var_x: float
    dims: tuple[int, int]

    def __post_init__(self):
        if not self.var_x > 0:
            raise DomainError("var_x must be > 0")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def b_offset(self) -> float:
        """Coherent amplitude subtracted from mode 1."""
        return self.alpha_red * (1.0 / (4.0 * self.var_x) + 1.0)

    @property
    def cutoff(self) -> int:
        return max(self.dims)

    @classmethod
    def from_input(cls, spec: InputSpec, dims) -> "EstimatorSpec":
        """Derive the post-loss parameters from a pre-loss input."""
        g = LossyGaussianState.from_input(spec)
        return cls(g.alpha_red, g.var_x, tuple(dims))


@dataclass(frozen=True)
class MeasurementSetup:
    """Local-oscillator displacement, balanced beam splitter, photon-number difference.

    ``transmittance=None`` is the ideal limit, an exact displacement of mode 1.
    A finite value models the weak beam splitter explicitly: the signal keeps
    amplitude ``sqrt(1 - T)`` and the local oscillator is scaled so that the
    displacement still equals ``displacement``.
    """

    displacement: float
    transmittance: float | None = None
    bs4_transmittance: float = 0.5

    def __post_init__(self):
        if self.bs4_transmittance != 0.5:
            raise DomainError("the readout beam splitter is balanced")
        if self.transmittance is not None and not 0.0 < self.transmittance < 1.0:
            raise DomainError("transmittance must lie in (0, 1)")

    @classmethod
    def for_estimator(cls, spec: EstimatorSpec, transmittance: float | None = None) -> "MeasurementSetup":
        return cls(spec.b_offset, transmittance)


class MeasurementResult(NamedTuple):
    mean: float
    variance: float
    sensitivity: float
    slope: float


def _ladders(dims):
    a1 = fock.annihilation(dims, 0).matrix
    a2 = fock.annihilation(dims, 1).matrix
    return a1, a2


def quadratures(dims, mode: int = 1) -> tuple[FockOperator, FockOperator]:
    """``x = (a + a^dag)/2`` and ``y = (a - a^dag)/(2i)`` of one mode."""
    a = fock.annihilation(dims, mode).matrix
    x = 0.5 * (a + a.conj().T)
    y = (a - a.conj().T) / 2j
    return FockOperator(x, dims, True), FockOperator(y, dims, True)


def g1_operator(spec: EstimatorSpec) -> FockOperator:
    """Coherent-transition part ``-((a1^dag - alpha_red) a2 + a2^dag (a1 - alpha_red))``."""
    a1, a2 = _ladders(spec.dims)
    shifted = a1 - spec.alpha_red * np.eye(a1.shape[0])
    g = -(shifted.conj().T @ a2 + a2.conj().T @ shifted)
    return FockOperator(g, spec.dims, hermitian=True)


def g2_operator(spec: EstimatorSpec) -> FockOperator:
    """Squeezed-mode part ``alpha_red / (2 var_x) * x2``."""
    x2, _ = quadratures(spec.dims, 1)
    return x2.scaled(spec.alpha_red / (2.0 * spec.var_x))


def optimal_estimator(spec: EstimatorSpec) -> FockOperator:
    """``G = b^dag a2 + a2^dag b`` with ``b = b_offset - a1``."""
    a1, a2 = _ladders(spec.dims)
    b = spec.b_offset * np.eye(a1.shape[0]) - a1
    g = b.conj().T @ a2 + a2.conj().T @ b
    return FockOperator(g, spec.dims, hermitian=True)


def quadrature_identity_residual(rho2: FockState, lam: float, r_red: float) -> float:
    """Interior mismatch of ``-i[y, rho2] = k (x rho2 + rho2 x)``, ``k = (1-lam)/(1+lam) e^{2 r_red}``."""
    x, y = quadratures(rho2.dims, 0)
    rho = rho2.matrix
    k = (1.0 - lam) / (1.0 + lam) * math.exp(2.0 * r_red)
    lhs = -1j * (y.matrix @ rho - rho @ y.matrix)
    rhs = k * (x.matrix @ rho + rho @ x.matrix)
    return fock.interior_max(lhs - rhs, rho2.dims)


def g1_relation_residual(state: FockState, spec: EstimatorSpec) -> float:
    """Interior mismatch of ``g1 rho + rho g1 = -((a1^dag - a) a2 rho + rho a2^dag (a1 - a))``.

    The right side is the part of ``rho X - X rho`` (``X = a1^dag a2 - a2^dag a1``)
    that moves the coherent mode off its state; both terms enter with the same
    sign, as Hermiticity of the left side requires.
    """
    a1, a2 = _ladders(state.dims)
    rho = state.matrix
    shifted = a1 - spec.alpha_red * np.eye(a1.shape[0])
    g1 = g1_operator(spec).matrix
    lhs = g1 @ rho + rho @ g1
    rhs = -(shifted.conj().T @ a2 @ rho + rho @ a2.conj().T @ shifted)
    return fock.interior_max(lhs - rhs, state.dims)


def sld_relation_residual(state: FockState, g: FockOperator, h: FockOperator) -> float:
    """Interior max-norm of ``(rho G + G rho)/2 - (-i[h, rho])``."""
    grho = g.matrix @ state.matrix
    lhs = 0.5 * (grho + grho.conj().T)
    return fock.interior_max(lhs - fock.phase_derivative(state, h).matrix, state.dims)


def estimator_moments(state: FockState, g: FockOperator, h: FockOperator) -> MeasurementResult:
    """Mean, variance, slope and sensitivity of ``g`` evaluated as a matrix."""
    mean = fock.expectation(state, g)
    variance = fock.qfi(state, g) - mean * mean
    slope = float(np.real(np.sum(g.matrix * fock.phase_derivative(state, h).matrix.T)))
    return MeasurementResult(mean, variance, _sensitivity(slope, variance), slope)


def _sensitivity(slope, variance):
    # a readout with no noise and no response carries no phase information
    if variance <= 1e-14 * max(1.0, slope * slope):
        if abs(slope) <= 1e-12:
            return 0.0
        raise EstimatorError("noiseless readout with nonzero response")
    return slope * slope / variance


# -- operational measurement ---------------------------------------------


def displacement_matrix(beta: float, d_out: int, d_in: int, margin: int = 60) -> np.ndarray:
    """Block ``<m|D(beta)|n>`` for ``m < d_out``, ``n < d_in``.

    Computed as a matrix exponential in a larger space so that the returned
    block is free of truncation error.
    """
    size = max(d_out, d_in) + margin
    a = fock.destroy(size)
    big = linalg.expm(beta * a.T - np.conj(beta) * a)
    return big[:d_out, :d_in]


def _parity(d):
    return np.diag((-1.0) ** np.arange(d))


def mode1_kraus(setup: MeasurementSetup, d_in: int, d_out: int) -> list[np.ndarray]:
    """Kraus operators (``d_out x d_in``) mapping mode 1 onto the displaced field ``b``.

    ``b = displacement - a1`` in the ideal limit. With a finite transmittance
    the signal passes a loss of fraction ``T`` first, which is exactly what a
    beam splitter with a coherent local oscillator in its other port does
    after tracing the oscillator out.
    """
    disp = displacement_matrix(setup.displacement, d_out, d_in)
    flip = _parity(d_in)
    if setup.transmittance is None:
        return [disp @ flip]
    return [disp @ k @ flip for k in fock.loss_kraus(d_in, setup.transmittance)]


def bs3_channel_explicit(
    rho1: FockState, beta_lo: float, transmittance: float, d_lo: int, d_out: int
) -> FockState:
    """Weak beam splitter with an explicit local-oscillator mode, oscillator traced out.

    The signal enters with a pi phase flip; the beam splitter maps the signal
    annihilator to ``sqrt(1-T) a1 + sqrt(T) a_lo``. The oscillator is the
    coherent state ``|beta_lo>`` on ``d_lo`` levels. Intended for validating
    :func:`mode1_kraus` at moderate amplitudes.
    """
    d1 = rho1.dims[0]
    flip = _parity(d1)
    signal = flip @ rho1.matrix @ flip
    lo = fock.coherent_state(beta_lo, d_lo, budget=1.0).matrix
    # photon number is conserved, so every output mode fits in ``size`` levels
    size = d1 + d_lo - 1
    if d_out > size:
        raise DomainError(f"d_out={d_out} exceeds the reachable {size} levels")
    joint = np.zeros((size, size, size, size), dtype=complex)
    joint[:d1, :d_lo, :d1, :d_lo] = np.einsum("ik,jl->ijkl", signal, lo)
    joint = joint.reshape(size * size, size * size)
    theta = math.asin(math.sqrt(transmittance))
    u = np.zeros((size * size, size * size))
    # the input holds at most size - 1 photons, so only complete blocks are needed
    for n in range(size):
        k = np.arange(n + 1)
        idx = k * size + (n - k)
        u[np.ix_(idx, idx)] = _bs_unitary(n, theta)
    out = (u @ joint @ u.T).reshape(size, size, size, size)
    reduced = np.einsum("ijkj->ik", out)
    return FockState(reduced[:d_out, :d_out], (d_out,), rho1.tail_mass)


def _output_cutoff(kraus_big, marginal, budget):
    diag = np.zeros(kraus_big[0].shape[0])
    for k in kraus_big:
        diag += np.real(np.einsum("ij,jk,ik->i", k, marginal, k.conj()))
    tail = np.cumsum(diag[::-1])[::-1]
    outside = max(1.0 - diag.sum(), 0.0)
    ok = np.nonzero(tail + outside < budget)[0]
    if ok.size == 0 or outside >= budget:
        return None
    return int(ok[0])


def _bs_unitary(n, theta):
    """Beam splitter ``exp(theta (a^dag b - b^dag a))`` on the ``n``-photon block, basis ``|k, n - k>``."""
    k = np.arange(n, dtype=float)
    m = np.zeros((n + 1, n + 1))
    # a^dag b raises the first-mode count by one inside the block
    m[np.arange(1, n + 1), np.arange(n)] = np.sqrt((k + 1.0) * (n - k))
    return linalg.expm(theta * (m - m.T))


def _bs4_unitary(n):
    """Balanced beam splitter on the ``n``-photon block."""
    return _bs_unitary(n, 0.25 * math.pi)


def _block_diagonal(lefts, kraus, a_vals, b_vals):
    block = np.zeros((a_vals.size, a_vals.size), dtype=complex)
    for left, k in zip(lefts, kraus):
        s = left[a_vals, b_vals][:, :, b_vals]
        block += np.einsum("imj,jm->ij", s, k[a_vals].conj())
    return block


def simulate_measurement(
    setup: MeasurementSetup,
    state: FockState,
    phi: float = 0.0,
    out_budget: float = 1e-14,
) -> MeasurementResult:
    """Run the local-oscillator measurement on a two-mode state at phase ``phi``.

    The state is phase shifted, mode 1 is sent through the displacement (or
    the finite-transmittance beam splitter), modes ``b`` and ``a2`` meet on a
    balanced beam splitter and the photon-number difference of its outputs is
    read out. Returns its mean, variance, the slope of the mean with respect to
    ``phi`` and the sensitivity ``slope**2 / variance``.

    The readout conserves total photon number, so only the diagonal
    photon-number blocks of the post-displacement state are built.
    """
    padded = fock.pad(state, 1)
    h = fock.generator_h(padded.dims)
    shifted = fock.phase_shifted(padded, h, phi)
    drho = fock.phase_derivative(shifted, h)
    d1, d2 = padded.dims

    marginal = fock.partial_trace(shifted, 0).matrix
    d_big = d1 + int(math.ceil((abs(setup.displacement) + math.sqrt(d1) + 6.0) ** 2))
    d_out = _output_cutoff(mode1_kraus(setup, d1, d_big), marginal, out_budget)
    if d_out is None:
        raise RuntimeError("displaced mode does not fit the output cutoff")
    d_out = max(d_out, 2)
    kraus = mode1_kraus(setup, d1, d_out)

    def left_products(matrix):
        t = matrix.reshape(d1, d2, d1, d2)
        return [np.tensordot(k, t, axes=([1], [0])) for k in kraus]

    rho_lefts = left_products(shifted.matrix)
    drho_lefts = left_products(drho.matrix)
    mean = second = slope = 0.0
    for n in range(d_out + d2 - 1):
        # the beam splitter mixes every split (a, n - a); the input only fills some of them
        a_vals = np.arange(max(0, n - d2 + 1), min(d_out - 1, n) + 1)
        b_vals = n - a_vals
        values = 2.0 * np.arange(n + 1) - n
        u = _bs4_unitary(n)[:, a_vals]
        rho_block = _block_diagonal(rho_lefts, kraus, a_vals, b_vals)
        drho_block = _block_diagonal(drho_lefts, kraus, a_vals, b_vals)
        probs = np.real(np.einsum("ij,jk,ik->i", u, rho_block, u.conj()))
        dprobs = np.real(np.einsum("ij,jk,ik->i", u, drho_block, u.conj()))
        mean += float(probs @ values)
        second += float(probs @ values**2)
        slope += float(dprobs @ values)
    variance = second - mean * mean
    return MeasurementResult(mean, variance, _sensitivity(slope, variance), slope)


def oracle_report(
    spec: InputSpec,
    budget: float = fock.DEFAULT_BUDGET,
    cutoff_cap: int | None = None,
) -> tuple[SensitivityReport, float]:
    """Brute-force quantum Fisher information plus the explicit estimator's performance.

    Returns the report (QFI from the numerically solved SLD, sensitivity of
    the explicit estimator, SLD residual) and the interior residual of the
    explicit estimator's SLD relation.
    """
    state = fock.lossy_input_state(spec, budget, cutoff_cap)
    padded = fock.pad(state, 1)
    h = fock.generator_h(padded.dims)
    solution = fock.sld(padded, fock.phase_derivative(padded, h))
    q = fock.qfi(padded, solution.operator)
    g = optimal_estimator(EstimatorSpec.from_input(spec, padded.dims))
    sensitivity = fock.estimator_sensitivity(padded, g, h)
    g_small = optimal_estimator(EstimatorSpec.from_input(spec, state.dims))
    residual = sld_relation_residual(state, g_small, fock.generator_h(state.dims))
    report = SensitivityReport(
        qfi=q,
        estimator_sensitivity=sensitivity,
        sld_residual=solution.residual,
        cutoff_used=state.cutoff,
        tail_mass=state.tail_mass,
        dims=state.dims,
    )
    return report, residual
