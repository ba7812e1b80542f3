"""Truncated Fock-space simulation used as a brute-force oracle.

States and operators are dense matrices over one or two bosonic modes, each
with its own cutoff. Two-mode indices are mode-1-major: the basis state
``|n1, n2>`` sits at index ``n1 * d2 + n2``.

Ladder operators are exact on levels ``0 .. d-2``; anything that touches the
top level of a mode carries truncation error, so identity checks in this
package exclude that level (see :func:`interior_max`).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import CutoffError, DomainError, EstimatorError
from .gaussian import InputSpec

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 1e-10
# relative threshold below which eigenvalue pairs are treated as null space in the SLD
SLD_EPS = 1e-10
HERMITIAN_TOL = 1e-12
# cutoffs are searched up to this size when no cap is given
MAX_AUTO_CUTOFF = 4000

__all__ = [
    "FockState",
    "FockOperator",
    "SensitivityReport",
    "SLDSolution",
    "destroy",
    "annihilation",
    "coherent_tail",
    "squeezed_tail",
    "cutoff_for_coherent",
    "cutoff_for_squeezed",
    "coherent_state",
    "squeezed_vacuum",
    "apply_kraus",
    "loss_kraus",
    "loss_channel",
    "truncate",
    "pad",
    "two_mode_product",
    "partial_trace",
    "generator_h",
    "phase_shifted",
    "phase_derivative",
    "sld",
    "qfi",
    "expectation",
    "estimator_sensitivity",
    "interior_max",
    "lossy_input_state",
    "save_npz",
    "load_npz",
]


def _dims(dims) -> tuple[int, ...]:
    if isinstance(dims, (int, np.integer)):
        return (int(dims),)
    return tuple(int(d) for d in dims)


def _readonly(matrix, dims):
    arr = np.array(matrix, dtype=complex)
    size = math.prod(dims)
    if arr.shape != (size, size):
        raise ValueError(f"matrix shape {arr.shape} does not match dims {dims}")
    arr.setflags(write=False)
    return arr


def _hermitian_defect(arr):
    scale = max(1.0, float(np.max(np.abs(arr)))) if arr.size else 1.0
    return float(np.max(np.abs(arr - arr.conj().T))) / scale if arr.size else 0.0


@dataclass(frozen=True, eq=False)
class FockState:
    """Density matrix over one or two truncated modes.

    ``tail_mass`` is the probability weight discarded by the truncation.
    """

    matrix: np.ndarray
    dims: tuple[int, ...]
    tail_mass: float = 0.0

    def __post_init__(self):
        dims = _dims(self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", _readonly(self.matrix, dims))
        defect = _hermitian_defect(self.matrix)
        if defect > HERMITIAN_TOL:
            raise ValueError(f"density matrix not Hermitian (defect {defect:.3g})")

    @property
    def cutoff(self) -> int:
        """Largest per-mode cutoff."""
        return max(self.dims)

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.matrix)

    def photon_number(self, mode: int = 0) -> float:
        return expectation(self, number_operator(self.dims, mode))

    def validate(self, psd_tol: float = 1e-10) -> None:
        """Check trace and positivity against the stated tolerances."""
        if abs(self.trace - 1.0) > 10 * self.tail_mass + 1e-12:
            raise ValueError(f"trace {self.trace!r} off by more than the tail budget")
        low = float(self.eigh[0][0])
        if low < -psd_tol:
            raise ValueError(f"negative eigenvalue {low!r}")


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Operator on the same truncated space as a :class:`FockState`."""

    matrix: np.ndarray
    dims: tuple[int, ...]
    hermitian: bool | None = None

    def __post_init__(self):
        dims = _dims(self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", _readonly(self.matrix, dims))
        if self.hermitian is None:
            object.__setattr__(self, "hermitian", _hermitian_defect(self.matrix) <= HERMITIAN_TOL)

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.hermitian:
            raise ValueError("eigendecomposition requested for a non-Hermitian operator")
        return np.linalg.eigh(self.matrix)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        _same_dims(self.dims, other.dims)
        return FockOperator(self.matrix + other.matrix, self.dims)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        _same_dims(self.dims, other.dims)
        return FockOperator(self.matrix - other.matrix, self.dims)

    def scaled(self, factor: complex) -> "FockOperator":
        return FockOperator(factor * self.matrix, self.dims)

    @property
    def dag(self) -> "FockOperator":
        return FockOperator(self.matrix.conj().T, self.dims, self.hermitian)


class SLDSolution(NamedTuple):
    operator: FockOperator
    residual: float


@dataclass(frozen=True)
class SensitivityReport:
    """Oracle summary for one state.

    ``sld_residual`` is the max-norm mismatch of the SLD equation and
    ``cutoff_used`` the largest per-mode cutoff.
    """

    qfi: float
    estimator_sensitivity: float
    sld_residual: float
    cutoff_used: int
    tail_mass: float
    dims: tuple[int, ...] = ()


def _same_dims(a, b):
    if tuple(a) != tuple(b):
        raise ValueError(f"dimension mismatch: {a} vs {b}")


def destroy(d: int) -> np.ndarray:
    """Single-mode annihilation matrix with cutoff ``d``."""
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1)


def _embed(single: np.ndarray, dims: tuple[int, ...], mode: int) -> np.ndarray:
    out = np.ones((1, 1))
    for k, d in enumerate(dims):
        out = np.kron(out, single if k == mode else np.eye(d))
    return out


def annihilation(dims, mode: int = 0) -> FockOperator:
    dims = _dims(dims)
    return FockOperator(_embed(destroy(dims[mode]), dims, mode), dims, hermitian=False)


def number_operator(dims, mode: int = 0) -> FockOperator:
    dims = _dims(dims)
    n = np.diag(np.arange(dims[mode], dtype=float))
    return FockOperator(_embed(n, dims, mode), dims, hermitian=True)


# -- tails and cutoffs ----------------------------------------------------


def coherent_tail(alpha: float, d: int) -> float:
    """Poisson weight of levels ``>= d`` for a coherent state."""
    if alpha == 0.0:
        return 0.0
    return float(poisson.sf(d - 1, alpha * alpha))


def _squeezed_log_weights(r, kmax):
    k = np.arange(kmax + 1, dtype=float)
    return (
        2 * k * math.log(math.tanh(r))
        + gammaln(2 * k + 1)
        - 2 * gammaln(k + 1)
        - 2 * k * math.log(2.0)
        - math.log(math.cosh(r))
    )


def squeezed_tail(r: float, d: int) -> float:
    """Probability that squeezed vacuum holds ``>= d`` photons."""
    if r == 0.0:
        return 0.0
    k0 = (d + 1) // 2
    # ratio of successive even-level weights is below tanh(r)^2
    ratio = math.tanh(r) ** 2
    span = int(math.ceil(math.log(1e-22) / math.log(ratio))) + 1
    logs = _squeezed_log_weights(r, k0 + span)[k0:]
    return float(np.sum(np.exp(logs)))


def _smallest_cutoff(tail, budget, cap, what):
    limit = cap if cap is not None else MAX_AUTO_CUTOFF
    lo, hi = 1, limit
    if tail(hi) >= budget:
        raise CutoffError(
            f"{what}: tail mass {tail(hi):.3g} at cutoff {hi} exceeds budget {budget:.3g}"
        )
    while lo < hi:
        mid = (lo + hi) // 2
        if tail(mid) < budget:
            hi = mid
        else:
            lo = mid + 1
    return lo


def cutoff_for_coherent(alpha: float, budget: float = DEFAULT_BUDGET, cap: int | None = None) -> int:
    """Smallest cutoff leaving less than ``budget`` of a coherent state outside."""
    return _smallest_cutoff(lambda d: coherent_tail(alpha, d), budget, cap, f"coherent alpha={alpha}")


def cutoff_for_squeezed(r: float, budget: float = DEFAULT_BUDGET, cap: int | None = None) -> int:
    return _smallest_cutoff(lambda d: squeezed_tail(r, d), budget, cap, f"squeezed r={r}")


# -- input states ---------------------------------------------------------


def _pure(amps, tail):
    amps = amps / np.linalg.norm(amps)
    return FockState(np.outer(amps, amps.conj()), (amps.size,), tail)


def coherent_state(alpha: float, cutoff: int | None = None, budget: float = DEFAULT_BUDGET) -> FockState:
    """Coherent state ``|alpha>`` truncated to ``cutoff`` levels and renormalized."""
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    if cutoff is None:
        cutoff = cutoff_for_coherent(alpha, budget)
    tail = coherent_tail(alpha, cutoff)
    if tail >= budget:
        raise CutoffError(f"cutoff {cutoff} leaves tail mass {tail:.3g} >= {budget:.3g}")
    n = np.arange(cutoff, dtype=float)
    if alpha == 0.0:
        amps = (n == 0).astype(float)
    else:
        amps = np.exp(-alpha * alpha / 2 + n * math.log(alpha) - 0.5 * gammaln(n + 1))
    return _pure(amps, tail)


def squeezed_vacuum(r: float, cutoff: int | None = None, budget: float = DEFAULT_BUDGET) -> FockState:
    """Squeezed vacuum ``S(r)|0>`` with the ``x`` quadrature squeezed."""
    if r < 0:
        raise DomainError("r must be >= 0")
    if cutoff is None:
        cutoff = cutoff_for_squeezed(r, budget)
    tail = squeezed_tail(r, cutoff)
    if tail >= budget:
        raise CutoffError(f"cutoff {cutoff} leaves tail mass {tail:.3g} >= {budget:.3g}")
    amps = np.zeros(cutoff)
    if r == 0.0:
        amps[0] = 1.0
    else:
        kmax = (cutoff - 1) // 2
        logs = _squeezed_log_weights(r, kmax)
        k = np.arange(kmax + 1)
        amps[0::2] = (-1.0) ** k * np.exp(0.5 * logs)
    return _pure(amps, tail)


# -- channels and structural maps ----------------------------------------


def apply_kraus(state: FockState, kraus: Sequence[np.ndarray], mode: int = 0, tail_mass=None) -> FockState:
    """Apply ``rho -> sum_k K rho K^dag`` on one mode.

    Kraus matrices may be rectangular (``d_out x d_in``), which changes the
    cutoff of that mode.
    """
    dims = state.dims
    n = len(dims)
    tensor = state.matrix.reshape(dims + dims)
    out = None
    for k in kraus:
        t = np.moveaxis(np.tensordot(k, tensor, axes=([1], [mode])), 0, mode)
        t = np.moveaxis(np.tensordot(t, k.conj(), axes=([n + mode], [1])), -1, n + mode)
        out = t if out is None else out + t
    new_dims = list(dims)
    new_dims[mode] = kraus[0].shape[0]
    size = math.prod(new_dims)
    matrix = out.reshape(size, size)
    matrix = 0.5 * (matrix + matrix.conj().T)
    return FockState(matrix, tuple(new_dims), state.tail_mass if tail_mass is None else tail_mass)


def loss_kraus(d: int, sigma: float) -> list[np.ndarray]:
    """Damping Kraus operators with ``<n-k|K_k|n> = sqrt(C(n,k) (1-sigma)^(n-k) sigma^k)``."""
    if not 0.0 <= sigma <= 1.0:
        raise DomainError(f"loss fraction sigma={sigma!r} outside [0, 1]")
    if sigma == 0.0:
        return [np.eye(d)]
    n = np.arange(d)
    ops = []
    for k in range(d):
        m = n[k:]
        if sigma == 1.0:
            vals = (m == k).astype(float)
        else:
            logc = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1)
            vals = np.exp(0.5 * (logc + (m - k) * math.log1p(-sigma) + k * math.log(sigma)))
        op = np.zeros((d, d))
        op[m - k, m] = vals
        ops.append(op)
    return ops


def loss_channel(state: FockState, sigma: float, mode: int | None = None) -> FockState:
    """Photon loss of fraction ``sigma`` on one mode, or on every mode if ``mode`` is None."""
    modes = range(state.n_modes) if mode is None else [mode]
    for m in modes:
        state = apply_kraus(state, loss_kraus(state.dims[m], sigma), m)
    return state


def truncate(state: FockState, dims) -> FockState:
    """Keep the lowest ``dims`` levels per mode and renormalize.

    The discarded weight is added to ``tail_mass``.
    """
    dims = _dims(dims)
    if len(dims) != state.n_modes or any(a > b for a, b in zip(dims, state.dims)):
        raise ValueError(f"cannot truncate {state.dims} to {dims}")
    tensor = state.matrix.reshape(state.dims + state.dims)
    idx = tuple(slice(0, d) for d in dims) * 2
    size = math.prod(dims)
    kept = tensor[idx].reshape(size, size)
    weight = float(np.real(np.trace(kept)))
    lost = max(state.trace - weight, 0.0)
    return FockState(kept / weight, dims, state.tail_mass + lost)


def pad(state: FockState, extra: int = 1) -> FockState:
    """Embed into a space with ``extra`` empty levels added on every mode."""
    new_dims = tuple(d + extra for d in state.dims)
    tensor = np.zeros(new_dims + new_dims, dtype=complex)
    idx = tuple(slice(0, d) for d in state.dims) * 2
    tensor[idx] = state.matrix.reshape(state.dims + state.dims)
    size = math.prod(new_dims)
    return FockState(tensor.reshape(size, size), new_dims, state.tail_mass)


def two_mode_product(rho1: FockState, rho2: FockState) -> FockState:
    """Product state ``rho1 (x) rho2``; the cutoffs may differ."""
    if rho1.n_modes != 1 or rho2.n_modes != 1:
        raise ValueError("two_mode_product expects two single-mode states")
    tail = 1.0 - (1.0 - rho1.tail_mass) * (1.0 - rho2.tail_mass)
    return FockState(np.kron(rho1.matrix, rho2.matrix), rho1.dims + rho2.dims, tail)


def partial_trace(state: FockState, keep: int) -> FockState:
    """Reduced state of mode ``keep`` of a two-mode state."""
    if state.n_modes != 2:
        raise ValueError("partial_trace expects a two-mode state")
    t = state.matrix.reshape(state.dims + state.dims)
    reduced = np.einsum("ijkj->ik", t) if keep == 0 else np.einsum("ijil->jl", t)
    return FockState(reduced, (state.dims[keep],), state.tail_mass)


# -- phase shift, SLD and Fisher information ------------------------------


def generator_h(cutoff) -> FockOperator:
    """Phase-shift generator ``-i/2 (a1^dag a2 - a2^dag a1)``.

    ``cutoff`` is either a shared per-mode cutoff or a ``(d1, d2)`` pair.
    """
    dims = _dims(cutoff)
    if len(dims) == 1:
        dims = dims * 2
    a1 = annihilation(dims, 0).matrix
    a2 = annihilation(dims, 1).matrix
    h = -0.5j * (a1.conj().T @ a2 - a2.conj().T @ a1)
    return FockOperator(0.5 * (h + h.conj().T), dims, hermitian=True)


def phase_shifted(state: FockState, h: FockOperator, phi: float) -> FockState:
    """``exp(-i phi h) rho exp(i phi h)``."""
    _same_dims(state.dims, h.dims)
    if phi == 0.0:
        return state
    w, v = h.eigh
    u = (v * np.exp(-1j * phi * w)) @ v.conj().T
    out = u @ state.matrix @ u.conj().T
    return FockState(0.5 * (out + out.conj().T), state.dims, state.tail_mass)


def phase_derivative(state: FockState, h: FockOperator) -> FockOperator:
    """Exact phase derivative ``-i [h, rho]``."""
    _same_dims(state.dims, h.dims)
    hr = h.matrix @ state.matrix
    # -i (h rho - rho h) with rho h = (h rho)^dag for Hermitian h, rho
    return FockOperator(-1j * (hr - hr.conj().T), state.dims, hermitian=True)


def sld(state: FockState, drho: FockOperator, rel_eps: float = SLD_EPS) -> SLDSolution:
    """Solve ``drho = (rho G + G rho) / 2`` for the symmetric logarithmic derivative.

    Works in the eigenbasis of ``rho``: ``G_ij = 2 drho_ij / (p_i + p_j)``.
    Pairs with ``p_i + p_j <= rel_eps * max(p)`` get ``G_ij = 0``, which is
    the minimal-norm choice on the null space. Returns the operator and the
    max-norm residual of the defining equation.
    """
    _same_dims(state.dims, drho.dims)
    d = drho.matrix
    scale = max(1.0, float(np.max(np.abs(d))))
    if _hermitian_defect(d) > HERMITIAN_TOL:
        raise ValueError("phase derivative is not Hermitian")
    if abs(np.trace(d)) > 1e-10 * scale:
        raise ValueError("phase derivative is not traceless")
    p, v = state.eigh
    sums = p[:, None] + p[None, :]
    keep = sums > rel_eps * p.max()
    d_eig = v.conj().T @ d @ v
    g_eig = np.zeros_like(d_eig)
    g_eig[keep] = 2.0 * d_eig[keep] / sums[keep]
    g = v @ g_eig @ v.conj().T
    g = 0.5 * (g + g.conj().T)
    rho = state.matrix
    grho = g @ rho
    residual = float(np.max(np.abs(0.5 * (grho + grho.conj().T) - d)))
    return SLDSolution(FockOperator(g, state.dims, hermitian=True), residual)


def qfi(state: FockState, g: FockOperator) -> float:
    """``Tr{G^2 rho}``; equals the quantum Fisher information when ``G`` is the SLD."""
    _same_dims(state.dims, g.dims)
    grho = g.matrix @ state.matrix
    return float(np.real(np.sum(grho * g.matrix.T)))


def expectation(state: FockState, op: FockOperator) -> complex | float:
    _same_dims(state.dims, op.dims)
    val = np.sum(op.matrix * state.matrix.T)
    return float(np.real(val)) if op.hermitian else complex(val)


def estimator_sensitivity(state: FockState, a: FockOperator, h: FockOperator) -> float:
    """Inverse phase variance ``|d<A>/dphi|^2 / <(A - <A>)^2>`` at the given state.

    ``A`` is re-centred so that its mean vanishes; the shift is logged at
    debug level. Raises :class:`EstimatorError` for zero-variance estimators.
    """
    if not a.hermitian:
        raise ValueError("estimator must be Hermitian")
    mean = expectation(state, a)
    second = qfi(state, a)
    variance = second - mean * mean
    if mean != 0.0:
        logger.debug("re-centred estimator by %.6g", mean)
    if variance <= 1e-12 * max(second, 1e-300):
        raise EstimatorError("estimator has zero variance on this state")
    # re-centring does not change the slope: the derivative is traceless
    slope = float(np.real(np.sum(a.matrix * phase_derivative(state, h).matrix.T)))
    return slope * slope / variance


def interior_max(matrix: np.ndarray, dims, margin: int = 1) -> float:
    """Max absolute entry after discarding the top ``margin`` levels of every mode."""
    dims = _dims(dims)
    t = np.asarray(matrix).reshape(dims + dims)
    idx = tuple(slice(0, d - margin) for d in dims) * 2
    block = t[idx]
    return float(np.max(np.abs(block))) if block.size else 0.0


# -- lossy input states ---------------------------------------------------


def lossy_input_state(
    spec: InputSpec,
    budget: float = DEFAULT_BUDGET,
    cutoff_cap: int | None = None,
    dims=None,
    oversample_budget: float = 1e-18,
    min_cutoff: int = 3,
) -> FockState:
    """Two-mode state of coherent light and squeezed vacuum after equal loss.

    Each mode gets the smallest cutoff whose pre-loss tail is below
    ``budget`` (or the explicit ``dims``), but never fewer than
    ``min_cutoff`` levels so that interior checks have something to look at. Loss is applied in an oversampled
    space (tail below ``oversample_budget``) and the result truncated, so the
    kept block matches the exact lossy state.
    """
    if dims is None:
        d1 = max(min_cutoff, cutoff_for_coherent(spec.alpha, budget, cutoff_cap))
        d2 = max(min_cutoff, cutoff_for_squeezed(spec.r, budget, cutoff_cap))
    else:
        d1, d2 = _dims(dims)
    big1 = max(d1, cutoff_for_coherent(spec.alpha, oversample_budget))
    big2 = max(d2, cutoff_for_squeezed(spec.r, oversample_budget))
    modes = []
    for make, amp, d, big in (
        (coherent_state, spec.alpha, d1, big1),
        (squeezed_vacuum, spec.r, d2, big2),
    ):
        raw = make(amp, big, budget=1.0)
        lossy = loss_channel(raw, spec.sigma)
        modes.append(truncate(lossy, (d,)))
    return two_mode_product(*modes)


def save_npz(path, obj: FockState | FockOperator) -> None:
    """Dump a state or operator as ``.npz`` (complex128 matrix plus dims)."""
    tail = getattr(obj, "tail_mass", np.nan)
    np.savez(path, matrix=np.asarray(obj.matrix), dims=np.asarray(obj.dims), tail_mass=tail)


def load_npz(path) -> tuple[np.ndarray, tuple[int, ...]]:
    with np.load(path) as data:
        return data["matrix"].copy(), tuple(int(d) for d in data["dims"])
