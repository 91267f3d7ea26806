"""Rényi entropies, the sandwiched divergence and conditional entropies of cq states.

Orders are plain floats.  ``0.0`` and ``math.inf`` are the exact limit tags and
any order within ``LIMIT_TOL`` of 1 is evaluated with the von Neumann formula.
All logarithms are base 2.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, InvalidDistribution, InvalidOrder, NotRankOne, SupportViolation
from .quantum_core import (
    RANK_TOL,
    CqState,
    DensityMatrix,
    Measurement,
    hermitian_part,
    support_power,
)

LIMIT_TOL = 1e-9
SUPPORT_LEAK_TOL = 1e-9


class EntropyFamily(str, Enum):
    UP = "sandwiched_up"
    DOWN = "sandwiched_down"
    PETZ_DOWN = "petz_down"

    @classmethod
    def parse(cls, value) -> "EntropyFamily":
        if isinstance(value, cls):
            return value
        aliases = {"up": cls.UP, "down": cls.DOWN, "petz": cls.PETZ_DOWN}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise InvalidOrder(f"unknown entropy family {value!r}") from None


def is_one(alpha: float) -> bool:
    return abs(alpha - 1.0) < LIMIT_TOL


def _check_sandwiched_order(alpha: float, allow_limits: bool = False) -> None:
    if allow_limits and (math.isinf(alpha) or is_one(alpha)):
        return
    if not (alpha >= 0.5 and np.isfinite(alpha)) or is_one(alpha):
        raise InvalidOrder(f"sandwiched quantities need alpha in [1/2, 1) U (1, inf), got {alpha!r}")


def up_gamma(alpha: float) -> float:
    """Exponent ``alpha / (2 alpha - 1)`` governing the optimised family."""
    if math.isinf(alpha):
        return 0.5
    if is_one(alpha):
        return 1.0
    return alpha / (2 * alpha - 1)


def down_gamma(alpha: float) -> float:
    """Exponent ``1 / alpha`` governing the fixed-conditioner family."""
    if math.isinf(alpha):
        return 0.0
    if is_one(alpha):
        return 1.0
    return 1.0 / alpha


def renyi_entropy(spectrum, alpha: float) -> float:
    """Rényi entropy in bits of a probability vector or density spectrum.

    Raises
    ------
    InvalidOrder
        for negative or NaN orders.
    """
    p = np.asarray(spectrum, dtype=float).ravel()
    if p.size == 0 or np.min(p) < -1e-9 or abs(p.sum() - 1.0) > 1e-8:
        raise InvalidDistribution("spectrum must be a probability vector")
    if not (alpha >= 0):
        raise InvalidOrder(f"Rényi order must be nonnegative, got {alpha!r}")
    q = p[p > RANK_TOL]
    if alpha == 0:
        return math.log2(q.size)
    if math.isinf(alpha):
        return -math.log2(q.max())
    if is_one(alpha):
        return float(-np.sum(q * np.log2(q)))
    # factor out the largest weight so huge orders do not underflow
    top = q.max()
    log_sum = alpha * math.log2(top) + math.log2(np.sum((q / top) ** alpha))
    return log_sum / (1.0 - alpha)


def _spectral(sigma):
    if isinstance(sigma, tuple):
        values, vectors = sigma
        return np.asarray(values, dtype=float), np.asarray(vectors, dtype=complex)
    if isinstance(sigma, DensityMatrix):
        return sigma.spectrum, sigma.eigenbasis
    values, vectors = np.linalg.eigh(hermitian_part(np.asarray(sigma, dtype=complex)))
    return values, vectors


def sandwiched_quasi(rho, sigma, alpha: float, support_tol: float = 1e-12) -> tuple[float, float]:
    """Return ``(tr[(s^g rho s^g)^alpha], tr rho)`` with ``g = (1-alpha)/(2 alpha)``.

    ``sigma`` may be a matrix, a :class:`DensityMatrix` or an explicit
    ``(eigenvalues, eigenvectors)`` pair; the latter avoids re-diagonalising a
    conditioner whose small eigenvalues are known more accurately than an
    eigensolver would recover them.
    """
    rho = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    values, vectors = _spectral(sigma)
    if vectors.shape[0] != rho.shape[0]:
        raise SupportViolation("rho and sigma act on different dimensions")
    trace = float(np.real(np.trace(rho)))
    if trace <= 0:
        raise SupportViolation("rho must be nonzero")
    keep = values > support_tol * max(values.max(), 0.0)
    v = vectors[:, keep]
    compressed = hermitian_part(v.conj().T @ rho @ v)
    if trace - float(np.real(np.trace(compressed))) > SUPPORT_LEAK_TOL:
        raise SupportViolation("rho is not supported on the support of sigma")
    scale = values[keep] ** ((1 - alpha) / (2 * alpha))
    inner = hermitian_part(scale[:, None] * compressed * scale[None, :])
    mu = np.linalg.eigvalsh(inner)
    # eigenvalues at the solver's noise floor would be inflated by alpha < 1
    mu = mu[mu > mu.size * np.finfo(float).eps * max(mu.max(), 0.0)]
    return float(np.sum(mu**alpha)), trace


def sandwiched_divergence(rho, sigma, alpha: float, support_tol: float = 1e-12) -> float:
    """Sandwiched Rényi divergence in bits for ``alpha`` in ``[1/2, 1) U (1, inf)``.

    Both arguments are compressed to the support of ``sigma``; weight of
    ``rho`` outside it beyond 1e-9 raises :class:`SupportViolation`.
    """
    _check_sandwiched_order(alpha)
    quasi, trace = sandwiched_quasi(rho, sigma, alpha, support_tol)
    return math.log2(quasi / trace) / (alpha - 1)


def _require_rank_one(meas: Measurement, rho: DensityMatrix) -> None:
    if not meas.is_rank_one:
        raise NotRankOne("closed forms need a rank-one measurement")
    if meas.dim != rho.dim:
        raise DimensionMismatch("measurement and state dimensions differ")


def _weights(rho: DensityMatrix, meas: Measurement, gamma: float) -> np.ndarray:
    # tr(rho^gamma M_x) for every x
    power = rho.power(gamma)
    return np.clip(np.real(np.einsum("ij,xji->x", power, meas.elements)), 0.0, None)


def cq_divergence_beta(rho_a: DensityMatrix, meas: Measurement, alpha: float, beta: float) -> float:
    """Divergence of a rank-one-induced cq state from ``I (x) rho_E^beta / tr``.

    ``(1/(alpha-1)) log[ sum_x tr(rho^(beta(1-alpha)/alpha + 1) M_x)^alpha
    / tr(rho^beta)^(1-alpha) ]``
    """
    _check_sandwiched_order(alpha)
    if not (beta > 0 and np.isfinite(beta)):
        raise InvalidOrder(f"beta must be positive, got {beta!r}")
    _require_rank_one(meas, rho_a)
    t = _weights(rho_a, meas, beta * (1 - alpha) / alpha + 1)
    norm = float(np.sum(support_power(rho_a.spectrum, beta)))
    log_num = math.log2(np.sum(t**alpha))
    return (log_num - (1 - alpha) * math.log2(norm)) / (alpha - 1)


def induced_distribution(rho_a: DensityMatrix, meas: Measurement, gamma: float) -> np.ndarray:
    """``p(x) = tr(rho^gamma M_x) / tr(rho^gamma)``; ``gamma = 0`` uses the support projector."""
    t = _weights(rho_a, meas, gamma)
    return t / t.sum()


def cq_down_entropy_closed(rho_a: DensityMatrix, meas: Measurement, alpha: float) -> float:
    """``H_alpha(X') - H_{1/alpha}(A)`` for the cq state of a rank-one measurement."""
    _check_sandwiched_order(alpha, allow_limits=True)
    _require_rank_one(meas, rho_a)
    gamma = down_gamma(alpha)
    p = induced_distribution(rho_a, meas, gamma)
    return renyi_entropy(p, alpha) - renyi_entropy(rho_a.spectrum, gamma)


def cq_up_entropy_closed(rho_a: DensityMatrix, meas: Measurement, alpha: float) -> float:
    """``H_alpha(X'') - H_{alpha/(2 alpha - 1)}(A)`` for ``alpha > 1``.

    This is exactly ``-cq_divergence_beta(beta=alpha/(2 alpha - 1))``, the
    conditioned entropy at the candidate ``sigma_E = rho_E^beta / tr``, hence a
    lower bound on the optimised entropy.  The duality bound
    ``cq_down_entropy_closed(2 - 1/alpha)`` equals
    ``H_{2-1/alpha}(X'') - H_{alpha/(2 alpha - 1)}(A)``, so the two agree, and
    the value is the optimised entropy, whenever ``X''`` is uniform.  That is
    the case for every maximising measurement; see :func:`cq_up_entropy_bracket`
    for a sound enclosure elsewhere.
    """
    if not (math.isinf(alpha) or is_one(alpha) or (alpha > 1 and np.isfinite(alpha))):
        raise InvalidOrder(f"the optimised entropy needs alpha > 1, got {alpha!r}")
    _require_rank_one(meas, rho_a)
    gamma = up_gamma(alpha)
    p = induced_distribution(rho_a, meas, gamma)
    return renyi_entropy(p, alpha) - renyi_entropy(rho_a.spectrum, gamma)


def cq_up_entropy_bracket(rho_a: DensityMatrix, meas: Measurement, alpha: float) -> tuple[float, float]:
    """Certified ``(lower, upper)`` enclosure of the optimised entropy for ``alpha > 1``.

    ``lower`` is the better of the two feasible conditioners ``rho_E^beta`` and
    ``rho_E``; ``upper`` is the fixed-conditioner entropy at order ``2 - 1/alpha``.
    """
    if not (alpha > 1 and np.isfinite(alpha)) or is_one(alpha):
        raise InvalidOrder(f"the bracket needs finite alpha > 1, got {alpha!r}")
    lower = max(cq_up_entropy_closed(rho_a, meas, alpha), cq_down_entropy_closed(rho_a, meas, alpha))
    upper = cq_down_entropy_closed(rho_a, meas, 2 - 1 / alpha)
    return lower, upper


def cq_entropy_closed(rho_a: DensityMatrix, meas: Measurement, family, alpha: float) -> float:
    family = EntropyFamily.parse(family)
    if family is EntropyFamily.UP:
        return cq_up_entropy_closed(rho_a, meas, alpha)
    if family is EntropyFamily.DOWN:
        return cq_down_entropy_closed(rho_a, meas, alpha)
    raise InvalidOrder("no closed form for the Petz family")


def cq_conditioned_entropy(cq: CqState, alpha: float, sigma_e, support_tol: float = 1e-12) -> float:
    """``-D_alpha(rho_XE || I_X (x) sigma_E)`` evaluated on the explicit block matrix.

    ``sigma_e`` may be given in spectral form ``(values, vectors)``; pass
    ``support_tol=0`` when those eigenvalues are exact and very small.
    """
    values, vectors = _spectral(sigma_e)
    n = cq.num_outcomes
    big_values = np.tile(values, n)
    big_vectors = np.kron(np.eye(n), vectors)
    return -sandwiched_divergence(cq.to_matrix(), (big_values, big_vectors), alpha, support_tol)


def cq_down_entropy_numeric(cq: CqState, alpha: float) -> float:
    """``-D_alpha(rho_XE || I_X (x) rho_E)`` by direct matrix evaluation."""
    _check_sandwiched_order(alpha)
    return cq_conditioned_entropy(cq, alpha, cq.rho_e())


def petz_conditional_entropy(cq: CqState, alpha: float) -> float:
    """``(1/(1-alpha)) log sum_x tr(rho_{E,x}^alpha rho_E^(1-alpha))`` for alpha in (1, 2]."""
    if not (1 < alpha <= 2) or is_one(alpha):
        raise InvalidOrder(f"Petz conditional entropy is implemented for alpha in (1, 2], got {alpha!r}")
    values, vectors = np.linalg.eigh(hermitian_part(cq.rho_e()))
    cond = (vectors * support_power(values, 1 - alpha, tol=1e-12 * values.max())) @ vectors.conj().T
    total = 0.0
    for block in cq.blocks:
        bv, bw = np.linalg.eigh(hermitian_part(block))
        powered = (bw * np.clip(bv, 0.0, None) ** alpha) @ bw.conj().T
        total += float(np.real(np.trace(powered @ cond)))
    return math.log2(total) / (1 - alpha)
