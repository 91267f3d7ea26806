"""Maximal intrinsic randomness and the measurements that (nearly) achieve it.

For a state with spectrum ``lambda`` in dimension ``d`` the maximal intrinsic
randomness over rank-one PVMs is ``log d - H_gamma(A)`` and over extremal
rank-one POVMs it is ``2 log d - H_gamma(A)``, where ``gamma = alpha/(2alpha-1)``
for the optimised family and ``gamma = 1/alpha`` for the fixed-conditioner
family.  A measurement attains the value exactly when it induces the uniform
distribution on ``rho^gamma / tr rho^gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entropy import (
    EntropyFamily,
    _check_sandwiched_order,
    cq_entropy_closed,
    down_gamma,
    is_one,
    renyi_entropy,
    up_gamma,
)
from .errors import BudgetExhausted, InvalidOrder, OutOfRange, TooManyOutcomes, Unsupported
from .quantum_core import (
    RANK_TOL,
    DensityMatrix,
    Measurement,
    make_measurement,
    measurement_to_json,
    pvm_from_basis,
    rank_one_povm,
    support_power,
)

EXTREMALITY_TOL = 1e-9
OUTSIDE_SPAN_TOL = 1e-9
MAX_HALVINGS = 200


def order_to_json(alpha: float):
    """JSON has no infinity; the limit tag is written as the string ``"inf"``."""
    return "inf" if math.isinf(alpha) else float(alpha)


@dataclass(frozen=True)
class ExtremalityCertificate:
    is_extremal: bool
    margin: float
    num_outcomes: int

    def to_json(self) -> dict:
        return {"is_extremal": self.is_extremal, "margin": self.margin, "num_outcomes": self.num_outcomes}


@dataclass(frozen=True)
class IntrinsicReport:
    """Closed-form maximal intrinsic randomness plus the measurement offered to achieve it.

    ``achieved_bits`` is the closed-form conditional entropy of ``measurement``;
    it differs from ``value_bits`` only for the perturbed POVMs used when
    ``d > 2``.
    """

    family: EntropyFamily
    alpha: float
    measurement_class: str
    value_bits: float
    measurement: Measurement | None
    residual: float
    achieved_bits: float | None = None
    certificate: ExtremalityCertificate | None = None

    def to_json(self, include_measurement: bool = True) -> dict:
        out = {
            "family": self.family.value,
            "alpha": order_to_json(self.alpha),
            "class": self.measurement_class,
            "value_bits": self.value_bits,
            "residual": self.residual,
        }
        if self.achieved_bits is not None:
            out["achieved_bits"] = self.achieved_bits
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_json()
        if include_measurement and self.measurement is not None:
            out["measurement"] = measurement_to_json(self.measurement)
        return out


def family_gamma(family, alpha: float) -> float:
    """Order ``gamma`` of the state entropy in the closed form, validating ``alpha``."""
    family = EntropyFamily.parse(family)
    if family is EntropyFamily.UP:
        if not (math.isinf(alpha) or is_one(alpha) or (alpha > 1 and np.isfinite(alpha))):
            raise InvalidOrder(f"the optimised family needs alpha > 1 or a limit tag, got {alpha!r}")
        return up_gamma(alpha)
    if family is EntropyFamily.DOWN:
        _check_sandwiched_order(alpha, allow_limits=True)
        return down_gamma(alpha)
    raise InvalidOrder("maximal intrinsic randomness is defined for the sandwiched families only")


def _pvm_value(rho: DensityMatrix, gamma: float) -> float:
    # rounding can push a zero value a few ulps below 0
    return max(0.0, math.log2(rho.dim) - renyi_entropy(rho.spectrum, gamma))


# --------------------------------------------------------------------------
# constructions


def mub_pvm(rho: DensityMatrix) -> Measurement:
    """Fourier transform of the eigenbasis: ``|f_y> = d^(-1/2) sum_k w^(ky) |v_k>``."""
    d = rho.dim
    k = np.arange(d)
    fourier = np.exp(2j * np.pi * np.outer(k, k) / d) / math.sqrt(d)
    return pvm_from_basis(rho.eigenbasis @ fourier)


def uniform_povm(rho: DensityMatrix) -> Measurement:
    """``d`` copies of ``(1/d) mub_pvm``: element ``d*x + y`` is ``|f_y><f_y| / d``."""
    d = rho.dim
    mub = mub_pvm(rho).elements
    return make_measurement(np.tile(mub / d, (d, 1, 1)), kind="povm")


def qubit_optimal_povm(lambda_max: float, t: float) -> Measurement:
    """Four-outcome extremal qubit POVM, written in the eigenbasis of the state.

    ``|psi_0> = |0> / (2 sqrt t)`` and
    ``|psi_k> = sqrt((4t-1)/(12t)) |0> + sqrt(1/3) e^(2 pi i k/3) |1>``.
    """
    for name, value in (("lambda_max", lambda_max), ("t", t)):
        if not (0.5 - 1e-12 <= value <= 1.0 + 1e-12):
            raise OutOfRange(f"{name} must lie in [1/2, 1], got {value!r}")
    t = min(max(t, 0.5), 1.0)
    a = math.sqrt((4 * t - 1) / (12 * t))
    b = math.sqrt(1 / 3)
    vectors = [[1 / (2 * math.sqrt(t)), 0.0]]
    vectors += [[a, b * np.exp(2j * np.pi * k / 3)] for k in range(1, 4)]
    return rank_one_povm(vectors, kind="povm")


def matched_t(rho: DensityMatrix, gamma: float) -> float:
    """``t = lambda^gamma / (lambda^gamma + (1-lambda)^gamma)`` for a qubit."""
    powered = support_power(rho.spectrum, gamma)
    return float(powered[0] / powered.sum())


def rotate_measurement(meas: Measurement, unitary) -> Measurement:
    u = np.asarray(unitary, dtype=complex)
    elements = np.einsum("ij,xjk,lk->xil", u, meas.elements, u.conj())
    return make_measurement(elements, kind=meas.kind)


def qubit_optimal_for(rho: DensityMatrix, gamma: float) -> Measurement:
    """:func:`qubit_optimal_povm` at the matched ``t``, rotated into the eigenbasis of ``rho``."""
    if rho.dim != 2:
        raise Unsupported("the explicit optimal POVM exists for qubits only")
    lam = float(min(max(rho.spectrum[0], 0.5), 1.0))
    return rotate_measurement(qubit_optimal_povm(lam, matched_t(rho, gamma)), rho.eigenbasis)


# --------------------------------------------------------------------------
# extremality


def hermitian_coordinates(elements) -> np.ndarray:
    """Real coordinates of Hermitian operators in an orthonormal Hilbert-Schmidt basis.

    Diagonal entries first, then ``sqrt 2 Re`` and ``sqrt 2 Im`` of the upper
    triangle; the map is an isometry onto ``R^(d^2)``.
    """
    arr = np.asarray(elements, dtype=complex)
    d = arr.shape[-1]
    iu = np.triu_indices(d, 1)
    diag = np.real(np.diagonal(arr, axis1=-2, axis2=-1))
    upper = arr[..., iu[0], iu[1]]
    return np.concatenate([diag, math.sqrt(2) * upper.real, math.sqrt(2) * upper.imag], axis=-1)


def hermitian_from_coordinates(coords, d: int) -> np.ndarray:
    c = np.asarray(coords, dtype=float)
    iu = np.triu_indices(d, 1)
    m = len(iu[0])
    out = np.diag(c[:d]).astype(complex)
    out[iu] = (c[d : d + m] + 1j * c[d + m :]) / math.sqrt(2)
    out[(iu[1], iu[0])] = np.conj(out[iu])
    return out


def _singular_values(elements) -> np.ndarray:
    coords = hermitian_coordinates(elements)
    return np.linalg.svd(coords, compute_uv=False)


def extremality_margin(meas: Measurement) -> ExtremalityCertificate:
    """Linear-independence certificate for a rank-one POVM.

    Raises
    ------
    Unsupported
        if some element has rank above one.
    """
    if not meas.is_rank_one:
        raise Unsupported("extremality is certified for rank-one POVMs only")
    n, d = meas.num_outcomes, meas.dim
    s = _singular_values(meas.elements)
    # more than d^2 vectors in a d^2-dimensional space are always dependent
    margin = 0.0 if n > d * d else float(s.min())
    return ExtremalityCertificate(margin > EXTREMALITY_TOL and n <= d * d, margin, n)


def refine_to_rank_one(meas: Measurement) -> Measurement:
    """Split every element into rank-one pieces ``lambda |phi><phi|``, recording ``(x, y)`` lineage."""
    if meas.is_rank_one:
        return make_measurement(meas.elements, kind=meas.kind, lineage=[(x, 0) for x in range(meas.num_outcomes)])
    pieces, lineage = [], []
    for x, element in enumerate(meas.elements):
        values, vectors = np.linalg.eigh(element)
        y = 0
        for lam, v in zip(values[::-1], vectors[:, ::-1].T):
            if lam > RANK_TOL:
                pieces.append(lam * np.outer(v, v.conj()))
                lineage.append((x, y))
                y += 1
    return make_measurement(pieces, lineage=lineage)


def coarse_grain_measurement(meas: Measurement) -> np.ndarray:
    """Sum refined elements back to their parents using the stored lineage."""
    if meas.lineage is None:
        return np.array(meas.elements)
    parents = 1 + max(x for x, _ in meas.lineage)
    out = np.zeros((parents, meas.dim, meas.dim), dtype=complex)
    for (x, _), element in zip(meas.lineage, meas.elements):
        out[x] += element
    return out


def _numeric_rank(vectors: np.ndarray) -> int:
    s = _singular_values(np.einsum("xi,xj->xij", vectors, vectors.conj()))
    return int(np.count_nonzero(s > EXTREMALITY_TOL))


def _renormalise(vectors: np.ndarray) -> np.ndarray:
    # G^(-1/2) |m_x> so that the projectors sum to the identity again
    g = vectors.T @ vectors.conj()
    values, basis = np.linalg.eigh(0.5 * (g + g.conj().T))
    inv_sqrt = (basis * values**-0.5) @ basis.conj().T
    return vectors @ inv_sqrt.T


def _max_distance(a: np.ndarray, b: np.ndarray) -> float:
    pa = np.einsum("xi,xj->xij", a, a.conj())
    pb = np.einsum("xi,xj->xij", b, b.conj())
    return float(max(np.linalg.norm(x - y, 2) for x, y in zip(pa, pb)))


def _outside_direction(vectors: np.ndarray) -> np.ndarray:
    """A unit vector whose projector lies outside the span of the current elements."""
    d = vectors.shape[1]
    coords = hermitian_coordinates(np.einsum("xi,xj->xij", vectors, vectors.conj()))
    _, s, vt = np.linalg.svd(coords, full_matrices=True)
    rank = int(np.count_nonzero(s > EXTREMALITY_TOL))
    span, complement = vt[:rank], vt[rank:]
    candidates = []
    for c in complement:
        values, eigvecs = np.linalg.eigh(hermitian_from_coordinates(c, d))
        for lam, w in zip(values, eigvecs.T):
            candidates.append((abs(lam), w))
    candidates.sort(key=lambda item: -item[0])
    for _, w in candidates:
        p = hermitian_coordinates(np.outer(w, w.conj()))
        if np.linalg.norm(p - span.T @ (span @ p)) >= OUTSIDE_SPAN_TOL:
            return w
    raise BudgetExhausted("no rank-one direction outside the span was found")


def extremal_perturbation(meas: Measurement, delta: float) -> Measurement:
    """Perturb a rank-one POVM into an extremal one within ``delta`` per element.

    Each step picks the element carrying the largest weight in a linear
    dependency, tilts it towards a direction ``|w>`` whose projector lies
    outside the current span, and restores completeness with ``G^(-1/2)``.
    The tilt ``eps`` is halved until the span grows and the accumulated
    distance stays within the step's share of ``delta``.

    Raises
    ------
    TooManyOutcomes
        if ``N > d^2``.
    BudgetExhausted
        if some step cannot be certified; ``.measurement`` holds the best
        iterate and ``.certificate`` its extremality certificate.
    """
    if not (delta > 0):
        raise OutOfRange(f"delta must be positive, got {delta!r}")
    n, d = meas.num_outcomes, meas.dim
    if n > d * d:
        raise TooManyOutcomes(f"{n} outcomes exceed d^2 = {d * d}")
    original = meas.vectors()
    if extremality_margin(meas).is_extremal:
        return meas
    current = original.copy()
    rank = _numeric_rank(current)
    steps = n - rank
    for step in range(1, steps + 1):
        budget = delta * step / steps
        coords = hermitian_coordinates(np.einsum("xi,xj->xij", current, current.conj()))
        _, _, vt = np.linalg.svd(coords.T)
        dependency = vt[-1]
        j = int(np.argmax(np.abs(dependency)))
        w = _outside_direction(current)
        eps = 0.5
        for _ in range(MAX_HALVINGS):
            trial = current.copy()
            norm = np.linalg.norm(current[j])
            trial[j] = math.sqrt(1 - eps) * current[j] + math.sqrt(eps) * norm * w
            trial = _renormalise(trial)
            new_rank = _numeric_rank(trial)
            if new_rank > rank and _max_distance(trial, original) <= budget:
                current, rank = trial, new_rank
                break
            eps /= 2
        else:
            best = rank_one_povm(current, kind="povm")
            raise BudgetExhausted(
                f"step {step} of {steps} could not raise the span within delta={delta}",
                measurement=best,
                certificate=extremality_margin(best),
            )
    result = rank_one_povm(current, kind="povm")
    certificate = extremality_margin(result)
    if not certificate.is_extremal:
        raise BudgetExhausted("perturbed POVM failed the extremality check", measurement=result, certificate=certificate)
    return result


# --------------------------------------------------------------------------
# maximal intrinsic randomness


def optimality_residual(rho: DensityMatrix, meas: Measurement, gamma: float) -> float:
    """``max_x |tr(rho^gamma M_x)/tr(rho^gamma) - 1/N|``; ``gamma = 0`` uses the support projector."""
    if not (gamma >= 0 and np.isfinite(gamma)):
        raise InvalidOrder(f"gamma must be finite and nonnegative, got {gamma!r}")
    powered = rho.power(gamma)
    weights = np.real(np.einsum("ij,xji->x", powered, meas.elements))
    return float(np.max(np.abs(weights / weights.sum() - 1.0 / meas.num_outcomes)))


def max_intrinsic_pvm(rho: DensityMatrix, family, alpha: float) -> IntrinsicReport:
    """``log d - H_gamma(A)``, attained by :func:`mub_pvm`."""
    family = EntropyFamily.parse(family)
    gamma = family_gamma(family, alpha)
    meas = mub_pvm(rho)
    return IntrinsicReport(
        family=family,
        alpha=alpha,
        measurement_class="pvm",
        value_bits=_pvm_value(rho, gamma),
        measurement=meas,
        residual=optimality_residual(rho, meas, gamma),
        achieved_bits=cq_entropy_closed(rho, meas, family, alpha),
    )


def max_intrinsic_povm(rho: DensityMatrix, family, alpha: float, delta: float = 1e-2) -> IntrinsicReport:
    """``2 log d - H_gamma(A)``.

    Qubits get the exact four-outcome POVM.  For ``d > 2`` no exact optimum is
    known, so the report carries an extremal perturbation of
    :func:`uniform_povm` together with its achieved value.
    """
    family = EntropyFamily.parse(family)
    gamma = family_gamma(family, alpha)
    value = _pvm_value(rho, gamma) + math.log2(rho.dim)
    if rho.dim == 1:
        meas = make_measurement(np.ones((1, 1, 1)), kind="pvm")
    elif rho.dim == 2:
        meas = qubit_optimal_for(rho, gamma)
    else:
        try:
            meas = extremal_perturbation(uniform_povm(rho), delta)
        except BudgetExhausted as exc:
            meas = exc.measurement
    return IntrinsicReport(
        family=family,
        alpha=alpha,
        measurement_class="povm",
        value_bits=value,
        measurement=meas,
        residual=optimality_residual(rho, meas, gamma),
        achieved_bits=cq_entropy_closed(rho, meas, family, alpha),
        certificate=extremality_margin(meas),
    )


def max_intrinsic(rho: DensityMatrix, family, alpha: float, measurement_class: str = "pvm") -> IntrinsicReport:
    if measurement_class == "pvm":
        return max_intrinsic_pvm(rho, family, alpha)
    if measurement_class == "povm":
        return max_intrinsic_povm(rho, family, alpha)
    raise Unsupported(f"unknown measurement class {measurement_class!r}")


def max_intrinsic_value(rho: DensityMatrix, family, alpha: float, measurement_class: str = "pvm") -> float:
    """Closed-form value only, without constructing a measurement."""
    gamma = family_gamma(family, alpha)
    value = _pvm_value(rho, gamma)
    if measurement_class == "povm":
        return value + math.log2(rho.dim)
    if measurement_class != "pvm":
        raise Unsupported(f"unknown measurement class {measurement_class!r}")
    return value
