"""Dense Hermitian linear algebra for small quantum systems.

Density matrices, measurements, purifications, Naimark dilations, the
classical-quantum states produced by measuring one half of a pure state,
outcome sampling and the trace distance.  Everything here is double
precision and meant for dimensions up to a few dozen.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    InvalidDistribution,
    InvalidOrder,
    NotAMeasurement,
    NotHermitian,
    NotProjective,
    NotRankOne,
    NotPSD,
    QRandError,
    TraceNotOne,
)

# eigenvalues at or below this are treated as exact zeros (rank, 0**p := 0)
RANK_TOL = 1e-10


def _as_complex_square(matrix) -> np.ndarray:
    arr = np.asarray(matrix, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise QRandError("matrix has non-finite entries")
    return arr


def hermitian_part(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.conj().T)


def spectral_function(values: np.ndarray, vectors: np.ndarray, fvalues: np.ndarray) -> np.ndarray:
    """Return ``V diag(fvalues) V^dagger``."""
    return (vectors * fvalues) @ vectors.conj().T


def support_power(values: np.ndarray, p: float, tol: float = RANK_TOL) -> np.ndarray:
    """Elementwise ``values**p`` on the support, zero elsewhere.

    Any real ``p`` is allowed, including negative ones (pseudo-inverse powers)
    and ``p == 0`` (support projector).
    """
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    keep = values > tol
    out[keep] = values[keep] ** p
    return out


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated quantum state with its cached eigendecomposition.

    ``spectrum`` is sorted in descending order and ``eigenbasis[:, k]`` is the
    eigenvector belonging to ``spectrum[k]``.
    """

    matrix: np.ndarray
    spectrum: np.ndarray
    eigenbasis: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.spectrum > RANK_TOL))

    def power(self, p: float) -> np.ndarray:
        """``rho**p`` on the support of ``rho`` for any real ``p``."""
        return spectral_function(self.spectrum, self.eigenbasis, support_power(self.spectrum, p))

    def support_projector(self) -> np.ndarray:
        return self.power(0.0)


def validate_density(matrix, tol: float = 1e-10) -> DensityMatrix:
    """Check that ``matrix`` is a density matrix and cache its spectrum.

    Eigenvalues in ``[-tol*d, 0)`` are clipped to zero and the spectrum is
    renormalised; anything more negative raises :class:`NotPSD`.

    Raises
    ------
    NotHermitian, NotPSD, TraceNotOne, DimensionMismatch
    """
    arr = _as_complex_square(matrix)
    d = arr.shape[0]
    if np.max(np.abs(arr - arr.conj().T)) > tol:
        raise NotHermitian("matrix is not Hermitian")
    arr = hermitian_part(arr)
    values, vectors = np.linalg.eigh(arr)
    if values[0] < -tol * d:
        raise NotPSD(f"smallest eigenvalue {values[0]:.3e} is negative")
    total = float(np.sum(values))
    if abs(total - 1.0) > 1e-8:
        raise TraceNotOne(f"trace is {total!r}")
    clipped = values < 0
    values = np.where(clipped, 0.0, values)
    values = values / np.sum(values)
    order = np.argsort(values, kind="stable")[::-1]
    values = values[order]
    vectors = vectors[:, order]
    if np.any(clipped):
        arr = hermitian_part(spectral_function(values, vectors, values))
    else:
        arr = arr / total
    for a in (arr, values, vectors):
        a.setflags(write=False)
    return DensityMatrix(arr, values, vectors)


def matrix_power(rho: DensityMatrix, beta: float) -> np.ndarray:
    """``sum_k lambda_k**beta |v_k><v_k|`` with ``0**beta := 0``."""
    if not (np.isfinite(beta) and beta > 0):
        raise InvalidOrder(f"matrix_power needs a finite positive exponent, got {beta!r}")
    return rho.power(beta)


def maximally_mixed(d: int) -> DensityMatrix:
    return validate_density(np.eye(d) / d)


def pure_density(vector) -> DensityMatrix:
    v = np.asarray(vector, dtype=complex)
    v = v / np.linalg.norm(v)
    return validate_density(np.outer(v, v.conj()))


# --------------------------------------------------------------------------
# measurements


@dataclass(frozen=True, eq=False)
class Measurement:
    """An ordered POVM ``{M_x}`` stored as an ``(N, d, d)`` array.

    ``lineage`` is set by :func:`qrandbench.intrinsic.refine_to_rank_one` and
    maps each element back to ``(x, y)`` of the measurement it was split from.
    """

    elements: np.ndarray
    kind: str
    ranks: tuple[int, ...]
    lineage: tuple[tuple[int, int], ...] | None = None

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    @property
    def num_outcomes(self) -> int:
        return self.elements.shape[0]

    @property
    def is_rank_one(self) -> bool:
        return all(r == 1 for r in self.ranks)

    def vectors(self) -> np.ndarray:
        """Rows ``m_x`` with ``M_x = |m_x><m_x|`` (rank-one measurements only)."""
        if not self.is_rank_one:
            raise NotRankOne("measurement has elements of rank > 1")
        out = np.empty((self.num_outcomes, self.dim), dtype=complex)
        for x, element in enumerate(self.elements):
            values, vectors = np.linalg.eigh(element)
            out[x] = np.sqrt(max(values[-1], 0.0)) * vectors[:, -1]
        return out


def _is_projective(elements: np.ndarray, tol: float) -> bool:
    for x, mx in enumerate(elements):
        for y, my in enumerate(elements):
            target = mx if x == y else 0.0
            if np.max(np.abs(mx @ my - target)) > tol:
                return False
    return True


def make_measurement(
    elements, kind: str | None = None, tol: float = 1e-9, lineage=None
) -> Measurement:
    """Validate a list of operators as a POVM.

    ``kind=None`` tags the result ``"pvm"`` when the elements happen to be
    orthogonal projectors, otherwise ``"povm"``.
    """
    arr = np.asarray(elements, dtype=complex)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2] or arr.shape[0] == 0:
        raise NotAMeasurement(f"expected an (N, d, d) stack of operators, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NotAMeasurement("measurement has non-finite entries")
    d = arr.shape[1]
    if np.max(np.abs(arr - np.conj(np.swapaxes(arr, 1, 2)))) > tol:
        raise NotAMeasurement("measurement elements are not Hermitian")
    arr = 0.5 * (arr + np.conj(np.swapaxes(arr, 1, 2)))
    eigs = np.linalg.eigvalsh(arr)
    if np.min(eigs) < -tol:
        raise NotAMeasurement("measurement element is not positive semidefinite")
    if np.max(np.abs(arr.sum(axis=0) - np.eye(d))) > tol:
        raise NotAMeasurement("measurement elements do not sum to the identity")
    projective = _is_projective(arr, tol)
    if kind is None:
        kind = "pvm" if projective else "povm"
    elif kind == "pvm" and not projective:
        raise NotProjective("elements are not orthogonal projectors")
    elif kind not in ("pvm", "povm"):
        raise QRandError(f"unknown measurement kind {kind!r}")
    ranks = tuple(int(np.count_nonzero(e > RANK_TOL)) for e in eigs)
    arr.setflags(write=False)
    if lineage is not None:
        lineage = tuple((int(a), int(b)) for a, b in lineage)
    return Measurement(arr, kind, ranks, lineage)


def pvm_from_basis(basis) -> Measurement:
    """Rank-one PVM onto the columns of a unitary matrix."""
    u = np.asarray(basis, dtype=complex)
    elements = np.einsum("ix,jx->xij", u, u.conj())
    return make_measurement(elements, kind="pvm")


def computational_pvm(d: int) -> Measurement:
    return pvm_from_basis(np.eye(d))


def rank_one_povm(vectors, kind: str | None = None, tol: float = 1e-9) -> Measurement:
    """POVM ``{|m_x><m_x|}`` from the rows of ``vectors``."""
    v = np.asarray(vectors, dtype=complex)
    return make_measurement(np.einsum("xi,xj->xij", v, v.conj()), kind=kind, tol=tol)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary: QR of a complex Ginibre matrix with phase-fixed R."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random state ``G G^dagger / tr`` with ``G`` a ``d x rank`` Ginibre matrix."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    m = g @ g.conj().T
    return validate_density(m / np.trace(m).real)


# --------------------------------------------------------------------------
# pure states, partial traces, purification


@dataclass(frozen=True, eq=False)
class PureState:
    """A unit vector on a tensor product of factors of sizes ``dims``.

    Amplitudes are ordered with the first factor most significant.  The
    bipartite case ``(d_A, d_E)`` is the usual purification; three factors
    ``(d_A, d_B, d_E)`` carry a measurement-device system in between.
    """

    dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        if int(np.prod(self.dims)) != self.amplitudes.size:
            raise DimensionMismatch("amplitude count does not match dims")
        if abs(np.linalg.norm(self.amplitudes) - 1.0) > 1e-12:
            raise QRandError("pure state is not normalised")

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


# kept for readers looking for the two-factor name
PureBipartiteState = PureState


def canonical_purification(rho: DensityMatrix) -> PureState:
    """``|rho> = sum_k sqrt(rho)|k> (x) |k>`` on ``A (x) E`` with ``dim E = dim A``."""
    root = rho.power(0.5)
    amps = np.ascontiguousarray(root).reshape(-1)
    amps = amps / np.linalg.norm(amps)
    amps.setflags(write=False)
    return PureState((rho.dim, rho.dim), amps)


def partial_trace(op, dims: Sequence[int], keep="first") -> np.ndarray:
    """Trace out every factor of ``op`` not listed in ``keep``.

    ``keep`` is ``"first"``/``"second"`` for bipartite operators or an
    iterable of factor indices.
    """
    arr = np.asarray(op, dtype=complex)
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    if arr.shape != (total, total):
        raise DimensionMismatch(f"operator shape {arr.shape} does not match dims {dims}")
    if keep == "first":
        keep_idx = [0]
    elif keep == "second":
        keep_idx = [1]
    else:
        keep_idx = sorted(int(k) for k in keep)
    n = len(dims)
    if any(k < 0 or k >= n for k in keep_idx):
        raise DimensionMismatch(f"cannot keep factors {keep_idx} of {n}")
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = list(letters[n : 2 * n])
    for i in range(n):
        if i not in keep_idx:
            cols[i] = rows[i]
    out = "".join(rows[i] for i in keep_idx) + "".join(cols[i] for i in keep_idx)
    subscripts = "".join(rows) + "".join(cols) + "->" + out
    reduced = np.einsum(subscripts, arr.reshape(dims + dims))
    kept = int(np.prod([dims[i] for i in keep_idx]))
    return reduced.reshape(kept, kept)


# --------------------------------------------------------------------------
# classical-quantum states


@dataclass(frozen=True, eq=False)
class CqState:
    """``sum_x |x><x| (x) rho_{E,x}`` stored as an ``(N, d_E, d_E)`` block array."""

    blocks: np.ndarray
    labels: tuple

    @property
    def num_outcomes(self) -> int:
        return self.blocks.shape[0]

    @property
    def dim_e(self) -> int:
        return self.blocks.shape[1]

    def probabilities(self) -> np.ndarray:
        return np.real(np.einsum("xii->x", self.blocks))

    def rho_e(self) -> np.ndarray:
        return self.blocks.sum(axis=0)

    def to_matrix(self) -> np.ndarray:
        return scipy.linalg.block_diag(*self.blocks)

    def coarse_grain(self, groups: Sequence) -> "CqState":
        """Merge outcomes: ``groups[x]`` is the new label of outcome ``x``."""
        new_labels = list(dict.fromkeys(groups))
        blocks = np.zeros((len(new_labels), self.dim_e, self.dim_e), dtype=complex)
        index = {lab: i for i, lab in enumerate(new_labels)}
        for x, lab in enumerate(groups):
            blocks[index[lab]] += self.blocks[x]
        return make_cq(blocks, labels=new_labels)


def make_cq(blocks, labels: Iterable | None = None, tol: float = 1e-10) -> CqState:
    arr = np.asarray(blocks, dtype=complex)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionMismatch(f"expected (N, d, d) blocks, got {arr.shape}")
    arr = 0.5 * (arr + np.conj(np.swapaxes(arr, 1, 2)))
    if np.min(np.linalg.eigvalsh(arr)) < -1e-9:
        raise NotPSD("cq block is not positive semidefinite")
    total = float(np.real(np.einsum("xii->", arr)))
    if abs(total - 1.0) > tol:
        raise TraceNotOne(f"cq state has trace {total!r}")
    labels = tuple(range(arr.shape[0])) if labels is None else tuple(labels)
    if len(labels) != arr.shape[0]:
        raise DimensionMismatch("one label per block is required")
    arr.setflags(write=False)
    return CqState(arr, labels)


def _cq_from_pure(psi: np.ndarray, operators: np.ndarray) -> np.ndarray:
    # psi[s, e] amplitudes of a pure state on S (x) E; returns tr_S[(O_x (x) I) psi psi^dag]
    return np.einsum("ik,xji,jl->xkl", psi, operators, psi.conj())


def post_measurement_cq(rho: DensityMatrix, meas: Measurement) -> CqState:
    """Measure ``A`` of the canonical purification of ``rho``; keep ``E``."""
    if meas.dim != rho.dim:
        raise DimensionMismatch(f"measurement acts on dim {meas.dim}, state has dim {rho.dim}")
    pur = canonical_purification(rho)
    psi = pur.amplitudes.reshape(pur.dims)
    return make_cq(_cq_from_pure(psi, meas.elements), tol=1e-9)


def dilated_post_measurement(state: PureState, pvm_on_ab: Measurement) -> CqState:
    """``sum_x |x><x| (x) tr_AB[(P_x (x) I_E) rho_ABE]`` for a PVM on ``A (x) B``."""
    if len(state.dims) != 3:
        raise DimensionMismatch("expected a pure state on A (x) B (x) E")
    d_a, d_b, d_e = state.dims
    if pvm_on_ab.dim != d_a * d_b:
        raise DimensionMismatch(f"PVM acts on dim {pvm_on_ab.dim}, A (x) B has dim {d_a * d_b}")
    if not _is_projective(pvm_on_ab.elements, 1e-9):
        raise NotProjective("dilation must be projective on A (x) B")
    psi = state.amplitudes.reshape(d_a * d_b, d_e)
    return make_cq(_cq_from_pure(psi, pvm_on_ab.elements), tol=1e-9)


# --------------------------------------------------------------------------
# dilations


@dataclass(frozen=True, eq=False)
class DilationSpec:
    """Probe state ``rho_B`` and projective measurement ``{P_x}`` on ``A (x) B``."""

    probe: DensityMatrix
    projectors: Measurement

    @property
    def dim_a(self) -> int:
        return self.projectors.dim // self.probe.dim

    def effective_povm(self) -> np.ndarray:
        """``tr_B[P_x (I_A (x) rho_B)]`` for every ``x``."""
        d_a, d_b = self.dim_a, self.probe.dim
        weight = np.kron(np.eye(d_a), self.probe.matrix)
        return np.stack(
            [partial_trace(p @ weight, (d_a, d_b), keep="first") for p in self.projectors.elements]
        )

    def consistency_residual(self, target: Measurement) -> float:
        eff = self.effective_povm()
        if eff.shape != target.elements.shape:
            raise DimensionMismatch("target POVM has a different shape")
        return float(np.max(np.abs(eff - target.elements)))


def trivial_povm_dilation(
    d: int, p: Sequence[float], rho: DensityMatrix | None = None
) -> tuple[DilationSpec, PureState]:
    """Dilation of ``M_x = p(x) I`` that hands the outcome to Eve.

    ``P_x = I_A (x) |x><x|`` with probe ``sum_x p(x)|x><x|``.  The returned
    state is ``|rho_A>_{A E_A} (x) sum_x sqrt(p(x)) |x>_B |x>_{E_B}`` with the
    factors ordered ``A, B, (E_A E_B)``; ``rho_A`` defaults to ``I/d``.
    """
    probs = np.asarray(p, dtype=float)
    if probs.ndim != 1 or probs.size == 0 or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-10:
        raise InvalidDistribution("p must be a probability vector")
    n = probs.size
    rho = maximally_mixed(d) if rho is None else rho
    if rho.dim != d:
        raise DimensionMismatch("rho has the wrong dimension")
    projectors = np.stack([np.kron(np.eye(d), np.diag(np.eye(n)[x])) for x in range(n)])
    pvm = make_measurement(projectors, kind="pvm")
    probe = validate_density(np.diag(probs))
    a = rho.power(0.5)  # a[i, k]: A, E_A
    b = np.diag(np.sqrt(probs))  # b[y, z]: B, E_B
    amps = np.einsum("ik,yz->iykz", a, b).reshape(-1).astype(complex)
    amps = amps / np.linalg.norm(amps)
    return DilationSpec(probe, pvm), PureState((d, n, d * n), amps)


def naimark_dilation(meas: Measurement) -> DilationSpec:
    """Isometric dilation of a rank-one POVM into ``A (x) C^N`` with probe ``|0><0|``.

    ``W|psi> = sum_x <m_x|psi> |x>`` is completed to a unitary ``U`` on
    ``A (x) B`` acting on ``A (x) |0>``; ``P_x = U^dag Pi_x U`` where ``Pi_x``
    projects onto ``|0>_A|x>_B`` (outcome 0 also absorbs the unused rest).
    """
    vecs = meas.vectors()
    n, d = vecs.shape
    total = d * n
    j = np.zeros((total, d), dtype=complex)
    j[:n, :] = vecs.conj()
    complement = scipy.linalg.null_space(j.conj().T)
    u = np.zeros((total, total), dtype=complex)
    input_cols = [a * n for a in range(d)]
    other_cols = [c for c in range(total) if c not in input_cols]
    u[:, input_cols] = j
    u[:, other_cols] = complement
    diag = np.zeros((n, total))
    diag[np.arange(n), np.arange(n)] = 1.0
    diag[0, n:] = 1.0
    projectors = np.einsum("ki,xk,kj->xij", u.conj(), diag, u)
    probe = validate_density(np.diag(np.eye(n)[0]))
    return DilationSpec(probe, make_measurement(projectors, kind="pvm"))


def joint_purification(rho_a: DensityMatrix, rho_b: DensityMatrix) -> PureState:
    """Canonical purification of ``rho_A (x) rho_B`` as a state on ``A, B, E``."""
    joint = validate_density(np.kron(rho_a.matrix, rho_b.matrix))
    pur = canonical_purification(joint)
    return PureState((rho_a.dim, rho_b.dim, joint.dim), pur.amplitudes)


# --------------------------------------------------------------------------
# distances and sampling


def trace_distance(a, b, tol: float = 1e-10) -> float:
    """``1/2 sum_k |mu_k|`` over the eigenvalues of ``a - b``."""
    a = _as_complex_square(a)
    b = _as_complex_square(b)
    if a.shape != b.shape:
        raise DimensionMismatch("operands have different shapes")
    diff = a - b
    if np.max(np.abs(diff - diff.conj().T)) > tol:
        raise NotHermitian("trace_distance needs Hermitian arguments")
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(diff)))))


def outcome_probabilities(rho: DensityMatrix, meas: Measurement) -> np.ndarray:
    if meas.dim != rho.dim:
        raise DimensionMismatch("measurement and state dimensions differ")
    p = np.real(np.einsum("ij,xji->x", rho.matrix, meas.elements))
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample_outcomes(rho: DensityMatrix, meas: Measurement, n: int, rng_seed) -> np.ndarray:
    """``n`` i.i.d. outcome indices drawn from ``p(x) = tr(rho M_x)``.

    ``rng_seed`` is an integer seed or a caller-owned ``numpy.random.Generator``.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    p = outcome_probabilities(rho, meas)
    return rng.choice(meas.num_outcomes, size=int(n), p=p)


# --------------------------------------------------------------------------
# file formats


def density_to_json(rho: DensityMatrix | np.ndarray) -> dict:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def _complex_from(obj: dict) -> np.ndarray:
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape:
        raise DimensionMismatch("re and im parts have different shapes")
    return re + 1j * im


def density_from_json(obj: dict, tol: float = 1e-10) -> DensityMatrix:
    try:
        m = _complex_from(obj)
        dim = int(obj["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise QRandError(f"malformed density matrix JSON: {exc}") from exc
    if m.shape != (dim, dim):
        raise DimensionMismatch(f"declared dim {dim} but matrix has shape {m.shape}")
    return validate_density(m, tol=tol)


def measurement_to_json(meas: Measurement) -> dict:
    return {
        "dim": meas.dim,
        "kind": meas.kind,
        "elements": [{"re": e.real.tolist(), "im": e.imag.tolist()} for e in meas.elements],
    }


def measurement_from_json(obj: dict) -> Measurement:
    try:
        dim = int(obj["dim"])
        kind = obj.get("kind")
        elements = np.stack([_complex_from(e) for e in obj["elements"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise QRandError(f"malformed measurement JSON: {exc}") from exc
    if elements.shape[1:] != (dim, dim):
        raise DimensionMismatch(f"declared dim {dim} but elements have shape {elements.shape[1:]}")
    return make_measurement(elements, kind=kind)


def load_density(path) -> DensityMatrix:
    return density_from_json(json.loads(Path(path).read_text()))


def load_measurement(path) -> Measurement:
    return measurement_from_json(json.loads(Path(path).read_text()))


def write_outcomes(path, outcomes) -> None:
    """Write outcome indices as little-endian unsigned 16-bit integers."""
    arr = np.asarray(outcomes)
    if arr.size and (arr.min() < 0 or arr.max() > np.iinfo(np.uint16).max):
        raise QRandError("outcome indices do not fit in 16 bits")
    Path(path).write_bytes(arr.astype("<u2").tobytes())


def read_outcomes(path) -> np.ndarray:
    return np.frombuffer(Path(path).read_bytes(), dtype="<u2").astype(np.int64)
