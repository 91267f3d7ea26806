"""Finite-size extraction rates, the Dupuis bound and Toeplitz hashing.

A 2-universal hash of output length ``l`` applied to ``X`` leaves a state at
trace distance at most ``2^(2/alpha - 2) 2^((alpha-1)/alpha (l - H_up))`` from
ideal.  Choosing ``l <= H_up + alpha/(alpha-1) log eps`` makes this at most
``eps``; with ``n`` copies and the maximal intrinsic randomness plugged in for
``H_up`` this yields the per-copy rate ``C - min_alpha objective(alpha)``.
"""

from __future__ import annotations

import itertools
import json
import math
import secrets
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .entropy import cq_up_entropy_closed, renyi_entropy
from .errors import InvalidOrder, OutOfRange, OutputTooLong, QRandError, SeedLengthMismatch
from .intrinsic import order_to_json
from .quantum_core import DensityMatrix, Measurement, sample_outcomes

GRID_POINTS = 256
GRID_S_MIN = 1e-7
GOLDEN_TOL = 1e-12
BOUNDARY_TOL = 1e-9
MAX_GOLDEN_ITERATIONS = 500
# direct convolution is exact and fast below this many multiply-adds
DIRECT_CONV_LIMIT = 1 << 22

_INV_PHI = (math.sqrt(5) - 1) / 2


def _check_alpha(alpha: float) -> None:
    if not (1 < alpha <= 2):
        raise InvalidOrder(f"alpha must lie in (1, 2], got {alpha!r}")


def _check_epsilon(epsilon: float) -> None:
    if not (0 < epsilon <= 1):
        raise OutOfRange(f"epsilon must lie in (0, 1], got {epsilon!r}")


def dupuis_bound(alpha: float, out_bits: float, h_up: float) -> float:
    """``2^(2/alpha - 2) * 2^((alpha-1)/alpha * (out_bits - h_up))``, unclamped."""
    _check_alpha(alpha)
    return 2.0 ** (2 / alpha - 2 + (alpha - 1) / alpha * (out_bits - h_up))


def _bound_gamma(alpha: float, bound: str) -> float:
    if bound == "up":
        return alpha / (2 * alpha - 1)
    if bound == "down":
        return 1 / alpha
    raise QRandError(f"bound must be 'up' or 'down', got {bound!r}")


def _objective(spectrum: np.ndarray, alpha: float, epsilon: float, n: int, bound: str) -> float:
    penalty = alpha / (n * (alpha - 1)) * math.log2(epsilon)
    return renyi_entropy(spectrum, _bound_gamma(alpha, bound)) - penalty


def objective(rho: DensityMatrix, alpha: float, epsilon: float, n: int, bound: str = "up") -> float:
    """``H_gamma(A) - alpha/(n(alpha-1)) log2 eps`` with ``gamma`` set by ``bound``."""
    _check_alpha(alpha)
    _check_epsilon(epsilon)
    if n < 1:
        raise OutOfRange(f"n must be at least 1, got {n!r}")
    return _objective(rho.spectrum, alpha, epsilon, int(n), bound)


@dataclass(frozen=True)
class RateQuery:
    rho: DensityMatrix
    epsilon: float
    n: int
    measurement_class: str = "povm"
    bound: str = "up"

    def __post_init__(self):
        _check_epsilon(self.epsilon)
        if int(self.n) != self.n or self.n < 1:
            raise OutOfRange(f"n must be a positive integer, got {self.n!r}")
        if self.measurement_class not in ("pvm", "povm"):
            raise QRandError(f"unknown measurement class {self.measurement_class!r}")
        _bound_gamma(1.5, self.bound)

    @property
    def capacity(self) -> float:
        """``2 log d`` for POVMs, ``log d`` for PVMs."""
        factor = 2 if self.measurement_class == "povm" else 1
        return factor * math.log2(self.rho.dim)


@dataclass(frozen=True)
class RateReport:
    alpha_star: float
    rate_bits_per_copy: float
    total_bits: int
    asymptotic_rate: float
    at_boundary: bool
    objective_min: float
    n: int
    epsilon: float

    def to_json(self) -> dict:
        return {
            "alpha_star": self.alpha_star,
            "rate_bits_per_copy": self.rate_bits_per_copy,
            "total_bits": self.total_bits,
            "asymptotic_rate": self.asymptotic_rate,
            "at_boundary": self.at_boundary,
            "objective_min": self.objective_min,
            "n": self.n,
            "epsilon": self.epsilon,
        }


def golden_section(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on ``[lo, hi]`` until ``f`` varies by less than ``tol`` over the bracket.

    Comparing only the two interior points would stop early whenever they
    straddle the minimum symmetrically, so the bracket ends take part too.
    """
    flo, fhi = f(lo), f(hi)
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(MAX_GOLDEN_ITERATIONS):
        spread = max(flo, fc, fd, fhi) - min(flo, fc, fd, fhi)
        if spread < tol or hi - lo < 1e-15 * max(1.0, abs(hi)):
            break
        if fc < fd:
            hi, fhi, d, fd = d, fd, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, flo, c, fc = c, fc, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def strict_floor(x: float) -> int:
    """Largest integer strictly below ``x``, never negative."""
    return max(0, math.ceil(x) - 1)


def optimize_alpha(query: RateQuery) -> RateReport:
    """Minimise the objective over ``alpha`` in ``(1, 2]``.

    A geometric grid in ``s = alpha - 1`` locates the basin; golden-section
    search refines it; the endpoint ``alpha = 2`` is always a candidate.
    """
    spectrum = query.rho.spectrum
    n = int(query.n)

    def f(alpha: float) -> float:
        return _objective(spectrum, alpha, query.epsilon, n, query.bound)

    s = np.geomspace(GRID_S_MIN, 1.0, GRID_POINTS)
    alphas = 1.0 + s
    alphas[-1] = 2.0
    values = np.array([f(a) for a in alphas])
    i = int(np.argmin(values))
    lo = alphas[max(i - 1, 0)]
    hi = alphas[min(i + 1, GRID_POINTS - 1)]
    best_alpha, best_value = golden_section(f, lo, hi)
    if values[i] < best_value:
        best_alpha, best_value = float(alphas[i]), float(values[i])
    if values[-1] <= best_value:
        best_alpha, best_value = 2.0, float(values[-1])
    rate = query.capacity - best_value
    asymptotic = query.capacity - renyi_entropy(spectrum, 1.0)
    return RateReport(
        alpha_star=float(best_alpha),
        rate_bits_per_copy=float(rate),
        total_bits=strict_floor(n * rate),
        asymptotic_rate=float(asymptotic),
        at_boundary=bool(abs(best_alpha - 2.0) < BOUNDARY_TOL),
        objective_min=float(best_value),
        n=n,
        epsilon=float(query.epsilon),
    )


def output_length(h_up: float, epsilon: float, alpha: float) -> int:
    """``max(0, floor(h_up + alpha/(alpha-1) log2 eps))``."""
    _check_alpha(alpha)
    _check_epsilon(epsilon)
    return max(0, math.floor(h_up + alpha / (alpha - 1) * math.log2(epsilon)))


# --------------------------------------------------------------------------
# Toeplitz hashing


@dataclass(frozen=True)
class HashSeed:
    """Seed bits of a Toeplitz matrix; ``prng_seed`` records how they were drawn."""

    bits: np.ndarray
    prng_seed: int | None = None

    @classmethod
    def from_prng(cls, prng_seed: int, length: int) -> "HashSeed":
        if not (0 <= prng_seed < 2**64):
            raise OutOfRange("the hash seed must be a 64-bit unsigned integer")
        rng = np.random.default_rng(prng_seed)
        bits = rng.integers(0, 2, size=length, dtype=np.uint8)
        return cls(bits, prng_seed)

    @classmethod
    def random(cls, length: int) -> "HashSeed":
        return cls.from_prng(secrets.randbits(64), length)

    @classmethod
    def from_bits(cls, bits) -> "HashSeed":
        return cls(np.asarray(bits, dtype=np.uint8) & 1)

    def __len__(self) -> int:
        return int(self.bits.size)

    @property
    def seed_hex(self) -> str | None:
        return None if self.prng_seed is None else f"{self.prng_seed:016x}"

    @property
    def bits_hex(self) -> str:
        return np.packbits(self.bits).tobytes().hex()


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise QRandError("bit strings must contain only 0 and 1")
    return arr


def toeplitz_extract(input_bits, seed, out_len: int) -> np.ndarray:
    """``z_i = XOR_j seed[i - j + m - 1] x_j``.

    The matrix-vector product over GF(2) is the slice ``[m-1, m-1+l)`` of the
    integer convolution of seed and input, reduced mod 2.
    """
    x = _as_bits(input_bits)
    s = _as_bits(seed.bits if isinstance(seed, HashSeed) else seed)
    m = x.size
    if out_len < 0 or out_len > m:
        raise OutputTooLong(f"output length {out_len} exceeds input length {m}")
    if s.size != m + out_len - 1 and out_len > 0:
        raise SeedLengthMismatch(f"seed has {s.size} bits, need {m + out_len - 1}")
    if out_len == 0:
        return np.zeros(0, dtype=np.uint8)
    if m * s.size <= DIRECT_CONV_LIMIT:
        full = np.convolve(s.astype(np.int64), x.astype(np.int64))
    else:
        full = np.rint(fftconvolve(s.astype(float), x.astype(float))).astype(np.int64)
    return (full[m - 1 : m - 1 + out_len] & 1).astype(np.uint8)


def toeplitz_collision_table(m: int, l: int) -> dict[tuple[int, int], float]:
    """Exhaustive ``Pr_seed[T x = T x']`` for every pair ``x < x'`` of ``m``-bit inputs."""
    inputs = [np.array(bits, dtype=np.uint8) for bits in itertools.product((0, 1), repeat=m)]
    seeds = [np.array(bits, dtype=np.uint8) for bits in itertools.product((0, 1), repeat=m + l - 1)]
    hashes = np.array([[toeplitz_extract(x, s, l) for x in inputs] for s in seeds])
    table = {}
    for a, b in itertools.combinations(range(len(inputs)), 2):
        same = np.all(hashes[:, a] == hashes[:, b], axis=1)
        table[(a, b)] = float(np.mean(same))
    return table


# --------------------------------------------------------------------------
# end-to-end


def encode_outcomes(outcomes, num_outcomes: int) -> np.ndarray:
    """Fixed-width big-endian encoding with ``ceil(log2 N)`` bits per outcome."""
    width = math.ceil(math.log2(num_outcomes)) if num_outcomes > 1 else 0
    arr = np.asarray(outcomes, dtype=np.int64)
    if width == 0:
        return np.zeros(0, dtype=np.uint8)
    shifts = np.arange(width - 1, -1, -1)
    return ((arr[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()


@dataclass(frozen=True)
class ExtractionResult:
    bits: np.ndarray
    report: RateReport
    hash_seed: HashSeed
    h_up: float
    raw_length: int
    rng_seed: int

    @property
    def out_bits(self) -> int:
        return int(self.bits.size)

    def sidecar(self) -> dict:
        return {
            "n": self.report.n,
            "epsilon": self.report.epsilon,
            "alpha_star": order_to_json(self.report.alpha_star),
            "out_bits": self.out_bits,
            "h_up": self.h_up,
            "raw_bits": self.raw_length,
            "rng_seed": f"{self.rng_seed:016x}",
            "hash_seed_hex": self.hash_seed.seed_hex,
        }


def end_to_end_extract(
    rho: DensityMatrix,
    meas: Measurement,
    n: int,
    epsilon: float,
    rng_seed: int,
    hash_seed: int | HashSeed | None = None,
) -> ExtractionResult:
    """Sample, encode, and hash down to ``output_length(n * H_up(alpha*), eps, alpha*)`` bits.

    ``alpha*`` is the optimiser of the finite-size rate for the measurement's
    class; ``H_up`` is the closed-form optimised entropy of ``meas`` itself.
    An integer ``hash_seed`` seeds the Toeplitz seed PRNG; ``None`` derives
    one from ``rng_seed``.
    """
    query = RateQuery(rho, epsilon, n, "povm" if meas.kind == "povm" else "pvm", "up")
    report = optimize_alpha(query)
    outcomes = sample_outcomes(rho, meas, n, rng_seed)
    raw = encode_outcomes(outcomes, meas.num_outcomes)
    h_up = n * cq_up_entropy_closed(rho, meas, report.alpha_star)
    out_len = min(output_length(h_up, epsilon, report.alpha_star), raw.size)
    length = raw.size + out_len - 1 if out_len > 0 else 0
    if hash_seed is None:
        hash_seed = int(np.random.SeedSequence(rng_seed).generate_state(1, np.uint64)[0])
    if not isinstance(hash_seed, HashSeed):
        hash_seed = HashSeed.from_prng(int(hash_seed), length)
    elif len(hash_seed) != length:
        raise SeedLengthMismatch(f"hash seed has {len(hash_seed)} bits, need {length}")
    bits = toeplitz_extract(raw, hash_seed, out_len)
    return ExtractionResult(bits, report, hash_seed, float(h_up), int(raw.size), int(rng_seed))


def write_extraction(result: ExtractionResult, bits_path, meta_path) -> None:
    """Packed output bits (MSB first, zero padded) plus a JSON sidecar."""
    Path(bits_path).write_bytes(np.packbits(result.bits).tobytes())
    Path(meta_path).write_text(json.dumps(result.sidecar(), indent=2, sort_keys=True) + "\n")
