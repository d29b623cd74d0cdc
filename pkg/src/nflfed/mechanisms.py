"""Protection mechanisms on exchanged model information.

Four mechanisms plus the identity: Gaussian randomization, Paillier
homomorphic encryption (with fixed-point plaintext encoding), additive
secret sharing over an exact power-of-two lattice, and probabilistic
coordinate compression. Each mechanism also induces a symbolic protected
distribution P^S for divergence computations.

Everything randomized is a pure function of (inputs, seed). Serialization
helpers give the exact wire size of each encoding; efficiency accounting in
the simulator is byte-accurate.
"""

from __future__ import annotations

import itertools
import math
import random
import struct
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .divergence import (
    CollapsedBox,
    DiagonalGaussian,
    MASS_TOL,
    Mixture,
    ModelInfoDistribution,
    PointMass,
    UniformBox,
)
from .errors import (
    CiphertextInvalid,
    GeneratorOrderInvalid,
    InvalidPrimes,
    InvalidSpec,
    MagnitudeOverflow,
    NonpositiveSigma,
    PlaintextOutOfRange,
    ProbabilityOutOfRange,
    UnsupportedPair,
)

# Default fixed-point scale for reals entering Paillier plaintext space.
SCALE_BITS = 16

# Floor (log2) of the secret-sharing lattice; fine enough that lattice
# quantization of the share intervals is far below float resolution.
SHARE_LATTICE_BITS = 64

# Cap on compression mixture size: the protected distribution enumerates
# 2^m keep/drop patterns.
_MAX_COMPRESSION_DIMS = 12


# ---------------------------------------------------------------------------
# mechanism configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Identity:
    """No protection; model information passes through unchanged."""


@dataclass(frozen=True, slots=True)
class Randomization:
    """Additive isotropic Gaussian noise with scale sigma_eps."""

    sigma_eps: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma_eps", float(self.sigma_eps))
        # sigma_eps = 0 is the degenerate no-noise case; negative is invalid.
        if self.sigma_eps < 0:
            raise NonpositiveSigma("sigma_eps must be >= 0")


@dataclass(frozen=True, slots=True)
class Paillier:
    """Paillier encryption parameters plus the plaintext-relaxation
    half-width delta used by the divergence analysis (never on the wire)."""

    p: int
    q: int
    g: int | None = None  # None selects g = n + 1
    delta: float = 0.5

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise InvalidSpec("delta: must be strictly positive")

    @property
    def n(self) -> int:
        return self.p * self.q


def _per_dim(values, name: str) -> tuple[float, ...]:
    if isinstance(values, (int, float, np.integer, np.floating)):
        return (float(values),)
    out = tuple(float(v) for v in values)
    if not out:
        raise InvalidSpec(f"{name}: must be nonempty")
    return out


@dataclass(frozen=True, slots=True)
class SecretSharing:
    """Additive secret sharing; the first num_shares - 1 shares of
    dimension j are uniform on [-b_j, r_j]."""

    num_shares: int
    b: tuple[float, ...] = (1.0,)
    r: tuple[float, ...] = (1.0,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "b", _per_dim(self.b, "b"))
        object.__setattr__(self, "r", _per_dim(self.r, "r"))
        if self.num_shares < 2:
            raise InvalidSpec("num_shares: need at least 2 shares")
        if any(v <= 0 for v in self.b) or any(v <= 0 for v in self.r):
            raise InvalidSpec("b, r: share interval bounds must be positive")


@dataclass(frozen=True, slots=True)
class Compression:
    """Keep coordinate i with probability rho_i, zero it otherwise."""

    rho: tuple[float, ...]

    def __post_init__(self) -> None:
        rho = self.rho
        if isinstance(rho, (int, float, np.integer, np.floating)):
            rho = (float(rho),)
        rho = tuple(float(v) for v in rho)
        object.__setattr__(self, "rho", rho)
        if any(v < 0 or v > 1 for v in self.rho):
            raise ProbabilityOutOfRange("rho entries must lie in [0, 1]")


MechanismConfig = Union[Identity, Randomization, Paillier, SecretSharing, Compression]


# ---------------------------------------------------------------------------
# model information and its encodings
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Plain:
    """Raw float64 vector encoding."""


@dataclass(frozen=True, slots=True)
class Cipher:
    """Paillier ciphertext per coordinate."""

    ciphertexts: tuple[int, ...]
    n: int
    scale_bits: int


@dataclass(frozen=True, slots=True)
class Shares:
    """Additive integer shares on the lattice 2**-scale_log2 * Z."""

    shares: tuple[tuple[int, ...], ...]
    scale_log2: int


@dataclass(frozen=True, slots=True)
class ModelInfo:
    """A vector of model information (parameters, gradients, or outputs)
    together with its wire encoding."""

    values: tuple[float, ...]
    encoding: Union[Plain, Cipher, Shares] = Plain()

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def dim(self) -> int:
        return len(self.values)


def _require_plain(w: ModelInfo) -> None:
    if not isinstance(w.encoding, Plain):
        raise InvalidSpec("w: expected plain-encoded model information")


# ---------------------------------------------------------------------------
# randomization
# ---------------------------------------------------------------------------


def randomize(w: ModelInfo, sigma_eps: float, seed: int) -> ModelInfo:
    """Add iid N(0, sigma_eps^2) noise to every coordinate."""
    _require_plain(w)
    if sigma_eps < 0:
        raise NonpositiveSigma("sigma_eps must be >= 0")
    if sigma_eps == 0:
        return w
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(w.dim) * sigma_eps
    return ModelInfo(tuple(v + e for v, e in zip(w.values, noise)))


# ---------------------------------------------------------------------------
# Paillier
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class PaillierKeypair:
    n: int
    g: int
    lam: int
    mu: int

    @property
    def public(self) -> tuple[int, int]:
        return (self.n, self.g)

    @property
    def private(self) -> tuple[int, int]:
        return (self.lam, self.mu)

    @property
    def n_squared(self) -> int:
        return self.n * self.n


def _L(x: int, n: int) -> int:
    return (x - 1) // n


def paillier_keygen(
    p: int, q: int, g: int | None = None, seed: int | None = None
) -> PaillierKeypair:
    """Build a keypair from two primes. g defaults to n + 1; g="random"
    draws seed-deterministic candidates from Z*_{n^2} until one works."""
    from sympy import isprime  # deferred: sympy import is slow

    if p == q:
        raise InvalidPrimes("p and q must be distinct")
    if p < 2 or q < 2 or not isprime(p) or not isprime(q):
        raise InvalidPrimes("p and q must both be prime")
    n = p * q
    if math.gcd(n, (p - 1) * (q - 1)) != 1:
        raise InvalidPrimes("gcd(pq, (p-1)(q-1)) must be 1")
    lam = math.lcm(p - 1, q - 1)
    n2 = n * n

    def try_g(cand: int) -> PaillierKeypair | None:
        if not (1 <= cand < n2) or math.gcd(cand, n) != 1:
            return None
        x = pow(cand, lam, n2)
        if (x - 1) % n != 0:
            return None
        try:
            mu = pow(_L(x, n), -1, n)
        except ValueError:
            return None
        return PaillierKeypair(n, cand, lam, mu)

    if g is None:
        kp = try_g(n + 1)
        if kp is None:  # unreachable for valid primes; kept as a guard
            raise GeneratorOrderInvalid("g = n + 1 rejected")
        return kp
    if g == "random":
        rng = random.Random(seed)
        for _ in range(128):
            kp = try_g(rng.randrange(1, n2))
            if kp is not None:
                return kp
        raise GeneratorOrderInvalid("no valid random generator found")
    kp = try_g(int(g))
    if kp is None:
        raise GeneratorOrderInvalid(
            "g must lie in Z*_{n^2} with L(g^lambda mod n^2) invertible mod n"
        )
    return kp


def paillier_encrypt(kp: PaillierKeypair, h: int, seed: int) -> int:
    """Encrypt plaintext h in [0, n) with a seed-deterministic blinding r."""
    n, g = kp.n, kp.g
    if not (0 <= h < n):
        raise PlaintextOutOfRange(f"plaintext must lie in [0, {n})")
    rng = random.Random(seed)
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            break
    n2 = kp.n_squared
    if g == n + 1:
        gh = (1 + h * n) % n2
    else:
        gh = pow(g, h, n2)
    return gh * pow(r, n, n2) % n2


def paillier_decrypt(kp: PaillierKeypair, c: int) -> int:
    n, n2 = kp.n, kp.n_squared
    if not (0 < c < n2) or math.gcd(c, n) != 1:
        raise CiphertextInvalid("ciphertext must lie in Z*_{n^2}")
    x = pow(c, kp.lam, n2)
    return _L(x, n) * kp.mu % n


def fixed_point_encode(x: float, scale_bits: int = SCALE_BITS, *, n: int) -> int:
    """Embed a real into Z_n, negatives wrapping to the top half."""
    if not math.isfinite(x):
        raise MagnitudeOverflow("x must be finite")
    scaled = abs(x) * float(1 << scale_bits)
    if not math.isfinite(scaled):
        raise MagnitudeOverflow("scaled magnitude overflows")
    v = round(scaled)
    if 2 * v >= n:
        raise MagnitudeOverflow(
            f"|x| * 2^{scale_bits} must stay below n / 2, got {scaled!r}"
        )
    return v if x >= 0 else (n - v) % n


def fixed_point_decode(v: int, scale_bits: int = SCALE_BITS, *, n: int) -> float:
    if not (0 <= v < n):
        raise PlaintextOutOfRange(f"encoded value must lie in [0, {n})")
    if v > n // 2:
        v -= n
    return v / (1 << scale_bits)


def paillier_protect(
    w: ModelInfo,
    cfg: Paillier,
    seed: int,
    scale_bits: int = SCALE_BITS,
    kp: PaillierKeypair | None = None,
) -> tuple[ModelInfo, PaillierKeypair]:
    """Fixed-point-encode and encrypt every coordinate. Pass kp to reuse a
    keypair across messages (key generation re-checks primality)."""
    _require_plain(w)
    if kp is None:
        kp = paillier_keygen(cfg.p, cfg.q, cfg.g, seed)
    rng = random.Random(seed)
    cts = tuple(
        paillier_encrypt(kp, fixed_point_encode(v, scale_bits, n=kp.n), rng.getrandbits(64))
        for v in w.values
    )
    return ModelInfo(w.values, Cipher(cts, kp.n, scale_bits)), kp


# ---------------------------------------------------------------------------
# secret sharing
# ---------------------------------------------------------------------------


def exact_scale_log2(x: float) -> int:
    """Smallest k such that x * 2^k is an integer (finite floats only)."""
    den = float(x).as_integer_ratio()[1]
    return den.bit_length() - 1


def share_lattice_log2(values: Sequence[float], floor: int = SHARE_LATTICE_BITS) -> int:
    """Common power-of-two lattice that represents every value exactly."""
    k = floor
    for v in values:
        k = max(k, exact_scale_log2(float(v)))
    return k


def secret_share(
    w: ModelInfo,
    num_shares: int,
    seed: int,
    b: Sequence[float] | float = 1.0,
    r: Sequence[float] | float = 1.0,
    scale_log2: int | None = None,
) -> ModelInfo:
    """Split w into num_shares additive shares.

    Shares are integers on the lattice 2**-scale_log2 * Z, chosen so every
    coordinate of w is exactly representable; the first num_shares - 1
    shares of dimension j are uniform on [-b_j, r_j] (up to lattice
    rounding) and the last share is the exact remainder. Reconstruction is
    therefore bit-exact.
    """
    _require_plain(w)
    if num_shares < 2:
        raise InvalidSpec("num_shares: need at least 2 shares")
    m = w.dim
    bs = _per_dim(b, "b")
    rs = _per_dim(r, "r")
    if len(bs) == 1:
        bs = bs * m
    if len(rs) == 1:
        rs = rs * m
    if len(bs) != m or len(rs) != m:
        raise InvalidSpec("b, r: per-dimension bounds must match the vector length")
    k = scale_log2 if scale_log2 is not None else share_lattice_log2(w.values)
    scale = 1 << k
    w_int = [_lattice_int(v, k) for v in w.values]

    def lattice_bound(x: float) -> int:
        num, den = float(x).as_integer_ratio()
        return num * scale // den

    lo_bounds = [lattice_bound(bs[j]) for j in range(m)]
    hi_bounds = [lattice_bound(rs[j]) for j in range(m)]
    rng = random.Random(seed)
    shares: list[tuple[int, ...]] = []
    acc = [0] * m
    for _ in range(num_shares - 1):
        row = tuple(
            rng.randrange(-lo_bounds[j], hi_bounds[j] + 1) for j in range(m)
        )
        shares.append(row)
        for j in range(m):
            acc[j] += row[j]
    shares.append(tuple(w_int[j] - acc[j] for j in range(m)))
    return ModelInfo(w.values, Shares(tuple(shares), k))


def _lattice_int(v: float, scale_log2: int) -> int:
    num, den = float(v).as_integer_ratio()
    shift = scale_log2 - (den.bit_length() - 1)
    if shift < 0:
        raise InvalidSpec("scale_log2: lattice too coarse for this value")
    return num << shift


def lattice_float(total: int, scale_log2: int) -> float:
    """Correctly rounded float value of total / 2**scale_log2."""
    if scale_log2 == 0:
        return float(total)
    return total / (1 << scale_log2)


def reconstruct(shared: ModelInfo) -> ModelInfo:
    """Sum the shares back into the plain vector (bit-exact)."""
    if not isinstance(shared.encoding, Shares):
        raise InvalidSpec("shared: expected a Shares encoding")
    enc = shared.encoding
    m = len(enc.shares[0])
    totals = [sum(s[j] for s in enc.shares) for j in range(m)]
    return ModelInfo(tuple(lattice_float(t, enc.scale_log2) for t in totals))


# ---------------------------------------------------------------------------
# compression
# ---------------------------------------------------------------------------


def compress(w: ModelInfo, rho: Sequence[float] | float, seed: int) -> ModelInfo:
    """Keep coordinate i with probability rho_i, zero it otherwise."""
    _require_plain(w)
    if isinstance(rho, (int, float, np.integer, np.floating)):
        rho_t = (float(rho),) * w.dim
    else:
        rho_t = tuple(float(v) for v in rho)
    if len(rho_t) != w.dim:
        raise InvalidSpec("rho: per-dimension probabilities must match the vector")
    if any(v < 0 or v > 1 for v in rho_t):
        raise ProbabilityOutOfRange("rho entries must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    u = rng.random(w.dim)
    return ModelInfo(
        tuple(v if ui < p else 0.0 for v, ui, p in zip(w.values, u, rho_t))
    )


# ---------------------------------------------------------------------------
# protected distributions
# ---------------------------------------------------------------------------


def protected_distribution(
    p_orig: ModelInfoDistribution, cfg: MechanismConfig
) -> ModelInfoDistribution:
    """Symbolic distribution of the protected model information."""
    if isinstance(cfg, Identity):
        return p_orig
    if isinstance(cfg, Randomization):
        if isinstance(p_orig, DiagonalGaussian):
            if cfg.sigma_eps == 0:
                return p_orig
            s2 = cfg.sigma_eps**2
            return DiagonalGaussian(
                p_orig.mean, tuple(v + s2 for v in p_orig.variances)
            )
        raise UnsupportedPair(
            "randomization closes over diagonal Gaussians only"
        )
    if isinstance(cfg, Paillier):
        if isinstance(p_orig, UniformBox):
            hi = float(cfg.n**2 - 1)
            return UniformBox(tuple((0.0, hi) for _ in range(p_orig.dim)))
        raise UnsupportedPair("Paillier protected distribution needs a UniformBox")
    if isinstance(cfg, SecretSharing):
        if isinstance(p_orig, UniformBox):
            bs = cfg.b * p_orig.dim if len(cfg.b) == 1 else cfg.b
            rs = cfg.r * p_orig.dim if len(cfg.r) == 1 else cfg.r
            if len(bs) != p_orig.dim or len(rs) != p_orig.dim:
                raise UnsupportedPair("b, r dimensions do not match the box")
            return UniformBox(
                tuple(
                    (lo - b, hi + r)
                    for (lo, hi), b, r in zip(p_orig.intervals, bs, rs)
                )
            )
        raise UnsupportedPair("secret sharing protected distribution needs a UniformBox")
    if isinstance(cfg, Compression):
        if isinstance(p_orig, UniformBox):
            m = p_orig.dim
            rho = cfg.rho * m if len(cfg.rho) == 1 else cfg.rho
            if len(rho) != m:
                raise UnsupportedPair("rho dimensions do not match the box")
            if m > _MAX_COMPRESSION_DIMS:
                raise UnsupportedPair(
                    f"compression mixture enumerates 2^m patterns; m <= "
                    f"{_MAX_COMPRESSION_DIMS} required"
                )
            comps: list[ModelInfoDistribution] = []
            weights: list[float] = []
            for mask in itertools.product((True, False), repeat=m):
                wgt = math.prod(r if keep else 1.0 - r for keep, r in zip(mask, rho))
                if wgt == 0.0:
                    continue
                if all(mask):
                    comps.append(p_orig)
                elif not any(mask):
                    comps.append(PointMass((0.0,) * m))
                else:
                    comps.append(
                        CollapsedBox(
                            tuple(
                                iv if keep else (0.0, 0.0)
                                for keep, iv in zip(mask, p_orig.intervals)
                            )
                        )
                    )
                weights.append(wgt)
            if len(comps) == 1:
                return comps[0]
            total = math.fsum(weights)
            if abs(total - 1.0) > MASS_TOL:  # guards rounding in the products
                weights = [w / total for w in weights]
            return Mixture(tuple(comps), tuple(weights))
        raise UnsupportedPair("compression protected distribution needs a UniformBox")
    raise UnsupportedPair(f"unknown mechanism config {type(cfg).__name__}")


# ---------------------------------------------------------------------------
# serialization (exact wire sizes)
# ---------------------------------------------------------------------------


def _varint(v: int) -> bytes:
    if v < 0:
        raise InvalidSpec("varint values must be nonnegative")
    out = bytearray()
    while True:
        byte = v & 0x7F
        v >>= 7
        if v:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    shift = 0
    value = 0
    while True:
        byte = buf[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7


def _signed_bytes(v: int) -> bytes:
    length = ((v if v >= 0 else ~v).bit_length() // 8) + 1
    return v.to_bytes(length, "big", signed=True)


def serialize_model_info(info: ModelInfo, sparse: bool = False) -> bytes:
    """Exact wire bytes for a message.

    Plain: 8 bytes per coordinate (or, sparse, a count plus (index, value)
    pairs for the nonzero coordinates, as the compression mechanism sends).
    Cipher: fixed-width big-endian ciphertexts. Shares: every share vector
    as length-prefixed signed big-endian lattice integers.
    """
    enc = info.encoding
    if isinstance(enc, Plain):
        if sparse:
            kept = [(i, v) for i, v in enumerate(info.values) if v != 0.0]
            out = bytearray(_varint(len(kept)))
            for i, v in kept:
                out += _varint(i)
                out += struct.pack(">d", v)
            return bytes(out)
        return b"".join(struct.pack(">d", v) for v in info.values)
    if isinstance(enc, Cipher):
        width = ((enc.n * enc.n - 1).bit_length() + 7) // 8
        return b"".join(c.to_bytes(width, "big") for c in enc.ciphertexts)
    if isinstance(enc, Shares):
        out = bytearray(_varint(enc.scale_log2))
        out += _varint(len(enc.shares))
        for share in enc.shares:
            out += _varint(len(share))
            for v in share:
                payload = _signed_bytes(v)
                out += _varint(len(payload))
                out += payload
        return bytes(out)
    raise InvalidSpec(f"unknown encoding {type(enc).__name__}")


def deserialize_sparse(buf: bytes, dim: int) -> ModelInfo:
    """Inverse of the sparse Plain wire format."""
    count, pos = _read_varint(buf, 0)
    values = [0.0] * dim
    for _ in range(count):
        idx, pos = _read_varint(buf, pos)
        (val,) = struct.unpack_from(">d", buf, pos)
        pos += 8
        values[idx] = val
    return ModelInfo(tuple(values))


def message_bits(info: ModelInfo, sparse: bool = False) -> int:
    return 8 * len(serialize_model_info(info, sparse=sparse))
