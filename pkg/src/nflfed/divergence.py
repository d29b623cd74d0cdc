"""Divergence metrics and attacker belief construction.

Implements exact KL/JS divergence on finite belief distributions, the
Bayesian privacy leakage derived from them, total-variation distance between
model-information distributions (closed form, grid quadrature, Monte Carlo),
and the mixture construction that turns a conditional belief kernel plus a
model-information distribution into the attacker's marginal belief.

All logarithms are natural, so the JS divergence tops out at ln 2 and the
leakage at sqrt(ln 2). Divergence sums use exactly rounded summation
(math.fsum), which makes js(p, q) == js(q, p) bit-for-bit.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np
from scipy.stats import norm

from .errors import (
    AbsoluteContinuityViolated,
    DimensionMismatch,
    EmptyInput,
    InsufficientKernelCoverage,
    InvalidSpec,
    MisalignedSupport,
    NonpositiveVariance,
    UnsupportedClosedForm,
    UnsupportedPair,
)

LN2 = math.log(2.0)

# Mass-normalization tolerance for distribution constructors.
MASS_TOL = 1e-9
# Mass a belief kernel may fail to cover before marginalization errors out.
COVERAGE_TOL = 1e-6

_MC_CHUNKS = 64


def _threads() -> int:
    raw = os.environ.get("NFLFED_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidSpec(f"NFLFED_THREADS must be an integer, got {raw!r}")
    return max(1, n)


# ---------------------------------------------------------------------------
# belief distributions over private data
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class BeliefDistribution:
    """Probability mass over a finite grid of private-data points.

    support entries are abstract hashable values (indices, floats, tuples);
    mass entries are the corresponding probabilities.
    """

    support: tuple
    mass: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "mass", tuple(float(m) for m in self.mass))
        if len(self.support) != len(self.mass):
            raise InvalidSpec("support and mass must have the same length")
        if len(self.support) == 0:
            raise EmptyInput("belief distribution needs at least one point")
        if len(set(self.support)) != len(self.support):
            raise InvalidSpec("support points must be distinct")
        if any(m < 0 for m in self.mass):
            raise InvalidSpec("mass entries must be nonnegative")
        total = math.fsum(self.mass)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidSpec(f"mass must sum to 1 within {MASS_TOL}, got {total!r}")

    def as_mapping(self) -> dict:
        return dict(zip(self.support, self.mass))

    @staticmethod
    def uniform(support: Sequence) -> "BeliefDistribution":
        n = len(support)
        if n == 0:
            raise EmptyInput("uniform belief needs a nonempty support")
        return BeliefDistribution(tuple(support), (1.0 / n,) * n)


@dataclass(frozen=True, slots=True)
class ConditionalBelief:
    """Posterior belief kernel d | w.

    kernel is either a mapping from model-info values to BeliefDistribution
    rows (finite grids) or a callable with the same contract (dense kernels;
    a callable is treated as covering every w).
    """

    kernel: Union[Mapping, Callable[[object], BeliefDistribution]]

    def row(self, w) -> BeliefDistribution:
        if callable(self.kernel):
            return self.kernel(w)
        try:
            return self.kernel[w]
        except (KeyError, TypeError):
            pass
        # Scalar atoms and their 1-tuple embeddings name the same point.
        if isinstance(w, tuple) and len(w) == 1:
            try:
                return self.kernel[w[0]]
            except (KeyError, TypeError):
                pass
        raise KeyError(w)

    def covers(self, w) -> bool:
        if callable(self.kernel):
            return True
        try:
            self.row(w)
        except KeyError:
            return False
        return True


# ---------------------------------------------------------------------------
# model-information distributions
# ---------------------------------------------------------------------------


class ModelInfoDistribution:
    """Base class for distributions of exchanged model information W."""

    @property
    def dim(self) -> int:
        raise NotImplementedError


def _as_point(value) -> tuple[float, ...]:
    if isinstance(value, (int, float, np.integer, np.floating)):
        return (float(value),)
    return tuple(float(v) for v in value)


@dataclass(frozen=True, slots=True)
class PointMass(ModelInfoDistribution):
    location: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "location", _as_point(self.location))

    @property
    def dim(self) -> int:
        return len(self.location)


@dataclass(frozen=True, slots=True)
class DiagonalGaussian(ModelInfoDistribution):
    mean: tuple[float, ...]
    variances: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", _as_point(self.mean))
        object.__setattr__(self, "variances", _as_point(self.variances))
        if len(self.mean) != len(self.variances):
            raise DimensionMismatch("mean and variances must have equal length")
        if any(v <= 0 for v in self.variances):
            raise NonpositiveVariance("all variances must be strictly positive")

    @property
    def dim(self) -> int:
        return len(self.mean)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mu = np.asarray(self.mean)
        var = np.asarray(self.variances)
        z = (x - mu) ** 2 / var
        lognorm = 0.5 * np.sum(np.log(2.0 * np.pi * var))
        return np.exp(-0.5 * np.sum(z, axis=1) - lognorm)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        sd = np.sqrt(np.asarray(self.variances))
        return rng.standard_normal((n, self.dim)) * sd + np.asarray(self.mean)


@dataclass(frozen=True, slots=True)
class UniformBox(ModelInfoDistribution):
    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        if any(a >= b for a, b in ivs):
            raise InvalidSpec("intervals: each lower bound must be < upper bound")

    @property
    def dim(self) -> int:
        return len(self.intervals)

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in self.intervals)

    def contains(self, other: "UniformBox") -> bool:
        if self.dim != other.dim:
            return False
        return all(
            a <= c and d <= b
            for (a, b), (c, d) in zip(self.intervals, other.intervals)
        )

    def pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo = np.asarray([a for a, _ in self.intervals])
        hi = np.asarray([b for _, b in self.intervals])
        inside = np.all((x >= lo) & (x <= hi), axis=1)
        return np.where(inside, 1.0 / self.volume, 0.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.asarray([a for a, _ in self.intervals])
        hi = np.asarray([b for _, b in self.intervals])
        return rng.uniform(lo, hi, size=(n, self.dim))


@dataclass(frozen=True, slots=True)
class CollapsedBox(ModelInfoDistribution):
    """A uniform box with at least one axis collapsed to a single point.

    Arises as a compression outcome: dropped coordinates are pinned to 0
    while kept coordinates stay uniform. Lebesgue-singular with respect to
    any full-dimensional density, which is all the TV computation needs.
    """

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        if any(a > b for a, b in ivs):
            raise InvalidSpec("intervals: lower bound must be <= upper bound")
        if all(a < b for a, b in ivs):
            raise InvalidSpec("intervals: at least one axis must be collapsed")

    @property
    def dim(self) -> int:
        return len(self.intervals)


@dataclass(frozen=True, slots=True)
class FiniteDiscrete(ModelInfoDistribution):
    atoms: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "atoms", tuple(_as_point(a) for a in self.atoms))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.atoms) != len(self.weights):
            raise InvalidSpec("atoms and weights must have the same length")
        if len(self.atoms) == 0:
            raise EmptyInput("finite discrete distribution needs at least one atom")
        if len(set(self.atoms)) != len(self.atoms):
            raise InvalidSpec("atoms must be distinct")
        dims = {len(a) for a in self.atoms}
        if len(dims) != 1:
            raise DimensionMismatch("all atoms must share one dimension")
        if any(w < 0 for w in self.weights):
            raise InvalidSpec("weights must be nonnegative")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidSpec(f"weights must sum to 1 within {MASS_TOL}, got {total!r}")

    @property
    def dim(self) -> int:
        return len(self.atoms[0])

    def as_mapping(self) -> dict:
        return dict(zip(self.atoms, self.weights))


@dataclass(frozen=True, slots=True)
class Mixture(ModelInfoDistribution):
    components: tuple[ModelInfoDistribution, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.components) != len(self.weights):
            raise InvalidSpec("components and weights must have the same length")
        if len(self.components) == 0:
            raise EmptyInput("mixture needs at least one component")
        if any(w < 0 for w in self.weights):
            raise InvalidSpec("weights must be nonnegative")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidSpec(f"weights must sum to 1 within {MASS_TOL}, got {total!r}")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise DimensionMismatch("mixture components must share one dimension")

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def flatten_discrete(self) -> FiniteDiscrete:
        """Collapse a mixture of finite/point distributions into one
        FiniteDiscrete (the mixture of atomic distributions is atomic)."""
        acc: dict[tuple[float, ...], list[float]] = {}
        for comp, w in zip(self.components, self.weights):
            if isinstance(comp, Mixture):
                comp = comp.flatten_discrete()
            if isinstance(comp, PointMass):
                acc.setdefault(comp.location, []).append(w)
            elif isinstance(comp, FiniteDiscrete):
                for atom, aw in zip(comp.atoms, comp.weights):
                    acc.setdefault(atom, []).append(w * aw)
            else:
                raise UnsupportedPair(
                    "mixture contains a non-discrete component; cannot flatten"
                )
        atoms = tuple(acc.keys())
        weights = tuple(math.fsum(ws) for ws in acc.values())
        return FiniteDiscrete(atoms, weights)


# ---------------------------------------------------------------------------
# KL / JS divergence and Bayesian privacy leakage
# ---------------------------------------------------------------------------


def kl_discrete(p: BeliefDistribution, q: BeliefDistribution) -> float:
    """KL(p || q) in nats over a shared ordered support."""
    if p.support != q.support:
        raise MisalignedSupport("kl_discrete requires identical ordered supports")
    terms = []
    for pi, qi in zip(p.mass, q.mass):
        if pi == 0.0:
            continue
        if qi == 0.0:
            raise AbsoluteContinuityViolated(
                "p has mass where q has none; KL(p||q) is infinite"
            )
        terms.append(pi * math.log(pi / qi))
    return max(0.0, math.fsum(terms))


def _union_alignment(
    p: BeliefDistribution, q: BeliefDistribution
) -> tuple[tuple, list[float], list[float]]:
    if p.support == q.support:
        return p.support, list(p.mass), list(q.mass)
    union = dict.fromkeys(p.support)
    union.update(dict.fromkeys(q.support))
    keys = list(union)
    try:
        keys.sort()
    except TypeError:
        # Mixed incomparable types: fall back to a total order on the repr.
        try:
            keys.sort(key=lambda v: (type(v).__name__, repr(v)))
        except Exception as exc:
            raise MisalignedSupport(
                "supports cannot be merged into one ordered union"
            ) from exc
    pm = p.as_mapping()
    qm = q.as_mapping()
    return (
        tuple(keys),
        [pm.get(k, 0.0) for k in keys],
        [qm.get(k, 0.0) for k in keys],
    )


def js_discrete(p: BeliefDistribution, q: BeliefDistribution) -> float:
    """Jensen-Shannon divergence in nats; always finite, at most ln 2.

    Differing supports are embedded in the canonically ordered union with
    zero padding before the midpoint construction.
    """
    _, pm, qm = _union_alignment(p, q)
    p_terms = []
    q_terms = []
    for pi, qi in zip(pm, qm):
        mi = 0.5 * (pi + qi)
        if pi > 0.0:
            p_terms.append(pi * math.log(pi / mi))
        if qi > 0.0:
            q_terms.append(qi * math.log(qi / mi))
    return max(0.0, 0.5 * math.fsum(p_terms) + 0.5 * math.fsum(q_terms))


def tv_discrete(p: BeliefDistribution, q: BeliefDistribution) -> float:
    """Total variation distance, half the L1 gap over the support union."""
    _, pm, qm = _union_alignment(p, q)
    return 0.5 * math.fsum(abs(pi - qi) for pi, qi in zip(pm, qm))


def product_belief(beliefs: Sequence[BeliefDistribution]) -> BeliefDistribution:
    """Independent product measure over tuples of per-client atoms.

    A single belief passes through unchanged; for two or more, atoms are
    tuples in client order and masses multiply.
    """
    parts = list(beliefs)
    if not parts:
        raise EmptyInput("product_belief needs at least one belief")
    if len(parts) == 1:
        return parts[0]
    support = [()]
    mass = [1.0]
    for belief in parts:
        support = [s + (a,) for s in support for a in belief.support]
        mass = [m * v for m in mass for v in belief.mass]
    return BeliefDistribution(tuple(support), tuple(mass))


def bayesian_privacy_leakage(
    prior: BeliefDistribution, posterior: BeliefDistribution
) -> float:
    """Per-client privacy leakage: sqrt of the JS divergence between the
    attacker's posterior belief and the prior belief."""
    return math.sqrt(js_discrete(posterior, prior))


def system_privacy_leakage(per_client: Sequence[float]) -> float:
    """Average the per-client leakages over the federation."""
    values = list(per_client)
    if not values:
        raise EmptyInput("system_privacy_leakage needs at least one client")
    return math.fsum(values) / len(values)


# ---------------------------------------------------------------------------
# quadrature and marginal beliefs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class QuadratureSpec:
    """Axis-aligned discretization grid: per-dimension bounds and cell counts.

    Continuous model-info distributions are reduced to the grid of cell
    centers, each carrying its exact cell mass.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    num: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", _as_point(self.lo))
        object.__setattr__(self, "hi", _as_point(self.hi))
        num = self.num
        if isinstance(num, (int, np.integer)):
            num = (int(num),)
        object.__setattr__(self, "num", tuple(int(n) for n in num))
        if not (len(self.lo) == len(self.hi) == len(self.num)):
            raise DimensionMismatch("lo, hi, num must have equal length")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise InvalidSpec("lo must be < hi per dimension")
        if any(n < 1 for n in self.num):
            raise InvalidSpec("num must be >= 1 per dimension")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def axis_edges(self, d: int) -> np.ndarray:
        return np.linspace(self.lo[d], self.hi[d], self.num[d] + 1)

    def axis_centers(self, d: int) -> np.ndarray:
        edges = self.axis_edges(d)
        return 0.5 * (edges[:-1] + edges[1:])

    def nodes(self) -> list[tuple[float, ...]]:
        axes = [self.axis_centers(d) for d in range(self.dim)]
        return [tuple(float(v) for v in pt) for pt in itertools.product(*axes)]


def _axis_cell_masses_gaussian(mean: float, var: float, edges: np.ndarray) -> np.ndarray:
    z = (edges - mean) / math.sqrt(var)
    cdf = norm.cdf(z)
    return np.diff(cdf)


def _axis_cell_masses_uniform(a: float, b: float, edges: np.ndarray) -> np.ndarray:
    clipped = np.clip(edges, a, b)
    return np.diff(clipped) / (b - a)


def _discretize(
    dist: ModelInfoDistribution, quadrature: QuadratureSpec | None
) -> tuple[list, list[float]]:
    """Reduce dist to (atoms, weights). Weights sum to the mass the grid
    captures, which may be < 1 for continuous distributions."""
    if isinstance(dist, PointMass):
        return [dist.location], [1.0]
    if isinstance(dist, FiniteDiscrete):
        return list(dist.atoms), list(dist.weights)
    if isinstance(dist, Mixture):
        acc: dict = {}
        order: list = []
        for comp, w in zip(dist.components, dist.weights):
            atoms, weights = _discretize(comp, quadrature)
            for atom, aw in zip(atoms, weights):
                if atom not in acc:
                    acc[atom] = 0.0
                    order.append(atom)
                acc[atom] += w * aw
        return order, [acc[a] for a in order]
    if quadrature is None:
        raise InvalidSpec(
            "quadrature: a QuadratureSpec is required for continuous model-info "
            "distributions"
        )
    if quadrature.dim != dist.dim:
        raise DimensionMismatch("quadrature dimension does not match distribution")
    per_axis: list[np.ndarray] = []
    if isinstance(dist, DiagonalGaussian):
        for d in range(dist.dim):
            per_axis.append(
                _axis_cell_masses_gaussian(
                    dist.mean[d], dist.variances[d], quadrature.axis_edges(d)
                )
            )
    elif isinstance(dist, UniformBox):
        for d in range(dist.dim):
            a, b = dist.intervals[d]
            per_axis.append(_axis_cell_masses_uniform(a, b, quadrature.axis_edges(d)))
    else:
        raise UnsupportedPair(f"cannot discretize {type(dist).__name__}")
    atoms = quadrature.nodes()
    weights = [
        float(math.prod(per_axis[d][idx[d]] for d in range(dist.dim)))
        for idx in itertools.product(*(range(n) for n in quadrature.num))
    ]
    return atoms, weights


def marginal_belief(
    kernel: ConditionalBelief,
    w_dist: ModelInfoDistribution,
    quadrature: QuadratureSpec | None = None,
) -> BeliefDistribution:
    """Attacker's marginal belief: mix the kernel rows over the distribution
    of released model information."""
    atoms, weights = _discretize(w_dist, quadrature)
    covered_pairs = [(a, w) for a, w in zip(atoms, weights) if kernel.covers(a)]
    covered_mass = math.fsum(w for _, w in covered_pairs)
    if covered_mass < 1.0 - COVERAGE_TOL:
        raise InsufficientKernelCoverage(
            f"kernel covers {covered_mass!r} of the model-info mass; "
            f"need at least {1.0 - COVERAGE_TOL}"
        )
    acc: dict = {}
    order: list = []
    for atom, w in covered_pairs:
        if w == 0.0:
            continue
        row = kernel.row(atom)
        for d, m in zip(row.support, row.mass):
            if d not in acc:
                acc[d] = []
                order.append(d)
            acc[d].append(w * m)
    totals = {d: math.fsum(acc[d]) for d in order}
    z = math.fsum(totals.values())
    if z <= 0.0:
        raise InsufficientKernelCoverage("kernel rows carry no mass")
    return BeliefDistribution(tuple(order), tuple(totals[d] / z for d in order))


# ---------------------------------------------------------------------------
# total-variation distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ClosedForm:
    """Exact TV for supported pairs: two finite discrete distributions, two
    uniform boxes, or two 1-D Gaussians."""


@dataclass(frozen=True, slots=True)
class Grid:
    """1-D density quadrature of 0.5 * integral |p - q|."""

    points: int = 200_001
    span: float = 12.0  # half-width of the Gaussian integration window, in sd


@dataclass(frozen=True, slots=True)
class MonteCarlo:
    """Seed-deterministic 0.5 * E_p |1 - q/p| estimator."""

    samples: int
    seed: int


class TVEstimate(float):
    """A TV point estimate that also carries its Monte Carlo standard error."""

    __slots__ = ("stderr", "samples")

    def __new__(cls, value: float, stderr: float, samples: int):
        obj = super().__new__(cls, value)
        obj.stderr = float(stderr)
        obj.samples = int(samples)
        return obj


def _tv_finite(p: FiniteDiscrete, q: FiniteDiscrete) -> float:
    pm = p.as_mapping()
    qm = q.as_mapping()
    keys = dict.fromkeys(list(pm) + list(qm))
    return min(
        1.0, 0.5 * math.fsum(abs(pm.get(k, 0.0) - qm.get(k, 0.0)) for k in keys)
    )


def _tv_boxes(p: UniformBox, q: UniformBox) -> float:
    overlap = 1.0
    for (a, b), (c, d) in zip(p.intervals, q.intervals):
        lo, hi = max(a, c), min(b, d)
        if lo >= hi:
            overlap = 0.0
            break
        overlap *= hi - lo
    vp, vq = p.volume, q.volume
    # Half the L1 distance of two flat densities: the overlap contributes the
    # density gap, each exclusive region contributes its own full density.
    return 0.5 * (
        overlap * abs(1.0 / vp - 1.0 / vq)
        + (vp - overlap) / vp
        + (vq - overlap) / vq
    )


def _gaussian_crossings(
    m1: float, v1: float, m2: float, v2: float
) -> tuple[float, ...]:
    s1, s2 = math.sqrt(v1), math.sqrt(v2)
    if v1 == v2:
        if m1 == m2:
            return ()
        return (0.5 * (m1 + m2),)
    # log p1 - log p2 = 0 is quadratic in x.
    aq = v1 - v2
    bq = -2.0 * (v1 * m2 - v2 * m1)
    cq = v1 * m2 * m2 - v2 * m1 * m1 + 2.0 * v1 * v2 * math.log(s2 / s1)
    disc = bq * bq - 4.0 * aq * cq
    if disc <= 0.0:
        # Distinct sigmas always cross twice; a nonpositive discriminant only
        # appears through rounding when the distributions nearly coincide.
        return ()
    root = math.sqrt(disc)
    x1 = (-bq - root) / (2.0 * aq)
    x2 = (-bq + root) / (2.0 * aq)
    return (min(x1, x2), max(x1, x2))


def _tv_gaussian_1d(p: DiagonalGaussian, q: DiagonalGaussian) -> float:
    m1, v1 = p.mean[0], p.variances[0]
    m2, v2 = q.mean[0], q.variances[0]
    crossings = _gaussian_crossings(m1, v1, m2, v2)
    if not crossings:
        return 0.0
    s1, s2 = math.sqrt(v1), math.sqrt(v2)
    if len(crossings) == 1:
        (xc,) = crossings
        hi, lo = max(m1, m2), min(m1, m2)
        s = s1  # equal sigmas here
        return float(norm.cdf((xc - lo) / s) - norm.cdf((xc - hi) / s))
    x1, x2 = crossings
    fp = norm.cdf((x2 - m1) / s1) - norm.cdf((x1 - m1) / s1)
    fq = norm.cdf((x2 - m2) / s2) - norm.cdf((x1 - m2) / s2)
    return float(abs(fp - fq))


def _tv_mixture_vs_base(base: ModelInfoDistribution, mix: Mixture) -> float:
    """TV between an absolutely continuous base and a mixture whose
    components are either the base itself or singular with respect to it
    (point masses, boxes with a collapsed axis). Then TV = 1 - (weight of
    the components equal to the base)."""
    if not isinstance(base, (UniformBox, DiagonalGaussian)):
        raise UnsupportedClosedForm(
            f"no closed form for ({type(base).__name__}, Mixture)"
        )
    same = 0.0
    for comp, w in zip(mix.components, mix.weights):
        if comp == base:
            same += w
        elif isinstance(comp, (PointMass, CollapsedBox, FiniteDiscrete)):
            continue  # singular against a full-dimensional density
        else:
            raise UnsupportedClosedForm(
                "mixture component is neither the base distribution nor "
                "singular with respect to it"
            )
    return min(1.0, max(0.0, 1.0 - same))


def _tv_closed_form(p: ModelInfoDistribution, q: ModelInfoDistribution) -> float:
    if isinstance(p, Mixture) or isinstance(q, Mixture):
        # Discrete mixtures collapse to finite distributions; continuous
        # bases pair with singular-component mixtures.
        if isinstance(p, Mixture) and isinstance(q, Mixture):
            try:
                return _tv_finite(p.flatten_discrete(), q.flatten_discrete())
            except UnsupportedPair:
                raise UnsupportedClosedForm("no closed form for (Mixture, Mixture)")
        base, mix = (q, p) if isinstance(p, Mixture) else (p, q)
        assert isinstance(mix, Mixture)
        if isinstance(base, (FiniteDiscrete, PointMass)):
            try:
                flat = mix.flatten_discrete()
            except UnsupportedPair:
                raise UnsupportedClosedForm(
                    "mixture with continuous components has no closed form "
                    "against a discrete distribution"
                )
            if isinstance(base, PointMass):
                base = FiniteDiscrete((base.location,), (1.0,))
            return _tv_finite(base, flat)
        return _tv_mixture_vs_base(base, mix)
    if isinstance(p, FiniteDiscrete) and isinstance(q, FiniteDiscrete):
        return _tv_finite(p, q)
    if isinstance(p, UniformBox) and isinstance(q, UniformBox):
        return _tv_boxes(p, q)
    if isinstance(p, DiagonalGaussian) and isinstance(q, DiagonalGaussian):
        if p.dim == 1:
            return _tv_gaussian_1d(p, q)
        raise UnsupportedClosedForm(
            "Gaussian TV has a closed form only in one dimension; use "
            "gaussian_tv_sandwich or MonteCarlo"
        )
    raise UnsupportedClosedForm(
        f"no closed form for ({type(p).__name__}, {type(q).__name__})"
    )


def _grid_range(
    p: ModelInfoDistribution, q: ModelInfoDistribution, span: float
) -> tuple[float, float]:
    lo, hi = math.inf, -math.inf
    for dist in (p, q):
        if isinstance(dist, DiagonalGaussian):
            s = math.sqrt(dist.variances[0])
            lo = min(lo, dist.mean[0] - span * s)
            hi = max(hi, dist.mean[0] + span * s)
        elif isinstance(dist, UniformBox):
            a, b = dist.intervals[0]
            lo = min(lo, a)
            hi = max(hi, b)
        else:
            raise UnsupportedPair(
                f"grid quadrature needs a 1-D density, got {type(dist).__name__}"
            )
    return lo, hi


def _tv_grid(p: ModelInfoDistribution, q: ModelInfoDistribution, method: Grid) -> float:
    if isinstance(p, FiniteDiscrete) and isinstance(q, FiniteDiscrete):
        return _tv_finite(p, q)
    if p.dim != 1:
        raise UnsupportedPair("grid quadrature is one-dimensional only")
    lo, hi = _grid_range(p, q, method.span)
    xs = np.linspace(lo, hi, method.points)
    cols = xs.reshape(-1, 1)
    diff = np.abs(p.pdf(cols) - q.pdf(cols))
    return float(min(1.0, 0.5 * np.trapezoid(diff, xs)))


def _mc_sampler_order(
    p: ModelInfoDistribution, q: ModelInfoDistribution
) -> tuple[ModelInfoDistribution, ModelInfoDistribution]:
    """Pick the sampling side so its support contains the other's. TV is
    symmetric, so swapping the pair is free."""
    if isinstance(p, DiagonalGaussian) and isinstance(q, DiagonalGaussian):
        # Both cover all of R^m; sample from the wider one to keep the
        # density ratio (and the estimator variance) small.
        return (p, q) if math.prod(p.variances) >= math.prod(q.variances) else (q, p)
    if isinstance(p, UniformBox) and isinstance(q, UniformBox):
        if p.contains(q):
            return p, q
        if q.contains(p):
            return q, p
        raise UnsupportedPair(
            "Monte Carlo TV needs one box to contain the other; use ClosedForm "
            "for general overlapping boxes"
        )
    if isinstance(p, FiniteDiscrete) and isinstance(q, FiniteDiscrete):
        pm, qm = p.as_mapping(), q.as_mapping()
        if all(a in pm and pm[a] > 0 for a, w in qm.items() if w > 0):
            return p, q
        if all(a in qm and qm[a] > 0 for a, w in pm.items() if w > 0):
            return q, p
        raise UnsupportedPair(
            "Monte Carlo TV needs one support to contain the other; use "
            "ClosedForm for finite distributions"
        )
    raise UnsupportedPair(
        f"Monte Carlo TV unsupported for ({type(p).__name__}, {type(q).__name__})"
    )


def _mc_chunk_finite(
    sampler: FiniteDiscrete, ratio: np.ndarray, seed: np.random.SeedSequence, n: int
) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(sampler.atoms), size=n, p=np.asarray(sampler.weights))
    y = np.abs(1.0 - ratio[idx])
    return float(np.sum(y)), float(np.sum(y * y))


def _mc_chunk_density(
    sampler, other, seed: np.random.SeedSequence, n: int
) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    xs = sampler.sample(rng, n)
    y = np.abs(1.0 - other.pdf(xs) / sampler.pdf(xs))
    return float(np.sum(y)), float(np.sum(y * y))


def _tv_monte_carlo(
    p: ModelInfoDistribution, q: ModelInfoDistribution, method: MonteCarlo
) -> TVEstimate:
    if method.samples < 2:
        raise InvalidSpec("samples: Monte Carlo needs at least 2 samples")
    sampler, other = _mc_sampler_order(p, q)
    master = np.random.SeedSequence(method.seed)
    children = master.spawn(_MC_CHUNKS)
    base, extra = divmod(method.samples, _MC_CHUNKS)
    counts = [base + (1 if i < extra else 0) for i in range(_MC_CHUNKS)]

    if isinstance(sampler, FiniteDiscrete):
        sm = sampler.as_mapping()
        om = other.as_mapping()  # type: ignore[union-attr]
        ratio = np.asarray([om.get(a, 0.0) / sm[a] for a in sampler.atoms])
        work = lambda i: _mc_chunk_finite(sampler, ratio, children[i], counts[i])
    else:
        work = lambda i: _mc_chunk_density(sampler, other, children[i], counts[i])

    jobs = [i for i in range(_MC_CHUNKS) if counts[i] > 0]
    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(i) for i in jobs]

    n = method.samples
    total = math.fsum(r[0] for r in results)
    total_sq = math.fsum(r[1] for r in results)
    mean = total / n
    var = max(0.0, total_sq / n - mean * mean) * n / (n - 1)
    est = min(1.0, max(0.0, 0.5 * mean))
    stderr = 0.5 * math.sqrt(var / n)
    return TVEstimate(est, stderr, n)


def tv_distance(
    p: ModelInfoDistribution,
    q: ModelInfoDistribution,
    method: Union[ClosedForm, Grid, MonteCarlo, type] = ClosedForm(),
) -> float:
    """Total variation distance between two model-info distributions.

    ClosedForm covers finite/finite, box/box, and 1-D Gaussian pairs. Grid
    integrates 1-D densities numerically. MonteCarlo returns a TVEstimate
    (a float subclass) whose .stderr field reports the standard error of the
    0.5 * E|1 - q/p| estimator; results are deterministic in the seed
    regardless of NFLFED_THREADS.
    """
    if isinstance(method, type):
        method = method()
    if p.dim != q.dim:
        raise DimensionMismatch(f"dim {p.dim} vs {q.dim}")
    if isinstance(method, ClosedForm):
        return _tv_closed_form(p, q)
    if isinstance(method, Grid):
        return _tv_grid(p, q, method)
    if isinstance(method, MonteCarlo):
        return _tv_monte_carlo(p, q, method)
    raise InvalidSpec(f"method: unknown TV method {method!r}")


def gaussian_tv_sandwich(
    sigmas: Sequence[float] | float, sigma_eps: float
) -> tuple[float, float]:
    """Lower and upper bounds on the TV distance between a diagonal Gaussian
    with per-dimension scales sigmas and the same Gaussian after adding
    independent N(0, sigma_eps^2) noise to every coordinate.

    Both bounds are proportional to X = min(1, sigma_eps^2 * sqrt(sum 1/sigma_i^4)):
    the lower bound is X/100 and the upper bound is min(1, 3X/2).
    """
    if isinstance(sigmas, (int, float, np.integer, np.floating)):
        sigmas = (float(sigmas),)
    sig = [float(s) for s in sigmas]
    if not sig:
        raise EmptyInput("sigmas must be nonempty")
    if any(s <= 0 for s in sig):
        raise NonpositiveVariance("per-dimension sigmas must be strictly positive")
    if sigma_eps < 0:
        raise NonpositiveVariance("sigma_eps must be nonnegative")
    x = min(1.0, sigma_eps * sigma_eps * math.sqrt(math.fsum(1.0 / s**4 for s in sig)))
    return (x / 100.0, min(1.0, 1.5 * x))
