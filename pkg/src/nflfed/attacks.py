"""Bayesian inference attacks on released model information.

The central operation scores every candidate private-data point d by
IH(d|w) = I(w|d) + H(d), the log-likelihood of the observed information
plus the log-prior, and returns the maximizer together with the
softmax-normalized posterior over the candidate grid. Concrete attack
instances (gradient matching, label inference from logit-gradient signs,
norm scoring) plug in as likelihood specs or stand-alone classifiers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence, Union

import numpy as np

from .divergence import (
    BeliefDistribution,
    ConditionalBelief,
    ModelInfoDistribution,
    QuadratureSpec,
    _discretize,
)
from .errors import (
    AbsoluteContinuityViolated,
    DegenerateCalibration,
    DimensionMismatch,
    EmptyGrid,
    EmptyInput,
    InvalidSpec,
    LikelihoodUndefined,
    NoNegativeCoordinate,
    NonFiniteLoss,
    NonpositiveSigma,
    ProbabilityOutOfRange,
    UnsupportedMechanism,
)
from .mechanisms import Identity, ModelInfo, Randomization, _require_plain

__all__ = [
    "AttackResult",
    "AttackSpec",
    "CosineGradientMatch",
    "Flat",
    "GaussianGradientMatch",
    "LabelPrior",
    "LinearRegressionModel",
    "NormScoring",
    "SignBased",
    "SoftmaxLinearModel",
    "TotalVariationPrior",
    "bayesian_map_attack",
    "direct_label_inference",
    "dlg_gradient_match",
    "empirical_posterior",
    "norm_scoring_attack",
]


# ---------------------------------------------------------------------------
# toy models
# ---------------------------------------------------------------------------


class GradientModel(Protocol):
    def gradient(self, d: tuple) -> np.ndarray: ...


@dataclass(frozen=True, slots=True)
class LinearRegressionModel:
    """Squared loss (theta.x - y)^2 at a fixed parameter snapshot.

    Candidates are (x_1, ..., x_m, y) tuples; the released information is
    the parameter gradient 2(theta.x - y)x.
    """

    theta: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        if len(self.theta) == 0:
            raise EmptyInput("theta must be nonempty")

    def gradient(self, d: tuple) -> np.ndarray:
        d = _as_candidate(d)
        if len(d) != len(self.theta) + 1:
            raise DimensionMismatch(
                f"candidate needs {len(self.theta)} features plus a target, got {len(d)}"
            )
        x = np.asarray(d[:-1], dtype=float)
        residual = float(np.dot(self.theta, x) - d[-1])
        return 2.0 * residual * x


def _softmax(u: np.ndarray) -> np.ndarray:
    z = np.exp(u - u.max())
    return z / z.sum()


@dataclass(frozen=True, slots=True)
class SoftmaxLinearModel:
    """Cross-entropy loss of softmax(W x) at a fixed weight snapshot.

    weights is a (num_classes, num_features) row-major matrix; candidates
    are (x_1, ..., x_m, label) tuples with an integral label coordinate.
    The released information is the flattened weight gradient
    (softmax(Wx) - onehot(label)) x^T.
    """

    weights: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(float(v) for v in row) for row in self.weights)
        object.__setattr__(self, "weights", rows)
        if len(rows) < 2 or len(rows[0]) == 0:
            raise InvalidSpec("weights must be a (>=2 classes) x (>=1 features) matrix")
        if len({len(r) for r in rows}) != 1:
            raise InvalidSpec("weight rows must have equal length")

    @property
    def num_classes(self) -> int:
        return len(self.weights)

    @property
    def num_features(self) -> int:
        return len(self.weights[0])

    def logit_gradient(self, d: tuple) -> np.ndarray:
        """softmax(Wx) - onehot(label): the signal direct label inference reads."""
        x, c = self._split(d)
        p = _softmax(np.asarray(self.weights, dtype=float) @ x)
        p[c] -= 1.0
        return p

    def gradient(self, d: tuple) -> np.ndarray:
        x, c = self._split(d)
        g = self.logit_gradient(d)
        return np.outer(g, x).ravel()

    def _split(self, d: tuple) -> tuple[np.ndarray, int]:
        d = _as_candidate(d)
        if len(d) != self.num_features + 1:
            raise DimensionMismatch(
                f"candidate needs {self.num_features} features plus a label, got {len(d)}"
            )
        label = d[-1]
        c = int(label)
        if c != label or not 0 <= c < self.num_classes:
            raise LikelihoodUndefined(f"label {label!r} is not a class index")
        return np.asarray(d[:-1], dtype=float), c


# ---------------------------------------------------------------------------
# likelihood and prior specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class GaussianGradientMatch:
    """I(w|d) = -||w - grad(d)||^2 / (2 sigma^2); sigma rescales temperature
    only, never the argmax."""

    model: GradientModel
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise NonpositiveSigma("sigma must be positive")


@dataclass(frozen=True, slots=True)
class CosineGradientMatch:
    """I(w|d) = cosine similarity between w and grad(d)."""

    model: GradientModel


@dataclass(frozen=True, slots=True)
class NormScoring:
    """Bin-indicator likelihood on ||w||_2: candidate class c scores 0 if
    the norm lies in bins[c], -inf otherwise."""

    bins: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        bins = tuple((float(lo), float(hi)) for lo, hi in self.bins)
        object.__setattr__(self, "bins", bins)
        if len(bins) == 0:
            raise EmptyInput("at least one bin is required")
        for lo, hi in bins:
            if lo > hi:
                raise InvalidSpec(f"bin ({lo}, {hi}) has lo > hi")
        for i in range(len(bins)):
            for j in range(i + 1, len(bins)):
                if max(bins[i][0], bins[j][0]) <= min(bins[i][1], bins[j][1]):
                    raise InvalidSpec(f"bins {i} and {j} overlap")


@dataclass(frozen=True, slots=True)
class SignBased:
    """Candidate class c scores 0 if coordinate c of w is strictly negative,
    -inf otherwise (softmax-CE logit gradients are negative exactly at the
    true label)."""


@dataclass(frozen=True, slots=True)
class Flat:
    """H(d) = 0 for every candidate."""


@dataclass(frozen=True, slots=True)
class LabelPrior:
    """H(d) = log frequency of the candidate's class (last coordinate)."""

    frequencies: tuple[float, ...]

    def __post_init__(self) -> None:
        freqs = tuple(float(f) for f in self.frequencies)
        object.__setattr__(self, "frequencies", freqs)
        if len(freqs) == 0:
            raise EmptyInput("frequencies must be nonempty")
        if any(not 0.0 <= f <= 1.0 for f in freqs):
            raise ProbabilityOutOfRange("class frequencies must lie in [0, 1]")
        if abs(math.fsum(freqs) - 1.0) > 1e-9:
            raise InvalidSpec("class frequencies must sum to 1")


@dataclass(frozen=True, slots=True)
class TotalVariationPrior:
    """H(d) = -weight * sum |d_{i+1} - d_i| over the candidate coordinates.

    Smoothness hook for image-like candidates; penalizes jumpy signals.
    """

    weight: float

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise InvalidSpec("weight must be >= 0")


LikelihoodSpec = Union[GaussianGradientMatch, CosineGradientMatch, NormScoring, SignBased]
PriorSpec = Union[Flat, LabelPrior, TotalVariationPrior]


def _as_candidate(d) -> tuple:
    return d if isinstance(d, tuple) else (d,)


def _class_of(d) -> int:
    d = _as_candidate(d)
    label = d[-1]
    c = int(label)
    if c != label:
        raise LikelihoodUndefined(f"candidate class {label!r} is not integral")
    return c


@dataclass(frozen=True, slots=True)
class AttackSpec:
    """A Bayesian attack: likelihood spec, prior spec, finite candidate grid."""

    likelihood: LikelihoodSpec
    candidate_grid: tuple
    prior: PriorSpec = field(default_factory=Flat)

    def __post_init__(self) -> None:
        grid = tuple(self.candidate_grid)
        object.__setattr__(self, "candidate_grid", grid)
        if len(grid) == 0:
            raise EmptyGrid("candidate_grid must be nonempty")
        if len(set(grid)) != len(grid):
            raise InvalidSpec("candidate_grid entries must be distinct")


@dataclass(frozen=True, slots=True)
class AttackResult:
    """map_estimate maximizes score_trace; posterior is its softmax.

    For continuous gradient descent (dlg_gradient_match) the posterior is a
    point mass at the final candidate, residual holds the final gradient
    mismatch norm, and descent records the objective value per step.
    """

    map_estimate: tuple
    posterior: BeliefDistribution
    score_trace: tuple[float, ...]
    success: bool | None = None
    residual: float | None = None
    descent: tuple[float, ...] = ()


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


def _log_likelihood(spec: LikelihoodSpec, w: np.ndarray, d) -> float:
    if isinstance(spec, GaussianGradientMatch):
        g = np.asarray(spec.model.gradient(_as_candidate(d)), dtype=float)
        if g.shape != w.shape:
            raise DimensionMismatch(
                f"observed info has dim {w.shape[0]}, model gradient {g.shape[0]}"
            )
        if not np.all(np.isfinite(g)):
            raise LikelihoodUndefined(f"model gradient at {d!r} is not finite")
        diff = w - g
        return -float(diff @ diff) / (2.0 * spec.sigma**2)
    if isinstance(spec, CosineGradientMatch):
        g = np.asarray(spec.model.gradient(_as_candidate(d)), dtype=float)
        if g.shape != w.shape:
            raise DimensionMismatch(
                f"observed info has dim {w.shape[0]}, model gradient {g.shape[0]}"
            )
        nw, ng = float(np.linalg.norm(w)), float(np.linalg.norm(g))
        if nw == 0.0 or ng == 0.0 or not math.isfinite(ng):
            raise LikelihoodUndefined("cosine similarity needs nonzero finite vectors")
        return float(w @ g) / (nw * ng)
    if isinstance(spec, NormScoring):
        c = _class_of(d)
        if not 0 <= c < len(spec.bins):
            raise LikelihoodUndefined(f"class {c} has no bin")
        lo, hi = spec.bins[c]
        return 0.0 if lo <= float(np.linalg.norm(w)) <= hi else -math.inf
    if isinstance(spec, SignBased):
        c = _class_of(d)
        if not 0 <= c < w.shape[0]:
            raise LikelihoodUndefined(f"class {c} is outside the gradient dimension")
        return 0.0 if w[c] < 0.0 else -math.inf
    raise InvalidSpec(f"unknown likelihood spec {type(spec).__name__}")


def _log_prior(spec: PriorSpec, d) -> float:
    if isinstance(spec, Flat):
        return 0.0
    if isinstance(spec, LabelPrior):
        c = _class_of(d)
        if not 0 <= c < len(spec.frequencies):
            raise LikelihoodUndefined(f"class {c} has no prior frequency")
        f = spec.frequencies[c]
        return math.log(f) if f > 0.0 else -math.inf
    if isinstance(spec, TotalVariationPrior):
        t = _as_candidate(d)
        jump = math.fsum(abs(t[i + 1] - t[i]) for i in range(len(t) - 1))
        return -spec.weight * jump
    raise InvalidSpec(f"unknown prior spec {type(spec).__name__}")


def _softmax_posterior(grid: tuple, scores: list[float]) -> BeliefDistribution:
    top = max(scores)
    if top == -math.inf:
        raise LikelihoodUndefined("every candidate has zero posterior mass")
    weights = [math.exp(s - top) if s > -math.inf else 0.0 for s in scores]
    total = math.fsum(weights)
    return BeliefDistribution(grid, tuple(v / total for v in weights))


def bayesian_map_attack(
    spec: AttackSpec, observed_w: ModelInfo, ground_truth=None
) -> AttackResult:
    """Exhaustive maximum a posteriori attack over the candidate grid.

    Scores IH(d|w) = I(w|d) + H(d) for every candidate, breaks ties at the
    lowest grid index, and reports the softmax posterior alongside.
    """
    _require_plain(observed_w)
    grid = spec.candidate_grid
    if len(grid) == 0:
        raise EmptyGrid("candidate_grid must be nonempty")
    w = np.asarray(observed_w.values, dtype=float)
    scores: list[float] = []
    for d in grid:
        s = _log_likelihood(spec.likelihood, w, d) + _log_prior(spec.prior, d)
        if math.isnan(s):
            raise LikelihoodUndefined(f"score at candidate {d!r} is NaN")
        scores.append(s)
    best = max(range(len(grid)), key=scores.__getitem__)
    posterior = _softmax_posterior(grid, scores)
    success = None if ground_truth is None else bool(grid[best] == ground_truth)
    return AttackResult(
        map_estimate=_as_candidate(grid[best]),
        posterior=posterior,
        score_trace=tuple(scores),
        success=success,
    )


# ---------------------------------------------------------------------------
# label attacks
# ---------------------------------------------------------------------------


def direct_label_inference(logit_gradient: Sequence[float]) -> int:
    """Recover the label from a softmax-CE logit gradient g = p - onehot(c).

    Exactly one coordinate is strictly negative on valid input; with noise,
    falls back to the most negative coordinate.
    """
    g = tuple(float(v) for v in logit_gradient)
    if len(g) == 0:
        raise EmptyInput("logit gradient must be nonempty")
    negatives = [i for i, v in enumerate(g) if v < 0.0]
    if not negatives:
        raise NoNegativeCoordinate(
            "no strictly negative coordinate; not a softmax-CE logit gradient"
        )
    if len(negatives) == 1:
        return negatives[0]
    return min(range(len(g)), key=g.__getitem__)


def norm_scoring_attack(
    cut_gradients: Sequence[Sequence[float]],
    labels: Sequence[int],
    labels_known_fraction: float = 0.1,
) -> tuple[int, ...]:
    """Binary label attack that thresholds per-sample gradient norms.

    The first ceil(fraction * n) samples form the calibration subset; the
    threshold is the midpoint of the two class-conditional mean norms there,
    and every sample with a larger norm is predicted positive.
    """
    n = len(cut_gradients)
    if n == 0:
        raise EmptyInput("cut_gradients must be nonempty")
    if len(labels) != n:
        raise DimensionMismatch(f"{n} gradients but {len(labels)} labels")
    if not 0.0 < labels_known_fraction <= 1.0:
        raise ProbabilityOutOfRange("labels_known_fraction must lie in (0, 1]")
    y = tuple(int(v) for v in labels)
    if any(v not in (0, 1) for v in y):
        raise InvalidSpec("labels must be binary 0/1")
    norms = [float(np.linalg.norm(np.asarray(g, dtype=float))) for g in cut_gradients]
    k = min(n, max(1, math.ceil(labels_known_fraction * n)))
    pos = [norms[i] for i in range(k) if y[i] == 1]
    neg = [norms[i] for i in range(k) if y[i] == 0]
    if not pos or not neg:
        raise DegenerateCalibration(
            "calibration subset must contain both classes"
        )
    tau = (math.fsum(pos) / len(pos) + math.fsum(neg) / len(neg)) / 2.0
    return tuple(1 if v > tau else 0 for v in norms)


# ---------------------------------------------------------------------------
# deep leakage from gradients (continuous descent)
# ---------------------------------------------------------------------------


def _objective(w: np.ndarray, model: GradientModel, d: np.ndarray) -> float:
    g = np.asarray(model.gradient(tuple(float(v) for v in d)), dtype=float)
    if g.shape != w.shape:
        raise DimensionMismatch(
            f"observed info has dim {w.shape[0]}, model gradient {g.shape[0]}"
        )
    diff = w - g
    # overflow to inf is fine: the descent loop reports it as NonFiniteLoss
    with np.errstate(over="ignore"):
        return float(diff @ diff)


def dlg_gradient_match(
    observed_grad: Sequence[float],
    model: GradientModel,
    init: tuple,
    steps: int = 200,
    lr: float = 0.05,
    ground_truth=None,
) -> AttackResult:
    """Gradient descent on ||w - grad(d)||^2 over continuous candidates.

    Descent directions come from central finite differences of the
    objective, so the model only needs to expose gradient(d). Returns the
    final candidate, its residual norm, and the per-step objective trace.
    """
    if steps < 0:
        raise InvalidSpec("steps must be >= 0")
    w = np.asarray(observed_grad, dtype=float)
    d = np.asarray(_as_candidate(init), dtype=float)
    trace: list[float] = []
    value = _objective(w, model, d)
    for _ in range(steps):
        if not math.isfinite(value) or not np.all(np.isfinite(d)):
            raise NonFiniteLoss("descent diverged")
        trace.append(value)
        grad = np.empty_like(d)
        for i in range(d.shape[0]):
            h = 1e-6 * max(1.0, abs(float(d[i])))
            dp, dm = d.copy(), d.copy()
            dp[i] += h
            dm[i] -= h
            grad[i] = (_objective(w, model, dp) - _objective(w, model, dm)) / (2.0 * h)
        d = d - lr * grad
        value = _objective(w, model, d)
    if not math.isfinite(value) or not np.all(np.isfinite(d)):
        raise NonFiniteLoss("descent diverged")
    trace.append(value)
    estimate = tuple(float(v) for v in d)
    success = None
    if ground_truth is not None:
        truth = np.asarray(_as_candidate(ground_truth), dtype=float)
        success = bool(
            truth.shape == d.shape and np.allclose(d, truth, rtol=0.0, atol=1e-6)
        )
    return AttackResult(
        map_estimate=estimate,
        posterior=BeliefDistribution((estimate,), (1.0,)),
        score_trace=(-value,),
        success=success,
        residual=math.sqrt(value),
        descent=tuple(trace),
    )


# ---------------------------------------------------------------------------
# empirical attacker belief
# ---------------------------------------------------------------------------


def _kernel_row_atoms(
    kernel: ConditionalBelief, d, quadrature: QuadratureSpec | None
) -> tuple[tuple, tuple[float, ...]]:
    row = kernel.row(d)
    if isinstance(row, BeliefDistribution):
        return row.support, row.mass
    if isinstance(row, ModelInfoDistribution):
        atoms, weights = _discretize(row, quadrature)
        return tuple(atoms), tuple(weights)
    raise InvalidSpec(f"kernel row at {d!r} has unsupported type {type(row).__name__}")


def _atom_vector(atom) -> tuple[float, ...] | None:
    if isinstance(atom, bool):
        return None
    if isinstance(atom, (int, float)):
        return (float(atom),)
    if (
        isinstance(atom, tuple)
        and atom
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in atom)
    ):
        return tuple(float(v) for v in atom)
    return None


def _randomization_rows(atoms: Sequence, sigma: float) -> dict:
    """Gaussian-kernel transition rows over a finite atom set.

    Row w puts weight exp(-||w - w'||^2 / (2 sigma^2)) on each atom w',
    normalized. This is the finite-support discretization of additive
    Gaussian noise: relative weights match the noise density at the atoms.
    """
    vectors = []
    for atom in atoms:
        vec = _atom_vector(atom)
        if vec is None or (vectors and len(vec) != len(vectors[0][1])):
            raise UnsupportedMechanism(
                "randomized channels need numeric atoms of a common dimension; "
                f"got {atom!r}"
            )
        vectors.append((atom, vec))
    rows: dict = {}
    for w, v in vectors:
        logs = [
            -math.fsum((a - b) ** 2 for a, b in zip(v, u)) / (2.0 * sigma**2)
            for _, u in vectors
        ]
        top = max(logs)
        weights = [math.exp(s - top) for s in logs]
        z = math.fsum(weights)
        rows[w] = {wp: t / z for (wp, _), t in zip(vectors, weights)}
    return rows


def empirical_posterior(
    mechanism,
    prior: BeliefDistribution,
    kernel: ConditionalBelief,
    quadrature: QuadratureSpec | None = None,
    *,
    true_data=None,
) -> BeliefDistribution:
    """Attacker's belief over private data after observing protected info.

    kernel maps each candidate d to the release distribution of the model
    information; mechanism is Identity (or None) for an unprotected release,
    a Randomization config (discretized onto the released atoms as a
    Gaussian-kernel transition matrix), or a ConditionalBelief channel
    mapping each released atom to a distribution over protected atoms. The
    attacker knows the mechanism: Bayes runs against the protected channel,
    and the resulting posterior kernel is averaged over the protected
    release distribution conditioned on true_data. Without true_data the
    release distribution is the prior predictive, which averages the
    posterior kernel back to the prior itself.
    """
    if mechanism is None:
        mechanism = Identity()
    if not isinstance(mechanism, (Identity, Randomization, ConditionalBelief)):
        raise UnsupportedMechanism(
            "empirical_posterior needs Identity, Randomization, or an explicit "
            f"channel kernel; got {type(mechanism).__name__}"
        )

    if true_data is not None:
        try:
            kernel.row(true_data)
        except KeyError:
            raise InvalidSpec(f"kernel does not cover true_data {true_data!r}") from None

    # forward rows K(w|d) on a common released-atom space
    rows: dict = {}
    for d in prior.support:
        atoms, weights = _kernel_row_atoms(kernel, d, quadrature)
        rows[d] = dict(zip(atoms, weights))
    source_rows = list(rows.values())
    if true_data is not None and true_data not in rows:
        t_atoms, t_weights = _kernel_row_atoms(kernel, true_data, quadrature)
        source_rows.append(dict(zip(t_atoms, t_weights)))

    channel_rows: dict | None = None
    if isinstance(mechanism, Randomization) and mechanism.sigma_eps > 0.0:
        source = sorted(
            {w for row in source_rows for w in row},
            key=lambda a: (type(a).__name__, a),
        )
        channel_rows = _randomization_rows(source, mechanism.sigma_eps)
    elif isinstance(mechanism, ConditionalBelief):
        channel_rows = {}
        for row in source_rows:
            for w, mass in row.items():
                if mass == 0.0 or w in channel_rows:
                    continue
                try:
                    trow = mechanism.row(w)
                except KeyError:
                    raise InvalidSpec(
                        f"channel does not cover released atom {w!r}"
                    ) from None
                if not isinstance(trow, BeliefDistribution):
                    raise InvalidSpec("channel rows must be finite belief distributions")
                channel_rows[w] = dict(zip(trow.support, trow.mass))

    def push(dist: dict) -> dict:
        if channel_rows is None:
            return dist
        out: dict = {}
        for w, mass in dist.items():
            if mass == 0.0:
                continue
            for wp, t in channel_rows[w].items():
                out[wp] = out.get(wp, 0.0) + mass * t
        return out

    protected_rows = {d: push(rows[d]) for d in prior.support}
    prior_map = dict(zip(prior.support, prior.mass))

    # release distribution conditioned on the true data (prior predictive
    # when no true datum is supplied)
    if true_data is None:
        p_s: dict = {}
        for d in prior.support:
            for wp, t in protected_rows[d].items():
                p_s[wp] = p_s.get(wp, 0.0) + prior_map[d] * t
    else:
        t_atoms, t_weights = _kernel_row_atoms(kernel, true_data, quadrature)
        p_s = push(dict(zip(t_atoms, t_weights)))

    released = sorted(
        {wp for row in protected_rows.values() for wp in row} | set(p_s),
        key=lambda a: (type(a).__name__, a),
    )
    mass = {d: [] for d in prior.support}
    for wp in released:
        evidence = math.fsum(
            prior_map[d] * protected_rows[d].get(wp, 0.0) for d in prior.support
        )
        observed = p_s.get(wp, 0.0)
        if observed == 0.0:
            continue
        if evidence == 0.0:
            raise AbsoluteContinuityViolated(
                f"released atom {wp!r} has positive probability but zero prior evidence"
            )
        for d in prior.support:
            mass[d].append(observed * prior_map[d] * protected_rows[d].get(wp, 0.0) / evidence)
    totals = [math.fsum(mass[d]) for d in prior.support]
    z = math.fsum(totals)
    return BeliefDistribution(prior.support, tuple(t / z for t in totals))
