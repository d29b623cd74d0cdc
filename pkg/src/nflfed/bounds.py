"""Trade-off constants and no-free-lunch inequality checks.

Quantifies the three-way tension between privacy leakage (eps_p), utility
loss (eps_u), and efficiency reduction (eps_e) for a protected federated
release. The core inequality family bounds eps_p + (C_d/2) eps_u +
(C_x/2) eps_e from below by C1, the averaged root-JS gap between the
unprotected posterior and the prior; the constants are estimated from
enumerable scenarios and the closed-form per-mechanism bounds are exposed
alongside a grid search for the protector's constrained parameter choice.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Union

from .attacks import _randomization_rows, empirical_posterior
from .divergence import (
    BeliefDistribution,
    ConditionalBelief,
    Grid,
    ModelInfoDistribution,
    QuadratureSpec,
    _discretize,
    _threads,
    bayesian_privacy_leakage,
    gaussian_tv_sandwich,
    product_belief,
    tv_discrete,
    tv_distance,
)
from .errors import (
    DeltaRequired,
    DimensionMismatch,
    EmptyGrid,
    EmptyInput,
    Infeasible,
    InsufficientKernelCoverage,
    InvalidSpec,
    RatioUnbounded,
    UnsupportedClosedForm,
    UnsupportedMechanism,
    UnsupportedPair,
    XiGammaRequired,
)
from .mechanisms import (
    Compression,
    Identity,
    MechanismConfig,
    Paillier,
    Randomization,
    SecretSharing,
)

__all__ = [
    "AssumptionFails",
    "BoundCheck",
    "CandidateEvaluation",
    "DiscreteScenario",
    "LowerBound",
    "ModelDims",
    "NflConstants",
    "NotApplicable",
    "OptimizeResult",
    "ScenarioMetrics",
    "TradeoffReport",
    "c1_constant",
    "delta_estimate",
    "mechanism_efficiency_bound",
    "mechanism_privacy_bound",
    "mechanism_utility_bound",
    "nfl_check",
    "protector_optimize",
    "scenario_evaluator",
    "tradeoff_report",
    "xi_constant",
    "xi_gamma_estimate",
]

# Numeric slack for the inequality checks: lhs >= rhs - NFL_SLACK.
NFL_SLACK = 1e-9


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class AssumptionFails:
    """Estimation outcome: the scenario violates the assumption behind a
    constant, with the reason. Returned, never raised."""

    reason: str


@dataclass(frozen=True, slots=True)
class NotApplicable:
    """A bound or check that does not apply to the mechanism or scenario."""

    reason: str


class LowerBound(float):
    """A closed-form lower bound, clamped at zero.

    The float value is max(0, raw); .raw keeps the unclamped formula value
    and .term the mechanism's TV-scale factor that entered it.
    """

    __slots__ = ("raw", "term")

    def __new__(cls, raw: float, term: float):
        obj = super().__new__(cls, max(0.0, raw))
        obj.raw = float(raw)
        obj.term = float(term)
        return obj

    def __repr__(self) -> str:
        return f"LowerBound({float(self)!r}, raw={self.raw!r}, term={self.term!r})"


@dataclass(frozen=True, slots=True)
class NflConstants:
    """The constants entering the trade-off inequalities.

    delta, xi_cap, gamma_cap are None exactly when the corresponding
    assumption failed on the scenario; c_d and c_x are None when their
    ingredients are.
    """

    xi: float
    c1: float
    c2: float
    gamma_ratio: float | None = None
    delta: float | None = None
    xi_cap: float | None = None
    gamma_cap: float | None = None
    c_d: float | None = None
    c_x: float | None = None

    def __post_init__(self) -> None:
        if self.xi < 0 or not math.isfinite(self.xi):
            raise InvalidSpec("xi must be a finite nonnegative real")
        if self.c1 < 0 or not math.isfinite(self.c1):
            raise InvalidSpec("c1 must be a finite nonnegative real")
        if self.c2 != 0.5 * (math.exp(2.0 * self.xi) - 1.0):
            raise InvalidSpec("c2 must equal (e^(2 xi) - 1) / 2")
        for name in ("gamma_ratio", "delta", "xi_cap", "gamma_cap"):
            value = getattr(self, name)
            if value is not None and (value <= 0 or not math.isfinite(value)):
                raise InvalidSpec(f"{name} must be a positive real or None")
        if self.gamma_ratio is not None and self.delta is not None:
            expect = (self.gamma_ratio / (4.0 * self.delta)) * (
                math.exp(2.0 * self.xi) - 1.0
            )
            if self.c_d != expect:
                raise InvalidSpec("c_d must equal (gamma/(4 delta)) (e^(2 xi) - 1)")
        elif self.c_d is not None:
            raise InvalidSpec("c_d needs both gamma_ratio and delta")
        if self.xi_cap is not None and self.gamma_cap is not None:
            expect = (math.exp(2.0 * self.xi) - 1.0) / (
                2.0 * self.xi_cap * self.gamma_cap
            )
            if self.c_x != expect:
                raise InvalidSpec("c_x must equal (e^(2 xi) - 1) / (2 Xi Gamma)")
        elif self.c_x is not None:
            raise InvalidSpec("c_x needs both xi_cap and gamma_cap")

    @classmethod
    def build(
        cls,
        xi: float,
        c1: float,
        *,
        gamma_ratio: float | None = None,
        delta: float | None = None,
        xi_cap: float | None = None,
        gamma_cap: float | None = None,
    ) -> "NflConstants":
        growth = math.exp(2.0 * float(xi)) - 1.0
        c_d = None
        if gamma_ratio is not None and delta is not None:
            c_d = (gamma_ratio / (4.0 * delta)) * growth
        c_x = None
        if xi_cap is not None and gamma_cap is not None:
            c_x = growth / (2.0 * xi_cap * gamma_cap)
        return cls(
            xi=float(xi),
            c1=float(c1),
            c2=0.5 * growth,
            gamma_ratio=gamma_ratio,
            delta=delta,
            xi_cap=xi_cap,
            gamma_cap=gamma_cap,
            c_d=c_d,
            c_x=c_x,
        )


@dataclass(frozen=True, slots=True)
class BoundCheck:
    """One inequality verdict: lhs >= rhs - slack, or NotApplicable."""

    name: str
    lhs: float | None
    rhs: float | None
    margin: float | None
    satisfied: bool | None
    status: str = "checked"
    reason: str = ""


@dataclass(frozen=True, slots=True)
class ModelDims:
    """Shape of the released model information for the closed-form bounds.

    sigmas are the per-coordinate scales of the original information
    (randomization); half_width is the plaintext box half-width delta
    (secret sharing).
    """

    m: int
    sigmas: tuple[float, ...] | None = None
    half_width: float | None = None

    def __post_init__(self) -> None:
        if self.m < 1:
            raise InvalidSpec("m must be a positive dimension count")
        if self.sigmas is not None:
            sig = self.sigmas
            if isinstance(sig, (int, float)):
                sig = (float(sig),)
            object.__setattr__(self, "sigmas", tuple(float(s) for s in sig))


def _broadcast(values: Sequence[float], m: int, name: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if len(out) == 1 and m > 1:
        return out * m
    if len(out) != m:
        raise DimensionMismatch(f"{name}: got {len(out)} entries for m = {m}")
    return out


# ---------------------------------------------------------------------------
# constants from enumerable scenarios
# ---------------------------------------------------------------------------


def xi_constant(kernel, prior: BeliefDistribution) -> float:
    """Largest absolute log-ratio between any posterior row and the prior.

    kernel maps each released atom w to the posterior belief over private
    data given w; only enumerable (mapping-backed) kernels are accepted.
    Zero-posterior entries contribute nothing; positive posterior mass on a
    zero-prior atom makes the ratio unbounded.
    """
    if isinstance(kernel, ConditionalBelief):
        rows = kernel.kernel
    else:
        rows = kernel
    if not isinstance(rows, Mapping):
        raise InvalidSpec("xi_constant needs an enumerable (mapping) kernel")
    prior_map = prior.as_mapping()
    worst = 0.0
    for w, row in rows.items():
        if not isinstance(row, BeliefDistribution):
            raise InvalidSpec(f"kernel row at {w!r} is not a finite belief")
        for d, post in zip(row.support, row.mass):
            if post == 0.0:
                continue
            base = prior_map.get(d, 0.0)
            if base == 0.0:
                raise RatioUnbounded(
                    f"posterior puts mass on {d!r} where the prior has none"
                )
            worst = max(worst, abs(math.log(post / base)))
    return worst


def c1_constant(
    priors: Sequence[BeliefDistribution],
    unprotected_posteriors: Sequence[BeliefDistribution],
) -> float:
    """Mean over clients of sqrt(JS(posterior, prior))."""
    priors = list(priors)
    posts = list(unprotected_posteriors)
    if not priors:
        raise EmptyInput("c1_constant needs at least one client")
    if len(priors) != len(posts):
        raise DimensionMismatch(
            f"{len(priors)} priors vs {len(posts)} posteriors"
        )
    terms = [bayesian_privacy_leakage(b, f) for b, f in zip(priors, posts)]
    return math.fsum(terms) / len(terms)


def _unwrap(atom):
    if isinstance(atom, tuple) and len(atom) == 1:
        return atom[0]
    return atom


def _atoms_and_mass(dist, grid, name: str) -> dict:
    if isinstance(dist, BeliefDistribution):
        return dist.as_mapping()
    if isinstance(dist, ModelInfoDistribution):
        if grid is not None and not isinstance(grid, QuadratureSpec):
            raise InvalidSpec(f"{name}: grid must be a QuadratureSpec")
        atoms, weights = _discretize(dist, grid)
        return dict(zip(atoms, (float(v) for v in weights)))
    raise InvalidSpec(f"{name}: unsupported distribution {type(dist).__name__}")


def _evaluate_on(fn: Callable, atoms, label: str) -> dict:
    out = {}
    for atom in atoms:
        value = float(fn(_unwrap(atom)))
        if not math.isfinite(value):
            raise InvalidSpec(f"{label} must be finite on every grid atom")
        out[atom] = value
    return out


def _pair_tv(p_first, p_second) -> float:
    if isinstance(p_first, BeliefDistribution) and isinstance(
        p_second, BeliefDistribution
    ):
        return tv_discrete(p_first, p_second)
    try:
        return tv_distance(p_first, p_second)
    except (UnsupportedClosedForm, UnsupportedPair):
        return tv_distance(p_first, p_second, Grid())


def delta_estimate(
    utility: Callable,
    p_s_fed,
    p_o_fed,
    grid: QuadratureSpec | None = None,
    *,
    tol: float = 1e-6,
) -> float | AssumptionFails:
    """Largest utility gap whose near-optimal set stays rare under P^S.

    Bisection over c finds the maximum Delta such that the P^S-mass of
    {w : |U(w*) - U(w)| <= Delta} is at most TV(P^O || P^S) / 2, where w*
    maximizes U over the support union. Returns AssumptionFails when the
    distributions coincide or no positive Delta exists.
    """
    if isinstance(p_s_fed, BeliefDistribution) != isinstance(
        p_o_fed, BeliefDistribution
    ):
        raise InvalidSpec("p_s_fed and p_o_fed must share a representation")
    s_mass = _atoms_and_mass(p_s_fed, grid, "p_s_fed")
    o_mass = _atoms_and_mass(p_o_fed, grid, "p_o_fed")
    tv = _pair_tv(p_o_fed, p_s_fed)
    if tv == 0.0:
        return AssumptionFails("TV(P^O || P^S) = 0: no distribution shift")

    atoms = [a for a in dict.fromkeys(list(o_mass) + list(s_mass))
             if o_mass.get(a, 0.0) > 0.0 or s_mass.get(a, 0.0) > 0.0]
    values = _evaluate_on(utility, atoms, "utility")
    u_star = max(values.values())
    gaps = {a: abs(u_star - v) for a, v in values.items()}

    def near_mass(c: float) -> float:
        return math.fsum(
            s_mass.get(a, 0.0) for a, gap in gaps.items() if gap <= c
        )

    cap = 0.5 * tv
    if near_mass(0.0) > cap:
        return AssumptionFails(
            "optimal parameters carry more than TV/2 protected mass even at "
            "zero tolerance"
        )
    lo = 0.0
    hi = max(gaps.values()) + 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if near_mass(mid) <= cap:
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        return AssumptionFails(f"no positive Delta at tolerance {tol}")
    return lo


def xi_gamma_estimate(
    cost: Callable,
    p_o,
    p_s,
    grid: QuadratureSpec | None = None,
) -> tuple[float, float] | AssumptionFails:
    """Cost-gap constants of the inflated-support split.

    Splits the support union into atoms that gained mass under protection
    and atoms that lost it; Xi is the gap between the cheapest gainer and
    the costliest loser, and Gamma the capped mass-gap ratio evaluated at
    Xi. Fails when the distributions coincide or the gainers are not
    uniformly costlier.
    """
    o_mass = _atoms_and_mass(p_o, grid, "p_o")
    s_mass = _atoms_and_mass(p_s, grid, "p_s")
    atoms = [a for a in dict.fromkeys(list(o_mass) + list(s_mass))
             if o_mass.get(a, 0.0) > 0.0 or s_mass.get(a, 0.0) > 0.0]
    gained = [a for a in atoms if s_mass.get(a, 0.0) - o_mass.get(a, 0.0) >= 0.0]
    lost = [a for a in atoms if s_mass.get(a, 0.0) - o_mass.get(a, 0.0) < 0.0]
    tv = math.fsum(s_mass.get(a, 0.0) - o_mass.get(a, 0.0) for a in gained)
    if tv <= 0.0:
        return AssumptionFails("TV(P^O || P^S) = 0: no distribution shift")
    costs = _evaluate_on(cost, atoms, "cost")
    lost_max = max(costs[a] for a in lost)
    xi_cap = min(costs[a] for a in gained) - lost_max
    if xi_cap <= 0.0:
        return AssumptionFails(
            "protection does not uniformly inflate the cost of the atoms "
            f"that gained mass (gap {xi_cap!r})"
        )
    lost_min = min(costs[a] for a in lost)
    plus = math.fsum(
        s_mass.get(a, 0.0) for a in gained if costs[a] >= lost_max + xi_cap
    )
    minus = math.fsum(o_mass.get(a, 0.0) for a in gained if costs[a] <= lost_min)
    gamma_cap = min(1.0, (plus - minus) / tv)
    if gamma_cap <= 0.0:
        return AssumptionFails("mass-gap ratio is not positive")
    return (xi_cap, gamma_cap)


# ---------------------------------------------------------------------------
# inequality checks
# ---------------------------------------------------------------------------


def _term(
    coefficient: float | None,
    epsilon: float,
    scale: float,
    missing: str,
) -> float | NotApplicable:
    if epsilon == 0.0:
        return 0.0
    if coefficient is None:
        return NotApplicable(f"{missing} unavailable with nonzero loss")
    return scale * coefficient * epsilon


def nfl_check(
    epsilon_p: float,
    epsilon_u: float,
    epsilon_e: float,
    constants: NflConstants,
) -> tuple[BoundCheck, BoundCheck, BoundCheck]:
    """Evaluate the three trade-off inequalities against C1.

    privacy_efficiency: eps_p + C_x eps_e >= C1; privacy_utility: eps_p +
    C_d eps_u >= C1; full_nfl: eps_p + (C_d/2) eps_u + (C_x/2) eps_e >= C1.
    A missing constant with a zero loss contributes nothing; with a nonzero
    loss the check is NotApplicable.
    """
    rhs = constants.c1
    specs = (
        ("privacy_efficiency", ((constants.c_x, epsilon_e, 1.0, "Xi/Gamma"),)),
        ("privacy_utility", ((constants.c_d, epsilon_u, 1.0, "Delta/gamma"),)),
        (
            "full_nfl",
            (
                (constants.c_d, epsilon_u, 0.5, "Delta/gamma"),
                (constants.c_x, epsilon_e, 0.5, "Xi/Gamma"),
            ),
        ),
    )
    checks = []
    for name, parts in specs:
        terms = [epsilon_p]
        blocked = None
        for coefficient, epsilon, scale, missing in parts:
            term = _term(coefficient, epsilon, scale, missing)
            if isinstance(term, NotApplicable):
                blocked = term
                break
            terms.append(term)
        if blocked is not None:
            checks.append(
                BoundCheck(name, None, None, None, None, "NotApplicable", blocked.reason)
            )
            continue
        lhs = math.fsum(terms)
        checks.append(
            BoundCheck(name, lhs, rhs, lhs - rhs, lhs >= rhs - NFL_SLACK)
        )
    return tuple(checks)


# ---------------------------------------------------------------------------
# closed-form mechanism bounds
# ---------------------------------------------------------------------------


def _noise_terms(cfg: Randomization, dims: ModelDims | None) -> tuple[float, float]:
    if dims is None or dims.sigmas is None:
        raise InvalidSpec("randomization bounds need dims.sigmas")
    sigmas = _broadcast(dims.sigmas, dims.m, "sigmas")
    return gaussian_tv_sandwich(sigmas, cfg.sigma_eps)


def _paillier_term(cfg: Paillier, m: int) -> float:
    try:
        inv = 1.0 / float(cfg.n)
    except OverflowError:
        inv = 0.0
    ratio = 2.0 * cfg.delta * inv * inv
    if ratio > 1.0:
        raise InvalidSpec("plaintext box exceeds the ciphertext range")
    return 1.0 - ratio**m


def _sharing_term(cfg: SecretSharing, dims: ModelDims | None) -> float:
    if dims is None or dims.half_width is None or dims.half_width <= 0:
        raise InvalidSpec("secret-sharing bounds need dims.half_width > 0")
    b = _broadcast(cfg.b, dims.m, "b")
    r = _broadcast(cfg.r, dims.m, "r")
    product = 1.0
    for bj, rj in zip(b, r):
        ratio = 2.0 * dims.half_width / (bj + rj)
        if ratio > 1.0:
            raise InvalidSpec(
                "share interval must contain the plaintext box on every axis"
            )
        product *= ratio
    return 1.0 - product


def _compression_term(cfg: Compression, m: int) -> float:
    rho = _broadcast(cfg.rho, m, "rho")
    return 1.0 - math.prod(rho)


def mechanism_privacy_bound(
    cfg: MechanismConfig,
    constants: NflConstants,
    dims: ModelDims | None = None,
    variant: str = "theorem",
) -> LowerBound:
    """Closed-form lower bound on the privacy leakage, C1 - C2 * term.

    For randomization the term is the TV sandwich around the noise factor
    X = min(1, sigma_eps^2 sqrt(sum 1/sigma_i^4)): variant "theorem" uses
    the X/100 lower edge, "conservative" the min(1, 3X/2) upper edge.
    """
    if variant not in ("theorem", "conservative"):
        raise InvalidSpec(f"variant: unknown value {variant!r}")
    if isinstance(cfg, Identity):
        term = 0.0
    elif isinstance(cfg, Randomization):
        lo, hi = _noise_terms(cfg, dims)
        term = lo if variant == "theorem" else hi
    elif isinstance(cfg, Paillier):
        term = _paillier_term(cfg, dims.m if dims is not None else 1)
    elif isinstance(cfg, SecretSharing):
        term = _sharing_term(cfg, dims)
    elif isinstance(cfg, Compression):
        term = _compression_term(cfg, dims.m if dims is not None else len(cfg.rho))
    else:
        raise UnsupportedMechanism(f"no closed form for {type(cfg).__name__}")
    return LowerBound(constants.c1 - constants.c2 * term, term)


def mechanism_utility_bound(
    cfg: MechanismConfig,
    delta: float | None,
    dims: ModelDims | None = None,
) -> LowerBound:
    """Closed-form lower bound on the utility loss.

    Exactly zero for the exact mechanisms (identity, homomorphic
    encryption, secret sharing); scaled by Delta/2 for the lossy ones.
    """
    if isinstance(cfg, (Identity, Paillier, SecretSharing)):
        return LowerBound(0.0, 0.0)
    if isinstance(cfg, Randomization):
        lo, _ = _noise_terms(cfg, dims)
        term = lo
    elif isinstance(cfg, Compression):
        term = _compression_term(cfg, dims.m if dims is not None else len(cfg.rho))
    else:
        raise UnsupportedMechanism(f"no closed form for {type(cfg).__name__}")
    if delta is None or isinstance(delta, AssumptionFails):
        raise DeltaRequired(
            f"{type(cfg).__name__} utility bound needs the near-optimality gap"
        )
    if delta <= 0 or not math.isfinite(delta):
        raise InvalidSpec("delta must be a positive real")
    return LowerBound(0.5 * delta * term, term)


def mechanism_efficiency_bound(
    cfg: MechanismConfig,
    xi_cap: float | None,
    gamma_cap: float | None,
    dims: ModelDims | None = None,
) -> LowerBound | NotApplicable:
    """Closed-form lower bound on the efficiency reduction, Xi Gamma * term.

    Secret sharing is NotApplicable: shares inflate every message, so the
    cost-gap split behind (Xi, Gamma) has nothing to separate.
    """
    if isinstance(cfg, SecretSharing):
        return NotApplicable(
            "cost-gap constants are undefined for additive secret sharing"
        )
    if isinstance(cfg, Identity):
        return LowerBound(0.0, 0.0)
    if isinstance(cfg, Randomization):
        lo, _ = _noise_terms(cfg, dims)
        term = lo
    elif isinstance(cfg, Paillier):
        term = _paillier_term(cfg, dims.m if dims is not None else 1)
    elif isinstance(cfg, Compression):
        term = _compression_term(cfg, dims.m if dims is not None else len(cfg.rho))
    else:
        raise UnsupportedMechanism(f"no closed form for {type(cfg).__name__}")
    if xi_cap is None or gamma_cap is None:
        raise XiGammaRequired(
            f"{type(cfg).__name__} efficiency bound needs the cost-gap constants"
        )
    if xi_cap <= 0 or gamma_cap <= 0:
        raise InvalidSpec("xi_cap and gamma_cap must be positive")
    return LowerBound(xi_cap * gamma_cap * term, term)


# ---------------------------------------------------------------------------
# protector's parameter selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CandidateEvaluation:
    config: object
    epsilon_p: float
    epsilon_u: float
    epsilon_e: float
    objective: float
    feasible: bool


@dataclass(frozen=True, slots=True)
class OptimizeResult:
    best: object
    best_index: int
    objective: float
    evaluations: tuple[CandidateEvaluation, ...]


def protector_optimize(
    param_grid: Sequence,
    scenario: Callable,
    eta_u: float,
    eta_e: float,
    chi: float,
    phi: float | None = None,
) -> OptimizeResult:
    """Pick the feasible config minimizing eta_u eps_u + eta_e eps_e.

    scenario maps a config to measured (eps_p, eps_u, eps_e); feasibility
    is eps_p <= chi, plus eps_e <= phi when phi is given. Ties break to the
    earliest grid entry; an infeasible grid raises Infeasible.
    """
    configs = list(param_grid)
    if not configs:
        raise EmptyGrid("param_grid is empty")
    for name, value in (("eta_u", eta_u), ("eta_e", eta_e), ("chi", chi)):
        if not math.isfinite(value):
            raise InvalidSpec(f"{name} must be finite")

    def evaluate(cfg) -> tuple[float, float, float]:
        triple = scenario(cfg)
        e_p, e_u, e_e = (float(v) for v in triple)
        if not all(math.isfinite(v) for v in (e_p, e_u, e_e)):
            raise InvalidSpec(f"scenario produced non-finite losses for {cfg!r}")
        return e_p, e_u, e_e

    workers = _threads()
    if workers > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            triples = list(pool.map(evaluate, configs))
    else:
        triples = [evaluate(cfg) for cfg in configs]

    evaluations = []
    best_index = -1
    for i, (cfg, (e_p, e_u, e_e)) in enumerate(zip(configs, triples)):
        objective = eta_u * e_u + eta_e * e_e
        feasible = e_p <= chi and (phi is None or e_e <= phi)
        evaluations.append(
            CandidateEvaluation(cfg, e_p, e_u, e_e, objective, feasible)
        )
        if feasible and (
            best_index < 0 or objective < evaluations[best_index].objective
        ):
            best_index = i
    if best_index < 0:
        raise Infeasible(
            f"no config met eps_p <= {chi!r}"
            + ("" if phi is None else f" and eps_e <= {phi!r}")
        )
    return OptimizeResult(
        best=configs[best_index],
        best_index=best_index,
        objective=evaluations[best_index].objective,
        evaluations=tuple(evaluations),
    )


# ---------------------------------------------------------------------------
# enumerable scenarios
# ---------------------------------------------------------------------------


def _sorted_atoms(atoms) -> tuple:
    try:
        return tuple(sorted(atoms, key=lambda a: (type(a).__name__, a)))
    except TypeError:
        return tuple(sorted(atoms, key=lambda a: (type(a).__name__, repr(a))))


@dataclass(frozen=True, slots=True)
class ScenarioMetrics:
    """Per-client quantities of one enumerated scenario."""

    p_o: BeliefDistribution
    p_s: BeliefDistribution
    f_o: BeliefDistribution
    f_a: BeliefDistribution
    tv: float
    xi: float
    epsilon_p: float
    c1_term: float


@dataclass(frozen=True, slots=True)
class DiscreteScenario:
    """A fully enumerable one-client release: finite private-data prior,
    finite release rows per datum, and an optional protection channel on
    the released atoms.

    channel is None or Identity for an unprotected release, a Randomization
    config (discretized onto the released atoms), or an explicit
    ConditionalBelief transition kernel. true_data conditions the original
    release distribution on one datum; without it the release follows the
    prior predictive, whose attacker belief collapses to the prior.
    """

    prior: BeliefDistribution
    release: ConditionalBelief
    channel: Union[Identity, Randomization, ConditionalBelief, None] = None
    true_data: object = None

    def __post_init__(self) -> None:
        if self.channel is not None and not isinstance(
            self.channel, (Identity, Randomization, ConditionalBelief)
        ):
            raise UnsupportedMechanism(
                "channel must be Identity, Randomization, or a transition kernel"
            )
        prior_map = self.prior.as_mapping()
        for d in self.prior.support:
            if not self.release.covers(d):
                raise InsufficientKernelCoverage(
                    f"release kernel does not cover prior atom {d!r}"
                )
        if self.true_data is not None:
            if self.true_data not in prior_map:
                raise InvalidSpec("true_data must be a prior atom")
            if prior_map[self.true_data] == 0.0:
                raise InvalidSpec("true_data must have positive prior mass")

    def _forward_rows(self) -> dict:
        rows = {}
        for d in self.prior.support:
            row = self.release.row(d)
            if not isinstance(row, BeliefDistribution):
                raise InvalidSpec(
                    f"release row at {d!r} must be a finite belief distribution"
                )
            rows[d] = {w: v for w, v in zip(row.support, row.mass) if v > 0.0}
        return rows

    def _channel_rows(self, atoms) -> dict | None:
        if self.channel is None or isinstance(self.channel, Identity):
            return None
        if isinstance(self.channel, Randomization):
            if self.channel.sigma_eps == 0.0:
                return None
            return _randomization_rows(atoms, self.channel.sigma_eps)
        rows = {}
        for w in atoms:
            try:
                row = self.channel.row(w)
            except KeyError:
                raise InvalidSpec(
                    f"channel does not cover released atom {w!r}"
                ) from None
            if not isinstance(row, BeliefDistribution):
                raise InvalidSpec("channel rows must be finite belief distributions")
            rows[w] = {wp: v for wp, v in zip(row.support, row.mass) if v > 0.0}
        return rows

    def metrics(self, belief: str = "shared-kernel") -> ScenarioMetrics:
        """Enumerate the scenario's release and belief quantities.

        belief "shared-kernel" evaluates one posterior kernel (built from
        the unprotected release) under both the original and the protected
        release distributions; "mechanism-aware" runs full Bayes against
        the protected channel instead.
        """
        if belief not in ("shared-kernel", "mechanism-aware"):
            raise InvalidSpec(f"belief: unknown construction {belief!r}")
        rows = self._forward_rows()
        atoms = _sorted_atoms({w for row in rows.values() for w in row})
        prior_map = self.prior.as_mapping()
        mix = {
            w: math.fsum(prior_map[d] * rows[d].get(w, 0.0) for d in rows)
            for w in atoms
        }

        if self.true_data is None:
            o_map = dict(mix)
        else:
            o_map = dict(rows[self.true_data])
        channel_rows = self._channel_rows(atoms)
        if channel_rows is None:
            s_map = dict(o_map)
        else:
            s_map = {}
            for w, mass in o_map.items():
                if mass == 0.0:
                    continue
                for wp, t in channel_rows[w].items():
                    s_map[wp] = s_map.get(wp, 0.0) + mass * t

        support = _sorted_atoms(set(atoms) | set(s_map))
        p_o = BeliefDistribution(support, tuple(o_map.get(w, 0.0) for w in support))
        p_s = BeliefDistribution(support, tuple(s_map.get(w, 0.0) for w in support))
        tv = tv_discrete(p_o, p_s)

        kernel = {}
        for w in atoms:
            if mix[w] == 0.0:
                continue
            kernel[w] = BeliefDistribution(
                self.prior.support,
                tuple(
                    prior_map[d] * rows[d].get(w, 0.0) / mix[w]
                    for d in self.prior.support
                ),
            )

        def mix_kernel(weights: dict) -> BeliefDistribution:
            totals = []
            for i, d in enumerate(self.prior.support):
                parts = []
                for w, mass in weights.items():
                    if mass == 0.0:
                        continue
                    if w not in kernel:
                        raise InsufficientKernelCoverage(
                            f"released atom {w!r} is outside the prior-predictive "
                            "support; no shared posterior exists there"
                        )
                    parts.append(mass * kernel[w].mass[i])
                totals.append(math.fsum(parts))
            z = math.fsum(totals)
            return BeliefDistribution(
                self.prior.support, tuple(t / z for t in totals)
            )

        f_o = mix_kernel(o_map)
        if belief == "shared-kernel":
            f_a = mix_kernel(s_map)
        else:
            f_a = empirical_posterior(
                self.channel, self.prior, self.release, true_data=self.true_data
            )
        xi = xi_constant(ConditionalBelief(kernel), self.prior)
        return ScenarioMetrics(
            p_o=p_o,
            p_s=p_s,
            f_o=f_o,
            f_a=f_a,
            tv=tv,
            xi=xi,
            epsilon_p=bayesian_privacy_leakage(self.prior, f_a),
            c1_term=bayesian_privacy_leakage(self.prior, f_o),
        )


def _expectation(fn: Callable, dist: BeliefDistribution, label: str) -> float:
    values = _evaluate_on(fn, dist.support, label)
    return math.fsum(m * values[a] for a, m in zip(dist.support, dist.mass))


def scenario_evaluator(
    scenario: DiscreteScenario,
    utility: Callable,
    cost: Callable,
    *,
    belief: str = "shared-kernel",
) -> Callable:
    """Adapt a scenario to protector_optimize: config -> (e_p, e_u, e_e)."""

    def evaluate(cfg) -> tuple[float, float, float]:
        m = replace(scenario, channel=cfg).metrics(belief=belief)
        e_u = _expectation(utility, m.p_o, "utility") - _expectation(
            utility, m.p_s, "utility"
        )
        e_e = _expectation(cost, m.p_s, "cost") - _expectation(cost, m.p_o, "cost")
        return m.epsilon_p, e_u, e_e

    return evaluate


# ---------------------------------------------------------------------------
# full report
# ---------------------------------------------------------------------------


_CHECK_NAMES = ("privacy_efficiency", "privacy_utility", "full_nfl")
_BOUND_NAMES = ("privacy", "utility", "efficiency")


@dataclass(frozen=True, slots=True)
class TradeoffReport:
    """Measured losses, estimated constants, inequality verdicts, and the
    applicable closed-form mechanism bounds for one federation snapshot."""

    epsilon_p: float
    epsilon_u: float
    epsilon_e: float
    epsilon_p_per_client: tuple[float, ...]
    epsilon_e_per_client: tuple[float, ...]
    tv_per_client: tuple[float, ...]
    tv_fed: float
    constants: NflConstants
    checks: tuple[BoundCheck, ...]
    mechanism_bounds: dict | None = None
    notes: tuple[str, ...] = ()

    def as_json_dict(self) -> dict:
        def bound(b):
            if isinstance(b, NotApplicable):
                return {"status": "NotApplicable", "reason": b.reason}
            return {"value": float(b), "raw": b.raw, "term": b.term}

        c = self.constants
        return {
            "epsilon_p": self.epsilon_p,
            "epsilon_u": self.epsilon_u,
            "epsilon_e": self.epsilon_e,
            "per_client": {
                "epsilon_p": list(self.epsilon_p_per_client),
                "epsilon_e": list(self.epsilon_e_per_client),
                "tv": list(self.tv_per_client),
            },
            "tv_fed": self.tv_fed,
            "constants": {
                "xi": c.xi,
                "c1": c.c1,
                "c2": c.c2,
                "gamma_ratio": c.gamma_ratio,
                "delta": c.delta,
                "xi_cap": c.xi_cap,
                "gamma_cap": c.gamma_cap,
                "c_d": c.c_d,
                "c_x": c.c_x,
            },
            "checks": [
                {
                    "name": k.name,
                    "lhs": k.lhs,
                    "rhs": k.rhs,
                    "margin": k.margin,
                    "satisfied": k.satisfied,
                    "status": k.status,
                    "reason": k.reason,
                }
                for k in self.checks
            ],
            "mechanism_bounds": None
            if self.mechanism_bounds is None
            else {name: bound(b) for name, b in self.mechanism_bounds.items()},
            "notes": list(self.notes),
        }

    @staticmethod
    def csv_header() -> tuple[str, ...]:
        head = ["epsilon_p", "epsilon_u", "epsilon_e", "tv_fed"]
        head += ["xi", "c1", "c2", "gamma_ratio", "delta", "xi_cap", "gamma_cap",
                 "c_d", "c_x"]
        for name in _CHECK_NAMES:
            head += [f"{name}_lhs", f"{name}_rhs", f"{name}_margin",
                     f"{name}_satisfied", f"{name}_status"]
        for name in _BOUND_NAMES:
            head += [f"bound_{name}", f"bound_{name}_raw"]
        head.append("notes")
        return tuple(head)

    def csv_row(self) -> tuple:
        c = self.constants
        row = [self.epsilon_p, self.epsilon_u, self.epsilon_e, self.tv_fed,
               c.xi, c.c1, c.c2, c.gamma_ratio, c.delta, c.xi_cap, c.gamma_cap,
               c.c_d, c.c_x]
        by_name = {k.name: k for k in self.checks}
        for name in _CHECK_NAMES:
            k = by_name[name]
            row += [k.lhs, k.rhs, k.margin, k.satisfied, k.status]
        for name in _BOUND_NAMES:
            b = None if self.mechanism_bounds is None else self.mechanism_bounds.get(name)
            if b is None:
                row += [None, None]
            elif isinstance(b, NotApplicable):
                row += ["NotApplicable", None]
            else:
                row += [float(b), b.raw]
        row.append("; ".join(self.notes))
        return tuple(row)


def tradeoff_report(
    scenarios: Sequence[DiscreteScenario],
    utility: Callable,
    cost: Callable,
    *,
    belief: str = "shared-kernel",
    mechanism: MechanismConfig | None = None,
    dims: ModelDims | None = None,
    variant: str = "theorem",
) -> TradeoffReport:
    """Measure the three losses on enumerated per-client scenarios,
    estimate every constant, and run the inequality checks.

    utility applies to federated atoms (per-client atom tuples when K > 1,
    the client atom itself when K = 1); cost applies to one client's atom.
    """
    scens = list(scenarios)
    if not scens:
        raise EmptyInput("tradeoff_report needs at least one client scenario")
    metrics = [s.metrics(belief=belief) for s in scens]
    k = len(metrics)

    eps_p_k = tuple(m.epsilon_p for m in metrics)
    eps_e_k = tuple(
        _expectation(cost, m.p_s, "cost") - _expectation(cost, m.p_o, "cost")
        for m in metrics
    )
    tv_k = tuple(m.tv for m in metrics)
    p_o_fed = product_belief([m.p_o for m in metrics])
    p_s_fed = product_belief([m.p_s for m in metrics])
    eps_u = _expectation(utility, p_o_fed, "utility") - _expectation(
        utility, p_s_fed, "utility"
    )
    tv_fed = tv_discrete(p_o_fed, p_s_fed)

    notes = []
    gamma_ratio = None
    if tv_fed > 0.0:
        gamma_ratio = (math.fsum(tv_k) / k) / tv_fed
    else:
        notes.append("gamma: TV(P^O_fed || P^S_fed) = 0")

    delta = delta_estimate(utility, p_s_fed, p_o_fed)
    if isinstance(delta, AssumptionFails):
        notes.append(f"delta: {delta.reason}")
        delta = None

    caps: list[tuple[float, float]] = []
    cap_failed = False
    for i, m in enumerate(metrics):
        est = xi_gamma_estimate(cost, m.p_o, m.p_s)
        if isinstance(est, AssumptionFails):
            notes.append(f"xi_cap/gamma_cap (client {i}): {est.reason}")
            cap_failed = True
        else:
            caps.append(est)
    xi_cap = None if cap_failed or not caps else min(c[0] for c in caps)
    gamma_cap = None if cap_failed or not caps else min(c[1] for c in caps)

    constants = NflConstants.build(
        xi=max(m.xi for m in metrics),
        c1=math.fsum(m.c1_term for m in metrics) / k,
        gamma_ratio=gamma_ratio,
        delta=delta,
        xi_cap=xi_cap,
        gamma_cap=gamma_cap,
    )
    eps_p = math.fsum(eps_p_k) / k
    eps_e = math.fsum(eps_e_k) / k
    checks = nfl_check(eps_p, eps_u, eps_e, constants)

    mechanism_bounds = None
    if mechanism is not None:
        mechanism_bounds = {
            "privacy": mechanism_privacy_bound(mechanism, constants, dims, variant)
        }
        try:
            mechanism_bounds["utility"] = mechanism_utility_bound(
                mechanism, constants.delta, dims
            )
        except DeltaRequired as exc:
            mechanism_bounds["utility"] = NotApplicable(str(exc))
        try:
            mechanism_bounds["efficiency"] = mechanism_efficiency_bound(
                mechanism, constants.xi_cap, constants.gamma_cap, dims
            )
        except XiGammaRequired as exc:
            mechanism_bounds["efficiency"] = NotApplicable(str(exc))

    return TradeoffReport(
        epsilon_p=eps_p,
        epsilon_u=eps_u,
        epsilon_e=eps_e,
        epsilon_p_per_client=eps_p_k,
        epsilon_e_per_client=eps_e_k,
        tv_per_client=tv_k,
        tv_fed=tv_fed,
        constants=constants,
        checks=checks,
        mechanism_bounds=mechanism_bounds,
        notes=tuple(notes),
    )
