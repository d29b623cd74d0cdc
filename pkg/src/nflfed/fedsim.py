"""Deterministic federation simulator.

Runs the horizontal protocol (local step, protect, upload, server-side
aggregation, broadcast) and the vertical two-client protocol (partial
outputs, protected cut-gradient exchange) on synthetic data, accounting
every transmitted byte exactly and estimating the utility and efficiency
gaps a protection mechanism causes from paired seed replicates.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Union

import numpy as np

from .divergence import _threads
from .errors import (
    DimensionMismatch,
    InvalidSpec,
    MechanismIncompatible,
    NonFiniteLoss,
    ReplicateCountTooSmall,
)
from .mechanisms import (
    Cipher,
    Compression,
    Identity,
    MechanismConfig,
    ModelInfo,
    Paillier,
    PaillierKeypair,
    Plain,
    Randomization,
    SecretSharing,
    Shares,
    compress,
    fixed_point_decode,
    lattice_float,
    paillier_decrypt,
    paillier_keygen,
    paillier_protect,
    randomize,
    secret_share,
    serialize_model_info,
)


def _derive_seed(*parts) -> int:
    """Stable 64-bit seed from a path of labels; the only entropy source."""
    text = "/".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _parallel_map(fn: Callable, items: Sequence) -> list:
    workers = _threads()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class SyntheticData:
    """Generator spec for one federation's data.

    regression: standard-normal features, targets x . theta_true plus
    N(0, noise^2). classification: class centers drawn once (2x spread),
    features center + standard normal, labels from class_balance.
    label_skew shapes the horizontal partition only: 0 assigns samples to
    clients uniformly, values toward 1 concentrate each class on few
    clients (Dirichlet alpha = (1 - skew) / skew per class).
    """

    kind: str
    num_samples: int
    dim: int
    num_classes: int = 2
    noise: float = 0.1
    label_skew: float = 0.0
    class_balance: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("regression", "classification"):
            raise InvalidSpec("kind must be regression or classification")
        if self.num_samples < 1 or self.dim < 1:
            raise InvalidSpec("num_samples and dim must be positive")
        if self.kind == "classification" and self.num_classes < 2:
            raise InvalidSpec("classification needs at least 2 classes")
        if self.noise < 0:
            raise InvalidSpec("noise must be >= 0")
        if not 0.0 <= self.label_skew < 1.0:
            raise InvalidSpec("label_skew must lie in [0, 1)")
        if self.class_balance is not None:
            probs = tuple(float(v) for v in self.class_balance)
            object.__setattr__(self, "class_balance", probs)
            if len(probs) != self.num_classes:
                raise InvalidSpec("class_balance needs one weight per class")
            if any(v < 0 for v in probs) or not math.isclose(
                math.fsum(probs), 1.0, abs_tol=1e-9
            ):
                raise InvalidSpec("class_balance must be a probability vector")


@dataclass(frozen=True, slots=True)
class Dataset:
    kind: str
    features: tuple[tuple[float, ...], ...]
    targets: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.features)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(self.features, dtype=float)
        if self.kind == "classification":
            return x, np.asarray(self.targets, dtype=int)
        return x, np.asarray(self.targets, dtype=float)


def synth_data(spec: SyntheticData, seed: int, *, truth_seed: int | None = None) -> Dataset:
    """Reproducible synthetic dataset.

    truth_seed fixes the ground-truth parameters (regression weights or
    class centers) independently of the sample draw, so a held-out set can
    share the truth of its training set while using fresh samples.
    """
    truth_rng = np.random.default_rng(seed if truth_seed is None else truth_seed)
    rng = np.random.default_rng(seed)
    if spec.kind == "regression":
        theta = truth_rng.standard_normal(spec.dim)
        x = rng.standard_normal((spec.num_samples, spec.dim))
        y = x @ theta + spec.noise * rng.standard_normal(spec.num_samples)
        return Dataset(
            spec.kind,
            tuple(tuple(row) for row in x),
            tuple(float(v) for v in y),
        )
    centers = 2.0 * truth_rng.standard_normal((spec.num_classes, spec.dim))
    probs = spec.class_balance
    labels = rng.choice(spec.num_classes, size=spec.num_samples, p=probs)
    x = centers[labels] + rng.standard_normal((spec.num_samples, spec.dim))
    return Dataset(
        spec.kind,
        tuple(tuple(row) for row in x),
        tuple(int(v) for v in labels),
    )


def partition_shards(
    dataset: Dataset, clients: int, label_skew: float, seed: int
) -> tuple[Dataset, ...]:
    """Assign samples to clients: uniform at skew 0, Dirichlet-concentrated
    per class as skew approaches 1. Every client must end up non-empty."""
    if clients < 1:
        raise InvalidSpec("clients must be >= 1")
    if clients == 1:
        return (dataset,)
    rng = np.random.default_rng(seed)
    n = len(dataset)
    if label_skew > 0.0 and dataset.kind == "classification":
        alpha = (1.0 - label_skew) / label_skew
        num_classes = int(max(dataset.targets)) + 1
        proportions = rng.dirichlet(alpha * np.ones(clients), size=num_classes)
        assignment = np.array(
            [rng.choice(clients, p=proportions[label]) for label in dataset.targets]
        )
    else:
        assignment = rng.integers(0, clients, size=n)
    shards = []
    for k in range(clients):
        idx = [i for i in range(n) if assignment[i] == k]
        if not idx:
            raise InvalidSpec(
                f"client {k} received no samples; use more samples or less skew"
            )
        shards.append(
            Dataset(
                dataset.kind,
                tuple(dataset.features[i] for i in idx),
                tuple(dataset.targets[i] for i in idx),
            )
        )
    return tuple(shards)


def vertical_split(
    dataset: Dataset, split_dim: int
) -> tuple[tuple[tuple[float, ...], ...], tuple[tuple[float, ...], ...]]:
    """Column split: the first split_dim features versus the rest, rows
    kept aligned by position (shared sample ids)."""
    dim = len(dataset.features[0])
    if not 1 <= split_dim < dim:
        raise InvalidSpec(f"split_dim must lie in [1, {dim - 1}]")
    left = tuple(row[:split_dim] for row in dataset.features)
    right = tuple(row[split_dim:] for row in dataset.features)
    return left, right


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Hfl:
    clients: int

    def __post_init__(self) -> None:
        if self.clients < 1:
            raise InvalidSpec("clients must be >= 1")


@dataclass(frozen=True, slots=True)
class Vfl:
    """Two clients: client 1 holds the first split_dim feature columns,
    client 2 the remaining columns and the labels. top_hidden None runs
    the partial-logit-sum variant (logits = u1 + u2); a positive width
    gives client 1 a bottom layer and client 2 the softmax top model."""

    split_dim: int
    top_hidden: int | None = None

    def __post_init__(self) -> None:
        if self.split_dim < 1:
            raise InvalidSpec("split_dim must be >= 1")
        if self.top_hidden is not None and self.top_hidden < 1:
            raise InvalidSpec("top_hidden must be >= 1 when given")


@dataclass(frozen=True, slots=True)
class LinearRegression:
    dim: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise InvalidSpec("dim must be >= 1")


@dataclass(frozen=True, slots=True)
class SoftmaxLinear:
    dim: int
    num_classes: int

    def __post_init__(self) -> None:
        if self.dim < 1 or self.num_classes < 2:
            raise InvalidSpec("need dim >= 1 and at least 2 classes")


@dataclass(frozen=True, slots=True)
class FLScenario:
    topology: Union[Hfl, Vfl]
    model: Union[LinearRegression, SoftmaxLinear]
    data: SyntheticData
    mechanism: MechanismConfig
    rounds: int
    lr: float
    master_seed: int
    holdout: int = 200

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise InvalidSpec("rounds must be >= 1")
        if not self.lr > 0:
            raise InvalidSpec("lr must be positive")
        if self.holdout < 1:
            raise InvalidSpec("holdout must be >= 1")
        if self.model.dim != self.data.dim:
            raise DimensionMismatch(
                f"model dim {self.model.dim} vs data dim {self.data.dim}"
            )
        if isinstance(self.model, SoftmaxLinear):
            if self.data.kind != "classification":
                raise InvalidSpec("softmax model needs classification data")
            if self.model.num_classes != self.data.num_classes:
                raise DimensionMismatch(
                    f"model classes {self.model.num_classes} vs data "
                    f"classes {self.data.num_classes}"
                )
        elif self.data.kind != "regression":
            raise InvalidSpec("linear regression needs regression data")
        if isinstance(self.topology, Vfl):
            if not isinstance(self.model, SoftmaxLinear):
                raise InvalidSpec("the vertical protocol runs the softmax model")
            if self.topology.split_dim >= self.model.dim:
                raise InvalidSpec("split_dim must leave client 2 at least one column")


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Message:
    round: int
    sender: str
    plain: tuple[float, ...]
    protected: ModelInfo
    payload: bytes
    bits: int


@dataclass(frozen=True, slots=True)
class RoundRecord:
    round: int
    messages: tuple[Message, ...]
    state: tuple[float, ...]
    train_loss: float
    holdout_loss: float


@dataclass(frozen=True, slots=True)
class RoundTrace:
    scenario: FLScenario
    records: tuple[RoundRecord, ...]
    final_state: tuple[float, ...]
    total_bits: int

    def as_json_dict(self) -> dict:
        return {
            "scenario": _scenario_dict(self.scenario),
            "total_bits": self.total_bits,
            "final_state": list(self.final_state),
            "rounds": [
                {
                    "round": r.round,
                    "train_loss": r.train_loss,
                    "holdout_loss": r.holdout_loss,
                    "state": list(r.state),
                    "messages": [
                        {
                            "sender": m.sender,
                            "bits": m.bits,
                            "payload": m.payload.hex(),
                            "plain": list(m.plain),
                            "values": list(m.protected.values),
                            "encoding": _encoding_dict(m.protected),
                        }
                        for m in r.messages
                    ],
                }
                for r in self.records
            ],
        }

    @staticmethod
    def csv_header() -> list[str]:
        return ["round", "train_loss", "holdout_loss", "messages", "bits"]

    def csv_rows(self) -> list[list]:
        return [
            [
                r.round,
                r.train_loss,
                r.holdout_loss,
                len(r.messages),
                sum(m.bits for m in r.messages),
            ]
            for r in self.records
        ]


def _scenario_dict(s: FLScenario) -> dict:
    if isinstance(s.topology, Hfl):
        topo = {"kind": "hfl", "clients": s.topology.clients}
    else:
        topo = {
            "kind": "vfl",
            "split_dim": s.topology.split_dim,
            "top_hidden": s.topology.top_hidden,
        }
    if isinstance(s.model, LinearRegression):
        model = {"kind": "linear-regression", "dim": s.model.dim}
    else:
        model = {
            "kind": "softmax-linear",
            "dim": s.model.dim,
            "num_classes": s.model.num_classes,
        }
    return {
        "topology": topo,
        "model": model,
        "data": {
            "kind": s.data.kind,
            "num_samples": s.data.num_samples,
            "dim": s.data.dim,
            "num_classes": s.data.num_classes,
            "noise": s.data.noise,
            "label_skew": s.data.label_skew,
            "class_balance": list(s.data.class_balance)
            if s.data.class_balance is not None
            else None,
        },
        "mechanism": repr(s.mechanism),
        "rounds": s.rounds,
        "lr": s.lr,
        "master_seed": s.master_seed,
        "holdout": s.holdout,
    }


def _encoding_dict(info: ModelInfo) -> dict:
    enc = info.encoding
    if isinstance(enc, Plain):
        return {"type": "plain"}
    if isinstance(enc, Cipher):
        return {
            "type": "cipher",
            "n": hex(enc.n),
            "scale_bits": enc.scale_bits,
            "ciphertexts": [hex(c) for c in enc.ciphertexts],
        }
    if isinstance(enc, Shares):
        return {
            "type": "shares",
            "scale_log2": enc.scale_log2,
            "shares": [[str(v) for v in row] for row in enc.shares],
        }
    raise InvalidSpec(f"unknown encoding {type(enc).__name__}")


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


def _softmax_rows(u: np.ndarray) -> np.ndarray:
    z = np.exp(u - u.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def _init_state(model, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if isinstance(model, LinearRegression):
        return 0.1 * rng.standard_normal(model.dim)
    return 0.1 * rng.standard_normal(model.num_classes * model.dim)


def _loss_grad(
    model, theta: np.ndarray, x: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray]:
    n = x.shape[0]
    # overflow on a diverging trajectory is reported through NonFiniteLoss
    with np.errstate(over="ignore", invalid="ignore"):
        if isinstance(model, LinearRegression):
            residual = x @ theta - y
            loss = float(residual @ residual) / n
            return loss, 2.0 * (x.T @ residual) / n
        w = theta.reshape(model.num_classes, model.dim)
        probs = _softmax_rows(x @ w.T)
        loss = float(-np.log(probs[np.arange(n), y] + 1e-300).mean())
        probs[np.arange(n), y] -= 1.0
        return loss, (probs.T @ x).ravel() / n


def _loss(model, theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    return _loss_grad(model, theta, x, y)[0]


def _check_finite(loss: float, where: str) -> float:
    if not math.isfinite(loss):
        raise NonFiniteLoss(f"{where} loss diverged; reduce lr")
    return loss


# ---------------------------------------------------------------------------
# protection plumbing
# ---------------------------------------------------------------------------


def _protect(
    info: ModelInfo,
    mech: MechanismConfig,
    seed: int,
    kp: PaillierKeypair | None = None,
) -> ModelInfo:
    if isinstance(mech, Identity):
        return info
    if isinstance(mech, Randomization):
        return randomize(info, mech.sigma_eps, seed)
    if isinstance(mech, Compression):
        rho = mech.rho[0] if len(mech.rho) == 1 else mech.rho
        return compress(info, rho, seed)
    if isinstance(mech, Paillier):
        protected, _ = paillier_protect(info, mech, seed, kp=kp)
        return protected
    if isinstance(mech, SecretSharing):
        return secret_share(info, mech.num_shares, seed, mech.b, mech.r)
    raise MechanismIncompatible(f"no protocol path for {type(mech).__name__}")


def _hfl_aggregate(
    infos: Sequence[ModelInfo], mech: MechanismConfig, kp: PaillierKeypair | None
) -> np.ndarray:
    """Server-side combination of K client uploads into the new global
    state. Plain-valued mechanisms average coordinates with an exactly
    rounded sum; ciphertexts are multiplied (homomorphic sum) and the
    clients decrypt; share vectors are summed on a common integer lattice,
    both exact by construction."""
    count = len(infos)
    dim = infos[0].dim
    if isinstance(mech, Paillier):
        assert kp is not None
        scale_bits = infos[0].encoding.scale_bits
        n2 = kp.n_squared
        totals = []
        for j in range(dim):
            acc = 1
            for info in infos:
                acc = acc * info.encoding.ciphertexts[j] % n2
            totals.append(
                fixed_point_decode(paillier_decrypt(kp, acc), scale_bits, n=kp.n)
            )
        return np.array([t / count for t in totals])
    if isinstance(mech, SecretSharing):
        common = max(info.encoding.scale_log2 for info in infos)
        totals = []
        for j in range(dim):
            acc = 0
            for info in infos:
                shift = common - info.encoding.scale_log2
                acc += sum(share[j] for share in info.encoding.shares) << shift
            totals.append(lattice_float(acc, common) / count)
        return np.array(totals)
    return np.array(
        [
            math.fsum(info.values[j] for info in infos) / count
            for j in range(dim)
        ]
    )


# ---------------------------------------------------------------------------
# protocols
# ---------------------------------------------------------------------------


def _hfl_datasets(scenario: FLScenario) -> tuple[Dataset, tuple[Dataset, ...], Dataset]:
    ms = scenario.master_seed
    truth = _derive_seed(ms, "truth")
    train = synth_data(scenario.data, _derive_seed(ms, "data"), truth_seed=truth)
    shards = partition_shards(
        train,
        scenario.topology.clients,
        scenario.data.label_skew,
        _derive_seed(ms, "partition"),
    )
    held = synth_data(
        replace(scenario.data, num_samples=scenario.holdout),
        _derive_seed(ms, "holdout"),
        truth_seed=truth,
    )
    return train, shards, held


def run_hfl(scenario: FLScenario) -> RoundTrace:
    """Horizontal rounds: every client takes one local gradient step from
    the global state, protects the resulting parameter vector, uploads it,
    and the server aggregate becomes the next global state."""
    if not isinstance(scenario.topology, Hfl):
        raise InvalidSpec("run_hfl needs an Hfl topology")
    mech = scenario.mechanism
    if not isinstance(
        mech, (Identity, Randomization, Paillier, SecretSharing, Compression)
    ):
        raise MechanismIncompatible(f"no protocol path for {type(mech).__name__}")
    ms = scenario.master_seed
    train, shards, held = _hfl_datasets(scenario)
    x_full, y_full = train.as_arrays()
    x_held, y_held = held.as_arrays()
    shard_arrays = [s.as_arrays() for s in shards]
    model = scenario.model
    theta = _init_state(model, _derive_seed(ms, "init"))
    kp = (
        paillier_keygen(mech.p, mech.q, mech.g, _derive_seed(ms, "keygen"))
        if isinstance(mech, Paillier)
        else None
    )
    sparse = isinstance(mech, Compression)
    transport: list[bytes] = []
    records = []
    for rnd in range(scenario.rounds):

        def client_step(k: int, rnd=rnd, theta=theta):
            x, y = shard_arrays[k]
            _, grad = _loss_grad(model, theta, x, y)
            local = ModelInfo(tuple(theta - scenario.lr * grad))
            protected = _protect(local, mech, _derive_seed(ms, "protect", rnd, k), kp)
            payload = serialize_model_info(protected, sparse=sparse)
            return Message(
                rnd, f"client-{k}", local.values, protected, payload, 8 * len(payload)
            )

        messages = _parallel_map(client_step, range(scenario.topology.clients))
        transport.extend(m.payload for m in messages)
        theta = _hfl_aggregate([m.protected for m in messages], mech, kp)
        train_loss = _check_finite(_loss(model, theta, x_full, y_full), "training")
        holdout_loss = _check_finite(_loss(model, theta, x_held, y_held), "holdout")
        records.append(
            RoundRecord(
                rnd,
                tuple(messages),
                tuple(float(v) for v in theta),
                train_loss,
                holdout_loss,
            )
        )
    return RoundTrace(
        scenario,
        tuple(records),
        records[-1].state,
        8 * sum(len(p) for p in transport),
    )


def _vfl_data(scenario: FLScenario):
    ms = scenario.master_seed
    truth = _derive_seed(ms, "truth")
    train = synth_data(scenario.data, _derive_seed(ms, "data"), truth_seed=truth)
    held = synth_data(
        replace(scenario.data, num_samples=scenario.holdout),
        _derive_seed(ms, "holdout"),
        truth_seed=truth,
    )
    split = scenario.topology.split_dim
    x1, x2 = vertical_split(train, split)
    h1, h2 = vertical_split(held, split)
    return (
        np.asarray(x1, dtype=float),
        np.asarray(x2, dtype=float),
        np.asarray(train.targets, dtype=int),
        np.asarray(h1, dtype=float),
        np.asarray(h2, dtype=float),
        np.asarray(held.targets, dtype=int),
    )


def run_vfl(scenario: FLScenario) -> RoundTrace:
    """Vertical rounds between a feature-side client 1 and a label-side
    client 2. Client 1 uploads its partial output; client 2 computes the
    loss, protects the cut gradient, and sends it back; both update.
    Only value-preserving mechanisms fit the cut gradient: ciphertext or
    share encodings would leave client 1 unable to take its step."""
    if not isinstance(scenario.topology, Vfl):
        raise InvalidSpec("run_vfl needs a Vfl topology")
    mech = scenario.mechanism
    if not isinstance(mech, (Identity, Randomization, Compression)):
        raise MechanismIncompatible(
            f"the vertical cut gradient cannot carry {type(mech).__name__}"
        )
    ms = scenario.master_seed
    x1, x2, y, h1, h2, hy = _vfl_data(scenario)
    n = x1.shape[0]
    classes = scenario.model.num_classes
    hidden = scenario.topology.top_hidden
    sparse = isinstance(mech, Compression)
    rng_init = np.random.default_rng(_derive_seed(ms, "init"))
    if hidden is None:
        w1 = 0.1 * rng_init.standard_normal((classes, x1.shape[1]))
        w2 = 0.1 * rng_init.standard_normal((classes, x2.shape[1]))
    else:
        w1 = 0.1 * rng_init.standard_normal((hidden, x1.shape[1]))
        top = 0.1 * rng_init.standard_normal((classes, hidden + x2.shape[1]))
    transport: list[bytes] = []
    records = []

    def ce_loss(probs: np.ndarray, labels: np.ndarray) -> float:
        idx = np.arange(len(labels))
        return float(-np.log(probs[idx, labels] + 1e-300).mean())

    for rnd in range(scenario.rounds):
        if hidden is None:
            u1 = x1 @ w1.T
            logits = u1 + x2 @ w2.T
            up_plain = tuple(u1.ravel())
        else:
            u1 = x1 @ w1.T
            z = np.hstack([u1, x2])
            logits = z @ top.T
            up_plain = tuple(u1.ravel())
        up_info = ModelInfo(up_plain)
        up_payload = serialize_model_info(up_info)
        up_msg = Message(
            rnd, "client-1", up_info.values, up_info, up_payload, 8 * len(up_payload)
        )

        probs = _softmax_rows(logits)
        grad_logits = probs.copy()
        grad_logits[np.arange(n), y] -= 1.0
        if hidden is None:
            cut = grad_logits
        else:
            cut = grad_logits @ top[:, :hidden]
        cut_info = ModelInfo(tuple(cut.ravel()))
        protected = _protect(cut_info, mech, _derive_seed(ms, "protect", rnd))
        cut_payload = serialize_model_info(protected, sparse=sparse)
        cut_msg = Message(
            rnd, "client-2", cut_info.values, protected, cut_payload, 8 * len(cut_payload)
        )
        transport.extend((up_msg.payload, cut_msg.payload))

        cut_used = np.asarray(protected.values, dtype=float).reshape(cut.shape)
        if hidden is None:
            w1 = w1 - scenario.lr * (cut_used.T @ x1) / n
            w2 = w2 - scenario.lr * (grad_logits.T @ x2) / n
            state = np.concatenate([w1.ravel(), w2.ravel()])
            train_logits = x1 @ w1.T + x2 @ w2.T
            held_logits = h1 @ w1.T + h2 @ w2.T
        else:
            w1 = w1 - scenario.lr * (cut_used.T @ x1) / n
            top = top - scenario.lr * (grad_logits.T @ z) / n
            state = np.concatenate([w1.ravel(), top.ravel()])
            train_logits = np.hstack([x1 @ w1.T, x2]) @ top.T
            held_logits = np.hstack([h1 @ w1.T, h2]) @ top.T
        train_loss = _check_finite(ce_loss(_softmax_rows(train_logits), y), "training")
        holdout_loss = _check_finite(ce_loss(_softmax_rows(held_logits), hy), "holdout")
        records.append(
            RoundRecord(
                rnd,
                (up_msg, cut_msg),
                tuple(float(v) for v in state),
                train_loss,
                holdout_loss,
            )
        )
    return RoundTrace(
        scenario,
        tuple(records),
        records[-1].state,
        8 * sum(len(p) for p in transport),
    )


def run_scenario(scenario: FLScenario) -> RoundTrace:
    if isinstance(scenario.topology, Hfl):
        return run_hfl(scenario)
    return run_vfl(scenario)


# ---------------------------------------------------------------------------
# trace-level attack evaluation
# ---------------------------------------------------------------------------


def vfl_labels(scenario: FLScenario) -> tuple[int, ...]:
    """Training labels of a vertical scenario, in sample order."""
    if not isinstance(scenario.topology, Vfl):
        raise InvalidSpec("labels sit on client 2 of a vertical scenario")
    _, _, y, _, _, _ = _vfl_data(scenario)
    return tuple(int(v) for v in y)


def vfl_cut_rows(
    trace: RoundTrace, round_index: int, *, use_protected: bool = True
) -> tuple[tuple[float, ...], ...]:
    """Per-sample cut-gradient rows recorded in one vertical round."""
    scenario = trace.scenario
    if not isinstance(scenario.topology, Vfl):
        raise InvalidSpec("cut gradients exist only on vertical traces")
    n = scenario.data.num_samples
    message = trace.records[round_index].messages[1]
    flat = message.protected.values if use_protected else message.plain
    width = len(flat) // n
    return tuple(flat[i * width : (i + 1) * width] for i in range(n))


def label_recovery_rate(trace: RoundTrace, *, use_protected: bool = True) -> float:
    """Fraction of per-sample labels the direct attack reads off the
    recorded vertical cut gradients (the protected ones by default)."""
    from .attacks import direct_label_inference
    from .errors import NoNegativeCoordinate

    scenario = trace.scenario
    if not isinstance(scenario.topology, Vfl) or scenario.topology.top_hidden is not None:
        raise InvalidSpec("label recovery reads the partial-logit-sum cut gradient")
    _, _, y, _, _, _ = _vfl_data(scenario)
    classes = scenario.model.num_classes
    correct = 0
    total = 0
    for record in trace.records:
        message = record.messages[1]
        flat = message.protected.values if use_protected else message.plain
        rows = np.asarray(flat, dtype=float).reshape(len(y), classes)
        for label, row in zip(y, rows):
            total += 1
            try:
                if direct_label_inference(tuple(row)) == int(label):
                    correct += 1
            except NoNegativeCoordinate:
                pass
    return correct / total


def norm_recovery_rate(
    trace: RoundTrace, labels_known_fraction: float = 0.1
) -> float:
    """Accuracy of norm-threshold label scoring on the recorded cut
    gradients of the final round (binary labels only)."""
    from .attacks import norm_scoring_attack

    scenario = trace.scenario
    if not isinstance(scenario.topology, Vfl):
        raise InvalidSpec("norm scoring reads a vertical trace")
    _, _, y, _, _, _ = _vfl_data(scenario)
    message = trace.records[-1].messages[1]
    width = len(message.protected.values) // len(y)
    rows = np.asarray(message.protected.values, dtype=float).reshape(len(y), width)
    predicted = norm_scoring_attack(
        [tuple(r) for r in rows], [int(v) for v in y], labels_known_fraction
    )
    return float(np.mean([p == int(t) for p, t in zip(predicted, y)]))


# ---------------------------------------------------------------------------
# gap measurement
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class GapEstimate:
    """Replicate-mean gap with its standard error (None for a single
    replicate) and the per-client decomposition."""

    value: float
    stderr: float | None
    per_client: tuple[float, ...]
    replicates: int


def _as_traces(obj) -> list[RoundTrace]:
    if isinstance(obj, RoundTrace):
        return [obj]
    traces = list(obj)
    if not traces:
        raise ReplicateCountTooSmall("need at least one trace")
    return traces


def _check_paired(protected: list[RoundTrace], unprotected: list[RoundTrace]) -> None:
    if len(protected) != len(unprotected):
        raise DimensionMismatch(
            f"{len(protected)} protected vs {len(unprotected)} unprotected traces"
        )
    for a, b in zip(protected, unprotected):
        stripped = (
            replace(a.scenario, mechanism=Identity()),
            replace(b.scenario, mechanism=Identity()),
        )
        if stripped[0] != stripped[1]:
            raise InvalidSpec(
                "paired traces must share everything except the mechanism"
            )


def _stderr(values: Sequence[float]) -> float | None:
    if len(values) < 2:
        return None
    mean = math.fsum(values) / len(values)
    var = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return math.sqrt(var / len(values))


def _client_utilities(trace: RoundTrace) -> tuple[float, ...]:
    scenario = trace.scenario
    state = np.asarray(trace.final_state, dtype=float)
    if isinstance(scenario.topology, Vfl):
        value = -trace.records[-1].holdout_loss
        return (value, value)
    _, shards, _ = _hfl_datasets(scenario)
    out = []
    for shard in shards:
        x, y = shard.as_arrays()
        out.append(-_loss(scenario.model, state, x, y))
    return tuple(out)


def measure_utility_loss(
    protected,
    unprotected,
    utility_eval: Callable[[RoundTrace], float] | None = None,
) -> GapEstimate:
    """Mean utility gap E[U(unprotected)] - E[U(protected)] over paired
    seed replicates; utility defaults to negative final-round held-out
    loss. per_client holds the same gap on each client's own samples."""
    prot = _as_traces(protected)
    unprot = _as_traces(unprotected)
    if len(prot) < 2:
        raise ReplicateCountTooSmall(
            "utility expectations need >= 2 replicates for a standard error"
        )
    _check_paired(prot, unprot)
    if utility_eval is None:
        utility_eval = lambda t: -t.records[-1].holdout_loss
    diffs = [utility_eval(b) - utility_eval(a) for a, b in zip(prot, unprot)]
    clients = len(_client_utilities(prot[0]))
    per_client_diffs = [[] for _ in range(clients)]
    for a, b in zip(prot, unprot):
        ua = _client_utilities(a)
        ub = _client_utilities(b)
        for k in range(clients):
            per_client_diffs[k].append(ub[k] - ua[k])
    return GapEstimate(
        math.fsum(diffs) / len(diffs),
        _stderr(diffs),
        tuple(math.fsum(d) / len(d) for d in per_client_diffs),
        len(diffs),
    )


def _client_bits(trace: RoundTrace) -> dict[str, float]:
    """Mean transmitted bits per round for every sending client."""
    totals: dict[str, int] = {}
    for record in trace.records:
        for message in record.messages:
            totals[message.sender] = totals.get(message.sender, 0) + message.bits
    rounds = len(trace.records)
    return {sender: total / rounds for sender, total in totals.items()}


def measure_efficiency_reduction(protected, unprotected) -> GapEstimate:
    """Mean per-round transmitted-bit increase caused by protection,
    per client and averaged across clients (the system gap)."""
    prot = _as_traces(protected)
    unprot = _as_traces(unprotected)
    _check_paired(prot, unprot)
    senders = sorted(_client_bits(prot[0]))
    per_client_gaps = {sender: [] for sender in senders}
    system = []
    for a, b in zip(prot, unprot):
        bits_a = _client_bits(a)
        bits_b = _client_bits(b)
        gaps = [bits_a[s] - bits_b[s] for s in senders]
        for sender, gap in zip(senders, gaps):
            per_client_gaps[sender].append(gap)
        system.append(math.fsum(gaps) / len(gaps))
    return GapEstimate(
        math.fsum(system) / len(system),
        _stderr(system),
        tuple(
            math.fsum(per_client_gaps[s]) / len(per_client_gaps[s]) for s in senders
        ),
        len(system),
    )


def replicate_scenarios(scenario: FLScenario, count: int) -> tuple[FLScenario, ...]:
    """count copies differing only in master_seed (derived, disjoint)."""
    if count < 1:
        raise InvalidSpec("count must be >= 1")
    return tuple(
        replace(scenario, master_seed=_derive_seed(scenario.master_seed, "rep", i))
        for i in range(count)
    )
