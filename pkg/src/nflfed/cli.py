"""Command-line front end: scenario execution, closed-form bound tables,
attack evaluation, trade-off verification, and mechanism selection.

Scenario files are JSON documents with a "kind" of "federation" (simulator
runs) or "discrete" (enumerable release scenarios); the README documents
the complete schema. Exit codes: 0 success, 2 configuration error with a
message naming the offending field, 3 runtime failure. Every numeric value
is emitted with 12 significant digits, every artifact carries a
schema_version field, and a run manifest records the config digest so
identical configurations are checkably identical runs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__, fedsim
from .attacks import direct_label_inference, norm_scoring_attack
from .bounds import (
    DiscreteScenario,
    ModelDims,
    NotApplicable,
    TradeoffReport,
    protector_optimize,
    scenario_evaluator,
    tradeoff_report,
)
from .divergence import (
    BeliefDistribution,
    ConditionalBelief,
    bayesian_privacy_leakage,
)
from .errors import InvalidSpec, NflfedError, NoNegativeCoordinate
from .mechanisms import (
    Compression,
    Identity,
    Paillier,
    Randomization,
    SecretSharing,
)

SCHEMA_VERSION = "1"


# ---------------------------------------------------------------------------
# scenario file parsing (every failure is InvalidSpec naming the field)
# ---------------------------------------------------------------------------


def _fail(field: str, message: str) -> None:
    raise InvalidSpec(f"{field}: {message}")


def _get(obj: dict, field: str, path: str, *, default=_fail):
    if field not in obj:
        if default is _fail:
            _fail(f"{path}.{field}" if path else field, "missing required field")
        return default
    return obj[field]


def _as_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        _fail(path, "must be a JSON object")
    return value


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, "must be a number")
    return float(value)


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, "must be an integer")
    return value


def _as_bigint(value, path: str) -> int:
    """Integers that may exceed double precision arrive as strings."""
    if isinstance(value, bool):
        _fail(path, "must be an integer or a decimal/hex string")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value, 16 if value.lower().startswith("0x") else 10)
        except ValueError:
            _fail(path, f"cannot parse integer from {value!r}")
    _fail(path, "must be an integer or a decimal/hex string")


def _as_floats(value, path: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        _fail(path, "must be a nonempty array of numbers")
    return tuple(_as_number(v, f"{path}[{i}]") for i, v in enumerate(value))


def _wrap(path: str, builder):
    """Run a library constructor; its validation failures become config
    errors carrying the scenario-file field path."""
    try:
        return builder()
    except InvalidSpec as exc:
        raise InvalidSpec(f"{path}: {exc}") from None
    except NflfedError as exc:
        raise InvalidSpec(f"{path}: {exc}") from None


def parse_mechanism(obj, path: str):
    obj = _as_mapping(obj, path)
    kind = _get(obj, "kind", path)
    if kind == "identity":
        return Identity()
    if kind == "randomization":
        sigma = _as_number(_get(obj, "sigma_eps", path), f"{path}.sigma_eps")
        return _wrap(path, lambda: Randomization(sigma))
    if kind == "paillier":
        p = _as_bigint(_get(obj, "p", path), f"{path}.p")
        q = _as_bigint(_get(obj, "q", path), f"{path}.q")
        g = _get(obj, "g", path, default=None)
        if g is not None:
            g = _as_bigint(g, f"{path}.g")
        delta = _as_number(_get(obj, "delta", path, default=0.5), f"{path}.delta")
        return _wrap(path, lambda: Paillier(p, q, g, delta))
    if kind == "secret-sharing":
        shares = _as_int(_get(obj, "num_shares", path), f"{path}.num_shares")
        b = _as_floats(_get(obj, "b", path, default=[1.0]), f"{path}.b")
        r = _as_floats(_get(obj, "r", path, default=[1.0]), f"{path}.r")
        return _wrap(path, lambda: SecretSharing(shares, b, r))
    if kind == "compression":
        rho = _as_floats(_get(obj, "rho", path), f"{path}.rho")
        return _wrap(path, lambda: Compression(rho))
    _fail(f"{path}.kind", f"unknown mechanism {kind!r}")


def _mechanism_params(cfg) -> dict:
    if isinstance(cfg, Identity):
        return {"kind": "identity"}
    if isinstance(cfg, Randomization):
        return {"kind": "randomization", "sigma_eps": cfg.sigma_eps}
    if isinstance(cfg, Paillier):
        return {
            "kind": "paillier",
            "p": str(cfg.p),
            "q": str(cfg.q),
            "g": None if cfg.g is None else str(cfg.g),
            "delta": cfg.delta,
        }
    if isinstance(cfg, SecretSharing):
        return {
            "kind": "secret-sharing",
            "num_shares": cfg.num_shares,
            "b": list(cfg.b),
            "r": list(cfg.r),
        }
    if isinstance(cfg, Compression):
        return {"kind": "compression", "rho": list(cfg.rho)}
    if isinstance(cfg, ConditionalBelief):
        return {"kind": "kernel"}
    return {"kind": type(cfg).__name__}


def parse_federation(doc: dict) -> fedsim.FLScenario:
    topo_obj = _as_mapping(_get(doc, "topology", ""), "topology")
    topo_kind = _get(topo_obj, "kind", "topology")
    if topo_kind == "hfl":
        topology = _wrap(
            "topology",
            lambda: fedsim.Hfl(_as_int(_get(topo_obj, "clients", "topology"), "topology.clients")),
        )
    elif topo_kind == "vfl":
        hidden = _get(topo_obj, "top_hidden", "topology", default=None)
        if hidden is not None:
            hidden = _as_int(hidden, "topology.top_hidden")
        topology = _wrap(
            "topology",
            lambda: fedsim.Vfl(
                _as_int(_get(topo_obj, "split_dim", "topology"), "topology.split_dim"),
                hidden,
            ),
        )
    else:
        _fail("topology.kind", f"unknown topology {topo_kind!r}")

    model_obj = _as_mapping(_get(doc, "model", ""), "model")
    model_kind = _get(model_obj, "kind", "model")
    if model_kind == "linear-regression":
        model = _wrap(
            "model",
            lambda: fedsim.LinearRegression(_as_int(_get(model_obj, "dim", "model"), "model.dim")),
        )
    elif model_kind == "softmax-linear":
        model = _wrap(
            "model",
            lambda: fedsim.SoftmaxLinear(
                _as_int(_get(model_obj, "dim", "model"), "model.dim"),
                _as_int(_get(model_obj, "num_classes", "model"), "model.num_classes"),
            ),
        )
    else:
        _fail("model.kind", f"unknown model {model_kind!r}")

    data_obj = _as_mapping(_get(doc, "data", ""), "data")
    balance = _get(data_obj, "class_balance", "data", default=None)
    if balance is not None:
        balance = _as_floats(balance, "data.class_balance")
    data = _wrap(
        "data",
        lambda: fedsim.SyntheticData(
            kind=_get(data_obj, "kind", "data"),
            num_samples=_as_int(_get(data_obj, "num_samples", "data"), "data.num_samples"),
            dim=_as_int(_get(data_obj, "dim", "data"), "data.dim"),
            num_classes=_as_int(_get(data_obj, "num_classes", "data", default=2), "data.num_classes"),
            noise=_as_number(_get(data_obj, "noise", "data", default=0.1), "data.noise"),
            label_skew=_as_number(_get(data_obj, "label_skew", "data", default=0.0), "data.label_skew"),
            class_balance=balance,
        ),
    )

    mechanism = parse_mechanism(_get(doc, "mechanism", ""), "mechanism")
    return _wrap(
        "scenario",
        lambda: fedsim.FLScenario(
            topology=topology,
            model=model,
            data=data,
            mechanism=mechanism,
            rounds=_as_int(_get(doc, "rounds", ""), "rounds"),
            lr=_as_number(_get(doc, "lr", ""), "lr"),
            master_seed=_as_int(_get(doc, "master_seed", ""), "master_seed"),
            holdout=_as_int(_get(doc, "holdout", "", default=200), "holdout"),
        ),
    )


def _parse_belief_dist(obj, path: str) -> BeliefDistribution:
    obj = _as_mapping(obj, path)
    atoms = _get(obj, "atoms", path)
    if not isinstance(atoms, list) or not atoms:
        _fail(f"{path}.atoms", "must be a nonempty array")
    mass = _as_floats(_get(obj, "mass", path), f"{path}.mass")
    return _wrap(path, lambda: BeliefDistribution(tuple(atoms), mass))


def _parse_rows(entries, path: str) -> dict:
    if not isinstance(entries, list) or not entries:
        _fail(path, "must be a nonempty array of [atom, distribution] pairs")
    rows = {}
    for i, pair in enumerate(entries):
        if not isinstance(pair, list) or len(pair) != 2:
            _fail(f"{path}[{i}]", "must be an [atom, distribution] pair")
        atom = pair[0]
        if isinstance(atom, list):
            atom = tuple(atom)
        rows[atom] = _parse_belief_dist(pair[1], f"{path}[{i}]")
    return rows


def parse_channel(obj, path: str):
    if obj is None:
        return None
    obj = _as_mapping(obj, path)
    kind = _get(obj, "kind", path)
    if kind in ("identity", "randomization"):
        return parse_mechanism(obj, path)
    if kind == "kernel":
        rows = _parse_rows(_get(obj, "rows", path), f"{path}.rows")
        return ConditionalBelief(rows)
    _fail(f"{path}.kind", f"unknown channel {kind!r} (identity, randomization, kernel)")


def parse_clients(doc: dict) -> list[DiscreteScenario]:
    entries = _get(doc, "clients", "")
    if not isinstance(entries, list) or not entries:
        _fail("clients", "must be a nonempty array of client scenarios")
    channel = parse_channel(_get(doc, "channel", "", default=None), "channel")
    scenarios = []
    for i, entry in enumerate(entries):
        path = f"clients[{i}]"
        entry = _as_mapping(entry, path)
        prior = _parse_belief_dist(_get(entry, "prior", path), f"{path}.prior")
        release = ConditionalBelief(
            _parse_rows(_get(entry, "release", path), f"{path}.release")
        )
        true_data = _get(entry, "true_data", path, default=None)
        if isinstance(true_data, list):
            true_data = tuple(true_data)
        scenarios.append(
            _wrap(path, lambda: DiscreteScenario(prior, release, channel, true_data))
        )
    return scenarios


def _table_fn(entries, path: str):
    table = {}
    if not isinstance(entries, list) or not entries:
        _fail(path, "must be a nonempty array of [atom, value] pairs")
    for i, pair in enumerate(entries):
        if not isinstance(pair, list) or len(pair) != 2:
            _fail(f"{path}[{i}]", "must be an [atom, value] pair")
        atom = pair[0]
        if isinstance(atom, list):
            atom = tuple(atom)
        table[atom] = _as_number(pair[1], f"{path}[{i}][1]")

    def lookup(w):
        try:
            return table[w]
        except (KeyError, TypeError):
            raise InvalidSpec(
                f"{path}: no table entry for released atom {w!r}"
            ) from None

    return lookup


def parse_function(obj, path: str, clients: list[DiscreteScenario], *, joint: bool):
    """Build a utility (joint=True: applies to per-client atom tuples when
    K > 1) or cost (joint=False: applies to one client's atom) callable."""
    obj = _as_mapping(obj, path)
    kind = _get(obj, "kind", path)
    k = len(clients)
    if kind == "table":
        fn = _table_fn(_get(obj, "entries", path), f"{path}.entries")
        if joint and k > 1:
            _fail(path, "table applies to a single client; use sum-of-tables")
        return fn
    if kind == "sum-of-tables":
        tables = _get(obj, "tables", path)
        if not isinstance(tables, list) or (joint and len(tables) != k):
            _fail(f"{path}.tables", f"must hold one table per client ({k})")
        fns = [
            _table_fn(t, f"{path}.tables[{i}]") for i, t in enumerate(tables)
        ]
        if not joint:
            if len(fns) != 1:
                _fail(f"{path}.tables", "cost takes exactly one table")
            return fns[0]
        if k == 1:
            return fns[0]
        return lambda w: math.fsum(fn(x) for fn, x in zip(fns, w))
    if kind == "quadratic":
        center = _as_number(_get(obj, "center", path, default=0.0), f"{path}.center")
        scale = _as_number(_get(obj, "scale", path, default=1.0), f"{path}.scale")
        offset = _as_number(_get(obj, "offset", path, default=0.0), f"{path}.offset")

        def one(w):
            return offset - scale * (float(w) - center) ** 2

        if joint and k > 1:
            return lambda w: math.fsum(one(x) for x in w)
        return one
    if kind == "code-length":
        client = _as_int(_get(obj, "client", path, default=0), f"{path}.client")
        if not 0 <= client < k:
            _fail(f"{path}.client", f"must index a client (0..{k - 1})")
        datum = _get(obj, "datum", path)
        if isinstance(datum, list):
            datum = tuple(datum)
        scenario = clients[client]
        try:
            row = scenario.release.row(datum).as_mapping()
        except (KeyError, NflfedError):
            _fail(f"{path}.datum", f"release kernel has no row at {datum!r}")
        if joint and k > 1:
            _fail(path, "code-length applies to a single client's atom")

        def code(w):
            mass = row.get(w, 0.0)
            if mass <= 0.0:
                raise InvalidSpec(
                    f"{path}: released atom {w!r} has zero mass in the code row"
                )
            return -math.log2(mass)

        return code
    _fail(f"{path}.kind", f"unknown function {kind!r}")


def parse_dims(obj, path: str) -> ModelDims | None:
    if obj is None:
        return None
    obj = _as_mapping(obj, path)
    sigmas = _get(obj, "sigmas", path, default=None)
    if sigmas is not None:
        sigmas = _as_floats(sigmas, f"{path}.sigmas")
    half = _get(obj, "half_width", path, default=None)
    if half is not None:
        half = _as_number(half, f"{path}.half_width")
    return _wrap(
        path,
        lambda: ModelDims(
            _as_int(_get(obj, "m", path), f"{path}.m"), sigmas, half
        ),
    )


def load_scenario(path_str: str) -> tuple[dict, str]:
    """Parse the scenario file; returns the document and its config hash
    (a digest of the canonicalized content, independent of formatting)."""
    path = Path(path_str)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidSpec(f"scenario: cannot read {path_str!r} ({exc})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"scenario: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        _fail("scenario", "top level must be a JSON object")
    version = _get(doc, "schema_version", "")
    if version != SCHEMA_VERSION:
        _fail("schema_version", f"expected {SCHEMA_VERSION!r}, got {version!r}")
    kind = _get(doc, "kind", "")
    if kind not in ("federation", "discrete"):
        _fail("kind", f"must be 'federation' or 'discrete', got {kind!r}")
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return doc, hashlib.sha256(canonical.encode()).hexdigest()


def _require_kind(doc: dict, expected: str, command: str) -> None:
    if doc["kind"] != expected:
        _fail("kind", f"{command} needs a {expected!r} scenario")


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------


def _round12(value: float) -> float:
    if value != value or value in (float("inf"), float("-inf")):
        return value
    return float(f"{value:.12g}")


def _jsonable(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return _round12(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return str(obj)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, str):
        return "NA" if value == "NotApplicable" else value
    return str(value)


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(
        json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


class _Emitter:
    """Writes the requested artifact formats and collects their names."""

    def __init__(self, out_dir: str, fmt: str):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.fmt = fmt
        self.outputs: list[str] = []

    def json(self, name: str, doc: dict) -> None:
        if self.fmt in ("json", "both"):
            _write_json(self.dir / name, doc)
            self.outputs.append(name)

    def csv(self, name: str, header, rows) -> None:
        if self.fmt in ("csv", "both"):
            _write_csv(self.dir / name, header, rows)
            self.outputs.append(name)

    def manifest(self, command: str, args, config_hash: str, started: float) -> None:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "scenario": args.scenario,
            "master_seed": args.seed,
            "tool_version": __version__,
            "wall_clock_seconds": time.time() - started,
            "outputs": list(self.outputs),
            "config_hash": config_hash,
        }
        _write_json(self.dir / "manifest.json", doc)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    started = time.time()
    doc, config_hash = load_scenario(args.scenario)
    _require_kind(doc, "federation", "simulate")
    scenario = parse_federation(doc)
    if args.seed is not None:
        scenario = replace(scenario, master_seed=args.seed)
    trace = fedsim.run_scenario(scenario)
    emitter = _Emitter(args.out, args.format)
    report = {"schema_version": SCHEMA_VERSION, **trace.as_json_dict()}
    emitter.json("trace.json", report)
    emitter.csv("trace.csv", fedsim.RoundTrace.csv_header(), trace.csv_rows())
    emitter.manifest("simulate", args, config_hash, started)
    return 0


def _discrete_inputs(doc: dict):
    clients = parse_clients(doc)
    utility = parse_function(_get(doc, "utility", ""), "utility", clients, joint=True)
    cost = parse_function(_get(doc, "cost", ""), "cost", clients, joint=False)
    belief = _get(doc, "belief", "", default="shared-kernel")
    if belief not in ("shared-kernel", "mechanism-aware"):
        _fail("belief", f"unknown construction {belief!r}")
    dims = parse_dims(_get(doc, "dims", "", default=None), "dims")
    variant = _get(doc, "variant", "", default="theorem")
    if variant not in ("theorem", "conservative"):
        _fail("variant", f"unknown bound variant {variant!r}")
    return clients, utility, cost, belief, dims, variant


def _report_or_config_error(builder):
    """Bound construction failures stem from the scenario file (missing
    dims, uncovered atoms), so they surface as configuration errors."""
    try:
        return builder()
    except InvalidSpec:
        raise
    except NflfedError as exc:
        raise InvalidSpec(f"scenario: {exc}") from None


def cmd_bounds(args) -> int:
    started = time.time()
    doc, config_hash = load_scenario(args.scenario)
    _require_kind(doc, "discrete", "bounds")
    clients, utility, cost, belief, dims, variant = _discrete_inputs(doc)
    sweep_raw = _get(doc, "sweep", "", default=None)
    if sweep_raw is None:
        sweep = [parse_channel(_get(doc, "channel", "", default=None), "channel") or Identity()]
    else:
        if not isinstance(sweep_raw, list) or not sweep_raw:
            _fail("sweep", "must be a nonempty array of mechanism configs")
        sweep = [
            parse_mechanism(entry, f"sweep[{i}]") for i, entry in enumerate(sweep_raw)
        ]

    rows = []
    reports = []
    for i, cfg in enumerate(sweep):
        if isinstance(cfg, (Identity, Randomization, ConditionalBelief)):
            scens = [replace(s, channel=cfg) for s in clients]
        else:
            scens = clients
        report = _report_or_config_error(
            lambda: tradeoff_report(
                scens, utility, cost,
                belief=belief, mechanism=cfg, dims=dims, variant=variant,
            )
        )
        params = _mechanism_params(cfg)
        reports.append({"mechanism": params, "report": report.as_json_dict()})
        rows.append(
            (params["kind"], json.dumps(_jsonable(params), sort_keys=True))
            + report.csv_row()
        )

    emitter = _Emitter(args.out, args.format)
    emitter.json(
        "bounds.json", {"schema_version": SCHEMA_VERSION, "rows": reports}
    )
    emitter.csv(
        "bounds.csv", ("mechanism", "params") + TradeoffReport.csv_header(), rows
    )
    emitter.manifest("bounds", args, config_hash, started)
    return 0


def _empirical_leakage(pairs) -> float:
    """Leakage estimate from (true, predicted) label pairs: the mean, over
    observed attack outputs, of sqrt JS between the empirical posterior of
    the true label given that output and the label prior."""
    total = len(pairs)
    prior_counts: dict = {}
    by_pred: dict = {}
    for true, pred in pairs:
        prior_counts[true] = prior_counts.get(true, 0) + 1
        by_pred.setdefault(pred, {})
        by_pred[pred][true] = by_pred[pred].get(true, 0) + 1
    labels = sorted(prior_counts)
    prior = BeliefDistribution(
        tuple(labels), tuple(prior_counts[l] / total for l in labels)
    )
    acc = 0.0
    for pred, counts in by_pred.items():
        n = sum(counts.values())
        posterior = BeliefDistribution(
            tuple(labels), tuple(counts.get(l, 0) / n for l in labels)
        )
        acc += (n / total) * bayesian_privacy_leakage(prior, posterior)
    return acc


def cmd_attack(args) -> int:
    started = time.time()
    doc, config_hash = load_scenario(args.scenario)
    _require_kind(doc, "federation", "attack")
    spec = _as_mapping(_get(doc, "attack", ""), "attack")
    kind = _get(spec, "kind", "attack")
    if kind not in ("direct-label-inference", "norm-scoring"):
        _fail("attack.kind", f"unknown attack {kind!r}")
    scenario = parse_federation(doc)
    if args.seed is not None:
        scenario = replace(scenario, master_seed=args.seed)
    if not isinstance(scenario.topology, fedsim.Vfl):
        _fail("attack", f"{kind} reads a vertical trace; topology is hfl")
    if kind == "direct-label-inference" and scenario.topology.top_hidden is not None:
        _fail("attack", "direct label inference needs the partial-logit-sum variant")
    fraction = _as_number(
        _get(spec, "labels_known_fraction", "attack", default=0.1),
        "attack.labels_known_fraction",
    )

    trace = fedsim.run_vfl(scenario)
    labels = fedsim.vfl_labels(scenario)
    per_round = []
    pairs = []
    for rnd in range(scenario.rounds):
        rows = fedsim.vfl_cut_rows(trace, rnd)
        if kind == "direct-label-inference":
            predictions = []
            for row in rows:
                try:
                    predictions.append(direct_label_inference(row))
                except NoNegativeCoordinate:
                    predictions.append(None)
        else:
            predictions = list(norm_scoring_attack(rows, labels, fraction))
        correct = sum(1 for t, p in zip(labels, predictions) if p == t)
        per_round.append(
            {
                "round": rnd,
                "success_rate": correct / len(labels),
                "correct": correct,
                "total": len(labels),
            }
        )
        pairs.extend(
            (t, -1 if p is None else p) for t, p in zip(labels, predictions)
        )

    correct = sum(r["correct"] for r in per_round)
    total = sum(r["total"] for r in per_round)
    confusion: dict = {}
    for t, p in pairs:
        confusion[(t, p)] = confusion.get((t, p), 0) + 1
    report = {
        "schema_version": SCHEMA_VERSION,
        "attack": {"kind": kind}
        | ({"labels_known_fraction": fraction} if kind == "norm-scoring" else {}),
        "rounds": per_round,
        "overall": {
            "success_rate": correct / total,
            "correct": correct,
            "total": total,
        },
        "recovered_vs_true": [
            {"true": t, "predicted": p, "count": confusion[(t, p)]}
            for t, p in sorted(confusion)
        ],
        "epsilon_p_estimate": _empirical_leakage(pairs),
    }
    emitter = _Emitter(args.out, args.format)
    emitter.json("attack.json", report)
    emitter.csv(
        "attack.csv",
        ("round", "success_rate", "correct", "total"),
        [(r["round"], r["success_rate"], r["correct"], r["total"]) for r in per_round],
    )
    emitter.manifest("attack", args, config_hash, started)
    return 0


def cmd_verify_nfl(args) -> int:
    started = time.time()
    doc, config_hash = load_scenario(args.scenario)
    _require_kind(doc, "discrete", "verify-nfl")
    clients, utility, cost, belief, dims, variant = _discrete_inputs(doc)
    if args.replicates < 1:
        _fail("replicates", "must be >= 1")
    mechanism = _get(doc, "mechanism", "", default=None)
    if mechanism is not None:
        mechanism = parse_mechanism(mechanism, "mechanism")
    report = _report_or_config_error(
        lambda: tradeoff_report(
            clients, utility, cost,
            belief=belief, mechanism=mechanism, dims=dims, variant=variant,
        )
    )
    violated = [
        c.name for c in report.checks if c.satisfied is False
    ]
    body = report.as_json_dict()
    # enumeration is exact: replicate resampling would reproduce the same
    # numbers, so every standard error is zero by construction
    doc_out = {
        "schema_version": SCHEMA_VERSION,
        "measured": {
            "epsilon_p": {"value": report.epsilon_p, "stderr": 0.0},
            "epsilon_u": {"value": report.epsilon_u, "stderr": 0.0},
            "epsilon_e": {"value": report.epsilon_e, "stderr": 0.0},
        },
        "replicates": args.replicates,
        "per_client": body["per_client"],
        "tv_fed": body["tv_fed"],
        "constants": body["constants"],
        "checks": body["checks"],
        "violated": violated,
        "notes": body["notes"] + ["exact enumeration: standard errors are zero"],
    }
    emitter = _Emitter(args.out, args.format)
    emitter.json("nfl.json", doc_out)
    emitter.csv(
        "nfl.csv",
        ("replicates",) + TradeoffReport.csv_header() + ("violated",),
        [(args.replicates,) + report.csv_row() + ("; ".join(violated),)],
    )
    emitter.manifest("verify-nfl", args, config_hash, started)
    if violated:
        print(f"violated: {', '.join(violated)}", file=sys.stderr)
    return 0


def cmd_optimize(args) -> int:
    started = time.time()
    doc, config_hash = load_scenario(args.scenario)
    _require_kind(doc, "discrete", "optimize")
    clients, utility, cost, belief, dims, variant = _discrete_inputs(doc)
    if len(clients) != 1:
        _fail("clients", "optimize selects a channel for a single client")
    spec = _as_mapping(_get(doc, "optimize", ""), "optimize")
    grid_raw = _get(spec, "grid", "optimize")
    if not isinstance(grid_raw, list) or not grid_raw:
        _fail("optimize.grid", "must be a nonempty array of channel configs")
    grid = [
        parse_channel(entry, f"optimize.grid[{i}]")
        for i, entry in enumerate(grid_raw)
    ]
    eta_u = _as_number(_get(spec, "eta_u", "optimize", default=1.0), "optimize.eta_u")
    eta_e = _as_number(_get(spec, "eta_e", "optimize", default=1.0), "optimize.eta_e")
    chi = _as_number(_get(spec, "chi", "optimize"), "optimize.chi")
    phi = _get(spec, "phi", "optimize", default=None)
    if phi is not None:
        phi = _as_number(phi, "optimize.phi")

    evaluator = scenario_evaluator(clients[0], utility, cost, belief=belief)
    result = protector_optimize(grid, evaluator, eta_u, eta_e, chi, phi)

    evaluations = [
        {
            "index": i,
            "mechanism": _mechanism_params(e.config),
            "epsilon_p": e.epsilon_p,
            "epsilon_u": e.epsilon_u,
            "epsilon_e": e.epsilon_e,
            "objective": e.objective,
            "feasible": e.feasible,
        }
        for i, e in enumerate(result.evaluations)
    ]
    report = {
        "schema_version": SCHEMA_VERSION,
        "eta_u": eta_u,
        "eta_e": eta_e,
        "chi": chi,
        "phi": phi,
        "best_index": result.best_index,
        "best": _mechanism_params(result.best),
        "objective": result.objective,
        "evaluations": evaluations,
    }
    emitter = _Emitter(args.out, args.format)
    emitter.json("optimize.json", report)
    emitter.csv(
        "optimize.csv",
        (
            "index", "mechanism", "params", "epsilon_p", "epsilon_u",
            "epsilon_e", "objective", "feasible", "best",
        ),
        [
            (
                e["index"],
                e["mechanism"]["kind"],
                json.dumps(_jsonable(e["mechanism"]), sort_keys=True),
                e["epsilon_p"],
                e["epsilon_u"],
                e["epsilon_e"],
                e["objective"],
                e["feasible"],
                e["index"] == result.best_index,
            )
            for e in evaluations
        ],
    )
    emitter.manifest("optimize", args, config_hash, started)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario JSON file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="master seed override")
    common.add_argument(
        "--replicates", type=int, default=20, help="replicate count where applicable"
    )
    common.add_argument(
        "--format", choices=("json", "csv", "both"), default="both",
        help="artifact formats to write",
    )
    parser = argparse.ArgumentParser(
        prog="nflfed",
        description="Federated protection mechanisms, attacks, and trade-off bounds",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common]).set_defaults(func=cmd_simulate)
    sub.add_parser("bounds", parents=[common]).set_defaults(func=cmd_bounds)
    sub.add_parser("attack", parents=[common]).set_defaults(func=cmd_attack)
    sub.add_parser("verify-nfl", parents=[common]).set_defaults(func=cmd_verify_nfl)
    sub.add_parser("optimize", parents=[common]).set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidSpec as exc:
        print(f"config error - {exc}", file=sys.stderr)
        return 2
    except NflfedError as exc:
        print(f"runtime error - {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"runtime error - {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
