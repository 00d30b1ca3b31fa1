"""Energy-aware federated learning simulator.

Each peer owns a data shard and a per-round energy budget. Before training
it estimates the cost of a full local pass with a power model (analytical or
approximate) and shrinks its per-round sample fraction alpha to fit the
budget. Because the approximate model can over-predict power severalfold at
high frequency, budget-constrained peers under it over-shrink: they train on
less data per round, converge slower, and end up spending more true energy
to reach the same accuracy. True energy is always scored with the
analytical model, which tracks measured power closely.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import devices
from .errors import DivergenceError, DomainError, InputFormatError, MissingDataError
from .learner import (
    Dataset,
    SoftmaxRegressor,
    average_models,
    load_idx_dataset,
    synthetic_blobs,
)
from .powermodel import (
    ANALYTICAL,
    APPROXIMATE,
    ClusterSpec,
    FittedParams,
    interpolate_voltage,
)

DEFAULT_LEARNING_RATE = 0.1
DEFAULT_BATCH_SIZE = 32
DEFAULT_W_SAMPLE_CYCLES = 1.0e6
DEFAULT_BUDGET_ALPHA = 0.8


def compute_workload(
    tau: int, dataset_size: int, alpha: float, w_sample: float
) -> float:
    """Local compute workload in cycles: tau * |D| * alpha * w_sample."""
    if tau < 1:
        raise DomainError(f"tau must be at least 1, got {tau!r}")
    if dataset_size <= 0:
        raise DomainError(f"dataset_size must be positive, got {dataset_size!r}")
    if w_sample <= 0:
        raise DomainError(f"w_sample must be positive, got {w_sample!r}")
    if not (math.isfinite(alpha) and 0.0 <= alpha <= 1.0):
        raise DomainError(f"alpha must lie in [0, 1], got {alpha!r}")
    return tau * dataset_size * alpha * w_sample


def energy_analytical(c_eff_f: float, voltage_v: float, workload_cycles: float) -> float:
    """Computation energy c_eff * V^2 * W for a workload in cycles."""
    for name, value in (
        ("c_eff_f", c_eff_f),
        ("voltage_v", voltage_v),
        ("workload_cycles", workload_cycles),
    ):
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be finite and positive, got {value!r}")
    return c_eff_f * voltage_v**2 * workload_cycles


def energy_approximate(epsilon: float, freq_hz: float, workload_cycles: float) -> float:
    """Computation energy epsilon * f^2 * W for a workload in cycles."""
    for name, value in (
        ("epsilon", epsilon),
        ("freq_hz", freq_hz),
        ("workload_cycles", workload_cycles),
    ):
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be finite and positive, got {value!r}")
    return epsilon * freq_hz**2 * workload_cycles


@dataclass(frozen=True)
class PeerProfile:
    """A federated peer: hardware profile, shard size, and energy budget."""

    id: str
    cluster: ClusterSpec
    params: FittedParams
    freq_hz: float
    dataset_size: int
    w_sample: float = DEFAULT_W_SAMPLE_CYCLES
    budget_j: float = 0.0

    def __post_init__(self):
        if not self.id:
            raise DomainError("peer id must be non-empty")
        if not self.cluster.f_min_hz <= self.freq_hz <= self.cluster.f_max_hz:
            raise DomainError(
                f"peer {self.id!r}: freq_hz {self.freq_hz!r} outside cluster range "
                f"[{self.cluster.f_min_hz!r}, {self.cluster.f_max_hz!r}]"
            )
        for name in ("dataset_size", "w_sample", "budget_j"):
            value = getattr(self, name)
            if not value > 0:
                raise DomainError(
                    f"peer {self.id!r}: {name} must be positive, got {value!r}"
                )

    @property
    def voltage_v(self) -> float:
        return interpolate_voltage(self.cluster, self.freq_hz)

    def estimated_energy(self, estimator: str, workload_cycles: float) -> float:
        if workload_cycles == 0.0:
            return 0.0
        if estimator == ANALYTICAL:
            return energy_analytical(
                self.params.c_eff_mean_f, self.voltage_v, workload_cycles
            )
        if estimator == APPROXIMATE:
            return energy_approximate(
                self.params.epsilon_mean, self.freq_hz, workload_cycles
            )
        raise DomainError(f"unknown estimator {estimator!r}")

    def true_energy(self, workload_cycles: float) -> float:
        """Ground truth is always the analytical model."""
        return self.estimated_energy(ANALYTICAL, workload_cycles)

    def over_prediction_ratio(self) -> float:
        """Approximate-over-analytical power ratio at the operating point."""
        w = compute_workload(1, self.dataset_size, 1.0, self.w_sample)
        return self.estimated_energy(APPROXIMATE, w) / self.true_energy(w)


def select_alpha(peer: PeerProfile, estimator: str, tau: int = 1) -> float:
    """Largest sample fraction whose estimated cost fits the round budget.

    alpha = clamp(budget / E_hat(alpha=1), 0, 1); by linearity of the
    workload in alpha this is exact, and an estimator over-predicting by a
    factor r shrinks alpha by exactly 1/r until the clamp engages.
    """
    full = compute_workload(tau, peer.dataset_size, 1.0, peer.w_sample)
    estimate = peer.estimated_energy(estimator, full)
    if estimate <= 0 or not math.isfinite(estimate):
        raise DomainError(
            f"peer {peer.id!r}: estimated full-round energy is degenerate ({estimate!r})"
        )
    return min(max(peer.budget_j / estimate, 0.0), 1.0)


def default_budget_j(peer_like: dict, tau: int) -> float:
    """Analytical cost of an alpha = 0.8 round; see default_peer_profiles."""
    w = compute_workload(
        tau, peer_like["dataset_size"], DEFAULT_BUDGET_ALPHA, peer_like["w_sample"]
    )
    return energy_analytical(
        peer_like["params"].c_eff_mean_f, peer_like["voltage_v"], w
    )


def default_peer_profiles(
    n_peers: int,
    shard_sizes: Sequence[int],
    tau: int,
    w_sample: float = DEFAULT_W_SAMPLE_CYCLES,
) -> list[PeerProfile]:
    """Peers assigned round-robin over the profiled handset clusters.

    Every peer runs at its cluster's top frequency, where the approximate
    model over-predicts for all five clusters, and gets a budget equal to
    the analytical cost of an alpha = 0.8 round, so budgets bind visibly
    under the approximate estimator.
    """
    if n_peers < 1:
        raise DomainError(f"need at least one peer, got {n_peers!r}")
    if len(shard_sizes) != n_peers:
        raise DomainError("shard_sizes must have one entry per peer")
    pool = [
        (handset, cluster)
        for handset in devices.HANDSETS
        for cluster in handset.clusters
    ]
    peers = []
    for i in range(n_peers):
        handset, characterization = pool[i % len(pool)]
        spec = characterization.spec
        params = characterization.fitted(devices.SINGLE)
        base = {
            "dataset_size": shard_sizes[i],
            "w_sample": w_sample,
            "params": params,
            "voltage_v": spec.v_max_v,
        }
        peers.append(
            PeerProfile(
                id=f"peer{i:02d}",
                cluster=spec,
                params=params,
                freq_hz=spec.f_max_hz,
                dataset_size=shard_sizes[i],
                w_sample=w_sample,
                budget_j=default_budget_j(base, tau),
            )
        )
    return peers


@dataclass(frozen=True)
class SyntheticDataSpec:
    kind: str = "synthetic"
    n_train: int = 60_000
    n_test: int = 10_000
    n_classes: int = 10
    dim: int = 48
    separation: float = 0.21
    anisotropy: float = 100.0

    def __post_init__(self):
        if self.kind != "synthetic":
            raise DomainError(f"SyntheticDataSpec kind must be 'synthetic', got {self.kind!r}")


@dataclass(frozen=True)
class IdxDataSpec:
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str
    kind: str = "idx"

    def __post_init__(self):
        if self.kind != "idx":
            raise DomainError(f"IdxDataSpec kind must be 'idx', got {self.kind!r}")


@dataclass(frozen=True)
class FlConfig:
    n_peers: int = 5
    tau: int = 20
    target_accuracy: float = 0.8
    max_rounds: int = 150
    estimator: str = ANALYTICAL
    ground_truth: str = ANALYTICAL
    seed: int = 0
    dataset: SyntheticDataSpec | IdxDataSpec = field(default_factory=SyntheticDataSpec)
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    w_sample: float = DEFAULT_W_SAMPLE_CYCLES
    shard_size: Optional[int] = 800

    def __post_init__(self):
        if self.n_peers < 1:
            raise DomainError(f"n_peers must be at least 1, got {self.n_peers!r}")
        if self.tau < 1:
            raise DomainError(f"tau must be at least 1, got {self.tau!r}")
        if self.shard_size is not None and self.shard_size < 1:
            raise DomainError(f"shard_size must be positive, got {self.shard_size!r}")
        if not 0.0 < self.target_accuracy < 1.0:
            raise DomainError(
                f"target_accuracy must lie in (0, 1), got {self.target_accuracy!r}"
            )
        if self.max_rounds < 0:
            raise DomainError(f"max_rounds must be non-negative, got {self.max_rounds!r}")
        if self.estimator not in (ANALYTICAL, APPROXIMATE):
            raise DomainError(f"unknown estimator {self.estimator!r}")
        if self.ground_truth != ANALYTICAL:
            raise DomainError(
                f"ground truth power is fixed to {ANALYTICAL!r}, got {self.ground_truth!r}"
            )
        if self.learning_rate <= 0 or self.batch_size < 1 or self.w_sample <= 0:
            raise DomainError("learning_rate, batch_size, and w_sample must be positive")


@dataclass(frozen=True)
class PeerRoundStats:
    peer_id: str
    alpha: float
    workload_cycles: float
    e_estimated_j: float
    e_true_j: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha!r}")


@dataclass(frozen=True)
class FlRoundRecord:
    round_index: int
    peers: tuple[PeerRoundStats, ...]
    global_accuracy: float
    cumulative_true_energy_j: float


def load_dataset(
    config: FlConfig, seed_seq: np.random.SeedSequence
) -> tuple[Dataset, Dataset]:
    spec = config.dataset
    if isinstance(spec, SyntheticDataSpec):
        return synthetic_blobs(
            spec.n_train,
            spec.n_test,
            spec.n_classes,
            spec.dim,
            spec.separation,
            seed_seq,
            anisotropy=spec.anisotropy,
        )
    return load_idx_dataset(
        spec.train_images, spec.train_labels, spec.test_images, spec.test_labels
    )


def _shard_sizes(n_train: int, n_peers: int) -> list[int]:
    base, extra = divmod(n_train, n_peers)
    return [base + (1 if i < extra else 0) for i in range(n_peers)]


def run_simulation(
    config: FlConfig, peers: Optional[list[PeerProfile]] = None
) -> list[FlRoundRecord]:
    """Sequential, seed-deterministic federated rounds until target or cap.

    Per round each peer clamps alpha to its budget, samples an alpha-sized
    subset of its shard, runs tau SGD epochs over it from the current global
    model, and the server aggregates by shard-size-weighted averaging.
    Accuracy is scored on the held-out test split.
    """
    root = np.random.SeedSequence(config.seed)
    data_ss, *peer_ss = root.spawn(1 + config.n_peers)
    train, test = load_dataset(config, data_ss)

    if peers is None:
        if config.shard_size is not None:
            sizes = [config.shard_size] * config.n_peers
        else:
            sizes = _shard_sizes(len(train), config.n_peers)
        peers = default_peer_profiles(config.n_peers, sizes, config.tau, config.w_sample)
    if len(peers) != config.n_peers:
        raise DomainError(
            f"config names {config.n_peers} peers but {len(peers)} profiles given"
        )
    if sum(p.dataset_size for p in peers) > len(train):
        raise MissingDataError(
            f"peer shards need {sum(p.dataset_size for p in peers)} training samples, "
            f"dataset has {len(train)}"
        )

    shards: list[Dataset] = []
    cursor = 0
    for peer in peers:
        shards.append(train.subset(np.arange(cursor, cursor + peer.dataset_size)))
        cursor += peer.dataset_size

    rngs = [np.random.default_rng(ss) for ss in peer_ss]
    model = SoftmaxRegressor(train.x.shape[1], train.n_classes)
    cumulative = 0.0
    records: list[FlRoundRecord] = []

    for t in range(config.max_rounds):
        locals_: list[SoftmaxRegressor] = []
        weights: list[float] = []
        stats: list[PeerRoundStats] = []
        for peer, shard, rng in zip(peers, shards, rngs):
            alpha = select_alpha(peer, config.estimator, config.tau)
            n_sub = int(round(alpha * peer.dataset_size))
            workload = compute_workload(
                config.tau, peer.dataset_size, alpha, peer.w_sample
            )
            stats.append(
                PeerRoundStats(
                    peer_id=peer.id,
                    alpha=alpha,
                    workload_cycles=workload,
                    e_estimated_j=peer.estimated_energy(config.estimator, workload),
                    e_true_j=peer.true_energy(workload),
                )
            )
            if n_sub == 0:
                continue
            subset = shard.subset(rng.choice(len(shard), size=n_sub, replace=False))
            local = model.copy()
            for _ in range(config.tau):
                loss = local.train_epoch(
                    subset.x, subset.y, config.learning_rate, config.batch_size, rng
                )
                if not math.isfinite(loss):
                    raise DivergenceError(
                        f"peer {peer.id!r} diverged (non-finite loss) at round {t}",
                        round_index=t,
                    )
            locals_.append(local)
            weights.append(float(peer.dataset_size))
        if locals_:
            model = average_models(locals_, weights)
        accuracy = model.accuracy(test)
        cumulative += sum(s.e_true_j for s in stats)
        records.append(
            FlRoundRecord(
                round_index=t,
                peers=tuple(stats),
                global_accuracy=accuracy,
                cumulative_true_energy_j=cumulative,
            )
        )
        if accuracy >= config.target_accuracy:
            break
    return records


RUN_HEADER = (
    "round",
    "peer_id",
    "alpha",
    "workload_cycles",
    "e_estimated_j",
    "e_true_j",
    "global_accuracy",
    "cumulative_true_energy_j",
)


def write_run_csv(records: Sequence[FlRoundRecord], path: str | Path) -> None:
    """Peer rows plus one aggregate row (empty peer_id) per round.

    Aggregate rows sum workload and energies over peers and carry the
    round-level accuracy and cumulative energy; full float precision.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_HEADER)
        for rec in records:
            for s in rec.peers:
                writer.writerow(
                    [
                        rec.round_index,
                        s.peer_id,
                        repr(s.alpha),
                        repr(s.workload_cycles),
                        repr(s.e_estimated_j),
                        repr(s.e_true_j),
                        "",
                        "",
                    ]
                )
            writer.writerow(
                [
                    rec.round_index,
                    "",
                    repr(float(np.mean([s.alpha for s in rec.peers]))),
                    repr(float(sum(s.workload_cycles for s in rec.peers))),
                    repr(float(sum(s.e_estimated_j for s in rec.peers))),
                    repr(float(sum(s.e_true_j for s in rec.peers))),
                    repr(rec.global_accuracy),
                    repr(rec.cumulative_true_energy_j),
                ]
            )


def read_run_csv(path: str | Path) -> list[dict]:
    """Parsed rows; numeric fields as floats, empty fields as None."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != RUN_HEADER:
            raise InputFormatError(f"{path}: expected header {','.join(RUN_HEADER)!r}")
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(RUN_HEADER):
                raise InputFormatError(
                    f"{path}:{row_no}: expected {len(RUN_HEADER)} fields, got {len(row)}"
                )
            parsed: dict = {"round": int(row[0]), "peer_id": row[1] or None}
            for key, value in zip(RUN_HEADER[2:], row[2:]):
                parsed[key] = float(value) if value else None
            rows.append(parsed)
    return rows


def load_config(path: str | Path) -> FlConfig:
    """FlConfig from a JSON document; omitted fields take defaults."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputFormatError(f"{path}: config must be a JSON object")
    raw = dict(raw)
    dataset_raw = raw.pop("dataset", None)
    kwargs = {}
    allowed = {
        "n_peers",
        "tau",
        "target_accuracy",
        "max_rounds",
        "estimator",
        "ground_truth",
        "seed",
        "learning_rate",
        "batch_size",
        "w_sample",
        "shard_size",
    }
    unknown = set(raw) - allowed
    if unknown:
        raise InputFormatError(f"{path}: unknown config fields {sorted(unknown)}")
    kwargs.update(raw)
    if dataset_raw is not None:
        if not isinstance(dataset_raw, dict):
            raise InputFormatError(f"{path}: dataset must be a JSON object")
        kind = dataset_raw.get("kind", "synthetic")
        try:
            if kind == "synthetic":
                kwargs["dataset"] = SyntheticDataSpec(**dataset_raw)
            elif kind == "idx":
                kwargs["dataset"] = IdxDataSpec(**dataset_raw)
            else:
                raise InputFormatError(f"{path}: unknown dataset kind {kind!r}")
        except TypeError as exc:
            raise InputFormatError(f"{path}: dataset spec malformed: {exc}") from exc
    try:
        return FlConfig(**kwargs)
    except TypeError as exc:
        raise InputFormatError(f"{path}: config malformed: {exc}") from exc


def write_config(config: FlConfig, path: str | Path) -> None:
    doc = {
        "n_peers": config.n_peers,
        "tau": config.tau,
        "target_accuracy": config.target_accuracy,
        "max_rounds": config.max_rounds,
        "estimator": config.estimator,
        "ground_truth": config.ground_truth,
        "seed": config.seed,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "w_sample": config.w_sample,
        "shard_size": config.shard_size,
        "dataset": vars(config.dataset).copy(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
