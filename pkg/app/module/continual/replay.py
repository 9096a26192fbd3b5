"""
Device-region balanced exemplar replay.

Each observed (device, region) pair keeps per_pair_capacity prototypes picked by herding on
the encoder latent z, so every pair is represented equally however much data it brought.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.core.errors import CapacityError, DataError
from app.core.logger import logger
from app.module.continual.schemas import TrainConfig
from app.module.fingerprints.dataset import FingerprintDataset, Pair
from app.module.moe_model.model import MoEModel
from app.module.numkit.checkpoint import ArrayPayload, decode_array, encode_array


@dataclass(frozen=True, eq=False)
class ReplayEntry:
    x: np.ndarray  # scaled features
    global_label: int
    device_id: str
    region_id: int


class ReplayEntryPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    device_id: str
    region_id: int
    global_label: int
    x: ArrayPayload


class ReplayBufferPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    per_pair_capacity: int
    entries: list[ReplayEntryPayload]


class ReplayBuffer:
    def __init__(self, per_pair_capacity: int = 1):
        if per_pair_capacity < 1:
            raise CapacityError(f"per_pair_capacity must be at least 1, got {per_pair_capacity}")
        self.per_pair_capacity = per_pair_capacity
        self._slots: dict[Pair, list[ReplayEntry]] = {}

    def __len__(self) -> int:
        return sum(len(entries) for entries in self._slots.values())

    @property
    def entries(self) -> list[ReplayEntry]:
        return [entry for entries in self._slots.values() for entry in entries]

    def pairs(self) -> list[Pair]:
        return list(self._slots)

    def counts(self) -> dict[Pair, int]:
        return {pair: len(entries) for pair, entries in self._slots.items()}

    def replace(self, pair: Pair, entries: Sequence[ReplayEntry]) -> None:
        if len(entries) > self.per_pair_capacity:
            raise CapacityError(f"{len(entries)} prototypes exceed the capacity of {self.per_pair_capacity} for pair {pair}")
        self._slots[pair] = list(entries)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(features, global labels, region ids) of every entry, in pair order."""
        entries = self.entries
        if not entries:
            return np.zeros((0, 0)), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return (
            np.vstack([e.x for e in entries]),
            np.asarray([e.global_label for e in entries], dtype=np.int64),
            np.asarray([e.region_id for e in entries], dtype=np.int64),
        )

    def to_payload(self) -> ReplayBufferPayload:
        return ReplayBufferPayload(
            per_pair_capacity=self.per_pair_capacity,
            entries=[
                ReplayEntryPayload(device_id=e.device_id, region_id=e.region_id, global_label=e.global_label, x=encode_array(e.x))
                for e in self.entries
            ],
        )

    @classmethod
    def from_payload(cls, payload: ReplayBufferPayload) -> "ReplayBuffer":
        buffer = cls(payload.per_pair_capacity)
        slots: dict[Pair, list[ReplayEntry]] = {}
        for item in payload.entries:
            entry = ReplayEntry(x=decode_array(item.x), global_label=item.global_label, device_id=item.device_id, region_id=item.region_id)
            slots.setdefault((item.device_id, item.region_id), []).append(entry)
        for pair, entries in slots.items():
            buffer.replace(pair, entries)
        return buffer


def herding_select(embeddings, m: int) -> list[int]:
    """Greedy herding: each pick minimizes ||mean - running average including the candidate||.

    Picks are without repetition and ties go to the lowest index.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    if e.size == 0:
        raise DataError("Herding needs at least one embedding")
    if e.ndim == 1:
        e = e[:, None]
    n = e.shape[0]
    if not 1 <= m <= n:
        raise DataError(f"Cannot herd {m} prototypes out of {n} embeddings")

    mean = e.mean(axis=0)
    running = np.zeros_like(mean)
    available = np.ones(n, dtype=bool)
    selected: list[int] = []
    for k in range(1, m + 1):
        distances = np.linalg.norm(mean - (running + e) / k, axis=1)
        distances[~available] = np.inf
        pick = int(np.argmin(distances))
        selected.append(pick)
        available[pick] = False
        running += e[pick]
    return selected


def update_replay(buffer: ReplayBuffer, model: MoEModel, new_data: FingerprintDataset) -> ReplayBuffer:
    """Re-select prototypes for every (device, region) pair present in new_data with the current encoder."""
    x = new_data.features()
    for pair, rows in new_data.pair_indices().items():
        device_id, region_id = pair
        z = model.encoder.forward(x[rows], keep_cache=False)
        picks = herding_select(z, min(buffer.per_pair_capacity, rows.size))
        entries = [
            ReplayEntry(
                x=x[rows[i]].copy(),
                global_label=model.registry.global_index(region_id, int(new_data.rp_ids[rows[i]])),
                device_id=device_id,
                region_id=region_id,
            )
            for i in picks
        ]
        buffer.replace(pair, entries)
    logger.debug(f"Replay buffer holds {len(buffer)} prototypes over {len(buffer.pairs())} pairs")
    return buffer


@dataclass(frozen=True, eq=False)
class MixedBatch:
    x: np.ndarray
    global_labels: np.ndarray
    region_ids: np.ndarray
    n_new: int
    n_replay: int


@dataclass(frozen=True, eq=False)
class TrainingPool:
    """New increment data in model-ready form."""

    x: np.ndarray
    global_labels: np.ndarray
    region_ids: np.ndarray

    def __len__(self) -> int:
        return self.x.shape[0]


def compose_batch(new_data: TrainingPool, buffer: ReplayBuffer, cfg: TrainConfig, rng: np.random.Generator, new_rows=None) -> MixedBatch:
    """floor(rho * N) replay prototypes plus N - floor(rho * N) new samples.

    An empty buffer yields an all-new batch. new_rows, when given, fixes the new part
    (epoch iteration); otherwise it is drawn from the pool.
    """
    if len(new_data) == 0:
        raise DataError("compose_batch needs new data")
    n_replay = cfg.replay_per_batch if len(buffer) else 0
    if new_rows is None:
        n_new = cfg.batch_size - n_replay
        new_rows = rng.choice(len(new_data), size=n_new, replace=n_new > len(new_data))
    new_rows = np.asarray(new_rows, dtype=np.int64)

    parts_x = [new_data.x[new_rows]]
    parts_y = [new_data.global_labels[new_rows]]
    parts_r = [new_data.region_ids[new_rows]]
    if n_replay:
        rx, ry, rr = buffer.arrays()
        rows = rng.choice(len(buffer), size=n_replay, replace=len(buffer) < n_replay)
        parts_x.append(rx[rows])
        parts_y.append(ry[rows])
        parts_r.append(rr[rows])
    return MixedBatch(
        x=np.vstack(parts_x),
        global_labels=np.concatenate(parts_y),
        region_ids=np.concatenate(parts_r),
        n_new=new_rows.size,
        n_replay=n_replay,
    )
