"""
Mixture-of-experts localization network.

x -> encoder -> z -> projection -> z_hat (unit rows) -> cosine gating against ETF anchors
z -> expert r -> local softmax o_r ; fused = concat(g_r * o_r) over experts in registry order.

Experts consume the raw latent z, gating consumes z_hat.
"""

from collections.abc import Collection, Sequence
from dataclasses import dataclass

import numpy as np

from app.core.errors import CapacityError, RegistryError, ShapeError, StateError
from app.core.logger import logger
from app.core.utils import derive_seed
from app.module.etf_gate.anchors import AnchorFrame, generate_etf
from app.module.etf_gate.gating import GateOutput, gate_batch
from app.module.moe_model.losses import PROB_FLOOR, dr_target_value, loss_ce, loss_dr, loss_total
from app.module.moe_model.registry import ClassRegistry, Coords
from app.module.moe_model.schemas import LabeledBatch, LossBreakdown, LossName, ModelConfig, Prediction
from app.module.numkit.functional import Matrix, as_matrix, l2_normalize_rows, l2_normalize_rows_backward, softmax_rows
from app.module.numkit.layers import DenseLayer, GradSet, Mlp

ENCODER = "encoder"
PROJECTION = "projection"


def expert_group(index: int) -> str:
    return f"expert:{index}"


@dataclass(eq=False)
class Expert:
    region_id: int
    anchor_index: int
    net: Mlp
    seed: int
    frozen: bool = False

    @property
    def n_classes(self) -> int:
        return self.net.out_dim


@dataclass(frozen=True, eq=False)
class FusedOutput:
    probabilities: Matrix  # batch x |C|
    gate_scores: Matrix  # batch x experts
    gate_probabilities: Matrix  # batch x experts
    selected: np.ndarray  # batch
    per_expert: list[Matrix]  # local probabilities; rows not routed to an expert are zero in hard mode
    hard: bool

    def gate_output(self, row: int) -> GateOutput:
        return GateOutput(
            scores=self.gate_scores[row].tolist(),
            probabilities=self.gate_probabilities[row].tolist(),
            selected=int(self.selected[row]) if self.hard else None,
        )


def expert_forward(expert: Expert, z, training: bool = False, seed: int = 0, keep_cache: bool = False) -> Matrix:
    """Local class probabilities of one expert for latent rows z."""
    z = as_matrix(z, name="z")
    if z.shape[1] != expert.net.in_dim:
        raise ShapeError(f"Expert for region {expert.region_id} expects latent width {expert.net.in_dim}, got {z.shape[1]}")
    return softmax_rows(expert.net.forward(z, training=training, seed=seed, keep_cache=keep_cache))


class MoEModel:
    def __init__(self, config: ModelConfig, encoder: Mlp, projection: DenseLayer, frame: AnchorFrame):
        if frame.dim != projection.out_dim:
            raise ShapeError(f"Anchor dimension {frame.dim} does not match projection width {projection.out_dim}")
        self.config = config
        self.encoder = encoder
        self.projection = projection
        self.frame = frame
        self.experts: list[Expert] = []
        self.registry = ClassRegistry()
        self._region_expert: dict[int, int] = {}
        self._projection_cache: tuple[Matrix, Matrix, Matrix, np.ndarray] | None = None

    @classmethod
    def build(cls, config: ModelConfig) -> "MoEModel":
        encoder = Mlp.build(
            [config.input_dim, config.encoder_hidden, config.latent_dim],
            ["relu", "relu"],
            seed=derive_seed(config.seed, "encoder"),
        )
        projection = DenseLayer.initialized(config.latent_dim, config.latent_dim, "identity", np.random.default_rng(derive_seed(config.seed, "projection")))
        frame_seed = config.frame_seed if config.frame_seed is not None else derive_seed(config.seed, "etf")
        frame = generate_etf(config.r_max, config.latent_dim, frame_seed)
        return cls(config, encoder, projection, frame)

    # ------------------------------------------------------------------ structure

    @property
    def active_anchors(self) -> list[int]:
        return [expert.anchor_index for expert in self.experts]

    def expert_index_of_region(self, region_id: int) -> int:
        try:
            return self._region_expert[region_id]
        except KeyError as e:
            raise RegistryError(f"No expert for region {region_id}") from e

    def anchor_of_region(self, region_id: int) -> int:
        return self.experts[self.expert_index_of_region(region_id)].anchor_index

    def add_expert(self, region_id: int, local_classes: Sequence[tuple[int, Coords]]) -> int:
        """Register a region and bind a fresh expert to the lowest unused anchor."""
        if region_id in self.registry:
            raise RegistryError(f"Region {region_id} already has an expert")
        if len(self.experts) >= self.frame.r_max:
            raise CapacityError(f"All {self.frame.r_max} anchors are bound; cannot add region {region_id}")
        used = set(self.active_anchors)
        anchor_index = min(i for i in range(self.frame.r_max) if i not in used)

        self.registry.add_region(region_id, local_classes)
        seed = derive_seed(self.config.seed, f"expert:{region_id}")
        net = Mlp.build(
            [self.config.latent_dim, self.config.expert_hidden, len(local_classes)],
            ["relu", "identity"],
            seed=seed,
            dropout_rate=self.config.expert_dropout,
        )
        self.experts.append(Expert(region_id=region_id, anchor_index=anchor_index, net=net, seed=seed))
        index = len(self.experts) - 1
        self._region_expert[region_id] = index
        logger.debug(f"Expert {index} for region {region_id} bound to anchor {anchor_index} ({len(local_classes)} classes)")
        return index

    def attach_expert(self, expert: Expert, local_classes: Sequence[tuple[int, Coords]]) -> int:
        """Re-attach a restored expert (checkpoint loading)."""
        if expert.anchor_index in self.active_anchors:
            raise RegistryError(f"Anchor {expert.anchor_index} is already bound")
        self.registry.add_region(expert.region_id, local_classes)
        self.experts.append(expert)
        self._region_expert[expert.region_id] = len(self.experts) - 1
        return len(self.experts) - 1

    def parameter_groups(self) -> dict[str, dict[str, np.ndarray]]:
        groups = {
            ENCODER: {f"encoder.{name}": value for name, value in self.encoder.parameters().items()},
            PROJECTION: {f"projection.{name}": value for name, value in self.projection.parameters().items()},
        }
        for i, expert in enumerate(self.experts):
            groups[expert_group(i)] = {f"experts.{i}.{name}": value for name, value in expert.net.parameters().items()}
        return groups

    def named_parameters(self, groups: Collection[str] | None = None) -> dict[str, np.ndarray]:
        params = {}
        for group, values in self.parameter_groups().items():
            if groups is None or group in groups:
                params.update(values)
        return params

    def group_bytes(self, group: str) -> bytes:
        """Serialized parameter bytes of one group, for freezing checks."""
        values = self.parameter_groups()[group]
        return b"".join(np.ascontiguousarray(values[name]).tobytes() for name in sorted(values))

    def param_count(self) -> int:
        return sum(value.size for value in self.named_parameters().values())

    # ------------------------------------------------------------------ forward

    def encode_project(self, x, training: bool = False, keep_cache: bool = False) -> tuple[Matrix, Matrix]:
        x = as_matrix(x, cols=self.config.input_dim)
        z = self.encoder.forward(x, training=training, keep_cache=keep_cache)
        p = self.projection.preactivation(z)
        z_hat, norms = l2_normalize_rows(p)
        if keep_cache:
            self._projection_cache = (z, p, z_hat, norms)
        return z, z_hat

    def expert_forward(self, expert: Expert, z, training: bool = False, seed: int = 0) -> Matrix:
        return expert_forward(expert, z, training=training, seed=seed)

    def _require_experts(self) -> None:
        if not self.experts:
            raise StateError("The model has no experts yet")

    def fused_forward(self, x, training: bool = False, seed: int = 0, keep_cache: bool = False) -> FusedOutput:
        """Soft gating when training, hard gating (one expert per sample) otherwise."""
        self._require_experts()
        z, z_hat = self.encode_project(x, training=training, keep_cache=keep_cache)
        scores, g, selected = gate_batch(z_hat, self.frame, self.active_anchors)
        n = z.shape[0]
        probabilities = np.zeros((n, self.registry.n_classes))
        per_expert = []
        for k, expert in enumerate(self.experts):
            block = self.registry.region_slice(expert.region_id)
            if training:
                o = expert_forward(expert, z, training=True, seed=derive_seed(seed, f"dropout:{k}"), keep_cache=keep_cache)
                probabilities[:, block] = g[:, k : k + 1] * o
            else:
                o = np.zeros((n, expert.n_classes))
                rows = np.flatnonzero(selected == k)
                if rows.size:
                    o[rows] = expert_forward(expert, z[rows])
                    probabilities[rows, block] = o[rows]
            per_expert.append(o)
        return FusedOutput(
            probabilities=probabilities,
            gate_scores=scores,
            gate_probabilities=g,
            selected=selected,
            per_expert=per_expert,
            hard=not training,
        )

    def predict_batch(self, x) -> np.ndarray:
        """Global class per row under hard gating."""
        return np.argmax(self.fused_forward(x, training=False).probabilities, axis=1)

    def predict_location(self, x) -> Prediction:
        row = np.asarray(x, dtype=np.float64)
        if row.ndim != 1:
            raise ShapeError(f"predict_location takes a single fingerprint vector, got shape {row.shape}")
        fused = self.fused_forward(row, training=False)
        k = int(fused.selected[0])
        expert = self.experts[k]
        local = int(np.argmax(fused.per_expert[k][0]))
        global_class = self.registry.region_slice(expert.region_id).start + local
        region_id, rp_id = self.registry.entry(global_class)
        return Prediction(
            global_class=global_class,
            rp_id=rp_id,
            region_id=region_id,
            expert_index=k,
            coords=self.registry.coords(global_class),
            gate_probability=float(fused.gate_probabilities[0, k]),
        )

    # ------------------------------------------------------------------ training

    def loss_and_grads(
        self,
        batch: LabeledBatch,
        losses: Collection[LossName] = ("CE", "DR"),
        trainable: Collection[str] | None = None,
        seed: int = 0,
    ) -> tuple[LossBreakdown, GradSet]:
        """Soft-gated total loss and its analytic gradients for the requested parameter groups."""
        self._require_experts()
        cfg = self.config
        trainable = set(self.parameter_groups()) if trainable is None else set(trainable)
        n = len(batch)
        fused = self.fused_forward(batch.x, training=True, seed=seed, keep_cache=True)
        z, _, z_hat, norms = self._projection_cache

        ce = loss_ce(fused, batch.global_labels)
        dr = loss_dr(z_hat, batch.anchor_labels, self.frame, cfg.dr_target)
        total = loss_total(ce if "CE" in losses else 0.0, dr if "DR" in losses else 0.0, cfg.ce_weight, cfg.dr_weight)

        grads = GradSet()
        upstream = ENCODER in trainable or PROJECTION in trainable
        dz = np.zeros_like(z)
        dz_hat = np.zeros_like(z_hat)

        if "CE" in losses and cfg.ce_weight > 0.0:
            labels = np.asarray(batch.global_labels, dtype=np.int64)
            true_expert = np.empty(n, dtype=np.int64)
            true_local = np.empty(n, dtype=np.int64)
            for i, label in enumerate(labels):
                region_id, local = self.registry.local_index(int(label))
                true_expert[i] = self._region_expert[region_id]
                true_local[i] = local
            picked = fused.probabilities[np.arange(n), labels]
            # The probability floor zeroes the gradient of clamped samples.
            weight = (cfg.ce_weight / n) * (picked >= PROB_FLOOR)

            for k, expert in enumerate(self.experts):
                group = expert_group(k)
                if group not in trainable and not upstream:
                    continue
                rows = np.flatnonzero(true_expert == k)
                d_logits = np.zeros((n, expert.n_classes))
                if rows.size:
                    d_logits[rows] = fused.per_expert[k][rows]
                    d_logits[rows, true_local[rows]] -= 1.0
                    d_logits *= weight[:, None]
                expert_grads, dz_k = expert.net.backward(d_logits)
                dz += dz_k
                if group in trainable:
                    grads.update(expert_grads.prefixed(f"experts.{k}"))

            if upstream:
                d_scores = fused.gate_probabilities.copy()
                d_scores[np.arange(n), true_expert] -= 1.0
                d_scores *= weight[:, None]
                dz_hat += d_scores @ self.frame.anchors[self.active_anchors]

        if "DR" in losses and cfg.dr_weight > 0.0 and upstream:
            anchors = self.frame.anchors[np.asarray(batch.anchor_labels, dtype=np.int64)]
            residual = np.sum(z_hat * anchors, axis=1) - dr_target_value(self.frame, cfg.dr_target)
            dz_hat += (cfg.dr_weight / n) * residual[:, None] * anchors

        if upstream:
            dp = l2_normalize_rows_backward(z_hat, norms, dz_hat)
            if PROJECTION in trainable:
                grads["projection.weight"] = z.T @ dp
                grads["projection.bias"] = dp.sum(axis=0)
            if ENCODER in trainable:
                dz += dp @ self.projection.weights.T
                encoder_grads, _ = self.encoder.backward(dz)
                grads.update(encoder_grads.prefixed("encoder"))

        groups = self.parameter_groups()
        for group in trainable.intersection(groups):
            for name, value in groups[group].items():
                if name not in grads:
                    grads[name] = np.zeros_like(value)

        self._clear_caches()
        return LossBreakdown(ce=ce, dr=dr, total=total), grads

    def _clear_caches(self) -> None:
        self._projection_cache = None
        self.encoder.clear_cache()
        for expert in self.experts:
            expert.net.clear_cache()
