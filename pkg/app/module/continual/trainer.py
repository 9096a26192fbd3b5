import numpy as np

from app.core.errors import DataError, RegistryError
from app.core.logger import logger
from app.core.utils import derive_seed
from app.module.continual.replay import ReplayBuffer, TrainingPool, compose_batch
from app.module.continual.schemas import EpochLoss, TrainConfig, TrainingReport, TrainPlan
from app.module.fingerprints.dataset import FingerprintDataset
from app.module.moe_model.model import ENCODER, PROJECTION, MoEModel, expert_group
from app.module.moe_model.schemas import LabeledBatch
from app.module.numkit.optim import AdamState, adam_step


def training_pool(model: MoEModel, data: FingerprintDataset) -> TrainingPool:
    """Scaled features and global labels; every region in data must already have an expert."""
    labels = np.empty(len(data), dtype=np.int64)
    for i, (region_id, rp_id) in enumerate(zip(data.region_ids, data.rp_ids)):
        try:
            labels[i] = model.registry.global_index(int(region_id), int(rp_id))
        except RegistryError as e:
            raise DataError(f"Training sample {i} targets an unregistered class", details=e.message) from e
    return TrainingPool(x=data.features(), global_labels=labels, region_ids=data.region_ids.astype(np.int64))


def _trainable_groups(model: MoEModel, plan: TrainPlan, new_experts: list[int]) -> set[str]:
    groups = set()
    if "encoder" in plan.trainable:
        groups.add(ENCODER)
    if "projection" in plan.trainable:
        groups.add(PROJECTION)
    if "new_expert" in plan.trainable:
        groups.update(expert_group(k) for k in new_experts)
    return groups


def train_increment(model: MoEModel, plan: TrainPlan, new_data: FingerprintDataset, buffer: ReplayBuffer, cfg: TrainConfig) -> TrainingReport:
    """Run one increment: add the plan's experts, then Adam on the plan's groups and losses only."""
    if len(new_data) == 0:
        raise DataError(f"{plan.mode} increment has no training data")
    for spec in plan.new_regions:
        if spec.region_id in model.registry:
            raise RegistryError(f"Region {spec.region_id} is already known; it cannot be introduced again")

    new_experts = [model.add_expert(spec.region_id, spec.local_classes()) for spec in plan.new_regions]
    groups = _trainable_groups(model, plan, new_experts)
    params = model.named_parameters(groups)
    adam = AdamState.for_params(params, learning_rate=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon)
    pool = training_pool(model, new_data)
    anchor_of = {region_id: model.anchor_of_region(region_id) for region_id in model.registry.regions}
    chunk = cfg.batch_size - (cfg.replay_per_batch if len(buffer) else 0)
    tag = "baseline" if plan.baseline else plan.mode.value
    logger.info(
        f"{tag} increment: {len(pool)} samples, regions +{[s.region_id for s in plan.new_regions]}, "
        f"trainable {sorted(groups)}, losses {sorted(plan.losses)}, replay {len(buffer)}"
    )

    history = []
    for epoch in range(cfg.epochs):
        rng = np.random.default_rng(derive_seed(cfg.seed, f"epoch:{epoch}"))
        order = rng.permutation(len(pool))
        sums = np.zeros(3)
        n_batches = 0
        for start in range(0, len(pool), chunk):
            mixed = compose_batch(pool, buffer, cfg, rng, new_rows=order[start : start + chunk])
            batch = LabeledBatch(
                x=mixed.x,
                global_labels=mixed.global_labels,
                anchor_labels=np.asarray([anchor_of[int(r)] for r in mixed.region_ids], dtype=np.int64),
            )
            loss, grads = model.loss_and_grads(batch, losses=plan.losses, trainable=groups, seed=derive_seed(cfg.seed, f"dropout:{epoch}:{n_batches}"))
            adam_step(params, grads, adam)
            sums += (loss.ce, loss.dr, loss.total)
            n_batches += 1
        ce, dr, total = sums / n_batches
        history.append(EpochLoss(epoch=epoch, ce=float(ce), dr=float(dr), total=float(total), batches=n_batches))
        logger.debug(f"epoch {epoch}: ce={ce:.4f} dr={dr:.4f} total={total:.4f}")

    for k, expert in enumerate(model.experts):
        expert.frozen = expert_group(k) not in groups

    return TrainingReport(
        mode=plan.mode,
        baseline=plan.baseline,
        new_regions=[spec.region_id for spec in plan.new_regions],
        trainable_groups=sorted(groups),
        n_samples=len(pool),
        epochs=history,
    )
