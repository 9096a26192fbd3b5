"""
Naive sequential fine-tuning: one encoder and one softmax head over every global class,
trained on each increment's data alone with no replay and no freezing.
"""

from collections.abc import Sequence

import numpy as np

from app.core.errors import DataError, RegistryError
from app.core.logger import logger
from app.core.utils import derive_seed
from app.module.continual.schemas import TrainConfig
from app.module.fingerprints.dataset import FingerprintDataset
from app.module.moe_model.registry import ClassRegistry, RegionSpec
from app.module.moe_model.schemas import ModelConfig
from app.module.numkit.functional import as_matrix, softmax_rows
from app.module.numkit.layers import DenseLayer, GradSet, Mlp
from app.module.numkit.optim import AdamState, adam_step
from app.module.scenarios.runner import evaluate_units, region_specs, scenario_model_config
from app.module.scenarios.schemas import MetricLog, ScenarioPlan


class NaiveClassifier:
    def __init__(self, config: ModelConfig):
        self.config = config
        self.encoder = Mlp.build([config.input_dim, config.encoder_hidden, config.latent_dim], ["relu", "relu"], seed=derive_seed(config.seed, "encoder"))
        self.head: DenseLayer | None = None
        self.registry = ClassRegistry()

    def grow(self, regions: Sequence[RegionSpec]) -> None:
        """Widen the head for new regions; existing output columns keep their weights."""
        for spec in regions:
            self.registry.add_region(spec.region_id, spec.local_classes())
        n_classes = self.registry.n_classes
        rng = np.random.default_rng(derive_seed(self.config.seed, f"head:{n_classes}"))
        fresh = DenseLayer.initialized(self.config.latent_dim, n_classes, "identity", rng)
        if self.head is not None:
            old = self.head.out_dim
            fresh.weights[:, :old] = self.head.weights
            fresh.bias[:old] = self.head.bias
        self.head = fresh

    def parameters(self) -> dict[str, np.ndarray]:
        params = {f"encoder.{k}": v for k, v in self.encoder.parameters().items()}
        params.update({f"head.{k}": v for k, v in self.head.parameters().items()})
        return params

    def predict_batch(self, x) -> np.ndarray:
        if self.head is None:
            raise RegistryError("The classifier has no classes yet")
        z = self.encoder.forward(as_matrix(x, cols=self.config.input_dim), keep_cache=False)
        return np.argmax(self.head.preactivation(z), axis=1)

    def loss_and_grads(self, x, labels) -> tuple[float, GradSet]:
        x = as_matrix(x, cols=self.config.input_dim)
        n = x.shape[0]
        z = self.encoder.forward(x, keep_cache=True)
        probs = softmax_rows(self.head.preactivation(z))
        picked = np.maximum(probs[np.arange(n), labels], 1e-12)
        loss = float(-np.mean(np.log(picked)))
        d_logits = probs.copy()
        d_logits[np.arange(n), labels] -= 1.0
        d_logits /= n
        grads = GradSet({"head.weight": z.T @ d_logits, "head.bias": d_logits.sum(axis=0)})
        encoder_grads, _ = self.encoder.backward(d_logits @ self.head.weights.T)
        self.encoder.clear_cache()
        grads.update(encoder_grads.prefixed("encoder"))
        return loss, grads

    def fit(self, data: FingerprintDataset, cfg: TrainConfig) -> list[float]:
        x = data.features()
        labels = np.asarray([self.registry.global_index(int(r), int(rp)) for r, rp in zip(data.region_ids, data.rp_ids)], dtype=np.int64)
        params = self.parameters()
        adam = AdamState.for_params(params, learning_rate=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon)
        history = []
        for epoch in range(cfg.epochs):
            order = np.random.default_rng(derive_seed(cfg.seed, f"epoch:{epoch}")).permutation(len(data))
            losses = []
            for start in range(0, len(data), cfg.batch_size):
                rows = order[start : start + cfg.batch_size]
                loss, grads = self.loss_and_grads(x[rows], labels[rows])
                adam_step(params, grads, adam)
                losses.append(loss)
            history.append(float(np.mean(losses)))
        return history


def naive_baseline_run(
    plan: ScenarioPlan,
    train: FingerprintDataset,
    test: FingerprintDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    seed: int,
) -> tuple[MetricLog, NaiveClassifier]:
    """Same steps and evaluation protocol as run_scenario, with plain fine-tuning."""
    specs = region_specs(FingerprintDataset.concat([train, test]))
    classifier = NaiveClassifier(scenario_model_config(model_config, plan, train.n_aps, seed))
    log = MetricLog()
    seen_pairs = []
    for step, increment in enumerate(plan.increments, start=1):
        new_data = train.select(devices=increment.devices, regions=increment.regions)
        if len(new_data) == 0:
            raise DataError(f"{increment.label}: no training data for devices {increment.devices} x regions {increment.regions}")
        if increment.new_regions:
            classifier.grow([specs[r] for r in increment.new_regions])
        history = classifier.fit(new_data, train_config.model_copy(update={"seed": derive_seed(seed, f"naive:{step}")}))
        seen_pairs.extend(pair for pair in new_data.pairs() if pair not in seen_pairs)
        log.add(evaluate_units(classifier, test, seen_pairs, plan.unit_type, step, increment.label, increment.mode))
        logger.debug(f"naive {increment.label}: final loss {history[-1]:.4f}, head width {classifier.registry.n_classes}")
    return log, classifier
