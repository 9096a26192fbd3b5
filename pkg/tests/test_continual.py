import numpy as np
import pytest

from app.core.errors import CapacityError, DataError, PlanError, RegistryError
from app.module.continual.planning import plan_baseline, plan_increment
from app.module.continual.replay import ReplayBuffer, ReplayEntry, TrainingPool, compose_batch, herding_select, update_replay
from app.module.continual.schemas import IncrementMode, TrainConfig
from app.module.continual.trainer import train_increment
from app.module.fingerprints.dataset import FingerprintDataset
from app.module.moe_model.model import MoEModel
from app.module.moe_model.schemas import ModelConfig


def brute_force_herding(embeddings: np.ndarray, m: int) -> list[int]:
    mean = embeddings.mean(axis=0)
    chosen: list[int] = []
    for k in range(1, m + 1):
        best, best_distance = None, None
        for i in range(len(embeddings)):
            if i in chosen:
                continue
            average = (sum((embeddings[j] for j in chosen), np.zeros_like(mean)) + embeddings[i]) / k
            distance = float(np.sqrt(np.sum((mean - average) ** 2)))
            if best_distance is None or distance < best_distance:
                best, best_distance = i, distance
        chosen.append(best)
    return chosen


def filled_buffer(n_pairs: int, dim: int = 4) -> ReplayBuffer:
    buffer = ReplayBuffer()
    for i in range(n_pairs):
        buffer.replace((f"D{i}", i), [ReplayEntry(x=np.full(dim, i / 100.0), global_label=i, device_id=f"D{i}", region_id=i)])
    return buffer


def pool(n: int, dim: int = 4) -> TrainingPool:
    return TrainingPool(x=np.zeros((n, dim)), global_labels=np.arange(n) % 3, region_ids=np.zeros(n, dtype=np.int64))


class TestPlans:
    def test_dil(self):
        plan = plan_increment(IncrementMode.DIL)
        assert plan.trainable == {"encoder", "projection"}
        assert plan.losses == {"CE", "DR"}

    def test_cil(self, tiny_data):
        _, dataset = tiny_data
        plan = plan_increment("CIL", [dataset.region_spec(1)])
        assert plan.trainable == {"new_expert"}
        assert plan.losses == {"CE"}

    def test_cil_with_gate(self, tiny_data):
        _, dataset = tiny_data
        assert plan_increment("CIL", [dataset.region_spec(1)], cil_train_gate=True).trainable == {"new_expert", "projection"}

    def test_cdil(self, tiny_data):
        _, dataset = tiny_data
        plan = plan_increment(IncrementMode.CDIL, [dataset.region_spec(2)])
        assert plan.trainable == {"encoder", "projection", "new_expert"}
        assert plan.losses == {"CE", "DR"}

    def test_inconsistent_modes(self, tiny_data):
        _, dataset = tiny_data
        with pytest.raises(PlanError):
            plan_increment(IncrementMode.DIL, [dataset.region_spec(0)])
        with pytest.raises(PlanError):
            plan_increment(IncrementMode.CIL)
        with pytest.raises(PlanError):
            plan_increment("TIL")

    def test_baseline(self, tiny_data):
        _, dataset = tiny_data
        plan = plan_baseline(IncrementMode.DIL, [dataset.region_spec(r) for r in dataset.regions()])
        assert plan.baseline and len(plan.new_regions) == 3
        assert plan.trainable == {"encoder", "projection", "new_expert"}
        with pytest.raises(PlanError):
            plan_baseline(IncrementMode.CIL, [])


class TestHerding:
    def test_mean_member(self):
        assert herding_select([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], 1) == [1]

    def test_tie_goes_to_lowest_index(self):
        assert herding_select([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], 2) == [1, 0]

    def test_exhaustion(self, rng):
        picks = herding_select(rng.normal(size=(5, 3)), 5)
        assert sorted(picks) == [0, 1, 2, 3, 4]

    def test_matches_brute_force(self, rng):
        for _ in range(200):
            n = int(rng.integers(3, 13))
            embeddings = rng.normal(size=(n, int(rng.integers(1, 5))))
            for m in (1, 2, 3):
                assert herding_select(embeddings, m) == brute_force_herding(embeddings, m)

    def test_invalid_requests(self):
        with pytest.raises(DataError):
            herding_select(np.zeros((0, 2)), 1)
        with pytest.raises(DataError):
            herding_select(np.zeros((2, 2)), 3)


class TestBuffer:
    def test_capacity_enforced(self):
        buffer = ReplayBuffer(per_pair_capacity=1)
        entry = ReplayEntry(x=np.zeros(2), global_label=0, device_id="A", region_id=0)
        with pytest.raises(CapacityError):
            buffer.replace(("A", 0), [entry, entry])

    def test_payload_round_trip(self):
        buffer = filled_buffer(3)
        restored = ReplayBuffer.from_payload(buffer.to_payload())
        assert restored.counts() == buffer.counts()
        for a, b in zip(restored.arrays(), buffer.arrays()):
            assert np.array_equal(a, b)

    def test_update_keeps_one_per_pair(self, small_model_config, tiny_split):
        train, _ = tiny_split
        model = MoEModel.build(small_model_config)
        for region_id in train.regions():
            model.add_expert(region_id, train.region_spec(region_id).local_classes())
        buffer = ReplayBuffer()
        update_replay(buffer, model, train.select(devices=["BLU"], regions=[0]))
        assert len(buffer) == 1
        update_replay(buffer, model, train.select(devices=["BLU", "HTC"]))
        assert len(buffer) == 6

    def test_prototype_is_nearest_to_mean(self, small_model_config, tiny_split):
        train, _ = tiny_split
        model = MoEModel.build(small_model_config)
        model.add_expert(0, train.region_spec(0).local_classes())
        data = train.select(devices=["LG"], regions=[0])
        buffer = update_replay(ReplayBuffer(), model, data)
        z = model.encoder.forward(data.features(), keep_cache=False)
        nearest = int(np.argmin(np.linalg.norm(z - z.mean(axis=0), axis=1)))
        assert np.array_equal(buffer.entries[0].x, data.features()[nearest])


class TestComposeBatch:
    def test_replay_share(self, rng):
        batch = compose_batch(pool(100), filled_buffer(20), TrainConfig(batch_size=64, replay_fraction=0.25), rng)
        assert (batch.n_replay, batch.n_new) == (16, 48)
        assert batch.x.shape == (64, 4)

    def test_small_buffer_draws_with_replacement(self, rng):
        batch = compose_batch(pool(100), filled_buffer(3), TrainConfig(batch_size=64, replay_fraction=0.25), rng)
        assert batch.n_replay == 16
        assert set(batch.region_ids[48:].tolist()) <= {0, 1, 2}

    def test_empty_buffer(self, rng):
        batch = compose_batch(pool(100), ReplayBuffer(), TrainConfig(batch_size=64), rng)
        assert (batch.n_replay, batch.n_new) == (0, 64)

    def test_replay_disabled(self, rng):
        batch = compose_batch(pool(100), filled_buffer(20), TrainConfig(batch_size=64, replay_fraction=0.0), rng)
        assert batch.n_replay == 0

    def test_needs_new_data(self, rng):
        with pytest.raises(DataError):
            compose_batch(pool(0), ReplayBuffer(), TrainConfig(), rng)


class TestFreezing:
    @pytest.fixture
    def baseline(self, small_model_config, fast_train_config, tiny_split):
        train, _ = tiny_split
        model = MoEModel.build(small_model_config)
        buffer = ReplayBuffer()
        data = train.select(regions=[0])
        train_increment(model, plan_baseline(IncrementMode.CIL, [train.region_spec(0)]), data, buffer, fast_train_config)
        update_replay(buffer, model, data)
        return model, buffer

    def snapshot(self, model: MoEModel) -> dict[str, bytes]:
        snap = {group: model.group_bytes(group) for group in model.parameter_groups()}
        snap["frame"] = model.frame.fingerprint()
        return snap

    def test_cil_touches_only_the_new_expert(self, baseline, fast_train_config, tiny_split):
        model, buffer = baseline
        train, _ = tiny_split
        before = self.snapshot(model)
        report = train_increment(model, plan_increment("CIL", [train.region_spec(1)]), train.select(regions=[1]), buffer, fast_train_config)
        after = self.snapshot(model)
        assert before == {k: after[k] for k in before}
        assert report.trainable_groups == ["expert:1"]
        assert model.experts[0].frozen and not model.experts[1].frozen

    def test_dil_leaves_experts_untouched(self, baseline, fast_train_config, tiny_split):
        model, buffer = baseline
        train, _ = tiny_split
        before = model.group_bytes("expert:0")
        encoder_before = model.group_bytes("encoder")
        train_increment(model, plan_increment("DIL"), train.select(devices=["HTC"], regions=[0]), buffer, fast_train_config)
        assert model.group_bytes("expert:0") == before
        assert model.group_bytes("encoder") != encoder_before

    def test_known_region_rejected(self, baseline, fast_train_config, tiny_split):
        model, buffer = baseline
        train, _ = tiny_split
        with pytest.raises(RegistryError):
            train_increment(model, plan_increment("CIL", [train.region_spec(0)]), train.select(regions=[0]), buffer, fast_train_config)

    def test_empty_data_rejected(self, baseline, fast_train_config, tiny_split):
        model, buffer = baseline
        train, _ = tiny_split
        with pytest.raises(DataError):
            train_increment(model, plan_increment("DIL"), train.select(devices=["nobody"]), buffer, fast_train_config)

    def test_unregistered_class_rejected(self, baseline, fast_train_config, tiny_split):
        model, buffer = baseline
        train, _ = tiny_split
        with pytest.raises(DataError):
            train_increment(model, plan_increment("DIL"), train.select(regions=[2]), buffer, fast_train_config)

    def test_training_is_deterministic(self, small_model_config, fast_train_config, tiny_split):
        train, _ = tiny_split
        data = train.select(regions=[0])
        models = []
        for _ in range(2):
            model = MoEModel.build(small_model_config)
            train_increment(model, plan_baseline(IncrementMode.CIL, [train.region_spec(0)]), data, ReplayBuffer(), fast_train_config)
            models.append(model)
        assert all(models[0].group_bytes(g) == models[1].group_bytes(g) for g in models[0].parameter_groups())


def separable_region(seed: int, per_rp: int = 16) -> FingerprintDataset:
    """Four RPs, each loud on its own block of four APs and silent elsewhere."""
    rng = np.random.default_rng(seed)
    rp_ids = np.repeat(np.arange(4), per_rp)
    rss = np.full((rp_ids.size, 16), -100.0)
    for i, rp in enumerate(rp_ids):
        rss[i, 4 * rp : 4 * rp + 4] = -30.0 + rng.uniform(-1.0, 1.0, size=4)
    return FingerprintDataset(
        rss=rss,
        device_ids=np.full(rp_ids.size, "BLU", dtype=object),
        region_ids=np.zeros(rp_ids.size, dtype=np.int64),
        rp_ids=rp_ids.astype(np.int64),
        coords=np.column_stack([rp_ids.astype(np.float64), np.zeros(rp_ids.size), np.zeros(rp_ids.size)]),
        time_index=np.zeros(rp_ids.size, dtype=np.int64),
    )


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_cil_fits_a_separable_region(seed):
    # a lone expert gets gate weight 1, so the fused CE is the expert's own CE
    data = separable_region(seed)
    config = ModelConfig(input_dim=16, encoder_hidden=32, latent_dim=16, expert_hidden=16, expert_dropout=0.0, r_max=4, seed=seed)
    model = MoEModel.build(config)
    encoder_before = model.group_bytes("encoder")
    plan = plan_increment(IncrementMode.CIL, [data.region_spec(0)])
    report = train_increment(model, plan, data, ReplayBuffer(), TrainConfig(batch_size=16, epochs=50, learning_rate=2e-2, seed=seed))
    assert report.trainable_groups == ["expert:0"]
    assert len(report.epochs) == 50
    assert report.final_loss.ce < 0.1
    assert model.group_bytes("encoder") == encoder_before
