import numpy as np
import pytest

from app.config.run_config import RunConfig
from app.module.continual.schemas import TrainConfig
from app.module.fingerprints.dataset import split_train_test
from app.module.fingerprints.schemas import DEFAULT_DEVICES, BuildingTemplate, WorldConfig
from app.module.fingerprints.world import generate_dataset
from app.module.moe_model.diagnostics import toy_model
from app.module.moe_model.schemas import ModelConfig

TINY_TEMPLATE = BuildingTemplate(name="tiny", grid_x=4, grid_y=3, n_aps=16)
TINY_N_RP = 4  # 12 RPs -> 3 regions


@pytest.fixture
def tiny_world() -> WorldConfig:
    return WorldConfig(building="custom", custom=TINY_TEMPLATE, samples_per_rp=6, ap_margin_m=5.0)


@pytest.fixture
def tiny_devices():
    return list(DEFAULT_DEVICES[:3])


@pytest.fixture
def tiny_data(tiny_world, tiny_devices):
    return generate_dataset(tiny_world, tiny_devices, TINY_N_RP, seed=7)


@pytest.fixture
def tiny_split(tiny_data):
    _, dataset = tiny_data
    return split_train_test(dataset, 0.2, seed=3)


@pytest.fixture
def small_model_config() -> ModelConfig:
    return ModelConfig(input_dim=16, encoder_hidden=16, latent_dim=8, expert_hidden=8, r_max=4)


@pytest.fixture
def fast_train_config() -> TrainConfig:
    return TrainConfig(batch_size=16, epochs=3, learning_rate=5e-3)


@pytest.fixture
def tiny_run_config(tiny_world, tiny_devices, small_model_config, fast_train_config, tmp_path) -> RunConfig:
    return RunConfig(
        seed=1,
        output_dir=tmp_path / "runs",
        world=tiny_world,
        devices=tiny_devices,
        model=small_model_config,
        train=fast_train_config,
        scenario={"tracks": ["cil"], "n_rp": TINY_N_RP, "seeds": [1], "latency_calls": 5},
    )


@pytest.fixture
def two_expert_model():
    return toy_model(seed=0, n_experts=2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
