import math

import numpy as np
import pytest

from app.core.errors import CapacityError, DegenerateInputError, NumericError, RegistryError, ShapeError, StateError
from app.module.etf_gate.anchors import generate_etf
from app.module.moe_model.checkpoint import load_model_checkpoint, param_report, save_model_checkpoint
from app.module.moe_model.diagnostics import check_gradients, fused_row_deviation, run_property_suite, toy_batch, toy_model
from app.module.moe_model.losses import loss_ce, loss_dr, loss_total
from app.module.moe_model.model import MoEModel
from app.module.moe_model.schemas import ModelConfig
from app.module.numkit.functional import relu


def region(region_id: int, first_rp: int, size: int):
    return [(first_rp + i, (float(first_rp + i), float(region_id), 0.0)) for i in range(size)]


@pytest.fixture
def no_dropout_config(small_model_config) -> ModelConfig:
    return small_model_config.model_copy(update={"expert_dropout": 0.0})


class TestParameterCount:
    def test_encoder(self):
        assert MoEModel.build(ModelConfig(input_dim=2)).encoder.param_count() == 8_640

    def test_projection(self):
        projection = MoEModel.build(ModelConfig(input_dim=2)).projection
        assert projection.weights.size + projection.bias.size == 4_160

    def test_expert(self):
        model = MoEModel.build(ModelConfig(input_dim=2))
        model.add_expert(0, region(0, 0, 10))
        assert model.experts[0].net.param_count() == 9_610
        assert model.param_count() == 8_640 + 4_160 + 9_610

    def test_report_against_reference(self):
        model = MoEModel.build(ModelConfig(input_dim=172))
        report = param_report(model)
        assert report["total"] == model.param_count()
        assert report["reference_total"] == 86_904
        assert report["input_independent"] + 172 * 128 == report["total"]


class TestEncodeProject:
    def test_constant_network(self, small_model_config, rng):
        model = MoEModel.build(small_model_config)
        for layer in model.encoder.layers:
            layer.weights.fill(0.0)
            layer.bias.fill(0.0)
        model.projection.weights.fill(0.0)
        b = rng.normal(size=small_model_config.latent_dim)
        model.projection.bias[:] = b
        _, z_hat = model.encode_project(rng.uniform(size=(3, 16)))
        assert np.allclose(z_hat, np.tile(b / np.linalg.norm(b), (3, 1)), atol=1e-12)

    def test_unit_rows_and_manual_composition(self, small_model_config, rng):
        model = MoEModel.build(small_model_config)
        x = rng.uniform(size=(5, 16))
        z, z_hat = model.encode_project(x)
        h = x
        for layer in model.encoder.layers:
            h = relu(h @ layer.weights + layer.bias)
        assert np.allclose(z, h, atol=1e-12)
        assert np.allclose(np.linalg.norm(z_hat, axis=1), 1.0, atol=1e-12)

    def test_zero_projection_row(self, small_model_config):
        model = MoEModel.build(small_model_config)
        model.projection.weights.fill(0.0)
        with pytest.raises(DegenerateInputError):
            model.encode_project(np.zeros((1, 16)))

    def test_wrong_input_width(self, small_model_config):
        with pytest.raises(ShapeError):
            MoEModel.build(small_model_config).encode_project(np.zeros((1, 15)))


class TestExperts:
    def test_zero_logits_are_uniform(self, small_model_config, rng):
        model = MoEModel.build(small_model_config)
        model.add_expert(0, region(0, 0, 10))
        last = model.experts[0].net.layers[-1]
        last.weights.fill(0.0)
        last.bias.fill(0.0)
        z, _ = model.encode_project(rng.uniform(size=(2, 16)))
        assert np.allclose(model.expert_forward(model.experts[0], z), 0.1, atol=1e-12)

    def test_rows_sum_to_one(self, small_model_config, rng):
        model = MoEModel.build(small_model_config)
        model.add_expert(0, region(0, 0, 3))
        z = rng.uniform(size=(4, small_model_config.latent_dim))
        assert np.allclose(model.expert_forward(model.experts[0], z).sum(axis=1), 1.0, atol=1e-12)

    def test_latent_width_mismatch(self, small_model_config):
        model = MoEModel.build(small_model_config)
        model.add_expert(0, region(0, 0, 3))
        with pytest.raises(ShapeError):
            model.expert_forward(model.experts[0], np.zeros((1, 3)))

    def test_anchor_binding_and_isolation(self, small_model_config):
        model = MoEModel.build(small_model_config)
        assert model.add_expert(0, region(0, 0, 10)) == 0
        before = model.group_bytes("expert:0")
        model.add_expert(1, region(1, 10, 10))
        assert model.active_anchors == [0, 1]
        assert model.registry.n_classes == 20
        assert model.group_bytes("expert:0") == before

    def test_capacity(self):
        model = MoEModel.build(ModelConfig(input_dim=4, encoder_hidden=8, latent_dim=8, expert_hidden=4, r_max=6))
        for r in range(6):
            model.add_expert(r, region(r, 2 * r, 2))
        with pytest.raises(CapacityError):
            model.add_expert(6, region(6, 12, 2))

    def test_duplicate_region(self, small_model_config):
        model = MoEModel.build(small_model_config)
        model.add_expert(0, region(0, 0, 2))
        with pytest.raises(RegistryError):
            model.add_expert(0, region(0, 5, 2))


class TestFusedForward:
    def test_needs_an_expert(self, small_model_config):
        with pytest.raises(StateError):
            MoEModel.build(small_model_config).fused_forward(np.zeros((1, 16)))

    def test_single_expert_is_its_softmax(self, no_dropout_config, rng):
        model = MoEModel.build(no_dropout_config)
        model.add_expert(0, region(0, 0, 4))
        x = rng.uniform(size=(3, 16))
        z, _ = model.encode_project(x)
        fused = model.fused_forward(x, training=True)
        assert np.allclose(fused.gate_probabilities, 1.0)
        assert np.allclose(fused.probabilities, model.expert_forward(model.experts[0], z), atol=1e-12)

    def test_blocks_are_gate_times_expert(self, no_dropout_config, rng):
        model = MoEModel.build(no_dropout_config)
        model.add_expert(0, region(0, 0, 2))
        model.add_expert(1, region(1, 2, 3))
        x = rng.uniform(size=(4, 16))
        z, _ = model.encode_project(x)
        fused = model.fused_forward(x, training=True)
        for k, expert in enumerate(model.experts):
            block = model.registry.region_slice(expert.region_id)
            expected = fused.gate_probabilities[:, k : k + 1] * model.expert_forward(expert, z)
            assert np.allclose(fused.probabilities[:, block], expected, atol=1e-12)

    def test_soft_rows_sum_to_one(self):
        assert fused_row_deviation(toy_model(seed=3, n_experts=3)) <= 1e-6

    def test_hard_mode_routes_to_one_expert(self, two_expert_model, rng):
        fused = two_expert_model.fused_forward(rng.uniform(size=(6, 6)), training=False)
        for row, k in enumerate(fused.selected):
            other = 1 - k
            block = two_expert_model.registry.region_slice(two_expert_model.experts[other].region_id)
            assert not np.any(fused.probabilities[row, block])
            assert fused.probabilities[row].sum() == pytest.approx(1.0, abs=1e-12)


class TestPrediction:
    def test_single_expert_routing(self, small_model_config, rng):
        model = MoEModel.build(small_model_config)
        model.add_expert(4, region(4, 20, 5))
        last = model.experts[0].net.layers[-1]
        last.weights.fill(0.0)
        last.bias[:] = [0.0, 0.0, 0.0, 5.0, 0.0]
        prediction = model.predict_location(rng.uniform(size=16))
        assert prediction.rp_id == 23
        assert prediction.region_id == 4
        assert prediction.coords == (23.0, 4.0, 0.0)

    def test_repeatable(self, two_expert_model, rng):
        x = rng.uniform(size=6)
        assert two_expert_model.predict_location(x) == two_expert_model.predict_location(x)

    def test_batch_agrees_with_single(self, two_expert_model, rng):
        x = rng.uniform(size=(5, 6))
        batch = two_expert_model.predict_batch(x)
        assert [two_expert_model.predict_location(row).global_class for row in x] == batch.tolist()

    def test_rejects_matrix(self, two_expert_model):
        with pytest.raises(ShapeError):
            two_expert_model.predict_location(np.zeros((2, 6)))


class TestLosses:
    def test_dr_zero_residual(self):
        frame = generate_etf(5, 8, seed=0)
        assert loss_dr(frame.anchors[[0]], [0], frame, dr_target="unity") == pytest.approx(0.0, abs=1e-24)

    def test_dr_hand_value(self):
        frame = generate_etf(5, 8, seed=0)
        assert loss_dr(frame.anchors[[2]], [2], frame) == pytest.approx(0.125, abs=1e-12)

    def test_dr_label_outside_frame(self):
        frame = generate_etf(3, 8, seed=0)
        with pytest.raises(RegistryError):
            loss_dr(frame.anchors[[0]], [3], frame)

    def test_ce_values(self):
        assert loss_ce(np.array([[0.0, 1.0]]), [1]) == 0.0
        assert loss_ce(np.full((2, 4), 0.25), [0, 3]) == pytest.approx(math.log(4), abs=1e-4)
        assert loss_ce(np.array([[0.6, 0.4]]), [0]) < loss_ce(np.array([[0.3, 0.7]]), [0])

    def test_ce_floor(self):
        assert loss_ce(np.array([[1.0, 0.0]]), [1]) == pytest.approx(-math.log(1e-12))

    def test_ce_label_out_of_range(self):
        with pytest.raises(RegistryError):
            loss_ce(np.full((1, 2), 0.5), [2])

    def test_total(self):
        assert loss_total(0.0, 0.0) == 0.0
        assert loss_total(1.2, 0.3) == pytest.approx(1.5)
        with pytest.raises(NumericError):
            loss_total(float("inf"), 0.0)

    def test_breakdown_matches_recomputation(self, two_expert_model):
        batch = toy_batch(two_expert_model)
        loss, _ = two_expert_model.loss_and_grads(batch, seed=5)
        _, z_hat = two_expert_model.encode_project(batch.x)
        fused = two_expert_model.fused_forward(batch.x, training=True, seed=5)
        assert loss.ce == pytest.approx(loss_ce(fused, batch.global_labels), abs=1e-12)
        assert loss.dr == pytest.approx(loss_dr(z_hat, batch.anchor_labels, two_expert_model.frame), abs=1e-12)
        assert loss.total == pytest.approx(loss.ce + loss.dr, abs=1e-12)


class TestGradients:
    @pytest.mark.parametrize("losses", [("DR",), ("CE",), ("CE", "DR")])
    def test_matches_finite_differences(self, two_expert_model, losses):
        report = check_gradients(two_expert_model, toy_batch(two_expert_model), losses)
        assert report.passed, f"{report.worst_parameter}: {report.max_relative_error}"

    def test_frozen_groups_receive_no_gradient(self, two_expert_model):
        _, grads = two_expert_model.loss_and_grads(toy_batch(two_expert_model), losses=("CE",), trainable={"expert:1"})
        assert set(grads) == set(two_expert_model.parameter_groups()["expert:1"])

    def test_property_suite(self):
        report = run_property_suite(seed=0, k_values=range(2, 6))
        assert report.passed


def test_checkpoint_restores_model(two_expert_model, tmp_path, rng):
    path = save_model_checkpoint(two_expert_model, tmp_path / "model.json")
    restored = load_model_checkpoint(path)
    x = rng.uniform(size=(4, 6))
    assert np.array_equal(restored.predict_batch(x), two_expert_model.predict_batch(x))
    for group in two_expert_model.parameter_groups():
        assert restored.group_bytes(group) == two_expert_model.group_bytes(group)
    assert restored.frame.fingerprint() == two_expert_model.frame.fingerprint()
