"""Test the learning rate schedule, optimiser and training loop."""

import csv
import json

import numpy as np
import pytest

import platont
from platont import _trainer

SMALL_MODEL = platont.ModelConfig(hidden=(8,), latent_dim=4, dropout=0.1)


def _config(**kwargs):
    kwargs.setdefault("batch_size", 16)
    kwargs.setdefault("epochs", 2)
    return platont.TrainConfig(**kwargs)


class TestLrSchedule:
    @pytest.mark.parametrize(
        ("epoch", "expected"),
        [(0, 1e-3), (5, 5e-4), (10, 1e-3), (20, 5e-4), (30, 1e-3)],
    )
    def test_values(self, epoch, expected):
        assert platont.lr_schedule(epoch) == pytest.approx(expected, abs=1e-15)

    def test_fixed_period(self):
        config = platont.TrainConfig(period_mult=1)
        assert platont.lr_schedule(15, config) == pytest.approx(5e-4)

    def test_negative(self):
        with pytest.raises(platont.InvalidArgumentError):
            platont.lr_schedule(-1)


class TestClipGlobalNorm:
    def test_below(self):
        grads = {"a": np.array([0.3, 0.4])}
        assert _trainer.clip_global_norm(grads) is grads

    def test_above(self):
        grads = {"a": np.array([0.0, 4.0]), "b": np.zeros((2, 2))}
        clipped = _trainer.clip_global_norm(grads)
        assert _trainer.global_norm(clipped) == pytest.approx(1.0, abs=1e-12)

    def test_nan(self):
        with pytest.raises(platont.NumericError, match="'b'"):
            _trainer.clip_global_norm({"a": np.ones(2), "b": np.array([np.nan])})


class TestOptimizerStep:
    def test_zero_grads(self):
        state = _trainer.TrainState.initial({"w": np.array([1.0, -2.0])})
        config = platont.TrainConfig(weight_decay=0.0)
        updated = platont.optimizer_step(state, {"w": np.zeros(2)}, 1e-3, config)
        np.testing.assert_array_equal(updated.params["w"], [1.0, -2.0])
        assert updated.step == 1

    def test_first_step(self):
        state = _trainer.TrainState.initial({"w": np.array(0.5)})
        config = platont.TrainConfig(weight_decay=0.0)
        updated = platont.optimizer_step(state, {"w": np.array(1.0)}, 1e-3, config)
        assert float(updated.params["w"]) - 0.5 == pytest.approx(-1e-3, abs=1e-9)
        assert float(state.params["w"]) == 0.5

    def test_weight_decay(self):
        state = _trainer.TrainState.initial({"w": np.array([2.0])})
        config = platont.TrainConfig(weight_decay=0.1)
        updated = platont.optimizer_step(state, {"w": np.zeros(1)}, 0.5, config)
        np.testing.assert_allclose(updated.params["w"], [1.9])

    def test_mismatch(self):
        state = _trainer.TrainState.initial({"w": np.zeros(2)})
        with pytest.raises(platont.ShapeError):
            platont.optimizer_step(state, {"v": np.zeros(2)}, 1e-3)
        with pytest.raises(platont.ShapeError):
            platont.optimizer_step(state, {"w": np.zeros(3)}, 1e-3)


class TestConfig:
    def test_load(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({
            "train": {"epochs": 3, "task": "link"},
            "loss": {"task": 0.5},
            "model": {"hidden": [16], "use_attention": False},
        }))
        config, weights, model_config = platont.load_config(path)
        assert config.epochs == 3
        assert config.batch_size == 64
        assert weights.lambdas == (1.0, 2.0, 0.5)
        assert model_config.hidden == (16,)
        assert not model_config.use_attention

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"optimizer": {}}))
        with pytest.raises(platont.ValidationError, match="optimizer"):
            platont.load_config(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("epochs: 3")
        with pytest.raises(platont.FormatError):
            platont.load_config(path)

    def test_invalid_value(self):
        with pytest.raises(platont.ValidationError, match="batch_size"):
            platont.TrainConfig(batch_size=0)


class TestMakeContext:
    def test_no_task(self, small_dataset):
        with pytest.warns(UserWarning, match="no task"):
            context = _trainer.make_context(
                small_dataset, platont.LossWeights(task=1.0), None
            )
        assert context.weights.task == 0.0
        assert context.surrogate is None

    def test_non_differentiable_task(self, small_dataset):
        with pytest.warns(UserWarning, match="task weight set to 0"):
            context = _trainer.make_context(
                small_dataset, platont.LossWeights(task=1.0), "topo"
            )
        assert context.weights.task == 0.0

    @pytest.mark.parametrize("task", ["link", "od"])
    def test_differentiable_task(self, small_dataset, task):
        context = _trainer.make_context(
            small_dataset, platont.LossWeights(task=1.0), task
        )
        assert context.surrogate.task == task
        labels = _trainer.task_labels(small_dataset, context.surrogate.task)
        assert labels.shape[0] == small_dataset.size


class TestTrain:
    def test_zero_weights_leave_params(self, small_dataset):
        model = platont.init_model(
            tuple(small_dataset.indicator_dims.values()), SMALL_MODEL
        )
        result = platont.train(
            small_dataset,
            model=model,
            config=_config(weight_decay=0.0),
            weights=platont.LossWeights(align=0.0, rec=0.0, task=0.0),
        )
        for name, value in model.params.items():
            np.testing.assert_array_equal(result.model.params[name], value)
        assert result.best_loss == 0.0

    def test_deterministic(self, small_dataset, tmp_path):
        for name in ("a", "b"):
            result = platont.train(
                small_dataset, config=_config(seed=3), model_config=SMALL_MODEL
            )
            platont.save_checkpoint(result.model, tmp_path / f"{name}.ckpt")
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_best_checkpoint(self, small_dataset):
        result = platont.train(
            small_dataset, config=_config(), model_config=SMALL_MODEL
        )
        totals = [r.total for r in result.epoch_losses]
        assert len(totals) == 3
        assert result.best_loss == min(totals)
        assert not result.diverged

    def test_log(self, small_dataset, tmp_path):
        result = platont.train(
            small_dataset,
            config=_config(epochs=1),
            model_config=SMALL_MODEL,
            log_path=tmp_path / "log.csv",
        )
        with open(tmp_path / "log.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert tuple(rows[0]) == _trainer.LOG_COLUMNS
        assert len(rows) == len(result.log) == 3
        assert [int(r["step"]) for r in rows] == [1, 2, 3]
        assert float(rows[0]["lr"]) == pytest.approx(1e-3)

    def test_task_supervision(self, small_dataset):
        result = platont.train(
            small_dataset,
            config=_config(epochs=1, task="link"),
            weights=platont.LossWeights(task=0.5),
            model_config=SMALL_MODEL,
        )
        assert result.task_weight == 0.5
        assert result.epoch_losses[0].task > 0.0

    def test_too_few_rows(self, small_dataset):
        with pytest.raises(platont.InvalidArgumentError):
            platont.train(small_dataset, config=_config(batch_size=100))

    def test_divergence_keeps_best(self, small_dataset, monkeypatch):
        objective = _trainer._objective
        calls = {"train": 0}

        def failing(model, batch, context, train_mode, seed, gradients):
            if train_mode:
                calls["train"] += 1
                if calls["train"] > 3:
                    raise platont.NumericError("Loss component 'rec' is not finite")
            return objective(model, batch, context, train_mode, seed, gradients)

        monkeypatch.setattr(_trainer, "_objective", failing)
        with pytest.warns(UserWarning, match="diverged in epoch 1"):
            result = platont.train(
                small_dataset, config=_config(epochs=3), model_config=SMALL_MODEL
            )
        assert result.diverged
        assert len(result.epoch_losses) == 2
        assert result.best_loss == min(r.total for r in result.epoch_losses)

    def test_collapsed_latents_keep_best(self, small_dataset):
        config = platont.ModelConfig(hidden=(8,), latent_dim=4, dropout=0.9)
        model = platont.init_model(tuple(small_dataset.indicator_dims.values()), config)
        for name in platont.INDICATORS:
            model.params[f"encoder.{name}.w0"][:] = 0.0
            model.params[f"encoder.{name}.b0"][:] = 1.0
            model.params[f"encoder.{name}.b1"][:] = 0.0
        initial = {name: value.copy() for name, value in model.params.items()}

        with pytest.warns(UserWarning, match="diverged in epoch 0.*zero norm"):
            result = platont.train(small_dataset, model=model, config=_config())
        assert result.diverged
        assert len(result.epoch_losses) == 1
        assert result.log == []
        for name, value in initial.items():
            np.testing.assert_array_equal(result.model.params[name], value)

    def test_loss_decreases(self, small_dataset):
        result = platont.train(
            small_dataset,
            config=_config(batch_size=16, epochs=30),
            model_config=SMALL_MODEL,
        )
        assert not result.diverged
        assert result.epoch_losses[-1].total < result.epoch_losses[0].total


@pytest.mark.parametrize("seed", range(20))
def test_objective_gradients_match_finite_differences(small_dataset, seed):
    task = [None, "link", "od"][seed % 3]
    config = platont.ModelConfig(
        hidden=(5,),
        latent_dim=3,
        dropout=0.1 * (seed % 2),
        use_attention=seed % 4 != 3,
    )
    batch = small_dataset.take(np.arange(seed, seed + 12))
    model = platont.init_model(tuple(batch.indicator_dims.values()), config, seed=seed)
    model.standardizer = platont.Standardizer.fit(small_dataset.noisy.channels)
    assert model.parameter_count <= 1000
    weights = platont.LossWeights(
        task=0.0 if task is None else 0.5,
        reconstruction="plain-mse" if seed >= 10 else "huber-normalized",
    )
    context = _trainer.make_context(batch, weights, task)
    _, grads, _ = _trainer._objective(model, batch, context, True, seed, gradients=True)

    def total():
        report, _, _ = _trainer._objective(
            model, batch, context, True, seed, gradients=False
        )
        return report.total

    rng = np.random.default_rng(seed)
    step = 1e-6
    for name, value in model.params.items():
        flat = value.reshape(-1)
        for index in rng.choice(flat.size, size=min(4, flat.size), replace=False):
            original = flat[index]
            flat[index] = original + step
            plus = total()
            flat[index] = original - step
            minus = total()
            flat[index] = original
            expected = (plus - minus) / (2.0 * step)
            actual = grads[name].reshape(-1)[index]
            scale = max(abs(expected), abs(actual), 1e-3)
            assert abs(actual - expected) / scale < 1e-4, name


def test_probe_gradient_bundle(small_dataset):
    model = platont.init_model(
        tuple(small_dataset.indicator_dims.values()), SMALL_MODEL
    )
    model.standardizer = platont.Standardizer.fit(small_dataset.noisy.channels)
    bundle = _trainer.probe_gradient_bundle(
        model, small_dataset, platont.LossWeights(task=1.0), task="od"
    )
    assert bundle.gradients.shape[0] == 3
    assert bundle.weights.tolist() == [1.0, 2.0, 1.0]
    assert platont.proposition1_check(bundle).holds
