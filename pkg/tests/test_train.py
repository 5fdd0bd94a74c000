import numpy as np
import pytest

from synth import render_line_crop, random_strings

from scriptorium.corpus import build_charset
from scriptorium.nn import (
    TrainConfig,
    TrainSample,
    TrainingDiverged,
    build_recognizer,
    train,
)
from scriptorium.nn.train import history_csv


def small_spec(n_char, dropout=0.0):
    return build_recognizer(n_char, conv_channels=(8, 8, 16, 16), lstm_hidden=48,
                            lstm_layers=2, dropout=dropout, input_height=64)


def tiny_dataset(count=6, seed=3):
    rng = np.random.default_rng(seed)
    texts = random_strings(rng, count, length=3, alphabet="aeno")
    charset = build_charset(texts)
    return [TrainSample(render_line_crop(t), t) for t in texts], charset


class TestTrainMechanics:
    def test_fixed_seed_reproduces_history(self):
        samples, charset = tiny_dataset()
        config = TrainConfig(max_epochs=2, batch_size=2, seed=11, val_fraction=0.0)
        _, first = train(samples, charset, config, spec=small_spec(len(charset.chars)))
        _, second = train(samples, charset, config, spec=small_spec(len(charset.chars)))
        assert first == second

    def test_validation_split_is_held_out(self):
        samples, charset = tiny_dataset(count=10)
        config = TrainConfig(max_epochs=1, batch_size=4, seed=1, val_fraction=0.2)
        _, history = train(samples, charset, config, spec=small_spec(len(charset.chars)))
        assert len(history) == 1  # runs; 8 train / 2 val split exercised

    def test_divergence_aborts_with_location(self):
        samples, charset = tiny_dataset()
        config = TrainConfig(lr0=1e6, lr_min=1e-8, max_epochs=3, batch_size=2,
                             seed=0, val_fraction=0.0, augment=False)
        with np.errstate(all="ignore"), pytest.raises(TrainingDiverged, match="epoch"):
            train(samples, charset, config, spec=small_spec(len(charset.chars)))

    def test_infeasible_sample_skipped_with_warning(self):
        samples, charset = tiny_dataset(count=4)
        # a crop so narrow its frame count cannot cover the target length
        narrow = render_line_crop("aeno"[0], height=64)
        narrow.image.pixels = narrow.image.pixels[:, :40]
        samples.append(TrainSample(narrow, "aeonaeonaeonaeon"))
        charset = build_charset([s.text for s in samples])
        config = TrainConfig(max_epochs=1, batch_size=8, seed=0, val_fraction=0.0, augment=False)
        with pytest.warns(UserWarning, match="labels than frames"):
            train(samples, charset, config, spec=small_spec(len(charset.chars)))

    def test_history_csv_format(self):
        samples, charset = tiny_dataset()
        config = TrainConfig(max_epochs=2, batch_size=4, seed=5, val_fraction=0.0)
        _, history = train(samples, charset, config, spec=small_spec(len(charset.chars)))
        csv = history_csv(history)
        lines = csv.strip().splitlines()
        assert lines[0] == "epoch,loss,cer,wer,lr"
        assert len(lines) == 3
        assert lines[1].startswith("1,")

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(lr0=1e-6, lr_min=1e-3)
        with pytest.raises(ValueError):
            TrainConfig(plateau_patience=0)

    def test_empty_dataset_rejected(self):
        _, charset = tiny_dataset()
        with pytest.raises(ValueError):
            train([], charset, TrainConfig())
