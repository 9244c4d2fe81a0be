from __future__ import annotations

import numpy as np
import pytest

import quantprobe.training as training
from quantprobe.embeddings import OracleProvider, RandomVectorsProvider
from quantprobe.errors import ConfigError
from quantprobe.synthgen import TaskKind, UnitLexicon, ValueRange, generate_dataset
from quantprobe.tokenizer import build_vocab
from quantprobe.training import (GridCell, TrainConfig, embed_dataset, fit_probe,
                                 grid_search, probe_config_for, select_best_cell,
                                 train_probe)


def small_dataset(task=TaskKind.PERCENT, n=240, seed=5, lexicon=None):
    return generate_dataset(task, ValueRange(0.0, 99.9), seed, n, max(20, n // 5),
                            lexicon=lexicon)


def small_provider(dataset, dim=12, **kw):
    return RandomVectorsProvider(len(build_vocab(dataset.lexicon)), dim=dim, **kw)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(lr=0.5)
    with pytest.raises(ConfigError):
        TrainConfig(lr=1e-7)
    with pytest.raises(ConfigError):
        TrainConfig(lr=1e-3, val_fraction=0.6)
    with pytest.raises(ConfigError):
        TrainConfig(lr=1e-3, batch_size=0)


def test_batch_size_must_fit_training_split():
    ds = small_dataset(n=100)
    config = TrainConfig(lr=1e-3, batch_size=128, max_epochs=1, seed=1)
    with pytest.raises(ConfigError):
        train_probe(ds, small_provider(ds), config)


def test_early_stopping_on_injected_monotone_loss():
    # strictly increasing validation loss from epoch 1: best_epoch stays 1
    # and training halts exactly at best_epoch + patience
    ds = small_dataset(n=200)
    features = embed_dataset(ds, small_provider(ds))
    config = TrainConfig(lr=1e-3, batch_size=32, max_epochs=1000, patience=20, seed=3)
    counter = iter(range(1, 10_000))
    fit = fit_probe(ds.task, features.train, probe_config_for(features), config,
                    val_loss_fn=lambda probe, batch: float(next(counter)))
    assert fit.best_epoch == 1
    assert fit.epochs_run == 21
    assert fit.val_losses == [float(v) for v in range(1, 22)]


def test_early_stopping_bound_and_max_epochs():
    ds = small_dataset(n=200)
    config = TrainConfig(lr=1e-2, batch_size=32, max_epochs=6, patience=20, seed=2)
    result = train_probe(ds, small_provider(ds), config)
    assert result.epochs_run <= 6
    assert result.best_epoch <= result.epochs_run
    assert result.epochs_run <= result.best_epoch + config.patience


def test_epoch_batch_count():
    ds = small_dataset(n=100)  # fit split: 90 examples -> ceil(90/32) = 3 batches
    calls = []
    original = training.sgd_step

    def counting(params, lr, momentum, clip_norm):
        calls.append(1)
        return original(params, lr, momentum, clip_norm)

    training.sgd_step = counting
    try:
        config = TrainConfig(lr=1e-3, batch_size=32, max_epochs=4, patience=20, seed=1)
        train_probe(ds, small_provider(ds), config)
    finally:
        training.sgd_step = original
    assert len(calls) == 4 * int(np.ceil(90 / 32))


def test_determinism_same_seed():
    ds = small_dataset(n=160)
    provider = small_provider(ds)
    config = TrainConfig(lr=1e-2, batch_size=32, max_epochs=5, seed=11)
    a = train_probe(ds, provider, config)
    b = train_probe(ds, provider, config)
    assert a.value == b.value
    assert a.val_losses == b.val_losses
    assert a.best_epoch == b.best_epoch


def test_best_restore_reproduces_recorded_loss():
    ds = small_dataset(n=200)
    features = embed_dataset(ds, small_provider(ds))
    config = TrainConfig(lr=1e-2, batch_size=32, max_epochs=15, patience=3, seed=4)
    snapshots = {}

    def hook(epoch, val_loss, probe):
        snapshots[epoch] = probe.params.snapshot()

    fit = fit_probe(ds.task, features.train, probe_config_for(features), config, epoch_hook=hook)
    assert not fit.diverged
    best = snapshots[fit.best_epoch]
    for name, p in fit.probe.params:
        assert np.array_equal(p.value, best[name])


def test_test_split_untouched_until_evaluation():
    ds = small_dataset(n=160)
    provider = small_provider(ds)
    features = embed_dataset(ds, provider)

    class Guard:
        def __init__(self, wrapped):
            object.__setattr__(self, "_wrapped", wrapped)
            object.__setattr__(self, "accessed", False)

        def __getattr__(self, name):
            object.__setattr__(self, "accessed", True)
            return getattr(object.__getattribute__(self, "_wrapped"), name)

    guard = Guard(features.test)
    features.test = guard
    seen = []
    config = TrainConfig(lr=1e-2, batch_size=32, max_epochs=4, seed=6)
    result = train_probe(ds, provider, config, features=features,
                         epoch_hook=lambda e, v, p: seen.append(guard.accessed))
    assert seen and not any(seen)  # never touched during any epoch
    assert object.__getattribute__(guard, "accessed")  # touched by final evaluation
    assert np.isfinite(result.value)


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
@pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
def test_divergence_records_predict_zero_metric():
    ds = small_dataset(n=160)
    provider = small_provider(ds, init_std=1e200)  # overflow on the first batch
    config = TrainConfig(lr=1e-2, batch_size=32, max_epochs=5, seed=7)
    result = train_probe(ds, provider, config)
    assert result.diverged
    targets = np.asarray([ex.targets[0] for ex in ds.test])
    assert result.value == pytest.approx(float(np.sqrt(np.mean(targets ** 2))))


def test_oracle_converges_quickly():
    ds = small_dataset(n=400)
    provider = OracleProvider(dim=12, seed=0)
    config = TrainConfig(lr=3e-2, batch_size=64, max_epochs=60, patience=20, seed=8)
    result = train_probe(ds, provider, config)
    assert not result.diverged
    assert result.value < 0.05


def test_unitid_training_path():
    lex = UnitLexicon(["hours", "euros", "shares", "tons"])
    ds = generate_dataset(TaskKind.UNITID, ValueRange(0.0, 9.9), 3, 300, 60, lexicon=lex)
    provider = small_provider(ds, dim=24)
    config = TrainConfig(lr=0.3, momentum=0.7, batch_size=32, max_epochs=40,
                         patience=10, seed=9)
    result = train_probe(ds, provider, config)
    assert result.metric_kind == "accuracy"
    assert result.value > 0.9


# --- grid search ------------------------------------------------------------------

def test_grid_singleton_returns_that_cell():
    ds = small_dataset(n=160)
    config = TrainConfig(lr=1e-3, batch_size=32, max_epochs=3, seed=10)
    chosen, cells = grid_search(ds, small_provider(ds), config,
                                lr_grid=(1e-2,), momentum_grid=(0.7,))
    assert (chosen.lr, chosen.momentum) == (1e-2, 0.7)
    assert len(cells) == 1


def test_grid_tie_breaks_toward_smaller_lr():
    cells = [GridCell(1e-2, 0.5, 0.25, 3, 8, False),
             GridCell(1e-3, 0.5, 0.25, 4, 9, False),
             GridCell(1e-1, 0.5, 0.30, 2, 7, False)]
    best = select_best_cell(cells)
    assert best.lr == 1e-3


def test_grid_tie_breaks_toward_smaller_momentum_after_lr():
    cells = [GridCell(1e-3, 0.7, 0.25, 1, 2, False),
             GridCell(1e-3, 0.5, 0.25, 1, 2, False)]
    assert select_best_cell(cells).momentum == 0.5


def test_grid_all_diverged_reports_cells():
    cells = [GridCell(1e-2, 0.5, float("inf"), 0, 1, True)]
    with pytest.raises(ConfigError, match="lr=0.01"):
        select_best_cell(cells)


def test_grid_selects_minimal_validation_loss():
    ds = small_dataset(n=240)
    provider = OracleProvider(dim=12, seed=0)
    config = TrainConfig(lr=1e-3, batch_size=32, max_epochs=8, seed=12)
    chosen, cells = grid_search(ds, provider, config,
                                lr_grid=(1e-1, 1e-2, 1e-4), momentum_grid=(0.5, 0.7))
    assert len(cells) == 6
    chosen_cell = next(c for c in cells
                       if c.lr == chosen.lr and c.momentum == chosen.momentum)
    for cell in cells:
        if not cell.diverged:
            assert chosen_cell.best_val_loss <= cell.best_val_loss


def test_grid_rejects_empty():
    ds = small_dataset(n=160)
    config = TrainConfig(lr=1e-3, batch_size=32, max_epochs=2, seed=1)
    with pytest.raises(ConfigError):
        grid_search(ds, small_provider(ds), config, lr_grid=(), momentum_grid=(0.5,))
