"""Full-scale runs: default training on every scenario and the derived checks.

Every test here is marked slow; run with ``pytest --runslow``.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
import pytest

from agop.diagonal import AgopDiagonal
from agop.hook import AgopTrainingHook, posthoc_diag
from attribution.agop_methods import agop_local
from attribution.gradients import integrated_gradients, vanilla_grad
from attribution.registry import method_names
from metrics.localization import expected_random_miou, expected_random_pg
from metrics.suite import EvalRecord, evaluate_suite, moving_average, snapshot_series
from model.cnn import Cnn8by8, build_cnn8by8
from model.train import TrainConfig, TrainResult, train
from tris.scenarios import Sample, ScenarioSpec, generate_dataset, pixel_mean

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)
N_EVAL = 2000

Run = Tuple[Cnn8by8, AgopDiagonal, TrainResult, List[Sample], List[Sample]]


def _datasets(seed: int, scenario: str = "linear",
              background: str = "uncorrelated") -> Tuple[List[Sample], List[Sample]]:
    train_set = generate_dataset(ScenarioSpec(scenario, background, n=4000, seed=seed))
    test_set = generate_dataset(ScenarioSpec(scenario, background, n=2000, seed=seed + 100,
                                             split="test"))
    return train_set, test_set


def _run(seed: int, scenario: str = "linear", background: str = "uncorrelated",
         snapshot_dir: Optional[str] = None) -> Run:
    train_set, test_set = _datasets(seed, scenario, background)
    model = build_cnn8by8(seed)
    hook = AgopTrainingHook(snapshot_dir=snapshot_dir)
    result = train(model, train_set, test_set, TrainConfig(seed=seed), hook=hook)
    return model, hook.finalize(result.steps), result, train_set, test_set


def _records(runs: Dict[int, Run]) -> Dict[int, Dict[str, EvalRecord]]:
    records = {}
    for seed, (model, diag, _, train_set, test_set) in runs.items():
        rows = evaluate_suite(model, diag, test_set[:N_EVAL], seed=seed,
                              baseline=pixel_mean(train_set))
        records[seed] = {r.method: r for r in rows}
    return records


@pytest.fixture(scope="module")
def snapshot_dirs(tmp_path_factory) -> Dict[int, str]:
    return {seed: str(tmp_path_factory.mktemp(f"linear{seed}")) for seed in SEEDS}


@pytest.fixture(scope="module")
def linear_runs(snapshot_dirs) -> Dict[int, Run]:
    return {seed: _run(seed, snapshot_dir=snapshot_dirs[seed]) for seed in SEEDS}


@pytest.fixture(scope="module")
def linear_records(linear_runs) -> Dict[int, Dict[str, EvalRecord]]:
    return _records(linear_runs)


@pytest.fixture(scope="module")
def multiplicative_runs() -> Dict[int, Run]:
    return {seed: _run(seed, "multiplicative") for seed in SEEDS}


@pytest.fixture(scope="module")
def transrot_runs() -> Dict[int, Run]:
    return {seed: _run(seed, "transrot") for seed in SEEDS}


@pytest.fixture(scope="module")
def xor_runs() -> Dict[int, Run]:
    return {seed: _run(seed, "xor") for seed in SEEDS}


@pytest.fixture(scope="module")
def correlated_runs() -> Dict[int, Run]:
    return {seed: _run(seed, "linear", "correlated") for seed in SEEDS}


def _mean(records: Dict[int, Dict[str, EvalRecord]], method: str, attr: str) -> float:
    return float(np.mean([getattr(rows[method], attr) for rows in records.values()]))


def test_trained_model_is_accurate(linear_runs):
    for _, _, result, _, _ in linear_runs.values():
        assert result.history[-1].test_acc >= 0.75


def test_hook_leaves_full_training_untouched(linear_runs):
    hooked = linear_runs[0][0]
    train_set, test_set = _datasets(0)
    plain = build_cnn8by8(0)
    train(plain, train_set, test_set, TrainConfig(seed=0))
    np.testing.assert_array_equal(plain.parameter_vector(), hooked.parameter_vector())


def test_hook_matches_posthoc_on_trained_model(linear_runs):
    model, _, _, train_set, _ = linear_runs[0]
    subset = train_set[:256]
    hook = AgopTrainingHook()
    for start in range(0, len(subset), 32):
        batch = subset[start:start + 32]
        hook.observe(model, [s.image for s in batch], [s.label for s in batch])
    oracle = posthoc_diag(model, subset)
    assert np.max(np.abs(hook.finalize().values - oracle.values)) <= 1e-12


def test_agop_local_is_vanilla_on_trained_model(linear_runs, linear_records):
    model, _, _, _, test_set = linear_runs[0]
    for sample in test_set[:100]:
        local_map = agop_local(model, sample.image).values
        assert np.max(np.abs(local_map - vanilla_grad(model, sample.image).values)) <= 1e-12
    for rows in linear_records.values():
        local = rows["agop_local"].to_dict()
        vanilla = rows["vanilla_grad"].to_dict()
        for key in ("method", "ms_per_sample"):
            local.pop(key)
            vanilla.pop(key)
        assert local == vanilla


def test_ig_completeness(linear_runs):
    model, _, _, _, test_set = linear_runs[0]
    for sample in test_set[:50]:
        saliency = integrated_gradients(model, sample.image, steps=300)
        logits = model.predict_logits(sample.image)
        predicted = int(np.argmax(logits))
        gap = logits[predicted] - model.predict_logits(np.zeros_like(sample.image))[predicted]
        assert abs(saliency.signed.sum() - gap) <= 0.01 * max(abs(gap), 1e-12)


def test_linear_ordering(linear_records):
    weighted = _mean(linear_records, "agop_weighted", "miou")
    vanilla = _mean(linear_records, "vanilla_grad", "miou")
    random = _mean(linear_records, "random", "miou")
    assert weighted >= 1.15 * vanilla
    for method in ("vanilla_grad", "integrated_gradients", "smoothgrad", "agop_weighted"):
        assert _mean(linear_records, method, "miou") >= 2 * random


def test_gradcam_collapses_on_linear(linear_records):
    assert _mean(linear_records, "gradcam", "pg") <= 0.05
    assert _mean(linear_records, "gradcam_pp", "pg") <= 0.05


def test_cost_ordering(linear_records):
    ig = _mean(linear_records, "integrated_gradients", "ms_per_sample")
    vanilla = _mean(linear_records, "vanilla_grad", "ms_per_sample")
    global_ = _mean(linear_records, "agop_global", "ms_per_sample")
    assert global_ < 0.1 * vanilla < vanilla < ig
    assert ig >= 10 * vanilla


def test_random_row_matches_closed_forms(linear_records):
    assert _mean(linear_records, "random", "pg") == pytest.approx(expected_random_pg(4),
                                                                  abs=0.01)
    assert _mean(linear_records, "random", "miou") == pytest.approx(expected_random_miou(4),
                                                                    abs=0.005)
    deletion = _mean(linear_records, "random", "deletion_auc")
    insertion = _mean(linear_records, "random", "insertion_auc")
    assert abs(deletion - insertion) <= 0.05


def test_agop_global_converges_on_linear(linear_runs, snapshot_dirs):
    for seed, (_, _, result, _, test_set) in linear_runs.items():
        series = snapshot_series(snapshot_dirs[seed], test_set[:N_EVAL])
        steps = [step for step, _ in series]
        values = [value for _, value in series]
        middle = int(np.argmin(np.abs(np.asarray(steps) - result.steps / 2)))
        assert values[-1] >= values[middle]
        smoothed = moving_average(values)
        tail = smoothed[len(smoothed) - len(smoothed) // 3 - 1:]
        assert np.all(np.diff(tail) >= -1e-12)


# ---------------------------------------------------------------------------
# Other scenarios
# ---------------------------------------------------------------------------

def test_multiplicative_favours_global_prior(multiplicative_runs):
    records = _records(multiplicative_runs)
    for _, _, result, _, _ in multiplicative_runs.values():
        assert result.history[-1].test_acc >= 0.75
    global_ = _mean(records, "agop_global", "miou")
    ig = _mean(records, "integrated_gradients", "miou")
    random = _mean(records, "random", "miou")
    assert global_ >= 2 * ig
    assert abs(ig - random) <= 0.08


def test_transrot_favours_local_methods(transrot_runs):
    records = _records(transrot_runs)
    for _, _, result, _, _ in transrot_runs.values():
        assert result.history[-1].test_acc >= 0.75
    assert _mean(records, "integrated_gradients", "pg") >= 0.8
    assert _mean(records, "agop_global", "pg") <= 0.2
    assert abs(_mean(records, "agop_global", "miou") - _mean(records, "random", "miou")) <= 0.05


def test_xor_defeats_every_method(xor_runs):
    records = _records(xor_runs)
    for method in method_names():
        assert _mean(records, method, "miou") <= 0.10
        assert _mean(records, method, "miou_centered") <= 0.05


def test_correlated_shortcut_hides_the_shapes(correlated_runs):
    records = _records(correlated_runs)
    accuracy = np.mean([result.history[-1].test_acc
                        for _, _, result, _, _ in correlated_runs.values()])
    assert 0.40 <= accuracy <= 0.60
    for method in method_names():
        assert _mean(records, method, "miou_centered") <= 0.05
