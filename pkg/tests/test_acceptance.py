"""Acceptance criteria, one test per criterion.

Each test prints one `ACCEPTANCE <name>: PASS` line on success. The
desk-scale reproduction criteria need the real Fashion/Medical MNIST data
on disk (see README: `ximl dataset fetch`); they skip with an explicit
reason when the data directory is absent, and run the stated protocol at
the stated tolerances when present.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from ximl.augment import AugmentParams, make_counterexamples
from ximl.classifier import ModelConfig
from ximl.dataset import (
    derive_ground_truth_mask,
    load_dataset,
    make_synthetic_dataset,
    split_pools,
)
from ximl.engine import Feedback, Mode, Outcome, Session, SessionConfig, run_with_oracle
from ximl.evaluation import (
    Evaluator,
    SimulatedOracle,
    avg_nonzero_explanation_score,
    iou,
    train_baseline,
)
from ximl.explainer import ExplainerConfig, fit_surrogate, sample_perturbations
from ximl.segmentation import QuickShiftParams
from tests.test_explainer import make_instance, wls_oracle
from tests.test_segmentation import (
    brute_force_links,
    fixture_images_16,
)
from ximl.segmentation import link_pixels, parzen_density, pixel_features

DATA_DIR = Path(os.environ.get("XIML_DATA_DIR", Path(__file__).resolve().parent.parent / "data"))
FASHION_DIR = DATA_DIR / "fashion"
MEDICAL_DIR = DATA_DIR / "medical"

needs_fashion = pytest.mark.skipif(
    not FASHION_DIR.exists(),
    reason=f"Fashion MNIST not present at {FASHION_DIR}; run `ximl dataset fetch "
           f"--dataset fashion --out {FASHION_DIR}` (network required)",
)
needs_medical = pytest.mark.skipif(
    not MEDICAL_DIR.exists(),
    reason=f"Medical MNIST not present at {MEDICAL_DIR}; download the class folders "
           f"(e.g. AbdomenCT/, ChestCT/) into it (network required)",
)


def report(name: str) -> None:
    print(f"\nACCEPTANCE {name}: PASS")


# --------------------------------------------------------------------------
# Property suite (runs everywhere, no UI required)
# --------------------------------------------------------------------------

def test_explainer_wls_recovery():
    start = time.perf_counter()
    inst = make_instance(d=6)
    cfg = ExplainerConfig(n_samples=500, max_features=2, seed=0)
    samples = sample_perturbations(inst, cfg)
    Z = np.stack([s.presence for s in samples]).astype(float)
    w = np.array([s.proximity for s in samples])
    y = 2.0 * Z[:, 0] - 1.0 * Z[:, 1] + 0.5
    explanation = fit_surrogate(samples, y, max_features=2)

    assert sorted(explanation.selected) == [0, 1]
    beta = wls_oracle(Z, y, w, sorted(explanation.selected))
    got = np.array(
        [explanation.intercept]
        + [explanation.weights[i] for i in sorted(explanation.selected)]
    )
    np.testing.assert_allclose(got, beta, atol=1e-6)
    np.testing.assert_allclose(got, [0.5, 2.0, -1.0], atol=1e-6)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"WLS recovery took {elapsed:.2f}s (budget 1s)"
    report("explainer-wls-recovery")


def test_quickshift_link_rule_oracle():
    start = time.perf_counter()
    params = QuickShiftParams(kernel_size=2.0, max_dist=4.0, ratio=0.5)
    md2 = params.max_dist ** 2
    for name, image in sorted(fixture_images_16().items()):
        feats = pixel_features(image, params.ratio)
        density = parzen_density(feats, params.kernel_size)
        links = link_pixels(image, density, params)
        # strict-increase + distance bound on every link
        for p, q in enumerate(links):
            if q < 0:
                continue
            assert density[q] > density[p], f"{name}: non-increasing link {p}->{q}"
            assert ((feats[q] - feats[p]) ** 2).sum() <= md2
        # exact match against the brute-force reference
        np.testing.assert_array_equal(
            links, brute_force_links(image, density, params),
            err_msg=f"fixture {name}",
        )
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"link-rule oracle took {elapsed:.2f}s (budget 10s)"
    report("quickshift-link-rule-oracle")


def test_augmentation_frame_fit_1000():
    start = time.perf_counter()
    yy, xx = np.mgrid[0:64, 0:64]
    shapes = [
        ((yy - 32) ** 2 + (xx - 32) ** 2 <= 100),
        ((yy - 20) ** 2 / 2 + (xx - 40) ** 2 <= 64),
        (np.abs(yy - 40) + np.abs(xx - 20) <= 12),
    ]
    params = AugmentParams()
    checked = 0
    from ximl.dataset import Image as XImage

    for s, mask in enumerate(shapes):
        pixels = np.where(mask, np.float32(0.85), np.float32(0.0))
        image = XImage(pixels=pixels, id=f"shape{s}")
        for seed in range(334):
            rng = np.random.default_rng(1000 * s + seed)
            (cx,) = make_counterexamples(image, mask, 1, 1, params, rng)
            nz = np.argwhere(cx.image.pixels != 0)
            assert nz.size > 0
            assert nz[:, 0].min() >= 1 and nz[:, 0].max() <= 62, "mass touches frame"
            assert nz[:, 1].min() >= 1 and nz[:, 1].max() <= 62, "mass touches frame"
            checked += 1
            if checked >= 1000:
                break
        if checked >= 1000:
            break
    assert checked == 1000
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"frame-fit suite took {elapsed:.2f}s (budget 30s)"
    report("augmentation-frame-fit")


class _StubModel:
    def __init__(self, labeled):
        pass

    def predict_proba(self, batch):
        batch = np.asarray(batch)
        means = batch.reshape(len(batch), -1).mean(axis=1)
        p1 = np.clip(0.5 + (means - 0.08) * 4.0, 0.02, 0.98)
        return np.stack([1.0 - p1, p1], axis=1)


def _stub_fit(labeled, config):
    return _StubModel(labeled)


def test_engine_bookkeeping_table_and_200_instances():
    # (a) |L|/|U| deltas for every (mode, outcome, c) combination
    deltas = []
    for mode in (Mode.RWR_ONLY, Mode.RWR_PLUS_W):
        for outcome in (Outcome.RRR, Outcome.RWR, Outcome.W):
            for c in (0, 1, 3, 5):
                ds = make_synthetic_dataset(10, seed=1, size=16)
                pools = split_pools(ds, seed=1, l0_size=4, test_size=4, expl_test_size=2)
                cfg = SessionConfig(
                    budget=1, counterexamples=c, mode=mode,
                    explainer=ExplainerConfig(n_samples=16, max_features=2, seed=0),
                    segmentation=QuickShiftParams(kernel_size=1.0, max_dist=4.0),
                    model=ModelConfig(epochs=1), seed=2,
                )
                session = Session(cfg, pools, fit_fn=_stub_fit)
                pending = session.begin_iteration()
                mask = pending.image.pixels > 0.1
                wrong = 1 - pending.predicted_label
                if outcome is Outcome.RRR:
                    feedback = Feedback(Outcome.RRR)
                    expected_gain = 1
                elif outcome is Outcome.RWR:
                    feedback = Feedback(Outcome.RWR, corrected_mask=mask)
                    expected_gain = 1 + c
                elif mode is Mode.RWR_PLUS_W:
                    feedback = Feedback(Outcome.W, corrected_label=wrong, corrected_mask=mask)
                    expected_gain = 1 + c
                else:
                    feedback = Feedback(Outcome.W, corrected_label=wrong)
                    expected_gain = 1
                l0, u0 = len(session.labeled), len(session.unlabeled)
                session.submit_feedback(feedback)
                assert len(session.labeled) - l0 == expected_gain, (mode, outcome, c)
                assert u0 - len(session.unlabeled) == 1, (mode, outcome, c)
                deltas.append((mode.value, outcome.value, c, expected_gain))
    assert len(deltas) == 24

    # (b) 100-iteration simulated-oracle run: exactly 200 distinct base
    # instances in L afterwards (initial 100 plus one absorbed per iteration)
    ds = make_synthetic_dataset(150, seed=7, size=16)
    pools = split_pools(ds, seed=7, l0_size=100, test_size=40, expl_test_size=10)
    oracle = SimulatedOracle.from_dataset(ds)
    cfg = SessionConfig(
        budget=100, counterexamples=1, mode=Mode.RWR_PLUS_W,
        explainer=ExplainerConfig(n_samples=16, max_features=3, seed=0),
        segmentation=QuickShiftParams(kernel_size=1.0, max_dist=4.0),
        model=ModelConfig(epochs=1), seed=13,
    )
    session = Session(cfg, pools, fit_fn=_stub_fit)
    while session.iteration < cfg.budget:
        pending = session.begin_iteration()
        from ximl.explainer import explanation_mask

        mask = explanation_mask(pending.explanation, pending.segments, 3)
        session.submit_feedback(oracle.answer(pending.image.id, pending.predicted_label, mask))
    base_ids = {img.id for img, _ in session.labeled if "#cx" not in img.id}
    assert len(base_ids) == 200
    assert session.iteration == 100
    cx_count = sum(1 for img, _ in session.labeled if "#cx" in img.id)
    assert len(session.labeled) == 200 + cx_count
    report("engine-bookkeeping")


def test_iou_algebra():
    a = np.zeros((5, 5), dtype=bool)
    b = np.zeros((5, 5), dtype=bool)
    a[0:2] = True
    b[1:3] = True
    assert iou(a, b) == iou(b, a)
    assert iou(a, a) == 1.0
    disjoint = np.zeros((5, 5), dtype=bool)
    disjoint[4] = True
    assert iou(a, disjoint) == 0.0
    assert iou(a, b) == pytest.approx(1.0 / 3.0)
    report("iou-algebra")


# --------------------------------------------------------------------------
# Desk-scale reproduction (simulated oracle, proxy masks, single seed).
# Requires the real datasets on disk; see the module docstring.
# --------------------------------------------------------------------------

def _desk_scale_run(dataset, test_size, budget=100, c=1, seed=7):
    pools = split_pools(dataset, seed=seed, l0_size=100, test_size=test_size,
                        expl_test_size=200)
    oracle = SimulatedOracle.from_dataset(dataset, iou_threshold=0.3)
    explainer_cfg = ExplainerConfig(n_samples=200, max_features=5, seed=seed)
    seg_params = QuickShiftParams()
    cfg = SessionConfig(
        budget=budget, counterexamples=c, mode=Mode.RWR_PLUS_W,
        explainer=explainer_cfg, segmentation=seg_params,
        model=ModelConfig(), seed=seed,
    )
    evaluator = Evaluator(
        test=pools.test, expl_test=pools.expl_test,
        explainer_config=explainer_cfg, segmentation_params=seg_params,
        budget=budget, accuracy_every=1,
        explanation_every=5, explanation_subset=50,
    )
    model, trace = run_with_oracle(cfg, pools, oracle, evaluator=evaluator)
    accuracies = [r.metrics.get("accuracy") for r in trace.records]
    accuracies = [x for x in accuracies if x is not None]
    scores = [r.metrics.get("explanation_score") for r in trace.records]
    scores = [x for x in scores if x is not None]
    base_labels = 100 + sum(1 for r in trace.records if r.instance_id)
    return max(accuracies), scores, base_labels, trace


@needs_fashion
def test_desk_scale_fashion_accuracy():
    ds = load_dataset(FASHION_DIR, "idx", ("T-shirt/top", "Pullover"))
    max_acc, scores, base_labels, trace = _desk_scale_run(ds, test_size=4200)
    assert base_labels <= 200 + 1 * 100
    assert max_acc >= 0.90, f"max accuracy {max_acc:.4f} below the 0.90 gate"
    assert scores, "explanation scores must be computed"
    report(f"desk-scale-fashion (max accuracy {max_acc * 100:.2f}%)")


@needs_medical
def test_desk_scale_medical_accuracy():
    ds = load_dataset(MEDICAL_DIR, "image_folder", ("AbdomenCT", "ChestCT"))
    max_acc, scores, base_labels, trace = _desk_scale_run(ds, test_size=6000)
    assert base_labels <= 200 + 1 * 100
    assert max_acc >= 0.94, f"max accuracy {max_acc:.4f} below the 0.94 gate"
    report(f"desk-scale-medical (max accuracy {max_acc * 100:.2f}%)")


@needs_fashion
def test_baseline_fashion_within_two_points():
    ds = load_dataset(FASHION_DIR, "idx", ("T-shirt/top", "Pullover"))
    result = train_baseline(ds, n_train=9800, n_test=4200,
                            model_config=ModelConfig(), seed=7)
    assert abs(result.accuracy * 100 - 95.26) <= 2.0, (
        f"baseline accuracy {result.accuracy * 100:.2f}% not within 2 points of 95.26%"
    )
    report(f"baseline-fashion ({result.accuracy * 100:.2f}%)")


@needs_medical
def test_baseline_medical_within_two_points():
    ds = load_dataset(MEDICAL_DIR, "image_folder", ("AbdomenCT", "ChestCT"))
    result = train_baseline(ds, n_train=14000, n_test=6000,
                            model_config=ModelConfig(), seed=7)
    assert abs(result.accuracy * 100 - 94.67) <= 2.0, (
        f"baseline accuracy {result.accuracy * 100:.2f}% not within 2 points of 94.67%"
    )
    report(f"baseline-medical ({result.accuracy * 100:.2f}%)")


def test_labeling_effort_report_arithmetic():
    # The emitted report must state the reduction; the arithmetic is checked
    # end-to-end at desk scale on synthetic data (real-data sessions consume
    # identical label counts by construction).
    from ximl.reporting import format_baseline_report

    ds = make_synthetic_dataset(40, seed=3)
    result = train_baseline(
        ds, n_train=60, n_test=20, model_config=ModelConfig(epochs=1, seed=0),
        caipi_l0=10, caipi_budget=10, caipi_counterexamples=1,
    )
    assert result.caipi_base_labels == 20    # l0 + one label per iteration
    assert result.caipi_max_instances == 30  # plus c per iteration
    assert result.label_reduction == pytest.approx(1 - 20 / 60)
    text = format_baseline_report(result, "synthetic")
    assert "label reduction" in text
    assert f"{result.label_reduction * 100:.2f}%" in text
    report("labeling-effort-report")


def test_desk_scale_pipeline_rehearsal_on_synthetic():
    # Exercises the exact helper the real-data desk-scale criteria use (full
    # CNN, 64x64, simulated oracle, per-iteration accuracy, thinned
    # explanation scoring) at a reduced scale. Not a paper-number gate.
    ds = make_synthetic_dataset(120, seed=7)
    pools = split_pools(ds, seed=7, l0_size=30, test_size=60, expl_test_size=10)
    oracle = SimulatedOracle.from_dataset(ds, iou_threshold=0.3)
    explainer_cfg = ExplainerConfig(n_samples=60, max_features=5, seed=7)
    seg_params = QuickShiftParams()
    cfg = SessionConfig(
        budget=6, counterexamples=1, mode=Mode.RWR_PLUS_W,
        explainer=explainer_cfg, segmentation=seg_params,
        model=ModelConfig(epochs=5, seed=0), seed=7,
    )
    evaluator = Evaluator(
        test=pools.test, expl_test=pools.expl_test,
        explainer_config=explainer_cfg, segmentation_params=seg_params,
        budget=6, accuracy_every=1, explanation_every=3, explanation_subset=5,
    )
    model, trace = run_with_oracle(cfg, pools, oracle, evaluator=evaluator)
    assert len(trace.records) == 7
    accuracies = [r.metrics["accuracy"] for r in trace.records]
    assert all(a is not None for a in accuracies)
    assert max(accuracies) > 0.5
    evaluated = [r for r in trace.records if "explanation_counted" in r.metrics]
    assert evaluated, "explanation scoring never ran"
    scored = [r.metrics["explanation_score"] for r in evaluated]
    assert any(s is not None for s in scored), "every evaluation came back flagged-empty"
    base_labels = 30 + sum(1 for r in trace.records if r.instance_id)
    assert base_labels == 36
    report(f"desk-scale-rehearsal (max accuracy {max(accuracies) * 100:.1f}%)")


def test_explanation_score_deterministic_and_rule_bound():
    # not gated on absolute values (proxy masks); must follow the exclusion
    # rule and be deterministic per seed
    ds = make_synthetic_dataset(30, seed=5)
    pools = split_pools(ds, seed=5, l0_size=16, test_size=10, expl_test_size=10)
    from ximl import classifier

    model = classifier.fit(pools.labeled, ModelConfig(epochs=2, seed=0))
    cfg = ExplainerConfig(n_samples=30, max_features=3, seed=9)
    params = QuickShiftParams(kernel_size=1.0, max_dist=4.0)
    a = avg_nonzero_explanation_score(model, cfg, params, pools.expl_test, seed=3)
    b = avg_nonzero_explanation_score(model, cfg, params, pools.expl_test, seed=3)
    assert a.value == b.value
    assert a.counted == b.counted
    assert a.counted <= a.correct <= a.evaluated
    if a.value is not None:
        assert 0.0 < a.value <= 100.0
    report("explanation-score-rule")
