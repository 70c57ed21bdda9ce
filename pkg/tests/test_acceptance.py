"""Acceptance suite.

Each test enforces one release criterion at its stated tolerance and
runtime bound and prints a single PASS/FAIL line (run with ``-s`` to see
them live). The directional enhancement criterion (A8) runs the whole
chain on a synthetic corpus and takes a few minutes on CPU.
"""

import itertools
import time

import numpy as np
import pytest
import torch

from percept_loop import dataio
from percept_loop.cli import main as cli_main
from percept_loop.enhance import EnhanceTrainConfig, combined_loss_tensor, train_enhancer
from percept_loop.enhance.network import EnhancerNetwork
from percept_loop.iqa import (
    QualityModel,
    QualityNetwork,
    QualityTrainConfig,
    norm_in_norm_loss,
    split_digest,
    tiny_config,
    train_quality_model,
)
from percept_loop.iqa.network import init_parameters
from percept_loop.iqa.train import training_loss
from percept_loop.metrics import plcc, srocc, ssim
from percept_loop.study import (
    aggregate_votes,
    opinion_scores,
    simulate_votes,
    tally,
)

from conftest import make_corpus
from gradcheck import check_input_gradient, check_param_gradients
from test_gradients import jitter_parameters
from test_metrics import pearson_oracle, srocc_oracle
from test_study import make_vote, random_complete_study

torch.set_num_threads(max(1, torch.get_num_threads()))


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"{criterion}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert ok, f"{criterion} failed: {detail}"


# ---------------------------------------------------------------------
# A1 - exact reproduction of a recorded 30-subject 10-method tally
# ---------------------------------------------------------------------

# Winning counts from a complete 30-subject pairwise study over ten
# methods (row preferred over column), with the published four-decimal
# opinion scores it must reproduce.
STUDY_COUNTS = np.array([
    [0, 14, 19, 18, 29, 30, 19, 15, 22, 19],
    [16, 0, 22, 22, 30, 30, 29, 15, 19, 14],
    [11, 8, 0, 9, 18, 23, 15, 9, 14, 11],
    [12, 8, 21, 0, 30, 30, 22, 14, 16, 13],
    [1, 0, 12, 0, 0, 30, 11, 11, 5, 0],
    [0, 0, 7, 0, 0, 0, 2, 9, 2, 2],
    [11, 1, 15, 8, 19, 28, 0, 15, 7, 3],
    [15, 15, 21, 16, 19, 21, 15, 0, 2, 11],
    [8, 11, 16, 14, 25, 28, 23, 28, 0, 14],
    [11, 16, 19, 17, 30, 28, 27, 19, 16, 0],
])
STUDY_WT = [185, 197, 118, 166, 70, 22, 107, 135, 167, 183]
STUDY_OS = [0.6852, 0.7296, 0.4370, 0.6148, 0.2593, 0.0815,
            0.3963, 0.5000, 0.6185, 0.6778]


def votes_from_counts(counts, methods, content_id="scene"):
    """Expand a winning-count matrix into one vote per subject and pair."""
    n_subjects = int((counts + counts.T)[0, 1])
    votes = []
    for r, c in itertools.combinations(range(len(methods)), 2):
        wins_r = int(counts[r, c])
        for s in range(n_subjects):
            winner, loser = ((methods[r], methods[c]) if s < wins_r
                             else (methods[c], methods[r]))
            votes.append(make_vote(content_id, f"s{s:03d}", winner, loser))
    return votes


def test_a1_exact_tally_reproduction():
    start = time.time()
    methods = [f"m{i:02d}" for i in range(10)]
    votes = votes_from_counts(STUDY_COUNTS, methods)
    t = tally(votes, methods, "scene")
    np.testing.assert_array_equal(t.counts, STUDY_COUNTS)
    scores = opinion_scores(t)
    ok = True
    for s, wt, os4 in zip(scores, STUDY_WT, STUDY_OS):
        ok &= s.winning_times == wt
        ok &= s.total == 270
        ok &= abs(s.score - os4) < 5e-5
    elapsed = time.time() - start
    report("A1", ok and elapsed < 1.0,
           f"10/10 opinion scores at 4 decimals, T=270, {elapsed:.2f}s")


# ---------------------------------------------------------------------
# A2 - aggregation conservation over simulated complete studies
# ---------------------------------------------------------------------

def test_a2_aggregation_conservation():
    start = time.time()
    rng = np.random.default_rng(202)
    ok = True
    for _ in range(200):
        m = int(rng.integers(3, 11))
        n = int(rng.integers(5, 31))
        methods = [f"m{i}" for i in range(m)]
        votes = random_complete_study(methods, ["c0"], n, rng)
        t = tally(votes, methods, "c0")
        pair_sums = t.counts + t.counts.T
        off_diag = ~np.eye(m, dtype=bool)
        ok &= bool((pair_sums[off_diag] == n).all())
        scores = opinion_scores(t)
        ok &= abs(sum(s.score for s in scores) - m / 2) < 1e-9
    elapsed = time.time() - start
    report("A2", ok and elapsed < 10.0,
           f"200 studies: antisymmetry + sum=M/2, {elapsed:.2f}s")


# ---------------------------------------------------------------------
# A3 - correlation oracles
# ---------------------------------------------------------------------

def test_a3_correlation_oracles():
    start = time.time()
    rng = np.random.default_rng(303)
    ok = True
    checked = 0
    while checked < 100:
        n = int(rng.integers(3, 21))
        if rng.random() < 0.3:
            a = rng.integers(0, 5, size=n).astype(float)
            b = rng.integers(0, 5, size=n).astype(float)
        else:
            a = rng.normal(size=n)
            b = rng.normal(size=n)
        if np.ptp(a) == 0 or np.ptp(b) == 0:
            continue
        ok &= abs(srocc(a, b) - srocc_oracle(a, b)) < 1e-10
        ok &= abs(plcc(a, b) - pearson_oracle(a, b)) < 1e-10
        checked += 1
    ok &= srocc([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0, abs=1e-12)
    ok &= srocc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)
    ok &= srocc([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)
    elapsed = time.time() - start
    report("A3", ok and elapsed < 5.0,
           f"100 brute-force matches at 1e-10 + fixed cases, {elapsed:.2f}s")


# ---------------------------------------------------------------------
# A4 - structural-similarity contract
# ---------------------------------------------------------------------

SSIM_NOISE_FIXTURES = {
    0.01: 0.9762757726183583,
    0.05: 0.6678660461241032,
    0.1: 0.37091655612217483,
}


def test_a4_ssim_contract():
    start = time.time()
    rng = np.random.default_rng(404)
    ok = True
    for _ in range(20):
        img = rng.random((24, 24, 3)).astype(np.float32)
        ok &= abs(ssim(img, img) - 1.0) < 1e-9
    x = rng.random((32, 32, 3)).astype(np.float32)
    y = np.clip(x + rng.normal(0, 0.08, x.shape), 0, 1).astype(np.float32)
    ok &= abs(ssim(x, y) - ssim(y, x)) < 1e-12
    ref = dataio.make_synthetic_reference(64, 64, np.random.default_rng(7))
    noise_rng = np.random.default_rng(0)
    values = []
    for sigma, frozen in SSIM_NOISE_FIXTURES.items():
        noisy = np.clip(ref + noise_rng.normal(0, sigma, ref.shape),
                        0, 1).astype(np.float32)
        value = ssim(ref, noisy)
        values.append(value)
        ok &= abs(value - frozen) < 1e-7
    ok &= values[0] > values[1] > values[2]
    elapsed = time.time() - start
    report("A4", ok and elapsed < 10.0,
           f"identity/symmetry/monotone fixtures "
           f"{[round(v, 4) for v in values]}, {elapsed:.2f}s")


# ---------------------------------------------------------------------
# A5 - gradient correctness over 5 seeds
# ---------------------------------------------------------------------

def test_a5_gradient_correctness():
    start = time.time()
    tol = 1e-5
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(7000 + seed)
        preds = torch.tensor(rng.normal(size=8), dtype=torch.float64)
        targets = torch.tensor(rng.normal(size=8), dtype=torch.float64)
        worst = max(worst, check_input_gradient(
            lambda: norm_in_norm_loss(preds, targets), preds, seed=seed))

        cfg = tiny_config()
        qnet = QualityNetwork(cfg)
        init_parameters(qnet, seed)
        jitter_parameters(qnet, 100 + seed)
        qnet.double()
        x = torch.tensor(rng.random((2, 3, 64, 64)), dtype=torch.float64)
        t = torch.tensor(rng.random(2), dtype=torch.float64)
        worst = max(worst, check_param_gradients(
            lambda: training_loss(qnet(x), t, cfg),
            qnet.named_parameters(), seed=seed, max_coords_per_tensor=6))

        for p in qnet.parameters():
            p.requires_grad_(False)
        quality = QualityModel(network=qnet, config=cfg, q_max=0.9, seed=seed)
        enhancer = EnhancerNetwork().double()
        init_parameters(enhancer, seed)
        jitter_parameters(enhancer, 200 + seed)
        low = torch.tensor(rng.random((1, 3, 64, 64)), dtype=torch.float64)
        ref = torch.tensor(rng.random((1, 3, 64, 64)), dtype=torch.float64)
        worst = max(worst, check_param_gradients(
            lambda: combined_loss_tensor(enhancer(low), ref, quality, 5e-3),
            enhancer.named_parameters(), seed=seed, max_coords_per_tensor=5))
    elapsed = time.time() - start
    report("A5", worst < tol and elapsed < 120.0,
           f"worst relative error {worst:.2e} over 5 seeds, {elapsed:.1f}s")


# ---------------------------------------------------------------------
# A6 - training capacity and ablation toggles
# ---------------------------------------------------------------------

def overfit_items(tmp_path):
    """8 contents x 4 pseudo-enhancers at 64x64 with simulated scores."""
    config = dataio.default_degradation_config()
    config.methods = {k: config.methods[k] for k in
                      ["m_faithful", "m_noisy", "m_blurry", "m_washed"]}
    rng = np.random.default_rng(0)
    bases = [dataio.make_synthetic_reference(64, 64, rng) for _ in range(8)]
    root = tmp_path / "overfit-corpus"
    manifest = dataio.generate_degraded_corpus(bases, config, 3, root)
    votes = simulate_votes(manifest, root, n_subjects=30, temperature=0.03,
                           seed=5)
    by_key = {(s.content_id, s.method_id): s.score
              for s in aggregate_votes(votes)}
    return [(dataio.load_image(root / e.path),
             by_key[(e.content_id, e.method_id)])
            for e in manifest.entries if e.role == "enhanced"]


def test_a6_overfit_capacity_and_toggles(tmp_path):
    start = time.time()
    items = overfit_items(tmp_path)
    assert len(items) == 32
    train_cfg = QualityTrainConfig(epochs=200, batch_size=32,
                                   learning_rate=3e-3, crop_size=64,
                                   max_steps=200)
    results = {}
    for illum in (True, False):
        model = train_quality_model(items, tiny_config(use_illumination=illum),
                                    train_cfg, seed=7)
        preds = model.predict([im for im, _ in items])
        results[illum] = srocc(preds, [s for _, s in items])
    elapsed = time.time() - start
    ok = results[True] >= 0.95 and results[False] >= 0.95 and elapsed < 300.0
    report("A6", ok,
           f"train SROCC {results[True]:.4f} (illumination on) / "
           f"{results[False]:.4f} (off) in 200 steps, {elapsed:.1f}s")


# ---------------------------------------------------------------------
# A7 - loss invariance under positive affine maps
# ---------------------------------------------------------------------

def test_a7_norm_in_norm_invariance():
    start = time.time()
    rng = np.random.default_rng(707)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(4, 33))
        t = rng.normal(size=n)
        while np.ptp(t) == 0:
            t = rng.normal(size=n)
        t = (t - t.mean()) / t.std()
        a = float(rng.uniform(0.05, 20.0))
        b = float(rng.uniform(-5.0, 5.0))
        loss = norm_in_norm_loss(torch.tensor(a * t + b),
                                 torch.tensor(t)).item()
        worst = max(worst, loss)
    elapsed = time.time() - start
    report("A7", worst <= 1e-6 and elapsed < 1.0,
           f"worst loss {worst:.2e} over 100 affine draws, {elapsed:.2f}s")


# ---------------------------------------------------------------------
# A8 - directional gap-closing on a synthetic corpus
# ---------------------------------------------------------------------

def test_a8_quality_guided_enhancement(tmp_path):
    start = time.time()
    seed = 11
    rng = np.random.default_rng(seed)
    bases = [dataio.make_synthetic_reference(64, 64, rng) for _ in range(56)]
    config = dataio.default_degradation_config()
    root = tmp_path / "chain-corpus"
    manifest = dataio.generate_degraded_corpus(bases, config, seed, root)
    votes = simulate_votes(manifest, root, n_subjects=12, temperature=0.05,
                           seed=seed)
    by_key = {(s.content_id, s.method_id): s.score
              for s in aggregate_votes(votes)}
    split = dataio.split_by_content(manifest, 0.2, seed)

    items = [(dataio.load_image(root / e.path),
              by_key[(e.content_id, e.method_id)])
             for e in manifest.entries
             if e.role == "enhanced" and e.content_id in split.train_content_ids]
    quality = train_quality_model(
        items, tiny_config(),
        QualityTrainConfig(epochs=60, batch_size=32, learning_rate=3e-3,
                           crop_size=56, max_steps=600),
        seed=seed, train_split_digest=split_digest(split))

    pairs = [(dataio.load_image(root / manifest.entry(c, "low_light").path),
              dataio.load_image(root / manifest.entry(c, "reference").path))
             for c in sorted(split.train_content_ids)]
    held_out = [dataio.load_image(root / manifest.entry(c, "low_light").path)
                for c in sorted(split.test_content_ids)]

    def fit(lambda_):
        return train_enhancer(
            pairs, quality,
            EnhanceTrainConfig(lambda_=lambda_, epochs=40, initial_lr=1e-3,
                               crop_size=56, batch_size=8), seed=seed)

    baseline = fit(0.0)
    guided = fit(5e-3)
    base_scores = np.array([quality.predict_one(baseline.enhance(im))
                            for im in held_out])
    guided_scores = np.array([quality.predict_one(guided.enhance(im))
                              for im in held_out])
    fraction = float(np.mean(guided_scores > base_scores))
    elapsed = time.time() - start
    report("A8", fraction >= 0.6 and elapsed < 1800.0,
           f"guided beats baseline on {fraction:.0%} of {len(held_out)} "
           f"held-out images (mean delta "
           f"{float(np.mean(guided_scores - base_scores)):+.4f}), "
           f"{elapsed:.0f}s")


# ---------------------------------------------------------------------
# A9 - determinism of synthesis and training
# ---------------------------------------------------------------------

def test_a9_determinism(tmp_path):
    start = time.time()
    import json as _json

    config = {
        "format_version": 1,
        "synthetic_base": {"count": 2, "height": 48, "width": 48},
        "low_light": {"gamma": [1.8, 2.5], "noise_sigma": [0.01, 0.03]},
        "methods": {"m_a": {"noise_sigma": [0.02, 0.06]},
                    "m_b": {"blur_sigma": [0.5, 1.5]}},
    }
    config_path = tmp_path / "corpus.json"
    config_path.write_text(_json.dumps(config))
    ok = True
    for name in ("c1", "c2"):
        code = cli_main(["corpus", "synth", "--config", str(config_path),
                         "--seed", "9", "--out", str(tmp_path / name),
                         "--verbosity", "quiet"])
        ok &= code == 0
    files = sorted(p.relative_to(tmp_path / "c1")
                   for p in (tmp_path / "c1").rglob("*") if p.is_file())
    for rel in files:
        ok &= ((tmp_path / "c1" / rel).read_bytes()
               == (tmp_path / "c2" / rel).read_bytes())

    rng = np.random.default_rng(0)
    items = [(rng.random((32, 32, 3)).astype(np.float32), float(rng.random()))
             for _ in range(6)]
    probe = [rng.random((32, 32, 3)).astype(np.float32) for _ in range(3)]
    train_cfg = QualityTrainConfig(epochs=5, batch_size=6, learning_rate=1e-3,
                                   crop_size=32, max_steps=10)
    q1 = train_quality_model(items, tiny_config(), train_cfg, seed=17)
    q2 = train_quality_model(items, tiny_config(), train_cfg, seed=17)
    ok &= bool((q1.predict(probe) == q2.predict(probe)).all())
    ok &= q1.params_blob() == q2.params_blob()

    pairs = [(im, im) for im, _ in items[:3]]
    enh_cfg = EnhanceTrainConfig(lambda_=5e-3, epochs=2, initial_lr=1e-3,
                                 crop_size=32, batch_size=3, max_steps=4)
    e1 = train_enhancer(pairs, q1, enh_cfg, seed=23)
    e2 = train_enhancer(pairs, q1, enh_cfg, seed=23)
    ok &= e1.params_blob() == e2.params_blob()
    elapsed = time.time() - start
    report("A9", ok, f"byte-identical corpora, prediction-identical and "
                     f"blob-identical models, {elapsed:.1f}s")


# ---------------------------------------------------------------------
# A10 - frozen quality model through enhancer training
# ---------------------------------------------------------------------

def test_a10_frozen_quality_model():
    start = time.time()
    rng = np.random.default_rng(0)
    items = [(rng.random((32, 32, 3)).astype(np.float32), float(rng.random()))
             for _ in range(4)]
    quality = train_quality_model(
        items, tiny_config(),
        QualityTrainConfig(epochs=2, batch_size=4, learning_rate=1e-3,
                           crop_size=32), seed=1)
    before = quality.params_blob()
    pairs = [(im, im) for im, _ in items]
    train_enhancer(pairs, quality,
                   EnhanceTrainConfig(lambda_=5e-3, epochs=3, initial_lr=1e-3,
                                      crop_size=32, batch_size=4), seed=2)
    after = quality.params_blob()
    elapsed = time.time() - start
    report("A10", before == after,
           f"parameter blob byte-identical after enhancer training, "
           f"{elapsed:.1f}s")
