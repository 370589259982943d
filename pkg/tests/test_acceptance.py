"""Acceptance gate: nine numbered criteria, each announcing exactly one
PASS/FAIL line on the terminal (bypassing capture) and failing the test when
the criterion is not met."""

import hashlib
import json
import os
import time

import numpy as np
import pytest

from stcooc import (
    ChannelFeatures,
    CountMatrix,
    KernelSet,
    LabeledVideo,
    PipelineConfig,
    brute_force_correlogram,
    build_vocabulary,
    class_word_counts,
    correlogram,
    cross_validate,
    dual_objective,
    fit_pca,
    fit_pipeline,
    gram_matrix,
    haralick_slice,
    label_points,
    merge_loss,
    mutual_information,
    reduction_schedule,
    svm_dual_oracle,
    svm_train,
    synth_dataset,
    tradeoff_factor,
)
from stcooc.cli import main as cli_main

from conftest import paired_spec


def announce(capsys, num, ok, detail):
    with capsys.disabled():
        print(f"criterion {num:02d} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
    assert ok, f"criterion {num:02d} FAIL: {detail}"


# ---------------------------------------------------------------------------
# criterion 1: published trade-off table replay

PUBLISHED_ROWS = {
    "KTH": [
        (100, 85.19, 84.34), (200, 88.89, 85.33), (300, 83.80, 76.26),
        (400, 88.65, 71.94), (500, 88.89, 66.67), (600, 89.35, 57.18),
        (700, 91.67, 46.75), (800, 89.35, 32.17), (900, 89.81, 17.06),
        (1000, 91.67, 0.0),
    ],
    "UCF": [
        (100, 69.66, 68.96), (200, 74.49, 71.51), (300, 83.04, 75.57),
        (400, 80.49, 51.51), (500, 79.20, 59.40), (600, 82.46, 52.77),
        (700, 87.01, 44.38), (800, 84.26, 30.34), (900, 84.36, 16.03),
        (1000, 86.67, 0.0),
    ],
}


def test_criterion_01_tradeoff_table_replay(capsys):
    start = time.perf_counter()
    mismatches = []
    total = 0
    for dataset, rows in PUBLISHED_ROWS.items():
        for size, rate, published_m in rows:
            total += 1
            got = tradeoff_factor(size, 1000, rate)
            if abs(got - published_m) > 0.01:
                mismatches.append(
                    f"{dataset} size {size}: formula {got:.4f} vs published {published_m:.2f}")
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 1.0
    detail = f"{total - len(mismatches)}/{total} rows within ±0.01 in {elapsed:.3f}s"
    if mismatches:
        detail += "; " + "; ".join(mismatches)
    announce(capsys, 1, ok, detail)


# ---------------------------------------------------------------------------
# criterion 2: indexed correlogram equals brute force on randomized videos


def _random_video(rng, max_points=500, max_words=10):
    n = int(rng.integers(0, max_points + 1))
    k = int(rng.integers(1, max_words + 1))
    w, h, f = 80, 60, 50
    if rng.random() < 0.3:  # integer coordinates exercise cell boundaries
        xs = rng.integers(0, w + 1, size=n).astype(float)
        ys = rng.integers(0, h + 1, size=n).astype(float)
        ts = rng.integers(0, f + 1, size=n).astype(float)
    else:
        xs = rng.uniform(0, w, size=n)
        ys = rng.uniform(0, h, size=n)
        ts = rng.uniform(0, f, size=n)
    pts = [(xs[i], ys[i], ts[i], 1.0, [0.0]) for i in range(n)]
    labels = rng.integers(1, k + 1, size=n)
    return LabeledVideo.from_points(
        video_id="r", extent=(w, h, f), points=pts, labels=labels), k


def _random_kernels(rng, max_j=3):
    j = int(rng.integers(1, max_j + 1))
    halves = []
    prev = (0.0, 0.0, 0.0)
    for _ in range(j):
        cur = (prev[0] + float(rng.uniform(0.5, 8.0)),
               prev[1] + float(rng.uniform(0.5, 8.0)),
               prev[2] + float(rng.uniform(0.5, 6.0)))
        halves.append(cur)
        prev = cur
    return KernelSet(tuple(halves))


def test_criterion_02_correlogram_oracle_equivalence(capsys):
    rng = np.random.default_rng(2002)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(100):
        video, k = _random_video(rng)
        kernels = _random_kernels(rng)
        fast = correlogram(video, kernels, k)
        slow = brute_force_correlogram(video, kernels, k)
        if not np.array_equal(fast.values, slow.values):
            mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 30.0
    announce(capsys, 2, ok,
             f"{100 - mismatches}/100 randomized videos match brute force exactly "
             f"in {elapsed:.2f}s")


def test_criterion_03_pair_symmetry_and_nesting(capsys):
    rng = np.random.default_rng(2003)
    sym_bad = nest_bad = checked = 0
    for _ in range(40):
        video, k = _random_video(rng, max_points=200, max_words=6)
        if video.n_points == 0:
            continue
        kernels = _random_kernels(rng, max_j=3)
        cg = correlogram(video, kernels, k)
        checked += 1
        pops = np.bincount(video.labels - 1, minlength=k).astype(float)
        lhs = cg.values * pops[None, :, None]
        rhs = np.transpose(cg.values, (0, 2, 1)) * pops[None, None, :]
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        if not np.all(np.abs(lhs - rhs) <= 1e-9 * np.maximum(scale, 1e-300)):
            sym_bad += 1
        if np.any(np.diff(cg.values, axis=0) < 0):
            nest_bad += 1
    ok = checked > 0 and sym_bad == 0 and nest_bad == 0
    announce(capsys, 3, ok,
             f"pair symmetry (1e-9 relative) and kernel-nesting monotonicity hold "
             f"on {checked}/{checked} randomized fixtures"
             if ok else f"{sym_bad} symmetry and {nest_bad} nesting violations "
             f"in {checked} fixtures")


def test_criterion_04_mutual_information_suite(capsys, paired_dataset):
    rng = np.random.default_rng(2004)
    # (a) merge-loss locality against the global information difference
    locality_bad = 0
    for _ in range(50):
        k = int(rng.integers(2, 11))
        c = int(rng.integers(2, 7))
        counts = rng.integers(0, 20, size=(k, c))
        if counts.sum() == 0:
            counts[0, 0] = 1
        cm = CountMatrix(counts, tuple(range(1, k + 1)), tuple(f"c{i}" for i in range(c)))
        i, j = sorted(rng.choice(k, size=2, replace=False))
        merged = np.delete(counts, j, axis=0)
        merged[i] = counts[i] + counts[j]
        cm2 = CountMatrix(merged, tuple(range(1, k)), cm.col_classes)
        local = merge_loss(cm, int(i), int(j))
        global_drop = mutual_information(cm) - mutual_information(cm2)
        if abs(local - global_drop) > 1e-10:
            locality_bad += 1
    # (b) information non-increasing along a real greedy merge trace, within bounds
    vids = paired_dataset.videos
    vocab = build_vocabulary(vids, k=8, sample_size=None, seed=[2004])
    labeled = [label_points(v, vocab) for v in vids]
    cm = class_word_counts(labeled, vocab.size)
    snapshots, _ = reduction_schedule(vocab, cm, range(1, vocab.size + 1))
    n_classes = len(cm.col_classes)
    infos = []
    monotone_ok = bounds_ok = True
    for size in range(vocab.size, 0, -1):
        reduced = snapshots[size]
        counts = np.stack([
            cm.counts[[w - 1 for w in sorted(group)]].sum(axis=0)
            for group in reduced.merged_from])
        cm_r = CountMatrix(counts, tuple(range(1, size + 1)), cm.col_classes)
        info = mutual_information(cm_r)
        cap = min(np.log2(size) if size > 1 else 0.0, np.log2(n_classes))
        if not (-1e-12 <= info <= cap + 1e-12):
            bounds_ok = False
        infos.append(info)
    if any(b > a + 1e-12 for a, b in zip(infos, infos[1:])):
        monotone_ok = False
    ok = locality_bad == 0 and monotone_ok and bounds_ok
    announce(capsys, 4, ok,
             f"loss locality {50 - locality_bad}/50 matrices at 1e-10; "
             f"information non-increasing along the 8-to-1 merge trace: {monotone_ok}; "
             f"bounds [0, min(log2 K, log2 |Y|)]: {bounds_ok}")


def test_criterion_05_haralick_checks(capsys):
    single = haralick_slice([[3.0]])
    uniform = haralick_slice(np.full((2, 2), 0.25))
    exact_ok = (abs(single[0] - 1.0) <= 1e-9 and abs(single[8]) <= 1e-9
                and abs(uniform[0] - 0.25) <= 1e-9 and abs(uniform[8] - 2.0) <= 1e-9
                and abs(uniform[1] - 0.5) <= 1e-9)
    rng = np.random.default_rng(2005)
    scale_bad = 0
    for _ in range(100):
        k = int(rng.integers(1, 7))
        m = rng.uniform(0, 3, size=(k, k))
        if m.sum() == 0:
            m[0, 0] = 1.0
        c = float(rng.uniform(0.01, 100.0))
        if not np.allclose(haralick_slice(m), haralick_slice(c * m),
                           rtol=1e-9, atol=1e-12):
            scale_bad += 1
    ok = exact_ok and scale_bad == 0
    announce(capsys, 5, ok,
             f"single-cell (f1=1, f9=0) and uniform 2x2 (f1=0.25, f9=2, f2=0.5) "
             f"at 1e-9: {exact_ok}; scaling invariance {100 - scale_bad}/100 matrices")


def test_criterion_06_pca_checks(capsys):
    rng = np.random.default_rng(2006)
    model = fit_pca(rng.normal(size=(20, 40)), 10)
    ortho = float(np.abs(model.basis @ model.basis.T - np.eye(10)).max())
    latent = rng.normal(size=(30, 4))
    x = latent @ rng.normal(size=(4, 12)) + rng.normal(size=12)
    m2 = fit_pca(x, 4)
    centered = x - m2.mean
    recon_err = float(np.abs((centered @ m2.basis.T) @ m2.basis - centered).max())
    try:
        fit_pca(rng.normal(size=(4, 6)), 5)
        cap_msg_ok = False
    except ValueError as exc:
        cap_msg_ok = str(exc) == (
            "requested component count S=5 exceeds the maximum admissible "
            "n_train - 1 = 3 (covariance rank limit)")
    ok = ortho <= 1e-9 and recon_err <= 1e-8 and cap_msg_ok
    announce(capsys, 6, ok,
             f"orthonormality deviation {ortho:.2e} (<= 1e-9); rank-4 recovery "
             f"error {recon_err:.2e} (<= 1e-8); component-cap message exact: {cap_msg_ok}")


def test_criterion_07_kernel_and_svm_suite(capsys, paired_dataset, quick_config):
    fp = fit_pipeline(paired_dataset.videos, quick_config)
    gram = gram_matrix(fp.train_features, fp.channel_config)
    symmetric = bool(np.array_equal(gram, gram.T))
    unit_diag = bool(np.all(np.diag(gram) == 1.0))
    eig_floor = float(np.linalg.eigvalsh(gram).min())
    psd_ok = eig_floor >= -1e-8 * float(np.trace(gram))
    rng = np.random.default_rng(2007)
    dual_bad = kkt_bad = 0
    trials = 12
    for _ in range(trials):
        n = int(rng.integers(3, 9))
        x = rng.normal(size=(n, 3))
        d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=2)
        kernel = np.exp(-d2 / d2.mean())
        kernel = (kernel + kernel.T) / 2
        while True:
            y = rng.choice([-1.0, 1.0], size=n)
            if len(set(y)) == 2:
                break
        c = float(rng.uniform(0.2, 10.0))
        labels = ["a" if v > 0 else "b" for v in y]
        tol = 1e-6
        model = svm_train(kernel, labels, c=c, tol=tol)
        pair = model.pairs[0]
        alpha = np.zeros(n)
        alpha[pair.support_indices] = np.abs(pair.dual_coef)
        got = dual_objective(kernel, y, alpha)
        _, want = svm_dual_oracle(kernel, y, c)
        if abs(got - want) >= 1e-4:
            dual_bad += 1
        # KKT: box constraints, equality constraint, and the stationarity gap
        q = (y[:, None] * y[None, :]) * kernel
        grad = q @ alpha - 1.0
        yg = y * grad
        up = ((y > 0) & (alpha < c - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low = ((y > 0) & (alpha > 1e-12)) | ((y < 0) & (alpha < c - 1e-12))
        gap = (float(np.max(-yg[up])) if up.any() else -np.inf) - \
              (float(np.min(-yg[low])) if low.any() else np.inf)
        if (abs(float(alpha @ y)) > 1e-9 or alpha.min() < 0
                or alpha.max() > c + 1e-9 or gap > tol + 1e-12):
            kkt_bad += 1
    ok = symmetric and unit_diag and psd_ok and dual_bad == 0 and kkt_bad == 0
    announce(capsys, 7, ok,
             f"gram symmetric={symmetric}, unit diagonal={unit_diag}, min eigenvalue "
             f"{eig_floor:.2e} >= -1e-8*trace; SMO within 1e-4 of the dual oracle on "
             f"{trials - dual_bad}/{trials} problems; KKT at tolerance on "
             f"{trials - kkt_bad}/{trials}")


def test_criterion_08_cooccurrence_beats_marginals(capsys):
    start = time.perf_counter()
    dataset = synth_dataset(paired_spec(videos_per_class=40), seed=17)
    base = {
        "vocab": {"k": 8, "sample_size": None},
        "kernels": {"count": 3, "spatial": [4, 16], "temporal": [3, 10]},
        "pca": {"s": 6},
        "split": {"kind": "stratified", "folds": 2},
        "seed": 5,
    }
    bovw_cfg = PipelineConfig.from_dict({**base, "channels": ["bovw"]})
    combined_cfg = PipelineConfig.from_dict(
        {**base, "channels": ["bovw", "pcacooc", "hara"]})
    bovw_acc = cross_validate(dataset, bovw_cfg).overall
    combined_acc = cross_validate(dataset, combined_cfg).overall
    elapsed = time.perf_counter() - start
    ok = bovw_acc <= 60.0 and combined_acc >= 90.0 and elapsed < 120.0
    announce(capsys, 8, ok,
             f"2 classes x 40 videos, 2-fold: bovw-only {bovw_acc:.2f}% (<= 60), "
             f"bovw+pcacooc+hara {combined_acc:.2f}% (>= 90) in {elapsed:.1f}s")


def _digest(path):
    if os.path.isdir(path):
        h = hashlib.sha256()
        for name in sorted(os.listdir(path)):
            h.update(name.encode())
            with open(os.path.join(path, name), "rb") as fh:
                h.update(fh.read())
        return h.hexdigest()
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def test_criterion_09_command_determinism(capsys, tmp_path):
    spec = {
        "extent": [120, 120, 80],
        "videos_per_class": 6,
        "noise_sigma": 0.25,
        "prototypes": [[4.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 4.0]],
        "classes": [
            {"name": "alpha", "rules": [
                {"pair": [1, 2], "count": 20, "radius": [6, 6, 4]},
                {"pair": [3, 3], "count": 10, "radius": [40, 40, 25]}]},
            {"name": "beta", "rules": [
                {"pair": [1, 3], "count": 20, "radius": [6, 6, 4]},
                {"pair": [2, 2], "count": 10, "radius": [40, 40, 25]}]},
        ],
    }
    config = {
        "vocab": {"k": 6, "sample_size": None},
        "reduce": {"target_size": 4},
        "kernels": {"count": 2, "spatial": [4, 12], "temporal": [3, 8]},
        "correlations": {"q": 8},
        "pca": {"s": 4},
        "split": {"kind": "stratified", "folds": 2},
        "seed": 3,
    }
    sweep_cfg = {**config, "reduce": {"replay": [[100, 85.19], [200, 88.89]],
                                      "orig_size": 1000}}
    spec_p = tmp_path / "spec.json"
    spec_p.write_text(json.dumps(spec))
    cfg_p = tmp_path / "config.json"
    cfg_p.write_text(json.dumps(config))
    sweep_p = tmp_path / "sweep-config.json"
    sweep_p.write_text(json.dumps(sweep_cfg))
    data = tmp_path / "data.jsonl"
    assert cli_main(["synth", str(spec_p), "--out", str(data), "--seed", "11"]) == 0

    stable = []

    def run(name, argv_of):
        outs = []
        for variant, extra in (("a", []), ("b", []), ("t", ["--threads", "5"])):
            out = tmp_path / f"{name}-{variant}"
            assert cli_main(argv_of(str(out)) + extra) == 0, f"{name} run failed"
            outs.append(_digest(out))
        stable.append((name, outs[0] == outs[1] == outs[2]))

    run("synth", lambda o: ["synth", str(spec_p), "--out", o, "--seed", "11"])
    run("fit", lambda o: ["fit", str(data), "--config", str(cfg_p), "--out", o])
    bundle = tmp_path / "fit-a"
    run("predict", lambda o: ["predict", str(bundle), str(data), "--out", o])
    run("sweep", lambda o: ["sweep", "--config", str(sweep_p), "--out", o])
    run("eval", lambda o: ["eval", str(data), "--config", str(cfg_p), "--out", o])

    bad = [name for name, same in stable if not same]
    ok = not bad
    announce(capsys, 9, ok,
             "synth, fit, predict, sweep, eval each bit-identical across reruns "
             "and --threads settings" if ok else
             f"commands with differing outputs: {', '.join(bad)}")
