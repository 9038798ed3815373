import json
import math
import random

import pytest

import badhash


def test_hamming_and_binarize():
    a = [1, -1, 1, 1]
    b = [1, 1, -1, 1]
    assert badhash.hamming_distance(a, b) == 2
    assert badhash.binarize([0.3, -0.1, 0.0, 2.0]) == [1, -1, -1, 1]
    with pytest.raises(badhash.Error):
        badhash.hamming_distance(a, [1, 1])


def test_map_matches_brute_force():
    rng = random.Random(5)
    db = [[rng.choice([-1, 1]) for _ in range(8)] for _ in range(40)]
    db_labels = [[1, 0] if rng.random() < 0.5 else [0, 1] for _ in db]
    queries = [[rng.choice([-1, 1]) for _ in range(8)] for _ in range(6)]
    q_labels = [[1, 0]] * 6

    def ap(q, relevant):
        order = sorted(range(len(db)), key=lambda i: (sum(x != y for x, y in zip(q, db[i])), i))
        hits, total = 0, 0.0
        for j, i in enumerate(order[:20]):
            if relevant(i):
                hits += 1
                total += hits / (j + 1)
        return total / hits if hits else 0.0

    want = sum(ap(q, lambda i: db_labels[i][0] == 1) for q in queries) / len(queries)
    assert badhash.mean_average_precision(queries, q_labels, db, db_labels, 20) == want
    assert badhash.t_map(queries, 1, db, db_labels, 20) == sum(ap(q, lambda i: db_labels[i][1] == 1) for q in queries) / 6
    ranked = badhash.rank(queries[0], db, 5)
    assert len(ranked) == 5
    assert [d for _, d in ranked] == sorted(d for _, d in ranked)


def test_centers_smoothing_and_psnr():
    centers = badhash.hadamard_centers(10, 16)
    assert all(badhash.hamming_distance(a, b) == 8 for i, a in enumerate(centers) for b in centers[i + 1:])
    p = badhash.smooth_label(0, 10, 0.2)
    assert math.isclose(sum(p), 1 + 0.2 / 9)
    assert abs(badhash.psnr_from_mse(6.179) - 40.221) < 1e-3
    img = [0.5] * 48
    m = badhash.image_metrics(img, img, [3, 4, 4])
    assert m.mse == 0 and math.isinf(m.psnr) and m.ssim == pytest.approx(1.0)


def test_code_dump_round_trip(tmp_path):
    codes = [[1, -1, 1, -1, 1, 1, -1, -1], [-1] * 8]
    badhash.write_code_dump(str(tmp_path / "c.bhcd"), codes)
    assert badhash.read_code_dump(str(tmp_path / "c.bhcd")) == codes


def test_config_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"hash": {"colour": 1}}))
    with pytest.raises(badhash.ConfigError):
        badhash.load_config(path)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"name": "x"}))
    cfg = badhash.load_config(good, seed=4, overrides=["gan.epochs=3"])
    assert cfg["seed"] == 4 and cfg["gan"]["epochs"] == 3


def test_tiny_pipeline(tmp_path):
    config = {
        "name": "tiny", "seed": 1, "output_dir": "run",
        "data": {"root": "data", "classes": 3, "open_set_classes": 2, "per_class": 16, "side": 16,
                 "query_count": 9, "train_count": 24},
        "hash": {"K": 16, "base_width": 4, "epochs": 1, "batch_size": 8},
        "attack": {"poison_rate": 0.25, "open_set_queries": 6, "in_distribution_queries": 4},
        "labcln": {"latent_width": 32, "epochs": 10},
        "gan": {"epochs": 1, "batch_size": 8, "generator_width": 4, "discriminator_width": 4},
        "eval": {"topk": 40, "precision_ns": [1, 10], "pr_points": 5, "residual_count": 1},
    }
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(config))
    summary = badhash.run_pipeline(path, out=tmp_path / "run")
    setting = summary["settings"][0]
    assert setting["setting"].startswith("B-resnet/T-resnet/")
    for model in ("clean", "victim"):
        assert 0.0 <= setting[model]["MAP"] <= 1.0
        assert 0.0 <= setting[model]["t-MAP"] <= 1.0
    assert (tmp_path / "run" / "summary.json").exists()
