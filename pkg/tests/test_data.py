"""Data pipeline: manifests, splitting, preprocessing, synthetic benchmark."""

import json
import math

import numpy as np
import pytest

from prepnet.data.manifest import (load_image, load_manifest, save_manifest, save_png,
                                   split_dataset)
from prepnet.data.preprocess import (PreprocessConfig, equalize_histogram,
                                     preprocess_image, resize_bilinear)
from prepnet.data.synthetic import (DomainNuisance, SyntheticDomainSpec, checksum_tree,
                                    default_benchmark_spec, generate_synthetic_benchmark)
from prepnet.errors import ManifestError, ValidationError


def write_manifest(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")


def make_png(path, seed=0, size=(8, 8)):
    rng = np.random.default_rng(seed)
    save_png(path, rng.uniform(0.0, 1.0, size))


# ---------------------------------------------------------------- manifests

def test_manifest_first_appearance_ids(tmp_path):
    for i in range(3):
        make_png(tmp_path / f"im{i}.png", seed=i)
    write_manifest(tmp_path / "m.jsonl", [
        {"path": "im0.png", "label": 0, "dataset": "A", "split": None},
        {"path": "im1.png", "label": 1, "dataset": "B", "split": None},
        {"path": "im2.png", "label": 0, "dataset": "A", "split": None},
    ])
    m = load_manifest(tmp_path / "m.jsonl")
    assert m.domain_count == 2
    assert m.dataset_names == ("A", "B")
    assert [e.dataset_id for e in m.entries] == [0, 1, 0]


def test_manifest_empty_file(tmp_path):
    (tmp_path / "m.jsonl").write_text("")
    with pytest.raises(ManifestError, match="empty manifest"):
        load_manifest(tmp_path / "m.jsonl")


def test_manifest_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_manifest(tmp_path / "nope.jsonl")


def test_manifest_malformed_line_names_lineno(tmp_path):
    make_png(tmp_path / "im0.png")
    write_manifest(tmp_path / "m.jsonl", [{"path": "im0.png", "label": 0, "dataset": "A", "split": None}])
    with open(tmp_path / "m.jsonl", "a", encoding="utf-8") as fh:
        fh.write("{not json\n")
    with pytest.raises(ManifestError, match="line 2"):
        load_manifest(tmp_path / "m.jsonl")


def test_manifest_duplicate_sample_id(tmp_path):
    make_png(tmp_path / "im0.png")
    row = {"path": "im0.png", "label": 0, "dataset": "A", "split": None}
    write_manifest(tmp_path / "m.jsonl", [row, row])
    with pytest.raises(ManifestError, match="duplicate"):
        load_manifest(tmp_path / "m.jsonl")


def test_manifest_unreadable_image_names_path(tmp_path):
    write_manifest(tmp_path / "m.jsonl", [
        {"path": "ghost.png", "label": 0, "dataset": "A", "split": None}])
    with pytest.raises(ManifestError, match="ghost.png"):
        load_manifest(tmp_path / "m.jsonl")


def test_manifest_save_load_round_trip(tmp_path):
    for i in range(4):
        make_png(tmp_path / f"im{i}.png", seed=i)
    write_manifest(tmp_path / "m.jsonl", [
        {"path": f"im{i}.png", "label": i % 2, "dataset": "AB"[i % 2], "split": None}
        for i in range(4)])
    m = load_manifest(tmp_path / "m.jsonl")
    save_manifest(m, tmp_path / "copy.jsonl")
    m2 = load_manifest(tmp_path / "copy.jsonl")
    assert m2.dataset_names == m.dataset_names
    assert [e.path for e in m2.entries] == [e.path for e in m.entries]
    assert [e.label for e in m2.entries] == [e.label for e in m.entries]


def test_image_values_in_unit_range(tmp_path):
    make_png(tmp_path / "im.png", seed=3)
    img = load_image(tmp_path / "im.png")
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert np.isfinite(img).all()


# ---------------------------------------------------------------- splitting

def entry_rows(n, dataset="A", label=0):
    return [{"path": f"{dataset}_{label}_{i}.png", "label": label, "dataset": dataset,
             "split": None} for i in range(n)]


def manifest_without_images(tmp_path, rows):
    p = tmp_path / "m.jsonl"
    write_manifest(p, rows)
    return load_manifest(p, check_images=False)


def split_sizes(m):
    out = {"train": 0, "val": 0, "test": 0}
    for e in m.entries:
        out[e.split] += 1
    return out


def test_split_reference_protocol_sizes(tmp_path):
    m = manifest_without_images(tmp_path, entry_rows(2924))
    s = split_dataset(m, (0.70, 0.15, 0.15), seed=0)
    assert split_sizes(s) == {"train": 2046, "val": 439, "test": 439}


def test_split_small_exact(tmp_path):
    m = manifest_without_images(tmp_path, entry_rows(10))
    s = split_dataset(m, (0.8, 0.1, 0.1), seed=1)
    assert split_sizes(s) == {"train": 8, "val": 1, "test": 1}


def test_split_deterministic(tmp_path):
    m = manifest_without_images(tmp_path, entry_rows(40, "A") + entry_rows(40, "B", 1))
    a = split_dataset(m, (0.7, 0.15, 0.15), seed=5)
    b = split_dataset(m, (0.7, 0.15, 0.15), seed=5)
    assert [e.split for e in a.entries] == [e.split for e in b.entries]
    c = split_dataset(m, (0.7, 0.15, 0.15), seed=6)
    assert [e.split for e in a.entries] != [e.split for e in c.entries]


def test_split_stratified_and_exhaustive(tmp_path):
    rows = (entry_rows(20, "A", 0) + entry_rows(30, "A", 1)
            + entry_rows(25, "B", 0) + entry_rows(15, "B", 1))
    m = manifest_without_images(tmp_path, rows)
    s = split_dataset(m, (0.6, 0.2, 0.2), seed=2)
    assert all(e.split in ("train", "val", "test") for e in s.entries)
    for ds in ("A", "B"):
        for label in (0, 1):
            stratum = [e for e in s.entries if e.dataset == ds and e.label == label]
            n = len(stratum)
            n_train = sum(1 for e in stratum if e.split == "train")
            assert abs(n_train - math.floor(0.6 * n)) <= 1


def test_split_rejects_assigned_entries(tmp_path):
    rows = entry_rows(6)
    rows[2]["split"] = "train"
    m = manifest_without_images(tmp_path, rows)
    with pytest.raises(ValidationError, match="already"):
        split_dataset(m, (0.7, 0.15, 0.15), seed=0)


def test_split_bad_ratios(tmp_path):
    m = manifest_without_images(tmp_path, entry_rows(10))
    with pytest.raises(ValidationError):
        split_dataset(m, (0.7, 0.2, 0.2), seed=0)
    with pytest.raises(ValidationError):
        split_dataset(m, (1.1, -0.05, -0.05), seed=0)


def test_split_tiny_stratum_goes_to_train(tmp_path):
    rows = entry_rows(2, "A", 0) + entry_rows(12, "A", 1)
    m = manifest_without_images(tmp_path, rows)
    with pytest.warns(UserWarning, match="assigning all to train"):
        s = split_dataset(m, (0.7, 0.15, 0.15), seed=0)
    tiny = [e for e in s.entries if e.label == 0]
    assert all(e.split == "train" for e in tiny)


# ------------------------------------------------------------ equalization

def test_equalize_uniform_histogram_fixed_point():
    img = np.array([[0, 85], [170, 255]]) / 255.0
    out = equalize_histogram(img)
    assert np.allclose(out, img, atol=1e-12)


def test_equalize_constant_unchanged():
    img = np.full((4, 4), 0.37)
    assert np.array_equal(equalize_histogram(img), img)


def test_equalize_worked_example():
    img = np.array([[10, 10], [20, 30]]) / 255.0
    out = equalize_histogram(img)
    expected = np.array([[0, 0], [128, 255]]) / 255.0
    assert np.allclose(out, expected, atol=1e-12)


def test_equalize_rejects_out_of_range():
    with pytest.raises(ValidationError):
        equalize_histogram(np.array([[0.0, 1.2]]))
    with pytest.raises(ValidationError):
        equalize_histogram(np.array([[-0.1, 0.5]]))


def test_equalize_rank_preserving():
    rng = np.random.default_rng(0)
    for _ in range(20):
        img = rng.uniform(0, 1, (6, 6))
        out = equalize_histogram(img)
        a = img.ravel()
        b = out.ravel()
        for i in range(a.size):
            for j in range(a.size):
                if a[i] >= a[j]:
                    assert b[i] >= b[j] - 1e-12


def test_equalize_flattens_cdf():
    rng = np.random.default_rng(1)
    img = rng.uniform(0, 1, (64, 64))
    out = equalize_histogram(img, levels=256)
    q = np.round(out * 255).astype(int)
    n = q.size
    for level in range(256):
        emp = np.sum(q <= level) / n
        uni = (level + 1) / 256
        assert abs(emp - uni) <= 2 / 256 + 1e-9


# ------------------------------------------------------------ preprocessing

def test_preprocess_shape_contract():
    rng = np.random.default_rng(2)
    img = rng.uniform(0, 1, (64, 64))
    cfg = PreprocessConfig(target_size=(32, 32), equalize=True)
    assert preprocess_image(img, cfg).shape == (32, 32)


def test_preprocess_identity():
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 1, (16, 16))
    cfg = PreprocessConfig(target_size=(16, 16), equalize=False, norm_mean=0.0, norm_std=1.0)
    assert np.allclose(preprocess_image(img, cfg), img, atol=1e-9)


def test_preprocess_constant_affine():
    img = np.full((8, 8), 0.75)
    cfg = PreprocessConfig(target_size=(8, 8), equalize=True, norm_mean=0.5, norm_std=0.5)
    out = preprocess_image(img, cfg)
    assert np.allclose(out, (0.75 - 0.5) / 0.5, atol=1e-12)


def test_preprocess_config_validation():
    with pytest.raises(ValidationError):
        PreprocessConfig(target_size=(0, 32))
    with pytest.raises(ValidationError):
        PreprocessConfig(target_size=(32, 32), norm_std=0.0)


def test_preprocess_config_round_trip():
    cfg = PreprocessConfig(target_size=(16, 24), equalize=False, norm_mean=0.4, norm_std=0.2)
    again = PreprocessConfig.from_dict(cfg.to_dict())
    assert again == cfg


def test_resize_preserves_constant():
    img = np.full((10, 10), 0.6)
    out = resize_bilinear(img, (7, 13))
    assert out.shape == (7, 13)
    assert np.allclose(out, 0.6, atol=1e-12)


# ------------------------------------------------------- synthetic benchmark

def small_spec(per=4):
    base = default_benchmark_spec(samples_per_stratum=per, image_size=(16, 16))
    return base


def test_synthetic_counts_and_balance(tmp_path):
    m = generate_synthetic_benchmark(small_spec(per=5), tmp_path / "b", seed=0)
    assert len(m.entries) == 2 * 2 * 5
    for ds in (0, 1):
        for label in (0, 1):
            n = sum(1 for e in m.entries if e.dataset_id == ds and e.label == label)
            assert n == 5
    assert (tmp_path / "b" / "spec.json").exists()
    assert (tmp_path / "b" / "manifest.jsonl").exists()


def test_synthetic_deterministic(tmp_path):
    spec = small_spec()
    m1 = generate_synthetic_benchmark(spec, tmp_path / "b1", seed=9)
    m2 = generate_synthetic_benchmark(spec, tmp_path / "b2", seed=9)
    files1 = sorted((tmp_path / "b1" / "images").iterdir())
    files2 = sorted((tmp_path / "b2" / "images").iterdir())
    assert checksum_tree(files1) == checksum_tree(files2)
    m3 = generate_synthetic_benchmark(spec, tmp_path / "b3", seed=10)
    files3 = sorted((tmp_path / "b3" / "images").iterdir())
    assert checksum_tree(files1) != checksum_tree(files3)
    assert len(m1.entries) == len(m2.entries) == len(m3.entries)


def test_synthetic_pixel_range(tmp_path):
    m = generate_synthetic_benchmark(small_spec(), tmp_path / "b", seed=1)
    for e in m.entries[:4]:
        img = load_image(m.resolve(e))
        assert img.min() >= 0.0 and img.max() <= 1.0


def test_spec_validation():
    with pytest.raises(ValidationError):
        SyntheticDomainSpec(domains=())
    with pytest.raises(ValidationError):
        DomainNuisance(name="x", gamma=0.0)
    with pytest.raises(ValidationError):
        DomainNuisance(name="x", noise_sigma=-0.1)
    d = DomainNuisance(name="a", gamma=1.2)
    with pytest.raises(ValidationError, match="distinct"):
        SyntheticDomainSpec(domains=(d, DomainNuisance(name="b", gamma=1.2)))
    with pytest.raises(ValidationError, match="unique"):
        SyntheticDomainSpec(domains=(d, DomainNuisance(name="a", gamma=1.3)))


def test_spec_round_trip(tmp_path):
    spec = small_spec()
    again = SyntheticDomainSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert again == spec


def test_domains_separable_by_probe(tmp_path):
    # construction property: a small classifier learns the domain from raw pixels
    from prepnet.models.config import make_model_config
    from prepnet.training import (RunConfig, TrainConfig, prepare_arrays,
                                  train_task_classifier)

    spec = default_benchmark_spec(samples_per_stratum=50, image_size=(32, 32))
    m = generate_synthetic_benchmark(spec, tmp_path / "b", seed=0)
    cfg = RunConfig(manifest=str(tmp_path / "b" / "manifest.jsonl"),
                    train=TrainConfig(seed=0, epochs_task=5))
    arrays = prepare_arrays(m, PreprocessConfig(target_size=(32, 32)),
                            cfg.train.split_ratios, 0)
    tr, va = arrays["train"], arrays["val"]
    _, best_ba, _ = train_task_classifier(
        tr.images, tr.domains, va.images, va.domains,
        make_model_config(domain_count=2), cfg, init_seed=1, data_stream=(0, 99))
    assert best_ba >= 0.95
