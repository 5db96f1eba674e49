"""Smoke tests for the python bindings (driven by ctest with the
CMake-built module on PYTHONPATH)."""

import math

import numpy as np
import pytest

import calign


def worked_example():
    masks = {
        "c1": np.array([[1, 1, 0, 0, 1, 1]], dtype=bool),
        "c2": np.array([[1, 1, 0, 1, 0, 0]], dtype=bool),
        "c3": np.array([[1, 0, 1, 0, 1, 1]], dtype=bool),
    }
    dataset = calign.ConceptDataset(masks)
    neuron = calign.NeuronMask(np.array([[1, 1, 1, 0, 0, 0]], dtype=bool))
    return dataset, neuron


def test_worked_example_stats():
    dataset, neuron = worked_example()
    rows = calign.concept_stats(dataset, neuron)
    fractions = [(r["diou_num"], r["diou_den"]) for r in rows]
    assert fractions == [(2, 5), (2, 4), (2, 5)]


def test_optimal_equals_brute():
    dataset, neuron = generate_pair(seed=5)
    opt = calign.explain(dataset, neuron, algorithm="optimal", max_length=3)
    brute = calign.explain(dataset, neuron, algorithm="brute", max_length=3)
    assert opt["iou_num"] * brute["iou_den"] == brute["iou_num"] * opt["iou_den"]
    assert opt["optimal"]


def generate_pair(seed):
    return calign.generate_synthetic(
        seed=seed, concepts=8, samples=16, features=64, overlap_density=0.5
    )


def test_beam_variants_agree():
    dataset, neuron = generate_pair(seed=9)
    informed = calign.explain(dataset, neuron, algorithm="beam", max_length=3, beam_size=5)
    vanilla = calign.explain(dataset, neuron, algorithm="beam-vanilla", max_length=3, beam_size=5)
    assert informed["label"] == vanilla["label"]
    assert informed["visited"] <= vanilla["visited"]


def test_mask_roundtrip(tmp_path):
    dataset, neuron = generate_pair(seed=3)
    path = tmp_path / "ds.cma"
    calign.write_concept_archive(dataset, str(path))
    back = calign.load_concept_archive(str(path))
    assert back.concept_names == dataset.concept_names
    assert (back.mask(0) == dataset.mask(0)).all()
    npath = tmp_path / "n.nam"
    calign.write_neuron_mask(neuron, str(npath))
    assert calign.load_neuron_mask(str(npath)).popcount() == neuron.popcount()


def test_binarize_quantile():
    rng = np.random.default_rng(1)
    raw = rng.normal(size=(50, 200)).astype(np.float32)
    mask = calign.binarize_activations(raw, quantile=0.005)
    frac = mask.popcount() / raw.size
    assert 0.005 <= frac <= 0.0055


def test_iou_and_classification():
    dataset, neuron = worked_example()
    num, den = calign.iou(dataset, neuron, "(c1 AND c2)")
    assert (num, den) == (2, 3)
    cat = calign.classify_difference(dataset, "(c1 AND c2)", 2, 3, "(c1 OR c2)", 2, 6)
    assert cat == "cat2"
    same = calign.classify_difference(dataset, "(c1 AND c2)", 2, 3, "(c2 AND c1)", 2, 3)
    assert same == "same"


def test_state_space_size():
    assert calign.state_space_size(8, 3, 3) == 3200


def test_format_error(tmp_path):
    bad = tmp_path / "bad.cma"
    bad.write_bytes(b"XXXXgarbage")
    with pytest.raises(calign.FormatError):
        calign.load_concept_archive(str(bad))


def test_degenerate_quantile_rejected():
    raw = np.ones((2, 2), dtype=np.float32)
    with pytest.raises(ValueError):
        calign.binarize_activations(raw, quantile=0.0)
    mask = calign.binarize_activations(raw, quantile=0.5)
    assert mask.popcount() == 4  # ties keep everything


def test_math_consistency():
    dataset, neuron = generate_pair(seed=21)
    res = calign.explain(dataset, neuron, algorithm="optimal", max_length=2)
    assert math.isclose(res["iou"], res["iou_num"] / res["iou_den"])
    num, den = calign.iou(dataset, neuron, res["label"])
    assert num * res["iou_den"] == res["iou_num"] * den
