"""Optimal compositional explanations over bit-packed concept masks."""

from ._core import (
    BitMatrix,
    ConceptDataset,
    FormatError,
    NeuronMask,
    binarize_activations,
    classify_difference,
    concept_stats,
    explain,
    generate_synthetic,
    iou,
    load_concept_archive,
    load_neuron_mask,
    state_space_size,
    write_concept_archive,
    write_neuron_mask,
)

__all__ = [
    "BitMatrix",
    "ConceptDataset",
    "FormatError",
    "NeuronMask",
    "binarize_activations",
    "classify_difference",
    "concept_stats",
    "explain",
    "generate_synthetic",
    "iou",
    "load_concept_archive",
    "load_neuron_mask",
    "state_space_size",
    "write_concept_archive",
    "write_neuron_mask",
]

__version__ = "0.1.0"
