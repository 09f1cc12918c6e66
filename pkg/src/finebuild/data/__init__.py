from .tiles import ImageTile, LabeledDataset, PairedDataset
from .splits import SplitAssignment, make_splits
from .resize import upscale_lr
from .synth import SynthClassSpec, SynthConfig, synth_generate, default_class_specs
from .augment import AugmentPolicy, augment
from .io import load_dataset, load_paired_archive, write_paired_archive

__all__ = [
    "ImageTile",
    "LabeledDataset",
    "PairedDataset",
    "SplitAssignment",
    "make_splits",
    "upscale_lr",
    "SynthClassSpec",
    "SynthConfig",
    "synth_generate",
    "default_class_specs",
    "AugmentPolicy",
    "augment",
    "load_dataset",
    "load_paired_archive",
    "write_paired_archive",
]
