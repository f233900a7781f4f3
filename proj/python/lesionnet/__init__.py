"""Multi-scale skin lesion classifier.

Python surface of the C++ core: eager tensor ops, the dihedral transform
group, tie-aware ROC-AUC, and the file-level pipeline (synthetic data
generation, two-stage training, TTA prediction, geometric ensembling,
evaluation).
"""

from lesionnet._core import (
    __version__,
    accuracy,
    apply_dihedral,
    center_crop,
    class_names,
    conv2d,
    cross_entropy,
    default_config,
    dense,
    dihedral_compose,
    dihedral_inverse,
    dihedral_name,
    dihedral_names,
    ensemble,
    evaluate,
    global_avg_pool,
    maxpool2,
    predict,
    predict_image,
    relu,
    resize_bilinear,
    roc_auc,
    softmax,
    synth_dataset,
    synth_image,
    train,
)

__all__ = [
    "__version__",
    "accuracy",
    "apply_dihedral",
    "center_crop",
    "class_names",
    "conv2d",
    "cross_entropy",
    "default_config",
    "dense",
    "dihedral_compose",
    "dihedral_inverse",
    "dihedral_name",
    "dihedral_names",
    "ensemble",
    "evaluate",
    "global_avg_pool",
    "maxpool2",
    "predict",
    "predict_image",
    "relu",
    "resize_bilinear",
    "roc_auc",
    "softmax",
    "synth_dataset",
    "synth_image",
    "train",
]
