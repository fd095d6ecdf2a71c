from .blocks import (
    BlockSpec,
    build_classifier,
    build_conv_block,
    build_dense_block,
    build_inception_block,
    build_stem,
    build_transition,
)
from .checkpoint import CheckpointError, load_weights, save_weights
from .graph import LayerGraph, ParamCensus
from .zoo import (
    DENSENET121_PARAMS_IMAGENET,
    NEMANET_TARGET_CENSUS,
    build_densenet121,
    build_model,
    build_nemanet,
)

__all__ = [
    "BlockSpec",
    "CheckpointError",
    "DENSENET121_PARAMS_IMAGENET",
    "LayerGraph",
    "NEMANET_TARGET_CENSUS",
    "ParamCensus",
    "build_classifier",
    "build_conv_block",
    "build_dense_block",
    "build_densenet121",
    "build_inception_block",
    "build_model",
    "build_nemanet",
    "build_stem",
    "build_transition",
    "load_weights",
    "save_weights",
]
