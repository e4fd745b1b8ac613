"""Predictive-coding network engine: python bindings over the C++ core."""

from ._pcn import (
    Model,
    batchnorm_eval,
    batchnorm_train,
    conv2d,
    conv_transpose2d,
    global_avg_pool,
    gradcheck_ops,
    linear,
    maxpool2,
    param_count,
    pc_block_forward,
    relu,
    set_num_threads,
    softmax_cross_entropy,
    synthetic_dataset,
)

__all__ = [
    "Model",
    "batchnorm_eval",
    "batchnorm_train",
    "conv2d",
    "conv_transpose2d",
    "global_avg_pool",
    "gradcheck_ops",
    "linear",
    "maxpool2",
    "param_count",
    "pc_block_forward",
    "relu",
    "set_num_threads",
    "softmax_cross_entropy",
    "synthetic_dataset",
]
