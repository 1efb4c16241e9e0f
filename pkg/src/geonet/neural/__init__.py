"""Minimal numpy ConvNet kernel with manual backpropagation."""
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .functional import (
    batchnorm_backward,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    linear_backward,
    linear_forward,
    maxpool2x2_backward,
    maxpool2x2_forward,
    relu_backward,
    relu_forward,
    softmax,
    softmax_xent,
    sgd_step,
)
from .gradcheck import GradCheckReport, grad_check
from .layers import BatchNorm2d, Conv2d, GlobalAvgPool, Linear, MaxPool2x2, ReLU
from .model import DEFAULT_ARCH, SIX_LAYER_ARCH, GeoNet, parse_arch
