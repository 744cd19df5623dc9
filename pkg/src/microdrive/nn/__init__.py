"""Reverse-mode autodiff, layers, optimizer and checkpointing."""

from . import autodiff, checkpoint, layers, optim
from .autodiff import Var, backward, grad_check, parameter, zero_grads
from .layers import MLP, Conv2d, ConvStack, Dense, Module
from .optim import Adam, clip_grad_norm

__all__ = [
    "autodiff", "checkpoint", "layers", "optim",
    "Var", "backward", "grad_check", "parameter", "zero_grads",
    "MLP", "Conv2d", "ConvStack", "Dense", "Module",
    "Adam", "clip_grad_norm",
]
