"""Dense f64 numeric kernel: layers with explicit forward/backward passes,
an adaptive-moment optimizer, a finite-difference gradient checker, and a
binary checkpoint format."""

from .layers import (
    Params,
    attention_backward,
    attention_forward,
    attention_forward_ctx,
    ego_attention_forward,
    gru_backward,
    gru_forward,
    gru_forward_ctx,
    gru_init,
    linear_backward,
    linear_forward,
    linear_forward_ctx,
    linear_init,
    attention_init,
    mse_loss_backward,
    softmax,
)
from .optim import Adam, optimizer_step
from .gradcheck import grad_check
from .checkpoint import load_checkpoint, save_checkpoint, CheckpointError

__all__ = [
    "Params",
    "linear_init",
    "linear_forward",
    "linear_forward_ctx",
    "linear_backward",
    "gru_init",
    "gru_forward",
    "gru_forward_ctx",
    "gru_backward",
    "attention_init",
    "ego_attention_forward",
    "attention_forward",
    "attention_forward_ctx",
    "attention_backward",
    "mse_loss_backward",
    "softmax",
    "Adam",
    "optimizer_step",
    "grad_check",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
]
