"""Adam / AdamW steps over lists of parameter tensors, plus the LR ramp."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerState:
    """Moment buffers and hyperparameters for Adam-family updates."""

    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def _ensure_buffers(self, params):
        if not self.m:
            self.m = [np.zeros_like(p.data) for p in params]
            self.v = [np.zeros_like(p.data) for p in params]
        for buf, p in zip(self.m, params):
            if buf.shape != p.data.shape:
                raise ValueError(
                    f"moment buffer shape {buf.shape} != param shape {p.data.shape}"
                )


def adam_step(state: OptimizerState, params, grads) -> None:
    """Adam with bias correction; weight decay coupled into the gradient."""
    state._ensure_buffers(params)
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        mhat = m / bc1
        vhat = v / bc2
        p.data -= state.lr * mhat / (np.sqrt(vhat) + state.eps)


def adamw_step(state: OptimizerState, params, grads) -> None:
    """Adam with decoupled weight decay applied directly to the parameters."""
    state._ensure_buffers(params)
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if state.weight_decay:
            p.data -= state.lr * state.weight_decay * p.data
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        mhat = m / bc1
        vhat = v / bc2
        p.data -= state.lr * mhat / (np.sqrt(vhat) + state.eps)


def lr_schedule(step: int, total_steps: int, lr_start: float, lr_end: float) -> float:
    """Linear interpolation from lr_start at step 0 to lr_end at total_steps."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if step == 0 or total_steps == 0:
        return lr_start
    if step == total_steps:
        return lr_end
    frac = step / total_steps
    return lr_start + (lr_end - lr_start) * frac
