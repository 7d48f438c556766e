"""Adam optimizer with bias correction, operating on named parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .tensor import Tensor

# StyleGAN2 configuration-F optimizer family
DEFAULT_LR = 2e-3
DEFAULT_BETA1 = 0.0
DEFAULT_BETA2 = 0.99
DEFAULT_EPS = 1e-8


@dataclass
class AdamState:
    """Per-parameter first/second moments plus a shared step counter."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params):
        state = cls()
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adam_step(params, grads, state, lr=DEFAULT_LR, beta1=DEFAULT_BETA1,
              beta2=DEFAULT_BETA2, eps=DEFAULT_EPS):
    """One in-place Adam update over every name present in ``grads``.

    Parameters without an entry in ``grads`` are left untouched (their
    moments do not advance either, matching lazy-regularization practice of
    updating only what was differentiated this step).
    """
    state.t += 1
    t = state.t
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, g in grads.items():
        p = params[name]
        gd = g.data if isinstance(g, Tensor) else np.asarray(g)
        if gd.shape != p.data.shape:
            raise DimensionError(f"adam_step: grad shape {gd.shape} vs param "
                                 f"{p.data.shape} for {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * gd
        v *= beta2
        v += (1.0 - beta2) * np.square(gd)
        p.data -= (lr / c1) * m / (np.sqrt(v / c2) + eps)
    return params, state
