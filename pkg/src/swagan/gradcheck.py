"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tape, backward


def finite_diff_check(f, params, h=1e-4, max_coords=100, rng=None):
    """Compare backward() gradients of a scalar function against central
    differences (f(x+h) - f(x-h)) / 2h.

    ``f`` takes the parameter dict and returns a scalar Tensor; it must be
    deterministic.  For tensors larger than ``max_coords`` a random
    coordinate subset is probed.  Returns the maximum relative error
    |fd - an| / max(|fd| + |an|, 1e-5) over all probed coordinates.
    """
    rng = rng or np.random.default_rng(0)
    tape = Tape()
    with tape:
        loss = f(params)
    probed = {n: p for n, p in params.items() if p.requires_grad}
    grad_list = backward(tape, loss, wrt=list(probed.values()))
    grads = dict(zip(probed, grad_list))

    worst = 0.0
    for name, p in probed.items():
        an = grads[name].data.reshape(-1)
        flat = p.data.reshape(-1)
        n = flat.size
        idx = np.arange(n) if n <= max_coords else rng.choice(n, max_coords, replace=False)
        for i in idx:
            keep = flat[i]
            flat[i] = keep + h
            fp = float(f(params).data)
            flat[i] = keep - h
            fm = float(f(params).data)
            flat[i] = keep
            fd = (fp - fm) / (2.0 * h)
            err = abs(fd - an[i]) / max(abs(fd) + abs(an[i]), 1e-5)
            if err > worst:
                worst = err
    return worst
