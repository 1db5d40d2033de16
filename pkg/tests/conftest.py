import numpy as np
import pytest

from deftan2 import tensor as T
from deftan2.tensor import Tensor


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def central_diff(fn, param, index, eps=1e-5):
    """Central finite difference of scalar fn() w.r.t. param.data[index]."""
    base = param.data.copy()
    param.data = base.copy()
    param.data[index] += eps
    up = fn()
    param.data = base.copy()
    param.data[index] -= eps
    down = fn()
    param.data = base
    return (up - down) / (2.0 * eps)


def check_gradients(build_loss, params, rel_tol=1e-4, eps=1e-5, samples=None,
                    rng=None):
    """Compare analytic grads of scalar build_loss() against central diffs.

    `params` are the leaf tensors to differentiate; `samples` limits the
    number of entries probed per tensor (all when None).
    """
    for p in params:
        p.grad = None
    loss = build_loss()
    loss.backward()
    worst = 0.0
    for p in params:
        assert p.grad is not None, "no gradient reached a parameter"
        flat_n = p.data.size
        if samples is None or samples >= flat_n:
            picks = range(flat_n)
        else:
            picks = rng.choice(flat_n, size=samples, replace=False)
        for flat_idx in picks:
            idx = np.unravel_index(flat_idx, p.data.shape)
            fd = central_diff(lambda: build_loss().item(), p, idx, eps)
            an = p.grad[idx]
            denom = max(abs(fd), abs(an))
            if denom < 1e-10:
                continue
            rel = abs(fd - an) / denom
            worst = max(worst, rel)
            assert rel < rel_tol, f"grad mismatch at {idx}: fd={fd} analytic={an} rel={rel}"
    return worst
