"""numba kernels for skip-gram negative sampling.

All randomness comes from a splitmix64 stream held in a one-element uint64
array so that training is bitwise reproducible for a fixed seed.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def next_u64(state):
    state[0] = state[0] + _GOLDEN
    return _mix(state[0])


@njit(cache=True)
def next_uniform(state):
    return np.float64(next_u64(state) >> _S11) * _INV53


@njit(cache=True)
def sample_index(cum, state):
    """Inverse-CDF draw from a cumulative distribution (last entry == 1)."""
    u = next_uniform(state)
    lo = 0
    hi = cum.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def draw_many(cum, n, state):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = sample_index(cum, state)
    return out


@njit(cache=True)
def fill_rows(seed, keys, dim, scale, out):
    """Row r of ``out`` gets uniform(-scale, scale) values keyed by (seed, keys[r], j)."""
    s = np.uint64(seed) * _M1
    for r in range(keys.shape[0]):
        base = _mix(s ^ (np.uint64(keys[r]) * _M2 + _GOLDEN))
        for j in range(dim):
            z = _mix(base + np.uint64(j + 1) * _GOLDEN)
            u = np.float64(z >> _S11) * _INV53
            out[r, j] = (2.0 * u - 1.0) * scale


@njit(cache=True)
def _log_sigmoid(x):
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@njit(cache=True)
def update_pair(syn0, syn1, rows, context, negs, lr, hidden, grad):
    """One positive + negatives update; returns the logistic loss.

    ``rows`` are the input rows composing the centre word (their mean is the
    hidden vector). Output rows are updated sequentially as in word2vec;
    the input gradient is accumulated against pre-update output rows.
    """
    dim = syn0.shape[1]
    nrows = rows.shape[0]
    for j in range(dim):
        hidden[j] = 0.0
        grad[j] = 0.0
    for k in range(nrows):
        r = rows[k]
        for j in range(dim):
            hidden[j] += syn0[r, j]
    for j in range(dim):
        hidden[j] /= nrows
    loss = 0.0
    for t in range(negs.shape[0] + 1):
        if t == 0:
            target = context
            label = 1.0
        else:
            target = negs[t - 1]
            label = 0.0
            if target == context:
                continue
        f = 0.0
        for j in range(dim):
            f += hidden[j] * syn1[target, j]
        if label == 1.0:
            loss -= _log_sigmoid(f)
            g = 1.0 - 1.0 / (1.0 + np.exp(-f))
        else:
            loss -= _log_sigmoid(-f)
            g = -1.0 / (1.0 + np.exp(-f))
        for j in range(dim):
            grad[j] += g * syn1[target, j]
            syn1[target, j] += lr * g * hidden[j]
    scale = lr / nrows
    for k in range(nrows):
        r = rows[k]
        for j in range(dim):
            syn0[r, j] += scale * grad[j]
    return loss


@njit(cache=True)
def train_epochs(
    syn0, syn1, corpus, sent_ptr, sub_ptr, sub_idx, cum,
    window, negatives, epochs, lr0, state,
):
    """Run all epochs; returns the mean per-update loss of each epoch."""
    dim = syn0.shape[1]
    hidden = np.empty(dim)
    grad = np.empty(dim)
    negs = np.empty(negatives, dtype=np.int64)
    total = np.float64(corpus.shape[0]) * epochs
    processed = 0
    losses = np.zeros(epochs)
    nsent = sent_ptr.shape[0] - 1
    for ep in range(epochs):
        loss_sum = 0.0
        n_updates = 0
        for s in range(nsent):
            start = sent_ptr[s]
            stop = sent_ptr[s + 1]
            for i in range(start, stop):
                lr = lr0 * (1.0 - 0.99 * processed / total)
                processed += 1
                center = corpus[i]
                rows = sub_idx[sub_ptr[center]:sub_ptr[center + 1]]
                b = 1 + np.int64(next_u64(state) % np.uint64(window))
                lo = max(start, i - b)
                hi = min(stop, i + b + 1)
                for c in range(lo, hi):
                    if c == i:
                        continue
                    for k in range(negatives):
                        negs[k] = sample_index(cum, state)
                    loss_sum += update_pair(syn0, syn1, rows, corpus[c], negs, lr, hidden, grad)
                    n_updates += 1
        losses[ep] = loss_sum / max(n_updates, 1)
    return losses
