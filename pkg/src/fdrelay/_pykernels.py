"""Numpy reference implementations of the hot loops.

Both functions must agree bit-for-bit with their compiled twins in
``_ckernels.pyx``: per-axis nearest level, first minimum wins.
"""
import numpy as np


def _nearest(v, levels):
    return np.argmin((v[..., None] - levels) ** 2, axis=-1)


def quantize_labels(y, levels):
    y = np.asarray(y, dtype=np.complex128)
    return _nearest(y.real, levels) * len(levels) + _nearest(y.imag, levels)


def feedback_detect(base, coupling, delay, levels):
    base = np.asarray(base, dtype=np.complex128)
    T, n, K = base.shape
    side = len(levels)
    labels = np.empty((T, n, K), dtype=np.int64)
    symbols = np.empty((T, n, K), dtype=np.complex128)
    for i in range(n):
        z = base[:, i, :]
        if i >= delay:
            z = z + np.einsum("tkj,tj->tk", coupling, symbols[:, i - delay, :])
        li = _nearest(z.real, levels)
        lq = _nearest(z.imag, levels)
        labels[:, i, :] = li * side + lq
        symbols[:, i, :] = levels[li] + 1j * levels[lq]
    return labels, symbols
