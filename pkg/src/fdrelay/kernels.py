"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``FDRELAY_PURE_PYTHON=1``
to force the numpy fallback.

``feedback_detect(base, coupling, delay, levels)``
    Sequential relay detection with loopback feedback.  For every block ``t``
    and slot ``i``::

        z[t, i] = base[t, i] + coupling[t] @ xhat[t, i - delay]   (i >= delay)
        xhat[t, i] = Q(z[t, i])

    ``base`` is ``(T, n, K)``, ``coupling`` is ``(T, K, K)``, ``levels`` are
    the per-axis amplitudes in label order.  Returns ``(labels, symbols)``.

``quantize_labels(y, levels)``
    Per-sample nearest-point labels for a 1-D complex array.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("FDRELAY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass


def get_backend(name=None):
    """Return the kernel module ``name`` ('cython' or 'python'); default: active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def feedback_detect(base, coupling, delay, levels):
    base = np.ascontiguousarray(base, dtype=np.complex128)
    coupling = np.ascontiguousarray(coupling, dtype=np.complex128)
    levels = np.ascontiguousarray(levels, dtype=np.float64)
    if base.ndim != 3 or coupling.shape != (base.shape[0], base.shape[2], base.shape[2]):
        raise ValueError(f"shape mismatch: base {base.shape}, coupling {coupling.shape}")
    if delay < 1:
        raise ValueError("delay must be >= 1")
    return _impl.feedback_detect(base, coupling, int(delay), levels)


def quantize_labels(y, levels):
    y = np.asarray(y, dtype=np.complex128)
    out = _impl.quantize_labels(np.ascontiguousarray(y.ravel()), np.ascontiguousarray(levels, dtype=np.float64))
    return out.reshape(y.shape)
