import numpy as np
import pytest

from fdrelay import kernels
from fdrelay._pykernels import feedback_detect as py_feedback
from fdrelay.modem import qam, quantize_labels

backends = ["python"]
try:
    kernels.get_backend("cython")
    backends.append("cython")
except ImportError:
    pass


def _problem(rng, T=4, n=60, K=3, gain=0.3):
    base = rng.standard_normal((T, n, K)) + 1j * rng.standard_normal((T, n, K))
    coupling = gain * (rng.standard_normal((T, K, K)) + 1j * rng.standard_normal((T, K, K)))
    return base, coupling


def _loop_reference(base, coupling, delay, c):
    # plain per-sample loop using the full-constellation quantizer
    T, n, K = base.shape
    labels = np.zeros((T, n, K), dtype=int)
    for t in range(T):
        xhat = np.zeros((n, K), complex)
        for i in range(n):
            z = base[t, i].copy()
            if i >= delay:
                z += coupling[t] @ xhat[i - delay]
            labels[t, i] = quantize_labels(z, c)
            xhat[i] = c.points[labels[t, i]]
    return labels


@pytest.mark.parametrize("backend", backends)
@pytest.mark.parametrize("delay", [1, 3])
def test_feedback_detect_matches_loop(backend, delay, rng):
    c = qam(16)
    base, coupling = _problem(rng)
    mod = kernels.get_backend(backend)
    labels, symbols = mod.feedback_detect(base, coupling, delay, np.ascontiguousarray(c.axis_levels))
    assert np.array_equal(labels, _loop_reference(base, coupling, delay, c))
    assert np.allclose(symbols, c.points[labels])


@pytest.mark.parametrize("backend", backends)
def test_quantize_labels_backends(backend, rng):
    c = qam(64)
    y = rng.standard_normal(5000) + 1j * rng.standard_normal(5000)
    out = kernels.get_backend(backend).quantize_labels(y, np.ascontiguousarray(c.axis_levels))
    assert np.array_equal(out, quantize_labels(y, c))


def test_backends_agree(rng):
    if "cython" not in backends:
        pytest.skip("compiled kernels not built")
    c = qam(4)
    base, coupling = _problem(rng, T=8, n=200, K=5)
    a = kernels.get_backend("cython").feedback_detect(base, coupling, 2, np.ascontiguousarray(c.axis_levels))
    b = py_feedback(base, coupling, 2, c.axis_levels)
    assert np.array_equal(a[0], b[0])


def test_zero_coupling_is_plain_quantization(rng):
    c = qam(16)
    base, coupling = _problem(rng)
    labels, _ = kernels.feedback_detect(base, np.zeros_like(coupling), 1, c.axis_levels)
    assert np.array_equal(labels, quantize_labels(base, c))


def test_rejects_bad_shapes(rng):
    base, coupling = _problem(rng)
    with pytest.raises(ValueError):
        kernels.feedback_detect(base, coupling[:, :2, :2], 1, qam(4).axis_levels)
    with pytest.raises(ValueError):
        kernels.feedback_detect(base, coupling, 0, qam(4).axis_levels)
