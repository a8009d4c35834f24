import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdrelay.modem import (SUPPORTED_ORDERS, count_errors, demap, label_bit_errors, labels_to_bits, map_bits,
                           qam, quantize, quantize_labels)


def test_qpsk_zero_label_is_upper_right():
    c = qam(4)
    assert map_bits([0, 0], c)[0] == pytest.approx((1 + 1j) / np.sqrt(2), abs=1e-15)


def test_16qam_corner_by_enumeration():
    # independent construction: odd-integer grid, normalized by its brute-force mean energy
    grid = np.array([a + 1j * b for a in (-3, -1, 1, 3) for b in (-3, -1, 1, 3)])
    norm = np.sqrt(np.mean(np.abs(grid) ** 2))
    assert norm == pytest.approx(np.sqrt(10))
    assert map_bits([0, 0, 0, 0], qam(16))[0] == pytest.approx((3 + 3j) / norm, abs=1e-15)


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_unit_energy_and_symmetry(order):
    c = qam(order)
    pts = c.points
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-14)
    assert len(np.unique(np.round(pts, 12))) == order
    as_set = {complex(np.round(p, 12)) for p in pts}
    assert {complex(np.round(-p, 12)) for p in pts} == as_set
    assert {complex(np.round(np.conj(p), 12)) for p in pts} == as_set


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_gray_neighbours_differ_in_one_bit(order):
    c = qam(order)
    step = 2 / np.sqrt(2 * (order - 1) / 3)
    for a, b in itertools.combinations(range(order), 2):
        if np.isclose(abs(c.points[a] - c.points[b]), step):
            assert label_bit_errors([a], [b]) == 1


def test_map_bits_rejects_partial_symbol():
    with pytest.raises(ValueError):
        map_bits([0, 1, 1], qam(4))


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_round_trip_every_label(order):
    c = qam(order)
    bits = labels_to_bits(np.arange(order), c)
    assert np.array_equal(demap(map_bits(bits, c), c), bits)


def test_quantize_far_input():
    assert quantize([10 + 0.1j], qam(4))[0] == pytest.approx((1 + 1j) / np.sqrt(2))


def test_quantize_tie_break_smallest_index():
    for order in SUPPORTED_ORDERS:
        c = qam(order)
        # origin is equidistant from the four inner points; smallest label wins
        inner = np.flatnonzero(np.isclose(np.abs(c.points), np.min(np.abs(c.points))))
        assert quantize_labels(0j, c) == inner.min()
        assert quantize_labels(np.zeros(3, complex), c).tolist() == [inner.min()] * 3


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_quantizer_matches_exhaustive_search(order, rng):
    c = qam(order)
    y = 1.5 * (rng.standard_normal(10_000) + 1j * rng.standard_normal(10_000))
    brute = np.argmin(np.abs(y[:, None] - c.points[None, :]), axis=1)
    assert np.array_equal(quantize_labels(y, c), brute)


@given(st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
@settings(max_examples=200, deadline=None)
def test_quantize_idempotent(ys):
    c = qam(16)
    q = quantize(np.array(ys), c)
    assert np.array_equal(quantize(q, c), q)


def test_count_errors():
    tx = np.zeros(12, dtype=int)
    assert count_errors(tx, tx, 4) == (0, 0)
    rx = tx.copy()
    rx[5] = 1
    assert count_errors(tx, rx, 4) == (1, 1)
    assert count_errors(tx, 1 - tx, 4) == (12, 3)
    with pytest.raises(ValueError):
        count_errors(tx, tx[:8], 4)


def test_label_bit_errors_matches_bitwise_count(rng):
    c = qam(64)
    a = rng.integers(0, 64, 500)
    b = rng.integers(0, 64, 500)
    assert label_bit_errors(a, b) == count_errors(labels_to_bits(a, c), labels_to_bits(b, c), 6)[0]
