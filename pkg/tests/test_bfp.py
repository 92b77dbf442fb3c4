"""Block floating point tests.

Oracle for the exponent: exact integer scan (2^e <= |v| < 2^(e+1)) instead of
log2 arithmetic.  Frozen worked examples pin the quantizer's conventions.
"""

import math
import random

import numpy as np
import pytest

from rnsaccel.bfp import (
    BfpGroup,
    dequantize_group,
    dequantize_matrix,
    output_exponent,
    quantization_error_bound,
    quantize_group,
    quantize_matrix,
)


def exponent_oracle(v: float) -> int:
    """floor(log2|v|) by exact comparisons, no floating log."""
    assert v != 0
    v = abs(v)
    e = 0
    while math.ldexp(1.0, e + 1) <= v:
        e += 1
    while math.ldexp(1.0, e) > v:
        e -= 1
    return e


def test_worked_example():
    g = quantize_group([1.5, 0.25, -3.0], 4)
    assert g.shared_exponent == 1
    assert g.mantissas.tolist() == [6, 1, -12]
    np.testing.assert_array_equal(dequantize_group(g), [1.5, 0.25, -3.0])


def test_single_power_of_two_round_trips_exactly():
    for b in (1, 2, 4, 8):
        g = quantize_group([1.0], b)
        assert g.shared_exponent == 0
        assert g.mantissas.tolist() == [1 << (b - 1)]
        np.testing.assert_array_equal(dequantize_group(g), [1.0])


def test_zero_group_convention():
    g = quantize_group([0.0, 0.0, -0.0], 4)
    assert g.shared_exponent == 0
    assert g.mantissas.tolist() == [0, 0, 0]


def test_shared_exponent_matches_oracle():
    rng = random.Random(42)
    for _ in range(300):
        vals = [rng.uniform(-50, 50) * 10 ** rng.randint(-6, 6) for _ in range(8)]
        g = quantize_group(vals, 5)
        assert g.shared_exponent == max(exponent_oracle(v) for v in vals if v != 0)


def test_max_element_normalizes_into_top_octave():
    rng = random.Random(0)
    for b in (2, 3, 4, 6, 8):
        for _ in range(200):
            vals = [rng.uniform(-8, 8) for _ in range(6)]
            if all(v == 0 for v in vals):
                continue
            g = quantize_group(vals, b)
            top = int(np.abs(g.mantissas).max())
            assert (1 << (b - 1)) <= top <= (1 << b) - 1


def test_mantissas_within_width():
    rng = random.Random(9)
    for rounding in ("truncate", "nearest_even"):
        for _ in range(200):
            b = rng.randint(1, 10)
            vals = [rng.uniform(-1e3, 1e3) for _ in range(rng.randint(1, 32))]
            g = quantize_group(vals, b, rounding)
            assert int(np.abs(g.mantissas).max()) <= (1 << b) - 1


def test_truncation_error_below_bound():
    rng = random.Random(5)
    for _ in range(300):
        b = rng.randint(2, 9)
        vals = np.array([rng.uniform(-100, 100) for _ in range(10)])
        g = quantize_group(vals, b)
        err = np.abs(vals - dequantize_group(g))
        bound = quantization_error_bound(g)
        assert bound == g.scale
        assert (err < bound).all()


def test_truncation_moves_toward_zero():
    rng = random.Random(11)
    for _ in range(200):
        vals = np.array([rng.uniform(-100, 100) for _ in range(8)])
        g = quantize_group(vals, 4)
        dq = dequantize_group(g)
        assert (np.abs(dq) <= np.abs(vals) + 1e-12).all()
        assert (np.sign(dq) * np.sign(vals) >= 0).all()


def test_nearest_even_beats_or_ties_truncation_error():
    rng = random.Random(13)
    worse = 0
    for _ in range(200):
        vals = np.array([rng.uniform(-100, 100) for _ in range(16)])
        t = dequantize_group(quantize_group(vals, 4, "truncate"))
        n = dequantize_group(quantize_group(vals, 4, "nearest_even"))
        if np.abs(vals - n).sum() > np.abs(vals - t).sum() + 1e-12:
            worse += 1
    assert worse == 0


def test_nearest_even_clips_top_value():
    # 1.99 / scale rounds up to 16 for b=4 and must clip at 15
    g = quantize_group([1.99], 4, "nearest_even")
    assert g.mantissas.tolist() == [15]


def test_error_bound_examples():
    g = BfpGroup(np.array([1], dtype=np.int64), 1, 4)
    assert quantization_error_bound(g) == 0.25
    g = BfpGroup(np.array([1], dtype=np.int64), 0, 1)
    assert quantization_error_bound(g) == 1.0


def test_output_exponent():
    a = quantize_group([1.5, 0.25, -3.0], 4)  # e = 1
    b = quantize_group([1.1, 0.9, 1.9], 4)    # e = 0
    assert output_exponent(a, a) == 1 + 1 - 6 == -4
    assert output_exponent(a, b) == 1 + 0 - 6
    with pytest.raises(ValueError):
        output_exponent(a, quantize_group([1.0], 5))


def test_dot_product_reconstruction_identity():
    rng = random.Random(21)
    for _ in range(200):
        n = rng.randint(1, 16)
        av = [rng.uniform(-10, 10) for _ in range(n)]
        bv = [rng.uniform(-10, 10) for _ in range(n)]
        a = quantize_group(av, 4)
        b = quantize_group(bv, 4)
        int_dot = int(np.dot(a.mantissas, b.mantissas))
        real = float(np.dot(dequantize_group(a), dequantize_group(b)))
        assert math.isclose(
            int_dot * math.ldexp(1.0, output_exponent(a, b)), real, rel_tol=0, abs_tol=1e-9
        )


def test_dot_range_stays_within_budget():
    # |sum m_a m_b| < 2^(2(b+1) + log2 g - 1) for g a power of two
    rng = random.Random(33)
    for b, g in [(3, 16), (4, 16), (4, 8), (2, 32)]:
        budget = 1 << (2 * (b + 1) + int(math.log2(g)) - 1)
        for _ in range(100):
            a = quantize_group([rng.uniform(-50, 50) for _ in range(g)], b)
            c = quantize_group([rng.uniform(-50, 50) for _ in range(g)], b)
            assert abs(int(np.dot(a.mantissas, c.mantissas))) < budget


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        quantize_group([1.0, float("nan")], 4)
    with pytest.raises(ValueError):
        quantize_matrix(np.array([[np.inf, 1.0]]), 4, 2, axis=1)


def test_matrix_grouping_matches_groupwise_quantization():
    rng = np.random.default_rng(42)
    x = rng.normal(size=(7, 21)) * 3
    bm = quantize_matrix(x, 4, 8, axis=1)
    assert bm.shape == (7, 21)
    assert bm.n_groups == 3
    for i in range(7):
        for t in range(3):
            seg = x[i, t * 8:(t + 1) * 8]
            seg = np.pad(seg, (0, 8 - len(seg)))
            ref = quantize_group(seg, 4)
            assert bm.exponents[i, t] == ref.shared_exponent
            np.testing.assert_array_equal(bm.mantissas[i, t], ref.mantissas)
    back = dequantize_matrix(bm)
    assert back.shape == x.shape
    assert (np.abs(back - x) < np.ldexp(1.0, bm.exponents - 3).max()).all()


def test_matrix_grouping_axis0():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(10, 5))
    bm = quantize_matrix(x, 4, 4, axis=0)
    assert bm.mantissas.shape == (3, 4, 5)
    for j in range(5):
        for t in range(3):
            seg = x[t * 4:(t + 1) * 4, j]
            seg = np.pad(seg, (0, 4 - len(seg)))
            ref = quantize_group(seg, 4)
            assert bm.exponents[t, j] == ref.shared_exponent
            np.testing.assert_array_equal(bm.mantissas[t, :, j], ref.mantissas)
    back = dequantize_matrix(bm)
    assert back.shape == x.shape
