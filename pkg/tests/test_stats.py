import numpy as np
import pytest
from hypothesis import given, strategies as st

from _util import ou_samples
from fdtclosure.errors import GridMismatchError, InsufficientSamplesError
from fdtclosure.stats import (PDF_EDGES, LagAccumulator, LagCurve, MomentAccumulator, PdfCurve,
                              SlowStatisticsAccumulator, StatisticsSummary, count_local_maxima,
                              energy_autocorrelation, l2_distance, lag_correlation, lag_grid,
                              lag_integral, lag_moments, moving_average, pdf_accumulate,
                              slow_statistics, trapezoid_weights)


def test_pdf_gaussian_oracle(rng):
    pdf = pdf_accumulate(rng.standard_normal(1_000_000))
    ref = PdfCurve(PDF_EDGES, np.exp(-pdf.centers ** 2 / 2) / np.sqrt(2 * np.pi), 1, 0)
    assert l2_distance(pdf, ref) < 5e-3
    assert pdf.integral() == pytest.approx(1.0, abs=1e-9)
    assert len(pdf.density) == 200


def test_pdf_overflow_and_empty(rng):
    pdf = pdf_accumulate(np.array([-6.0, 0.1, 0.2, 7.0]))
    assert pdf.overflow == 2 and pdf.count == 2
    with pytest.raises(InsufficientSamplesError):
        pdf_accumulate(np.array([]))
    with pytest.raises(InsufficientSamplesError):
        pdf_accumulate(np.array([10.0]))
    blocks = [rng.normal(size=100) for _ in range(5)]
    a = pdf_accumulate(iter(blocks))
    b = pdf_accumulate(np.concatenate(blocks))
    np.testing.assert_array_equal(a.density, b.density)


def test_moment_accumulator(rng):
    data = rng.normal(size=(1000, 3)) @ np.array([[1, 0.5, 0], [0, 1, 0.2], [0, 0, 2]]) + 5.0
    acc = MomentAccumulator(3)
    for blk in np.array_split(data, 7):
        acc.update(blk)
    mean, cov = acc.finalize()
    np.testing.assert_allclose(mean, data.mean(0), rtol=1e-12)
    np.testing.assert_allclose(cov, np.cov(data.T, bias=True), rtol=1e-10, atol=1e-12)
    assert np.array_equal(cov, cov.T)


def test_lag_moments_methods_agree(rng):
    a = rng.normal(size=(500, 3))
    b = rng.normal(size=(500, 3))
    d = lag_moments(a, b, 40, "direct")
    f = lag_moments(a, b, 40, "fft")
    np.testing.assert_allclose(d, f, atol=1e-12)
    s = 7
    np.testing.assert_allclose(d[s], (a[:-s] * b[s:]).mean(0), rtol=1e-12)
    with pytest.raises(InsufficientSamplesError):
        lag_moments(a[:10], b[:10], 20)


def test_lag_accumulator_streaming(rng):
    a = rng.normal(size=(300, 2))
    b = rng.normal(size=(300, 2))
    acc = LagAccumulator(25, 2)
    for t in range(300):
        acc.update(a[t], b[t])
    np.testing.assert_allclose(acc.finalize(), lag_moments(a, b, 25), rtol=1e-12, atol=1e-14)


def test_acf_normalization_and_symmetry(rng):
    x = ou_samples(5000, 4, 1.0, 0.05, rng)
    acf = lag_correlation(x, x, 0.05, s_max=5.0)
    assert acf.values[0] == 1.0
    y = ou_samples(5000, 4, 1.0, 0.05, rng)
    ab = lag_moments(x, y, 0)[0]
    ba = lag_moments(y, x, 0)[0]
    np.testing.assert_allclose(ab, ba)


def test_lag_grid_mismatch():
    with pytest.raises(GridMismatchError):
        lag_correlation(np.zeros((100, 1)), np.zeros((100, 1)), 0.03, s_max=1.0)
    with pytest.raises(GridMismatchError):
        l2_distance(LagCurve(lag_grid(1.0), np.zeros(21)), LagCurve(lag_grid(2.0), np.zeros(41)))
    with pytest.raises(GridMismatchError):
        l2_distance(LagCurve(lag_grid(1.0), np.zeros(21)), pdf_accumulate(np.zeros(3)))


def test_l2_examples():
    g = lag_grid(50.0, 0.05)
    zero, one = LagCurve(g, np.zeros_like(g)), LagCurve(g, np.ones_like(g))
    assert l2_distance(zero, zero) == 0.0
    assert l2_distance(zero, one) == pytest.approx(np.sqrt(50.0), rel=1e-12)
    assert trapezoid_weights(g).sum() == pytest.approx(50.0)
    assert lag_integral(one) == pytest.approx(50.0)


# values on a 0.01 lattice: squared differences never underflow
curves = st.lists(st.integers(-500, 500).map(lambda k: k / 100), min_size=11, max_size=11)


@given(curves, curves, curves)
def test_l2_is_metric(a, b, c):
    g = np.linspace(0, 0.5, 11)
    A, B, C = (LagCurve(g, np.array(v)) for v in (a, b, c))
    dab, dba = l2_distance(A, B), l2_distance(B, A)
    assert dab == dba
    assert (dab == 0) == np.array_equal(np.array(a), np.array(b))
    assert l2_distance(A, C) <= dab + l2_distance(B, C) + 1e-12


def test_energy_autocorrelation_ou(rng):
    x = ou_samples(100000, 8, 1.0, 0.05, rng)
    rho = lag_moments(x, x, 100)
    rho = rho / rho[0]
    k = energy_autocorrelation(x, rho, 0.05, s_max=5.0)
    assert np.abs(k.values - 1).max() < 0.03


def test_pooling_and_rotation(rng):
    sig = ou_samples(4000, 1, 0.5, 0.05, rng)
    copies = np.repeat(sig, 5, axis=1)
    pooled = slow_statistics(copies, 0.05, s_max=5.0)
    single = slow_statistics(sig, 0.05, s_max=5.0)
    np.testing.assert_allclose(pooled.pdf.density, single.pdf.density)
    np.testing.assert_allclose(pooled.acf.values, single.acf.values, rtol=1e-12)
    np.testing.assert_allclose(pooled.kcf.values, single.kcf.values, rtol=1e-12)
    x = ou_samples(4000, 6, 0.5, 0.05, rng)
    s1 = slow_statistics(x, 0.05, s_max=5.0)
    s2 = slow_statistics(np.roll(x, 2, axis=1), 0.05, s_max=5.0)
    for name in ("acf", "ccf", "kcf"):
        np.testing.assert_allclose(s1.curves()[name].values, s2.curves()[name].values,
                                   rtol=1e-12)
    np.testing.assert_array_equal(s1.pdf.density, s2.pdf.density)


def test_ccf_pairs_neighbours(rng):
    base = ou_samples(6000, 1, 1.0, 0.05, rng)[:, 0]
    x = np.column_stack([np.roll(base, -k) for k in range(4)])  # x_{i+1}(t) = x_i(t+0.05)
    s = slow_statistics(x, 0.05, s_max=1.0)
    # ccf at lag 0 then sees the acf at one step for three of the four pairs
    assert s.ccf.values[0] > 0.7


def test_streaming_matches_batch(rng):
    x = ou_samples(3000, 4, 1.0, 0.01, rng)
    acc = SlowStatisticsAccumulator(4, 0.01, s_max=2.0)
    for row in x:
        acc.update(row)
    a = acc.finalize()
    b = slow_statistics(x, 0.01, s_max=2.0)
    np.testing.assert_allclose(a.acf.values, b.acf.values, rtol=1e-10)
    np.testing.assert_allclose(a.ccf.values, b.ccf.values, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(a.kcf.values, b.kcf.values, rtol=1e-10)
    np.testing.assert_allclose(a.pdf.density, b.pdf.density)


def test_summary_round_trip(tmp_path, rng):
    s = slow_statistics(ou_samples(3000, 3, 1.0, 0.05, rng), 0.05, s_max=5.0)
    s.to_files(tmp_path)
    header = (tmp_path / "acf.csv").read_text().splitlines()[0]
    assert header == "s,value"
    t = StatisticsSummary.from_files(tmp_path)
    for name in ("acf", "ccf", "kcf"):
        np.testing.assert_array_equal(s.curves()[name].values, t.curves()[name].values)
    np.testing.assert_array_equal(s.pdf.density, t.pdf.density)
    assert l2_distance(s.pdf, t.pdf) == 0.0
    assert b"\r\n" not in (tmp_path / "pdf.csv").read_bytes()


def test_local_maxima():
    x = np.linspace(-5, 5, 200)
    one = np.exp(-x ** 2)
    three = np.exp(-(x + 2.5) ** 2 * 4) + np.exp(-x ** 2 * 4) + np.exp(-(x - 2.5) ** 2 * 4)
    assert count_local_maxima(one) == 1
    assert count_local_maxima(three) == 3
    assert count_local_maxima(np.ones(50)) == 0
    assert moving_average(np.ones(9), 3)[4] == pytest.approx(1.0)
