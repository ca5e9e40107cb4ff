import numpy as np
import pytest

from oracles import conv2d_brute
from orik.analysis import (
    GaussianSpec,
    compose_separable,
    downsampling_branches,
    erf_from_forward,
    erf_map,
    erf_support_oracle,
    gaussian_separability_check,
    gaussian_taps,
    mad_count,
    oriented_stack,
    read_pgm,
    separable_kernel,
    verify_downsampling_decomposition,
    write_pgm,
)
from orik.blocks import NetworkConfig, init_params, zero_like_params
from orik.geometry import ConvConfig, InvalidConfigError, offsets_for
from orik.tensor import tensor_random


@pytest.mark.parametrize("op, K, Cp, expected", [
    ("dw2d", 7, None, 49), ("dw1d", 31, None, 31), ("dsc2d", 7, 512, 561),
    ("dsc1d", 31, 512, 543), ("bilinear1d", 31, None, 124), ("pw", None, 512, 512),
])
def test_mad_closed_forms(op, K, Cp, expected):
    t = mad_count(op, K, Cp, elements=10)
    assert t.per_element_mads == expected and t.total_mads == 10 * expected


def test_mad_ratios():
    assert round(49 / 31, 2) == 1.58
    assert mad_count("dw2d", 7).per_element_mads / mad_count("dw1d", 31).per_element_mads == pytest.approx(1.58, abs=0.005)
    assert mad_count("dsc2d", 7, 512).per_element_mads / mad_count("dsc1d", 31, 512).per_element_mads == pytest.approx(1.03, abs=0.005)
    assert mad_count("bilinear1d", 9).per_element_mads == 4 * mad_count("dw1d", 9).per_element_mads


def test_mad_errors():
    with pytest.raises(InvalidConfigError):
        mad_count("dw3d", 3)
    with pytest.raises(InvalidConfigError):
        mad_count("dsc1d", 31)


# -- ERF -------------------------------------------------------------------------


@pytest.mark.parametrize("theta", [0.0, 30.0, 45.0, 90.0, 157.5])
def test_erf_single_layer_support(theta):
    K, H = 9, 21
    cfg = ConvConfig(K)
    w = tensor_random((K, 2), np.float64, 1)
    m = erf_from_forward(oriented_stack([(w, np.full(2, theta), cfg)]), (1, H, H, 2))
    expected = np.zeros((H, H), bool)
    for dh, dw in offsets_for(cfg, theta).as_tuples():
        expected[H // 2 + dh, H // 2 + dw] = True
    assert np.array_equal(m > 0, expected)
    assert m.max() == 1.0 and m.min() >= 0


def test_erf_two_layer_rectangle():
    K, H = 7, 25
    cfg = ConvConfig(K)
    w = tensor_random((K, 1), np.float64, 2)
    m = erf_from_forward(oriented_stack([(w, [0.0], cfg), (w, [90.0], cfg)]), (1, H, H, 1))
    rows, cols = np.nonzero(m)
    assert rows.max() - rows.min() + 1 == K and cols.max() - cols.min() + 1 == K
    assert np.count_nonzero(m) == K * K


def test_erf_horizontal_stack_width():
    K, L, H = 5, 3, 21
    cfg = ConvConfig(K)
    w = np.abs(tensor_random((K, 1), np.float64, 3)) + 0.1
    m = erf_from_forward(oriented_stack([(w, [0.0], cfg)] * L), (1, H, H, 1))
    rows, cols = np.nonzero(m)
    assert set(rows) == {H // 2}
    assert cols.max() - cols.min() + 1 == L * (K - 1) + 1


def test_erf_support_oracle_oblique_stack():
    K, H = 7, 31
    w = tensor_random((K, 1), np.float64, 4)
    cfg = ConvConfig(K)
    layers = [(w, [30.0], cfg), (w, [120.0], cfg), (w, [75.0], cfg)]
    m = erf_from_forward(oriented_stack(layers), (1, H, H, 1))
    oracle = erf_support_oracle([offsets_for(cfg, a[0]) for _, a, _ in layers], H, H)
    # random weights can cancel at a few positions, never add support
    assert np.all(oracle[m > 0])
    assert np.count_nonzero(m) >= 0.9 * np.count_nonzero(oracle)


def test_erf_zero_weights():
    cfg = ConvConfig(5)
    m = erf_from_forward(oriented_stack([(np.zeros((5, 2)), [0.0, 45.0], cfg)]), (1, 9, 9, 2))
    assert not m.any()
    ncfg = NetworkConfig(c0=4, channels=(4, 4, 8, 8), blocks=(1, 1, 1, 1), k=(5, 5, 5, 5), d=2)
    params = zero_like_params(init_params(ncfg, 0))
    assert not erf_map(ncfg, n_samples=1, input_size=32, params=params).any()


def test_network_erf_normalized():
    ncfg = NetworkConfig(c0=4, channels=(4, 4, 8, 8), blocks=(1, 1, 1, 1), k=(5, 5, 5, 5), d=2)
    m = erf_map(ncfg, 0, 2, 32, 0)
    assert m.shape == (32, 32) and m.max() == 1.0 and m.min() >= 0


def test_pgm_round_trip(tmp_path):
    m = np.array([[0.0, 0.5], [1.0, 0.25], [0.0, 0.0]])
    p = tmp_path / "m.pgm"
    write_pgm(m, p)
    assert p.read_bytes().startswith(b"P5\n2 3\n255\n")
    data, maxval = read_pgm(p)
    assert maxval == 255 and data.tolist() == [[0, 128], [255, 64], [0, 0]]
    write_pgm(np.zeros((2, 2)), p)
    assert read_pgm(p)[0].max() == 0


# -- downsampling decomposition ---------------------------------------------------


def test_branch_weights_by_offset():
    w = np.arange(8.0).reshape(2, 2, 2)
    (wd, thd, cd), (wa, tha, ca) = downsampling_branches(w)
    for wb, th, cfg in ((wd, thd, cd), (wa, tha, ca)):
        for k, (dh, dw) in enumerate(offsets_for(cfg, th).as_tuples()):
            assert np.array_equal(wb[k], w[dh, dw])
    assert sorted(offsets_for(cd, thd).as_tuples()) == [(0, 0), (1, 1)]
    assert sorted(offsets_for(ca, tha).as_tuples()) == [(0, 1), (1, 0)]


def test_decomposition_random():
    for s in range(3):
        w = tensor_random((2, 2, 4), np.float64, 50 + s)
        assert verify_downsampling_decomposition(w, seed_count=10) <= 1e-12
        assert verify_downsampling_decomposition(w.astype(np.float32), seed_count=10, dtype=np.float32) <= 1e-6


def test_decomposition_trivial_cases():
    assert verify_downsampling_decomposition(np.zeros((2, 2, 3)), seed_count=2, shape=(1, 6, 6, 3)) == 0.0
    w = tensor_random((2, 2, 3), np.float64, 1)
    w[0, 1] = w[1, 0] = 0
    x = tensor_random((1, 6, 6, 3), np.float64, 2)
    _, (wa, tha, ca) = downsampling_branches(w)
    assert not wa.any()
    assert verify_downsampling_decomposition(w, x) <= 1e-15


def test_decomposition_against_brute():
    w = tensor_random((2, 2, 2), np.float64, 7)
    x = tensor_random((1, 4, 6, 2), np.float64, 8)
    from orik.analysis import downsample_as_oriented
    assert np.allclose(downsample_as_oriented(x, w), conv2d_brute(x, w, 2, 0), atol=1e-14)


def test_decomposition_errors():
    with pytest.raises(ValueError):
        verify_downsampling_decomposition(np.zeros((3, 3, 2)))
    with pytest.raises(ValueError):
        verify_downsampling_decomposition(np.zeros((2, 2, 2)), np.zeros((1, 5, 6, 2)))
    with pytest.raises(ValueError):
        verify_downsampling_decomposition(np.zeros((2, 2, 2)), np.zeros((1, 6, 6, 3)))


# -- Gaussian ----------------------------------------------------------------------


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("K", [5, 7, 9])
def test_gaussian_separable(sigma, K):
    x = tensor_random((1, 16, 16, 2), np.float64, 3)
    assert gaussian_separability_check(GaussianSpec(sigma, sigma, K), x) <= 1e-12


def test_gaussian_taps_normalized_and_delta_limit():
    for s in (0.3, 1.0, 4.0):
        assert gaussian_taps(s, 7).sum() == pytest.approx(1.0, abs=1e-15)
    g = gaussian_taps(1e-3, 5)
    assert g.tolist() == [0, 0, 1, 0, 0]
    x = tensor_random((1, 8, 8, 2), np.float64, 1)
    assert np.array_equal(compose_separable(x, g, g), x)


def test_gaussian_spec_validation():
    with pytest.raises(InvalidConfigError):
        GaussianSpec(0.0, 1.0, 5)
    with pytest.raises(InvalidConfigError):
        GaussianSpec(1.0, 1.0, 4)


def test_separable_kernel_orientation():
    u = np.array([1.0, 2.0, 3.0])
    v = np.array([5.0, 7.0, 11.0])
    x = tensor_random((1, 7, 7, 1), np.float64, 2)
    k2 = separable_kernel(u, v)[:, :, None]
    assert np.allclose(compose_separable(x, v, u), conv2d_brute(x, k2, 1, 1), atol=1e-13)
