import numpy as np
import pytest

from freqmask import transforms
from freqmask.rng import make_rng


def dft2_direct(x):
    """O(N^2) DFT oracle evaluated straight from the defining double sum."""
    h, w = x.shape
    u = np.arange(h)[:, None] * np.arange(h)[None, :]  # u*x products
    v = np.arange(w)[:, None] * np.arange(w)[None, :]
    eu = np.exp(-2j * np.pi * u / h)
    ev = np.exp(-2j * np.pi * v / w)
    return eu @ x @ ev.T


def dct2_direct(x):
    """Textbook orthonormal DCT-II basis evaluation."""
    h, w = x.shape
    out = np.zeros((h, w))
    for u in range(h):
        for v in range(w):
            cu = np.sqrt(1.0 / h) if u == 0 else np.sqrt(2.0 / h)
            cv = np.sqrt(1.0 / w) if v == 0 else np.sqrt(2.0 / w)
            basis = np.cos(np.pi * (2 * np.arange(h) + 1) * u / (2 * h))[:, None] * np.cos(
                np.pi * (2 * np.arange(w) + 1) * v / (2 * w)
            )[None, :]
            out[u, v] = cu * cv * (x * basis).sum()
    return out


def test_fft2_constant_image_is_dc_only():
    c = 0.7
    for h, w in [(4, 4), (5, 7), (16, 12)]:
        spec = transforms.fft2(np.full((h, w), c))
        assert abs(spec[0, 0] - c * h * w) < 1e-6 * h * w
        spec[0, 0] = 0
        assert np.abs(spec).max() < 1e-6 * h * w


def test_fft2_delta_is_flat():
    x = np.zeros((6, 9))
    x[0, 0] = 1.0
    assert np.abs(transforms.fft2(x) - 1.0).max() < 1e-9


def test_fft2_matches_direct_dft():
    rng = make_rng(1)
    for h, w in [(8, 8), (17, 13), (5, 32), (31, 24)]:
        x = rng.random((h, w))
        ref = dft2_direct(x)
        got = transforms.fft2(x)
        assert np.abs(got - ref).max() / np.abs(ref).max() < 1e-10


def test_parseval_on_random_image():
    rng = make_rng(2)
    x = rng.random((17, 13))
    spec = transforms.fft2(x)
    lhs = (x**2).sum()
    rhs = (np.abs(spec) ** 2).sum() / (17 * 13)
    assert abs(lhs - rhs) / lhs < 1e-4


def test_ifft2_inverts_fft2():
    rng = make_rng(3)
    x = rng.random((64, 64))
    assert np.abs(transforms.ifft2(transforms.fft2(x)) - x).max() < 1e-4
    assert np.abs(transforms.ifft2(np.zeros((8, 8), complex))).max() == 0.0


def test_hermitian_spectrum_has_tiny_imaginary_residual():
    rng = make_rng(4)
    h, w = 12, 10
    base = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
    spec = np.zeros((h, w), complex)
    for u in range(h):
        for v in range(w):
            spec[u, v] = base[u, v] + np.conj(base[(h - u) % h, (w - v) % w])
    resid = np.abs(np.fft.ifft2(spec).imag).max()
    assert resid < 1e-5


def test_fft2_hermitian_symmetry_of_real_input():
    rng = make_rng(5)
    x = rng.random((9, 14))
    spec = transforms.fft2(x)
    h, w = x.shape
    mirrored = np.conj(spec[(h - np.arange(h)) % h][:, (w - np.arange(w)) % w])
    assert np.abs(spec - mirrored).max() < 1e-6 * np.abs(spec).max()


def test_fft2_linearity():
    rng = make_rng(6)
    x, y = rng.random((11, 7)), rng.random((11, 7))
    a, b = 1.7, -0.4
    lhs = transforms.fft2(a * x + b * y)
    rhs = a * transforms.fft2(x) + b * transforms.fft2(y)
    assert np.abs(lhs - rhs).max() < 1e-5 * max(1.0, np.abs(rhs).max())


def test_dct2_constant_image_concentrates_at_origin():
    spec = transforms.dct2(np.full((8, 8), 1.5))
    assert abs(spec[0, 0]) > 1.0
    spec[0, 0] = 0
    assert np.abs(spec).max() < 1e-10


def test_dct2_roundtrip_and_oracle():
    rng = make_rng(7)
    x = rng.random((32, 32))
    assert np.abs(transforms.idct2(transforms.dct2(x)) - x).max() < 1e-4
    y = rng.random((8, 8))
    assert np.abs(transforms.dct2(y) - dct2_direct(y)).max() < 1e-6


def test_dwt2_constant_image_has_zero_details():
    coeffs = transforms.dwt2(np.full((8, 8), 0.3), levels=1)
    detail = coeffs.copy()
    detail[:4, :4] = 0
    assert np.abs(detail).max() < 1e-12


def test_dwt2_roundtrip_and_energy():
    rng = make_rng(8)
    x = rng.random((64, 64))
    coeffs = transforms.dwt2(x, levels=2)
    assert np.abs(transforms.idwt2(coeffs, levels=2) - x).max() < 1e-4
    ex = (x**2).sum()
    ec = (coeffs**2).sum()
    assert abs(ex - ec) / ex < 1e-4


def test_dwt2_rejects_nondivisible_sizes():
    with pytest.raises(ValueError):
        transforms.dwt2(np.zeros((6, 8)), levels=2)


def test_fftshift_centers_dc():
    spec = np.zeros((4, 4))
    spec[0, 0] = 1.0
    assert transforms.fftshift(spec)[2, 2] == 1.0


def test_fftshift_double_is_identity_even():
    rng = make_rng(9)
    x = rng.random((8, 8))
    assert np.array_equal(transforms.fftshift(transforms.fftshift(x)), x)


def test_fftshift_double_matches_roll_oracle_odd():
    rng = make_rng(10)
    x = rng.random((5, 5))
    twice = transforms.fftshift(transforms.fftshift(x))
    # Shifting by floor(n/2) twice moves index i to (i + n - 1) % n.
    oracle = np.empty_like(x)
    for i in range(5):
        for j in range(5):
            oracle[(i + 4) % 5, (j + 4) % 5] = x[i, j]
    assert np.array_equal(twice, oracle)


def test_roundtrips_all_kinds_on_random_sizes():
    rng = make_rng(11)
    for _ in range(20):
        h = int(rng.integers(4, 97))
        w = int(rng.integers(4, 97))
        x = rng.random((h, w))
        assert np.abs(transforms.ifft2(transforms.fft2(x)) - x).max() < 1e-4
        assert np.abs(transforms.idct2(transforms.dct2(x)) - x).max() < 1e-4
        h4, w4 = (h // 4) * 4, (w // 4) * 4
        if h4 >= 4 and w4 >= 4:
            y = x[:h4, :w4]
            assert np.abs(transforms.idwt2(transforms.dwt2(y, 2), 2) - y).max() < 1e-4


def test_dispatch_by_kind():
    rng = make_rng(12)
    x = rng.random((16, 16))
    for kind in transforms.TRANSFORM_KINDS:
        back = transforms.inverse(transforms.forward(x, kind), kind)
        assert np.abs(back - x).max() < 1e-4
    with pytest.raises(ValueError):
        transforms.forward(x, "hadamard")
