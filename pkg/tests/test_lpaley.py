import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgweyl.lpaley import (SeparableSymbol, besov_norm, block_norm_table, cutoff,
                           dyadic_partition, fit_wing_slopes, kernel_rows, lp_block,
                           sobolev_norm, write_table_csv)
from sgweyl.symbols import mollify, weierstrass

TWO_PI = 2 * np.pi


def freq(n):
    return np.fft.fftfreq(n, 1.0 / n)


def xgrid(n):
    return np.arange(n) * TWO_PI / n


# partition

def test_cutoff_profile():
    r = np.linspace(0, 2, 2001)
    c = cutoff(r)
    assert np.all(c[r <= 0.5] == 1) and np.all(c[r >= 1] == 0)
    assert np.all(np.diff(c) <= 0)


@pytest.mark.parametrize("J", range(11))
def test_partition_invariants(J):
    xi = freq(2**14)
    part = dyadic_partition(J, xi)
    band = np.abs(xi) <= 2**J
    assert np.abs(part.phi.sum(0)[band] - 1).max() < 1e-12
    sym = dyadic_partition(J, np.arange(-2**13 + 1, 2**13)).phi
    assert np.array_equal(sym, sym[:, ::-1])
    assert np.all(part.phi[0][np.abs(xi) > 2] == 0)
    for j in range(1, J + 1):
        out = (np.abs(xi) < 2 ** (j - 1)) | (np.abs(xi) > 2 ** (j + 1))
        assert np.all(part.phi[j][out] == 0)


def test_separated_bands_disjoint():
    part = dyadic_partition(6, freq(4096))
    assert not np.any(part.phi[1] * part.phi[4])


def test_derivative_bound_uniform():
    ratios = []
    for j in range(1, 11):
        xi = np.linspace(2 ** (j - 1), 2 ** (j + 1), 20001)
        phi = cutoff(xi / 2 ** (j + 1)) - cutoff(xi / 2**j)
        ratios.append(np.abs(np.gradient(phi, xi)).max() * 2**j)
    assert max(ratios) / min(ratios) < 1.01


def test_coarse_grid_rejected():
    with pytest.raises(ValueError):
        dyadic_partition(10, freq(512))


# symbol blocks and kernels

def test_constant_symbol_block_is_fourier_multiplier():
    n = 128
    part = dyadic_partition(5, freq(n))
    sym = SeparableSymbol((np.ones(n),), (np.ones(n),))
    F = np.fft.fft(np.eye(n), axis=0)
    for j in (0, 3, 5):
        M = lp_block(sym, j, part).to_dense()
        expect = np.fft.ifft(part.phi[j][:, None] * F, axis=0)
        assert np.abs(M - expect).max() < 1e-13


def test_block_matches_direct_symbol_application():
    n = 64
    x = xgrid(n)
    xi = freq(n)
    part = dyadic_partition(4, xi)
    a = 1 + 0.4 * np.cos(2 * x)
    b = lambda k: np.sqrt(1 + k**2) ** 0.5  # noqa: E731
    sym = SeparableSymbol((a,), (b,))
    M = lp_block(sym, 3, part).to_dense()
    u = np.random.default_rng(0).standard_normal(n)
    direct = a * np.fft.ifft(b(xi) * part.phi[3] * np.fft.fft(u))
    assert np.allclose(M @ u, direct, atol=1e-13)


def test_kernel_decay_pattern():
    n = 4096
    x = xgrid(n)
    part = dyadic_partition(9, freq(n))
    sym = SeparableSymbol((1 + 0.5 * np.cos(x),), (np.ones(n),))
    near, far = [], []
    for j in range(2, 9):
        z, k = kernel_rows(sym, j, part)
        mag = np.abs(k).max(axis=0)
        near.append(mag.max() / 2**j)
        sel = np.abs(z) > 0
        far.append((mag[sel] * z[sel] ** 2 * 2**j).max())
    assert max(near) / min(near) < 2
    assert max(far) / min(far) < 4


def test_block_operator_norms_uniform_for_order_zero():
    n = 512
    x = xgrid(n)
    part = dyadic_partition(7, freq(n))
    sym = SeparableSymbol((1 + 0.5 * np.cos(x),), (np.ones(n),))
    norms = [np.linalg.norm(lp_block(sym, j, part).to_dense(), 2) for j in range(8)]
    assert max(norms) <= 1.5 + 1e-12
    assert max(norms) / min(norms) < 2


# block norm tables

def test_x_independent_table_is_banded():
    n = 2048
    part = dyadic_partition(9, freq(n))
    sym = SeparableSymbol((np.ones(n),), (lambda k: np.sqrt(1 + k**2) ** 0.3,))
    r = range(10)
    table = block_norm_table(sym, r, r, part)
    i, j = np.meshgrid(r, r, indexing="ij")
    assert np.all(table[np.abs(i - j) > 1] == 0)
    assert np.all(table[i == j] > 0)


@pytest.mark.parametrize("tau", [0.3, 0.5, 0.7])
def test_rough_symbol_wing_slopes(tau):
    n, J = 4096, 10
    x = xgrid(n)
    part = dyadic_partition(J, freq(n))
    sym = SeparableSymbol((1 + weierstrass(x, tau),), (np.ones(n),))
    r = range(J + 1)
    table = block_norm_table(sym, r, r, part)
    slopes = fit_wing_slopes(table, r, r, gap=4)
    assert slopes["lower"] <= -tau + 0.1 and slopes["upper"] <= -tau + 0.1
    i, j = np.meshgrid(r, r, indexing="ij")
    band = table[np.abs(i - j) <= 3]
    assert band.max() <= 4 * table[i == j].max()


def test_mollified_symbol_decays_faster():
    n, J, tau = 4096, 10, 0.5
    x = xgrid(n)
    part = dyadic_partition(J, freq(n))
    r = range(J + 1)
    a = weierstrass(x, tau)
    rough = fit_wing_slopes(block_norm_table(SeparableSymbol((1 + a,), (np.ones(n),)), r, r,
                                             part), r, r)
    smooth = fit_wing_slopes(block_norm_table(SeparableSymbol((1 + mollify(a, 16),),
                                                              (np.ones(n),)), r, r, part), r, r)
    assert smooth["lower"] < rough["lower"] - 0.5


def test_table_csv(tmp_path):
    path = tmp_path / "t.csv"
    write_table_csv(path, np.array([[1.0, 0.5], [0.0, 2.0]]), range(2), range(2))
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,norm,log2norm"
    assert lines[2].split(",")[:3] == ["0", "1", "0.5"] and lines[2].endswith("-1.0")
    assert len(lines) == 5


# Besov norms

def test_besov_single_mode():
    n = 2048
    x = xgrid(n)
    part = dyadic_partition(9, freq(n))
    for j in (2, 5, 8):
        f = 3.0 * np.exp(1j * 2**j * x)
        assert besov_norm(f, 1.5, part) == pytest.approx(2 ** (1.5 * j) * 3 * np.sqrt(TWO_PI),
                                                         rel=1e-12)


def test_besov_zero_order_between_l2_bounds():
    n = 1024
    part = dyadic_partition(8, freq(n))
    f = np.random.default_rng(1).standard_normal(n)
    f = np.fft.ifft(np.fft.fft(f) * (np.abs(freq(n)) <= 2**8)).real
    l2 = np.sqrt(np.sum(f**2) * TWO_PI / n)
    b = besov_norm(f, 0.0, part)
    assert l2 / np.sqrt(2) - 1e-12 <= b <= l2 + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-1.0, 2.0), st.floats(0.5, 3.0))
def test_besov_sobolev_equivalence(seed, s, decay):
    n = 2048
    part = dyadic_partition(9, freq(n))
    rng = np.random.default_rng(seed)
    k = freq(n)
    coeff = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * (1 + np.abs(k)) ** -decay
    coeff[np.abs(k) > 2**9] = 0
    f = np.fft.ifft(coeff)
    ratio = besov_norm(f, s, part) / sobolev_norm(f, s)
    assert 0.25 <= ratio <= 4
