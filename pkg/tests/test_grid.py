import numpy as np
import numpy.testing as npt
import hypothesis as hyp
import hypothesis.strategies as hyp_st
import hypothesis.extra.numpy as hyp_np
import pytest

from nfnls.grid import (
    Field,
    GridSpec,
    direct_dft,
    make_boxdata,
    make_gaussian,
    read_field,
    samples_from_spectrum,
    spectrum_from_samples,
    write_field,
    write_field_csv,
)

complex_samples = hyp_np.arrays(
    dtype=np.complex128,
    shape=64,
    elements=hyp_st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
)


def test_gridspec_defaults():
    g = GridSpec()
    assert g.M == 4096
    assert g.dxi == pytest.approx(1 / 32)
    assert g.modes_per_unit_box == 32
    assert g.max_resolved_box == 63
    assert g.dx * g.M == pytest.approx(g.L)


@pytest.mark.parametrize("M", [0, 3, 100])
def test_gridspec_rejects_non_power_of_two(M):
    with pytest.raises(ValueError):
        GridSpec(L=1.0, M=M)


def test_fft_matches_direct_sum(small_grid, rng):
    s = rng.normal(size=64) + 1j * rng.normal(size=64)
    npt.assert_allclose(spectrum_from_samples(s, small_grid.L), direct_dft(s, small_grid.L), rtol=0, atol=1e-11)


@hyp.given(s=complex_samples)
def test_roundtrip(s):
    L = 16 * np.pi
    back = samples_from_spectrum(spectrum_from_samples(s, L), L)
    scale = max(np.linalg.norm(s), 1e-300)
    assert np.linalg.norm(back - s) / scale < 1e-12


@hyp.given(s=complex_samples)
def test_parseval(s):
    L, M = 16 * np.pi, 64
    dx = L / M
    spec = spectrum_from_samples(s, L)
    lhs = np.sum(np.abs(s) ** 2) * dx
    rhs = np.sum(np.abs(spec) ** 2) / L
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


def test_dc_mode(small_grid):
    f = Field(small_grid, np.ones(64))
    spec = f.spectrum
    i0 = small_grid.index_of(0.0)
    assert abs(spec[i0] - small_grid.L) < 1e-12
    assert np.max(np.abs(np.delete(spec, i0))) < 1e-12


def test_plane_wave_single_mode(small_grid):
    xi0 = 2.0
    f = Field(small_grid, np.exp(1j * xi0 * small_grid.x))
    spec = f.spectrum
    i = small_grid.index_of(xi0)
    assert np.argmax(np.abs(spec)) == i
    assert np.max(np.abs(np.delete(spec, i))) < 1e-11


def test_shift_is_modulation(small_grid, rng):
    # translating by one grid step multiplies the spectrum by exp(-i xi dx)
    s = rng.normal(size=64) + 1j * rng.normal(size=64)
    f, g = Field(small_grid, s), Field(small_grid, np.roll(s, 1))
    npt.assert_allclose(g.spectrum, f.spectrum * np.exp(-1j * small_grid.xi * small_grid.dx), atol=1e-11)


def test_linearity(small_grid, rng):
    a = rng.normal(size=64) + 1j * rng.normal(size=64)
    b = rng.normal(size=64) + 1j * rng.normal(size=64)
    lhs = Field(small_grid, 2 * a - 3j * b).spectrum
    rhs = 2 * Field(small_grid, a).spectrum - 3j * Field(small_grid, b).spectrum
    npt.assert_allclose(lhs, rhs, atol=1e-11)


def test_nonfinite_rejected(small_grid):
    s = np.zeros(64, dtype=complex)
    s[3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        Field(small_grid, s)


def test_gaussian_peak():
    g = GridSpec()
    f = make_gaussian(g, 1.0, 1.0, 0.0, 0.0)
    assert np.max(np.abs(f.samples)) == pytest.approx(1.0, abs=1e-15)
    assert np.argmax(np.abs(f.samples)) == g.M // 2
    assert np.all(make_gaussian(g, 0.0).samples == 0)


def test_gaussian_modulated_peak_in_box_three():
    g = GridSpec()
    f = make_gaussian(g, 1.0, 2.0, 0.0, 3.0)
    xi_peak = g.xi[np.argmax(np.abs(f.spectrum))]
    assert -0.5 <= xi_peak - 3 < 0.5


def test_gaussian_tail_check():
    with pytest.raises(ValueError, match="grid too small"):
        make_gaussian(GridSpec(L=10.0, M=64), width=2.0)


def test_boxdata_support(mid_grid):
    f = make_boxdata(mid_grid, {2: 1.0})
    mask = np.abs(f.spectrum) > 0
    assert np.all(np.abs(mid_grid.xi[mask] - 2) < 0.25)
    with pytest.raises(ValueError):
        make_boxdata(mid_grid, {16: 1.0})
    assert np.all(make_boxdata(mid_grid, {0: 0.0, 1: 0.0}).samples == 0)


def test_binary_roundtrip(tmp_path, small_grid, rng):
    f = Field(small_grid, rng.normal(size=64) + 1j * rng.normal(size=64))
    path = tmp_path / "f.bin"
    write_field(path, f)
    raw = path.read_bytes()
    assert len(raw) == 16 + 64 * 16
    assert int.from_bytes(raw[:8], "little") == 64
    g = read_field(path)
    assert g.grid == small_grid
    npt.assert_array_equal(g.samples, f.samples)


def test_binary_truncated(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"\x01\x02")
    with pytest.raises(ValueError, match="truncated"):
        read_field(p)


def test_csv_export(tmp_path, small_grid):
    f = Field(small_grid, np.exp(1j * small_grid.x))
    p = tmp_path / "f.csv"
    write_field_csv(p, f)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,re,im"
    assert len(lines) == 65
    x, re, im = map(float, lines[1].split(","))
    assert complex(re, im) == f.samples[0]
