import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparse_unmix import spectra_io
from sparse_unmix.model import EndmemberLibrary
from sparse_unmix.spectra_io import (
    CONFIG_DEFAULTS,
    ConfigError,
    LibraryFormatError,
    LibraryValidationError,
    bundled_library,
    load_config,
    parse_library,
    synthetic_library,
    write_library,
)

MINIMAL = "wavelength,A,B\n0.4,0.1,0.9\n0.5,0.2,0.8"


class TestParseLibrary:
    def test_minimal(self):
        lib = parse_library(MINIMAL)
        assert (lib.n_bands, lib.n_endmembers) == (2, 2)
        assert lib.names == ("A", "B")
        np.testing.assert_array_equal(lib.spectra, [[0.1, 0.9], [0.2, 0.8]])

    def test_trailing_blank_lines(self):
        assert parse_library(MINIMAL + "\n\n  \n") == parse_library(MINIMAL)

    def test_non_monotone_names_line(self):
        with pytest.raises(LibraryValidationError) as err:
            parse_library("wavelength,A,B\n0.5,0.1,0.9\n0.4,0.2,0.8\n")
        assert err.value.line == 3
        assert "line 3" in str(err.value)

    def test_bad_header(self):
        with pytest.raises(LibraryFormatError) as err:
            parse_library("band,A,B\n0.4,0.1,0.9\n0.5,0.2,0.8\n")
        assert err.value.line == 1

    def test_out_of_range_locates_cell(self):
        with pytest.raises(LibraryValidationError) as err:
            parse_library("wavelength,A,B\n0.4,0.1,0.9\n0.5,1.2,0.8\n")
        assert (err.value.line, err.value.column) == (3, 2)

    @pytest.mark.parametrize(
        "text,line",
        [
            ("wavelength,A,B\n0.4,0.1\n0.5,0.2,0.8\n", 2),
            ("wavelength,A,B\n0.4,0.1,x\n0.5,0.2,0.8\n", 2),
            ("wavelength,A,B\n0.4,0.1,0.9\n\n0.5,0.2,0.8\n", 3),
            ("wavelength,A,B\n0.4,0.1,nan\n0.5,0.2,0.8\n", 2),
            ("wavelength,A,B\n0.4,0.1,0.9\n", 2),
            ("wavelength,A\n0.4,0.1\n0.5,0.2\n", 1),
            ("wavelength,A,A\n0.4,0.1,0.2\n0.5,0.2,0.3\n", 1),
            ("", 1),
        ],
    )
    def test_errors_carry_line(self, text, line):
        with pytest.raises(LibraryFormatError) as err:
            parse_library(text)
        assert err.value.line == line


class TestWriteLibrary:
    def test_minimal_rows(self):
        text = write_library(parse_library(MINIMAL))
        assert text.splitlines()[0] == "wavelength,A,B"
        assert len(text.splitlines()) == 3

    def test_bundled_shape(self):
        lines = write_library(bundled_library()).splitlines()
        assert len(lines) == 225
        assert len(lines[0].split(",")) == 7

    def test_bundled_matches_generator(self):
        # the packaged CSV is a frozen copy of synthetic_library()
        assert bundled_library() == synthetic_library()

    @settings(max_examples=40, deadline=None)
    @given(
        n_bands=st.integers(2, 12),
        n_members=st.integers(2, 5),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_round_trip(self, n_bands, n_members, seed):
        rng = np.random.default_rng(seed)
        lib = EndmemberLibrary(
            wavelengths=np.cumsum(rng.uniform(1e-3, 0.1, n_bands)) + 0.35,
            spectra=rng.uniform(0, 1, (n_bands, n_members)),
            names=tuple(f"m{i}" for i in range(n_members)),
        )
        back = parse_library(write_library(lib))
        assert back.names == lib.names
        np.testing.assert_allclose(back.spectra, lib.spectra, rtol=0, atol=1e-12)
        np.testing.assert_allclose(back.wavelengths, lib.wavelengths, rtol=0, atol=1e-12)
        assert write_library(back) == write_library(lib)


class TestConfig:
    def test_defaults(self):
        scenario, config = load_config("")
        assert config.hyper.beta == 0.5
        assert config.hyper.gamma == 1.0
        assert config.hyper.nu == 0.01
        assert (config.n_iter, config.burn_in) == (10000, 1000)
        assert scenario.n_runs == 20
        np.testing.assert_array_equal(scenario.true_a, [0.3, 0.7, 0, 0, 0, 0])
        assert scenario.true_b == 0.2
        assert scenario.noise_sigma == 0.05

    def test_baseline_beta(self):
        _, config = load_config("beta = 1\n")
        assert config.hyper.beta == 1.0

    def test_comments_and_lists(self):
        text = "# sparse prior\nbeta = 0.5  # default\ntrue_a = [0.5, 0.5, 0, 0, 0, 0]\nseed = 9\n"
        scenario, config = load_config(text)
        assert config.seed == 9 and scenario.seed == 9
        np.testing.assert_array_equal(scenario.true_a, [0.5, 0.5, 0, 0, 0, 0])

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as err:
            load_config("bta = 0.5\n")
        assert err.value.key == "bta"
        assert "bta" in str(err.value)

    @pytest.mark.parametrize(
        "text,key",
        [
            ("n_iter = 10.5", "n_iter"),
            ("n_iter = true", "n_iter"),
            ("beta = -1", "beta"),
            ("beta = \"half\"", "beta"),
            ("noise_sigma = -0.1", "noise_sigma"),
            ("burn_in = 20000", "burn_in"),
            ("true_a = [0.5, 0.6, 0, 0, 0, 0]", "true_a"),
            ("true_a = [1, 0]", "true_a"),
            ("adapt = 1", "adapt"),
            ("beta = 0.5\nbeta = 1", "beta"),
            ("seed = [1", "seed"),
        ],
    )
    def test_bad_values_name_key(self, text, key):
        with pytest.raises(ConfigError) as err:
            load_config(text)
        assert err.value.key == key

    def test_defaults_cover_every_key(self):
        assert set(CONFIG_DEFAULTS) == set(spectra_io.CONFIG_KEYS)


class TestPixelAndOutputs:
    def test_pixel_round_trip(self):
        lib = bundled_library()
        y = np.linspace(0.1, 0.8, lib.n_bands)
        np.testing.assert_array_equal(spectra_io.parse_pixel(spectra_io.write_pixel(y, lib)), y)

    def test_pixel_header_required(self):
        with pytest.raises(LibraryFormatError):
            spectra_io.parse_pixel("1,0.4,0.2\n")

    def test_dumps_is_stable(self):
        assert spectra_io.dumps({"b": 1, "a": [1.5]}) == spectra_io.dumps({"a": [1.5], "b": 1})
