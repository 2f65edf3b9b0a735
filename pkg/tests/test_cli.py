import json
import subprocess
import sys

import numpy as np
import pytest

from sparse_unmix import cli, spectra_io


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def noiseless_pixel(tmp_path):
    path = tmp_path / "pixel.csv"
    assert run("synth", "-o", path, "--noise-sigma", 0) == 0
    return path


class TestSynth:
    def test_deterministic(self, tmp_path):
        assert run("synth", "-o", tmp_path / "a.csv", "--seed", 3) == 0
        assert run("synth", "-o", tmp_path / "b.csv", "--seed", 3) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert run("synth", "-o", tmp_path / "c.csv", "--seed", 4) == 0
        assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()

    def test_noiseless_matches_forward_model(self, noiseless_pixel):
        from sparse_unmix.model import forward_ppnmm

        lib = spectra_io.bundled_library()
        y = spectra_io.parse_pixel(noiseless_pixel.read_text())
        expected = forward_ppnmm(lib.spectra, np.array([0.3, 0.7, 0, 0, 0, 0]), 0.2)
        np.testing.assert_allclose(y, expected, rtol=0, atol=1e-15)

    def test_provenance(self, tmp_path):
        out = tmp_path / "p.csv"
        assert run("synth", "-o", out, "--seed", 11) == 0
        prov = json.loads((tmp_path / "p.csv.provenance.json").read_text())
        assert prov["seed"] == 11 and prov["true_b"] == 0.2 and prov["n_bands"] == 224


class TestUnmix:
    def test_noiseless_recovery(self, noiseless_pixel, tmp_path):
        out = tmp_path / "out"
        assert run("unmix", noiseless_pixel, "-o", out, "--iters", 5000, "--trace") == 0
        summary = json.loads((out / "summary.json").read_text())
        a = np.array(list(summary["posterior_mean"]["a"].values()))
        np.testing.assert_allclose(a, [0.3, 0.7, 0, 0, 0, 0], atol=0.05)
        assert abs(summary["posterior_mean"]["b"] - 0.2) < 0.05
        for comp in ("a1", "a2", "a3", "a4", "a5", "a6", "b"):
            lines = (out / f"hist_{comp}.csv").read_text().splitlines()
            assert lines[0] == "bin_left,bin_right,count"
            assert sum(int(l.split(",")[2]) for l in lines[1:]) == 4000
        trace = (out / "trace.csv").read_text().splitlines()
        assert len(trace) == 5001

    def test_beta_flag_lands_in_provenance(self, noiseless_pixel, tmp_path):
        assert run("unmix", noiseless_pixel, "-o", tmp_path / "o", "--iters", 300, "--burn-in", 100, "--beta", 1) == 0
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert summary["provenance"]["beta"] == 1.0

    def test_size_mismatch_exit_code(self, tmp_path):
        lib = spectra_io.parse_library("wavelength,A,B\n0.4,0.1,0.9\n0.5,0.2,0.8\n0.6,0.3,0.7\n")
        (tmp_path / "lib.csv").write_text(spectra_io.write_library(lib))
        (tmp_path / "px.csv").write_text(spectra_io.write_pixel(np.array([0.5, 0.5]), spectra_io.parse_library(
            "wavelength,A,B\n0.4,0.1,0.9\n0.5,0.2,0.8\n")))
        assert run("unmix", tmp_path / "px.csv", "--library", tmp_path / "lib.csv", "-o", tmp_path / "o") == 4

    def test_unparseable_pixel_exit_code(self, tmp_path):
        (tmp_path / "px.csv").write_text("band,wavelength,reflectance\n1,0.4,abc\n")
        assert run("unmix", tmp_path / "px.csv", "-o", tmp_path / "o") == 2

    def test_missing_file_exit_code(self, tmp_path):
        assert run("unmix", tmp_path / "nope.csv", "-o", tmp_path / "o") == 2

    def test_bad_config_exit_code(self, noiseless_pixel, tmp_path):
        (tmp_path / "c.toml").write_text("bta = 0.5\n")
        assert run("unmix", noiseless_pixel, "-o", tmp_path / "o", "--config", tmp_path / "c.toml") == 2

    def test_usage_exit_code(self, capsys):
        assert run("unmix") == 1
        assert run("frobnicate") == 1
        assert run("reproduce", "-o", "x", "--iters", "many") == 1


class TestValidateLibrary:
    def test_ok(self, tmp_path, capsys):
        (tmp_path / "lib.csv").write_text(spectra_io.write_library(spectra_io.bundled_library()))
        assert run("validate-library", tmp_path / "lib.csv") == 0
        assert "224 bands, 6 endmembers" in capsys.readouterr().out

    def test_bad_line_reported(self, tmp_path, capsys):
        (tmp_path / "lib.csv").write_text("wavelength,A,B\n0.5,0.1,0.9\n0.4,0.2,0.8\n")
        assert run("validate-library", tmp_path / "lib.csv") == 2
        assert "line 3" in capsys.readouterr().err


class TestReproduce:
    def test_quick_report(self, tmp_path, capsys):
        out = tmp_path / "rep"
        assert run("reproduce", "--quick", "-o", out, "--jobs", 1) == 0
        printed = capsys.readouterr().out
        assert "sparse" in printed and "uniform" in printed
        report = json.loads((out / "report.json").read_text())
        assert set(report) == {"settings", "results"}
        assert set(report["results"]) == {"sparse", "uniform"}
        assert report["settings"]["n_runs"] == 5 and report["settings"]["n_iter"] == 2000
        assert report["results"]["sparse"]["beta"] == 0.5
        assert report["results"]["uniform"]["beta"] == 1.0
        assert (out / "report.txt").read_text() == printed
        for label in ("sparse", "uniform"):
            for comp in ("a1", "a2", "a3", "b"):
                assert (out / f"hist_{label}_{comp}.csv").exists()

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "sparse_unmix.cli", "validate-library", str(tmp_path / "missing.csv")],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 2
        assert "missing.csv" in proc.stderr
