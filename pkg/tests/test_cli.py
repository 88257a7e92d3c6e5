import csv
import json
import math

import pytest

from mismac.cli import main, thread_count


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def small_config(std_config):
    doc = dict(std_config)
    doc["region"] = {"decoders": ["successive"], "r2_step": 0.05}
    doc["exponent"] = {"kind": "type2-standard", "denominator": 12,
                       "r1_grid": [0.1], "r2_grid": [0.1, 0.3]}
    doc["simulate"] = {"n_values": [3], "m1": 2, "m2": 2,
                       "decoders": ["successive", "genie"], "mode": "exact"}
    doc["validate"] = {"denominator": 8, "r2_values": [0.2]}
    return doc


class TestRegion:
    def test_csv_schema_and_values(self, tmp_path, small_config):
        cfg = write_config(tmp_path, small_config)
        out = tmp_path / "out"
        assert main(["region", "--config", cfg, "--out", str(out)]) == 0
        rows = read_csv(out / "region_successive.csv")
        assert set(rows[0]) == {"r2", "r1_max", "binding_condition"}
        r2s = [float(r["r2"]) for r in rows]
        assert r2s == sorted(r2s)
        assert max(r2s) == pytest.approx(0.3723271661550276, abs=1e-6)
        assert float(rows[0]["r1_max"]) == pytest.approx(0.311836017,
                                                         abs=1e-5)
        assert (out / "region_report.txt").exists()
        assert json.loads((out / "metadata.json").read_text())["seed"] == 0

    def test_bits_flag_rescales(self, tmp_path, small_config):
        cfg = write_config(tmp_path, small_config)
        nats = tmp_path / "nats"
        bits = tmp_path / "bits"
        main(["region", "--config", cfg, "--out", str(nats)])
        main(["region", "--config", cfg, "--out", str(bits), "--bits"])
        rn = read_csv(nats / "region_successive.csv")
        rb = read_csv(bits / "region_successive.csv")
        assert float(rb[0]["r1_max"]) == pytest.approx(
            float(rn[0]["r1_max"]) / math.log(2), abs=1e-9)

    def test_runs_are_byte_identical(self, tmp_path, small_config):
        cfg = write_config(tmp_path, small_config)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["region", "--config", cfg, "--out", str(a)])
        main(["region", "--config", cfg, "--out", str(b)])
        assert (a / "region_successive.csv").read_bytes() \
            == (b / "region_successive.csv").read_bytes()


class TestExponent:
    def test_csv_schema(self, tmp_path, small_config):
        cfg = write_config(tmp_path, small_config)
        out = tmp_path / "out"
        assert main(["exponent", "--config", cfg, "--out", str(out)]) == 0
        rows = read_csv(out / "exponent.csv")
        assert set(rows[0]) == {"r1", "r2", "value", "grid_denominator"}
        assert len(rows) == 2
        by_r2 = {float(r["r2"]): float(r["value"]) for r in rows}
        assert by_r2[0.1] == pytest.approx(0.3723271661550276 - 0.1, abs=1e-6)
        assert by_r2[0.3] == pytest.approx(0.3723271661550276 - 0.3, abs=1e-6)

    def test_unknown_kind_is_a_config_error(self, tmp_path, small_config):
        doc = dict(small_config)
        doc["exponent"] = {"kind": "type3"}
        cfg = write_config(tmp_path, doc)
        assert main(["exponent", "--config", cfg,
                     "--out", str(tmp_path / "o")]) == 2


class TestSimulate:
    def test_exact_mode_rows(self, tmp_path, small_config):
        cfg = write_config(tmp_path, small_config)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        rows = read_csv(out / "simulate.csv")
        assert len(rows) == 2
        by_dec = {r["decoder"]: r for r in rows}
        assert by_dec["successive"]["method"] == "exact"
        # exact genie identity surfaces in the CSV as equal estimates
        assert float(by_dec["successive"]["estimate"]) == pytest.approx(
            float(by_dec["genie"]["estimate"]), abs=1e-12)

    def test_identity_check_report(self, tmp_path, small_config):
        doc = dict(small_config)
        doc["simulate"] = dict(doc["simulate"], identity_check=True)
        cfg = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        text = (out / "identity_check.txt").read_text()
        assert "genie=ok" in text and "half-bound=ok" in text

    def test_monte_carlo_mode(self, tmp_path, small_config):
        doc = dict(small_config)
        doc["simulate"] = {"n_values": [4], "m1": 2, "m2": 2,
                           "decoders": ["max-metric"], "trials": 200,
                           "mode": "mc"}
        cfg = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        (row,) = read_csv(out / "simulate.csv")
        assert row["method"] == "monte-carlo"
        assert 0.0 <= float(row["wilson_lo"]) <= float(row["estimate"]) \
            <= float(row["wilson_hi"]) <= 1.0


class TestValidate:
    def test_passes_on_the_bundled_setup(self, tmp_path, small_config):
        cfg = write_config(tmp_path, small_config)
        out = tmp_path / "out"
        assert main(["validate", "--config", cfg, "--out", str(out)]) == 0
        text = (out / "validate.txt").read_text()
        assert "FAIL" not in text
        assert "sandwich user2-bound" in text

    def test_biased_solver_is_caught(self, tmp_path, small_config):
        doc = dict(small_config)
        doc["validate"] = dict(doc["validate"], solver_bias=0.5)
        cfg = write_config(tmp_path, doc)
        assert main(["validate", "--config", cfg,
                     "--out", str(tmp_path / "o")]) == 1


class TestErrors:
    def test_missing_config_file(self, tmp_path):
        assert main(["region", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        assert main(["region", "--config", str(path),
                     "--out", str(tmp_path / "o")]) == 2

    def test_invalid_channel_rows(self, tmp_path, small_config):
        doc = dict(small_config)
        doc["channel"] = {"w": [[[0.5, 0.4, 0.0], [0.1, 0.8, 0.1]],
                                [[0.1, 0.8, 0.1], [0.1, 0.8, 0.1]]]}
        cfg = write_config(tmp_path, doc)
        assert main(["region", "--config", cfg,
                     "--out", str(tmp_path / "o")]) == 2

    def test_thread_count_env(self, monkeypatch):
        monkeypatch.setenv("MMAC_THREADS", "3")
        assert thread_count() == 3
        monkeypatch.setenv("MMAC_THREADS", "0")
        with pytest.raises(ValueError):
            thread_count()
        monkeypatch.delenv("MMAC_THREADS")
        assert thread_count() >= 1
