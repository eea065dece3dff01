import json
import os

import numpy as np
import pytest

from diraclab.errors import DiraclabError, SchemaError
from diraclab.harness import export_results, load_config, run_experiment
from diraclab.harness.config import validate_config
from diraclab.harness.io import fmt_cell, read_csv_rows

SMALL_WEGNER = """
[model]
dimension = 2
sigmas = pauli2
S = identity
V0 = zero
gal_alpha = 0.5
gal_beta = 4.0
gal_profile = cos2
gal_support = 0.5

[grid]
side = 6
points_per_cell = 4
buffer = 4
backend = wilson_sparse

[disorder]
density = edge_beta
m = 2.5
M = 2.5
R = 0.3
beta_tail = 1.0
coupling_scale = 0.8

[run]
base_seed = 3
samples = {samples}
workers = {workers}
out = {out}
overwrite = true

[estimator]
name = wegner
e0 = 0.0
eta_list = 0.02,0.04,0.08
l_list = 6
"""


def write_cfg(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path):
        bad = SMALL_WEGNER.replace("[grid]", "[grid]\nspacing = 0.1")
        p = write_cfg(tmp_path, bad.format(samples=1, workers=1,
                                           out=tmp_path / "o"))
        with pytest.raises(SchemaError, match="spacing"):
            load_config(p)

    def test_unknown_section_rejected(self, tmp_path):
        bad = SMALL_WEGNER + "\n[turbo]\nfast = yes\n"
        p = write_cfg(tmp_path, bad.format(samples=1, workers=1,
                                           out=tmp_path / "o"))
        with pytest.raises(SchemaError, match="turbo"):
            load_config(p)

    def test_unknown_estimator_rejected(self, tmp_path):
        bad = SMALL_WEGNER.replace("name = wegner", "name = wigner")
        p = write_cfg(tmp_path, bad.format(samples=1, workers=1,
                                           out=tmp_path / "o"))
        with pytest.raises(SchemaError, match="wigner"):
            load_config(p)

    def test_validate_builds_objects(self, tmp_path):
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=1, workers=1,
                                                    out=tmp_path / "o"))
        spec, dm = validate_config(load_config(p))
        assert spec.grid.side == 6
        assert dm.M == 2.5

    def test_overrides_apply(self, tmp_path):
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=1, workers=1,
                                                    out=tmp_path / "o"))
        cfg = load_config(p, overrides={"samples": 7, "base_seed": 99})
        assert cfg.run["samples"] == 7
        assert cfg.run["base_seed"] == 99

    def test_shipped_configs_validate(self):
        root = os.path.join(os.path.dirname(__file__), "..", "configs")
        for name in ("free_dirac.cfg", "gal.cfg", "gal_disordered.cfg"):
            cfg = load_config(os.path.join(root, name))
            validate_config(cfg)

    def test_ellipticity_gate_for_ct(self, tmp_path):
        text = SMALL_WEGNER.replace("sigmas = pauli2", "sigmas = degenerate2")
        text = text.replace(
            "name = wegner\ne0 = 0.0\neta_list = 0.02,0.04,0.08\nl_list = 6",
            "name = ct\ne = 0.0\nseparations = 1,2\nmode = operator_norm\n"
            "gap_lo = -0.1\ngap_hi = 0.1")
        p = write_cfg(tmp_path, text.format(samples=1, workers=1,
                                            out=tmp_path / "o"))
        with pytest.raises(SchemaError, match="ellipticity"):
            validate_config(load_config(p))


class TestCsvFormat:
    def test_17g_roundtrip_bit_exact(self, rng):
        for _ in range(300):
            x = float(rng.normal() * 10.0 ** float(rng.integers(-12, 12)))
            assert float(fmt_cell(x)) == x

    def test_bool_cells(self):
        assert fmt_cell(True) == "true" and fmt_cell(False) == "false"


class TestRunner:
    def test_deterministic_across_workers(self, tmp_path):
        outs = {}
        for workers in (1, 4):
            out = tmp_path / f"w{workers}"
            p = write_cfg(tmp_path, SMALL_WEGNER.format(
                samples=4, workers=workers, out=out), f"w{workers}.cfg")
            run_experiment(load_config(p))
            outs[workers] = (out / "wegner.csv").read_bytes()
        assert outs[1] == outs[4]

    def test_rerun_identical_bytes(self, tmp_path):
        out = tmp_path / "rr"
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=3, workers=1,
                                                    out=out))
        run_experiment(load_config(p))
        first = (out / "wegner.csv").read_bytes()
        run_experiment(load_config(p))
        assert (out / "wegner.csv").read_bytes() == first

    def test_zero_samples_header_only(self, tmp_path):
        out = tmp_path / "z"
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=0, workers=1,
                                                    out=out))
        manifest = run_experiment(load_config(p))
        header, rows = read_csv_rows(str(out / "wegner.csv"))
        assert rows == []
        assert header == ["L", "seed", "eta", "dist", "hit", "trace_count"]
        assert manifest.n_rows == 0

    def test_poisoned_seed_isolated(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DIRACLAB_POISON_SEEDS", "4")
        out = tmp_path / "p"
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=4, workers=1,
                                                    out=out))
        manifest = run_experiment(load_config(p))
        assert len(manifest.failures) == 1
        assert manifest.failures[0]["key"] == [6, 4]
        _, rows = read_csv_rows(str(out / "wegner.csv"))
        assert len(rows) == 3 * 3   # (samples - 1) seeds x 3 etas

    def test_failure_rate_threshold(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DIRACLAB_POISON_SEEDS", "3,4,5")
        out = tmp_path / "f"
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=4, workers=1,
                                                    out=out))
        with pytest.raises(DiraclabError, match="50%"):
            run_experiment(load_config(p))

    def test_collision_refused_without_overwrite(self, tmp_path):
        out = tmp_path / "c"
        text = SMALL_WEGNER.replace("overwrite = true", "overwrite = false")
        p = write_cfg(tmp_path, text.format(samples=1, workers=1, out=out))
        run_experiment(load_config(p, overrides={"overwrite": True}))
        with pytest.raises(SchemaError, match="exists"):
            run_experiment(load_config(p))

    def test_row_count_contract(self, tmp_path):
        out = tmp_path / "rc"
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=5, workers=1,
                                                    out=out))
        manifest = run_experiment(load_config(p))
        # samples x |eta_list| x |l_list| rows
        assert manifest.n_rows == 5 * 3 * 1

    def test_staging_files_trace_items(self, tmp_path):
        out = tmp_path / "st"
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=2, workers=1,
                                                    out=out))
        run_experiment(load_config(p))
        staged = sorted(os.listdir(out / "staging"))
        assert staged == ["item_6_3.json", "item_6_4.json"]


class TestExport:
    def test_json_mirror_lossless(self, tmp_path):
        out = tmp_path / "e"
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=2, workers=1,
                                                    out=out))
        manifest = run_experiment(load_config(p))
        jfiles = export_results(manifest, fmt="json")
        blob = json.load(open(jfiles[0]))
        header, rows = read_csv_rows(str(out / "wegner.csv"))
        assert blob["columns"] == header
        assert len(blob["rows"]) == len(rows)
        assert blob["rows"] == rows

    def test_export_roundtrip_stable(self, tmp_path):
        out = tmp_path / "e2"
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=2, workers=1,
                                                    out=out))
        manifest = run_experiment(load_config(p))
        j1 = open(export_results(manifest, fmt="json")[0]).read()
        j2 = open(export_results(manifest, fmt="json")[0]).read()
        assert j1 == j2


class TestCli:
    def test_validate_ok(self, capsys):
        from diraclab.harness.cli import main
        root = os.path.join(os.path.dirname(__file__), "..", "configs")
        rc = main(["validate", "--config", os.path.join(root, "free_dirac.cfg")])
        assert rc == 0

    def test_unknown_flag_exits_one(self):
        from diraclab.harness.cli import main
        assert main(["wegner", "--config", "x.cfg", "--warp", "9"]) == 1

    def test_missing_config_exits_one(self):
        from diraclab.harness.cli import main
        assert main(["wegner", "--config", "/nonexistent.cfg"]) == 1

    def test_mismatched_subcommand_exits_one(self, tmp_path):
        from diraclab.harness.cli import main
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=1, workers=1,
                                                    out=tmp_path / "o"))
        assert main(["gap", "--config", p]) == 1

    def test_wegner_row_count_via_cli(self, tmp_path):
        from diraclab.harness.cli import main
        out = tmp_path / "cli"
        p = write_cfg(tmp_path, SMALL_WEGNER.format(samples=2, workers=1,
                                                    out=out))
        rc = main(["wegner", "--config", p, "--samples", "2"])
        assert rc == 0
        _, rows = read_csv_rows(str(out / "wegner.csv"))
        assert len(rows) == 2 * 3


class TestPerformanceAndEnv:
    def test_large_table_export_under_a_second(self, tmp_path):
        import time
        from diraclab.harness.io import rows_to_csv_text, write_atomic
        from diraclab.harness.runner import RunManifest
        rng = np.random.default_rng(0)
        rows = [{"L": 12, "seed": i, "eta": 0.02, "dist": float(rng.normal()),
                 "hit": bool(i % 2), "trace_count": int(i % 5)}
                for i in range(10_000)]
        csv_path = str(tmp_path / "wegner.csv")
        t0 = time.time()
        write_atomic(csv_path, rows_to_csv_text(
            ["L", "seed", "eta", "dist", "hit", "trace_count"], rows))
        assert time.time() - t0 < 1.0
        manifest = RunManifest(estimator="wegner", config_hash="x",
                               output_files=[csv_path])
        jpath = export_results(manifest, fmt="json")[0]
        blob = json.load(open(jpath))
        assert len(blob["rows"]) == 10_000

    def test_worker_env_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DIRACLAB_WORKERS", "2")
        out = tmp_path / "env"
        text = SMALL_WEGNER.replace("workers = {workers}\n", "")
        p = write_cfg(tmp_path, text.format(samples=2, out=out))
        manifest = run_experiment(load_config(p))
        assert manifest.n_rows == 2 * 3

    def test_gap_cli_on_shipped_gal_config(self, tmp_path):
        from diraclab.harness.cli import main
        root = os.path.join(os.path.dirname(__file__), "..", "configs")
        rc = main(["gap", "--config", os.path.join(root, "gal.cfg"),
                   "--out", str(tmp_path / "galrun"), "--overwrite"])
        assert rc == 0
        blob = json.load(open(tmp_path / "galrun" / "summary.json"))
        assert blob["gap_found"] and blob["half_gap"] > 0
