import json

import numpy as np
import pytest

from conftest import random_field
from gpscatter import config as C
from gpscatter import io as gio
from gpscatter.cli import main
from gpscatter.spectral import PHYSICAL, SPECTRAL, Field, besov_norm, lp_norm, make_grid


def simulate_doc(**over):
    doc = {
        "name": "smoke",
        "dim": 2,
        "grid": {"n": 64, "L": 64.0},
        "datum": {"kind": "gaussian", "amplitude": 0.05, "width": 2.0},
        "task": "simulate",
        "task_params": {"T": 0.5, "dt": 0.05, "n_samples": 3},
        "seed": 3,
    }
    doc.update(over)
    return doc


class TestSnapshots:
    @pytest.mark.parametrize("rep", [PHYSICAL, SPECTRAL])
    def test_round_trip(self, tmp_path, grid3, rng, rep):
        f = random_field(grid3, rng)
        f = f if rep == PHYSICAL else f.spectral()
        p = gio.write_snapshot(tmp_path / "a.gpf", f, 2.5)
        g, t = gio.read_snapshot(p)
        assert t == 2.5 and g.grid == grid3 and g.representation == rep
        assert np.array_equal(g.values, f.values)

    def test_bad_magic(self, tmp_path, grid2):
        p = tmp_path / "a.gpf"
        gio.write_snapshot(p, Field(grid2, np.zeros(grid2.shape, complex), PHYSICAL))
        raw = bytearray(p.read_bytes())
        raw[:4] = b"XXXX"
        p.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="magic"):
            gio.read_snapshot(p)

    def test_truncated(self, tmp_path, grid2):
        p = tmp_path / "a.gpf"
        gio.write_snapshot(p, Field(grid2, np.zeros(grid2.shape, complex), PHYSICAL))
        p.write_bytes(p.read_bytes()[:-16])
        with pytest.raises(ValueError):
            gio.read_snapshot(p)
        p.write_bytes(b"GP")
        with pytest.raises(ValueError):
            gio.read_snapshot(p)


class TestCsv:
    def test_norms_round_trip(self, tmp_path):
        rows = [(0.0, "L2", 1.25), (0.5, "Linf", 1e-17)]
        p = gio.write_norms_csv(tmp_path / "n.csv", rows)
        assert gio.read_norms_csv(p) == rows
        assert p.read_text().splitlines()[0] == "t,norm_name,value"

    def test_table(self, tmp_path):
        p = gio.write_table_csv(tmp_path / "t.csv", ["k", "x"], [[1, np.float64(0.1)], [2, "nan"]])
        assert p.read_text() == "k,x\n1,0.1\n2,nan\n"


class TestValidation:
    def test_valid(self):
        cfg = C.validate_config(simulate_doc())
        assert cfg.task_params["scheme"] == "strang_rk4"
        assert cfg.task_params["T"] == 0.5
        assert cfg.make_grid() == make_grid(2, 64, 64.0)

    def test_dim(self):
        with pytest.raises(C.ConfigError) as exc:
            C.validate_config(simulate_doc(dim=4))
        assert "dim" in exc.value.paths

    def test_unknown_keys(self):
        with pytest.raises(C.ConfigError) as exc:
            C.validate_config(simulate_doc(colour="red"))
        assert "colour" in exc.value.paths
        doc = simulate_doc()
        doc["task_params"]["substeps"] = 4
        with pytest.raises(C.ConfigError) as exc:
            C.validate_config(doc)
        assert "task_params.substeps" in exc.value.paths

    def test_missing_and_mismatched(self):
        doc = simulate_doc()
        del doc["grid"]
        with pytest.raises(C.ConfigError) as exc:
            C.validate_config(doc)
        assert "grid" in exc.value.paths
        with pytest.raises(C.ConfigError) as exc:
            C.validate_config(simulate_doc(datum={"kind": "gaussian", "center": [0.0, 0.0, 0.0]}))
        assert "datum.center" in exc.value.paths
        with pytest.raises(C.ConfigError):
            C.validate_config(simulate_doc(datum={"kind": "from_file"}))

    def test_load(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(simulate_doc()))
        assert C.load_config(p).name == "smoke"


class TestDatum:
    def test_zero_amplitude(self, grid2):
        assert np.all(C.make_gaussian_datum(grid2, 0.0, 2.0).values == 0)

    @pytest.mark.parametrize("dim,n,L", [(2, 64, 40.0), (3, 32, 24.0)])
    def test_l2_norm(self, dim, n, L):
        # int a^2 exp(-|x|^2 / w^2) dx = a^2 (pi w^2)^(d/2)
        a, w = 0.7, 1.5
        f = C.make_gaussian_datum(make_grid(dim, n, L), a, w)
        assert lp_norm(f, 2) == pytest.approx(a * (np.pi * w * w) ** (dim / 4), rel=1e-6)

    def test_besov_linear(self, grid2):
        b1 = besov_norm(C.make_gaussian_datum(grid2, 0.1, 2.0), 1, 1, 1)
        b2 = besov_norm(C.make_gaussian_datum(grid2, 0.3, 2.0), 1, 1, 1)
        assert b2 == pytest.approx(3 * b1, rel=1e-12)

    def test_center_and_modulation(self, grid2):
        f = C.make_gaussian_datum(grid2, 1.0, 1.0, center=[2.0, -1.0], modulation=[0.5, 0.0])
        i = np.unravel_index(np.argmax(np.abs(f.values)), grid2.shape)
        x, y = (np.broadcast_to(c, grid2.shape)[i] for c in grid2.coords)
        assert x == pytest.approx(2.0, abs=grid2.h) and y == pytest.approx(-1.0, abs=grid2.h)
        assert np.abs(f.values.imag).max() > 0

    def test_errors(self, grid2):
        with pytest.raises(ValueError):
            C.make_gaussian_datum(grid2, 1.0, 0.0)
        with pytest.raises(ValueError):
            C.make_gaussian_datum(grid2, 1.0, 1.0, center=[grid2.box_length, 0.0])

    def test_besov_target(self):
        cfg = C.validate_config(simulate_doc(datum={"kind": "gaussian", "amplitude": 1.0, "width": 2.0, "besov_target": 0.05}))
        assert besov_norm(C.build_datum(cfg), 1, 1, 1) == pytest.approx(0.05, rel=1e-12)


class TestRun:
    def test_simulate_smoke(self, tmp_path):
        assert C.run(simulate_doc(), tmp_path) == C.EXIT_OK
        names = {p.name for p in tmp_path.iterdir()}
        assert {"norms.csv", "manifest.json", "u_0000.gpf", "u_0002.gpf"} <= names
        man = json.loads((tmp_path / "manifest.json").read_text())
        listed = {e["path"]: e["sha256"] for e in man["files"]}
        for name in names - {"manifest.json"}:
            assert listed[name] == gio.sha256(tmp_path / name)
        assert man["status"] == "ok" and man["config"]["seed"] == 3
        assert "version" in man

    def test_invalid_exit(self, tmp_path, capsys):
        assert C.run(simulate_doc(dim=4), tmp_path) == C.EXIT_INVALID
        assert "dim" in capsys.readouterr().err

    def test_abort_exit(self, tmp_path, capsys):
        doc = simulate_doc(datum={"kind": "gaussian", "amplitude": 5e3, "width": 2.0})
        assert C.run(doc, tmp_path) == C.EXIT_ABORT
        assert "numerical abort" in capsys.readouterr().err
        assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "aborted"

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        C.run(simulate_doc(), a)
        C.run(simulate_doc(), b)
        for name in ("norms.csv", "u_0001.gpf", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_scatter_and_gnuplot(self, tmp_path):
        doc = {
            "name": "sc",
            "dim": 2,
            "grid": {"n": 32, "L": 32.0},
            "datum": {"kind": "gaussian", "amplitude": 0.02, "width": 2.0},
            "task": "scatter",
            "task_params": {"T": 2.0, "T_max": 8.0, "n_nodes": 32, "sweeps": 3},
            "emit_gnuplot": True,
        }
        assert C.run(doc, tmp_path) == C.EXIT_OK
        head = (tmp_path / "diagnostics.csv").read_text().splitlines()[0]
        assert head == "k,D_k,E_k,ratio"
        assert (tmp_path / "corrections.csv").exists() and (tmp_path / "diagnostics.gp").exists()
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["sweeps"] >= 1


class TestCli:
    def test_simulate(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(simulate_doc()))
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "norms.csv").exists()

    def test_invalid_dim(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(simulate_doc(dim=4)))
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert "dim" in capsys.readouterr().err

    def test_decay_to_file(self, tmp_path):
        out = tmp_path / "d" / "decay.csv"
        out.parent.mkdir()
        rc = main(["decay", "--q", "2", "--dim", "2", "--n", "32", "--L", "32", "--t-lo", "1", "--t-hi", "4", "--out", str(out)])
        assert rc == 0 and out.read_text().startswith("t,norm")

    def test_phase_scan(self, tmp_path, capsys):
        rc = main(["phase-scan", "--kind", "Phi0", "--region", "Dplus", "--samples", "2000", "--out", str(tmp_path)])
        assert rc == 0
        assert "min_ratio" in capsys.readouterr().out

    def test_normal_form(self, tmp_path, grid2, capsys):
        snap = gio.write_snapshot(tmp_path / "u.gpf", C.make_gaussian_datum(grid2, 0.05, 2.0))
        rc = main(["normal-form", "--in", str(snap), "--check-roundtrip", "--out", str(tmp_path / "nf")])
        assert rc == 0
        line = capsys.readouterr().out.strip().splitlines()[-1]
        assert float(line.split(",")[0]) <= 1e-10 and line.endswith("True")

    def test_scatter_with_phi(self, tmp_path):
        g = make_grid(2, 32, 32.0)
        snap = gio.write_snapshot(tmp_path / "phi.gpf", C.make_gaussian_datum(g, 0.02, 2.0))
        cfg = tmp_path / "c.json"
        doc = {"name": "sc", "dim": 2, "grid": {"n": 16, "L": 8.0}, "task": "scatter", "task_params": {"T": 2.0, "T_max": 8.0, "n_nodes": 32, "sweeps": 2}}
        cfg.write_text(json.dumps(doc))
        assert main(["scatter", "--config", str(cfg), "--phi", str(snap), "--out", str(tmp_path / "o")]) == 0
        man = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert man["config"]["grid"]["n"] == 32

    def test_oracle(self, tmp_path, capsys):
        assert main(["oracle", "--case", "small2d", "--out", str(tmp_path)]) == 0
        rows = capsys.readouterr().out.strip().splitlines()[-5:]
        assert len(rows) == 5 and all(float(r.split(",")[-1]) <= 1e-6 for r in rows)
