import csv
import io
import subprocess
import sys
from dataclasses import replace

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from owcsim.cli import main
from owcsim.config import (ConfigError, apply_preset, bundled_config_text, emit_config,
                           load_bundled, parse_config)
from owcsim.protocol import CRDSA, IRSA16_RAW

TINY = """
scenario: {tx_per_side: 1, rx_per_side: 1, room_width: 1, room_depth: 1}
protocol: {slots: 1, degree_distribution: {1: 1.0}, pa: [1.0]}
sweep: {fov: [60], frames: 50, seed: 3}
"""


def small_paper(**edits):
    doc = yaml.safe_load(bundled_config_text())
    for path, value in edits.items():
        sec, key = path.split("__")
        doc[sec][key] = value
    return yaml.safe_dump(doc)


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_bundled_paper_config():
    cfg = load_bundled()
    s = cfg.scenario
    assert s.n_devices == 676 and s.height == 3.0 and s.tx_pitch == 2.0
    assert cfg.pa[0] == 0.02 and cfg.pa[-1] == 1.0 and len(cfg.pa) == 50
    assert cfg.fov_grid == tuple(float(f) for f in range(20, 90))


def test_crdsa_block():
    cfg = parse_config(small_paper(protocol__degree_distribution={2: 1.0},
                                   protocol__slots=10))
    assert cfg.omega == CRDSA


def test_fov_out_of_range_is_reported():
    with pytest.raises(ConfigError) as exc:
        parse_config(small_paper(sweep__fov=[30, 95]))
    assert "FOV range" in str(exc.value) and "sweep.fov" in str(exc.value)


def test_all_errors_reported_with_paths():
    text = small_paper(sweep__frames=0, protocol__pa=[1.5])
    doc = yaml.safe_load(text)
    doc["scenario"]["colour"] = "red"
    del doc["sweep"]["seed"]
    with pytest.raises(ConfigError) as exc:
        parse_config(yaml.safe_dump(doc))
    msgs = "\n".join(exc.value.errors)
    for needle in ("scenario.colour: unknown key", "sweep.seed: missing", "sweep.frames",
                   "protocol.pa"):
        assert needle in msgs


def test_degree_larger_than_frame_rejected():
    with pytest.raises(ConfigError, match="exceeds protocol.slots"):
        parse_config(small_paper(protocol__degree_distribution={3: 1.0}, protocol__slots=2))


def test_empty_fov_grid_rejected():
    with pytest.raises(ConfigError, match="empty"):
        parse_config(small_paper(sweep__fov=[]))


def test_seed_env_override():
    assert parse_config(bundled_config_text(), seed_env="99").seed == 99


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 63), frames=st.integers(1, 10 ** 6),
       pa=st.lists(st.floats(0, 1), min_size=1, max_size=6),
       rx=st.sampled_from([1, 2, 3, 5]), dist=st.sampled_from([{1: 1.0}, {2: 1.0}, IRSA16_RAW]))
def test_round_trip(seed, frames, pa, rx, dist):
    base = load_bundled()
    cfg = replace(base, seed=seed, frames=frames, pa=tuple(sorted(set(pa))),
                  slots=100, degree_weights=dict(dist),
                  scenario=replace(base.scenario, rx_per_side=rx))
    assert parse_config(emit_config(cfg)) == cfg


def test_presets():
    cfg = load_bundled()
    fig6 = apply_preset(cfg, "fig6")
    assert [(v, c.slots, c.scenario.n_aps) for v, c in fig6] == [("L5", 5, 9), ("L10", 10, 9),
                                                                  ("L100", 100, 9)]
    assert [c.scenario.n_aps for _, c in apply_preset(cfg, "fig4")] == [1, 9, 25]
    with pytest.raises(ConfigError):
        apply_preset(cfg, "fig7")


# --- CLI ---------------------------------------------------------------------------------

def test_simulate_zero_load(tmp_path):
    cfg = write(tmp_path, small_paper())
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", cfg, "--pa", "0", "--fov", "40", "--frames", "20",
                 "--out", str(out)]) == 0
    (row,) = read_csv(out)
    assert float(row["r_avg"]) == 0.0


def test_simulate_single_device(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", write(tmp_path, TINY), "--out", str(out)]) == 0
    (row,) = read_csv(out)
    assert float(row["p_rec"]) == 1.0 and row["frames"] == "50"


def test_simulate_is_byte_reproducible_and_traced(tmp_path):
    cfg = write(tmp_path, small_paper(protocol__slots=5, protocol__degree_distribution={2: 1}))
    a, b, tr = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "t.jsonl"
    args = ["simulate", "--config", cfg, "--pa", "0.3", "--fov", "60", "--frames", "200"]
    assert main(args + ["--out", str(a), "--trace", str(tr)]) == 0
    assert main(args + ["--out", str(b), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    import json
    recs = [json.loads(line) for line in tr.read_text().splitlines()]
    assert recs and {"frame", "iteration", "decoded"} <= set(recs[0])


def test_sweep_csv_shape_and_json(tmp_path):
    cfg = write(tmp_path, small_paper(protocol__pa=[0.1, 0.2, 0.3], sweep__fov=[30, 50]))
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", cfg, "--frames", "30", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.count("pa,fov_deg") == 1
    assert len(read_csv(out)) == 6
    js = tmp_path / "s.json"
    assert main(["sweep", "--config", cfg, "--frames", "30", "--out", str(js),
                 "--format", "json"]) == 0
    import json
    assert json.loads(js.read_text()) == [
        {k: (float(v) if k not in ("frames", "seed") else int(v)) for k, v in r.items()}
        for r in read_csv(out)]


def test_sweep_presets_write_variant_tables(tmp_path):
    cfg = write(tmp_path, small_paper(protocol__pa=[0.1, 0.5], sweep__fov=[30, 50, 70]))
    out = tmp_path / "fig.csv"
    assert main(["sweep", "--config", cfg, "--preset", "fig6", "--frames", "20",
                 "--out", str(out)]) == 0
    for v in ("L5", "L10", "L100"):
        assert len(read_csv(tmp_path / f"fig_{v}.csv")) == 6
        opt = read_csv(tmp_path / f"fig_{v}_opt.csv")
        assert list(opt[0]) == ["pa", "fov_opt_deg", "r_avg_max", "p_rec_at_opt"]
        assert len(opt) == 2
    assert main(["sweep", "--config", cfg, "--preset", "fig4", "--frames", "20",
                 "--out", str(out)]) == 0
    assert {p.name for p in tmp_path.glob("fig_ap*_opt.csv")} == {
        "fig_ap1_opt.csv", "fig_ap3_opt.csv", "fig_ap5_opt.csv"}


def test_optimize(tmp_path):
    cfg = write(tmp_path, small_paper(protocol__pa=[0.2, 0.6]))
    out = tmp_path / "lk.csv"
    assert main(["optimize", "--config", cfg, "--frames", "1000", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 2 and all(25.3 <= float(r["fov_opt_deg"]) <= 46.5 for r in rows)
    cfg1 = write(tmp_path, small_paper(protocol__pa=[0.3]), "one.yaml")
    assert main(["optimize", "--config", cfg1, "--frames", "50", "--out", str(out)]) == 0
    assert len(read_csv(out)) == 1


def test_adapt_constant_and_step(tmp_path):
    lk = tmp_path / "lk.csv"
    lk.write_text("pa,fov_opt_deg,r_avg_max,p_rec_at_opt\n0.05,70,0,0\n0.5,46,0,0\n")
    for traj, changes in (([[0.5, 400]], 0), ([[0.05, 300], [0.5, 300]], 1)):
        cfg = write(tmp_path, small_paper(protocol__trajectory=traj, adapt__lookup=str(lk),
                                          scenario__fov=70))
        out = tmp_path / "ad.csv"
        assert main(["adapt", "--config", cfg, "--out", str(out)]) == 0
        fovs = [float(r["fov_deg"]) for r in read_csv(out)]
        assert len(fovs) == sum(k for _, k in traj)
        assert sum(a != b for a, b in zip(fovs, fovs[1:])) == changes


def test_coverage_dump(tmp_path):
    out = tmp_path / "cov.csv"
    assert main(["coverage", "--config", write(tmp_path, small_paper()), "--fov", "30",
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 676 * 9
    assert sum(float(r["gain"]) > 0 for r in rows) == 36


def test_exit_codes(tmp_path):
    bad = write(tmp_path, small_paper(sweep__fov=[95]), "bad.yaml")
    assert main(["sweep", "--config", bad]) == 1
    assert main(["sweep", "--config", str(tmp_path / "missing.yaml")]) == 1
    broken = write(tmp_path, small_paper(adapt__lookup=str(tmp_path / "nope.csv")), "br.yaml")
    assert main(["adapt", "--config", broken]) == 2
    proc = subprocess.run([sys.executable, "-m", "owcsim", "sweep", "--config", bad],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "FOV range" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "owcsim", "sweep"], capture_output=True)
    assert proc.returncode == 1
