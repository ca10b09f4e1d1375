import json
import os
import struct
import zlib

import numpy as np
import pytest

from latent_forge import plotting
from latent_forge.cli import main
from latent_forge.commands import read_heatmap_csv
from latent_forge.config import ConfigError, apply_set, resolve
from latent_forge.storage import load_dataset, read_csv

TINY_HYST = ["--set", "hysteresis.steps_per_period=40", "--set", "hysteresis.sim.size=6"]


def png_chunks(path):
    data = open(path, "rb").read()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    pos, names = 8, []
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        kind = data[pos + 4:pos + 8]
        body = data[pos + 8:pos + 8 + length]
        (crc,) = struct.unpack(">I", data[pos + 8 + length:pos + 12 + length])
        assert zlib.crc32(kind + body) & 0xFFFFFFFF == crc
        names.append(kind)
        pos += 12 + length
    return names


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    d = {k: str(root / k) for k in ("cards", "dkl", "vae", "bo", "plots", "fields", "sweep")}
    assert main(["gen-cards", "--set", "per_suit=10", "--set", "size=16", "--out", d["cards"],
                 "--quiet"]) == 0
    assert main(["train-dkl-static", "--set", f"dataset={d['cards']}", "--set", "dkl.steps=5",
                 "--set", "dkl.hidden_sizes=[8]", "--out", d["dkl"], "--quiet"]) == 0
    assert main(["train-vae", "--set", f"dataset={d['cards']}", "--set", "vae.epochs=1",
                 "--set", "vae.hidden_sizes=[8]", "--set", "grid_n=4", "--out", d["vae"],
                 "--quiet"]) == 0
    assert main(["run-bo", "--set", f"dataset={d['cards']}", "--set", "n_init=5",
                 "--set", "n_steps=3", "--set", "dkl.steps=5", "--set", "dkl.hidden_sizes=[8]",
                 "--set", 'baseline="random"', "--out", d["bo"], "--quiet"]) == 0
    assert main(["gen-fields", "--set", "n_curves=12", "--set", "t_samples=20",
                 "--out", d["fields"], "--quiet"]) == 0
    assert main(["simulate-sweep", "--set", f"fields={d['fields']}", "--set", "sim.size=6",
                 "--out", d["sweep"], "--quiet"]) == 0
    return d


def test_resolve_unknown_key():
    with pytest.raises(ConfigError):
        resolve("gen-cards", sets=["bogus=1"])
    with pytest.raises(ConfigError):
        resolve("run-bo", sets=["dkl.depth=3"])


def test_set_parses_json_and_strings():
    cfg = apply_set(resolve("run-bo"), "dkl.hidden_sizes=[4, 2]")
    assert cfg["dkl"]["hidden_sizes"] == [4, 2]
    assert apply_set(cfg, "target=curl")["target"] == "curl"


def test_presets_layer_under_sets():
    cfg = resolve("run-bo", "desk-cards", sets=["n_steps=7"])
    assert cfg["n_init"] == 30 and cfg["n_steps"] == 7


def test_config_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"per_suit": 3}))
    assert resolve("gen-cards", config_path=str(p))["per_suit"] == 3
    p.write_text(json.dumps({"perSuit": 3}))
    with pytest.raises(ConfigError):
        resolve("gen-cards", config_path=str(p))


@pytest.mark.parametrize("argv", [
    ["gen-cards", "--set", "bogus=1"],
    ["teleport", "--out", "x"],
    ["gen-cards", "--preset", "huge"],
    ["export-plots", "--set", "source=/nonexistent/run"],
    ["train-vae", "--set", "dataset=/nonexistent/data"],
])
def test_usage_errors_exit_2(argv, tmp_path):
    if "--out" not in argv:
        argv = argv + ["--out", str(tmp_path / "o")]
    assert main(argv + ["--quiet"]) == 2


def test_missing_out_exit_2():
    assert main(["gen-cards", "--quiet"]) == 2


def test_unwritable_out_exit_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["gen-cards", "--out", str(blocker / "sub"), "--quiet"]) == 2


def test_pool_too_small_exit_2(runs, tmp_path):
    assert main(["run-bo", "--set", f"dataset={runs['cards']}", "--set", "n_init=40",
                 "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_divergence_exit_3(runs, tmp_path):
    assert main(["simulate-sweep", "--set", f"fields={runs['fields']}", "--set", "sim.size=6",
                 "--set", "sim.dt=5.0", "--out", str(tmp_path / "o"), "--quiet"]) == 3


def test_grad_check_exit_codes(tmp_path):
    assert main(["grad-check", "--set", "seeds=1", "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert main(["grad-check", "--set", "seeds=1", "--set", "tolerance=1e-30",
                 "--out", str(tmp_path / "b"), "--quiet"]) == 3


def test_manifest_records_resolved_defaults(runs):
    m = json.load(open(os.path.join(runs["cards"], "run_manifest.json")))
    assert m["command"] == "gen-cards"
    assert m["config"] == {"per_suit": 10, "size": 16, "seed": 0}
    d = json.load(open(os.path.join(runs["dkl"], "run_manifest.json")))
    assert d["config"]["dkl"]["lr"] == 0.01 and d["config"]["input_scaling"] == "none"


def test_cards_container(runs):
    c = load_dataset(runs["cards"])
    assert c.inputs.shape == (40, 256)
    assert np.array_equal(np.bincount(np.asarray(c.meta["suit"])), [10] * 4)


def test_sweep_container(runs):
    c = load_dataset(runs["sweep"])
    assert sorted(c.targets) == ["curl", "normalized_curl", "total_polarization"]
    assert c.inputs.shape == (12, 20)


def test_same_seed_same_bytes(runs, tmp_path):
    out = str(tmp_path / "again")
    assert main(["gen-cards", "--set", "per_suit=10", "--set", "size=16", "--out", out,
                 "--quiet"]) == 0
    for name in ("inputs.f64", "meta.csv"):
        a = open(os.path.join(out, name), "rb").read()
        assert a == open(os.path.join(runs["cards"], name), "rb").read()


def test_manifest_replay_bitwise(runs, tmp_path):
    out = str(tmp_path / "replay")
    manifest = os.path.join(runs["bo"], "run_manifest.json")
    assert main(["run-bo", "--config", manifest, "--out", out, "--quiet"]) == 0
    for name in json.load(open(manifest))["artifacts"]:
        a = open(os.path.join(out, name), "rb").read()
        assert a == open(os.path.join(runs["bo"], name), "rb").read(), name


def test_bo_latent_partition(runs):
    all_ = read_csv(os.path.join(runs["bo"], "latent_all.csv"))
    exp = read_csv(os.path.join(runs["bo"], "latent_explored.csv"))
    assert len(all_["d1"]) == 40 and len(exp["d1"]) == 8
    assert sorted(exp["acquisition_order"]) == list(range(8))
    best = read_csv(os.path.join(runs["bo"], "cumulative_best.csv"))
    assert list(best) == ["step", "dkl_bo", "random"] and len(best["step"]) == 3


@pytest.fixture(scope="module")
def plots(runs, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("plots"))
    for key in ("dkl", "vae", "bo"):
        assert main(["export-plots", "--set", f"source={runs[key]}", *TINY_HYST,
                     "--out", os.path.join(out, key), "--quiet"]) == 0
    return out


def test_scatter_rows_match_latent(runs, plots):
    latent = read_csv(os.path.join(runs["bo"], "latent_all.csv"))
    sc = read_csv(os.path.join(plots, "bo", "all_target.csv"))
    assert list(sc) == ["x", "y", "color_value", "color_key"]
    assert len(sc["x"]) == len(latent["d1"])
    assert np.array_equal(sc["color_value"], latent["target"])
    unexp = read_csv(os.path.join(plots, "bo", "unexplored_target.csv"))
    assert len(unexp["x"]) == 32


def test_pngs_are_valid(plots):
    pngs = [os.path.join(r, f) for r, _, fs in os.walk(plots) for f in fs if f.endswith(".png")]
    assert len(pngs) > 10
    for p in pngs:
        names = png_chunks(p)
        assert names[0] == b"IHDR" and names[-1] == b"IEND" and b"IDAT" in names


def test_decoded_grid_exported(plots):
    assert os.path.exists(os.path.join(plots, "vae", "decoded_grid.png"))
    assert os.path.exists(os.path.join(plots, "bo", "cumulative_best.png"))


def test_heatmap_png_rebuilds_from_csv(plots, tmp_path):
    base = os.path.join(plots, "dkl", "heatmap_latent_target")
    grid, xe, ye, counts = read_heatmap_csv(base + ".csv")
    assert counts.sum() == 40
    again = str(tmp_path / "h.png")
    plotting.heatmap_png(again, grid, xe, ye, title="binned mean of target", xlabel="d1", ylabel="d2")
    assert open(again, "rb").read() == open(base + ".png", "rb").read()


def test_hysteresis_export(plots):
    loop = read_csv(os.path.join(plots, "dkl", "hysteresis_loop.csv"))
    assert list(loop) == ["E_x", "mean_Px"] and len(loop["E_x"]) == 40
