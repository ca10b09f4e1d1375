"""Experiment commands behind the CLI.

Each ``cmd_*`` function takes a fully resolved config dict and an output
directory, writes its artifacts there, and returns the list of artifact
paths (relative to ``out``). The CLI wraps them with a run manifest.
"""

import os
import numpy as np

from . import ferrosim, plotting
from .analysis import binned_mean_surface
from .bo import AcquisitionSpec, bo_run, random_baseline, write_trace_csv
from .cards import CardsConfig, encode_target, generate_cards_dataset
from .config import ConfigError
from .dkl import DklConfig, dkl_embed, dkl_predict, dkl_train
from .errors import LoadFailure
from .gp import KernelHyper
from .seeding import derive_seed
from .storage import (
    DatasetContainer,
    load_dataset,
    read_csv,
    save_dataset,
    save_dkl,
    save_vae,
    write_csv,
)
from .vae import VaeConfig, vae_decode_grid, vae_embed, vae_train

CARD_TARGETS = ("ordinal_suit", "rotation", "shear")


class MissingArtifact(ConfigError):
    pass


# dataset helpers -----------------------------------------------------------

def open_dataset(path):
    if not path:
        raise ConfigError("config key 'dataset' is required")
    try:
        return load_dataset(path)
    except LoadFailure as exc:
        raise ConfigError(f"cannot load dataset {path!r}: {exc}") from exc


def is_cards(ds):
    return "suit" in ds.meta


def resolve_target(ds, spec):
    """Target vector named ``spec``: a stored target, or a card-suit encoding."""
    if spec in ds.targets:
        return np.asarray(ds.targets[spec], dtype=np.float64)
    if is_cards(ds) and (spec in CARD_TARGETS or spec.startswith("one_vs_rest:")):
        return encode_target(ds.meta["suit"], spec, ds.meta.get("rotation_rad"),
                             ds.meta.get("shear_rad"))
    known = list(ds.targets) + (list(CARD_TARGETS) + ["one_vs_rest:<suit>"] if is_cards(ds) else [])
    raise ConfigError(f"dataset has no target {spec!r}; available: {known}")


def ground_truth_columns(ds):
    """All per-row ground truth (meta columns plus stored targets), for export."""
    cols = {k: np.asarray(v) for k, v in ds.meta.items()}
    cols.update({k: np.asarray(v) for k, v in ds.targets.items()})
    return cols


def resolve_scaling(mode, ds):
    if mode == "auto":
        return "none" if is_cards(ds) else "standardize"
    if mode not in SCALINGS:
        raise ConfigError(f"unknown input_scaling {mode!r}")
    return mode


SCALINGS = ("none", "standardize", "minmax", "minmax_columns")


def scale_inputs(x, mode):
    """Affine rescaling of an input matrix; all modes but ``minmax_columns`` use one scalar pair."""
    if mode == "none":
        return x, (0.0, 1.0)
    if mode == "minmax_columns":
        lo, hi = x.min(axis=0), x.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        return (x - lo) / span, (lo, span)
    if mode == "standardize":
        shift, scale = float(x.mean()), float(x.std()) or 1.0
    else:
        lo, hi = float(x.min()), float(x.max())
        shift, scale = lo, (hi - lo) or 1.0
    return (x - shift) / scale, (shift, scale)


def default_hidden(ds):
    return [256, 64] if is_cards(ds) else [64, 64]


def dkl_config_from(cfg_dkl, ds, seed):
    hidden = cfg_dkl["hidden_sizes"]
    if hidden is None:
        hidden = default_hidden(ds)
        cfg_dkl["hidden_sizes"] = hidden
    return DklConfig(tuple(int(h) for h in hidden), int(cfg_dkl["steps"]), float(cfg_dkl["lr"]),
                     seed, KernelHyper())


def sim_config_from(cfg_sim):
    return ferrosim.SimConfig(**cfg_sim)


# generation ---------------------------------------------------------------

def cmd_gen_cards(cfg, out, progress=None):
    data = generate_cards_dataset(CardsConfig(int(cfg["per_suit"]), int(cfg["size"]), int(cfg["seed"])))
    container = DatasetContainer(
        data.inputs,
        meta={"suit": data.suits, "rotation_rad": data.rotations, "shear_rad": data.shears},
        seed=int(cfg["seed"]),
        source="cards",
    )
    save_dataset(out, container)
    return ["manifest.json", "inputs.f64", "meta.csv"]


def family_config_from(cfg, seed):
    return ferrosim.FieldFamilyConfig(
        int(cfg["n_curves"]), int(cfg["t_samples"]),
        tuple(cfg["amplitude_range"]), tuple(cfg["growth_range"]),
        tuple(cfg["frequency_range"]), tuple(cfg["offset_range"]), seed,
    )


def _field_meta(curves):
    p = np.array([[c.params.amplitude, c.params.growth, c.params.frequency, c.params.offset]
                  for c in curves])
    return {"A": p[:, 0], "alpha_f": p[:, 1], "omega_f": p[:, 2], "B": p[:, 3]}


def cmd_gen_fields(cfg, out, progress=None):
    curves, matrix = ferrosim.generate_field_family(family_config_from(cfg, int(cfg["seed"])))
    save_dataset(out, DatasetContainer(matrix, meta=_field_meta(curves), seed=int(cfg["seed"]),
                                       source="fields"))
    return ["manifest.json", "inputs.f64", "meta.csv"]


def cmd_simulate_sweep(cfg, out, progress=None):
    seed = int(cfg["seed"])
    if cfg["fields"]:
        ds = open_dataset(cfg["fields"])
        matrix, meta = ds.inputs, dict(ds.meta)
    else:
        curves, matrix = ferrosim.generate_field_family(family_config_from(cfg["family"], seed))
        meta = _field_meta(curves)
    sim = sim_config_from(cfg["sim"])
    targets = ferrosim.sweep_targets(matrix, sim, seed=seed, batch_size=int(cfg["batch_size"]))
    save_dataset(out, DatasetContainer(matrix, targets=targets, meta=meta, seed=seed,
                                       source="ferrosim-sweep"))
    n = matrix.shape[0]
    table = {"curve_index": np.arange(n), **meta, **targets}
    write_csv(os.path.join(out, "sweep.csv"), list(table), table)
    return (["manifest.json", "inputs.f64", "meta.csv", "sweep.csv"]
            + [f"targets_{k}.f64" for k in targets])


# models -------------------------------------------------------------------

def _latent_table(points, names, extra):
    table = {"index": np.arange(points.shape[0]), names[0]: points[:, 0], names[1]: points[:, 1]}
    table.update(extra)
    return table


def cmd_train_dkl_static(cfg, out, progress=None):
    ds = open_dataset(cfg["dataset"])
    seed = int(cfg["seed"])
    y = resolve_target(ds, cfg["target"])
    mode = resolve_scaling(cfg["input_scaling"], ds)
    cfg["input_scaling"] = mode
    x, _ = scale_inputs(ds.inputs, mode)
    dcfg = dkl_config_from(cfg["dkl"], ds, derive_seed(seed, "dkl-static"))
    model = dkl_train(x, y, dcfg)
    save_dkl(os.path.join(out, "dkl.ckpt"), model)
    z = dkl_embed(model, x)
    pred = dkl_predict(model, x)
    table = _latent_table(z, ("d1", "d2"), {
        "pred_mean": pred.mean, "pred_std": np.sqrt(pred.variance), "target": y,
        **ground_truth_columns(ds),
    })
    write_csv(os.path.join(out, "latent.csv"), list(table), table)
    write_csv(os.path.join(out, "objective_trace.csv"), ["step", "objective"],
              {"step": np.arange(model.steps), "objective": np.asarray(model.objective_trace)})
    return ["dkl.ckpt", "latent.csv", "objective_trace.csv"]


def cmd_train_vae(cfg, out, progress=None):
    ds = open_dataset(cfg["dataset"])
    seed = int(cfg["seed"])
    mode = cfg["input_scaling"]
    if mode == "auto":
        mode = "none" if is_cards(ds) else "minmax_columns"
    cfg["input_scaling"] = resolve_scaling(mode, ds)
    x, _ = scale_inputs(ds.inputs, cfg["input_scaling"])
    v = cfg["vae"]
    vcfg = VaeConfig(tuple(v["hidden_sizes"]), int(v["epochs"]), float(v["lr"]),
                     int(v["batch_size"]), float(v["beta"]), derive_seed(seed, "vae"))
    hook = None
    if progress:
        def hook(epoch, losses):
            progress(f"epoch {epoch + 1}/{vcfg.epochs} loss {losses[0]:.4f}")
    model = vae_train(x, vcfg, progress=hook)
    save_vae(os.path.join(out, "vae.ckpt"), model)
    z = vae_embed(model, x)
    table = _latent_table(z, ("z1", "z2"), ground_truth_columns(ds))
    write_csv(os.path.join(out, "latent.csv"), list(table), table)
    trace = np.asarray(model.loss_trace).reshape(-1, 3)
    write_csv(os.path.join(out, "loss_trace.csv"), ["epoch", "total", "reconstruction", "kl"],
              {"epoch": np.arange(len(trace)), "total": trace[:, 0],
               "reconstruction": trace[:, 1], "kl": trace[:, 2]})
    grid_n = int(cfg["grid_n"])
    grid = vae_decode_grid(model, grid_n).reshape(grid_n * grid_n, -1)
    save_dataset(os.path.join(out, "decoded_grid"),
                 DatasetContainer(grid, seed=seed,
                                  source=f"vae-decoded-grid:{'image' if is_cards(ds) else 'curve'}"))
    return ["vae.ckpt", "latent.csv", "loss_trace.csv", "decoded_grid/manifest.json",
            "decoded_grid/inputs.f64"]


# active learning -----------------------------------------------------------

def make_oracle(cfg, ds, x_raw):
    kind = cfg["oracle"]
    if kind == "column":
        y = resolve_target(ds, cfg["target"])
        return lambda i: float(y[i])
    if kind == "ferrosim":
        if cfg["target"] not in ferrosim.TARGETS:
            raise ConfigError(f"ferrosim oracle target must be one of {list(ferrosim.TARGETS)}")
        sim = sim_config_from(cfg["sim"])
        seed = int(ds.seed)

        def oracle(i):
            return float(ferrosim.sweep_targets(x_raw[i:i + 1], sim, seed=seed)[cfg["target"]][0])

        return oracle
    raise ConfigError(f"unknown oracle {kind!r}")


def cmd_run_bo(cfg, out, progress=None):
    ds = open_dataset(cfg["dataset"])
    seed = int(cfg["seed"])
    n_init, n_steps = int(cfg["n_init"]), int(cfg["n_steps"])
    if not 1 <= n_init < ds.n_rows:
        raise ConfigError(f"n_init={n_init} must be in [1, pool size {ds.n_rows})")
    mode = resolve_scaling(cfg["input_scaling"], ds)
    cfg["input_scaling"] = mode
    x, _ = scale_inputs(ds.inputs, mode)
    oracle = make_oracle(cfg, ds, ds.inputs)
    spec = AcquisitionSpec(float(cfg["lambda"]), float(cfg["exponent"]))
    dcfg = dkl_config_from(cfg["dkl"], ds, 0)
    hook = None
    if progress:
        def hook(k, st):
            progress(f"step {k + 1}/{n_steps} best {st.best():.6g}")
    state, model = bo_run(x, oracle, n_init, n_steps, spec, seed, dcfg, progress=hook)
    artifacts = ["trace.csv", "cumulative_best.csv", "dkl.ckpt", "latent_all.csv",
                 "latent_explored.csv", "latent_unexplored.csv"]
    write_trace_csv(os.path.join(out, "trace.csv"), state.trace)
    curves = {"step": np.arange(len(state.trace)),
              "dkl_bo": np.array([r.cumulative_best for r in state.trace])}
    if cfg["baseline"] == "random":
        base = random_baseline(ds.n_rows, oracle, n_init, n_steps, seed)
        write_trace_csv(os.path.join(out, "baseline_trace.csv"), base.trace)
        curves["random"] = np.array([r.cumulative_best for r in base.trace])
        artifacts.insert(1, "baseline_trace.csv")
    elif cfg["baseline"] != "none":
        raise ConfigError(f"unknown baseline {cfg['baseline']!r}")
    write_csv(os.path.join(out, "cumulative_best.csv"), list(curves), curves)
    save_dkl(os.path.join(out, "dkl.ckpt"), model)

    z = dkl_embed(model, x)
    pred = dkl_predict(model, x)
    explored = np.zeros(ds.n_rows, dtype=np.int64)
    explored[state.measured_indices] = 1
    order = np.full(ds.n_rows, -1, dtype=np.int64)
    order[state.measured_indices] = np.arange(len(state.measured_indices))
    truth = resolve_target(ds, cfg["target"]) if cfg["oracle"] == "column" else None
    extra = {"explored": explored, "acquisition_order": order,
             "pred_mean": pred.mean, "pred_std": np.sqrt(pred.variance)}
    if truth is not None:
        extra["target"] = truth
    extra.update(ground_truth_columns(ds))
    table = _latent_table(z, ("d1", "d2"), extra)
    cols = list(table)
    write_csv(os.path.join(out, "latent_all.csv"), cols, table)
    for name, flag in (("latent_explored.csv", 1), ("latent_unexplored.csv", 0)):
        keep = explored == flag
        write_csv(os.path.join(out, name), cols, {k: np.asarray(v)[keep] for k, v in table.items()})
    return artifacts


# plots --------------------------------------------------------------------

SCATTER_SKIP = {"index", "d1", "d2", "z1", "z2", "explored", "acquisition_order"}


def write_heatmap_csv(path, grid, x_edges, y_edges, counts):
    rows = {"x_bin": [], "y_bin": [], "x_lo": [], "x_hi": [], "y_lo": [], "y_hi": [],
            "count": [], "mean": []}
    for i in range(grid.shape[0]):
        for j in range(grid.shape[1]):
            rows["x_bin"].append(i)
            rows["y_bin"].append(j)
            rows["x_lo"].append(float(x_edges[i]))
            rows["x_hi"].append(float(x_edges[i + 1]))
            rows["y_lo"].append(float(y_edges[j]))
            rows["y_hi"].append(float(y_edges[j + 1]))
            rows["count"].append(int(counts[i, j]))
            rows["mean"].append(float(grid[i, j]))
    write_csv(path, list(rows), rows)


def read_heatmap_csv(path):
    t = read_csv(path)
    nx, ny = int(t["x_bin"].max()) + 1, int(t["y_bin"].max()) + 1
    grid = np.full((nx, ny), np.nan)
    counts = np.zeros((nx, ny), dtype=np.int64)
    x_edges, y_edges = np.empty(nx + 1), np.empty(ny + 1)
    for k in range(len(t["x_bin"])):
        i, j = int(t["x_bin"][k]), int(t["y_bin"][k])
        grid[i, j] = t["mean"][k]
        counts[i, j] = t["count"][k]
        x_edges[i], x_edges[i + 1] = t["x_lo"][k], t["x_hi"][k]
        y_edges[j], y_edges[j + 1] = t["y_lo"][k], t["y_hi"][k]
    return grid, x_edges, y_edges, counts


def heatmap_from_latent(latent_path, column, csv_path, png_path, bins=20):
    """Binned mean of ``column`` over a latent CSV; the PNG is rendered from the CSV."""
    t = read_csv(latent_path)
    xcol, ycol = ("z1", "z2") if "z1" in t else ("d1", "d2")
    pts = np.column_stack([t[xcol], t[ycol]])
    grid, xe, ye = binned_mean_surface(pts, t[column], bins)
    counts, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=[xe, ye])
    write_heatmap_csv(csv_path, grid, xe, ye, counts)
    g, xe2, ye2, _ = read_heatmap_csv(csv_path)
    plotting.heatmap_png(png_path, g, xe2, ye2, title=f"binned mean of {column}",
                         xlabel=xcol, ylabel=ycol)


def _scatter_exports(latent_path, prefix, out):
    t = read_csv(latent_path)
    xcol, ycol = ("z1", "z2") if "z1" in t else ("d1", "d2")
    made = []
    for col in t:
        if col in SCATTER_SKIP or not isinstance(t[col], np.ndarray):
            continue
        name = f"{prefix}_{col}"
        table = {"x": t[xcol], "y": t[ycol], "color_value": t[col],
                 "color_key": [col] * len(t[xcol])}
        write_csv(os.path.join(out, name + ".csv"), list(table), table)
        plotting.scatter_png(os.path.join(out, name + ".png"), t[xcol], t[ycol], t[col],
                             title=f"{prefix}: {col}", xlabel=xcol, ylabel=ycol,
                             colorbar_label=col)
        made += [name + ".csv", name + ".png"]
    return made


def cmd_export_plots(cfg, out, progress=None):
    src = cfg["source"]
    if not src or not os.path.isdir(src):
        raise MissingArtifact(f"source run directory {src!r} does not exist")
    bins = int(cfg["bins"])
    made = []
    found = False
    for fname, prefix in (("latent.csv", "latent"), ("latent_all.csv", "all"),
                          ("latent_explored.csv", "explored"),
                          ("latent_unexplored.csv", "unexplored")):
        path = os.path.join(src, fname)
        if not os.path.exists(path):
            continue
        found = True
        made += _scatter_exports(path, prefix, out)
        if prefix in ("latent", "all"):
            t = read_csv(path)
            for col in t:
                if col in SCATTER_SKIP or not isinstance(t[col], np.ndarray):
                    continue
                name = f"heatmap_{prefix}_{col}"
                heatmap_from_latent(path, col, os.path.join(out, name + ".csv"),
                                    os.path.join(out, name + ".png"), bins)
                made += [name + ".csv", name + ".png"]
    cum = os.path.join(src, "cumulative_best.csv")
    if os.path.exists(cum):
        found = True
        t = read_csv(cum)
        series = {k: (t["step"], t[k]) for k in t if k != "step"}
        plotting.lines_png(os.path.join(out, "cumulative_best.png"), series,
                           title="best target found", xlabel="acquisition step",
                           ylabel="cumulative best")
        made.append("cumulative_best.png")
    grid_dir = os.path.join(src, "decoded_grid")
    if os.path.isdir(grid_dir):
        found = True
        g = load_dataset(grid_dir)
        n = int(round(np.sqrt(g.n_rows)))
        side = int(round(np.sqrt(g.n_cols)))
        png = os.path.join(out, "decoded_grid.png")
        if g.source.endswith(":image") and side * side == g.n_cols:
            plotting.montage_png(png, g.inputs.reshape(n, n, side, side), title="decoded latent grid")
        else:
            plotting.curve_grid_png(png, g.inputs.reshape(n, n, g.n_cols), title="decoded latent grid")
        made.append("decoded_grid.png")
    if not found:
        raise MissingArtifact(f"no exportable artifacts in {src!r}")
    h = cfg["hysteresis"]
    if h["enabled"]:
        loop = ferrosim.hysteresis_loop(float(h["amplitude"]), int(h["periods"]),
                                        sim_config_from(h["sim"]), int(h["steps_per_period"]),
                                        seed=derive_seed(int(cfg["seed"]), "hysteresis"))
        write_csv(os.path.join(out, "hysteresis_loop.csv"), ["E_x", "mean_Px"],
                  {"E_x": loop[:, 0], "mean_Px": loop[:, 1]})
        plotting.lines_png(os.path.join(out, "hysteresis_loop.png"),
                           {"loop": (loop[:, 0], loop[:, 1])}, title="hysteresis loop",
                           xlabel="E_x", ylabel="mean P_x")
        made += ["hysteresis_loop.csv", "hysteresis_loop.png"]
    return made


COMMANDS = {
    "gen-cards": cmd_gen_cards,
    "gen-fields": cmd_gen_fields,
    "simulate-sweep": cmd_simulate_sweep,
    "train-dkl-static": cmd_train_dkl_static,
    "train-vae": cmd_train_vae,
    "run-bo": cmd_run_bo,
    "export-plots": cmd_export_plots,
}
