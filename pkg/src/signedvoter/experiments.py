"""Sweep runner: configs, per-cell execution, CSV tables and a run manifest.

A config is a flat text file of ``key = value`` lines; repeating a key (or
giving a comma list) builds a grid. Every cell of the grid gets its own seed
derived from ``(seed, cell index)`` so a run is fully determined by its config.
"""
from __future__ import annotations

import csv
import functools
import hashlib
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .game import GameConfig, play_game
from .graph import largest_connected_component, read_edge_csv
from .meanfield import limiting_slopes, mf_optimize_eps, template
from .netgen import make_topology
from .optimize import OptimizerOptions, adversary_strategy, gradient_ascent, negative_share, relative_gain

log = logging.getLogger(__name__)

# experiment kind -> what it reproduces
KINDS = {
    "bitcoin": "gain of sign-aware optimisation on a real signed edge list across budget ratios",
    "topology_sweep": "relative gain against a uniform adversary as tie dispersion varies, per topology",
    "heatmap": "relative gain over budget ratio x tie dispersion for fixed adversary strategies",
    "eps_sweep": "relative gain as the adversary's negative-tie share varies",
    "meanfield_compare": "mean-field optimum against numerical gradient ascent",
    "limiting_correlation": "slopes of optimal allocations against competitor allocation and negative degree",
    "game_sweep": "best-response equilibria and knowledge gain across budget ratios",
}

# axes each kind sweeps over (besides the replication index)
AXES = {
    "bitcoin": ("budget_ratio",),
    "topology_sweep": ("topology", "p", "budget_ratio"),
    "heatmap": ("adversary", "budget_ratio", "p"),
    "eps_sweep": ("p", "budget_ratio", "eps_b"),
    "meanfield_compare": ("topology", "p", "budget_ratio"),
    "limiting_correlation": ("regime", "p"),
    "game_sweep": ("game_mode", "topology", "budget_ratio"),
}

METRICS = {
    "bitcoin": ("n_nodes", "x_signed", "x_mirrored", "x_dropped", "gain", "gain_dropped"),
    "topology_sweep": ("gain", "x_signed", "x_mirrored", "eps_signed", "eps_mirrored"),
    "heatmap": ("gain", "x_signed", "x_mirrored", "eps_signed", "eps_mirrored"),
    "eps_sweep": ("gain", "x_signed", "x_mirrored", "eps_signed", "eps_mirrored"),
    "meanfield_compare": ("eps_mf", "x_mf", "eps_ga", "x_ga", "eps_diff", "x_diff"),
    "limiting_correlation": ("slope", "predicted_slope", "agree"),
    "game_sweep": ("eps_a_signed", "eps_b_signed", "eps_a_blind", "eps_b_blind", "true_xa_signed",
                   "true_xa_blind", "gain", "rounds_signed", "rounds_blind", "converged"),
}

# regime -> (topology, <k_a>, <k_b>, <a>, <b>, adversary, regressor)
REGIMES = {
    "b_positive": ("sf-reg", 50, 2, 5.5, 0.5, "degree_proportional", "b"),
    "b_negative": ("sf-reg", 50, 2, 4.5, 5.0, "degree_proportional", "b"),
    "kb_positive": ("reg-er", 50, 2, 7.0, 0.5, "uniform", "kb"),
    "kb_negative": ("reg-sf", 16, 4, 1.0, 1.0, "uniform", "kb"),
}

_LIST_KEYS = {"topology", "p", "budget_ratio", "eps_b", "adversary", "regime", "game_mode"}


class ExperimentError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    name: str = ""
    topology: list = field(default_factory=lambda: ["cp-reg-high"])
    p: list = field(default_factory=lambda: [0.5])
    budget_ratio: list = field(default_factory=lambda: [1.0])
    eps_b: list = field(default_factory=lambda: [0.5])
    adversary: list = field(default_factory=lambda: ["uniform"])
    regime: list = field(default_factory=lambda: list(REGIMES))
    game_mode: list = field(default_factory=lambda: ["meanfield"])
    reps: int = 1
    seed: int = 0
    n: int = 1000
    ka: float = 16.0
    kb: float = 4.0
    b_budget: float = 1.0
    starts: int = 1
    eta: float | None = None
    mu: float = 1e-7
    graph: str = ""
    directed: bool = True
    max_rounds: int = 200
    out_dir: str = "results"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ExperimentError(f"unknown experiment kind {self.kind!r}; choose from {sorted(KINDS)}")
        for key in AXES[self.kind]:
            if not getattr(self, key):
                raise ExperimentError(f"grid {key!r} is empty")
        if self.reps < 1:
            raise ExperimentError("reps must be >= 1")
        if self.kind == "bitcoin" and not self.graph:
            raise ExperimentError("kind bitcoin needs graph = <edge csv>")
        for r in self.regime:
            if r not in REGIMES:
                raise ExperimentError(f"unknown regime {r!r}")
        for m in self.game_mode:
            if m not in ("numeric", "meanfield"):
                raise ExperimentError(f"unknown game_mode {m!r}")
        self.name = self.name or self.kind

    def canonical(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _coerce(key, raw: str, ftype):
    if key in _LIST_KEYS:
        items = [v.strip() for v in raw.split(",") if v.strip()]
        if key in ("p", "budget_ratio", "eps_b"):
            return [float(v) for v in items]
        return [v.lower() for v in items]
    if ftype in ("int",):
        return int(raw)
    if ftype in ("float", "float | None"):
        return None if raw.lower() in ("none", "") else float(raw)
    if ftype == "bool":
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ExperimentError(f"{key}: expected a boolean, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    return raw


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, repeated list keys accumulate."""
    types = {f.name: f.type for f in ExperimentConfig.__dataclass_fields__.values()}
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ExperimentError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ExperimentError(f"line {lineno}: unknown key {key!r}")
        try:
            val = _coerce(key, raw, types[key])
        except ValueError as e:
            raise ExperimentError(f"line {lineno}: {e}") from None
        if key in _LIST_KEYS:
            values.setdefault(key, []).extend(val)
        elif key in values:
            raise ExperimentError(f"line {lineno}: key {key!r} given twice")
        else:
            values[key] = val
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "kind" not in values:
        raise ExperimentError("config needs a 'kind'")
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), **overrides)


# ---------------------------------------------------------------------------
# cells


def cell_grid(cfg: ExperimentConfig) -> list[dict]:
    axes = AXES[cfg.kind]
    grids = [getattr(cfg, a) for a in axes]
    cells = []
    for idx, (values, rep) in enumerate(itertools.product(itertools.product(*grids), range(cfg.reps))):
        cell = dict(zip(axes, values))
        cell["rep"] = rep
        cell["cell"] = idx
        cell["seed"] = int(np.random.SeedSequence([cfg.seed, idx]).generate_state(1)[0])
        cells.append(cell)
    return cells


def _opts(cfg, seed, **kw):
    return OptimizerOptions(learning_rate=cfg.eta, tolerance=cfg.mu, rng_seed=seed, starts=cfg.starts, **kw)


@functools.lru_cache(maxsize=4)
def _dataset(path: str, directed: bool):
    return largest_connected_component(read_edge_csv(path, directed=directed))


def _gain_cell(cfg, cell, adversary):
    g = make_topology(cell["topology"], n=cfg.n, p=cell["p"], ka=cfg.ka, kb=cfg.kb, seed=cell["seed"])
    B_B = cfg.b_budget * g.n
    p_B = adversary_strategy(g, adversary, B_B)
    res = relative_gain(g, p_B, cell["budget_ratio"] * B_B, _opts(cfg, cell["seed"]), repeats=1)
    a, b = res.results[0]
    return {"gain": res.gain, "x_signed": res.x_signed, "x_mirrored": res.x_mirrored,
            "eps_signed": negative_share(g, a.p_star), "eps_mirrored": negative_share(g, b.p_star)}


def _bitcoin_cell(cfg, cell):
    g = _dataset(cfg.graph, cfg.directed)
    p_B = np.full(g.n, cfg.b_budget)
    B_A = cell["budget_ratio"] * cfg.b_budget * g.n
    xs = {m: gradient_ascent(g, p_B, B_A, _opts(cfg, cell["seed"], mode=m)).true_vote_share
          for m in ("signed", "mirrored", "dropped")}
    return {"n_nodes": g.n, "x_signed": xs["signed"], "x_mirrored": xs["mirrored"], "x_dropped": xs["dropped"],
            "gain": xs["signed"] / xs["mirrored"] - 1, "gain_dropped": xs["signed"] / xs["dropped"] - 1}


def _meanfield_cell(cfg, cell):
    p, ratio = cell["p"], cell["budget_ratio"]
    mf = mf_optimize_eps(template(cell["topology"], p, cfg.ka, cfg.kb), ratio * cfg.b_budget, cfg.b_budget)
    g = make_topology(cell["topology"], n=cfg.n, p=p, ka=cfg.ka, kb=cfg.kb, seed=cell["seed"])
    res = gradient_ascent(g, np.full(g.n, cfg.b_budget), ratio * cfg.b_budget * g.n, _opts(cfg, cell["seed"]))
    eps_ga = negative_share(g, res.p_star)
    return {"eps_mf": mf.eps, "x_mf": mf.x_star, "eps_ga": eps_ga, "x_ga": res.true_vote_share,
            "eps_diff": abs(mf.eps - eps_ga), "x_diff": abs(mf.x_star - res.true_vote_share)}


def binned_slope(values, regressor, other=None, bins: int = 10) -> float:
    """Least-squares slope of binned means of ``values`` against ``regressor``.

    Nodes are grouped by ``other`` (held fixed, e.g. negative degree) and by
    quantile bins of ``regressor``; the slope is fitted on bin means with one
    intercept per ``other`` group.
    """
    values, regressor = np.asarray(values, float), np.asarray(regressor, float)
    other = np.zeros_like(values) if other is None else np.asarray(other, float)
    xs, ys, groups = [], [], []
    for gval in np.unique(other):
        sel = other == gval
        r, v = regressor[sel], values[sel]
        edges = np.unique(np.quantile(r, np.linspace(0, 1, bins + 1)))
        if len(edges) < 2:
            if len(np.unique(r)) == 1:
                xs.append(r[0]), ys.append(v.mean()), groups.append(gval)
            continue
        idx = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, len(edges) - 2)
        for k in np.unique(idx):
            xs.append(r[idx == k].mean()), ys.append(v[idx == k].mean()), groups.append(gval)
    xs, ys, groups = map(np.asarray, (xs, ys, groups))
    labels = np.unique(groups)
    design = np.column_stack([xs] + [(groups == lab).astype(float) for lab in labels])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise ExperimentError("regressor does not vary within groups")
    coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
    return float(coef[0])


def _limiting_cell(cfg, cell):
    topo, ka, kb, mean_a, mean_b, adversary, regressor = REGIMES[cell["regime"]]
    g = make_topology(topo, n=cfg.n, p=cell["p"], ka=ka, kb=kb, seed=cell["seed"])
    p_B = adversary_strategy(g, adversary, mean_b * g.n)
    res = gradient_ascent(g, p_B, mean_a * g.n, _opts(cfg, cell["seed"]))
    k_b = np.asarray(g.neg_in_strength)
    slope_b, slope_kb = limiting_slopes(mean_a, mean_b, float(k_b.mean()))
    if regressor == "b":
        slope, predicted = binned_slope(res.p_star, p_B, other=k_b), slope_b
    else:
        slope, predicted = binned_slope(res.p_star, k_b), slope_kb
    return {"slope": slope, "predicted_slope": predicted, "agree": float(np.sign(slope) == np.sign(predicted))}


def _game_cell(cfg, cell):
    ratio = cell["budget_ratio"]
    if cell["game_mode"] == "numeric":
        g = make_topology(cell["topology"], n=cfg.n, p=cfg.p[0], ka=cfg.ka, kb=cfg.kb, seed=cell["seed"])
        B_B = cfg.b_budget * g.n
        base = dict(budget_a=ratio * B_B, budget_b=B_B, graph=g, max_rounds=cfg.max_rounds, mu=cfg.mu,
                    eta=cfg.eta if cfg.eta is not None else 5.0)
    else:
        base = dict(budget_a=ratio * cfg.b_budget, budget_b=cfg.b_budget, max_rounds=cfg.max_rounds,
                    template=template(cell["topology"], cfg.p[0], cfg.ka, cfg.kb))
    signed = play_game(GameConfig("signed", "blind", **base), seed=cell["seed"])
    blind = play_game(GameConfig("blind", "blind", **base), seed=cell["seed"])
    return {"eps_a_signed": signed.eps[0], "eps_b_signed": signed.eps[1],
            "eps_a_blind": blind.eps[0], "eps_b_blind": blind.eps[1],
            "true_xa_signed": signed.true_utilities[0], "true_xa_blind": blind.true_utilities[0],
            "gain": signed.true_utilities[0] - blind.true_utilities[0],
            "rounds_signed": signed.round, "rounds_blind": blind.round,
            "converged": float(signed.converged and blind.converged)}


def run_cell(cfg: ExperimentConfig, cell: dict) -> dict:
    """Run one grid cell; failures become a ``status`` entry instead of an exception."""
    kind = cfg.kind
    try:
        if kind == "bitcoin":
            out = _bitcoin_cell(cfg, cell)
        elif kind == "topology_sweep":
            out = _gain_cell(cfg, cell, cfg.adversary[0])
        elif kind == "heatmap":
            out = _gain_cell(cfg, {**cell, "topology": cfg.topology[0]}, cell["adversary"])
        elif kind == "eps_sweep":
            out = _gain_cell(cfg, {**cell, "topology": cfg.topology[0]}, f"eps_split:{cell['eps_b']}")
        elif kind == "meanfield_compare":
            out = _meanfield_cell(cfg, cell)
        elif kind == "limiting_correlation":
            out = _limiting_cell(cfg, cell)
        else:
            out = _game_cell(cfg, cell)
        status = "ok"
    except Exception as e:  # recorded per cell; the sweep carries on
        log.warning("cell %d failed: %s", cell["cell"], e)
        out, status = {}, f"error: {type(e).__name__}: {e}".replace("\n", " ")
    return {**cell, **{m: out.get(m, float("nan")) for m in METRICS[kind]}, "status": status}


# ---------------------------------------------------------------------------
# tables


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(round(v, 12))
    return str(v)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r[h]) for h in header])


def aggregate(kind: str, rows: list[dict]) -> list[dict]:
    """Mean and 95% CI half-width (1.96 s / sqrt n) per metric over ``status == ok`` replications."""
    axes = AXES[kind]
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(r[a] for a in axes), []).append(r)
    out = []
    for key, members in groups.items():
        ok = [m for m in members if m["status"] == "ok"]
        rec = dict(zip(axes, key))
        rec["n_ok"], rec["n_failed"] = len(ok), len(members) - len(ok)
        for metric in METRICS[kind]:
            vals = np.array([m[metric] for m in ok], dtype=float)
            rec[f"{metric}_mean"] = float(vals.mean()) if len(vals) else float("nan")
            rec[f"{metric}_ci95"] = float(1.96 * vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        rec["status"] = "ok" if ok else "failed"
        out.append(rec)
    return out


def _header(kind, aggregated: bool):
    if aggregated:
        return [*AXES[kind], "n_ok", "n_failed",
                *itertools.chain.from_iterable((f"{m}_mean", f"{m}_ci95") for m in METRICS[kind]), "status"]
    return [*AXES[kind], "rep", "cell", "seed", *METRICS[kind], "status"]


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs: int = 1) -> dict:
    """Run every cell, write ``<name>_cells.csv``, ``<name>.csv`` and ``manifest.json``; return the manifest."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = cell_grid(cfg)
    t0 = time.time()
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_cell, itertools.repeat(cfg), cells))
    else:
        rows = [run_cell(cfg, c) for c in cells]
    wall = time.time() - t0
    cells_file, table_file = f"{cfg.name}_cells.csv", f"{cfg.name}.csv"
    _write_csv(out / cells_file, _header(cfg.kind, False), rows)
    _write_csv(out / table_file, _header(cfg.kind, True), aggregate(cfg.kind, rows))
    manifest_path = out / "manifest.json"
    manifest = {"version": __version__, "experiments": {}}
    if manifest_path.exists():
        try:
            manifest = json.loads(manifest_path.read_text())
        except json.JSONDecodeError:
            log.warning("overwriting unreadable manifest %s", manifest_path)
    entry = {
        "kind": cfg.kind, "config": asdict(cfg), "config_hash": cfg.digest(), "master_seed": cfg.seed,
        "cell_seeds": [c["seed"] for c in cells], "files": {"cells": cells_file, "table": table_file},
        "n_cells": len(cells), "n_failed": sum(r["status"] != "ok" for r in rows),
        "wall_time_s": wall, "jobs": jobs,
    }
    manifest["version"] = __version__
    manifest.setdefault("experiments", {})[cfg.name] = entry
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return entry


# ---------------------------------------------------------------------------
# summaries

# kind -> (series axis, metric, reducer, position axes)
HEADLINES = {
    "bitcoin": (None, "gain", "max", ("budget_ratio",)),
    "topology_sweep": ("topology", "gain", "max", ("p",)),
    "heatmap": ("adversary", "gain", "max", ("budget_ratio", "p")),
    "eps_sweep": ("p", "gain", "max", ("eps_b",)),
    "meanfield_compare": ("topology", "eps_diff", "max", ("p",)),
    "limiting_correlation": ("regime", "agree", "mean", ()),
    "game_sweep": ("topology", "gain", "min", ("budget_ratio",)),
}


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(results_dir) -> list[dict]:
    """Headline number per experiment and series; writes ``summary.csv`` and returns its rows."""
    results_dir = Path(results_dir)
    path = results_dir / "manifest.json"
    if not path.exists():
        raise ExperimentError(f"no manifest.json in {results_dir}")
    try:
        manifest = json.loads(path.read_text())
        experiments = manifest["experiments"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ExperimentError(f"corrupt manifest {path}: {e}") from None
    summary = []
    for name, entry in sorted(experiments.items()):
        kind = entry["kind"]
        rows = read_csv(results_dir / entry["files"]["cells"])
        ok = [r for r in rows if r["status"] == "ok"]
        skipped = len(rows) - len(ok)
        series_axis, metric, reducer, pos_axes = HEADLINES[kind]
        axes = AXES[kind]
        series = sorted({r[series_axis] for r in ok}) if series_axis else [""]
        for s in series:
            members = [r for r in ok if not series_axis or r[series_axis] == s]
            groups: dict = {}
            for r in members:
                groups.setdefault(tuple(r[a] for a in axes), []).append(float(r[metric]))
            means = {k: float(np.mean(v)) for k, v in groups.items()}
            if reducer == "mean":
                key, value = None, float(np.mean([float(r[metric]) for r in members]))
            else:
                pick = max if reducer == "max" else min
                key = pick(means, key=means.get)
                value = means[key]
            at = "" if key is None else ";".join(f"{a}={key[axes.index(a)]}" for a in pos_axes)
            summary.append({"experiment": name, "kind": kind, "series": s, "metric": f"{reducer}_{metric}",
                            "value": value, "at": at, "n_ok": len(members), "n_skipped": skipped})
    _write_csv(results_dir / "summary.csv",
               ["experiment", "kind", "series", "metric", "value", "at", "n_ok", "n_skipped"], summary)
    return summary
