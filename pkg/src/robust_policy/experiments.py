"""Experiment harness: configs, per-(gamma, seed) cells, tables and manifests.

Each cell writes its own CSV under ``cells/<tag>/`` so partial runs are kept
and any cell can be re-run in isolation. ``runs/<tag>.csv`` concatenates the
cells in sorted order and ``tables/<tag>.{txt,csv}`` aggregate them.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import json
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .core import BASELINES, ObservedData, RobustnessConfig
from .evaluation import EvaluationReport, aggregate, target_policy_value
from .oracle import OraclePolicy, write_policy_grid
from .ru import TrainConfig, policy_from_model, save_checkpoint, train
from .synthetic import HighDimModel, ToyModel, rct_observe
from .values import make_kind

EXPERIMENTS = ("toy", "highdim", "voting")
RUN_COLUMNS = ("policy", "gamma", "p_target", "seed", "value", "treated_fraction")
DEFAULT_GAMMAS = {"toy": (1.0, 2.0, 3.0, 4.0), "highdim": (1.0, 2.0, 3.0, 4.0),
                  "voting": (1.0, 1.1, 1.2, 1.3, 1.5)}
TABLES = {
    "toy-maxmin": ("toy", "maxmin", None),
    "toy-gain-control": ("toy", "gain", "always_control"),
    "toy-gain-treat": ("toy", "gain", "always_treat"),
    "highdim-maxmin": ("highdim", "maxmin", None),
    "highdim-gain": ("highdim", "gain", "x1_rule"),
    "voting": ("voting", None, None),
}
VOTING_RUNS = (("maxmin", None), ("gain", "always_treat"), ("gain", "always_control"))


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "toy"
    objective: str = "maxmin"
    baseline: Optional[str] = None
    gammas: tuple = (1.0, 2.0, 3.0, 4.0)
    p_targets: tuple = (0.1, 0.2, 0.5, 0.7, 0.9)
    seeds: tuple = (0, 1, 2, 3, 4, 5)
    p_study: float = 0.2
    n_train: int = 20000
    n_val: int = 10000
    n_test: int = 10000
    e: Optional[float] = None
    epochs: int = 50
    batch_size: int = 4000
    learning_rate: float = 1e-2
    grid_points: int = 601
    data: Optional[str] = None
    columns: tuple = ()

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment.name", f"must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.objective not in ("maxmin", "gain"):
            raise ConfigError("experiment.objective", f"must be 'maxmin' or 'gain', got {self.objective!r}")
        if self.objective == "gain" and self.baseline not in BASELINES:
            raise ConfigError("experiment.baseline", f"gain needs one of {BASELINES}, got {self.baseline!r}")
        if self.objective == "maxmin" and self.baseline is not None:
            object.__setattr__(self, "baseline", None)
        for g in self.gammas:
            if not (np.isfinite(g) and g >= 1):
                raise ConfigError("experiment.gammas", f"every gamma must be >= 1, got {g!r}")
        if not self.gammas:
            raise ConfigError("experiment.gammas", "at least one gamma is required")
        if not self.seeds or any(s < 0 for s in self.seeds):
            raise ConfigError("experiment.seeds", "seeds must be nonnegative integers")
        for p in (*self.p_targets, self.p_study):
            if not 0 <= p <= 1:
                raise ConfigError("experiment.p_targets", f"probabilities must lie in [0, 1], got {p!r}")
        for name in ("n_train", "n_val", "n_test", "epochs", "batch_size", "grid_points"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be a positive integer")
        if not self.learning_rate > 0:
            raise ConfigError("training.learning_rate", "must be positive")
        if self.e is not None and not 0 < self.e < 1:
            raise ConfigError("data.e", f"must lie in (0, 1), got {self.e!r}")
        if self.experiment == "voting" and not self.data:
            raise ConfigError("data.path", "the voting experiment needs a data file")

    @property
    def tag(self) -> str:
        return f"{self.experiment}-{self.objective}" + (f"-{self.baseline}" if self.baseline else "")

    @property
    def propensity(self) -> float:
        if self.e is not None:
            return self.e
        return 1.0 / 6.0 if self.experiment == "voting" else 0.5

    def as_dict(self) -> dict:
        d = asdict(self)
        d["columns"] = dict(self.columns)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.as_dict(), sort_keys=True).encode()).hexdigest()


def _floats(text, name):
    try:
        return tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(name, f"expected a list of numbers, got {text!r}") from None


def _ints(text, name):
    try:
        return tuple(int(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(name, f"expected a list of integers, got {text!r}") from None


def _scalar(section, key, cast, name):
    try:
        return cast(section[key])
    except ValueError:
        raise ConfigError(name, f"cannot parse {section[key]!r}") from None


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read an INI config, then apply non-None keyword overrides."""
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise ConfigError("config", f"cannot read {path}")
        if parser.has_section("experiment"):
            s = parser["experiment"]
            if "name" in s:
                values["experiment"] = s["name"].strip()
            for key in ("objective", "baseline"):
                if key in s:
                    values[key] = s[key].strip() or None
            if "gammas" in s:
                values["gammas"] = _floats(s["gammas"], "experiment.gammas")
            if "p_targets" in s:
                values["p_targets"] = _floats(s["p_targets"], "experiment.p_targets")
            if "seeds" in s:
                values["seeds"] = _ints(s["seeds"], "experiment.seeds")
            if "p_study" in s:
                values["p_study"] = _scalar(s, "p_study", float, "experiment.p_study")
        if parser.has_section("data"):
            s = parser["data"]
            for key in ("n_train", "n_val", "n_test", "grid_points"):
                if key in s:
                    values[key] = _scalar(s, key, int, f"data.{key}")
            if "e" in s:
                values["e"] = _scalar(s, "e", float, "data.e")
            if "path" in s:
                values["data"] = s["path"].strip()
        if parser.has_section("training"):
            s = parser["training"]
            for key, cast in (("epochs", int), ("batch_size", int), ("learning_rate", float)):
                if key in s:
                    values[key] = _scalar(s, key, cast, f"training.{key}")
        if parser.has_section("voting.columns"):
            values["columns"] = tuple(sorted(parser["voting.columns"].items()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "gammas" not in values:
        values["gammas"] = DEFAULT_GAMMAS[values.get("experiment", "toy")]
    return ExperimentConfig(**values)


# ---------------------------------------------------------------------------
# Cells
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def _study_model(cfg: ExperimentConfig, p: float):
    return ToyModel(p) if cfg.experiment == "toy" else HighDimModel(p)


def _train_config(cfg, gamma, seed) -> TrainConfig:
    return TrainConfig(
        gamma=gamma, kind=make_kind(cfg.objective, cfg.baseline), e=cfg.propensity,
        epochs_max=cfg.epochs, batch_size=cfg.batch_size, learning_rate=cfg.learning_rate,
        seed=seed,
    )


def cell_path(out_dir, cfg, gamma, seed) -> Path:
    return Path(out_dir) / "cells" / cfg.tag / f"g{gamma:g}-s{seed}.csv"


def _write_rows(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RUN_COLUMNS)
        writer.writerows(rows)
    os.replace(tmp, path)


def _synthetic_cell(cfg: ExperimentConfig, gamma: float, seed: int, out_dir: Path):
    study = _study_model(cfg, cfg.p_study)
    e = cfg.propensity
    tr = rct_observe(study.sample(cfg.n_train, seed, "train"), e, seed, "assign/train")
    va = rct_observe(study.sample(cfg.n_val, seed, "val"), e, seed, "assign/val")
    model = train(tr, va, _train_config(cfg, gamma, seed))
    ckpt = out_dir / "checkpoints" / cfg.tag / f"g{gamma:g}-s{seed}.ckpt"
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, model)
    rc = RobustnessConfig(gamma, e)
    policies = {
        "ru": policy_from_model(model),
        "true": OraclePolicy(study, rc, cfg.objective, baseline=cfg.baseline),
    }
    if cfg.objective == "maxmin":
        policies["regret"] = OraclePolicy(study, rc, "regret")
    rows = []
    for p in cfg.p_targets:
        target = _study_model(cfg, p).sample(cfg.n_test, seed, f"test/p={p:g}")
        for name, pol in policies.items():
            r = target_policy_value(pol, target)
            rows.append([name, _fmt(gamma), _fmt(p), seed, _fmt(r.value), _fmt(r.treated_fraction)])
    if cfg.experiment == "toy":
        xs = np.linspace(-3.0, 3.0, cfg.grid_points)
        grid = out_dir / "grids" / cfg.tag / f"ru-g{gamma:g}-s{seed}.csv"
        grid.parent.mkdir(parents=True, exist_ok=True)
        h = model.h(xs[:, None])
        with open(grid, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("x", "decision", "h"))
            for x, hv in zip(xs, h):
                writer.writerow((_fmt(x), int(hv >= 0.5), _fmt(hv)))
    return rows


@lru_cache(maxsize=2)
def _voting_data(path, columns):
    from .ingest import VotingColumns, load_voting

    return load_voting(path, VotingColumns.from_mapping(dict(columns)) if columns else None)


def ipw_policy_value(decisions, y, w, e) -> float:
    """Inverse-propensity estimate of ``E[Y(policy)]`` from RCT records."""
    decisions = np.asarray(decisions)
    weight = np.where(w == 1, decisions / e, (1 - decisions) / (1.0 - e))
    return float(np.mean(weight * y))


def _voting_cell(cfg: ExperimentConfig, gamma: float, seed: int, out_dir: Path):
    from sklearn.preprocessing import StandardScaler

    from .ingest import semisynthetic_split, write_splits

    data = _voting_data(cfg.data, cfg.columns)
    train_idx, val_idx, test_idx = semisynthetic_split(data, seed)
    split_csv = out_dir / "splits" / f"voting-s{seed}.csv"
    if not split_csv.exists():
        split_csv.parent.mkdir(parents=True, exist_ok=True)
        tmp = split_csv.with_suffix(f".{os.getpid()}.tmp")
        write_splits(tmp, data, (train_idx, val_idx, test_idx))
        os.replace(tmp, split_csv)
    X, y, w, _ = data.arrays()
    scaler = StandardScaler().fit(X[train_idx])
    Xs = scaler.transform(X)
    e = cfg.propensity
    tr = ObservedData(Xs[train_idx], y[train_idx], w[train_idx])
    va = ObservedData(Xs[val_idx], y[val_idx], w[val_idx])
    model = train(tr, va, _train_config(cfg, gamma, seed))
    ckpt = out_dir / "checkpoints" / cfg.tag / f"g{gamma:g}-s{seed}.ckpt"
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, model)
    d = policy_from_model(model).decide(Xs[test_idx])
    value = ipw_policy_value(d, y[test_idx], w[test_idx], e)
    return [["ru", _fmt(gamma), "", seed, _fmt(value), _fmt(d.mean())]]


def run_cell(cfg: ExperimentConfig, gamma: float, seed: int, out_dir) -> Path:
    """Run one (gamma, seed) cell and write its CSV; returns the CSV path."""
    out_dir = Path(out_dir)
    if cfg.experiment == "voting":
        rows = _voting_cell(cfg, gamma, seed, out_dir)
    else:
        rows = _synthetic_cell(cfg, gamma, seed, out_dir)
    path = cell_path(out_dir, cfg, gamma, seed)
    _write_rows(path, rows)
    return path


def _cell_job(args):
    cfg, gamma, seed, out_dir = args
    try:
        run_cell(cfg, gamma, seed, out_dir)
        return gamma, seed, None
    except Exception as exc:  # reported by the runner, other cells continue
        return gamma, seed, f"{type(exc).__name__}: {exc}"


def _versions() -> dict:
    import scipy
    import sklearn

    from . import __version__

    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "scikit-learn": sklearn.__version__,
            "robust_policy": __version__}


def write_config_ini(path, cfg: ExperimentConfig) -> Path:
    """Write the effective configuration back out as an INI file."""
    parser = configparser.ConfigParser()
    parser["experiment"] = {
        "name": cfg.experiment,
        "objective": cfg.objective,
        "baseline": cfg.baseline or "",
        "gammas": ", ".join(_fmt(g) for g in cfg.gammas),
        "p_targets": ", ".join(_fmt(p) for p in cfg.p_targets),
        "seeds": ", ".join(str(v) for v in cfg.seeds),
        "p_study": repr(cfg.p_study),
    }
    parser["data"] = {k: str(getattr(cfg, k)) for k in ("n_train", "n_val", "n_test", "grid_points")}
    if cfg.e is not None:
        parser["data"]["e"] = repr(cfg.e)
    if cfg.data:
        parser["data"]["path"] = str(Path(cfg.data).resolve())
    parser["training"] = {"epochs": str(cfg.epochs), "batch_size": str(cfg.batch_size),
                          "learning_rate": repr(cfg.learning_rate)}
    if cfg.columns:
        parser["voting.columns"] = dict(cfg.columns)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        parser.write(fh)
    return path


def write_manifest(out_dir, cfg: ExperimentConfig, cells, failures) -> Path:
    """Record the config, its hash, versions and a rerun command per cell.

    The effective config is saved next to the manifest as ``<tag>.ini``; each
    rerun command, executed from ``out_dir``, reproduces its cell in place.
    """
    out_dir = Path(out_dir)
    path = out_dir / "manifests" / f"{cfg.tag}.json"
    ini = write_config_ini(out_dir / "manifests" / f"{cfg.tag}.ini", cfg)
    manifest = {
        "config": cfg.as_dict(),
        "config_file": str(ini.relative_to(out_dir)),
        "config_sha256": cfg.digest(),
        "seeds": list(cfg.seeds),
        "gammas": list(cfg.gammas),
        "versions": _versions(),
        "cells": [
            {"gamma": g, "seed": s, "csv": str(cell_path(".", cfg, g, s)),
             "rerun": f"robust-policy run --config {ini.relative_to(out_dir)} --gamma {g:g} --seeds {s} --out ."}
            for g, s in cells
        ],
        "failures": [{"gamma": g, "seed": s, "error": err} for g, s, err in failures],
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def run_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1, log=None):
    """Run every (gamma, seed) cell, then collate runs and tables.

    Returns the list of ``(gamma, seed, error)`` failures.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = [(g, s) for g in cfg.gammas for s in cfg.seeds]
    if cfg.experiment == "toy":
        for g in cfg.gammas:
            grid = out_dir / "grids" / cfg.tag / f"true-g{g:g}.csv"
            grid.parent.mkdir(parents=True, exist_ok=True)
            pol = OraclePolicy(ToyModel(cfg.p_study), RobustnessConfig(g, cfg.propensity),
                               cfg.objective, baseline=cfg.baseline)
            write_policy_grid(grid, pol, np.linspace(-3.0, 3.0, cfg.grid_points))
    jobs_args = [(cfg, g, s, str(out_dir)) for g, s in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_job, jobs_args))
    else:
        results = [_cell_job(a) for a in jobs_args]
    failures = [r for r in results if r[2] is not None]
    for g, s, err in failures:
        if log:
            log(f"cell gamma={g:g} seed={s} failed: {err}")
    collate(out_dir, cfg)
    write_manifest(out_dir, cfg, cells, failures)
    return failures


# ---------------------------------------------------------------------------
# Collation and tables
# ---------------------------------------------------------------------------

def read_cells(out_dir, tag: str):
    """All rows written under ``cells/<tag>``, sorted."""
    rows = []
    base = Path(out_dir) / "cells" / tag
    if not base.is_dir():
        return rows
    for path in sorted(base.glob("*.csv")):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows.extend(reader)
    rows.sort(key=lambda r: (r["policy"], float(r["gamma"]),
                             float(r["p_target"]) if r["p_target"] else -1.0, int(r["seed"])))
    return rows


def collate(out_dir, cfg: ExperimentConfig) -> None:
    out_dir = Path(out_dir)
    rows = read_cells(out_dir, cfg.tag)
    runs = out_dir / "runs" / f"{cfg.tag}.csv"
    _write_rows(runs, [[r[c] for c in RUN_COLUMNS] for r in rows])
    summary = summarize(rows)
    tables = out_dir / "tables"
    tables.mkdir(parents=True, exist_ok=True)
    with open(tables / f"{cfg.tag}.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("policy", "gamma", "p_target", "n_seeds", "value_mean", "value_sd",
                         "treated_mean"))
        for key, rep, k in summary:
            writer.writerow((key[0], _fmt(key[1]), "" if key[2] is None else _fmt(key[2]), k,
                             f"{rep.value:.6f}", f"{rep.sd:.6f}", f"{rep.treated_fraction:.6f}"))
    with open(tables / f"{cfg.tag}.txt", "w") as fh:
        fh.write(format_summary(summary))


def summarize(rows):
    """Aggregate run rows into ``[((policy, gamma, p), report, n_seeds)]``."""
    groups: dict = {}
    for r in rows:
        p = float(r["p_target"]) if r["p_target"] else None
        key = (r["policy"], float(r["gamma"]), p)
        groups.setdefault(key, []).append(EvaluationReport(
            policy=r["policy"], value=float(r["value"]),
            treated_fraction=float(r["treated_fraction"]), n=1,
            gamma=float(r["gamma"]), target=p, seed=int(r["seed"])))
    return [(k, aggregate(v), len(v)) for k, v in sorted(groups.items(), key=lambda kv: (
        kv[0][0], kv[0][1], -1.0 if kv[0][2] is None else kv[0][2]))]


def format_summary(summary) -> str:
    lines = [f"{'policy':<8} {'gamma':>6} {'p_target':>8} {'value':>17} {'treated':>8}"]
    for (pol, g, p), rep, _ in summary:
        pt = "-" if p is None else f"{p:g}"
        lines.append(f"{pol:<8} {g:>6g} {pt:>8} {rep.value:>8.3f} ± {rep.sd:<6.3f} "
                     f"{rep.treated_fraction:>8.3f}")
    return "\n".join(lines) + "\n"


def load_reference() -> dict:
    text = resources.files("robust_policy").joinpath("data/reference_tables.json").read_text()
    return json.loads(text)["tables"]


class MissingRunsError(RuntimeError):
    def __init__(self, missing):
        self.missing = missing
        listing = ", ".join(f"{tag}(gamma={g:g}, seed={s})" for tag, g, s in missing)
        super().__init__(f"missing runs: {listing}")


def _grouped(out_dir, tag):
    return {(k[0], k[1], k[2]): rep for k, rep, _ in summarize(read_cells(out_dir, tag))}


def _present_cells(out_dir, tag):
    return {(float(r["gamma"]), int(r["seed"])) for r in read_cells(out_dir, tag)}


def reproduce_table(table_id: str, out_dir, seeds=(0, 1, 2, 3, 4, 5)):
    """Render a results table with a diff column against the reference values.

    Returns ``(text, rows)`` where ``rows`` are dicts suitable for CSV output.
    Raises :class:`MissingRunsError` listing absent ``(gamma, seed)`` cells.
    """
    if table_id not in TABLES:
        raise ValueError(f"unknown table {table_id!r}; expected one of {sorted(TABLES)}")
    ref = load_reference()[table_id]
    if table_id == "voting":
        return _reproduce_voting(ref, out_dir, seeds)
    experiment, objective, baseline = TABLES[table_id]
    tag = f"{experiment}-{objective}" + (f"-{baseline}" if baseline else "")
    gammas = sorted({float(r["gamma"]) for r in ref["rows"]})
    present = _present_cells(out_dir, tag)
    missing = [(tag, g, s) for g in gammas for s in seeds if (g, s) not in present]
    if missing:
        raise MissingRunsError(missing)
    got = _grouped(out_dir, tag)
    ps = ref["columns"]
    label = {"ru": "RU Regression", "true": "True"}
    header = f"{'Method':<26}" + "".join(f"{'p=' + format(p, 'g'):>28}" for p in ps)
    lines = [table_id, header]
    out_rows = []
    for r in ref["rows"]:
        g = float(r["gamma"])
        cells = []
        for p, (pm, psd) in zip(ps, r["cells"]):
            rep = got.get((r["method"], g, float(p)))
            if rep is None:
                raise MissingRunsError([(tag, g, s) for s in seeds])
            diff = rep.value - pm
            cells.append(f"{rep.value:.3f} ± {rep.sd:.3f} ({diff:+.3f})")
            out_rows.append({"method": r["method"], "gamma": g, "p_target": p,
                             "mean": rep.value, "sd": rep.sd, "reference_mean": pm,
                             "reference_sd": psd, "diff": diff})
        name = f"{label[r['method']]} (Γ={g:g})"
        lines.append(f"{name:<26}" + "".join(f"{c:>28}" for c in cells))
    lines.append("cells: mean ± sd over seeds (difference from reference mean)")
    return "\n".join(lines) + "\n", out_rows


def _reproduce_voting(ref, out_dir, seeds):
    missing, lines, out_rows = [], ["voting",
                                    f"{'Policy':<46}{'value':>24}{'treated':>18}"], []
    reps = {}
    for objective, baseline in VOTING_RUNS:
        tag = f"voting-{objective}" + (f"-{baseline}" if baseline else "")
        gammas = sorted({r["gamma"] for r in ref["rows"]
                         if r["objective"] == objective and r["baseline"] == baseline})
        if objective == "maxmin":
            gammas = sorted(set(gammas) | {1.0})
        present = _present_cells(out_dir, tag)
        missing += [(tag, g, s) for g in gammas for s in seeds if (g, s) not in present]
        reps[tag] = _grouped(out_dir, tag)
    if missing:
        raise MissingRunsError(missing)
    names = {("maxmin", None): "Max-Min", ("gain", "always_treat"): "Max-Min Gain over Always Treat",
             ("gain", "always_control"): "Max-Min Gain over Always Control"}
    for r in ref["rows"]:
        tag = f"voting-{r['objective']}" + (f"-{r['baseline']}" if r["baseline"] else "")
        rep = reps[tag][("ru", float(r["gamma"]), None)]
        name = "Non-Robust" if r["gamma"] == 1.0 else f"{names[(r['objective'], r['baseline'])]} (Γ={r['gamma']:g})"
        dv, dt = rep.value - r["value"], rep.treated_fraction - r["treated_fraction"]
        lines.append(f"{name:<46}{rep.value:>8.4f} ± {rep.sd:.4f} ({dv:+.4f}){rep.treated_fraction:>8.2f} ({dt:+.2f})")
        out_rows.append({"method": name, "gamma": r["gamma"], "p_target": "", "mean": rep.value,
                         "sd": rep.sd, "reference_mean": r["value"], "reference_sd": r["sd"],
                         "diff": dv, "treated_fraction": rep.treated_fraction,
                         "reference_treated": r["treated_fraction"]})
    lines.append("value: IPW mean outcome on the target split, mean ± sd over seeds (diff)")
    return "\n".join(lines) + "\n", out_rows
