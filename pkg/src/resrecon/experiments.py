"""
Experiment runners: sensor-count / basis-count sweeps and fixed sensor lines.

Every random choice is seeded from the config's base seed through
:func:`derive_seed`, so a run is fully determined by its config.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import ConfigError, DataError, NumericalError, ParameterError, ShapeError
from .grid import SnapshotLibrary, center_library, load_snapshots, write_dense_csv
from .metrics import ERROR2_CONVENTION, depth_band_stats, write_band_stats_csv
from .pod import compute_pod, gappy_reconstruct
from .sensing import apply, load_operator, make_operator
from .sparse import Dictionary, choose_epsilon, sparse_reconstruct
from .synth import draw_params, generate_library, generate_snapshot

log = logging.getLogger(__name__)

RECORD_COLUMNS = ("method", "k", "p", "condition", "trial", "seed", "error1", "error2")

_MASK64 = (1 << 64) - 1
# stream tags mixed into seeds
_TEST_FIELD = 1 << 32
_NOISE = 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(*keys: int) -> int:
    """Fold integer keys into a 64-bit seed with the splitmix64 finalizer."""
    h = 0
    for k in keys:
        h = _splitmix64(h ^ (int(k) & _MASK64))
    return h


@dataclass
class ExperimentReport:
    """Records and summaries of one run.

    ``records`` hold one entry per (placement, method, k, p, condition,
    trial), skipped cells included with ``error1 = error2 = None``.
    ``maps`` and ``fields`` are written as dense CSV files by
    :func:`export` and are not part of ``report.json``.
    """

    kind: str
    records: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    band_stats: list = field(default_factory=list)
    spread: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    maps: dict = field(default_factory=dict, repr=False)
    fields: dict = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "records": self.records,
            "aggregates": self.aggregates,
            "band_stats": self.band_stats,
            "spread": self.spread,
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentReport":
        return cls(**{k: doc[k] for k in ("kind", "records", "aggregates", "band_stats", "spread", "metadata")})

    def mean_error(self, **key) -> float:
        """Mean ``error1`` over the records matching ``key`` (skipped ones ignored)."""
        vals = [
            r["error1"]
            for r in self.records
            if r["error1"] is not None and all(r[k] == v for k, v in key.items())
        ]
        return float(np.mean(vals)) if vals else float("nan")


class ProblemData:
    """Training library, bases and test-field source shared by all cells of a run."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.grid = cfg.grid()
        if cfg.is_synthetic:
            syn = cfg.data_source["synthetic"]
            self.base = cfg.base_params()
            train = generate_library(self.grid, self.base, syn["n_train"], syn["spread"], syn["train_seed"])
            self._test_rows = None
        else:
            files = cfg.data_source["files"]
            full = load_snapshots(cfg.resolve(files["snapshots"]), self.grid)
            rows = files["test_rows"]
            if max(rows) >= full.r:
                raise ConfigError(f"test row {max(rows)} beyond the {full.r} snapshots in the file")
            keep = [i for i in range(full.r) if i not in set(rows)]
            if not keep:
                raise ConfigError("no training snapshots left after removing test rows")
            train = full.subset(keep)
            self._test_rows = [full.snapshot(i) for i in rows]
        self.train = train
        self.lib = center_library(train)
        self.energy = self.lib.energy()
        kmax = min(max(cfg.k_list), self.lib.n, self.lib.r)
        self.basis = compute_pod(self.lib, kmax)
        self.raw = Dictionary.from_library(self.lib) if _has_raw(cfg.methods) else None
        self.opts = cfg.solver_options()
        self._tests = {}
        self._check_hygiene()

    def _check_hygiene(self):
        m = self.train.matrix
        for t in range(min(self.cfg.trials, 3)):
            for ci in range(len(self.cfg.conditions)):
                x = self.test_field(t, ci).values
                if np.any(np.all(m == x[:, None], axis=0)):
                    raise ConfigError(f"test field (trial {t}, condition {ci}) is also a training snapshot")

    def test_field(self, trial: int, ci: int):
        if self._test_rows is not None:
            return self._test_rows[ci]
        key = (trial, ci)
        if key not in self._tests:
            syn = self.cfg.data_source["synthetic"]
            rng = np.random.default_rng(derive_seed(self.cfg.seed, trial, ci, _TEST_FIELD))
            p = draw_params(self.base, syn["test_spread"], rng).replace(intake_depth=self.cfg.conditions[ci])
            self._tests[key] = generate_snapshot(self.grid, p, label=f"test-t{trial}-c{ci}")
        return self._tests[key]

    def metadata(self) -> dict:
        b = self.basis
        return {
            "n": self.lib.n,
            "r": self.lib.r,
            "centered": True,
            "library_energy": self.energy,
            "pod_k": b.k,
            "pod_method": b.method,
            "singular_values": [float(v) for v in b.singular_values],
            "energy_fractions": [float(v) for v in b.energy_fractions],
        }


def _has_raw(methods):
    return any(m in ("sparse_raw", "robust_sparse") for m in methods)


def _epsilon(cfg: ExperimentConfig, p: int) -> float:
    if cfg.epsilon["policy"] == "fixed":
        return float(cfg.epsilon["value"])
    return choose_epsilon(float(cfg.noise.get("gaussian_sigma", 0.0)), p)


def _reconstruct(prob: ProblemData, method: str, k: int, op, y, truth, eps):
    cfg = prob.cfg
    edges = cfg.band_edges
    if method == "gappy_pod":
        return gappy_reconstruct(prob.basis.truncate(k), op, y, truth=truth, band_edges=edges)
    if method == "sparse_pod":
        d = Dictionary.from_pod(prob.basis.truncate(k))
        return sparse_reconstruct(d, op, y, eps, opts=prob.opts, rescale=cfg.rescale,
                                  library_energy=prob.energy, truth=truth, band_edges=edges)
    return sparse_reconstruct(prob.raw, op, y, eps, robust=(method == "robust_sparse"), opts=prob.opts,
                              rescale=cfg.rescale, library_energy=prob.energy, truth=truth, band_edges=edges)


def _k_independent(method):
    return method in ("sparse_raw", "robust_sparse")


def _run(cfg: ExperimentConfig, kind: str, placements) -> ExperimentReport:
    prob = ProblemData(cfg)
    grid = prob.grid
    report = ExperimentReport(kind)
    maps, fields = {}, {}
    explicit_op = load_operator(cfg.resolve(cfg.sensors), grid) if "explicit" in placements else None
    for placement in placements:
        for pi, p in enumerate(cfg.p_list):
            for ci, cond in enumerate(cfg.conditions):
                for t in range(cfg.trials):
                    seed = derive_seed(cfg.seed, t, ci, pi)
                    base = {"placement": placement, "p": p, "condition": cond, "trial": t, "seed": seed}
                    skip = None
                    op = None
                    try:
                        if placement == "explicit":
                            op = explicit_op
                            if op.p != p:
                                skip = f"sensor file has {op.p} sensors, not p={p}"
                        else:
                            op = make_operator(grid, placement, p, seed)
                    except ParameterError as exc:
                        skip = str(exc)
                    truth = prob.test_field(t, ci)
                    y = None
                    if skip is None:
                        y = apply(op, truth, cfg.noise_model(derive_seed(seed, _NOISE)))
                    cache = {}
                    for method in cfg.methods:
                        for k in cfg.k_list:
                            rec = {"method": method, "k": k, **base, "error1": None, "error2": None}
                            reason = skip
                            if reason is None and not _k_independent(method) and k > prob.basis.k:
                                reason = f"k={k} exceeds library rank {prob.basis.k}"
                            if reason is not None:
                                rec["skipped"] = reason
                                report.records.append(rec)
                                continue
                            ck = (method, None if _k_independent(method) else k)
                            if ck not in cache:
                                try:
                                    cache[ck] = _reconstruct(prob, method, k, op, y, truth, _epsilon(cfg, p))
                                except (np.linalg.LinAlgError, DataError) as exc:
                                    raise NumericalError(f"{method} k={k} p={p} trial={t}: {exc}") from exc
                            res = cache[ck]
                            rec["error1"] = res.report.error1
                            rec["error2"] = res.report.error2
                            rec["ridge"] = res.ridge
                            if "lambda" in res.info:
                                rec["lambda"] = res.info["lambda"]
                                rec["converged"] = res.info["converged"]
                            report.records.append(rec)
                            if kind == "fixed":
                                mk = (placement, method, k, p, cond)
                                maps.setdefault(mk, []).append(res.report.cell_abs_error)
                                if t == 0:
                                    fields[mk] = res.field.values
                                    fields[(placement, "truth", 0, p, cond)] = truth.values
    report.records.sort(key=_record_key)
    report.aggregates = _aggregate(report.records)
    if kind == "fixed":
        for mk in sorted(maps):
            mean_map = np.mean(maps[mk], axis=0)
            report.maps[mk] = mean_map
            placement, method, k, p, cond = mk
            report.band_stats.append(
                {
                    "placement": placement,
                    "method": method,
                    "k": k,
                    "p": p,
                    "condition": cond,
                    "bands": depth_band_stats(mean_map, grid, cfg.band_edges),
                }
            )
        report.fields = fields
        report.spread = _spread(report, cfg)
    report.metadata = {
        "package_version": __version__,
        "config_sha256": cfg.digest(),
        "base_seed": cfg.seed,
        "seed_rule": "seed = splitmix64-fold(base_seed, trial, condition_index, p_index)",
        "library": prob.metadata(),
        "solver_options": prob.opts.to_json(),
        "error2_convention": ERROR2_CONVENTION,
        "record_count": len(report.records),
        "skipped_count": sum(1 for r in report.records if r["error1"] is None),
    }
    return report


def _record_key(r):
    return (r["placement"], r["method"], r["k"], r["p"], r["condition"], r["trial"])


def _aggregate(records):
    groups = {}
    for r in records:
        for cond in (r["condition"], "all"):
            key = (r["placement"], r["method"], r["k"], r["p"], cond)
            groups.setdefault(key, []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: k[:4] + ((1, 0.0) if k[4] == "all" else (0, k[4]),)):
        recs = [r for r in groups[key] if r["error1"] is not None]
        e1 = math.fsum(r["error1"] for r in recs) / len(recs) if recs else None
        e2 = math.fsum(r["error2"] for r in recs) / len(recs) if recs else None
        placement, method, k, p, cond = key
        out.append(
            {
                "placement": placement,
                "method": method,
                "k": k,
                "p": p,
                "condition": cond,
                "n": len(recs),
                "mean_error1": e1,
                "mean_error2": e2,
            }
        )
    return out


def spread_statistic(err_a: float, err_b: float) -> float:
    """``|a - b| / min(a, b)`` in percent."""
    lo = min(err_a, err_b)
    if lo <= 0:
        return float("inf") if err_a != err_b else 0.0
    return 100.0 * abs(err_a - err_b) / lo


def _spread(report: ExperimentReport, cfg: ExperimentConfig):
    if set(cfg.placements) != {"surface_line", "vertical_dam_line"}:
        return []
    means = {
        (a["placement"], a["method"], a["k"], a["p"], a["condition"]): a["mean_error1"] for a in report.aggregates
    }
    out = []
    for method in cfg.methods:
        for k in cfg.k_list:
            for p in cfg.p_list:
                for cond in cfg.conditions + ["all"]:
                    es = means.get(("surface_line", method, k, p, cond))
                    ev = means.get(("vertical_dam_line", method, k, p, cond))
                    if es is None or ev is None:
                        continue
                    out.append(
                        {
                            "method": method,
                            "k": k,
                            "p": p,
                            "condition": cond,
                            "error1_surface": es,
                            "error1_vertical": ev,
                            "spread_pct": spread_statistic(es, ev),
                        }
                    )
    return out


def run_sweep(cfg: ExperimentConfig) -> ExperimentReport:
    """Error over every (method, k, p, condition, trial) with one sensor placement."""
    return _run(cfg, "sweep", [cfg.placement])


def run_fixed_sensors(cfg: ExperimentConfig) -> ExperimentReport:
    """Surface and dam-column sensor lines under every intake condition.

    Adds mean error maps, depth-band statistics and the cross-placement
    spread ``|err_surface - err_vertical| / min * 100`` per method.
    """
    pod = any(m == "gappy_pod" for m in cfg.methods)
    sparse = any(m != "gappy_pod" for m in cfg.methods)
    if not (pod and sparse):
        raise ConfigError("fixed-sensor runs need gappy_pod and at least one sparse method")
    return _run(cfg, "fixed", cfg.placements)


def _fmt(v) -> str:
    if v is None:
        return "NaN"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _json_dump(obj, path: Path):
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")


def write_records_csv(records, path) -> None:
    _write_csv(Path(path), RECORD_COLUMNS, ([r[c] for c in RECORD_COLUMNS] for r in records))


def export(report: ExperimentReport, out_dir, formats=("csv", "json"), config: ExperimentConfig | None = None) -> list:
    """Write report files into ``out_dir``; returns the written paths.

    Files: ``records.csv`` (sweep) or ``records_<placement>.csv`` (fixed),
    ``aggregates.csv``, ``report.json``, ``manifest.json``; fixed runs add
    ``band_stats.csv``, ``spread.csv`` and ``maps/`` with per-cell CSVs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        placements = sorted({r["placement"] for r in report.records})
        if report.kind == "fixed":
            for pl in placements:
                path = out / f"records_{pl}.csv"
                write_records_csv([r for r in report.records if r["placement"] == pl], path)
                written.append(path)
        else:
            path = out / "records.csv"
            write_records_csv(report.records, path)
            written.append(path)
        cols = ("placement", "method", "k", "p", "condition", "n", "mean_error1", "mean_error2")
        path = out / "aggregates.csv"
        _write_csv(path, cols, ([a[c] for c in cols] for a in report.aggregates))
        written.append(path)
        if report.kind == "fixed":
            path = out / "band_stats.csv"
            write_band_stats_csv(
                [({k: b[k] for k in ("placement", "method", "k", "p", "condition")}, b["bands"]) for b in report.band_stats],
                path,
            )
            written.append(path)
            cols = ("method", "k", "p", "condition", "error1_surface", "error1_vertical", "spread_pct")
            path = out / "spread.csv"
            _write_csv(path, cols, ([s[c] for c in cols] for s in report.spread))
            written.append(path)
            if report.maps or report.fields:
                mdir = out / "maps"
                mdir.mkdir(exist_ok=True)
                grid = config.grid() if config is not None else None
                if grid is not None:
                    for (pl, method, k, p, cond), v in sorted(report.maps.items()):
                        path = mdir / f"error_{pl}_{method}_k{k}_p{p}_c{cond:g}.csv"
                        write_dense_csv(grid.to_dense(v), path)
                        written.append(path)
                    for (pl, method, k, p, cond), v in sorted(report.fields.items(), key=lambda kv: str(kv[0])):
                        name = f"truth_c{cond:g}.csv" if method == "truth" else f"field_{pl}_{method}_k{k}_p{p}_c{cond:g}.csv"
                        path = mdir / name
                        write_dense_csv(grid.to_dense(v), path)
                        if path not in written:
                            written.append(path)
    if "json" in formats:
        path = out / "report.json"
        _json_dump(report.to_json(), path)
        written.append(path)
    manifest = {
        "kind": report.kind,
        "metadata": report.metadata,
        "config": config.to_json() if config is not None else None,
        "files": sorted(p.relative_to(out).as_posix() for p in written),
    }
    path = out / "manifest.json"
    _json_dump(manifest, path)
    written.append(path)
    return written


def load_report(path) -> ExperimentReport:
    """Read a ``report.json`` back into memory."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or "records" not in doc:
        raise ShapeError(f"{path}: not a report file")
    return ExperimentReport.from_json(doc)


def gen_data(cfg: ExperimentConfig, out_dir) -> list:
    """Write the synthetic training library and per-condition test fields as files.

    Produces ``grid.json``, ``snapshots.csv`` (training rows, then one test
    row per condition from trial 0) and ``files_config.json``, a config that
    replays the same data through the file-based source.
    """
    from .grid import export_snapshots, save_grid

    if not cfg.is_synthetic:
        raise ConfigError("gen-data needs a synthetic data_source")
    prob = ProblemData(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tests = [prob.test_field(0, ci) for ci in range(len(cfg.conditions))]
    full = SnapshotLibrary(
        prob.grid,
        np.column_stack([prob.train.matrix] + [t.values for t in tests]),
        prob.train.labels + tuple(t.label for t in tests),
    )
    save_grid(prob.grid, out / "grid.json")
    export_snapshots(full, out / "snapshots.csv")
    doc = cfg.to_json()
    doc["data_source"] = {
        "files": {
            "snapshots": "snapshots.csv",
            "grid": "grid.json",
            "test_rows": list(range(prob.train.r, prob.train.r + len(tests))),
        }
    }
    doc["output_dir"] = "results"
    _json_dump(doc, out / "files_config.json")
    return [out / "grid.json", out / "snapshots.csv", out / "files_config.json"]
