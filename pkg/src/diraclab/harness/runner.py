"""Experiment runner: one (seed, parameter-tuple) per work item, optional
process pool, per-item staging with atomic rename, deterministic reduction
(rows are ordered by item key, never by completion order).

Testing hook: the env var DIRACLAB_POISON_SEEDS ("7,12") makes those seeds
raise inside the worker, exercising failure isolation.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .. import __version__ as code_version
from ..disorder import assemble_random_potential, sample_realization
from ..errors import DiraclabError, PreconditionError, SchemaError
from ..estimators import (MsaSchedule, birman_schwinger_coupling,
                          combes_thomas_probe, default_mask_pairs,
                          dynamical_moment, eigenfunction_decay_fit,
                          find_gap_edges, msa_probe, spectral_averaging_check,
                          unit_cell_state)
from ..estimators.decay import localization_center
from ..estimators.edges import edge_distance_probe
from ..estimators.gaps import reduce_union_spectra, spectral_gap_about
from ..estimators.galscan import gal_gap_scan
from ..estimators.regularity import belt_core_norm, box_regularity
from ..estimators.wegner import (WegnerRecord, check_wegner_preconditions,
                                 wegner_fits, wegner_item)
from ..disorder import UniformDensity
from ..operators import build_model
from ..spectra import SpectralWindow, eigs_window
from .config import ExperimentConfig, validate_config
from .io import json_default, rows_to_csv_text, write_atomic

_HANDLE_CACHE = {}


@dataclass
class RunManifest:
    estimator: str
    config_hash: str
    started: float = 0.0
    finished: float = 0.0
    items: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    output_files: list = field(default_factory=list)
    code_version: str = code_version
    n_rows: int = 0
    seed_range: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(self.__dict__, indent=1, sort_keys=True,
                          default=json_default) + "\n"


def _poisoned(seed):
    raw = os.environ.get("DIRACLAB_POISON_SEEDS", "")
    return raw and seed in {int(x) for x in raw.split(",") if x.strip()}


def _cached_handle(cfg: ExperimentConfig, side=None):
    key = (cfg.config_hash(), side)
    if key not in _HANDLE_CACHE:
        spec = cfg.model_spec()
        if side is not None:
            spec = replace(spec, grid=replace(spec.grid, side=side))
        _HANDLE_CACHE[key] = (spec, build_model(spec))
    return _HANDLE_CACHE[key]


def _disordered_handle(cfg, spec, h0, dm, seed):
    if dm is None or cfg.coupling_scale == 0:
        return h0
    real = sample_realization(dm, spec.grid, seed,
                              coupling_scale=cfg.coupling_scale)
    return h0.with_extra_potential(
        assemble_random_potential(real, dm, spec.grid).values)


# ---------------------------------------------------------------------------
# estimator implementations: items / run_item / columns / reduce
# ---------------------------------------------------------------------------

def _seed_items(cfg):
    base = cfg.run.get("base_seed", 0)
    n = cfg.run.get("samples", 0)
    return [((seed,), {"seed": seed}) for seed in range(base, base + n)]


def _single_item():
    return [((0,), {})]


def _gap_items(cfg, spec, dm):
    return _single_item()


def _gap_run(cfg, params):
    spec, h0 = _cached_handle(cfg)
    scan = SpectralWindow(cfg.params.get("scan_lo", -2.0),
                          cfg.params.get("scan_hi", 2.0))
    rep = find_gap_edges(h0, scan, bins=cfg.params.get("bins", 200))
    rows = [{"bin_lo": float(rep.bin_edges[i]),
             "bin_hi": float(rep.bin_edges[i + 1]),
             "dos": float(rep.dos_bins[i])}
            for i in range(len(rep.dos_bins))]
    summary = {"B_minus": rep.B_minus, "B_plus": rep.B_plus,
               "gap_found": rep.gap_found, "notes": rep.notes}
    if rep.gap_found:
        summary["half_gap"] = 0.5 * (rep.B_plus - rep.B_minus)
    return rows, summary


def _scan_items(cfg, spec, dm):
    return _seed_items(cfg)


def _scan_base_gap(cfg, h0):
    scan = SpectralWindow(cfg.params.get("scan_lo", -2.0),
                          cfg.params.get("scan_hi", 2.0))
    b_lo, b_hi = spectral_gap_about(h0, scan.center)
    if b_lo is None or b_hi is None \
            or not scan.e_lo < b_lo < b_hi < scan.e_hi:
        raise PreconditionError("unperturbed gap absent in the scan window")
    return b_lo, b_hi


def _scan_run(cfg, params):
    spec, h0 = _cached_handle(cfg)
    dm = cfg.disorder_model()
    b_lo, b_hi = _scan_base_gap(cfg, h0)
    bins = cfg.params.get("bins", 400)
    margin = (b_hi - b_lo) / bins / 2
    win = SpectralWindow(b_lo + margin, b_hi - margin)
    h = _disordered_handle(cfg, spec, h0, dm, params["seed"])
    if h is h0:
        vals = np.empty(0)
    else:
        vals = eigs_window(h, win).eigenvalues
    return ([{"seed": params["seed"], "eigenvalue": float(v)} for v in vals],
            None)


def _scan_reduce(cfg, rows):
    spec, h0 = _cached_handle(cfg)
    b_lo, b_hi = _scan_base_gap(cfg, h0)
    per_seed = {}
    for r in rows:
        per_seed.setdefault(r["seed"], []).append(r["eigenvalue"])
    n = cfg.run.get("samples", 0)
    base_seed = cfg.run.get("base_seed", 0)
    union = [np.asarray(sorted(per_seed.get(s, [])))
             for s in range(base_seed, base_seed + n)]
    rep = reduce_union_spectra(union, b_lo, b_hi, spec.grid,
                               bins=cfg.params.get("bins", 400),
                               min_count=cfg.params.get("min_count", 2))
    return {"B_minus": rep.B_minus, "B_plus": rep.B_plus,
            "Btilde_minus": rep.Btilde_minus, "Btilde_plus": rep.Btilde_plus,
            "n_samples": rep.n_samples, "notes": rep.notes}


def _wegner_items(cfg, spec, dm):
    base = cfg.run.get("base_seed", 0)
    n = cfg.run.get("samples", 0)
    items = []
    for L in cfg.params["l_list"]:
        for seed in range(base, base + n):
            items.append(((L, seed), {"L": L, "seed": seed}))
    return items


def _wegner_run(cfg, params):
    L, seed = params["L"], params["seed"]
    spec, h0 = _cached_handle(cfg, side=L)
    dm = cfg.disorder_model()
    e0 = cfg.params["e0"]
    etas = sorted(cfg.params["eta_list"])
    # precondition per L (cached result piggybacks on the handle cache)
    gap_key = (cfg.config_hash(), L, "gapchk")
    if gap_key not in _HANDLE_CACHE:
        _HANDLE_CACHE[gap_key] = check_wegner_preconditions(h0, e0, etas)
    row = wegner_item(spec, dm, e0, etas, seed,
                      coupling_scale=cfg.coupling_scale, h0=h0)
    return ([{"L": L, "seed": seed, "eta": float(eta),
              "dist": row["dist"] if np.isfinite(row["dist"]) else 1e300,
              "hit": bool(row["dist"] < eta),
              "trace_count": row["counts"][eta]} for eta in etas], None)


def _wegner_reduce(cfg, rows):
    n = cfg.run.get("samples", 0)
    recs = {}
    for r in rows:
        key = (float(r["eta"]), int(r["L"]))
        rec = recs.setdefault(key, {"hits": 0, "trace": 0.0})
        rec["hits"] += bool(r["hit"])
        rec["trace"] += r["trace_count"]
    records = [WegnerRecord(E0=cfg.params["e0"], eta=eta, L=L, n_samples=n,
                            hit_count=v["hits"], mean_trace=v["trace"] / max(n, 1))
               for (eta, L), v in sorted(recs.items())]
    dim = cfg.model.get("dimension", 2)
    out = {"records": [r.__dict__ for r in records],
           "fits": wegner_fits(records, dim)}
    for r, rec in zip(out["records"], records):
        p, lo, hi = rec.ci()
        r.update({"hit_prob": p, "ci_lo": lo, "ci_hi": hi})
    return out


def _decay_items(cfg, spec, dm):
    return _seed_items(cfg)


def _decay_run(cfg, params):
    spec, h0 = _cached_handle(cfg)
    dm = cfg.disorder_model()
    h = _disordered_handle(cfg, spec, h0, dm, params["seed"])
    win = SpectralWindow(cfg.params["window_lo"], cfg.params["window_hi"],
                         max_pairs=cfg.params.get("max_pairs", 80))
    res = eigs_window(h, win)
    rows = []
    for j in range(res.count):
        psi = res.eigenvectors[:, j]
        center = localization_center(spec.grid, spec.comp, psi)
        try:
            fit = eigenfunction_decay_fit(spec.grid, spec.comp, psi, center)
        except DiraclabError:
            continue
        rows.append({"seed": params["seed"],
                     "eigenvalue": float(res.eigenvalues[j]),
                     "m_fit": fit.slope_m, "r_squared": fit.r_squared,
                     "n_cubes": fit.n_cubes,
                     "center": ";".join(str(c) for c in center)})
    return rows, None


def _decay_reduce(cfg, rows):
    if not rows:
        return {"n_states": 0, "localized_fraction": None}
    good = [r for r in rows if r["m_fit"] > 0 and r["r_squared"] > 0.9]
    return {"n_states": len(rows),
            "localized_fraction": len(good) / len(rows),
            "median_m": float(np.median([r["m_fit"] for r in rows]))}


def _regularity_items(cfg, spec, dm):
    return _seed_items(cfg)


def _regularity_run(cfg, params):
    spec, h0 = _cached_handle(cfg, side=cfg.params["l"])
    dm = cfg.disorder_model()
    h = _disordered_handle(cfg, spec, h0, dm, params["seed"])
    L, mass = cfg.params["l"], cfg.params["mass"]
    rows = []
    for e in cfg.params["e_list"]:
        try:
            chk = box_regularity(h, spec.grid.center, L, e, mass)
            rows.append({"seed": params["seed"], "E": float(e), "L": L,
                         "regular": chk.regular, "norm": chk.norm_estimate,
                         "threshold": chk.threshold, "eps_used": chk.eps_used})
        except DiraclabError:
            rows.append({"seed": params["seed"], "E": float(e), "L": L,
                         "regular": False, "norm": 1e300, "threshold": 0.0,
                         "eps_used": 0.0})
    return rows, None


def _h1_items(cfg, spec, dm):
    return _seed_items(cfg)


def _h1_run(cfg, params):
    L0 = cfg.params["l0"]
    spec, h0 = _cached_handle(cfg, side=L0)
    dm = cfg.disorder_model()
    if L0 % 6:
        raise PreconditionError("L0 must be a multiple of 6")
    edges = None
    if "edge_lo" in cfg.params or "edge_hi" in cfg.params:
        edges = (cfg.params.get("edge_lo"), cfg.params.get("edge_hi"))
        nu = cfg.params.get("nu", 0.9)
        prox = L0 ** (nu - 2.0)
        d_edge = min(abs(cfg.params["e0"] - b) for b in edges if b is not None)
        if d_edge > prox + 1e-12:
            raise PreconditionError("E0 too far from the measured edge")
    h = _disordered_handle(cfg, spec, h0, dm, params["seed"])
    cut = L0 ** (-float(cfg.params["theta"]))
    try:
        norm, eps, dist = belt_core_norm(h, spec.grid.center, L0,
                                         cfg.params["e0"])
    except DiraclabError:
        norm, eps, dist = 1e300, 0.0, 0.0
    return ([{"seed": params["seed"], "norm": norm, "cut": cut,
              "success": bool(1.1 * norm <= cut)}], None)


def _h1_reduce(cfg, rows):
    n = len(rows)
    succ = sum(bool(r["success"]) for r in rows)
    d = cfg.model.get("dimension", 2)
    threshold = 1.0 - 1.0 / 841 ** d
    p = succ / n if n else 0.0
    se = float(np.sqrt(max(p * (1 - p), 0.0) / n)) if n else 0.0
    passes = (p - 2 * se) > threshold
    return {"prob": p, "se": se, "threshold": threshold,
            "threshold_pass": bool(passes),
            "inconclusive": bool(not passes and p + 2 * se > threshold),
            "n_samples": n}


def _ct_items(cfg, spec, dm):
    return _single_item()


def _ct_run(cfg, params):
    spec, h0 = _cached_handle(cfg)
    gap = (cfg.params["gap_lo"], cfg.params["gap_hi"])
    pairs = default_mask_pairs(spec.grid, spec.comp, spec.grid.center,
                               cfg.params["separations"])
    rep = combes_thomas_probe(h0, cfg.params["e"], gap, pairs,
                              mode=cfg.params.get("mode", "operator_norm"))
    rows = [{"a": float(a), "norm": float(nn)}
            for a, nn in zip(rep["separations"], rep["norms"])]
    summary = {k: v for k, v in rep.items()
               if k not in ("separations", "norms")}
    return rows, summary


def _bs_items(cfg, spec, dm):
    return _single_item()


def _bs_run(cfg, params):
    spec, h0 = _cached_handle(cfg)
    dm = cfg.disorder_model()
    if dm is None:
        raise PreconditionError("bs needs a [disorder] section for the bump shape")
    # single-site potential at the box center with unit coupling
    grid = spec.grid
    mesh = grid.coord_mesh()
    disp = mesh - np.asarray(grid.center, dtype=float)
    scal = dm.u.evaluate(disp) * cfg.params.get("site_lambda", 1.0)
    u_field = scal[..., None, None] * dm.u.matrix_factor(spec.comp)
    gap = (cfg.params["gap_lo"], cfg.params["gap_hi"])
    rep = birman_schwinger_coupling(h0, u_field.astype(complex),
                                    cfg.params["mu"], gap)
    rows = [{"tau": float(t), "branch_eigenvalue":
             float(b) if np.isfinite(b) else 1e300}
            for t, b in zip(rep["branch_taus"], rep["branch"])]
    summary = {k: rep[k] for k in ("tau0", "verified_eigenvalue", "verify_ok",
                                   "kernel_eigenvalue", "support_dim")}
    return rows, summary


def _specav_items(cfg, spec, dm):
    n = cfg.params.get("trials", 10)
    base = cfg.run.get("base_seed", 0)
    return [((s,), {"seed": s}) for s in range(base, base + n)]


def _specav_run(cfg, params):
    n = cfg.params.get("dim", 50)
    rng = np.random.Generator(np.random.Philox(key=params["seed"]))
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h0 = (a + a.conj().T) / 2
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    v = g @ g.conj().T / n + 0.1 * np.eye(n)
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    b = (b + b.conj().T) / 2
    rep = spectral_averaging_check(
        h0, v, b, UniformDensity(0.0, 1.0),
        (cfg.params.get("j_lo", -0.5), cfg.params.get("j_hi", 0.5)),
        quad_points=cfg.params.get("quad_points", 10))
    return ([{"seed": params["seed"], "lhs": rep["lhs_norm"],
              "bound": rep["bound"], "passes": rep["passes"],
              "drift": rep["refinement_drift"]}], None)


def _specav_reduce(cfg, rows):
    return {"n_trials": len(rows),
            "all_pass": bool(all(r["passes"] for r in rows)),
            "max_drift": max((r["drift"] for r in rows), default=0.0)}


def _edge_items(cfg, spec, dm):
    return _single_item()


def _edge_run(cfg, params):
    spec, h0 = _cached_handle(cfg)
    dm = cfg.disorder_model()
    b_lo, b_hi = _scan_base_gap(cfg, h0)
    union = []
    base_seed = cfg.run.get("base_seed", 0)
    n_scan = cfg.params.get("edge_samples", 20)
    margin = (b_hi - b_lo) / 400
    win = SpectralWindow(b_lo + margin, b_hi - margin)
    for s in range(n_scan):
        h = _disordered_handle(cfg, spec, h0, dm, base_seed + 10 ** 6 + s)
        union.append(eigs_window(h, win).eigenvalues)
    rep = reduce_union_spectra(union, b_lo, b_hi, spec.grid)
    edge_data = {"B_minus": rep.B_minus, "B_plus": rep.B_plus,
                 "Btilde_minus": rep.Btilde_minus,
                 "Btilde_plus": rep.Btilde_plus}
    out = edge_distance_probe(spec, dm, cfg.params["delta"],
                              cfg.run.get("samples", 0), edge_data,
                              base_seed=base_seed,
                              coupling_scale=cfg.coupling_scale)
    rows = [{"seed": r["seed"], "conditioned": r["conditioned"], "ok": r["ok"]}
            for r in out.pop("rows")]
    out.update(edge_data)
    return rows, out


def _msa_items(cfg, spec, dm):
    return _single_item()


def _msa_run(cfg, params):
    spec, _ = _cached_handle(cfg)
    dm = cfg.disorder_model()
    sched = MsaSchedule(L0=cfg.params["l0"], alpha=cfg.params["alpha"],
                        zeta=cfg.params["zeta"], mass=cfg.params["mass"],
                        n_scales=cfg.params.get("n_scales", 3))
    out = msa_probe(sched, spec, dm,
                    (cfg.params["i_lo"], cfg.params["i_hi"]),
                    cfg.params["pairs"], cfg.run.get("samples", 0),
                    base_seed=cfg.run.get("base_seed", 0),
                    coupling_scale=cfg.coupling_scale,
                    e_points=cfg.params.get("e_points", 21))
    rows = [{"scale": r["scale"], "prob": r["prob"], "ci_lo": r["ci"][0],
             "ci_hi": r["ci"][1], "target": r["target"],
             "n_samples": r["n_samples"]} for r in out]
    return rows, {"scales": [r["scale"] for r in out]}


def _dyn_items(cfg, spec, dm):
    return _single_item()


def _dyn_run(cfg, params):
    spec, h0 = _cached_handle(cfg)
    dm = cfg.disorder_model()
    h = h0
    if cfg.params.get("disordered", False):
        h = _disordered_handle(cfg, spec, h0, dm, cfg.run.get("base_seed", 0))
    win = SpectralWindow(cfg.params["window_lo"], cfg.params["window_hi"],
                         max_pairs=400)
    psi0 = unit_cell_state(spec.grid, spec.comp)
    tg = np.linspace(0.0, cfg.params.get("t_max", 1000.0),
                     cfg.params.get("t_points", 41))
    rep = dynamical_moment(h, psi0, cfg.params.get("r", 2.0), win, tg)
    rows = [{"t": float(t), "moment": float(m)}
            for t, m in zip(rep["t_grid"], rep["moments"])]
    mm = rep["moments"]
    summary = {"sup_estimate": rep["sup_estimate"],
               "window_pairs": rep["window_pairs"],
               "projected_mass": rep["projected_mass"],
               "max_over_median": float(np.max(mm) / np.median(mm))
               if len(mm) and np.median(mm) > 0 else None}
    return rows, summary


def _gal_items(cfg, spec, dm):
    return _single_item()


def _gal_run(cfg, params):
    rows, fits = gal_gap_scan(
        cfg.params["alpha_list"], cfg.params["beta_list"],
        profile=cfg.params.get("profile", "cos2"),
        support=cfg.params.get("support", 0.5),
        points_per_cell=cfg.params.get("points_per_cell", 16),
        backend=cfg.grid.get("backend", "fourier_symbol"),
        ab_cap=cfg.params.get("ab_cap", 0.5))
    return ([{"alpha": r["alpha"], "beta": r["beta"],
              "half_gap": r["half_gap"], "in_fit": r["in_fit"]}
             for r in rows], {"fits": fits})


ESTIMATORS = {
    "gap": (_gap_items, _gap_run, ["bin_lo", "bin_hi", "dos"], None),
    "spectrum-scan": (_scan_items, _scan_run, ["seed", "eigenvalue"],
                      _scan_reduce),
    "wegner": (_wegner_items, _wegner_run,
               ["L", "seed", "eta", "dist", "hit", "trace_count"],
               _wegner_reduce),
    "decay": (_decay_items, _decay_run,
              ["seed", "eigenvalue", "m_fit", "r_squared", "n_cubes", "center"],
              _decay_reduce),
    "regularity": (_regularity_items, _regularity_run,
                   ["seed", "E", "L", "regular", "norm", "threshold",
                    "eps_used"], None),
    "h1": (_h1_items, _h1_run, ["seed", "norm", "cut", "success"], _h1_reduce),
    "ct": (_ct_items, _ct_run, ["a", "norm"], None),
    "bs": (_bs_items, _bs_run, ["tau", "branch_eigenvalue"], None),
    "specav": (_specav_items, _specav_run,
               ["seed", "lhs", "bound", "passes", "drift"], _specav_reduce),
    "edge": (_edge_items, _edge_run, ["seed", "conditioned", "ok"], None),
    "msa": (_msa_items, _msa_run,
            ["scale", "prob", "ci_lo", "ci_hi", "target", "n_samples"], None),
    "dyn": (_dyn_items, _dyn_run, ["t", "moment"], None),
    "gal-scan": (_gal_items, _gal_run,
                 ["alpha", "beta", "half_gap", "in_fit"], None),
}


def _execute_item(cfg, key, params):
    if "seed" in params and _poisoned(params["seed"]):
        raise DiraclabError(f"poisoned seed {params['seed']}")
    _, run, _, _ = ESTIMATORS[cfg.estimator]
    return run(cfg, params)


def _pool_entry(args):
    cfg, key, params = args
    try:
        rows, summary = _execute_item(cfg, key, params)
        return key, "ok", rows, summary, None
    except Exception as exc:   # failures are per-item data, not crashes
        return key, "failed", [], None, f"{type(exc).__name__}: {exc}"


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunManifest:
    """Execute the configured estimator over its work items.

    Outputs are byte-identical for identical configs regardless of worker
    count; partial failures are recorded per item and abort the run only
    beyond a 50 percent failure rate.
    """
    validate_config(cfg)
    out_dir = out_dir or cfg.run.get("out", "runs/" + cfg.estimator)
    os.makedirs(out_dir, exist_ok=True)
    staging = os.path.join(out_dir, "staging")
    os.makedirs(staging, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{cfg.estimator}.csv")
    if os.path.exists(csv_path) and not cfg.run.get("overwrite", False):
        raise SchemaError(f"output exists: {csv_path} (set overwrite = true)")
    base_seed = cfg.run.get("base_seed", 0)
    manifest = RunManifest(estimator=cfg.estimator,
                           config_hash=cfg.config_hash(),
                           started=time.time(),
                           seed_range=[base_seed,
                                       base_seed + cfg.run.get("samples", 0)])
    items_fn, _, columns, reduce_fn = ESTIMATORS[cfg.estimator]
    spec, dm = validate_config(cfg)
    items = sorted(items_fn(cfg, spec, dm), key=lambda it: it[0])
    default_workers = int(os.environ.get("DIRACLAB_WORKERS", "1"))
    workers = max(1, int(cfg.run.get("workers", default_workers)))
    results = {}
    if workers == 1 or len(items) <= 1:
        outs = map(_pool_entry, [(cfg, k, p) for k, p in items])
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        outs = pool.map(_pool_entry, [(cfg, k, p) for k, p in items])
    for key, status, rows, summary, err in outs:
        results[key] = (rows, summary)
        slug = "_".join(str(k) for k in key)
        stage_file = os.path.join(staging, f"item_{slug}.json")
        write_atomic(stage_file, json.dumps(
            {"key": list(key), "status": status, "rows": rows},
            sort_keys=True, default=json_default))
        manifest.items.append({"key": list(key), "status": status})
        if err:
            manifest.failures.append({"key": list(key), "error": err})
    if workers > 1 and len(items) > 1:
        pool.shutdown()
    n_failed = len(manifest.failures)
    if items and n_failed / len(items) > 0.5:
        manifest.finished = time.time()
        write_atomic(os.path.join(out_dir, "manifest.json"), manifest.to_json())
        raise DiraclabError(
            f"{n_failed}/{len(items)} items failed (over the 50% threshold)")
    all_rows = []
    summary = None
    for key, _ in items:
        rows, s = results.get(key, ([], None))
        all_rows.extend(rows)
        if s is not None:
            summary = s
    write_atomic(csv_path, rows_to_csv_text(columns, all_rows))
    manifest.output_files.append(csv_path)
    manifest.n_rows = len(all_rows)
    if reduce_fn is not None:
        summary = reduce_fn(cfg, all_rows)
    if summary is not None:
        spath = os.path.join(out_dir, "summary.json")
        write_atomic(spath, json.dumps(summary, indent=1, sort_keys=True,
                                       default=json_default) + "\n")
        manifest.output_files.append(spath)
    manifest.finished = time.time()
    write_atomic(os.path.join(out_dir, "manifest.json"), manifest.to_json())
    return manifest
