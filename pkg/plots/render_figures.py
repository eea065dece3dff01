#!/usr/bin/env python3
"""Post-hoc figure rendering from experiment CSV outputs.

Figure kinds and the columns their inputs must carry:

  dos          bin_lo, bin_hi, dos
  decay        distance, log_norm
  wegner       L, eta, hit_prob, ci_lo, ci_hi
  msa          scale, prob, ci_lo, ci_hi, target
  gal_heatmap  alpha, beta, half_gap
  dyn          t, moment

Figures are pure functions of the input bytes: fixed size, fixed fonts, no
timestamps.  Missing columns exit nonzero naming the column; an empty table
renders a "no data" watermark and exits zero.
"""

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KIND_COLUMNS = {
    "dos": ["bin_lo", "bin_hi", "dos"],
    "decay": ["distance", "log_norm"],
    "wegner": ["L", "eta", "hit_prob", "ci_lo", "ci_hi"],
    "msa": ["scale", "prob", "ci_lo", "ci_hi", "target"],
    "gal_heatmap": ["alpha", "beta", "half_gap"],
    "dyn": ["t", "moment"],
}

FIGSIZE = (6.0, 4.0)
DPI = 110


class SchemaMismatch(Exception):
    pass


def read_table(path, kind):
    with open(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty file, no header")
        for col in KIND_COLUMNS[kind]:
            if col not in header:
                raise SchemaMismatch(f"{path}: missing column {col!r} "
                                     f"for kind {kind!r}")
        idx = {c: header.index(c) for c in KIND_COLUMNS[kind]}
        rows = []
        for raw in reader:
            rows.append({c: float(raw[idx[c]]) for c in KIND_COLUMNS[kind]})
    return rows


def _fit_line(x, y):
    coef = np.polyfit(x, y, 1)
    return float(coef[0]), float(coef[1])


def _new_axes(title):
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    ax.set_title(title)
    return fig, ax


def _watermark(title):
    fig, ax = _new_axes(title)
    ax.text(0.5, 0.5, "no data", transform=ax.transAxes, fontsize=28,
            color="0.7", ha="center", va="center", rotation=20)
    ax.set_xticks([])
    ax.set_yticks([])
    return fig, []


def render_dos(rows):
    fig, ax = _new_axes("density of states")
    lo = np.array([r["bin_lo"] for r in rows])
    hi = np.array([r["bin_hi"] for r in rows])
    dos = np.array([r["dos"] for r in rows])
    ax.bar(lo, dos, width=hi - lo, align="edge", color="#47608a")
    annotations = []
    empty = dos == 0
    if empty.any() and (~empty).any():
        # widest run of empty bins: the measured gap
        best_len = best_start = cur = 0
        start = None
        for i, e in enumerate(empty):
            if e:
                if start is None:
                    start = i
                if i - start + 1 > best_len:
                    best_len, best_start = i - start + 1, start
            else:
                start = None
        g_lo, g_hi = lo[best_start], hi[best_start + best_len - 1]
        ax.axvspan(g_lo, g_hi, color="#e0b13c", alpha=0.3)
        note = f"gap = ({g_lo:.4f}, {g_hi:.4f})"
        ax.annotate(note, xy=(0.02, 0.95), xycoords="axes fraction")
        annotations.append(note)
    ax.set_xlabel("energy")
    ax.set_ylabel("states per unit volume")
    return fig, annotations


def render_decay(rows):
    fig, ax = _new_axes("eigenfunction decay")
    x = np.array([r["distance"] for r in rows])
    y = np.array([r["log_norm"] for r in rows])
    ax.plot(x, y, "o", ms=4, color="#47608a")
    slope, icpt = _fit_line(x, y)
    xs = np.linspace(x.min(), x.max(), 50)
    ax.plot(xs, slope * xs + icpt, "-", color="#b4443c")
    note = f"m = {-slope:.3f}"
    ax.annotate(note, xy=(0.65, 0.9), xycoords="axes fraction")
    ax.set_xlabel("sup distance to center")
    ax.set_ylabel("log cube norm")
    return fig, [note]


def render_wegner(rows):
    fig, ax = _new_axes("eigenvalue-count scaling")
    annotations = []
    for L in sorted({r["L"] for r in rows}):
        sub = [r for r in rows if r["L"] == L and r["hit_prob"] > 0]
        if len(sub) < 2:
            continue
        eta = np.array([r["eta"] for r in sub])
        p = np.array([r["hit_prob"] for r in sub])
        lo = np.array([r["ci_lo"] for r in sub])
        hi = np.array([r["ci_hi"] for r in sub])
        ax.errorbar(eta, p, yerr=[p - lo, hi - p], fmt="o-", ms=4,
                    label=f"L = {L:g}", capsize=3)
        slope, _ = _fit_line(np.log(eta), np.log(p))
        note = f"L={L:g}: slope = {slope:.3f}"
        annotations.append(note)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("interval half-width")
    ax.set_ylabel("hit probability")
    if annotations:
        ax.annotate("; ".join(annotations), xy=(0.02, 0.95),
                    xycoords="axes fraction", fontsize=8)
        ax.legend(loc="lower right", fontsize=8)
    return fig, annotations


def render_msa(rows):
    fig, ax = _new_axes("scale recursion probabilities")
    scale = np.array([r["scale"] for r in rows])
    prob = np.array([r["prob"] for r in rows])
    lo = np.array([r["ci_lo"] for r in rows])
    hi = np.array([r["ci_hi"] for r in rows])
    target = np.array([r["target"] for r in rows])
    ax.errorbar(scale, prob, yerr=[prob - lo, hi - prob], fmt="o-",
                capsize=3, label="empirical")
    ax.plot(scale, target, "s--", color="#b4443c", label="target")
    ax.set_xlabel("scale")
    ax.set_ylabel("event probability")
    ax.set_ylim(-0.02, 1.05)
    ax.legend(loc="lower right", fontsize=8)
    return fig, []


def render_gal_heatmap(rows):
    fig, ax = _new_axes("antidot half-gap")
    alphas = sorted({r["alpha"] for r in rows})
    betas = sorted({r["beta"] for r in rows})
    grid = np.full((len(betas), len(alphas)), np.nan)
    for r in rows:
        grid[betas.index(r["beta"]), alphas.index(r["alpha"])] = r["half_gap"]
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(alphas)), [f"{a:g}" for a in alphas])
    ax.set_yticks(range(len(betas)), [f"{b:g}" for b in betas])
    ax.set_xlabel("alpha")
    ax.set_ylabel("beta")
    fig.colorbar(im, ax=ax, label="half gap")
    return fig, []


def render_dyn(rows):
    fig, ax = _new_axes("filtered moment trajectory")
    t = np.array([r["t"] for r in rows])
    m = np.array([r["moment"] for r in rows])
    ax.plot(t, m, "-", color="#47608a")
    ax.set_xlabel("time")
    ax.set_ylabel("moment")
    notes = []
    med = np.median(m)
    if med > 0:
        note = f"max/median = {m.max() / med:.2f}"
        ax.annotate(note, xy=(0.02, 0.95), xycoords="axes fraction")
        notes.append(note)
    return fig, notes


RENDERERS = {
    "dos": render_dos,
    "decay": render_decay,
    "wegner": render_wegner,
    "msa": render_msa,
    "gal_heatmap": render_gal_heatmap,
    "dyn": render_dyn,
}


def render(in_path, out_path, kind):
    """Render one figure; returns the annotation strings drawn on it."""
    if kind not in RENDERERS:
        raise SchemaMismatch(f"unknown figure kind {kind!r}; "
                             f"choices: {sorted(RENDERERS)}")
    rows = read_table(in_path, kind)
    if not rows:
        fig, notes = _watermark(kind)
    else:
        fig, notes = RENDERERS[kind](rows)
    fig.savefig(out_path, metadata={"Software": ""})
    plt.close(fig)
    return notes


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--in", dest="in_path", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--kind", required=True, choices=sorted(RENDERERS))
    args = ap.parse_args(argv)
    try:
        notes = render(args.in_path, args.out, args.kind)
    except SchemaMismatch as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    for note in notes:
        print(note)
    return 0


if __name__ == "__main__":
    sys.exit(main())
