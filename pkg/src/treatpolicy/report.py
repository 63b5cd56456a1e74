"""Report bundle: figures rendered from stage artifacts plus an index page.

The emitter never recomputes results; it only reads what earlier stages
wrote under the output directory.  A missing upstream artifact downgrades
the corresponding figure to a placeholder entry in the index and a warning,
and the rest of the bundle is still produced.
"""

from __future__ import annotations

import csv
import json
import os
from collections import OrderedDict

from . import figures, layout

__all__ = ["emit_report"]


def _read_json(full_path):
    with open(full_path) as fh:
        return json.load(fh)


def _read_csv(full_path) -> list[list[str]]:
    with open(full_path, newline="") as fh:
        return list(csv.reader(fh))


def _grouped(rows: list[list[str]], key_col: int) -> "OrderedDict[str, list[list[str]]]":
    groups: OrderedDict[str, list[list[str]]] = OrderedDict()
    for row in rows:
        groups.setdefault(row[key_col], []).append(row)
    return groups


def _fig_cate_hist(out_dir, bins: int):
    import numpy as np

    rows = _read_csv(os.path.join(out_dir, layout.CATE_ESTIMATES))[1:]
    panels = []
    for model, group in _grouped(rows, 0).items():
        tau = np.array([float(r[2]) for r in group])
        lo, hi = float(tau.min()), float(tau.max())
        if hi - lo <= max(abs(lo), abs(hi), 1.0) * 1e-9:
            # effectively constant estimates (e.g. a purely linear s-learner)
            mid = (lo + hi) / 2.0
            lo, hi = mid - 0.5, mid + 0.5
        counts, edges = np.histogram(tau, bins=bins, range=(lo, hi))
        panels.append(
            {
                "title": model,
                "edges": [float(e) for e in edges],
                "series": [{"label": model, "counts": counts.astype(int).tolist()}],
            }
        )
    return figures.svg_histogram(
        panels, title="Estimated effect distributions", x_label="estimated effect"
    )


def _fig_overlap_hist(out_dir, bins: int):
    info = _read_json(os.path.join(out_dir, layout.OVERLAP))["report"]
    panels = []
    for arm in ("0", "1"):
        hist = info["histograms"][arm]
        panels.append(
            {
                "title": f"observed arm {arm}",
                "edges": info["bin_edges"],
                "series": [
                    {"label": "all", "counts": hist["all"]},
                    {"label": "retained", "counts": hist["retained"]},
                ],
            }
        )
    return figures.svg_histogram(
        panels, title="Treatment score overlap", x_label="estimated treatment score"
    )


def _fig_value_scatter(out_dir, bins: int):
    rows = _read_csv(os.path.join(out_dir, layout.STUDY_SCATTER))
    header, data = rows[0], rows[1:]
    col = {name: i for i, name in enumerate(header)}
    series = []
    for est in ("v_dr", "v_ipw"):
        series.append(
            {
                "label": est.replace("v_", "").upper(),
                "x": [float(r[col["v_true"]]) for r in data],
                "y": [float(r[col[est]]) for r in data],
            }
        )
    return figures.svg_scatter(
        series,
        title="Estimated against true policy value",
        x_label="true value",
        y_label="estimated value",
        identity=True,
    )


def _fig_value_box(out_dir, bins: int):
    for est in ("DR", "IPW"):
        full = os.path.join(out_dir, layout.distributions(est))
        if os.path.exists(full):
            rows = _read_csv(full)
            names = rows[0]
            cols = list(zip(*rows[1:]))
            items = []
            for name, values in zip(names, cols):
                vals = [float(v) for v in values]
                if all(v != v for v in vals):  # NaN-only columns cannot be drawn
                    continue
                items.append({"label": name, "values": vals})
            return figures.svg_box(
                items, title=f"Bootstrap policy values ({est})", y_label="policy value"
            )
    raise FileNotFoundError(layout.distributions("DR"))


def _fig_rank_curve(out_dir, bins: int):
    rows = _read_csv(os.path.join(out_dir, layout.RANK_CURVE))[1:]
    series = []
    for model, group in _grouped(rows, 0).items():
        series.append(
            {
                "label": model,
                "fractions": [float(r[2]) for r in group],
                "values": [float(r[3]) for r in group],
            }
        )
    return figures.svg_rank_curve(series, title="Value by fraction treated")


def _fig_outcome_tree(out_dir, bins: int):
    trees = _read_json(os.path.join(out_dir, layout.OUTCOME_TREES))
    name, tree = next(iter(trees.items()))
    return figures.svg_tree(tree, title=f"Observed outcomes under policy {name}")


# figure name -> (relative output path, renderer, artifacts it needs)
_FIGURES = (
    ("effect histograms", layout.FIG_CATE_HIST, _fig_cate_hist, (layout.CATE_ESTIMATES,)),
    ("overlap histograms", layout.FIG_OVERLAP_HIST, _fig_overlap_hist, (layout.OVERLAP,)),
    ("value scatter", layout.FIG_VALUE_SCATTER, _fig_value_scatter, (layout.STUDY_SCATTER,)),
    ("value box plot", layout.FIG_VALUE_BOX, _fig_value_box, ()),
    ("rank curve", layout.FIG_RANK_CURVE, _fig_rank_curve, (layout.RANK_CURVE,)),
    ("outcome tree", layout.FIG_OUTCOME_TREE, _fig_outcome_tree, (layout.OUTCOME_TREES,)),
)

_STAGE_BLURBS = (
    ("ingest", "parsed, imputed, and split the input table"),
    ("fit-propensity", "fitted the treatment scorer and measured overlap"),
    ("simulate", "stress-tested the estimation stack on synthetic outcomes"),
    ("fit-cate", "fitted the effect-model menu with the held-out error gate"),
    ("defer", "flagged rows where no recommendation should be made"),
    ("evaluate", "valued every policy against the observed data"),
    ("report", "rendered figures and this index"),
)


def emit_report(out_dir: str, manifest: dict) -> tuple[list[str], list[dict]]:
    """Render figures and the index; returns (artifact paths, warnings)."""
    bins = int(manifest.get("config", {}).get("report", {}).get("bins", 20))
    artifacts: list[str] = []
    warnings: list[dict] = []
    produced: list[tuple[str, str]] = []
    missing: list[tuple[str, str]] = []

    for label, rel, render, needs in _FIGURES:
        absent = [n for n in needs if not os.path.exists(os.path.join(out_dir, n))]
        if absent:
            missing.append((label, absent[0]))
            warnings.append(
                {
                    "stage": "report",
                    "kind": "missing-artifact",
                    "message": f"{label} skipped: missing {absent[0]}",
                }
            )
            continue
        try:
            svg = render(out_dir, bins)
        except FileNotFoundError as exc:
            missing.append((label, str(exc)))
            warnings.append(
                {
                    "stage": "report",
                    "kind": "missing-artifact",
                    "message": f"{label} skipped: missing {exc}",
                }
            )
            continue
        with open(layout.path(out_dir, rel), "w") as fh:
            fh.write(svg)
        artifacts.append(rel)
        produced.append((label, rel))

    index = _render_index(manifest, produced, missing)
    with open(layout.path(out_dir, layout.REPORT_INDEX), "w") as fh:
        fh.write(index)
    artifacts.append(layout.REPORT_INDEX)
    return artifacts, warnings


def _render_index(manifest: dict, produced, missing) -> str:
    lines = ["# Run report", ""]
    lines.append(f"Config hash: `{manifest.get('config_hash', 'unknown')}`")
    lines.append("")
    lines.append("## Figures")
    lines.append("")
    for label, rel in produced:
        lines.append(f"- [{label}]({os.path.relpath(rel, 'report')})")
    for label, need in missing:
        lines.append(f"- {label}: *not produced - missing upstream artifact `{need}`*")
    lines.append("")
    lines.append("## Artifacts by stage")
    lines.append("")
    by_stage: OrderedDict[str, list[str]] = OrderedDict()
    for entry in manifest.get("artifacts", []):
        by_stage.setdefault(entry["stage"], []).append(entry["path"])
    blurbs = dict(_STAGE_BLURBS)
    for stage, paths in by_stage.items():
        lines.append(f"### {stage}")
        lines.append("")
        blurb = blurbs.get(stage)
        if blurb:
            lines.append(f"This stage {blurb}.")
            lines.append("")
        for p in paths:
            lines.append(f"- `{p}`")
        lines.append("")
    warn = manifest.get("warnings", [])
    lines.append("## Warnings")
    lines.append("")
    if warn:
        for w in warn:
            lines.append(f"- **{w.get('stage', '?')}** ({w.get('kind', '?')}): {w.get('message', '')}")
    else:
        lines.append("None recorded.")
    lines.append("")
    return "\n".join(lines)
