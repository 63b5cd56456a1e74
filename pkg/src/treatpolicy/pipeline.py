"""Stage orchestration: run configured stages and track what they emit.

Every stage reads its inputs from the output directory and writes its
artifacts back there, so subcommands can rerun any stage in isolation.
The manifest records the resolved config, its hash, seeds, every emitted
file, and accumulated warnings; stage timings are only recorded when the
config asks for them, keeping rerun artifacts byte-identical by default.
"""

from __future__ import annotations

import csv
import json
import os
import time
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from . import layout
from .cate import CateInterval, cate_diagnostics, ensemble_cate, uncertainty_interval
from .config import PipelineConfig
from .deferral import (
    REASON_OVERLAP,
    REASON_UNCERTAINTY,
    DeferralRule,
    characterize_subpop,
    evaluate_deferral,
)
from .errors import ConfigError, DataError, StageError, TreatPolicyError
from .ingest import (
    assign_splits,
    impute_and_flag,
    load_dataset,
    load_table,
    save_dataset,
    summarize,
)
from .learners import fit_regressor, load_model, save_model
from .policy_eval import (
    DEFER,
    Policy,
    baselines,
    bootstrap_tournament,
    build_policy,
    estimate_policy_value,
    outcome_tree,
    rank_curve,
)
from .propensity import fit_propensity, overlap_report, select_overlap_bounds
from .report import emit_report
from .simulation import run_study

__all__ = ["RunManifest", "run_pipeline", "run_stages", "planned_stages", "STAGE_ORDER"]

STAGE_ORDER = ("ingest", "fit-propensity", "simulate", "fit-cate", "defer", "evaluate", "report")

_CHECKLIST = """\
# Identification checklist

Policy learning on observational data only means anything if treatment
assignment is explainable by what was recorded.  Estimation stages stay
locked until `identification.acknowledged` is set to `true` in the config;
work through each item first.  If one fails and cannot be repaired by
changing the covariate set or the cohort, stop the analysis here - nothing
downstream can repair it.

- [ ] **Well-defined treatments.** Both arms describe concrete, executable
  interventions, applied comparably across the cohort.
- [ ] **No interference.** One unit's treatment does not change another
  unit's outcome.
- [ ] **Positivity.** Clinicians actually chose both arms across the
  covariate space.  After `fit-propensity`, inspect `propensity/overlap.json`
  and trim or re-scope where one arm never occurs.
- [ ] **Conditional exchangeability.** Everything that drove the treatment
  choice and also affects the outcome is present in the covariates.  List
  the assignment drivers domain experts name and check each is measured.
- [ ] **Outcome timing.** The outcome is measured after treatment, the
  covariates strictly before, with no leakage from the future.
- [ ] **Residual doubt.** If exchangeability only holds up to bounded hidden
  drivers, raise `uncertainty.lam` (or `uncertainty.alpha_causal`) so the
  intervals and the deferral rule absorb that doubt instead of ignoring it.
"""


def _fmtf(x) -> str:
    return repr(float(x))


def _write_json(full_path, obj) -> None:
    with open(full_path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(full_path):
    with open(full_path) as fh:
        return json.load(fh)


def _write_csv(full_path, rows) -> None:
    with open(full_path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _read_csv(full_path) -> list[list[str]]:
    with open(full_path, newline="") as fh:
        return list(csv.reader(fh))


def _warn(stage: str, kind: str, message: str) -> dict:
    return {"stage": stage, "kind": kind, "message": message}


def _need(out_dir: str, rel: str, producer: str) -> str:
    full = os.path.join(out_dir, rel)
    if not os.path.exists(full):
        raise StageError(f"missing artifact {rel}; run the {producer!r} stage first")
    return full


@dataclass
class RunManifest:
    """Ledger of one run: config echo and hash, seeds, files, warnings."""

    config_hash: str
    config: dict
    seeds: dict
    stages: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    timings: dict | None = None

    def record(self, stage: str, artifacts, warnings, elapsed: float | None = None) -> None:
        if stage in self.stages:
            self.artifacts = [a for a in self.artifacts if a["stage"] != stage]
            self.warnings = [w for w in self.warnings if w["stage"] != stage]
        else:
            self.stages.append(stage)
        self.artifacts.extend({"path": p, "stage": stage} for p in artifacts)
        self.warnings.extend(warnings)
        if elapsed is not None:
            if self.timings is None:
                self.timings = {}
            self.timings[stage] = round(elapsed, 6)

    def paths(self) -> list[str]:
        return [a["path"] for a in self.artifacts]

    def to_dict(self) -> dict:
        out = {
            "config_hash": self.config_hash,
            "config": self.config,
            "seeds": self.seeds,
            "stages": list(self.stages),
            "artifacts": list(self.artifacts),
            "warnings": list(self.warnings),
        }
        if self.timings is not None:
            out["timings"] = dict(self.timings)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(
            config_hash=d["config_hash"],
            config=d["config"],
            seeds=d["seeds"],
            stages=list(d.get("stages", [])),
            artifacts=list(d.get("artifacts", [])),
            warnings=list(d.get("warnings", [])),
            timings=d.get("timings"),
        )

    def save(self, out_dir: str) -> None:
        _write_json(layout.path(out_dir, layout.MANIFEST), self.to_dict())

    @classmethod
    def fresh(cls, cfg: PipelineConfig) -> "RunManifest":
        return cls(config_hash=cfg.hash, config=cfg.echo, seeds=cfg.seeds())

    @classmethod
    def load_or_fresh(cls, cfg: PipelineConfig) -> "RunManifest":
        full = os.path.join(cfg.out_dir, layout.MANIFEST)
        if os.path.exists(full):
            try:
                prior = cls.from_dict(_read_json(full))
            except (KeyError, ValueError, json.JSONDecodeError):
                return cls.fresh(cfg)
            if prior.config_hash == cfg.hash:
                return prior
        return cls.fresh(cfg)


def _require_ack(cfg: PipelineConfig, stage: str) -> None:
    if not cfg.echo["identification"]["acknowledged"]:
        raise ConfigError(
            f"stage {stage!r} estimates effects from observational data; review "
            f"{layout.IDENTIFICATION} in the output directory (written by the ingest "
            "stage) and set identification.acknowledged = true"
        )


def _load_data(out_dir: str):
    csv_path = _need(out_dir, layout.DATASET_CSV, "ingest")
    meta_path = _need(out_dir, layout.DATASET_META, "ingest")
    return load_dataset(csv_path, _read_json(meta_path))


# ---------------------------------------------------------------- stages


def stage_ingest(cfg: PipelineConfig, manifest: RunManifest):
    out = cfg.out_dir
    d = cfg.echo["data"]
    try:
        data = load_table(d["path"], cfg.table_schema(), delimiter=d["delimiter"])
    except OSError as exc:
        raise DataError(f"cannot read data table {d['path']}: {exc}") from exc
    data = assign_splits(data, cfg.echo["splits"]["fractions"], cfg.echo["splits"]["seed"])
    data, stats = impute_and_flag(data)

    description = save_dataset(data, layout.path(out, layout.DATASET_CSV))
    _write_json(layout.path(out, layout.DATASET_META), description)
    table = summarize(data, group_by=data.treatment == 1, group_names=("control", "treated"))
    _write_csv(layout.path(out, layout.SUMMARY), table.to_csv_rows())
    with open(layout.path(out, layout.IDENTIFICATION), "w") as fh:
        fh.write(_CHECKLIST)

    warnings = []
    if stats.flagged:
        cols = ", ".join(sorted(stats.flagged))
        warnings.append(
            _warn("ingest", "imputation", f"missing values imputed (indicators added) in: {cols}")
        )
    artifacts = [layout.IDENTIFICATION, layout.DATASET_CSV, layout.DATASET_META, layout.SUMMARY]
    return artifacts, warnings


def stage_fit_propensity(cfg: PipelineConfig, manifest: RunManifest):
    _require_ack(cfg, "fit-propensity")
    out = cfg.out_dir
    data = _load_data(out)
    train = data.rows_in("train")
    cal = data.rows_in("validation") if cfg.echo["propensity"]["calibrate"] else None
    model = fit_propensity(
        train, cfg.propensity_spec(), calibration=cal, seed=cfg.echo["propensity"]["seed"]
    )
    scores = model.predict(data.covariates)
    bounds = select_overlap_bounds(scores, treatment=data.treatment, **cfg.bounds_kwargs())
    model = replace(model, bounds=bounds)
    save_model(model, layout.path(out, layout.PROPENSITY_MODEL))

    rows = [["row_id", "split", "treatment", "score"]]
    for i in range(data.n):
        rows.append(
            [str(int(data.row_ids[i])), str(data.split[i]), str(int(data.treatment[i])), _fmtf(scores[i])]
        )
    _write_csv(layout.path(out, layout.PROPENSITY_SCORES), rows)

    rep = overlap_report(scores, data.treatment, bounds, bins=cfg.echo["report"]["bins"])
    _write_json(
        layout.path(out, layout.OVERLAP),
        {"method": cfg.echo["propensity"]["bounds"], "report": rep.to_dict()},
    )
    warnings = []
    if rep.auroc_flag:
        warnings.append(
            _warn(
                "fit-propensity",
                "overlap",
                f"treatment scores separate the arms (AUROC {rep.auroc:.3f} >= "
                f"{rep.auroc_flag_threshold}); overlap is strained and deferral rates will be high",
            )
        )
    return [layout.PROPENSITY_MODEL, layout.PROPENSITY_SCORES, layout.OVERLAP], warnings


def stage_simulate(cfg: PipelineConfig, manifest: RunManifest):
    out = cfg.out_dir
    data = _load_data(out)
    menu = cfg.cate_menu()
    sim = cfg.echo["simulation"]
    study = run_study(
        data.covariates,
        data.treatment,
        cfg.sim_spec(),
        menu,
        runs=sim["runs"],
        seed=sim["seed"],
        train_frac=sim["train_frac"],
        plug_in_spec=cfg.plug_in_spec(),
        p_star_spec=cfg.propensity_spec(),
        include_ensembles=len(menu) >= 2,
    )
    _write_json(layout.path(out, layout.STUDY), study.to_dict())

    agg_rows = [["policy", "n_runs", "v_ipw_mean", "v_ipw_sem", "v_dr_mean", "v_dr_sem",
                 "v_true_mean", "v_true_sem"]]
    for a in study.aggregates:
        agg_rows.append(
            [a["policy"], str(a["n_runs"])]
            + [_fmtf(a[k]) for k in ("v_ipw_mean", "v_ipw_sem", "v_dr_mean", "v_dr_sem",
                                     "v_true_mean", "v_true_sem")]
        )
    _write_csv(layout.path(out, layout.STUDY_AGGREGATES), agg_rows)

    sc_rows = [["run", "policy", "source", "n_deferred", "treated_fraction",
                "v_ipw", "v_dr", "v_true"]]
    for r in study.rows:
        sc_rows.append(
            [str(r["run"]), r["policy"], r["source"], str(r["n_deferred"]),
             _fmtf(r["treated_fraction"]), _fmtf(r["v_ipw"]), _fmtf(r["v_dr"]), _fmtf(r["v_true"])]
        )
    _write_csv(layout.path(out, layout.STUDY_SCATTER), sc_rows)

    warnings = []
    for f in study.failures:
        warnings.append(_warn("simulate", "study-run-failed", f"run {f['run']}: {f['error']}"))
    for name, info in study.checks.items():
        if not info.get("pass", False):
            warnings.append(
                _warn("simulate", "study-check", f"validation check {name!r} did not pass")
            )
    return [layout.STUDY, layout.STUDY_AGGREGATES, layout.STUDY_SCATTER], warnings


def _heldout_outcome_mse(model, data) -> float:
    if model.kind == "s":
        arm = data.treatment.astype(float)[:, None]
        pred = model.components["f"].predict(np.hstack([data.covariates, arm]))
    else:
        p0 = model.components["mu0"].predict(data.covariates)
        p1 = model.components["mu1"].predict(data.covariates)
        pred = np.where(data.treatment == 1, p1, p0)
    return float(np.mean((pred - data.outcome) ** 2))


def stage_fit_cate(cfg: PipelineConfig, manifest: RunManifest):
    _require_ack(cfg, "fit-cate")
    out = cfg.out_dir
    data = _load_data(out)
    prop = load_model(_need(out, layout.PROPENSITY_MODEL, "fit-propensity"))
    train = data.rows_in("train")
    val = data.rows_in("validation")
    test = data.rows_in("test")
    menu = cfg.cate_menu()
    seed = cfg.echo["cate"]["seed"]

    # component gate: a model whose held-out outcome error is no better than
    # predicting the mean carries no signal and must not shape a policy
    var_val = float(np.var(val.outcome))
    gate = {}
    retained = {}
    warnings = []
    artifacts = []
    for name, fit_spec in menu.items():
        model = fit_spec.fit(train, propensity=prop, seed=seed)
        mse = _heldout_outcome_mse(model, val)
        excluded = bool(mse >= var_val)
        gate[name] = {"heldout_mse": mse, "outcome_variance": var_val, "excluded": excluded}
        if excluded:
            warnings.append(
                _warn(
                    "fit-cate",
                    "component-gate",
                    f"model {name!r} excluded: held-out MSE {mse:.6g} >= outcome "
                    f"variance {var_val:.6g}",
                )
            )
            continue
        retained[name] = model
        rel = layout.cate_model(name)
        save_model(model, layout.path(out, rel))
        artifacts.append(rel)
    _write_json(layout.path(out, layout.CATE_GATE), gate)
    artifacts.append(layout.CATE_GATE)
    if not retained:
        # keep the gate report visible even though the stage did not complete
        manifest.artifacts.extend({"path": p, "stage": "fit-cate"} for p in artifacts)
        manifest.warnings.extend(warnings)
        raise StageError(
            "every model in the menu failed the held-out error gate; "
            f"see {layout.CATE_GATE}"
        )

    theta = cfg.theta()
    u_seed = cfg.echo["uncertainty"]["seed"]
    est_rows = [["model", "row_id", "tau", "lower", "upper"]]
    taus = {}
    for name, model in retained.items():
        interval = uncertainty_interval(
            menu[name], train, test.covariates, theta, seed=u_seed,
            propensity=prop, model=model,
        )
        taus[name] = interval.point
        for i in range(test.n):
            est_rows.append(
                [name, str(int(test.row_ids[i])), _fmtf(interval.point[i]),
                 _fmtf(interval.lower[i]), _fmtf(interval.upper[i])]
            )
    _write_csv(layout.path(out, layout.CATE_ESTIMATES), est_rows)
    artifacts.append(layout.CATE_ESTIMATES)

    diag = cate_diagnostics(taus)
    _write_json(layout.path(out, layout.CATE_DIAGNOSTICS), diag.to_dict())
    artifacts.append(layout.CATE_DIAGNOSTICS)
    return artifacts, warnings


def _retained_names(cfg: PipelineConfig, gate: dict) -> list[str]:
    return [name for name in cfg.echo["cate"]["menu"] if not gate[name]["excluded"]]


def _estimates_by_model(out_dir: str, test) -> dict:
    rows = _read_csv(_need(out_dir, layout.CATE_ESTIMATES, "fit-cate"))[1:]
    grouped: dict[str, dict] = {}
    for model, row_id, tau, lower, upper in rows:
        g = grouped.setdefault(model, {"row_ids": [], "tau": [], "lower": [], "upper": []})
        g["row_ids"].append(int(row_id))
        g["tau"].append(float(tau))
        g["lower"].append(float(lower))
        g["upper"].append(float(upper))
    want = [int(r) for r in test.row_ids]
    for model, g in grouped.items():
        if g["row_ids"] != want:
            raise StageError(
                f"stored effect estimates for {model!r} do not line up with the current "
                "test split; rerun fit-cate"
            )
        for key in ("tau", "lower", "upper"):
            g[key] = np.asarray(g[key], dtype=float)
    return grouped


def stage_defer(cfg: PipelineConfig, manifest: RunManifest):
    _require_ack(cfg, "defer")
    out = cfg.out_dir
    data = _load_data(out)
    test = data.rows_in("test")
    prop = load_model(_need(out, layout.PROPENSITY_MODEL, "fit-propensity"))
    if prop.bounds is None:
        raise StageError("propensity model has no overlap bounds; rerun fit-propensity")
    gate = _read_json(_need(out, layout.CATE_GATE, "fit-cate"))
    estimates = _estimates_by_model(out, test)
    scores = prop.predict(test.covariates)
    rule = DeferralRule(
        eta_low=prop.bounds[0],
        eta_high=prop.bounds[1],
        theta=cfg.theta(),
        mode=cfg.echo["deferral"]["mode"],
    )

    warnings = []
    dec_rows = [["model", "row_id", "deferred", "reason"]]
    profile = {}
    for name in _retained_names(cfg, gate):
        g = estimates[name]
        interval = CateInterval(lower=g["lower"], point=g["tau"], upper=g["upper"])
        decision = evaluate_deferral(rule, scores, interval=interval)
        for rid, d, why in zip(test.row_ids, decision.defer, decision.reason):
            dec_rows.append([name, str(int(rid)), "1" if d else "0", why or ""])
        reasons = Counter(w for w in decision.reason if w)
        entry = {
            "n_deferred": decision.n_deferred,
            "n_recommended": test.n - decision.n_deferred,
            "n_overlap": int(reasons.get(REASON_OVERLAP, 0)),
            "n_uncertainty": int(reasons.get(REASON_UNCERTAINTY, 0)),
            "profile": None,
        }
        try:
            prof = characterize_subpop(
                decision.defer, test, lam=cfg.echo["deferral"]["profile_lam"]
            )
            entry["profile"] = {**prof.to_dict(), "table": prof.table.to_csv_rows()}
        except DataError:
            warnings.append(
                _warn(
                    "defer",
                    "subpopulation",
                    f"model {name!r}: deferral split has a single class "
                    f"({decision.n_deferred}/{test.n} deferred); no profile fitted",
                )
            )
        profile[name] = entry

    _write_csv(layout.path(out, layout.DEFER_DECISIONS), dec_rows)
    _write_json(layout.path(out, layout.DEFER_SUBPOP), profile)
    return [layout.DEFER_DECISIONS, layout.DEFER_SUBPOP], warnings


def _defer_flags(out_dir: str, test) -> dict:
    rows = _read_csv(_need(out_dir, layout.DEFER_DECISIONS, "defer"))[1:]
    grouped: dict[str, dict] = {}
    for model, row_id, deferred, _reason in rows:
        g = grouped.setdefault(model, {"row_ids": [], "defer": []})
        g["row_ids"].append(int(row_id))
        g["defer"].append(deferred == "1")
    want = [int(r) for r in test.row_ids]
    out = {}
    for model, g in grouped.items():
        if g["row_ids"] != want:
            raise StageError(
                f"stored deferral decisions for {model!r} do not line up with the "
                "current test split; rerun defer"
            )
        out[model] = np.asarray(g["defer"], dtype=bool)
    return out


def stage_evaluate(cfg: PipelineConfig, manifest: RunManifest):
    _require_ack(cfg, "evaluate")
    out = cfg.out_dir
    data = _load_data(out)
    train = data.rows_in("train")
    test = data.rows_in("test")
    prop = load_model(_need(out, layout.PROPENSITY_MODEL, "fit-propensity"))
    gate = _read_json(_need(out, layout.CATE_GATE, "fit-cate"))
    retained = _retained_names(cfg, gate)
    estimates = _estimates_by_model(out, test)
    flags = _defer_flags(out, test)
    rule = cfg.decision_rule()
    eval_cfg = cfg.echo["evaluation"]
    seed = eval_cfg["seed"]
    warnings = []

    p_star = prop.predict(test.covariates)

    plug_spec = cfg.plug_in_spec()
    tr = train.treatment == 1
    plug0 = fit_regressor(plug_spec, train.covariates[~tr], train.outcome[~tr], seed=seed)
    plug1 = fit_regressor(plug_spec, train.covariates[tr], train.outcome[tr], seed=seed)
    plug_in = np.column_stack([plug0.predict(test.covariates), plug1.predict(test.covariates)])
    plug_in_id = f"per-arm {plug_spec.kind}"
    for name in retained:
        if cfg.echo["cate"]["menu"][name]["learner"]["kind"] == plug_spec.kind:
            warnings.append(
                _warn(
                    "evaluate",
                    "congeniality",
                    f"policy model {name!r} and the DR plug-in share the learner family "
                    f"{plug_spec.kind!r}; DR values for that policy may be optimistic",
                )
            )

    policies = []
    for name in retained:
        policies.append(
            build_policy(
                estimates[name]["tau"], rule, defer=flags[name], name=name, source="cate-model"
            )
        )
    if cfg.ensembles and len(retained) >= 2:
        members = [load_model(os.path.join(out, layout.cate_model(n))) for n in retained]
        outside = (prop.bounds[0] > p_star) | (p_star > prop.bounds[1]) if prop.bounds else None
        for mode in cfg.ensembles:
            ens = ensemble_cate(members, mode)
            policies.append(
                build_policy(
                    ens, rule, test.covariates, defer=outside,
                    name=f"ensemble-{mode}", source="ensemble",
                )
            )
    elif cfg.ensembles:
        warnings.append(
            _warn(
                "evaluate",
                "ensembles",
                f"ensembles need at least 2 retained models, have {len(retained)}; skipped",
            )
        )
    policies.extend(baselines(test, p_star, seed=seed))

    value_rows = [["policy", "source", "estimator", "point", "boot_mean", "boot_std",
                   "boot_min", "boot_q25", "boot_median", "boot_q75", "boot_max",
                   "n_deferred", "n_skipped"]]
    for policy in policies:
        for est in cfg.estimators:
            estimate = estimate_policy_value(
                policy, test, p_star, est,
                plug_in=plug_in if est == "DR" else None,
                plug_in_id=plug_in_id,
                B=eval_cfg["bootstrap_b"], seed=seed,
            )
            s = estimate.summary()
            value_rows.append(
                [policy.name, policy.source, est, _fmtf(estimate.point),
                 _fmtf(s["mean"]), _fmtf(s["std"]), _fmtf(s["min"]), _fmtf(s["q25"]),
                 _fmtf(s["median"]), _fmtf(s["q75"]), _fmtf(s["max"]),
                 str(estimate.n_deferred), str(estimate.n_skipped)]
            )
    _write_csv(layout.path(out, layout.POLICY_VALUES), value_rows)
    artifacts = [layout.POLICY_VALUES]

    tournament = bootstrap_tournament(
        policies, test, p_star,
        estimators=cfg.estimators, B=eval_cfg["bootstrap_b"], seed=seed, plug_in=plug_in,
    )
    names = tournament.policies
    for est in cfg.estimators:
        wins_rows = [["policy", *names]]
        for name, row in zip(names, tournament.wins[est]):
            wins_rows.append([name, *[str(int(v)) for v in row]])
        rel = layout.wins(est)
        _write_csv(layout.path(out, rel), wins_rows)
        artifacts.append(rel)

        dist = tournament.distributions[est]
        dist_rows = [list(names)]
        for b in range(dist.shape[1]):
            dist_rows.append([_fmtf(v) for v in dist[:, b]])
        rel = layout.distributions(est)
        _write_csv(layout.path(out, rel), dist_rows)
        artifacts.append(rel)

    curve_est = "DR" if "DR" in cfg.estimators else cfg.estimators[0]
    curve_rows = [["model", "q", "treated_fraction", "value"]]
    for name in retained:
        curve = rank_curve(
            estimates[name]["tau"], test, p_star,
            estimator=curve_est, step=eval_cfg["rank_step"],
            plug_in=plug_in if curve_est == "DR" else None,
        )
        for pt in curve:
            curve_rows.append(
                [name, _fmtf(pt["q"]), _fmtf(pt["treated_fraction"]), _fmtf(pt["value"])]
            )
    _write_csv(layout.path(out, layout.RANK_CURVE), curve_rows)
    artifacts.append(layout.RANK_CURVE)

    trees = {p.name: outcome_tree(p, test) for p in policies}
    _write_json(layout.path(out, layout.OUTCOME_TREES), trees)
    artifacts.append(layout.OUTCOME_TREES)

    rec_rows = [["policy", "row_id", "recommendation"]]
    for policy in policies:
        if policy.source == "baseline":
            continue
        for rid, r in zip(test.row_ids, policy.rec):
            rec_rows.append(
                [policy.name, str(int(rid)), "defer" if r == DEFER else str(int(r))]
            )
    _write_csv(layout.path(out, layout.RECOMMENDATIONS), rec_rows)
    artifacts.append(layout.RECOMMENDATIONS)
    return artifacts, warnings


def stage_report(cfg: PipelineConfig, manifest: RunManifest):
    return emit_report(cfg.out_dir, manifest.to_dict())


_STAGE_FN = {
    "ingest": stage_ingest,
    "fit-propensity": stage_fit_propensity,
    "simulate": stage_simulate,
    "fit-cate": stage_fit_cate,
    "defer": stage_defer,
    "evaluate": stage_evaluate,
    "report": stage_report,
}


def planned_stages(cfg: PipelineConfig) -> list[str]:
    """Stage list a full run executes, honoring the simulation flags."""
    sim = cfg.echo["simulation"]
    if sim["only"]:
        return ["ingest", "simulate"]
    stages = ["ingest", "fit-propensity"]
    if sim["enabled"]:
        stages.append("simulate")
    stages.extend(["fit-cate", "defer", "evaluate", "report"])
    return stages


def _execute(cfg: PipelineConfig, stage: str, manifest: RunManifest) -> None:
    fn = _STAGE_FN.get(stage)
    if fn is None:
        raise ConfigError(f"unknown stage {stage!r}; stages are {list(STAGE_ORDER)}")
    include_timings = cfg.echo["report"]["include_timings"]
    start = time.perf_counter()
    try:
        artifacts, warnings = fn(cfg, manifest)
    except TreatPolicyError:
        manifest.save(cfg.out_dir)
        raise
    except Exception as exc:
        manifest.save(cfg.out_dir)
        raise StageError(f"stage {stage!r} failed: {exc}") from exc
    elapsed = time.perf_counter() - start
    manifest.record(stage, artifacts, warnings, elapsed if include_timings else None)
    manifest.save(cfg.out_dir)


def run_pipeline(cfg: PipelineConfig) -> RunManifest:
    """Execute every planned stage from scratch; abort on the first failure,
    leaving the manifest of completed stages behind."""
    manifest = RunManifest.fresh(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    manifest.save(cfg.out_dir)
    for stage in planned_stages(cfg):
        _execute(cfg, stage, manifest)
    return manifest


def run_stages(cfg: PipelineConfig, stages) -> RunManifest:
    """Run selected stages, merging into the directory's manifest when the
    config hash matches (stale manifests are replaced)."""
    manifest = RunManifest.load_or_fresh(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    for stage in stages:
        _execute(cfg, stage, manifest)
    return manifest
