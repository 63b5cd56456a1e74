"""Policies over effect estimates and their off-policy value estimation.

A policy maps each row to Treat1, Treat0, or Defer.  Value estimation
follows the weighting scheme where non-deferred rows matched by the policy
(observed arm equals the recommendation) are weighted by the inverse
probability of that arm, self-normalized; deferred rows contribute their
factual outcome mean; the two parts mix by the empirical defer proportion
of whatever row set the estimate runs on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError
from .ingest import Dataset

__all__ = [
    "DEFER",
    "DecisionRule",
    "Policy",
    "PolicyValueEstimate",
    "build_policy",
    "value_ipw",
    "value_dr",
    "estimate_policy_value",
    "baselines",
    "TournamentResult",
    "bootstrap_tournament",
    "rank_curve",
    "outcome_tree",
    "rtb_transform",
]

DEFER = -1

P_STAR_CLIP = (0.01, 0.99)

ESTIMATORS = ("IPW", "DR")

DIRECTIONS = ("higher-better", "lower-better")


@dataclass(frozen=True)
class DecisionRule:
    """Threshold rule turning effect estimates into treat/control calls.

    higher-better treats when tau >= threshold (boundary treats); the
    lower-better direction flips the comparison to tau <= threshold, for
    outcomes where smaller values are the goal.
    """

    threshold: float = 0.0
    direction: str = "higher-better"

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")

    def apply(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.direction == "higher-better":
            return tau >= self.threshold
        return tau <= self.threshold

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "direction": self.direction}

    @classmethod
    def from_dict(cls, d: dict):
        return cls(threshold=d.get("threshold", 0.0), direction=d.get("direction", "higher-better"))


@dataclass
class Policy:
    """Per-row recommendations: 1 treat, 0 control, -1 defer."""

    name: str
    rec: np.ndarray
    source: str = "cate-model"
    factual: bool = False

    def __post_init__(self):
        self.rec = np.asarray(self.rec, dtype=np.int8)
        bad = ~np.isin(self.rec, (0, 1, DEFER))
        if bad.any():
            raise ValueError(f"recommendations must be 0, 1, or {DEFER}")

    @property
    def n(self) -> int:
        return self.rec.size

    @property
    def n_deferred(self) -> int:
        return int((self.rec == DEFER).sum())

    @property
    def treated_fraction(self) -> float:
        return float((self.rec == 1).mean())


def build_policy(
    cate_source,
    decision_rule: DecisionRule,
    X=None,
    *,
    defer=None,
    name: str = "policy",
    source: str = "cate-model",
) -> Policy:
    """Apply the decision rule to effect estimates, with deferral taking
    precedence over the rule.

    ``cate_source`` is either a per-row effect vector or a fitted model
    scored at ``X``; models exposing their own defer flags (voting
    ensembles) contribute them, and ``defer`` adds rule-based flags on top.
    """
    if isinstance(cate_source, np.ndarray) or isinstance(cate_source, (list, tuple)):
        tau = np.asarray(cate_source, dtype=float)
        model_defer = np.zeros(tau.size, dtype=bool)
    else:
        if X is None:
            raise ValueError("scoring a model needs the evaluation covariates")
        if hasattr(cate_source, "predict_with_defer"):
            tau, model_defer = cate_source.predict_with_defer(np.asarray(X, dtype=float))
        else:
            tau = np.asarray(cate_source.predict(np.asarray(X, dtype=float)), dtype=float)
            model_defer = np.zeros(tau.size, dtype=bool)
    flags = model_defer.copy()
    if defer is not None:
        defer = np.asarray(defer, dtype=bool)
        if defer.shape != flags.shape:
            raise ValueError("defer flags length does not match effect estimates")
        flags |= defer
    rec = np.where(flags, DEFER, decision_rule.apply(tau).astype(np.int8))
    return Policy(name=name, rec=rec, source=source)


def _scores(p_star, X, clip) -> np.ndarray:
    p = np.asarray(p_star, dtype=float) if not hasattr(p_star, "predict") else np.asarray(
        p_star.predict(np.asarray(X, dtype=float)), dtype=float
    )
    return np.clip(p, clip[0], clip[1])


def _value(
    rec: np.ndarray,
    t: np.ndarray,
    y: np.ndarray,
    p1: np.ndarray,
    plug_in: np.ndarray | None,
    estimator: str,
    factual: bool,
    idx: np.ndarray | None = None,
) -> float:
    """One value estimate on rows ``idx`` (all rows when None)."""
    if idx is not None:
        rec, t, y, p1 = rec[idx], t[idx], y[idx], p1[idx]
        if plug_in is not None:
            plug_in = plug_in[idx]
    if factual:
        return float(y.mean())
    nd = rec != DEFER
    p_def = float((~nd).mean())
    v_def = float(y[~nd].mean()) if p_def > 0 else 0.0
    if not nd.any():
        return v_def
    rec_nd = rec[nd]
    t_nd = t[nd]
    y_nd = y[nd]
    p_rec = np.where(rec_nd == 1, p1[nd], 1.0 - p1[nd])
    w = (t_nd == rec_nd) / p_rec
    total_w = w.sum()
    if total_w == 0.0:
        raise EstimationError("no rows match the recommended arm; zero total weight")
    if estimator == "IPW":
        v_nd = float(np.sum(w * y_nd) / total_w)
    elif estimator == "DR":
        if plug_in is None:
            raise ValueError("DR estimation needs plug-in outcome predictions")
        y_hat = plug_in[nd][np.arange(rec_nd.size), rec_nd]
        v_nd = float(np.sum(w * (y_nd - y_hat)) / total_w + y_hat.mean())
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return v_nd * (1.0 - p_def) + v_def * p_def


def _check_policy(policy: Policy, data: Dataset) -> None:
    if policy.rec.size != data.n:
        raise ValueError(
            f"policy covers {policy.rec.size} rows, dataset has {data.n}"
        )


def _plug_in_matrix(plug_in, data: Dataset) -> np.ndarray:
    arr = np.asarray(plug_in, dtype=float)
    if arr.shape != (data.n, 2):
        raise ValueError(f"plug-in predictions must be shaped ({data.n}, 2)")
    return arr


def value_ipw(policy: Policy, data: Dataset, p_star, clip=P_STAR_CLIP) -> float:
    """Self-normalized inverse-probability value of the policy on this data."""
    _check_policy(policy, data)
    p1 = _scores(p_star, data.covariates, clip)
    return _value(policy.rec, data.treatment, data.outcome, p1, None, "IPW", policy.factual)


def value_dr(policy: Policy, data: Dataset, p_star, plug_in, clip=P_STAR_CLIP) -> float:
    """Doubly robust value: weighted plug-in residuals plus the plug-in mean.

    ``plug_in`` holds outcome predictions per row for both arms, shape
    (n, 2), column index = arm.
    """
    _check_policy(policy, data)
    p1 = _scores(p_star, data.covariates, clip)
    plug = _plug_in_matrix(plug_in, data)
    return _value(policy.rec, data.treatment, data.outcome, p1, plug, "DR", policy.factual)


@dataclass
class PolicyValueEstimate:
    """Point value plus its bootstrap distribution under one estimator."""

    policy: str
    estimator: str
    point: float
    bootstrap: np.ndarray
    plug_in_id: str | None = None
    n_deferred: int = 0
    n_skipped: int = 0

    def __post_init__(self):
        self.bootstrap = np.asarray(self.bootstrap, dtype=float)

    def summary(self) -> dict:
        ok = self.bootstrap[~np.isnan(self.bootstrap)]
        if ok.size == 0:
            stats = {k: float("nan") for k in ("mean", "std", "min", "q25", "median", "q75", "max")}
        else:
            stats = {
                "mean": float(ok.mean()),
                "std": float(ok.std(ddof=1)) if ok.size > 1 else 0.0,
                "min": float(ok.min()),
                "q25": float(np.quantile(ok, 0.25)),
                "median": float(np.quantile(ok, 0.5)),
                "q75": float(np.quantile(ok, 0.75)),
                "max": float(ok.max()),
            }
        return {"policy": self.policy, "estimator": self.estimator, "point": self.point, **stats}

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "estimator": self.estimator,
            "point": self.point,
            "bootstrap": [float(v) for v in self.bootstrap],
            "plug_in_id": self.plug_in_id,
            "n_deferred": self.n_deferred,
            "n_skipped": self.n_skipped,
        }


def estimate_policy_value(
    policy: Policy,
    data: Dataset,
    p_star,
    estimator: str = "IPW",
    *,
    plug_in=None,
    plug_in_id: str | None = None,
    B: int = 1000,
    seed: int | None = None,
    clip=P_STAR_CLIP,
) -> PolicyValueEstimate:
    """Point estimate plus B bootstrap replicates (rows resampled uniformly).

    Replicates that fail with zero matched weight are recorded as NaN and
    counted in ``n_skipped``; the distribution always has length B.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    _check_policy(policy, data)
    p1 = _scores(p_star, data.covariates, clip)
    plug = _plug_in_matrix(plug_in, data) if estimator == "DR" else None
    args = (policy.rec, data.treatment, data.outcome, p1, plug, estimator, policy.factual)
    point = _value(*args)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    boot = np.full(B, np.nan)
    skipped = 0
    for b in range(B):
        idx = rng.integers(0, data.n, data.n)
        try:
            boot[b] = _value(*args, idx=idx)
        except EstimationError:
            skipped += 1
    return PolicyValueEstimate(
        policy=policy.name,
        estimator=estimator,
        point=point,
        bootstrap=boot,
        plug_in_id=plug_in_id if estimator == "DR" else None,
        n_deferred=policy.n_deferred,
        n_skipped=skipped,
    )


def baselines(data: Dataset, propensity, seed: int | None = None, clip=P_STAR_CLIP) -> list[Policy]:
    """Reference policies: observed practice, proportion-matched random
    assignment, propensity-threshold assignment, and the two constants."""
    t = np.asarray(data.treatment, dtype=np.int8)
    e = _scores(propensity, data.covariates, clip)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    frac = float((t == 1).mean())
    random_rec = (rng.random(data.n) < frac).astype(np.int8)
    return [
        Policy(name="doctors", rec=t, source="baseline", factual=True),
        Policy(name="random", rec=random_rec, source="baseline"),
        Policy(name="propensity", rec=(e > 0.5).astype(np.int8), source="baseline"),
        Policy(name="treat-all-0", rec=np.zeros(data.n, dtype=np.int8), source="baseline"),
        Policy(name="treat-all-1", rec=np.ones(data.n, dtype=np.int8), source="baseline"),
    ]


@dataclass
class TournamentResult:
    """Pairwise strict-win counts per estimator over shared bootstrap rounds."""

    policies: list
    estimators: tuple
    wins: dict
    distributions: dict
    skipped: dict
    B: int

    def to_dict(self) -> dict:
        return {
            "policies": self.policies,
            "estimators": list(self.estimators),
            "wins": {est: [[int(v) for v in row] for row in m] for est, m in self.wins.items()},
            "skipped": {est: int(v) for est, v in self.skipped.items()},
            "B": self.B,
        }


def bootstrap_tournament(
    policies: list,
    data: Dataset,
    p_star,
    *,
    estimators=ESTIMATORS,
    B: int = 1000,
    seed: int | None = None,
    plug_in=None,
    clip=P_STAR_CLIP,
) -> TournamentResult:
    """Resample rows B times; every policy is valued on the same rounds and
    wins[i][j] counts rounds where policy i strictly beats policy j.

    A round where a policy's estimate fails contributes no wins in either
    direction for its pairs; the failure count per estimator is reported.
    """
    if B < 1:
        raise ValueError(f"need at least one round, got B={B}")
    for policy in policies:
        _check_policy(policy, data)
    if "DR" in estimators and plug_in is None:
        raise ValueError("DR estimation needs plug-in outcome predictions")
    p1 = _scores(p_star, data.covariates, clip)
    plug = _plug_in_matrix(plug_in, data) if plug_in is not None else None
    k = len(policies)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    dists = {est: np.full((k, B), np.nan) for est in estimators}
    skipped = {est: 0 for est in estimators}
    for b in range(B):
        idx = rng.integers(0, data.n, data.n)
        for i, policy in enumerate(policies):
            for est in estimators:
                try:
                    dists[est][i, b] = _value(
                        policy.rec,
                        data.treatment,
                        data.outcome,
                        p1,
                        plug if est == "DR" else None,
                        est,
                        policy.factual,
                        idx=idx,
                    )
                except EstimationError:
                    skipped[est] += 1
    wins = {}
    for est in estimators:
        v = dists[est]
        m = np.zeros((k, k), dtype=int)
        for i in range(k):
            for j in range(k):
                if i != j:
                    m[i, j] = int(np.sum(v[i] > v[j]))
        wins[est] = m
    return TournamentResult(
        policies=[p.name for p in policies],
        estimators=tuple(estimators),
        wins=wins,
        distributions=dists,
        skipped=skipped,
        B=B,
    )


def rank_curve(
    tau,
    data: Dataset,
    p_star,
    *,
    estimator: str = "IPW",
    step: float = 0.1,
    plug_in=None,
    clip=P_STAR_CLIP,
) -> list[dict]:
    """Value of treating everyone above each effect quantile.

    For each grid level q the policy treats rows with tau strictly above
    the q-quantile, so q = 1 treats nobody (identical to the all-control
    policy) and q = 0 treats everything above the minimum.
    """
    if not 0.0 < step < 1.0:
        raise ValueError(f"step must be in (0, 1), got {step}")
    tau = np.asarray(tau, dtype=float)
    if tau.size != data.n:
        raise ValueError("effect vector length does not match dataset")
    p1 = _scores(p_star, data.covariates, clip)
    plug = _plug_in_matrix(plug_in, data) if estimator == "DR" else None
    n_steps = int(round(1.0 / step))
    curve = []
    for q in np.linspace(0.0, 1.0, n_steps + 1):
        rec = (tau > np.quantile(tau, q)).astype(np.int8)
        value = _value(rec, data.treatment, data.outcome, p1, plug, estimator, False)
        curve.append(
            {
                "q": float(q),
                "treated_fraction": float(rec.mean()),
                "value": value,
            }
        )
    return curve


def _node(y: np.ndarray) -> dict:
    n = int(y.size)
    out = {"n": n, "mean": None, "sem": None}
    if n >= 1:
        out["mean"] = float(y.mean())
    if n >= 2:
        out["sem"] = float(y.std(ddof=1) / np.sqrt(n))
    return out


def outcome_tree(policy: Policy, data: Dataset) -> dict:
    """Factual outcome summaries split by observed arm, then by whether the
    policy agrees with, disagrees with, or defers on that arm."""
    _check_policy(policy, data)
    t = np.asarray(data.treatment, dtype=np.int8)
    y = data.outcome
    rec = policy.rec
    root = _node(y)
    root["children"] = {}
    for arm in (0, 1):
        in_arm = t == arm
        arm_node = _node(y[in_arm])
        agree = in_arm & (rec == arm)
        disagree = in_arm & (rec != arm) & (rec != DEFER)
        defer = in_arm & (rec == DEFER)
        arm_node["children"] = {
            "agree": _node(y[agree]),
            "disagree": _node(y[disagree]),
            "defer": _node(y[defer]),
        }
        root["children"][f"arm_{arm}"] = arm_node
    return root


def rtb_transform(crea_d, crea_o, crea_b):
    """Fraction of the way back from the decision-time value to baseline:
    (decision - observed) / (decision - baseline), NaN where decision
    equals baseline."""
    d = np.asarray(crea_d, dtype=float)
    o = np.asarray(crea_o, dtype=float)
    b = np.asarray(crea_b, dtype=float)
    denom = d - b
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom == 0.0, np.nan, (d - o) / denom)
    if np.isscalar(crea_d) or (isinstance(crea_d, float) or isinstance(crea_d, int)):
        return float(out)
    return out
