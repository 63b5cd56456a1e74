"""Linear models: least squares and logistic, with none/L1/L2 penalties.

Objectives (penalties never touch the intercept):

* least-squares: 0.5 * ||y - b - X beta||^2 + penalty
* logistic:      sum_i log(1 + exp(-s_i eta_i)) + penalty   (s in {-1, +1})

with penalty = lam * ||beta||_1 for L1 and 0.5 * lam * ||beta||^2 for L2, on
the raw sum scale, so the L2 least-squares solution without intercept is the
closed form (X'X + lam I)^(-1) X'y.

Solvers: closed-form solve for least squares with none/L2; cyclic coordinate
descent to a coefficient-change plus duality-gap tolerance for L1; damped
Newton (iteratively reweighted least squares) for logistic, with an inner
weighted coordinate descent when the penalty is L1.  All fits are
deterministic; ``seed`` is accepted for interface symmetry and ignored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, DataError

__all__ = ["LinearModel", "fit_linear"]

FAMILIES = ("least-squares", "logistic")
PENALTIES = ("none", "l1", "l2")


def sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta, dtype=float)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    family: str
    penalty: str
    lam: float
    n_iter: int = 0

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coefficients + self.intercept

    def predict(self, X) -> np.ndarray:
        eta = self.decision_function(X)
        if self.family == "logistic":
            return sigmoid(eta)
        return eta

    def predict_proba(self, X) -> np.ndarray:
        if self.family != "logistic":
            raise ValueError("predict_proba requires a logistic model")
        return sigmoid(self.decision_function(X))

    def to_dict(self) -> dict:
        return {
            "coefficients": [float(c) for c in self.coefficients],
            "intercept": float(self.intercept),
            "family": self.family,
            "penalty": self.penalty,
            "lam": float(self.lam),
            "n_iter": int(self.n_iter),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(
            coefficients=np.asarray(d["coefficients"], dtype=float),
            intercept=float(d["intercept"]),
            family=d["family"],
            penalty=d["penalty"],
            lam=float(d["lam"]),
            n_iter=int(d["n_iter"]),
        )


def fit_linear(
    X,
    y,
    *,
    family: str = "least-squares",
    penalty: str = "none",
    lam: float = 0.0,
    fit_intercept: bool = True,
    tol: float = 1e-6,
    max_iter: int | None = None,
    seed: int | None = None,
) -> LinearModel:
    """Fit a linear model; see the module docstring for objectives and solvers.

    Raises ConvergenceError (carrying the last iterate and residual gap) if an
    iterative solver exhausts its iteration cap.
    """
    del seed  # deterministic fits; accepted for interface symmetry
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if y.shape != (X.shape[0],):
        raise ValueError("y length does not match X")
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if penalty not in PENALTIES:
        raise ValueError(f"unknown penalty {penalty!r}")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    if penalty == "none":
        lam = 0.0

    if family == "least-squares":
        if penalty == "l1":
            return _fit_lasso(X, y, lam, fit_intercept, tol, max_iter or 1000)
        return _fit_ridge(X, y, lam, fit_intercept, penalty)
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise DataError("logistic family requires 0/1 targets")
    return _fit_logistic(X, y, penalty, lam, fit_intercept, tol, max_iter or 200)


def _fit_ridge(X, y, lam, fit_intercept, penalty) -> LinearModel:
    if fit_intercept:
        xm = X.mean(axis=0)
        ym = float(y.mean())
        Xc = X - xm
        yc = y - ym
    else:
        Xc, yc = X, y
    d = X.shape[1]
    gram = Xc.T @ Xc + lam * np.eye(d)
    rhs = Xc.T @ yc
    try:
        beta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        beta = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    intercept = ym - float(xm @ beta) if fit_intercept else 0.0
    return LinearModel(beta, intercept, "least-squares", penalty, lam)


def _soft_threshold(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _lasso_gap(Xc, yc, beta, resid, lam) -> float:
    # duality gap for 0.5*||yc - Xc b||^2 + lam*||b||_1 with the scaled
    # residual as the dual candidate; lam == 0 falls back to the normal
    # equations residual
    corr = float(np.abs(Xc.T @ resid).max(initial=0.0))
    if lam <= 0.0:
        return corr
    primal = 0.5 * float(resid @ resid) + lam * float(np.abs(beta).sum())
    scale = min(1.0, lam / corr) if corr > lam else 1.0
    theta = scale * resid
    dual = 0.5 * float(yc @ yc) - 0.5 * float((theta - yc) @ (theta - yc))
    return primal - dual


def _cd_sweeps(Xc, yc, beta, resid, col_sq, lam, tol, max_iter):
    """Cyclic coordinate descent on 0.5*||yc - Xc b||^2 + lam*||b||_1.

    Returns (n_sweeps, gap); raises ConvergenceError past max_iter.
    """
    d = Xc.shape[1]
    for sweep in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            if old != 0.0:
                resid += Xc[:, j] * old
            rho = float(Xc[:, j] @ resid)
            new = _soft_threshold(rho, lam) / col_sq[j]
            if new != 0.0:
                resid -= Xc[:, j] * new
            beta[j] = new
            max_delta = max(max_delta, abs(new - old))
        if max_delta < tol * max(1.0, float(np.abs(beta).max(initial=0.0))):
            gap = _lasso_gap(Xc, yc, beta, resid, lam)
            if gap < tol or max_delta == 0.0:
                return sweep, gap
    gap = _lasso_gap(Xc, yc, beta, resid, lam)
    raise ConvergenceError(
        f"coordinate descent did not converge in {max_iter} sweeps (gap {gap:.3e})",
        last_model=LinearModel(beta.copy(), 0.0, "least-squares", "l1", lam, max_iter),
        gap=gap,
    )


def _fit_lasso(X, y, lam, fit_intercept, tol, max_iter) -> LinearModel:
    if fit_intercept:
        xm = X.mean(axis=0)
        ym = float(y.mean())
        Xc = X - xm
        yc = y - ym
    else:
        Xc, yc = X, y.copy()
    d = X.shape[1]
    beta = np.zeros(d)
    resid = yc.copy()
    col_sq = (Xc * Xc).sum(axis=0)
    sweeps, _gap = _cd_sweeps(Xc, yc, beta, resid, col_sq, lam, tol, max_iter)
    intercept = ym - float(xm @ beta) if fit_intercept else 0.0
    return LinearModel(beta, intercept, "least-squares", "l1", lam, sweeps)


def _logistic_loss(eta, y, lam_l2, lam_l1, beta):
    ce = float(np.sum(np.logaddexp(0.0, eta) - y * eta))
    return ce + 0.5 * lam_l2 * float(beta @ beta) + lam_l1 * float(np.abs(beta).sum())


def _fit_logistic(X, y, penalty, lam, fit_intercept, tol, max_iter) -> LinearModel:
    n, d = X.shape
    lam_l2 = lam if penalty == "l2" else 0.0
    lam_l1 = lam if penalty == "l1" else 0.0
    beta = np.zeros(d)
    intercept = 0.0
    eta = np.zeros(n)
    loss = _logistic_loss(eta, y, lam_l2, lam_l1, beta)

    for iteration in range(1, max_iter + 1):
        p = sigmoid(eta)
        w = np.clip(p * (1.0 - p), 1e-10, None)

        if penalty == "l1":
            new_beta, new_intercept = _weighted_lasso_step(
                X, eta, y, p, w, beta, intercept, lam_l1, fit_intercept, tol
            )
        else:
            grad = X.T @ (p - y) + lam_l2 * beta
            cols = [X]
            if fit_intercept:
                cols = [X, np.ones((n, 1))]
            Xa = np.hstack(cols) if fit_intercept else X
            H = (Xa * w[:, None]).T @ Xa
            if lam_l2 > 0:
                H[:d, :d] += lam_l2 * np.eye(d)
            g_full = np.concatenate([grad, [float(np.sum(p - y))]]) if fit_intercept else grad
            try:
                step = np.linalg.solve(H, g_full)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, g_full, rcond=None)[0]
            new_beta = beta - step[:d]
            new_intercept = intercept - (step[d] if fit_intercept else 0.0)

        # damping: halve the step until the penalized loss does not increase
        scale = 1.0
        for _ in range(40):
            cand_beta = beta + scale * (new_beta - beta)
            cand_int = intercept + scale * (new_intercept - intercept)
            cand_eta = X @ cand_beta + cand_int
            cand_loss = _logistic_loss(cand_eta, y, lam_l2, lam_l1, cand_beta)
            if cand_loss <= loss + 1e-12:
                break
            scale *= 0.5
        delta = max(
            float(np.abs(cand_beta - beta).max(initial=0.0)), abs(cand_int - intercept)
        )
        beta, intercept, eta, loss = cand_beta, cand_int, cand_eta, cand_loss
        if delta < tol:
            return LinearModel(beta, intercept, "logistic", penalty, lam, iteration)

    grad_norm = float(np.abs(X.T @ (sigmoid(eta) - y) + lam_l2 * beta).max(initial=0.0))
    raise ConvergenceError(
        f"logistic fit did not converge in {max_iter} iterations "
        f"(max |gradient| {grad_norm:.3e})",
        last_model=LinearModel(beta, intercept, "logistic", penalty, lam, max_iter),
        gap=grad_norm,
    )


def _weighted_lasso_step(X, eta, y, p, w, beta, intercept, lam, fit_intercept, tol):
    """One quadratic-approximation step: weighted lasso on the working response."""
    z = eta + (y - p) / w
    beta = beta.copy()
    b0 = intercept
    col_sq = (X * X * w[:, None]).sum(axis=0)
    resid = z - X @ beta - b0
    inner_tol = max(tol / 10.0, 1e-10)
    for _ in range(100):
        max_delta = 0.0
        if fit_intercept:
            shift = float(np.sum(w * resid) / np.sum(w))
            b0 += shift
            resid -= shift
            max_delta = abs(shift)
        for j in range(X.shape[1]):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            if old != 0.0:
                resid += X[:, j] * old
            rho = float((w * X[:, j]) @ resid)
            new = _soft_threshold(rho, lam) / col_sq[j]
            if new != 0.0:
                resid -= X[:, j] * new
            beta[j] = new
            max_delta = max(max_delta, abs(new - old))
        if max_delta < inner_tol * max(1.0, float(np.abs(beta).max(initial=0.0))):
            break
    return beta, b0
