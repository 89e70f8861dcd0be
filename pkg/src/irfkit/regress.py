"""OLS, two-stage least squares, and Newey-West covariance.

Least squares goes through a column-pivoted QR decomposition. Designs made
of many shifted copies of one series are nearly collinear by construction,
and forming X'X would square their condition number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from irfkit.errors import ParameterError, SingularityError, WeakInstrumentError
from irfkit.tscore import DesignMatrix

__all__ = ["RegressionFit", "hc0", "newey_west", "ols", "tsls"]

RANK_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class RegressionFit:
    labels: tuple[str, ...]
    coefficients: np.ndarray
    residuals: np.ndarray
    nobs: int
    df_resid: int
    xtx_inverse: np.ndarray
    cov_kind: str
    cov: np.ndarray
    regressors: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)
    first_stage: dict | None = field(default=None, repr=False)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def fitted(self) -> np.ndarray:
        return self.target - self.residuals

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no coefficient {label!r}; have {list(self.labels)}") from None

    def coef(self, label: str) -> float:
        return float(self.coefficients[self.index(label)])

    def stderr(self, label: str) -> float:
        return float(self.se[self.index(label)])

    def with_cov(self, kind: str = "spherical", bandwidth: int | None = None) -> RegressionFit:
        """Return a copy carrying another covariance estimate."""
        if kind == "spherical":
            return replace(self, cov_kind="spherical", cov=_spherical(self))
        if kind == "hc":
            return replace(self, cov_kind="hc", cov=newey_west(self, 0))
        if kind == "newey_west":
            if bandwidth is None:
                raise ParameterError("newey_west covariance needs a bandwidth")
            return replace(self, cov_kind=f"newey_west({bandwidth})", cov=newey_west(self, bandwidth))
        raise ParameterError(f"unknown covariance kind {kind!r}")


def _pivoted_solve(X: np.ndarray, Y: np.ndarray, labels: Sequence[str]):
    """Least-squares coefficients and (X'X)^-1 via pivoted QR; raises on rank loss."""
    n, k = X.shape
    if k == 0:
        return np.zeros((0,) + Y.shape[1:]), np.zeros((0, 0))
    Q, R, perm = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_RTOL * diag[0])) if diag[0] > 0 else 0
    if rank < k:
        dependent = tuple(labels[j] for j in perm[rank:])
        raise SingularityError(
            f"design is rank deficient (rank {rank} of {k}); linearly dependent "
            f"columns: {list(dependent)}",
            dependent=dependent,
        )
    qty = Q.T @ Y
    sol = scipy.linalg.solve_triangular(R, qty)
    coef = np.empty_like(sol)
    coef[perm] = sol
    rinv = scipy.linalg.solve_triangular(R, np.eye(k))
    inv_perm = rinv @ rinv.T
    xtx_inv = np.empty_like(inv_perm)
    xtx_inv[np.ix_(perm, perm)] = inv_perm
    return coef, xtx_inv


def _spherical(fit: RegressionFit) -> np.ndarray:
    s2 = float(fit.residuals @ fit.residuals) / max(fit.df_resid, 1)
    return s2 * fit.xtx_inverse


def _fit_from(X, y, labels, coef, xtx_inv, first_stage=None, residuals=None) -> RegressionFit:
    if residuals is None:
        residuals = y - X @ coef
    n, k = X.shape
    fit = RegressionFit(
        labels=tuple(labels),
        coefficients=coef,
        residuals=residuals,
        nobs=n,
        df_resid=n - k,
        xtx_inverse=xtx_inv,
        cov_kind="spherical",
        cov=np.zeros((k, k)),
        regressors=X,
        target=y,
        first_stage=first_stage,
    )
    return replace(fit, cov=_spherical(fit))


def ols(design: DesignMatrix) -> RegressionFit:
    """Ordinary least squares on every column of ``design``.

    The returned fit carries the spherical covariance; see :func:`newey_west`
    and :meth:`RegressionFit.with_cov` for robust alternatives.
    """
    X = design.X
    y = design.target
    coef, xtx_inv = _pivoted_solve(X, y, design.labels)
    return _fit_from(X, y, design.labels, coef, xtx_inv)


def newey_west(fit: RegressionFit, bandwidth: int) -> np.ndarray:
    """Bartlett-kernel HAC covariance of the coefficients.

    Weights are ``1 - k / (bandwidth + 1)`` for autocovariance lag ``k``;
    ``bandwidth=0`` is the White (HC0) estimator. No small-sample scaling.
    """
    bandwidth = int(bandwidth)
    if bandwidth < 0:
        raise ParameterError("bandwidth must be >= 0")
    if bandwidth >= fit.nobs:
        raise ParameterError(f"bandwidth {bandwidth} must be below nobs {fit.nobs}")
    scores = fit.regressors * fit.residuals[:, None]
    meat = scores.T @ scores
    for lag in range(1, bandwidth + 1):
        w = 1.0 - lag / (bandwidth + 1.0)
        gamma = scores[lag:].T @ scores[:-lag]
        meat += w * (gamma + gamma.T)
    cov = fit.xtx_inverse @ meat @ fit.xtx_inverse
    return 0.5 * (cov + cov.T)


def hc0(fit: RegressionFit) -> np.ndarray:
    return newey_west(fit, 0)


def tsls(
    design: DesignMatrix,
    endogenous: Sequence[str],
    instruments: Sequence[str],
) -> RegressionFit:
    """Two-stage least squares.

    Every design column that is neither endogenous nor an excluded
    instrument is treated as exogenous and enters both stages. An instrument
    may share its label with an endogenous column (the regressor instruments
    itself). Second-stage coefficients follow design column order with the
    excluded instruments removed; residuals use the observed endogenous
    columns.

    ``first_stage`` on the returned fit holds, per endogenous column, the
    first-stage coefficients and the F statistic of the excluded instruments.
    """
    endogenous = list(endogenous)
    instruments = list(instruments)
    labels = design.labels
    for lab in endogenous + instruments:
        if lab not in labels:
            raise KeyError(f"no column {lab!r} in design")
    if len(set(instruments)) < len(set(endogenous)):
        raise ParameterError(
            f"{len(instruments)} instruments cannot identify {len(endogenous)} endogenous columns"
        )
    second_labels = [lab for lab in labels if lab in endogenous or lab not in instruments]
    exog_labels = [lab for lab in second_labels if lab not in endogenous]
    z_labels = exog_labels + [lab for lab in instruments if lab not in exog_labels]

    Z = np.column_stack([design.column(lab) for lab in z_labels])
    G = np.column_stack([design.column(lab) for lab in endogenous])
    try:
        pi, _ = _pivoted_solve(Z, G, z_labels)
    except SingularityError as exc:
        raise WeakInstrumentError(
            f"first stage is rank deficient; invalid or irrelevant instruments "
            f"(dependent: {list(exc.dependent)})"
        ) from exc
    G_hat = Z @ pi

    first_stage = {}
    n = design.nobs
    for j, lab in enumerate(endogenous):
        rss_u = float(np.sum((G[:, j] - G_hat[:, j]) ** 2))
        if exog_labels:
            W = np.column_stack([design.column(e) for e in exog_labels])
            b, _ = _pivoted_solve(W, G[:, j], exog_labels)
            rss_r = float(np.sum((G[:, j] - W @ b) ** 2))
        else:
            rss_r = float(G[:, j] @ G[:, j])
        q = len(z_labels) - len(exog_labels)
        df = n - len(z_labels)
        if rss_u > 0 and df > 0:
            f_stat = ((rss_r - rss_u) / q) / (rss_u / df)
        else:
            f_stat = float("inf")
        first_stage[lab] = {"coefficients": pi[:, j].copy(), "labels": tuple(z_labels), "F": f_stat}

    X_hat = np.column_stack(
        [G_hat[:, endogenous.index(lab)] if lab in endogenous else design.column(lab) for lab in second_labels]
    )
    X = np.column_stack([design.column(lab) for lab in second_labels])
    try:
        coef, xtx_inv = _pivoted_solve(X_hat, design.target, second_labels)
    except SingularityError as exc:
        raise WeakInstrumentError(
            "second stage is rank deficient; instruments carry no variation beyond "
            "the exogenous regressors"
        ) from exc
    residuals = design.target - X @ coef
    return _fit_from(X_hat, design.target, second_labels, coef, xtx_inv, first_stage, residuals)
