"""Reduced-form VARs with Cholesky identification, and VAR-X with an exogenous shock.

With the shock ordered first in a VAR its persistence propagates into the
responses, as in a plain local projection. Entering the shock as an
exogenous distributed lag instead holds its future values at zero, as a
distributed-lag regression does.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from irfkit.errors import DecompositionError, InsufficientSampleError, ParameterError, SpecError
from irfkit.irf import IrfResult
from irfkit.regress import _pivoted_solve
from irfkit.tscore import Series, build_design, shift_label

__all__ = ["VarFit", "cholesky_irf", "fit_var", "varx_irf"]


@dataclass(frozen=True, eq=False)
class VarFit:
    """Equation-by-equation OLS fit of ``Y_t = c + sum_j B_j Y_{t-j} + u_t``.

    ``coefs[j-1]`` is ``B_j`` with rows indexing equations and columns
    indexing regressors, both in ``names`` order.
    """

    p: int
    coefs: np.ndarray
    intercept: np.ndarray
    sigma_u: np.ndarray
    names: tuple[str, ...]
    nobs: int
    residuals: np.ndarray
    exog_coefs: np.ndarray | None = None
    exog_name: str | None = None

    @property
    def k(self) -> int:
        return len(self.names)

    def companion(self) -> np.ndarray:
        k, p = self.k, self.p
        top = np.hstack(list(self.coefs))
        if p == 1:
            return top
        lower = np.hstack([np.eye(k * (p - 1)), np.zeros((k * (p - 1), k))])
        return np.vstack([top, lower])

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))

    def ma_coefficients(self, H: int) -> np.ndarray:
        """Reduced-form moving-average matrices ``Phi_0 .. Phi_H``."""
        k = self.k
        phi = np.zeros((H + 1, k, k))
        phi[0] = np.eye(k)
        for h in range(1, H + 1):
            for j in range(1, min(h, self.p) + 1):
                phi[h] += self.coefs[j - 1] @ phi[h - j]
        return phi


def _as_mapping(data) -> dict[str, Series]:
    if isinstance(data, Mapping):
        items = dict(data)
    else:
        items = {s.name: s for s in data}
    if not items:
        raise SpecError("a VAR needs at least one series")
    lengths = {len(s) for s in items.values()}
    if len(lengths) != 1:
        raise SpecError(f"VAR series differ in length: {sorted(lengths)}")
    return items


def _fit(data: Mapping[str, Series], p: int, exog: Series | None = None, q: int = 0) -> VarFit:
    if p < 0 or (p < 1 and exog is None):
        raise ParameterError("lag order p must be >= 1")
    names = tuple(data)
    k = len(names)
    T = len(next(iter(data.values())))
    n_exog = 0 if exog is None else q + 1
    if T <= k * p + n_exog + 10:
        raise InsufficientSampleError(
            f"sample length {T} too short for {k} variables at lag order {p}; "
            f"needs more than {k * p + n_exog + 10}"
        )
    regressors = [(data[n], [-l for l in range(1, p + 1)]) for n in names]
    if exog is not None:
        if exog.name in names:
            raise SpecError(f"exogenous series {exog.name!r} is also endogenous")
        regressors.append((exog, [-l for l in range(q + 1)]))
    design = build_design(data[names[0]], 0, [r for r in regressors if len(r[1])], include_intercept=True)
    rows = design.rows
    Y = np.column_stack([data[n].values[rows] for n in names])
    coef, _ = _pivoted_solve(design.X, Y, design.labels)
    resid = Y - design.X @ coef
    n = design.nobs
    dof = n - design.X.shape[1]
    sigma = resid.T @ resid / dof
    idx = design.labels.index
    B = np.zeros((p, k, k))
    for j in range(1, p + 1):
        for c, name in enumerate(names):
            B[j - 1][:, c] = coef[idx(shift_label(name, -j))]
    C = None
    if exog is not None:
        C = np.array([coef[idx(shift_label(exog.name, -l))] for l in range(q + 1)])
    return VarFit(
        p=p,
        coefs=B,
        intercept=coef[idx("const")].copy(),
        sigma_u=0.5 * (sigma + sigma.T),
        names=names,
        nobs=n,
        residuals=resid,
        exog_coefs=C,
        exog_name=None if exog is None else exog.name,
    )


def fit_var(data, p: int) -> VarFit:
    """Fit a VAR(p) with intercept by OLS, one equation per series.

    ``data`` is a mapping of name to :class:`Series` (or a sequence of
    series); its order is the variable ordering. The residual covariance is
    divided by ``nobs - (k p + 1)``.
    """
    return _fit(_as_mapping(data), p)


def _result(estimator, values, nobs, warnings, diagnostics=None) -> IrfResult:
    H = values.size - 1
    return IrfResult(
        estimator=estimator,
        horizons=np.arange(H + 1),
        point=values,
        se=np.full(H + 1, np.nan),
        nobs=np.full(H + 1, nobs),
        warnings=tuple(warnings),
        diagnostics=diagnostics or {},
    )


def cholesky_irf(fit: VarFit, H: int, impulse: str, ordering: Sequence[str] | None = None) -> dict[str, IrfResult]:
    """Orthogonalised responses of every variable to a unit impulse in ``impulse``.

    The structural impact matrix is the lower Cholesky factor of the residual
    covariance with variables arranged in ``ordering`` (default: fit order).
    The impulse column is rescaled to unit impact on the shocked variable.
    Standard errors are not computed (NaN).
    """
    if H < 0:
        raise ParameterError("H must be >= 0")
    ordering = tuple(ordering) if ordering is not None else fit.names
    if sorted(ordering) != sorted(fit.names):
        raise SpecError(f"ordering {list(ordering)} must permute {list(fit.names)}")
    if impulse not in fit.names:
        raise SpecError(f"unknown impulse variable {impulse!r}")
    perm = [fit.names.index(n) for n in ordering]
    sigma = fit.sigma_u[np.ix_(perm, perm)]
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError("residual covariance is not positive definite") from exc
    impact = np.zeros_like(chol)
    impact[np.ix_(perm, perm)] = chol
    j = fit.names.index(impulse)
    col = impact[:, j] / impact[j, j]
    warnings = []
    radius = fit.spectral_radius
    if radius >= 1:
        warnings.append(f"VAR is not stable (spectral radius {radius:.4f} >= 1); responses do not die out")
    phi = fit.ma_coefficients(H)
    responses = phi @ col
    diag = {
        "spectral_radius": radius,
        "ordering": list(ordering),
        "impulse": impulse,
        "cholesky_factor": chol.tolist(),
    }
    return {
        name: _result("var_endog", responses[:, i].copy(), fit.nobs, warnings, diag)
        for i, name in enumerate(fit.names)
    }


def varx_irf(y, x: Series, p: int, q: int, H: int) -> dict[str, IrfResult]:
    """Responses of the endogenous block to a unit value of exogenous ``x``.

    Fits ``Y_t = c + sum_{j<=p} A_j Y_{t-j} + sum_{l<=q} C_l x_{t-l} + u_t`` and
    propagates ``Psi_h = sum_j A_j Psi_{h-j} + C_h`` with ``C_h = 0`` beyond
    ``q``: future values of ``x`` are held at zero. ``q < H`` is allowed but
    flagged, since a truncated lag polynomial is inconsistent unless the
    true one is that short.
    """
    if q < 0 or H < 0:
        raise ParameterError("q and H must be >= 0")
    data = _as_mapping(y)
    fit = _fit(data, p, exog=x, q=q)
    warnings = []
    if q < H:
        warnings.append(f"q={q} < H={H}: exogenous lag polynomial truncated before the last horizon")
    k = fit.k
    psi = np.zeros((H + 1, k))
    for h in range(H + 1):
        if h <= q:
            psi[h] = fit.exog_coefs[h]
        for j in range(1, min(h, p) + 1):
            psi[h] += fit.coefs[j - 1] @ psi[h - j]
    diag = {"p": p, "q": q, "spectral_radius": fit.spectral_radius if p else 0.0}
    return {
        name: _result("var_x", psi[:, i].copy(), fit.nobs, warnings, diag)
        for i, name in enumerate(fit.names)
    }
