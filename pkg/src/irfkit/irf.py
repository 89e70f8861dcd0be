"""Impulse-response estimators for an externally identified shock.

Two families, which agree only when the shock is serially uncorrelated:

* local projections (``lp``, ``lp_residual_adjusted``, ``lp_iv``,
  ``nonlinear_lp``) return the response *including* the shock's own
  persistence;
* distributed-lag regressions (``dlm``) return the response holding future
  shock values fixed.

``lp_leads`` / ``lp_iv_leads`` move local projections to the second object by
controlling for future shock values; ``dlm_innovation`` moves the
distributed-lag model to the first by regressing on the shock's AR
innovations.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import NormalDist
from typing import Callable, Mapping, Sequence

import numpy as np

from irfkit.errors import (
    DegenerateSeriesError,
    InsufficientSampleError,
    ParameterError,
    SingularityError,
    SpecError,
)
from irfkit.regress import RegressionFit, newey_west, ols, tsls
from irfkit.tscore import DesignMatrix, Series, build_design, shift_label, trim_common_sample

__all__ = [
    "ESTIMATORS",
    "IrfResult",
    "IrfSpec",
    "LeadsRule",
    "compare",
    "cumulative_multiplier",
    "dlm",
    "dlm_innovation",
    "estimate",
    "estimate_innovations",
    "lp",
    "lp_iv",
    "lp_leads",
    "lp_residual_adjusted",
    "nonlinear_lp",
]

ESTIMATORS = (
    "lp",
    "lp_leads",
    "dlm",
    "dlm_innovation",
    "lp_residual_adjusted",
    "lp_iv",
    "lp_iv_leads",
    "nonlinear_lp",
)
_LEAD_USERS = {"lp_leads", "lp_iv_leads", "nonlinear_lp"}

RESIDUAL_ADJUSTED_WARNING = (
    "residual-adjusted LP: replacing the shock by its AR innovations does not remove "
    "the persistence effect; the estimate is the persistence-inclusive response "
    "(impact b0, then b0*(gamma+rho) at h=1 in the AR(1) outcome case), not the "
    "fixed-future-shock response"
)


@dataclass(frozen=True)
class LeadsRule:
    """Number of shock leads used at horizon ``h``.

    ``conservative_h`` uses ``h`` leads, ``fixed`` a constant count and
    ``capped`` uses ``min(h, value)``.
    """

    kind: str = "conservative_h"
    value: int = 0

    def __post_init__(self):
        if self.kind not in ("conservative_h", "fixed", "capped"):
            raise SpecError(f"unknown leads rule {self.kind!r}")
        if self.value < 0:
            raise SpecError("lead count must be >= 0")

    def count(self, h: int) -> int:
        if self.kind == "conservative_h":
            return h
        if self.kind == "fixed":
            return self.value
        return min(h, self.value)

    @classmethod
    def parse(cls, text: str) -> LeadsRule:
        """Parse ``"h"``/``"conservative"``, ``"fixed:L"`` or ``"capped:L"``."""
        text = text.strip().lower()
        if text in ("h", "conservative", "conservative_h"):
            return cls()
        kind, _, value = text.partition(":")
        if kind in ("fixed", "capped") and value.isdigit():
            return cls(kind, int(value))
        if text.isdigit():
            return cls("fixed", int(text))
        raise SpecError(f"cannot parse leads rule {text!r}")

    def __str__(self) -> str:
        return "conservative_h" if self.kind == "conservative_h" else f"{self.kind}:{self.value}"


def _normalize_controls(controls) -> tuple[tuple[Series, tuple[int, ...]], ...]:
    out = []
    for item in controls:
        series, lags = item
        if isinstance(lags, (int, np.integer)):
            if lags < 0:
                raise SpecError(f"lag count for {series.name!r} must be >= 0")
            lag_list = tuple(range(1, int(lags) + 1))
        else:
            lag_list = tuple(int(l) for l in lags)
            if any(l < 0 for l in lag_list):
                raise SpecError(f"control lags for {series.name!r} must be >= 0")
        if lag_list:
            out.append((series, lag_list))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class IrfSpec:
    """Options shared by every estimator.

    ``controls`` pairs a series with either a lag count ``P`` (lags 1..P) or
    an explicit list of lags (0 = contemporaneous). ``nw_bandwidth=None``
    uses the projection horizon ``h`` (``H`` for the single-regression
    distributed-lag estimators). ``dlm_lags`` sets how many shock lags the
    distributed-lag regressions estimate (default ``H``); with a persistent
    shock the last estimated lag absorbs the omitted tail, so estimate at
    least one lag beyond the last horizon you report.
    """

    estimator: str
    H: int
    controls: Sequence = ()
    leads_rule: LeadsRule | None = None
    shock_ar_order: int = 1
    nw_bandwidth: int | None = None
    state: Series | None = None
    instrument: Series | None = None
    ci_level: float = 0.95
    include_intercept: bool = True
    dlm_lags: int | None = None
    pad_tail_leads: bool = False
    state_timing: str = "lagged"
    weak_iv_floor: float = 10.0

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise SpecError(f"unknown estimator {self.estimator!r}; expected one of {ESTIMATORS}")
        if self.H < 0:
            raise SpecError("H must be >= 0")
        if self.leads_rule is not None and self.estimator not in _LEAD_USERS:
            raise SpecError(f"estimator {self.estimator!r} does not use leads")
        if self.leads_rule is None and self.estimator in ("lp_leads", "lp_iv_leads"):
            object.__setattr__(self, "leads_rule", LeadsRule())
        if not 1 <= self.shock_ar_order <= 4:
            raise SpecError("shock_ar_order must be between 1 and 4")
        if not 0 < self.ci_level < 1:
            raise SpecError("ci_level must lie in (0, 1)")
        if self.state_timing not in ("lagged", "current"):
            raise SpecError("state_timing must be 'lagged' or 'current'")
        if self.dlm_lags is not None and self.dlm_lags < self.H:
            raise SpecError("dlm_lags must be >= H")
        object.__setattr__(self, "controls", _normalize_controls(self.controls))

    def with_estimator(self, estimator: str, **changes) -> IrfSpec:
        leads = changes.pop("leads_rule", self.leads_rule if estimator in _LEAD_USERS else None)
        return replace(self, estimator=estimator, leads_rule=leads, **changes)

    def bandwidth(self, h: int) -> int:
        return h if self.nw_bandwidth is None else self.nw_bandwidth


def _z(level: float) -> float:
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def _clean(v: float):
    return None if v is None or not math.isfinite(v) else float(v)


@dataclass(frozen=True, eq=False)
class IrfResult:
    estimator: str
    horizons: np.ndarray
    point: np.ndarray
    se: np.ndarray
    nobs: np.ndarray
    ci_level: float = 0.95
    warnings: tuple[str, ...] = ()
    paths: Mapping[str, IrfResult] = field(default_factory=dict)
    diagnostics: Mapping = field(default_factory=dict)

    @property
    def H(self) -> int:
        return int(self.horizons[-1]) if self.horizons.size else -1

    def ci(self, level: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        z = _z(self.ci_level if level is None else level)
        return self.point - z * self.se, self.point + z * self.se

    @property
    def ci_lo(self) -> np.ndarray:
        return self.ci()[0]

    @property
    def ci_hi(self) -> np.ndarray:
        return self.ci()[1]

    def to_dict(self) -> dict:
        lo, hi = self.ci()
        out = {
            "estimator": self.estimator,
            "horizons": [int(h) for h in self.horizons],
            "point": [_clean(v) for v in self.point],
            "se": [_clean(v) for v in self.se],
            "ci_lo": [_clean(v) for v in lo],
            "ci_hi": [_clean(v) for v in hi],
            "ci_level": self.ci_level,
            "nobs": [int(n) for n in self.nobs],
            "warnings": list(self.warnings),
        }
        if self.paths:
            out["paths"] = {k: v.to_dict() for k, v in self.paths.items()}
        if self.diagnostics:
            out["diagnostics"] = _jsonable(self.diagnostics)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_dict(cls, payload: Mapping) -> IrfResult:
        def arr(key):
            return np.array([np.nan if v is None else v for v in payload[key]], dtype=float)

        return cls(
            estimator=payload["estimator"],
            horizons=np.array(payload["horizons"], dtype=int),
            point=arr("point"),
            se=arr("se"),
            nobs=np.array(payload.get("nobs", [0] * len(payload["point"])), dtype=int),
            ci_level=float(payload.get("ci_level", 0.95)),
            warnings=tuple(payload.get("warnings", ())),
            paths={k: cls.from_dict(v) for k, v in payload.get("paths", {}).items()},
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["path", "h", "point", "se", "ci_lo", "ci_hi", "nobs"])
        items = self.paths.items() if self.paths else [("main", self)]
        for name, res in items:
            lo, hi = res.ci()
            for i, h in enumerate(res.horizons):
                writer.writerow(
                    [name, int(h), *(repr(float(v)) for v in (res.point[i], res.se[i], lo[i], hi[i])), int(res.nobs[i])]
                )
        return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    try:
        return max(1, int(os.environ.get("IRFKIT_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn: Callable, items: Sequence, threads: int | None):
    """Ordered map; exceptions are returned in place of results."""

    def safe(item):
        try:
            return fn(item)
        except (InsufficientSampleError, SingularityError) as exc:
            return exc

    n = resolve_threads(threads)
    if n <= 1 or len(items) <= 1:
        return [safe(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(safe, items))


@dataclass(frozen=True)
class _Step:
    point: float
    se: float
    nobs: int
    warnings: tuple[str, ...] = ()


def _fit_step(design: DesignMatrix, label: str, bandwidth: int, fitter=ols, **kw) -> tuple[_Step, RegressionFit]:
    fit = fitter(design, **kw)
    bw = min(bandwidth, fit.nobs - 1)
    cov = newey_west(fit, bw)
    j = fit.index(label)
    return _Step(float(fit.coefficients[j]), float(np.sqrt(max(cov[j, j], 0.0))), fit.nobs), fit


def _assemble(estimator: str, spec: IrfSpec, steps: list, warnings: list[str], diagnostics=None) -> IrfResult:
    """Stack per-horizon results, truncating at the first failed horizon."""
    good = []
    for h, step in enumerate(steps):
        if isinstance(step, Exception):
            if not good:
                raise step
            warnings.append(f"horizon truncated at H={h - 1}: {step}")
            break
        good.append(step)
        warnings.extend(step.warnings)
    return IrfResult(
        estimator=estimator,
        horizons=np.arange(len(good)),
        point=np.array([s.point for s in good]),
        se=np.array([s.se for s in good]),
        nobs=np.array([s.nobs for s in good], dtype=int),
        ci_level=spec.ci_level,
        warnings=tuple(warnings),
        diagnostics=diagnostics or {},
    )


def _require(spec: IrfSpec, allowed: Sequence[str]):
    if spec.estimator not in allowed:
        raise SpecError(f"spec.estimator is {spec.estimator!r}; this function runs {list(allowed)}")


def _check_names(*series: Series):
    names = [s.name for s in series if s is not None]
    if len(set(names)) != len(names):
        raise SpecError(f"input series need distinct names, got {names}")


def _lp_design(y: Series, shock: Series, spec: IrfSpec, h: int, n_leads: int, lead_source: Series | None = None):
    regressors = [(shock, 0)]
    regressors += [(s, [-l for l in lags]) for s, lags in spec.controls]
    if n_leads:
        regressors.append((lead_source or shock, list(range(1, n_leads + 1))))
    return build_design(y, h, regressors, spec.include_intercept, spec.pad_tail_leads)


def _lead_count(spec: IrfSpec, h: int) -> int:
    return spec.leads_rule.count(h) if spec.leads_rule is not None else 0


def lp(y: Series, shock: Series, spec: IrfSpec, threads: int | None = None) -> IrfResult:
    """Local projection: for each h, regress ``y[t+h]`` on ``shock[t]`` and controls."""
    _require(spec, ["lp"])
    return _lp_run(y, shock, spec, threads)


def lp_leads(y: Series, shock: Series, spec: IrfSpec, threads: int | None = None) -> IrfResult:
    """Local projection that also controls for future shock values.

    At horizon ``h`` the leads ``shock[t+1] .. shock[t+L(h)]`` enter as
    controls, with ``L(h)`` from ``spec.leads_rule``.
    """
    _require(spec, ["lp_leads"])
    return _lp_run(y, shock, spec, threads)


def _lp_run(y, shock, spec, threads):
    _check_names(y, shock, *(s for s, _ in spec.controls if s is not y and s is not shock))
    label = shift_label(shock.name, 0)

    def step(h):
        design = _lp_design(y, shock, spec, h, _lead_count(spec, h))
        return _fit_step(design, label, spec.bandwidth(h))[0]

    return _assemble(spec.estimator, spec, _map(step, range(spec.H + 1), threads), [])


def compare(
    y: Series,
    shock: Series,
    specs: Sequence[IrfSpec],
    comparable: bool | None = None,
    threads: int | None = None,
) -> list[IrfResult]:
    """Run several local-projection specs on identical per-horizon samples.

    With ``comparable`` (the default whenever a spec uses leads) every
    horizon's designs are trimmed to their common rows, so estimates with and
    without leads differ only through the regressors.
    """
    for spec in specs:
        _require(spec, ["lp", "lp_leads"])
    if comparable is None:
        comparable = any(s.estimator == "lp_leads" for s in specs)
    label = shift_label(shock.name, 0)
    H = min(s.H for s in specs)

    def step(h):
        designs = [_lp_design(y, shock, s, h, _lead_count(s, h)) for s in specs]
        if comparable:
            designs = trim_common_sample(designs)
        return [_fit_step(d, label, s.bandwidth(h))[0] for d, s in zip(designs, specs)]

    rows = _map(step, range(H + 1), threads)
    results = []
    for j, spec in enumerate(specs):
        steps = [r if isinstance(r, Exception) else r[j] for r in rows]
        results.append(_assemble(spec.estimator, spec, steps, []))
    return results


def dlm(y: Series, shock: Series, spec: IrfSpec) -> IrfResult:
    """Distributed-lag model: one regression of ``y[t]`` on ``shock[t] .. shock[t-Q]``.

    ``point[h]`` is the coefficient on ``shock[t-h]``.
    """
    _require(spec, ["dlm"])
    _check_names(y, shock)
    return _dlm_core(y, shock, spec, "dlm")


def _dlm_core(y: Series, shock: Series, spec: IrfSpec, estimator: str, diagnostics=None) -> IrfResult:
    Q = spec.H if spec.dlm_lags is None else spec.dlm_lags
    regressors = [(shock, [-l for l in range(Q + 1)])]
    regressors += [(s, [-l for l in lags]) for s, lags in spec.controls]
    design = build_design(y, 0, regressors, spec.include_intercept)
    fit = ols(design)
    bw = min(spec.nw_bandwidth if spec.nw_bandwidth is not None else spec.H, fit.nobs - 1)
    cov = newey_west(fit, bw)
    idx = [fit.index(shift_label(shock.name, -h)) for h in range(spec.H + 1)]
    warnings = []
    if spec.dlm_lags is None and spec.H > 0:
        warnings.append(
            "dlm estimated with exactly H shock lags; with a persistent shock the "
            "horizon-H coefficient absorbs the omitted lag tail (set dlm_lags > H)"
        )
    diagnostics = dict(diagnostics or {})
    diagnostics["full_coefficients"] = [float(fit.coefficients[fit.index(shift_label(shock.name, -l))]) for l in range(Q + 1)]
    return IrfResult(
        estimator=estimator,
        horizons=np.arange(spec.H + 1),
        point=fit.coefficients[idx].copy(),
        se=np.sqrt(np.clip(np.diag(cov)[idx], 0.0, None)),
        nobs=np.full(spec.H + 1, fit.nobs),
        ci_level=spec.ci_level,
        warnings=tuple(warnings),
        diagnostics=diagnostics,
    )


def estimate_innovations(shock: Series, ar_order: int = 1, include_intercept: bool = True):
    """Fit an AR(p) to the shock by OLS and return ``(innovations, ar_coefficients)``.

    Innovations are the regression residuals; the first ``p`` periods are
    dropped, so the returned series is dated ``p .. T-1``.
    """
    T = len(shock)
    if ar_order < 1 or ar_order >= T / 10:
        raise ParameterError(f"AR order must satisfy 1 <= p < T/10, got p={ar_order}, T={T}")
    v = shock.values
    if np.ptp(v) == 0.0:
        raise DegenerateSeriesError(f"shock {shock.name!r} is constant")
    design = build_design(shock, 0, [(shock, [-l for l in range(1, ar_order + 1)])], include_intercept)
    try:
        fit = ols(design)
    except SingularityError as exc:
        raise DegenerateSeriesError(f"AR fit of {shock.name!r} is degenerate: {exc}") from exc
    coefs = np.array([fit.coef(shift_label(shock.name, -l)) for l in range(1, ar_order + 1)])
    index = None if shock.period_index is None else shock.period_index[ar_order:]
    innovations = Series(f"{shock.name}_innov", fit.residuals, index)
    return innovations, coefs


def _drop_head(series: Series, p: int) -> Series:
    return series.slice(p, None)


def dlm_innovation(y: Series, shock: Series, spec: IrfSpec) -> IrfResult:
    """Distributed-lag regression of ``y`` on the shock's estimated AR innovations.

    Diagnostics carry the AR coefficients and the implied plain-DLM path
    ``theta_h = tilde_theta_h - sum_j gamma_j tilde_theta_{h-j}``.
    """
    _require(spec, ["dlm_innovation"])
    _check_names(y, shock)
    p = spec.shock_ar_order
    innov, coefs = estimate_innovations(shock, p)
    y_t = _drop_head(y, p)
    controls = tuple((_drop_head(s, p), lags) for s, lags in spec.controls)
    inner = replace(spec, controls=controls)
    res = _dlm_core(y_t, innov, inner, "dlm_innovation", {"ar_coefficients": coefs.tolist()})
    full = np.array(res.diagnostics["full_coefficients"])
    implied = np.array(
        [full[h] - sum(coefs[j - 1] * full[h - j] for j in range(1, p + 1) if h - j >= 0) for h in range(spec.H + 1)]
    )
    diagnostics = dict(res.diagnostics)
    diagnostics["implied_dlm"] = implied.tolist()
    return replace(res, diagnostics=diagnostics)


def lp_residual_adjusted(
    y: Series, shock: Series, spec: IrfSpec, innovation_lags: int = 0, threads: int | None = None
) -> IrfResult:
    """Local projection on the shock's AR innovations instead of the shock.

    Kept to demonstrate that it fails: the estimate still contains the
    persistence effect. The result always carries a warning saying so.
    ``innovation_lags`` adds lagged innovations as controls.
    """
    _require(spec, ["lp_residual_adjusted"])
    _check_names(y, shock)
    p = spec.shock_ar_order
    innov, coefs = estimate_innovations(shock, p)
    y_t = _drop_head(y, p)
    controls = tuple((_drop_head(s, p), lags) for s, lags in spec.controls)
    if innovation_lags:
        controls += ((innov, tuple(range(1, innovation_lags + 1))),)
    inner = replace(spec, controls=controls)
    label = shift_label(innov.name, 0)

    def step(h):
        design = _lp_design(y_t, innov, inner, h, 0)
        return _fit_step(design, label, spec.bandwidth(h))[0]

    res = _assemble(spec.estimator, spec, _map(step, range(spec.H + 1), threads), [RESIDUAL_ADJUSTED_WARNING])
    return replace(res, diagnostics={"ar_coefficients": coefs.tolist()})


def lp_iv(
    y: Series,
    endogenous: Series,
    instrument: Series | None,
    spec: IrfSpec,
    lead_source: Series | None = None,
    threads: int | None = None,
) -> IrfResult:
    """Per-horizon 2SLS of ``y[t+h]`` on ``endogenous[t]`` instrumented by ``instrument[t]``.

    ``lp_iv_leads`` adds leads of ``lead_source`` (default: the instrument)
    as exogenous controls in both stages. A first-stage F below
    ``spec.weak_iv_floor`` is recorded as a warning.
    """
    _require(spec, ["lp_iv", "lp_iv_leads"])
    instrument = instrument if instrument is not None else spec.instrument
    if instrument is None:
        raise SpecError("lp_iv needs an instrument series")
    _check_names(y, endogenous, instrument)
    if lead_source is not None and lead_source.name not in (instrument.name,):
        _check_names(y, endogenous, instrument, lead_source)
    endo_label = shift_label(endogenous.name, 0)
    inst_label = shift_label(instrument.name, 0)
    source = lead_source or instrument

    def step(h):
        n_leads = _lead_count(spec, h) if spec.estimator == "lp_iv_leads" else 0
        regressors = [(endogenous, 0), (instrument, 0)]
        regressors += [(s, [-l for l in lags]) for s, lags in spec.controls]
        if n_leads:
            regressors.append((source, list(range(1, n_leads + 1))))
        design = build_design(y, h, regressors, spec.include_intercept, spec.pad_tail_leads)
        st, fit = _fit_step(design, endo_label, spec.bandwidth(h), tsls, endogenous=[endo_label], instruments=[inst_label])
        f_stat = fit.first_stage[endo_label]["F"]
        if f_stat < spec.weak_iv_floor:
            st = replace(st, warnings=(f"h={h}: weak instrument, first-stage F={f_stat:.3f} < {spec.weak_iv_floor}",))
        return st

    warnings = []
    if lead_source is not None:
        warnings.append(f"leads taken from {lead_source.name!r}")
    return _assemble(spec.estimator, spec, _map(step, range(spec.H + 1), threads), warnings)


def nonlinear_lp(
    y: Series,
    shock: Series,
    state: Series | None,
    spec: IrfSpec,
    regimes: Sequence[str] = ("A", "B"),
    state_leads: bool = False,
    threads: int | None = None,
) -> IrfResult:
    """State-dependent local projection with a binary state.

    Every regressor, the intercept included, is interacted with ``S`` and
    ``1 - S``, where ``S`` is the state dated ``t-1`` (or ``t`` with
    ``spec.state_timing="current"``). Regime ``A`` is ``S = 1`` and ``B`` is
    ``S = 0``. With ``state_leads`` the state's future values over the
    response horizon enter as further (interacted) controls, and the paths are
    labelled ``"<regime>:fixed-state"``.
    """
    _require(spec, ["nonlinear_lp"])
    state = state if state is not None else spec.state
    if state is None:
        raise SpecError("nonlinear_lp needs a state series")
    if not np.all(np.isin(state.values, (0.0, 1.0))):
        raise SpecError(f"state {state.name!r} must be binary (0/1)")
    regimes = tuple(regimes)
    if not regimes or set(regimes) - {"A", "B"}:
        raise SpecError("regimes must be a non-empty subset of ('A', 'B')")
    _check_names(y, shock, state)
    base_shift = -1 if spec.state_timing == "lagged" else 0
    state_label = shift_label(state.name, base_shift)
    shock_label = shift_label(shock.name, 0)

    def step(h):
        n_leads = _lead_count(spec, h)
        regressors = [(shock, 0)]
        regressors += [(s, [-l for l in lags]) for s, lags in spec.controls]
        if n_leads:
            regressors.append((shock, list(range(1, n_leads + 1))))
        n_state_leads = (n_leads if spec.leads_rule is not None else h) if state_leads else 0
        if n_state_leads:
            regressors.append((state, [base_shift + j for j in range(1, n_state_leads + 1)]))
        regressors.append((state, base_shift))
        design = build_design(y, h, regressors, spec.include_intercept, spec.pad_tail_leads)
        s = design.column(state_label)
        base = [(lab, v) for lab, v in design.columns if lab != state_label]
        k = len(base)
        cols = []
        for regime, weight in (("A", s), ("B", 1.0 - s)):
            n_regime = int(weight.sum())
            if n_regime < k + 1:
                if regime in regimes:
                    raise InsufficientSampleError(
                        f"regime {regime} has {n_regime} observations at h={h}; "
                        f"needs at least {k + 1}"
                    )
                continue
            cols += [(f"{regime}:{lab}", weight * v) for lab, v in base]
        st_design = design.with_columns(cols)
        fit = ols(st_design)
        cov = newey_west(fit, min(spec.bandwidth(h), fit.nobs - 1))
        out = {}
        for regime in regimes:
            j = fit.index(f"{regime}:{shock_label}")
            out[regime] = _Step(float(fit.coefficients[j]), float(np.sqrt(max(cov[j, j], 0.0))), int((s == (1.0 if regime == "A" else 0.0)).sum()))
        return out

    rows = _map(step, range(spec.H + 1), threads)
    suffix = ":fixed-state" if state_leads else ""
    paths = {}
    for regime in regimes:
        steps = [r if isinstance(r, Exception) else r[regime] for r in rows]
        paths[regime + suffix] = _assemble("nonlinear_lp", spec, steps, [])
    first = paths[regimes[0] + suffix]
    return replace(first, paths=paths, diagnostics={"state_timing": spec.state_timing})


def cumulative_multiplier(num, den, tol: float = 1e-8) -> np.ndarray:
    """Ratio of cumulative responses, ``sum_{i<=h} num[i] / sum_{i<=h} den[i]``.

    Horizons where the denominator's partial sum is below ``tol`` times the
    largest absolute denominator response are returned as NaN (undefined).
    """
    a = np.asarray(getattr(num, "point", num), dtype=float)
    b = np.asarray(getattr(den, "point", den), dtype=float)
    if a.shape != b.shape:
        raise ParameterError(f"responses differ in length: {a.size} vs {b.size}")
    cum_a = np.cumsum(a)
    cum_b = np.cumsum(b)
    scale = max(float(np.max(np.abs(b))) if b.size else 0.0, np.finfo(float).tiny)
    undefined = np.abs(cum_b) < tol * scale
    out = np.full(a.shape, np.nan)
    np.divide(cum_a, cum_b, out=out, where=~undefined)
    return out


def estimate(
    spec: IrfSpec,
    y: Series,
    shock: Series,
    *,
    instrument: Series | None = None,
    lead_source: Series | None = None,
    state: Series | None = None,
    threads: int | None = None,
) -> IrfResult:
    """Dispatch on ``spec.estimator``. For IV estimators ``shock`` is the endogenous regressor."""
    e = spec.estimator
    if e == "lp":
        return lp(y, shock, spec, threads)
    if e == "lp_leads":
        return lp_leads(y, shock, spec, threads)
    if e == "dlm":
        return dlm(y, shock, spec)
    if e == "dlm_innovation":
        return dlm_innovation(y, shock, spec)
    if e == "lp_residual_adjusted":
        return lp_residual_adjusted(y, shock, spec, threads=threads)
    if e in ("lp_iv", "lp_iv_leads"):
        return lp_iv(y, shock, instrument, spec, lead_source, threads)
    return nonlinear_lp(y, shock, state, spec, threads=threads)
