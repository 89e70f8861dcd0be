"""Serial-correlation diagnostics: correlograms, portmanteau tests, a panel test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special
from statistics import NormalDist

from irfkit.errors import DegenerateSeriesError, InsufficientSampleError, ParameterError
from irfkit.tscore import Panel, Series

__all__ = [
    "Correlogram",
    "TestResult",
    "acf",
    "box_pierce",
    "chi_squared_sf",
    "ljung_box",
    "panel_serial_test",
]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    dof: int
    p_value: float
    lags_tested: int
    kind: str
    per_lag: tuple[tuple[int, float, float], ...] | None = None

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "lags_tested": self.lags_tested,
            "per_lag": [
                {"lag": k, "statistic": s, "p_value": p} for k, s, p in (self.per_lag or ())
            ],
        }


@dataclass(frozen=True)
class Correlogram:
    acf: np.ndarray
    bartlett_se: np.ndarray
    sample_size: int

    @property
    def lags(self) -> np.ndarray:
        return np.arange(1, self.acf.size + 1)

    def bands(self, level: float = 0.95) -> np.ndarray:
        """Half-width of the pointwise confidence band at each lag."""
        return NormalDist().inv_cdf(0.5 + level / 2) * self.bartlett_se


def _values(x) -> np.ndarray:
    if isinstance(x, Series):
        return x.values
    return np.asarray(x, dtype=np.float64).reshape(-1)


def chi_squared_sf(x: float, k: int) -> float:
    """Upper tail probability of a chi-squared variate with ``k`` degrees of freedom."""
    if k < 1:
        raise ParameterError(f"degrees of freedom must be >= 1, got {k}")
    if x < 0:
        raise ParameterError(f"chi-squared statistic must be >= 0, got {x}")
    return float(special.gammaincc(k / 2.0, x / 2.0))


def acf(x, m: int) -> Correlogram:
    """Sample autocorrelations at lags 1..m with Bartlett standard errors.

    The series is demeaned with its full-sample mean and every lag is
    normalised by the full-sample sum of squares.
    """
    v = _values(x)
    T = v.size
    if not 1 <= m < T:
        raise ParameterError(f"need 1 <= m < T, got m={m}, T={T}")
    d = v - v.mean()
    denom = float(d @ d)
    if denom <= 0.0 or denom <= 1e-28 * T * max(1.0, float(np.max(np.abs(v))) ** 2):
        raise DegenerateSeriesError("series has zero sample variance")
    rho = np.array([d[k:] @ d[:-k] for k in range(1, m + 1)]) / denom
    # Bartlett's MA(k-1) formula: var(rho_k) ~ (1 + 2 sum_{j<k} rho_j^2) / T
    cum = np.concatenate([[0.0], np.cumsum(rho[:-1] ** 2)])
    se = np.sqrt((1.0 + 2.0 * cum) / T)
    return Correlogram(acf=rho, bartlett_se=se, sample_size=T)


def ljung_box(x, m: int, corrected: bool = True) -> TestResult:
    """Portmanteau test of no serial correlation up to lag ``m``.

    ``corrected=True`` gives the Ljung-Box statistic
    ``T (T + 2) sum_k rho_k^2 / (T - k)``; ``False`` gives Box-Pierce
    ``T sum_k rho_k^2``. ``per_lag`` holds the cumulative statistic at each
    lag with its chi-squared(k) p-value.
    """
    corr = acf(x, m)
    T = corr.sample_size
    k = corr.lags
    if corrected:
        terms = T * (T + 2.0) * corr.acf**2 / (T - k)
    else:
        terms = T * corr.acf**2
    cumulative = np.cumsum(terms)
    per_lag = tuple(
        (int(lag), float(q), chi_squared_sf(float(q), int(lag))) for lag, q in zip(k, cumulative)
    )
    stat = float(cumulative[-1])
    return TestResult(
        statistic=stat,
        dof=m,
        p_value=chi_squared_sf(stat, m),
        lags_tested=m,
        kind="ljung_box" if corrected else "box_pierce",
        per_lag=per_lag,
    )


def box_pierce(x, m: int) -> TestResult:
    return ljung_box(x, m, corrected=False)


def _two_way_within(panel: Panel, variable: str):
    """Entity- and period-demeaned values with the two-way projector's inverse Gram.

    Returns stacked residuals, entity codes, period codes and ``P = (D'D)^+``
    where D stacks entity and period dummies. The (s, t) element of the
    within projector for one entity is ``delta_st - d_s' P d_t``.
    """
    labels = sorted(
        {p for e in panel.entities for p in _index(panel.series(e, variable))},
        key=_sort_key,
    )
    period_code = {p: i for i, p in enumerate(labels)}
    N, P_ = len(panel.entities), len(labels)
    values, ent, per = [], [], []
    for i, e in enumerate(panel.entities):
        s = panel.series(e, variable)
        values.append(s.values)
        ent.append(np.full(len(s), i))
        per.append(np.array([period_code[p] for p in _index(s)]))
    y = np.concatenate(values)
    ent = np.concatenate(ent)
    per = np.concatenate(per)

    gram = np.zeros((N + P_, N + P_))
    np.add.at(gram, (ent, ent), 1.0)
    np.add.at(gram, (N + per, N + per), 1.0)
    np.add.at(gram, (ent, N + per), 1.0)
    np.add.at(gram, (N + per, ent), 1.0)
    pinv = np.linalg.pinv(gram, hermitian=True)
    dty = np.concatenate([np.bincount(ent, y, N), np.bincount(per, y, P_)])
    b = pinv @ dty
    resid = y - b[ent] - b[N + per]
    rank = int(np.linalg.matrix_rank(gram, hermitian=True))
    return resid, ent, per, pinv, N, rank


def _index(s: Series) -> tuple[str, ...]:
    return s.period_index or tuple(str(i) for i in range(len(s)))


def _sort_key(label: str):
    try:
        return (0, float(label), "")
    except ValueError:
        return (1, 0.0, label)


def panel_serial_test(p: Panel, variable: str, m: int) -> TestResult:
    """Test for serial correlation of ``variable`` at lags 1..m across a panel.

    The variable is purged of entity and period means. For each lag the
    within-entity cross products are summed over entities, centred at their
    exact expectation under the null (the within transformation itself
    induces negative correlation of order 1/T), and standardised by the
    cross-entity spread of the entity contributions, giving an approximately
    standard normal z. The joint statistic is the sum of squared z values,
    referred to chi-squared(m). Lags are matched by position within each
    entity, so entities are assumed free of internal gaps.
    """
    if len(p.entities) < 2:
        raise InsufficientSampleError("panel serial-correlation test needs at least 2 entities")
    if m < 1:
        raise ParameterError("m must be >= 1")
    for e in p.entities:
        n = len(p.series(e, variable))
        if n < m + 2:
            raise InsufficientSampleError(
                f"entity {e!r} has {n} periods; lag order {m} needs at least {m + 2}"
            )
    resid, ent, per, pinv, N, rank = _two_way_within(p, variable)
    dof_resid = resid.size - rank
    if dof_resid <= 0:
        raise InsufficientSampleError("no residual degrees of freedom after demeaning")
    sigma2 = float(resid @ resid) / dof_resid
    if sigma2 <= 0:
        raise DegenerateSeriesError(f"{variable!r} has no within variation")

    starts = np.flatnonzero(np.r_[True, ent[1:] != ent[:-1]])
    stops = np.r_[starts[1:], ent.size]
    per_lag = []
    zs = []
    for k in range(1, m + 1):
        contrib = np.empty(N)
        expected = np.empty(N)
        for i, (a, b) in enumerate(zip(starts, stops)):
            r = resid[a:b]
            contrib[i] = r[k:] @ r[:-k]
            # off-diagonal projector entries -(d_s' P d_t) for pairs (s, s+k)
            ps, pt = per[a:b - k], per[a + k:b]
            quad = pinv[i, i] + pinv[i, N + pt] + pinv[N + ps, i] + pinv[N + ps, N + pt]
            expected[i] = -sigma2 * float(np.sum(quad))
        centred = contrib - expected
        denom = float(np.sqrt(centred @ centred))
        z = float(centred.sum() / denom) if denom > 0 else 0.0
        zs.append(z)
        per_lag.append((k, z, 2.0 * (1.0 - NormalDist().cdf(abs(z)))))
    stat = float(np.sum(np.square(zs)))
    return TestResult(
        statistic=stat,
        dof=m,
        p_value=chi_squared_sf(stat, m),
        lags_tested=m,
        kind="panel_joint",
        per_lag=tuple(per_lag),
    )
