"""Seeded simulators for the linear shock-propagation DGPs and their exact IRFs.

Kinds
-----
simple
    ``y_t = delta x_t + sigma_u u_t``, ``x_t = gamma x_{t-1} + sigma_eps eps_t``.
extended
    ``y_t = rho y_{t-1} + b0 x_t + b1 x_{t-1} + sigma_u u_t`` with the same AR(1) ``x``.
iv
    ``y = beta g + u``, ``u = m + a``, ``g = lam x + (1 - lam) m``,
    ``z = x + nu``, AR(1) ``x``; every innovation standard normal.
external_shock
    The extended outcome equation driven by a user-supplied shock series.

Random numbers come from numpy's PCG64 bit generator seeded through
``SeedSequence(seed, spawn_key=(replicate,))``. Draw order is fixed per kind,
so a spec reproduces bit-for-bit on any machine with the same numpy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.signal import lfilter

from irfkit.errors import SpecError
from irfkit.tscore import Series, write_csv

__all__ = [
    "BURN_IN",
    "RNG_ALGORITHM",
    "DgpSpec",
    "SimulatedData",
    "closed_form_irf",
    "make_rng",
    "simulate",
]

BURN_IN = 1000
RNG_ALGORITHM = "numpy.random.PCG64 seeded via SeedSequence(seed, spawn_key=(replicate,))"

_DEFAULTS = {
    "simple": {"delta": 1.5, "gamma": 0.2, "sigma_u": 1.0, "sigma_eps": 1.0},
    "extended": {"rho": 0.9, "b0": 1.5, "b1": 1.0, "gamma": 0.2, "sigma_u": 1.0, "sigma_eps": 1.0},
    "iv": {"beta": 2.0, "lam": 0.5, "gamma": 0.2},
    "external_shock": {"rho": 0.9, "b0": 1.5, "b1": 1.0, "sigma_u": 1.0},
}


def make_rng(seed: int, replicate: int | None = None) -> np.random.Generator:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    key = () if replicate is None else (int(replicate),)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True, eq=False)
class DgpSpec:
    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    T: int = 1_000_000
    seed: int = 0
    shock: Series | None = None

    def __post_init__(self):
        if self.kind not in _DEFAULTS:
            raise SpecError(f"unknown DGP kind {self.kind!r}; expected one of {sorted(_DEFAULTS)}")
        unknown = set(self.params) - set(_DEFAULTS[self.kind])
        if unknown:
            raise SpecError(f"unknown parameters for {self.kind!r}: {sorted(unknown)}")
        params = {**_DEFAULTS[self.kind], **{k: float(v) for k, v in self.params.items()}}
        object.__setattr__(self, "params", params)
        if self.kind == "external_shock":
            if self.shock is None:
                raise SpecError("external_shock DGP needs a shock series")
            object.__setattr__(self, "T", len(self.shock))
        for name in ("rho", "gamma"):
            if name in params and not abs(params[name]) < 1:
                raise SpecError(f"{name}={params[name]} is non-stationary; need |{name}| < 1")
        for name, value in params.items():
            if name.startswith("sigma") and not value > 0:
                raise SpecError(f"{name} must be positive, got {value}")
        if self.T < 10:
            raise SpecError(f"T must be >= 10, got {self.T}")

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    @classmethod
    def simple(cls, T: int = 1_000_000, seed: int = 0, **params) -> DgpSpec:
        return cls("simple", params, T, seed)

    @classmethod
    def extended(cls, T: int = 1_000_000, seed: int = 0, **params) -> DgpSpec:
        return cls("extended", params, T, seed)

    @classmethod
    def iv(cls, T: int = 1_000_000, seed: int = 0, **params) -> DgpSpec:
        return cls("iv", params, T, seed)

    @classmethod
    def external(cls, shock: Series, seed: int = 0, **params) -> DgpSpec:
        return cls("external_shock", params, len(shock), seed, shock)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "params": dict(self.params), "T": self.T, "seed": self.seed}
        if self.shock is not None:
            out["shock"] = self.shock.name
        return out

    @classmethod
    def from_dict(cls, payload: Mapping, shock: Series | None = None) -> DgpSpec:
        try:
            kind = payload["kind"]
        except KeyError:
            raise SpecError("DGP config needs a 'kind'") from None
        extra = set(payload) - {"kind", "params", "T", "seed", "shock", "shock_csv", "shock_column"}
        if extra:
            raise SpecError(f"unknown DGP config keys: {sorted(extra)}")
        return cls(
            kind=kind,
            params=payload.get("params", {}),
            T=int(payload.get("T", len(shock) if shock is not None else 1_000_000)),
            seed=int(payload.get("seed", 0)),
            shock=shock,
        )


@dataclass(frozen=True, eq=False)
class SimulatedData:
    series: Mapping[str, Series]
    spec: DgpSpec

    def __getitem__(self, name: str) -> Series:
        return self.series[name]

    def to_csv(self, path: str | Path) -> None:
        header = f"seed={self.spec.seed} rng={RNG_ALGORITHM}\nspec={json.dumps(self.spec.to_dict(), sort_keys=True)}"
        write_csv(self.series, path, comment=header)


def _ar1(innovations: np.ndarray, coef: float) -> np.ndarray:
    return lfilter([1.0], [1.0, -coef], innovations)


def simulate(spec: DgpSpec, replicate: int | None = None) -> SimulatedData:
    """Draw one realisation of ``spec``.

    A burn-in of :data:`BURN_IN` periods from zero initial states is
    discarded (not applicable to ``external_shock``, whose shock path is
    taken verbatim). ``replicate`` derives an independent stream from the
    same seed.
    """
    rng = make_rng(spec.seed, replicate)
    p = spec.params
    n = spec.T + BURN_IN

    if spec.kind == "simple":
        eps = rng.standard_normal(n)
        u = rng.standard_normal(n)
        x = _ar1(p["sigma_eps"] * eps, p["gamma"])
        y = p["delta"] * x + p["sigma_u"] * u
        out = {"y": y, "x": x, "eps": eps * p["sigma_eps"]}
    elif spec.kind == "extended":
        eps = rng.standard_normal(n)
        u = rng.standard_normal(n)
        x = _ar1(p["sigma_eps"] * eps, p["gamma"])
        x_lag = np.concatenate([[0.0], x[:-1]])
        y = _ar1(p["b0"] * x + p["b1"] * x_lag + p["sigma_u"] * u, p["rho"])
        out = {"y": y, "x": x, "eps": eps * p["sigma_eps"]}
    elif spec.kind == "iv":
        eps, m, a, nu = (rng.standard_normal(n) for _ in range(4))
        x = _ar1(eps, p["gamma"])
        g = p["lam"] * x + (1.0 - p["lam"]) * m
        u = m + a
        y = p["beta"] * g + u
        z = x + nu
        out = {"y": y, "x": x, "eps": eps, "g": g, "z": z, "m": m, "a": a, "u": u, "nu": nu}
    else:
        x = spec.shock.values
        u = rng.standard_normal(x.size)
        x_lag = np.concatenate([[0.0], x[:-1]])
        y = _ar1(p["b0"] * x + p["b1"] * x_lag + p["sigma_u"] * u, p["rho"])
        index = spec.shock.period_index
        series = {
            "y": Series("y", y, index),
            "x": Series("x", x, index),
            "u": Series("u", u, index),
        }
        return SimulatedData(series, spec)

    series = {name: Series(name, values[BURN_IN:]) for name, values in out.items()}
    return SimulatedData(series, spec)


def closed_form_irf(spec: DgpSpec, H: int, persistent: bool) -> np.ndarray:
    """Population impulse response of ``y`` to a unit shock, horizons 0..H.

    ``persistent=True`` lets the shock follow its own AR(1) path
    (``x_{t+j} = gamma^j``); ``False`` holds future shock values at zero.
    """
    if spec.kind not in ("simple", "extended"):
        raise SpecError(f"no closed-form IRF for DGP kind {spec.kind!r}")
    p = spec.params
    if persistent:
        xi = p["gamma"] ** np.arange(H + 1, dtype=float)
    else:
        xi = np.zeros(H + 1)
        xi[0] = 1.0
    if spec.kind == "simple":
        return p["delta"] * xi
    r = np.empty(H + 1)
    r[0] = p["b0"] * xi[0]
    for h in range(1, H + 1):
        r[h] = p["rho"] * r[h - 1] + p["b0"] * xi[h] + p["b1"] * xi[h - 1]
    return r
