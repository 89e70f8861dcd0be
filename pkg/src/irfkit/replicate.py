"""Simulation batteries that regenerate the plot data of each reference figure.

Each builder returns an ordered mapping of curve id to a :class:`Curve`
holding horizon-indexed values and a human-readable legend.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from irfkit.dgpsim import DgpSpec, closed_form_irf, simulate
from irfkit.errors import DataMissingError, SpecError
from irfkit.irf import IrfSpec, LeadsRule, dlm, dlm_innovation, lp, lp_iv, lp_leads, lp_residual_adjusted, resolve_threads
from irfkit.tscore import Series
from irfkit.varmod import cholesky_irf, fit_var, varx_irf

__all__ = ["FIGURES", "Curve", "replicate"]


@dataclass(frozen=True)
class Curve:
    legend: str
    values: np.ndarray

    @property
    def horizons(self) -> np.ndarray:
        return np.arange(self.values.size)


def slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_")


def _extended(T, seed, gamma, replicate=None):
    d = simulate(DgpSpec.extended(T=T, seed=seed, gamma=gamma), replicate)
    return d["y"], d["x"]


def _fig1(T, seed, H, threads, **_):
    out = {}
    for gamma, rep in ((0.0, 0), (0.2, 1)):
        y, x = _extended(T, seed, gamma, rep)
        ctl = [(y, 1), (x, 1)]
        out[f"gamma={gamma:g}, no leads"] = lp(y, x, IrfSpec("lp", H, controls=ctl), threads).point
        if gamma:
            out[f"gamma={gamma:g}, leads"] = lp_leads(y, x, IrfSpec("lp_leads", H, controls=ctl), threads).point
    return out


def _fig2(T, seed, H, threads, **_):
    out = {}
    for gamma, rep in ((0.0, 0), (0.2, 1)):
        y, x = _extended(T, seed, gamma, rep)
        out[f"gamma={gamma:g}, DLM"] = dlm(y, x, IrfSpec("dlm", H, dlm_lags=H + 1)).point
        if gamma:
            spec = IrfSpec("dlm_innovation", H, dlm_lags=H + 1)
            out[f"gamma={gamma:g}, DLM on shock innovations"] = dlm_innovation(y, x, spec).point
    return out


def _figB1(T, seed, H, threads, **_):
    out = {}
    for gamma, rep in ((0.0, 0), (0.2, 1)):
        y, x = _extended(T, seed, gamma, rep)
        resp = cholesky_irf(fit_var({"x": x, "y": y}, 1), H, "x")
        out[f"VAR response of y, gamma={gamma:g}"] = resp["y"].point
        out[f"LP response of y, gamma={gamma:g}"] = lp(y, x, IrfSpec("lp", H, controls=[(y, 1), (x, 1)]), threads).point
        out[f"VAR response of x, gamma={gamma:g}"] = resp["x"].point
    return out


def _figB2(T, seed, H, threads, **_):
    out = {}
    for gamma, rep in ((0.0, 0), (0.2, 1)):
        y, x = _extended(T, seed, gamma, rep)
        out[f"x endogenous, gamma={gamma:g}"] = cholesky_irf(fit_var({"x": x, "y": y}, 1), H, "x")["y"].point
        out[f"x exogenous, gamma={gamma:g}"] = varx_irf({"y": y}, x, 1, H, H)["y"].point
    return out


def _figB3(T, seed, H, threads, shock=None, replications=10_000, **_):
    if shock is None:
        raise DataMissingError(
            "figB3 simulates the outcome from a user-supplied shock series "
            "(the alternative simulation using the persistence of an actual shock); "
            "pass --shock-csv"
        )
    x = shock.rename("x")
    base = DgpSpec.external(x, seed=seed)
    variants = (("no leads", 0), ("1 lead", 1), (f"{H} leads", H))

    def one(r):
        y = simulate(base, r)["y"]
        ctl = [(y, 1), (x, 1)]
        rows = []
        for _, n in variants:
            if n == 0:
                rows.append(lp(y, x, IrfSpec("lp", H, controls=ctl), 1).point)
            else:
                spec = IrfSpec("lp_leads", H, controls=ctl, leads_rule=LeadsRule("fixed", n))
                rows.append(lp_leads(y, x, spec, 1).point)
        return np.array(rows)

    n = resolve_threads(threads)
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            draws = list(pool.map(one, range(replications)))
    else:
        draws = [one(r) for r in range(replications)]
    mean = np.sum(draws, axis=0) / replications
    out = {"theoretical response, no persistence": closed_form_irf(_no_persistence_spec(base), H, persistent=False)}
    for i, (name, _) in enumerate(variants):
        out[f"LP, {name}"] = mean[i]
    return out


def _no_persistence_spec(spec: DgpSpec) -> DgpSpec:
    p = spec.params
    return DgpSpec.extended(T=10, rho=p["rho"], b0=p["b0"], b1=p["b1"], gamma=0.0, sigma_u=p["sigma_u"])


def _figB4(T, seed, H, threads, **_):
    out = {}
    bench = simulate(DgpSpec.iv(T=T, seed=seed, gamma=0.0, lam=1.0), 0)
    out["no endogeneity or persistence, OLS"] = lp(bench["y"], bench["g"], IrfSpec("lp", H), threads).point
    for gamma, rep in ((0.0, 1), (0.2, 2)):
        d = simulate(DgpSpec.iv(T=T, seed=seed, gamma=gamma), rep)
        y, g, z, x = d["y"], d["g"], d["z"], d["x"]
        out[f"gamma={gamma:g}, OLS"] = lp(y, g, IrfSpec("lp", H), threads).point
        out[f"gamma={gamma:g}, LP-IV"] = lp_iv(y, g, z, IrfSpec("lp_iv", H), threads=threads).point
        if gamma:
            spec = IrfSpec("lp_iv_leads", H)
            out[f"gamma={gamma:g}, LP-IV with shock leads"] = lp_iv(y, g, z, spec, lead_source=x, threads=threads).point
    return out


def _figB5(T, seed, H, threads, **_):
    out = {}
    for gamma, rep in ((0.0, 0), (0.2, 1)):
        y, x = _extended(T, seed, gamma, rep)
        out[f"gamma={gamma:g}, LP"] = lp(y, x, IrfSpec("lp", H, controls=[(y, 1), (x, 1)]), threads).point
        if gamma:
            spec = IrfSpec("lp_residual_adjusted", H, controls=[(y, 1)])
            out[f"gamma={gamma:g}, LP on shock innovations"] = lp_residual_adjusted(
                y, x, spec, innovation_lags=1, threads=threads
            ).point
    return out


FIGURES: dict[str, tuple[str, Callable]] = {
    "fig1": ("local projections with and without shock leads, extended DGP", _fig1),
    "fig2": ("distributed-lag models on the shock and on its innovations, extended DGP", _fig2),
    "figB1": ("VAR with the shock ordered first versus local projections", _figB1),
    "figB2": ("shock as an endogenous VAR variable versus an exogenous VAR-X regressor", _figB2),
    "figB3": ("local projections on an outcome simulated from a user-supplied persistent shock", _figB3),
    "figB4": ("local projections with instrumental variables, IV DGP", _figB4),
    "figB5": ("local projections on estimated shock innovations", _figB5),
}


def replicate(
    figure: str,
    T: int = 1_000_000,
    seed: int = 0,
    H: int = 20,
    threads: int | None = None,
    shock: Series | None = None,
    replications: int = 10_000,
) -> dict[str, Curve]:
    """Run the battery for ``figure`` and return its curves in legend order."""
    if figure not in FIGURES:
        raise SpecError(f"unknown figure {figure!r}; valid ids: {', '.join(FIGURES)}")
    if replications < 1:
        raise SpecError("replications must be >= 1")
    _, builder = FIGURES[figure]
    raw = builder(T=T, seed=seed, H=H, threads=threads, shock=shock, replications=replications)
    return {slug(name): Curve(name, np.asarray(values, dtype=float)) for name, values in raw.items()}
