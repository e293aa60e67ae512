"""Campaign drivers shared by the HTTP service and the command line.

Each run_* function consumes a validated ExperimentConfig plus optional
overrides and returns plain result objects with an as_dict() view.  File
writing, CSV formatting and timing metadata stay with the callers; for a
fixed config the result values are deterministic (no wall clock, no seeds,
no dependence on the worker count).  Per-step wall times are collected on
the side and exposed through timings() so callers can keep them out of the
reproducible outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from time import perf_counter
from typing import Callable, Sequence

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, DomainError, NumericalError
from .exact import GroundState, solve_ground_state, solve_symmetric_dimer
from .greedy import ReducedBasis, Snapshot, greedy_select
from .online import ReducedEnergyModel, online_minimize
from .slater import Slater, SlaterMixture
from .widths import WidthCurve, icdf_snapshot_grid, l2_snapshot_grid, pod_width_curve

__all__ = [
    "SolveTable",
    "OnlineRecord",
    "OnlineSweep",
    "HeatmapResult",
    "WidthReport",
    "run_solve",
    "run_offline",
    "run_online",
    "run_heatmap",
    "run_widths",
]


def _solve_at(config: ExperimentConfig, r: float) -> GroundState:
    try:
        return solve_ground_state(config.charge_vector, config.positions_for(r))
    except (DomainError, NumericalError) as exc:
        raise type(exc)(f"ground-state solve failed at r={r:.17g}: {exc}") from exc


@dataclass(frozen=True, eq=False)
class SolveTable:
    """Exact ground states over a parameter list, one row per parameter."""

    params: np.ndarray
    zetas: np.ndarray
    weights: np.ndarray          # (S, M)
    energies: np.ndarray
    residuals: np.ndarray        # max matching-condition violation per row

    def as_dict(self) -> dict:
        return {
            "params": self.params.tolist(),
            "zetas": self.zetas.tolist(),
            "weights": self.weights.tolist(),
            "energies": self.energies.tolist(),
            "residuals": self.residuals.tolist(),
        }


def run_solve(config: ExperimentConfig,
              params: Sequence[float] | None = None) -> SolveTable:
    """Solve the exact ground state at each parameter (default: test grid)."""
    r_values = (config.test.grid() if params is None
                else np.asarray(list(params), dtype=float))
    if r_values.size == 0:
        raise ConfigError("no parameters to solve at")
    M = len(config.charges)
    zetas = np.empty(r_values.size)
    weights = np.empty((r_values.size, M))
    energies = np.empty(r_values.size)
    residuals = np.empty(r_values.size)
    for k, r in enumerate(r_values):
        gs = _solve_at(config, float(r))
        zetas[k] = gs.zeta
        weights[k] = gs.weights
        energies[k] = gs.energy
        residuals[k] = gs.matching_residual()
    return SolveTable(params=r_values, zetas=zetas, weights=weights,
                      energies=energies, residuals=residuals)


def run_offline(config: ExperimentConfig,
                callback: Callable[[dict], None] | None = None) -> ReducedBasis:
    """Greedy basis construction over the training grid.

    Returns the basis with its per-size error history attached; callback,
    if given, sees each history entry as the selection proceeds.
    """
    r_values = config.training.grid()
    snapshots = [Snapshot(_solve_at(config, float(r)).mixture(), param=float(r))
                 for r in r_values]
    return greedy_select(snapshots, config.basis_size,
                         charges=config.charge_vector,
                         training_interval=(config.training.lo, config.training.hi),
                         callback=callback)


@dataclass(frozen=True, eq=False)
class OnlineRecord:
    """One online query: basis size, parameter, minimizer and energies."""

    n: int
    r: float
    lam: np.ndarray
    energy: float
    exact_energy: float | None
    error: float | None
    starts_converged: int
    best_start: int
    seconds: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "lam": self.lam.tolist(),
            "energy": self.energy,
            "exact_energy": self.exact_energy,
            "error": self.error,
            "starts_converged": self.starts_converged,
            "best_start": self.best_start,
        }


@dataclass(frozen=True, eq=False)
class OnlineSweep:
    """Online results over a (basis size, parameter) grid.

    summary rows aggregate the energy error per basis size; they are only
    present when exact references were computed.
    """

    n_values: tuple[int, ...]
    params: np.ndarray
    records: tuple[OnlineRecord, ...]
    summary: tuple[dict, ...]

    def as_dict(self) -> dict:
        return {
            "n_values": list(self.n_values),
            "params": self.params.tolist(),
            "records": [rec.as_dict() for rec in self.records],
            "summary": [dict(row) for row in self.summary],
        }

    def timings(self) -> dict:
        per = [rec.seconds for rec in self.records]
        return {"per_record_seconds": per, "total_seconds": float(sum(per))}


def run_online(config: ExperimentConfig, basis: ReducedBasis,
               params: Sequence[float] | None = None,
               n_values: Sequence[int] | None = None,
               workers: int | None = None,
               compare_exact: bool = True) -> OnlineSweep:
    """Multistart online minimization over queries and basis-size prefixes.

    params defaults to the test grid; n_values defaults to every prefix
    size 2..basis.size.  workers overrides the configured process count
    (results are identical for any value).  With compare_exact the exact
    ground-state energy is solved once per parameter and each record
    carries error = found - exact, which the variational principle keeps
    nonnegative up to optimizer tolerance.
    """
    r_values = (config.test.grid() if params is None
                else np.asarray(list(params), dtype=float))
    if r_values.size == 0:
        raise ConfigError("no query parameters")
    sizes = (tuple(range(2, basis.size + 1)) if n_values is None
             else tuple(int(n) for n in n_values))
    if len(sizes) == 0:
        raise ConfigError("no basis sizes to sweep")
    for n in sizes:
        if not 2 <= n <= basis.size:
            raise ConfigError(f"basis size {n} outside [2, {basis.size}]")
    online_cfg = config.online.to_config(workers)

    exact = None
    if compare_exact:
        exact = np.array([_solve_at(config, float(r)).energy for r in r_values])

    z = config.charge_vector
    records: list[OnlineRecord] = []
    summary: list[dict] = []
    for n in sizes:
        sub = basis if n == basis.size else basis.prefix(n)
        errs = np.empty(r_values.size)
        for k, r in enumerate(r_values):
            tic = perf_counter()
            res = online_minimize(sub, z, config.positions_for(float(r)),
                                  online_cfg)
            sec = perf_counter() - tic
            e_exact = None if exact is None else float(exact[k])
            err = None if e_exact is None else float(res.energy - e_exact)
            errs[k] = np.nan if err is None else err
            records.append(OnlineRecord(
                n=n, r=float(r), lam=res.lambda_star, energy=res.energy,
                exact_energy=e_exact, error=err,
                starts_converged=res.starts_converged,
                best_start=res.best_start, seconds=sec))
        if exact is not None:
            summary.append({
                "n": n,
                "max_error": float(np.max(errs)),
                "mean_error": float(np.mean(errs)),
                "min_error": float(np.min(errs)),
            })
    return OnlineSweep(n_values=sizes, params=r_values,
                       records=tuple(records), summary=tuple(summary))


@dataclass(frozen=True, eq=False)
class HeatmapResult:
    """Reduced-energy landscape over a square window of a 2-element basis.

    energies[i, j] is the unsmoothed reduced energy at weights
    (axis[i], axis[j]); cells outside the admissible half-space hold NaN.
    minima lists strict local minima over the 8-neighborhood, interior
    cells with all finite neighbors only.
    """

    r: float
    axis: np.ndarray
    energies: np.ndarray
    minima: tuple[dict, ...]

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "axis": self.axis.tolist(),
            "energies": [[None if not np.isfinite(v) else float(v) for v in row]
                         for row in self.energies],
            "minima": [dict(m) for m in self.minima],
        }


def _grid_local_minima(axis: np.ndarray, energies: np.ndarray) -> tuple[dict, ...]:
    n = axis.size
    out = []
    for i in range(1, n - 1):
        for j in range(1, n - 1):
            v = energies[i, j]
            if not np.isfinite(v):
                continue
            patch = energies[i - 1:i + 2, j - 1:j + 2]
            if not np.all(np.isfinite(patch)):
                continue
            others = np.delete(patch.ravel(), 4)
            if np.all(v < others):
                out.append({"i": i, "j": j,
                            "lam": [float(axis[i]), float(axis[j])],
                            "energy": float(v)})
    out.sort(key=lambda m: m["energy"])
    return tuple(out)


def run_heatmap(config: ExperimentConfig, basis: ReducedBasis,
                r: float | None = None) -> HeatmapResult:
    """Scan the reduced energy of a 2-element basis over the weight window."""
    if basis.size != 2:
        raise ConfigError(
            f"landscape scan needs a basis of exactly 2 elements, got {basis.size}")
    hp = config.heatmap
    query_r = hp.r if r is None else float(r)
    model = ReducedEnergyModel.for_query(basis, config.charge_vector,
                                         config.positions_for(query_r))
    axis = hp.axis()
    inv = basis.inverse_scales
    energies = np.full((axis.size, axis.size), np.nan)
    for i, l1 in enumerate(axis):
        for j, l2 in enumerate(axis):
            if l1 * inv[0] + l2 * inv[1] > 0.0:
                energies[i, j] = model.energy((l1, l2))
    return HeatmapResult(r=query_r, axis=axis, energies=energies,
                         minima=_grid_local_minima(axis, energies))


@dataclass(frozen=True, eq=False)
class WidthReport:
    """Width curves of the two reference families."""

    translate: WidthCurve
    dimer: WidthCurve

    def as_dict(self) -> dict:
        return {"translate": _curve_dict(self.translate),
                "dimer": _curve_dict(self.dimer)}


def _curve_dict(curve: WidthCurve) -> dict:
    return {
        "n_values": curve.n_values.tolist(),
        "deltas": curve.deltas.tolist(),
        "sigmas": curve.sigmas.tolist(),
        "slope": curve.slope,
        "window": list(curve.window),
        "sample_count": curve.sample_count,
    }


def run_widths(config: ExperimentConfig) -> WidthReport:
    """Empirical width curves for the translate and dimer families.

    The translate family is linear-width hard (algebraic decay); the dimer
    family measured through inverse distributions decays much faster,
    which is the gap the reduced method exploits.
    """
    tp = config.widths.translate
    t_params = np.linspace(tp.lo, tp.hi, tp.count)
    t_family = [SlaterMixture((Slater(tp.charge, float(r)),), (1.0,))
                for r in t_params]
    t_curve = pod_width_curve(
        l2_snapshot_grid(t_family, params=t_params, npoints=tp.npoints))

    dp = config.widths.dimer
    d_params = np.linspace(dp.lo, dp.hi, dp.count)
    d_family = [solve_symmetric_dimer(dp.charge, float(r)).mixture()
                for r in d_params]
    d_curve = pod_width_curve(
        icdf_snapshot_grid(d_family, params=d_params, nq=dp.nq))
    return WidthReport(translate=t_curve, dimer=d_curve)
