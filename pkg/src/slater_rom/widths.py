"""Empirical approximation-width curves for snapshot families.

A family of mixtures sampled over a parameter range is flattened onto a
uniform grid, either in space (L2 geometry) or in quantile coordinates
(where the L2 distance of inverse cdfs is the Wasserstein metric).  The
width curve delta_n reports how well the best n-dimensional subspace
captures the whole family in the grid's weighted inner product:

    delta_n^2 = sum_{k > n} sigma_k,

with sigma_k the principal-component energies of the weighted snapshot
matrix.  Log-log slopes of delta_n separate families with algebraic decay
from those that collapse outright (a translated family is exactly
two-dimensional in quantile coordinates).

For the single-well family with unit-mass densities (z/2) e^{-z|x-r|},
r in (-R, R), the principal-component energies of the L2 geometry are
known in closed form; analytic and discretized versions of that spectrum
live here and cross-validate each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import DomainError, NumericalError
from .slater import SlaterMixture

__all__ = [
    "SnapshotGrid",
    "WidthCurve",
    "l2_snapshot_grid",
    "icdf_snapshot_grid",
    "pod_width_curve",
    "translation_zeros",
    "translation_spectrum",
    "translation_kernel",
    "discretized_translation_spectrum",
]

# Fit window of the log-log slope, as fractions of delta_0: above the
# round-off floor, below the pre-asymptotic head.
SLOPE_WINDOW = (1e-6, 1e-1)


@dataclass(frozen=True, eq=False)
class SnapshotGrid:
    """Family samples on a strictly increasing uniform grid.

    One row per parameter value; the grid may live in space (rows are
    densities) or in (0, 1) (rows are inverse cdfs).  The quadrature
    weight of every node is the grid step.
    """

    params: np.ndarray
    lo: float
    hi: float
    npoints: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        fix = object.__setattr__
        fix(self, "params", np.asarray(self.params, dtype=float).ravel())
        fix(self, "matrix", np.asarray(self.matrix, dtype=float))
        if self.npoints < 2 or not self.hi > self.lo:
            raise DomainError("need hi > lo and at least two grid points")
        if self.matrix.shape != (self.params.size, self.npoints):
            raise DomainError(
                f"matrix shape {self.matrix.shape} does not match "
                f"{self.params.size} parameters x {self.npoints} grid points")
        if not np.all(np.isfinite(self.matrix)):
            raise DomainError("snapshot matrix contains non-finite entries")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.npoints)

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.npoints - 1)

    @property
    def size(self) -> int:
        return int(self.params.size)


@dataclass(frozen=True, eq=False)
class WidthCurve:
    """delta_n tail-sum curve with its fitted log-log slope.

    sigmas are the principal-component energies (descending);
    deltas[n] = sqrt(sum(sigmas[n:])) for n = 0 .. len(sigmas).  slope and
    window are None when fewer than two curve points fall inside the fit
    window.  sample_count records how many parameter samples stand behind
    the curve; the curve of a finite sample is exact for that sample but
    only approximates the continuum family.
    """

    n_values: np.ndarray
    deltas: np.ndarray
    sigmas: np.ndarray
    slope: float | None
    window: tuple[int, int] | None
    sample_count: int

    def __post_init__(self) -> None:
        fix = object.__setattr__
        fix(self, "n_values", np.asarray(self.n_values, dtype=int))
        fix(self, "deltas", np.asarray(self.deltas, dtype=float))
        fix(self, "sigmas", np.asarray(self.sigmas, dtype=float))
        if self.n_values.shape != self.deltas.shape:
            raise DomainError("n_values and deltas must align")
        scale = self.deltas[0] if self.deltas.size else 0.0
        if np.any(np.diff(self.deltas) > 1e-12 * max(scale, 1.0)):
            raise NumericalError("width curve must be nonincreasing")


def l2_snapshot_grid(family: Sequence[SlaterMixture],
                     params: Sequence[float] | None = None,
                     npoints: int = 4096,
                     lo: float | None = None,
                     hi: float | None = None) -> SnapshotGrid:
    """Sample mixture densities on a uniform spatial grid.

    Default truncation: 40 decay lengths of the widest component beyond
    the extreme centers, where exponential tails are below 1e-12.
    """
    mixtures = list(family)
    if not mixtures:
        raise DomainError("need at least one mixture")
    if params is None:
        params = np.arange(len(mixtures), dtype=float)
    params = np.asarray(params, dtype=float).ravel()
    if params.size != len(mixtures):
        raise DomainError("one parameter value per mixture required")
    if lo is None or hi is None:
        centers = np.concatenate([m.centers for m in mixtures])
        reach = 40.0 / min(float(m.scales.min()) for m in mixtures)
        lo = float(centers.min() - reach) if lo is None else lo
        hi = float(centers.max() + reach) if hi is None else hi
    x = np.linspace(lo, hi, npoints)
    matrix = np.vstack([m.density(x) for m in mixtures])
    return SnapshotGrid(params=params, lo=lo, hi=hi, npoints=npoints,
                        matrix=matrix)


def icdf_snapshot_grid(family: Sequence[SlaterMixture],
                       params: Sequence[float] | None = None,
                       nq: int = 512) -> SnapshotGrid:
    """Sample mixture inverse cdfs on the midpoint quantile grid.

    Midpoint nodes q_j = (j - 1/2)/nq keep clear of the logarithmic
    divergence of the inverse cdf at 0 and 1; the grid step 1/nq is
    exactly the probability mass of each cell, so the weighted row
    distances are squared 2-Wasserstein distances.
    """
    mixtures = list(family)
    if not mixtures:
        raise DomainError("need at least one mixture")
    if nq < 64:
        raise DomainError("need at least 64 quantile nodes")
    if params is None:
        params = np.arange(len(mixtures), dtype=float)
    params = np.asarray(params, dtype=float).ravel()
    if params.size != len(mixtures):
        raise DomainError("one parameter value per mixture required")
    q = (np.arange(nq) + 0.5) / nq
    matrix = np.vstack([m.icdf(q) for m in mixtures])
    return SnapshotGrid(params=params, lo=float(q[0]), hi=float(q[-1]),
                        npoints=nq, matrix=matrix)


def _fit_slope(n_values: np.ndarray, deltas: np.ndarray, cap: int,
               window: tuple[float, float]):
    scale = deltas[0]
    lo_frac, hi_frac = window
    keep = ((n_values >= 1) & (n_values <= cap)
            & (deltas >= lo_frac * scale) & (deltas <= hi_frac * scale))
    if np.count_nonzero(keep) < 2:
        return None, None
    ns = n_values[keep]
    slope = float(np.polyfit(np.log(ns), np.log(deltas[keep]), 1)[0])
    return slope, (int(ns.min()), int(ns.max()))


def pod_width_curve(snap: SnapshotGrid,
                    param_weights: np.ndarray | None = None,
                    window: tuple[float, float] = SLOPE_WINDOW) -> WidthCurve:
    """Principal-component width curve of a snapshot grid.

    The parameter-space correlation spectrum is computed as squared
    singular values of the doubly weighted snapshot matrix (grid step in
    the row direction, parameter quadrature in the column direction);
    working on the matrix instead of the assembled correlation keeps
    trailing modes at singular-value round-off rather than its square,
    which matters for collapse thresholds near 1e-8.

    param_weights defaults to the trapezoid weights of the stored
    parameter values; pass explicit weights for other parameter
    quadratures.  The slope window is capped at half the sample count,
    where the discrete spectrum stops tracking the family.
    """
    if param_weights is None:
        if snap.size == 1:
            param_weights = np.ones(1)
        else:
            edges = np.diff(snap.params)
            if np.any(edges <= 0.0):
                raise DomainError("parameter values must strictly increase")
            param_weights = np.empty(snap.size)
            param_weights[0] = 0.5 * edges[0]
            param_weights[-1] = 0.5 * edges[-1]
            param_weights[1:-1] = 0.5 * (edges[:-1] + edges[1:])
    else:
        param_weights = np.asarray(param_weights, dtype=float).ravel()
        if param_weights.shape != (snap.size,) or np.any(param_weights <= 0):
            raise DomainError("need one positive weight per parameter")
    weighted = (np.sqrt(param_weights)[:, None] * snap.matrix
                * math.sqrt(snap.step))
    sing = np.linalg.svd(weighted, compute_uv=False)
    sigmas = sing * sing
    if not sigmas.size or sigmas[0] <= 0.0:
        raise NumericalError("snapshot family carries no energy")
    tails = np.concatenate([np.cumsum(sigmas[::-1])[::-1], [0.0]])
    deltas = np.sqrt(tails)
    n_values = np.arange(deltas.size)
    cap = max(2, snap.size // 2)
    slope, used = _fit_slope(n_values, deltas, cap, window)
    return WidthCurve(n_values=n_values, deltas=deltas, sigmas=sigmas,
                      slope=slope, window=used, sample_count=snap.size)


def _bisect(f, lo: float, hi: float, tol: float = 1e-13) -> float:
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise NumericalError(
            f"zero bracket [{lo}, {hi}] does not change sign")
    for _ in range(max(1, math.ceil(math.log2((hi - lo) / tol))) + 2):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def translation_zeros(halfwidth: float, charge: float, pairs: int):
    """Frequencies of the single-well translation family eigenmodes.

    a_l solves x sin(Rx) = z cos(Rx) in ((l-1) pi/R, (l-1) pi/R + pi/(2R))
    (cosine modes); b_l solves x cos(Rx) = -z sin(Rx) in the complementary
    half-cell (sine modes).  Each bracket contains exactly one zero and
    the endpoint values +-z, +-x never vanish, so bisection is safe.
    Returns (a, b) arrays of length pairs; they interlace a_1 < b_1 < a_2.
    """
    R, z = float(halfwidth), float(charge)
    if R <= 0.0 or z <= 0.0:
        raise DomainError("halfwidth and charge must be positive")
    if pairs < 1:
        raise DomainError("need at least one eigenpair")
    even = lambda x: x * math.sin(R * x) - z * math.cos(R * x)
    odd = lambda x: x * math.cos(R * x) + z * math.sin(R * x)
    half = 0.5 * math.pi / R
    a = np.empty(pairs)
    b = np.empty(pairs)
    for l in range(1, pairs + 1):
        cell = (l - 1) * math.pi / R
        a[l - 1] = _bisect(even, cell, cell + half)
        b[l - 1] = _bisect(odd, cell + half, cell + 2.0 * half)
    return a, b


def translation_spectrum(halfwidth: float, charge: float,
                         count: int) -> np.ndarray:
    """Closed-form correlation spectrum of the single-well L2 family.

    The overlap map phi -> integral of (z/2) e^{-z|x-r|} phi(x) dx over
    (-R, R) sends cos(a_l x) to [z^2/(a_l^2+z^2)] cos(a_l x) when
    a_l sin(a_l R) = z cos(a_l R): integrating by parts twice reproduces
    the cosine up to boundary terms that the frequency condition kills.
    The correlation operator is the square of that map, so its
    eigenvalues, interleaved cosine/sine and strictly decreasing, are

        lambda_l = z^4/(a_l^2 + z^2)^2,   mu_l = z^4/(b_l^2 + z^2)^2.

    The trace identity sum = (z^2/4) * double integral of e^{-2z|x-r|}
    and the dense-grid eigensolver both pin the constant down; tests
    check them.  Returns the first count eigenvalues.
    """
    if count < 1:
        raise DomainError("need at least one eigenvalue")
    z = float(charge)
    a, b = translation_zeros(halfwidth, charge, (count + 1) // 2)
    lam = z**4 / (a * a + z * z) ** 2
    mu = z**4 / (b * b + z * z) ** 2
    out = np.empty(2 * a.size)
    out[0::2] = lam
    out[1::2] = mu
    return out[:count]


def translation_kernel(x, y, halfwidth: float, charge: float) -> np.ndarray:
    """Correlation kernel of the single-well family at points x, y.

    K(x, y) = integral over r in (-R, R) of the product of the unit-mass
    densities centered at r, in closed form.  Arguments broadcast; both
    must lie in [-R, R], where the piecewise integration is valid.
    """
    R, z = float(halfwidth), float(charge)
    if R <= 0.0 or z <= 0.0:
        raise DomainError("halfwidth and charge must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(x) > R) or np.any(np.abs(y) > R):
        raise DomainError("kernel arguments must lie in [-R, R]")
    d = np.abs(x - y)
    s = x + y
    return (0.25 * z * (1.0 + z * d) * np.exp(-z * d)
            - 0.125 * z * (np.exp(-z * (2.0 * R + s))
                           + np.exp(-z * (2.0 * R - s))))


def discretized_translation_spectrum(halfwidth: float, charge: float,
                                     npoints: int = 2000,
                                     count: int = 10) -> np.ndarray:
    """Leading eigenvalues of the discretized correlation operator.

    Gauss-Legendre discretization of the closed-form kernel on (-R, R);
    the symmetrized weighted matrix sqrt(w) K sqrt(w) shares its
    eigenvalues with the quadrature operator.  The kernel's diagonal
    ridge is C^2 (the leading kink is |x-y|^3), so the rule converges
    fast despite not being analytic.
    """
    if npoints < max(4, 2 * count):
        raise DomainError("grid too coarse for the requested eigenvalues")
    if count < 1:
        raise DomainError("need at least one eigenvalue")
    R = float(halfwidth)
    nodes, weights = np.polynomial.legendre.leggauss(npoints)
    x = R * nodes
    w = R * weights
    K = translation_kernel(x[:, None], x[None, :], halfwidth, charge)
    root = np.sqrt(w)
    sym = root[:, None] * K * root[None, :]
    vals = linalg.eigh(sym, eigvals_only=True,
                       subset_by_index=(npoints - count, npoints - 1))
    return vals[::-1]
