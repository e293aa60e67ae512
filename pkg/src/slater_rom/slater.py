"""Slater functions, their mixtures, and 2-Wasserstein geometry on the line.

A Slater function with scale zeta > 0 centered at r is the probability
density

    S(x) = (zeta / 2) * exp(-zeta * |x - r|),

with mean r and variance 2 / zeta**2.  Mixtures of Slater functions are the
ansatz class for ground states of 1D Schrodinger operators with attractive
Dirac-delta potentials, and the W2 distance between two Slater functions has
the closed form

    W2(a, b)**2 = (r_a - r_b)**2 + 2 * (1/zeta_a - 1/zeta_b)**2.

W2 barycenters of Slater functions are again Slater functions, with inverse
scale the barycentric combination of inverse scales; the combination remains
meaningful for signed weights as long as the combined inverse scale stays
positive, which is the extended weight domain used throughout.

Barycentric weight vectors are represented as plain 1D numpy arrays; domain
membership is always tested explicitly through ExtendedWeightDomain.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError

__all__ = [
    "Slater",
    "SlaterMixture",
    "ExtendedWeightDomain",
    "w2_slater",
    "w2_slater_sq",
    "slater_barycenter",
    "symmetric_dimer_icdf",
]

_WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Slater:
    """Slater probability density with scale zeta > 0 and center r."""

    zeta: float
    r: float

    def __post_init__(self) -> None:
        if not (self.zeta > 0.0) or not np.isfinite(self.zeta):
            raise DomainError(f"Slater scale must be positive, got {self.zeta}")
        if not np.isfinite(self.r):
            raise DomainError(f"Slater center must be finite, got {self.r}")

    @property
    def inverse_scale(self) -> float:
        return 1.0 / self.zeta

    @property
    def variance(self) -> float:
        return 2.0 / self.zeta**2

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.zeta * np.exp(-self.zeta * np.abs(x - self.r))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        t = x - self.r
        left = 0.5 * np.exp(self.zeta * np.minimum(t, 0.0))
        right = 1.0 - 0.5 * np.exp(-self.zeta * np.maximum(t, 0.0))
        return np.where(t < 0.0, left, right)

    def icdf(self, q):
        """Quantile function; q must lie strictly inside (0, 1)."""
        q = np.asarray(q, dtype=float)
        if np.any(q <= 0.0) or np.any(q >= 1.0):
            raise DomainError("quantile argument must lie in the open interval (0, 1)")
        lo = self.r + np.log(2.0 * np.minimum(q, 0.5)) / self.zeta
        hi = self.r - np.log(2.0 * np.minimum(1.0 - q, 0.5)) / self.zeta
        return np.where(q < 0.5, lo, hi)


@dataclass(frozen=True)
class SlaterMixture:
    """Finite convex combination of Slater functions.

    Weights must be strictly positive and sum to 1 within 1e-9; they are
    renormalized exactly on construction.  Instances are immutable.
    """

    components: tuple[Slater, ...]
    weights: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        w = np.array(self.weights, dtype=float).ravel()
        if len(comps) == 0:
            raise DomainError("mixture needs at least one component")
        if w.shape != (len(comps),):
            raise DomainError("one weight per component required")
        if np.any(w <= 0.0):
            raise DomainError("mixture weights must be strictly positive")
        total = w.sum()
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise DomainError(f"mixture weights sum to {total}, expected 1")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return len(self.components)

    @property
    def scales(self) -> np.ndarray:
        return np.array([c.zeta for c in self.components])

    @property
    def centers(self) -> np.ndarray:
        return np.array([c.r for c in self.components])

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        for w, c in zip(self.weights, self.components):
            out += w * c.density(x)
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        for w, c in zip(self.weights, self.components):
            out += w * c.cdf(x)
        return out

    def icdf(self, q, tol: float = 1e-12):
        """Quantile function by monotone inversion of the mixture cdf.

        Args:
            q: scalar or array of quantiles in (0, 1).
            tol: required bound on |cdf(icdf(q)) - q|.

        Returns:
            Array (or scalar) of quantile locations.
        """
        q_arr = np.atleast_1d(np.asarray(q, dtype=float))
        if np.any(q_arr <= 0.0) or np.any(q_arr >= 1.0):
            raise DomainError("quantile argument must lie in the open interval (0, 1)")
        if self.size == 1:
            out = self.components[0].icdf(q_arr)
            return out if np.ndim(q) else float(out[0])
        out = self._invert_cdf(q_arr, tol)
        return out if np.ndim(q) else float(out[0])

    def _invert_cdf(self, q: np.ndarray, tol: float) -> np.ndarray:
        # The component quantiles bracket the mixture quantile: at
        # min_m icdf_m(q) every component cdf is <= q, so their convex
        # combination is too; symmetric on the right.  The cdf is strictly
        # increasing (exponential tails never vanish), so bisection on
        # this bracket cannot stall.
        per = np.stack([c.icdf(q) for c in self.components])
        lo = per.min(axis=0)
        hi = per.max(axis=0)
        x = 0.5 * (lo + hi)
        for _ in range(90):
            err = self.cdf(x) - q
            if np.max(np.abs(err)) <= tol:
                return x
            low = err < 0.0
            lo = np.where(low, x, lo)
            hi = np.where(low, hi, x)
            x = 0.5 * (lo + hi)
        # Newton polish; the density is the cdf derivative and positive.
        for _ in range(4):
            err = self.cdf(x) - q
            if np.max(np.abs(err)) <= tol:
                return x
            x = x - err / self.density(x)
        raise NumericalError(f"icdf inversion residual above {tol}")

    def merged(self, tol: float = 1e-12) -> "SlaterMixture":
        """Collapse components with coinciding (zeta, r) within tol."""
        keys: list[tuple[float, float]] = []
        weights: list[float] = []
        for w, c in zip(self.weights, self.components):
            for i, (kz, kr) in enumerate(keys):
                if abs(kz - c.zeta) <= tol and abs(kr - c.r) <= tol:
                    weights[i] += w
                    break
            else:
                keys.append((c.zeta, c.r))
                weights.append(float(w))
        comps = tuple(Slater(z, r) for z, r in keys)
        return SlaterMixture(comps, np.array(weights))

    def truncation_interval(self, eps: float = 1e-12) -> tuple[float, float]:
        """Interval outside which the mixture carries at most eps mass."""
        lo = np.inf
        hi = -np.inf
        k = self.size
        for w, c in zip(self.weights, self.components):
            # Component tail mass beyond radius t is w * exp(-zeta t) / 2.
            t = max(np.log(max(w, eps) * k / (2.0 * eps)), 0.0) / c.zeta
            lo = min(lo, c.r - t)
            hi = max(hi, c.r + t)
        return float(lo), float(hi)


def w2_slater_sq(a: Slater, b: Slater) -> float:
    """Squared 2-Wasserstein distance between two Slater functions."""
    dr = a.r - b.r
    ds = 1.0 / a.zeta - 1.0 / b.zeta
    return dr * dr + 2.0 * ds * ds


def w2_slater(a: Slater, b: Slater) -> float:
    return float(np.sqrt(w2_slater_sq(a, b)))


def slater_barycenter(components: Sequence[Slater], lam: np.ndarray) -> Slater:
    """W2 barycenter of Slater functions under (possibly signed) weights.

    Args:
        components: N Slater functions.
        lam: N barycentric weights; they may be negative as long as
            sum(lam_i / zeta_i) stays positive.

    Returns:
        The barycenter Slater(1 / sum(lam_i / zeta_i), sum(lam_i * r_i)).
    """
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.shape != (len(components),):
        raise DomainError("one weight per component required")
    inv = sum(li / c.zeta for li, c in zip(lam, components))
    if not inv > 0.0:
        raise DomainError(
            f"combined inverse scale {inv} is not positive; weights leave the domain")
    center = sum(li * c.r for li, c in zip(lam, components))
    return Slater(1.0 / inv, float(center))


@dataclass(frozen=True)
class ExtendedWeightDomain:
    """Half-space of weight vectors with positive combined inverse scale.

    For basis elements whose components share one scale per element, a weight
    vector lam is admissible iff sum_i lam_i / zeta_i > 0.  Membership is
    always queried explicitly; no operation in this package tests it
    implicitly on behalf of the caller.
    """

    inverse_scales: np.ndarray

    def __post_init__(self) -> None:
        inv = np.array(self.inverse_scales, dtype=float).ravel()
        if inv.size == 0 or np.any(inv <= 0.0):
            raise DomainError("inverse scales must be positive")
        inv.setflags(write=False)
        object.__setattr__(self, "inverse_scales", inv)

    @property
    def dim(self) -> int:
        return int(self.inverse_scales.size)

    def margin(self, lam) -> float:
        """Signed distance proxy sum_i lam_i / zeta_i (positive inside)."""
        lam = np.asarray(lam, dtype=float).ravel()
        return float(lam @ self.inverse_scales)

    def contains(self, lam) -> bool:
        return self.margin(lam) > 0.0


def symmetric_dimer_icdf(zeta: float, r: float, q):
    """Closed-form quantile function of 0.5*S(zeta,-r) + 0.5*S(zeta,+r).

    Splitting at the mass s = (1 + exp(-2 zeta r)) / 4 carried left of -r:

        q <  s        ->  log(2 q / cosh(zeta r)) / zeta
        s <= q <= 1-s ->  asinh((2 q - 1) exp(zeta r)) / zeta
        q >  1-s      ->  -log(2 (1 - q) / cosh(zeta r)) / zeta
    """
    if zeta <= 0.0 or r < 0.0:
        raise DomainError("need zeta > 0 and r >= 0")
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0.0) or np.any(q >= 1.0):
        raise DomainError("quantile argument must lie in the open interval (0, 1)")
    s = 0.25 * (1.0 + np.exp(-2.0 * zeta * r))
    # log(cosh(t)) computed overflow-safe for large zeta * r.
    t = zeta * r
    log_cosh = t + np.log1p(np.exp(-2.0 * t)) - np.log(2.0)
    left = (np.log(2.0 * np.minimum(q, s)) - log_cosh) / zeta
    mid_arg = (2.0 * q - 1.0) * np.exp(np.minimum(t, 700.0))
    mid = np.arcsinh(mid_arg) / zeta
    right = -(np.log(2.0 * np.minimum(1.0 - q, s)) - log_cosh) / zeta
    out = np.where(q < s, left, np.where(q <= 1.0 - s, mid, right))
    return out if out.ndim else float(out)
