"""Online stage: multistart quasi-Newton minimization of the reduced energy.

A query is a delta potential (charges z at positions x).  The reduced model
evaluates the Rayleigh quotient of the barycenter-family mixture at weights
lam, which has a closed form in the component distances: with zeta the
combined scale, rbar_k the component centers, d_kl = |rbar_k - rbar_l| and
t = zeta d,

    gram   G+ = sum_kl w_k w_l (1 + t_kl) exp(-t_kl)      (L2 inner products)
    kinet  G- = sum_kl w_k w_l (1 - t_kl) exp(-t_kl)      (derivative Grams)
    attr   a_m = sum_k w_k exp(-zeta |rbar_k - x_m|)       (value at well m)

    E(lam) = [ zeta^2/2 * G-  -  zeta * sum_m z_m a_m^2 ] / G+.

The a_m enter squared: the potential term of the quadratic form is
-z_m u(x_m)^2, and u(x_m) = (zeta/2) a_m while the L2 norm is (zeta/4) G+.
A quadrature oracle in the tests pins this down: evaluated at the exact
ground-state mixture of the query the formula returns -zeta^2/2 exactly.

The energy is only C^0 in lam where centers cross (the |.| kinks), so the
optimizer runs on a smoothed version with |.| replaced near zero by a
cosine cap, and on a polynomial penalty outside the admissible half-space.
Minima are reported with the unsmoothed energy, which keeps the variational
bound: every reported value is >= the true ground-state energy.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import DomainError, NumericalError
from .greedy import ReducedBasis
from .slater import ExtendedWeightDomain, SlaterMixture

__all__ = [
    "smoothed_abs",
    "smoothed_abs_prime",
    "OnlineConfig",
    "ReducedEnergyModel",
    "reduced_energy",
    "energy_gradient",
    "low_discrepancy_starts",
    "online_minimize",
    "OnlineResult",
]

_PENALTY_CLIP = -1e29


def smoothed_abs(x, eps: float):
    """|x| outside [-eps, eps], a matching cosine cap inside.

    The cap -(2 eps / pi) cos(pi x / (2 eps)) + eps agrees with |x| in
    value, slope and curvature at +-eps, making the result C^2 on R.
    """
    x = np.asarray(x, dtype=float)
    if eps <= 0.0:
        raise DomainError("smoothing width must be positive")
    inside = np.abs(x) <= eps
    out = np.abs(x)
    cap = eps - (2.0 * eps / np.pi) * np.cos((np.pi / (2.0 * eps)) * x)
    return np.where(inside, cap, out)


def smoothed_abs_prime(x, eps: float):
    """Derivative of smoothed_abs: sign outside, sin(pi x / (2 eps)) inside."""
    x = np.asarray(x, dtype=float)
    if eps <= 0.0:
        raise DomainError("smoothing width must be positive")
    inside = np.abs(x) <= eps
    return np.where(inside, np.sin((np.pi / (2.0 * eps)) * x), np.sign(x))


@dataclass(frozen=True)
class OnlineConfig:
    """Knobs of the multistart online search.

    smoothing None means: one ten-thousandth of the basis training interval
    width (falling back to the support-center spread when the basis carries
    no interval).  Starts live in [-box_halfwidth, box_halfwidth]^N
    intersected with the admissible half-space.

    decrease_tol is the relative objective-decrease stop of the descent
    loop.  Minima often sit where two family centers coincide, and there
    the smoothed energy has curvature ~ 1/smoothing; pure gradient-norm
    stopping then burns the whole iteration budget polishing digits that
    do not move the energy.

    workers spreads the independent starts over that many processes;
    None keeps everything in-process.  Results are identical either way,
    the starts being independent and ranked by index-stable rules.
    """

    box_halfwidth: float = 2.0
    starts: int = 2000
    smoothing: float | None = None
    penalty_offset: float = 1e6
    penalty_scale: float = 1e6
    memory: int = 10
    max_iterations: int = 500
    gradient_tol: float = 1e-10
    decrease_tol: float = 1e-12
    start_budget_factor: int = 10
    min_margin: float = 1e-12
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.box_halfwidth <= 0 or self.starts < 1:
            raise DomainError("need a positive start box and at least one start")
        if self.smoothing is not None and self.smoothing <= 0:
            raise DomainError("smoothing width must be positive")
        if self.decrease_tol < 0:
            raise DomainError("decrease tolerance must be nonnegative")
        if self.workers is not None and self.workers < 1:
            raise DomainError("workers must be positive when given")


def _auto_smoothing(basis: ReducedBasis) -> float:
    if basis.training_interval is not None:
        lo, hi = basis.training_interval
        width = hi - lo
    else:
        width = float(np.ptp(basis.support_positions))
    return 1e-4 * max(width, 1e-3)


@dataclass(frozen=True, eq=False)
class ReducedEnergyModel:
    """Reduced Rayleigh quotient of one query over one basis family."""

    support_positions: np.ndarray
    support_weights: np.ndarray
    inverse_scales: np.ndarray
    charges: np.ndarray
    positions: np.ndarray
    smoothing: float
    penalty_offset: float = 1e6
    penalty_scale: float = 1e6

    def __post_init__(self) -> None:
        fix = object.__setattr__
        for name in ("support_positions", "support_weights", "inverse_scales",
                     "charges", "positions"):
            fix(self, name, np.asarray(getattr(self, name), dtype=float))
        R = self.support_positions
        w = self.support_weights
        P, M = w.size, self.positions.size
        i, j = np.triu_indices(P, 1)
        # every distance the energy needs is an affine image of lam: the
        # K = P(P-1)/2 center differences rbar_k - rbar_l, then for each
        # well m the P offsets rbar_k - x_m (well-major order)
        pair_diff = R[i] - R[j]
        fix(self, "_design", np.vstack([pair_diff] + [R] * M))
        fix(self, "_offsets", np.concatenate(
            [np.zeros(i.size), np.repeat(self.positions, P)]))
        fix(self, "_pair_diff", pair_diff)
        fix(self, "_pair_weight", 2.0 * w[i] * w[j])
        fix(self, "_sum_w2", float(w @ w))
        fix(self, "_n_pairs", int(i.size))

    @classmethod
    def for_query(cls, basis: ReducedBasis, charges, positions,
                  smoothing: float | None = None,
                  penalty_offset: float = 1e6,
                  penalty_scale: float = 1e6) -> "ReducedEnergyModel":
        charges = np.asarray(charges, dtype=float).ravel()
        positions = np.asarray(positions, dtype=float).ravel()
        if charges.shape != positions.shape or charges.size == 0:
            raise DomainError("charges and positions must align")
        if np.any(charges <= 0.0):
            raise DomainError("charges must be positive")
        return cls(
            support_positions=basis.support_positions,
            support_weights=basis.support_weights,
            inverse_scales=basis.inverse_scales,
            charges=charges, positions=positions,
            smoothing=_auto_smoothing(basis) if smoothing is None else smoothing,
            penalty_offset=penalty_offset, penalty_scale=penalty_scale)

    @property
    def dim(self) -> int:
        return int(self.inverse_scales.size)

    @property
    def domain(self) -> ExtendedWeightDomain:
        return ExtendedWeightDomain(self.inverse_scales)

    def energy(self, lam) -> float:
        """Unsmoothed reduced energy; raises DomainError outside the domain."""
        lam = np.asarray(lam, dtype=float).ravel()
        p = float(lam @ self.inverse_scales)
        if p <= 0.0:
            raise DomainError("weights leave the admissible half-space")
        return self._value(lam, p, 0.0)

    def smoothed_energy(self, lam) -> float:
        lam = np.asarray(lam, dtype=float).ravel()
        p = float(lam @ self.inverse_scales)
        if p <= 0.0:
            raise DomainError("weights leave the admissible half-space")
        return self._value(lam, p, self.smoothing)

    def _value(self, lam: np.ndarray, p: float, eps: float) -> float:
        zeta = 1.0 / p
        rbar = self.support_positions @ lam
        w = self.support_weights
        diff = rbar[:, None] - rbar[None, :]
        d = np.abs(diff) if eps == 0.0 else smoothed_abs(diff, eps)
        with np.errstate(over="ignore", under="ignore"):
            t = zeta * d
            et = np.exp(-t)
            W = w[:, None] * (w[None, :] * et)
            gplus = float(np.sum(W * (1.0 + t)))
            gminus = float(np.sum(W * (1.0 - t)))
            dm = rbar[:, None] - self.positions[None, :]
            dm = np.abs(dm) if eps == 0.0 else smoothed_abs(dm, eps)
            am = w @ np.exp(-zeta * dm)
            return float((0.5 * zeta * zeta * gminus
                          - zeta * float(self.charges @ (am * am))) / gplus)

    def value_and_grad(self, lam) -> tuple[float, np.ndarray]:
        """Penalized smoothed energy and its exact gradient.

        Outside the half-space: offset + scale * p^10 with p the (negative)
        combined inverse scale, clipped to avoid overflow; the even power
        grows with the violation and its gradient points back inside.

        The in-domain branch is the per-iteration cost of the whole online
        stage, so it works on the precomputed flat pair/well layout: one
        affine map gives every signed distance, one smoothing pass gives
        values and slopes, and pair sums run over the strict upper triangle
        (diagonal terms are the constant smoothed_abs(0) and enter as
        scalars; their slope is zero).
        """
        lam = np.asarray(lam, dtype=float).ravel()
        cvec = self.inverse_scales
        p = float(lam @ cvec)
        if p <= 0.0:
            pc = max(p, _PENALTY_CLIP)
            f = self.penalty_offset + self.penalty_scale * pc**10
            g = (10.0 * self.penalty_scale * pc**9) * cvec
            return f, g

        eps = self.smoothing
        zeta = 1.0 / p
        K = self._n_pairs
        R = self.support_positions
        w = self.support_weights
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            raw = self._design @ lam - self._offsets
            araw = np.abs(raw)
            inside = araw <= eps
            if inside.any():
                arg = (np.pi / (2.0 * eps)) * raw
                d = np.where(inside, eps - (2.0 * eps / np.pi) * np.cos(arg),
                             araw)
                s = np.where(inside, np.sin(arg), np.sign(raw))
            else:
                d = araw
                s = np.sign(raw)
            t = zeta * d
            e = np.exp(-t)

            tp, dp, sp, ep = t[:K], d[:K], s[:K], e[:K]
            wet = self._pair_weight * ep
            swet = wet.sum()
            wt = wet @ tp
            d0 = eps * (1.0 - 2.0 / np.pi)      # smoothed_abs(0)
            t0 = zeta * d0
            base = self._sum_w2 * math.exp(-t0)
            gplus = base * (1.0 + t0) + swet + wt
            gminus = base * (1.0 - t0) + swet - wt

            M = self.positions.size
            em = e[K:].reshape(M, -1)           # (M, P) well-major
            dm = d[K:].reshape(M, -1)
            sm = s[K:].reshape(M, -1)
            am = em @ w
            za = self.charges * am
            attr = za @ am
            energy = (0.5 * zeta * zeta * gminus - zeta * attr) / gplus

            # dt/dlam = dzeta d + zeta s (Delta r); pair terms contract
            # against the precomputed center differences.
            dzeta = -(zeta * zeta) * cvec
            td = tp * dp
            wtd = wet @ td
            wd = wet @ dp
            ud = base * t0 * d0 + wtd
            vd = base * (2.0 - t0) * d0 + 2.0 * wd - wtd
            wts = wet * tp * sp
            g1 = wts @ self._pair_diff
            g2 = (2.0 * (wet * sp) - wts) @ self._pair_diff
            dgplus = -(dzeta * ud + zeta * g1)
            dgminus = -(dzeta * vd + zeta * g2)

            q = em * w                          # (M, P)
            qd_sum = (q * dm).sum(axis=1)
            # da_m/dlam = -(dzeta sum_k q_mk d_mk + zeta sum_k q_mk s_mk R_k)
            dam = -(np.outer(dzeta, qd_sum) + zeta * ((q * sm) @ R).T)
            dattr = 2.0 * dam @ za

            dnum = (zeta * dzeta * gminus + 0.5 * zeta * zeta * dgminus
                    - dzeta * attr - zeta * dattr)
            grad = (dnum - energy * dgplus) / gplus
        return float(energy), grad

    def gradient(self, lam) -> np.ndarray:
        """Gradient of the smoothed energy inside the domain."""
        lam = np.asarray(lam, dtype=float).ravel()
        if float(lam @ self.inverse_scales) <= 0.0:
            raise DomainError("weights leave the admissible half-space")
        return self.value_and_grad(lam)[1]


def reduced_energy(lam, basis: ReducedBasis, charges, positions,
                   smoothed: bool = False,
                   smoothing: float | None = None) -> float:
    """Reduced Rayleigh quotient at weights lam (unsmoothed by default)."""
    model = ReducedEnergyModel.for_query(basis, charges, positions,
                                         smoothing=smoothing)
    return model.smoothed_energy(lam) if smoothed else model.energy(lam)


def energy_gradient(lam, basis: ReducedBasis, charges, positions,
                    smoothing: float | None = None) -> np.ndarray:
    """Gradient of the smoothed reduced energy at weights lam."""
    model = ReducedEnergyModel.for_query(basis, charges, positions,
                                         smoothing=smoothing)
    return model.gradient(lam)


def low_discrepancy_starts(n: int, box_halfwidth: float, count: int,
                           domain: ExtendedWeightDomain,
                           budget_factor: int = 10) -> np.ndarray:
    """First admissible points of an unscrambled Sobol sequence in the box.

    Points are drawn in power-of-two blocks (preserving the sequence's
    balance), scaled to [-B, B]^n, and filtered to the open half-space.
    Raises NumericalError if budget_factor * count draws do not yield
    count admissible points (degenerate domain).
    """
    if n < 1 or count < 1:
        raise DomainError("need n >= 1 and count >= 1")
    if domain.dim != n:
        raise DomainError("domain dimension disagrees with n")
    eng = qmc.Sobol(d=n, scramble=False)
    block = 1 << max(8, int(np.ceil(np.log2(count))))
    budget = budget_factor * count
    taken: list[np.ndarray] = []
    have = 0
    drawn = 0
    while have < count:
        if drawn >= budget:
            raise NumericalError(
                f"start budget exhausted: {have}/{count} admissible points "
                f"after {drawn} draws")
        pts = eng.random(min(block, budget - drawn))
        drawn += pts.shape[0]
        lam = (2.0 * pts - 1.0) * box_halfwidth
        keep = lam @ domain.inverse_scales > 0.0
        good = lam[keep]
        taken.append(good)
        have += good.shape[0]
    return np.concatenate(taken)[:count]


@dataclass(frozen=True, eq=False)
class OnlineResult:
    """Best minimizer over all starts plus the full per-start record.

    energies holds the unsmoothed energy at each start's final point, +inf
    for starts that did not converge or ended outside the half-space;
    statuses are the raw optimizer flags (0 converged, 1 iteration limit,
    2 line-search stop).
    """

    lambda_star: np.ndarray
    energy: float
    mixture: SlaterMixture
    starts_converged: int
    best_start: int
    starts: np.ndarray = field(repr=False)
    minimizers: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    statuses: np.ndarray = field(repr=False)

    def records(self):
        """Yield (start, minimizer, energy, status) per start, in order."""
        for k in range(self.starts.shape[0]):
            yield (self.starts[k], self.minimizers[k],
                   float(self.energies[k]), int(self.statuses[k]))


def _descend_block(model: ReducedEnergyModel, starts: np.ndarray,
                   options: dict, min_margin: float):
    """Run the quasi-Newton descent for a block of starts.

    Module-level so a process pool can ship it; returns (minimizers,
    energies, statuses) with +inf energy for ineligible starts.
    """
    L = starts.shape[0]
    minimizers = np.empty_like(starts)
    energies = np.full(L, np.inf)
    statuses = np.empty(L, dtype=int)
    cvec = model.inverse_scales
    for k in range(L):
        res = optimize.minimize(model.value_and_grad, starts[k], jac=True,
                                method="L-BFGS-B", options=options)
        minimizers[k] = res.x
        statuses[k] = res.status
        ok = res.status == 0 or (res.status == 2 and np.isfinite(res.fun))
        if ok and float(res.x @ cvec) >= min_margin:
            e = model.energy(res.x)
            if np.isfinite(e):
                energies[k] = e
    return minimizers, energies, statuses


def online_minimize(basis: ReducedBasis, charges, positions,
                    config: OnlineConfig = OnlineConfig()) -> OnlineResult:
    """Multistart quasi-Newton minimization of the reduced energy.

    Each Sobol start descends the penalized smoothed energy with a
    limited-memory quasi-Newton method.  A start is eligible when the
    optimizer converged (or stalled in a line search at a finite value) and
    its final point keeps a positive half-space margin; eligible starts are
    ranked by unsmoothed energy, ties by lowest start index.  Reporting the
    unsmoothed value keeps the variational bound against the true ground
    state.  config.workers > 1 fans the starts out over processes without
    changing any result.

    Raises:
        NumericalError: when no start is eligible.
    """
    model = ReducedEnergyModel.for_query(
        basis, charges, positions, smoothing=config.smoothing,
        penalty_offset=config.penalty_offset,
        penalty_scale=config.penalty_scale)
    n = basis.size
    starts = low_discrepancy_starts(n, config.box_halfwidth, config.starts,
                                    basis.domain, config.start_budget_factor)
    L = starts.shape[0]
    options = {"maxcor": config.memory,
               "maxiter": config.max_iterations,
               "gtol": config.gradient_tol,
               "ftol": config.decrease_tol}
    workers = 1 if config.workers is None else min(config.workers, L)
    if workers > 1:
        blocks = np.array_split(np.arange(L), workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                _descend_block, [model] * len(blocks),
                [starts[b] for b in blocks], [options] * len(blocks),
                [config.min_margin] * len(blocks)))
        minimizers = np.concatenate([p[0] for p in parts])
        energies = np.concatenate([p[1] for p in parts])
        statuses = np.concatenate([p[2] for p in parts])
    else:
        minimizers, energies, statuses = _descend_block(
            model, starts, options, config.min_margin)
    eligible = int(np.sum(np.isfinite(energies)))
    if eligible == 0:
        counts = {int(s): int(np.sum(statuses == s)) for s in np.unique(statuses)}
        raise NumericalError(f"no eligible start out of {L}; statuses {counts}")
    best = int(np.argmin(energies))
    lam_star = minimizers[best].copy()
    return OnlineResult(
        lambda_star=lam_star, energy=float(energies[best]),
        mixture=basis.member(lam_star), starts_converged=eligible,
        best_start=best, starts=starts, minimizers=minimizers,
        energies=energies, statuses=statuses)
