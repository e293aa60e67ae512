"""Exact ground states of -1/2 u'' - sum_m z_m delta(x - r_m) u = E u.

The ground state of the 1D Schrodinger operator with M attractive Dirac
wells is an M-component Slater mixture sharing a single scale zeta, with
energy E = -zeta**2 / 2.  Matching the delta jump conditions turns the
eigenproblem into a finite one: zeta is the unique scalar at which the
positive M x M matrix

    B(zeta)[m, k] = (z_m / zeta) * exp(-zeta * |r_m - r_k|)

has Perron eigenvalue 1, and the mixture weights are the normalized Perron
eigenvector.  For the symmetric two-well case the scalar equation
zeta = z * (1 + exp(-2 zeta r)) has the closed-form solution
zeta = z + W(2 z r exp(-2 z r)) / (2 r) with W the principal Lambert branch.

A crude finite-difference eigensolver over a uniform grid is included as an
independent cross-check route; it never feeds the closed-form path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded
from scipy.optimize import brentq

from .errors import DomainError, NumericalError
from .slater import Slater, SlaterMixture

__all__ = [
    "GroundState",
    "lambert_w0",
    "solve_symmetric_dimer",
    "solve_ground_state",
    "grid_eigensolver",
]

_RESIDUAL_TOL = 1e-10


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function for scalar x >= -1/e.

    Uses a branch-point series, a log-based guess, or a small-argument series
    to start, then Halley iterations (Newton with a curvature correction) on
    w * exp(w) - x until the residual satisfies
    |w exp(w) - x| <= 1e-14 * |x| for x <= 1, and the equivalent
    logarithmic residual |w + log w - log x| <= 1e-13 * max(1, log x)
    for larger arguments (there w carries the precision, and the product
    w exp(w) amplifies its last bit by a factor w).

    The tolerance is relative to |x| also for small arguments: callers
    divide W(y) by quantities comparable with y (the coincident-well limit
    of the two-well scale formula), so an absolute floor would let a large
    relative error through.
    """
    x = float(x)
    branch_point = -np.exp(-1.0)
    if not np.isfinite(x) or x < branch_point - 1e-15:
        raise DomainError(f"lambert_w0 defined for finite x >= -1/e, got {x}")
    x = max(x, branch_point)
    if x == branch_point:
        return -1.0
    if x == 0.0:
        return 0.0

    if x < -0.25:
        rho = np.sqrt(2.0 * (np.e * x + 1.0))
        w = -1.0 + rho - rho**2 / 3.0 + 11.0 * rho**3 / 72.0
    elif x < 1.0:
        w = x * (1.0 - x + 1.5 * x * x) / (1.0 + 0.5 * x)
        w = max(w, -0.99)
    else:
        lx = np.log(x)
        llx = np.log(lx) if lx > 1.0 else 0.0
        w = lx - llx

    if x > 1.0:
        # Iterate on w + log(w) = log(x); overflow-free for any float x.
        lx = np.log(x)
        for _ in range(100):
            f = w + np.log(w) - lx
            w_next = w - f * w / (w + 1.0)
            if abs(w_next - w) <= 1e-16 * abs(w_next):
                w = w_next
                break
            w = w_next
        residual = w + np.log(w) - lx
        tol = 1e-13 * max(1.0, lx)
    else:
        tol = 1e-14 * abs(x)
        for _ in range(100):
            ew = np.exp(w)
            f = w * ew - x
            if abs(f) <= tol:
                break
            wp1 = w + 1.0
            denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
            w = w - f / denom
        residual = w * np.exp(w) - x
    if abs(residual) > tol:
        raise NumericalError(f"lambert_w0 residual {residual:.3e} above {tol:.3e}")
    return float(w)


@dataclass(frozen=True)
class GroundState:
    """Ground state of an M-well configuration as a common-scale mixture."""

    charges: np.ndarray
    positions: np.ndarray
    zeta: float
    weights: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        z = np.array(self.charges, dtype=float).ravel()
        r = np.array(self.positions, dtype=float).ravel()
        w = np.array(self.weights, dtype=float).ravel()
        if z.size != r.size or z.size != w.size or z.size == 0:
            raise DomainError("charges, positions and weights must share a length >= 1")
        if np.any(z <= 0.0):
            raise DomainError("charges must be positive")
        for a in (z, r, w):
            a.setflags(write=False)
        object.__setattr__(self, "charges", z)
        object.__setattr__(self, "positions", r)
        object.__setattr__(self, "weights", w)

    @property
    def energy(self) -> float:
        return -0.5 * self.zeta**2

    def mixture(self) -> SlaterMixture:
        comps = tuple(Slater(self.zeta, float(r)) for r in self.positions)
        return SlaterMixture(comps, self.weights)

    def matching_residual(self) -> float:
        """Max violation of pi_m zeta = z_m sum_k pi_k exp(-zeta |r_m - r_k|)."""
        d = np.abs(self.positions[:, None] - self.positions[None, :])
        rhs = self.charges * (np.exp(-self.zeta * d) @ self.weights)
        return float(np.max(np.abs(self.weights * self.zeta - rhs)))


def _ground_state(z: np.ndarray, r: np.ndarray, zeta: float,
                  weights: np.ndarray) -> GroundState:
    gs = GroundState(z, r, float(zeta), weights)
    res = gs.matching_residual()
    if res > _RESIDUAL_TOL:
        raise NumericalError(f"jump-condition residual {res:.3e} above {_RESIDUAL_TOL}")
    return gs


def solve_symmetric_dimer(z: float, r: float) -> GroundState:
    """Ground state for equal charges z at positions -r and +r, in closed form.

    The scale solves the fixed point zeta = z * (1 + exp(-2 zeta r)); the
    weights are (1/2, 1/2).  For r = 0 the wells coincide and zeta = 2 z.
    """
    if not (np.isfinite(z) and z > 0.0):
        raise DomainError("charge must be positive and finite")
    if not (np.isfinite(r) and r >= 0.0):
        raise DomainError("half separation must be nonnegative and finite")
    if r == 0.0:
        zeta = 2.0 * z
    else:
        y = 2.0 * z * r * np.exp(-2.0 * z * r)
        zeta = z + lambert_w0(y) / (2.0 * r)
    return _ground_state(np.array([z, z]), np.array([-r, r]), zeta,
                         np.array([0.5, 0.5]))


def _perron(mat: np.ndarray, v0: np.ndarray,
            tol: float = 1e-14, max_iter: int = 200_000) -> tuple[float, np.ndarray]:
    """Perron value and L1-normalized eigenvector of a positive matrix.

    Power iteration with relative tolerance tol; on a (rare) stall from a
    near-degenerate spectral gap, falls back to a symmetrized dense
    eigendecomposition, which gives the same pair.
    """
    v = v0 / v0.sum()
    rho = 0.0
    for _ in range(max_iter):
        y = mat @ v
        rho_new = float(y.sum())
        y /= rho_new
        if np.max(np.abs(y - v)) <= tol and abs(rho_new - rho) <= tol * rho_new:
            return rho_new, y
        v, rho = y, rho_new
    w, vecs = np.linalg.eigh(0.5 * (mat + mat.T)) if np.allclose(mat, mat.T) else (None, None)
    if w is None:
        w_all, v_all = np.linalg.eig(mat)
        i = int(np.argmax(w_all.real))
        vec = np.abs(v_all[:, i].real)
        return float(w_all[i].real), vec / vec.sum()
    vec = np.abs(vecs[:, -1])
    return float(w[-1]), vec / vec.sum()


def solve_ground_state(charges, positions) -> GroundState:
    """Ground state for arbitrary positive charges at arbitrary positions.

    The Perron eigenvalue of B(zeta) decreases strictly in zeta, equals or
    exceeds 1 at zeta = max(z) (the diagonal entry is 1 there) and is at most
    1 at zeta = sum(z) (the similar symmetric matrix has trace sum(z)/zeta),
    so the root is bracketed and found by Brent iteration.
    """
    z = np.asarray(charges, dtype=float).ravel()
    r = np.asarray(positions, dtype=float).ravel()
    if z.size != r.size or z.size == 0:
        raise DomainError("need matching numbers of charges and positions")
    if not np.all(np.isfinite(z)) or np.any(z <= 0.0):
        raise DomainError("charges must be positive and finite")
    if not np.all(np.isfinite(r)):
        raise DomainError("positions must be finite")
    if z.size == 1:
        return _ground_state(z, r, float(z[0]), np.array([1.0]))

    dist = np.abs(r[:, None] - r[None, :])
    state = {"v": np.full(z.size, 1.0 / z.size)}

    def perron_gap(zeta: float) -> float:
        mat = (z[:, None] / zeta) * np.exp(-zeta * dist)
        rho, v = _perron(mat, state["v"])
        state["v"] = v
        return rho - 1.0

    lo = float(z.max()) * (1.0 - 1e-12)
    hi = float(z.sum()) * (1.0 + 1e-12)
    f_lo = perron_gap(lo)
    f_hi = perron_gap(hi)
    if f_lo < 0.0 or f_hi > 0.0:
        # Round-off can push an endpoint marginally past the root (e.g. all
        # wells coincident, where zeta = sum(z) exactly).
        if abs(f_lo) < 1e-12:
            zeta = lo
        elif abs(f_hi) < 1e-12:
            zeta = hi
        else:
            raise NumericalError("Perron root not bracketed; invalid configuration")
    else:
        zeta = brentq(perron_gap, lo, hi, xtol=1e-15 * hi, rtol=8.9e-16)
    mat = (z[:, None] / zeta) * np.exp(-zeta * dist)
    _, weights = _perron(mat, state["v"])
    return _ground_state(z, r, float(zeta), weights)


def grid_eigensolver(charges, positions, half_width: float,
                     npoints: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Lowest eigenpair of the finite-difference discretization.

    Second-order central differences for the Laplacian on a uniform grid over
    [-half_width, half_width] with zero boundary values; each delta well is
    collapsed onto its nearest grid node with weight z/h.  The lowest pair is
    found by inverse iteration with a fixed shift below the spectrum.

    Args:
        charges: well strengths z_m > 0.
        positions: well centers, strictly inside (-half_width, half_width).
        half_width: half width of the computational box.
        npoints: number of interior grid nodes (>= 3).

    Returns:
        (energy, grid, eigenvector) with the eigenvector positive and
        normalized to unit discrete L1 norm (sum u h = 1).
    """
    z = np.asarray(charges, dtype=float).ravel()
    r = np.asarray(positions, dtype=float).ravel()
    if npoints < 3:
        raise DomainError("need at least 3 grid nodes")
    if np.any(np.abs(r) >= half_width):
        raise DomainError("wells must lie strictly inside the box")
    x = np.linspace(-half_width, half_width, npoints + 2)[1:-1]
    h = x[1] - x[0]
    potential = np.zeros(npoints)
    for zm, rm in zip(z, r):
        idx = int(np.argmin(np.abs(x - rm)))
        potential[idx] += zm / h

    diag = 1.0 / h**2 - potential
    off = -0.5 / h**2

    sigma = -float(z.sum()) ** 2 - 1.0
    for _ in range(5):
        bands = np.vstack([np.full(npoints, off), diag - sigma])
        bands[0, 0] = 0.0
        try:
            chol_ok = True
            v = solveh_banded(bands, np.ones(npoints), lower=False)
        except np.linalg.LinAlgError:
            chol_ok = False
        if chol_ok:
            break
        sigma *= 2.0
    else:
        raise NumericalError("could not place the inverse-iteration shift below the spectrum")

    def apply_h(u: np.ndarray) -> np.ndarray:
        out = diag * u
        out[:-1] += off * u[1:]
        out[1:] += off * u[:-1]
        return out

    for _ in range(2000):
        v /= np.linalg.norm(v)
        hv = apply_h(v)
        theta = float(v @ hv)
        resid = float(np.linalg.norm(hv - theta * v))
        if resid <= 1e-10 * max(1.0, abs(theta)):
            break
        v = solveh_banded(bands, v, lower=False)
    else:
        raise NumericalError(f"inverse iteration stalled at residual {resid:.3e}")
    if v.sum() < 0.0:
        v = -v
    v = np.maximum(v, 0.0) if np.all(v > -1e-12) else v
    v = v / (v.sum() * h)
    return theta, x, v
