"""Offline stage: greedy snapshot selection under the mixture distance.

The dictionary of candidate approximations is the barycenter family of the
selected snapshots with the component coupling frozen at uniform weights.
Projecting a target mixture onto that family minimizes, over barycentric
weights lam and couplings w between the target weights and the frozen plan
weights, the transported squared component distance

    sum_cells w_cell * W2(target component, barycenter component)**2.

For fixed w the inner problem is an explicit convex quadratic in lam, since
positions and inverse scales of Slater barycenters are linear in lam.  The
map w -> min_lam is a minimum of functions affine in w, hence concave, so
the outer minimum sits at a vertex of the transportation polytope and the
projection reduces to a vertex sweep with one linear solve per vertex.

Unconstrained minimizers can leave the admissible half-space (combined
inverse scale must stay positive); those vertices are re-solved on a
slightly shrunk copy of the half-space, which has a one-multiplier KKT
solution in closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError, SchemaError, VertexBudgetError
from .slater import ExtendedWeightDomain, Slater, SlaterMixture
from .transport import MultiMarginalPlan, enumerate_vertices, multimarginal_plan, mw2

__all__ = [
    "Snapshot",
    "ReducedBasis",
    "ProjectionQuadratic",
    "ProjectionResult",
    "build_reduced_basis",
    "assemble_projection_qp",
    "projection_error",
    "greedy_select",
    "basis_to_dict",
    "basis_from_dict",
    "save_basis",
    "load_basis",
    "ARTIFACT_SCHEMA_VERSION",
]

ARTIFACT_SCHEMA_VERSION = 1
_COMMON_SCALE_TOL = 1e-12
_DEFAULT_SHRINK = 1e-8
_PD_TOL = 1e-10
_DEFAULT_BUDGET = 2_000_000


@dataclass(frozen=True)
class Snapshot:
    """A basis element: a common-scale Slater mixture, optionally tagged with
    the scalar parameter it was solved at."""

    mixture: SlaterMixture
    param: float | None = None

    def __post_init__(self) -> None:
        scales = self.mixture.scales
        if np.max(scales) - np.min(scales) > _COMMON_SCALE_TOL * np.max(scales):
            raise DomainError("snapshot components must share a single scale")

    @property
    def zeta(self) -> float:
        return float(self.mixture.scales[0])


@dataclass(frozen=True, eq=False)
class ReducedBasis:
    """Selected snapshots plus the frozen coupling and projection geometry.

    support_positions holds, for each supported multi-index of the frozen
    plan, the component centers it picks from the snapshots (rows: plan
    support, columns: snapshots); support_weights are the plan weights.
    A is the weight-quadratic's Hessian shared by every projection onto
    this basis,

        A = sum_k w*_k R_k R_k^T + 2 c c^T,

    with R_k the k-th row of support_positions and c the inverse scales.
    """

    snapshots: tuple[Snapshot, ...]
    lam_bar: np.ndarray
    wstar: MultiMarginalPlan
    support_positions: np.ndarray = field(repr=False)
    support_weights: np.ndarray = field(repr=False)
    inverse_scales: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    A_inv: np.ndarray = field(repr=False)
    charges: np.ndarray | None = None
    training_interval: tuple[float, float] | None = None
    error_history: tuple[dict, ...] = ()

    @property
    def size(self) -> int:
        return len(self.snapshots)

    @property
    def domain(self) -> ExtendedWeightDomain:
        return ExtendedWeightDomain(self.inverse_scales)

    def mixtures(self) -> list[SlaterMixture]:
        return [s.mixture for s in self.snapshots]

    def params(self) -> list[float | None]:
        return [s.param for s in self.snapshots]

    def member(self, lam) -> SlaterMixture:
        """The barycenter-family mixture at weights lam (plan weights kept)."""
        lam = np.asarray(lam, dtype=float).ravel()
        if lam.size != self.size:
            raise DomainError("one weight per snapshot required")
        inv = float(self.inverse_scales @ lam)
        if inv <= 0.0:
            raise DomainError("weights leave the admissible half-space")
        zeta = 1.0 / inv
        centers = self.support_positions @ lam
        comps = tuple(Slater(zeta, float(r)) for r in centers)
        return SlaterMixture(comps, self.support_weights.copy()).merged()

    def prefix(self, n: int) -> "ReducedBasis":
        """Reduced basis rebuilt from the first n snapshots (greedy order)."""
        if not 1 <= n <= self.size:
            raise DomainError(f"prefix size {n} outside 1..{self.size}")
        if n == self.size:
            return self
        return build_reduced_basis(self.snapshots[:n], charges=self.charges,
                                   training_interval=self.training_interval)

    def _subset_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """Subset sums of w*_i R_i and w*_i over plan-support rows.

        SR[mask] = sum_{i in mask} w*_i R_i, ssum[mask] likewise for the
        weights; computed once per basis and cached, reused by the
        vectorized two-column vertex sweep for every target.
        """
        cached = getattr(self, "_tables", None)
        if cached is not None:
            return cached
        P = self.support_weights.size
        n = self.size
        SR = np.zeros((1 << P, n))
        ssum = np.zeros(1 << P)
        for i in range(P):
            bit = 1 << i
            lower = np.arange(bit)
            SR[bit | lower] = SR[lower] + self.support_weights[i] * self.support_positions[i]
            ssum[bit | lower] = ssum[lower] + self.support_weights[i]
        object.__setattr__(self, "_tables", (SR, ssum))
        return SR, ssum


def build_reduced_basis(snapshots, charges=None, training_interval=None,
                        error_history=(), pd_tol: float = _PD_TOL) -> ReducedBasis:
    """Assemble the frozen coupling and projection quadratic for snapshots.

    The coupling is the optimal multimarginal plan at uniform weights.  The
    Hessian A must be positive definite (smallest eigenvalue above pd_tol
    relative to the largest); a degenerate snapshot set is rejected rather
    than regularized.
    """
    snaps = tuple(s if isinstance(s, Snapshot) else Snapshot(s) for s in snapshots)
    n = len(snaps)
    if n < 1:
        raise DomainError("need at least one snapshot")
    lam_bar = np.full(n, 1.0 / n)
    mixtures = [s.mixture for s in snaps]
    wstar = multimarginal_plan(mixtures, lam_bar)
    support_positions = np.array(
        [[mixtures[i].components[idx[i]].r for i in range(n)]
         for idx, _ in wstar.support])
    support_weights = np.array([w for _, w in wstar.support])
    inverse_scales = np.array([1.0 / s.zeta for s in snaps])
    return _finish_basis(snaps, lam_bar, wstar, support_positions,
                         support_weights, inverse_scales, charges,
                         training_interval, error_history, pd_tol)


def _finish_basis(snaps, lam_bar, wstar, support_positions, support_weights,
                  inverse_scales, charges, training_interval, error_history,
                  pd_tol, A=None, A_inv=None) -> ReducedBasis:
    if A is None:
        A = 2.0 * np.outer(inverse_scales, inverse_scales)
        for row, w in zip(support_positions, support_weights):
            A += w * np.outer(row, row)
        eigs = np.linalg.eigvalsh(A)
        if eigs[0] <= pd_tol * max(eigs[-1], 1.0):
            raise NumericalError(
                "projection Hessian ill conditioned: eigenvalues "
                f"{eigs[0]:.3e} .. {eigs[-1]:.3e}")
        A_inv = np.linalg.inv(A)
    return ReducedBasis(
        snapshots=snaps, lam_bar=np.asarray(lam_bar, dtype=float),
        wstar=wstar, support_positions=support_positions,
        support_weights=support_weights, inverse_scales=inverse_scales,
        A=A, A_inv=A_inv,
        charges=None if charges is None else np.asarray(charges, dtype=float),
        training_interval=None if training_interval is None else
        (float(training_interval[0]), float(training_interval[1])),
        error_history=tuple(error_history))


@dataclass(frozen=True, eq=False)
class ProjectionQuadratic:
    """Per-target data of min over couplings of lam^T A lam + b_w^T lam + c.

    b_cells[k, m] is the linear coefficient contributed by coupling mass in
    cell (plan row k, target component m):

        b_{k,m} = -2 (t_m R_k + 2 s_m c),

    with t_m, s_m the target component position and inverse scale, and
    c = sum_m pi_m (t_m**2 + 2 s_m**2).
    """

    A: np.ndarray
    A_inv: np.ndarray
    c: float
    b_cells: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    inverse_scales: np.ndarray
    target_positions: np.ndarray
    target_inverse_scales: np.ndarray

    def value(self, lam, plan_matrix) -> float:
        """Objective at explicit weights and coupling (oracle hook)."""
        lam = np.asarray(lam, dtype=float)
        b = np.einsum("km,kmn->n", np.asarray(plan_matrix, dtype=float),
                      self.b_cells)
        return float(lam @ self.A @ lam + b @ lam + self.c)


def assemble_projection_qp(target: SlaterMixture,
                           basis: ReducedBasis) -> ProjectionQuadratic:
    """Quadratic data for projecting one target mixture onto the basis family."""
    tpos = target.centers
    tinv = 1.0 / target.scales
    c_scalar = float(np.sum(target.weights * (tpos**2 + 2.0 * tinv**2)))
    R = basis.support_positions
    cvec = basis.inverse_scales
    b_cells = -2.0 * (tpos[None, :, None] * R[:, None, :]
                      + 2.0 * tinv[None, :, None] * cvec[None, None, :])
    return ProjectionQuadratic(
        A=basis.A, A_inv=basis.A_inv, c=c_scalar, b_cells=b_cells,
        row_marginal=basis.support_weights, col_marginal=target.weights,
        inverse_scales=cvec, target_positions=tpos, target_inverse_scales=tinv)


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    """Outcome of one vertex-sweep projection."""

    error: float
    error_sq: float
    lam: np.ndarray
    plan_matrix: np.ndarray
    vertex_count: int
    fallback_used: bool


def projection_error(target: SlaterMixture, basis: ReducedBasis,
                     shrink: float = _DEFAULT_SHRINK,
                     budget: int = _DEFAULT_BUDGET) -> ProjectionResult:
    """Squared-distance projection of a target onto the barycenter family.

    Sweeps every vertex of the transportation polytope between the frozen
    plan weights and the target weights.  Each vertex contributes the
    unconstrained quadratic minimum; vertices whose minimizer has
    nonpositive combined inverse scale are corrected to the half-space
    boundary shrunk by `shrink`.  Ties pick the first vertex in sweep
    order.  The winning cost is re-evaluated as the transported sum of
    squares, which stays exact when a target is reproduced to rounding
    level (the assembled quadratic would cancel to ~1e-15 there and its
    square root would report ~1e-7).

    Two-component targets (the common case: every ground state of a
    two-delta potential) take a vectorized sweep over (doubled row, subset)
    vertex labels; other shapes fall back to explicit vertex enumeration.
    """
    qp = assemble_projection_qp(target, basis)
    a = qp.row_marginal
    pi = qp.col_marginal
    P = a.size
    cinv = qp.inverse_scales
    Ainv_c = qp.A_inv @ cinv
    c_quad = float(cinv @ Ainv_c)
    if c_quad <= 0.0:
        raise NumericalError("half-space quadratic form not positive")

    if pi.size == 2 and P >= 2:
        if P * (1 << (P - 1)) > budget:
            raise VertexBudgetError(
                f"two-column vertex count {P * (1 << (P - 1))} "
                f"exceeds budget {budget}")
        b_all, meta = _two_column_sweep(qp, basis)
        mats = None
    else:
        plans = enumerate_vertices(a, pi, budget=budget)
        mats = np.array([p.matrix for p in plans])
        b_all = np.einsum("vkm,kmn->vn", mats, qp.b_cells)
        meta = None

    G = b_all @ qp.A_inv
    val_u = qp.c - 0.25 * np.einsum("vn,vn->v", G, b_all)
    lam_u = -0.5 * G
    margin_u = lam_u @ cinv
    violating = margin_u <= 0.0
    val_eff = val_u.copy()
    if np.any(violating):
        gap = shrink - margin_u[violating]
        val_eff[violating] = val_u[violating] + gap * gap / c_quad

    best = int(np.argmin(val_eff))
    fallback = bool(violating[best])
    lam_best = lam_u[best].copy()
    if fallback:
        lam_best += ((shrink - margin_u[best]) / c_quad) * Ainv_c
    if mats is not None:
        plan_matrix = mats[best]
    else:
        plan_matrix = _two_column_matrix(meta[best], a, P)
    # re-evaluate the winner in residual form: the assembled quadratic
    # cancels catastrophically near zero, while this weighted sum of
    # squares is exact there
    pos_gap = (basis.support_positions @ lam_best)[:, None] \
        - qp.target_positions[None, :]
    scale_gap = float(cinv @ lam_best) - qp.target_inverse_scales[None, :]
    err_sq = float(np.sum(plan_matrix
                          * (pos_gap ** 2 + 2.0 * scale_gap ** 2)))
    return ProjectionResult(
        error=float(np.sqrt(err_sq)), error_sq=err_sq, lam=lam_best,
        plan_matrix=plan_matrix, vertex_count=int(val_eff.size),
        fallback_used=fallback)


def _two_column_sweep(qp: ProjectionQuadratic, basis: ReducedBasis):
    """Vectorized vertex evaluation for two-component targets.

    A vertex of the P x 2 polytope fixes a doubled row t and the subset S of
    other rows sent to column 0; its balancing flow is w_t0 = pi_0 - a(S),
    feasible when 0 <= w_t0 <= a_t.  The linear term decomposes as

        b_w = base + alpha SR[S] + beta a(S) c + w_t0 (alpha R_t + beta c)

    with alpha = -2 (t_0 - t_1), beta = -4 (s_0 - s_1) and SR, a(.) the
    cached subset tables of the basis, so the whole sweep is a few
    gather-and-axpy passes over arrays, no per-vertex Python objects.
    """
    a = qp.row_marginal
    pi = qp.col_marginal
    P = a.size
    SR, ssum = basis._subset_tables()
    t0, t1 = qp.target_positions
    s0, s1 = qp.target_inverse_scales
    alpha = -2.0 * (t0 - t1)
    beta = -4.0 * (s0 - s1)
    cvec = qp.inverse_scales
    R = basis.support_positions
    base = -2.0 * t1 * (a @ R) - 4.0 * s1 * cvec
    delta = alpha * R + beta * cvec[None, :]

    all_masks = np.arange(1 << P)
    b_parts = []
    meta_parts = []
    for t in range(P):
        sub = all_masks[(all_masks >> t) & 1 == 0]
        w_t0 = pi[0] - ssum[sub]
        feas = (w_t0 >= -1e-12) & (w_t0 <= a[t] + 1e-12)
        sub = sub[feas]
        if sub.size == 0:
            continue
        w_t0 = np.clip(w_t0[feas], 0.0, a[t])
        bw = (base + alpha * SR[sub] + beta * ssum[sub, None] * cvec
              + w_t0[:, None] * delta[t])
        b_parts.append(bw)
        meta_parts.append(np.column_stack(
            [np.full(sub.size, float(t)), sub.astype(float), w_t0]))
    if not b_parts:
        raise NumericalError("no feasible vertex in two-column sweep")
    return np.concatenate(b_parts), np.concatenate(meta_parts)


def _two_column_matrix(meta_row: np.ndarray, a: np.ndarray, P: int) -> np.ndarray:
    """Materialize the coupling matrix of one (t, subset, flow) vertex label."""
    t = int(meta_row[0])
    mask = int(meta_row[1])
    w_t0 = float(meta_row[2])
    w = np.zeros((P, 2))
    for i in range(P):
        if i == t:
            continue
        if (mask >> i) & 1:
            w[i, 0] = a[i]
        else:
            w[i, 1] = a[i]
    w[t, 0] = w_t0
    w[t, 1] = a[t] - w_t0
    return w


def greedy_select(candidates, n_max: int, charges=None, training_interval=None,
                  shrink: float = _DEFAULT_SHRINK, budget: int = _DEFAULT_BUDGET,
                  callback=None) -> ReducedBasis:
    """Greedy basis construction over a finite training set of snapshots.

    Starts from the two most distant snapshots under the mixture distance,
    then repeatedly adds the snapshot with the largest projection error onto
    the current family, rebuilding the frozen coupling after each addition.
    Projection errors are recomputed for every candidate at every size,
    including already selected snapshots (whose errors sit at rounding
    level), so the recorded mean runs over the full training set.

    Ties (exactly equal distances or errors) resolve to the lowest index.
    The returned basis carries the per-size error history; callback, if
    given, receives each history entry as it is produced.
    """
    snaps = [s if isinstance(s, Snapshot) else Snapshot(s) for s in candidates]
    T = len(snaps)
    if n_max < 2:
        raise DomainError("greedy selection needs n_max >= 2")
    if n_max > T:
        raise DomainError(f"n_max {n_max} exceeds training set size {T}")

    best_pair, best_d = (0, 1), -1.0
    for i in range(T):
        for j in range(i + 1, T):
            d, _ = mw2(snaps[i].mixture, snaps[j].mixture)
            if d > best_d:
                best_pair, best_d = (i, j), d
    selected = list(best_pair)

    history: list[dict] = []
    while True:
        basis = build_reduced_basis([snaps[i] for i in selected],
                                    charges=charges,
                                    training_interval=training_interval,
                                    error_history=history)
        errors = np.empty(T)
        for t in range(T):
            errors[t] = projection_error(snaps[t].mixture, basis,
                                         shrink=shrink, budget=budget).error
        pick_errors = errors.copy()
        pick_errors[selected] = -np.inf
        pick = int(np.argmax(pick_errors)) if basis.size < n_max else None
        entry = {
            "n": basis.size,
            "max_error": float(np.max(errors)),
            "mean_error": float(np.mean(errors)),
            "max_error_sq": float(np.max(errors) ** 2),
            "mean_error_sq": float(np.mean(errors**2)),
            "selected_index": pick,
            "selected_param": None if pick is None else snaps[pick].param,
        }
        history.append(entry)
        if callback is not None:
            callback(entry)
        if pick is None:
            return build_reduced_basis([snaps[i] for i in selected],
                                       charges=charges,
                                       training_interval=training_interval,
                                       error_history=history)
        selected.append(pick)


def basis_to_dict(basis: ReducedBasis) -> dict:
    """JSON-ready artifact: snapshots, frozen coupling, dense A and A^{-1}."""
    return {
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "charges": None if basis.charges is None else basis.charges.tolist(),
        "training_interval": None if basis.training_interval is None
        else list(basis.training_interval),
        "lam_bar": basis.lam_bar.tolist(),
        "snapshots": [
            {
                "param": s.param,
                "zeta": s.zeta,
                "positions": s.mixture.centers.tolist(),
                "weights": s.mixture.weights.tolist(),
            }
            for s in basis.snapshots
        ],
        "wstar": {
            "shape": list(basis.wstar.shape),
            "value": basis.wstar.value,
            "support": [[list(idx), w] for idx, w in basis.wstar.support],
        },
        "A": basis.A.tolist(),
        "A_inv": basis.A_inv.tolist(),
        "error_history": list(basis.error_history),
    }


def basis_from_dict(data: dict) -> ReducedBasis:
    """Rebuild a ReducedBasis from its artifact dictionary.

    The stored coupling and matrices are reused as is (no LP re-solve) but
    checked for internal consistency: coupling marginals must match the
    snapshot weights and A @ A_inv must be the identity to 1e-8.

    Raises:
        SchemaError: on version mismatch, missing keys, or inconsistent
            stored values.
    """
    try:
        version = data["schema_version"]
    except (TypeError, KeyError) as exc:
        raise SchemaError("artifact missing schema_version") from exc
    if version != ARTIFACT_SCHEMA_VERSION:
        raise SchemaError(
            f"artifact schema_version {version} unsupported "
            f"(expected {ARTIFACT_SCHEMA_VERSION})")
    try:
        snaps = tuple(
            Snapshot(
                SlaterMixture(
                    tuple(Slater(rec["zeta"], r) for r in rec["positions"]),
                    np.array(rec["weights"], dtype=float)),
                param=rec["param"])
            for rec in data["snapshots"])
        lam_bar = np.array(data["lam_bar"], dtype=float)
        wrec = data["wstar"]
        wstar = MultiMarginalPlan(
            shape=tuple(wrec["shape"]), lam=lam_bar,
            support=tuple((tuple(idx), float(w)) for idx, w in wrec["support"]),
            value=float(wrec["value"]))
        A = np.array(data["A"], dtype=float)
        A_inv = np.array(data["A_inv"], dtype=float)
        charges = data["charges"]
        interval = data["training_interval"]
        history = tuple(data["error_history"])
    except (TypeError, KeyError, ValueError) as exc:
        raise SchemaError(f"malformed artifact: {exc}") from exc

    n = len(snaps)
    if lam_bar.shape != (n,) or A.shape != (n, n) or A_inv.shape != (n, n):
        raise SchemaError("artifact dimensions disagree with snapshot count")
    if np.max(np.abs(A @ A_inv - np.eye(n))) > 1e-8:
        raise SchemaError("stored A and A_inv are not inverses")
    for i in range(n):
        if np.max(np.abs(wstar.marginal(i) - snaps[i].mixture.weights)) > 1e-8:
            raise SchemaError(f"coupling marginal {i} disagrees with "
                              "snapshot weights")

    support_positions = np.array(
        [[snaps[i].mixture.components[idx[i]].r for i in range(n)]
         for idx, _ in wstar.support])
    support_weights = np.array([w for _, w in wstar.support])
    inverse_scales = np.array([1.0 / s.zeta for s in snaps])
    return _finish_basis(snaps, lam_bar, wstar, support_positions,
                         support_weights, inverse_scales, charges, interval,
                         history, _PD_TOL, A=A, A_inv=A_inv)


def save_basis(basis: ReducedBasis, path) -> None:
    with open(path, "w") as fh:
        json.dump(basis_to_dict(basis), fh, indent=1)
        fh.write("\n")


def load_basis(path) -> ReducedBasis:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"artifact is not valid JSON: {exc}") from exc
    return basis_from_dict(data)
