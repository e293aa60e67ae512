"""Discrete optimal transport between Slater mixtures.

The mixture distance is the square root of a small transportation LP whose
costs are squared W2 distances between components.  The offline stage also
needs the dual view of that polytope: every vertex of a transportation
polytope is a basic feasible solution supported on a spanning forest of the
bipartite row/column graph, so vertices are enumerated by decoding Prufer
sequences into spanning trees and keeping the feasible flow assignments.

The production LP route is a hand-written transportation simplex (northwest
corner start, Bland's rule with lowest-index tie-breaks) so degenerate
instances resolve deterministically; the multimarginal tensor problem is
flattened and handed to a revised dual simplex.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import DomainError, NumericalError, VertexBudgetError
from .slater import Slater, SlaterMixture, slater_barycenter, w2_slater_sq

__all__ = [
    "TransportPlan",
    "MultiMarginalPlan",
    "solve_transportation_lp",
    "mw2",
    "enumerate_vertices",
    "two_column_vertices",
    "multimarginal_plan",
    "approx_barycenter",
]

_MARGINAL_TOL = 1e-10
_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative coupling matrix with prescribed row and column sums."""

    row_marginal: np.ndarray
    col_marginal: np.ndarray
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        a = np.array(self.row_marginal, dtype=float).ravel()
        b = np.array(self.col_marginal, dtype=float).ravel()
        w = np.array(self.matrix, dtype=float)
        if w.shape != (a.size, b.size):
            raise DomainError("plan shape must match the marginals")
        if np.min(w) < -_FEAS_TOL:
            raise DomainError(f"plan has negative entry {np.min(w)}")
        w = np.maximum(w, 0.0)
        row_err = np.max(np.abs(w.sum(axis=1) - a))
        col_err = np.max(np.abs(w.sum(axis=0) - b))
        if max(row_err, col_err) > _MARGINAL_TOL:
            raise DomainError(
                f"marginal residual {max(row_err, col_err):.3e} above {_MARGINAL_TOL}")
        for arr in (a, b, w):
            arr.setflags(write=False)
        object.__setattr__(self, "row_marginal", a)
        object.__setattr__(self, "col_marginal", b)
        object.__setattr__(self, "matrix", w)

    @property
    def support(self) -> tuple[tuple[int, int], ...]:
        rows, cols = np.nonzero(self.matrix > _FEAS_TOL)
        return tuple(zip(rows.tolist(), cols.tolist()))

    def cost(self, cost_matrix: np.ndarray) -> float:
        return float(np.sum(self.matrix * np.asarray(cost_matrix, dtype=float)))


def _northwest_corner(a: np.ndarray, b: np.ndarray):
    """Initial basic feasible solution; returns (plan, basis cell list)."""
    p, q = a.size, b.size
    w = np.zeros((p, q))
    ra = a.copy()
    cb = b.copy()
    basis: list[tuple[int, int]] = []
    i = j = 0
    while True:
        basis.append((i, j))
        t = min(ra[i], cb[j])
        w[i, j] = t
        ra[i] -= t
        cb[j] -= t
        if i == p - 1 and j == q - 1:
            break
        if j == q - 1:
            i += 1
        elif i == p - 1:
            j += 1
        elif ra[i] <= cb[j]:
            i += 1
        else:
            j += 1
    return w, basis


def _tree_duals(basis: list[tuple[int, int]], cost: np.ndarray,
                p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Dual potentials u, v with u_i + v_j = c_ij on the basis tree."""
    row_adj: list[list[int]] = [[] for _ in range(p)]
    col_adj: list[list[int]] = [[] for _ in range(q)]
    for i, j in basis:
        row_adj[i].append(j)
        col_adj[j].append(i)
    u = np.full(p, np.nan)
    v = np.full(q, np.nan)
    u[0] = 0.0
    stack = [(0, True)]
    while stack:
        node, is_row = stack.pop()
        if is_row:
            for j in row_adj[node]:
                if np.isnan(v[j]):
                    v[j] = cost[node, j] - u[node]
                    stack.append((j, False))
        else:
            for i in col_adj[node]:
                if np.isnan(u[i]):
                    u[i] = cost[i, node] - v[node]
                    stack.append((i, True))
    if np.any(np.isnan(u)) or np.any(np.isnan(v)):
        raise NumericalError("basis is not a spanning tree; duals undefined")
    return u, v


def _tree_cycle(basis: list[tuple[int, int]], enter: tuple[int, int],
                p: int, q: int) -> list[tuple[int, int]]:
    """Alternating cycle closed by the entering cell.

    Returns basis cells along the tree path from the entering cell's column
    back to its row; together with the entering cell they form the unique
    cycle, with signs alternating starting at +1 on the entering cell.
    """
    row_adj: dict[int, list[tuple[int, int]]] = {}
    col_adj: dict[int, list[tuple[int, int]]] = {}
    for i, j in basis:
        row_adj.setdefault(i, []).append((i, j))
        col_adj.setdefault(j, []).append((i, j))
    ei, ej = enter
    # BFS over tree nodes from column ej to row ei; nodes: ('r', i), ('c', j).
    parent: dict[tuple[str, int], tuple[tuple[str, int], tuple[int, int]]] = {}
    start = ("c", ej)
    goal = ("r", ei)
    frontier = [start]
    seen = {start}
    while frontier and goal not in seen:
        nxt = []
        for node in frontier:
            kind, idx = node
            cells = col_adj.get(idx, []) if kind == "c" else row_adj.get(idx, [])
            for cell in cells:
                i, j = cell
                other = ("r", i) if kind == "c" else ("c", j)
                if other in seen:
                    continue
                seen.add(other)
                parent[other] = (node, cell)
                nxt.append(other)
        frontier = nxt
    if goal not in parent:
        raise NumericalError("entering cell closes no cycle; basis corrupt")
    path: list[tuple[int, int]] = []
    node = goal
    while node != start:
        node, cell = parent[node]
        path.append(cell)
    return path


def solve_transportation_lp(row_marginal, col_marginal,
                            cost) -> tuple[float, TransportPlan]:
    """Exact optimal transport plan between two discrete marginals.

    Transportation simplex with a northwest-corner start.  The entering cell
    is the lowest (row-major) index with negative reduced cost (Bland's
    rule) and ties for the leaving cell break to the lowest index, so
    degenerate optima resolve deterministically.

    Args:
        row_marginal, col_marginal: nonnegative vectors with equal sums
            (within 1e-9; the columns are rescaled to match exactly).
        cost: (p, q) cost matrix.

    Returns:
        (optimal value, optimal TransportPlan), the plan basic with at most
        p + q - 1 strictly positive entries.
    """
    a = np.array(row_marginal, dtype=float).ravel()
    b = np.array(col_marginal, dtype=float).ravel()
    cost = np.asarray(cost, dtype=float)
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise DomainError("marginals must be nonnegative")
    if abs(a.sum() - b.sum()) > 1e-9 * max(a.sum(), 1.0):
        raise DomainError(f"marginal masses differ: {a.sum()} vs {b.sum()}")
    if cost.shape != (a.size, b.size):
        raise DomainError("cost matrix shape must match the marginals")
    b = b * (a.sum() / b.sum()) if b.sum() > 0.0 else b
    p, q = a.size, b.size

    w, basis = _northwest_corner(a, b)
    for _ in range(50_000):
        u, v = _tree_duals(basis, cost, p, q)
        rc = cost - u[:, None] - v[None, :]
        basis_set = set(basis)
        enter = None
        # Bland's rule: first negative reduced cost in row-major order.
        for i in range(p):
            for j in range(q):
                if (i, j) not in basis_set and rc[i, j] < -1e-12:
                    enter = (i, j)
                    break
            if enter is not None:
                break
        if enter is None:
            value = float(np.sum(w * cost))
            return value, TransportPlan(a, b, w)
        path = _tree_cycle(basis, enter, p, q)
        minus = path[0::2]
        theta = min(w[c] for c in minus)
        leave = min(c for c in minus if w[c] <= theta + 1e-15)
        w[enter] += theta
        for k, cell in enumerate(path):
            w[cell] += theta if k % 2 else -theta
        w[leave] = 0.0
        basis[basis.index(leave)] = enter
    raise NumericalError("transportation simplex exceeded its iteration budget")


def mw2(m1: SlaterMixture, m2: SlaterMixture) -> tuple[float, TransportPlan]:
    """Mixture Wasserstein distance and an optimal component coupling."""
    cost = np.array([[w2_slater_sq(c1, c2) for c2 in m2.components]
                     for c1 in m1.components])
    value, plan = solve_transportation_lp(m1.weights, m2.weights, cost)
    return float(np.sqrt(max(value, 0.0))), plan


def _tree_count(p: int, q: int) -> int:
    return p ** (q - 1) * q ** (p - 1)


def two_column_vertices(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All basic feasible solutions of a p x 2 transportation polytope.

    A spanning tree of the bipartite graph K_{p,2} has exactly one row node
    joined to both columns; every other row is a leaf attached to a single
    column and ships its full mass there.  Enumerating the doubled row t and
    the subset of rows sent to column 0 covers every vertex (duplicates
    arise when the balancing flow hits 0 or a_t and are not removed here).

    Returns:
        Array of shape (n, p, 2); rows may repeat.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    p = a.size
    if b.size != 2:
        raise DomainError("two_column_vertices needs exactly two columns")
    out = []
    for t in range(p):
        others = [i for i in range(p) if i != t]
        for bits in range(1 << (p - 1)):
            w = np.zeros((p, 2))
            sent = 0.0
            for pos, i in enumerate(others):
                col = (bits >> pos) & 1
                w[i, 1 - col] = 0.0
                w[i, col] = a[i]
                if col == 0:
                    sent += a[i]
            w_t0 = b[0] - sent
            if w_t0 < -_FEAS_TOL or w_t0 > a[t] + _FEAS_TOL:
                continue
            w[t, 0] = min(max(w_t0, 0.0), a[t])
            w[t, 1] = a[t] - w[t, 0]
            out.append(w)
    if not out:
        raise NumericalError("no feasible vertex found; marginals inconsistent")
    return np.array(out)


def _prufer_trees(p: int, q: int):
    """Yield edge lists of all spanning trees of K_{p,q}.

    Nodes 0..p-1 are rows, p..p+q-1 are columns.  Standard Prufer decoding
    is a bijection onto labeled trees; restricting to sequences with exactly
    q-1 row labels and p-1 column labels and discarding decodes with a
    same-side edge leaves each bipartite spanning tree exactly once.
    """
    n = p + q
    if n == 2:
        yield [(0, 1)]
        return
    length = n - 2
    for row_slots in itertools.combinations(range(length), q - 1):
        col_slots = [k for k in range(length) if k not in row_slots]
        for row_vals in itertools.product(range(p), repeat=q - 1):
            for col_vals in itertools.product(range(p, n), repeat=p - 1):
                seq = [0] * length
                for slot, val in zip(row_slots, row_vals):
                    seq[slot] = val
                for slot, val in zip(col_slots, col_vals):
                    seq[slot] = val
                edges = _prufer_decode(seq, n)
                if all((u < p) != (v < p) for u, v in edges):
                    yield edges


def _prufer_decode(seq: list[int], n: int) -> list[tuple[int, int]]:
    """Edge list of the labeled tree encoded by a Prufer sequence."""
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return edges


def _flows_from_tree(edges: list[tuple[int, int]], a: np.ndarray,
                     b: np.ndarray) -> np.ndarray | None:
    """Basic solution carried by a spanning tree; None if infeasible."""
    p, q = a.size, b.size
    n = p + q
    residual = np.concatenate([a, b])
    adj: list[dict[int, tuple[int, int]]] = [dict() for _ in range(n)]
    for u, v in edges:
        i, j = (u, v) if u < p else (v, u)
        cell = (i, j - p)
        adj[u][v] = cell
        adj[v][u] = cell
    w = np.zeros((p, q))
    degree = [len(d) for d in adj]
    stack = [k for k in range(n) if degree[k] == 1]
    while stack:
        leaf = stack.pop()
        if degree[leaf] != 1:
            continue
        other, cell = next(iter(adj[leaf].items()))
        flow = residual[leaf]
        if flow < -_FEAS_TOL:
            return None
        w[cell] += flow
        residual[leaf] = 0.0
        residual[other] -= flow
        del adj[other][leaf]
        adj[leaf].clear()
        degree[leaf] = 0
        degree[other] -= 1
        if degree[other] == 1:
            stack.append(other)
    if np.min(w) < -_FEAS_TOL:
        return None
    return np.maximum(w, 0.0)


def enumerate_vertices(row_marginal, col_marginal,
                       budget: int = 2_000_000) -> list[TransportPlan]:
    """All vertices of the transportation polytope with the given marginals.

    Vertices are basic feasible solutions over spanning trees of the
    complete bipartite support graph.  Duplicates (from degenerate bases)
    are removed with entrywise tolerance 1e-12 and the result is ordered
    lexicographically by support pattern, then by entries.

    Raises:
        VertexBudgetError: if the spanning-tree count p**(q-1) * q**(p-1)
            exceeds budget.
    """
    a = np.array(row_marginal, dtype=float).ravel()
    b = np.array(col_marginal, dtype=float).ravel()
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise DomainError("marginals must be nonnegative")
    if abs(a.sum() - b.sum()) > 1e-9 * max(a.sum(), 1.0):
        raise DomainError(f"marginal masses differ: {a.sum()} vs {b.sum()}")
    p, q = a.size, b.size
    count = _tree_count(p, q)
    if count > budget:
        raise VertexBudgetError(
            f"{count} spanning trees exceed the vertex budget {budget}")

    raw: list[np.ndarray]
    if p == 1:
        raw = [b.reshape(1, q)]
    elif q == 1:
        raw = [a.reshape(p, 1)]
    elif q == 2:
        raw = list(two_column_vertices(a, b))
    elif p == 2:
        raw = [w.T for w in two_column_vertices(b, a)]
    else:
        raw = []
        for edges in _prufer_trees(p, q):
            w = _flows_from_tree(edges, a, b)
            if w is not None:
                raw.append(w)

    seen: dict[tuple, np.ndarray] = {}
    for w in raw:
        key = tuple(np.round(w.ravel() / _FEAS_TOL).astype(np.int64).tolist())
        if key not in seen:
            seen[key] = w

    def order_key(w: np.ndarray):
        flat = w.ravel()
        support = tuple(np.nonzero(flat > _FEAS_TOL)[0].tolist())
        return (support, tuple(np.round(flat, 12).tolist()))

    plans = [TransportPlan(a, b, w) for w in sorted(seen.values(), key=order_key)]
    return plans


@dataclass(frozen=True)
class MultiMarginalPlan:
    """Sparse optimal multimarginal coupling over a product component grid."""

    shape: tuple[int, ...]
    lam: np.ndarray
    support: tuple[tuple[tuple[int, ...], float], ...]
    value: float

    def marginal(self, n: int) -> np.ndarray:
        out = np.zeros(self.shape[n])
        for idx, w in self.support:
            out[idx[n]] += w
        return out

    def tensor(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for idx, w in self.support:
            out[idx] += w
        return out

    @property
    def nnz(self) -> int:
        return len(self.support)


def pairwise_cost_tensor(mixtures: list[SlaterMixture], lam: np.ndarray) -> np.ndarray:
    """Cost tensor c_k = 1/2 sum_{i,j} lam_i lam_j W2(m^i_{k_i}, m^j_{k_j})**2."""
    shape = tuple(m.size for m in mixtures)
    n = len(mixtures)
    cost = np.zeros(shape)
    for i in range(n):
        for j in range(i + 1, n):
            cij = np.array([[w2_slater_sq(ci, cj) for cj in mixtures[j].components]
                            for ci in mixtures[i].components])
            expand = [1] * n
            expand[i] = shape[i]
            expand[j] = shape[j]
            cost += lam[i] * lam[j] * cij.reshape(expand)
    return cost


def multimarginal_plan(mixtures: list[SlaterMixture], lam) -> MultiMarginalPlan:
    """Optimal multimarginal coupling of mixture weights under simplex weights.

    The tensor LP is flattened and solved by a revised dual simplex with one
    redundant marginal constraint dropped; the returned basic solution has
    at most sum_i K_i - N + 1 strictly positive entries.

    Args:
        mixtures: N Slater mixtures (the reduced-basis snapshots).
        lam: barycentric weights in the simplex (nonnegative, summing to 1);
            the offline stage uses the uniform weights.
    """
    lam = np.asarray(lam, dtype=float).ravel()
    n = len(mixtures)
    if lam.shape != (n,) or n == 0:
        raise DomainError("one simplex weight per mixture required")
    if np.any(lam < -1e-12) or abs(lam.sum() - 1.0) > 1e-9:
        raise DomainError("multimarginal weights must lie in the unit simplex")
    shape = tuple(m.size for m in mixtures)
    if n == 1:
        support = tuple(((j,), float(w)) for j, w in enumerate(mixtures[0].weights))
        return MultiMarginalPlan(shape, lam, support, 0.0)

    cost = pairwise_cost_tensor(mixtures, lam)
    size = int(np.prod(shape))
    rows = []
    rhs = []
    for i, m in enumerate(mixtures):
        for j in range(m.size):
            if i == n - 1 and j == m.size - 1:
                continue  # implied by the remaining marginal rows
            mask = np.zeros(shape)
            index = [slice(None)] * n
            index[i] = j
            mask[tuple(index)] = 1.0
            rows.append(mask.ravel())
            rhs.append(float(m.weights[j]))
    res = linprog(cost.ravel(), A_eq=np.array(rows), b_eq=np.array(rhs),
                  bounds=(0.0, None), method="highs-ds")
    if res.status != 0:
        raise NumericalError(f"multimarginal LP failed: {res.message}")
    x = np.maximum(res.x, 0.0)
    x[x <= _FEAS_TOL] = 0.0
    w = x.reshape(shape)
    for i, m in enumerate(mixtures):
        axes = tuple(k for k in range(n) if k != i)
        err = np.max(np.abs(w.sum(axis=axes) - m.weights))
        if err > _MARGINAL_TOL:
            raise NumericalError(f"multimarginal marginal residual {err:.3e}")
    nnz = int(np.count_nonzero(w))
    bound = sum(shape) - n + 1
    if nnz > bound:
        raise NumericalError(f"plan has {nnz} nonzeros, above the basic bound {bound}")
    support = tuple(
        (tuple(int(i) for i in idx), float(w[idx]))
        for idx in sorted(zip(*np.nonzero(w)))
    )
    return MultiMarginalPlan(shape, lam, support, float(res.fun))


def approx_barycenter(plan: MultiMarginalPlan, mixtures: list[SlaterMixture],
                      lam) -> SlaterMixture:
    """Barycenter family member: one Slater barycenter per plan support atom.

    The coupling is computed once (at the uniform weights) and then frozen;
    evaluating at new weights lam moves each supported component tuple to
    its Slater barycenter while keeping the plan weights.  lam may leave the
    simplex but must keep every combined inverse scale positive, otherwise
    a DomainError propagates from the component barycenter.
    """
    lam = np.asarray(lam, dtype=float).ravel()
    if len(mixtures) != len(plan.shape) or lam.size != len(plan.shape):
        raise DomainError("plan, mixtures and weights must agree in length")
    comps = []
    weights = []
    for idx, w in plan.support:
        group = [mixtures[i].components[k] for i, k in enumerate(idx)]
        comps.append(slater_barycenter(group, lam))
        weights.append(w)
    return SlaterMixture(tuple(comps), np.array(weights))
