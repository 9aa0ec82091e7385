"""Numeric oracle: parameter sampling, covariances, treks, and recovery formulas.

Everything here works at a generic parameter point: coefficients are sampled
away from zero, identities that hold as rational functions are checked in
64-bit floating point, and tolerance-triggered degeneracies are reported via
DegenerateSampleError so callers can resample.  All operations are pure
functions of (graph, parameters, seed); there is no global RNG state.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from numpy.typing import NDArray

from .graph import DirectedEdge, MixedGraph, Trek, infinite_to_one_record, require_valid

# Singular values below RANK_RTOL times the largest one count as zero.
RANK_RTOL = 1e-8
# Denominators and system determinants below this are treated as non-generic.
DEGENERACY_TOL = 1e-10


class DegenerateSampleError(RuntimeError):
    """A determinant or denominator fell below tolerance at the sampled point."""


class InfeasibleEdgeError(ValueError):
    """The hypothesis of the infinite-to-one construction does not hold."""


@dataclass(frozen=True)
class Parameters:
    """Edge coefficients and error covariance matching a graph's supports.

    ``lam[v-1, w-1]`` is the coefficient of edge v -> w; ``omega`` is
    symmetric positive definite with off-diagonal support on the bidirected
    edges.
    """

    lam: NDArray
    omega: NDArray

    @property
    def n(self) -> int:
        return self.lam.shape[0]


@dataclass(frozen=True)
class SampleConfig:
    coeff_min: float = 0.3
    coeff_max: float = 1.0
    omega_offdiag: float = 0.5
    diag_pad_min: float = 0.5
    diag_pad_max: float = 1.5
    rejection_tolerance: float = 1e-3
    max_rejections: int = 100


def validate_parameters(g: MixedGraph, p: Parameters, tol: float = 1e-12) -> list[str]:
    """Check the Parameters invariants against the graph supports."""
    problems = []
    n = g.n
    if p.lam.shape != (n, n) or p.omega.shape != (n, n):
        return [f"matrix shapes {p.lam.shape}, {p.omega.shape} do not match n={n}"]
    if np.max(np.abs(p.omega - p.omega.T)) > tol:
        problems.append("omega is not symmetric")
    if np.min(np.linalg.eigvalsh((p.omega + p.omega.T) / 2)) <= 0:
        problems.append("omega is not positive definite")
    if abs(np.linalg.det(np.eye(n) - p.lam)) <= tol:
        problems.append("I - lambda is numerically singular")
    for v in range(1, n + 1):
        for w in range(1, n + 1):
            if v != w and abs(p.lam[v - 1, w - 1]) > tol and (v, w) not in g.directed:
                problems.append(f"lambda[{v},{w}] nonzero without edge {v}->{w}")
            if v == w and abs(p.lam[v - 1, w - 1]) > tol:
                problems.append(f"lambda[{v},{v}] nonzero on the diagonal")
            if v < w and abs(p.omega[v - 1, w - 1]) > tol and not g.has_bidirected(v, w):
                problems.append(f"omega[{v},{w}] nonzero without edge {v}<->{w}")
    return problems


def sample_parameters(g: MixedGraph, seed: int, config: SampleConfig | None = None) -> Parameters:
    """Draw a generic parameter point for the graph, deterministically in seed.

    Edge coefficients have magnitude in [coeff_min, coeff_max] with random
    sign; the error covariance is made positive definite by strict diagonal
    dominance.  When the directed part is cyclic, coefficient draws are
    rejected until I - lambda is comfortably invertible.

    Raises:
        DegenerateSampleError: the rejection budget ran out.
    """
    require_valid(g)
    cfg = config or SampleConfig()
    rng = np.random.default_rng(seed)
    n = g.n
    edges = sorted(g.directed)

    lam = np.zeros((n, n))
    for _ in range(cfg.max_rejections):
        for v, w in edges:
            magnitude = rng.uniform(cfg.coeff_min, cfg.coeff_max)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            lam[v - 1, w - 1] = sign * magnitude
        if abs(np.linalg.det(np.eye(n) - lam)) > cfg.rejection_tolerance:
            break
    else:
        raise DegenerateSampleError(
            f"no invertible I - lambda found in {cfg.max_rejections} draws (seed {seed})"
        )

    omega = np.zeros((n, n))
    for u, w in sorted(g.bidirected):
        value = rng.uniform(-cfg.omega_offdiag, cfg.omega_offdiag)
        omega[u - 1, w - 1] = value
        omega[w - 1, u - 1] = value
    row_sums = np.sum(np.abs(omega), axis=1)
    for v in range(n):
        omega[v, v] = row_sums[v] + rng.uniform(cfg.diag_pad_min, cfg.diag_pad_max)
    return Parameters(lam=lam, omega=omega)


def covariance(p: Parameters, tol: float = 1e-12) -> NDArray:
    """The covariance matrix induced by the parameters.

    Computed by two linear solves against I - lambda rather than explicit
    inversion, then symmetrized.
    """
    n = p.n
    m = np.eye(n) - p.lam
    if abs(np.linalg.det(m)) <= tol:
        raise DegenerateSampleError("I - lambda is numerically singular")
    half = np.linalg.solve(m.T, p.omega)
    sigma = np.linalg.solve(m.T, half.T).T
    return (sigma + sigma.T) / 2


def restricted_covariance(
    p: Parameters, left_edges: Iterable[DirectedEdge], right_edges: Iterable[DirectedEdge]
) -> NDArray:
    """Two-sided variant with different coefficient supports per trek side.

    Returns (I - lam_L)^-T omega (I - lam_R)^-1 where lam_L and lam_R keep
    only the entries of the given edge subsets.  Determinants of its
    submatrices vanish exactly when the corresponding restricted flow graph
    disconnects the row set from the column set.
    """
    n = p.n

    def restrict(edges: Iterable[DirectedEdge]) -> NDArray:
        out = np.zeros_like(p.lam)
        for v, w in edges:
            out[v - 1, w - 1] = p.lam[v - 1, w - 1]
        return out

    m_left = np.eye(n) - restrict(left_edges)
    m_right = np.eye(n) - restrict(right_edges)
    return np.linalg.solve(m_left.T, p.omega) @ np.linalg.inv(m_right)


@lru_cache(maxsize=None)
def _directed_paths_from(g: MixedGraph, start: int) -> tuple[tuple[int, ...], ...]:
    """All directed paths out of ``start`` in an acyclic graph, incl. trivial."""
    paths = [(start,)]
    for child in sorted(g.children(start)):
        paths.extend((start,) + tail for tail in _directed_paths_from(g, child))
    return tuple(paths)


def enumerate_treks(g: MixedGraph, v: int, w: int) -> list[Trek]:
    """Exhaustive, duplicate-free list of treks from v to w.

    Requires the directed part to be acyclic so the list is finite.  Used as
    a brute-force oracle against the linear-algebra covariance.
    """
    require_valid(g)
    if not g.is_acyclic():
        raise ValueError("trek enumeration requires an acyclic directed part")
    treks = []
    for top in g.vertices:
        for left in _directed_paths_from(g, top):
            if left[-1] != v:
                continue
            for right in _directed_paths_from(g, top):
                if right[-1] == w:
                    treks.append(Trek(tuple(reversed(left)), right, False))
    for a, b in sorted(g.bidirected):
        for u, z in ((a, b), (b, a)):
            for left in _directed_paths_from(g, u):
                if left[-1] != v:
                    continue
                for right in _directed_paths_from(g, z):
                    if right[-1] == w:
                        treks.append(Trek(tuple(reversed(left)), right, True))
    return treks


def trek_monomial(trek: Trek, p: Parameters) -> float:
    """omega factor of the top times the product of traversed coefficients."""
    u, z = trek.top
    value = p.omega[u - 1, z - 1]
    for x, y in trek.directed_edges():
        value *= p.lam[x - 1, y - 1]
    return value


def subdeterminant(sigma: NDArray, rows: Iterable[int], cols: Iterable[int]) -> float:
    """Determinant of the submatrix with the given ordered rows and columns.

    The sign depends on the orderings; callers that take ratios must use
    consistent orderings on both sides.
    """
    rows = list(rows)
    cols = list(cols)
    if len(rows) != len(cols):
        raise ValueError(f"need a square submatrix, got {len(rows)} rows, {len(cols)} cols")
    if not rows:
        return 1.0
    sub = sigma[np.ix_([r - 1 for r in rows], [c - 1 for c in cols])]
    return float(np.linalg.det(sub))


def numeric_rank(matrix: NDArray, rtol: float = RANK_RTOL) -> int:
    """Rank via singular values above rtol times the largest one."""
    if matrix.size == 0:
        return 0
    svals = np.linalg.svd(matrix, compute_uv=False)
    if svals[0] == 0:
        return 0
    return int(np.sum(svals > rtol * svals[0]))


def recover_edge_ratio(
    sigma: NDArray,
    S: Iterable[int],
    T: Iterable[int],
    v: int,
    w0: int,
    known: Mapping[DirectedEdge, float] | None = None,
    tol: float = DEGENERACY_TOL,
) -> float:
    """Recover the coefficient of w0 -> v as a ratio of subdeterminants.

    Evaluates (|S x (T+v)| - sum_i known[wi->v] |S x (T+wi)|) / |S x (T+w0)|
    where the sum runs over the already-known coefficients of other edges
    into v supplied in ``known``.

    Raises:
        DegenerateSampleError: the denominator is below tolerance, which
            signals a non-generic sample; the caller should resample.
    """
    S = list(S)
    T = list(T)
    if len(S) != len(T) + 1:
        raise ValueError(f"need |S| = |T| + 1, got {len(S)} and {len(T)}")
    denominator = subdeterminant(sigma, S, T + [w0])
    if abs(denominator) <= tol:
        raise DegenerateSampleError(f"denominator |sigma[S, T+{w0}]| = {denominator:.3e} below tolerance")
    numerator = subdeterminant(sigma, S, T + [v])
    for (wi, head), value in (known or {}).items():
        if head != v:
            raise ValueError(f"known edge {wi}->{head} does not point into {v}")
        numerator -= value * subdeterminant(sigma, S, T + [wi])
    return numerator / denominator


def solve_recovery_system(
    sigma: NDArray,
    v: int,
    E: Iterable[int],
    S: Iterable[int],
    Y: Iterable[int],
    H: Iterable[Iterable[int]],
    known: Mapping[DirectedEdge, float] | None = None,
    tol: float = DEGENERACY_TOL,
) -> dict[DirectedEdge, float]:
    """Solve the half-trek linear system for the edges E -> v.

    Row i comes from source Y[i], whose parents H[i] (those half-trek
    reachable from v) are stripped out using the known coefficients; already
    solved parents S of v are moved to the right-hand side.  The system
    matrix is A[i, j] = sigma[y_i, e_j] - sum_h sigma[h, e_j] known[h->y_i].

    Raises:
        DegenerateSampleError: |det A| below tolerance (non-generic sample).
    """
    E = list(E)
    S = list(S)
    Y = list(Y)
    H = [list(h) for h in H]
    known = dict(known or {})
    if len(Y) != len(E):
        raise ValueError(f"need |Y| = |E|, got {len(Y)} and {len(E)}")
    if len(H) != len(Y):
        raise ValueError(f"need one parent set per source, got {len(H)} for {len(Y)}")
    k = len(E)
    if k == 0:
        return {}

    def corrected(y: int, hs: list[int], col: int) -> float:
        value = sigma[y - 1, col - 1]
        for h in hs:
            value -= sigma[h - 1, col - 1] * known[(h, y)]
        return value

    a = np.empty((k, k))
    rhs = np.empty(k)
    for i, (y, hs) in enumerate(zip(Y, H)):
        for j, e in enumerate(E):
            a[i, j] = corrected(y, hs, e)
        r = sigma[y - 1, v - 1]
        for s in S:
            r -= corrected(y, hs, s) * known[(s, v)]
        for h in hs:
            r -= sigma[v - 1, h - 1] * known[(h, y)]
        rhs[i] = r
    if abs(np.linalg.det(a)) <= tol:
        raise DegenerateSampleError(f"system determinant {np.linalg.det(a):.3e} below tolerance")
    solution = np.linalg.solve(a, rhs)
    return {(e, v): float(solution[j]) for j, e in enumerate(E)}


def solve_determinantal_system(
    sigma: NDArray,
    rows: Iterable[tuple[Iterable[int], Iterable[int]]],
    v: int,
    targets: Iterable[int],
    tol: float = DEGENERACY_TOL,
) -> dict[DirectedEdge, float]:
    """Jointly recover several edges into v from determinantal equations.

    Row i is built from the source/target pair (S_i, T_i): the matrix entry
    for target w_j is |sigma[S_i, T_i + w_j]| and the right-hand side is
    |sigma[S_i, T_i + v]|.

    Raises:
        DegenerateSampleError: the system determinant is below tolerance.
    """
    rows = [(list(s), list(t)) for s, t in rows]
    targets = list(targets)
    if len(rows) != len(targets):
        raise ValueError(f"need one row per target, got {len(rows)} and {len(targets)}")
    for s, t in rows:
        if len(s) != len(t) + 1:
            raise ValueError(f"row ({s}, {t}) must have |S| = |T| + 1")
    k = len(targets)
    if k == 0:
        return {}
    a = np.empty((k, k))
    rhs = np.empty(k)
    for i, (s, t) in enumerate(rows):
        for j, w in enumerate(targets):
            a[i, j] = subdeterminant(sigma, s, t + [w])
        rhs[i] = subdeterminant(sigma, s, t + [v])
    if abs(np.linalg.det(a)) <= tol:
        raise DegenerateSampleError(f"joint system determinant {np.linalg.det(a):.3e} below tolerance")
    solution = np.linalg.solve(a, rhs)
    return {(w, v): float(solution[j]) for j, w in enumerate(targets)}


def _free_parameters(g: MixedGraph) -> list[tuple[str, int, int]]:
    """Coordinates of the parameterization: directed, bidirected, diagonal."""
    coords = [("lam", u, w) for u, w in sorted(g.directed)]
    coords += [("omega", u, w) for u, w in sorted(g.bidirected)]
    coords += [("omega", x, x) for x in g.vertices]
    return coords


def sigma_jacobian(g: MixedGraph, p: Parameters) -> NDArray:
    """Jacobian of the parameters-to-covariance map.

    Rows index the upper triangle of sigma (row-major, diagonal included),
    columns index the free parameters in the order of _free_parameters.
    Uses the closed-form derivatives: for an edge coefficient at (u, v),
    d sigma = M^-T E_vu sigma + sigma E_uv M^-1 with M = I - lambda; for an
    omega entry, d sigma = M^-T (E_uv + E_vu [u != v]) M^-1.
    """
    n = g.n
    m = np.eye(n) - p.lam
    m_inv = np.linalg.inv(m)
    sigma = covariance(p)
    tri = [(i, j) for i in range(n) for j in range(i, n)]
    coords = _free_parameters(g)
    jac = np.empty((len(tri), len(coords)))
    for c, (kind, u, w) in enumerate(coords):
        eu, ew = u - 1, w - 1
        if kind == "lam":
            left = np.outer(m_inv.T[:, ew], sigma[eu, :])
            d = left + left.T
        else:
            basis = np.zeros((n, n))
            basis[eu, ew] = 1.0
            if eu != ew:
                basis[ew, eu] = 1.0
            d = m_inv.T @ basis @ m_inv
        jac[:, c] = [d[i, j] for i, j in tri]
    return jac


def jacobian_rank(g: MixedGraph, p: Parameters, rtol: float = RANK_RTOL) -> int:
    """Numeric column rank of the parameterization Jacobian at p.

    A rank below the number of free parameters certifies that the
    parameterization is generically infinite-to-one.
    """
    return numeric_rank(sigma_jacobian(g, p), rtol)


def n_free_parameters(g: MixedGraph) -> int:
    return len(_free_parameters(g))


def alternative_parameters(
    g: MixedGraph,
    p: Parameters,
    edge: DirectedEdge,
    gamma: float,
    tol: float = 1e-9,
) -> Parameters:
    """A second parameter point with the same covariance, differing on one edge.

    Replaces the coefficient of ``edge`` by ``gamma`` and compensates through
    the error covariance.  Feasible exactly when every non-sibling z of the
    edge's head cannot half-trek-reach the tail; the returned parameters are
    verified to respect the graph supports, stay positive definite, and
    reproduce the covariance to within ``tol``.

    Raises:
        InfeasibleEdgeError: the hypothesis fails for this edge.
        DegenerateSampleError: the construction violated its postconditions
            numerically (a known boundary case of the hypothesis; see the
            per-vertex record for which disjunct was load-bearing).
    """
    v, w = edge
    if infinite_to_one_record(g, v, w) is None:
        raise InfeasibleEdgeError(f"edge {v}->{w} does not satisfy the infinite-to-one hypothesis")
    sigma = covariance(p)
    gam = p.lam.copy()
    gam[v - 1, w - 1] = gamma
    m = np.eye(g.n) - gam
    psi = m.T @ sigma @ m
    psi = (psi + psi.T) / 2

    scale = max(1.0, float(np.max(np.abs(psi))))
    support_graph_errors = [
        (x, y)
        for x in g.vertices
        for y in g.vertices
        if x < y and not g.has_bidirected(x, y) and abs(psi[x - 1, y - 1]) > tol * scale
    ]
    if support_graph_errors:
        raise DegenerateSampleError(
            f"compensated covariance has support outside the graph at {support_graph_errors}"
        )
    if np.min(np.linalg.eigvalsh(psi)) <= 0:
        raise DegenerateSampleError("compensated error covariance is not positive definite")
    alt = Parameters(lam=gam, omega=psi)
    if np.max(np.abs(covariance(alt) - sigma)) > tol:
        raise DegenerateSampleError("alternative parameters do not reproduce the covariance")
    return alt
