"""Dense real-matrix primitives: norms, linear solves, spectral radius,
Perron pairs, strongly connected components, Stein equation.

Everything here works on plain ``numpy.ndarray`` matrices. Inputs are never
mutated; all functions are pure and thread-safe.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
import scipy.linalg

__all__ = [
    "ConvergenceError",
    "PerronPair",
    "ReducibleMatrixError",
    "Scc",
    "SingularMatrixError",
    "dominant_pair",
    "inf_norm",
    "is_irreducible",
    "perron_pair",
    "scc_partition",
    "solve_linear",
    "spectral_radius",
    "stein_solve",
]

# Defaults: 1e-12 relative for linear algebra, 1e-10 for eigen-residuals.
LINALG_RTOL = 1e-12
EIGEN_RTOL = 1e-10
PIVOT_RTOL = 1e-14

# Power/Collatz-Wielandt iteration gives up and falls back to a dense
# eigendecomposition beyond this convergence ratio.
SLOW_RATIO = 0.999


class SingularMatrixError(np.linalg.LinAlgError):
    """A pivot fell below the singularity threshold."""


class ConvergenceError(RuntimeError):
    """An iteration failed to reach its tolerance within its cap."""

    def __init__(self, message, iterations=None, residual=None, solution=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.solution = solution


class ReducibleMatrixError(ValueError):
    """An operation requiring an irreducible pattern got a reducible one."""


def as_square(m, name="matrix"):
    """Validate and return `m` as a finite square 2-d float array."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def inf_norm(m):
    """Max absolute row sum for 2-d input, max absolute entry for 1-d."""
    a = np.asarray(m)
    if a.ndim == 1:
        return float(np.max(np.abs(a))) if a.size else 0.0
    return float(np.max(np.sum(np.abs(a), axis=1))) if a.size else 0.0


def spectral_radius(m, rtol=LINALG_RTOL, max_iter=20000):
    """Spectral radius of a square real matrix.

    For a nonnegative matrix the radius is bracketed by Collatz-Wielandt
    bounds min_i (Mx)_i/x_i <= rho <= max_i (Mx)_i/x_i (valid for any
    positive x), iterated on M + I to break periodicity; the returned value
    is the midpoint of the final enclosure. If the bounds fail to close
    within `max_iter` (reducible or defective dominant part), or the matrix
    has negative entries, a dense eigendecomposition is used.
    """
    a = as_square(m)
    n = a.shape[0]
    if n == 1:
        return float(abs(a[0, 0]))
    if np.any(a < 0.0):
        return float(np.max(np.abs(np.linalg.eigvals(a))))
    # Collatz-Wielandt on the aperiodic companion M + I; rho(M+I) = rho(M)+1.
    shifted = a + np.eye(n)
    x = np.ones(n)
    for _ in range(max_iter):
        y = shifted @ x
        ratios = y / x
        lo, hi = float(np.min(ratios)), float(np.max(ratios))
        if hi - lo <= rtol * hi:
            return (lo + hi) / 2.0 - 1.0
        nrm = float(np.max(y))
        if nrm == 0.0:
            return 0.0
        x = y / nrm
    return float(np.max(np.abs(np.linalg.eigvals(a))))


@dataclasses.dataclass(frozen=True)
class PerronPair:
    """Perron radius with right/left eigenvectors and the scaling applied."""

    radius: float
    right: np.ndarray
    left: np.ndarray
    normalization: dict


def _normalize(vec, rule):
    if rule == "sum":
        scale = float(np.sum(vec))
    elif rule == "max":
        scale = float(np.max(np.abs(vec)))
    else:
        raise ValueError(f"unknown norm rule {rule!r}")
    if scale == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return vec / scale, scale


def _power_vector(a, rtol, max_iter):
    """Right dominant eigenvector of nonnegative `a` via power iteration
    on a + I. Returns None if convergence is too slow (ratio > SLOW_RATIO).
    """
    n = a.shape[0]
    shifted = a + np.eye(n)
    x = np.full(n, 1.0 / n)
    prev_delta = np.inf
    for k in range(max_iter):
        y = shifted @ x
        y /= np.max(np.abs(y))
        delta = float(np.max(np.abs(y - x)))
        x = y
        if delta <= rtol:
            return x
        if k > 50 and delta > SLOW_RATIO * prev_delta and delta > 1e-6:
            return None
        prev_delta = delta
    return None


def _dense_dominant(a):
    """Dominant eigenvector of `a` by dense decomposition, sign-fixed.

    Among eigenvalues of (numerically) maximal modulus the one with the
    largest real part is taken: for a nonnegative matrix that is the real
    Perron root even when a periodic block puts rotated copies on the
    same circle.
    """
    vals, vecs = np.linalg.eig(a)
    top = np.max(np.abs(vals))
    near = np.abs(vals) >= (1.0 - 1e-9) * top
    candidates = np.nonzero(near)[0]
    i = candidates[int(np.argmax(np.real(vals[candidates])))]
    v = np.real(vecs[:, i])
    j = int(np.argmax(np.abs(v)))
    if v[j] < 0:
        v = -v
    return v


def perron_pair(m, norm_rule="sum", rtol=LINALG_RTOL, max_iter=20000):
    """Perron radius and positive right/left eigenvectors of a nonnegative
    irreducible matrix.

    `norm_rule` is "sum" (entries sum to 1) or "max" (unit infinity norm)
    and is applied to both vectors independently. Raises
    ReducibleMatrixError when the pattern is reducible, and ValueError if
    the computed vectors are not strictly positive (cannot happen for a
    genuinely irreducible input).
    """
    a = as_square(m)
    if np.any(a < 0.0):
        raise ValueError("perron_pair requires a nonnegative matrix")
    if not is_irreducible(a):
        raise ReducibleMatrixError("matrix pattern is reducible")
    radius = spectral_radius(a, rtol=rtol)
    right = _power_vector(a, rtol, max_iter)
    if right is None:
        right = _dense_dominant(a)
    left = _power_vector(a.T, rtol, max_iter)
    if left is None:
        left = _dense_dominant(a.T)
    if np.min(right) <= 0.0 or np.min(left) <= 0.0:
        raise ValueError("Perron vectors not strictly positive")
    right, sr = _normalize(right, norm_rule)
    left, sl = _normalize(left, norm_rule)
    scale = max(radius, 1.0)
    res_r = inf_norm(a @ right - radius * right)
    res_l = inf_norm(left @ a - radius * left)
    if max(res_r, res_l) > EIGEN_RTOL * scale:
        raise ConvergenceError(
            "Perron residual above tolerance", residual=max(res_r, res_l)
        )
    return PerronPair(
        radius=radius,
        right=right,
        left=left,
        normalization={"rule": norm_rule, "right_scale": sr, "left_scale": sl},
    )


def dominant_pair(m, rtol=LINALG_RTOL):
    """Like perron_pair but for a possibly reducible nonnegative matrix.

    Returns (radius, right, left) where the vectors are nonnegative
    (entries that are structurally zero may carry eigensolver noise up to
    ~1e-14; callers threshold). Vectors have unit infinity norm.
    """
    a = as_square(m)
    radius = spectral_radius(a, rtol=rtol)
    if radius == 0.0:
        raise ValueError("dominant_pair undefined for a nilpotent matrix")

    def refine(mat):
        v = _dense_dominant(mat)
        # A few power steps on (mat + I) polish the dense solution.
        shifted = mat + np.eye(mat.shape[0])
        for _ in range(8):
            v = shifted @ v
            v /= np.max(np.abs(v))
        return v

    right = refine(a)
    left = refine(a.T)
    scale = max(radius, 1.0)
    if inf_norm(a @ right - radius * right) > EIGEN_RTOL * scale:
        raise ConvergenceError("dominant right eigenvector did not converge")
    if inf_norm(left @ a - radius * left) > EIGEN_RTOL * scale:
        raise ConvergenceError("dominant left eigenvector did not converge")
    return radius, right, left


def solve_linear(m, b, pivot_rtol=PIVOT_RTOL):
    """Solve M X = B by LU with partial pivoting plus one refinement step.

    Raises SingularMatrixError when a pivot falls below
    pivot_rtol * ||M||_inf.
    """
    a = as_square(m, "M")
    rhs = np.asarray(b, dtype=float)
    squeeze = rhs.ndim == 1
    if squeeze:
        rhs = rhs[:, None]
    if rhs.shape[0] != a.shape[0]:
        raise ValueError("B is not conformal with M")
    with warnings.catch_warnings():
        # the pivot check below raises; scipy's own warning is redundant
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    threshold = pivot_rtol * max(inf_norm(a), np.finfo(float).tiny)
    if np.min(np.abs(np.diag(lu))) < threshold:
        raise SingularMatrixError("matrix is numerically singular")
    x = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    x += scipy.linalg.lu_solve((lu, piv), rhs - a @ x, check_finite=False)
    return x[:, 0] if squeeze else x


@dataclasses.dataclass(frozen=True)
class Scc:
    """One strongly connected component; trivial = singleton, no self-loop."""

    vertices: tuple
    trivial: bool


def scc_partition(m, tol=0.0):
    """Strongly connected components of the graph with edge i -> j iff
    m[i, j] > tol, returned in topological order (sources first).

    Iterative Tarjan; components come out in reverse topological order and
    are flipped before returning.
    """
    a = as_square(m)
    n = a.shape[0]
    adj = [np.nonzero(a[i] > tol)[0].tolist() for i in range(n)]

    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    components = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for next_i in range(pi, len(adj[v])):
                w = adj[v][next_i]
                if index[w] == -1:
                    work[-1] = (v, next_i + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comp.sort()
                trivial = len(comp) == 1 and not a[comp[0], comp[0]] > tol
                components.append(Scc(tuple(comp), trivial))
    components.reverse()
    return components


def is_irreducible(m):
    """True iff the pattern of `m` forms a single strongly connected class."""
    return len(scc_partition(m)) == 1


def stein_solve(g, r, c, tol=LINALG_RTOL, kron_limit=64, max_terms=1_000_000):
    """Unique solution W of the Stein equation W - G W R = C.

    Requires rho(G) * rho(R) < 1 (raises ConvergenceError otherwise; the
    product reaching 1 signals a divergent series). Solved through the
    Kronecker system (I - R^T (x) G) vec(W) = vec(C) up to `kron_limit`,
    by the truncated fixed-point sum W = sum_i G^i C R^i above it.
    """
    a = as_square(g, "G")
    b = as_square(r, "R")
    rhs = as_square(c, "C")
    n = a.shape[0]
    if b.shape[0] != n or rhs.shape[0] != n:
        raise ValueError("G, R, C must share one dimension")
    product = spectral_radius(a) * spectral_radius(b)
    if product >= 1.0 - 1e-12:
        raise ConvergenceError(
            f"rho(G)*rho(R) = {product:.17g} >= 1: Stein series diverges "
            "(null-recurrent input; use the shifted route)",
            residual=product,
        )
    if n <= kron_limit:
        system = np.eye(n * n) - np.kron(b.T, a)
        w = solve_linear(system, rhs.flatten(order="F")).reshape((n, n), order="F")
    else:
        w = rhs.copy()
        term = rhs.copy()
        limit = tol * max(inf_norm(rhs), np.finfo(float).tiny)
        for _ in range(max_terms):
            term = a @ term @ b
            w += term
            if inf_norm(term) <= 0.25 * (1.0 - product) * limit:
                break
        else:
            raise ConvergenceError("Stein series did not converge")
    residual = inf_norm(w - a @ w @ b - rhs)
    scale = inf_norm(rhs) + inf_norm(w) * (1.0 + inf_norm(a) * inf_norm(b))
    if residual > max(tol * scale, 100 * np.finfo(float).eps):
        raise ConvergenceError("Stein residual above tolerance", residual=residual)
    return w
