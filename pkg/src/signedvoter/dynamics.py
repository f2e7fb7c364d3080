"""Signed voter dynamics with two external controllers.

At steady state the probability ``x_i`` that node ``i`` holds opinion A solves

    [L + diag(p_A + p_B)] x = p_A + k_b

where ``L`` is the signed Laplacian and ``k_b`` the negative in-strength.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import SignedGraph, laplacian

DIRECT_SOLVER_MAX_N = 10_000
RESIDUAL_TOL = 1e-10


class DynamicsError(ValueError):
    pass


class UndefinedNodeError(DynamicsError):
    def __init__(self, nodes):
        self.nodes = list(map(int, nodes))
        shown = ", ".join(map(str, self.nodes[:20])) + (" ..." if len(self.nodes) > 20 else "")
        super().__init__(f"dynamically undefined node(s) with no influence source: {shown}")


def as_allocation(values, n: int, name: str = "allocation") -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 0:
        v = np.full(n, float(v))
    if v.shape != (n,):
        raise DynamicsError(f"{name} has shape {v.shape}, expected ({n},)")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise DynamicsError(f"{name} must be finite and nonnegative")
    return v


@dataclass(frozen=True)
class SteadyStateSolution:
    x: np.ndarray
    vote_share_A: float
    vote_share_B: float
    solver_residual: float


class SteadyStateSystem:
    """Steady-state system ``M x = p_A + k_b`` for one ``(graph, p_A, p_B)``.

    Symmetric systems are solved by Jacobi-preconditioned
    conjugate gradients, optionally warm-started; others by sparse LU up to
    ``DIRECT_SOLVER_MAX_N`` nodes and Jacobi iteration beyond. Any iterative
    answer failing the residual check is redone with LU. The factorisation is
    reused for the adjoint solve needed by the gradient.
    """

    def __init__(self, g: SignedGraph, p_A, p_B, lap: sp.csr_matrix | None = None,
                 method: str = "auto", x0=None, y0=None):
        self.g = g
        self.p_A = as_allocation(p_A, g.n, "p_A")
        self.p_B = as_allocation(p_B, g.n, "p_B")
        lap = laplacian(g) if lap is None else lap
        diag = lap.diagonal() + self.p_A + self.p_B
        dead = np.flatnonzero(diag <= 0)
        if len(dead):
            raise UndefinedNodeError(dead)
        self.matrix = (lap + sp.diags(self.p_A + self.p_B)).tocsr()
        self.rhs = self.p_A + g.neg_in_strength
        self._diag = diag
        if method == "auto":
            if g.symmetric:
                method = "cg"
            else:
                method = "direct" if g.n <= DIRECT_SOLVER_MAX_N else "jacobi"
        self.method = method
        self._x0, self._y0 = x0, y0
        self._lu = None
        self._x = None

    def _direct(self, b, trans=False):
        if self._lu is None:
            self._lu = spla.splu(self.matrix.tocsc())
        return self._lu.solve(b, trans="T" if trans else "N")

    def _tol(self, b) -> float:
        return RESIDUAL_TOL * max(1.0, float(np.max(np.abs(b), initial=0.0))) * 1e-2

    def _solve(self, b, trans=False, x0=None):
        if self.method == "direct":
            return self._direct(b, trans)
        A = self.matrix.T.tocsr() if trans else self.matrix
        if self.method == "cg":
            pre = spla.LinearOperator(A.shape, matvec=lambda v: v / self._diag, dtype=np.float64)
            x, info = spla.cg(A, b, x0=x0, rtol=0.0, atol=self._tol(b), M=pre, maxiter=10 * self.g.n + 100)
        else:
            x, info = jacobi(A, self._diag, b, x0=x0, tol=1e-13), 0
        if info != 0 or self.residual(x, b, trans) > self._tol(b) * 100:
            return self._direct(b, trans)
        return x

    def residual(self, x, b, trans=False) -> float:
        A = self.matrix.T if trans else self.matrix
        return float(np.max(np.abs(A @ x - b), initial=0.0))

    def solve(self) -> SteadyStateSolution:
        x = self._solve(self.rhs, x0=self._x0)
        res = self.residual(x, self.rhs)
        if res > RESIDUAL_TOL * max(1.0, float(np.max(np.abs(self.rhs), initial=0.0))):
            raise DynamicsError(f"steady-state residual {res:.3e} exceeds tolerance")
        xa = float(np.mean(x)) if self.g.n else 0.0
        self._x = x
        return SteadyStateSolution(x, xa, 1.0 - xa, res)

    def adjoint_ones(self) -> np.ndarray:
        """``y`` with ``M^T y = 1/N``, i.e. the row vector ``(1/N) 1^T M^-1``."""
        b = np.full(self.g.n, 1.0 / self.g.n)
        return self._solve(b, trans=True, x0=self._y0)


def jacobi(A: sp.csr_matrix, diag: np.ndarray, b: np.ndarray, x0=None, tol=1e-13, max_iter=200_000) -> np.ndarray:
    """Jacobi iteration; converges for the (weakly, irreducibly) diagonally dominant systems here."""
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    off = A - sp.diags(A.diagonal())
    for _ in range(max_iter):
        x_new = (b - off @ x) / diag
        if np.max(np.abs(x_new - x), initial=0.0) < tol:
            return x_new
        x = x_new
    raise DynamicsError("Jacobi iteration did not converge")


def steady_state(g: SignedGraph, p_A, p_B) -> SteadyStateSolution:
    return SteadyStateSystem(g, p_A, p_B).solve()


def vote_share(g: SignedGraph, p_A, p_B) -> float:
    return steady_state(g, p_A, p_B).vote_share_A


# ---------------------------------------------------------------------------
# rate equation


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # shape (len(t), n)

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]


def integrate_rate_equation(g: SignedGraph, p_A, p_B, x0, dt: float = 0.01, t_max: float = 100.0,
                            record_every: int = 1, tol: float = 1e-6) -> Trajectory:
    """Forward-Euler integration of the rate equation from ``x0``."""
    p_A = as_allocation(p_A, g.n, "p_A")
    p_B = as_allocation(p_B, g.n, "p_B")
    den = g.pos_in_strength + g.neg_in_strength + p_A + p_B
    dead = np.flatnonzero(den <= 0)
    if len(dead):
        raise UndefinedNodeError(dead)
    if dt <= 0:
        raise DynamicsError("dt must be positive")
    x = np.asarray(x0, dtype=np.float64).copy()
    if x.shape != (g.n,) or np.any(x < 0) or np.any(x > 1):
        raise DynamicsError("x0 must be a vector in [0, 1]^n")
    W = g.in_matrix
    pos = W.multiply(W > 0).tocsr()
    neg = (-W.multiply(W < 0)).tocsr()
    steps = int(np.ceil(t_max / dt))
    ts, xs = [0.0], [x.copy()]
    for s in range(1, steps + 1):
        phi_a = (pos @ x + neg @ (1.0 - x) + p_A) / den
        x = x + dt * (phi_a - x)
        if np.any(x < -tol) or np.any(x > 1 + tol):
            raise DynamicsError("unstable step: state left [0, 1]; reduce dt")
        if s % record_every == 0 or s == steps:
            ts.append(s * dt)
            xs.append(x.copy())
    return Trajectory(np.array(ts), np.array(xs))


# ---------------------------------------------------------------------------
# agent-based simulation


@dataclass(frozen=True)
class SimulationResult:
    x_mean: np.ndarray
    x_stderr: np.ndarray
    vote_share_A: float
    stderr: float
    sweeps: int
    burn_in: int


@numba.njit(cache=True)
def _voter_sweeps(indptr, indices, cum, sign, p_A, p_B, total, state, sweeps, burn_in, n_batches, seed):
    np.random.seed(seed)
    n = len(state)
    batch_sums = np.zeros((n_batches, n))
    kept = sweeps - burn_in
    per_batch = kept // n_batches
    for s in range(sweeps):
        for _ in range(n):
            i = np.random.randint(n)
            r = np.random.random() * total[i]
            if r < p_A[i]:
                state[i] = 1
            elif r < p_A[i] + p_B[i]:
                state[i] = 0
            else:
                r -= p_A[i] + p_B[i]
                lo = indptr[i]
                hi = indptr[i + 1]
                # first k in [lo, hi) with cum[k] > r
                a, b = lo, hi - 1
                while a < b:
                    mid = (a + b) // 2
                    if cum[mid] > r:
                        b = mid
                    else:
                        a = mid + 1
                j = indices[a]
                state[i] = state[j] if sign[a] > 0 else 1 - state[j]
        if s >= burn_in:
            k = (s - burn_in) // per_batch
            if k < n_batches:
                for v in range(n):
                    batch_sums[k, v] += state[v]
    return batch_sums / per_batch


def simulate_voter(g: SignedGraph, p_A, p_B, sweeps: int = 20_000, burn_in: int = 1_000, rng_seed=0,
                   n_batches: int = 50, initial_state=None) -> SimulationResult:
    """Monte Carlo run of the signed voter model.

    One sweep is ``n`` random single-node updates. Node ``i`` picks an influence
    source with probability proportional to ``|w_ji|``, ``p_A,i`` or ``p_B,i``
    and copies it (or opposes it across a negative edge). Standard errors come
    from ``n_batches`` batch means of the post-burn-in sweeps.
    """
    if not sweeps > burn_in >= 0:
        raise DynamicsError("need sweeps > burn_in >= 0")
    kept = sweeps - burn_in
    n_batches = max(2, min(n_batches, kept))
    p_A = as_allocation(p_A, g.n, "p_A")
    p_B = as_allocation(p_B, g.n, "p_B")
    W = g.in_matrix.tocsr()
    W.sort_indices()
    absw = np.abs(W.data)
    total = np.asarray(np.abs(W).sum(axis=1)).ravel() + p_A + p_B
    dead = np.flatnonzero(total <= 0)
    if len(dead):
        raise UndefinedNodeError(dead)
    cum = np.empty_like(absw)
    for i in range(g.n):
        lo, hi = W.indptr[i], W.indptr[i + 1]
        cum[lo:hi] = np.cumsum(absw[lo:hi])
    rng = np.random.default_rng(rng_seed)
    if initial_state is None:
        state = rng.integers(0, 2, size=g.n).astype(np.int64)
    else:
        state = np.asarray(initial_state, dtype=np.int64).copy()
    seed = int(rng.integers(2**31 - 1))
    batches = _voter_sweeps(
        W.indptr.astype(np.int64), W.indices.astype(np.int64), cum, np.sign(W.data),
        p_A, p_B, total, state, int(sweeps), int(burn_in), int(n_batches), seed,
    )
    nb = batches.shape[0]
    x_mean = batches.mean(axis=0)
    x_se = batches.std(axis=0, ddof=1) / np.sqrt(nb)
    X_batches = batches.mean(axis=1)
    return SimulationResult(
        x_mean, x_se, float(X_batches.mean()), float(X_batches.std(ddof=1) / np.sqrt(nb)), sweeps, burn_in,
    )
