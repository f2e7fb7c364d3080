"""Degree-based mean-field theory for the signed voter model.

Nodes are grouped into classes by ``(k_a, k_b)``; within a class both
controllers allocate uniformly. Neighbour states across positive and negative
ties (``<x_a>``, ``<x_b>``) close the system.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np

log = logging.getLogger(__name__)


class MeanFieldError(ValueError):
    pass


@dataclass(frozen=True)
class DegreeClassModel:
    """Class table: per-class positive degree, negative degree, node fraction and allocations."""

    ka: np.ndarray
    kb: np.ndarray
    weight: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(getattr(self, f), dtype=float)) for f in ("ka", "kb", "weight", "a", "b")]
        m = max(len(x) for x in arrs)
        arrs = [np.broadcast_to(x, (m,)).copy() if len(x) == 1 else x for x in arrs]
        if len({len(x) for x in arrs}) != 1:
            raise MeanFieldError("class arrays must have equal length")
        ka, kb, w, a, b = arrs
        if np.any(ka <= 0):
            raise MeanFieldError("every class needs a positive k_a")
        if np.any(kb < 0) or np.any(a < 0) or np.any(b < 0) or np.any(w < 0):
            raise MeanFieldError("degrees, weights and allocations must be nonnegative")
        if not np.isclose(w.sum(), 1.0, atol=1e-12):
            raise MeanFieldError(f"class weights sum to {w.sum()}, expected 1")
        for name, x in zip(("ka", "kb", "weight", "a", "b"), arrs):
            object.__setattr__(self, name, x)

    @classmethod
    def from_classes(cls, rows):
        """``rows`` of ``(k_a, k_b, weight, a, b)``."""
        ka, kb, w, a, b = (np.array(col, dtype=float) for col in zip(*rows))
        return cls(ka, kb, w, a, b)

    def with_allocations(self, a=None, b=None) -> "DegreeClassModel":
        return replace(self, a=self.a if a is None else np.asarray(a, float), b=self.b if b is None else np.asarray(b, float))

    @property
    def mean_ka(self) -> float:
        return float(self.weight @ self.ka)

    @property
    def mean_kb(self) -> float:
        return float(self.weight @ self.kb)

    @property
    def mean_a(self) -> float:
        return float(self.weight @ self.a)

    @property
    def mean_b(self) -> float:
        return float(self.weight @ self.b)


def _coefficients(ka, kb, w, a, b):
    """Averages entering the self-consistency relations; broadcasts over leading axes of a, b."""
    delta = a + b + ka + kb
    if np.any((delta <= 0) & (w > 0)):
        raise MeanFieldError("mean-field singular: a class has no influence source")
    delta = np.where(delta > 0, delta, 1.0)
    mka = w @ ka
    mkb = w @ kb
    avg = lambda v: np.sum(w * v, axis=-1)
    src = (a + kb) / delta
    c = {
        "src": avg(src),
        "ka_d": avg(ka / delta),
        "kb_d": avg(kb / delta),
        "ca": avg(ka * src) / mka,
        "alpha": avg(ka**2 / delta) / mka,
        "kakb_d": avg(ka * kb / delta),
    }
    if mkb > 0:
        c["cb"] = avg(kb * src) / mkb
        c["delta"] = avg(kb**2 / delta) / mkb
    return c, mka, mkb


def _neighbour_states(c, mka, mkb):
    """Closed-form ``<x_a>``, ``<x_b>``."""
    if mkb == 0:
        xa = c["ca"] / (1.0 - c["alpha"])
        return xa, np.zeros_like(xa)
    beta = c["kakb_d"] / mka
    gamma = c["kakb_d"] / mkb
    cross = c["kakb_d"] ** 2 / (mka * mkb)
    den_a = 1.0 - c["alpha"] + cross / (1.0 + c["delta"])
    den_b = 1.0 + c["delta"] + cross / (1.0 - c["alpha"])
    if np.any(np.abs(den_a) < 1e-300) or np.any(np.abs(den_b) < 1e-300) or np.any(1.0 - c["alpha"] == 0):
        raise MeanFieldError("mean-field singular")
    xa = (c["ca"] - beta * c["cb"] / (1.0 + c["delta"])) / den_a
    xb = (c["cb"] + gamma * c["ca"] / (1.0 - c["alpha"])) / den_b
    return xa, xb


def neighbour_states_fixed_point(m: DegreeClassModel, tol: float = 1e-14, max_iter: int = 1_000_000):
    """Solve the self-consistency relations by block Gauss-Seidel iteration.

    Eliminating ``<x_b>`` from its own relation yields a scalar contraction in
    ``<x_a>`` (factor in ``(0, 1)`` by Cauchy-Schwarz), so this converges.
    """
    c, mka, mkb = _coefficients(m.ka, m.kb, m.weight, m.a, m.b)
    xa = 0.5
    xb = 0.0
    beta = c["kakb_d"] / mka
    gamma = c["kakb_d"] / mkb if mkb > 0 else 0.0
    for _ in range(max_iter):
        xb = (c["cb"] + gamma * xa) / (1.0 + c["delta"]) if mkb > 0 else 0.0
        xa_new = c["ca"] + c["alpha"] * xa - beta * xb
        if abs(xa_new - xa) < tol:
            xa = xa_new
            break
        xa = xa_new
    else:
        raise MeanFieldError("fixed-point iteration did not converge")
    if mkb > 0:
        xb = (c["cb"] + gamma * xa) / (1.0 + c["delta"])
    return float(xa), float(xb)


def _vote_share_arrays(ka, kb, w, a, b):
    c, mka, mkb = _coefficients(ka, kb, w, a, b)
    xa, xb = _neighbour_states(c, mka, mkb)
    X = c["src"] + c["ka_d"] * xa - c["kb_d"] * xb
    return X, xa, xb


def mf_vote_share(m: DegreeClassModel, check: bool = True) -> tuple[float, float, float]:
    """Mean-field ``(X_A, <x_a>, <x_b>)``; ``check`` re-derives the neighbour states iteratively."""
    X, xa, xb = _vote_share_arrays(m.ka, m.kb, m.weight, m.a, m.b)
    if check:
        xa_fp, xb_fp = neighbour_states_fixed_point(m)
        if abs(xa_fp - xa) > 1e-10 or abs(xb_fp - xb) > 1e-10:
            raise MeanFieldError(f"closed form and fixed point disagree: {(xa, xb)} vs {(xa_fp, xb_fp)}")
    return float(X), float(xa), float(xb)


def class_states(m: DegreeClassModel) -> np.ndarray:
    """Per-class state ``x_{k_a k_b}`` at the self-consistent neighbour states."""
    _, xa, xb = _vote_share_arrays(m.ka, m.kb, m.weight, m.a, m.b)
    return (m.a + m.kb + m.ka * xa - m.kb * xb) / (m.a + m.b + m.ka + m.kb)


# ---------------------------------------------------------------------------
# structured class templates


@dataclass(frozen=True)
class ClassTemplate:
    """Class table without allocations, plus which groups carry negative ties.

    ``negative`` flags the classes with ``k_b > 0``: ``eps`` of a strategy is the
    share of budget placed on them.
    """

    name: str
    ka: np.ndarray
    kb: np.ndarray
    weight: np.ndarray

    @property
    def negative(self) -> np.ndarray:
        return self.kb > 0

    @property
    def size(self) -> int:
        return len(self.ka)

    def allocation(self, shares, budget: float) -> np.ndarray:
        """Per-node allocation for budget shares per class (shares sum to 1)."""
        shares = np.asarray(shares, dtype=float)
        return shares * budget / self.weight

    def model(self, a_shares, b_shares, budget_a: float, budget_b: float) -> DegreeClassModel:
        return DegreeClassModel(self.ka, self.kb, self.weight,
                                self.allocation(a_shares, budget_a), self.allocation(b_shares, budget_b))

    def uniform_shares(self) -> np.ndarray:
        return self.weight.copy()

    def eps(self, shares) -> float:
        return float(np.sum(np.asarray(shares)[..., self.negative], axis=-1))


def _template(name, rows):
    rows = [r for r in rows if r[2] > 1e-12]
    ka, kb, w = (np.array(col, dtype=float) for col in zip(*rows))
    return ClassTemplate(name, ka, kb, w / w.sum())


def template(name: str, p: float, ka: float = 16, kb: float = 4, cp_high: float = 30, cp_low: float = 2) -> ClassTemplate:
    """Mean-field classes of the named synthetic topologies at tie dispersion ``p``."""
    name = name.lower()
    if not 0 < p <= 1:
        raise MeanFieldError("p must lie in (0, 1]")
    k_neg = kb / p
    if name == "reg-reg":
        return _template(name, [(ka, k_neg, p), (ka, 0.0, 1 - p)])
    if name == "cp-reg-high":
        if p <= 0.5:
            rows = [(cp_high, k_neg, p), (cp_high, 0.0, 0.5 - p), (cp_low, 0.0, 0.5)]
        else:
            rows = [(cp_high, k_neg, 0.5), (cp_low, k_neg, p - 0.5), (cp_low, 0.0, 1 - p)]
        return _template(name, rows)
    if name == "cp-reg-low":
        if p <= 0.5:
            rows = [(cp_low, k_neg, p), (cp_low, 0.0, 0.5 - p), (cp_high, 0.0, 0.5)]
        else:
            rows = [(cp_low, k_neg, 0.5), (cp_high, k_neg, p - 0.5), (cp_high, 0.0, 1 - p)]
        return _template(name, rows)
    if name == "reg-cp":
        high = 2 * (k_neg - 1)
        return _template(name, [(ka, high, p / 2), (ka, 2.0, p / 2), (ka, 0.0, 1 - p)])
    raise MeanFieldError(f"no mean-field template for {name!r}")


# ---------------------------------------------------------------------------
# semi-analytical optimisation over budget shares


def simplex_grid(dim: int, step: float) -> np.ndarray:
    """All points of the ``dim``-part simplex on a lattice of spacing ``step``."""
    k = int(round(1.0 / step))
    if dim == 1:
        return np.ones((1, 1))
    if dim == 2:
        s = np.arange(k + 1) / k
        return np.stack([s, 1 - s], axis=1)
    pts = [(i, j) for i in range(k + 1) for j in range(k + 1 - i)]
    arr = np.array(pts, dtype=float) / k
    out = np.empty((len(arr), dim))
    out[:, 0] = arr[:, 0]
    out[:, 1] = arr[:, 1]
    out[:, 2] = 1 - arr[:, 0] - arr[:, 1]
    if dim > 3:
        raise MeanFieldError("at most three class groups are supported")
    return np.clip(out, 0.0, 1.0)


def _local_grid(center: np.ndarray, radius: float, n: int = 10) -> np.ndarray:
    """Lattice of simplex points within ``radius`` (per free coordinate) of ``center``."""
    dim = len(center)
    offs = np.linspace(-radius, radius, 2 * n + 1)
    pts = []
    for d in itertools.product(offs, repeat=dim - 1):
        free = center[: dim - 1] + np.array(d)
        last = 1.0 - free.sum()
        pts.append(np.append(free, last))
    pts = np.array(pts)
    ok = np.all(pts >= -1e-15, axis=1)
    return np.clip(pts[ok], 0.0, 1.0)


def maximise_over_shares(objective, dim: int, step: float = 1e-3, tol: float = 1e-6) -> tuple[np.ndarray, float]:
    """Maximise a vectorised objective of budget shares over the simplex.

    Dense lattice search at ``step`` followed by repeated local zooms until the
    lattice spacing is below ``tol``. ``objective`` maps ``(k, dim)`` to ``(k,)``.
    """
    if dim == 1:
        pts = np.ones((1, 1))
        return pts[0], float(objective(pts)[0])
    coarse = simplex_grid(dim, step if dim == 2 else max(step, 2e-3))
    vals = objective(coarse)
    i = int(np.nanargmax(vals))
    best, best_val = coarse[i], float(vals[i])
    radius = step if dim == 2 else max(step, 2e-3)
    while radius > tol:
        pts = _local_grid(best, radius)
        vals = objective(pts)
        i = int(np.nanargmax(vals))
        if vals[i] >= best_val:
            best, best_val = pts[i], float(vals[i])
        radius /= 5.0
    # lattice arithmetic leaves ~1e-20 crumbs on boundary optima
    best = np.where(best < 1e-12, 0.0, best)
    return best / best.sum(), float(objective(best[None, :] / best.sum())[0])


@dataclass(frozen=True)
class EpsResult:
    shares: np.ndarray
    eps: float
    x_star: float
    template: ClassTemplate


def mf_optimize_eps(tmpl: ClassTemplate, budget_a: float, b_alloc=1.0, step: float = 1e-3,
                    tol: float = 1e-6) -> EpsResult:
    """Best per-group budget split for A against B's per-node allocations ``b_alloc``.

    ``budget_a`` is A's budget per node. The negative-tie share ``eps`` is the
    sum of shares on groups with negative ties.
    """
    b = np.broadcast_to(np.asarray(b_alloc, dtype=float), (tmpl.size,))

    def objective(shares):
        a = shares * budget_a / tmpl.weight
        X, _, _ = _vote_share_arrays(tmpl.ka, tmpl.kb, tmpl.weight, a, b)
        return X

    shares, x_star = maximise_over_shares(objective, tmpl.size, step, tol)
    return EpsResult(shares, tmpl.eps(shares), x_star, tmpl)


# ---------------------------------------------------------------------------
# large-<k_a> limit


def limiting_allocation(k_b, b, mean_a: float, mean_b: float, mean_kb: float, clip: bool = True):
    """Optimal per-class allocation of A when ``<k_a>`` dominates budgets and ``<k_b>``.

    Linear in the class's competitor allocation ``b`` and negative degree
    ``k_b``. Negative values are clipped at zero with a warning.
    """
    denom = mean_b + mean_kb
    if denom == 0:
        raise MeanFieldError("<b> + <k_b> must be positive")
    k_b = np.asarray(k_b, dtype=float)
    b = np.asarray(b, dtype=float)
    a = 0.5 * (
        (mean_a - mean_b) / denom * b
        + (mean_a - 3 * mean_b - 2 * mean_kb) / denom * k_b
        + mean_a + mean_b + 2 * mean_kb
    )
    if clip and np.any(a < 0):
        warnings.warn("limiting allocation negative for some classes; clipped at 0", RuntimeWarning, stacklevel=2)
        a = np.maximum(a, 0.0)
    return a if a.ndim else float(a)


def limiting_slopes(mean_a: float, mean_b: float, mean_kb: float) -> tuple[float, float]:
    """``(d a*/d b, d a*/d k_b)`` of :func:`limiting_allocation`."""
    denom = mean_b + mean_kb
    return 0.5 * (mean_a - mean_b) / denom, 0.5 * (mean_a - 3 * mean_b - 2 * mean_kb) / denom


def blind_allocation(b_k, mean_a: float, mean_b: float):
    """Large-degree optimum of a player that cannot see tie signs."""
    b_k = np.asarray(b_k, dtype=float)
    return 0.5 * ((mean_a - mean_b) / mean_b * b_k + mean_a + mean_b)


# ---------------------------------------------------------------------------
# sign-blind mean-field


def _blind_arrays(k, w, a, b):
    tot = k + a + b
    if np.any((tot <= 0) & (w > 0)):
        raise MeanFieldError("class with k + a + b = 0")
    tot = np.where(tot > 0, tot, 1.0)
    num = np.sum(w * k * a / tot, axis=-1)
    den = np.sum(w * k * (a + b) / tot, axis=-1)
    if np.any(den <= 0):
        raise MeanFieldError("blind mean-field undefined without any allocation on nodes with ties")
    x = num / den
    x = np.asarray(x)[..., None] if np.ndim(x) else x
    xk_a = (k * x + a) / tot
    xk_b = (k * (1 - x) + b) / tot
    return np.sum(w * xk_a, axis=-1), np.sum(w * xk_b, axis=-1)


def mf_positive_vote_shares(classes) -> tuple[float, float]:
    """Sign-blind vote-shares ``(X_A, X_B)`` from rows ``(k, weight, a_k, b_k)``.

    Every tie is treated as positive, so only the total degree ``k`` of a class
    matters: ``x_k = (k <x> + a_k) / (k + a_k + b_k)`` with ``<x>`` the
    degree-weighted mean state.
    """
    k, w, a, b = (np.array(col, dtype=float) for col in zip(*classes))
    XA, XB = _blind_arrays(k, w, a, b)
    return float(XA), float(XB)


def blind_classes(m: DegreeClassModel):
    return list(zip(m.ka + m.kb, m.weight, m.a, m.b))
