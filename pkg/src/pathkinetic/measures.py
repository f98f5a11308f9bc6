"""
Finitely supported measures on R^d, dual pairings, moments and the flat
(bounded-Lipschitz) metric, plus time-indexed measure paths.

The flat distance between two measures is

    sup { (f, mu - nu) : |f| <= 1, |f(x) - f(y)| <= |x - y| }

which for atomic measures is a finite linear program in the values of f on
the union support. In one dimension the Lipschitz constraints reduce to
neighbouring atoms and the program is solved exactly by a linear-time sweep;
higher dimensions go to HiGHS.
"""

from __future__ import annotations

import bisect
import csv
import enum
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import EvaluationError, NumericError, StructuralError, UnsupportedKindError

MERGE_TOL = 1e-12
MASS_TOL = 1e-12
GRID_TOL = 1e-12
MAX_LP_ATOMS = 512

PROBABILITY = "probability"
SIGNED = "signed"


class FunctionClass(str, enum.Enum):
    """Function spaces whose unit balls act as test-function classes."""

    SUP = "SUP"  # C_inf, sup|f|
    C1 = "C1"  # C^1_inf, sup|grad f|
    C2 = "C2"  # C^2_inf, sup(|grad f| + |hess f|)
    LIP = "LIP"  # C_Lip, max(sup|f|, Lip f); the ball dual to the flat metric


def _as_atoms(atoms) -> np.ndarray:
    arr = np.asarray(atoms, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise StructuralError(f"atoms must have shape (n, d), got {arr.shape}")
    return arr


def _merge(atoms: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort(atoms.T[::-1])
    atoms = atoms[order]
    weights = weights[order]
    if len(atoms) == 1:
        return atoms, weights
    scale = np.maximum(1.0, np.abs(atoms[:-1]).max(axis=1))
    same = np.abs(np.diff(atoms, axis=0)).max(axis=1) <= MERGE_TOL * scale
    if not same.any():
        return atoms, weights
    starts = np.concatenate([[True], ~same])
    group = np.cumsum(starts) - 1
    merged_w = np.bincount(group, weights=weights)
    return atoms[starts], merged_w


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atomic measure sum_i w_i delta_{x_i} on R^d.

    Atoms are stored sorted lexicographically with coincident atoms merged,
    so two equal measures have identical arrays.
    """

    atoms: np.ndarray
    weights: np.ndarray
    kind: str = PROBABILITY

    def __post_init__(self):
        atoms = _as_atoms(self.atoms)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(atoms) != len(weights):
            raise StructuralError(
                f"{len(atoms)} atoms but {len(weights)} weights"
            )
        if len(atoms) == 0:
            raise StructuralError("a measure needs at least one atom; use DiscreteMeasure.zero")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise StructuralError("atoms and weights must be finite")
        if self.kind not in (PROBABILITY, SIGNED):
            raise StructuralError(f"unknown mass kind {self.kind!r}")
        atoms, weights = _merge(atoms, weights)
        if self.kind == PROBABILITY:
            if weights.min() < 0:
                raise StructuralError(f"negative weight {weights.min():.3g} in probability measure")
            if abs(weights.sum() - 1.0) > MASS_TOL:
                raise StructuralError(f"probability weights sum to {weights.sum()!r}")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def _trusted(cls, atoms: np.ndarray, weights: np.ndarray, kind: str = PROBABILITY):
        """Build without validation; atoms must already be sorted and distinct."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "atoms", atoms)
        object.__setattr__(obj, "weights", weights)
        object.__setattr__(obj, "kind", kind)
        return obj

    @classmethod
    def point(cls, x) -> "DiscreteMeasure":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(x.reshape(1, -1), [1.0])

    @classmethod
    def zero(cls, d: int = 1) -> "DiscreteMeasure":
        return cls(np.zeros((1, d)), [0.0], kind=SIGNED)

    @classmethod
    def from_samples(cls, samples) -> "DiscreteMeasure":
        """Empirical measure with weight 1/N per sample."""
        pts = _as_atoms(samples)
        n = len(pts)
        return cls(pts, np.full(n, 1.0 / n))

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def weight_at(self, x) -> float:
        """Weight carried by the atom at x (0 if absent)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        hit = np.abs(self.atoms - x).max(axis=1) <= MERGE_TOL * max(1.0, np.abs(x).max())
        return float(self.weights[hit].sum())

    def __sub__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return combine([(1.0, self), (-1.0, other)], kind=SIGNED)

    def allclose(self, other: "DiscreteMeasure", atol: float = 0.0) -> bool:
        return flat_distance(self, other) <= atol

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "kind": self.kind,
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteMeasure":
        atoms = np.asarray(data["atoms"], dtype=float).reshape(-1, int(data["d"]))
        return cls(atoms, data["weights"], kind=data.get("kind", PROBABILITY))

    def __repr__(self):
        return f"DiscreteMeasure(d={self.d}, atoms={self.size}, mass={self.mass:.6g}, kind={self.kind})"


def combine(terms: Sequence[tuple[float, DiscreteMeasure]], kind: str | None = None) -> DiscreteMeasure:
    """Linear combination sum_k c_k mu_k, merging atoms."""
    coeffs = [float(c) for c, _ in terms]
    measures = [m for _, m in terms]
    d = measures[0].d
    if any(m.d != d for m in measures):
        raise StructuralError("cannot combine measures of different dimension")
    if kind is None:
        convex = all(c >= 0 for c in coeffs) and abs(sum(coeffs) - 1.0) <= MASS_TOL
        kind = PROBABILITY if convex and all(m.kind == PROBABILITY for m in measures) else SIGNED
    first = measures[0].atoms
    if all(m.atoms is first or (m.atoms.shape == first.shape and np.array_equal(m.atoms, first)) for m in measures):
        w = sum(c * m.weights for c, m in zip(coeffs, measures))
        if kind == PROBABILITY:
            w = np.clip(w, 0.0, None)
            w = w / w.sum()
        return DiscreteMeasure._trusted(first, w, kind)
    atoms = np.concatenate([m.atoms for m in measures])
    weights = np.concatenate([c * m.weights for c, m in zip(coeffs, measures)])
    if kind == PROBABILITY:
        weights = np.clip(weights, 0.0, None)
        weights = weights / weights.sum()
    return DiscreteMeasure(atoms, weights, kind=kind)


def mix(mu: DiscreteMeasure, nu: DiscreteMeasure, theta: float) -> DiscreteMeasure:
    """Convex combination (1 - theta) mu + theta nu."""
    if theta == 0.0:
        return mu
    if theta == 1.0:
        return nu
    return combine([(1.0 - theta, mu), (theta, nu)])


def _evaluate(f: Callable, atoms: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(atoms), dtype=float).reshape(-1)
    if vals.shape[0] != atoms.shape[0]:
        raise StructuralError(f"test function returned {vals.shape[0]} values for {atoms.shape[0]} atoms")
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        label = getattr(f, "label", getattr(f, "__name__", "f"))
        raise EvaluationError(f"{label} is not finite at atom {atoms[i].tolist()}")
    return vals


def pairing(f: Callable, mu: DiscreteMeasure) -> float:
    """Dual pairing (f, mu) = sum_i w_i f(x_i); exact for atomic measures."""
    return float(mu.weights @ _evaluate(f, mu.atoms))


def moment(mu: DiscreteMeasure, p: float) -> float:
    """p-th absolute moment int |x|^p mu(dx)."""
    if mu.kind != PROBABILITY:
        raise UnsupportedKindError("moments are defined for probability measures only")
    if p <= 0:
        raise ValueError("moment order must be positive")
    r = np.linalg.norm(mu.atoms, axis=1)
    return float(mu.weights @ r**p)


# ---------------------------------------------------------------------------
# flat metric


def _sweep_flat_1d(x: np.ndarray, s: np.ndarray) -> float:
    """max sum s_i f_i over |f_i| <= 1, |f_{i+1} - f_i| <= x_{i+1} - x_i, for sorted x.

    The value function F_i(v) (best partial sum with f_i = v) is concave and
    piecewise linear on [-1, 1]. It is stored as segments of decreasing slope
    with a lazy slope offset, plus its value at v = -1. Passing a gap g widens
    the peak by a flat piece of length 2g and trims g from both ends.
    """
    neg = [-float(s[0])]  # minus stored slopes, ascending
    seg = [2.0]
    off = 0.0
    left = -float(s[0])
    for i in range(1, len(x)):
        g = float(x[i] - x[i - 1])
        if g >= 2.0:
            peak = left
            for ns, ln in zip(neg, seg):
                sl = off - ns
                if sl <= 0:
                    break
                peak += sl * ln
            neg, seg, off, left = [0.0], [2.0], 0.0, peak
        elif g > 0.0:
            j = bisect.bisect_left(neg, off)  # first segment with actual slope <= 0
            neg.insert(j, off)
            seg.insert(j, 2.0 * g)
            cut = g
            while cut > 0.0:
                take = min(cut, seg[0])
                left += (off - neg[0]) * take
                seg[0] -= take
                cut -= take
                if seg[0] <= 0.0:
                    neg.pop(0)
                    seg.pop(0)
            cut = g
            while cut > 0.0:
                take = min(cut, seg[-1])
                seg[-1] -= take
                cut -= take
                if seg[-1] <= 0.0:
                    neg.pop()
                    seg.pop()
        si = float(s[i])
        off += si
        left -= si
    best = left
    acc = left
    for ns, ln in zip(neg, seg):
        sl = off - ns
        if sl <= 0:
            break
        acc += sl * ln
        best = acc
    return best


def _lp_flat(x: np.ndarray, s: np.ndarray) -> float:
    n, d = x.shape
    scale = np.abs(s).max()
    c = -s / scale
    if d == 1:
        order = np.argsort(x[:, 0])
        xs = x[order, 0]
        c = c[order]
        gaps = np.diff(xs)
        m = n - 1
        D = sparse.diags([np.ones(m), -np.ones(m)], [0, 1], shape=(m, n))
        rhs = gaps
    else:
        i, j = np.triu_indices(n, 1)
        m = len(i)
        rows = np.repeat(np.arange(m), 2)
        cols = np.stack([i, j], axis=1).reshape(-1)
        vals = np.tile([1.0, -1.0], m)
        D = sparse.csr_matrix((vals, (rows, cols)), shape=(m, n))
        rhs = np.linalg.norm(x[i] - x[j], axis=1)
    A = sparse.vstack([D, -D]).tocsc()
    b = np.concatenate([rhs, rhs])
    res = linprog(c, A_ub=A, b_ub=b, bounds=(-1.0, 1.0), method="highs")
    if res.status != 0:
        dump = json.dumps({"atoms": x.tolist(), "signed_weights": s.tolist()})
        raise NumericError(f"flat-metric LP failed ({res.message}); instance: {dump}")
    return float(-res.fun * scale)


def flat_norm(atoms: np.ndarray, signed_weights: np.ndarray) -> float:
    """Flat norm of the signed measure sum_i s_i delta_{x_i}."""
    x = _as_atoms(atoms)
    s = np.asarray(signed_weights, dtype=float).reshape(-1)
    x, s = _merge(x, s)
    keep = s != 0.0
    if not keep.any():
        return 0.0
    if keep.sum() == 1:
        return float(abs(s[keep][0]))
    if x.shape[1] == 1:
        return max(0.0, _sweep_flat_1d(x[:, 0], s))
    return max(0.0, _lp_flat(x, s))


def _check_dims(mu: DiscreteMeasure, nu: DiscreteMeasure):
    if mu.d != nu.d:
        raise StructuralError(f"dimension mismatch: {mu.d} vs {nu.d}")


def flat_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exact flat (bounded-Lipschitz) distance between two atomic measures."""
    _check_dims(mu, nu)
    if mu.atoms is nu.atoms or (mu.atoms.shape == nu.atoms.shape and np.array_equal(mu.atoms, nu.atoms)):
        return flat_norm(mu.atoms, mu.weights - nu.weights)
    atoms = np.concatenate([mu.atoms, nu.atoms])
    weights = np.concatenate([mu.weights, -nu.weights])
    return flat_norm(atoms, weights)


def coarsen_pair(mu: DiscreteMeasure, nu: DiscreteMeasure, max_atoms: int = MAX_LP_ATOMS):
    """Jointly bin two measures on a common grid, keeping mass and bin centroids.

    Returns (mu', nu', radius) where radius bounds how far any atom moved.
    Each measure keeps one atom per occupied bin, so the union support has at
    most max_atoms atoms.
    """
    _check_dims(mu, nu)
    d = mu.d
    per_dim = max(1, int(np.floor((max_atoms // 2) ** (1.0 / d))))
    both = np.concatenate([mu.atoms, nu.atoms])
    lo = both.min(axis=0)
    hi = both.max(axis=0)
    width = np.where(hi > lo, (hi - lo) / per_dim, 1.0)

    def _bin(m: DiscreteMeasure):
        idx = np.minimum(((m.atoms - lo) / width).astype(np.int64), per_dim - 1)
        key = np.ravel_multi_index(idx.T, (per_dim,) * d)
        uniq, inv = np.unique(key, return_inverse=True)
        w = np.bincount(inv, weights=m.weights, minlength=len(uniq))
        abs_w = np.bincount(inv, weights=np.abs(m.weights), minlength=len(uniq))
        cen = np.stack(
            [np.bincount(inv, weights=np.abs(m.weights) * m.atoms[:, k], minlength=len(uniq)) for k in range(d)],
            axis=1,
        )
        safe = np.where(abs_w > 0, abs_w, 1.0)
        cen = cen / safe[:, None]
        empty = abs_w == 0
        if empty.any():
            centers = lo + (np.stack(np.unravel_index(uniq[empty], (per_dim,) * d), axis=1) + 0.5) * width
            cen[empty] = centers
        if m.kind == PROBABILITY:
            w = np.clip(w, 0.0, None)
            w = w / w.sum()
        return DiscreteMeasure(cen, w, kind=m.kind)

    radius = float(np.linalg.norm(width))
    return _bin(mu), _bin(nu), radius


def coarse_flat_distance(mu: DiscreteMeasure, nu: DiscreteMeasure, max_atoms: int = MAX_LP_ATOMS) -> float:
    """flat_distance after joint binning when the union support is too large."""
    if mu.size + nu.size <= max_atoms:
        return flat_distance(mu, nu)
    a, b, _ = coarsen_pair(mu, nu, max_atoms)
    return flat_distance(a, b)


def coarsen(mu: DiscreteMeasure, max_atoms: int) -> DiscreteMeasure:
    """Bin a single measure to at most max_atoms weighted centroids (identity if already small)."""
    if mu.size <= max_atoms:
        return mu
    a, _, _ = coarsen_pair(mu, mu, 2 * max_atoms)
    return a


# ---------------------------------------------------------------------------
# paths


def uniform_grid(t0: float, t1: float, h: float) -> np.ndarray:
    n = int(round((t1 - t0) / h))
    if n < 1 or abs(n * h - (t1 - t0)) > 1e-9 * max(1.0, abs(t1)):
        raise StructuralError(f"step {h} does not divide [{t0}, {t1}]")
    return t0 + h * np.arange(n + 1)


def _basis(m: int) -> np.ndarray:
    """Coefficient rows (highest power first) of the Lagrange basis on nodes 0..m-1."""
    nodes = np.arange(m, dtype=float)
    rows = []
    for i in range(m):
        others = np.delete(nodes, i)
        rows.append(np.poly(others) / np.prod(nodes[i] - others))
    return np.array(rows)


_BASIS = {m: _basis(m) for m in (2, 4)}
_PRIMS = {m: np.array([np.polyint(r) for r in c]) for m, c in _BASIS.items()}


def _lagrange(m: int, u: float) -> np.ndarray:
    return _BASIS[m] @ (u ** np.arange(m - 1, -1, -1.0))


def _interval_weights(m: int, a: float, b: float) -> np.ndarray:
    """Integrals of the Lagrange basis over [a, b] in node units."""
    p = np.arange(m, -1, -1.0)
    return _PRIMS[m] @ (b**p - a**p)


@dataclass(frozen=True, eq=False)
class MeasurePath:
    """One measure per node of a uniform time grid."""

    grid: np.ndarray
    measures: tuple
    initial_locked: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).reshape(-1)
        measures = tuple(self.measures)
        if len(grid) != len(measures):
            raise StructuralError(f"{len(grid)} grid nodes but {len(measures)} measures")
        if len(grid) >= 2:
            steps = np.diff(grid)
            if steps.min() <= 0:
                raise StructuralError("grid must be strictly increasing")
            if steps.max() - steps.min() > GRID_TOL * max(1.0, abs(grid[-1])):
                raise StructuralError("grid must be uniform")
        if grid[0] < -GRID_TOL:
            raise StructuralError("grid must start at t >= 0")
        kinds = {m.kind for m in measures}
        dims = {m.d for m in measures}
        if len(kinds) > 1 or len(dims) > 1:
            raise StructuralError("all measures on a path must share kind and dimension")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "measures", measures)

    @classmethod
    def constant(cls, mu: DiscreteMeasure, grid) -> "MeasurePath":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, (mu,) * len(grid))

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0]) if len(self.grid) > 1 else 0.0

    @property
    def t0(self) -> float:
        return float(self.grid[0])

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    @property
    def d(self) -> int:
        return self.measures[0].d

    @property
    def kind(self) -> str:
        return self.measures[0].kind

    def __len__(self):
        return len(self.measures)

    def __getitem__(self, k: int) -> DiscreteMeasure:
        return self.measures[k]

    @property
    def initial(self) -> DiscreteMeasure:
        return self.measures[0]

    @property
    def final(self) -> DiscreteMeasure:
        return self.measures[-1]

    def index_of(self, t: float) -> int:
        """Index of the node equal to t (within grid tolerance)."""
        k = int(round((t - self.t0) / self.h)) if self.h else 0
        if k < 0 or k >= len(self.grid) or abs(self.grid[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise StructuralError(f"time {t} is not a grid node")
        return k

    def _locate(self, t: float) -> tuple[int, float]:
        if self.h == 0.0:
            return 0, 0.0
        tol = 1e-12 * max(1.0, abs(self.T))
        if t < self.t0 - tol or t > self.T + tol:
            raise StructuralError(f"time {t} outside path [{self.t0}, {self.T}]")
        u = (t - self.t0) / self.h
        k = int(np.floor(u + 1e-9))
        k = min(max(k, 0), len(self.grid) - 1)
        theta = u - k
        if theta < 1e-9 or k == len(self.grid) - 1:
            return k, 0.0
        return k, theta

    def at(self, t: float) -> DiscreteMeasure:
        """Measure at time t, linearly interpolated (as a mixture) between nodes.

        Pairings between nodes use the cubic interpolant of pairing_at instead.
        """
        k, theta = self._locate(t)
        if theta == 0.0:
            return self.measures[k]
        return mix(self.measures[k], self.measures[k + 1], theta)

    def series(self, g: Callable) -> np.ndarray:
        """Node values of the pairing (g, mu_t), cached per function object."""
        key = id(g)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is g:
            return hit[1]
        vals = np.array([pairing(g, m) for m in self.measures])
        vals.setflags(write=False)
        self._cache[key] = (g, vals)
        return vals

    def cumulative(self, g: Callable) -> np.ndarray:
        """Running integral of the interpolated (g, mu_s) at every node."""
        key = ("cum", id(g))
        hit = self._cache.get(key)
        if hit is not None and hit[0] is g:
            return hit[1]
        v = self.series(g)
        n = len(v) - 1
        pieces = np.empty(n)
        for k in range(n):
            j0, m = self._stencil(k)
            u = k - j0
            pieces[k] = self.h * (_interval_weights(m, u, u + 1.0) @ v[j0 : j0 + m])
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        cum.setflags(write=False)
        self._cache[key] = (g, cum)
        return cum

    def _stencil(self, k: int) -> tuple[int, int]:
        """First node and size of the interpolation stencil used on [t_k, t_{k+1}]."""
        n = len(self.grid)
        if n < 4:
            return k, 2
        return min(max(k - 1, 0), n - 4), 4

    def pairing_at(self, g: Callable, t: float) -> float:
        """(g, mu_t), read off a cubic interpolant of the node values between nodes."""
        k, theta = self._locate(t)
        v = self.series(g)
        if theta == 0.0:
            return float(v[k])
        j0, m = self._stencil(k)
        u = k - j0 + theta
        return float(_lagrange(m, u) @ v[j0 : j0 + m])

    def integral(self, g: Callable, t0: float, t1: float) -> float:
        """int_{t0}^{t1} (g, mu_s) ds for the interpolated pairing."""
        return self._primitive(g, t1) - self._primitive(g, t0)

    def _primitive(self, g: Callable, t: float) -> float:
        k, theta = self._locate(t)
        cum = self.cumulative(g)
        if theta == 0.0:
            return float(cum[k])
        v = self.series(g)
        j0, m = self._stencil(k)
        u = k - j0
        return float(cum[k] + self.h * (_interval_weights(m, u, u + theta) @ v[j0 : j0 + m]))

    def slice(self, i0: int, i1: int) -> "MeasurePath":
        """Sub-path on nodes i0..i1 inclusive."""
        return MeasurePath(self.grid[i0 : i1 + 1], self.measures[i0 : i1 + 1], self.initial_locked)

    def replace(self, k: int, mu: DiscreteMeasure) -> "MeasurePath":
        ms = list(self.measures)
        ms[k] = mu
        return MeasurePath(self.grid, ms, self.initial_locked and k != 0)

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "T": self.T,
            "h": self.h,
            "measures": [m.to_dict() for m in self.measures],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurePath":
        ms = [DiscreteMeasure.from_dict(m) for m in data["measures"]]
        t0 = float(data.get("t0", 0.0))
        grid = t0 + float(data["h"]) * np.arange(len(ms))
        return cls(grid, ms)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.d
        w.writerow(["t"] + ([f"x{k}" for k in range(d)] if d > 1 else ["atom"]) + ["weight"])
        for t, m in zip(self.grid, self.measures):
            for x, wt in zip(m.atoms, m.weights):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(wt))])
        return buf.getvalue()


def concat_paths(paths: Sequence[MeasurePath]) -> MeasurePath:
    """Join consecutive paths that share their boundary node."""
    grid = [paths[0].grid]
    measures = list(paths[0].measures)
    for p in paths[1:]:
        grid.append(p.grid[1:])
        measures.extend(p.measures[1:])
    return MeasurePath(np.concatenate(grid), measures)


def path_distance_profile(xi: MeasurePath, eta: MeasurePath, max_atoms: int = MAX_LP_ATOMS) -> np.ndarray:
    """Node-wise flat distances between two paths on the same grid."""
    if len(xi.grid) != len(eta.grid) or np.abs(xi.grid - eta.grid).max() > GRID_TOL * max(1.0, xi.T):
        raise StructuralError("paths live on different grids")
    return np.array(
        [0.0 if a is b else coarse_flat_distance(a, b, max_atoms) for a, b in zip(xi.measures, eta.measures)]
    )


def path_distance(xi: MeasurePath, eta: MeasurePath, max_atoms: int = MAX_LP_ATOMS) -> float:
    """sup over grid nodes of the flat distance."""
    return float(path_distance_profile(xi, eta, max_atoms).max())
