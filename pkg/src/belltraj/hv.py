"""Hidden-variable side of the trajectory Bell test.

Two constructions live here:

* Classical trajectory ensembles.  For any shared random variable lambda
  with trajectory responses X^a(t), Y^b(t) and any subadditive f,

      S = E[ f(Y^0 - X^0) + f(X^0 - Y^1) + f(X^1 - Y^0) - f(X^1 - Y^1) ] >= 0

  because X^1 - Y^1 = (X^1 - Y^0) + (Y^0 - X^0) + (X^0 - Y^1) termwise and
  f of a sum never exceeds the sum of f's.  No symmetry of f is needed with
  this ordering of arguments; for symmetric f (e.g. the modulus) it reduces
  to the familiar combination f(X^0 - Y^0) + ... .  The same telescoping
  argument applies to subadditive functionals of whole trajectories.

* Lattice walks.  The per-step site distribution of a unitary walk is
  doubly stochastic (|U|^2), hence a convex mixture of permutations
  (Birkhoff); drawing one permutation per step yields explicit classical
  trajectories that reproduce the quantum site statistics step by step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
import scipy.linalg as sla
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.stats import unitary_group

from .errors import AccuracyError

SUBADDITIVITY_TOL = 1e-12
UNITARITY_TOL = 1e-10
REPAIR_TOL = 1e-9
SUPPORT_TOL = 1e-12
RESIDUAL_TOL = 1e-10


# ----------------------------------------------------------------------
# continuous trajectories


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Weighted ensemble of classical trajectory responses.

    Row i of x0, x1, y0, y1 holds the four coordinate records produced by
    the i-th value of the shared hidden variable (weight weights[i]) for
    the two settings of each party, sampled on the common grid times.
    """

    times: np.ndarray
    weights: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if weights.ndim != 1 or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to one")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "weights", weights / weights.sum())
        for name in ("x0", "x1", "y0", "y1"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (weights.size, times.size) or not np.all(np.isfinite(arr)):
                raise ValueError("%s must be finite with shape (members, times)" % name)
            object.__setattr__(self, name, arr)

    @property
    def n_members(self) -> int:
        return self.weights.size

    @classmethod
    def random(cls, seed: int, n_members: int = 8, times: np.ndarray | None = None,
               knots: int = 5, scale: float = 2.0) -> "TrajectoryEnsemble":
        """Smooth random ensemble: piecewise-linear trajectories through
        normal knot values, Dirichlet weights."""
        if times is None:
            times = np.linspace(0.0, 3.0, 64)
        times = np.asarray(times, dtype=float)
        rng = np.random.default_rng(seed)
        knot_t = np.linspace(times[0], times[-1], knots)

        def draw():
            vals = rng.normal(0.0, scale, size=(n_members, knots))
            return np.vstack([np.interp(times, knot_t, row) for row in vals])

        return cls(times=times, weights=rng.dirichlet(np.ones(n_members)),
                   x0=draw(), x1=draw(), y0=draw(), y1=draw())


@dataclass(frozen=True)
class SubadditiveFunctional:
    """Pointwise subadditive map f: f(u + v) <= f(u) + f(v).

    fn must act elementwise on arrays.  Constructors run the randomised
    self-test; symmetric records whether f(-u) = f(u) (informational).
    """

    fn: object
    name: str
    symmetric: bool

    def __call__(self, values):
        return self.fn(np.asarray(values, dtype=float))

    def self_test(self, seed: int = 7, n_checks: int = 1000, scale: float = 3.0) -> float:
        rng = np.random.default_rng(seed)
        u = rng.normal(0.0, scale, n_checks)
        v = rng.normal(0.0, scale, n_checks)
        viol = self(u + v) - self(u) - self(v)
        return float(viol.max())

    @classmethod
    def absolute(cls) -> "SubadditiveFunctional":
        return cls(fn=np.abs, name="abs", symmetric=True)

    @classmethod
    def from_callable(cls, fn, name: str = "custom", symmetric: bool = False,
                      seed: int = 7, n_checks: int = 1000) -> "SubadditiveFunctional":
        out = cls(fn=fn, name=name, symmetric=symmetric)
        probe = out(np.array([0.25, -0.5]))
        if np.shape(probe) != (2,):
            raise ValueError("fn must act elementwise on arrays")
        worst = out.self_test(seed=seed, n_checks=n_checks)
        if worst > SUBADDITIVITY_TOL:
            raise ValueError("fn failed the subadditivity self-test by %.3e" % worst)
        return out


@dataclass(frozen=True)
class TrajectoryFunctional:
    """Subadditive functional of a whole sampled trajectory z(times)."""

    fn: object
    name: str

    def __call__(self, z: np.ndarray, times: np.ndarray) -> float:
        return float(self.fn(np.asarray(z, dtype=float), np.asarray(times, dtype=float)))

    def self_test(self, seed: int = 11, n_checks: int = 200, n_points: int = 64,
                  scale: float = 3.0) -> float:
        rng = np.random.default_rng(seed)
        times = np.linspace(0.0, 3.0, n_points)
        worst = -np.inf
        for _ in range(n_checks):
            u = rng.normal(0.0, scale, n_points)
            v = rng.normal(0.0, scale, n_points)
            worst = max(worst, self(u + v, times) - self(u, times) - self(v, times))
        return float(worst)

    @classmethod
    def time_integral(cls, sub: SubadditiveFunctional) -> "TrajectoryFunctional":
        return cls(fn=lambda z, t: trapezoid(sub(z), t), name="integral[%s]" % sub.name)

    @classmethod
    def peak(cls, sub: SubadditiveFunctional) -> "TrajectoryFunctional":
        return cls(fn=lambda z, t: np.max(sub(z)), name="peak[%s]" % sub.name)


@dataclass(frozen=True)
class ClassicalBellResult:
    times: np.ndarray
    s_of_t: np.ndarray
    s_integral: float
    min_pointwise: float


def classical_bell_S(ensemble: TrajectoryEnsemble,
                     f: SubadditiveFunctional | None = None) -> ClassicalBellResult:
    """Ensemble average of the four-term combination at every grid time.

    Uses the orientation-safe ordering (first argument is Y^0 - X^0), so
    the non-negativity theorem holds for any subadditive f, symmetric or
    not.  Returns the time series, its time integral, and its minimum.
    """
    if f is None:
        f = SubadditiveFunctional.absolute()
    w = ensemble.weights
    combo = (f(ensemble.y0 - ensemble.x0) + f(ensemble.x0 - ensemble.y1)
             + f(ensemble.x1 - ensemble.y0) - f(ensemble.x1 - ensemble.y1))
    s_of_t = w @ combo
    return ClassicalBellResult(
        times=ensemble.times, s_of_t=s_of_t,
        s_integral=float(trapezoid(s_of_t, ensemble.times)),
        min_pointwise=float(s_of_t.min()),
    )


def classical_bell_S_generalized(ensemble: TrajectoryEnsemble,
                                 functional: TrajectoryFunctional) -> float:
    """Four-term combination for a functional of whole trajectories."""
    total = 0.0
    t = ensemble.times
    for i, w in enumerate(ensemble.weights):
        total += w * (functional(ensemble.y0[i] - ensemble.x0[i], t)
                      + functional(ensemble.x0[i] - ensemble.y1[i], t)
                      + functional(ensemble.x1[i] - ensemble.y0[i], t)
                      - functional(ensemble.x1[i] - ensemble.y1[i], t))
    return float(total)


# ----------------------------------------------------------------------
# lattice walks


def doubly_stochastic_from_unitary(u: np.ndarray, repair: bool = False) -> np.ndarray:
    """Elementwise |U|^2 of a unitary, validated doubly stochastic.

    With repair=False the input must be unitary within UNITARITY_TOL.  With
    repair=True inputs off by up to REPAIR_TOL are accepted and the row and
    column sums are evened out by Sinkhorn balancing.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("input must be a square matrix")
    dev_u = float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())
    limit = REPAIR_TOL if repair else UNITARITY_TOL
    if dev_u > limit:
        raise ValueError("matrix is not unitary within %.1e (deviation %.3e)" % (limit, dev_u))
    k = np.abs(u) ** 2
    if repair:
        for _ in range(200):
            k = k / k.sum(axis=1, keepdims=True)
            k = k / k.sum(axis=0, keepdims=True)
            dev = max(np.abs(k.sum(axis=1) - 1.0).max(), np.abs(k.sum(axis=0) - 1.0).max())
            if dev <= 1e-15:
                break
        else:
            raise AccuracyError("Sinkhorn balancing did not converge")
    else:
        dev = max(np.abs(k.sum(axis=1) - 1.0).max(), np.abs(k.sum(axis=0) - 1.0).max())
        if dev > 1e-12:
            raise ValueError("row/column sums deviate by %.3e; consider repair=True" % dev)
    return k


@dataclass(frozen=True)
class BirkhoffDecomposition:
    """Convex combination of permutations: K = sum_j weights[j] P_j with
    P_j[site_maps[j, c], c] = 1, i.e. term j sends site c to site_maps[j, c].
    """

    site_maps: np.ndarray
    weights: np.ndarray
    residual: float
    n_sites: int

    def __post_init__(self):
        maps = np.asarray(self.site_maps, dtype=int)
        w = np.asarray(self.weights, dtype=float)
        if maps.ndim != 2 or maps.shape != (w.size, self.n_sites):
            raise ValueError("site_maps must have shape (terms, n_sites)")
        if np.any(np.sort(maps, axis=1) != np.arange(self.n_sites)):
            raise ValueError("every site map must be a permutation")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "site_maps", maps)
        object.__setattr__(self, "weights", w)

    @property
    def n_terms(self) -> int:
        return self.weights.size

    @property
    def term_bound(self) -> int:
        """Caratheodory bound (n_sites - 1)^2 + 1 on the terms needed."""
        return (self.n_sites - 1) ** 2 + 1

    def reconstruct(self) -> np.ndarray:
        out = np.zeros((self.n_sites, self.n_sites))
        cols = np.arange(self.n_sites)
        for mp, w in zip(self.site_maps, self.weights):
            out[mp, cols] += w
        return out


def _prune_to_caratheodory(maps: np.ndarray, weights: np.ndarray, m: int):
    """Shrink a convex combination of permutations to at most (m-1)^2 + 1
    terms without changing the represented matrix: any larger family is
    affinely dependent, so weight can be shifted along a null direction
    until some term hits zero."""
    target = (m - 1) ** 2 + 1
    while weights.size > target:
        a = np.zeros((m * m + 1, weights.size))
        cols = np.arange(m)
        for j in range(weights.size):
            a[maps[j] * m + cols, j] = 1.0
        a[-1, :] = 1.0
        null = sla.null_space(a)
        if null.shape[1] == 0:
            break
        g = null[:, 0]
        if g.max() <= 0.0:
            g = -g
        pos = g > 1e-14
        if not pos.any():
            break
        tau = float((weights[pos] / g[pos]).min())
        weights = weights - tau * g
        keep = weights > 1e-15
        if keep.all():
            break
        maps, weights = maps[keep], weights[keep]
    return maps, weights


def birkhoff_decompose(k_matrix: np.ndarray, support_tol: float = SUPPORT_TOL,
                       residual_tol: float = RESIDUAL_TOL,
                       prune: bool = True) -> BirkhoffDecomposition:
    """Greedy peeling decomposition of a doubly stochastic matrix.

    Repeatedly finds a perfect matching on the support above support_tol,
    subtracts the smallest covered entry, and stops once every residual
    entry is below residual_tol.  With prune=True the term list is then
    reduced to the Caratheodory bound (n_sites - 1)^2 + 1.
    """
    k = np.asarray(k_matrix, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("input must be a square matrix")
    m = k.shape[0]
    if np.any(k < -1e-12):
        raise ValueError("matrix has negative entries")
    sums_dev = max(np.abs(k.sum(axis=1) - 1.0).max(), np.abs(k.sum(axis=0) - 1.0).max())
    if sums_dev > 1e-9:
        raise ValueError("matrix is not doubly stochastic (deviation %.3e)" % sums_dev)

    residual = k.copy()
    rows = np.arange(m)
    maps_list, weight_list = [], []
    for _ in range(m * m + 1):
        if float(residual.max()) < residual_tol:
            break
        support = csr_matrix(residual > support_tol)
        match_cols = maximum_bipartite_matching(support, perm_type="column")
        if np.any(match_cols < 0):
            raise AccuracyError(
                "support lost a perfect matching before reaching the residual tolerance"
            )
        w = float(residual[rows, match_cols].min())
        site_map = np.empty(m, dtype=int)
        site_map[match_cols] = rows  # column c -> matched row
        maps_list.append(site_map)
        weight_list.append(w)
        residual[rows, match_cols] -= w
        np.maximum(residual, 0.0, out=residual)
    else:
        raise AccuracyError("greedy peeling failed to terminate")
    if float(residual.max()) >= residual_tol:
        raise AccuracyError("greedy peeling left a residual above tolerance")

    maps = np.asarray(maps_list, dtype=int)
    weights = np.asarray(weight_list, dtype=float)
    if prune:
        maps, weights = _prune_to_caratheodory(maps, weights, m)
    return BirkhoffDecomposition(site_maps=maps, weights=weights,
                                 residual=float(residual.max()), n_sites=m)


def corrupt_decomposition(dec: BirkhoffDecomposition) -> BirkhoffDecomposition:
    """Negative-control helper: skew the weights by their term index (so
    even equal-weight decompositions are altered) while keeping the total;
    the result no longer reproduces its matrix."""
    if dec.n_terms < 2:
        raise ValueError("cannot corrupt a single-term decomposition")
    w = dec.weights * (1.0 + np.arange(dec.n_terms))
    w = w * (dec.weights.sum() / w.sum())
    return BirkhoffDecomposition(site_maps=dec.site_maps.copy(), weights=w,
                                 residual=dec.residual, n_sites=dec.n_sites)


@dataclass(frozen=True)
class LatticeModel:
    """Unitary walk on a ring of n_sites sites: one unitary per step."""

    n_sites: int
    n_steps: int
    spacing: float
    total_time: float
    propagators: tuple

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("n_sites must be at least 2")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if not (self.spacing > 0.0 and self.total_time > 0.0):
            raise ValueError("spacing and total_time must be positive")
        props = tuple(np.asarray(u, dtype=complex) for u in self.propagators)
        if len(props) != self.n_steps:
            raise ValueError("need exactly one propagator per step")
        eye = np.eye(self.n_sites)
        for u in props:
            if u.shape != (self.n_sites, self.n_sites):
                raise ValueError("propagator shape mismatch")
            if float(np.abs(u.conj().T @ u - eye).max()) > UNITARITY_TOL:
                raise ValueError("step propagator is not unitary within tolerance")
        object.__setattr__(self, "propagators", props)

    @property
    def step_duration(self) -> float:
        return self.total_time / self.n_steps

    def step_stochastic(self, repair: bool = False) -> list:
        return [doubly_stochastic_from_unitary(u, repair=repair) for u in self.propagators]

    @classmethod
    def dft_walk(cls, n_sites: int = 4, n_steps: int = 2, spacing: float = 1.0,
                 total_time: float = 1.0) -> "LatticeModel":
        j = np.arange(n_sites)
        f = np.exp(-2j * np.pi * np.outer(j, j) / n_sites) / np.sqrt(n_sites)
        return cls(n_sites, n_steps, spacing, total_time, (f,) * n_steps)

    @classmethod
    def random_walk(cls, n_sites: int, n_steps: int, seed: int, spacing: float = 1.0,
                    total_time: float = 1.0) -> "LatticeModel":
        rng = np.random.default_rng(seed)
        props = tuple(unitary_group.rvs(n_sites, random_state=rng) for _ in range(n_steps))
        return cls(n_sites, n_steps, spacing, total_time, props)


def sample_hv_trajectory(model: LatticeModel, m0: int = 0, n_samples: int = 1,
                         seed: int | None = None, decompositions=None) -> np.ndarray:
    """Draw site sequences from the permutation mixture, one independent
    permutation per step.  Returns (n_samples, n_steps + 1) ints including
    the start site.  A seed is mandatory: sampling must be reproducible.
    """
    if seed is None:
        raise ValueError("seed is required; sampling must be reproducible")
    if not (0 <= int(m0) < model.n_sites):
        raise ValueError("m0 must be a site index in [0, n_sites)")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if decompositions is None:
        decompositions = [birkhoff_decompose(k) for k in model.step_stochastic()]
    if len(decompositions) != model.n_steps:
        raise ValueError("need one decomposition per step")
    for dec in decompositions:
        if dec.n_sites != model.n_sites:
            raise ValueError("decomposition size does not match the lattice")

    rng = np.random.default_rng(seed)
    out = np.empty((n_samples, model.n_steps + 1), dtype=int)
    sites = np.full(n_samples, int(m0))
    out[:, 0] = sites
    for i, dec in enumerate(decompositions):
        cum = np.cumsum(dec.weights)
        cum /= cum[-1]
        draw = np.searchsorted(cum, rng.random(n_samples), side="right")
        sites = dec.site_maps[draw, sites]
        out[:, i + 1] = sites
    return out


@dataclass(frozen=True)
class HVCheckReport:
    mode: str
    n_samples: int
    n_outcomes: int
    max_abs_dev: float
    max_sigma: float
    tv_distance: float
    passed: bool


def hv_distribution_check(model: LatticeModel, m0: int = 0, n_samples: int = 1_000_000,
                          seed: int = 1, decompositions=None,
                          joint_limit: int = 65536) -> HVCheckReport:
    """Compare sampled site statistics against the quantum walk.

    When n_sites**n_steps fits under joint_limit the full joint sequence
    distribution is compared with the Markov product of the per-step
    doubly stochastic matrices; otherwise the per-step marginals are used.
    Each outcome must sit within three multinomial standard deviations;
    the total-variation distance is reported alongside.
    """
    samples = sample_hv_trajectory(model, m0=m0, n_samples=n_samples, seed=seed,
                                   decompositions=decompositions)
    ks = model.step_stochastic()
    m, n_steps = model.n_sites, model.n_steps

    def tally(dev, prob, count):
        sigma = np.sqrt(n_samples * prob * (1.0 - prob))
        ok_zero = (prob == 0.0) & (count == 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(sigma > 0, np.abs(dev) / np.where(sigma > 0, sigma, 1.0), np.inf)
        z = np.where(ok_zero, 0.0, z)
        return float(z.max())

    if m ** n_steps <= joint_limit:
        joint = ks[0][:, int(m0)]
        for i in range(1, n_steps):
            joint = joint[..., :, None] * ks[i].T
        prob = joint.reshape(-1)
        codes = np.zeros(n_samples, dtype=np.int64)
        for i in range(n_steps):
            codes = codes * m + samples[:, i + 1]
        counts = np.bincount(codes, minlength=prob.size).astype(float)
        emp = counts / n_samples
        dev = counts - n_samples * prob
        max_sigma = tally(dev, prob, counts)
        tv = 0.5 * float(np.abs(emp - prob).sum())
        return HVCheckReport(mode="joint", n_samples=n_samples, n_outcomes=prob.size,
                             max_abs_dev=float(np.abs(emp - prob).max()),
                             max_sigma=max_sigma, tv_distance=tv,
                             passed=bool(max_sigma <= 3.0))

    max_sigma, tv, max_dev = 0.0, 0.0, 0.0
    prob = np.zeros(m)
    prob[int(m0)] = 1.0
    for i in range(n_steps):
        prob = ks[i] @ prob
        counts = np.bincount(samples[:, i + 1], minlength=m).astype(float)
        emp = counts / n_samples
        dev = counts - n_samples * prob
        max_sigma = max(max_sigma, tally(dev, prob, counts))
        tv = max(tv, 0.5 * float(np.abs(emp - prob).sum()))
        max_dev = max(max_dev, float(np.abs(emp - prob).max()))
    return HVCheckReport(mode="marginals", n_samples=n_samples, n_outcomes=m * n_steps,
                         max_abs_dev=max_dev, max_sigma=max_sigma, tv_distance=tv,
                         passed=bool(max_sigma <= 3.0))
