"""Bell-type test on the distance between two oscillator trajectories.

Two parties each hold one mode of a joint state on an n_sub x n_sub
number-state grid.  A binary setting chooses the trap frequency each party
applies (see HarmonicStrategy); after evolving for a time t the joint
observable is the modulus of the coordinate difference, f = |x - y|.  The
combination

    S(t) = f_00(t) + f_01(t) + f_10(t) - f_11(t)

is non-negative for every classical (local hidden variable) trajectory
model, so S(t) < 0 certifies nonclassical trajectories.  This module finds
the optimal violating state at a probe time, sweeps S over a time grid, and
verifies positivity over separable quantum states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .dynamics import HarmonicStrategy, evolution_cache
from .errors import AccuracyError
from .fockops import BasisSpec, FockOperator, distance_kernel

DEFAULT_PROBE_TIME = float(np.pi / 2.0)
DEFAULT_T_START = 0.0
DEFAULT_T_END = 3.0
DEFAULT_STEPS = 601

PAIR_SETTINGS = ((0, 0), (0, 1), (1, 0), (1, 1))
PAIR_SIGNS = (1.0, 1.0, 1.0, -1.0)

DEGENERACY_GAP = 1e-10


def _canonical_amplitudes(vec: np.ndarray) -> np.ndarray:
    """Normalise and fix the global phase: the largest-magnitude amplitude
    (lowest index on near-ties) is made real and positive."""
    v = np.asarray(vec, dtype=complex).ravel()
    norm = float(np.linalg.norm(v))
    if not norm > 0.0 or not np.all(np.isfinite(v)):
        raise ValueError("state amplitudes must be finite and non-zero")
    v = v / norm
    mags = np.abs(v)
    lead = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
    v = v * (np.conj(v[lead]) / mags[lead])
    return v


@dataclass(frozen=True)
class TwoModeState:
    """Pure two-mode state: flat amplitudes c[m * n_sub + n] = <m, n|psi>,
    unit norm, canonical global phase."""

    amplitudes: np.ndarray
    n_sub: int

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).ravel()
        if self.n_sub < 1 or v.size != self.n_sub * self.n_sub:
            raise ValueError("amplitude vector must have length n_sub**2")
        if not np.all(np.isfinite(v)):
            raise ValueError("state amplitudes must be finite")
        if abs(float(np.linalg.norm(v)) - 1.0) > 1e-9:
            raise ValueError("state must be normalised (use from_amplitudes)")
        v.flags.writeable = False
        object.__setattr__(self, "amplitudes", v)

    @classmethod
    def from_amplitudes(cls, raw, n_sub: int | None = None) -> "TwoModeState":
        v = _canonical_amplitudes(raw)
        if n_sub is None:
            n_sub = round(v.size ** 0.5)
        return cls(v, n_sub)

    @property
    def matrix(self) -> np.ndarray:
        return self.amplitudes.reshape(self.n_sub, self.n_sub)

    def schmidt_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)


class BellEngine:
    """Shared caches and fast paths for one (strategy, n_sub, n_big, method).

    Both parties use the same setting -> frequency map, which makes the
    (0, 1) and (1, 0) correlators mode-swap images of each other; the
    operator routes exploit that.
    """

    def __init__(self, strategy: HarmonicStrategy | None = None, n_sub: int = 9,
                 n_big: int = 64, method: str = "ladder"):
        spec = BasisSpec(n_sub, n_big)
        self.strategy = strategy if strategy is not None else HarmonicStrategy()
        self.n_sub = spec.n_sub
        self.n_big = spec.n_big
        self.method = method
        self.kernel = distance_kernel(spec.n_big)
        self.caches = {
            s: evolution_cache(self.strategy.frequency(s), spec.n_big, method)
            for s in (0, 1)
        }
        ns = spec.n_sub
        self._swap = (np.arange(ns * ns).reshape(ns, ns).T).ravel()

    def evolved_basis(self, setting: int, t: float) -> np.ndarray:
        """Columns are the first n_sub number states evolved to time t."""
        cache = self.caches[setting]
        phases = np.exp(-1j * cache.eigenvalues * t)
        return (cache.modes * phases) @ cache.modes[: self.n_sub].T

    def _pair_matrix(self, t: float, a: int, b: int) -> np.ndarray:
        ua = self.evolved_basis(a, t)
        ub = self.evolved_basis(b, t)
        n2 = self.n_sub * self.n_sub
        states = np.einsum("pm,qn->mnpq", ua, ub).reshape(n2, self.n_big, self.n_big)
        return self.kernel.pair_matrix(states)

    def bell_matrix(self, t: float) -> np.ndarray:
        """S(t) compressed to the retained grid (hermitian, n_sub^2 square)."""
        m00 = self._pair_matrix(t, 0, 0)
        m01 = self._pair_matrix(t, 0, 1)
        m10 = m01[np.ix_(self._swap, self._swap)]
        m11 = self._pair_matrix(t, 1, 1)
        s = m00 + m01 + m10 - m11
        return 0.5 * (s + s.conj().T)

    def matrix_stack(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        n2 = self.n_sub * self.n_sub
        out = np.empty((times.size, n2, n2), dtype=complex)
        for i, t in enumerate(times):
            out[i] = self.bell_matrix(t)
        return out

    def correlators(self, state_matrix: np.ndarray, t: float) -> np.ndarray:
        """[f_00, f_01, f_10, f_11] for one state at one time."""
        c = np.asarray(state_matrix, dtype=complex)
        v = {s: self.evolved_basis(s, t) for s in (0, 1)}
        batch = np.stack([v[a] @ c @ v[b].T for a, b in PAIR_SETTINGS])
        phi = self.kernel.rotate(batch)
        w = self.kernel.apply_q(phi)
        return np.sqrt(2.0) * np.real(np.sum(np.conj(phi) * w, axis=(1, 2)))

    def bell_value(self, state_matrix: np.ndarray, t: float) -> float:
        """S(t) for one state via direct state evolution (no dense operator)."""
        f = self.correlators(state_matrix, t)
        return float(f[0] + f[1] + f[2] - f[3])


def bell_operator(t: float, strategy: HarmonicStrategy | None = None,
                  n_sub: int = 9, n_big: int = 64, method: str = "ladder") -> FockOperator:
    """The compressed Bell combination S(t) as a two-mode FockOperator."""
    engine = BellEngine(strategy, n_sub, n_big, method)
    return FockOperator(engine.bell_matrix(t), n_sub * n_sub, 2, "length")


def _select_min_eigenpair(matrix: np.ndarray, gap_tol: float = DEGENERACY_GAP):
    """Lowest eigenpair with deterministic tie-breaking.

    If the two lowest eigenvalues are closer than gap_tol, a fixed-seed
    hermitian perturbation of relative size gap_tol is added and the lowest
    eigenvector of the perturbed matrix is returned (flagged degenerate).
    """
    vals, vecs = np.linalg.eigh(matrix)
    gap = float(vals[1] - vals[0]) if vals.size > 1 else float("inf")
    degenerate = gap < gap_tol
    if degenerate:
        rng = np.random.default_rng(1905)
        p = rng.standard_normal(matrix.shape) + 1j * rng.standard_normal(matrix.shape)
        p = p + p.conj().T
        p *= gap_tol / np.abs(p).max()
        _, vecs = np.linalg.eigh(matrix + p)
    return float(vals[0]), vecs[:, 0], degenerate, gap


@dataclass(frozen=True)
class EigenSearchResult:
    """Outcome of the optimal-state search at a fixed probe time."""

    state: TwoModeState
    xi_minus: float
    probe_time: float
    n_big: int
    method: str
    gap: float
    degenerate: bool
    convergence: dict
    converged: bool | None
    violation: bool


def find_violating_state(strategy: HarmonicStrategy | None = None,
                         probe_time: float = DEFAULT_PROBE_TIME,
                         n_sub: int = 9, n_big: int = 64, method: str = "ladder",
                         check_convergence: bool = True, convergence_factor: int = 2,
                         convergence_tol: float = 1e-3) -> EigenSearchResult:
    """Minimise <psi| S(probe_time) |psi> over the retained grid.

    The minimum eigenvalue xi_minus and its eigenvector are computed at
    n_big, and (optionally) recomputed at convergence_factor * n_big to
    certify truncation convergence of the working grid.
    """
    engine = BellEngine(strategy, n_sub, n_big, method)
    s_mat = engine.bell_matrix(probe_time)
    xi, vec, degenerate, gap = _select_min_eigenpair(s_mat)
    rayleigh = float(np.real(np.conj(vec) @ s_mat @ vec))
    if abs(rayleigh - xi) > 1e-9 * max(1.0, abs(xi)):
        raise AccuracyError("eigenpair self-consistency check failed")
    state = TwoModeState.from_amplitudes(vec, n_sub)

    convergence = {int(n_big): xi}
    converged = None
    if check_convergence:
        if convergence_factor < 2:
            raise ValueError("convergence_factor must be at least 2")
        big = BellEngine(strategy, n_sub, convergence_factor * n_big, method)
        xi_big = float(np.linalg.eigvalsh(big.bell_matrix(probe_time))[0])
        convergence[int(convergence_factor * n_big)] = xi_big
        converged = abs(xi_big - xi) < convergence_tol

    return EigenSearchResult(
        state=state, xi_minus=xi, probe_time=float(probe_time), n_big=int(n_big),
        method=method, gap=gap, degenerate=degenerate, convergence=convergence,
        converged=converged, violation=xi < 0.0,
    )


@dataclass(frozen=True)
class BellSweep:
    """S(t) on a uniform grid plus refined zero crossings.

    negative_intervals holds (t_enter, t_exit) pairs where S < 0; interval
    endpoints that coincide with the grid edges are not refined.  Both the
    bracketing width and |S| at refined endpoints are below refine_tol.
    """

    times: np.ndarray
    values: np.ndarray
    components: dict
    negative_intervals: list
    refine_tol: float
    n_big: int
    method: str


def _bisect_crossing(fun, lo: float, hi: float, f_lo: float, width: float) -> float:
    for _ in range(90):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        f_mid = fun(mid)
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sweep(state: TwoModeState, strategy: HarmonicStrategy | None = None,
          t_start: float = DEFAULT_T_START, t_end: float = DEFAULT_T_END,
          steps: int = DEFAULT_STEPS, n_big: int = 64, method: str = "ladder",
          refine_tol: float = 1e-3) -> BellSweep:
    """Evaluate S(t) for one state on a uniform grid and refine the
    boundaries of every interval where it is negative."""
    if not (t_end > t_start):
        raise ValueError("t_end must exceed t_start")
    if steps < 2:
        raise ValueError("steps must be at least 2")
    if not (refine_tol > 0.0):
        raise ValueError("refine_tol must be positive")
    engine = BellEngine(strategy, state.n_sub, n_big, method)
    c = state.matrix
    times = np.linspace(t_start, t_end, steps)
    corr = np.empty((steps, 4))
    for i, t in enumerate(times):
        corr[i] = engine.correlators(c, t)
    values = corr[:, 0] + corr[:, 1] + corr[:, 2] - corr[:, 3]

    fun = lambda t: engine.bell_value(c, t)
    width = 0.1 * refine_tol
    negative = values < 0.0
    intervals = []
    start = times[0] if negative[0] else None
    for i in range(steps - 1):
        if negative[i] == negative[i + 1]:
            continue
        t_cross = _bisect_crossing(fun, times[i], times[i + 1], values[i], width)
        if negative[i]:
            intervals.append((start, t_cross))
            start = None
        else:
            start = t_cross
    if start is not None:
        intervals.append((start, times[-1]))

    components = {"f%d%d" % ab: corr[:, k].copy() for k, ab in enumerate(PAIR_SETTINGS)}
    return BellSweep(times=times, values=values, components=components,
                     negative_intervals=intervals, refine_tol=refine_tol,
                     n_big=int(n_big), method=method)


def integrated_bell_parameter(result: BellSweep, t_lo: float | None = None,
                              t_hi: float | None = None) -> float:
    """Trapezoid integral of S(t) over [t_lo, t_hi], with linear
    interpolation for window edges that fall between grid points."""
    times, values = result.times, result.values
    t_lo = float(times[0] if t_lo is None else t_lo)
    t_hi = float(times[-1] if t_hi is None else t_hi)
    eps = 1e-12 * max(1.0, abs(times[-1]))
    if t_lo < times[0] - eps or t_hi > times[-1] + eps or not (t_hi > t_lo):
        raise ValueError("integration window must lie inside the sweep grid")
    inside = (times > t_lo) & (times < t_hi)
    knots = np.concatenate(([t_lo], times[inside], [t_hi]))
    vals = np.interp(knots, times, values)
    return float(trapezoid(vals, knots))


@dataclass(frozen=True)
class SeparableCheckReport:
    """Minimum of S(t) over a family of separable states and a time grid."""

    min_value: float
    min_time: float
    min_state: int
    n_states: int
    n_components: int
    tol: float
    passed: bool


def _random_product_matrix(rng: np.random.Generator, n_sub: int) -> np.ndarray:
    u = rng.standard_normal(n_sub) + 1j * rng.standard_normal(n_sub)
    v = rng.standard_normal(n_sub) + 1j * rng.standard_normal(n_sub)
    return np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v))


def separable_positivity_check(n_states: int = 500, seed: int = 0,
                               strategy: HarmonicStrategy | None = None,
                               n_sub: int = 9, n_big: int = 64,
                               times: np.ndarray | None = None,
                               mixture_fraction: float = 0.3, max_components: int = 4,
                               method: str = "ladder", states=None,
                               tol: float = 1e-9, chunk: int = 32) -> SeparableCheckReport:
    """Verify S(t) >= -tol for random separable states over a time grid.

    States are random pure products plus (a mixture_fraction share of)
    convex mixtures of up to max_components products with Dirichlet
    weights.  Explicitly supplied states must be pure products (checked via
    their Schmidt values); entangled input raises ValueError.
    """
    if times is None:
        times = np.linspace(DEFAULT_T_START, DEFAULT_T_END, DEFAULT_STEPS)
    times = np.asarray(times, dtype=float)
    engine = BellEngine(strategy, n_sub, n_big, method)
    rng = np.random.default_rng(seed)

    component_mats = []
    state_weights = []  # per state: list of (component index, weight)
    if states is not None:
        for st in states:
            mat = st.matrix if isinstance(st, TwoModeState) else np.asarray(st, complex)
            if mat.shape != (n_sub, n_sub):
                raise ValueError("supplied states must live on the n_sub grid")
            sv = np.linalg.svd(mat, compute_uv=False)
            if sv.size > 1 and sv[1] > 1e-10:
                raise ValueError("supplied state is entangled; only product states are valid here")
            state_weights.append([(len(component_mats), 1.0)])
            component_mats.append(mat / np.linalg.norm(mat))
    n_random = max(0, n_states - len(state_weights))
    n_mixed = int(round(mixture_fraction * n_random))
    for k in range(n_random):
        if k < n_mixed:
            parts = int(rng.integers(2, max_components + 1))
            weights = rng.dirichlet(np.ones(parts))
            entry = []
            for w in weights:
                entry.append((len(component_mats), float(w)))
                component_mats.append(_random_product_matrix(rng, n_sub))
            state_weights.append(entry)
        else:
            state_weights.append([(len(component_mats), 1.0)])
            component_mats.append(_random_product_matrix(rng, n_sub))

    n2 = n_sub * n_sub
    comp = np.asarray([m.ravel() for m in component_mats])  # (n_comp, n2)
    mix = np.zeros((len(state_weights), comp.shape[0]))
    for i, entry in enumerate(state_weights):
        for j, w in entry:
            mix[i, j] = w

    best = (np.inf, -1, -1)  # value, time index, state index
    for lo in range(0, times.size, chunk):
        sl = slice(lo, min(lo + chunk, times.size))
        stack = engine.matrix_stack(times[sl])
        prods = np.matmul(stack, comp.T)                  # (T_c, n2, n_comp)
        comp_vals = np.einsum("cn,tnc->tc", comp.conj(), prods).real
        state_vals = comp_vals @ mix.T                    # (T_c, n_states)
        flat = int(np.argmin(state_vals))
        ti, si = divmod(flat, state_vals.shape[1])
        if state_vals[ti, si] < best[0]:
            best = (float(state_vals[ti, si]), lo + ti, si)

    return SeparableCheckReport(
        min_value=best[0], min_time=float(times[best[1]]), min_state=int(best[2]),
        n_states=len(state_weights), n_components=comp.shape[0], tol=float(tol),
        passed=best[0] >= -tol,
    )
