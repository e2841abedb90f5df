"""Fock-space operators for one and two harmonic modes.

Natural units hbar = M = Omega = 1 are used throughout: lengths are measured
in sqrt(hbar / (M Omega)), momenta in sqrt(hbar M Omega), energies in
hbar Omega.

The central construction is the two-mode operator |x - y|, the modulus of the
coordinate difference of the two modes.  It is built two independent ways:

* a relative-mode route: |x - y| = sqrt(2) B^T (|q| x 1) B, where B is the
  50:50 two-mode mixing rotation and |q| is the single-mode modulus operator
  evaluated by Gauss-Legendre quadrature.  Because the mixing conserves total
  occupation, every retained matrix element is exact once the working
  single-mode grid holds 2*n_big - 1 levels (all occupation sectors reachable
  from the retained grid are then complete).
* a direct 2-D position-representation quadrature, used to cross-validate
  the first route entry by entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, CrossValidationError

VALID_UNITS = ("length", "momentum", "energy", "dimensionless")

# Refuse to materialise dense two-mode matrices beyond roughly a gigabyte.
DENSE_BYTES_LIMIT = 1_200_000_000

QUADRATURE_TOL = 1e-12
CROSS_CHECK_TOL = 1e-9
HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class BasisSpec:
    """Truncation sizes: n_sub is the physical subspace kept per mode, n_big
    the working grid used for dynamics and operator products."""

    n_sub: int = 9
    n_big: int = 64

    def __post_init__(self):
        if not (isinstance(self.n_sub, (int, np.integer)) and isinstance(self.n_big, (int, np.integer))):
            raise ValueError("basis sizes must be integers")
        if self.n_sub < 1:
            raise ValueError("n_sub must be at least 1")
        if self.n_big < self.n_sub:
            raise ValueError("n_big must be at least n_sub")


@dataclass(frozen=True)
class FockOperator:
    """A Hermitian operator on a truncated number-state grid.

    modes is 1 or 2; for two-mode operators the flat index is row-major,
    (m, n) -> m * n_single + n, with n_single = isqrt(dim).
    """

    matrix: np.ndarray
    dim: int
    modes: int
    unit: str

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator matrix must be square")
        if m.shape[0] != self.dim:
            raise ValueError("dim does not match matrix shape")
        if self.modes not in (1, 2):
            raise ValueError("modes must be 1 or 2")
        if self.modes == 2 and round(self.dim ** 0.5) ** 2 != self.dim:
            raise ValueError("two-mode operators need a square total dimension")
        if self.unit not in VALID_UNITS:
            raise ValueError("unknown unit %r" % (self.unit,))
        if not np.all(np.isfinite(m.real)) or (np.iscomplexobj(m) and not np.all(np.isfinite(m.imag))):
            raise ValueError("operator matrix has non-finite entries")
        scale = max(1.0, float(np.abs(m).max()) if m.size else 1.0)
        if float(np.abs(m - m.conj().T).max()) > HERMITICITY_TOL * scale:
            raise ValueError("operator matrix is not hermitian within tolerance")

    @property
    def n_single(self) -> int:
        return self.dim if self.modes == 1 else round(self.dim ** 0.5)


def _as_sizes(basis) -> tuple[int, int]:
    if isinstance(basis, BasisSpec):
        return basis.n_sub, basis.n_big
    raise ValueError("expected a BasisSpec")


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """Oscillator eigenfunctions psi_0..psi_n_max at the points x.

    Uses the numerically stable two-term recurrence on the weighted
    (normalised) functions, so no overflow occurs at large order.
    """
    x = np.asarray(x, dtype=float)
    psi = np.zeros((n_max + 1,) + x.shape)
    psi[0] = np.pi ** -0.25 * np.exp(-x * x / 2.0)
    if n_max >= 1:
        psi[1] = np.sqrt(2.0) * x * psi[0]
    for n in range(1, n_max):
        psi[n + 1] = np.sqrt(2.0 / (n + 1)) * x * psi[n] - np.sqrt(n / (n + 1.0)) * psi[n - 1]
    return psi


def _gauss_segment(n: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    xg, wg = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (xg + 1.0), half * wg


def _abs_position_matrix(dim: int) -> np.ndarray:
    """Matrix of |q| on dim number states via adaptive Gauss-Legendre.

    The integrand is even, so the integral is folded to [0, L]; beyond the
    last classical turning point sqrt(2 dim + 1) the eigenfunctions decay as
    a Gaussian, and L adds a wide safety margin to that.  Node counts are
    doubled until two successive levels agree to QUADRATURE_TOL.
    """
    L = np.sqrt(2.0 * dim + 1.0) + 12.0

    def level(n_nodes):
        q, w = _gauss_segment(n_nodes, 0.0, L)
        psi = hermite_functions(dim - 1, q)
        return 2.0 * (psi * (w * q)) @ psi.T

    n_nodes = 2 * dim + 96
    prev = level(n_nodes)
    for _ in range(4):
        n_nodes *= 2
        cur = level(n_nodes)
        if float(np.abs(cur - prev).max()) <= QUADRATURE_TOL:
            # odd-parity entries vanish identically; enforce that and symmetry
            parity = (np.add.outer(np.arange(dim), np.arange(dim)) % 2) == 1
            cur[parity] = 0.0
            return 0.5 * (cur + cur.T)
        prev = cur
    raise ConvergenceError("quadrature for |q| did not converge at dim=%d" % dim)


def position_operator(basis: BasisSpec) -> FockOperator:
    """Single-mode coordinate (a + a^dag)/sqrt(2) on the working grid."""
    dim = basis.n_big
    m = np.zeros((dim, dim))
    n = np.arange(dim - 1)
    off = np.sqrt((n + 1) / 2.0)
    m[n, n + 1] = off
    m[n + 1, n] = off
    return FockOperator(m, dim, 1, "length")


def momentum_operator(basis: BasisSpec) -> FockOperator:
    """Single-mode momentum i (a^dag - a)/sqrt(2) on the working grid."""
    dim = basis.n_big
    m = np.zeros((dim, dim), dtype=complex)
    n = np.arange(dim - 1)
    off = np.sqrt((n + 1) / 2.0)
    m[n + 1, n] = 1j * off
    m[n, n + 1] = -1j * off
    return FockOperator(m, dim, 1, "momentum")


def number_operator(basis: BasisSpec) -> FockOperator:
    dim = basis.n_big
    return FockOperator(np.diag(np.arange(dim, dtype=float)), dim, 1, "dimensionless")


def abs_position_operator(basis: BasisSpec) -> FockOperator:
    """Single-mode modulus of the coordinate, |q|."""
    return FockOperator(_abs_position_matrix(basis.n_big), basis.n_big, 1, "length")


def _beamsplitter_blocks(s_max: int) -> list[np.ndarray]:
    """Occupation-sector blocks of the 50:50 two-mode mixing rotation.

    Sector s holds the states |m, s - m>; the generator is the skew matrix of
    a_1^dag a_2 - a_1 a_2^dag restricted to the sector.  The blocks are real
    orthogonal.  The mixing angle's sign is immaterial for parity-even
    single-mode kernels such as |q|; it is fixed here once for determinism.
    """
    blocks = []
    for s in range(s_max + 1):
        g = np.zeros((s + 1, s + 1))
        m = np.arange(s)
        g[m + 1, m] = np.sqrt((m + 1) * (s - m))
        g = g - g.T
        blocks.append(sla.expm(-(np.pi / 4.0) * g))
    return blocks


class DistanceKernel:
    """Exact machinery for the two-mode distance operator |x - y|.

    Works in the relative/common-mode picture: a product grid state is
    rotated sector by sector with the 50:50 mixing blocks, after which
    |x - y| acts as sqrt(2) |q| on the relative index alone.  With the
    working single-mode grid of 2*n_big - 1 levels every sector reachable
    from the retained n_big x n_big grid is complete, so matrix elements
    between retained states carry no truncation error.
    """

    def __init__(self, n_big: int):
        if n_big < 1:
            raise ValueError("n_big must be positive")
        self.n_big = int(n_big)
        self.n_work = 2 * self.n_big - 1
        self.q_abs = _abs_position_matrix(self.n_work)
        self.blocks = _beamsplitter_blocks(self.n_work - 1)

    def rotate(self, states: np.ndarray) -> np.ndarray:
        """Map a batch of two-mode states (batch, n_big, n_big) into the
        relative-mode representation (batch, relative, common)."""
        states = np.asarray(states)
        if states.ndim != 3 or states.shape[1:] != (self.n_big, self.n_big):
            raise ValueError("states must have shape (batch, n_big, n_big)")
        nb, nw = self.n_big, self.n_work
        out = np.zeros((states.shape[0], nw, nw), dtype=complex)
        for s in range(nw):
            m = np.arange(max(0, s - (nb - 1)), min(s, nb - 1) + 1)
            x = states[:, m, s - m]
            y = x @ self.blocks[s][:, m].T
            k = np.arange(s + 1)
            out[:, k, s - k] = y
        return out

    def apply_q(self, phi: np.ndarray) -> np.ndarray:
        """|q| acting on the relative index of a rotated batch, as one
        large real matrix product per quadrature component."""
        batch, nw = phi.shape[0], self.n_work
        pr = phi.real.transpose(1, 0, 2).reshape(nw, batch * nw)
        pi = phi.imag.transpose(1, 0, 2).reshape(nw, batch * nw)
        w = (self.q_abs @ pr) + 1j * (self.q_abs @ pi)
        return np.ascontiguousarray(w.reshape(nw, batch, nw).transpose(1, 0, 2))

    def pair_matrix(self, states: np.ndarray) -> np.ndarray:
        """Gram-style matrix of <psi_i| |x - y| |psi_j> for a state batch."""
        phi = self.rotate(states)
        w = self.apply_q(phi)
        flat = phi.reshape(phi.shape[0], -1)
        m = np.sqrt(2.0) * np.conj(flat) @ w.reshape(w.shape[0], -1).T
        return 0.5 * (m + m.conj().T)

    def expectation(self, state: np.ndarray) -> float:
        """<psi| |x - y| |psi> for one two-mode state (n_big, n_big)."""
        phi = self.rotate(np.asarray(state)[None])[0]
        w = self.q_abs @ phi
        return float(np.sqrt(2.0) * np.real(np.sum(np.conj(phi) * w)))

    def dense(self) -> np.ndarray:
        """Dense |x - y| on the retained grid, flat index (m, n) row-major.

        Assembled sector-pair by sector-pair:
        D[(m', n'), (m, n)] = sqrt(2) sum_j B_{s'}[s'-j, m'] |q|[s'-j, s-j]
        B_s[s-j, m], with j the common-mode occupation.  Entries vanish
        unless s + s' is even (parity of |q|).
        """
        nb = self.n_big
        dim = nb * nb
        if dim * dim * 8 > DENSE_BYTES_LIMIT:
            raise ValueError(
                "dense |x - y| at n_big=%d would exceed the memory guard; "
                "use the rotate/pair_matrix route instead" % nb
            )
        out = np.zeros((dim, dim))
        idx = np.arange(nb)
        for sp in range(self.n_work):
            mp = idx[max(0, sp - (nb - 1)): min(sp, nb - 1) + 1]
            rows = mp * nb + (sp - mp)
            bp = self.blocks[sp]
            for s in range(sp % 2, self.n_work, 2):
                j = np.arange(min(s, sp) + 1)
                qv = self.q_abs[sp - j, s - j]
                m = idx[max(0, s - (nb - 1)): min(s, nb - 1) + 1]
                blk = bp[np.ix_(sp - j, mp)].T @ (qv[:, None] * self.blocks[s][np.ix_(s - j, m)])
                out[np.ix_(rows, m * nb + (s - m))] = np.sqrt(2.0) * blk
        return 0.5 * (out + out.T)


_KERNELS: dict = {}


def distance_kernel(n_big: int) -> DistanceKernel:
    """Shared per-size DistanceKernel cache (construction is the costly part)."""
    kernel = _KERNELS.get(int(n_big))
    if kernel is None:
        kernel = DistanceKernel(int(n_big))
        _KERNELS[int(n_big)] = kernel
    return kernel


def _abs_difference_quadrature(n_big: int, entries=None, refine: bool = True):
    """Independent 2-D quadrature for <m'n'| |x - y| |mn>.

    The double integral is factorised over the outer coordinate x; the inner
    integral over y is split at y = x so both halves are smooth, which makes
    the outer integrand C^1 and Gauss-Legendre clean.  If entries is None the
    full matrix is returned; otherwise entries is an (k, 4) array of
    (m', n', m, n) index rows and the corresponding values are returned.
    """

    lim = np.sqrt(2.0 * n_big + 1.0) + 10.0

    def level(n_outer, n_inner):
        x, wx = _gauss_segment(n_outer, -lim, lim)
        psi_x = hermite_functions(n_big - 1, x)
        unit_y, unit_w = np.polynomial.legendre.leggauss(n_inner)

        def inner_segments(xi):
            # one batch of nodes/weights covering [-lim, xi] and [xi, lim]
            ys, ws = [], []
            for lo, hi in ((-lim, xi), (xi, lim)):
                half = 0.5 * (hi - lo)
                ys.append(lo + half * (unit_y + 1.0))
                ws.append(half * unit_w)
            y = np.concatenate(ys)
            return y, np.concatenate(ws) * np.abs(xi - y)

        if entries is None:
            g = np.empty((n_big, n_big, n_outer))
            for i, xi in enumerate(x):
                y, wk = inner_segments(xi)
                psi_y = hermite_functions(n_big - 1, y)
                g[:, :, i] = (psi_y * wk) @ psi_y.T
            f = psi_x[:, None, :] * psi_x[None, :, :] * wx
            d = f.reshape(n_big * n_big, n_outer) @ g.reshape(n_big * n_big, n_outer).T
            d = d.reshape(n_big, n_big, n_big, n_big).transpose(0, 2, 1, 3)
            return d.reshape(n_big * n_big, n_big * n_big)
        rows = np.asarray(entries, dtype=int)
        gsel = np.empty((len(rows), n_outer))
        for i, xi in enumerate(x):
            y, wk = inner_segments(xi)
            psi_y = hermite_functions(n_big - 1, y)
            gsel[:, i] = (psi_y[rows[:, 1]] * psi_y[rows[:, 3]]) @ wk
        fsel = psi_x[rows[:, 0]] * psi_x[rows[:, 2]] * wx
        return np.sum(fsel * gsel, axis=1)

    n_outer = 6 * n_big + 240
    n_inner = 3 * n_big + 120
    coarse = level(n_outer, n_inner)
    if not refine:
        return coarse
    fine = level(2 * n_outer, 2 * n_inner)
    if float(np.abs(fine - coarse).max()) > 1e-11:
        raise ConvergenceError("2-D quadrature for |x - y| did not converge")
    return fine


def two_mode_abs_difference(basis: BasisSpec, cross_check="auto") -> FockOperator:
    """Dense two-mode distance operator |x - y| on the n_big x n_big grid.

    cross_check selects the independent 2-D quadrature comparison:
    "auto" checks every entry for n_big <= 32 and a fixed pseudorandom
    sample of 200 entries above that; "full" and "sample" force the
    respective mode, False skips the comparison.  Disagreement beyond
    CROSS_CHECK_TOL raises CrossValidationError.
    """
    _, n_big = _as_sizes(basis)
    kernel = DistanceKernel(n_big)
    dense = kernel.dense()

    if cross_check not in (False, None):
        if cross_check == "auto":
            mode = "full" if n_big <= 32 else "sample"
        elif cross_check in ("full", "sample", True):
            mode = "full" if cross_check is True else cross_check
        else:
            raise ValueError("cross_check must be 'auto', 'full', 'sample' or False")
        if mode == "full":
            other = _abs_difference_quadrature(n_big)
            dev = float(np.abs(dense - other).max())
        else:
            rng = np.random.default_rng(178236541)
            rows = rng.integers(0, n_big, size=(200, 4))
            flat_r = rows[:, 0] * n_big + rows[:, 1]
            flat_c = rows[:, 2] * n_big + rows[:, 3]
            other = _abs_difference_quadrature(n_big, entries=rows)
            dev = float(np.abs(dense[flat_r, flat_c] - other).max())
        if dev > CROSS_CHECK_TOL:
            raise CrossValidationError(
                "relative-mode and 2-D quadrature routes disagree: %.3e" % dev
            )

    return FockOperator(dense, n_big * n_big, 2, "length")
