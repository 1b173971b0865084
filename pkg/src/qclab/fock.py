"""Truncated bosonic Fock space over a finite mode grid with eps-scaled ladder operators.

The one-excitation space is discretized into finitely many k-cells (optionally
carrying a polarization index).  A grid function f is represented by its samples
at the cell centers; smeared operators carry the square roots of the cell
measures, so that

    [a_eps(f), a_eps^+(g)] = eps * <f, g>_grid,

with <f, g>_grid = sum_m cell_m * conj(f_m) * g_m.  Per mode, the scaled ladder
matrices are sqrt(eps * cell) times the standard truncated ones.

State families come in two backends: closed-form moment functions (coherent,
low-lying excitations on top of a coherent core, displaced squeezed modes) and
an exact coefficient tensor on the truncated product space.  Every family
declares its small-eps limit as a finitely atomic measure on the mode grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

DEFAULT_DIM_BUDGET = 4_000_000
DEFAULT_TAIL_TOL = 1e-12

__all__ = [
    "ModeBasis",
    "Dispersion",
    "FockTruncation",
    "FockState",
    "WignerMeasure",
    "FieldStateFamily",
    "TruncationError",
    "line_modes",
    "ball_modes",
    "radial_shell_modes",
    "grid_inner",
    "grid_norm_sq",
    "ladder_matrix",
    "ladder_apply",
    "dgamma_expectation",
    "dgamma2_expectation",
    "weyl_expectation_exact",
    "build_family",
    "wick_monomial_expectation",
    "classical_symbol_integral",
    "poisson_tail_nmax",
]


class TruncationError(RuntimeError):
    """Raised when a truncation budget or tail tolerance cannot be honored."""


# ---------------------------------------------------------------------------
# mode grids


@dataclass(frozen=True)
class ModeBasis:
    """Finite discretization of the one-excitation space.

    k_points are stored as 3-vectors; only the first `dimension` components
    are nonzero for lower-dimensional grids.  `polarizations` is None for
    scalar fields and an int array with values in {1, 2} for transverse ones.
    """

    k_points: np.ndarray
    cell_measures: np.ndarray
    dimension: int
    polarizations: np.ndarray | None = None

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.k_points, dtype=float))
        w = np.asarray(self.cell_measures, dtype=float)
        object.__setattr__(self, "k_points", k)
        object.__setattr__(self, "cell_measures", w)
        if k.shape[1] != 3:
            raise ValueError("k_points must be (m, 3)")
        if w.shape != (k.shape[0],):
            raise ValueError("cell_measures must match the number of modes")
        if not np.all(w > 0):
            raise ValueError("cell measures must be strictly positive")
        if self.dimension not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if self.polarizations is not None:
            pol = np.asarray(self.polarizations, dtype=int)
            object.__setattr__(self, "polarizations", pol)
            if pol.shape != (k.shape[0],):
                raise ValueError("polarizations must match the number of modes")
            if not np.all((pol == 1) | (pol == 2)):
                raise ValueError("polarization indices must be 1 or 2")
        key = [tuple(kp) for kp in k]
        if self.polarizations is not None:
            key = [kk + (int(p),) for kk, p in zip(key, self.polarizations)]
        if len(set(key)) != len(key):
            raise ValueError("mode (k, polarization) pairs must be distinct")

    @property
    def size(self) -> int:
        return self.k_points.shape[0]

    @property
    def k_norms(self) -> np.ndarray:
        return np.linalg.norm(self.k_points, axis=1)

    @property
    def total_measure(self) -> float:
        return float(self.cell_measures.sum())


def line_modes(k_min: float, k_max: float, count: int, symmetric: bool = True) -> ModeBasis:
    """1-d cell grid on [k_min, k_max]; with ``symmetric`` the mirror cells are added.

    Cell centers never sit at k = 0.
    """
    edges = np.linspace(k_min, k_max, count + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    if symmetric:
        centers = np.concatenate([-centers[::-1], centers])
        widths = np.concatenate([widths[::-1], widths])
    if np.any(np.abs(centers) < 1e-14):
        raise ValueError("grid cell centered at k = 0")
    k = np.zeros((centers.size, 3))
    k[:, 0] = centers
    return ModeBasis(k, widths, dimension=1)


def ball_modes(radius: float, points_per_axis: int, dimension: int = 3,
               polarized: bool = False) -> ModeBasis:
    """Uniform cubic cells with centers inside the ball |k| <= radius.

    Half-integer offsets keep every center away from the origin.  With
    ``polarized`` each retained cell appears twice, once per polarization.
    """
    n = points_per_axis
    h = 2.0 * radius / n
    c = (np.arange(n) + 0.5) * h - radius
    axes = [c] * dimension + [np.zeros(1)] * (3 - dimension)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    r = np.linalg.norm(pts, axis=1)
    keep = r <= radius
    pts = pts[keep]
    cells = np.full(pts.shape[0], h ** dimension)
    if not polarized:
        return ModeBasis(pts, cells, dimension=dimension)
    k2 = np.vstack([pts, pts])
    w2 = np.concatenate([cells, cells])
    pol = np.concatenate([np.ones(len(pts), int), np.full(len(pts), 2)])
    return ModeBasis(k2, w2, dimension=dimension, polarizations=pol)


def radial_shell_modes(r_min: float, r_max: float, count: int,
                       polarized: bool = False) -> ModeBasis:
    """Spherical-shell cells for radial integrands in three dimensions.

    Each cell has measure (4 pi / 3)(r_{i+1}^3 - r_i^3) and its representative
    k-point on the first axis at the volume-centroid radius.
    """
    edges = np.linspace(r_min, r_max, count + 1)
    vol = 4.0 * np.pi / 3.0 * (edges[1:] ** 3 - edges[:-1] ** 3)
    rc = (0.5 * (edges[:-1] ** 3 + edges[1:] ** 3)) ** (1.0 / 3.0)
    k = np.zeros((count, 3))
    k[:, 0] = rc
    if not polarized:
        return ModeBasis(k, vol, dimension=3)
    k2 = np.vstack([k, k])
    w2 = np.concatenate([vol, vol])
    pol = np.concatenate([np.ones(count, int), np.full(count, 2)])
    return ModeBasis(k2, w2, dimension=3, polarizations=pol)


def grid_inner(basis: ModeBasis, f: np.ndarray, g: np.ndarray) -> complex:
    """Cell-weighted inner product sum_m cell_m conj(f_m) g_m."""
    return complex(np.sum(basis.cell_measures * np.conj(f) * g))


def grid_norm_sq(basis: ModeBasis, f: np.ndarray) -> float:
    return float(np.sum(basis.cell_measures * np.abs(f) ** 2))


# ---------------------------------------------------------------------------
# dispersion


@dataclass(frozen=True)
class Dispersion:
    """Per-mode samples of the field dispersion, with power maps."""

    values: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if not np.all(v > 0):
            raise ValueError("dispersion must be strictly positive on the grid")

    @staticmethod
    def massless(basis: ModeBasis) -> "Dispersion":
        return Dispersion(basis.k_norms, kind="massless")

    @staticmethod
    def massive(basis: ModeBasis, mass: float) -> "Dispersion":
        if mass <= 0:
            raise ValueError("mass must be positive")
        return Dispersion(np.sqrt(basis.k_norms ** 2 + mass ** 2), kind="massive")

    def power(self, alpha: float) -> np.ndarray:
        return self.values ** alpha

    def linear_growth_floor(self, basis: ModeBasis, shell_fraction: float = 0.5) -> float:
        """min of omega/|k| over the outer part of the grid (growth proxy)."""
        r = basis.k_norms
        outer = r >= shell_fraction * r.max()
        return float(np.min(self.values[outer] / r[outer]))


# ---------------------------------------------------------------------------
# truncation and exact states


@dataclass(frozen=True)
class FockTruncation:
    per_mode_max: tuple
    epsilon: float
    dim_budget: int = DEFAULT_DIM_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "per_mode_max", tuple(int(n) for n in self.per_mode_max))
        if any(n < 0 for n in self.per_mode_max):
            raise ValueError("per-mode occupation caps must be nonnegative")
        if not (0 < self.epsilon < 1):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.dimension > self.dim_budget:
            raise TruncationError(
                f"state-space dimension {self.dimension} exceeds budget {self.dim_budget}")

    @property
    def shape(self) -> tuple:
        return tuple(n + 1 for n in self.per_mode_max)

    @property
    def dimension(self) -> int:
        return int(np.prod([n + 1 for n in self.per_mode_max], dtype=np.int64))


class FockState:
    """Dense coefficient tensor on the truncated occupation basis.

    Axis m of `coefficients` indexes the occupation of mode m.  States
    produced by ladder actions are in general unnormalized.
    """

    def __init__(self, coefficients: np.ndarray, truncation: FockTruncation,
                 basis: ModeBasis):
        coefficients = np.asarray(coefficients, dtype=complex)
        if coefficients.shape != truncation.shape:
            raise ValueError("coefficient tensor shape does not match the truncation")
        if len(truncation.per_mode_max) != basis.size:
            raise ValueError("truncation and basis disagree on the number of modes")
        self.coefficients = coefficients
        self.truncation = truncation
        self.basis = basis

    @property
    def epsilon(self) -> float:
        return self.truncation.epsilon

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def inner(self, other: "FockState") -> complex:
        return complex(np.vdot(self.coefficients, other.coefficients))

    def check_normalized(self, tol: float = 1e-12) -> "FockState":
        if abs(self.norm() - 1.0) > tol:
            raise ValueError(f"state norm {self.norm()} deviates from 1 beyond {tol}")
        return self


def vacuum_state(basis: ModeBasis, truncation: FockTruncation) -> FockState:
    coeff = np.zeros(truncation.shape, dtype=complex)
    coeff[(0,) * basis.size] = 1.0
    return FockState(coeff, truncation, basis)


def ladder_matrix(n_max: int) -> np.ndarray:
    """Standard truncated annihilation matrix, a |n> = sqrt(n) |n-1>."""
    a = np.zeros((n_max + 1, n_max + 1))
    n = np.arange(1, n_max + 1)
    a[n - 1, n] = np.sqrt(n)
    return a


def _apply_mode_matrix(coeff: np.ndarray, mat: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(mat, coeff, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def ladder_apply(state: FockState, mode: int, kind: str) -> FockState:
    """Apply the scaled ladder operator sqrt(eps * cell_m) a^(+/-) of one mode.

    Creation out of the top occupation level truncates to zero.  The result is
    unnormalized.
    """
    if not 0 <= mode < state.basis.size:
        raise IndexError(f"mode index {mode} out of range")
    n_max = state.truncation.per_mode_max[mode]
    a = ladder_matrix(n_max)
    if kind == "annihilate":
        mat = a
    elif kind == "create":
        mat = a.T
    else:
        raise ValueError("kind must be 'create' or 'annihilate'")
    scale = math.sqrt(state.epsilon * state.basis.cell_measures[mode])
    coeff = scale * _apply_mode_matrix(state.coefficients, mat, mode)
    return FockState(coeff, state.truncation, state.basis)


def smeared_annihilate(state: FockState, f: np.ndarray) -> FockState:
    """a_eps(f) Psi = sum_m conj(f_m) sqrt(eps cell_m) a_m Psi."""
    acc = np.zeros_like(state.coefficients)
    for m in range(state.basis.size):
        if f[m] == 0:
            continue
        acc += np.conj(f[m]) * ladder_apply(state, m, "annihilate").coefficients
    return FockState(acc, state.truncation, state.basis)


def smeared_create(state: FockState, f: np.ndarray) -> FockState:
    acc = np.zeros_like(state.coefficients)
    for m in range(state.basis.size):
        if f[m] == 0:
            continue
        acc += f[m] * ladder_apply(state, m, "create").coefficients
    return FockState(acc, state.truncation, state.basis)


def _occupation_weight(state: FockState, per_mode: np.ndarray) -> float:
    """<Psi, sum_m per_mode[m] N_m Psi> for a diagonal occupation symbol."""
    prob = np.abs(state.coefficients) ** 2
    total = 0.0
    for m, wm in enumerate(per_mode):
        n = np.arange(state.truncation.per_mode_max[m] + 1)
        shape = [1] * prob.ndim
        shape[m] = n.size
        total += wm * float(np.sum(prob * n.reshape(shape)))
    return total


def dgamma_expectation(state: FockState, dispersion: Dispersion, power: float = 1.0) -> float:
    """<Psi, dGamma_eps(omega^power) Psi> = eps * sum_m omega_m^power <N_m>."""
    return state.epsilon * _occupation_weight(state, dispersion.power(power))


def dgamma2_expectation(state: FockState, dispersion: Dispersion) -> float:
    """Second-quantized pair energy: <dGamma_eps(omega)^2> - eps <dGamma_eps(omega^2)>."""
    w = dispersion.values
    prob = np.abs(state.coefficients) ** 2
    weighted = np.zeros_like(prob)
    for m, wm in enumerate(w):
        n = np.arange(state.truncation.per_mode_max[m] + 1)
        shape = [1] * prob.ndim
        shape[m] = n.size
        weighted = weighted + wm * n.reshape(shape)
    sq = float(np.sum(prob * weighted ** 2)) * state.epsilon ** 2
    return sq - state.epsilon * dgamma_expectation(state, dispersion, power=2.0)


def number_expectation(state: FockState) -> float:
    return _occupation_weight(state, np.ones(state.basis.size))


# ---------------------------------------------------------------------------
# Weyl operators on the exact backend


def _displacement_matrix(beta: complex, n_max: int) -> np.ndarray:
    a = ladder_matrix(n_max)
    gen = beta * a.T - np.conj(beta) * a
    return expm(gen)


def _weyl_value_padded(state: FockState, eta: np.ndarray, pad: int) -> complex:
    caps = state.truncation.per_mode_max
    shape = tuple(n + 1 + pad for n in caps)
    coeff = np.zeros(shape, dtype=complex)
    coeff[tuple(slice(0, n + 1) for n in caps)] = state.coefficients
    out = coeff
    for m in range(state.basis.size):
        beta = 1j * math.sqrt(state.epsilon * state.basis.cell_measures[m]) * eta[m]
        mat = _displacement_matrix(beta, caps[m] + pad)
        out = _apply_mode_matrix(out, mat, m)
    return complex(np.vdot(coeff, out))


def weyl_expectation_exact(state: FockState, eta: np.ndarray, pad: int = 8,
                           tail_tol: float = 1e-8):
    """<Psi, W_eps(eta) Psi> by per-mode matrix exponentials.

    Evaluated on the padded occupation space; the difference between the
    padded and unpadded contractions is reported as the truncation-tail
    estimate and raises `TruncationError` beyond `tail_tol`.
    """
    eta = np.asarray(eta, dtype=complex)
    if eta.shape != (state.basis.size,):
        raise ValueError("eta must be a per-mode grid function")
    base = _weyl_value_padded(state, eta, 0)
    padded = _weyl_value_padded(state, eta, pad)
    tail = abs(padded - base)
    if tail > tail_tol:
        raise TruncationError(
            f"Weyl truncation tail estimate {tail:.3e} exceeds tolerance {tail_tol:.3e}")
    return padded, tail


# ---------------------------------------------------------------------------
# Wigner measures


@dataclass(frozen=True)
class WignerMeasure:
    """Finitely atomic probability measure on the discretized one-excitation space."""

    atoms: tuple          # of (weight, z-array over modes)
    basis: ModeBasis
    dispersion: Dispersion

    def __post_init__(self):
        atoms = tuple((float(wt), np.asarray(z, dtype=complex)) for wt, z in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValueError("measure needs at least one atom")
        weights = np.array([wt for wt, _ in atoms])
        if np.any(weights <= 0):
            raise ValueError("atom weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("atom weights must sum to 1")
        for _, z in atoms:
            if z.shape != (self.basis.size,):
                raise ValueError("atom profile must be a per-mode grid function")
            if not np.isfinite(grid_norm_sq(self.basis, self.dispersion.power(0.5) * z)):
                raise ValueError("atom has infinite field energy on the grid")

    def characteristic(self, eta: np.ndarray) -> complex:
        """mu_hat(eta) = sum_i w_i exp(2i Re <eta, z_i>_grid)."""
        total = 0.0 + 0.0j
        for wt, z in self.atoms:
            total += wt * np.exp(2j * np.real(grid_inner(self.basis, eta, z)))
        return complex(total)

    def field_energy(self) -> float:
        """integral of ||omega^(1/2) z||^2 against the measure."""
        half = self.dispersion.power(0.5)
        return sum(wt * grid_norm_sq(self.basis, half * z) for wt, z in self.atoms)


def point_measure(z: np.ndarray, basis: ModeBasis, dispersion: Dispersion) -> WignerMeasure:
    return WignerMeasure(((1.0, np.asarray(z, dtype=complex)),), basis, dispersion)


def classical_symbol_integral(measure: WignerMeasure, create_fns, annihilate_fns) -> complex:
    """Integral of the cylindrical monomial symbol against an atomic measure.

    The symbol is prod_i <z, g_i>_grid * prod_j <g_j, z>_grid with g_i the
    creation-side and g_j the annihilation-side profiles.
    """
    total = 0.0 + 0.0j
    for wt, z in measure.atoms:
        val = 1.0 + 0.0j
        for g in create_fns:
            val *= grid_inner(measure.basis, z, np.asarray(g, dtype=complex))
        for g in annihilate_fns:
            val *= grid_inner(measure.basis, np.asarray(g, dtype=complex), z)
        total += wt * val
    return complex(total)


# ---------------------------------------------------------------------------
# truncation policy


def poisson_tail_nmax(lam: float, tol: float, pad: int = 2, hard_cap: int = 100_000) -> int:
    """Smallest cap n with Chernoff Poisson-tail bound exp(-lam)(e lam / n)^n <= tol.

    The returned cap includes a small safety pad.  Raises when no admissible
    cap exists below `hard_cap`.
    """
    if lam < 0:
        raise ValueError("Poisson parameter must be nonnegative")
    if lam == 0:
        return pad
    n = max(1, int(math.ceil(lam)))
    while n < hard_cap:
        log_tail = -lam + n * (1.0 + math.log(lam) - math.log(n))
        if n > lam and log_tail <= math.log(tol):
            return n + pad
        n += 1
    raise TruncationError(f"no Poisson cap below {hard_cap} for lambda={lam}, tol={tol}")


# ---------------------------------------------------------------------------
# per-mode factor states (closed-form backend)


class _ModeFactor:
    """Single-mode factor: displaced (optionally squeezed / one-quantum excited) state.

    Closed-form moments in the standard ladder convention; alpha is the
    displacement, s the one-quantum admixture D(alpha)(|0> + s|1>)/nu, r a real
    squeeze parameter (exclusive with s).
    """

    def __init__(self, alpha: complex = 0.0, s: complex = 0.0, r: float = 0.0):
        if s != 0.0 and r != 0.0:
            raise ValueError("one-quantum admixture and squeezing are exclusive")
        self.alpha = complex(alpha)
        self.s = complex(s)
        self.r = float(r)

    # first and second moments of the standard ladder operator
    def mean_a(self) -> complex:
        nu = 1.0 + abs(self.s) ** 2
        return self.alpha + self.s / nu

    def mean_aa(self) -> complex:
        nu = 1.0 + abs(self.s) ** 2
        val = self.alpha ** 2 + 2.0 * self.alpha * self.s / nu
        if self.r != 0.0:
            val -= math.cosh(self.r) * math.sinh(self.r)
        return val

    def mean_ada(self) -> float | complex:
        nu = 1.0 + abs(self.s) ** 2
        val = (abs(self.s) ** 2 + 2.0 * np.real(np.conj(self.alpha) * self.s)) / nu \
            + abs(self.alpha) ** 2
        if self.r != 0.0:
            val += math.sinh(self.r) ** 2
        return val

    def number_stats(self) -> tuple:
        """(E[N], Var[N]) from an exact small-matrix evaluation."""
        vec = self.coefficients(self.occupation_cap(1e-14))
        n = np.arange(vec.size)
        p = np.abs(vec) ** 2
        p = p / p.sum()
        mean = float(np.sum(p * n))
        var = float(np.sum(p * n ** 2)) - mean ** 2
        return mean, var

    def occupation_cap(self, tail_tol: float) -> int:
        lam = abs(self.alpha) ** 2 + abs(self.s) ** 2 + math.sinh(self.r) ** 2
        extra = 2 if (self.s != 0.0 or self.r != 0.0) else 0
        return poisson_tail_nmax(lam, tail_tol) + extra

    def coefficients(self, n_max: int) -> np.ndarray:
        """Occupation coefficients via truncated unitary generators (norm 1)."""
        a = ladder_matrix(n_max)
        vec = np.zeros(n_max + 1, dtype=complex)
        vec[0] = 1.0
        if self.r != 0.0:
            vec = expm(0.5 * self.r * (a @ a - a.T @ a.T)) @ vec
        if self.s != 0.0:
            vec = vec + self.s * (a.T @ vec)
            vec = vec / np.linalg.norm(vec)
        if self.alpha != 0.0:
            vec = expm(self.alpha * a.T - np.conj(self.alpha) * a) @ vec
        return vec

    def weyl_factor(self, beta: complex) -> complex:
        """<psi, D(beta) psi> in closed form."""
        phase = np.exp(2j * np.imag(beta * np.conj(self.alpha)))
        if self.r != 0.0:
            beta_eff = beta * math.cosh(self.r) + np.conj(beta) * math.sinh(self.r)
            core = np.exp(-0.5 * abs(beta_eff) ** 2)
        elif self.s != 0.0:
            nu = 1.0 + abs(self.s) ** 2
            core = np.exp(-0.5 * abs(beta) ** 2) * (
                1.0 - self.s * np.conj(beta) + np.conj(self.s) * beta
                + abs(self.s) ** 2 * (1.0 - abs(beta) ** 2)) / nu
        else:
            core = np.exp(-0.5 * abs(beta) ** 2)
        return complex(phase * core)


# ---------------------------------------------------------------------------
# state families


class FieldStateFamily:
    """eps-indexed field state with closed-form moments and an exact backend.

    `grade` limits the admissible Wick-monomial degree: 'nelson' certifies
    first moments only, 'pf' moments of degree up to two.
    """

    def __init__(self, kind: str, basis: ModeBasis, dispersion: Dispersion,
                 z0=None, g=None, squeeze=None, grade: str = "pf",
                 declared_limit: WignerMeasure | None = None):
        if grade not in ("nelson", "pf"):
            raise ValueError("grade must be 'nelson' or 'pf'")
        self.kind = kind
        self.basis = basis
        self.dispersion = dispersion
        self.grade = grade
        m = basis.size
        self.z0 = np.zeros(m, complex) if z0 is None else np.asarray(z0, complex)
        self.g = np.zeros(m, complex) if g is None else np.asarray(g, complex)
        self.squeeze = np.zeros(m, float) if squeeze is None else np.asarray(squeeze, float)
        for arr in (self.z0, self.g, self.squeeze):
            if arr.shape != (m,):
                raise ValueError("family profiles must be per-mode grid functions")
        if not np.isfinite(grid_norm_sq(basis, dispersion.power(0.5) * self.z0)):
            raise ValueError("displacement profile has infinite field energy")
        self.declared_limit = declared_limit

    @property
    def max_degree(self) -> int:
        return 1 if self.grade == "nelson" else 2

    # -- per-mode factors -------------------------------------------------
    def _factors(self, eps: float):
        w = self.basis.cell_measures
        alphas = self.z0 * np.sqrt(w / eps)
        ss = np.sqrt(eps * w) * self.g
        return [_ModeFactor(alphas[m], ss[m], self.squeeze[m])
                for m in range(self.basis.size)]

    # -- closed-form moments ----------------------------------------------
    def first_moment(self, eps: float) -> np.ndarray:
        """m1(k) = <a_eps(k)> on the grid."""
        w = self.basis.cell_measures
        means = np.array([f.mean_a() for f in self._factors(eps)])
        return np.sqrt(eps / w) * means

    def pair_moment_aa(self, eps: float) -> np.ndarray:
        """m2_aa(k, k') = <a_eps(k) a_eps(k')>."""
        w = self.basis.cell_measures
        factors = self._factors(eps)
        means = np.array([f.mean_a() for f in factors])
        m1 = np.sqrt(eps / w) * means
        mat = np.outer(m1, m1)
        diag = eps / w * np.array([f.mean_aa() for f in factors])
        np.fill_diagonal(mat, diag)
        return mat

    def pair_moment_ada(self, eps: float) -> np.ndarray:
        """m2_ada(k, k') = <a_eps^+(k) a_eps(k')> (Hermitian)."""
        w = self.basis.cell_measures
        factors = self._factors(eps)
        means = np.array([f.mean_a() for f in factors])
        m1 = np.sqrt(eps / w) * means
        mat = np.outer(np.conj(m1), m1)
        diag = eps / w * np.array([f.mean_ada() for f in factors])
        np.fill_diagonal(mat, diag)
        return mat

    def energy_expectation(self, eps: float) -> dict:
        """<1 + dGamma_eps(omega)> and the pair-energy term, in closed form."""
        factors = self._factors(eps)
        stats = [f.number_stats() for f in factors]
        mean_n = np.array([s[0] for s in stats])
        var_n = np.array([s[1] for s in stats])
        om = self.dispersion.values
        e1 = eps * float(np.sum(om * mean_n))
        e2 = eps ** 2 * (float(np.sum(om * mean_n)) ** 2
                         + float(np.sum(om ** 2 * (var_n - mean_n))))
        return {"one_plus_dgamma": 1.0 + e1, "dgamma_omega": e1, "dgamma2": e2}

    def energy_uniformity(self, epsilons) -> dict:
        """Supremum of the energy functionals over an eps sweep (A_Psi audit)."""
        vals1, vals2 = [], []
        for eps in epsilons:
            e = self.energy_expectation(eps)
            vals1.append(e["one_plus_dgamma"])
            vals2.append(e["one_plus_dgamma"] + e["dgamma2"])
        return {"sup_nelson_functional": max(vals1), "sup_pf_functional": max(vals2)}

    def weyl_expectation(self, eta: np.ndarray, eps: float) -> complex:
        """Closed-form <W_eps(eta)> (product over mode factors)."""
        eta = np.asarray(eta, complex)
        w = self.basis.cell_measures
        out = 1.0 + 0.0j
        for m, f in enumerate(self._factors(eps)):
            beta = 1j * math.sqrt(eps * w[m]) * eta[m]
            out *= f.weyl_factor(beta)
        return complex(out)

    # -- exact backend ------------------------------------------------------
    def truncation_for(self, eps: float, tail_tol: float = DEFAULT_TAIL_TOL,
                       dim_budget: int = DEFAULT_DIM_BUDGET) -> FockTruncation:
        caps = [f.occupation_cap(tail_tol) for f in self._factors(eps)]
        return FockTruncation(tuple(caps), eps, dim_budget)

    def fock_state(self, eps: float, tail_tol: float = DEFAULT_TAIL_TOL,
                   dim_budget: int = DEFAULT_DIM_BUDGET) -> FockState:
        trunc = self.truncation_for(eps, tail_tol, dim_budget)
        vecs = [f.coefficients(n) for f, n in zip(self._factors(eps), trunc.per_mode_max)]
        coeff = vecs[0]
        for v in vecs[1:]:
            coeff = np.multiply.outer(coeff, v)
        state = FockState(coeff, trunc, self.basis)
        return state.check_normalized(1e-10)

    def descriptor(self) -> dict:
        """Serializable description (profiles, not tensors)."""
        def pack(arr):
            return {"re": np.real(arr).tolist(), "im": np.imag(arr).tolist()}
        return {
            "kind": self.kind,
            "grade": self.grade,
            "z0": pack(self.z0),
            "g": pack(self.g),
            "squeeze": self.squeeze.tolist(),
        }


def build_family(kind: str, basis: ModeBasis, dispersion: Dispersion,
                 z0=None, g=None, squeeze=None, grade: str = "pf") -> FieldStateFamily:
    """Construct one of the cataloged state families with its declared limit.

    coherent(z0) pins the first moment to z0 for every eps, so the limit is
    the point measure at z0.  excited_coherent(z0, g) adds an order-eps
    one-quantum correction; gaussian_squeezed(z0, squeeze) an order-eps pair
    correction.  Both keep the limit at z0.
    """
    m = basis.size
    zero = np.zeros(m)
    if kind == "vacuum":
        fam = FieldStateFamily(kind, basis, dispersion, grade=grade)
        fam.declared_limit = point_measure(np.zeros(m, complex), basis, dispersion)
        return fam
    if kind == "coherent":
        if z0 is None:
            raise ValueError("coherent family needs a displacement profile z0")
        fam = FieldStateFamily(kind, basis, dispersion, z0=z0, grade=grade)
    elif kind == "excited_coherent":
        if z0 is None or g is None:
            raise ValueError("excited_coherent needs z0 and g profiles")
        fam = FieldStateFamily(kind, basis, dispersion, z0=z0, g=g, grade=grade)
    elif kind == "gaussian_squeezed":
        if z0 is None or squeeze is None:
            raise ValueError("gaussian_squeezed needs z0 and squeeze profiles")
        fam = FieldStateFamily(kind, basis, dispersion, z0=z0, squeeze=squeeze, grade=grade)
    else:
        raise ValueError(f"unknown family kind {kind!r}")
    if not np.all(np.isfinite(np.abs(fam.z0))) or not np.all(np.isfinite(np.abs(fam.g))):
        raise ValueError("family profiles must be finite")
    fam.declared_limit = point_measure(fam.z0, basis, dispersion)
    return fam


# ---------------------------------------------------------------------------
# Wick monomials


def wick_monomial_expectation(family: FieldStateFamily, create_fns, annihilate_fns,
                              eps: float, backend: str = "analytic") -> complex:
    """<prod_i a_eps^+(g_i) prod_j a_eps(g_j)> for degree <= 2 monomials.

    The admissible degree is set by the family's uniform-energy grade.
    """
    ell, m = len(create_fns), len(annihilate_fns)
    if ell + m > family.max_degree:
        raise ValueError(
            f"monomial degree {ell + m} exceeds grade '{family.grade}' bound "
            f"{family.max_degree}")
    basis = family.basis
    w = basis.cell_measures
    if backend == "fock":
        state = family.fock_state(eps)
        out = state
        for gfn in reversed(annihilate_fns):
            out = smeared_annihilate(out, np.asarray(gfn, complex))
        for gfn in reversed(create_fns):
            out = smeared_create(out, np.asarray(gfn, complex))
        return state.inner(out)
    if backend != "analytic":
        raise ValueError("backend must be 'analytic' or 'fock'")
    if ell + m == 0:
        return 1.0 + 0.0j
    m1 = family.first_moment(eps)
    if (ell, m) == (1, 0):
        g = np.asarray(create_fns[0], complex)
        return complex(np.sum(w * np.conj(m1) * g))
    if (ell, m) == (0, 1):
        g = np.asarray(annihilate_fns[0], complex)
        return complex(np.sum(w * np.conj(g) * m1))
    if (ell, m) == (1, 1):
        g1 = np.asarray(create_fns[0], complex)
        g2 = np.asarray(annihilate_fns[0], complex)
        mat = family.pair_moment_ada(eps)
        return complex(np.einsum("m,n,mn->", w * g1, w * np.conj(g2), mat))
    if (ell, m) == (0, 2):
        g1 = np.asarray(annihilate_fns[0], complex)
        g2 = np.asarray(annihilate_fns[1], complex)
        mat = family.pair_moment_aa(eps)
        return complex(np.einsum("m,n,mn->", w * np.conj(g1), w * np.conj(g2), mat))
    if (ell, m) == (2, 0):
        g1 = np.asarray(create_fns[0], complex)
        g2 = np.asarray(create_fns[1], complex)
        mat = family.pair_moment_aa(eps)
        return complex(np.conj(np.einsum("m,n,mn->", w * np.conj(g2), w * np.conj(g1), mat)))
    raise AssertionError("unreachable degree combination")
