"""Discretized particle-space quadratic forms: Schrodinger and Pauli operators.

Periodic boxes use exact spectral calculus (FFT Laplacian, fractional powers,
momentum operators); Dirichlet boxes use second-order stencils and are meant
for confining potentials.  Forms are kept matrix-free with tagged Hermitian
parts and can be materialized densely at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_GRID_BUDGET = 400_000

__all__ = [
    "ParticleGrid",
    "ExternalPotential",
    "QuadraticForm",
    "SolverError",
    "NegativeFormError",
    "assemble_nelson",
    "assemble_pauli",
    "klmn_bound",
    "KlmnWitness",
    "fractional_sandwich_norm",
    "lowest_eigenpairs",
    "Resolvent",
    "resolvent_apply",
    "admissible_shift",
    "polarization_sup",
    "momentum_apply",
    "spectral_curl",
    "divergence_residual",
    "dealiased_multiplier",
]


class SolverError(RuntimeError):
    """Iteration budget exceeded or residual tolerance missed."""


class NegativeFormError(RuntimeError):
    """A nonnegative form was required; shift by an admissible lambda first."""


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class ParticleGrid:
    """Uniform box grid for the particle space, scalar or 2-spinor valued."""

    dimension: int
    points_per_axis: int
    box_length: float
    boundary: str = "periodic"
    spinor_dim: int = 1
    budget: int = DEFAULT_GRID_BUDGET

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if self.boundary not in ("periodic", "dirichlet"):
            raise ValueError("boundary must be 'periodic' or 'dirichlet'")
        if self.spinor_dim not in (1, 2):
            raise ValueError("spinor_dim must be 1 or 2")
        if self.total_dim > self.budget:
            raise ValueError(f"grid dimension {self.total_dim} exceeds budget {self.budget}")

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dimension

    @property
    def npoints(self) -> int:
        return self.points_per_axis ** self.dimension

    @property
    def total_dim(self) -> int:
        return self.npoints * self.spinor_dim

    @property
    def spacing(self) -> float:
        if self.boundary == "periodic":
            return self.box_length / self.points_per_axis
        return self.box_length / (self.points_per_axis + 1)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dimension

    def axis_points(self) -> np.ndarray:
        h = self.spacing
        if self.boundary == "periodic":
            return -0.5 * self.box_length + h * np.arange(self.points_per_axis)
        return -0.5 * self.box_length + h * (np.arange(self.points_per_axis) + 1)

    def points(self) -> np.ndarray:
        """Flattened (npoints, dimension) array of grid points, C order."""
        ax = self.axis_points()
        mesh = np.meshgrid(*([ax] * self.dimension), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def k_axes(self):
        if self.boundary != "periodic":
            raise ValueError("spectral k-grid requires a periodic box")
        n = self.points_per_axis
        return [2.0 * np.pi * np.fft.fftfreq(n, d=self.box_length / n)
                for _ in range(self.dimension)]

    def k_mesh(self):
        mesh = np.meshgrid(*self.k_axes(), indexing="ij")
        return mesh

    def k_norm_sq(self) -> np.ndarray:
        mesh = self.k_mesh()
        return sum(m ** 2 for m in mesh)


@dataclass(frozen=True)
class ExternalPotential:
    """Real external potential split into positive and negative parts."""

    u_plus: np.ndarray
    u_minus: np.ndarray

    def __post_init__(self):
        up = np.asarray(self.u_plus, dtype=float)
        um = np.asarray(self.u_minus, dtype=float)
        object.__setattr__(self, "u_plus", up)
        object.__setattr__(self, "u_minus", um)
        if up.shape != um.shape:
            raise ValueError("positive and negative parts must share the grid")
        if np.any(up < 0) or np.any(um < 0):
            raise ValueError("split parts must be nonnegative")

    @staticmethod
    def from_values(u: np.ndarray) -> "ExternalPotential":
        u = np.asarray(u, dtype=float)
        return ExternalPotential(np.maximum(u, 0.0), np.maximum(-u, 0.0))

    @property
    def values(self) -> np.ndarray:
        return self.u_plus - self.u_minus


# ---------------------------------------------------------------------------
# spectral primitives


def _fft_multiply(grid: ParticleGrid, psi_flat: np.ndarray, multiplier: np.ndarray):
    comps = psi_flat.reshape(grid.spinor_dim, *grid.shape)
    out = np.empty_like(comps)
    for s in range(grid.spinor_dim):
        out[s] = np.fft.ifftn(multiplier * np.fft.fftn(comps[s]))
    return out.reshape(psi_flat.shape)


def _dirichlet_laplacian(grid: ParticleGrid) -> sp.csr_matrix:
    n = grid.points_per_axis
    h = grid.spacing
    one = sp.diags([np.full(n - 1, -1.0), np.full(n, 2.0), np.full(n - 1, -1.0)],
                   [-1, 0, 1]) / h ** 2
    eye = sp.identity(n)
    mats = []
    for axis in range(grid.dimension):
        factors = [one if ax == axis else eye for ax in range(grid.dimension)]
        acc = factors[0]
        for f in factors[1:]:
            acc = sp.kron(acc, f)
        mats.append(acc)
    lap = sum(mats)
    if grid.spinor_dim > 1:
        lap = sp.kron(sp.identity(grid.spinor_dim), lap)
    return lap.tocsr()


def momentum_apply(grid: ParticleGrid, psi_flat: np.ndarray, axis: int) -> np.ndarray:
    """P_axis = -i d/dx_axis on the periodic box."""
    mesh = grid.k_mesh()
    return _fft_multiply(grid, psi_flat, mesh[axis])


def _coarse_bin_index(n: int, fine: int) -> np.ndarray:
    freqs = (np.fft.fftfreq(n) * n).astype(int)
    return np.mod(freqs, fine)


def _upsample(values: np.ndarray, factor: int = 2, zero_nyquist: bool = False) -> np.ndarray:
    """Band-limited interpolation onto a zero-padded fine grid.

    `zero_nyquist` drops the (sign-ambiguous) top bins; fields entering
    products are filtered this way so spectral derivatives and commutators
    agree exactly.
    """
    shape = values.shape
    fine_shape = tuple(factor * n for n in shape)
    hat = np.fft.fftn(values)
    if zero_nyquist:
        for ax, n in enumerate(shape):
            if n % 2 == 0:
                sl = [slice(None)] * len(shape)
                sl[ax] = n // 2
                hat[tuple(sl)] = 0.0
    out = np.zeros(fine_shape, dtype=complex)
    idx = np.ix_(*[_coarse_bin_index(n, f) for n, f in zip(shape, fine_shape)])
    out[idx] = hat
    scale = np.prod(fine_shape) / np.prod(shape)
    return np.fft.ifftn(out) * scale


def _downsample(values_fine: np.ndarray, shape, factor: int = 2) -> np.ndarray:
    fine_shape = values_fine.shape
    hat = np.fft.fftn(values_fine)
    idx = np.ix_(*[_coarse_bin_index(n, f) for n, f in zip(shape, fine_shape)])
    coarse_hat = hat[idx] * (np.prod(shape) / np.prod(fine_shape))
    return np.fft.ifftn(coarse_hat)


def dealiased_multiplier(grid: ParticleGrid, values: np.ndarray):
    """Galerkin multiplication by a sampled field: pad, multiply, project back.

    The projected product keeps the commutator identity [P_j, M(F)] = M(dF/dx_j)
    exact on the grid, which the Pauli assembly-route comparison relies on.
    """
    field_fine = _upsample(np.asarray(values, dtype=complex).reshape(grid.shape),
                           zero_nyquist=True)

    def matvec(psi_flat):
        comps = np.asarray(psi_flat, dtype=complex).reshape(grid.spinor_dim, *grid.shape)
        out = np.empty_like(comps)
        for s in range(grid.spinor_dim):
            fine = _upsample(comps[s]) * field_fine
            out[s] = _downsample(fine, grid.shape)
        return out.reshape(psi_flat.shape)
    return matvec


# ---------------------------------------------------------------------------
# quadratic forms


class QuadraticForm:
    """Sparse/matrix-free Hermitian form with tagged parts on a particle grid."""

    def __init__(self, grid: ParticleGrid, parts: dict):
        self.grid = grid
        self.parts = dict(parts)
        self._dense = None
        self._lower = None

    @property
    def size(self) -> int:
        return self.grid.total_dim

    def apply(self, psi: np.ndarray, only: tuple | None = None) -> np.ndarray:
        psi = np.asarray(psi, dtype=complex).ravel()
        out = np.zeros_like(psi)
        for tag, matvec in self.parts.items():
            if only is not None and tag not in only:
                continue
            out += matvec(psi)
        return out

    def form(self, psi: np.ndarray, phi: np.ndarray | None = None,
             only: tuple | None = None) -> complex:
        """Sesquilinear value h^d <psi, H phi> on the grid quadrature."""
        phi = psi if phi is None else phi
        val = np.vdot(np.asarray(psi, complex).ravel(), self.apply(phi, only=only))
        return complex(val * self.grid.cell_volume)

    def vec_inner(self, psi: np.ndarray, phi: np.ndarray) -> complex:
        return complex(np.vdot(np.asarray(psi, complex).ravel(),
                               np.asarray(phi, complex).ravel()) * self.grid.cell_volume)

    def dense(self) -> np.ndarray:
        if self._dense is None:
            n = self.size
            if n > 6000:
                raise ValueError(f"dense materialization refused at dimension {n}")
            eye = np.eye(n, dtype=complex)
            cols = [self.apply(eye[:, j]) for j in range(n)]
            self._dense = np.stack(cols, axis=1)
        return self._dense

    def hermiticity_defect(self) -> float:
        h = self.dense()
        scale = max(1.0, float(np.abs(h).max()))
        return float(np.abs(h - h.conj().T).max()) / scale

    def linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator((self.size, self.size), matvec=self.apply,
                                   dtype=complex)

    def lower_bound(self) -> float:
        """Smallest Ritz value (cached)."""
        if self._lower is None:
            if self.size <= 3000:
                vals = np.linalg.eigvalsh(self.dense())
                self._lower = float(vals[0])
            else:
                vals = spla.eigsh(self.linear_operator(), k=1, which="SA",
                                  return_eigenvectors=False, maxiter=5000)
                self._lower = float(vals[0])
        return self._lower


def _as_values(v, grid: ParticleGrid, name: str) -> np.ndarray:
    arr = np.asarray(getattr(v, "values", v))
    if arr.shape[-1] != grid.npoints:
        arr = arr.reshape(arr.shape[: arr.ndim - grid.dimension] + (grid.npoints,))
    if np.max(np.abs(np.imag(arr))) > 1e-10 * max(1.0, np.max(np.abs(arr))):
        raise ValueError(f"{name} must be real on the grid")
    return np.real(arr)


def _diag_part(grid: ParticleGrid, values: np.ndarray, sign: float = 1.0):
    vals = np.tile(values, grid.spinor_dim)

    def matvec(psi):
        return sign * vals * psi
    return matvec


def assemble_nelson(grid: ParticleGrid, U: ExternalPotential, V=None) -> QuadraticForm:
    """Schrodinger form -Laplace + U + V with tagged parts."""
    if grid.spinor_dim != 1:
        raise ValueError("scalar model needs spinor_dim = 1")
    parts = {}
    if grid.boundary == "periodic":
        k2 = grid.k_norm_sq()
        parts["kinetic"] = lambda psi: _fft_multiply(grid, psi, k2)
    else:
        lap = _dirichlet_laplacian(grid)
        parts["kinetic"] = lambda psi: lap @ psi
    parts["U_plus"] = _diag_part(grid, U.u_plus)
    parts["U_minus"] = _diag_part(grid, U.u_minus, sign=-1.0)
    if V is not None:
        v_vals = _as_values(V, grid, "V")
        parts["V"] = _diag_part(grid, v_vals)
    return QuadraticForm(grid, parts)


_SIGMA = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)


def _spinor_mix(grid: ParticleGrid, psi_flat: np.ndarray, matrix22) -> np.ndarray:
    comps = psi_flat.reshape(2, grid.npoints)
    out = np.empty_like(comps)
    out[0] = matrix22[0][0] * comps[0] + matrix22[0][1] * comps[1]
    out[1] = matrix22[1][0] * comps[0] + matrix22[1][1] * comps[1]
    return out.reshape(psi_flat.shape)


def spectral_curl(grid: ParticleGrid, field: np.ndarray) -> np.ndarray:
    """Curl of a real 3-component field on a periodic box, via FFT."""
    if grid.boundary != "periodic":
        # one-sided/central stencil fallback for non-periodic boxes
        comps = [field[j].reshape(grid.shape) for j in range(3)]
        grads = [[np.gradient(c, grid.spacing, axis=ax) if ax < grid.dimension
                  else np.zeros_like(c) for ax in range(3)] for c in comps]
        curl = np.stack([
            (grads[2][1] - grads[1][2]).ravel(),
            (grads[0][2] - grads[2][0]).ravel(),
            (grads[1][0] - grads[0][1]).ravel(),
        ])
        return np.real(curl)
    mesh = grid.k_mesh()
    kvec = [mesh[ax] if ax < grid.dimension else np.zeros(grid.shape)
            for ax in range(3)]
    hats = [np.fft.fftn(field[j].reshape(grid.shape)) for j in range(3)]
    curl_hat = [
        1j * (kvec[1] * hats[2] - kvec[2] * hats[1]),
        1j * (kvec[2] * hats[0] - kvec[0] * hats[2]),
        1j * (kvec[0] * hats[1] - kvec[1] * hats[0]),
    ]
    return np.stack([np.real(np.fft.ifftn(c)).ravel() for c in curl_hat])


def divergence_residual(grid: ParticleGrid, field: np.ndarray) -> float:
    mesh = grid.k_mesh()
    acc = np.zeros(grid.shape, dtype=complex)
    for ax in range(grid.dimension):
        acc += 1j * mesh[ax] * np.fft.fftn(field[ax].reshape(grid.shape))
    scale = max(1.0, float(np.max(np.abs(field))))
    return float(np.max(np.abs(np.fft.ifftn(acc)))) / scale


def assemble_pauli(grid: ParticleGrid, U: ExternalPotential, A, W, B=None,
                   route: str = "split", curl_tol: float = 1e-6) -> QuadraticForm:
    """Pauli-type form P^2 - (sigma.P)(sigma.A) - (sigma.A)(sigma.P) + W + U.

    route 'split' uses the identity (sigma.P)(sigma.A) + (sigma.A)(sigma.P)
    = P.A + A.P + sigma.B with B the curl of A; route 'pauli' multiplies the
    Pauli matrices out directly.  Both must agree on dense grids.
    """
    if grid.spinor_dim != 2:
        raise ValueError("Pauli assembly needs spinor_dim = 2")
    if grid.boundary != "periodic":
        raise ValueError("Pauli assembly uses spectral momenta; use a periodic box")
    a_vals = np.stack([_as_values(np.asarray(A)[j], grid, "A") for j in range(3)])
    w_vals = _as_values(W, grid, "W")
    b_curl = spectral_curl(grid, a_vals)
    if B is None:
        b_vals = b_curl
    else:
        b_vals = np.stack([_as_values(np.asarray(B)[j], grid, "B") for j in range(3)])
        mismatch = float(np.max(np.abs(b_vals - b_curl)))
        if mismatch > curl_tol * max(1.0, float(np.max(np.abs(b_vals)))):
            raise ValueError(f"supplied B deviates from curl A by {mismatch:.3e}")

    parts = {}
    k2 = grid.k_norm_sq()
    parts["kinetic"] = lambda psi: _fft_multiply(grid, psi, k2)
    parts["U_plus"] = _diag_part(grid, U.u_plus)
    parts["U_minus"] = _diag_part(grid, U.u_minus, sign=-1.0)
    parts["W"] = _diag_part(grid, w_vals)

    # Galerkin products keep [P_j, A_m] equal to the multiplication by the
    # spectral derivative, so both routes produce the same matrix.
    mult_a = [dealiased_multiplier(grid, a_vals[j]) for j in range(3)]
    mult_b = [dealiased_multiplier(grid, b_vals[j]) for j in range(3)]

    if route == "split":
        def cross(psi):
            out = np.zeros_like(psi)
            for ax in range(grid.dimension):
                out += momentum_apply(grid, mult_a[ax](psi), ax)
                out += mult_a[ax](momentum_apply(grid, psi, ax))
            return -out
        parts["A_cross_terms"] = cross

        def sigma_b(psi):
            out = np.zeros_like(psi)
            for j in range(3):
                out += _spinor_mix(grid, mult_b[j](psi), _SIGMA[j])
            return -out
        parts["sigma_B"] = sigma_b
    elif route == "pauli":
        def cross_pauli(psi):
            # -(sigma.P)(sigma.A) - (sigma.A)(sigma.P), Pauli matrices multiplied out
            out = np.zeros_like(psi)
            for j in range(3):
                for m in range(3):
                    sig = _SIGMA[j] @ _SIGMA[m]
                    if j < grid.dimension:
                        t1 = momentum_apply(grid, mult_a[m](psi), j)
                    else:
                        t1 = np.zeros_like(psi)
                    if m < grid.dimension:
                        t2 = mult_a[j](momentum_apply(grid, psi, m))
                    else:
                        t2 = np.zeros_like(psi)
                    out += _spinor_mix(grid, t1 + t2, sig)
            return -out
        parts["A_cross_terms"] = cross_pauli
    else:
        raise ValueError("route must be 'split' or 'pauli'")
    return QuadraticForm(grid, parts)


# ---------------------------------------------------------------------------
# KLMN relative bounds


@dataclass(frozen=True)
class KlmnWitness:
    a: float
    b: float
    scan: tuple
    admissible: bool


def _resolvent_half_multiplier(grid: ParticleGrid, b: float) -> np.ndarray:
    return (grid.k_norm_sq() + b) ** -0.5


def klmn_bound(part_values: np.ndarray, grid: ParticleGrid,
               ladder=(1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024)) -> KlmnWitness:
    """Relative form-bound witnesses (a, b): <psi,|V|psi> <= a <psi,-Lap psi> + b.

    a(b) is the top eigenvalue of (-Lap + b)^(-1/2) |V| (-Lap + b)^(-1/2),
    scanned over the b ladder; returns the admissible pair (a < 1) minimizing
    a + b / max(ladder).
    """
    vals = np.abs(_as_values(part_values, grid, "KLMN part"))
    if grid.boundary != "periodic":
        raise ValueError("KLMN estimator uses the spectral resolvent; periodic only")
    if not np.any(vals > 0.0):
        return KlmnWitness(0.0, 0.0, tuple((float(b), 0.0) for b in ladder), True)
    scan = []
    for b in ladder:
        mult = _resolvent_half_multiplier(grid, float(b))

        def matvec(psi, mult=mult):
            y = _fft_multiply(grid, psi, mult)
            y = vals * y if grid.spinor_dim == 1 else np.tile(vals, 2) * y
            return _fft_multiply(grid, y, mult)
        op = spla.LinearOperator((grid.total_dim, grid.total_dim), matvec=matvec,
                                 dtype=complex)
        if grid.total_dim <= 400:
            dense = np.stack([matvec(col) for col in np.eye(grid.total_dim, dtype=complex).T],
                             axis=1)
            top = float(np.linalg.eigvalsh(dense)[-1])
        else:
            top = float(spla.eigsh(op, k=1, which="LA", return_eigenvectors=False,
                                   maxiter=5000)[0])
        scan.append((float(b), top))
    good = [(a_val + b_val / max(ladder), a_val, b_val)
            for b_val, a_val in scan if a_val < 1.0]
    if not good:
        return KlmnWitness(math.inf, math.inf, tuple(scan), False)
    _, a_best, b_best = min(good)
    return KlmnWitness(a_best, b_best, tuple(scan), True)


# ---------------------------------------------------------------------------
# fractional sandwiches


def fractional_sandwich_norm(part, grid: ParticleGrid, s_left: float, s_right: float,
                             lambda0: float = 1.0, kind: str = "resolvent",
                             max_iter: int = 3000, tol: float = 1e-8,
                             start_seed: int = 7) -> float:
    """Operator norm of M_left . Part . M_right by power iteration.

    M are spectral multipliers: (-Lap + lambda0)^(-s) for kind 'resolvent',
    |P|^(-s) with the zero mode projected out for kind 'homogeneous'.  `part`
    is a real multiplication array or a Hermitian matvec callable.
    """
    if grid.boundary != "periodic":
        raise ValueError("fractional calculus requires a periodic box")
    k2 = grid.k_norm_sq()
    if kind == "resolvent":
        def mult(s):
            return (k2 + lambda0) ** (-s)
    elif kind == "homogeneous":
        def mult(s):
            # |P|^(-s): multiplier |k|^(-s), zero mode projected out
            with np.errstate(divide="ignore"):
                return np.where(k2 > 0, k2 ** (-s / 2.0), 0.0)
    else:
        raise ValueError("kind must be 'resolvent' or 'homogeneous'")
    ml = mult(s_left)
    mr = mult(s_right)
    if callable(part):
        part_mv = part
    else:
        vals = _as_values(part, grid, "sandwich part")

        def part_mv(psi):
            if grid.spinor_dim == 1:
                return vals * psi
            return np.tile(vals, 2) * psi

    def t_apply(psi):
        return _fft_multiply(grid, part_mv(_fft_multiply(grid, psi, mr)), ml)

    def t_adj(psi):
        return _fft_multiply(grid, part_mv(_fft_multiply(grid, psi, ml)), mr)

    rng = np.random.default_rng(start_seed)
    x = rng.standard_normal(grid.total_dim) + 1j * rng.standard_normal(grid.total_dim)
    x /= np.linalg.norm(x)
    prev = 0.0
    for _ in range(max_iter):
        y = t_adj(t_apply(x))
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        val = math.sqrt(norm)
        if abs(val - prev) <= tol * max(val, 1e-30):
            return val
        prev = val
    raise SolverError(f"power iteration did not settle within {max_iter} iterations")


# ---------------------------------------------------------------------------
# eigenpairs and resolvents


def lowest_eigenpairs(form: QuadraticForm, count: int, residual_tol: float = 1e-8):
    """Lowest eigenpairs with residual verification."""
    n = form.size
    if n <= 3000:
        h = form.dense()
        vals, vecs = np.linalg.eigh(h)
        vals, vecs = vals[:count], vecs[:, :count]
    else:
        vals, vecs = spla.eigsh(form.linear_operator(), k=count, which="SA",
                                maxiter=10000)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    for j in range(count):
        res = np.linalg.norm(form.apply(vecs[:, j]) - vals[j] * vecs[:, j])
        if res > residual_tol * max(1.0, abs(vals[j])):
            raise SolverError(f"eigenpair {j} residual {res:.2e} above {residual_tol:.2e}")
    return np.real(vals), vecs


class Resolvent:
    """(H + lambda)^(-1) with admissibility check and verified residuals."""

    def __init__(self, form: QuadraticForm, lam: float, tol: float = 1e-10,
                 margin: float = 1e-9):
        self.form = form
        self.lam = float(lam)
        self.tol = tol
        lower = form.lower_bound()
        if self.lam <= -lower + margin:
            raise NegativeFormError(
                f"shift {lam} is not admissible for spectrum bounded below by {lower}")
        self._lu = None
        if form.size <= 3000:
            h = form.dense() + self.lam * np.eye(form.size)
            self._lu = sla.lu_factor(h)

    def apply(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=complex).ravel()
        if self._lu is not None:
            sol = sla.lu_solve(self._lu, rhs)
        else:
            def shifted(psi):
                return self.form.apply(psi) + self.lam * psi
            op = spla.LinearOperator((self.form.size,) * 2, matvec=shifted, dtype=complex)
            sol, info = spla.cg(op, rhs, rtol=1e-12, atol=0.0, maxiter=20000)
            if info != 0:
                raise SolverError(f"CG failed with info={info}")
        res = np.linalg.norm(self.form.apply(sol) + self.lam * sol - rhs)
        if res > self.tol * max(1.0, np.linalg.norm(rhs)):
            raise SolverError(f"resolvent residual {res:.2e} above {self.tol:.2e}")
        return sol


def resolvent_apply(form: QuadraticForm, lam: float, rhs: np.ndarray,
                    tol: float = 1e-10) -> np.ndarray:
    return Resolvent(form, lam, tol=tol).apply(rhs)


def admissible_shift(forms, lambda0: float = 1.0, pad: float = 1.0) -> float:
    """lambda = max(-m, lambda0) + pad with m the smallest Ritz value over the forms."""
    m = min(f.lower_bound() for f in forms)
    return max(-m, lambda0) + pad


# ---------------------------------------------------------------------------
# polarization supremum


def polarization_sup(form: QuadraticForm, psi: np.ndarray, probes,
                     shift: float = 0.0, neg_tol: float = 1e-9):
    """sup over probes of Re Q[phi, 2 psi - phi] against Q[psi].

    The probe list is always extended by phi = psi, where the supremum is
    attained for nonnegative forms.  Detects a negative form when some probe
    exceeds Q[psi] beyond roundoff.
    """
    psi = np.asarray(psi, dtype=complex).ravel()

    def q(u, v):
        val = form.form(u, v)
        if shift != 0.0:
            val += shift * form.vec_inner(u, v)
        return val

    q_psi = float(np.real(q(psi, psi)))
    values = []
    for phi in list(probes) + [psi]:
        phi = np.asarray(phi, dtype=complex).ravel()
        values.append(float(np.real(q(phi, 2.0 * psi - phi))))
    best = max(values)
    gap = q_psi - best
    scale = max(1.0, abs(q_psi))
    if gap < -neg_tol * scale:
        raise NegativeFormError(
            f"polarization probe exceeded Q[psi] by {-gap:.3e}; shift the form first")
    return best, gap, values
