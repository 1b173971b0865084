"""Numerical Lorentz quasi-norms, homogeneous Sobolev norms, and inequality suites.

Quasi-norms are evaluated from the exact layer-cake integral of the sampled
step function: for finite q the integral over the finitely many level sets is
closed-form (and reproduces the plain discrete L^p norm exactly at q = p); for
q = inf the integrand d(t)^(1/p) t is evaluated at the sample levels with the
right-continuous distribution function, plus the exact supremum over the
interval below the smallest level.  Sample levels agreeing to a relative
tolerance are merged into one level set, so floating-point ties cannot split
a cell cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

LEVEL_MERGE_RTOL = 1e-9

__all__ = [
    "SampledFunction",
    "LorentzIndex",
    "quasinorm",
    "holder_check",
    "young_check",
    "homogeneous_sobolev_norm",
    "fourier_transform_box",
    "sobolev_fourier_product_ratio",
    "gaussian_mixture",
    "run_holder_suite",
    "run_young_suite",
    "run_embedding_suite",
    "run_fourier_product_suite",
]


@dataclass(frozen=True)
class SampledFunction:
    """Complex samples with positive cell measures on a d-dimensional grid."""

    values: np.ndarray
    cell_measures: np.ndarray
    dimension: int

    def __post_init__(self):
        v = np.asarray(self.values).ravel()
        w = np.asarray(self.cell_measures, dtype=float).ravel()
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "cell_measures", w)
        if v.shape != w.shape:
            raise ValueError("values and cell measures must have equal length")
        if not np.all(np.isfinite(w)) or not np.all(w > 0):
            raise ValueError("cell measures must be finite and positive")
        if not np.all(np.isfinite(np.abs(v))):
            raise ValueError("samples must be NaN-free")
        if self.dimension not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")


@dataclass(frozen=True)
class LorentzIndex:
    p: float
    q: float

    def __post_init__(self):
        if not (1 <= self.p < math.inf):
            raise ValueError("p must be finite and >= 1")
        if not (1 <= self.q):
            raise ValueError("q must be >= 1")


def _level_sets(f: SampledFunction):
    """Sorted positive levels t_j and tail measures D_j = |{|f| >= t_j}|."""
    a = np.abs(f.values)
    order = np.argsort(a, kind="stable")
    a = a[order]
    w = f.cell_measures[order]
    tail = np.cumsum(w[::-1])[::-1]
    pos = a > 0
    a = a[pos]
    tail = tail[pos]
    if a.size == 0:
        return np.empty(0), np.empty(0)
    levels, first = np.unique(a, return_index=True)
    # merge levels closer than the relative tolerance (floating-point ties)
    keep = [0]
    for i in range(1, levels.size):
        if levels[i] - levels[keep[-1]] > LEVEL_MERGE_RTOL * levels[i]:
            keep.append(i)
    keep = np.array(keep)
    return levels[keep], tail[first[keep]]


def quasinorm(f: SampledFunction, idx: LorentzIndex, convention: str = "general") -> float:
    """Lorentz quasi-norm of a sampled function.

    `convention` selects the prefactor: "general" uses p^(1/q) (equal to 1 at
    q = inf), "weak-prefactor" uses p.
    """
    p, q = idx.p, idx.q
    if convention == "general":
        pref = 1.0 if math.isinf(q) else p ** (1.0 / q)
    elif convention == "weak-prefactor":
        pref = p
    else:
        raise ValueError("convention must be 'general' or 'weak-prefactor'")
    levels, tail_ge = _level_sets(f)
    if levels.size == 0:
        return 0.0
    if math.isinf(q):
        tail_gt = np.empty_like(tail_ge)
        tail_gt[:-1] = tail_ge[1:]
        tail_gt[-1] = 0.0
        cand = tail_gt ** (1.0 / p) * levels
        below = tail_ge[0] ** (1.0 / p) * levels[0]
        return pref * float(max(cand.max(), below))
    prev = np.concatenate([[0.0], levels[:-1]])
    integral = float(np.sum(tail_ge ** (q / p) * (levels ** q - prev ** q))) / q
    return pref * integral ** (1.0 / q)


def lp_norm(f: SampledFunction, p: float) -> float:
    return float(np.sum(f.cell_measures * np.abs(f.values) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class RatioReport:
    ratio: float
    numerator: float
    denominator: float
    degenerate: bool


def _ratio(num: float, den: float) -> RatioReport:
    if den <= 0.0:
        return RatioReport(0.0 if num == 0.0 else math.inf, num, den, True)
    return RatioReport(num / den, num, den, False)


def holder_check(f1: SampledFunction, f2: SampledFunction, idx: LorentzIndex,
                 idx1: LorentzIndex, idx2: LorentzIndex) -> RatioReport:
    """||f1 f2||_{p,q} / (||f1||_{p1,q1} ||f2||_{p2,q2}) with 1/p = 1/p1 + 1/p2."""
    if abs(1.0 / idx.p - (1.0 / idx1.p + 1.0 / idx2.p)) > 1e-12:
        raise ValueError("Lebesgue exponents violate 1/p = 1/p1 + 1/p2")
    lhs_q = 0.0 if math.isinf(idx.q) else 1.0 / idx.q
    rhs_q = (0.0 if math.isinf(idx1.q) else 1.0 / idx1.q) \
        + (0.0 if math.isinf(idx2.q) else 1.0 / idx2.q)
    if abs(lhs_q - rhs_q) > 1e-12:
        raise ValueError("secondary exponents violate 1/q = 1/q1 + 1/q2")
    if not np.array_equal(f1.cell_measures, f2.cell_measures):
        raise ValueError("pointwise product needs a common grid")
    prod = SampledFunction(f1.values * f2.values, f1.cell_measures, f1.dimension)
    num = quasinorm(prod, idx)
    den = quasinorm(f1, idx1) * quasinorm(f2, idx2)
    return _ratio(num, den)


def young_check(f1: np.ndarray, f2: np.ndarray, spacing: float, idx: LorentzIndex,
                idx1: LorentzIndex, idx2: LorentzIndex) -> RatioReport:
    """||f1 * f2||_{p,q} / (||f1|| ||f2||) for box-sampled arrays; 1 + 1/p = 1/p1 + 1/p2."""
    if not (1 < idx.p and 1 < idx1.p < math.inf and 1 < idx2.p < math.inf):
        raise ValueError("Young exponents must satisfy 1 < p, p1, p2 < inf")
    if abs(1.0 + 1.0 / idx.p - (1.0 / idx1.p + 1.0 / idx2.p)) > 1e-12:
        raise ValueError("Lebesgue exponents violate 1 + 1/p = 1/p1 + 1/p2")
    f1 = np.asarray(f1)
    f2 = np.asarray(f2)
    if f1.shape != f2.shape:
        raise ValueError("convolution inputs need a common box grid")
    d = f1.ndim
    cell = spacing ** d
    conv = fftconvolve(f1, f2, mode="full") * cell
    num = quasinorm(SampledFunction(conv, np.full(conv.size, cell), d), idx)
    den = quasinorm(SampledFunction(f1, np.full(f1.size, cell), d), idx1) \
        * quasinorm(SampledFunction(f2, np.full(f2.size, cell), d), idx2)
    return _ratio(num, den)


# ---------------------------------------------------------------------------
# periodic-box Fourier calculus


def _k_grid(shape, box_length: float):
    freqs = [2.0 * np.pi * np.fft.fftfreq(n, d=box_length / n) for n in shape]
    mesh = np.meshgrid(*freqs, indexing="ij")
    return np.sqrt(sum(m ** 2 for m in mesh))


def fourier_transform_box(psi: np.ndarray, box_length: float) -> np.ndarray:
    """Continuum-normalized Fourier samples (2 pi)^(-d/2) integral e^(-ikx) psi."""
    d = psi.ndim
    n = psi.shape[0]
    h = box_length / n
    return np.fft.fftn(psi) * h ** d / (2.0 * np.pi) ** (d / 2.0)


def homogeneous_sobolev_norm(psi: np.ndarray, alpha: float, box_length: float) -> float:
    """|| |k|^alpha F(psi) ||_2 on the periodic box, zero mode excluded."""
    ft = fourier_transform_box(psi, box_length)
    kn = _k_grid(psi.shape, box_length)
    kn_flat = kn.ravel()
    ft_flat = ft.ravel()
    mask = kn_flat > 0
    dk = (2.0 * np.pi / box_length) ** psi.ndim
    return float(np.sqrt(np.sum(kn_flat[mask] ** (2 * alpha)
                                * np.abs(ft_flat[mask]) ** 2) * dk))


def sobolev_fourier_product_ratio(psi1: np.ndarray, psi2: np.ndarray,
                                  alpha1: float, alpha2: float,
                                  box_length: float, q: float = 2.0) -> RatioReport:
    """||F(psi1 psi2)||_{p,q} / (||psi1||_{H^a1} ||psi2||_{H^a2}), p = d/(a1+a2)."""
    if alpha1 < 0 or alpha2 < 0:
        raise ValueError("smoothness orders must be nonnegative")
    d = psi1.ndim
    s = (alpha1 + alpha2) / d
    if not (0 < s <= 1):
        raise ValueError("(alpha1 + alpha2)/d must lie in (0, 1]")
    p = 1.0 / s
    ft = fourier_transform_box(psi1 * psi2, box_length)
    kn = _k_grid(ft.shape, box_length)
    mask = kn.ravel() > 0
    dk = (2.0 * np.pi / box_length) ** d
    fk = SampledFunction(ft.ravel()[mask], np.full(mask.sum(), dk), d)
    num = quasinorm(fk, LorentzIndex(p, q))
    den = homogeneous_sobolev_norm(psi1, alpha1, box_length) \
        * homogeneous_sobolev_norm(psi2, alpha2, box_length)
    return _ratio(num, den)


# ---------------------------------------------------------------------------
# seeded corpora and suite runners


def _box_points(n: int, box_length: float, d: int):
    c = (np.arange(n) + 0.5) * (box_length / n) - box_length / 2.0
    mesh = np.meshgrid(*([c] * d), indexing="ij")
    return mesh


def gaussian_mixture(rng: np.random.Generator, n: int, box_length: float, d: int,
                     components: int = 3) -> np.ndarray:
    """Random mixture of anisotropic Gaussian bumps on a centered box grid."""
    mesh = _box_points(n, box_length, d)
    out = np.zeros(mesh[0].shape)
    for _ in range(components):
        amp = rng.uniform(0.3, 2.0) * rng.choice([-1.0, 1.0])
        center = rng.uniform(-0.2 * box_length, 0.2 * box_length, size=d)
        widths = rng.uniform(0.05 * box_length, 0.2 * box_length, size=d)
        expo = sum(((mesh[i] - center[i]) / widths[i]) ** 2 for i in range(d))
        out = out + amp * np.exp(-0.5 * expo)
    return out


def _corpus(seed: int, size: int, n: int, box_length: float, d: int):
    rng = np.random.default_rng(seed)
    return [gaussian_mixture(rng, n, box_length, d) for _ in range(size)]


def _suite_rows(lemma_id: str, grid_size: int, ratios) -> dict:
    arr = np.array(ratios, dtype=float)
    return {
        "lemma_id": lemma_id,
        "grid_size": grid_size,
        "ratio_max": float(arr.max()),
        "ratio_p95": float(np.quantile(arr, 0.95)),
    }


def run_holder_suite(seed: int, grid_sizes, box_length: float = 8.0, d: int = 3,
                     corpus_size: int = 6) -> list:
    """Pointwise-product ratios at (2,2) <= (3,inf) x (6,2) over the seeded corpus."""
    idx, idx1, idx2 = LorentzIndex(2, 2), LorentzIndex(3, math.inf), LorentzIndex(6, 2)
    rows = []
    for n in grid_sizes:
        fns = _corpus(seed, corpus_size, n, box_length, d)
        cell = (box_length / n) ** d
        ratios = []
        for i in range(len(fns)):
            for j in range(i + 1, len(fns)):
                s1 = SampledFunction(fns[i], np.full(fns[i].size, cell), d)
                s2 = SampledFunction(fns[j], np.full(fns[j].size, cell), d)
                rep = holder_check(s1, s2, idx, idx1, idx2)
                if not rep.degenerate:
                    ratios.append(rep.ratio)
        rows.append(_suite_rows("holder_2_3inf_62", n, ratios))
    return rows


def run_young_suite(seed: int, grid_sizes, box_length: float = 8.0, d: int = 3,
                    corpus_size: int = 4) -> list:
    """Convolution ratios at (3,1) <= (3/2,1) x (3/2,inf) over the seeded corpus."""
    idx, idx1, idx2 = LorentzIndex(3, 1), LorentzIndex(1.5, 1), LorentzIndex(1.5, math.inf)
    rows = []
    for n in grid_sizes:
        fns = _corpus(seed, corpus_size, n, box_length, d)
        h = box_length / n
        ratios = []
        for i in range(len(fns)):
            for j in range(i + 1, len(fns)):
                rep = young_check(fns[i], fns[j], h, idx, idx1, idx2)
                if not rep.degenerate:
                    ratios.append(rep.ratio)
        rows.append(_suite_rows("young_31_3/21_3/2inf", n, ratios))
    return rows


def run_embedding_suite(seed: int, grid_sizes, box_length: float = 8.0, d: int = 3,
                        corpus_size: int = 6, p: float = 2.0,
                        q_pairs=((1.0, 2.0), (2.0, math.inf))) -> list:
    """Ratios ||f||_{p,q2} / ||f||_{p,q1} for q1 <= q2 (embedding constants)."""
    rows = []
    for n in grid_sizes:
        fns = _corpus(seed, corpus_size, n, box_length, d)
        cell = (box_length / n) ** d
        for q1, q2 in q_pairs:
            ratios = []
            for f in fns:
                s = SampledFunction(f, np.full(f.size, cell), d)
                den = quasinorm(s, LorentzIndex(p, q1))
                num = quasinorm(s, LorentzIndex(p, q2))
                if den > 0:
                    ratios.append(num / den)
            q2_name = "inf" if math.isinf(q2) else f"{q2:g}"
            rows.append(_suite_rows(f"embed_p{p:g}_q{q1:g}_to_{q2_name}", n, ratios))
    return rows


SOBOLEV_PAIRS = ((0.0, 0.5), (0.0, 1.0), (0.5, 0.5), (0.75, 0.75))


def run_fourier_product_suite(seed: int, grid_sizes, box_length: float = 8.0, d: int = 3,
                              corpus_size: int = 4, pairs=SOBOLEV_PAIRS) -> list:
    """Fourier-product vs Sobolev ratios for the exponent pairs used downstream."""
    rows = []
    for n in grid_sizes:
        fns = _corpus(seed, corpus_size, n, box_length, d)
        for a1, a2 in pairs:
            ratios = []
            for i in range(len(fns)):
                for j in range(len(fns)):
                    if i == j:
                        continue
                    rep = sobolev_fourier_product_ratio(fns[i], fns[j], a1, a2, box_length)
                    if not rep.degenerate:
                        ratios.append(rep.ratio)
            rows.append(_suite_rows(f"fourier_product_a{a1:g}_a{a2:g}", n, ratios))
    return rows


def weak_norm_inverse_k(points_per_axis: int = 64, radius: float = 1.0) -> float:
    """||1/|k|||_{L^{3,inf}} in the weak-prefactor convention on a ball grid."""
    n = points_per_axis
    h = 2.0 * radius / n
    c = (np.arange(n) + 0.5) * h - radius
    X, Y, Z = np.meshgrid(c, c, c, indexing="ij")
    r = np.sqrt(X ** 2 + Y ** 2 + Z ** 2).ravel()
    keep = r <= radius
    r = r[keep]
    f = SampledFunction(1.0 / r, np.full(r.size, h ** 3), 3)
    return quasinorm(f, LorentzIndex(3, math.inf), convention="weak-prefactor")
