"""Shared numerical kernels: Gaussian moments, quadrature, SVD, 1-D solvers.

Closed forms used throughout the package, for G ~ N(0, 1):

    E[((aG + b)₊)²] = (a² + b²)·Φ(b/a) + a·b·φ(b/a)        (a > 0)
    E[ (aG + b)₊  ] = a·φ(b/a) + b·Φ(b/a)                   (a > 0)

where Φ/φ are the standard normal CDF/PDF and (x)₊ = max(x, 0).  These exact
moments keep the saddle-point solvers (bisection over κ, minimization over u)
cheap and quadrature-free in their hot loops; Gauss–Hermite quadrature is kept
for integrands with no closed form (e.g. logistic-type expectations), with
nodes/weights rescaled so that  Σᵢ wᵢ f(xᵢ) ≈ E[f(G)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import ndtr

__all__ = [
    "DomainError",
    "BracketError",
    "SvdTriple",
    "Quadrature",
    "gaussian_cdf",
    "gaussian_pdf",
    "positive_part_moment1",
    "positive_part_moment2",
    "expect_gaussian_1d",
    "softplus",
    "svd_descending",
    "minimize_scalar",
    "bisect_root",
]

_SQRT2PI = math.sqrt(2.0 * math.pi)


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class BracketError(ValueError):
    """A root bracket [lo, hi] does not enclose a sign change."""


def gaussian_cdf(x):
    """Standard normal CDF Φ(x); accepts scalars or arrays."""
    out = ndtr(x)
    return float(out) if np.ndim(x) == 0 else out


def gaussian_pdf(x):
    """Standard normal density φ(x); accepts scalars or arrays."""
    out = np.exp(-0.5 * np.square(x)) / _SQRT2PI
    return float(out) if np.ndim(x) == 0 else out


def positive_part_moment1(a: float, b: float) -> float:
    """E[(aG + b)₊] for G ~ N(0,1), via  a·φ(b/a) + b·Φ(b/a).

    Requires a > 0 (the Gaussian scale); raises DomainError otherwise.
    """
    if not a > 0.0:
        raise DomainError(f"Gaussian scale must be positive, got a={a!r}")
    r = b / a
    return a * gaussian_pdf(r) + b * gaussian_cdf(r)


def positive_part_moment2(a: float, b: float) -> float:
    """E[((aG + b)₊)²] for G ~ N(0,1), via  (a²+b²)·Φ(b/a) + a·b·φ(b/a).

    Requires a > 0; raises DomainError otherwise.
    """
    if not a > 0.0:
        raise DomainError(f"Gaussian scale must be positive, got a={a!r}")
    r = b / a
    return (a * a + b * b) * gaussian_cdf(r) + a * b * gaussian_pdf(r)


def softplus(x):
    """Numerically stable log(1 + eˣ), linear branch for x > 30."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Quadrature:
    """Nodes/weights for E[f(G)], G ~ N(0,1):  E[f(G)] ≈ Σᵢ wᵢ f(xᵢ).

    Built from the Gauss–Hermite rule by x = √2·t, w = ω/√π, so the weights
    sum to one and polynomials of degree ≤ 2·order − 1 integrate exactly.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self) -> None:
        if self.order < 1:
            raise DomainError(f"quadrature order must be >= 1, got {self.order}")
        if self.nodes.shape != (self.order,) or self.weights.shape != (self.order,):
            raise DomainError("nodes/weights must both have length `order`")
        if not np.all(self.weights > 0.0):
            raise DomainError("quadrature weights must be strictly positive")

    @classmethod
    def gauss_hermite(cls, order: int = 80) -> "Quadrature":
        t, w = hermgauss(order)
        return cls(nodes=t * math.sqrt(2.0), weights=w / math.sqrt(math.pi), order=order)


def expect_gaussian_1d(f: Callable, quad: Quadrature) -> float:
    """Σᵢ wᵢ f(xᵢ) — approximates E[f(G)] under the supplied rule.

    `f` may be vectorized (preferred) or scalar-only; both are supported.
    """
    try:
        vals = np.asarray(f(quad.nodes), dtype=float)
        if vals.shape != quad.nodes.shape:
            raise ValueError
    except Exception:
        vals = np.array([float(f(x)) for x in quad.nodes])
    return float(np.dot(quad.weights, vals))


@dataclass(frozen=True)
class SvdTriple:
    """SVD  W = U·diag(s)·Vᵀ  with s nonincreasing and a fixed sign gauge.

    The gauge: each right singular vector's first nonzero coordinate is
    positive (the matching left vector is flipped along with it), which makes
    the decomposition deterministic across LAPACK builds.
    """

    singular_values: np.ndarray
    left_vectors: np.ndarray  # columns u_j
    right_vectors: np.ndarray  # columns v_j

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def svd_descending(w: np.ndarray) -> SvdTriple:
    """Deterministic SVD of a square matrix (see SvdTriple for the gauge).

    Raises DomainError for non-square or non-finite input, and checks the
    reconstruction to 1e-10 relative Frobenius error.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise DomainError("matrix contains non-finite entries")
    u, s, vt = np.linalg.svd(w)
    v = vt.T
    for j in range(v.shape[1]):
        col = v[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0.0:
            v[:, j] = -col
            u[:, j] = -u[:, j]
    triple = SvdTriple(singular_values=s, left_vectors=u, right_vectors=v)
    scale = max(float(np.linalg.norm(w)), 1e-300)
    if float(np.linalg.norm(triple.reconstruct() - w)) / scale > 1e-10:
        raise DomainError("SVD reconstruction failed the 1e-10 relative check")
    return triple


def _golden_section(f: Callable[[float], float], a: float, b: float, tol: float):
    """Golden-section search on [a, b]; ties shrink toward the left end."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc <= fd:  # `<=` biases plateaus toward smaller arguments
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    cands = [(a, f(a)), (c, fc), (d, fd), (b, f(b))]
    cands.sort(key=lambda p: (p[1], p[0]))
    return cands[0]


def minimize_scalar(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-8,
    *,
    grid_points: int = 512,
    log_spacing: bool = False,
    value_tie_tol: float = 0.0,
):
    """Global-ish 1-D minimization: coarse grid, then golden-section refinement.

    Returns (argmin, min_value).  Grid values that tie within `value_tie_tol`
    resolve to the smallest argument (the "smallest minimizer" convention);
    the refinement inherits the same left bias on plateaus.  With
    `log_spacing=True` the grid is geometric (requires lo > 0).
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got lo={lo!r}, hi={hi!r}")
    if log_spacing:
        if not lo > 0.0:
            raise DomainError("log spacing requires lo > 0")
        xs = np.geomspace(lo, hi, grid_points)
    else:
        xs = np.linspace(lo, hi, grid_points)
    vals = np.array([float(f(x)) for x in xs])
    if not np.all(np.isfinite(vals)):
        raise DomainError("objective returned non-finite values on the grid")
    vmin = float(vals.min())
    idx = int(np.flatnonzero(vals <= vmin + value_tie_tol)[0])
    a = float(xs[max(idx - 1, 0)])
    b = float(xs[min(idx + 1, len(xs) - 1)])
    if a == b:
        return a, float(f(a))
    x_best, f_best = _golden_section(f, a, b, tol)
    # never let refinement lose to the grid winner
    if vals[idx] < f_best or (vals[idx] == f_best and xs[idx] < x_best):
        return float(xs[idx]), float(vals[idx])
    return float(x_best), float(f_best)


def bisect_root(
    g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12
) -> float:
    """Bisection for g(x) = 0 on [lo, hi]; requires g(lo)·g(hi) ≤ 0.

    Deterministic and monotonicity-friendly; returns the interval midpoint
    once the bracket width drops below `tol`.
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got lo={lo!r}, hi={hi!r}")
    glo, ghi = float(g(lo)), float(g(hi))
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0.0:
        raise BracketError(
            f"no sign change on [{lo!r}, {hi!r}]: g(lo)={glo!r}, g(hi)={ghi!r}"
        )
    while (hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        gm = float(g(mid))
        if gm == 0.0:
            return mid
        if glo * gm < 0.0:
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
    return 0.5 * (lo + hi)
