from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

QUADRATURE_POINTS = 32


def bump(r: np.ndarray) -> np.ndarray:
    """exp(-1/(1-r^2)) on |r| < 1, zero elsewhere."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def bump_derivative(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    ri = r[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ri**2)) * (-2.0 * ri / (1.0 - ri**2) ** 2)
    return out


@lru_cache(maxsize=1)
def bump_mass() -> float:
    value, _ = integrate.quad(lambda y: float(bump(np.array(y))), -1.0, 1.0, epsabs=1e-15, epsrel=1e-13)
    return float(value)


def bump_density(y: np.ndarray) -> np.ndarray:
    return bump(y) / bump_mass()


def bump_cdf(u: float) -> float:
    if u <= -1.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    value, _ = integrate.quad(lambda y: float(bump(np.array(y))), -1.0, u, epsabs=1e-15, epsrel=1e-13)
    return float(value) / bump_mass()


def bump_first_moment(u: float) -> float:
    """Integral of y * density over (-1, u)."""
    if u <= -1.0 or u >= 1.0:
        return 0.0
    value, _ = integrate.quad(lambda y: y * float(bump(np.array(y))), -1.0, u, epsabs=1e-15, epsrel=1e-13)
    return float(value) / bump_mass()


@lru_cache(maxsize=4)
def spatial_kernel(dim: int, points_per_axis: int = QUADRATURE_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint-rule offsets in the unit ball and bump weights normalized to unit mass."""
    centers = -1.0 + (2.0 * np.arange(points_per_axis) + 1.0) / points_per_axis
    offsets = np.array(list(itertools.product(centers, repeat=dim)), dtype=float)
    weights = bump(np.linalg.norm(offsets, axis=1))
    keep = weights > 0.0
    offsets, weights = offsets[keep], weights[keep]
    weights = weights / weights.sum()
    offsets.setflags(write=False)
    weights.setflags(write=False)
    return offsets, weights


def mollify(
    f: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    eps: float,
    chunk: int = 4096,
) -> np.ndarray:
    """(f * rho_eps)(x) with the discrete kernel of spatial_kernel."""
    pts = np.asarray(points, dtype=float)
    offsets, weights = spatial_kernel(pts.shape[1])
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        shifted = block[:, None, :] - eps * offsets[None, :, :]
        values = np.asarray(f(shifted.reshape(-1, pts.shape[1])), dtype=float).reshape(block.shape[0], -1)
        out[start : start + chunk] = values @ weights
    return out


def mollified_kink(x: np.ndarray, center: float, eps: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """|x - center| convolved with the unit-mass bump of radius eps.

    Returns value, first and second derivative, all in closed form up to the
    bump's cumulative integrals.
    """
    x = np.asarray(x, dtype=float)
    u = (x - center) / eps
    cdf = np.array([bump_cdf(float(v)) for v in u.ravel()]).reshape(u.shape)
    moment = np.array([bump_first_moment(float(v)) for v in u.ravel()]).reshape(u.shape)
    value = eps * (u * (2.0 * cdf - 1.0) - 2.0 * moment)
    first = 2.0 * cdf - 1.0
    second = 2.0 * bump_density(u) / eps
    return value, first, second


def mollified_time_kink(t: np.ndarray, center: float, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """sqrt|t - center| averaged backwards over a window of length eps^2.

    The time kernel is the bump rescaled to (0, 1). Returns value and time
    derivative; the derivative goes through the kernel so the square-root
    singularity is integrated, never differentiated.
    """
    scale = eps**2
    mass = bump_mass() / 2.0

    def kernel(tau: float) -> float:
        return float(bump(np.array(2.0 * tau - 1.0))) / mass

    def kernel_derivative(tau: float) -> float:
        return 2.0 * float(bump_derivative(np.array(2.0 * tau - 1.0))) / mass

    def h(s: float) -> float:
        return float(np.sqrt(abs(s - center)))

    values, derivatives = [], []
    for tv in np.atleast_1d(np.asarray(t, dtype=float)):
        brk = [(tv - center) / scale] if 0.0 < (tv - center) / scale < 1.0 else None
        val, _ = integrate.quad(lambda tau: h(tv - scale * tau) * kernel(tau), 0.0, 1.0, points=brk, limit=200)
        der, _ = integrate.quad(
            lambda tau: h(tv - scale * tau) * kernel_derivative(tau), 0.0, 1.0, points=brk, limit=200
        )
        values.append(val)
        derivatives.append(der / scale)
    return np.asarray(values), np.asarray(derivatives)
