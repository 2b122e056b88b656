"""Direction distributions on the unit sphere.

Two families drive the fiber model: an axially symmetric one-parameter
density controlling the global fiber direction (parameter beta: beta < 1
concentrates near the z axis, beta = 1 is uniform, beta > 1 is a girdle),
and the von Mises-Fisher law controlling the per-step bending of the
random walk.  Both are sampled by exact inverse-CDF maps, no rejection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import RngState, Vec3

_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class SchladitzParams:
    """Anisotropy parameter beta > 0 of the axial direction density."""

    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class VmfParams:
    """von Mises-Fisher concentration kappa >= 0 around unit direction mu."""

    mu: Vec3
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=np.float64))
        if abs(np.linalg.norm(self.mu) - 1.0) > 1e-9:
            raise ValueError("mu must be a unit vector")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")


@dataclass(frozen=True)
class MvmfParams:
    """Two-pole combination: global pull (mu1, kappa1) + previous step (mu2, kappa2)."""

    mu1: Vec3
    kappa1: float
    mu2: Vec3
    kappa2: float

    def __post_init__(self):
        object.__setattr__(self, "mu1", np.asarray(self.mu1, dtype=np.float64))
        object.__setattr__(self, "mu2", np.asarray(self.mu2, dtype=np.float64))
        for m in (self.mu1, self.mu2):
            if abs(np.linalg.norm(m) - 1.0) > 1e-9:
                raise ValueError("directions must be unit vectors")
        if not (self.kappa1 > 0 and self.kappa2 > 0):
            raise ValueError("kappas must be > 0")


def schladitz_density(theta: float, phi: float, p: SchladitzParams) -> float:
    """Density in polar coordinates (theta, phi) of the axial direction law.

    p(theta, phi) = beta sin(theta) / (4 pi (1 + (beta^2 - 1) cos^2 theta)^(3/2))
    """
    if not (0.0 <= theta < np.pi):
        raise ValueError(f"theta out of [0, pi): {theta}")
    if not (0.0 <= phi < 2.0 * np.pi):
        raise ValueError(f"phi out of [0, 2 pi): {phi}")
    b = p.beta
    c = np.cos(theta)
    return b * np.sin(theta) / (4.0 * np.pi * (1.0 + (b * b - 1.0) * c * c) ** 1.5)


def schladitz_cos_cdf(u, beta: float):
    """CDF of cos(theta) under the axial law: F(u) = (1 + beta u / sqrt(1 + (beta^2-1) u^2)) / 2."""
    u = np.asarray(u, dtype=np.float64)
    return 0.5 * (1.0 + beta * u / np.sqrt(1.0 + (beta * beta - 1.0) * u * u))


def schladitz_cos_from_uniform(w, beta: float):
    """Inverse-CDF map: w uniform on [-1, 1] -> cos(theta) = w / sqrt(beta^2 + (1-beta^2) w^2)."""
    w = np.asarray(w, dtype=np.float64)
    return w / np.sqrt(beta * beta + (1.0 - beta * beta) * w * w)


def sample_schladitz(p: SchladitzParams, rng: RngState, n: int | None = None):
    """Draw unit directions from the axial law; (3,) for n=None else (n, 3)."""
    gen = rng.generator
    m = 1 if n is None else n
    w = gen.uniform(-1.0, 1.0, size=m)
    u = schladitz_cos_from_uniform(w, p.beta)
    phi = gen.uniform(0.0, 2.0 * np.pi, size=m)
    s = np.sqrt(np.maximum(0.0, 1.0 - u * u))
    out = np.column_stack((s * np.cos(phi), s * np.sin(phi), u))
    return out[0] if n is None else out


def _tangent_frame(mu: Vec3) -> tuple[Vec3, Vec3]:
    """Orthonormal pair spanning the plane perpendicular to mu.

    Uses a fixed alternative axis near the poles to stay well conditioned.
    """
    ref = _Z if abs(mu[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(mu, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(mu, e1)
    return e1, e2


def sample_vmf(p: VmfParams, rng: RngState, n: int | None = None):
    """Draw unit directions from the von Mises-Fisher law around p.mu.

    Cosine component by the exact inverse CDF
    w = 1 + log(xi + (1 - xi) exp(-2 kappa)) / kappa, uniform azimuth in the
    tangent frame.  kappa below 1e-6 falls back to the uniform sphere.
    """
    gen = rng.generator
    m = 1 if n is None else n
    if p.kappa < 1e-6:
        w = gen.uniform(-1.0, 1.0, size=m)
        mu = _Z
    else:
        xi = gen.uniform(0.0, 1.0, size=m)
        k = p.kappa
        w = 1.0 + np.log(xi + (1.0 - xi) * np.exp(-2.0 * k)) / k
        w = np.clip(w, -1.0, 1.0)
        mu = p.mu
    phi = gen.uniform(0.0, 2.0 * np.pi, size=m)
    s = np.sqrt(np.maximum(0.0, 1.0 - w * w))
    e1, e2 = _tangent_frame(mu)
    out = (
        np.outer(w, mu)
        + np.outer(s * np.cos(phi), e1)
        + np.outer(s * np.sin(phi), e2)
    )
    out /= np.linalg.norm(out, axis=1)[:, None]
    return out[0] if n is None else out


def combine_mvmf(p: MvmfParams) -> VmfParams:
    """Collapse the two-pole parameters to a single vMF law.

    kappa = |kappa1 mu1 + kappa2 mu2|, mu = that vector normalized.  When
    the poles cancel (kappa ~ 0) the law degenerates to the uniform sphere.
    """
    v = p.kappa1 * p.mu1 + p.kappa2 * p.mu2
    kappa = float(np.linalg.norm(v))
    if kappa < 1e-12:
        return VmfParams(mu=_Z, kappa=0.0)
    return VmfParams(mu=v / kappa, kappa=kappa)
