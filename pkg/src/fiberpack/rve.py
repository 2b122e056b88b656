"""Variance-decay fitting over window volumes and realization-count planning.

The variance of a characteristic Z over realizations at volume V is
modeled as D^2(V) = K V^(-alpha); log-log least squares recovers (K,
alpha).  The number of realizations needed at a volume for a relative
precision phi comes in two variants: the linear form 4 K / (phi Zbar
V^alpha) and the standard squared form 4 K / (phi^2 Zbar^2 V^alpha).
Which one reproduces published realization tables is decided empirically
by the acceptance suite and recorded in the emitted metadata.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class VarianceSample:
    V: float
    D2: float
    n_real: int
    Z_bar: float

    def __post_init__(self):
        if self.n_real < 2:
            raise ValueError("need at least two realizations per volume")
        if self.D2 < 0 or self.V <= 0:
            raise ValueError("V must be positive and D2 nonnegative")


@dataclass
class RveFit:
    K: float
    alpha: float
    residual: float


def fit_variance_model(samples: list[VarianceSample]) -> RveFit:
    """Least squares on log D2 = log K - alpha log V."""
    usable = [s for s in samples if s.D2 > 0]
    dropped = len(samples) - len(usable)
    if dropped:
        warnings.warn(f"excluded {dropped} zero-variance sample(s) from the fit")
    if len({s.V for s in usable}) < 3:
        raise ValueError("need samples at >= 3 distinct volumes")
    logv = np.array([math.log(s.V) for s in usable])
    logd = np.array([math.log(s.D2) for s in usable])
    A = np.column_stack([np.ones_like(logv), -logv])
    coef, res, _, _ = np.linalg.lstsq(A, logd, rcond=None)
    logk, alpha = coef
    residual = float(res[0]) if res.size else 0.0
    return RveFit(K=float(np.exp(logk)), alpha=float(alpha), residual=residual)


def n_rve(Z_bar: float, fit: RveFit, V: float, phi: float,
          variant: str = "linear") -> int:
    """Required realization count at volume V for relative precision phi.

    variant="linear":  ceil( 4 K / (phi   Zbar   V^alpha) )
    variant="kanit":   ceil( 4 K / (phi^2 Zbar^2 V^alpha) )
    """
    if phi <= 0 or Z_bar <= 0:
        raise ValueError("phi and Z_bar must be positive")
    va = V ** fit.alpha
    if variant == "linear":
        raw = 4.0 * fit.K / (phi * Z_bar * va)
    elif variant == "kanit":
        raw = 4.0 * fit.K / (phi * phi * Z_bar * Z_bar * va)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return max(1, int(math.ceil(raw)))


def implied_z_bar(fit: RveFit, V: float, phi: float, n: float,
                  variant: str = "kanit") -> float:
    """Invert n_rve for the mean that yields a given raw count (diagnostics)."""
    va = V ** fit.alpha
    if variant == "linear":
        return 4.0 * fit.K / (phi * va * n)
    if variant == "kanit":
        return math.sqrt(4.0 * fit.K / (phi * phi * va * n))
    raise ValueError(f"unknown variant {variant!r}")


def _fit_for_study(samples: list[VarianceSample]) -> RveFit:
    """Least squares when possible; the exact two-point solve otherwise."""
    usable = [s for s in samples if s.D2 > 0]
    vols = sorted({s.V for s in usable})
    if len(vols) >= 3:
        return fit_variance_model(samples)
    if len(vols) == 2:
        a, b = usable[0], usable[-1]
        alpha = math.log(a.D2 / b.D2) / math.log(b.V / a.V)
        return RveFit(K=a.D2 * a.V ** alpha, alpha=alpha, residual=0.0)
    raise ValueError("need at least two distinct volumes with nonzero variance")


def rve_study(sizes, n_real: int, runner, characteristics=("lambda_cF", "lambda_clF"),
              phi: float = 0.01, variant: str = "linear"):
    """Drive realizations across window sizes and tabulate RVE numbers.

    ``runner(size, realization_index)`` must return a mapping with one
    value per characteristic.  Returns (samples, fits, table) where table
    rows are (size, characteristic, n_RVE).
    """
    values: dict[str, dict[float, list[float]]] = {c: {} for c in characteristics}
    for size in sizes:
        for k in range(n_real):
            try:
                res = runner(size, k)
            except Exception as exc:
                raise RuntimeError(f"realization failed (size={size}, index={k})") from exc
            for c in characteristics:
                values[c].setdefault(size, []).append(float(res[c]))

    samples: dict[str, list[VarianceSample]] = {}
    fits: dict[str, RveFit] = {}
    table = []
    for c in characteristics:
        per = []
        for size, vals in values[c].items():
            arr = np.asarray(vals)
            per.append(VarianceSample(V=float(size) ** 3,
                                      D2=float(arr.var(ddof=1)),
                                      n_real=len(vals),
                                      Z_bar=float(arr.mean())))
        samples[c] = per
        try:
            fits[c] = _fit_for_study(per)
        except ValueError as exc:
            warnings.warn(f"characteristic {c!r} not fittable ({exc}); skipped")
            continue
        for s in per:
            size = round(s.V ** (1.0 / 3.0))
            if s.Z_bar <= 0:
                continue
            table.append((size, c, n_rve(s.Z_bar, fits[c], s.V, phi, variant)))
    return samples, fits, table
