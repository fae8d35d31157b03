"""Log-log power-law fits with error bars."""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy import stats

__all__ = ["RateFit", "rate_fit"]


@dataclass
class RateFit:
    abscissae: list
    errors: list
    stderrs: list
    slope: float
    intercept: float
    halfwidth: float

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self):
        return list(zip(self.abscissae, self.errors, self.stderrs))


def rate_fit(points, confidence: float = 0.95) -> RateFit:
    """Fit ``log(error) = intercept + slope * log(abscissa)``.

    ``points`` is a sequence of ``(abscissa, error, stderr)``. Each point is
    weighted by the inverse variance of ``log(error)`` (delta method,
    ``stderr / error``); if every stderr is zero the fit is unweighted. The
    half-width is the ``confidence`` t-interval of the slope.
    """
    pts = [tuple(float(v) for v in p) for p in points]
    if len(pts) < 3:
        raise ValueError(f"rate_fit needs at least 3 points, got {len(pts)}")
    n, e, s = (np.array(c) for c in zip(*pts))
    if np.any(n <= 0):
        raise ValueError("abscissae must be positive")
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise ValueError(f"errors must be positive and finite, got {e.tolist()}")
    if np.any(s < 0):
        raise ValueError("standard errors must be nonnegative")

    lx, ly = np.log(n), np.log(e)
    rel = s / e
    if np.all(rel == 0):
        w = np.ones_like(lx)
    else:
        # floor keeps one exact point from taking all the weight
        rel = np.maximum(rel, 1e-3 * np.max(rel))
        w = 1.0 / rel**2
    X = np.column_stack([np.ones_like(lx), lx])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], ly * sw, rcond=None)
    resid = ly - X @ coef
    dof = len(lx) - 2
    if dof > 0:
        sigma2 = float(np.sum(w * resid**2) / dof)
        cov = sigma2 * np.linalg.inv((X * w[:, None]).T @ X)
        half = float(stats.t.ppf(0.5 + confidence / 2, dof) * np.sqrt(max(cov[1, 1], 0.0)))
    else:
        half = float("inf")
    return RateFit(
        abscissae=n.tolist(),
        errors=e.tolist(),
        stderrs=s.tolist(),
        slope=float(coef[1]),
        intercept=float(coef[0]),
        halfwidth=half,
    )
