"""Closed-form heat equation solutions and Feynman-Kac Monte Carlo.

All solutions solve ``du/dt + (kappa^2 / 2) Laplacian(u) = 0`` on
``(0, T) x R^d`` and therefore satisfy ``u(t, x) = E[u(T, x + kappa W_{T-t})]``.
Only the single-time marginal ``W_s ~ N(0, s I)`` is ever simulated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import integrate, stats

from .rates import RateFit, rate_fit
from .rng import PURPOSE_BROWNIAN, PURPOSE_SWEEP, RngKey, gaussians

__all__ = [
    "ExactSolution",
    "exact_eval",
    "brownian_increment",
    "brownian_increments",
    "fk_estimate",
    "pde_residual",
    "McRateReport",
    "mc_rate_check",
]

KINDS = ("quadratic", "exponential", "gaussian_kernel")


def _sqnorm(x):
    # einsum avoids numpy's slow reduction over a short trailing axis
    return np.einsum("...i,...i->...", x, x)


@dataclass(frozen=True)
class ExactSolution:
    kind: str
    d: int
    T: float = 1.0
    kappa: float = 1.0
    direction: tuple = ()
    variance: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown solution kind {self.kind!r}; expected one of {KINDS}")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if not self.kappa > 0:
            raise ValueError("diffusivity kappa must be positive")
        if self.kind == "exponential":
            a = tuple(float(v) for v in self.direction) or (0.0,) * self.d
            if len(a) != self.d:
                raise ValueError(f"direction has length {len(a)}, expected {self.d}")
            object.__setattr__(self, "direction", a)
        if self.kind == "gaussian_kernel" and not self.variance > 0:
            raise ValueError("gaussian_kernel needs variance > 0")

    @property
    def growth_exponent(self) -> float:
        """Polynomial growth exponent q (inf for the exponential family)."""
        return {"quadratic": 2.0, "exponential": math.inf, "gaussian_kernel": 0.0}[self.kind]

    @classmethod
    def from_dict(cls, doc: dict) -> "ExactSolution":
        allowed = {"kind", "d", "T", "kappa", "direction", "variance"}
        unknown = set(doc) - allowed
        if unknown:
            raise ValueError(f"unknown solution keys {sorted(unknown)}")
        if "kind" not in doc or "d" not in doc:
            raise ValueError("solution needs 'kind' and 'd'")
        kw = dict(doc)
        if "direction" in kw:
            kw["direction"] = tuple(kw["direction"])
        return cls(**kw)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["direction"] = list(self.direction)
        return doc

    def _prep(self, t, x):
        # for d = 1 a trailing coordinate axis may be omitted
        t = np.asarray(t, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.d:
            raise ValueError(f"points have {x.shape[-1]} coordinates, solution has d={self.d}")
        return t, x

    def __call__(self, t, x):
        t, x = self._prep(t, x)
        s = self.T - t
        k2 = self.kappa**2
        if self.kind == "quadratic":
            return _sqnorm(x) + k2 * self.d * s
        if self.kind == "exponential":
            a = np.array(self.direction)
            return np.exp(x @ a + 0.5 * k2 * float(a @ a) * s)
        v = self.variance + k2 * s
        return (2 * np.pi * v) ** (-self.d / 2) * np.exp(-_sqnorm(x) / (2 * v))

    def terminal(self, x):
        """``u(T, x)``; broadcasts over leading axes of ``x``."""
        return self(self.T, x)

    def conditional_variance(self, t, x):
        """``Var[u(T, x + kappa W_{T-t})]``, the noise of one Monte Carlo target."""
        t, x = self._prep(t, x)
        s = self.T - t
        k2 = self.kappa**2
        if self.kind == "quadratic":
            return np.sum(4 * x * x * k2 * s[..., None] + 2 * k2 * k2 * (s**2)[..., None], axis=-1)
        if self.kind == "exponential":
            a = np.array(self.direction)
            aa = float(a @ a)
            ax = x @ a
            return np.exp(2 * ax + 2 * k2 * aa * s) - np.exp(2 * ax + k2 * aa * s)
        sig2 = self.variance
        v = 0.5 * sig2 + k2 * s
        second = (4 * np.pi * sig2) ** (-self.d / 2) * (2 * np.pi * v) ** (-self.d / 2) * np.exp(
            -_sqnorm(x) / (2 * v)
        )
        return second - self(t, x) ** 2


def exact_eval(sol: ExactSolution, t, x):
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > sol.T):
        raise ValueError(f"time outside [0, {sol.T}]")
    return sol(t, x)


def brownian_increments(seed: int, streams, d: int, dt) -> np.ndarray:
    """``sqrt(dt) * Z`` for each stream index; ``dt`` broadcasts over streams."""
    dt = np.asarray(dt, dtype=np.float64)
    if np.any(dt < 0):
        raise ValueError("time increment must be nonnegative")
    z = gaussians(seed, PURPOSE_BROWNIAN, streams, d)
    return np.sqrt(dt)[..., None] * z if dt.ndim else math.sqrt(float(dt)) * z


def brownian_increment(key: RngKey, d: int, dt: float) -> np.ndarray:
    """The value ``W_dt`` of the Brownian motion with index ``key.stream``."""
    return brownian_increments(key.seed, [key.stream], d, dt)[0]


def fk_estimate(sol: ExactSolution, t: float, x, M: int, key: RngKey):
    """Monte Carlo estimate of ``u(t, x)`` from ``M`` terminal evaluations.

    Uses Brownian motions ``key.stream + 1, ..., key.stream + M``. Returns
    ``(mean, standard_error)``.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if not 0 <= t <= sol.T:
        raise ValueError(f"time {t} outside [0, {sol.T}]")
    x = np.asarray(x, dtype=np.float64).reshape(sol.d)
    streams = key.stream + np.arange(1, M + 1, dtype=np.uint64)
    w = brownian_increments(key.seed, streams, sol.d, sol.T - t)
    vals = sol.terminal(x + sol.kappa * w)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(M)) if M > 1 else math.nan
    return mean, se


def pde_residual(sol: ExactSolution, t, x, h: float = 1e-4) -> np.ndarray:
    """Central-difference residual of ``du/dt + (kappa^2/2) Laplacian u``."""
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64).reshape(t.shape[0], sol.d)
    dudt = (sol(t + h, x) - sol(t - h, x)) / (2 * h)
    u0 = sol(t, x)
    lap = np.zeros_like(u0)
    for i in range(sol.d):
        e = np.zeros(sol.d)
        e[i] = h
        lap += (sol(t, x + e) - 2 * u0 + sol(t, x - e)) / h**2
    return dudt + 0.5 * sol.kappa**2 * lap


# --- Monte Carlo error rate -------------------------------------------------

_FUNCTIONALS = {
    "identity": lambda z: z,
    "square": lambda z: z * z,
}


def _central_moment(functional: str, p: float) -> tuple[float, float]:
    """(mean, E|X - EX|^p) of X = f(Z), Z standard normal, by quadrature."""
    f = _FUNCTIONALS[functional]
    pdf = stats.norm.pdf
    mean = integrate.quad(lambda z: f(z) * pdf(z), -np.inf, np.inf, epsabs=1e-13)[0]
    mom = integrate.quad(lambda z: abs(f(z) - mean) ** p * pdf(z), -np.inf, np.inf, epsabs=1e-13, limit=200)[0]
    return mean, mom


@dataclass
class McRateReport:
    p: float
    functional: str
    ns: list
    trials: int
    errors: list
    stderrs: list
    bounds: list
    ratios: list
    fit: RateFit
    exact_ratio: float | None = None
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["fit"] = self.fit.to_dict()
        return doc


def mc_rate_check(p: float, ns, trials: int, key: RngKey, functional: str = "square") -> McRateReport:
    """Empirical L^p error of a plain Monte Carlo mean versus the sample size.

    For each ``n`` the quantity ``(E|mean_n - E X|^p)^(1/p)`` is estimated
    from ``trials`` independent means of ``X = f(Z)``, compared with the
    bound ``2 sqrt((p-1)/n) (E|X - E X|^p)^(1/p)``, and a log-log slope is
    fitted across ``ns``.
    """
    ns = [int(n) for n in ns]
    if p < 2:
        raise ValueError("p must be >= 2")
    if trials < 30:
        raise ValueError("need at least 30 trials")
    if any(n < 2 for n in ns):
        raise ValueError("every sample size must be >= 2")
    if functional not in _FUNCTIONALS:
        raise ValueError(f"unknown functional {functional!r}")
    f = _FUNCTIONALS[functional]
    mean, central = _central_moment(functional, p)
    errs, ses, bounds = [], [], []
    for n in ns:
        sub = key.derive(n)
        absdev = np.empty(trials)
        for r in range(trials):
            streams = np.arange(r * n, (r + 1) * n, dtype=np.uint64)
            z = gaussians(sub.seed, PURPOSE_SWEEP, streams, 1)[:, 0]
            absdev[r] = abs(float(np.mean(f(z))) - mean)
        mp = absdev**p
        m = float(np.mean(mp))
        err = m ** (1 / p)
        # delta method for the p-th root of a sample mean
        se = (1 / p) * m ** (1 / p - 1) * float(np.std(mp, ddof=1)) / math.sqrt(trials)
        errs.append(err)
        ses.append(se)
        bounds.append(2 * math.sqrt((p - 1) / n) * central ** (1 / p))
    ratios = [e / b for e, b in zip(errs, bounds)]
    fit = rate_fit(list(zip(ns, errs, ses)))
    exact = 0.5 if p == 2 else None
    return McRateReport(
        p=float(p),
        functional=functional,
        ns=ns,
        trials=trials,
        errors=errs,
        stderrs=ses,
        bounds=bounds,
        ratios=ratios,
        fit=fit,
        exact_ratio=exact,
        seed=key.seed,
    )
