"""Self-similar post-processing: rescaling, modulation rate, collapse fit.

The physical trajectory (x, lam(x)) is converted to the slow variable
through ds/dx = lam**-4; profiles are rescaled by U(Y) = lam**-2 u(lam Y);
the modulation rate b = -2 lam_x lam**3 is extracted with a smoothed local
slope; and the wall-shear collapse law lam ~ C (x* - x)**p is fitted by
nonlinear least squares in log-log form, with the exponent left free.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, FitFailureError, InconsistentLambdaError
from .gridfields import Field, Grid, interpolate


@dataclass(frozen=True)
class ModulationState:
    x: float
    s: float
    lam: float
    b: float
    btilde: float


def standard_rescaled_grid(s: float, n: int = 641, span_factor: float = 8.0) -> Grid:
    """Wall-clustered grid on [0, span_factor * s**(2/7)]."""
    return Grid.tanh_clustered(n, span_factor * s ** (2.0 / 7.0), strength=4.0)


def rescale_profile(u: Field, lam: float, rescaled_grid: Grid,
                    slope_rtol: float = 1e-2) -> Field:
    """U(Y) = lam**-2 u(lam Y) on the given rescaled grid.

    The wall slope of u is re-fitted and used as the actual scaling factor,
    which pins U_Y(0) = 1 to fit accuracy; if it disagrees with the claimed
    lam by more than ``slope_rtol`` the profile is rejected.
    """
    if lam <= 0.0:
        raise DomainError("lam must be positive")
    Y = rescaled_grid.nodes
    fit_zone = (Y > 0) & (Y <= 0.35)
    if np.count_nonzero(fit_zone) < 8:
        fit_zone = np.zeros_like(Y, dtype=bool)
        fit_zone[1:12] = True
    cols = np.stack([Y[fit_zone] ** p for p in (1, 2, 3, 4)], axis=1)
    norms = np.linalg.norm(cols, axis=0)
    cols /= norms

    lam_use = lam
    vals = None
    for _ in range(4):
        vals = interpolate(u, lam_use * Y) / lam_use**2
        sol, *_ = np.linalg.lstsq(cols, vals[fit_zone], rcond=None)
        c1 = float(sol[0] / norms[0])
        if abs(c1 - 1.0) < 1e-9:
            break
        lam_use *= c1
    if abs(lam_use / lam - 1.0) > slope_rtol:
        raise InconsistentLambdaError(
            f"claimed shear {lam:.6g} vs wall-normalized {lam_use:.6g}"
        )
    return Field(rescaled_grid, vals)


def accumulate_s(x: np.ndarray, lam: np.ndarray, s0: float) -> np.ndarray:
    """Slow variable s(x) = s0 + int lam**-4 dx (trapezoid)."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0) or np.any(np.diff(x) < 0.0):
        raise DomainError("need positive shear and non-decreasing x")
    integrand = lam**-4.0
    out = np.empty_like(x)
    out[0] = s0
    np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(x), out=out[1:])
    out[1:] += s0
    return out


def _local_slope(x: np.ndarray, f: np.ndarray, window: int = 5) -> np.ndarray:
    """Least-squares slope of f(x) over a centered window per sample."""
    n = len(x)
    half = window // 2
    out = np.empty(n)
    for i in range(n):
        lo = max(0, min(i - half, n - window))
        sl = slice(lo, lo + window)
        xs = x[sl] - x[i]
        fs = f[sl]
        den = np.sum(xs * xs) - np.sum(xs) ** 2 / window
        out[i] = (np.sum(xs * fs) - np.sum(xs) * np.sum(fs) / window) / den
    return out


def compute_b(x: np.ndarray, lam: np.ndarray, window: int = 7) -> np.ndarray:
    """Modulation rate b = -2 lam_x lam**3 with a robust local slope.

    The slope is the median of pairwise slopes over a centered window
    (Theil-Sen), which keeps single-sample glitches in the shear estimate
    out of the differentiated rate.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    n = len(x)
    if n < window:
        raise DomainError(f"need at least {window} samples")
    half = window // 2
    lam_x = np.empty(n)
    for i in range(n):
        lo = max(0, min(i - half, n - window))
        xs = x[lo : lo + window]
        fs = lam[lo : lo + window]
        dx = xs[:, None] - xs[None, :]
        df = fs[:, None] - fs[None, :]
        iu = np.triu_indices(window, 1)
        lam_x[i] = float(np.median(df[iu] / dx[iu]))
    return -2.0 * lam_x * lam**3


def evolve_btilde(s: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Regularized rate: solution of btilde' + b btilde = 0, btilde(s0) = 1/s0.

    Integrated exactly as (1/s0) exp(-int b ds); positive and decreasing
    whenever b > 0, with the same asymptotics as b but time oscillations
    removed.
    """
    s = np.asarray(s, dtype=float)
    b = np.asarray(b, dtype=float)
    acc = np.concatenate([[0.0], np.cumsum(0.5 * (b[1:] + b[:-1]) * np.diff(s))])
    return np.exp(-acc) / s[0]


def fit_singularity(x: np.ndarray, lam: np.ndarray) -> dict:
    """Fit log lam = log C + p log(x* - x) over (x*, C, p).

    Needs a tail spanning at least a decade in lam; returns the fitted
    parameters and the rms log-residual.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if len(x) < 30:
        raise DomainError("need at least 30 samples in the fit window")
    if lam[0] / lam[-1] < 8.0:
        raise DomainError("fit window must span most of a decade in lam")
    x_end = x[-1]
    # collapse-law initializer: x* from matching two samples with p = 1/2
    r = (lam[0] / lam[-1]) ** 2
    x_star0 = max((r * x_end - x[0]) / (r - 1.0), x_end + 1e-12)
    log_lam = np.log(lam)

    def residual(theta):
        dx_star, log_c, p = theta
        return log_c + p * np.log(np.exp(dx_star) + x_end - x) - log_lam

    theta0 = np.array([np.log(max(x_star0 - x_end, 1e-14)),
                       float(log_lam[-1] - 0.5 * np.log(x_star0 - x_end)), 0.5])
    res = least_squares(residual, theta0, method="lm", max_nfev=2000)
    if not res.success:
        raise FitFailureError(f"collapse fit did not converge: {res.message}")
    dx_star, log_c, p = res.x
    rms = float(np.sqrt(np.mean(res.fun**2)))
    return {
        "x_star": float(x_end + np.exp(dx_star)),
        "C": float(np.exp(log_c)),
        "exponent": float(p),
        "residual": rms,
        "window": [float(x[0]), float(x_end)],
        "n_samples": int(len(x)),
    }


def fit_window(x: np.ndarray, lam: np.ndarray, lambda_stop: float,
               decades: float = 1.05, skip_last: int = 10) -> slice:
    """Spec'd fit window: last decade of lam above 3*lambda_stop, minus the
    final ``skip_last`` samples (stop-criterion contamination)."""
    lam = np.asarray(lam, dtype=float)
    valid = np.nonzero(lam > 3.0 * lambda_stop)[0]
    if len(valid) == 0:
        raise DomainError("no samples above 3 * lambda_stop")
    end = valid[-1] - skip_last
    if end <= 0:
        raise DomainError("window empty after discarding final samples")
    lam_hi = lam[end] * 10.0**decades
    start = int(np.nonzero(lam[: end + 1] <= lam_hi)[0][0]) if lam[0] > lam_hi else 0
    return slice(start, end + 1)


def rate_inequality_certificate(s: np.ndarray, b: np.ndarray, gamma: float,
                        eta: float = 0.0) -> dict:
    """Pointwise audit of the modulation-rate inequality.

    With J = int s**gamma (b_s + b**2)**2 ds and eps the measured envelope
    half-width of b*s around 1, checks for every sample

      |b - 1/s| <= (1+eps)/(1-eps) |1/s0 - b(s0)| s0**2/s**2
                   + (1+eps)/((1-eps)**2 sqrt(5-gamma)) s**((1-gamma)/2) J**0.5.

    Report-only; gamma must lie in (0, 5).
    """
    if not 0.0 < gamma < 5.0:
        raise DomainError("gamma must lie in (0, 5)")
    s = np.asarray(s, dtype=float)
    b = np.asarray(b, dtype=float)
    bs_prod = b * s
    eps = float(np.max(np.abs(bs_prod - 1.0)))
    env_ok = eps < 1.0
    b_s = _local_slope(s, b)
    defect = (b_s + b * b) ** 2
    J = float(np.trapezoid(s**gamma * defect, s))
    if env_ok:
        s0 = s[0]
        head = (1.0 + eps) / (1.0 - eps) * abs(1.0 / s0 - b[0]) * s0**2 / s**2
        tail = ((1.0 + eps) / (1.0 - eps) ** 2 / np.sqrt(5.0 - gamma)
                * s ** ((1.0 - gamma) / 2.0) * np.sqrt(J))
        rhs = head + tail
        lhs = np.abs(b - 1.0 / s)
        violations = int(np.sum(lhs > rhs * (1.0 + 1e-9) + 1e-15))
        worst = float(np.max(lhs - rhs))
    else:
        violations, worst = -1, np.nan
    out = {
        "gamma": gamma,
        "epsilon": eps,
        "envelope_ok": env_ok,
        "J": J,
        "violations": violations,
        "worst_margin": worst,
        "holds": env_ok and violations == 0,
    }
    if eta > 0.0:
        out["J_weighted_eta"] = float(np.trapezoid(s ** (3.0 + 2.0 * eta) * defect, s))
    return out


def modulation_states(x: np.ndarray, lam: np.ndarray, s0: float,
                      window: int = 5) -> list[ModulationState]:
    s = accumulate_s(x, lam, s0)
    b = compute_b(x, lam, window)
    bt = evolve_btilde(s, b)
    return [ModulationState(float(xi), float(si), float(li), float(bi), float(ti))
            for xi, si, li, bi, ti in zip(x, s, lam, b, bt)]
