"""Distribution engine: dB-domain PDFs, logarithmic convolution and
characteristic-function machinery.

Power terms are manipulated as discretized PDFs on a uniform dB grid.
Sums of independent dB-valued terms are logarithmic convolutions; sums of
independent linear powers are handled through characteristic functions,
where aggregation over many transmitters becomes a real-valued power of
the CF.  The fractional CF power is the delicate part: it needs the
complex logarithm with a continuously unwrapped phase, so the CF is kept
primarily in log form on a dense log-spaced frequency grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.signal import fftconvolve

from .errors import NumericQualityError

__all__ = [
    "DbDistribution",
    "LinearDistribution",
    "CharFn",
    "db_convolve",
    "db_to_linear",
    "omega_grid",
    "cf_from_linear",
    "cf_pow",
    "cf_product",
    "gil_pelaez_cdf",
    "cf_mean",
    "cf_std",
    "ks_distance",
]

_NORM_TOL = 1e-9
# |CF| below this is numerical noise (sum of ~1e5 unit phasors in float64).
_CF_MAG_FLOOR = 1e-13


def _as_prob_weights(weights, extra_mass=0.0):
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-D array")
    if np.any(w < 0):
        wmin = float(w.min())
        if wmin < -1e-12:
            raise ValueError(f"negative weight {wmin}")
        w = np.maximum(w, 0.0)
    total = float(w.sum()) + extra_mass
    if not math.isclose(total, 1.0, rel_tol=0, abs_tol=_NORM_TOL):
        if total <= 0:
            raise ValueError("distribution has zero total mass")
        w = w / total * (1.0 - extra_mass)
    return w


@dataclass(frozen=True)
class DbDistribution:
    """PDF of a dB-valued quantity on a uniform grid.

    ``weights[i]`` is the probability of the value ``origin + i*step``.
    ``neg_inf_mass`` is an optional point mass at -infinity dB (zero in
    linear scale), used for shielded or otherwise powerless outcomes.
    """

    origin: float
    step: float
    weights: np.ndarray
    neg_inf_mass: float = 0.0

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if not 0.0 <= self.neg_inf_mass <= 1.0:
            raise ValueError("neg_inf_mass must lie in [0, 1]")
        w = _as_prob_weights(self.weights, self.neg_inf_mass)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "origin", float(self.origin))
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "neg_inf_mass", float(self.neg_inf_mass))

    # -- constructors -------------------------------------------------

    @classmethod
    def delta(cls, value_db: float, step: float = 0.25) -> "DbDistribution":
        return cls(origin=value_db, step=step, weights=np.array([1.0]))

    @classmethod
    def from_values(cls, values_db, probs, step, neg_inf_mass=0.0):
        """Bin arbitrary (value, probability) pairs onto a uniform grid.

        Each atom is split linearly between the two nearest bins, which
        preserves total mass exactly and the mean up to rounding.
        """
        v = np.asarray(values_db, dtype=float)
        p = np.asarray(probs, dtype=float)
        if v.shape != p.shape:
            raise ValueError("values and probs must have the same shape")
        finite = np.isfinite(v)
        if not np.all(finite):
            neg = np.isneginf(v)
            if not np.all(neg | finite):
                raise ValueError("values must be finite or -inf")
            neg_inf_mass = neg_inf_mass + float(p[neg].sum())
            v, p = v[finite], p[finite]
        if v.size == 0:
            raise ValueError("no finite support")
        origin = math.floor(v.min() / step) * step
        idx = (v - origin) / step
        k = np.floor(idx).astype(int)
        frac = idx - k
        n = int(k.max()) + 2
        w = np.zeros(n)
        np.add.at(w, k, p * (1.0 - frac))
        np.add.at(w, k + 1, p * frac)
        return cls(origin=origin, step=step, weights=w, neg_inf_mass=neg_inf_mass)

    @classmethod
    def from_samples(cls, samples_db, step=0.25):
        s = np.asarray(samples_db, dtype=float)
        if s.size == 0:
            raise ValueError("no samples")
        neg = np.isneginf(s)
        neg_mass = float(neg.sum()) / s.size
        fin = s[~neg]
        if fin.size == 0:
            return cls(origin=0.0, step=step, weights=np.array([0.0]),
                       neg_inf_mass=1.0)
        p = np.full(fin.shape, 1.0 / s.size)
        return cls.from_values(fin, p, step, neg_inf_mass=neg_mass)

    # -- views ---------------------------------------------------------

    @property
    def centers(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.weights.size)

    def mean_db(self) -> float:
        """Mean of the finite part, conditioned on being finite."""
        finite_mass = self.weights.sum()
        if finite_mass == 0:
            return float("-inf")
        return float(np.dot(self.centers, self.weights) / finite_mass)

    def cdf(self, x: float) -> float:
        return self.neg_inf_mass + float(self.weights[self.centers <= x].sum())

    # -- transforms ----------------------------------------------------

    def shifted(self, offset_db: float) -> "DbDistribution":
        """Add a deterministic dB term (convolution with a delta)."""
        return replace(self, origin=self.origin + offset_db)

    def resampled(self, step: float) -> "DbDistribution":
        if math.isclose(step, self.step, rel_tol=1e-12):
            return self
        return DbDistribution.from_values(
            self.centers, self.weights, step, neg_inf_mass=self.neg_inf_mass)

    def trimmed(self, tail_mass: float = 1e-12) -> "DbDistribution":
        """Drop negligible-mass tails to keep grids compact."""
        c = np.cumsum(self.weights)
        total = c[-1]
        lo = int(np.searchsorted(c, tail_mass * total))
        hi = int(np.searchsorted(c, (1.0 - tail_mass) * total)) + 1
        w = self.weights[lo:hi]
        if w.size == 0 or w.sum() <= 0:
            return self
        return DbDistribution(origin=self.origin + lo * self.step,
                              step=self.step, weights=w,
                              neg_inf_mass=self.neg_inf_mass)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw bin-center samples; -inf for the shielded atom."""
        u = rng.random(n)
        out = np.empty(n)
        shielded = u < self.neg_inf_mass
        out[shielded] = -np.inf
        if np.any(~shielded):
            c = np.cumsum(self.weights)
            c /= c[-1]
            u2 = rng.random(int((~shielded).sum()))
            out[~shielded] = self.centers[np.searchsorted(c, u2, side="right").clip(0, self.weights.size - 1)]
        return out


@dataclass(frozen=True)
class LinearDistribution:
    """Discrete PDF of a non-negative linear-scale power.

    ``lo``/``hi`` optionally carry the linear extent of the dB bin each
    atom came from, which lets the CF treat the atom as uniformly smeared
    over its bin instead of a point mass.
    """

    support: np.ndarray
    weights: np.ndarray
    zero_mass: float = 0.0
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.support, dtype=float)
        if np.any(x < 0):
            raise ValueError("support must be non-negative")
        w = _as_prob_weights(self.weights, self.zero_mass)
        object.__setattr__(self, "support", x)
        object.__setattr__(self, "weights", w)

    def mean(self) -> float:
        return float(np.dot(self.support, self.weights))

    def var(self) -> float:
        m = self.mean()
        return float(np.dot(self.support ** 2, self.weights) - m * m)

    def sample(self, rng: np.random.Generator, n: int, smear: bool = False) -> np.ndarray:
        u = rng.random(n)
        out = np.zeros(n)
        live = u >= self.zero_mass
        m = int(live.sum())
        if m:
            c = np.cumsum(self.weights)
            c /= c[-1]
            idx = np.searchsorted(c, rng.random(m), side="right").clip(0, self.weights.size - 1)
            if smear and self.lo is not None:
                out[live] = self.lo[idx] + rng.random(m) * (self.hi[idx] - self.lo[idx])
            else:
                out[live] = self.support[idx]
        return out


def db_convolve(a: DbDistribution, b: DbDistribution) -> DbDistribution:
    """Distribution of the sum of two independent dB-valued variables."""
    if not math.isclose(a.step, b.step, rel_tol=1e-12):
        step = min(a.step, b.step)
        a, b = a.resampled(step), b.resampled(step)
    wa, wb = a.weights, b.weights
    if wa.size * wb.size <= 4_000_000:
        w = np.convolve(wa, wb)
    else:
        w = np.maximum(fftconvolve(wa, wb), 0.0)
    # -inf absorbs: the sum is -inf when either term is.
    inf = a.neg_inf_mass + b.neg_inf_mass - a.neg_inf_mass * b.neg_inf_mass
    return DbDistribution(origin=a.origin + b.origin, step=a.step,
                          weights=w, neg_inf_mass=inf)


def db_to_linear(d: DbDistribution, unit: str = "dBW") -> LinearDistribution:
    """Convert a dB-domain PDF to linear scale (watts).

    ``unit`` states what the dB values mean: ``dBW`` (or the generic
    ``dB``) maps x -> 10^(x/10); ``dBm`` subtracts 30 first.  The -inf
    atom becomes mass at exactly zero watts.
    """
    offs = {"dBW": 0.0, "dB": 0.0, "dBm": 30.0}
    try:
        off = offs[unit]
    except KeyError:
        raise ValueError(f"unknown unit {unit!r}") from None
    c = d.centers - off
    half = d.step / 2.0
    return LinearDistribution(
        support=10.0 ** (c / 10.0),
        weights=d.weights.copy(),
        zero_mass=d.neg_inf_mass,
        lo=10.0 ** ((c - half) / 10.0),
        hi=10.0 ** ((c + half) / 10.0),
    )


# ----------------------------------------------------------------------
# Characteristic functions
# ----------------------------------------------------------------------

def omega_grid(x_min: float, x_max: float, points_per_decade: int = 2048,
               low_decades: float = 3.0, high_decades: float = 3.0) -> np.ndarray:
    """Log-spaced CF frequency grid tied to the linear power scale.

    Spans [10^-low_decades / x_max, 10^high_decades / x_min] plus the
    exact point omega = 0, dense enough that the phase of the CF can be
    unwrapped reliably and small enough at the low end that moments can
    be read off the log-CF.
    """
    if not (0 < x_min <= x_max):
        raise ValueError("need 0 < x_min <= x_max")
    lo = math.log10(1.0 / x_max) - low_decades
    hi = math.log10(1.0 / x_min) + high_decades
    n = max(int(round((hi - lo) * points_per_decade)), 16)
    grid = np.logspace(lo, hi, n)
    return np.concatenate(([0.0], grid))


@dataclass(frozen=True)
class CharFn:
    """Characteristic function sampled on a log-spaced frequency grid.

    ``logvalues`` is log(CF) with a continuously unwrapped imaginary
    part; it is the primary representation so that real powers stay
    single-valued.  ``valid`` is the count of leading grid points where
    |CF| sits above the numerical noise floor; beyond it the phase is
    unreliable.  ``zero_atom`` tracks the probability mass at exactly
    zero power, which the inversion handles analytically.
    """

    omega: np.ndarray
    logvalues: np.ndarray
    valid: int
    zero_atom: float = 0.0

    def __post_init__(self):
        if self.omega[0] != 0.0:
            raise ValueError("omega grid must start at 0")
        if self.logvalues[0] != 0:
            raise ValueError("CF must equal 1 at omega = 0")

    @property
    def values(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(self.logvalues)

    @property
    def magnitudes(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(self.logvalues.real)

    @classmethod
    def from_values(cls, omega, values, zero_atom=0.0):
        """Build from raw complex samples, unwrapping the phase."""
        omega = np.asarray(omega, dtype=float)
        values = np.asarray(values, dtype=complex)
        mag = np.abs(values)
        above = mag > _CF_MAG_FLOOR
        valid = int(np.argmin(above)) if not above.all() else omega.size
        logmag = np.log(np.maximum(mag, 1e-300))
        phase = np.unwrap(np.angle(values))
        phase -= phase[0]
        return cls(omega=omega, logvalues=logmag + 1j * phase,
                   valid=max(valid, 1), zero_atom=zero_atom)


def cf_from_linear(d: LinearDistribution, omega: np.ndarray,
                   smear: bool = False, chunk: int = 4096) -> CharFn:
    """CF of a discrete linear-power distribution: sum_i w_i e^{i w x_i}.

    With ``smear`` each atom is treated as uniform over its dB bin
    (requires bin edges on the distribution), which restores the decay
    of the CF at high frequency that the point discretization destroys.
    """
    if smear and d.lo is None:
        raise ValueError("smear requested but distribution has no bin edges")
    x = d.support
    w = d.weights
    vals = np.empty(omega.size, dtype=complex)
    vals[0] = 1.0
    for start in range(1, omega.size, chunk):
        om = omega[start:start + chunk, None]
        if smear:
            width = d.hi - d.lo
            degenerate = width <= 0
            with np.errstate(invalid="ignore", divide="ignore"):
                ph = (np.exp(1j * om * d.hi) - np.exp(1j * om * d.lo)) / (1j * om * width)
            if degenerate.any():
                ph[:, degenerate] = np.exp(1j * om * x[degenerate])
        else:
            ph = np.exp(1j * om * x)
        vals[start:start + chunk] = ph @ w
    vals[1:] += d.zero_mass
    return CharFn.from_values(omega, vals, zero_atom=d.zero_mass)


def cf_pow(cf: CharFn, p: float) -> CharFn:
    """CF raised to a real non-negative power via the unwrapped log."""
    if p < 0:
        raise ValueError("exponent must be >= 0")
    return CharFn(omega=cf.omega, logvalues=cf.logvalues * p,
                  valid=cf.valid, zero_atom=cf.zero_atom ** p)


def cf_product(cfs) -> CharFn:
    """Pointwise product of CFs sharing one frequency grid."""
    cfs = list(cfs)
    if not cfs:
        raise ValueError("empty CF product")
    base = cfs[0]
    log = base.logvalues.copy()
    valid = base.valid
    atom = base.zero_atom
    for c in cfs[1:]:
        if c.omega.shape != base.omega.shape or not np.array_equal(c.omega, base.omega):
            raise ValueError("CF grids differ; resample before multiplying")
        log += c.logvalues
        valid = min(valid, c.valid)
        atom *= c.zero_atom
    return CharFn(omega=base.omega, logvalues=log, valid=valid, zero_atom=atom)


def _leading_run(flags: np.ndarray) -> int:
    return int(np.argmin(flags)) if not flags.all() else flags.size


def _odd_fit_points(om, y):
    """Log-spread sample of the low-frequency stretch of (om, y).

    Restricted to the first two decades above the grid floor, where the
    log-CF expansion is accurate regardless of any exponent applied.
    """
    run = int(np.searchsorted(om, om[0] * 100.0))
    run = min(max(_leading_run(np.abs(y) < 1.0), 8), max(run, 8))
    idx = np.unique(np.geomspace(1, run, 48).astype(int)) - 1
    return om[idx], y[idx]


def cf_mean(cf: CharFn) -> float:
    """Mean from the slope of Im log(CF) at small frequency.

    Im log CF = mu*w - c3*w^3 + ... for small w; a two-term odd fit over
    the leading quasi-linear decades recovers mu with error O(w^4).
    """
    om = cf.omega[1:cf.valid]
    im = cf.logvalues[1:cf.valid].imag
    if om.size < 8:
        raise NumericQualityError("CF grid too short for moment estimate")
    o, y = _odd_fit_points(om, im)
    u = o / o[-1]
    coef, *_ = np.linalg.lstsq(np.stack([u, u ** 3], axis=1), y, rcond=None)
    return float(coef[0] / o[-1])


def cf_std(cf: CharFn) -> float:
    """Standard deviation from Re log(CF) = -var*w^2/2 + O(w^4)."""
    om = cf.omega[1:cf.valid]
    re = cf.logvalues[1:cf.valid].real
    if om.size < 8:
        raise NumericQualityError("CF grid too short for moment estimate")
    o, y = _odd_fit_points(om, -re)
    u = o / o[-1]
    coef, *_ = np.linalg.lstsq(np.stack([u ** 2, u ** 4], axis=1), y, rcond=None)
    return math.sqrt(max(2.0 * coef[0], 0.0)) / o[-1]


def gil_pelaez_cdf(cf: CharFn, x: np.ndarray, chunk: int = 256,
                   warn_tol: float = 5e-3):
    """Invert a CF to CDF samples F(x) on a positive grid.

    F(x) = 1/2 - (1/pi) Int_0^inf Im[e^{-iwx} CF(w)]/w dw, evaluated by
    trapezoid quadrature on the log-spaced grid.  The zero-power atom is
    removed from the CF and restored analytically, so the integrand
    decays even when the aggregate has an all-silent outcome.  The raw
    curve is clipped to [0, 1] and made monotone by isotonic regression.

    Returns ``(F, diagnostics)`` where diagnostics reports the portion
    of the grid used, a tail-truncation error estimate and the largest
    monotonization adjustment.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x grid must be strictly positive")
    z = cf.zero_atom
    om = cf.omega[1:cf.valid]
    psi = cf.values[1:cf.valid] - z
    if om.size < 8:
        raise NumericQualityError("CF not resolved on enough of the grid")
    dw = np.empty_like(om)
    dw[1:-1] = 0.5 * (om[2:] - om[:-2])
    dw[0] = 0.5 * (om[1] - om[0]) + om[0]
    dw[-1] = 0.5 * (om[-1] - om[-2])
    kernel = psi * dw / om
    raw = np.empty(x.size)
    for s in range(0, x.size, chunk):
        xs = x[s:s + chunk]
        integ = np.imag(np.exp(-1j * np.outer(xs, om)) * kernel[None, :]).sum(axis=1)
        raw[s:s + chunk] = 0.5 * (1.0 + z) - integ / math.pi
    tail = float(np.abs(psi[-1]) / (math.pi * om[-1] * x.min()))
    clipped = np.clip(raw, 0.0, 1.0)
    mono = isotonic_regression(clipped).x
    adjustment = float(np.max(np.abs(mono - raw)))
    diagnostics = {
        "omega_used": int(om.size),
        "omega_max": float(om[-1]),
        "truncated": cf.valid < cf.omega.size,
        "tail_error_estimate": tail,
        "monotonize_adjustment": adjustment,
        "zero_atom": z,
    }
    if tail > warn_tol:
        diagnostics["warning"] = (
            f"tail truncation estimate {tail:.2e} exceeds {warn_tol:.0e}")
    return mono, diagnostics


def ks_distance(samples: np.ndarray, x: np.ndarray, cdf: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance between an empirical sample set and a
    tabulated CDF, evaluated at the sample points by interpolation."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    f = np.interp(s, x, cdf, left=0.0, right=1.0)
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    return float(np.max(np.maximum(np.abs(f - ecdf_hi), np.abs(f - ecdf_lo))))
