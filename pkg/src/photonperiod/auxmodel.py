"""Auxiliary-variable densities, event weight functions, and their efficiencies.

Per-photon auxiliary data z = (E, phi) (energy, incidence angle) carries
information about source vs background origin.  Densities factorize as an
energy marginal times an angle conditional; weight functions map z to a
weight, the principled choice being the posterior source probability.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import expit

__all__ = [
    "FlatSpectrum",
    "PowerLawSpectrum",
    "CustomSpectrum",
    "GaussianPsfAngle",
    "UniformDiscAngle",
    "CustomAngle",
    "AuxDensityPair",
    "DiskGeometry",
    "WeightFunction",
    "WeightMoments",
    "unit_weight",
    "constant_weight",
    "optimal_weight_fn",
    "optimal_no_spectrum_fn",
    "psf_gaussian_weight_fn",
    "cut_weight_fn",
    "custom_weight",
    "optimal_weight",
    "psf_gaussian_weight",
    "cut_weight",
    "weight_moments",
    "weight_efficiency",
    "optimal_efficiency",
    "correlation_efficiency",
]

_QUAD_RTOL = 1e-6


class QuadratureError(RuntimeError):
    pass


def _quad(fn, a, b):
    val, err = integrate.quad(fn, a, b, epsrel=_QUAD_RTOL, epsabs=1e-12, limit=200)
    if err > max(_QUAD_RTOL * abs(val), 1e-9):
        raise QuadratureError(
            "quadrature did not converge: achieved abs error %.3g on value %.3g"
            % (err, val)
        )
    return val


# ---------------------------------------------------------------------------
# Energy marginals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlatSpectrum:
    e_min: float
    e_max: float

    def __post_init__(self):
        if not self.e_min < self.e_max:
            raise ValueError("need e_min < e_max")

    @property
    def support(self):
        return (self.e_min, self.e_max)

    def pdf(self, e):
        e = np.asarray(e, dtype=float)
        inside = (e >= self.e_min) & (e <= self.e_max)
        return np.where(inside, 1.0 / (self.e_max - self.e_min), 0.0)

    def sample(self, rng, n):
        return rng.uniform(self.e_min, self.e_max, size=n)


@dataclass(frozen=True)
class PowerLawSpectrum:
    """pdf(E) proportional to E^-index on [e_min, e_max]."""

    index: float
    e_min: float
    e_max: float

    def __post_init__(self):
        if not 0 < self.e_min < self.e_max:
            raise ValueError("need 0 < e_min < e_max")

    @property
    def support(self):
        return (self.e_min, self.e_max)

    def _norm(self):
        g = 1.0 - self.index
        if abs(g) < 1e-12:
            return np.log(self.e_max / self.e_min)
        return (self.e_max**g - self.e_min**g) / g

    def pdf(self, e):
        e = np.asarray(e, dtype=float)
        inside = (e >= self.e_min) & (e <= self.e_max)
        vals = np.where(inside, e, self.e_min) ** (-self.index) / self._norm()
        return np.where(inside, vals, 0.0)

    def sample(self, rng, n):
        u = rng.uniform(size=n)
        g = 1.0 - self.index
        if abs(g) < 1e-12:
            return self.e_min * (self.e_max / self.e_min) ** u
        lo, hi = self.e_min**g, self.e_max**g
        return (lo + u * (hi - lo)) ** (1.0 / g)


@dataclass(frozen=True)
class CustomSpectrum:
    pdf_fn: callable
    sampler: callable
    e_min: float
    e_max: float

    @property
    def support(self):
        return (self.e_min, self.e_max)

    def pdf(self, e):
        return np.asarray(self.pdf_fn(np.asarray(e, dtype=float)))

    def sample(self, rng, n):
        return self.sampler(rng, n)


# ---------------------------------------------------------------------------
# Angle conditionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianPsfAngle:
    """Radial density of a bivariate circular Gaussian PSF, truncated at r_max.

    sigma may be a constant or a callable sigma(E).  The density is
    renormalized over [0, r_max]; for sigma <= r_max / 5 the truncated mass is
    below 4e-6, so this is numerically the untruncated form.
    """

    sigma: object
    r_max: float

    def _sigma(self, e):
        s = self.sigma(e) if callable(self.sigma) else self.sigma
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0):
            raise ValueError("sigma(E) must be positive")
        return s

    def _mass(self, s):
        return -np.expm1(-self.r_max**2 / (2.0 * s * s))

    def pdf(self, phi, e):
        phi = np.asarray(phi, dtype=float)
        s = self._sigma(e)
        inside = (phi >= 0) & (phi <= self.r_max)
        vals = phi / (s * s) * np.exp(-(phi * phi) / (2.0 * s * s)) / self._mass(s)
        return np.where(inside, vals, 0.0)

    def sample(self, rng, e):
        e = np.asarray(e, dtype=float)
        s = self._sigma(e)
        u = rng.uniform(size=e.shape)
        return np.sqrt(-2.0 * s * s * np.log1p(-u * self._mass(s)))


@dataclass(frozen=True)
class UniformDiscAngle:
    """Incidence angle of spatially uniform background on a disc: 2 phi / R^2."""

    r_max: float

    def pdf(self, phi, e):
        phi = np.asarray(phi, dtype=float)
        inside = (phi >= 0) & (phi <= self.r_max)
        return np.where(inside, 2.0 * phi / self.r_max**2, 0.0)

    def sample(self, rng, e):
        e = np.asarray(e, dtype=float)
        return self.r_max * np.sqrt(rng.uniform(size=e.shape))


@dataclass(frozen=True)
class CustomAngle:
    pdf_fn: callable  # pdf(phi, e)
    sampler: callable  # sampler(rng, e) -> phi array
    r_max: float

    def pdf(self, phi, e):
        return np.asarray(self.pdf_fn(np.asarray(phi, dtype=float), e))

    def sample(self, rng, e):
        return self.sampler(rng, e)


# ---------------------------------------------------------------------------
# Density pair
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuxDensityPair:
    """Factorized source and background densities of z = (E, phi)."""

    source_energy: object
    source_angle: object
    background_energy: object
    background_angle: object

    def __post_init__(self):
        for marg in (self.source_energy, self.background_energy):
            lo, hi = marg.support
            total = _quad(lambda e: float(marg.pdf(e)), lo, hi)
            if abs(total - 1.0) > 1e-6:
                raise ValueError(
                    "energy marginal integrates to %.8f, not 1" % total
                )
        for marg, cond in (
            (self.source_energy, self.source_angle),
            (self.background_energy, self.background_angle),
        ):
            lo, hi = marg.support
            for e in np.linspace(lo, hi, 5):
                total = _quad(lambda p: float(cond.pdf(p, e)), 0.0, cond.r_max)
                if abs(total - 1.0) > 1e-6:
                    raise ValueError(
                        "angle conditional at E=%.4g integrates to %.8f, not 1"
                        % (e, total)
                    )

    def pdf_source(self, e, phi):
        return self.source_energy.pdf(e) * self.source_angle.pdf(phi, e)

    def pdf_background(self, e, phi):
        return self.background_energy.pdf(e) * self.background_angle.pdf(phi, e)

    def sample_source(self, rng, n):
        e = self.source_energy.sample(rng, n)
        return e, self.source_angle.sample(rng, e)

    def sample_background(self, rng, n):
        e = self.background_energy.sample(rng, n)
        return e, self.background_angle.sample(rng, e)


# ---------------------------------------------------------------------------
# Disc geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiskGeometry:
    """Source in a uniform-background disc of radius R with a Gaussian PSF.

    rho is the background rate per unit area, alpha_rate the source photon
    rate, sigma the PSF width (constant or sigma(E)).
    """

    R: float
    rho: float
    alpha_rate: float
    sigma: object

    def __post_init__(self):
        if self.R <= 0 or self.rho < 0 or self.alpha_rate <= 0:
            raise ValueError("need R > 0, rho >= 0, alpha_rate > 0")
        if not callable(self.sigma):
            if self.sigma <= 0:
                raise ValueError("sigma must be positive")
            if self.sigma > self.R / 5.0:
                raise ValueError("sigma must satisfy sigma <= R/5 (narrow PSF)")

    @property
    def beta(self):
        return 2.0 * np.pi * self.rho / self.alpha_rate

    @property
    def mu(self):
        return np.pi * self.R**2 * self.rho + self.alpha_rate

    @property
    def theta(self):
        return self.alpha_rate / self.mu

    def sigma_at(self, e):
        s = self.sigma(e) if callable(self.sigma) else self.sigma
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0):
            raise ValueError("sigma(E) must be positive")
        return s

    def density_pair(self, source_spectrum=None, background_spectrum=None):
        """AuxDensityPair with Gaussian-PSF source and uniform-disc background."""
        src = source_spectrum if source_spectrum is not None else FlatSpectrum(0.1, 10.0)
        bkg = background_spectrum if background_spectrum is not None else src
        return AuxDensityPair(
            source_energy=src,
            source_angle=GaussianPsfAngle(self.sigma, self.R),
            background_energy=bkg,
            background_angle=UniformDiscAngle(self.R),
        )

    def to_json(self):
        if callable(self.sigma):
            raise ValueError("cannot serialize a callable sigma")
        return json.dumps(
            {"R": self.R, "rho": self.rho, "alpha_rate": self.alpha_rate,
             "sigma": self.sigma}
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(obj["R"], obj["rho"], obj["alpha_rate"], obj["sigma"])


# ---------------------------------------------------------------------------
# Weight functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightFunction:
    """Event weight w(E, phi), tagged with its construction kind."""

    kind: str
    fn: callable
    params: dict = None

    def __call__(self, e, phi):
        return np.asarray(self.fn(np.asarray(e, dtype=float),
                                   np.asarray(phi, dtype=float)))

    def to_json(self):
        return json.dumps({"kind": self.kind, **(self.params or {})})


def unit_weight():
    return WeightFunction("unit", lambda e, phi: np.ones(np.broadcast(e, phi).shape))


def constant_weight(c):
    return WeightFunction(
        "custom", lambda e, phi: np.full(np.broadcast(e, phi).shape, float(c))
    )


def optimal_weight(z, theta, densities):
    """Posterior probability that an event at z = (E, phi) is from the source."""
    e, phi = z
    fs = densities.pdf_source(e, phi)
    fb = densities.pdf_background(e, phi)
    denom = (1.0 - theta) * fb + theta * fs
    if np.any(denom <= 0):
        raise ValueError("z outside support of both densities")
    out = theta * fs / denom
    return out if np.ndim(out) else float(out)


def optimal_weight_fn(theta, densities):
    if not 0 < theta <= 1:
        raise ValueError("theta must be in (0, 1]")
    return WeightFunction(
        "optimal",
        lambda e, phi: optimal_weight((e, phi), theta, densities),
        {"theta": theta},
    )


def optimal_no_spectrum_fn(theta, densities):
    """Optimal weight from angle conditionals only (energy spectra unknown)."""
    if not 0 < theta <= 1:
        raise ValueError("theta must be in (0, 1]")

    def fn(e, phi):
        fs = densities.source_angle.pdf(phi, e)
        fb = densities.background_angle.pdf(phi, e)
        denom = (1.0 - theta) * fb + theta * fs
        if np.any(denom <= 0):
            raise ValueError("z outside support of both densities")
        return theta * fs / denom

    return WeightFunction("optimal-no-spectrum", fn, {"theta": theta})


def psf_gaussian_weight(e, phi, geom, spectra=None):
    """Closed-form disc weight 1 / (1 + beta sigma(E) exp(phi^2 / 2 sigma^2)).

    With (f_S(E), f_B(E)) spectra supplied, the spectral ratio multiplies the
    background term.  Evaluated in log space so large angles underflow to 0
    instead of overflowing.
    """
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0):
        raise ValueError("incidence angle must be nonnegative")
    s = geom.sigma_at(e)
    log_bg = np.log(geom.beta * s) + phi * phi / (2.0 * s * s)
    if spectra is not None:
        f_s, f_b = spectra
        fs = np.asarray(f_s(np.asarray(e, dtype=float)), dtype=float)
        fb = np.asarray(f_b(np.asarray(e, dtype=float)), dtype=float)
        if np.any(fs <= 0):
            raise ValueError("source spectrum must be positive on support")
        log_bg = log_bg + np.log(fb) - np.log(fs)
    out = expit(-log_bg)
    return out if out.ndim else float(out)


def psf_gaussian_weight_fn(geom, spectra=None):
    return WeightFunction(
        "psf-gaussian", lambda e, phi: psf_gaussian_weight(e, phi, geom, spectra)
    )


def cut_weight(z, cut):
    """Indicator weight: 1 iff E in [e_lo, e_hi] and phi <= phi_max (closed)."""
    e_lo, e_hi = cut.get("e_lo", -np.inf), cut.get("e_hi", np.inf)
    phi_max = cut.get("phi_max", np.inf)
    if e_lo > e_hi:
        raise ValueError("cut has e_lo > e_hi")
    e, phi = z
    e = np.asarray(e, dtype=float)
    phi = np.asarray(phi, dtype=float)
    out = ((e >= e_lo) & (e <= e_hi) & (phi <= phi_max)).astype(float)
    return out if out.ndim else float(out)


def cut_weight_fn(e_lo=-np.inf, e_hi=np.inf, phi_max=np.inf):
    cut = {"e_lo": e_lo, "e_hi": e_hi, "phi_max": phi_max}
    if e_lo > e_hi:
        raise ValueError("cut has e_lo > e_hi")
    return WeightFunction("cut", lambda e, phi: cut_weight((e, phi), cut), cut)


def custom_weight(fn):
    return WeightFunction("custom", fn)


# ---------------------------------------------------------------------------
# Moments and efficiency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightMoments:
    """First and second weight moments under background and source densities."""

    beta1: float
    beta2: float
    zeta1: float
    zeta2: float
    theta: float

    @property
    def ew(self):
        return (1.0 - self.theta) * self.beta1 + self.theta * self.zeta1

    @property
    def ew2(self):
        return (1.0 - self.theta) * self.beta2 + self.theta * self.zeta2


def _component_expectation(fn, energy, angle):
    """Integral of fn(E, phi) * marg(E) * cond(phi | E) over the support."""

    def inner(e):
        val = _quad(lambda p: float(fn(e, p)) * float(angle.pdf(p, e)), 0.0,
                    angle.r_max)
        return val * float(energy.pdf(e))

    lo, hi = energy.support
    return _quad(inner, lo, hi)


def weight_moments(w, theta, densities):
    """beta1, beta2, zeta1, zeta2 by nested deterministic quadrature."""
    b1 = _component_expectation(lambda e, p: w(e, p),
                                densities.background_energy,
                                densities.background_angle)
    b2 = _component_expectation(lambda e, p: w(e, p) ** 2,
                                densities.background_energy,
                                densities.background_angle)
    z1 = _component_expectation(lambda e, p: w(e, p),
                                densities.source_energy,
                                densities.source_angle)
    z2 = _component_expectation(lambda e, p: w(e, p) ** 2,
                                densities.source_energy,
                                densities.source_angle)
    return WeightMoments(beta1=b1, beta2=b2, zeta1=z1, zeta2=z2, theta=theta)


def weight_efficiency(m, theta):
    """SNR multiplier zeta1^2 / [(1-theta) beta2 + theta zeta2].

    Scale-invariant in w; equals 1 for unit weights.
    """
    denom = (1.0 - theta) * m.beta2 + theta * m.zeta2
    if denom <= 0:
        raise ValueError("degenerate weight")
    return m.zeta1**2 / denom


def optimal_efficiency(theta, densities):
    """Efficiency of the posterior-probability weight, by direct quadrature."""
    if not 0 < theta < 1:
        raise ValueError("theta must be in (0, 1)")

    def integrand(e, p):
        fs = float(densities.source_energy.pdf(e)) * float(
            densities.source_angle.pdf(p, e))
        fb = float(densities.background_energy.pdf(e)) * float(
            densities.background_angle.pdf(p, e))
        denom = (1.0 - theta) * fb + theta * fs
        return 0.0 if denom <= 0 else theta * fs / denom

    val = _component_expectation(integrand, densities.source_energy,
                                 densities.source_angle)
    return val / theta


def correlation_efficiency(w, theta, densities):
    """Efficiency via correlation with the optimal weight.

    [E(W W_opt)]^2 / E(W^2) under the marginal density of z, divided by
    theta^2; algebraically identical to weight_efficiency.
    """

    def w_opt(e, p):
        fs = float(densities.source_energy.pdf(e)) * float(
            densities.source_angle.pdf(p, e))
        fb = float(densities.background_energy.pdf(e)) * float(
            densities.background_angle.pdf(p, e))
        denom = (1.0 - theta) * fb + theta * fs
        return 0.0 if denom <= 0 else theta * fs / denom

    def marginal_expectation(fn):
        bg = _component_expectation(fn, densities.background_energy,
                                    densities.background_angle)
        src = _component_expectation(fn, densities.source_energy,
                                     densities.source_angle)
        return (1.0 - theta) * bg + theta * src

    e_wwopt = marginal_expectation(lambda e, p: w(e, p) * w_opt(e, p))
    e_w2 = marginal_expectation(lambda e, p: w(e, p) ** 2)
    if e_w2 <= 0:
        raise ValueError("degenerate weight")
    return e_wwopt**2 / e_w2 / theta**2
