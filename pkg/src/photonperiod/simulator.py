"""Synthetic photon streams from the superposed background + source model.

The arrival process is an inhomogeneous Poisson process with rate
lambda(t) = mu c(t) [(1 - theta) + theta nu_tau(phi(t))], sampled exactly by
thinning a dominating homogeneous process.  Auxiliary variables are drawn
from the source or background density according to the event's (latent)
origin, independently of the arrival time.

Randomness uses numpy's PCG64 generator; the four sampling stages (arrival,
accept, label, z) run on sub-streams spawned from one SeedSequence, so
altering one stage leaves the others untouched.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .lightcurve import LightCurveProfile, eval_profile, phase_of

__all__ = [
    "RateModel",
    "EventList",
    "sensitivity_constant",
    "sensitivity_ramp",
    "sensitivity_window",
    "simulate",
    "expected_count",
]

_NU_GRID = 4096


def sensitivity_constant(level=1.0):
    def c(t):
        return np.full_like(np.asarray(t, dtype=float), level)
    return c


def sensitivity_ramp(c0, c1, T):
    """Linear ramp from c0 at t = 0 to c1 at t = T."""
    def c(t):
        t = np.asarray(t, dtype=float)
        return c0 + (c1 - c0) * t / T
    return c


def sensitivity_window(t_on, t_off, level=1.0):
    def c(t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= t_on) & (t < t_off), level, 0.0)
    return c


@dataclass(frozen=True)
class RateModel:
    """Rate lambda(t) = mu c(t) [(1 - theta) + theta nu_tau(phi(t))] on [0, T]."""

    mu: float
    theta: float
    profile: LightCurveProfile
    phase: object
    T: float
    sensitivity: object = None  # callable c(t) on [0, T]; None means c = 1

    def __post_init__(self):
        if self.mu <= 0 or self.T <= 0:
            raise ValueError("need mu > 0 and T > 0")
        if not 0 <= self.theta <= 1:
            raise ValueError("theta must lie in [0, 1]")

    def c(self, t):
        if self.sensitivity is None:
            return np.ones_like(np.asarray(t, dtype=float))
        return np.asarray(self.sensitivity(t), dtype=float)

    @property
    def mu0(self):
        """mu times the time-averaged sensitivity."""
        if self.sensitivity is None:
            return self.mu
        integral, _ = integrate.quad(lambda t: float(self.c(t)), 0.0, self.T,
                                     limit=200)
        return self.mu * integral / self.T

    def nu(self, t, tau=0.0):
        return eval_profile(self.profile, phase_of(self.phase, t) + tau)

    def rate(self, t, tau=0.0):
        return self.mu * self.c(t) * ((1.0 - self.theta) + self.theta * self.nu(t, tau))

    def rate_bound(self):
        """A true upper bound on lambda(t) over [0, T].

        The profile maximum uses the triangle inequality
        nu <= 1 + 2 eta sum|gamma_n| (exact bound, so thinning stays exact);
        the sensitivity maximum comes from a 4096-point grid scan.
        """
        nu_max = 1.0 + 2.0 * self.profile.eta * float(
            np.sum(np.abs(self.profile.coeffs)))
        if self.sensitivity is None:
            c_max = 1.0
        else:
            grid = np.linspace(0.0, self.T, _NU_GRID)
            c_max = float(np.max(self.c(grid)))
        bound = self.mu * c_max * ((1.0 - self.theta) + self.theta * nu_max)
        if not np.isfinite(bound) or bound <= 0:
            raise ValueError("non-finite or degenerate rate bound")
        return bound


@dataclass(frozen=True)
class EventList:
    """Photon events sorted by arrival time, with simulation truth tags.

    The is_source flags record the latent origin of each simulated event and
    are never consulted by detection code.
    """

    t: np.ndarray
    energy: np.ndarray
    angle: np.ndarray
    is_source: np.ndarray = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "energy", np.asarray(self.energy, dtype=float))
        object.__setattr__(self, "angle", np.asarray(self.angle, dtype=float))
        if self.is_source is not None:
            object.__setattr__(self, "is_source",
                               np.asarray(self.is_source, dtype=bool))

    def __len__(self):
        return self.t.size

    @property
    def z(self):
        return (self.energy, self.angle)


def simulate(model, densities, tau=0.0, seed=0):
    """Draw one event stream.  Deterministic given (model, densities, tau, seed)."""
    lam_max = model.rate_bound()
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    s_arrival, s_accept, s_label, s_z = ss.spawn(4)
    rng_arrival = np.random.default_rng(s_arrival)
    rng_accept = np.random.default_rng(s_accept)
    rng_label = np.random.default_rng(s_label)
    rng_z = np.random.default_rng(s_z)

    n_cand = rng_arrival.poisson(lam_max * model.T)
    t_cand = np.sort(rng_arrival.uniform(0.0, model.T, size=n_cand))

    nu = eval_profile(model.profile, phase_of(model.phase, t_cand) + tau)
    lam = model.mu * model.c(t_cand) * ((1.0 - model.theta) + model.theta * nu)
    if np.any(~np.isfinite(lam)):
        raise ValueError("non-finite rate encountered")
    keep = rng_accept.uniform(size=n_cand) * lam_max < lam
    t = t_cand[keep]
    nu = np.atleast_1d(nu)[keep]

    p_source = model.theta * nu / ((1.0 - model.theta) + model.theta * nu)
    is_source = rng_label.uniform(size=t.size) < p_source

    energy = np.empty(t.size)
    angle = np.empty(t.size)
    n_src = int(np.count_nonzero(is_source))
    if n_src:
        e_s, a_s = densities.sample_source(rng_z, n_src)
        energy[is_source], angle[is_source] = e_s, a_s
    if t.size - n_src:
        e_b, a_b = densities.sample_background(rng_z, t.size - n_src)
        energy[~is_source], angle[~is_source] = e_b, a_b

    return EventList(t=t, energy=energy, angle=angle, is_source=is_source)


def expected_count(model):
    """mu * integral of c(t) over [0, T]; exact when c is constant."""
    if model.sensitivity is None:
        return model.mu * model.T
    integral, _ = integrate.quad(lambda t: float(model.c(t)), 0.0, model.T,
                                 limit=200)
    return model.mu * integral
