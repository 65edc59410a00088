"""Analytic detection-power predictions and simulation-backed mismatch scans.

The predicted signal-to-noise ratio of Q_T is

    snr = theta^2 T mu0 E(w) * sum_{n != 0} |g_n|^2 |alpha_n|^2
          / sqrt(2 sum_{n != 0} |alpha_n|^4)

with |g_n|^2 = eta^2 |gamma_n|^2 the effective source spectrum (eta folded
in) and E(w) the weight efficiency.  All n != 0 sums use the conjugate
factor of two.

The denominator is the null standard deviation of Q_T.  Because
|A_n|^2 = |A_{-n}|^2 exactly (conjugate pairs are perfectly correlated,
not independent), the null variance is

    Var_H(Q_T) = 2 [E(W^2) mu0]^2 sum_{n != 0} |alpha_n|^4,

i.e. the weighted-chi-square model with one chi-square(2) term per n >= 1
and coefficient |alpha_n|^2 E(W^2) mu0 T.  Monte Carlo confirms this
variance; treating the +-n pair as independent would halve it.
"""

import json
from dataclasses import dataclass

import numpy as np

from .detector import fourier_coefficients
from .simulator import simulate

__all__ = [
    "PowerPrediction",
    "null_moments",
    "predicted_snr",
    "threshold_theta",
    "mismatch_factor",
    "mismatch_scan",
]


@dataclass(frozen=True)
class PowerPrediction:
    snr: float
    efficiency_w: float
    template_match: float
    theta: float
    T: float
    mu0: float

    def to_json(self):
        return json.dumps(
            {
                "snr": self.snr,
                "efficiency_w": self.efficiency_w,
                "template_match": self.template_match,
                "theta": self.theta,
                "T": self.T,
                "mu0": self.mu0,
            }
        )


def _match_ratio(template, source):
    """sum_{n != 0} |g_n|^2 |alpha_n|^2 / sqrt(2 sum_{n != 0} |alpha_n|^4)."""
    a = np.asarray(template.amps_sq, dtype=float)
    if not np.any(a > 0):
        raise ValueError("empty template")
    g = source.amps_sq() * source.eta**2
    k = min(a.size, g.size)
    num = 2.0 * np.dot(g[:k], a[:k])
    den = 2.0 * np.sqrt(np.sum(a * a))
    return num / den


def null_moments(template, T, expected_sum_w2):
    """Null mean and variance of Q_T for a given calibration scale.

    mean = (sum_w2 / T) sum_{n != 0} |alpha_n|^2 and the variance follows the
    per-harmonic chi-square(2) model (conjugate pairs fully correlated).
    """
    a = np.asarray(template.amps_sq, dtype=float)
    scale = expected_sum_w2 / T
    mean = scale * 2.0 * np.sum(a)
    var = scale**2 * 4.0 * np.sum(a * a)
    return float(mean), float(var)


def predicted_snr(theta, T, mu0, eff_w, template, source):
    """Predicted (E_K - E_H) / sigma_H of Q_T in the weak-signal regime."""
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    if T <= 0 or mu0 <= 0 or eff_w <= 0:
        raise ValueError("need T > 0, mu0 > 0, eff_w > 0")
    match = _match_ratio(template, source)
    snr = theta**2 * T * mu0 * eff_w * match
    return PowerPrediction(
        snr=float(snr),
        efficiency_w=float(eff_w),
        template_match=float(match),
        theta=float(theta),
        T=float(T),
        mu0=float(mu0),
    )


def threshold_theta(T, mu0, eff_w, template, source, target_snr):
    """Source fraction needed to reach target_snr; scales as T^(-1/2)."""
    if target_snr < 0:
        raise ValueError("target_snr must be nonnegative")
    match = _match_ratio(template, source)
    if match <= 0:
        raise ValueError("orthogonal template")
    return float(np.sqrt(target_snr / (T * mu0 * eff_w * match)))


def _mean_an_power(model, densities, phase_used, n, tau, replicates, seed):
    """Mean |A_n|^2 and its standard error over simulated replicates.

    Events are simulated from the model's own (true) phase and analyzed at
    phase_used; unit weights.
    """
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(replicates)
    powers = np.empty(replicates)
    for i, child in enumerate(children):
        ev = simulate(model, densities, tau=tau, seed=child)
        w = np.ones(len(ev))
        an = fourier_coefficients(ev, w, phase_used, n)
        powers[i] = np.abs(an[n - 1]) ** 2
    return float(np.mean(powers)), float(np.std(powers, ddof=1) / np.sqrt(replicates))


def mismatch_factor(model, densities, n, delta, mode="f-only", via="empirical",
                    replicates=400, seed=0, tau=0.0):
    """Fractional signal power retained at frequency offset Delta / T.

    Empirical mode simulates events at the true phase, measures the mean
    |A_n|^2 excess over the null level when analyzed at
    f = f0 + Delta/T (and fdot = fdot0 + Delta/T^2 in f-and-fdot mode), and
    divides by the Delta = 0 excess.  Quadratic-fit mode fits
    1 - kappa (n Delta)^2 to empirical factors at small offsets and evaluates
    the fit at Delta.
    """
    if abs(delta) >= 1.0:
        raise ValueError("outside regime: need |Delta| < 1")
    if mode not in ("f-only", "f-and-fdot"):
        raise ValueError("unknown mode %r" % mode)
    if via == "quadratic-fit":
        kappa, _ = fit_mismatch_kappa(model, densities, n, mode=mode,
                                      replicates=replicates, seed=seed, tau=tau)
        return max(0.0, 1.0 - kappa * (n * delta) ** 2)
    if via != "empirical":
        raise ValueError("unknown via %r" % via)

    excess0 = _signal_excess(model, densities, n, 0.0, mode, replicates, seed, tau)
    if delta == 0.0:
        return 1.0
    excess = _signal_excess(model, densities, n, delta, mode, replicates, seed, tau)
    return excess / excess0


def _offset_phase(phase, delta, T, mode):
    from .lightcurve import PhaseModel

    fdot = phase.fdot + (delta / T**2 if mode == "f-and-fdot" else 0.0)
    return PhaseModel(f=phase.f + delta / T, fdot=fdot, epoch=phase.epoch)


def _signal_excess(model, densities, n, delta, mode, replicates, seed, tau):
    phase_used = _offset_phase(model.phase, delta, model.T, mode)
    mean_power, _ = _mean_an_power(model, densities, phase_used, n, tau,
                                   replicates, seed)
    # unit weights: null E|A_n|^2 = expected event count
    null_level = model.mu0 * model.T
    return mean_power - null_level


def fit_mismatch_kappa(model, densities, n, mode="f-only", replicates=400,
                       seed=0, tau=0.0, deltas=(0.05, 0.1, 0.15, 0.2)):
    """Least-squares kappa in factor(Delta) = 1 - kappa (n Delta)^2."""
    excess0 = _signal_excess(model, densities, n, 0.0, mode, replicates, seed, tau)
    x, y = [], []
    for d in deltas:
        f = _signal_excess(model, densities, n, d, mode, replicates, seed, tau)
        x.append((n * d) ** 2)
        y.append(1.0 - f / excess0)
    x = np.asarray(x)
    y = np.asarray(y)
    kappa = float(np.dot(x, y) / np.dot(x, x))
    resid = y - kappa * x
    se = float(np.sqrt(np.sum(resid**2) / max(1, x.size - 1) / np.dot(x, x)))
    return kappa, se


def mismatch_scan(model, densities, harmonics, deltas, mode="f-only",
                  replicates=400, seed=0, tau=0.0):
    """Table of (n, Delta, factor, mc_stderr) rows over a grid of offsets."""
    rows = []
    for n in harmonics:
        base, base_se = _excess_with_se(model, densities, n, 0.0, mode,
                                        replicates, seed, tau)
        for d in deltas:
            if d == 0.0:
                rows.append((n, d, 1.0, 0.0))
                continue
            exc, se = _excess_with_se(model, densities, n, d, mode,
                                      replicates, seed, tau)
            factor = exc / base
            stderr = abs(factor) * np.hypot(se / exc if exc else np.inf,
                                            base_se / base)
            rows.append((n, d, factor, stderr))
    return rows


def _excess_with_se(model, densities, n, delta, mode, replicates, seed, tau):
    phase_used = _offset_phase(model.phase, delta, model.T, mode)
    mean_power, se = _mean_an_power(model, densities, phase_used, n, tau,
                                    replicates, seed)
    return mean_power - model.mu0 * model.T, se
