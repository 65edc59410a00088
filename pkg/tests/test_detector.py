import numpy as np
import pytest
from scipy.stats import chi2

from photonperiod import (
    DetectionResult,
    HarmonicTemplate,
    LightCurveProfile,
    PhaseModel,
    RateModel,
    detect,
    estimate_theta,
    fourier_coefficients,
    p_value,
    qt_statistic,
    score_at_tau,
    simulate,
    weighted_chi2_sf,
)
from photonperiod.auxmodel import DiskGeometry, optimal_weight_fn, unit_weight

GEOM = DiskGeometry(R=5.0, rho=1.0 / (2.0 * np.pi), alpha_rate=1.0, sigma=1.0)
DENS = GEOM.density_pair()
F0 = PhaseModel(f=1.0)


class TestFourierCoefficients:
    def test_single_event_quarter_phase(self):
        an = fourier_coefficients(np.array([0.25]), np.array([1.0]), F0, 2)
        assert an[0] == pytest.approx(1j, abs=1e-15)
        assert an[1] == pytest.approx(-1.0, abs=1e-15)

    def test_weights_scale_linearly(self):
        t = np.array([0.1, 0.7])
        a1 = fourier_coefficients(t, np.array([1.0, 1.0]), F0, 3)
        a2 = fourier_coefficients(t, np.array([2.0, 2.0]), F0, 3)
        assert np.allclose(a2, 2 * a1, atol=1e-14)

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(0)
        t = rng.uniform(0, 100, 1000)
        w = rng.uniform(0, 1, 1000)
        model = PhaseModel(f=2.5, fdot=1e-4)
        an = fourier_coefficients(t, w, model, 4)
        ph = 2.5 * t + 0.5e-4 * t * t
        for n in range(1, 5):
            direct = np.sum(w * np.exp(2j * np.pi * n * ph))
            assert an[n - 1] == pytest.approx(direct, abs=1e-10)

    def test_negative_harmonic_is_conjugate(self):
        rng = np.random.default_rng(1)
        t = rng.uniform(0, 10, 500)
        w = rng.uniform(0, 1, 500)
        an = fourier_coefficients(t, w, F0, 3)
        for n in range(1, 4):
            a_neg = np.sum(w * np.exp(-2j * np.pi * n * t))
            assert abs(a_neg - np.conj(an[n - 1])) < 1e-10

    def test_epoch_shift_preserves_power(self):
        rng = np.random.default_rng(2)
        t = rng.uniform(0, 50, 400)
        w = rng.uniform(0, 1, 400)
        a0 = fourier_coefficients(t, w, PhaseModel(f=3.0), 3)
        a1 = fourier_coefficients(t, w, PhaseModel(f=3.0, epoch=17.3), 3)
        assert np.allclose(np.abs(a1), np.abs(a0), rtol=1e-9)

    def test_empty_events(self):
        an = fourier_coefficients(np.array([]), np.array([]), F0, 2)
        assert np.array_equal(an, np.zeros(2, dtype=complex))

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            fourier_coefficients(np.array([0.1]), np.array([-1.0]), F0, 1)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="lengths"):
            fourier_coefficients(np.array([0.1, 0.2]), np.array([1.0]), F0, 1)


class TestQtStatistic:
    def test_hand_computed(self):
        an = np.array([1j, -1.0 + 0j])
        tpl = HarmonicTemplate([1.0, 0.5])
        # (2/T)(1 * 1 + 0.5 * 1) with T = 2
        assert qt_statistic(an, tpl, 2.0) == pytest.approx(1.5)

    def test_extra_coefficients_ignored(self):
        an = np.array([1j, -1.0, 3.0 + 4j])
        tpl = HarmonicTemplate([1.0])
        assert qt_statistic(an, tpl, 1.0) == pytest.approx(2.0)

    def test_too_few_coefficients_rejected(self):
        with pytest.raises(ValueError):
            qt_statistic(np.array([1j]), HarmonicTemplate([1.0, 1.0]), 1.0)

    def test_nonpositive_duration_rejected(self):
        with pytest.raises(ValueError):
            qt_statistic(np.array([1j]), HarmonicTemplate([1.0]), 0.0)

    def test_weight_scaling_is_quadratic(self):
        rng = np.random.default_rng(3)
        t = rng.uniform(0, 30, 300)
        w = rng.uniform(0, 1, 300)
        tpl = HarmonicTemplate([1.0, 0.3, 0.1])
        q1 = qt_statistic(fourier_coefficients(t, w, F0, 3), tpl, 30.0)
        q2 = qt_statistic(fourier_coefficients(t, 5 * w, F0, 3), tpl, 30.0)
        assert q2 == pytest.approx(25.0 * q1, rel=1e-12)

    def test_parseval_against_score_scan(self):
        """Q_T equals the phase-averaged squared score when the template
        amplitudes are the profile's own eta^2 |gamma_n|^2."""
        rng = np.random.default_rng(4)
        t = rng.uniform(0, 20, 500)
        w = rng.uniform(0, 1, 500)
        prof = LightCurveProfile(np.array([0.25 + 0.1j, 0.1 - 0.05j]), eta=0.9)
        tpl = HarmonicTemplate(prof.amps_sq() * prof.eta**2)
        T = 20.0
        qt = qt_statistic(fourier_coefficients(t, w, F0, 2), tpl, T)
        taus = (np.arange(4096) + 0.5) / 4096
        mean_s2 = np.mean([score_at_tau(t, w, F0, prof, tau) ** 2 for tau in taus])
        assert qt == pytest.approx(mean_s2 / T, rel=1e-6)


class TestScoreAtTau:
    def test_single_event_at_peak(self):
        prof = LightCurveProfile(np.array([0.5 + 0j]), eta=1.0)
        s = score_at_tau(np.array([0.0]), np.array([2.0]), F0, prof, 0.0)
        # nu(0) = 2, so w (nu - 1) = 2
        assert s == pytest.approx(2.0)

    def test_phase_offset(self):
        prof = LightCurveProfile(np.array([0.5 + 0j]), eta=1.0)
        s = score_at_tau(np.array([0.0]), np.array([1.0]), F0, prof, 0.5)
        assert s == pytest.approx(-1.0)

    def test_empty(self):
        prof = LightCurveProfile(np.array([0.5 + 0j]), eta=1.0)
        assert score_at_tau(np.array([]), np.array([]), F0, prof, 0.1) == 0.0


class TestEstimateTheta:
    def test_recovers_simulated_fraction(self):
        prof = LightCurveProfile(np.array([0.5 + 0j]), eta=1.0)
        model = RateModel(mu=500.0, theta=0.3, profile=prof,
                          phase=PhaseModel(f=5.0), T=100.0)
        ev = simulate(model, DENS, seed=42)
        theta_hat = estimate_theta(ev, DENS)
        assert theta_hat == pytest.approx(0.3, abs=0.03)

    def test_all_background_hits_lower_boundary(self):
        prof = LightCurveProfile(np.array([0.5 + 0j]), eta=0.0)
        model = RateModel(mu=200.0, theta=0.0, profile=prof,
                          phase=F0, T=50.0)
        ev = simulate(model, DENS, seed=7)
        theta_hat = estimate_theta(ev, DENS)
        assert theta_hat < 0.02

    def test_all_source_hits_upper_boundary(self):
        prof = LightCurveProfile(np.array([0.5 + 0j]), eta=0.0)
        model = RateModel(mu=200.0, theta=1.0, profile=prof,
                          phase=F0, T=50.0)
        ev = simulate(model, DENS, seed=8)
        theta_hat = estimate_theta(ev, DENS)
        assert theta_hat > 0.95

    def test_identical_densities_rejected(self):
        e = np.array([1.0, 2.0])
        phi = np.array([1.0, 2.0])
        flat_pair = GEOM.density_pair()
        fs = flat_pair.pdf_source(e, phi)
        # craft z where the two densities agree exactly: impossible with this
        # geometry, so use equal arrays through a stub pair instead
        class Stub:
            def pdf_source(self, e, phi):
                return np.ones_like(np.asarray(e, float))
            pdf_background = pdf_source
        with pytest.raises(ValueError, match="identifiable"):
            estimate_theta((e, phi), Stub())
        assert fs is not None

    def test_outside_support_rejected(self):
        class Stub:
            def pdf_source(self, e, phi):
                return np.zeros_like(np.asarray(e, float))
            pdf_background = pdf_source
        with pytest.raises(ValueError, match="support"):
            estimate_theta((np.array([1.0]), np.array([1.0])), Stub())

    def test_interior_optimum_matches_dense_grid(self):
        rng = np.random.default_rng(9)
        n = 2000
        is_src = rng.uniform(size=n) < 0.4
        e = np.empty(n)
        phi = np.empty(n)
        es, ps = DENS.sample_source(rng, int(is_src.sum()))
        eb, pb = DENS.sample_background(rng, int(n - is_src.sum()))
        e[is_src], phi[is_src] = es, ps
        e[~is_src], phi[~is_src] = eb, pb
        theta_hat = estimate_theta((e, phi), DENS)
        fs = DENS.pdf_source(e, phi)
        fb = DENS.pdf_background(e, phi)
        grid = np.linspace(1e-6, 1 - 1e-6, 20001)
        ll = np.sum(np.log((1 - grid[:, None]) * fb + grid[:, None] * fs), axis=1)
        assert abs(theta_hat - grid[np.argmax(ll)]) < 1e-4


def _partial_fraction_sf(q, lam):
    """Survival function of sum lam_i X_i, X_i iid chi2(2), distinct lam_i."""
    lam = np.asarray(lam, dtype=float)
    total = 0.0
    for i, li in enumerate(lam):
        others = np.delete(lam, i)
        coeff = li ** (lam.size - 1) / np.prod(li - others)
        total += coeff * np.exp(-q / (2 * li))
    return total


class TestPValue:
    def test_single_harmonic_closed_form(self):
        tpl = HarmonicTemplate([1.0])
        q, sw2, T = 3.7, 2.0, 10.0
        assert p_value(q, sw2, tpl, T) == pytest.approx(
            np.exp(-q * T / (2 * sw2)), rel=1e-12)

    def test_equal_coefficients_closed_form(self):
        tpl = HarmonicTemplate([1.0, 1.0, 1.0])
        q, sw2, T = 1.3, 1.7, 5.0
        assert p_value(q, sw2, tpl, T) == pytest.approx(
            chi2.sf(q * T / sw2, df=6), rel=1e-10)

    def test_imhof_matches_partial_fractions(self):
        for lam in ([3.0, 1.0], [5.0, 2.0, 1.0], [10.0, 4.0, 2.0, 1.0]):
            for q in (0.5, 2.0, 10.0, 40.0):
                assert weighted_chi2_sf(q, lam) == pytest.approx(
                    _partial_fraction_sf(q, lam), abs=1e-8)

    def test_zero_coefficients_dropped(self):
        assert weighted_chi2_sf(3.0, [2.0, 0.0, 0.0]) == pytest.approx(
            np.exp(-3.0 / 4.0), rel=1e-12)

    def test_nonpositive_statistic(self):
        assert weighted_chi2_sf(0.0, [1.0, 2.0]) == 1.0
        assert weighted_chi2_sf(-1.0, [1.0]) == 1.0

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            weighted_chi2_sf(1.0, [0.0, 0.0])

    def test_monotone_in_q(self):
        lam = [4.0, 2.0, 1.0]
        qs = np.linspace(0.1, 60, 40)
        ps = [weighted_chi2_sf(q, lam) for q in qs]
        assert np.all(np.diff(ps) < 0)

    def test_weight_rescaling_leaves_p_invariant(self):
        rng = np.random.default_rng(5)
        t = rng.uniform(0, 50, 500)
        w = rng.uniform(0, 1, 500)
        tpl = HarmonicTemplate([1.0, 0.4, 0.2])
        T, c = 50.0, 3.7

        def p_of(weights):
            an = fourier_coefficients(t, weights, F0, 3)
            qt = qt_statistic(an, tpl, T)
            sw2 = float(np.sum(weights**2))
            return p_value(qt, sw2, tpl, T)

        assert p_of(c * w) == pytest.approx(p_of(w), rel=1e-10)


class TestDetect:
    def _events(self, theta=0.5, seed=6, T=100.0):
        prof = LightCurveProfile(np.array([0.5 + 0j]), eta=1.0)
        model = RateModel(mu=200.0, theta=theta, profile=prof,
                          phase=PhaseModel(f=5.0), T=T)
        return simulate(model, DENS, seed=seed)

    def test_strong_source_detected(self):
        ev = self._events()
        res = detect(ev, unit_weight(), PhaseModel(f=5.0),
                     HarmonicTemplate([1.0]), theta=0.5, T=100.0)
        assert isinstance(res, DetectionResult)
        assert res.p_value < 1e-10
        assert res.n_events == len(ev)

    def test_optimal_weights_from_mle(self):
        ev = self._events()
        res = detect(ev, None, PhaseModel(f=5.0), HarmonicTemplate([1.0]),
                     densities=DENS, T=100.0)
        assert 0.3 < res.theta_used < 0.7
        assert res.p_value < 1e-10

    def test_null_not_detected(self):
        ev = self._events(theta=0.0, seed=13)
        res = detect(ev, unit_weight(), PhaseModel(f=5.0),
                     HarmonicTemplate([1.0]), theta=0.0, T=100.0)
        assert res.p_value > 1e-4

    def test_missing_duration_rejected(self):
        ev = self._events()
        with pytest.raises(ValueError):
            detect(ev, unit_weight(), PhaseModel(f=5.0),
                   HarmonicTemplate([1.0]), theta=0.5, T=None)

    def test_all_zero_weights_rejected(self):
        from photonperiod.auxmodel import constant_weight
        ev = self._events()
        with pytest.raises(ValueError, match="weighted"):
            detect(ev, constant_weight(0.0), PhaseModel(f=5.0),
                   HarmonicTemplate([1.0]), theta=0.5, T=100.0)

    def test_short_observation_warns(self):
        ev = self._events(T=10.0)
        with pytest.warns(UserWarning, match="100"):
            detect(ev, unit_weight(), PhaseModel(f=5.0),
                   HarmonicTemplate([1.0]), theta=0.5, T=10.0)

    def test_json_serialization(self):
        import json
        ev = self._events()
        res = detect(ev, unit_weight(), PhaseModel(f=5.0),
                     HarmonicTemplate([1.0]), theta=0.5, T=100.0)
        doc = json.loads(res.to_json())
        assert doc["qt"] == res.qt
        assert doc["n_events"] == len(ev)
