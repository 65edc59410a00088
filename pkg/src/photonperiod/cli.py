"""Command-line frontend.

Subcommands: simulate, detect, scan, power, calibrate.  Machine-readable
output is JSON on stdout; diagnostics go to stderr.  Exit codes: 0 success,
1 runtime failure, 2 usage or config error.
"""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.stats import chi2, kstest

from . import auxmodel, detector, eventio, lightcurve, power, simulator
from .config import Config, ConfigError, load_config
from .scan import scan as run_scan

__all__ = ["main"]


def _err(msg):
    print(msg, file=sys.stderr)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="photonperiod",
        description="Event-weighted periodicity detection in photon arrival times",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, events=False, out=False):
        p.add_argument("--config", required=True, help="JSON config path")
        if events:
            p.add_argument("--events", required=True, help="event CSV path")
        if out:
            p.add_argument("--out", help="output file path")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--replicates", type=int, default=2000)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("simulate", help="write a synthetic event CSV")
    common(p, out=True)

    p = sub.add_parser("detect", help="run detection on an event file")
    common(p, events=True)

    p = sub.add_parser("scan", help="evaluate Q_T over a frequency grid")
    common(p, events=True, out=True)

    p = sub.add_parser("power", help="predicted SNR and template efficiency table")
    common(p, out=True)

    p = sub.add_parser("calibrate", help="null Monte Carlo calibration report")
    common(p)
    return parser


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    cfg = load_config(args.config)
    model = cfg.model()
    densities = cfg.densities()
    events = simulator.simulate(model, densities, tau=cfg.tau(), seed=args.seed)
    out = args.out or "events.csv"
    eventio.write_events(out, events, header_comment="seed=%d" % args.seed)
    print(json.dumps({
        "n_events": len(events),
        "mu0_T": model.mu0 * model.T,
        "theta": model.theta,
        "out": out,
    }))
    return 0


def _resolve_weights(cfg, events, file_weights):
    """Per-event weights plus the theta actually used, honoring the config."""
    kind = cfg.weight_kind()
    if kind == "precomputed":
        if file_weights is None:
            raise ConfigError("weight.kind",
                              "'precomputed' needs a weight column in the file")
        return np.asarray(file_weights, dtype=float), float("nan")
    theta = cfg.detect_theta()
    if kind in ("optimal", "optimal-no-spectrum") and theta is None:
        theta = detector.estimate_theta(events, cfg.densities())
        _err("theta MLE: %.6f" % theta)
    wf = cfg.weight(theta=theta)
    w = np.asarray(wf(events.energy, events.angle), dtype=float)
    return w, (theta if theta is not None else float("nan"))


def cmd_detect(args):
    cfg = load_config(args.config)
    phase = cfg.phase()
    template = cfg.template()
    model = cfg.model()
    events, file_weights = eventio.read_events(args.events)
    w, theta_used = _resolve_weights(cfg, events, file_weights)
    if not np.any(w > 0):
        raise ValueError("no weighted events")
    an = detector.fourier_coefficients(events, w, phase, template.m)
    qt = detector.qt_statistic(an, template, model.T)
    sum_w2 = float(np.sum(w * w))
    p = detector.p_value(qt, sum_w2, template, model.T)
    result = detector.DetectionResult(
        an_sq=np.abs(an) ** 2, qt=qt, sum_w2=sum_w2, p_value=p,
        theta_used=theta_used, n_events=len(events))
    print(result.to_json())
    return 0


def cmd_scan(args):
    cfg = load_config(args.config)
    template = cfg.template()
    model = cfg.model()
    spec = cfg.scan_spec(model.T)
    events, file_weights = eventio.read_events(args.events)
    w, _ = _resolve_weights(cfg, events, file_weights)
    result = run_scan(events, w, template, model.T, spec,
                      epoch=cfg.phase().epoch)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("f,fdot,qt,p_value\n")
            for f, fd, q, p in zip(result.f, result.fdot, result.qt, result.p):
                fh.write("%.17g,%.17g,%.17g,%.17g\n" % (f, fd, q, p))
    print(json.dumps(result.best))
    return 0


def cmd_power(args):
    cfg = load_config(args.config)
    model = cfg.model()
    template = cfg.template()
    source = model.profile
    kind = cfg.weight_kind()
    if kind == "unit":
        eff_w = 1.0
    else:
        wf = cfg.weight(theta=cfg.detect_theta() or model.theta)
        if wf is None:
            raise ConfigError("weight", "power prediction needs a concrete weight")
        moments = auxmodel.weight_moments(wf, model.theta, cfg.densities())
        eff_w = auxmodel.weight_efficiency(moments, model.theta)
    pred = power.predicted_snr(model.theta, model.T, model.mu0, eff_w,
                               template, source)
    print(pred.to_json())
    if args.out:
        opt = lightcurve.HarmonicTemplate.from_profile(source)
        with open(args.out, "w") as fh:
            fh.write("m,percent_efficiency\n")
            for m in range(1, 11):
                zm = lightcurve.HarmonicTemplate.z_test(m)
                eff = lightcurve.template_efficiency(zm, source)
                fh.write("%d,%.4f\n" % (m, 100.0 * eff))
        _err("optimal template: %s" % opt.to_json())
    return 0


def _null_model(cfg):
    model = cfg.model()
    return simulator.RateModel(
        mu=model.mu, theta=model.theta,
        profile=lightcurve.LightCurveProfile.constant(),
        phase=model.phase, T=model.T, sensitivity=model.sensitivity)


def _calibrate_chunk(doc, seed, start, stop, replicates):
    cfg = Config(doc)
    model = _null_model(cfg)
    densities = cfg.densities()
    phase = cfg.phase()
    template = cfg.template()
    theta = cfg.detect_theta() or model.theta
    wf = cfg.weight(theta=theta)
    if wf is None:
        raise ConfigError("weight", "calibrate needs a concrete weight kind")
    children = np.random.SeedSequence(seed).spawn(replicates)
    pvals, scaled, qts = [], [], []
    for i in range(start, stop):
        ev = simulator.simulate(model, densities, tau=0.0, seed=children[i])
        w = np.asarray(wf(ev.energy, ev.angle), dtype=float)
        sum_w2 = float(np.sum(w * w))
        an = detector.fourier_coefficients(ev, w, phase, template.m)
        qt = detector.qt_statistic(an, template, model.T)
        pvals.append(detector.p_value(qt, sum_w2, template, model.T))
        scaled.append(2.0 * np.abs(an) ** 2 / sum_w2)
        qts.append(qt)
    return pvals, scaled, qts


def cmd_calibrate(args):
    cfg = load_config(args.config)
    n = args.replicates
    threads = max(1, args.threads)
    bounds = np.linspace(0, n, threads + 1).astype(int)
    chunks = [(cfg.doc, args.seed, int(a), int(b), n)
              for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if threads == 1:
        parts = [_calibrate_chunk(*c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_calibrate_chunk, *zip(*chunks)))
    pvals = np.concatenate([p[0] for p in parts])
    scaled = np.vstack([np.asarray(p[1]) for p in parts])
    qts = np.concatenate([p[2] for p in parts])

    ks_p_uniform = kstest(pvals, "uniform").pvalue
    per_harmonic = []
    for k in range(scaled.shape[1]):
        ks = kstest(scaled[:, k], chi2(df=2).cdf)
        per_harmonic.append({
            "n": k + 1,
            "mean": float(np.mean(scaled[:, k])),
            "ks_p_chi2_2dof": float(ks.pvalue),
        })
    print(json.dumps({
        "replicates": n,
        "qt_mean": float(np.mean(qts)),
        "qt_var": float(np.var(qts, ddof=1)),
        "p_value_ks_uniform_p": float(ks_p_uniform),
        "per_harmonic": per_harmonic,
    }))
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "detect": cmd_detect,
        "scan": cmd_scan,
        "power": cmd_power,
        "calibrate": cmd_calibrate,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        _err("config error: %s" % exc)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        _err("error: %s" % exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
