"""Command-line interface: ``ssqlab <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import complex_gaussian as cg
from .config import RunConfig, load_config
from .detection import detect, rejection_rate_experiment
from .errors import (ConfigError, DataError, DegenerateCovarianceError, DomainError,
                     GridMismatchError, NumericalError)
from .experiments import (ExperimentConfig, clt_schedule, covariance_decay_experiment,
                          qq_experiment, replicate_rng)
from .signal_io import read_signal, write_matrix, write_table
from .sst import SignalGrid, SSTParams, synchrosqueeze
from .window import gaussian_window, m_truncated_window

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
FULL_SCALE_BOOTSTRAP = 5000


def _seed(text):
    try:
        s = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= s < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return s


def _positive_int(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return n


def build_parser():
    # SUPPRESS lets the flags appear before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=argparse.SUPPRESS, help="master seed (u64)")
    common.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS,
                        help="numba worker threads (default: $SSQLAB_THREADS)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    ap = argparse.ArgumentParser(prog="ssqlab", parents=[common],
                                 description="Synchrosqueezing of noisy signals: transforms, "
                                             "Monte Carlo experiments and detection.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", parents=[common], help="STFT, reassignment and SST of a signal file")
    p.add_argument("input", nargs="?", help="signal file (text or SSQ1 binary)")
    p.add_argument("--alpha", type=float, default=None)

    p = sub.add_parser("qq", parents=[common], help="normality summaries of S over (alpha, xi)")
    p.add_argument("--realizations", type=_positive_int, default=None)

    p = sub.add_parser("clt", parents=[common], help="summaries under the CLT parameter schedule")
    p.add_argument("--realizations", type=_positive_int, default=None)

    p = sub.add_parser("covdecay", parents=[common], help="correlation of V and Y across frequency gaps")
    p.add_argument("--realizations", type=_positive_int, default=None)

    p = sub.add_parser("detect", parents=[common], help="bootstrap detection test on one signal")
    p.add_argument("input", nargs="?", help="signal file; synthesised when omitted")
    p.add_argument("--amplitude", type=float, default=0.0,
                   help="tone amplitude of the synthesised signal")
    p.add_argument("--full-scale", action="store_true",
                   help=f"use {FULL_SCALE_BOOTSTRAP} bootstrap resamples")

    p = sub.add_parser("rejection-curve", parents=[common], help="rejection rate against amplitude")
    p.add_argument("--trials", type=_positive_int, default=None)
    p.add_argument("--full-scale", action="store_true",
                   help=f"use {FULL_SCALE_BOOTSTRAP} bootstrap resamples")

    p = sub.add_parser("quotient", parents=[common], help="quotient density on a grid")
    p.add_argument("--mass", action="store_true", help="also report the integrated mass")

    sub.add_parser("selftest", parents=[common], help="quick numerical sanity checks")
    return ap


def _set_threads(n):
    if n is None:
        env = os.environ.get("SSQLAB_THREADS")
        if not env:
            return
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SSQLAB_THREADS={env!r} is not an integer") from None
    import numba

    if not 1 <= n <= numba.config.NUMBA_NUM_THREADS:
        raise ConfigError(f"threads must lie in [1, {numba.config.NUMBA_NUM_THREADS}]")
    numba.set_num_threads(n)


def _run_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg.with_seed(args.seed)


def _out_dir(args, cfg):
    out = args.out or cfg.out or "."
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _experiment(cfg, args):
    e = cfg.experiment
    if getattr(args, "realizations", None):
        e = dataclasses.replace(e, n_realizations=args.realizations)
    return e


def cmd_transform(args, cfg, out):
    path = args.input or cfg.input
    if not path:
        raise ConfigError("transform needs an input signal")
    sig = read_signal(path)
    tc = cfg.transform
    alpha = tc.alpha if args.alpha is None else args.alpha
    n = sig.n
    d_eta = tc.delta_eta if tc.delta_eta is not None else 1.0 / (n * sig.dt)
    eta_max = tc.eta_max if tc.eta_max is not None else 0.5 / sig.dt
    n_eta = max(1, int(math.floor(eta_max / d_eta + 1e-9)))
    xi_step = tc.xi_step if tc.xi_step is not None else d_eta
    xi_max = tc.xi_max if tc.xi_max is not None else n_eta * d_eta
    xi = tc.xi_min + xi_step * np.arange(int(math.floor((xi_max - tc.xi_min) / xi_step + 1e-9)) + 1)
    if tc.window_m is None:
        window = gaussian_window(sig.dt, tc.half_width)
    else:
        window = m_truncated_window(tc.window_m, (sig.dt, tc.half_width))
    params = SSTParams(alpha, d_eta, n_eta, xi)
    times = sig.times[::tc.time_step]
    # FFT length: a multiple of n (so l / (n dt) are bins) covering the window
    k = int(math.floor(window.half_width / sig.dt + 1e-9))
    n_fft = n * max(1, -(-(2 * k + 1) // n))
    v, _, om, s = synchrosqueeze(sig, params, times, window, n_fft=n_fft)
    write_matrix(os.path.join(out, "stft_abs.csv"), v.times, v.freqs, np.abs(v.values))
    omr = np.where(om.invalid_mask, np.nan, om.values.real)
    write_matrix(os.path.join(out, "reassignment.csv"), om.times, om.freqs, omr)
    write_matrix(os.path.join(out, "sst_abs.csv"), s.times, s.freqs, np.abs(s.values))
    print(f"wrote stft_abs.csv, reassignment.csv, sst_abs.csv ({times.size} times) to {out}")


_SUMMARY_HEADER = ["alpha", "xi", "n", "mean_re", "mean_im", "mean_z", "variance",
                   "pseudo_variance_re", "pseudo_variance_im", "qq_corr", "ks_pvalue", "fit_stat"]


def _summary_rows(results):
    return [[a, x, s.n, s.mean.real, s.mean.imag, s.mean_z, s.variance, s.pseudo_variance.real,
             s.pseudo_variance.imag, s.qq_corr, s.ks_pvalue, s.fit_stat] for a, x, s in results]


def _qq_points(results):
    rows = []
    for a, x, s in results:
        for t, o in zip(*s.normal_qq):
            rows.append([a, x, t, o])
    return rows


def cmd_qq(args, cfg, out):
    e = _experiment(cfg, args)
    res = qq_experiment(e)
    write_table(os.path.join(out, "qq_summary.csv"), _SUMMARY_HEADER, _summary_rows(res))
    write_table(os.path.join(out, "qq_points.csv"), ["alpha", "xi", "theoretical", "ordered"],
                _qq_points(res))
    for a, x, s in res:
        print(f"alpha={a:g} xi={x:g} qq_corr={s.qq_corr:.4f} ks_p={s.ks_pvalue:.3f} "
              f"|mean|/se={s.mean_z:.2f}")


def cmd_clt(args, cfg, out):
    e = dataclasses.replace(_experiment(cfg, args), use_clt_schedule=True)
    d_eta, m, alpha = clt_schedule(e.n_samples, e.beta)
    write_table(os.path.join(out, "clt_schedule.csv"),
                ["n", "beta", "delta_eta", "M", "alpha", "grid_delta_eta"],
                [[e.n_samples, e.beta, d_eta, m, alpha, e.delta_eta]])
    res = qq_experiment(e)
    write_table(os.path.join(out, "clt_summary.csv"), _SUMMARY_HEADER, _summary_rows(res))
    print(f"n={e.n_samples} beta={e.beta:g}: delta_eta={d_eta:.6g} M={m:.6g} alpha={alpha:.6g}")


def cmd_covdecay(args, cfg, out):
    e = _experiment(cfg, args)
    cd = cfg.covdecay
    rows = covariance_decay_experiment(e, [(cd.eta, cd.eta + g) for g in cd.gaps], cd.alpha)
    keys = ["eta", "eta2", "gap", "xi", "corr_v", "corr_y", "se", "n"]
    write_table(os.path.join(out, "covdecay.csv"), keys, [[r[k] for k in keys] for r in rows])
    for r in rows:
        print(f"gap={r['gap']:g} |corr V|={r['corr_v']:.4f} |corr Y|={r['corr_y']:.4f} se={r['se']:.4f}")


def _detection_cfg(cfg, args):
    d = cfg.detection
    if getattr(args, "full_scale", False):
        d = dataclasses.replace(d, n_bootstrap=FULL_SCALE_BOOTSTRAP)
    return d


def cmd_detect(args, cfg, out):
    d = _detection_cfg(cfg, args)
    path = args.input or cfg.input
    if path:
        sig = read_signal(path)
    else:
        rc = cfg.rejection
        dt = 1.0 / rc.sample_rate
        t = np.arange(d.segment_len) * dt
        sd = 1.0 if rc.noise_scale == "sample" else 1.0 / math.sqrt(dt)
        noise = replicate_rng(d.seed, 0, stream=3).standard_normal(d.segment_len) * sd
        sig = SignalGrid(args.amplitude * np.exp(2j * np.pi * rc.xi0 * t) + noise, dt)
    rep = detect(sig, d)
    doc = rep.to_dict()
    doc["freq_grid"] = [float(f) for f in d.freq_grid]
    doc["n_bootstrap"] = d.n_bootstrap
    _write_json(os.path.join(out, "detection.json"), doc)
    for s in rep.per_segment:
        state = "skipped" if s.skipped else ("reject" if s.reject else "accept")
        print(f"segment {s.start}: max={s.observed_max:.4g} T={s.threshold:.4g} {state}")
    print("overall:", "reject" if rep.overall_reject else "accept")


def cmd_rejection(args, cfg, out):
    d = _detection_cfg(cfg, args)
    rc = cfg.rejection
    n = args.trials or rc.n_trials

    def progress(row):
        print(f"A={row['amplitude']:g} rate={row['rate']:.4f} ({row['rejections']}/{row['trials']})",
              flush=True)

    rows = rejection_rate_experiment(rc.amplitudes, n, d, rc.sample_rate, rc.xi0, progress=progress,
                                     noise_scale=rc.noise_scale)
    keys = ["amplitude", "rate", "rejections", "trials", "skipped"]
    write_table(os.path.join(out, "rejection_curve.csv"), keys, [[r[k] for k in keys] for r in rows])


def cmd_quotient(args, cfg, out):
    qc = cfg.quotient
    mu, gam, c = qc.arrays()
    g = cg.ComplexGaussian2(mu, gam, c)
    re, im = qc.grid()
    q = re[None, :] + 1j * im[:, None]
    f = cg.quotient_density(g, q)
    rows = [[float(q_.real), float(q_.imag), float(v)] for q_, v in zip(q.ravel(), f.ravel())]
    write_table(os.path.join(out, "quotient_density.csv"), ["re_q", "im_q", "density"], rows)
    info = {"lower_bound": cg.quotient_lower_bound(g), "is_proper": g.is_proper}
    if not np.any(mu):
        info["mean"] = [float(gam[1, 0].real / gam[0, 0].real), float(gam[1, 0].imag / gam[0, 0].real)]
    if args.mass:
        total, tail = cg.quotient_total_mass(g)
        info.update(mass=total, tail=tail)
    if qc.n_mc:
        z = cg.sample_quotient(g, replicate_rng(cfg.seed or 0, 0, stream=4), qc.n_mc)
        write_table(os.path.join(out, "quotient_samples.csv"), ["re_q", "im_q"],
                    [[float(v.real), float(v.imag)] for v in z])
    _write_json(os.path.join(out, "quotient_info.json"), info)
    print(json.dumps(info, sort_keys=True))


def cmd_selftest(args, cfg, out):
    from .special import hermite_neg
    from .window import gaussian_noise_gamma, noise_second_order

    checks = []
    checks.append(("H_-4(0) = 1/12", abs(hermite_neg(-4.0, 0.0) - 1.0 / 12.0) < 1e-10))
    w = gaussian_window()
    nq = noise_second_order(w, 1.3, method="quad")
    checks.append(("noise covariance closed form",
                   float(np.max(np.abs(nq.gamma_eta - gaussian_noise_gamma()))) < 1e-10))
    dt = 1.0 / 142.02
    t = (np.arange(4096) - 2048) * dt
    sig = SignalGrid(np.exp(2j * np.pi * 10.0 * t), dt, t[0])
    params = SSTParams(0.4, 1.0 / (4096 * dt), 400, np.array([10.0]))
    v, _, om, _ = synchrosqueeze(sig, params, np.array([0.0]), w, n_fft=4096)
    mask = np.abs(v.values) >= 1e-6 * np.abs(v.values).max()
    checks.append(("noiseless reassignment", float(np.max(np.abs(om.values[mask] - 10.0))) <= 1e-6))
    g = cg.ComplexGaussian2(np.zeros(2), [[1.0, 0.2 + 0.1j], [0.2 - 0.1j, 0.8]],
                            [[0.3, 0.1j], [0.1j, 0.2]])
    checks.append(("quotient mass", abs(cg.quotient_total_mass(g)[0] - 1.0) < 1e-3))
    write_table(os.path.join(out, "selftest.csv"), ["check", "passed"], [[n, ok] for n, ok in checks])
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if not all(ok for _, ok in checks):
        raise NumericalError("self test failed")


_COMMANDS = {
    "transform": cmd_transform,
    "qq": cmd_qq,
    "clt": cmd_clt,
    "covdecay": cmd_covdecay,
    "detect": cmd_detect,
    "rejection-curve": cmd_rejection,
    "quotient": cmd_quotient,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    for k in ("seed", "threads", "config", "out"):
        if not hasattr(args, k):
            setattr(args, k, None)
    try:
        _set_threads(args.threads)
        cfg = _run_config(args)
        out = _out_dir(args, cfg)
        _COMMANDS[args.command](args, cfg, out)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, GridMismatchError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, DegenerateCovarianceError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
