"""``twpa-studio`` command-line front end.

Every subcommand is a pure function of (config, seed) and writes CSV files
into ``--out``. Exit codes: 0 success, 2 usage, 3 configuration error,
4 numerical failure, 5 bad input data.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .cme import (
    bandwidth_above,
    calibrate_pump_current,
    compression_curve,
    degenerate_quadrature_gains,
    gain_spectrum,
    oscillation_check,
    write_compression_csv,
    write_gain_csv,
)
from .config import PRESETS, ExperimentConfig, load_config
from .dispersion import bare_stub_resonance, bloch_dispersion, find_bandgaps, write_dispersion_csv
from .errors import (
    ConfigError,
    DomainError,
    GridMismatchError,
    NumericalError,
    TraceFormatError,
)
from .measurement import (
    TraceConfig,
    added_noise,
    calibrate,
    ingest_trace,
    iq_quadrature_noise,
    read_gain_csv,
    simulate_noise_measurement,
    squeezing_analysis,
    twpa_off,
    write_trace,
)
from .noise import quantum_limit

log = logging.getLogger("twpa_studio")

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_DATA = 5

TRACE_FILES = {
    TraceConfig.HOT: "trace_hot.csv",
    TraceConfig.COLD: "trace_cold.csv",
    TraceConfig.TWPA_ON: "trace_twpa_on.csv",
    TraceConfig.TWPA_OFF: "trace_twpa_off.csv",
}


def _config(args) -> ExperimentConfig:
    return load_config(args.config, args.preset)


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out if args.out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args, cfg: ExperimentConfig, command: str) -> int:
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is None:
        raise ConfigError(f"seed: required for the stochastic command '{command}' "
                          "(set 'seed' in the config or pass --seed)")
    return seed


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", newline="\n")


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def _curve(cfg: ExperimentConfig):
    return bloch_dispersion(cfg.dispersion_grid.grid(), cfg.device, cfg.operating_point.I_DC)


def cmd_dispersion(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    curve = _curve(cfg)
    write_dispersion_csv(curve, out / "dispersion.csv")
    gaps = find_bandgaps(curve)
    _write_rows(out / "bandgaps.csv", ["f_low_Hz", "f_high_Hz", "f_center_Hz"],
                [(lo, hi, 0.5 * (lo + hi)) for lo, hi in gaps])
    if gaps:
        for lo, hi in gaps:
            print(f"gap: {lo / 1e9:.4f} .. {hi / 1e9:.4f} GHz (center {0.5 * (lo + hi) / 1e9:.4f} GHz)")
    else:
        print("no gaps")
    print(f"stub quarter-wave resonance: {bare_stub_resonance(cfg.device) / 1e9:.4f} GHz")
    return EXIT_OK


def _gain_summary(cfg: ExperimentConfig, spec) -> dict:
    g_db = spec.gain_db
    j = int(np.argmax(g_db))
    state, margin = oscillation_check(float(g_db[j]), cfg.reflect_in_db, cfg.reflect_out_db)
    return {
        "peak_gain_dB": float(g_db[j]),
        "peak_freq_Hz": float(spec.freq_grid[j]),
        "bandwidth_above_17dB_Hz": bandwidth_above(spec.freq_grid, g_db, 17.0),
        "bandwidth_above_12dB_Hz": bandwidth_above(spec.freq_grid, g_db, 12.0),
        "oscillation": state,
        "oscillation_margin_dB": margin,
    }


def cmd_gain(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    curve = _curve(cfg)
    op = cfg.operating_point
    grid = cfg.gain_grid.grid()
    if args.calibrate_pump is not None:
        I_p = calibrate_pump_current(op, curve, cfg.device, grid, args.calibrate_pump)
        op = op.replace(I_pump=I_p)
        print(f"calibrated I_pump = {I_p!r} A")
    spec = gain_spectrum(op, curve, cfg.device, grid)
    write_gain_csv(spec, out / "gain.csv")
    s = _gain_summary(cfg, spec)
    _write_json(out / "gain_summary.json", {**s, "I_pump_A": op.I_pump})
    print(f"peak gain {s['peak_gain_dB']:.2f} dB at {s['peak_freq_Hz'] / 1e9:.3f} GHz; "
          f">=17 dB over {s['bandwidth_above_17dB_Hz'] / 1e9:.2f} GHz; "
          f">=12 dB over {s['bandwidth_above_12dB_Hz'] / 1e9:.2f} GHz; {s['oscillation']}")
    return EXIT_OK


def cmd_compression(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    if cfg.operating_point.f_signal is None:
        raise ConfigError("operating_point.f_signal_hz: required for compression")
    curve = _curve(cfg)
    comp = compression_curve(cfg.operating_point, curve, cfg.device, cfg.compression_dbm.grid())
    write_compression_csv(comp, out / "compression.csv")
    print(f"small-signal gain {comp.small_signal_gain_db:.2f} dB; P_1dB = {comp.p1db_dbm:.2f} dBm")
    return EXIT_OK


def _band_stats(gain, A, QL, min_gain_db: float) -> dict:
    band = 10 * np.log10(gain) >= min_gain_db
    if not band.any():
        raise DomainError(f"no frequency has gain >= {min_gain_db} dB")
    dev = A[band] - QL[band]
    return {
        "band_min_gain_dB": min_gain_db,
        "band_points": int(band.sum()),
        "mean_added_noise_quanta": float(A[band].mean()),
        "mean_abs_deviation_quanta": float(np.abs(dev).mean()),
        "max_abs_deviation_quanta": float(np.abs(dev).max()),
        "mean_deviation_quanta": float(dev.mean()),
    }


def cmd_noise(args) -> int:
    cfg = _config(args)
    seed = _seed(args, cfg, "noise")
    out = _out_dir(args, cfg)
    curve = _curve(cfg)
    nu = cfg.noise_grid.grid()
    spec = gain_spectrum(cfg.operating_point, curve, cfg.device, nu)
    spec.gain[:] = np.maximum(spec.gain, 1.0)
    nr = cfg.noise_run
    run = simulate_noise_measurement(
        nu, spec, cfg.chain, seed, t_hot=nr.t_hot_min, t_cold=nr.t_cold_min,
        t_off=nr.t_off_min, t_on=nr.t_on_min, reference=nr.reference, scale=nr.scale,
        radiometer=nr.radiometer,
    )
    for conf, name in TRACE_FILES.items():
        write_trace(run.traces[conf], out / name)
    write_gain_csv(spec, out / "gain.csv")
    _write_rows(out / "added_noise.csv",
                ["f_Hz", "gain_dB", "added_noise_quanta", "quantum_limit_quanta"],
                zip(nu, spec.gain_db, run.added, run.quantum_limit))
    stats = _band_stats(spec.gain, run.added, run.quantum_limit, nr.band_min_gain_db)
    _write_json(out / "noise_summary.json", {**stats, "seed": seed, "reference": nr.reference})
    print(f"band (G >= {nr.band_min_gain_db:g} dB, {stats['band_points']} points): "
          f"mean |A - QL| = {stats['mean_abs_deviation_quanta']:.4f}, "
          f"max |A - QL| = {stats['max_abs_deviation_quanta']:.4f} quanta")
    return EXIT_OK


def cmd_squeeze(args) -> int:
    cfg = _config(args)
    sq = cfg.squeeze
    seed = _seed(args, cfg, "squeeze") if sq.radiometer else None
    out = _out_dir(args, cfg)
    curve = _curve(cfg)
    att = np.asarray(sq.attenuation_db, dtype=float)
    currents = sq.max_pump_current * 10 ** (-att / 20)
    G_a = np.empty(att.size)
    G_sq = np.empty(att.size)
    for j, I_p in enumerate(currents):
        op = cfg.operating_point.replace(f_pump=sq.f_pump, I_pump=float(I_p))
        q = degenerate_quadrature_gains(op, curve, cfg.device, n_phases=sq.n_phases,
                                        lossless=sq.lossless, relative_to_pump_off=True)
        G_a[j], G_sq[j] = q.G_a, q.G_sq
    params = cfg.chain.params
    amp = np.empty(att.size)
    sqn = np.empty(att.size)
    off = np.empty(att.size)
    for j in range(att.size):
        p = params.replace(G_a=G_a[j], G_sq=G_sq[j])
        amp[j], sqn[j] = iq_quadrature_noise(p, lo_phase=0.0)
        off[j] = iq_quadrature_noise(twpa_off(p), lo_phase=0.0)[0]
    if sq.radiometer:
        rng = np.random.default_rng(seed)
        sigma = cfg.chain.radiometer_sigma
        amp, sqn, off = (x * (1 + sigma * rng.standard_normal(x.shape)) for x in (amp, sqn, off))
    res = squeezing_analysis(G_a, amp, sqn, off, params, assumed_N_pa=sq.assumed_n_pa,
                             orientation=sq.orientation, unphysical="nan")
    lost = int(np.isnan(res.squeezing_dB).sum())
    if lost:
        log.warning("%d sweep point(s) fell below the extraction floor and are reported as nan",
                    lost)
    _write_rows(out / "squeeze.csv",
                ["pump_attenuation_dB", "I_pump_A", "G_a_dB", "G_sq_dB", "N_sys_quanta",
                 "squeezing_dB"],
                zip(att, currents, 10 * np.log10(G_a), 10 * np.log10(G_sq), res.N_sys,
                    res.squeezing_dB))
    summary = {
        "fit_N_HEMT_quanta": res.N_HEMT,
        "fit_N_a_quanta": res.N_a,
        "fit_residual_quanta": res.residual,
        "max_squeezing_dB": float(np.nanmax(res.squeezing_dB)) if lost < att.size else None,
        "max_G_a_dB": float(np.max(10 * np.log10(G_a))),
    }
    _write_json(out / "squeeze_summary.json", summary)
    best = summary["max_squeezing_dB"]
    print(f"max squeezing {'nan' if best is None else format(best, '.2f')} dB at G_a up to "
          f"{summary['max_G_a_dB']:.2f} dB; fit N_HEMT = {res.N_HEMT:.4g}, N_a = {res.N_a:.4g}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    paths = {TraceConfig.HOT: args.hot, TraceConfig.COLD: args.cold,
             TraceConfig.TWPA_ON: args.on, TraceConfig.TWPA_OFF: args.off}
    traces = {}
    for conf, path in paths.items():
        t = ingest_trace(path)
        if t.config is not conf:
            raise TraceFormatError(f"{path}: header says config={t.config.value}, "
                                   f"expected {conf.value}")
        traces[conf] = t
    ref_path = paths[TraceConfig.HOT]
    ref = traces[TraceConfig.HOT].freq_grid
    for conf, t in traces.items():
        if not np.array_equal(t.freq_grid, ref):
            raise GridMismatchError(f"frequency grids differ between {ref_path} and {paths[conf]}")
    gain = read_gain_csv(args.gain)
    if not np.array_equal(gain.freq_grid, ref):
        raise GridMismatchError(f"frequency grids differ between {ref_path} and {args.gain}")
    G = np.maximum(gain.gain, 1.0)
    ch, scale = cfg.chain, cfg.noise_run.scale
    cal_c = calibrate(traces[TraceConfig.HOT], traces[TraceConfig.COLD], ch.T_hot, ch.T_cold, scale)
    cal_o = calibrate(traces[TraceConfig.HOT], traces[TraceConfig.TWPA_OFF], ch.T_hot, ch.T_cold,
                      scale)
    on, off = traces[TraceConfig.TWPA_ON], traces[TraceConfig.TWPA_OFF]
    A_c = added_noise(on, off, cal_c, G)
    A_o = added_noise(on, off, cal_o, G)
    QL = quantum_limit(G)
    _write_rows(out / "calibrated_added_noise.csv",
                ["f_Hz", "gain_dB", "added_noise_quanta", "added_noise_offref_quanta",
                 "quantum_limit_quanta"],
                zip(ref, 10 * np.log10(G), A_c, A_o, QL))
    stats = _band_stats(G, A_c, QL, cfg.noise_run.band_min_gain_db)
    band = 10 * np.log10(G) >= cfg.noise_run.band_min_gain_db
    diff = A_c[band] - A_o[band]
    summary = {
        **stats,
        "reference_offset_quanta": float(diff.mean()),
        "reference_offset_spread_quanta": float(diff.max() - diff.min()),
    }
    _write_json(out / "calibration_summary.json", summary)
    print(f"mean added noise in band {stats['mean_added_noise_quanta']:.4f} quanta; "
          f"COLD vs OFF reference offset {summary['reference_offset_quanta']:+.4f} quanta")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config")
    common.add_argument("--preset", choices=sorted(PRESETS), help="bundled base config")
    common.add_argument("--seed", type=int, help="RNG seed for stochastic commands")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="twpa-studio",
                                     description="KI-TWPA simulation and noise analysis")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("dispersion", parents=[common], help="Bloch dispersion and bandgaps"
                   ).set_defaults(func=cmd_dispersion)
    p = sub.add_parser("gain", parents=[common], help="small-signal gain spectrum")
    p.add_argument("--calibrate-pump", type=float, metavar="GAIN_DB",
                   help="first solve for the pump current giving this peak gain")
    p.set_defaults(func=cmd_gain)
    sub.add_parser("compression", parents=[common], help="gain versus signal power, P_1dB"
                   ).set_defaults(func=cmd_compression)
    sub.add_parser("noise", parents=[common], help="synthetic y-factor added-noise run"
                   ).set_defaults(func=cmd_noise)
    sub.add_parser("squeeze", parents=[common], help="degenerate pump-attenuation sweep"
                   ).set_defaults(func=cmd_squeeze)
    p = sub.add_parser("calibrate", parents=[common], help="added noise from trace files")
    for name in ("hot", "cold", "on", "off", "gain"):
        p.add_argument(f"--{name}", type=Path, required=True)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceFormatError, GridMismatchError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, DomainError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
