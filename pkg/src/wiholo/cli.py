"""Command-line interface.

Subcommands mirror the pipeline stages: ``validate`` a config,
``simulate`` a scene into hologram CSVs, ``reconstruct`` holograms into
volumes/slices, ``analyze`` a volume into metrics, ``run-scenario`` for
the canned experiments, and ``waveform dump`` for raw envelope samples.
Staging through files is bit-equivalent to a fused scenario run with the
same seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, apply_override, emit_config, parse_config, parse_config_dict
from .forward import FrequencyBin
from .hologram import build_hologram
from .imaging import TaperSpec, normalize_image, reconstruct_stack
from .io_formats import (
    FormatError,
    read_hologram_csv,
    read_volume,
    write_curve_csv,
    write_hologram_csv,
    write_metrics_csv,
    write_slice_pgm,
    write_volume,
)
from .scenarios import (
    SCENARIO_BUILDERS,
    ScenarioError,
    _stack_from_volume,
    analyze_stack,
    get_scenario,
    run_scenario,
    subtract_hologram,
)
from .seeding import derive_seed
from .waveform import dsss_baseband, payload_bits

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml


def _out_dir(args) -> Path:
    if args.out is None:
        raise ConfigError("no output directory: pass --out or set WIHOLO_OUT")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(path: str, strict: bool = True) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, strict=strict)


def _cmd_validate(args) -> int:
    cfg = _load_config(args.config, strict=not args.lenient)
    ap = cfg.aperture
    print(
        f"OK: {len(cfg.scene.emitters)} emitter(s), {len(cfg.scene.scatterers)} scatterer(s), "
        f"aperture {ap.nx}x{ap.ny} at {ap.dx:.4g} m, seed {cfg.seed}"
    )
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    bins = (FrequencyBin(cfg.recon.bin_hz),)
    h_obj = build_hologram(
        cfg.scene, cfg.aperture, cfg.waveform, cfg.window, bins,
        snr_db=cfg.snr_db, seed=cfg.seed, threads=args.threads,
    )
    h_bg = build_hologram(
        cfg.scene.without_scatterers(), cfg.aperture, cfg.waveform, cfg.window, bins,
        snr_db=cfg.snr_db, seed=cfg.seed, threads=args.threads,
    )
    write_hologram_csv(h_obj, out / "hologram_object.csv")
    write_hologram_csv(h_bg, out / "hologram_background.csv")
    if args.dump_channels:
        from .forward import channel_response
        from .scene import s_order_positions

        lines = ["rank,re,im"]
        for rank, (_, pos) in enumerate(s_order_positions(cfg.aperture)):
            total = sum(
                e.power_scale * channel_response(cfg.scene, e.position, pos, bins[0]).total
                for e in cfg.scene.emitters
            )
            lines.append(f"{rank},{float(total.real)!r},{float(total.imag)!r}")
        (out / "channels.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'hologram_object.csv'} and background")
    return 0


def _cmd_reconstruct(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    rc = cfg.recon
    if not rc.z_slices:
        raise ConfigError("reconstruction.z_slices is empty; nothing to reconstruct")
    bin = FrequencyBin(rc.bin_hz)
    taper = TaperSpec(rc.taper)
    h_obj = read_hologram_csv(args.hologram)
    s_obj = reconstruct_stack(
        h_obj, rc.z_slices, bin, method=rc.method, taper=taper, grid=rc.grid, extend=rc.extend
    )
    write_volume(s_obj.to_volume(), out / "volume_object.raw")
    wrote = ["volume_object.raw"]
    if args.background:
        h_bg = read_hologram_csv(args.background)
        s_bg = reconstruct_stack(
            h_bg, rc.z_slices, bin, method=rc.method, taper=taper, grid=rc.grid, extend=rc.extend
        )
        write_volume(s_bg.to_volume(), out / "volume_background.raw")
        s_sct = reconstruct_stack(
            subtract_hologram(h_obj, h_bg), rc.z_slices, bin,
            method=rc.method, taper=taper, grid=rc.grid, extend=rc.extend,
        )
        write_volume(s_sct.to_volume(), out / "volume_scattered.raw")
        v_obj = read_volume(out / "volume_object.raw")
        v_bg = read_volume(out / "volume_background.raw")
        v_norm = normalize_image(v_obj, v_bg, epsilon=rc.epsilon)
        write_volume(v_norm, out / "volume_normalized.raw")
        v_norm = read_volume(out / "volume_normalized.raw")
        for k in range(v_norm.spec.nz):
            write_slice_pgm(
                v_norm.values[:, :, k],
                out / f"slice_norm_{k:02d}.pgm",
                meta={
                    "z": float(v_norm.spec.axis_z()[k]),
                    "x0": v_norm.spec.origin.x,
                    "y0": v_norm.spec.origin.y,
                    "dx": v_norm.spec.dx,
                    "dy": v_norm.spec.dy,
                },
            )
        wrote += ["volume_background.raw", "volume_normalized.raw", "slice PGMs"]
    print(f"wrote {', '.join(wrote)} in {out}")
    return 0


def _cmd_analyze(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    vol = read_volume(args.volume)
    stack = _stack_from_volume(vol)
    metrics, curve, report = analyze_stack(stack, cfg.analysis)
    write_curve_csv(curve, out / "curve.csv")
    write_metrics_csv(metrics, out / "metrics.csv")
    for z, m in zip(report.z_values, report.metric_values):
        print(f"z={z:.3f}  {cfg.analysis.focus_metric}={m:.6g}")
    print(f"focus argmax z = {report.argmax_z:.3f} m; crests: {int(metrics['n_crests'])}")
    return 0


def _cmd_run_scenario(args) -> int:
    scenario = get_scenario(args.name)
    if args.override:
        doc = _toml.loads(emit_config(scenario.config))
        for assignment in args.override:
            apply_override(doc, assignment)
        scenario = replace(scenario, config=parse_config_dict(doc))
    out = _out_dir(args)
    result = run_scenario(scenario, out, threads=args.threads)
    for check, ok, measured in result.check_results:
        print(f"{'PASS' if ok else 'FAIL'} {check.metric} = {measured!r}")
    print(f"artifacts in {result.out_dir}")
    return 0 if result.all_passed else 1


def _cmd_waveform_dump(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    spec = cfg.waveform
    bits = payload_bits(derive_seed(cfg.seed, "waveform-dump"), spec.n_bits)
    series = dsss_baseband(bits, spec)
    path = out / "waveform.csv"
    lines = ["t,re,im"]
    times = series.times()
    lines += [
        f"{float(t)!r},{float(s.real)!r},{float(s.imag)!r}"
        for t, s in zip(times, series.samples)
    ]
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(series)} samples to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wiholo",
        description="Passive Wi-Fi synthetic-aperture holographic imaging toolkit",
    )
    parser.add_argument("--version", action="version", version=f"wiholo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_out(p):
        p.add_argument(
            "--out", default=os.environ.get("WIHOLO_OUT"),
            help="output directory (default: $WIHOLO_OUT)",
        )

    p = sub.add_parser("validate", help="check a config file without running")
    p.add_argument("config")
    p.add_argument("--lenient", action="store_true", help="warn on unknown keys instead of failing")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("simulate", help="scene -> hologram CSVs (object + background)")
    p.add_argument("config")
    add_out(p)
    p.add_argument("--threads", type=int, default=1, help="worker threads (output-invariant)")
    p.add_argument("--dump-channels", action="store_true",
                   help="also write per-node carrier-bin channel responses as CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reconstruct", help="hologram CSV -> volume / slices")
    p.add_argument("config")
    p.add_argument("--hologram", required=True, help="object hologram CSV")
    p.add_argument("--background", default=None, help="background hologram CSV for normalization")
    add_out(p)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("analyze", help="volume -> metrics and crest curve")
    p.add_argument("config")
    p.add_argument("--volume", required=True, help="volume raw file (manifest alongside)")
    add_out(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("run-scenario", help="run a canned experiment end to end")
    p.add_argument("name", help=", ".join(sorted(SCENARIO_BUILDERS)))
    p.add_argument("--override", action="append", default=[],
                   help="config override key=value (repeatable)")
    add_out(p)
    p.add_argument("--threads", type=int, default=1, help="worker threads (output-invariant)")
    p.set_defaults(func=_cmd_run_scenario)

    p = sub.add_parser("waveform", help="waveform utilities")
    wsub = p.add_subparsers(dest="waveform_command", required=True)
    pd = wsub.add_parser("dump", help="emit envelope samples as CSV (t, re, im)")
    pd.add_argument("config")
    add_out(pd)
    pd.set_defaults(func=_cmd_waveform_dump)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())
