"""Command-line entry point for the identification pipeline.

One binary with subcommands mirroring the processing stages: synth, mix,
anc, filter, extract, verdict, bench. Exit codes: 0 success, 2 usage error,
1 runtime/pipeline error. Tunables resolve as CLI flag > config file >
built-in default.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .anc import LmsConfig, run_anc
from .cluster import verdict
from .errors import ConfigError, PipelineError
from .fir import (
    design_bandpass,
    design_highpass,
    design_lowpass,
    export_taps_csv,
    filter_zero_phase,
)
from .mfcc import ExtractionConfig, extract_dual_channel, extract_single_channel
from .signal_io import (
    AudioBuffer,
    NoiseSpec,
    corpus_seed,
    measure_snr_db,
    mix_at_snr,
    read_wav,
    synth_speaker,
    write_manifest,
    write_wav,
)


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable in one place, loadable from a JSON config file."""

    sample_rate_hz: int = 16000
    frame_len: int = 400
    frame_shift: int = 160
    fft_size: int = 512
    filters_single: int = 26
    filters_per_channel: int = 13
    num_coeffs: int = 12
    split_hz: float = 1000.0
    band_top_hz: float = 4000.0
    fir_taps: int = 101
    log_floor: float = 1e-12
    anc_taps: int = 31
    anc_mu: float = 0.005
    kmeans_k: int = 2
    kmeans_tol: float = 1e-9
    kmeans_max_iter: int = 100
    threshold: float = 1.0
    seed: int = 1234

    def validate(self) -> None:
        checks = [
            ("sample_rate_hz", self.sample_rate_hz > 0, "must be positive"),
            ("frame_shift", self.frame_shift > 0, "must be positive"),
            (
                "frame_len",
                self.frame_len >= self.frame_shift,
                "must be >= frame_shift",
            ),
            (
                "fft_size",
                self.fft_size >= 1 and self.fft_size & (self.fft_size - 1) == 0,
                "must be a power of two",
            ),
            (
                "fft_size",
                self.fft_size >= self.frame_len,
                "must be >= frame_len",
            ),
            ("filters_single", self.filters_single >= 1, "must be >= 1"),
            ("filters_per_channel", self.filters_per_channel >= 1, "must be >= 1"),
            (
                "num_coeffs",
                1 <= self.num_coeffs <= min(self.filters_single, self.filters_per_channel),
                "must be between 1 and the smallest filter count",
            ),
            ("split_hz", 0 < self.split_hz < self.band_top_hz, "must lie in (0, band_top_hz)"),
            (
                "band_top_hz",
                self.band_top_hz < self.sample_rate_hz / 2,
                f"must be below the Nyquist frequency ({self.sample_rate_hz / 2:g} Hz)",
            ),
            ("fir_taps", self.fir_taps % 2 == 1 and self.fir_taps >= 3, "must be odd and >= 3"),
            ("log_floor", self.log_floor > 0, "must be positive"),
            ("anc_taps", self.anc_taps >= 0, "must be >= 0"),
            ("anc_mu", self.anc_mu > 0, "must be positive"),
            ("kmeans_k", self.kmeans_k >= 1, "must be >= 1"),
            ("kmeans_tol", self.kmeans_tol > 0, "must be positive"),
            ("kmeans_max_iter", self.kmeans_max_iter >= 1, "must be >= 1"),
            ("threshold", self.threshold >= 0, "must be >= 0"),
        ]
        for name, ok, message in checks:
            if not ok:
                raise ConfigError(f"config field {name}: {message}")

    def extraction_config(self) -> ExtractionConfig:
        return ExtractionConfig(
            frame_len=self.frame_len,
            frame_shift=self.frame_shift,
            fft_size=self.fft_size,
            filters_single=self.filters_single,
            filters_per_channel=self.filters_per_channel,
            num_coeffs=self.num_coeffs,
            split_hz=self.split_hz,
            band_top_hz=self.band_top_hz,
            fir_taps=self.fir_taps,
            log_floor=self.log_floor,
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_config(path) -> PipelineConfig:
    """Load and validate a JSON config file; unknown fields are an error."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config field(s): {sorted(unknown)}")
    cfg = replace(PipelineConfig(), **data)
    cfg.validate()
    return cfg


def save_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def _effective_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    for f in fields(PipelineConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    if overrides:
        cfg = replace(cfg, **overrides)
        cfg.validate()
    return cfg


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _features_for(buffer, method, extraction, source_id):
    if method == "single":
        return {"single": extract_single_channel(buffer, extraction, source_id)}
    ch1, ch2 = extract_dual_channel(buffer, extraction, source_id)
    return {"ch1": ch1, "ch2": ch2}


def _write_feature_csv(fm, bank_meta: dict, csv_path: Path) -> None:
    header = "frame_index," + ",".join(f"c{i + 1}" for i in range(fm.rows.shape[1]))
    lines = [header]
    for i, row in enumerate(fm.rows):
        lines.append(f"{i}," + ",".join(repr(v) for v in row))
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    csv_path.with_suffix(".json").write_text(
        json.dumps(bank_meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_synth(args) -> int:
    cfg = _effective_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for p in range(args.profiles):
        for w in range(args.words):
            for r in range(args.replicates):
                seed = corpus_seed(args.seed if args.seed is not None else cfg.seed, p, w, r)
                buffer = synth_speaker(p, w, args.duration, seed, cfg.sample_rate_hz)
                name = f"p{p:02d}_w{w:02d}_r{r}.wav"
                write_wav(buffer, out_dir / name)
                entries.append(
                    {"profile_id": p, "word_id": w, "seed": seed, "path": name}
                )
    manifest = out_dir / "manifest.json"
    write_manifest(entries, manifest)
    print(f"wrote {len(entries)} files + {manifest}")
    return 0


def cmd_mix(args) -> int:
    cfg = _effective_config(args)
    clean = read_wav(args.infile)
    noise = read_wav(args.noise) if args.noise else None
    spec = NoiseSpec(
        "recorded" if noise is not None else "white-gaussian",
        args.snr_db,
        args.seed if args.seed is not None else cfg.seed,
        noise,
    )
    noisy, noise_only = mix_at_snr(clean, spec)
    clipped = write_wav(noisy, args.out)
    if args.noise_out:
        clipped += write_wav(noise_only, args.noise_out)
    achieved = measure_snr_db(clean, noisy)
    print(f"mixed at {achieved:.2f} dB SNR ({clipped} samples clipped on write)")
    return 0


def cmd_anc(args) -> int:
    cfg = _effective_config(args)
    primary = read_wav(args.primary)
    reference = read_wav(args.reference)
    taps = args.taps if args.taps is not None else cfg.anc_taps
    mu = args.mu if args.mu is not None else cfg.anc_mu
    result = run_anc(primary, reference, LmsConfig(taps, mu))
    clipped = write_wav(result.error_signal, args.out)
    if args.mse_csv:
        lines = ["window_index,mse"]
        lines += [f"{i},{v!r}" for i, v in enumerate(result.mse_trace)]
        Path(args.mse_csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {args.out} ({clipped} samples clipped)")
    return 0


def cmd_filter(args) -> int:
    cfg = _effective_config(args)
    buffer = read_wav(args.infile)
    taps = args.taps if args.taps is not None else cfg.fir_taps
    if args.kind == "lp":
        kernel = design_lowpass(args.hi, taps, buffer.sample_rate_hz)
    elif args.kind == "hp":
        kernel = design_highpass(args.lo, taps, buffer.sample_rate_hz)
    else:
        kernel = design_bandpass(args.lo, args.hi, taps, buffer.sample_rate_hz)
    filtered = filter_zero_phase(buffer, kernel)
    clipped = write_wav(filtered, args.out)
    if args.taps_csv:
        export_taps_csv(kernel, args.taps_csv)
    print(f"wrote {args.out} ({clipped} samples clipped)")
    return 0


def cmd_extract(args) -> int:
    cfg = _effective_config(args)
    buffer = read_wav(args.infile)
    extraction = cfg.extraction_config()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.infile).stem
    feats = _features_for(buffer, args.method, extraction, stem)
    meta_common = {
        "N": extraction.frame_len,
        "M": extraction.frame_shift,
        "K": extraction.fft_size,
        "Q": extraction.num_coeffs,
        "sample_rate": buffer.sample_rate_hz,
    }
    if args.method == "single":
        fm = feats["single"]
        meta = dict(
            meta_common,
            channel_id="single",
            P=extraction.filters_single,
            band_lo=0.0,
            band_hi=extraction.band_top_hz,
        )
        _write_feature_csv(fm, meta, out_dir / f"{stem}.csv")
        print(f"wrote {out_dir / (stem + '.csv')} ({fm.rows.shape[0]} rows)")
    else:
        bands = {
            "ch1": (0.0, extraction.split_hz),
            "ch2": (extraction.split_hz, extraction.band_top_hz),
        }
        for channel in ("ch1", "ch2"):
            fm = feats[channel]
            meta = dict(
                meta_common,
                channel_id=channel,
                P=extraction.filters_per_channel,
                band_lo=bands[channel][0],
                band_hi=bands[channel][1],
            )
            _write_feature_csv(fm, meta, out_dir / f"{stem}.{channel}.csv")
        print(f"wrote {out_dir / (stem + '.ch1.csv')} and .ch2.csv")
    return 0


def cmd_verdict(args) -> int:
    cfg = _effective_config(args)
    extraction = cfg.extraction_config()
    test = read_wav(args.test)
    ref = read_wav(args.ref)
    if args.anc:
        reference = read_wav(args.reference)
        result = run_anc(test, reference, LmsConfig(cfg.anc_taps, cfg.anc_mu))
        test = result.error_signal
    threshold = args.threshold if args.threshold is not None else cfg.threshold
    test_feats = _features_for(test, args.method, extraction, Path(args.test).stem)
    ref_feats = _features_for(ref, args.method, extraction, Path(args.ref).stem)
    v = verdict(test_feats, ref_feats, cfg.kmeans_k, threshold, cfg.seed)
    payload = {
        "test_id": Path(args.test).stem,
        "ref_id": Path(args.ref).stem,
        "per_channel_scores": v.per_channel_scores,
        "score": v.score,
        "threshold": v.threshold,
        "decision": v.decision,
        "config": cfg.to_dict(),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_bench(args) -> int:
    plan = bench_mod.load_plan(args.plan) if args.plan else bench_mod.ExperimentPlan()
    overrides = {}
    if args.corpus:
        overrides["corpus"] = args.corpus
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if overrides:
        plan = replace(plan, **overrides)
    report = bench_mod.run_sweep(plan)
    payload = bench_mod.report_to_dict(report)
    Path(args.out).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    bench_mod.emit_curves(report, args.curves)
    for cell in report.cells:
        label = "clean" if cell.snr_db >= bench_mod.CLEAN_SNR_DB else f"{cell.snr_db:g} dB"
        print(
            f"{cell.method:6s} anc={cell.anc:3s} {label:>7s}: "
            f"accuracy {cell.accuracy:.4f}"
        )
    print(f"wrote {args.out} and {args.curves}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="melsplit",
        description="Noise-robust word-sample identification pipeline",
    )
    parser.add_argument("--config", help="JSON config file with pipeline tunables")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic word-sample corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--profiles", type=_positive_int, default=8)
    p.add_argument("--words", type=_positive_int, default=10)
    p.add_argument("--replicates", type=_positive_int, default=1)
    p.add_argument("--duration", type=float, default=1.0, help="seconds per utterance")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("mix", help="add noise at a target SNR")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--noise", help="recorded noise WAV (default: white Gaussian)")
    p.add_argument("--out", required=True)
    p.add_argument("--noise-out", help="also write the injected noise")
    p.set_defaults(handler=cmd_mix)

    p = sub.add_parser("anc", help="adaptive noise cancellation")
    p.add_argument("--primary", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--taps", type=int, default=None, help="filter order L")
    p.add_argument("--mu", type=float, default=None, help="LMS step size")
    p.add_argument("--out", required=True)
    p.add_argument("--mse-csv", help="write the windowed MSE trace")
    p.set_defaults(handler=cmd_anc)

    p = sub.add_parser("filter", help="FIR filter a recording")
    p.add_argument("--kind", choices=("lp", "hp", "bp"), required=True)
    p.add_argument("--lo", type=float, help="low cutoff (hp, bp)")
    p.add_argument("--hi", type=float, help="high cutoff (lp, bp)")
    p.add_argument("--taps", type=int, default=None)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--taps-csv", help="export kernel coefficients")
    p.set_defaults(handler=cmd_filter)

    p = sub.add_parser("extract", help="extract cepstral features to CSV")
    p.add_argument("--method", choices=("single", "dual"), required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("verdict", help="compare two recordings")
    p.add_argument("--test", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--method", choices=("single", "dual"), default="dual")
    p.add_argument("--anc", action="store_true", help="denoise the test input first")
    p.add_argument("--reference", help="noise reference WAV for --anc")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", help="also write the verdict JSON here")
    p.set_defaults(handler=cmd_verdict)

    p = sub.add_parser("bench", help="run the SNR sweep benchmark")
    p.add_argument("--plan", help="experiment plan JSON (default: built-in plan)")
    p.add_argument("--corpus", help="corpus manifest (default: synthesize in memory)")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--curves", required=True, help="plot-ready CSV path")
    p.set_defaults(handler=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "verdict" and args.anc and not args.reference:
        parser.error("--anc requires --reference")
    if args.command == "filter":
        needed = {"lp": ("hi",), "hp": ("lo",), "bp": ("lo", "hi")}[args.kind]
        for flag in needed:
            if getattr(args, flag) is None:
                parser.error(f"--kind {args.kind} requires --{flag}")
    try:
        return args.handler(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
