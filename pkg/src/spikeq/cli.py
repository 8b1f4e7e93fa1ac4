"""Command-line entry point and experiment orchestration.

Subcommands: train, eval, sweep-alpha, sweep-quant, baseline, histogram.
Every run is driven by one YAML config; any field can be overridden on
the command line with its dotted path (--train.alpha 1e-2). Exit code 0
means all requested work completed; otherwise a single machine-parsable
line "<category>: <message>" goes to stderr.

All artifacts land in the config's output directory (overridable via the
SPIKEQ_OUTPUT_DIR environment variable), guarded by a lock file so one
process owns one directory at a time.
"""

import argparse
import contextlib
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .channel import simulate_link, symbol_block_to_csv
from .config import ConfigError, ExperimentConfig, load_config, parse_scalar
from .encoding import (
    EncoderModel,
    LearnedEncoder,
    LogScaleEncoder,
    TernaryEncoder,
    init_encoder,
    normalize_matrices,
)
from .evaluation import (
    ber_sweep,
    curve_rows,
    quantization_sweep,
    slicer_baseline,
    spike_rate_table,
    weight_histogram,
    write_curves_csv,
    write_histogram_csv,
    write_sidecar,
    write_table_csv,
)
from .rng import substream, substream_key
from .snn import DivergenceError, LifParams, ReadoutParams, init_snn
from .training import TrainConfig, calibrate_q_range, train

EXIT_CODES = {
    "usage-error": 2,
    "config-error": 3,
    "checkpoint-error": 4,
    "divergence": 5,
    "io-error": 6,
}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


@contextlib.contextmanager
def output_dir_lock(output_dir: Path):
    """One process per output directory, via an exclusive lock file."""
    output_dir.mkdir(parents=True, exist_ok=True)
    lock = output_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise CliError(
            "io-error",
            f"output directory {output_dir} is locked by another run "
            f"(remove {lock} if stale)",
        ) from None
    os.write(fd, str(os.getpid()).encode())
    os.close(fd)
    try:
        yield output_dir
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(lock)


# --- model construction ------------------------------------------------------


def build_encoder(cfg: ExperimentConfig, q_range):
    enc = cfg.encoder
    if enc.type == "learned":
        model = init_encoder(
            enc.n_classes,
            enc.m_neurons,
            enc.t_steps,
            substream(cfg.seed, "init", "encoder"),
            q_range=q_range,
        )
        model.graded_bits = enc.graded_bits
        normalize_matrices(model)
        return LearnedEncoder(model)
    if enc.type == "log_scale":
        return LogScaleEncoder(q_range, enc.m_neurons, enc.t_steps)
    return TernaryEncoder(q_range, enc.m_neurons, enc.t_steps)


def build_snn(cfg: ExperimentConfig, m_neurons: int):
    s = cfg.snn
    n_in = m_neurons * cfg.link.d_tap
    return init_snn(
        n_in,
        s.n_hidden,
        s.n_out,
        substream(cfg.seed, "init", "snn"),
        w_ho_scale=s.w_ho_init_scale,
        lif=LifParams(
            v_decay=s.v_decay, i_decay=s.i_decay, threshold=s.threshold, reset=s.reset
        ),
        readout=ReadoutParams(v_decay=s.readout_v_decay, i_decay=s.readout_i_decay),
        surrogate_slope=s.surrogate_slope,
        readout_statistic=s.readout_statistic,
    )


def prepare_models(cfg: ExperimentConfig):
    q_range = calibrate_q_range(
        cfg.link, cfg.train.train_sigma2_dB, substream(cfg.seed, "calibrate")
    )
    encoder = build_encoder(cfg, q_range)
    model = build_snn(cfg, cfg.encoder.m_neurons)
    return encoder, model


# --- subcommands -------------------------------------------------------------


def cmd_train(cfg: ExperimentConfig, out: Path) -> None:
    encoder, model = prepare_models(cfg)
    config_dict = cfg.to_dict()

    def on_epoch(info):
        path = out / f"checkpoint_epoch{info['epoch']:03d}.json"
        ckpt.save_checkpoint(
            path,
            config_dict,
            encoder,
            model,
            training_step=info["step"],
            moments=info["moments"],
        )
        print(
            f"epoch {info['epoch']}: val_ber={info['val_ber']:.6f} "
            f"val_spike_rate={info['val_spike_rate']:.4f}"
        )

    try:
        _, _, history = train(cfg.link, encoder, model, cfg.train, on_epoch=on_epoch)
    except DivergenceError as err:
        history = getattr(err, "history", None)
        if history is not None:
            history.to_csv(out / "history.csv")
        raise CliError("divergence", f"training diverged: {err}") from err

    history.to_csv(out / "history.csv")
    final_hash = ckpt.save_checkpoint(
        out / "model.json",
        config_dict,
        encoder,
        model,
        training_step=history.steps,
    )
    write_sidecar(
        out / "history.json",
        {
            "config_hash": ckpt.config_hash(config_dict),
            "checkpoint_hash": final_hash,
            "seeds": substream_key(cfg.seed),
            "val_ber": history.val_ber,
            "val_spike_rate": history.val_spike_rate,
        },
    )
    print(f"final checkpoint {out / 'model.json'} ({final_hash})")


def load_models(path) -> tuple:
    try:
        loaded = ckpt.load_checkpoint(path)
    except FileNotFoundError:
        raise CliError("io-error", f"checkpoint not found: {path}") from None
    except ckpt.CheckpointError as err:
        raise CliError("checkpoint-error", str(err)) from err
    return loaded, loaded.build_encoder(), loaded.build_snn()


def cmd_eval(cfg: ExperimentConfig, out: Path, args) -> None:
    loaded, encoder, model = load_models(args.checkpoint)
    link = cfg.link
    spec = cfg.sweep
    config_dict = loaded.config
    sidecar = {
        "config_hash": ckpt.config_hash(config_dict),
        "checkpoint_hash": ckpt.file_content_hash(args.checkpoint),
        "seeds": substream_key(cfg.seed, "eval"),
    }

    if args.table:
        sigma = args.sigma2 if args.sigma2 is not None else -19.0
        entries = [(_encoder_label(encoder), encoder, model)]
        if isinstance(encoder, LearnedEncoder):
            for bits in spec.graded_bits_list:
                if bits is None:
                    continue
                variant = dataclasses.replace(encoder.model, graded_bits=bits)
                entries.append((f"{bits}_bit", LearnedEncoder(variant), model))
        rows = spike_rate_table(
            entries, link, sigma2_dB=sigma, seed=cfg.seed, n_symbols=args.table_symbols
        )
        write_table_csv(out / "spike_rate_table.csv", rows)
        write_sidecar(out / "spike_rate_table.json", sidecar)
        for row in rows:
            print(
                f"{row['label']}: spike_rate={row['spike_rate_percent']:.2f}% "
                f"(ber={row['ber']:.3g})"
            )
        return

    if args.sigma2 is not None:
        spec = dataclasses.replace(spec, sigma2_dB_list=[args.sigma2])
    points = ber_sweep(encoder, model, link, spec, seed=cfg.seed, stream_name="eval")
    rows = curve_rows(points, _encoder_label(encoder), alpha=cfg.train.alpha)
    write_curves_csv(out / "curves.csv", rows)
    write_sidecar(out / "curves.json", sidecar)
    for p in points:
        print(
            f"sigma2={p.sigma2_dB:+.1f} dB: ber={p.ber:.3e} "
            f"({p.bit_errors}/{p.bits_counted} bits, spike_rate={p.spike_rate:.3f}"
            f"{', capped' if p.capped else ''})"
        )


def _encoder_label(encoder) -> str:
    return getattr(encoder, "kind", type(encoder).__name__)


def cmd_sweep_alpha(cfg: ExperimentConfig, out: Path, args) -> None:
    if cfg.encoder.type != "learned":
        raise CliError("config-error", "encoder.type: alpha sweeps require 'learned'")
    all_rows = []
    sidecar_runs = {}
    for alpha in cfg.sweep.alpha_list:
        run_cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, alpha=alpha))
        encoder, model = prepare_models(run_cfg)
        try:
            _, _, history = train(run_cfg.link, encoder, model, run_cfg.train)
        except DivergenceError as err:
            raise CliError("divergence", f"alpha={alpha}: {err}") from err
        tag = f"alpha{alpha:.0e}"
        run_hash = ckpt.save_checkpoint(
            out / f"model_{tag}.json",
            run_cfg.to_dict(),
            encoder,
            model,
            training_step=history.steps,
        )
        points = ber_sweep(encoder, model, cfg.link, cfg.sweep, seed=cfg.seed)
        all_rows.extend(curve_rows(points, "learned", alpha=alpha))
        sidecar_runs[tag] = {"checkpoint_hash": run_hash, "val_ber": history.val_ber}
        print(f"alpha={alpha:g}: final val_ber={history.val_ber[-1]:.5f}")

    for kind in cfg.sweep.encodings:
        if kind == "learned":
            continue
        bench_cfg = dataclasses.replace(
            cfg,
            encoder=dataclasses.replace(cfg.encoder, type=kind, m_neurons=None, t_steps=None),
        )
        encoder, model = prepare_models(bench_cfg)
        try:
            _, _, history = train(bench_cfg.link, encoder, model, bench_cfg.train)
        except DivergenceError as err:
            raise CliError("divergence", f"{kind}: {err}") from err
        run_hash = ckpt.save_checkpoint(
            out / f"model_{kind}.json",
            bench_cfg.to_dict(),
            encoder,
            model,
            training_step=history.steps,
        )
        points = ber_sweep(encoder, model, cfg.link, cfg.sweep, seed=cfg.seed)
        all_rows.extend(curve_rows(points, kind))
        sidecar_runs[kind] = {"checkpoint_hash": run_hash, "val_ber": history.val_ber}
        print(f"{kind}: final val_ber={history.val_ber[-1]:.5f}")

    write_curves_csv(out / "alpha_sweep.csv", all_rows)
    write_sidecar(
        out / "alpha_sweep.json",
        {
            "config_hash": ckpt.config_hash(cfg.to_dict()),
            "shared_data_seeds": substream_key(cfg.train.seed, "train"),
            "eval_seeds": substream_key(cfg.seed, "eval"),
            "runs": sidecar_runs,
        },
    )


def cmd_sweep_quant(cfg: ExperimentConfig, out: Path, args) -> None:
    loaded, encoder, model = load_models(args.checkpoint)
    if not isinstance(encoder, LearnedEncoder):
        raise CliError("config-error", "encoder.type: quantization sweeps require 'learned'")
    if encoder.model.graded_bits is not None:
        raise CliError("config-error", "checkpoint must hold a float (unquantized) model")
    curves = quantization_sweep(encoder.model, model, cfg.link, cfg.sweep, seed=cfg.seed)
    rows = []
    for bits, points in curves.items():
        rows.extend(curve_rows(points, "learned", alpha=cfg.train.alpha, bits=bits))
        label = "float" if bits is None else f"{bits}-bit"
        worst = max(p.ber for p in points)
        print(f"{label}: worst ber over sweep {worst:.3e}")
    write_curves_csv(out / "quant_sweep.csv", rows)
    write_sidecar(
        out / "quant_sweep.json",
        {
            "config_hash": ckpt.config_hash(loaded.config),
            "checkpoint_hash": ckpt.file_content_hash(args.checkpoint),
            "seeds": substream_key(cfg.seed, "eval"),
        },
    )


def cmd_baseline(cfg: ExperimentConfig, out: Path, args) -> None:
    sigma = args.sigma2 if args.sigma2 is not None else cfg.train.train_sigma2_dB
    rng = substream(cfg.seed, "baseline", sigma)
    block = simulate_link(cfg.link, args.symbols, sigma, rng)
    ber = slicer_baseline(block)
    if args.dump_csv:
        symbol_block_to_csv(block, out / "symbols.csv")
    write_sidecar(
        out / "baseline.json",
        {
            "config_hash": ckpt.config_hash(cfg.to_dict()),
            "sigma2_dB": sigma,
            "symbols": len(block),
            "slicer_ber": ber,
            "seeds": substream_key(cfg.seed, "baseline", sigma),
        },
    )
    print(f"slicer baseline at sigma2={sigma} dB over {len(block)} symbols: ber={ber:.5f}")


def cmd_histogram(cfg: ExperimentConfig, out: Path, args) -> None:
    _, encoder, _ = load_models(args.checkpoint)
    if not isinstance(encoder, LearnedEncoder):
        raise CliError("config-error", "histograms require a learned-encoder checkpoint")
    hist = weight_histogram(encoder.model, n_bins=args.bins)
    write_histogram_csv(out / "weight_histogram.csv", hist)
    write_sidecar(
        out / "weight_histogram.json",
        {
            "checkpoint_hash": ckpt.file_content_hash(args.checkpoint),
            "frac_at_max": hist.frac_at_max,
        },
    )
    print(
        f"histogram over {encoder.model.matrices.size} entries written; "
        f"fraction at max amplitude: {hist.frac_at_max * 100:.2f}%"
    )


# --- argument plumbing -------------------------------------------------------


def _split_overrides(extras: list) -> list:
    """Turn leftover ['--a.b', '1', ...] pairs into (path, value) tuples."""
    overrides = []
    i = 0
    while i < len(extras):
        token = extras[i]
        if not token.startswith("--") or "." not in token:
            raise CliError("usage-error", f"unrecognized argument {token!r}")
        path = token[2:]
        if "=" in path:
            path, value = path.split("=", 1)
        else:
            i += 1
            if i >= len(extras):
                raise CliError("usage-error", f"missing value for {token}")
            value = extras[i]
        overrides.append((path, value))
        i += 1
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikeq",
        description="Spiking-neural-network equalization workbench for IM/DD links",
        epilog=(
            "Any config field can be overridden with its dotted path, "
            "e.g. --train.alpha 1e-2 or --link.fiber_length_km=2."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--output-dir", help="overrides the config output_dir")

    p = sub.add_parser("train", help="train a model per the config")
    common(p)

    p = sub.add_parser("eval", help="BER sweep or spike-rate table for a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sigma2", type=float, help="evaluate a single noise level (dB)")
    p.add_argument("--table", action="store_true", help="emit the spike-rate table")
    p.add_argument("--table-symbols", type=int, default=20_000)

    p = sub.add_parser("sweep-alpha", help="train and evaluate each alpha in the sweep")
    common(p)

    p = sub.add_parser("sweep-quant", help="evaluate a float checkpoint at graded bit widths")
    common(p)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("baseline", help="memoryless slicer baseline BER")
    common(p)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--symbols", type=int, default=100_000)
    p.add_argument("--dump-csv", action="store_true", help="dump (k, b0, b1, a, y) rows")

    p = sub.add_parser("histogram", help="encoder weight histogram from a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bins", type=int, default=101)
    return parser


def run(argv=None) -> None:
    parser = build_parser()
    args, extras = parser.parse_known_args(argv)
    overrides = _split_overrides(extras)
    try:
        if args.config:
            cfg = load_config(args.config, overrides)
        else:
            data: dict = {}
            for path, value in overrides:
                from .config import apply_override

                apply_override(data, path, value)
            from .config import config_from_dict

            cfg = config_from_dict(data)
    except FileNotFoundError:
        raise CliError("io-error", f"config file not found: {args.config}") from None
    except ConfigError as err:
        raise CliError("config-error", str(err)) from err

    if args.output_dir:
        cfg.output_dir = args.output_dir
    out = Path(cfg.output_dir)

    with output_dir_lock(out):
        if args.command == "train":
            cmd_train(cfg, out)
        elif args.command == "eval":
            cmd_eval(cfg, out, args)
        elif args.command == "sweep-alpha":
            cmd_sweep_alpha(cfg, out, args)
        elif args.command == "sweep-quant":
            cmd_sweep_quant(cfg, out, args)
        elif args.command == "baseline":
            cmd_baseline(cfg, out, args)
        elif args.command == "histogram":
            cmd_histogram(cfg, out, args)


def main(argv=None) -> int:
    try:
        run(argv)
    except CliError as err:
        print(f"{err.category}: {err}", file=sys.stderr)
        return EXIT_CODES.get(err.category, 1)
    except KeyboardInterrupt:
        print("io-error: interrupted", file=sys.stderr)
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
