"""Experiment grid: BER sweeps, spike-rate tables, quantization sweeps.

Monte-Carlo evaluation of trained equalizers over noise levels, with
error-count-based stopping, plus the memoryless slicer baseline and the
encoder weight histogram. Sweep points are mutually independent (each
owns its random stream), so callers may distribute them freely; results
are plain data, models are never mutated.
"""

import csv
import dataclasses
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import snn as snn_mod
from .channel import GRAY_BITS, LinkConfig, SymbolBlock, frame_windows, simulate_link
from .encoding import EncoderModel, LearnedEncoder
from .rng import substream


def _default_sigma_grid():
    return [round(-15.0 - 0.5 * i, 1) for i in range(17)]  # -15 .. -23


@dataclass
class SweepSpec:
    """What to sweep and when to stop counting errors."""

    sigma2_dB_list: list = field(default_factory=_default_sigma_grid)
    encodings: list = field(default_factory=lambda: ["learned", "log_scale", "ternary"])
    alpha_list: list = field(default_factory=lambda: [1e-2, 5.8e-4, 1e-9])
    graded_bits_list: list = field(default_factory=lambda: [4, 6, 8, None])
    min_bit_errors: int = 100
    max_symbols: int = 10_000_000
    chunk_symbols: int = 2048

    def __post_init__(self):
        if not self.sigma2_dB_list or not self.alpha_list or not self.graded_bits_list:
            raise ValueError("sweep lists must be nonempty")
        if self.min_bit_errors < 10:
            raise ValueError("min_bit_errors must be >= 10")
        unknown = set(self.encodings) - {"learned", "log_scale", "ternary"}
        if unknown:
            raise ValueError(f"unknown encodings: {sorted(unknown)}")


@dataclass
class CurvePoint:
    """One evaluated noise point; ber is exactly bit_errors / bits_counted."""

    sigma2_dB: float
    ber: float
    bit_errors: int
    bits_counted: int
    spike_rate: float
    capped: bool = False  # hit max_symbols before min_bit_errors


def run_equalizer(
    encoder,
    model: snn_mod.SnnModel,
    link_cfg: LinkConfig,
    sigma2_dB,
    rng: np.random.Generator,
    max_symbols: int,
    min_bit_errors: int | None = None,
    chunk_symbols: int = 2048,
) -> CurvePoint:
    """Stream fresh link blocks through the equalizer and count bit errors.

    Stops once ``min_bit_errors`` have accumulated (when given) or
    ``max_symbols`` symbols were decided, whichever comes first.
    """
    bit_errors = 0
    symbols = 0
    spike_sum = 0.0
    possible_per_symbol = None

    while symbols < max_symbols:
        want = min(chunk_symbols, max_symbols - symbols)
        block = simulate_link(
            link_cfg, _symbols_to_transmit(link_cfg, want), sigma2_dB, rng
        )
        windows, _, label_bits = frame_windows(block, link_cfg.d_tap)
        windows, label_bits = windows[:want], label_bits[:want]

        raster = encoder.encode_windows(windows)
        cache = snn_mod.forward_batch(raster, model)
        decided = snn_mod.decide_batch(cache.logits)
        bit_errors += int(np.sum(GRAY_BITS[decided - 1] != label_bits))
        symbols += len(decided)
        spike_sum += float(cache.spike_counts.sum())
        possible_per_symbol = model.n_hidden * raster.shape[2]

        if min_bit_errors is not None and bit_errors >= min_bit_errors:
            break

    bits_counted = 2 * symbols
    return CurvePoint(
        sigma2_dB=float(sigma2_dB) if sigma2_dB is not None else -np.inf,
        ber=bit_errors / bits_counted,
        bit_errors=bit_errors,
        bits_counted=bits_counted,
        spike_rate=spike_sum / (symbols * possible_per_symbol),
        capped=min_bit_errors is not None and bit_errors < min_bit_errors,
    )


def _symbols_to_transmit(link_cfg: LinkConfig, n_windows: int) -> int:
    """Transmit count that survives trimming with >= n_windows labeled windows."""
    from .channel import dispersion_guard_symbols

    return (
        n_windows
        + link_cfg.d_tap
        + link_cfg.rrc_span_symbols
        + 2 * dispersion_guard_symbols(link_cfg)
    )


def ber_sweep(
    encoder,
    model: snn_mod.SnnModel,
    link_cfg: LinkConfig,
    spec: SweepSpec,
    seed: int = 0,
    stream_name: str = "eval",
) -> list[CurvePoint]:
    """Evaluate one equalizer over the noise grid of ``spec``.

    Each point draws from its own named substream. Emits a warning (not
    an error) if the curve rises where noise falls by more than the
    counting noise allows.
    """
    points = []
    for idx, sigma in enumerate(spec.sigma2_dB_list):
        rng = substream(seed, stream_name, idx, sigma)
        points.append(
            run_equalizer(
                encoder,
                model,
                link_cfg,
                sigma,
                rng,
                max_symbols=spec.max_symbols,
                min_bit_errors=spec.min_bit_errors,
                chunk_symbols=spec.chunk_symbols,
            )
        )
    _warn_if_not_monotone(points)
    return points


def _warn_if_not_monotone(points: list[CurvePoint]) -> None:
    ordered = sorted(points, key=lambda p: p.sigma2_dB, reverse=True)  # noisy -> clean
    for prev, nxt in zip(ordered, ordered[1:]):
        # three-sigma binomial allowance on both estimates
        tol = 3.0 * (
            np.sqrt(max(prev.ber, 1e-12) / prev.bits_counted)
            + np.sqrt(max(nxt.ber, 1e-12) / nxt.bits_counted)
        )
        if nxt.ber > prev.ber + tol:
            warnings.warn(
                f"BER rose from {prev.ber:.3g} at {prev.sigma2_dB} dB to "
                f"{nxt.ber:.3g} at {nxt.sigma2_dB} dB (beyond statistical bounds)",
                RuntimeWarning,
                stacklevel=3,
            )


def spike_rate_table(
    entries: list,
    link_cfg: LinkConfig,
    sigma2_dB: float = -19.0,
    seed: int = 0,
    n_symbols: int = 20_000,
) -> list[dict]:
    """Spike rate per configuration at one fixed noise level.

    ``entries`` is a list of (label, encoder, model); returns one row per
    entry with the rate both as a fraction and in percent.
    """
    rows = []
    for label, encoder, model in entries:
        rng = substream(seed, "spike-rate", label, sigma2_dB)
        point = run_equalizer(
            encoder, model, link_cfg, sigma2_dB, rng, max_symbols=n_symbols
        )
        rows.append(
            {
                "label": label,
                "sigma2_dB": sigma2_dB,
                "spike_rate": point.spike_rate,
                "spike_rate_percent": 100.0 * point.spike_rate,
                "ber": point.ber,
            }
        )
    return rows


def quantization_sweep(
    encoder_model: EncoderModel,
    model: snn_mod.SnnModel,
    link_cfg: LinkConfig,
    spec: SweepSpec,
    seed: int = 0,
) -> dict:
    """Re-evaluate one trained float encoder at several graded-spike widths.

    No retraining: the stored matrices are quantized on the fly. Keys are
    the entries of spec.graded_bits_list (None = float passthrough).
    """
    curves = {}
    for bits in spec.graded_bits_list:
        variant = dataclasses.replace(encoder_model, graded_bits=bits)
        curves[bits] = ber_sweep(
            LearnedEncoder(variant), model, link_cfg, spec, seed=seed, stream_name="eval"
        )
    return curves


# --- slicer baseline ------------------------------------------------------


@dataclass
class Slicer:
    """Memoryless minimum-distance decider fit on labeled data."""

    thresholds: np.ndarray   # (3,) sorted midpoints between class means
    class_order: np.ndarray  # (4,) symbol index of each threshold interval

    def decide(self, y: np.ndarray) -> np.ndarray:
        return self.class_order[np.searchsorted(self.thresholds, y)]


def fit_slicer(block: SymbolBlock) -> Slicer:
    """Fit class-conditional means of y; thresholds are their midpoints.

    Thresholds come out monotone in amplitude by construction.
    """
    means = np.empty(4)
    for a in range(1, 5):
        mask = block.symbol_indices == a
        if not np.any(mask):
            raise ValueError(f"class {a} absent from the block; cannot fit slicer")
        means[a - 1] = np.mean(block.received[mask])
    order = np.argsort(means)
    sorted_means = means[order]
    thresholds = 0.5 * (sorted_means[:-1] + sorted_means[1:])
    return Slicer(thresholds=thresholds, class_order=order + 1)


def slicer_baseline(block: SymbolBlock) -> float:
    """BER of the best memoryless slicer on the block."""
    decided = fit_slicer(block).decide(block.received)
    bit_errors = int(np.sum(GRAY_BITS[decided - 1] != block.bits))
    return bit_errors / (2 * len(block))


# --- weight histogram -----------------------------------------------------


@dataclass
class HistogramResult:
    bin_edges: np.ndarray  # (n_bins + 1,)
    rel_freq: np.ndarray   # (n_bins,), sums to 1
    frac_at_max: float     # fraction with |w| within 1/256 of 1


def weight_histogram(encoder_model: EncoderModel, n_bins: int = 101) -> HistogramResult:
    """Relative-frequency histogram of all encoder matrix entries."""
    w = encoder_model.matrices.ravel()
    counts, edges = np.histogram(w, bins=n_bins)
    eps = 1.0 / 256.0
    return HistogramResult(
        bin_edges=edges,
        rel_freq=counts / w.size,
        frac_at_max=float(np.mean(np.abs(w) >= 1.0 - eps)),
    )


# --- result files ----------------------------------------------------------

CURVE_FIELDS = [
    "encoding",
    "alpha",
    "bits",
    "sigma2_dB",
    "ber",
    "bit_errors",
    "bits_counted",
    "spike_rate",
    "capped",
]


def curve_rows(points: list[CurvePoint], encoding: str, alpha=None, bits=None) -> list[dict]:
    """Flatten sweep points into CSV-ready rows."""
    rows = []
    for p in points:
        rows.append(
            {
                "encoding": encoding,
                "alpha": "" if alpha is None else repr(float(alpha)),
                "bits": "" if bits is None else int(bits),
                "sigma2_dB": p.sigma2_dB,
                "ber": repr(p.ber),
                "bit_errors": p.bit_errors,
                "bits_counted": p.bits_counted,
                "spike_rate": repr(p.spike_rate),
                "capped": int(p.capped),
            }
        )
    return rows


def write_curves_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CURVE_FIELDS)
        writer.writeheader()
        writer.writerows(rows)


def write_histogram_csv(path, hist: HistogramResult) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["bin_left", "bin_right", "rel_freq"])
        for i in range(len(hist.rel_freq)):
            writer.writerow(
                [
                    repr(float(hist.bin_edges[i])),
                    repr(float(hist.bin_edges[i + 1])),
                    repr(float(hist.rel_freq[i])),
                ]
            )


def write_table_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("no table rows to write")
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def write_sidecar(path, payload: dict) -> None:
    """JSON sidecar recording config hash and seeds next to a CSV."""
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
