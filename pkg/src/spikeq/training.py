"""Joint optimization of encoder matrices and SNN weights.

Online training against the link simulator: every step draws a fresh
batch of noisy received windows, runs the surrogate-gradient BPTT and an
Adam update on all trainable parameters, then renormalizes each encoder
matrix to unit peak magnitude. The loss blends cross entropy with the
average l1-over-l2 sparsity ratio of the encoder:
(1 - alpha) * CE + alpha * mean ratio.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import snn as snn_mod
from .channel import LinkConfig, frame_windows, simulate_link
from .encoding import (
    EncoderModel,
    normalize_matrices,
    quantize_graded,
    quantize_uniform,
    sparsity_penalty,
    sparsity_penalty_grad,
)
from .evaluation import _symbols_to_transmit, run_equalizer
from .rng import substream
from .snn import DivergenceError


@dataclass
class TrainConfig:
    """Optimization hyperparameters (desk-scale defaults)."""

    alpha: float = 1e-9
    learning_rate: float = 1e-3
    batch_size: int = 256
    batches_per_epoch: int = 200
    epochs: int = 5
    train_sigma2_dB: float = -17.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float | None = None
    quantization_aware: bool = False
    validation_sigma2_dB: float | None = None  # None: validate at train noise
    validation_symbols: int = 20_000

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        for name in ("batch_size", "batches_per_epoch", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.grad_clip is not None and self.grad_clip <= 0.0:
            raise ValueError("grad_clip must be positive when set")


@dataclass
class TrainHistory:
    """Per-step loss records and per-epoch validation metrics."""

    ce: list = field(default_factory=list)
    penalty: list = field(default_factory=list)
    total: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    val_ber: list = field(default_factory=list)
    val_spike_rate: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.total)

    def record_step(self, ce, penalty, total, grad_norm):
        self.ce.append(float(ce))
        self.penalty.append(float(penalty))
        self.total.append(float(total))
        self.grad_norm.append(float(grad_norm))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "ce", "penalty", "total", "grad_norm"])
            for i in range(self.steps):
                writer.writerow(
                    [
                        i + 1,
                        repr(self.ce[i]),
                        repr(self.penalty[i]),
                        repr(self.total[i]),
                        repr(self.grad_norm[i]),
                    ]
                )


# --- loss ------------------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def cross_entropy(readout_logits: np.ndarray, a: int) -> float:
    """-log softmax(logits)[a] for a 1-based true class a."""
    logits = np.asarray(readout_logits, dtype=float)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    if not 1 <= a <= logits.shape[-1]:
        raise ValueError(f"label {a} outside 1..{logits.shape[-1]}")
    z = logits - np.max(logits)
    return float(np.log(np.sum(np.exp(z))) - z[a - 1])


def cross_entropy_batch(logits: np.ndarray, labels: np.ndarray):
    """Per-sample CE losses and softmax probabilities (labels 1-based)."""
    probs = softmax(logits)
    picked = probs[np.arange(len(labels)), labels - 1]
    return -np.log(np.maximum(picked, 1e-300)), probs


def total_loss(ce: float, penalty: float, alpha: float) -> float:
    """(1 - alpha) * ce + alpha * penalty."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return (1.0 - alpha) * ce + alpha * penalty


# --- optimizer ---------------------------------------------------------------


@dataclass
class AdamMoments:
    m: dict
    v: dict

    @classmethod
    def zeros_like(cls, params: dict) -> "AdamMoments":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict,
    grads: dict,
    moments: AdamMoments,
    t: int,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Bias-corrected Adam update, in place on params and moments.

    ``t`` is the 1-based step count.
    """
    if t < 1:
        raise ValueError("step count t must be >= 1")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for {name}")
        m, v = moments.m[name], moments.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        params[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)


# --- data plumbing -----------------------------------------------------------


def calibrate_q_range(
    link_cfg: LinkConfig,
    sigma2_dB,
    rng: np.random.Generator,
    n_symbols: int = 100_000,
) -> tuple[float, float]:
    """Empirical [min, max] of the received samples on a calibration block."""
    block = simulate_link(link_cfg, n_symbols, sigma2_dB, rng)
    return float(np.min(block.received)), float(np.max(block.received))


def training_batch(link_cfg: LinkConfig, cfg: TrainConfig, rng: np.random.Generator):
    """One fresh batch of (windows, labels) from the simulator."""
    n_tx = _symbols_to_transmit(link_cfg, cfg.batch_size)
    block = simulate_link(link_cfg, n_tx, cfg.train_sigma2_dB, rng)
    windows, labels, _ = frame_windows(block, link_cfg.d_tap)
    return windows[: cfg.batch_size], labels[: cfg.batch_size]


# --- training loop -----------------------------------------------------------


def train(
    link_cfg: LinkConfig,
    encoder,
    model: snn_mod.SnnModel,
    cfg: TrainConfig,
    on_epoch=None,
):
    """Optimize ``model`` (and the encoder, when trainable) on fresh data.

    ``encoder`` is a LearnedEncoder or one of the fixed benchmarks; only
    the learned one receives gradients and the post-step peak
    normalization. ``on_epoch(info)`` is called after each epoch's
    validation with the models in their current state (checkpoint hook).

    Returns (encoder, model, history). A NaN loss raises DivergenceError
    with the history so far attached as ``.history``.
    """
    learned = getattr(encoder, "trainable", False)
    params = {"w_ih": model.w_ih, "w_ho": model.w_ho}
    if learned:
        params["encoder"] = encoder.model.matrices
    moments = AdamMoments.zeros_like(params)
    history = TrainHistory()
    step = 0

    try:
        for epoch in range(cfg.epochs):
            for batch_idx in range(cfg.batches_per_epoch):
                step += 1
                rng = substream(cfg.seed, "train", epoch, batch_idx)
                windows, labels = training_batch(link_cfg, cfg, rng)

                if learned:
                    enc_model = encoder.model
                    classes = quantize_uniform(
                        windows, enc_model.q_range, enc_model.n_classes
                    )
                    raster = enc_model.matrices[classes - 1]
                    if cfg.quantization_aware and enc_model.graded_bits is not None:
                        # straight-through: quantized forward, identity backward
                        raster = quantize_graded(raster, enc_model.graded_bits)
                    b, d_tap = classes.shape
                    raster = raster.reshape(
                        b, d_tap * enc_model.m_neurons, enc_model.t_steps
                    )
                else:
                    classes = None
                    raster = encoder.encode_windows(windows)

                cache = snn_mod.forward_batch(raster, model)
                losses, probs = cross_entropy_batch(cache.logits, labels)
                ce = float(np.mean(losses))
                penalty = sparsity_penalty(encoder.model) if learned else 0.0
                total = total_loss(ce, penalty, cfg.alpha)
                if not np.isfinite(total):
                    raise DivergenceError(f"loss diverged at step {step}")

                dlogits = probs.copy()
                dlogits[np.arange(len(labels)), labels - 1] -= 1.0
                dlogits *= (1.0 - cfg.alpha) / len(labels)

                grads = snn_mod.backward_batch(
                    cache,
                    model,
                    dlogits,
                    classes=classes,
                    n_classes=encoder.model.n_classes if learned else None,
                )
                del grads["raster"]
                if learned:
                    grads["encoder"] += cfg.alpha * sparsity_penalty_grad(encoder.model)

                grad_norm = float(
                    np.sqrt(sum(np.sum(g**2) for g in grads.values()))
                )
                if cfg.grad_clip is not None and grad_norm > cfg.grad_clip:
                    scale = cfg.grad_clip / grad_norm
                    for g in grads.values():
                        g *= scale

                adam_step(
                    params,
                    grads,
                    moments,
                    step,
                    lr=cfg.learning_rate,
                    beta1=cfg.beta1,
                    beta2=cfg.beta2,
                    eps=cfg.eps,
                )
                if learned:
                    normalize_matrices(encoder.model)

                history.record_step(ce, penalty, total, grad_norm)

            val_sigma = (
                cfg.train_sigma2_dB
                if cfg.validation_sigma2_dB is None
                else cfg.validation_sigma2_dB
            )
            ber, rate = validate(
                encoder,
                model,
                link_cfg,
                val_sigma,
                cfg.validation_symbols,
                rng=substream(cfg.seed, "validate", epoch),
            )
            history.val_ber.append(ber)
            history.val_spike_rate.append(rate)
            if on_epoch is not None:
                on_epoch(
                    {
                        "epoch": epoch,
                        "step": step,
                        "val_ber": ber,
                        "val_spike_rate": rate,
                        "moments": moments,
                    }
                )
    except DivergenceError as err:
        err.history = history
        raise

    return encoder, model, history


def validate(
    encoder,
    model: snn_mod.SnnModel,
    link_cfg: LinkConfig,
    sigma2_dB,
    n_symbols: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Held-out BER and mean hidden spike rate over n_symbols decisions."""
    point = run_equalizer(
        encoder, model, link_cfg, sigma2_dB, rng, max_symbols=n_symbols
    )
    return point.ber, point.spike_rate
