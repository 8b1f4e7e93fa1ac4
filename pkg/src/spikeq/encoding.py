"""Spike encoders: learnable matrix encoding plus two fixed benchmarks.

The learnable encoder quantizes a received sample into one of N classes
and emits that class's M x T matrix as graded input to the network; the
matrices are trained jointly with the equalizer and regularized by an
l1-over-l2 sparsity ratio. Log-scale (spike-timing) and balanced-ternary
encoders provide fixed benchmarks behind the same interface.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass
class EncoderModel:
    """Learnable per-class input matrices with their quantizer range."""

    matrices: np.ndarray            # (N, M, T)
    q_range: tuple = (0.0, 1.0)     # (y_lo, y_hi)
    graded_bits: int | None = None  # None = full float resolution

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=float)
        if self.matrices.ndim != 3:
            raise ValueError("matrices must have shape (N, M, T)")
        if not np.all(np.isfinite(self.matrices)):
            raise ValueError("matrices must be finite")
        lo, hi = self.q_range
        if not lo < hi:
            raise ValueError("q_range must satisfy y_lo < y_hi")
        if self.graded_bits is not None and self.graded_bits < 2:
            raise ValueError("graded_bits must be >= 2")

    @property
    def n_classes(self) -> int:
        return self.matrices.shape[0]

    @property
    def m_neurons(self) -> int:
        return self.matrices.shape[1]

    @property
    def t_steps(self) -> int:
        return self.matrices.shape[2]


def init_encoder(
    n_classes: int,
    m_neurons: int,
    t_steps: int,
    rng: np.random.Generator,
    q_range: tuple = (0.0, 1.0),
) -> EncoderModel:
    """Fresh encoder with i.i.d. standard normal entries."""
    matrices = rng.standard_normal((n_classes, m_neurons, t_steps))
    return EncoderModel(matrices=matrices, q_range=q_range)


def quantize_uniform(y, q_range: tuple, n_classes: int):
    """Uniform quantizer onto classes 1..N; clamps outside q_range.

    n = 1 + floor(N * (clamp(y) - y_lo) / (y_hi - y_lo)), with y = y_hi
    mapping to N. Monotone nondecreasing in y. Accepts scalars or arrays.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(np.isnan(y_arr)):
        raise ValueError("cannot quantize NaN input")
    lo, hi = q_range
    u = (np.clip(y_arr, lo, hi) - lo) / (hi - lo)
    n = 1 + np.floor(n_classes * u).astype(np.int64)
    n = np.minimum(n, n_classes)  # y == y_hi lands in the top class
    return int(n) if np.isscalar(y) or y_arr.ndim == 0 else n


def quantize_graded(matrix: np.ndarray, bits: int) -> np.ndarray:
    """Uniform midrise quantization of [-1, 1] into 2^bits levels.

    Idempotent; max error 2^-bits; output stays inside [-1, 1].
    """
    if bits < 2:
        raise ValueError("bits must be >= 2")
    levels = 2**bits
    step = 2.0 / levels
    k = np.floor((np.asarray(matrix, dtype=float) + 1.0) / step)
    k = np.clip(k, 0, levels - 1)
    return -1.0 + (k + 0.5) * step


def learned_encode(n: int, model: EncoderModel) -> np.ndarray:
    """Return class n's M x T matrix (quantized if graded_bits is set)."""
    if not 1 <= n <= model.n_classes:
        raise ValueError(f"class {n} outside 1..{model.n_classes}")
    matrix = model.matrices[n - 1]
    if model.graded_bits is not None:
        matrix = quantize_graded(matrix, model.graded_bits)
    return matrix


def build_snn_input(classes: np.ndarray, model: EncoderModel) -> np.ndarray:
    """Stack the encoded matrices of a d_tap class window, tap-major.

    Row block [tap*M .. tap*M + M - 1] carries classes[tap]; all taps
    replay their T-step pattern on the shared time axis. Returns an
    (M * d_tap) x T raster.
    """
    classes = np.asarray(classes)
    raster = model.matrices[classes - 1]  # (d_tap, M, T)
    if model.graded_bits is not None:
        raster = quantize_graded(raster, model.graded_bits)
    d_tap = len(classes)
    return raster.reshape(d_tap * model.m_neurons, model.t_steps)


def log_scale_encode(y: float, q_range: tuple, m_neurons: int = 10, t_steps: int = 30) -> np.ndarray:
    """Benchmark time-to-spike encoding with log-spaced sensitivities.

    Neuron m fires exactly once, at a time that shifts earlier as y grows;
    its sensitivity factor 2^m makes successive neurons resolve
    dyadically (log-spaced) finer slices near the top of the range.
    Returns a binary M x T block with exactly M ones.
    """
    u = _normalize_sample(y, q_range)
    block = np.zeros((m_neurons, t_steps))
    for m in range(m_neurons):
        depth = min(2.0**m * (1.0 - u), 1.0)
        t_spike = min(int(np.floor((t_steps - 1) * depth + 0.5)), t_steps - 1)
        block[m, t_spike] = 1.0
    return block


def ternary_encode(y: float, q_range: tuple, m_neurons: int = 8, t_steps: int = 10) -> np.ndarray:
    """Benchmark balanced-ternary encoding.

    y is quantized onto a signed index in [-(3^M - 1)/2, (3^M - 1)/2];
    its balanced-ternary digits d_m in {-1, 0, +1} drive neuron m
    constantly for all T steps.
    """
    u = _normalize_sample(y, q_range)
    levels = 3**m_neurons
    index = min(int(np.floor(u * levels)), levels - 1) - (levels - 1) // 2
    digits = balanced_ternary_digits(index, m_neurons)
    return np.repeat(digits[:, None], t_steps, axis=1).astype(float)


def balanced_ternary_digits(value: int, n_digits: int) -> np.ndarray:
    """Balanced-ternary digits of an integer, least significant first."""
    bound = (3**n_digits - 1) // 2
    if not -bound <= value <= bound:
        raise ValueError(f"{value} not representable in {n_digits} balanced trits")
    digits = np.zeros(n_digits, dtype=np.int64)
    v = int(value)
    for i in range(n_digits):
        r = v % 3
        if r == 0:
            digits[i] = 0
        elif r == 1:
            digits[i] = 1
            v -= 1
        else:
            digits[i] = -1
            v += 1
        v //= 3
    return digits


def _normalize_sample(y, q_range: tuple):
    y = np.asarray(y, dtype=float)
    if np.any(np.isnan(y)):
        raise ValueError("cannot encode NaN input")
    lo, hi = q_range
    return (np.clip(y, lo, hi) - lo) / (hi - lo)


def l1_over_l2(matrix: np.ndarray) -> float:
    """Scale-invariant sparsity ratio sum|w| / sqrt(sum w^2).

    Lies in [1, sqrt(#entries)]; 1 means a single active entry.
    """
    w = np.asarray(matrix, dtype=float)
    l2 = np.sqrt(np.sum(w**2))
    if l2 == 0.0:
        raise ValueError("l1-over-l2 ratio undefined for an all-zero matrix")
    return float(np.sum(np.abs(w)) / l2)


def sparsity_penalty(model: EncoderModel) -> float:
    """Average l1-over-l2 ratio over all class matrices."""
    s1 = np.sum(np.abs(model.matrices), axis=(1, 2))
    s2 = np.sqrt(np.sum(model.matrices**2, axis=(1, 2)))
    if np.any(s2 == 0.0):
        raise ValueError("l1-over-l2 ratio undefined for an all-zero matrix")
    return float(np.mean(s1 / s2))


def sparsity_penalty_grad(model: EncoderModel) -> np.ndarray:
    """Gradient of sparsity_penalty w.r.t. every matrix entry.

    d/dw [ S1/S2 ] = sign(w)/S2 - S1 * w / S2^3, averaged over classes.
    """
    w = model.matrices
    s1 = np.sum(np.abs(w), axis=(1, 2), keepdims=True)
    s2 = np.sqrt(np.sum(w**2, axis=(1, 2), keepdims=True))
    if np.any(s2 == 0.0):
        raise ValueError("l1-over-l2 gradient undefined for an all-zero matrix")
    return (np.sign(w) / s2 - s1 * w / s2**3) / model.n_classes


def normalize_matrices(model: EncoderModel) -> EncoderModel:
    """Rescale each class matrix to max |entry| = 1, in place.

    Divides by the largest absolute entry (preserving signs) so entries
    stay in [-1, 1]; small entries are pushed further toward zero in
    proportion. All-zero matrices are skipped with a warning. Idempotent.
    """
    peaks = np.max(np.abs(model.matrices), axis=(1, 2))
    zero = peaks == 0.0
    if np.any(zero):
        warnings.warn(
            f"{int(np.sum(zero))} all-zero encoder matrices left unnormalized",
            RuntimeWarning,
            stacklevel=2,
        )
        peaks[zero] = 1.0
    model.matrices /= peaks[:, None, None]
    return model


class LearnedEncoder:
    """Quantize-and-look-up encoder around an EncoderModel."""

    kind = "learned"
    trainable = True

    def __init__(self, model: EncoderModel):
        self.model = model

    @property
    def m_neurons(self) -> int:
        return self.model.m_neurons

    @property
    def t_steps(self) -> int:
        return self.model.t_steps

    def classify_windows(self, windows: np.ndarray) -> np.ndarray:
        return quantize_uniform(windows, self.model.q_range, self.model.n_classes)

    def encode_windows(self, windows: np.ndarray) -> np.ndarray:
        """(B, d_tap) sample windows -> (B, M*d_tap, T) rasters."""
        classes = self.classify_windows(windows)
        raster = self.model.matrices[classes - 1]  # (B, d_tap, M, T)
        if self.model.graded_bits is not None:
            raster = quantize_graded(raster, self.model.graded_bits)
        b, d_tap = classes.shape
        return raster.reshape(b, d_tap * self.m_neurons, self.t_steps)


class LogScaleEncoder:
    """Benchmark encoder: one log-spaced spike time per neuron."""

    kind = "log_scale"
    trainable = False

    def __init__(self, q_range: tuple, m_neurons: int = 10, t_steps: int = 30):
        self.q_range = q_range
        self.m_neurons = m_neurons
        self.t_steps = t_steps

    def encode_windows(self, windows: np.ndarray) -> np.ndarray:
        u = _normalize_sample(windows, self.q_range)  # (B, d_tap)
        scale = 2.0 ** np.arange(self.m_neurons)
        depth = np.minimum(scale[None, None, :] * (1.0 - u[:, :, None]), 1.0)
        t_spike = np.floor((self.t_steps - 1) * depth + 0.5).astype(np.int64)
        t_spike = np.minimum(t_spike, self.t_steps - 1)  # (B, d_tap, M)
        b, d_tap = u.shape
        raster = np.zeros((b, d_tap * self.m_neurons, self.t_steps))
        rows = np.arange(d_tap * self.m_neurons)
        raster[np.arange(b)[:, None], rows[None, :], t_spike.reshape(b, -1)] = 1.0
        return raster


class TernaryEncoder:
    """Benchmark encoder: balanced-ternary digits held for all T steps."""

    kind = "ternary"
    trainable = False

    def __init__(self, q_range: tuple, m_neurons: int = 8, t_steps: int = 10):
        self.q_range = q_range
        self.m_neurons = m_neurons
        self.t_steps = t_steps
        levels = 3**m_neurons
        offset = (levels - 1) // 2
        self._digit_table = np.stack(
            [balanced_ternary_digits(i - offset, m_neurons) for i in range(levels)]
        ).astype(float)

    def encode_windows(self, windows: np.ndarray) -> np.ndarray:
        u = _normalize_sample(windows, self.q_range)
        levels = 3**self.m_neurons
        idx = np.minimum(np.floor(u * levels).astype(np.int64), levels - 1)
        digits = self._digit_table[idx]  # (B, d_tap, M)
        b, d_tap = u.shape
        raster = np.repeat(
            digits.reshape(b, d_tap * self.m_neurons)[:, :, None], self.t_steps, axis=2
        )
        return raster
