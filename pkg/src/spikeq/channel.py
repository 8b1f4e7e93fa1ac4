"""IM/DD optical link simulation.

Simulates a chromatic-dispersion-limited intensity-modulation /
direct-detection link at symbol level: Gray-mapped 4-ary amplitudes,
root-raised-cosine pulse shaping, bias, dispersive fiber propagation,
square-law photodiode, power normalization, additive Gaussian noise and
a matched-filter receiver front end. All functions are pure; every
random draw comes from an explicitly passed generator.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sp_fft

SPEED_OF_LIGHT = 299_792_458.0  # m/s

#: 4-ary amplitude alphabet, index 1..4.
AMPLITUDES = np.array([0.0, 1.0, np.sqrt(2.0), np.sqrt(3.0)])

#: Gray-coded bit pairs for symbol indices 1..4 (adjacent amplitudes
#: differ in exactly one bit): 00, 01, 11, 10.
GRAY_BITS = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.uint8)

# bit pair (b0, b1) -> symbol index 1..4
_BITS_TO_INDEX = np.zeros((2, 2), dtype=np.int64)
for _i, (_b0, _b1) in enumerate(GRAY_BITS):
    _BITS_TO_INDEX[_b0, _b1] = _i + 1


@dataclass
class LinkConfig:
    """Physical and receiver parameters of the simulated link."""

    fiber_length_km: float = 5.0
    baud_rate_GBd: float = 100.0
    rolloff: float = 0.2
    wavelength_nm: float = 1270.0
    dispersion_ps_nm_km: float = -17.0
    samples_per_symbol: int = 4
    rrc_span_symbols: int = 32
    bias: float = 2.25
    d_tap: int = 41
    seed: int = 0
    matched_filter: bool = True
    ac_coupling: bool = True

    def __post_init__(self):
        if self.samples_per_symbol < 2:
            raise ValueError("samples_per_symbol must be >= 2")
        if self.d_tap < 1 or self.d_tap % 2 == 0:
            raise ValueError("d_tap must be an odd positive integer")
        if not 0.0 < self.rolloff <= 1.0:
            raise ValueError("rolloff must be in (0, 1]")
        if self.bias < 0:
            raise ValueError("bias must be >= 0")
        if self.rrc_span_symbols < 1:
            raise ValueError("rrc_span_symbols must be positive")
        if (self.rrc_span_symbols * self.samples_per_symbol) % 2 != 0:
            # keeps the shaping/matched filter group delay an integer
            # number of samples so symbol-rate sampling stays aligned
            raise ValueError("rrc_span_symbols * samples_per_symbol must be even")

    @property
    def sample_rate_hz(self) -> float:
        return self.baud_rate_GBd * 1e9 * self.samples_per_symbol

    @property
    def beta2_s2_per_m(self) -> float:
        """Group-velocity dispersion from D and the carrier wavelength."""
        d_si = self.dispersion_ps_nm_km * 1e-6  # s/m^2
        lam = self.wavelength_nm * 1e-9
        return -d_si * lam**2 / (2.0 * np.pi * SPEED_OF_LIGHT)


@dataclass
class SymbolBlock:
    """Aligned transmit labels and received symbol-rate samples.

    ``received[i]`` is the receiver output for the symbol carrying
    ``bits[i]`` / ``symbol_indices[i]``; edge symbols corrupted by
    filter ramps or dispersion wrap-around are already trimmed.
    """

    bits: np.ndarray            # (n, 2) uint8
    symbol_indices: np.ndarray  # (n,) int, values 1..4
    received: np.ndarray        # (n,) float

    def __post_init__(self):
        if not (len(self.bits) == len(self.symbol_indices) == len(self.received)):
            raise ValueError("bits, symbol_indices and received must have equal length")

    def __len__(self) -> int:
        return len(self.received)


def bits_to_symbol_indices(bits: np.ndarray) -> np.ndarray:
    """Gray-map bit pairs to symbol indices 1..4."""
    b = np.asarray(bits)
    if b.ndim == 1:
        if b.size % 2 != 0:
            raise ValueError("flat bit array must have even length")
        b = b.reshape(-1, 2)
    return _BITS_TO_INDEX[b[:, 0], b[:, 1]]


def symbol_indices_to_bits(indices: np.ndarray) -> np.ndarray:
    """Inverse Gray map: symbol indices 1..4 to bit pairs."""
    idx = np.asarray(indices)
    if np.any((idx < 1) | (idx > 4)):
        raise ValueError("symbol indices must lie in 1..4")
    return GRAY_BITS[idx - 1]


def map_bits_to_symbols(bits: np.ndarray) -> np.ndarray:
    """Gray-map bit pairs to amplitudes {0, 1, sqrt(2), sqrt(3)}."""
    return AMPLITUDES[bits_to_symbol_indices(bits) - 1]


def rrc_taps(samples_per_symbol: int, rolloff: float, span_symbols: int) -> np.ndarray:
    """Unit-energy root-raised-cosine filter, span_symbols*sps + 1 taps."""
    sps = samples_per_symbol
    n_taps = span_symbols * sps + 1
    t = (np.arange(n_taps) - (n_taps - 1) / 2) / sps  # in symbol periods
    beta = rolloff

    h = np.empty(n_taps)
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            h[i] = 1.0 + beta * (4.0 / np.pi - 1.0)
        elif abs(abs(ti) - 1.0 / (4.0 * beta)) < 1e-12:
            h[i] = (beta / np.sqrt(2.0)) * (
                (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
                + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
            )
        else:
            num = np.sin(np.pi * ti * (1.0 - beta)) + 4.0 * beta * ti * np.cos(
                np.pi * ti * (1.0 + beta)
            )
            den = np.pi * ti * (1.0 - (4.0 * beta * ti) ** 2)
            h[i] = num / den
    return h / np.sqrt(np.sum(h**2))


def pulse_shape(amplitudes: np.ndarray, cfg: LinkConfig) -> np.ndarray:
    """Upsample the amplitude train and convolve with the RRC filter.

    Returns the full linear convolution; symbol k peaks at sample
    ``k*sps + span*sps/2``.
    """
    amps = np.asarray(amplitudes, dtype=float)
    if len(amps) < cfg.rrc_span_symbols:
        raise ValueError(
            f"block of {len(amps)} symbols is shorter than the "
            f"{cfg.rrc_span_symbols}-symbol filter span"
        )
    sps = cfg.samples_per_symbol
    up = np.zeros(len(amps) * sps)
    up[::sps] = amps
    h = rrc_taps(sps, cfg.rolloff, cfg.rrc_span_symbols)
    return np.convolve(up, h, mode="full")


def add_bias(waveform: np.ndarray, cfg: LinkConfig) -> np.ndarray:
    """Add the transmitter bias elementwise."""
    return np.asarray(waveform) + cfg.bias


def apply_chromatic_dispersion(waveform: np.ndarray, cfg: LinkConfig) -> np.ndarray:
    """Propagate through the dispersive fiber.

    All-pass frequency response H(w) = exp(j * beta2/2 * w^2 * L) applied
    circularly to the waveform treated as a complex field envelope. The
    filter is unitary, so input and output energies match to rounding;
    wrap-around only touches the block edges, which simulate_link trims.
    """
    w = np.asarray(waveform)
    if cfg.fiber_length_km == 0.0:
        return w.astype(complex)
    n = len(w)
    omega = 2.0 * np.pi * sp_fft.fftfreq(n, d=1.0 / cfg.sample_rate_hz)
    length_m = cfg.fiber_length_km * 1e3
    transfer = np.exp(1j * (cfg.beta2_s2_per_m / 2.0) * omega**2 * length_m)
    return sp_fft.ifft(sp_fft.fft(w.astype(complex)) * transfer)


def photodiode(waveform: np.ndarray) -> np.ndarray:
    """Square-law detection: |field|^2, always nonnegative."""
    return np.abs(np.asarray(waveform)) ** 2


def remove_dc(waveform: np.ndarray) -> np.ndarray:
    """AC-couple the detected waveform (subtract its mean).

    Strips the carrier/bias power so that the subsequent unit-power
    normalization, and with it the noise-to-signal ratio sigma^2, refer
    to the information-bearing part of the signal.
    """
    w = np.asarray(waveform, dtype=float)
    return w - np.mean(w)


def normalize_power(waveform: np.ndarray) -> tuple[np.ndarray, float]:
    """Scale to unit average power; returns (scaled waveform, scale)."""
    w = np.asarray(waveform, dtype=float)
    mean_power = np.mean(w**2)
    if mean_power == 0.0:
        raise ValueError("cannot normalize an all-zero waveform")
    scale = 1.0 / np.sqrt(mean_power)
    return w * scale, scale


def add_awgn(waveform: np.ndarray, sigma2_dB, rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise with variance 10^(sigma2_dB/10).

    ``sigma2_dB`` of None or -inf disables the noise entirely.
    """
    w = np.asarray(waveform, dtype=float)
    if sigma2_dB is None or sigma2_dB == -np.inf:
        return w
    sigma = np.sqrt(10.0 ** (sigma2_dB / 10.0))
    return w + rng.normal(0.0, sigma, size=w.shape)


def receiver_front_end(waveform: np.ndarray, cfg: LinkConfig) -> np.ndarray:
    """Matched-filter and sample the received waveform at symbol rate.

    Expects the output of the transmit chain (length n*sps + span*sps,
    full convolution with the shaping filter). Applies the RRC matched
    filter (unless cfg.matched_filter is off), samples at the composite
    group delay and trims span/2 symbols per edge: n symbols in,
    n - rrc_span_symbols out, aligned to symbols span/2 .. n - span/2 - 1.
    """
    w = np.asarray(waveform, dtype=float)
    sps = cfg.samples_per_symbol
    span = cfg.rrc_span_symbols
    filt_len = span * sps + 1
    n_symbols, rem = divmod(len(w) - filt_len + 1, sps)
    if rem != 0 or n_symbols <= span:
        raise ValueError("waveform length inconsistent with the transmit chain")

    if cfg.matched_filter:
        h = rrc_taps(sps, cfg.rolloff, span)
        w = np.convolve(w, h, mode="full")
        delay = filt_len - 1
    else:
        delay = (filt_len - 1) // 2

    keep = np.arange(span // 2, n_symbols - span // 2)
    return w[keep * sps + delay]


def dispersion_guard_symbols(cfg: LinkConfig) -> int:
    """Symbols per edge contaminated by circular dispersion wrap-around.

    Bounds the group-delay spread over the shaped signal's bandwidth,
    with a 3x safety factor for filter and photodiode spectral tails.
    """
    if cfg.fiber_length_km == 0.0:
        return 0
    f_max = 0.5 * (1.0 + cfg.rolloff) * cfg.baud_rate_GBd * 1e9
    spread_s = abs(cfg.beta2_s2_per_m) * cfg.fiber_length_km * 1e3 * 2.0 * np.pi * f_max
    symbol_period = 1.0 / (cfg.baud_rate_GBd * 1e9)
    return int(np.ceil(3.0 * spread_s / symbol_period))


def simulate_link(
    cfg: LinkConfig,
    n_symbols: int,
    sigma2_dB,
    rng: np.random.Generator | None = None,
    photodiode_bypass: bool = False,
) -> SymbolBlock:
    """Run the full link: map, shape, bias, dispersion, detection, noise, RX.

    Returns aligned (bits, symbol_indices, received) with edge symbols
    trimmed (rrc span plus a dispersion guard). ``photodiode_bypass``
    replaces the square-law detector with the field's real part, for
    linear loopback checks only.
    """
    if n_symbols <= cfg.d_tap + cfg.rrc_span_symbols:
        raise ValueError("n_symbols must exceed d_tap + rrc_span_symbols")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    bits = rng.integers(0, 2, size=(n_symbols, 2)).astype(np.uint8)
    indices = bits_to_symbol_indices(bits)
    amps = AMPLITUDES[indices - 1]

    wave = pulse_shape(amps, cfg)
    wave = add_bias(wave, cfg)
    field = apply_chromatic_dispersion(wave, cfg)
    intensity = field.real if photodiode_bypass else photodiode(field)
    if cfg.ac_coupling:
        intensity = remove_dc(intensity)
    normalized, _scale = normalize_power(intensity)
    noisy = add_awgn(normalized, sigma2_dB, rng)
    y = receiver_front_end(noisy, cfg)

    span2 = cfg.rrc_span_symbols // 2
    kept = slice(span2, n_symbols - span2)
    bits, indices = bits[kept], indices[kept]

    guard = dispersion_guard_symbols(cfg)
    if guard:
        if 2 * guard >= len(y):
            raise ValueError("block too short for the dispersion guard trim")
        inner = slice(guard, len(y) - guard)
        bits, indices, y = bits[inner], indices[inner], y[inner]

    return SymbolBlock(bits=bits, symbol_indices=indices, received=y)


def frame_windows(block: SymbolBlock, d_tap: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Slide a d_tap window over the received samples, one label per window.

    The window for label k' spans received[k' - floor(d/2) .. k' + ceil(d/2) - 1]
    with k' in [ceil(d/2), len - ceil(d/2)], giving len(block) - d_tap
    windows, each labeled by its central symbol.

    Returns (windows (n, d_tap), labels (n,), label_bits (n, 2)).
    """
    n = len(block)
    if n <= d_tap:
        raise ValueError("block must be longer than d_tap")
    half_up = (d_tap + 1) // 2  # ceil(d/2)
    labels_k = np.arange(half_up, n - half_up + 1)
    all_windows = np.lib.stride_tricks.sliding_window_view(block.received, d_tap)
    windows = all_windows[labels_k - (d_tap // 2)]
    return windows, block.symbol_indices[labels_k], block.bits[labels_k]


def symbol_block_to_csv(block: SymbolBlock, path) -> None:
    """Dump (k, b0, b1, a, y) rows for external inspection."""
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["k", "b0", "b1", "a", "y"])
        for k in range(len(block)):
            writer.writerow(
                [
                    k,
                    int(block.bits[k, 0]),
                    int(block.bits[k, 1]),
                    int(block.symbol_indices[k]),
                    repr(float(block.received[k])),
                ]
            )
