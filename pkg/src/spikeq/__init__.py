"""Spiking neural network equalization workbench for IM/DD optical links.

A numpy library for simulating a dispersive intensity-modulated optical
link, encoding received samples into spike rasters (learnable matrix
encoding plus log-scale and ternary benchmarks), training a small LIF
network equalizer with surrogate-gradient BPTT under an l1-over-l2
sparsity penalty, and reproducing BER / spike-rate experiment grids.
"""

from .channel import (
    AMPLITUDES,
    GRAY_BITS,
    LinkConfig,
    SymbolBlock,
    frame_windows,
    map_bits_to_symbols,
    simulate_link,
)
from .encoding import (
    EncoderModel,
    LearnedEncoder,
    LogScaleEncoder,
    TernaryEncoder,
    init_encoder,
    l1_over_l2,
    normalize_matrices,
    quantize_graded,
    quantize_uniform,
    sparsity_penalty,
)
from .evaluation import (
    CurvePoint,
    SweepSpec,
    ber_sweep,
    quantization_sweep,
    slicer_baseline,
    spike_rate_table,
    weight_histogram,
)
from .snn import (
    DivergenceError,
    LifParams,
    NetTrace,
    ReadoutParams,
    SnnModel,
    decide,
    forward,
    init_snn,
    surrogate_grad,
)
from .training import (
    TrainConfig,
    TrainHistory,
    adam_step,
    calibrate_q_range,
    cross_entropy,
    total_loss,
    train,
    validate,
)

__version__ = "0.1.0"
