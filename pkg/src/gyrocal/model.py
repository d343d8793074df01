"""Forward passes and parameter containers for the two subnets.

The calibration subnet is two linear blocks (each a 3x3 matrix plus a
3-vector bias, together one affine map per block) joined by a per-axis
PReLU, with a residual skip from the first block's output:

    h = lbn1(omega_raw)
    y = lbn2(prelu(h)) + h

The denoising subnet is a stack of three valid (no-padding) 1-D
convolutions with LeakyReLU activations, applied to each axis
independently with shared weights. One window of the newest N
calibrated samples yields one denoised sample at the window's newest
timestamp.

Parameter budget: 27 scalars for calibration (2 x 12 + 3 slopes) and
168 for denoising, 195 combined.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# (out_channels, in_channels, kernel_length) per convolution layer
DENOISE_LAYER_SHAPES = ((4, 1, 7), (5, 4, 5), (1, 5, 6))

# samples of history one denoised output depends on: 7 + (5-1) + (6-1)
RECEPTIVE_FIELD = sum(k for _, _, k in DENOISE_LAYER_SHAPES) - len(DENOISE_LAYER_SHAPES) + 1

DEFAULT_LEAKY_SLOPE = 0.01
DEFAULT_PRELU_SLOPE = 0.25


def _array(a, shape, name):
    a = np.asarray(a, dtype=np.float64)
    if a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    return a


@dataclass
class LBNParams:
    """One linear block: y = matrix @ omega + bias (12 scalars)."""

    matrix: np.ndarray  # (3, 3), dimensionless
    bias: np.ndarray  # (3,), rad/s

    def __post_init__(self):
        self.matrix = _array(self.matrix, (3, 3), "matrix")
        self.bias = _array(self.bias, (3,), "bias")

    @classmethod
    def identity(cls) -> "LBNParams":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def zeros(cls) -> "LBNParams":
        return cls(np.zeros((3, 3)), np.zeros(3))

    def copy(self) -> "LBNParams":
        return LBNParams(self.matrix.copy(), self.bias.copy())


@dataclass
class CalibNetParams:
    """Calibration subnet parameters: two linear blocks + 3 PReLU slopes."""

    lbn1: LBNParams
    lbn2: LBNParams
    prelu_slopes: np.ndarray  # (3,), one trained slope per axis channel

    def __post_init__(self):
        self.prelu_slopes = _array(self.prelu_slopes, (3,), "prelu_slopes")

    @classmethod
    def init_default(cls) -> "CalibNetParams":
        """Identity first block, zero second block.

        The manufacturer's rough calibration makes identity a strong
        prior, and a zero second block makes the initial net exactly
        linear.
        """
        return cls(LBNParams.identity(), LBNParams.zeros(), np.full(3, DEFAULT_PRELU_SLOPE))

    def copy(self) -> "CalibNetParams":
        return CalibNetParams(self.lbn1.copy(), self.lbn2.copy(), self.prelu_slopes.copy())


@dataclass
class DenoiseNetParams:
    """Denoising subnet parameters, shared across the three axes.

    ``leaky_slope`` is a fixed constant, not trained and not counted.
    """

    conv1_w: np.ndarray  # (4, 1, 7)
    conv1_b: np.ndarray  # (4,)
    conv2_w: np.ndarray  # (5, 4, 5)
    conv2_b: np.ndarray  # (5,)
    conv3_w: np.ndarray  # (1, 5, 6)
    conv3_b: np.ndarray  # (1,)
    leaky_slope: float = DEFAULT_LEAKY_SLOPE

    def __post_init__(self):
        (s1, s2, s3) = DENOISE_LAYER_SHAPES
        self.conv1_w = _array(self.conv1_w, s1, "conv1_w")
        self.conv1_b = _array(self.conv1_b, (s1[0],), "conv1_b")
        self.conv2_w = _array(self.conv2_w, s2, "conv2_w")
        self.conv2_b = _array(self.conv2_b, (s2[0],), "conv2_b")
        self.conv3_w = _array(self.conv3_w, s3, "conv3_w")
        self.conv3_b = _array(self.conv3_b, (s3[0],), "conv3_b")

    @classmethod
    def random_init(cls, seed: int, scale: float = 0.05) -> "DenoiseNetParams":
        """Small uniform random weights and biases in [-scale, +scale]."""
        rng = np.random.default_rng(seed)
        arrays = []
        for shape in DENOISE_LAYER_SHAPES:
            arrays.append(rng.uniform(-scale, scale, size=shape))
            arrays.append(rng.uniform(-scale, scale, size=shape[0]))
        return cls(*arrays)

    def layers(self):
        return (
            (self.conv1_w, self.conv1_b),
            (self.conv2_w, self.conv2_b),
            (self.conv3_w, self.conv3_b),
        )

    def copy(self) -> "DenoiseNetParams":
        return DenoiseNetParams(
            self.conv1_w.copy(),
            self.conv1_b.copy(),
            self.conv2_w.copy(),
            self.conv2_b.copy(),
            self.conv3_w.copy(),
            self.conv3_b.copy(),
            self.leaky_slope,
        )


@dataclass
class NetConfig:
    """Window/segment geometry and the integration dt policy."""

    n: int = 50  # denoising window length, samples
    m: int = 400  # loss segment length, samples
    dt_policy: str = "timestamps"  # "timestamps" or "nominal"
    nominal_rate_hz: float = 200.0

    def __post_init__(self):
        if not (1 <= self.n <= self.m):
            raise ValueError(f"need 1 <= n <= m, got n={self.n}, m={self.m}")
        if self.dt_policy not in ("timestamps", "nominal"):
            raise ValueError(f"unknown dt policy {self.dt_policy!r}")


# canonical flattening order; also the wire order of the weight container
CALIB_PARAM_KEYS = ("lbn1.matrix", "lbn1.bias", "lbn2.matrix", "lbn2.bias", "prelu_slopes")
DENOISE_PARAM_KEYS = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "conv3_w", "conv3_b")


def calib_param_items(p: CalibNetParams):
    return [
        ("lbn1.matrix", p.lbn1.matrix),
        ("lbn1.bias", p.lbn1.bias),
        ("lbn2.matrix", p.lbn2.matrix),
        ("lbn2.bias", p.lbn2.bias),
        ("prelu_slopes", p.prelu_slopes),
    ]


def denoise_param_items(p: DenoiseNetParams):
    return [(k, getattr(p, k)) for k in DENOISE_PARAM_KEYS]


def calib_from_arrays(arrays) -> CalibNetParams:
    e1, b1, e2, b2, s = arrays
    return CalibNetParams(LBNParams(e1, b1), LBNParams(e2, b2), s)


def denoise_from_arrays(arrays, leaky_slope: float = DEFAULT_LEAKY_SLOPE) -> DenoiseNetParams:
    return DenoiseNetParams(*arrays, leaky_slope=leaky_slope)


def param_count(net) -> int:
    """Exact trainable scalar count of a parameter container.

    Accepts a single container or an iterable of containers (so the
    combined model can be counted in one call).
    """
    if isinstance(net, LBNParams):
        return net.matrix.size + net.bias.size
    if isinstance(net, CalibNetParams):
        return sum(a.size for _, a in calib_param_items(net))
    if isinstance(net, DenoiseNetParams):
        return sum(a.size for _, a in denoise_param_items(net))
    if isinstance(net, (tuple, list)):
        return sum(param_count(item) for item in net)
    raise TypeError(f"cannot count parameters of {type(net).__name__}")


def prelu(x, slopes) -> np.ndarray:
    """PReLU along the last axis; one slope per channel."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0.0, x, np.asarray(slopes, dtype=np.float64) * x)


def leaky_relu(x, slope: float = DEFAULT_LEAKY_SLOPE) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0.0, x, slope * x)


def lbn_forward(p: LBNParams, omega) -> np.ndarray:
    """Affine map matrix @ omega + bias; broadcasts over leading axes."""
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape[-1] != 3:
        raise ValueError("last axis of omega must have length 3")
    if not np.all(np.isfinite(omega)):
        raise ValueError("non-finite input to lbn_forward")
    return omega @ p.matrix.T + p.bias


def calib_forward(p: CalibNetParams, omega) -> np.ndarray:
    """Calibration subnet: residual skip from the first block's output."""
    h = lbn_forward(p.lbn1, omega)
    return lbn_forward(p.lbn2, prelu(h, p.prelu_slopes)) + h


def _conv1d_valid(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Valid 1-D convolution. x: (cin, L), w: (cout, cin, k) -> (cout, L-k+1)."""
    k = w.shape[2]
    windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)  # (cin, L-k+1, k)
    return np.einsum("ilk,oik->ol", windows, w) + b[:, None]


def _denoise_stack(p: DenoiseNetParams, x: np.ndarray) -> np.ndarray:
    """Conv stack over a (1, L) single-axis signal -> (L - RECEPTIVE_FIELD + 1,)."""
    for w, b in p.layers():
        x = leaky_relu(_conv1d_valid(x, w, b), p.leaky_slope)
    return x[0]


def denoise_forward(p: DenoiseNetParams, window) -> float:
    """Denoised estimate for the newest timestamp of one window.

    The window holds calibrated samples of a single axis, oldest first,
    and must be at least RECEPTIVE_FIELD samples long.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1:
        raise ValueError("window must be one-dimensional")
    if window.shape[0] < RECEPTIVE_FIELD:
        raise ValueError(
            f"window of {window.shape[0]} samples is shorter than the "
            f"receptive field ({RECEPTIVE_FIELD})"
        )
    return float(_denoise_stack(p, window[None, :])[-1])


def denoise_sequence(p: DenoiseNetParams, seq, n: int) -> np.ndarray:
    """Sliding-window denoising of a whole sequence.

    Sample k >= n-1 is the denoised estimate from window [k-n+1, k];
    earlier samples pass through unmodified (warm-up). ``seq`` is
    (L,) for one axis or (L, 3) for all three, each axis processed
    independently with the same parameters.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if n < RECEPTIVE_FIELD:
        raise ValueError(f"window length n={n} is shorter than the receptive field")
    squeeze = seq.ndim == 1
    if squeeze:
        seq = seq[:, None]
    length = seq.shape[0]
    if length < n:
        raise ValueError(f"sequence of {length} samples is shorter than the window ({n})")
    out = seq.copy()
    # The full-sequence conv stack equals per-window evaluation because a
    # window's output depends only on its last RECEPTIVE_FIELD samples.
    for axis in range(seq.shape[1]):
        stack = _denoise_stack(p, seq[:, axis][None, :])
        out[n - 1 :, axis] = stack[n - RECEPTIVE_FIELD :]
    return out[:, 0] if squeeze else out
