"""Adaptive noise cancellation with a tapped-delay-line LMS combiner.

The primary input carries signal plus noise; the reference input carries
correlated noise. Each step the combiner predicts the noise component from
the reference delay line, subtracts it, and nudges its weights along the
error gradient: w' = w + 2*mu*e_k*x_k. The running error signal is the
denoised output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DivergenceError, ParameterError
from .signal_io import AudioBuffer

MSE_WINDOW = 256

# |e| or |y| beyond this means the filter is blowing up; from here on every
# weight is checked so the exact divergence step is reported.
_GUARD = 1e100


@dataclass(frozen=True)
class LmsConfig:
    """Filter order, step size, and optional initial weights.

    order_l taps index delays 0..L, so the weight vector has L+1 entries.
    initial_weights defaults to all zeros.
    """

    order_l: int = 31
    step_mu: float = 0.005
    initial_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.order_l < 0:
            raise ParameterError("order_l must be >= 0")
        if not self.step_mu > 0:
            raise ParameterError("step_mu must be positive")
        if self.initial_weights is not None:
            weights = np.asarray(self.initial_weights, dtype=np.float64)
            if weights.shape != (self.order_l + 1,):
                raise ParameterError(
                    f"initial_weights must have length {self.order_l + 1}"
                )
            object.__setattr__(self, "initial_weights", weights)

    def start_weights(self) -> np.ndarray:
        if self.initial_weights is None:
            return np.zeros(self.order_l + 1)
        return self.initial_weights.copy()


@dataclass
class LmsState:
    """Weights plus the most recent reference samples, newest first."""

    weights: np.ndarray
    delay_line: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.delay_line = np.asarray(self.delay_line, dtype=np.float64)
        if self.weights.shape != self.delay_line.shape:
            raise DimensionError("weights and delay line must have equal length")


@dataclass(frozen=True)
class AncResult:
    """Output of a full cancellation run.

    error_signal is the denoised estimate (primary minus predicted noise),
    combiner_output the noise prediction, mse_trace the windowed mean of
    squared errors, final_weights the converged tap vector.
    """

    error_signal: AudioBuffer
    combiner_output: AudioBuffer
    mse_trace: np.ndarray
    final_weights: np.ndarray


def combiner_output(state: LmsState) -> float:
    """Dot product of the weights with the delay line."""
    return float(np.dot(state.weights, state.delay_line))


def lms_step(
    state: LmsState, d_k: float, x_k: float, mu: float
) -> tuple[LmsState, float, float]:
    """One LMS iteration.

    Pushes x_k into the delay line, forms the combiner output y_k, the error
    e_k = d_k - y_k, and updates the weights by 2*mu*e_k along the delay
    line. Returns (new state, e_k, y_k).
    """
    if not mu > 0:
        raise ParameterError("mu must be positive")
    delay = np.empty_like(state.delay_line)
    delay[0] = x_k
    delay[1:] = state.delay_line[:-1]
    y_k = float(np.dot(state.weights, delay))
    e_k = d_k - y_k
    weights = state.weights + (2.0 * mu * e_k) * delay
    if not np.all(np.isfinite(weights)):
        raise DivergenceError(state.k)
    return LmsState(weights, delay, state.k + 1), e_k, y_k


def run_anc(
    primary: AudioBuffer, reference: AudioBuffer, config: LmsConfig
) -> AncResult:
    """Run the LMS canceller over a whole recording.

    The reference should carry the noise that contaminates the primary; a
    zero reference leaves the primary untouched. Raises DivergenceError with
    the offending step index if the weights go non-finite.
    """
    if len(primary) != len(reference):
        raise DimensionError(
            f"length mismatch: primary {len(primary)} vs reference {len(reference)}"
        )
    if primary.sample_rate_hz != reference.sample_rate_hz:
        raise DimensionError("sample rate mismatch between primary and reference")
    if len(primary) == 0:
        raise DimensionError("empty input")

    taps = config.order_l + 1
    mu = config.step_mu
    weights = config.start_weights()
    d = primary.samples
    # Delay-line views: padded[k : k + taps][::-1] is [x_k, x_{k-1}, ..., x_{k-L}].
    padded = np.concatenate([np.zeros(taps - 1), reference.samples])
    n = len(d)
    errors = np.empty(n)
    outputs = np.empty(n)

    dot = np.dot
    isfinite = math.isfinite
    check_weights = False
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            x_vec = padded[k : k + taps][::-1]
            y = dot(weights, x_vec)
            e = d[k] - y
            if not (isfinite(e) and isfinite(y)):
                raise DivergenceError(k)
            weights += (2.0 * mu * e) * x_vec
            if not check_weights and (e > _GUARD or e < -_GUARD or y > _GUARD or y < -_GUARD):
                check_weights = True
            if check_weights and not np.all(np.isfinite(weights)):
                raise DivergenceError(k)
            errors[k] = e
            outputs[k] = y

    if not np.all(np.isfinite(weights)):
        raise DivergenceError(n - 1)
    rate = primary.sample_rate_hz
    return AncResult(
        error_signal=AudioBuffer(errors, rate),
        combiner_output=AudioBuffer(outputs, rate),
        mse_trace=mse_trace(errors, MSE_WINDOW),
        final_weights=weights,
    )


def mse_trace(errors: np.ndarray, window: int) -> np.ndarray:
    """Mean of squared errors over non-overlapping windows.

    A trailing partial window contributes its own mean. Empty input gives an
    empty trace.
    """
    if window < 1:
        raise ParameterError("window must be >= 1")
    errors = np.asarray(errors, dtype=np.float64)
    n = len(errors)
    if n == 0:
        return np.empty(0)
    squared = errors**2
    full = n // window
    trace = []
    if full:
        trace.append(squared[: full * window].reshape(full, window).mean(axis=1))
    if n % window:
        trace.append([squared[full * window :].mean()])
    return np.concatenate(trace)
