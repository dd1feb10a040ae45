"""Pure-numpy kernels; same contracts as the compiled _kernels_cy module.

Accumulation happens in float64 and is rounded to float32 once, so the two
backends agree to the last float32 ulp in practice. Threshold application
and max pooling involve no accumulation and are bit-identical across
backends.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def apply_threshold(values: np.ndarray, threshold: float) -> np.ndarray:
    """Zero every element with |v| <= threshold (canonical +0.0), keep the
    rest bit-unchanged. values: 1-D float32; returns a new array."""
    out = values.copy()
    out[np.abs(values) <= threshold] = np.float32(0.0)
    return out


def conv2d_valid(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    """Valid cross-correlation. x: (n, C, H, W) float32 (pre-padded by the
    caller), w: (F, C, KH, KW) float32. Returns (n, F, OH, OW) float32."""
    kh, kw = w.shape[2], w.shape[3]
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    # windows: (n, C, OH, OW, KH, KW); contract C, KH, KW against w in f64
    out = np.tensordot(windows.astype(np.float64), w.astype(np.float64),
                       axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2)).astype(np.float32)


def maxpool2d(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    """Window max. x: (n, C, H, W) float32; returns (n, C, OH, OW) float32."""
    windows = sliding_window_view(x, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    return np.ascontiguousarray(windows.max(axis=(4, 5)))
