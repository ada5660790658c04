"""Delay-Doppler ambiguity of code/filter pairs and scalar quality metrics.

The ambiguity magnitude is |sum_n a(n) * b(n + tau) * exp(j 2 pi fd n)| with
the filter re-indexed so that tau = 0 lands on the mainlobe center of the
convolution output: chi(tau, fd) = conv(a * exp(j 2 pi fd n), h)[center - tau].
With that alignment (0, 0) is the matched-output point and the zero-Doppler
cut is exactly the filtered response. Doppler frequencies are normalized to
cycles per code sample (fd * T_s).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .waveform import (
    DB_FLOOR,
    CodeFilterPair,
    OrthogonalSet,
    filtered_response,
    magnitude_db,
    mainlobe_window,
)

DEFAULT_DOPPLER_SPAN = 0.05
DEFAULT_DOPPLER_POINTS = 64
DEFAULT_DOPPLER_LOSS_TABLE = (0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05)


def default_delay_axis(code_length: int, filter_length: int, center: int) -> np.ndarray:
    """Every delay with support: tau = center - m over output samples m."""
    out_len = code_length + filter_length - 1
    return np.arange(center - out_len + 1, center + 1)


def default_doppler_axis(
    span: float = DEFAULT_DOPPLER_SPAN, points: int = DEFAULT_DOPPLER_POINTS
) -> np.ndarray:
    return np.linspace(-span, span, points)


@dataclass(frozen=True)
class AmbiguityGrid:
    """|chi| over a delay-Doppler lattice, in dB relative to the (0, 0)
    mainlobe value (``reference_magnitude``). Rows index Doppler."""

    delay_axis: np.ndarray
    doppler_axis: np.ndarray
    magnitudes_db: np.ndarray
    reference_magnitude: float


@dataclass(frozen=True)
class SidelobeMetrics:
    """Scalar quality summary of one pair's zero-Doppler response.

    ``doppler_loss_db`` tabulates (normalized Doppler, peak reduction in dB,
    positive = loss) over the configured Doppler values.
    """

    psl_db: float
    isl_db: float
    mainlobe_width_measured: int
    doppler_loss_db: tuple


def _pair_arrays(pair: CodeFilterPair):
    return pair.code.samples, pair.filter.coefficients, pair.filter.mainlobe_center


def ambiguity_linear(code, filt, center: int, delays, dopplers) -> tuple:
    """Linear-magnitude grid plus the (0, 0) reference magnitude.

    Delays without overlap are exactly zero.
    """
    code = np.asarray(code, dtype=np.complex128)
    filt = np.asarray(filt, dtype=np.complex128)
    delays = np.asarray(delays, dtype=np.int64)
    dopplers = np.asarray(dopplers, dtype=np.float64)
    if delays.size == 0 or dopplers.size == 0:
        raise ValueError("delay and Doppler axes must be nonempty")
    out_len = code.size + filt.size - 1
    n_idx = np.arange(code.size)
    sample_idx = center - delays
    valid = (sample_idx >= 0) & (sample_idx < out_len)
    grid = np.zeros((dopplers.size, delays.size), dtype=np.float64)
    for row, fd in enumerate(dopplers):
        rotated = code * np.exp(2j * np.pi * fd * n_idx)
        full = np.convolve(rotated, filt)
        grid[row, valid] = np.abs(full[sample_idx[valid]])
    reference = float(np.abs(np.convolve(code, filt)[center]))
    return grid, reference


def ambiguity(
    pair: CodeFilterPair, delays=None, dopplers=None
) -> AmbiguityGrid:
    """Ambiguity grid of a pair in dB relative to its (0, 0) mainlobe value."""
    code, filt, center = _pair_arrays(pair)
    if delays is None:
        delays = default_delay_axis(code.size, filt.size, center)
    if dopplers is None:
        dopplers = default_doppler_axis()
    delays = np.asarray(delays, dtype=np.int64)
    dopplers = np.asarray(dopplers, dtype=np.float64)
    linear, reference = ambiguity_linear(code, filt, center, delays, dopplers)
    return AmbiguityGrid(
        delay_axis=delays,
        doppler_axis=dopplers,
        magnitudes_db=magnitude_db(linear, reference),
        reference_magnitude=reference,
    )


def zero_doppler_cut(pair: CodeFilterPair) -> np.ndarray:
    """Filtered response over all output lags, in dB relative to the mainlobe."""
    y = filtered_response(pair)
    reference = np.abs(y[pair.filter.mainlobe_center])
    return magnitude_db(y, reference)


def cross_ambiguity_peak(pair_i: CodeFilterPair, pair_j: CodeFilterPair) -> float:
    """Peak of |code_i through filter_j| over all lags, dB relative to pair_j's
    mainlobe gain: the worst-case leakage of code i into channel j."""
    y = np.convolve(pair_i.code.samples, pair_j.filter.coefficients)
    peak = float(np.max(np.abs(y)))
    if peak == 0.0:
        return DB_FLOOR
    reference = abs(pair_j.mainlobe_gain)
    if reference == 0.0:
        return DB_FLOOR
    return float(magnitude_db(peak, reference))


def cross_peak_matrix(oset: OrthogonalSet) -> np.ndarray:
    """k x k matrix of cross-ambiguity peaks in dB (diagonal: self peaks)."""
    k = oset.set_size
    out = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            out[i, j] = cross_ambiguity_peak(oset.pairs[i], oset.pairs[j])
    return out


def response_metrics(response, center: int, width: int):
    """(psl_db, isl_db, measured -3 dB width) of a complex or magnitude response."""
    mag = np.abs(np.asarray(response))
    reference = mag[center]
    win = mainlobe_window(center, width)
    mask = np.ones(mag.size, dtype=bool)
    mask[win] = False
    if reference == 0.0:
        return DB_FLOOR, DB_FLOOR, 0
    side = mag[mask]
    psl = float(magnitude_db(np.max(side), reference)) if side.size else DB_FLOOR
    main_energy = float(np.sum(mag[win] ** 2))
    side_energy = float(np.sum(side**2))
    with np.errstate(divide="ignore"):
        isl = float(np.maximum(10.0 * np.log10(side_energy / main_energy), DB_FLOOR)) if side_energy > 0 else DB_FLOOR
    # measured width: contiguous run around the peak above the -3 dB crossing
    threshold = reference * 10 ** (-3.0 / 20.0)
    lo = center
    while lo - 1 >= 0 and mag[lo - 1] >= threshold:
        lo -= 1
    hi = center
    while hi + 1 < mag.size and mag[hi + 1] >= threshold:
        hi += 1
    return psl, isl, hi - lo + 1


def metrics(pair: CodeFilterPair, doppler_values=DEFAULT_DOPPLER_LOSS_TABLE) -> SidelobeMetrics:
    """Zero-Doppler PSL/ISL plus a peak-loss table over Doppler values."""
    code, filt, center = _pair_arrays(pair)
    y = filtered_response(pair)
    psl, isl, measured = response_metrics(y, center, pair.filter.mainlobe_width)
    reference = float(np.abs(y[center]))
    losses = []
    n_idx = np.arange(code.size)
    for fd in doppler_values:
        rotated = code * np.exp(2j * np.pi * float(fd) * n_idx)
        peak = float(np.max(np.abs(np.convolve(rotated, filt))))
        if reference == 0.0 or peak == 0.0:
            losses.append((float(fd), -DB_FLOOR))
        else:
            losses.append((float(fd), float(-magnitude_db(peak, reference))))
    return SidelobeMetrics(
        psl_db=psl,
        isl_db=isl,
        mainlobe_width_measured=measured,
        doppler_loss_db=tuple(losses),
    )


def set_metrics_summary(oset: OrthogonalSet, doppler_values=DEFAULT_DOPPLER_LOSS_TABLE) -> dict:
    """Per-pair metrics and cross peaks for a whole set, as plain data."""
    per_pair = []
    for p in oset.pairs:
        m = metrics(p, doppler_values)
        per_pair.append(
            {
                "psl_db": m.psl_db,
                "isl_db": m.isl_db,
                "mainlobe_width_measured": m.mainlobe_width_measured,
                "doppler_loss_db": [list(entry) for entry in m.doppler_loss_db],
            }
        )
    cross = cross_peak_matrix(oset)
    k = oset.set_size
    worst_cross = float(
        np.max(cross[~np.eye(k, dtype=bool)]) if k > 1 else DB_FLOOR
    )
    return {
        "pairs": per_pair,
        "cross_peak_matrix_db": cross.tolist(),
        "worst_cross_peak_db": worst_cross,
        "worst_auto_psl_db": float(max(entry["psl_db"] for entry in per_pair)),
        "isl_error": None if oset.isl_error is None else float(oset.isl_error),
    }
