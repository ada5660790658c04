"""Convolution matrices, sidelobe Gram forms, and the closed-form ISL filter.

For a code of length N and filter length Lf, the transmit convolution matrix
X is (N+Lf-1) x Lf with X[r, c] = code[r-c] (zero outside 0 <= r-c < N), so
``X @ h`` is the filtered output. The sidelobe objective for filter i sums
``|rows @ h|^2`` where the rows are: code i's output rows with the mainlobe
window deleted, plus every other code's rows in full (cross-talk has no
protected mainlobe). The minimizer subject to a fixed mainlobe gain L has
the closed form ``h = L * R^-1 a / (a^H R^-1 a)`` with R the summed Gram and
``a`` the conjugated mainlobe-center row.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .waveform import (
    CodeFilterPair,
    MismatchedFilter,
    OrthogonalSet,
    PolyphaseCode,
    default_mainlobe_center,
    mainlobe_window,
)


class SolverError(RuntimeError):
    """Raised when the filter system is singular beyond ridge repair."""

    def __init__(self, message: str, condition_estimate: float = None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


def convolution_matrix(code, filter_length: int) -> np.ndarray:
    """(N+Lf-1) x Lf Toeplitz matrix whose product with h is conv(code, h)."""
    code = np.asarray(code, dtype=np.complex128)
    if filter_length < code.size:
        raise ValueError(
            f"filter length {filter_length} must be >= code length {code.size}"
        )
    return scipy.linalg.convolution_matrix(code, filter_length, mode="full")


def mainlobe_rows(code, filter_length: int, center: int, width: int) -> np.ndarray:
    """The mainlobe-window rows of the convolution matrix, built directly."""
    code = np.asarray(code, dtype=np.complex128)
    n = code.size
    win = mainlobe_window(center, width)
    rows = np.zeros((width, filter_length), dtype=np.complex128)
    for w, r in enumerate(range(win.start, win.stop)):
        lo = max(0, r - n + 1)
        hi = min(filter_length - 1, r)
        cols = np.arange(lo, hi + 1)
        rows[w, cols] = code[r - cols]
    return rows


def sidelobe_matrix(code, filter_length: int, center: int, width: int):
    """Convolution matrix with the mainlobe rows deleted.

    Returns (entries, removed_rows).
    """
    full = convolution_matrix(code, filter_length)
    removed = np.arange(mainlobe_window(center, width).start, mainlobe_window(center, width).stop)
    return np.delete(full, removed, axis=0), removed


def full_gram(code, filter_length: int, method: str = "dense") -> np.ndarray:
    """Lf x Lf Gram X^H X of the full convolution matrix.

    ``method="dense"`` forms X explicitly; ``method="toeplitz"`` fills the
    (exactly Toeplitz) Gram from autocorrelation lags, which is much faster
    for long filters and is verified against the dense path in the tests.
    """
    code = np.asarray(code, dtype=np.complex128)
    if method == "dense":
        x = convolution_matrix(code, filter_length)
        return x.conj().T @ x
    if method == "toeplitz":
        n = code.size
        # np.correlate(code, code, "full")[m] = autocorrelation at lag n-1-m
        ac_full = np.correlate(code, code, "full")
        lags = np.zeros(filter_length, dtype=np.complex128)
        m = min(n, filter_length)
        # Gram[c, c'] depends only on c' - c: value = autocorrelation(c' - c)
        lags[:m] = ac_full[n - 1 :][:m]  # lags[d] = autocorrelation at lag -d
        col = lags  # first column: Gram[i, 0] = autocorrelation(-i)
        row = np.conj(lags)  # first row: Gram[0, j] = autocorrelation(+j)
        return scipy.linalg.toeplitz(col, row)
    raise ValueError(f"unknown gram method {method!r}")


def mainlobe_gram(code, filter_length: int, center: int, width: int) -> np.ndarray:
    rows = mainlobe_rows(code, filter_length, center, width)
    return np.ascontiguousarray(rows.conj().T) @ rows


def sidelobe_gram(
    codes,
    i: int,
    filter_length: int,
    center: int,
    width: int,
    delete_cross_mainlobe: bool = False,
    method: str = "dense",
) -> np.ndarray:
    """Summed Gram of the interference rows seen by filter i.

    Code i contributes its convolution matrix with the mainlobe rows
    deleted; the other codes contribute their full matrices. With
    ``delete_cross_mainlobe=True`` the mainlobe rows are deleted from every
    code's matrix instead (the alternative reading; exempts zero-lag
    cross-talk and is off by default).
    """
    codes = [np.asarray(c, dtype=np.complex128) for c in codes]
    if not 0 <= i < len(codes):
        raise ValueError(f"filter index {i} out of range for {len(codes)} codes")
    gram = np.zeros((filter_length, filter_length), dtype=np.complex128)
    for j, code in enumerate(codes):
        gram += full_gram(code, filter_length, method=method)
        if j == i or delete_cross_mainlobe:
            gram -= mainlobe_gram(code, filter_length, center, width)
    return gram


def gain_constraint_vector(code, filter_length: int, center: int) -> np.ndarray:
    """Vector a with a^H h = filtered output at the mainlobe center."""
    code = np.asarray(code, dtype=np.complex128)
    n = code.size
    a = np.zeros(filter_length, dtype=np.complex128)
    lo = max(0, center - n + 1)
    hi = min(filter_length - 1, center)
    cols = np.arange(lo, hi + 1)
    a[cols] = np.conj(code[center - cols])
    return a


def ridge_delta(gram: np.ndarray, ridge_scale: float) -> float:
    """Diagonal loading delta = ridge_scale * trace(gram)/Lf (absolute fallback
    when the trace vanishes)."""
    tr = float(np.real(np.trace(gram))) / gram.shape[0]
    return ridge_scale * tr if tr > 0.0 else ridge_scale


def solve_filter_weights(
    codes,
    i: int,
    filter_length: int,
    center: int,
    width: int,
    gain_level: float,
    ridge_scale: float = 1e-10,
    delete_cross_mainlobe: bool = False,
    method: str = "dense",
) -> np.ndarray:
    """Closed-form minimum-sidelobe-energy filter weights on raw arrays.

    The returned h satisfies (filtered output at center) == gain_level
    exactly up to one final complex scale.
    """
    gram = sidelobe_gram(
        codes, i, filter_length, center, width, delete_cross_mainlobe, method
    )
    return _solve_from_gram(gram, codes[i], filter_length, center, gain_level, ridge_scale)


def _solve_from_gram(gram, code, filter_length, center, gain_level, ridge_scale, overwrite=False):
    if gain_level <= 0:
        raise ValueError("gain_level must be positive")
    delta = ridge_delta(gram, ridge_scale)
    regularized = gram if overwrite else gram.copy()
    regularized.flat[:: filter_length + 1] += delta
    a = gain_constraint_vector(code, filter_length, center)
    try:
        cho = scipy.linalg.cho_factor(regularized, lower=True, check_finite=False)
        u = scipy.linalg.cho_solve(cho, a, check_finite=False)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        cond = float(np.linalg.cond(regularized))
        raise SolverError(
            f"sidelobe Gram is singular beyond ridge repair "
            f"(condition estimate {cond:.3e})",
            condition_estimate=cond,
        ) from exc
    denom = complex(np.dot(np.conj(a), u))
    if not np.isfinite(denom.real) or abs(denom) == 0.0:
        cond = float(np.linalg.cond(regularized))
        raise SolverError(
            f"gain normalization degenerate (a^H R^-1 a = {denom!r}, "
            f"condition estimate {cond:.3e})",
            condition_estimate=cond,
        )
    h = (gain_level / denom) * u
    # exact gain normalization: one complex rescale removes solve roundoff
    gain = complex(np.dot(np.conj(a), h))
    h = h * (gain_level / gain)
    return h


def code_response_row(code, filter_length: int, center: int) -> np.ndarray:
    """Row of the convolution matrix at the mainlobe center: row @ h = y[center]."""
    return np.conj(gain_constraint_vector(code, filter_length, center))


def solve_isl_filter(
    codes,
    i: int,
    filter_length: int,
    mainlobe_center: int = None,
    mainlobe_width: int = 5,
    gain_level: float = None,
    ridge_scale: float = 1e-10,
    delete_cross_mainlobe: bool = False,
    method: str = "dense",
) -> MismatchedFilter:
    """Solve the minimum-sidelobe-energy filter for code i of a set.

    ``codes`` is a sequence of PolyphaseCode (or raw unit-modulus arrays).
    ``gain_level`` defaults to N so the mainlobe sits at matched-filter
    gain. Raises SolverError when the regularized system is singular.
    """
    arrays = [c.samples if isinstance(c, PolyphaseCode) else np.asarray(c, complex) for c in codes]
    n = arrays[0].size
    for c in arrays:
        if c.size != n:
            raise ValueError("all codes must share one length")
    if filter_length < n:
        raise ValueError(f"filter length {filter_length} must be >= code length {n}")
    if mainlobe_center is None:
        mainlobe_center = default_mainlobe_center(n, filter_length)
    if gain_level is None:
        gain_level = float(n)
    win = mainlobe_window(mainlobe_center, mainlobe_width)
    if win.start < 0 or win.stop > n + filter_length - 1:
        raise ValueError("mainlobe window outside the filtered output support")
    h = solve_filter_weights(
        arrays,
        i,
        filter_length,
        mainlobe_center,
        mainlobe_width,
        gain_level,
        ridge_scale,
        delete_cross_mainlobe,
        method,
    )
    return MismatchedFilter(h, mainlobe_center, mainlobe_width)


def pair_error(
    oset: OrthogonalSet, i: int, delete_cross_mainlobe: bool = False, method: str = "dense"
) -> float:
    """Sidelobe-energy quadratic form h_i^H R_i h_i for pair i of a set.

    Own-code output rows exclude the mainlobe window; every other code
    contributes all of its output lags. Always >= 0.
    """
    if not 0 <= i < oset.set_size:
        raise ValueError(f"pair index {i} out of range")
    h = oset.pairs[i].filter.coefficients
    if h.size != oset.filter_length:
        raise ValueError("filter length inconsistent with the set geometry")
    gram = sidelobe_gram(
        [p.code.samples for p in oset.pairs],
        i,
        oset.filter_length,
        oset.mainlobe_center,
        oset.mainlobe_width,
        delete_cross_mainlobe,
        method,
    )
    value = float(np.real(np.dot(np.conj(h), gram @ h)))
    return max(value, 0.0)


def set_isl_error(oset: OrthogonalSet, delete_cross_mainlobe: bool = False, method: str = "dense") -> float:
    """Total objective: sum of pair_error over every pair in the set."""
    return sum(pair_error(oset, i, delete_cross_mainlobe, method) for i in range(oset.set_size))


def build_set(
    codes,
    filters,
    sample_period: float = 0.5e-6,
    delete_cross_mainlobe: bool = False,
    method: str = "dense",
) -> OrthogonalSet:
    """Assemble an OrthogonalSet from codes and filters, evaluating isl_error."""
    pairs = []
    for code, filt in zip(codes, filters):
        code = code if isinstance(code, PolyphaseCode) else PolyphaseCode(code, sample_period)
        pairs.append(CodeFilterPair(code=code, filter=filt))
    oset = OrthogonalSet(pairs=tuple(pairs))
    err = set_isl_error(oset, delete_cross_mainlobe, method)
    return OrthogonalSet(pairs=oset.pairs, isl_error=err)
