"""Core numeric types and correlation primitives shared by every module.

Conventions fixed here and used throughout the package:

* ``crosscorrelation(a, b, lag)`` is ``sum_t a(t) * conj(b(t + lag))`` over
  the overlapping support; out-of-range lags are exactly zero.
* Filtering is full linear convolution: a code of length N through a filter
  of length Lf yields N + Lf - 1 output samples.
* dB values are clamped at ``DB_FLOOR`` (-300 dB) so empty bins never
  produce -inf.

All operations are side-effect free; the dataclasses are frozen values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIMODULAR_TOL = 1e-12
DB_FLOOR = -300.0


def as_complex_vector(x, name: str = "sequence") -> np.ndarray:
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-D sequence")
    return arr


def wrap_phase(x):
    """Wrap angles to the principal interval [-pi, pi)."""
    return (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi


def magnitude_db(x, reference: float = 1.0) -> np.ndarray:
    """20*log10(|x| / reference), clamped at DB_FLOOR."""
    mag = np.abs(np.asarray(x, dtype=np.complex128))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag / reference)
    return np.maximum(db, DB_FLOOR)


def power_db(p, reference: float = 1.0) -> np.ndarray:
    """10*log10(p / reference), clamped at DB_FLOOR."""
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(p / reference)
    return np.maximum(db, DB_FLOOR)


def crosscorrelation(a, b, lag: int) -> complex:
    """Correlate two complex sequences at a single integer lag.

    Returns ``sum_t a(t) * conj(b(t + lag))`` over the overlapping support.
    Lags with no overlap return exactly 0.
    """
    a = as_complex_vector(a, "a")
    b = as_complex_vector(b, "b")
    lo = max(0, -lag)
    hi = min(a.size, b.size - lag)
    if hi <= lo:
        return 0j
    return complex(np.dot(a[lo:hi], np.conj(b[lo + lag : hi + lag])))


def autocorrelation(a, lag: int) -> complex:
    """``crosscorrelation(a, a, lag)``; equals len(a) at lag 0 for unit-modulus a."""
    return crosscorrelation(a, a, lag)


def default_mainlobe_center(code_length: int, filter_length: int) -> int:
    """Peak index of the matched response with the code centered in the filter.

    This is the middle sample of the length N + Lf - 1 filtered output and
    is the default placement of the protected mainlobe window.
    """
    return (code_length + filter_length - 2) // 2


def mainlobe_window(center: int, width: int) -> slice:
    half = (width - 1) // 2
    return slice(center - half, center + half + 1)


@dataclass(frozen=True, eq=False)
class PolyphaseCode:
    """Unit-modulus complex transmit sequence sampled at ``sample_period`` seconds."""

    samples: np.ndarray
    sample_period: float = 0.5e-6

    def __post_init__(self):
        samples = as_complex_vector(self.samples, "code samples")
        if samples.size < 2:
            raise ValueError("a polyphase code needs at least 2 samples")
        deviation = float(np.max(np.abs(np.abs(samples) - 1.0)))
        if deviation > UNIMODULAR_TOL:
            raise ValueError(
                f"code samples must be unit modulus (max deviation {deviation:.3e})"
            )
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_phases(cls, phases, sample_period: float = 0.5e-6) -> "PolyphaseCode":
        phases = np.asarray(phases, dtype=np.float64)
        return cls(np.exp(1j * phases), sample_period)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def phases(self) -> np.ndarray:
        return np.mod(np.angle(self.samples), 2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class MismatchedFilter:
    """Receive filter of length Lf >= N with a protected mainlobe window.

    ``mainlobe_center`` indexes the length N + Lf - 1 filtered output;
    ``mainlobe_width`` is an odd sample count centered there.
    """

    coefficients: np.ndarray
    mainlobe_center: int
    mainlobe_width: int = 5

    def __post_init__(self):
        coeffs = as_complex_vector(self.coefficients, "filter coefficients")
        object.__setattr__(self, "coefficients", coeffs)
        if self.mainlobe_width < 1 or self.mainlobe_width % 2 == 0:
            raise ValueError("mainlobe_width must be an odd positive integer")
        if self.mainlobe_center - (self.mainlobe_width - 1) // 2 < 0:
            raise ValueError("mainlobe window extends below output sample 0")

    def __len__(self) -> int:
        return self.coefficients.size

    @property
    def window(self) -> slice:
        return mainlobe_window(self.mainlobe_center, self.mainlobe_width)


def filtered_response(pair: "CodeFilterPair") -> np.ndarray:
    """Full linear convolution of the pair's code with its filter (length N+Lf-1)."""
    return np.convolve(pair.code.samples, pair.filter.coefficients)


@dataclass(frozen=True, eq=False)
class CodeFilterPair:
    """A code with its receive filter; ``mainlobe_gain`` is the filtered output
    at the mainlobe center (computed when not supplied)."""

    code: PolyphaseCode
    filter: MismatchedFilter
    mainlobe_gain: complex = None

    def __post_init__(self):
        n = len(self.code)
        lf = len(self.filter)
        if lf < n:
            raise ValueError(f"filter length {lf} must be >= code length {n}")
        out_len = n + lf - 1
        win = self.filter.window
        if win.stop > out_len:
            raise ValueError("mainlobe window extends past the filtered output")
        if self.mainlobe_gain is None:
            gain = complex(filtered_response(self)[self.filter.mainlobe_center])
            object.__setattr__(self, "mainlobe_gain", gain)
        else:
            object.__setattr__(self, "mainlobe_gain", complex(self.mainlobe_gain))

    @property
    def response_length(self) -> int:
        return len(self.code) + len(self.filter) - 1


@dataclass(frozen=True, eq=False)
class OrthogonalSet:
    """A jointly designed set of code/filter pairs sharing one geometry.

    ``isl_error`` is the summed sidelobe-energy objective over all pairs
    (None when not yet evaluated).
    """

    pairs: tuple
    isl_error: float = None

    def __post_init__(self):
        pairs = tuple(self.pairs)
        if not pairs:
            raise ValueError("an orthogonal set needs at least one pair")
        n = len(pairs[0].code)
        lf = len(pairs[0].filter)
        center = pairs[0].filter.mainlobe_center
        width = pairs[0].filter.mainlobe_width
        for p in pairs:
            if len(p.code) != n:
                raise ValueError("all codes in a set must share one length")
            if (
                len(p.filter) != lf
                or p.filter.mainlobe_center != center
                or p.filter.mainlobe_width != width
            ):
                raise ValueError("all filters in a set must share one geometry")
        object.__setattr__(self, "pairs", pairs)
        if self.isl_error is not None:
            object.__setattr__(self, "isl_error", float(self.isl_error))

    @property
    def set_size(self) -> int:
        return len(self.pairs)

    @property
    def code_length(self) -> int:
        return len(self.pairs[0].code)

    @property
    def filter_length(self) -> int:
        return len(self.pairs[0].filter)

    @property
    def mainlobe_center(self) -> int:
        return self.pairs[0].filter.mainlobe_center

    @property
    def mainlobe_width(self) -> int:
        return self.pairs[0].filter.mainlobe_width

    def codes(self) -> list:
        return [p.code for p in self.pairs]

    def filters(self) -> list:
        return [p.filter for p in self.pairs]


@dataclass(frozen=True)
class ConstraintReport:
    """Measured deviations from the design constraints, with pass/fail."""

    unimodularity_deviation: float
    gain_imbalance: float
    phase_imbalance_rad: float
    unimodular_tol: float
    gain_tol: float
    phase_tol: float

    @property
    def passed(self) -> bool:
        return not self.failures()

    def failures(self) -> list:
        out = []
        if self.unimodularity_deviation > self.unimodular_tol:
            out.append(
                f"unimodularity deviation {self.unimodularity_deviation:.3e} "
                f"> {self.unimodular_tol:.1e}"
            )
        if self.gain_imbalance > self.gain_tol:
            out.append(
                f"gain imbalance {self.gain_imbalance:.3e} > {self.gain_tol:.1e}"
            )
        if self.phase_imbalance_rad > self.phase_tol:
            out.append(
                f"phase imbalance {self.phase_imbalance_rad:.3e} rad "
                f"> {self.phase_tol:.1e}"
            )
        return out

    def as_dict(self) -> dict:
        return {
            "unimodularity_deviation": self.unimodularity_deviation,
            "gain_imbalance": self.gain_imbalance,
            "phase_imbalance_rad": self.phase_imbalance_rad,
            "unimodular_tol": self.unimodular_tol,
            "gain_tol": self.gain_tol,
            "phase_tol": self.phase_tol,
            "passed": self.passed,
            "failures": self.failures(),
        }


def check_constraints(
    oset: OrthogonalSet,
    unimodular_tol: float = UNIMODULAR_TOL,
    gain_tol: float = 1e-6,
    phase_tol: float = 1e-6,
) -> ConstraintReport:
    """Measure unimodularity and pair gain/phase balance against tolerances.

    Gain imbalance is the worst |gain_i| deviation relative to pair 0's gain
    magnitude; phase imbalance is the worst wrapped phase difference to
    pair 0, in radians. A zero reference gain reports infinite imbalance.
    """
    unimod = max(
        float(np.max(np.abs(np.abs(p.code.samples) - 1.0))) for p in oset.pairs
    )
    gains = np.array([p.mainlobe_gain for p in oset.pairs])
    mags = np.abs(gains)
    if mags[0] == 0.0:
        gain_imb = float("inf")
        phase_imb = float("inf")
    else:
        gain_imb = float(np.max(np.abs(mags - mags[0])) / mags[0])
        phase_imb = float(np.max(np.abs(wrap_phase(np.angle(gains) - np.angle(gains[0])))))
    return ConstraintReport(
        unimodularity_deviation=unimod,
        gain_imbalance=gain_imb,
        phase_imbalance_rad=phase_imb,
        unimodular_tol=unimodular_tol,
        gain_tol=gain_tol,
        phase_tol=phase_tol,
    )
