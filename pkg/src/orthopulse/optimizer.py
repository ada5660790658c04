"""Joint code/filter optimization.

The search variables are the code phases (unit modulus holds by
construction). A local solve alternates closed-form filter refits with
backtracking gradient descent on the phases; pair gain/phase balance is
free because the refit normalization pins every mainlobe response to the
real level L. Two descent objectives are available:

* ``projected`` (default): each objective evaluation re-solves the filters,
  so the descent moves on the error surface the filter refit actually
  produces. Its gradient is the fixed-filter term plus a constraint term
  from the gain normalization following the code.
* ``fixed_filter``: classic block alternation - descend with the filters
  frozen, then refit. Kept as a reference; it zigzags and converges far
  slower on coupled code/filter valleys.

A multistart wrapper generates new start points by combining diverse and
elite members of a reference pool, scatter-search style.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.linalg

from .waveform import (
    MismatchedFilter,
    OrthogonalSet,
    PolyphaseCode,
    default_mainlobe_center,
    mainlobe_window,
    wrap_phase,
)
from .filter_solver import (
    SolverError,
    _solve_from_gram,
    build_set,
    full_gram,
    gain_constraint_vector,
    mainlobe_gram,
    mainlobe_rows,
)

TWO_PI = 2.0 * np.pi


@dataclass
class OptimizerConfig:
    """Problem geometry plus search parameters; defaults are the headline
    configuration (length-40 codes, length-480 filters, 5-sample mainlobe,
    set of two)."""

    code_length: int = 40
    set_size: int = 2
    filter_length: int = 480
    mainlobe_width: int = 5
    gain_level: float = None  # defaults to code_length (matched-filter level)
    restarts: int = 4
    scatter_pool: int = 10
    max_iters: int = 400
    convergence_tol: float = 1e-9
    rng_seed: int = 0
    balance_tol: float = 1e-6
    sample_period: float = 0.5e-6
    # scatter-search shape
    elite_fraction: float = 0.4
    combine_weight_low: float = 0.3
    combine_weight_high: float = 0.7
    jitter_sigma: float = 0.2
    # local descent shape
    descent_objective: str = "projected"
    descent_steps: int = 12
    armijo_c1: float = 1e-4
    initial_step: float = 0.05
    max_backtracks: int = 40
    ridge_scale: float = 1e-10
    delete_cross_mainlobe: bool = False
    gram_method: str = "toeplitz"

    def __post_init__(self):
        if self.gain_level is None:
            self.gain_level = float(self.code_length)
        self.validate()

    def validate(self):
        if self.code_length < 2:
            raise ValueError("code_length must be >= 2")
        if self.set_size < 1:
            raise ValueError("set_size must be >= 1")
        if self.filter_length < self.code_length:
            raise ValueError("filter_length must be >= code_length")
        if self.mainlobe_width < 1 or self.mainlobe_width % 2 == 0:
            raise ValueError("mainlobe_width must be an odd positive integer")
        out_len = self.code_length + self.filter_length - 1
        win = mainlobe_window(self.mainlobe_center, self.mainlobe_width)
        if win.start < 0 or win.stop > out_len:
            raise ValueError("mainlobe window outside the filtered output support")
        if not self.gain_level > 0:
            raise ValueError("gain_level must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.scatter_pool < 2:
            raise ValueError("scatter_pool must be >= 2")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        if not self.balance_tol > 0:
            raise ValueError("balance_tol must be positive")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        if not 0.0 < self.elite_fraction <= 1.0:
            raise ValueError("elite_fraction must be in (0, 1]")
        if not 0.0 < self.combine_weight_low <= self.combine_weight_high <= 1.0:
            raise ValueError("combine weights must satisfy 0 < low <= high <= 1")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if self.descent_steps < 1:
            raise ValueError("descent_steps must be >= 1")
        if self.descent_objective not in ("projected", "fixed_filter"):
            raise ValueError("descent_objective must be 'projected' or 'fixed_filter'")
        if self.gram_method not in ("dense", "toeplitz"):
            raise ValueError("gram_method must be 'dense' or 'toeplitz'")

    @property
    def mainlobe_center(self) -> int:
        return default_mainlobe_center(self.code_length, self.filter_length)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class PhaseVector:
    """Phases of every code in a set, shape (set_size, code_length), in [0, 2pi)."""

    phases: np.ndarray

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=np.float64)
        if phases.ndim != 2:
            raise ValueError("phases must be a 2-D (set_size, code_length) array")
        self.phases = np.mod(phases, TWO_PI)

    def codes(self) -> list:
        return [np.exp(1j * row) for row in self.phases]


@dataclass
class OptimizationTrace:
    """Objective value after the initial refit and after each accepted
    iteration, plus bookkeeping for multistart runs."""

    errors: list = field(default_factory=list)
    restart_index: int = None
    wall_time_s: float = 0.0


@dataclass
class MultistartResult:
    best: OrthogonalSet
    best_restart: int
    errors: list
    traces: list
    wall_time_s: float


def random_code_set(config: OptimizerConfig, rng: np.random.Generator) -> PhaseVector:
    """I.i.d. uniform phases for every code sample; deterministic given rng state."""
    return PhaseVector(rng.uniform(0.0, TWO_PI, size=(config.set_size, config.code_length)))


def _masked_response(code, h, win, masked: bool) -> np.ndarray:
    y = np.convolve(code, h)
    if masked:
        y = y.copy()
        y[win] = 0.0
    return y


def total_isl_error(codes, filters, center, width, delete_cross_mainlobe=False) -> float:
    """Objective via explicit convolutions: summed squared magnitude of every
    interference sample seen by every filter."""
    win = mainlobe_window(center, width)
    total = 0.0
    for i, h in enumerate(filters):
        for j, code in enumerate(codes):
            y = _masked_response(code, h, win, j == i or delete_cross_mainlobe)
            total += float(np.sum(np.abs(y) ** 2))
    return total


def isl_phase_gradient(codes, filters, center, width, delete_cross_mainlobe=False) -> np.ndarray:
    """d(total error)/d(phase) with filters fixed; shape (set_size, code_length).

    For one interference channel y = conv(c_j, h_i) (mainlobe-masked when
    j == i), the chain rule through c = exp(i*phi) gives the per-sample
    contribution 2*Im(conj(c[n]) * sum_r y[r] conj(h[r-n])).
    """
    k = len(codes)
    n = codes[0].size
    win = mainlobe_window(center, width)
    grad = np.zeros((k, n), dtype=np.float64)
    for i, h in enumerate(filters):
        h_rev = np.conj(h[::-1])
        lf = h.size
        for j, code in enumerate(codes):
            y = _masked_response(code, h, win, j == i or delete_cross_mainlobe)
            back = np.convolve(y, h_rev)[lf - 1 : lf - 1 + n]
            grad[j] += 2.0 * np.imag(np.conj(code) * back)
    return grad


def refit_filters(codes, config: OptimizerConfig):
    """Closed-form filter refit for every code, sharing the full Grams.

    Matches solve_isl_filter pair by pair; returns the list of weight
    vectors.
    """
    lf = config.filter_length
    center = config.mainlobe_center
    gram_sum = full_gram(codes[0], lf, method=config.gram_method)
    for c in codes[1:]:
        gram_sum += full_gram(c, lf, method=config.gram_method)
    corrections = [
        mainlobe_gram(c, lf, center, config.mainlobe_width) for c in codes
    ]
    if config.delete_cross_mainlobe:
        for corr in corrections:
            gram_sum -= corr
    filters = []
    scratch = np.empty_like(gram_sum)
    for i, code in enumerate(codes):
        if config.delete_cross_mainlobe:
            gram = gram_sum
            h = _solve_from_gram(
                gram.copy(), code, lf, center, config.gain_level, config.ridge_scale, overwrite=True
            )
        else:
            np.subtract(gram_sum, corrections[i], out=scratch)
            h = _solve_from_gram(
                scratch, code, lf, center, config.gain_level, config.ridge_scale, overwrite=True
            )
        filters.append(h)
    return filters


class ProjectedEvaluator:
    """Objective/gradient of the code phases with filters solved implicitly.

    For codes c(phi), every filter has the closed form
    h_i = L * R_i^-1 a_i / q_i with q_i = a_i^H R_i^-1 a_i, so the projected
    objective is err(phi) = sum_i L^2 / q_i. All R_i share the summed full
    Gram G; the mainlobe-row deletions are rank-``width`` downdates, so one
    Cholesky of G serves every filter through a Woodbury solve.
    """

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.center = config.mainlobe_center
        self.width = config.mainlobe_width

    def evaluate(self, codes):
        """Returns (err, filters, pair_errors) at the refit optimum."""
        cfg = self.config
        lf = cfg.filter_length
        gram = full_gram(codes[0], lf, method=cfg.gram_method)
        for c in codes[1:]:
            gram += full_gram(c, lf, method=cfg.gram_method)
        rows = [mainlobe_rows(c, lf, self.center, self.width) for c in codes]
        if cfg.delete_cross_mainlobe:
            for m in rows:
                gram -= np.ascontiguousarray(m.conj().T) @ m
        trace_g = float(np.real(np.trace(gram))) / lf
        row_trace = float(np.mean([np.sum(np.abs(m) ** 2) for m in rows])) / lf
        shared = trace_g if cfg.delete_cross_mainlobe else trace_g - row_trace
        delta = cfg.ridge_scale * shared if shared > 0 else cfg.ridge_scale
        gram.flat[:: lf + 1] += delta
        try:
            cho = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
            raise SolverError(
                "shared Gram not positive definite after ridge", None
            ) from exc
        filters = []
        pair_errors = []
        total = 0.0
        for i, code in enumerate(codes):
            a = gain_constraint_vector(code, lf, self.center)
            if cfg.delete_cross_mainlobe:
                u = scipy.linalg.cho_solve(cho, a, check_finite=False)
            else:
                m = rows[i]
                rhs = np.concatenate([a[:, None], m.conj().T], axis=1)
                sol = scipy.linalg.cho_solve(cho, rhs, check_finite=False)
                w, z = sol[:, 0], sol[:, 1:]
                s = np.eye(self.width, dtype=np.complex128) - m @ z
                v = np.linalg.solve(s, m @ w)
                u = w + z @ v
            q = float(np.real(np.dot(np.conj(a), u)))
            if not np.isfinite(q) or q <= 0.0:
                raise SolverError(
                    f"projected objective degenerate for pair {i} (q={q!r})", None
                )
            err_i = cfg.gain_level**2 / q
            h = (cfg.gain_level / q) * u
            filters.append(h)
            pair_errors.append(err_i)
            total += err_i
        return total, filters, pair_errors

    def gradient(self, codes, filters, pair_errors):
        """d err / d phase: fixed-filter term plus the gain-constraint term."""
        cfg = self.config
        grad = isl_phase_gradient(
            codes, filters, self.center, self.width, cfg.delete_cross_mainlobe
        )
        n = codes[0].size
        taps = self.center - np.arange(n)  # filter tap paired with code sample n
        valid = (taps >= 0) & (taps < cfg.filter_length)
        for i, (code, h, err_i) in enumerate(zip(codes, filters, pair_errors)):
            term = np.zeros(n)
            term[valid] = np.imag(code[valid] * h[taps[valid]])
            grad[i] += (2.0 * err_i / cfg.gain_level) * term
        return grad


def projected_isl_error(codes, config: OptimizerConfig) -> float:
    """Objective value with filters refit for the given codes."""
    err, _, _ = ProjectedEvaluator(config).evaluate(codes)
    return err


def projected_phase_gradient(codes, config: OptimizerConfig) -> np.ndarray:
    """Analytic gradient of projected_isl_error."""
    ev = ProjectedEvaluator(config)
    _, filters, pair_errors = ev.evaluate(codes)
    return ev.gradient(codes, filters, pair_errors)


def _assemble(phases, filters, config) -> OrthogonalSet:
    codes = [PolyphaseCode.from_phases(row, config.sample_period) for row in phases]
    mfilters = [
        MismatchedFilter(h, config.mainlobe_center, config.mainlobe_width) for h in filters
    ]
    return build_set(
        codes,
        mfilters,
        sample_period=config.sample_period,
        delete_cross_mainlobe=config.delete_cross_mainlobe,
        method=config.gram_method,
    )


class _BBLineSearch:
    """Backtracking line search with a Barzilai-Borwein trial step."""

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.step = config.initial_step
        self.prev_grad = None
        self.displacement = None

    def reset_memory(self):
        self.prev_grad = None
        self.displacement = None

    def trial_step(self, grad) -> float:
        if self.prev_grad is not None:
            y = grad - self.prev_grad
            sy = float(np.sum(self.displacement * y))
            if sy > 0.0:
                t = float(np.sum(self.displacement * self.displacement) / sy)
            else:
                t = self.step * 2.0
        else:
            t = self.step
        return min(max(t, 1e-14), 1e3)

    def search(self, phases, grad, err, evaluate):
        """One descent step; returns (phases, codes, err, payload) or None.

        ``evaluate(codes)`` returns (err, payload); acceptance is the Armijo
        decrease condition on err.
        """
        gnorm2 = float(np.sum(grad * grad))
        if gnorm2 == 0.0:
            return None
        t = self.trial_step(grad)
        for _ in range(self.config.max_backtracks):
            cand_phases = np.mod(phases - t * grad, TWO_PI)
            cand_codes = [np.exp(1j * row) for row in cand_phases]
            cand_err, payload = evaluate(cand_codes)
            if cand_err <= err - self.config.armijo_c1 * t * gnorm2:
                self.displacement = -t * grad
                self.prev_grad = grad
                self.step = t
                return cand_phases, cand_codes, cand_err, payload
            t *= 0.5
        return None


def local_descent(start: PhaseVector, config: OptimizerConfig):
    """Descend the code phases from a start point until the relative error
    decrease falls below convergence_tol (or max_iters outer iterations).

    Filters are refit in closed form throughout (inside every objective
    evaluation for the projected objective, once per outer iteration when
    ``descent_objective="fixed_filter"``), and the final set is assembled
    with exactly rebalanced filters. Returns (OrthogonalSet,
    OptimizationTrace); the trace error sequence is non-increasing.
    """
    t0 = time.perf_counter()
    center = config.mainlobe_center
    width = config.mainlobe_width
    phases = np.mod(np.asarray(start.phases, dtype=np.float64), TWO_PI)
    if phases.shape != (config.set_size, config.code_length):
        raise ValueError(
            f"start phases shape {phases.shape} does not match config "
            f"({config.set_size}, {config.code_length})"
        )
    codes = [np.exp(1j * row) for row in phases]
    search = _BBLineSearch(config)

    if config.descent_objective == "projected":
        solver = ProjectedEvaluator(config)

        def evaluate(cand_codes):
            err, filters, pair_errors = solver.evaluate(cand_codes)
            return err, (filters, pair_errors)

        err, payload = evaluate(codes)
        trace = OptimizationTrace(errors=[err])
        for _ in range(config.max_iters):
            prev = err
            for _ in range(config.descent_steps):
                grad = solver.gradient(codes, payload[0], payload[1])
                result = search.search(phases, grad, err, evaluate)
                if result is None:
                    break
                phases, codes, err, payload = result
            trace.errors.append(err)
            if prev <= 0.0 or (prev - err) <= config.convergence_tol * prev:
                break
    else:
        filters = refit_filters(codes, config)

        def evaluate(cand_codes):
            cand_err = total_isl_error(
                cand_codes, filters, center, width, config.delete_cross_mainlobe
            )
            return cand_err, None

        err = evaluate(codes)[0]
        trace = OptimizationTrace(errors=[err])
        for _ in range(config.max_iters):
            prev = err
            # descend with filters frozen, then refit them in closed form
            search.reset_memory()
            sub_err = err
            for _ in range(config.descent_steps):
                grad = isl_phase_gradient(
                    codes, filters, center, width, config.delete_cross_mainlobe
                )
                result = search.search(phases, grad, sub_err, evaluate)
                if result is None:
                    break
                phases, codes, sub_err, _ = result
            filters = refit_filters(codes, config)
            err = total_isl_error(codes, filters, center, width, config.delete_cross_mainlobe)
            trace.errors.append(err)
            if prev <= 0.0 or (prev - err) <= config.convergence_tol * prev:
                break

    # final assembly: per-pair exact refit pins every mainlobe gain to L
    filters = refit_filters(codes, config)
    oset = _assemble(phases, filters, config)
    trace.wall_time_s = time.perf_counter() - t0
    return oset, trace


def _pool_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean(wrap_phase(a - b) ** 2)))


def _prune_pool(pool, config: OptimizerConfig):
    """Keep the elite lowest-error members plus a max-min-distance diverse fill."""
    if len(pool) <= config.scatter_pool:
        pool.sort(key=lambda entry: entry[0])
        return pool
    pool.sort(key=lambda entry: entry[0])
    elite_count = max(1, int(round(config.elite_fraction * config.scatter_pool)))
    elite_count = min(elite_count, config.scatter_pool)
    kept = pool[:elite_count]
    candidates = pool[elite_count:]
    while len(kept) < config.scatter_pool and candidates:
        best_idx = max(
            range(len(candidates)),
            key=lambda idx: min(
                _pool_distance(candidates[idx][1], entry[1]) for entry in kept
            ),
        )
        kept.append(candidates.pop(best_idx))
    kept.sort(key=lambda entry: entry[0])
    return kept


def _combine_from_pool(pool, config: OptimizerConfig, rng: np.random.Generator) -> PhaseVector:
    elite_count = max(1, int(round(config.elite_fraction * config.scatter_pool)))
    ia = int(rng.integers(0, min(elite_count, len(pool))))
    ib = int(rng.integers(0, len(pool)))
    while ib == ia:
        ib = int(rng.integers(0, len(pool)))
    pa, pb = pool[ia][1], pool[ib][1]
    w = rng.uniform(config.combine_weight_low, config.combine_weight_high)
    # combine along the shortest arc so the 0/2pi seam does not bias the blend
    blended = pa + w * wrap_phase(pb - pa)
    jitter = rng.normal(0.0, config.jitter_sigma, size=blended.shape)
    return PhaseVector(blended + jitter)


def scatter_multistart(config: OptimizerConfig) -> MultistartResult:
    """Best constraint-satisfying set over seeded restarts.

    Restart 0 descends from the seeded random start; later restarts start
    from scatter-search combinations of the result pool. Ties break to the
    lowest restart index, so the outcome is independent of any execution
    interleaving.
    """
    from .waveform import check_constraints  # local import to avoid cycle at module load

    t0 = time.perf_counter()
    rng = np.random.default_rng(config.rng_seed)
    pool = []
    outcomes = []
    traces = []
    for r in range(config.restarts):
        if r >= 1 and len(pool) >= 2:
            start = _combine_from_pool(pool, config, rng)
        else:
            start = random_code_set(config, rng)
        oset, trace = local_descent(start, config)
        trace.restart_index = r
        traces.append(trace)
        report = check_constraints(
            oset, gain_tol=config.balance_tol, phase_tol=config.balance_tol
        )
        outcomes.append((oset.isl_error, r, oset, report.passed))
        pool.append((oset.isl_error, np.stack([c.phases for c in oset.codes()])))
        pool = _prune_pool(pool, config)
    satisfying = [o for o in outcomes if o[3]]
    chosen = min(satisfying or outcomes, key=lambda o: (o[0], o[1]))
    return MultistartResult(
        best=chosen[2],
        best_restart=chosen[1],
        errors=[o[0] for o in outcomes],
        traces=traces,
        wall_time_s=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class QuantizationReport:
    levels: int
    error_before: float
    error_after: float

    @property
    def degradation_db(self) -> float:
        if self.error_before <= 0.0:
            return 0.0
        return 10.0 * np.log10(max(self.error_after, 1e-300) / self.error_before)


def quantize_code_set(oset: OrthogonalSet, levels: int, config: OptimizerConfig):
    """Snap code phases to a uniform alphabet of ``levels`` values and refit
    the filters; reports the objective before and after.

    Continuous phases are the default search space; this post-step produces
    hardware-friendly P-phase codes at a measured cost.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    step = TWO_PI / levels
    phases = np.stack([c.phases for c in oset.codes()])
    quantized = np.mod(np.round(phases / step) * step, TWO_PI)
    codes = [np.exp(1j * row) for row in quantized]
    filters = refit_filters(codes, config)
    qset = _assemble(quantized, filters, config)
    report = QuantizationReport(
        levels=levels, error_before=float(oset.isl_error), error_after=float(qset.isl_error)
    )
    return qset, report
