"""Analytic envelope on the output difference of frozen-equivalent LPV models.

For a certified pair (frozen-minimal, frozen-equivalent, both contractive
after normalization) driven by the same input u and the same schedule p
constant on blocks of length Delta, the output difference obeys, per time
step t with phase i = t mod Delta,

    || y(t) - y_hat(t) ||  <=  g(Delta, K, i) * ||u||
    g(Delta, K, i) = alpha^i / (1 - alpha^Delta) * K * (alpha*K_T*mu1 + K_B) * K_C

where K is the basis-mismatch size: either the supremum along the actual
schedule (K_M_signal) or over all pairs of box values (K_M_global), giving
two nested envelope chains.  The remaining constants are box suprema of
||B(p)||, ||C(p)||, ||T(p)|| and the contraction data of the pair.

The envelope decays geometrically within each constant block and resets at
switches, so long dwell times, slow schedules, or strong contraction all
shrink the reachable output error; the threshold searches at the bottom of
this module turn those three qualitative statements into verified numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import InputSignal, LpvModel, SchedulingSignal, in_dwell_class, io_map
from .frozen import isomorphism_between
from .stability import ContractionData, contraction_for_pair, grid_sup_norm

__all__ = [
    "BoundConstants",
    "BoundReport",
    "ScheduleClassError",
    "InfeasibleEpsilonError",
    "compute_constants",
    "g_function",
    "envelope",
    "check_bound",
    "delta_min_for_epsilon",
    "g_sup_beyond",
    "step_bound_function",
    "delta_step_for_epsilon",
    "alpha_max_for_epsilon",
    "write_plot_script",
]

VIOLATION_TOL = 1e-9


class ScheduleClassError(ValueError):
    """The schedule is not constant on blocks of the requested length."""


class InfeasibleEpsilonError(ValueError):
    """The requested error level cannot be met; carries the limiting value."""

    def __init__(self, message: str, limit: float | None = None,
                 achieved: float | None = None):
        super().__init__(message)
        self.limit = limit
        self.achieved = achieved


@dataclass(frozen=True)
class BoundConstants:
    """Everything the envelope needs, plus how it was certified.

    K_M_signal is the mismatch supremum along one specific schedule (zero
    when the constants were computed without a schedule); K_M_global is the
    supremum over all grid value pairs and dominates it.  iso_residual_max
    records the worst similarity residual seen while computing the frozen
    isomorphisms, as a measure of how exactly the pair is frozen
    equivalent on the grid.
    """

    K_B: float
    K_C: float
    K_T: float
    K_M_signal: float
    K_M_global: float
    alpha: float
    alpha_hat: float
    mu1: float
    grid_resolution: int
    iso_residual_max: float

    def as_dict(self) -> dict:
        return {
            "K_B": self.K_B,
            "K_C": self.K_C,
            "K_T": self.K_T,
            "K_M_signal": self.K_M_signal,
            "K_M_global": self.K_M_global,
            "alpha": self.alpha,
            "alpha_hat": self.alpha_hat,
            "mu1": self.mu1,
            "grid_resolution": self.grid_resolution,
            "iso_residual_max": self.iso_residual_max,
        }


def _spectral_norms(batch: np.ndarray) -> np.ndarray:
    """Largest singular value of every matrix in a (..., n, m) stack."""
    return np.linalg.svd(batch, compute_uv=False)[..., 0]


class _PairGeometry:
    """Grid isomorphisms and pairwise basis mismatches of a normalized pair."""

    def __init__(self, s: LpvModel, s_hat: LpvModel, contraction: ContractionData,
                 rank_tol: float, residual_tol: float | None):
        self.s_norm = s.transform(contraction.S)
        self.s_hat_norm = s_hat.transform(contraction.S_hat)
        self.points = s.box.grid_points()
        self.rank_tol = rank_tol
        self.residual_tol = residual_tol
        self._cache: dict[tuple, tuple[np.ndarray, float]] = {}
        self.residual_max = 0.0
        Ts = [self.T_at(p)[0] for p in self.points]
        self.T_grid = np.array(Ts)
        self.Tinv_grid = np.linalg.inv(self.T_grid)

    def T_at(self, p) -> tuple[np.ndarray, float]:
        key = tuple(np.atleast_1d(p).tolist())
        if key not in self._cache:
            T, _, residual = isomorphism_between(
                self.s_hat_norm.freeze(p), self.s_norm.freeze(p),
                rank_tol=self.rank_tol, residual_tol=self.residual_tol,
            )
            self.residual_max = max(self.residual_max, residual)
            self._cache[key] = (T, residual)
        return self._cache[key]

    def K_T(self) -> float:
        return float(_spectral_norms(self.T_grid).max())

    def pairwise_deviation(self) -> np.ndarray:
        """dev[i, j] = || I - T(p_i) T(p_j)^-1 ||_2 for all grid pairs."""
        N, n, _ = self.T_grid.shape
        eye = np.eye(n)
        dev = np.empty((N, N))
        chunk = max(1, 2_000_000 // max(1, N * n * n))
        for start in range(0, N, chunk):
            stop = min(N, start + chunk)
            M = np.einsum("aij,bjk->abik", self.T_grid[start:stop], self.Tinv_grid)
            dev[start:stop] = _spectral_norms(eye - M)
        return dev

    def signal_mismatch(self, p: SchedulingSignal) -> float:
        """max over consecutive samples of || I - T(p(k)) T(p(k+1))^-1 ||_2."""
        worst = 0.0
        n = self.s_norm.n_x
        eye = np.eye(n)
        for k in range(p.horizon):
            a, b = p.samples[k], p.samples[k + 1]
            if np.array_equal(a, b):
                continue
            Ta, _ = self.T_at(a)
            Tb, _ = self.T_at(b)
            M = np.linalg.solve(Tb.T, Ta.T).T
            worst = max(worst, float(np.linalg.norm(eye - M, 2)))
        return worst


def compute_constants(s: LpvModel, s_hat: LpvModel,
                      p: SchedulingSignal | None = None,
                      contraction: ContractionData | None = None,
                      rank_tol: float = 1e-8,
                      residual_tol: float | None = None) -> BoundConstants:
    """Assemble the envelope constants for a model pair.

    Both models are brought to their contraction-normalized coordinates
    first (a no-op when S = I); all constants refer to the normalized
    pair, while measured output differences are basis independent.

    residual_tol, when set, turns any isomorphism residual above it into
    an equivalence error; by default the worst residual is only recorded
    in the result so that approximately equivalent pairs (e.g. obtained by
    interpolating identified local models) can still be analyzed.
    """
    if contraction is None:
        contraction = contraction_for_pair(s, s_hat)
    geom = _PairGeometry(s, s_hat, contraction, rank_tol, residual_tol)
    K_B = grid_sup_norm(geom.s_norm, "B")
    K_C = grid_sup_norm(geom.s_norm, "C")
    K_T = geom.K_T()
    K_M_global = float(geom.pairwise_deviation().max())
    K_M_signal = geom.signal_mismatch(p) if p is not None else 0.0
    return BoundConstants(
        K_B=K_B,
        K_C=K_C,
        K_T=K_T,
        K_M_signal=K_M_signal,
        K_M_global=K_M_global,
        alpha=contraction.alpha,
        alpha_hat=contraction.alpha_hat,
        mu1=contraction.mu1,
        grid_resolution=s.box.grid_points_per_axis,
        iso_residual_max=geom.residual_max,
    )


def g_function(delta: int, K: float, i: int, c: BoundConstants) -> float:
    """Envelope factor alpha^i / (1 - alpha^Delta) * K * (alpha*K_T*mu1 + K_B) * K_C.

    Strictly decreasing in the phase i, nonincreasing in Delta for fixed i.
    """
    if delta < 1:
        raise ValueError("delta must be >= 1")
    if not 0 <= i < delta:
        raise ValueError(f"phase i={i} outside [0, {delta})")
    if not 0.0 <= c.alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {c.alpha}")
    if K < 0:
        raise ValueError("K must be nonnegative")
    a = c.alpha
    return (a**i / (1.0 - a**delta)) * K * (a * c.K_T * c.mu1 + c.K_B) * c.K_C


def envelope(horizon: int, delta: int, c: BoundConstants, u_norm: float,
             use_signal_km: bool = True) -> np.ndarray:
    """Per-time envelope g(Delta, K, t mod Delta) * u_norm, periodic in Delta.

    u_norm is whichever input norm the caller selected (peak norm by
    default; the energy norm is equally admissible).
    """
    K = c.K_M_signal if use_signal_km else c.K_M_global
    per_phase = np.array([g_function(delta, K, i, c) for i in range(delta)])
    t = np.arange(horizon + 1)
    return per_phase[t % delta] * u_norm


@dataclass(frozen=True)
class BoundReport:
    """Per-time comparison of the analytic envelope against simulation."""

    t: np.ndarray
    phase: np.ndarray
    measured: np.ndarray
    envelope_signal: np.ndarray
    envelope_global: np.ndarray
    violated: np.ndarray
    delta: int
    u_norm: float
    input_norm: str
    constants: BoundConstants

    @property
    def max_measured(self) -> float:
        return float(self.measured.max())

    @property
    def max_envelope(self) -> float:
        return float(self.envelope_signal.max())

    @property
    def tightness_ratio(self) -> float | None:
        if self.max_envelope <= 0.0:
            return None
        return self.max_measured / self.max_envelope

    @property
    def violations(self) -> int:
        return int(self.violated.sum())

    def summary_dict(self) -> dict:
        return {
            "max_measured": self.max_measured,
            "max_envelope": self.max_envelope,
            "tightness_ratio": self.tightness_ratio,
            "violations": self.violations,
            "delta": self.delta,
            "u_norm": self.u_norm,
            "input_norm": self.input_norm,
            "constants": self.constants.as_dict(),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,i,measured,envelope_signal,envelope_global,violated\n")
            for k in range(self.t.size):
                fh.write(
                    f"{int(self.t[k])},{int(self.phase[k])},"
                    f"{self.measured[k]:.17g},{self.envelope_signal[k]:.17g},"
                    f"{self.envelope_global[k]:.17g},{int(self.violated[k])}\n"
                )


def check_bound(s: LpvModel, s_hat: LpvModel, u: InputSignal, p: SchedulingSignal,
                delta: int, c: BoundConstants, input_norm: str = "linf") -> BoundReport:
    """Simulate both models from zero state and compare against the envelope.

    The schedule must be constant on blocks of length delta; rows are
    flagged as violations when the measured difference exceeds the
    signal-specific envelope chain by more than the fixed slack.
    """
    if not in_dwell_class(p, delta):
        raise ScheduleClassError(
            f"schedule is not constant on blocks of length {delta}"
        )
    if u.horizon != p.horizon:
        raise ValueError("input and schedule must share one horizon")
    if input_norm == "linf":
        u_norm = u.linf_norm
    elif input_norm == "l2":
        u_norm = u.l2_norm
    else:
        raise ValueError(f"unknown input norm selector {input_norm!r}")
    y = io_map(s, u, p)
    y_hat = io_map(s_hat, u, p)
    measured = np.linalg.norm(y - y_hat, axis=1)
    horizon = p.horizon
    env_signal = envelope(horizon, delta, c, u_norm, use_signal_km=True)
    env_global = envelope(horizon, delta, c, u_norm, use_signal_km=False)
    t = np.arange(horizon + 1)
    violated = measured > env_signal + VIOLATION_TOL
    return BoundReport(
        t=t,
        phase=t % delta,
        measured=measured,
        envelope_signal=env_signal,
        envelope_global=env_global,
        violated=violated,
        delta=delta,
        u_norm=u_norm,
        input_norm=input_norm,
        constants=c,
    )


def g_sup_beyond(c: BoundConstants, threshold: int, use_global_km: bool = True) -> float:
    """sup of g(Delta, K, i) over all Delta > threshold and phases i > threshold.

    For fixed phase i the supremum over admissible Delta sits at
    Delta = i + 1, and alpha^i / (1 - alpha^(i+1)) decreases in i, so the
    supremum is attained at i = threshold + 1, Delta = threshold + 2.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    K = c.K_M_global if use_global_km else c.K_M_signal
    kappa = (c.alpha * c.K_T * c.mu1 + c.K_B) * c.K_C
    if K == 0.0 or kappa == 0.0 or c.alpha == 0.0:
        return 0.0
    a = c.alpha
    i = threshold + 1
    return (a**i / (1.0 - a ** (i + 1))) * K * kappa


def delta_min_for_epsilon(c: BoundConstants, epsilon: float,
                          use_global_km: bool = True) -> int:
    """Smallest dwell threshold beyond which the envelope tail drops below epsilon.

    Returns the least integer d >= 1 such that every g(Delta, K, i) with
    Delta > d and i > d is below epsilon.  A logarithmic closed form seeds
    the search; direct evaluation of the supremum fixes it exactly.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    K = c.K_M_global if use_global_km else c.K_M_signal
    kappa = (c.alpha * c.K_T * c.mu1 + c.K_B) * c.K_C
    if K == 0.0 or kappa == 0.0 or c.alpha == 0.0:
        return 1
    a = c.alpha
    # conservative closed form: a^(d+1) / (1 - a) * K * kappa < epsilon
    arg = epsilon * (1.0 - a) / (K * kappa)
    d = 1 if arg >= 1.0 else max(1, math.ceil(math.log(arg) / math.log(a)) - 1)
    while g_sup_beyond(c, d, use_global_km) >= epsilon:
        d += 1
    while d > 1 and g_sup_beyond(c, d - 1, use_global_km) < epsilon:
        d -= 1
    return d


def step_bound_function(s: LpvModel, s_hat: LpvModel,
                        contraction: ContractionData | None = None,
                        rank_tol: float = 1e-8,
                        residual_tol: float | None = None):
    """Map step size -> dwell-1 envelope over all grid pairs within that step.

    Returns a callable bound_at(step) evaluating

        max { || I - M(p1, p2) ||  :  ||p1 - p2|| <= step }  *  alpha/(1-alpha)
            * (alpha * K_T * mu1 + K_B) * K_C

    on the box grid.  Shared by the step-size threshold search and by its
    independent re-verification.
    """
    if contraction is None:
        contraction = contraction_for_pair(s, s_hat)
    geom = _PairGeometry(s, s_hat, contraction, rank_tol, residual_tol)
    a = contraction.alpha
    if a == 0.0:
        return lambda step: 0.0
    K_B = grid_sup_norm(geom.s_norm, "B")
    K_C = grid_sup_norm(geom.s_norm, "C")
    factor = (a / (1.0 - a)) * (a * geom.K_T() * contraction.mu1 + K_B) * K_C
    points = geom.points
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    dev = geom.pairwise_deviation()

    def bound_at(step: float) -> float:
        mask = dist <= step
        return float(dev[mask].max()) * factor if mask.any() else 0.0

    return bound_at


def delta_step_for_epsilon(s: LpvModel, s_hat: LpvModel, epsilon: float,
                           contraction: ContractionData | None = None,
                           rank_tol: float = 1e-8,
                           residual_tol: float | None = None,
                           step_tol: float = 1e-6) -> float:
    """Largest per-step schedule change keeping the dwell-1 envelope below epsilon.

    Bisects on the step size delta: admissible steps are those for which
    the mismatch supremum over all grid value pairs at distance <= delta,
    pushed through the Delta = 1 envelope at phase 1, stays below epsilon.
    The answer is grid-resolution limited; the box diameter is returned
    when the constraint is inactive.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    bound_at = step_bound_function(s, s_hat, contraction, rank_tol, residual_tol)
    diameter = s.box.diameter()
    if bound_at(diameter) < epsilon:
        return diameter
    floor = bound_at(0.0)
    if floor >= epsilon:
        raise InfeasibleEpsilonError(
            f"epsilon {epsilon:.3e} is below the smallest achievable bound "
            f"{floor:.3e} at this grid resolution",
            achieved=floor,
        )
    lo, hi = 0.0, diameter
    while hi - lo > step_tol:
        mid = 0.5 * (lo + hi)
        if bound_at(mid) < epsilon:
            lo = mid
        else:
            hi = mid
    return lo


def alpha_max_for_epsilon(c: BoundConstants, epsilon: float, delta: int,
                          use_global_km: bool = True,
                          alpha_tol: float = 1e-6) -> float:
    """Largest contraction level keeping the worst-phase envelope below epsilon.

    Evaluates g at phase zero (the worst) with alpha treated as the free
    variable and all other constants fixed, and bisects on alpha in (0, 1).
    The envelope tends to K * K_B * K_C as alpha tends to zero, so any
    epsilon at or below that limit is infeasible and reported as such.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if delta < 1:
        raise ValueError("delta must be >= 1")
    K = c.K_M_global if use_global_km else c.K_M_signal

    def g_at(a: float) -> float:
        return (1.0 / (1.0 - a**delta)) * K * (a * c.K_T * c.mu1 + c.K_B) * c.K_C

    if K == 0.0 or c.K_C == 0.0:
        return 1.0 - 1e-9
    limit = K * c.K_B * c.K_C
    if epsilon <= limit:
        raise InfeasibleEpsilonError(
            f"epsilon {epsilon:.3e} is at or below the vanishing-contraction "
            f"limit {limit:.3e}; no contraction level can meet it",
            limit=limit,
        )
    hi_probe = 1.0 - 1e-12
    if g_at(hi_probe) < epsilon:
        return 1.0 - 1e-9
    lo, hi = 0.0, hi_probe
    while hi - lo > alpha_tol:
        mid = 0.5 * (lo + hi)
        if g_at(mid) < epsilon:
            lo = mid
        else:
            hi = mid
    return lo


def write_plot_script(path, csv_name: str, title: str) -> None:
    """Emit a gnuplot script that renders one bound CSV; no images rendered here."""
    lines = [
        "# gnuplot script; run:  gnuplot -persist " + str(path),
        "set datafile separator ','",
        f"set title '{title}'",
        "set xlabel 't'",
        "set ylabel 'output difference'",
        "set key top right",
        f"plot '{csv_name}' using 1:3 with lines lw 2 title 'measured', \\",
        f"     '{csv_name}' using 1:4 with lines title 'envelope (signal)', \\",
        f"     '{csv_name}' using 1:5 with lines title 'envelope (global)'",
        "",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
