"""Newton, Picard and mixed Picard-Newton iterations with line search.

All solvers share the update form: a linear system gives the update
direction, then h <- h + omega * dh. The step matrix is the Jacobian
(Newton) or the frozen-coefficient Picard matrix. Omega comes from a
fixed-relaxation warm-up, a full step, or backtracking line search under
the Armijo acceptance test on ||F||_2. Every run returns a full
convergence trace; failures are encoded in the trace outcome rather
than raised.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .discretization import Discretization

__all__ = [
    "LineSearchConfig",
    "WarmupConfig",
    "SolverConfig",
    "IterationRecord",
    "ConvergenceTrace",
    "newton_step",
    "picard_step",
    "armijo_line_search",
    "solve_nonlinear",
    "CONVERGED",
    "MAX_ITERATIONS",
    "DIVERGED",
    "LINE_SEARCH_FAILED",
    "LINEAR_SOLVE_FAILED",
]

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
DIVERGED = "diverged"
LINE_SEARCH_FAILED = "line_search_failed"
LINEAR_SOLVE_FAILED = "linear_solve_failed"

METHODS = ("newton", "picard", "mixed")


@dataclass(frozen=True)
class LineSearchConfig:
    """Armijo backtracking controls.

    enabled_after skips line search for the first iterations of pure
    Newton runs (full steps instead); alpha is the sufficient-decrease
    parameter, gamma the backtracking factor. max_backtracks refinements
    give omega_min = gamma**max_backtracks (~9.5e-7 at the defaults).
    """

    enabled_after: int = 5
    alpha: float = 1e-4
    gamma: float = 0.25
    max_backtracks: int = 10

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.max_backtracks < 0 or self.enabled_after < 0:
            raise ValueError("counts must be nonnegative")


@dataclass(frozen=True)
class WarmupConfig:
    """Fixed-relaxation start: nit_nls iterations at omega_fixed with no
    line search (coinciding with the Picard phase in mixed runs)."""

    nit_nls: int = 0
    omega_fixed: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.omega_fixed <= 1.0:
            raise ValueError(
                f"omega_fixed must lie in (0, 1], got {self.omega_fixed}")
        if self.nit_nls < 0:
            raise ValueError("nit_nls must be nonnegative")


@dataclass(frozen=True)
class SolverConfig:
    """Nonlinear solver controls; defaults follow the dam benchmarks."""

    method: str = "mixed"
    nit_pic: int = 5
    eps_rel: float = 1e-5
    eps_abs: float = 1e-6
    nit_max: int = 50
    eps_div: float = 1e15
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    warmup: WarmupConfig = field(default_factory=WarmupConfig)
    linear_tol: float = 1e-12
    linear_maxit: int = 2000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(
                f"unknown method {self.method!r} "
                f"(supported: {', '.join(METHODS)})")
        if not 0.0 < self.eps_rel < 1.0:
            raise ValueError(f"eps_rel must lie in (0, 1), got {self.eps_rel}")
        if self.eps_abs <= 0.0 or self.eps_div <= 0.0:
            raise ValueError("eps_abs and eps_div must be positive")
        if self.nit_pic < 0 or self.nit_max < 1:
            raise ValueError("need nit_pic >= 0 and nit_max >= 1")

    @property
    def pure_newton(self):
        """True when every iteration is a Newton step."""
        return self.method == "newton" or \
            (self.method == "mixed" and self.nit_pic == 0)


@dataclass
class IterationRecord:
    iteration: int
    phase: str  # "init", "picard" or "newton"
    res2: float
    resinf: float
    omega: float
    backtracks: int
    lin_iters: int
    ls_used: bool = False
    accepted: bool = True


@dataclass
class ConvergenceTrace:
    """Per-iteration history plus the terminal outcome."""

    records: list = field(default_factory=list)
    outcome: str = MAX_ITERATIONS

    @property
    def iterations(self):
        return len(self.records) - 1  # record 0 is the initial state

    @property
    def final(self):
        return self.records[-1]

    def rows(self):
        """CSV-ready rows: iter, phase, res2, resinf, omega, backtracks,
        liniters."""
        return [(r.iteration, r.phase, r.res2, r.resinf, r.omega,
                 r.backtracks, r.lin_iters) for r in self.records]


def _as_disc(problem, scheme):
    # anything with a residual() is treated as a discretization (test stubs
    # included); ProblemSpec instances get discretized here
    if hasattr(problem, "residual"):
        return problem
    return Discretization(problem, scheme)


def newton_step(problem, h, q, kind, cfg=None, scheme="tpfa"):
    """Solve J(h) dh = -F(h); returns (dh, linear report)."""
    cfg = cfg or SolverConfig()
    disc = _as_disc(problem, scheme)
    J, F = disc.assemble_jacobian(h, q, kind, with_residual=True)
    dh, rep = linalg.solve(J, -F, tol=cfg.linear_tol, maxit=cfg.linear_maxit)
    return dh, rep


def picard_step(problem, h, q, kind, cfg=None, scheme="tpfa"):
    """Solve A(h) dh = -F(h), the update form of A(h) h_new = b(h)."""
    cfg = cfg or SolverConfig()
    disc = _as_disc(problem, scheme)
    asm = disc.assemble(h, q, kind)
    dh, rep = linalg.solve(asm.A, -asm.F, tol=cfg.linear_tol,
                           maxit=cfg.linear_maxit)
    return dh, rep


def armijo_line_search(problem, h, dh, q, kind, cfg=None, scheme="tpfa",
                       res2=None):
    """Backtracking line search under ||F(h + w dh)||_2 < (1 - a w) ||F(h)||_2.

    Tries omega = 1, gamma, ..., gamma**max_backtracks. Returns
    (omega, backtracks, F_new) on acceptance and (None, max_backtracks,
    None) when every trial fails.
    """
    cfg = cfg or SolverConfig()
    disc = _as_disc(problem, scheme)
    ls = cfg.line_search
    if res2 is None:
        res2 = float(np.linalg.norm(disc.residual(h, q, kind)))
    if res2 <= 0.0:
        raise ValueError("line search requires a nonzero residual")
    omega = 1.0
    for bt in range(ls.max_backtracks + 1):
        F_new = disc.residual(h + omega * dh, q, kind)
        r2 = float(np.linalg.norm(F_new))
        if r2 < (1.0 - ls.alpha * omega) * res2:
            return omega, bt, F_new
        omega *= ls.gamma
    return None, ls.max_backtracks, None


def _phase(cfg, k):
    if cfg.method == "picard":
        return "picard"
    if cfg.method == "mixed" and k <= cfg.nit_pic:
        return "picard"
    return "newton"


def solve_nonlinear(problem, h0, q, kind, cfg=None, scheme="tpfa"):
    """Run the configured nonlinear iteration at continuation level q.

    Stops when ||F||_2 < eps_rel ||F(h0)||_2 or ||F||_inf < eps_abs;
    also on nit_max, divergence (||F||_2 > eps_div or non-finite), line
    search exhaustion, or a linear solver failure. Returns the final
    iterate and the full trace; no failure raises.
    """
    cfg = cfg or SolverConfig()
    disc = _as_disc(problem, scheme)
    h = np.array(h0, dtype=float, copy=True)
    if len(h) != disc.n_cells:
        raise ValueError(
            f"initial guess has {len(h)} entries for {disc.n_cells} cells")

    F = disc.residual(h, q, kind)
    res2 = float(np.linalg.norm(F))
    resinf = float(np.abs(F).max()) if len(F) else 0.0
    trace = ConvergenceTrace()
    trace.records.append(IterationRecord(0, "init", res2, resinf, 0.0, 0, 0))
    res2_0 = res2

    if resinf < cfg.eps_abs or res2 == 0.0:
        trace.outcome = CONVERGED
        return h, trace

    for k in range(1, cfg.nit_max + 1):
        phase = _phase(cfg, k)
        try:
            if phase == "picard":
                dh, rep = picard_step(disc, h, q, kind, cfg)
            else:
                dh, rep = newton_step(disc, h, q, kind, cfg)
        except linalg.SingularMatrixError:
            trace.outcome = LINEAR_SOLVE_FAILED
            return h, trace
        # a breakdown-flagged direction is still usable if its residual
        # is small; only give up on genuinely bad solves
        if rep.breakdown and not rep.rel_residual < 1e-6:
            trace.outcome = LINEAR_SOLVE_FAILED
            return h, trace

        ls_used = False
        backtracks = 0
        if k <= cfg.warmup.nit_nls:
            omega = cfg.warmup.omega_fixed
        elif cfg.pure_newton and k <= cfg.line_search.enabled_after:
            omega = 1.0
        else:
            ls_used = True
            omega, backtracks, F_new = armijo_line_search(
                disc, h, dh, q, kind, cfg, res2=res2)
            if omega is None:
                trace.records.append(IterationRecord(
                    k, phase, res2, resinf, 0.0, backtracks,
                    rep.iterations, ls_used=True, accepted=False))
                trace.outcome = LINE_SEARCH_FAILED
                return h, trace

        h = h + omega * dh
        if ls_used:
            F = F_new
        else:
            F = disc.residual(h, q, kind)
        res2 = float(np.linalg.norm(F))
        resinf = float(np.abs(F).max())
        if not np.isfinite(res2):
            res2 = np.inf
        if not np.isfinite(resinf):
            resinf = np.inf
        trace.records.append(IterationRecord(
            k, phase, res2, resinf, omega, backtracks, rep.iterations,
            ls_used=ls_used))

        if res2 > cfg.eps_div:
            trace.outcome = DIVERGED
            return h, trace
        if res2 < cfg.eps_rel * res2_0 or resinf < cfg.eps_abs:
            trace.outcome = CONVERGED
            return h, trace

    trace.outcome = MAX_ITERATIONS
    return h, trace
