"""Continuation driver: step policy, bookkeeping, reports, sweeps."""

import numpy as np
import pytest

import richardsfv.continuation as cont_mod
from richardsfv.benchmarks import build_dam, build_verification_linear
from richardsfv.continuation import (ContinuationConfig, SweepEntry,
                                     make_entries, run_continuation, sweep)
from richardsfv.discretization import Discretization
from richardsfv.mesh import gen_cartesian
from richardsfv.solvers import (CONVERGED, MAX_ITERATIONS, ConvergenceTrace,
                                SolverConfig)


@pytest.fixture(scope="module")
def dam_disc():
    return Discretization(build_dam("unconfined", "400"), "tpfa")


def test_one_step_when_solver_strong(dam_disc):
    h, rep = run_continuation(dam_disc, SolverConfig(method="mixed"),
                              ContinuationConfig(kind="linear"))
    assert rep.success
    assert rep.n_success == 1
    assert rep.n_failed == 0
    assert rep.steps[0].q_target == 0.0
    assert rep.steps[-1].q_target == 1.0
    assert rep.final_q == 1.0


def test_forced_failure_bookkeeping(dam_disc):
    # nit_max=4 is too tight for the direct q=1 Newton solve but enough
    # for q=0.5 and the restart from there
    cfg = SolverConfig(method="newton", nit_max=4)
    h, rep = run_continuation(dam_disc, cfg, ContinuationConfig())
    assert rep.success
    assert rep.n_success == 2
    assert rep.n_failed == 1
    q_seq = [s.q_target for s in rep.steps]
    assert q_seq == [0.0, 1.0, 0.5, 1.0]
    assert not rep.steps[1].success
    # failed iterations still count toward the total
    assert rep.total_iterations == sum(s.iterations for s in rep.steps)
    assert rep.steps[1].iterations == 4


def test_q_nondecreasing_and_capped(dam_disc):
    cfg = SolverConfig(method="newton", nit_max=3)
    _, rep = run_continuation(dam_disc, cfg, ContinuationConfig())
    succ_q = [s.q_target for s in rep.steps[1:] if s.success]
    assert all(b >= a for a, b in zip(succ_q, succ_q[1:]))
    assert all(s.q_target <= 1.0 for s in rep.steps)


def test_state_hash_chain(dam_disc):
    cfg = SolverConfig(method="newton", nit_max=4)
    _, rep = run_continuation(dam_disc, cfg, ContinuationConfig())
    last_final = rep.steps[0].final_hash  # q=0 stage
    for s in rep.steps[1:]:
        assert s.initial_hash == last_final
        if s.success:
            last_final = s.final_hash


def test_kinds_share_q0_trace(dam_disc):
    cfg = SolverConfig(method="mixed")
    _, rl = run_continuation(dam_disc, cfg, ContinuationConfig(kind="linear"))
    _, rp = run_continuation(dam_disc, cfg, ContinuationConfig(kind="power"))
    assert rl.steps[0].trace.records == rp.steps[0].trace.records
    assert rl.steps[0].final_hash == rp.steps[0].final_hash


def test_fully_saturated_problem_trivial_q1_step():
    # kr = 1 everywhere: the q=0 solution already solves q=1
    mesh = gen_cartesian(5, 5, 1.0, 1.0)
    spec, _ = build_verification_linear(mesh, np.diag([1.0, 1.0]),
                                        a=0.5, b=1.0, c=20.0)
    h, rep = run_continuation(spec, SolverConfig(method="newton"),
                              ContinuationConfig())
    assert rep.success
    assert len(rep.steps) == 2
    assert rep.steps[1].iterations == 0


def _scripted(outcomes):
    """Monkeypatch-ready solve_nonlinear with per-q scripted outcomes."""
    calls = []

    def fake(disc, h0, q, kind, cfg=None, scheme="tpfa"):
        tr = ConvergenceTrace()
        tr.outcome = outcomes(q, len(calls))
        tr.records = [None]  # iterations == 0
        calls.append(q)
        return np.asarray(h0) + 1.0, tr

    return fake, calls


def test_scripted_step_halving(dam_disc, monkeypatch):
    # fail the first q=1 attempt, then succeed: 2 successful, 1 failed
    def outcomes(q, n):
        if q == 0.0:
            return CONVERGED
        return MAX_ITERATIONS if n == 1 else CONVERGED

    fake, calls = _scripted(outcomes)
    monkeypatch.setattr(cont_mod, "solve_nonlinear", fake)
    _, rep = run_continuation(dam_disc, SolverConfig(), ContinuationConfig())
    assert calls == [0.0, 1.0, 0.5, 1.0]
    assert rep.success and rep.n_success == 2 and rep.n_failed == 1


def test_scripted_dq_floor_abort(dam_disc, monkeypatch):
    def outcomes(q, n):
        return CONVERGED if q == 0.0 else MAX_ITERATIONS

    fake, calls = _scripted(outcomes)
    monkeypatch.setattr(cont_mod, "solve_nonlinear", fake)
    cfg = ContinuationConfig(dq_min=1e-2)
    _, rep = run_continuation(dam_disc, SolverConfig(), cfg)
    assert not rep.success
    assert rep.final_q == 0.0
    assert rep.n_success == 0
    # dq halves from 1.0 until it drops below 1e-2: 7 failed attempts
    assert rep.n_failed == 7


def test_scripted_budget_abort(dam_disc, monkeypatch):
    def outcomes(q, n):
        return CONVERGED if q == 0.0 else MAX_ITERATIONS

    fake, _ = _scripted(outcomes)
    monkeypatch.setattr(cont_mod, "solve_nonlinear", fake)
    cfg = ContinuationConfig(dq_min=1e-12, max_steps=5)
    _, rep = run_continuation(dam_disc, SolverConfig(), cfg)
    assert not rep.success
    assert rep.n_failed == 5


def test_q0_failure_is_fatal(dam_disc, monkeypatch):
    def outcomes(q, n):
        return MAX_ITERATIONS

    fake, calls = _scripted(outcomes)
    monkeypatch.setattr(cont_mod, "solve_nonlinear", fake)
    _, rep = run_continuation(dam_disc, SolverConfig(), ContinuationConfig())
    assert not rep.success
    assert len(rep.steps) == 1
    assert calls == [0.0]


def test_initial_guess_is_dirichlet_mean(dam_disc, monkeypatch):
    seen = {}

    def fake(disc, h0, q, kind, cfg=None, scheme="tpfa"):
        seen.setdefault("h0", np.array(h0, copy=True))
        tr = ConvergenceTrace()
        tr.outcome = CONVERGED
        tr.records = [None]
        return np.asarray(h0), tr

    monkeypatch.setattr(cont_mod, "solve_nonlinear", fake)
    run_continuation(dam_disc, SolverConfig(), ContinuationConfig())
    # dam: left h=10 on 20 faces, right h=2 on 4 faces -> mean 8.666...
    expect = (10.0 * 20 + 2.0 * 4) / 24
    np.testing.assert_allclose(seen["h0"], expect)


def test_explicit_h0_override(dam_disc):
    h0 = np.full(400, 9.0)
    _, rep = run_continuation(dam_disc, SolverConfig(method="newton"),
                              ContinuationConfig(), h0=h0)
    assert rep.success
    import hashlib
    assert rep.steps[0].initial_hash == \
        hashlib.sha256(h0.tobytes()).hexdigest()[:16]


def test_config_validation():
    with pytest.raises(ValueError):
        ContinuationConfig(kind="cubic")
    with pytest.raises(ValueError):
        ContinuationConfig(decrease=1.5)
    with pytest.raises(ValueError):
        ContinuationConfig(increase=0.5)
    with pytest.raises(ValueError):
        ContinuationConfig(dq_min=0.0)
    with pytest.raises(ValueError):
        ContinuationConfig(dq_init=2.0)
    with pytest.raises(ValueError):
        ContinuationConfig(max_steps=0)


# -- sweep -----------------------------------------------------------------

def test_sweep_full_matrix():
    spec = build_dam("unconfined", "cartesian:4x4")
    entries = make_entries(["tpfa", "mpfa-o"],
                           ["newton", "picard", "mixed"],
                           ["linear", "power"])
    assert len(entries) == 12
    rows = sweep(spec, entries)
    assert len(rows) == 12
    assert [(r.scheme, r.solver, r.kind) for r in rows] == \
        [(e.scheme, e.solver, e.kind) for e in entries]
    for r in rows:
        assert r.outcome in ("ok", "fail")
        assert r.total_iters >= 0
        assert r.wall_seconds >= 0.0


def test_sweep_empty():
    spec = build_dam("unconfined", "cartesian:4x4")
    assert sweep(spec, []) == []


def test_sweep_parallel_workers(monkeypatch):
    monkeypatch.setenv("RICHARDS_THREADS", "3")
    spec = build_dam("unconfined", "cartesian:4x4")
    entries = make_entries(["tpfa"], ["newton", "mixed"], ["linear"])
    rows = sweep(spec, entries)
    assert [r.solver for r in rows] == ["newton", "mixed"]
    assert all(r.outcome == "ok" for r in rows)


def test_sweep_failures_are_rows(monkeypatch):
    # impossible tolerance in 1 iteration: everything fails but runs
    spec = build_dam("unconfined", "cartesian:4x4")
    cfg = SolverConfig(method="newton", nit_max=1, eps_rel=1e-14,
                       eps_abs=1e-14)
    entries = [SweepEntry("tpfa", "newton", "power", cfg,
                          ContinuationConfig(kind="power", dq_min=0.2))]
    rows = sweep(spec, entries)
    assert rows[0].outcome == "fail"
    assert rows[0].cont_failed > 0
