"""Asymptotic analysis of the backward value recursion.

A trace of the stage map can settle on a fixed point (a stationary
infinite-horizon equilibrium), fall into a periodic orbit (a periodic
equilibrium), stay bounded without settling, diverge, or hit a singular
stage. This module detects and certifies the first two and classifies the
rest.

A period-L orbit P_1, ..., P_L (P_l = f(P_{l+1}) cyclically, f the backward
map) is certified on four counts:

* orbit residual: each phase reproduces its predecessor through f;
* period product: Theta_L = Acl_L @ ... @ Acl_1 has spectral radius < 1,
  so the gain cycle stabilizes the system over one period even when
  individual phases are unstable;
* loop identity: unrolling the one-step value update around the loop
  returns the starting phase,
  P_1^i = sum_l Theta_{l-1}' (Q^i + K_l^i' R^i K_l^i) Theta_{l-1}
          + Theta_L' P_1^i Theta_L;
* periodic best response: for each agent, solving its periodic Riccati
  recursion against the others' frozen gain cycle reproduces the phases,
  so no agent can improve unilaterally.

Here K_l is the gain tuple produced by the stage solve at P_{l+1} (the one
applied while the orbit moves from P_{l+1} to P_l) and Acl_l the matching
closed loop.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import GainTuple, GameSpec, PTuple
from .riccati import (ConvergenceStop, RecursionTrace, SingularStageSystem,
                      assemble_stage_system, best_response_dare, closed_loop,
                      partial_closed_loop, riccati_step, run_recursion,
                      solve_stage_gains, symmetrize)

VERDICT_CONVERGED = "converged"
VERDICT_CYCLE = "cycle"
VERDICT_BOUNDED = "bounded_nonconvergent"
VERDICT_DIVERGED = "diverged"
VERDICT_SINGULAR = "singular"


class CertificationFailed(RuntimeError):
    """One or more cycle-certificate checks exceeded tolerance."""

    def __init__(self, failures: list[str]):
        self.failures = failures
        super().__init__("; ".join(failures))


@dataclass(frozen=True)
class CycleCertificate:
    """Evidence that a phase sequence is a certified periodic equilibrium.

    phases are in loop order (phase l steps to phase l-1 under the map);
    gains[l] is the stage-gain tuple applied while moving into phase l.
    phase_spectral_radii[l] is rho of the closed loop at that slot; single
    phases may be unstable as long as the period product is not.
    """

    period: int
    phases: tuple[PTuple, ...]
    gains: tuple[GainTuple, ...]
    cycle_residual: float
    product_spectral_radius: float
    loop_identity_residual: float
    periodic_br_residual: float
    phase_spectral_radii: tuple[float, ...]

    def forward_gain_schedule(self) -> list[GainTuple]:
        """One period of gains in forward-time application order.

        Applying them in this order makes the state transition over one
        period equal to the period product Theta_L.
        """
        return list(self.gains)


@dataclass
class Classification:
    """Asymptotic verdict for one (game, terminal) pair."""

    verdict: str
    fixed_point: PTuple | None = None
    steps_to_converge: int | None = None
    certificate: CycleCertificate | None = None
    sup_norm: float | None = None
    steps_observed: int | None = None
    step: int | None = None
    rcond: float | None = None


@dataclass
class ClassifyOptions:
    """Detection horizons and tolerances; defaults are desk scale."""

    horizon: int = 10_000
    conv_tol: float = 1e-9
    conv_window: int = 10
    cycle_tol: float = 1e-8
    cycle_window: int = 3       # matched steps per period: window * L
    max_period: int = 100
    cert_tol: float = 1e-8
    loop_tol: float = 1e-6
    br_tol: float = 1e-6


@dataclass
class NashVerification:
    """Stationary-equilibrium check: stable closed loop plus per-agent
    best-response gain gaps below tolerance."""

    ok: bool
    precondition_ok: bool
    fixed_point_residual: float
    closed_loop_spectral_radius: float
    best_response_gaps: list[float] = field(default_factory=list)
    tol: float = 1e-8


def spectral_radius(M: np.ndarray) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    return float(np.max(np.abs(np.linalg.eigvals(np.atleast_2d(M)))))


def stage_gains(p: PTuple, game: GameSpec) -> GainTuple:
    """Gain tuple from the stacked stage solve at p (the gain map)."""
    return solve_stage_gains(assemble_stage_system(p, game))


def fixed_point_residual(p: PTuple, game: GameSpec) -> float:
    """Max over agents of ||P^i - f(P)^i||_F / (1 + ||P^i||_F)."""
    image, _ = riccati_step(p, game)
    return p.distance(image)


def detect_convergence(trace: RecursionTrace, tol: float = 1e-9,
                       window: int = 10) -> tuple[PTuple, int] | None:
    """Earliest settled point of a trace, or None.

    Finds the first index s* whose following `window` consecutive relative
    step changes (max over agents of ||P_{s+1}^i - P_s^i||_F scaled by
    1 + ||P_s^i||_F) all fall below tol, and returns the state closing
    that window together with s*. Step counts are absolute even when the
    trace retains only a trailing window.
    """
    states = trace.p_states
    run = 0
    for s in range(len(states) - 1):
        if states[s].distance(states[s + 1]) < tol:
            run += 1
            if run >= window:
                start = s + 1 - window
                return states[s + 1], trace.first_step + start
        else:
            run = 0
    return None


def _minimal_period(states, tol: float, max_period: int, window: int) -> int | None:
    """Smallest L in [1, max_period] matching the trailing orbit.

    Requires window * L consecutive matches between states s and s + L at
    relative tolerance tol. Scanning in ascending L makes the result
    minimal (no divisor of the returned period also matches).
    """
    S = len(states) - 1
    for L in range(1, max_period + 1):
        need = window * L
        if need + L > S + 1:
            return None
        ok = True
        for s in range(S - L, S - L - need, -1):
            if states[s].distance(states[s + L]) >= tol:
                ok = False
                break
        if ok:
            return L
    return None


def detect_cycle(trace: RecursionTrace, tol: float = 1e-8,
                 max_period: int = 100, window: int = 3,
                 game: GameSpec | None = None,
                 cert_tol: float = 1e-8, loop_tol: float = 1e-6,
                 br_tol: float = 1e-6) -> CycleCertificate | None:
    """Detect and certify a periodic orbit at the tail of a trace.

    Scans periods L = 1..max_period for the smallest one where the last
    window * L steps repeat at relative tolerance tol. A period-1 match is
    convergence, not a cycle, and yields None. For L >= 2 the trailing
    phases are re-verified through verify_cycle (re-running the map around
    the loop, period-product spectral radius, loop identity, periodic best
    responses); detection without a passing certificate also yields None.
    """
    if game is None:
        raise ValueError("detect_cycle needs the game to certify phases")
    states = trace.p_states
    if len(states) < 2:
        return None
    L = _minimal_period(states, tol, max_period, window)
    if L is None or L == 1:
        return None
    S = len(states) - 1
    # Loop order: phase l steps to phase l-1, so walk the tail backwards.
    phases = [states[S - j] for j in range(L)]
    try:
        return verify_cycle(phases, game, tol=cert_tol, loop_tol=loop_tol,
                            br_tol=br_tol)
    except (CertificationFailed, SingularStageSystem):
        return None


class NoPeriodicSolution(RuntimeError):
    """The periodic best-response iteration exhausted its sweep budget."""


def _periodic_best_response(game: GameSpec, i: int, frozen: list[np.ndarray],
                            reference: list[np.ndarray], tol: float = 1e-12,
                            max_sweeps: int = 20_000) -> list[np.ndarray]:
    """Solve agent i's periodic Riccati recursion against frozen opponents.

    frozen[l] is the residual state matrix at slot l (A minus the other
    agents' inputs); the backward pass sweeps slots L-1..0 repeatedly from
    P = Q^i until the per-slot values change by less than tol over a full
    period. reference supplies the norms used for relative change.
    """
    L = len(frozen)
    Bi, Qi, Ri = game.B[i], game.Q[i], game.R[i]
    V = Qi.copy()
    prev = [None] * L
    for _ in range(max_sweeps):
        current = [None] * L
        for l in range(L - 1, -1, -1):
            Abar = frozen[l]
            K = np.linalg.solve(Ri + Bi.T @ V @ Bi, Bi.T @ V @ Abar)
            Acl = Abar - Bi @ K
            V = symmetrize(Qi + K.T @ Ri @ K + Acl.T @ V @ Acl)
            current[l] = V
        if prev[0] is not None:
            change = max(
                np.linalg.norm(c - p) / (1.0 + np.linalg.norm(r))
                for c, p, r in zip(current, prev, reference))
            if change < tol:
                return current
        prev = current
    raise NoPeriodicSolution(
        f"periodic best response for agent {i} did not settle")


def verify_cycle(phases, game: GameSpec, tol: float = 1e-8,
                 loop_tol: float = 1e-6, br_tol: float = 1e-6,
                 ) -> CycleCertificate:
    """Certify a phase sequence as a periodic equilibrium.

    phases must be in loop order: phase l is the image of phase l+1 under
    the backward map (cyclically). Non-minimal periods are accepted - a
    fixed point replicated L times certifies for every L. Checks, in
    order: (a) orbit residual of each phase against the map image of its
    successor; (b) spectral radius of the period product below one;
    (c) loop identity residual for every agent; (d) periodic best-response
    residual for every agent. Raises CertificationFailed listing every
    check that exceeded its tolerance.
    """
    phases = [p if isinstance(p, PTuple) else PTuple(p) for p in phases]
    L = len(phases)
    if L < 2:
        raise ValueError("a cycle needs at least two phases")
    N = game.num_agents

    # (a) Re-run the map around the loop; the step at phases[(l+1) % L]
    # must land on phases[l] and yields the slot-l gains.
    gains: list[GainTuple] = []
    residual = 0.0
    for l in range(L):
        source = phases[(l + 1) % L]
        image, k = riccati_step(source, game)
        gains.append(k)
        residual = max(residual, phases[l].distance(image))

    loops = [closed_loop(game, k) for k in gains]
    phase_rho = tuple(spectral_radius(a) for a in loops)

    # (b) Period product in slot order Theta_L = Acl_L ... Acl_1.
    theta = [np.eye(game.n)]
    for l in range(L):
        theta.append(loops[l] @ theta[-1])
    rho_product = spectral_radius(theta[-1])

    # (c) Unroll the value update around the loop back to phase 1.
    loop_residual = 0.0
    for i in range(N):
        acc = theta[-1].T @ phases[0][i] @ theta[-1]
        for l in range(L):
            Ki = gains[l][i]
            weight = game.Q[i] + Ki.T @ game.R[i] @ Ki
            acc = acc + theta[l].T @ weight @ theta[l]
        loop_residual = max(
            loop_residual,
            float(np.linalg.norm(phases[0][i] - acc)
                  / (1.0 + np.linalg.norm(phases[0][i]))))

    # (d) Each agent's periodic best response against the others' frozen
    # gain cycle must reproduce its own phases.
    br_residual = 0.0
    br_failure = None
    for i in range(N):
        frozen = [partial_closed_loop(game, gains[l], i) for l in range(L)]
        reference = [phases[l][i] for l in range(L)]
        try:
            solved = _periodic_best_response(game, i, frozen, reference)
        except NoPeriodicSolution as err:
            br_failure = str(err)
            break
        for l in range(L):
            br_residual = max(
                br_residual,
                float(np.linalg.norm(solved[l] - reference[l])
                      / (1.0 + np.linalg.norm(reference[l]))))

    failures = []
    if not residual < tol:
        failures.append(f"orbit residual {residual:.3e} >= {tol:.1e}")
    if not rho_product < 1.0:
        failures.append(f"period product spectral radius {rho_product:.6f} >= 1")
    if not loop_residual < loop_tol:
        failures.append(f"loop identity residual {loop_residual:.3e} >= {loop_tol:.1e}")
    if br_failure is not None:
        failures.append(br_failure)
    elif not br_residual < br_tol:
        failures.append(f"periodic best-response residual {br_residual:.3e} >= {br_tol:.1e}")
    if failures:
        raise CertificationFailed(failures)

    return CycleCertificate(
        period=L,
        phases=tuple(phases),
        gains=tuple(gains),
        cycle_residual=residual,
        product_spectral_radius=rho_product,
        loop_identity_residual=loop_residual,
        periodic_br_residual=br_residual,
        phase_spectral_radii=phase_rho,
    )


def classify(game: GameSpec, terminal: PTuple,
             opts: ClassifyOptions | None = None) -> Classification:
    """Run the recursion and name its asymptotic regime.

    Convergence is tested before cycles (a settled trace is never reported
    as a period-1 cycle); anything bounded that neither detector claims is
    bounded_nonconvergent. Deterministic for fixed inputs and options.
    """
    if opts is None:
        opts = ClassifyOptions()
    stop = ConvergenceStop(tol=opts.conv_tol, window=opts.conv_window)
    trace = run_recursion(game, terminal, opts.horizon, stop=stop)
    term = trace.terminated

    if term.reason == "singular":
        return Classification(VERDICT_SINGULAR, step=term.steps,
                              rcond=term.rcond)
    if term.reason == "diverged":
        return Classification(VERDICT_DIVERGED, step=term.steps)

    settled = detect_convergence(trace, tol=opts.conv_tol,
                                 window=opts.conv_window)
    if settled is not None:
        point, steps = settled
        return Classification(VERDICT_CONVERGED, fixed_point=point,
                              steps_to_converge=steps)

    cert = detect_cycle(trace, tol=opts.cycle_tol,
                        max_period=opts.max_period, window=opts.cycle_window,
                        game=game, cert_tol=opts.cert_tol,
                        loop_tol=opts.loop_tol, br_tol=opts.br_tol)
    if cert is not None:
        return Classification(VERDICT_CYCLE, certificate=cert)

    sup = max(p.max_norm() for p in trace.p_states)
    return Classification(VERDICT_BOUNDED, sup_norm=sup,
                          steps_observed=term.steps)


def nash_verify_stationary(p: PTuple, game: GameSpec,
                           tol: float = 1e-8) -> NashVerification:
    """Verify a fixed point as a stationary Nash equilibrium.

    Requires the fixed-point residual below tol (violations are reported,
    not raised), a strictly stable joint closed loop, and every agent's
    independent best-response gain within tol of its stage gain.
    """
    residual = fixed_point_residual(p, game)
    if not residual < tol:
        return NashVerification(
            ok=False, precondition_ok=False, fixed_point_residual=residual,
            closed_loop_spectral_radius=float("nan"), tol=tol)

    gains = stage_gains(p, game)
    rho = spectral_radius(closed_loop(game, gains))
    gaps = []
    for i in range(game.num_agents):
        _, Ki = best_response_dare(game, i, gains)
        gaps.append(float(np.linalg.norm(Ki - gains[i])))
    ok = rho < 1.0 and all(g < tol for g in gaps)
    return NashVerification(
        ok=ok, precondition_ok=True, fixed_point_residual=residual,
        closed_loop_spectral_radius=rho, best_response_gaps=gaps, tol=tol)
