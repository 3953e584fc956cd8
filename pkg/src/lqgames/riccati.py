"""Coupled backward value recursion for N-player LQ games.

At each stage the agents' feedback gains solve one stacked linear system:
block (i, j) of the coefficient matrix is (B^i)' P^i B^j off the diagonal
and R^i + (B^i)' P^i B^i on it, and block i of the right-hand side is
(B^i)' P^i A, where P^i is agent i's value matrix one step ahead. With the
gains in hand, each value matrix steps backward through

    P_new^i = Q^i + (K^i)' R^i K^i + Acl' P^i Acl,      Acl = A - sum_j B^j K^j.

Iterating this map from a terminal condition produces the unique
finite-horizon feedback equilibrium stage by stage; the orbit of the map is
what the analysis module classifies (fixed point, cycle, or neither).

Sign convention: gains act as u^i = -K^i x, so Acl = A - sum_j B^j K^j.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import get_lapack_funcs

from .model import GainTuple, GameSpec, PTuple, pbh_stabilizable, symmetrize

# Stage solve fails when the reciprocal condition estimate drops below this.
SINGULARITY_RCOND = 1e-12
# Any value matrix whose Frobenius norm passes this stops the recursion.
DIVERGENCE_THRESHOLD = 1e12
# Traces longer than this keep only a trailing ring buffer of states.
FULL_STORAGE_LIMIT = 10_000
# Ring size: enough for cycle detection up to the default max period.
RING_BUFFER_SIZE = 512


class SingularStageSystem(RuntimeError):
    """Stage-gain system numerically singular: no unique stage equilibrium."""

    def __init__(self, rcond: float, step: int | None = None):
        self.rcond = rcond
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"stage-gain system singular{where} (rcond={rcond:.3e})")


class NotStabilizable(RuntimeError):
    """A required (state matrix, input map) pair fails the PBH test."""


class NoConvergence(RuntimeError):
    """An iterative solver exhausted its budget before converging."""


@dataclass(frozen=True)
class StageSystem:
    """Stacked stage-gain system M K = rhs with a conditioning estimate.

    M has shape (sum m_i, sum m_i), rhs has shape (sum m_i, n), and
    input_dims records the block row sizes used to split the solution.
    The LU factorization behind rcond_estimate is cached for the solve.
    """

    M: np.ndarray
    rhs: np.ndarray
    rcond_estimate: float
    input_dims: tuple[int, ...]
    _factor: tuple | None = field(default=None, repr=False, compare=False)


@dataclass
class TerminationRecord:
    """Why a recursion ended: 'completed', 'converged', 'stopped',
    'diverged', or 'singular'."""

    reason: str
    steps: int
    final_residual: float
    rcond: float | None = None


class RecursionTrace:
    """Backward orbit of the stage map.

    p_states[s] is the value tuple after s backward steps from the terminal
    condition (p_states[0] is the terminal tuple itself) and gains[s] is the
    gain tuple produced when stepping from p_states[s] to p_states[s + 1].
    For very long runs only a trailing window of states is retained;
    first_step gives the absolute step index of p_states[0].
    """

    def __init__(self, p_states, gains, terminated: TerminationRecord,
                 first_step: int = 0):
        self.p_states = list(p_states)
        self.gains = list(gains)
        self.terminated = terminated
        self.first_step = first_step

    def __len__(self):
        return len(self.p_states)

    @property
    def steps(self) -> int:
        """Total backward steps performed."""
        return self.terminated.steps

    def final_state(self) -> PTuple:
        return self.p_states[-1]

    def forward_gains(self, horizon: int) -> list[GainTuple]:
        """Gain schedule in forward time for a horizon-T game.

        The gain applied at forward time t is the one produced at backward
        step T - 1 - t, so the schedule is the stored sequence reversed.
        Requires the full horizon to be present in the trace.
        """
        if len(self.gains) < horizon or self.first_step != 0:
            raise ValueError("trace does not cover the requested horizon")
        return [self.gains[horizon - 1 - t] for t in range(horizon)]


def assemble_stage_system(p_next: PTuple, game: GameSpec) -> StageSystem:
    """Build the stacked stage-gain system from next-step value matrices.

    The reciprocal condition estimate comes from the LAPACK 1-norm
    estimator on the LU factorization, which the solve then reuses.
    """
    dims = game.input_dims
    total = sum(dims)
    offsets = np.concatenate(([0], np.cumsum(dims)))
    M = np.empty((total, total))
    rhs = np.empty((total, game.n))
    for i, Bi in enumerate(game.B):
        PB = Bi.T @ p_next[i]          # (m_i, n), reused across blocks
        ri, rj = offsets[i], offsets[i + 1]
        for j, Bj in enumerate(game.B):
            block = PB @ Bj
            if i == j:
                block = block + game.R[i]
            M[ri:rj, offsets[j]:offsets[j + 1]] = block
        rhs[ri:rj, :] = PB @ game.A
    getrf, gecon = get_lapack_funcs(("getrf", "gecon"), (M,))
    anorm = float(np.linalg.norm(M, 1))
    lu, piv, info = getrf(M, overwrite_a=False)
    if info > 0 or not np.isfinite(anorm):
        rcond, factor = 0.0, None
    else:
        rcond = float(gecon(lu, anorm, norm="1")[0])
        factor = (lu, piv)
    return StageSystem(M=M, rhs=rhs, rcond_estimate=rcond, input_dims=dims,
                       _factor=factor)


def solve_stage_gains(sys: StageSystem) -> GainTuple:
    """Solve M K = rhs and split the stacked solution into per-agent gains.

    Raises SingularStageSystem when the system is too ill-conditioned for
    the gains to mean anything.
    """
    if sys.rcond_estimate < SINGULARITY_RCOND or sys._factor is None:
        raise SingularStageSystem(sys.rcond_estimate)
    getrs, = get_lapack_funcs(("getrs",), (sys.M,))
    stacked, info = getrs(sys._factor[0], sys._factor[1], sys.rhs)
    if info != 0:
        raise SingularStageSystem(sys.rcond_estimate)
    out = []
    row = 0
    for m in sys.input_dims:
        out.append(stacked[row:row + m, :])
        row += m
    return GainTuple(out)


def closed_loop(game: GameSpec, gains: GainTuple) -> np.ndarray:
    """Joint closed-loop matrix A - sum_j B^j K^j."""
    Acl = game.A.copy()
    for Bj, Kj in zip(game.B, gains):
        Acl -= Bj @ Kj
    return Acl


def partial_closed_loop(game: GameSpec, gains: GainTuple, i: int) -> np.ndarray:
    """Closed loop with agent i's input removed: A - sum_{j != i} B^j K^j."""
    Acl = game.A.copy()
    for j, (Bj, Kj) in enumerate(zip(game.B, gains)):
        if j != i:
            Acl -= Bj @ Kj
    return Acl


def riccati_step(p_next: PTuple, game: GameSpec) -> tuple[PTuple, GainTuple]:
    """One backward step of the coupled value recursion.

    Solves the stage-gain system at p_next, then updates every agent via
    P = Q^i + (K^i)' R^i K^i + Acl' P_next^i Acl and symmetrizes.
    """
    sys = assemble_stage_system(p_next, game)
    gains = solve_stage_gains(sys)
    Acl = closed_loop(game, gains)
    entries = []
    for i in range(game.num_agents):
        Ki = gains[i]
        P = game.Q[i] + Ki.T @ game.R[i] @ Ki + Acl.T @ p_next[i] @ Acl
        entries.append(symmetrize(P))
    return PTuple(entries), gains


class ConvergenceStop:
    """Stop rule firing after `window` consecutive relative step changes
    below `tol`. Reset and reuse across runs is not supported; make a new
    instance per recursion."""

    reason = "converged"

    def __init__(self, tol: float = 1e-9, window: int = 10):
        self.tol = tol
        self.window = window
        self._run = 0

    def __call__(self, step: int, rel_change: float, p_new: PTuple) -> bool:
        if rel_change < self.tol:
            self._run += 1
        else:
            self._run = 0
        return self._run >= self.window


def run_recursion(game: GameSpec, terminal: PTuple, max_steps: int,
                  stop=None, keep: int | None = None) -> RecursionTrace:
    """Iterate the backward map from a terminal value tuple.

    Records every state and gain up to FULL_STORAGE_LIMIT steps; longer
    runs retain a trailing ring buffer (`keep` overrides its size). Stops
    early on divergence (norm above DIVERGENCE_THRESHOLD), a singular
    stage, or when the stop rule returns True; the termination record says
    which. Early stops are recorded, never raised.
    """
    if keep is None:
        keep = RING_BUFFER_SIZE
    ring = max_steps > FULL_STORAGE_LIMIT
    states = deque(maxlen=keep + 1) if ring else []
    gains = deque(maxlen=keep) if ring else []

    p = terminal
    states.append(p)
    reason = "completed"
    rel = float("inf")
    rcond = None
    steps = 0
    for s in range(max_steps):
        try:
            p_new, k = riccati_step(p, game)
        except SingularStageSystem as err:
            reason = "singular"
            rcond = err.rcond
            break
        rel = p.distance(p_new)
        states.append(p_new)
        gains.append(k)
        steps = s + 1
        if p_new.max_norm() > DIVERGENCE_THRESHOLD:
            reason = "diverged"
            p = p_new
            break
        if stop is not None and stop(steps, rel, p_new):
            reason = getattr(stop, "reason", "stopped")
            p = p_new
            break
        p = p_new

    record = TerminationRecord(
        reason=reason, steps=steps,
        final_residual=rel if np.isfinite(rel) else -1.0, rcond=rcond)
    first = steps + 1 - len(states)
    return RecursionTrace(states, gains, record, first_step=first)


def best_response_dare(game: GameSpec, i: int, others: GainTuple | None,
                       tol: float = 1e-12, max_iter: int = 100_000,
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Single-agent stabilizing Riccati solution against frozen opponents.

    Freezes every other agent's gain (entry i of `others` is ignored;
    None means all opponents play zero), forms the residual state matrix
    Abar = A - sum_{j != i} B^j K^j, and solves agent i's discrete
    algebraic Riccati equation with (Abar, B^i, Q^i, R^i) by fixed-point
    iteration from P = Q^i. Returns (P_i, K_i) with the closed loop
    Abar - B^i K_i strictly stable.

    Raises NotStabilizable when (Abar, B^i) fails the PBH test and
    NoConvergence when the iteration budget runs out.
    """
    if others is None:
        others = GainTuple([np.zeros((m, game.n)) for m in game.input_dims])
    Abar = partial_closed_loop(game, others, i)
    Bi = game.B[i]
    if not pbh_stabilizable(Abar, Bi):
        raise NotStabilizable(
            f"agent {i}: residual closed loop not stabilizable through B^{i}")
    Qi, Ri = game.Q[i], game.R[i]
    P = Qi.copy()
    for _ in range(max_iter):
        K = np.linalg.solve(Ri + Bi.T @ P @ Bi, Bi.T @ P @ Abar)
        Acl = Abar - Bi @ K
        P_new = symmetrize(Qi + K.T @ Ri @ K + Acl.T @ P @ Acl)
        change = np.linalg.norm(P_new - P) / (1.0 + np.linalg.norm(P))
        P = P_new
        if change < tol:
            K = np.linalg.solve(Ri + Bi.T @ P @ Bi, Bi.T @ P @ Abar)
            return P, K
    raise NoConvergence(
        f"best response for agent {i} did not settle in {max_iter} iterations")
