"""Game data model: system and cost matrices, validation, stabilizability.

A game is the tuple (A, B^1..B^N, Q^1..Q^N, R^1..R^N, W): shared linear
dynamics x+ = A x + sum_i B^i u^i + w, one quadratic stage cost
x'Q^i x + (u^i)'R^i u^i per agent, and optional noise covariance W.
Validation is non-throwing: ``validate_game`` reports every violated
invariant instead of raising, so arbitrary input can be inspected.
"""

from dataclasses import dataclass, field

import numpy as np

# Matrices declared symmetric are symmetrized on ingestion; asymmetry
# beyond this relative Frobenius level is a validation failure.
SYMMETRY_TOL = 1e-8
# Positive definiteness: min eigenvalue must exceed this times (1 + max eig).
DEFINITENESS_TOL = 1e-10
# Numerical rank: singular values below this times the largest count as zero.
PBH_RANK_TOL = 1e-9
# Eigenvalues with |lam| >= 1 - this margin are treated as unstable modes.
PBH_EIG_MARGIN = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _as_square(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        n = int(round(np.sqrt(a.size)))
        a = a.reshape(n, n) if n * n == a.size else np.atleast_2d(a)
    return a


def _as_input_map(x, n: int) -> np.ndarray:
    """Coerce an input matrix to shape (n, m): scalars become 1x1, vectors
    of length n become a single-input column."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(n, -1) if a.size % max(n, 1) == 0 else np.atleast_2d(a)
    return a


def _rel_asymmetry(m: np.ndarray) -> float:
    return float(np.linalg.norm(m - m.T) / (1.0 + np.linalg.norm(m)))


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto symmetric matrices, (M + M') / 2."""
    return 0.5 * (m + m.T)


class GameSpec:
    """Immutable N-player LQ game definition.

    Parameters accept scalars, nested lists, or arrays; matrices declared
    symmetric (Q, R, W) are symmetrized on ingestion and the discarded
    asymmetry is kept for validation. W defaults to the zero matrix.

    Attributes
    ----------
    A : (n, n) state dynamics
    B : tuple of (n, m_i) input maps, one per agent
    Q : tuple of (n, n) state cost weights
    R : tuple of (m_i, m_i) input cost weights
    W : (n, n) noise covariance
    n, num_agents, input_dims : derived dimensions
    """

    __slots__ = ("A", "B", "Q", "R", "W", "n", "num_agents", "input_dims",
                 "asymmetry")

    def __init__(self, A, B, Q, R, W=None):
        A = _as_square(A)
        n = A.shape[0]
        B = tuple(_as_input_map(b, n) for b in B)
        Q_raw = [_as_square(q) for q in Q]
        R_raw = [_as_square(r) for r in R]
        W_raw = _as_square(W) if W is not None else np.zeros((n, n))

        asym = {}
        for i, q in enumerate(Q_raw):
            asym[f"Q[{i}]"] = _rel_asymmetry(q)
        for i, r in enumerate(R_raw):
            asym[f"R[{i}]"] = _rel_asymmetry(r)
        asym["W"] = _rel_asymmetry(W_raw)

        self.A = _freeze(A)
        self.B = tuple(_freeze(b) for b in B)
        self.Q = tuple(_freeze(symmetrize(q)) for q in Q_raw)
        self.R = tuple(_freeze(symmetrize(r)) for r in R_raw)
        self.W = _freeze(symmetrize(W_raw))
        self.n = n
        self.num_agents = len(self.B)
        self.input_dims = tuple(b.shape[1] for b in self.B)
        self.asymmetry = asym

    def __setattr__(self, name, value):
        if name in self.__slots__ and hasattr(self, "asymmetry"):
            raise AttributeError("GameSpec is immutable")
        object.__setattr__(self, name, value)

    def __repr__(self):
        return (f"GameSpec(n={self.n}, num_agents={self.num_agents}, "
                f"input_dims={self.input_dims})")

    def stacked_inputs(self) -> np.ndarray:
        """Horizontal concatenation [B^1 ... B^N], shape (n, sum m_i)."""
        return np.hstack(self.B)


class PTuple:
    """Ordered tuple of per-agent symmetric value matrices, one n x n per agent.

    Entries are symmetrized on ingestion and frozen.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        mats = []
        for e in entries:
            m = _as_square(e)
            mats.append(_freeze(symmetrize(m)))
        object.__setattr__(self, "entries", tuple(mats))

    def __setattr__(self, name, value):
        raise AttributeError("PTuple is immutable")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __repr__(self):
        shapes = ", ".join(f"{m.shape[0]}x{m.shape[1]}" for m in self.entries)
        return f"PTuple({shapes})"

    def norms(self) -> list[float]:
        return [float(np.linalg.norm(m)) for m in self.entries]

    def max_norm(self) -> float:
        return max(self.norms())

    def distance(self, other: "PTuple") -> float:
        """Max over agents of relative Frobenius distance,
        ||P^i - O^i||_F / (1 + ||P^i||_F)."""
        return max(
            float(np.linalg.norm(a - b) / (1.0 + np.linalg.norm(a)))
            for a, b in zip(self.entries, other.entries)
        )

    def min_eigenvalue(self) -> float:
        return min(float(np.linalg.eigvalsh(m)[0]) for m in self.entries)


class GainTuple:
    """Ordered tuple of per-agent feedback gains, one m_i x n per agent.

    Gains act through u^i = -K^i x, so the closed loop is A - sum_j B^j K^j.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        object.__setattr__(
            self, "entries",
            tuple(_freeze(np.atleast_2d(np.asarray(e, dtype=float)))
                  for e in entries))

    def __setattr__(self, name, value):
        raise AttributeError("GainTuple is immutable")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __repr__(self):
        shapes = ", ".join(f"{m.shape[0]}x{m.shape[1]}" for m in self.entries)
        return f"GainTuple({shapes})"

    def distance(self, other: "GainTuple") -> float:
        return max(
            float(np.linalg.norm(a - b) / (1.0 + np.linalg.norm(a)))
            for a, b in zip(self.entries, other.entries)
        )


@dataclass
class ValidationReport:
    """Outcome of validate_game. ok is true iff every sub-check passed."""

    ok: bool
    stabilizable: bool
    definiteness_failures: list[tuple[str, float]] = field(default_factory=list)
    dimension_failures: list[str] = field(default_factory=list)
    symmetry_failures: list[tuple[str, float]] = field(default_factory=list)


def pbh_stabilizable(A: np.ndarray, B_all: np.ndarray) -> bool:
    """PBH stabilizability test for the pair (A, B_all).

    True iff rank([A - lam*I | B_all]) = n for every eigenvalue lam of A
    with |lam| >= 1 (up to PBH_EIG_MARGIN), with numerical rank judged at
    PBH_RANK_TOL relative to the largest singular value.
    """
    A = _as_square(A)
    B_all = np.atleast_2d(np.asarray(B_all, dtype=float))
    n = A.shape[0]
    if B_all.shape[0] != n:
        B_all = B_all.reshape(n, -1)
    eigs = np.linalg.eigvals(A)
    eye = np.eye(n)
    for lam in eigs:
        if abs(lam) < 1.0 - PBH_EIG_MARGIN:
            continue
        pencil = np.hstack([A - lam * eye, B_all.astype(complex)])
        svals = np.linalg.svd(pencil, compute_uv=False)
        top = svals.max(initial=0.0)
        rank = int(np.count_nonzero(svals > PBH_RANK_TOL * top)) if top > 0 else 0
        if rank < n:
            return False
    return True


def validate_game(game: GameSpec) -> ValidationReport:
    """Check dimensions, symmetry, definiteness, and stabilizability.

    All failures are reported, never raised. Definiteness uses the
    scale-relative threshold: min eig > DEFINITENESS_TOL * (1 + max eig)
    for Q and R; W only needs min eig > -DEFINITENESS_TOL * (1 + |max eig|).
    """
    dim_failures: list[str] = []
    n = game.n
    N = game.num_agents

    if n < 1:
        dim_failures.append("state dimension n must be >= 1")
    if N < 1:
        dim_failures.append("need at least one agent")
    if game.A.shape != (n, n):
        dim_failures.append(f"A has shape {game.A.shape}, expected ({n}, {n})")
    for i, b in enumerate(game.B):
        if b.shape[0] != n:
            dim_failures.append(f"B[{i}] has {b.shape[0]} rows, expected {n}")
        if b.shape[1] < 1:
            dim_failures.append(f"B[{i}] must have at least one column")
    if len(game.Q) != N:
        dim_failures.append(f"{len(game.Q)} Q matrices for {N} agents")
    if len(game.R) != N:
        dim_failures.append(f"{len(game.R)} R matrices for {N} agents")
    for i, q in enumerate(game.Q):
        if q.shape != (n, n):
            dim_failures.append(f"Q[{i}] has shape {q.shape}, expected ({n}, {n})")
    for i, (r, m) in enumerate(zip(game.R, game.input_dims)):
        if r.shape != (m, m):
            dim_failures.append(f"R[{i}] has shape {r.shape}, expected ({m}, {m})")
    if game.W.shape != (n, n):
        dim_failures.append(f"W has shape {game.W.shape}, expected ({n}, {n})")

    sym_failures = [(name, a) for name, a in game.asymmetry.items()
                    if a > SYMMETRY_TOL]

    def_failures: list[tuple[str, float]] = []
    dims_ok = not dim_failures
    if dims_ok:
        for name, mats in (("Q", game.Q), ("R", game.R)):
            for i, m in enumerate(mats):
                eigs = np.linalg.eigvalsh(m)
                if eigs[0] <= DEFINITENESS_TOL * (1.0 + eigs[-1]):
                    def_failures.append((f"{name}[{i}]", float(eigs[0])))
        w_eigs = np.linalg.eigvalsh(game.W)
        if w_eigs[0] < -DEFINITENESS_TOL * (1.0 + abs(w_eigs[-1])):
            def_failures.append(("W", float(w_eigs[0])))

    stabilizable = False
    if dims_ok:
        stabilizable = pbh_stabilizable(game.A, game.stacked_inputs())

    ok = dims_ok and not sym_failures and not def_failures and stabilizable
    return ValidationReport(
        ok=ok,
        stabilizable=stabilizable,
        definiteness_failures=def_failures,
        dimension_failures=dim_failures,
        symmetry_failures=sym_failures,
    )
