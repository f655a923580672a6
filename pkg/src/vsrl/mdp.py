"""Finite MDPs with a safety checker, the action-substitution wrapper, and
brute-force checks that wrapping preserves exactly the safe policies' behaviour."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from vsrl.core import ContractError

STOCH_TOL = 1e-12


class NoSafeActionError(ContractError):
    """A state that must be handled has no safe action."""


def _reachable(T: np.ndarray, allowed: np.ndarray, init) -> np.ndarray:
    seen = np.zeros(T.shape[0], dtype=bool)
    stack = list(init)
    seen[stack] = True
    while stack:
        s = stack.pop()
        nxt = np.nonzero((T[s][allowed[s]] > 0).any(axis=0))[0]
        for s2 in nxt:
            if not seen[s2]:
                seen[s2] = True
                stack.append(int(s2))
    return seen


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    """``T[s, a, s']`` transition probabilities, ``R[s, a]`` rewards, ``C[s, a]``
    True where the action is safe, discount ``gamma`` and initial states."""

    T: np.ndarray
    R: np.ndarray
    gamma: float
    C: np.ndarray
    init: tuple[int, ...] = (0,)

    def __post_init__(self):
        T = np.asarray(self.T, dtype=np.float64)
        R = np.asarray(self.R, dtype=np.float64)
        C = np.asarray(self.C, dtype=bool)
        if T.ndim != 3 or T.shape[0] != T.shape[2]:
            raise ContractError("T must have shape (S, A, S)")
        if R.shape != T.shape[:2] or C.shape != T.shape[:2]:
            raise ContractError("R and C must have shape (S, A)")
        if np.any(T < 0) or np.any(np.abs(T.sum(axis=2) - 1.0) > STOCH_TOL):
            raise ContractError("every T[s, a] must be a probability vector")
        if not 0.0 < self.gamma < 1.0:
            raise ContractError("gamma must lie in (0, 1)")
        init = tuple(int(s) for s in self.init)
        if not init or any(not 0 <= s < T.shape[0] for s in init):
            raise ContractError("initial states must be valid state indices")
        for name, arr in (("T", T), ("R", R), ("C", C)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "init", init)
        reach = _reachable(T, C, init)
        stuck = np.nonzero(reach & ~C.any(axis=1))[0]
        if len(stuck):
            raise NoSafeActionError(f"states {stuck.tolist()} are reachable under safe actions but have none")

    @property
    def n_states(self) -> int:
        return self.T.shape[0]

    @property
    def n_actions(self) -> int:
        return self.T.shape[1]

    def reachable(self, safe_only: bool = True) -> np.ndarray:
        allowed = self.C if safe_only else np.ones_like(self.C)
        return _reachable(self.T, allowed, self.init)

    def to_json(self) -> str:
        s, a, s2 = np.nonzero(self.T)
        return json.dumps({
            "n_states": self.n_states, "n_actions": self.n_actions, "gamma": self.gamma,
            "init": list(self.init),
            "T": [[int(i), int(j), int(k), float(self.T[i, j, k])] for i, j, k in zip(s, a, s2)],
            "R": self.R.tolist(), "C": self.C.astype(int).tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "FiniteMdp":
        d = json.loads(text)
        T = np.zeros((d["n_states"], d["n_actions"], d["n_states"]))
        for i, j, k, p in d["T"]:
            T[i, j, k] = p
        return cls(T, np.array(d["R"]), d["gamma"], np.array(d["C"], dtype=bool), tuple(d["init"]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteMdp):
            return NotImplemented
        return (np.array_equal(self.T, other.T) and np.array_equal(self.R, other.R)
                and np.array_equal(self.C, other.C) and self.gamma == other.gamma and self.init == other.init)


def check_policy(pi: np.ndarray, M: FiniteMdp) -> np.ndarray:
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (M.n_states, M.n_actions):
        raise ContractError(f"policy shape {pi.shape} != {(M.n_states, M.n_actions)}")
    if np.any(pi < 0) or np.any(np.abs(pi.sum(axis=1) - 1.0) > STOCH_TOL):
        raise ContractError("policy rows must be probability vectors")
    return pi


def wrap(E: FiniteMdp) -> FiniteMdp:
    """The MDP in which every unsafe action behaves like a uniformly drawn safe one.

    Every action of the result is safe, so wrapping is idempotent.
    """
    n_safe = E.C.sum(axis=1)
    if np.any(n_safe == 0):
        raise NoSafeActionError(f"states {np.nonzero(n_safe == 0)[0].tolist()} have no safe action")
    T = np.array(E.T)
    R = np.array(E.R)
    for s in range(E.n_states):
        unsafe = ~E.C[s]
        if unsafe.any():
            T[s, unsafe] = E.T[s, E.C[s]].mean(axis=0)
            R[s, unsafe] = E.R[s, E.C[s]].mean()
    return FiniteMdp(T, R, E.gamma, np.ones_like(E.C), E.init)


def project_policy(pi_w: np.ndarray, E: FiniteMdp) -> np.ndarray:
    """Safe policy of E that behaves like ``pi_w`` does in wrap(E): mass on unsafe
    actions is spread evenly over the safe ones."""
    pi_w = check_policy(pi_w, E)
    C = E.C
    n_safe = C.sum(axis=1)
    if np.any(n_safe == 0):
        raise NoSafeActionError("a state has no safe action")
    spill = (pi_w * ~C).sum(axis=1) / n_safe
    pi = np.where(C, pi_w + spill[:, None], 0.0)
    return check_policy(pi, E)


def kernel(M: FiniteMdp, pi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """State-to-state transition matrix and expected one-step reward under ``pi``."""
    return np.einsum("sa,sat->st", pi, M.T), (pi * M.R).sum(axis=1)


def policy_value(M: FiniteMdp, pi: np.ndarray, tol: float | None = None) -> np.ndarray:
    """V^pi by a direct linear solve of (I - gamma P) V = r (``tol`` unused: exact)."""
    P, r = kernel(M, check_policy(pi, M))
    return np.linalg.solve(np.eye(M.n_states) - M.gamma * P, r)


def _greedy(Q: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    masked = np.where(allowed, Q, -np.inf)
    best = masked.max(axis=1, keepdims=True)
    scale = np.maximum(1.0, np.abs(best))
    # lowest index among (numerically) tied maximisers
    return np.argmax(masked >= best - 1e-12 * scale, axis=1)


def value_iteration(M: FiniteMdp, tol: float = 1e-10, safe_only: bool = False,
                    max_iter: int = 1_000_000) -> tuple[np.ndarray, np.ndarray]:
    """Optimal values and a deterministic greedy policy (one-hot rows).

    Iterates until the sup-norm Bellman residual drops below ``tol``. With
    ``safe_only`` the maximisation ranges over safe actions only.
    """
    if tol <= 0:
        raise ContractError("tol must be positive")
    allowed = M.C if safe_only else np.ones_like(M.C)
    if not allowed.any(axis=1).all():
        raise NoSafeActionError("a state has no allowed action")
    V = np.zeros(M.n_states)
    for _ in range(max_iter):
        Q = M.R + M.gamma * M.T @ V
        V_new = np.where(allowed, Q, -np.inf).max(axis=1)
        residual = np.max(np.abs(V_new - V))
        V = V_new
        if residual < tol:
            break
    Q = M.R + M.gamma * M.T @ V
    pi = np.eye(M.n_actions)[_greedy(Q, allowed)]
    return V, pi


def policy_iteration(M: FiniteMdp, safe_only: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Howard policy iteration with exact evaluation; the cross-check for value_iteration."""
    allowed = M.C if safe_only else np.ones_like(M.C)
    act = np.argmax(allowed, axis=1)
    eye = np.eye(M.n_actions)
    while True:
        V = policy_value(M, eye[act])
        Q = M.R + M.gamma * M.T @ V
        masked = np.where(allowed, Q, -np.inf)
        current = masked[np.arange(M.n_states), act]
        improve = masked.max(axis=1) > current + 1e-12 * np.maximum(1.0, np.abs(current))
        if not improve.any():
            return V, eye[act]
        act = np.where(improve, np.argmax(masked, axis=1), act)


def random_policy(M: FiniteMdp, rng: np.random.Generator, safe_only: bool = False) -> np.ndarray:
    pi = rng.dirichlet(np.ones(M.n_actions), size=M.n_states)
    if safe_only:
        pi = np.where(M.C, pi, 0.0)
        pi /= pi.sum(axis=1, keepdims=True)
    return pi


def random_mdp(rng: np.random.Generator, n_states: int | None = None, n_actions: int | None = None,
               p_unsafe: float = 0.3) -> FiniteMdp:
    """Sparse random MDP; every state keeps at least one safe action."""
    S = n_states or int(rng.integers(2, 21))
    A = n_actions or int(rng.integers(2, 6))
    T = np.zeros((S, A, S))
    for s in range(S):
        for a in range(A):
            k = int(rng.integers(1, min(S, 4) + 1))
            succ = rng.choice(S, size=k, replace=False)
            T[s, a, succ] = rng.dirichlet(np.ones(k))
    T /= T.sum(axis=2, keepdims=True)
    R = rng.uniform(-1.0, 1.0, size=(S, A))
    C = rng.random((S, A)) >= p_unsafe
    C[np.arange(S), rng.integers(0, A, size=S)] = True
    return FiniteMdp(T, R, float(rng.uniform(0.5, 0.95)), C, (0,))


def gridworld_mdp(size: int = 3, hazard: tuple[int, int] = (1, 1), goal: tuple[int, int] | None = None,
                  slip: float = 0.1, gamma: float = 0.9) -> FiniteMdp:
    """Grid with stay/up/down/left/right; moves slip to 'stay' with probability
    ``slip``. Actions that can enter the hazard cell are unsafe; the hazard pays -1
    per step, the goal +1."""
    goal = goal if goal is not None else (size - 1, size - 1)
    moves = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))
    S, A = size * size, len(moves)
    T = np.zeros((S, A, S))
    R = np.zeros((S, A))
    C = np.ones((S, A), dtype=bool)
    idx = lambda r, c: r * size + c  # noqa: E731
    for r in range(size):
        for c in range(size):
            s = idx(r, c)
            for a, (dr, dc) in enumerate(moves):
                r2, c2 = min(max(r + dr, 0), size - 1), min(max(c + dc, 0), size - 1)
                T[s, a, idx(r2, c2)] += 1.0 - slip if a else 1.0
                if a:
                    T[s, a, s] += slip
                # entering the hazard is the violation; once there, every action counts as safe
                C[s, a] = (r2, c2) != hazard or (r, c) == hazard
                R[s, a] = 1.0 if (r2, c2) == goal else (-1.0 if (r2, c2) == hazard else 0.0)
    return FiniteMdp(T, R, gamma, C, (0,))


def chain_mdp(unsafe_reward: float | None = None, gamma: float = 0.9) -> FiniteMdp:
    """s0 --safe, r=1--> s1 (absorbing, r=0); optionally an unsafe s0 action
    with reward ``unsafe_reward`` that stays in s0."""
    A = 2 if unsafe_reward is not None else 1
    T = np.zeros((2, A, 2))
    T[0, 0, 1] = 1.0
    T[1, :, 1] = 1.0
    R = np.zeros((2, A))
    R[0, 0] = 1.0
    C = np.ones((2, A), dtype=bool)
    if unsafe_reward is not None:
        T[0, 1, 0] = 1.0
        R[0, 1] = unsafe_reward
        C[0, 1] = False
    return FiniteMdp(T, R, gamma, C, (0,))


@dataclass
class WrapReport:
    safe_kernel: float = 0.0
    safe_reward: float = 0.0
    projected_kernel: float = 0.0
    projected_reward: float = 0.0
    projected_value: float = 0.0
    optimal_value: float = 0.0
    reachable_original: int = 0
    reachable_wrapped: int = 0
    counterexample: str | None = None
    passed: bool = True
    notes: list[str] = field(default_factory=list)

    def merge(self, other: "WrapReport") -> None:
        for name in ("safe_kernel", "safe_reward", "projected_kernel", "projected_reward", "projected_value",
                     "optimal_value"):
            setattr(self, name, max(getattr(self, name), getattr(other, name)))
        self.reachable_original += other.reachable_original
        self.reachable_wrapped += other.reachable_wrapped
        self.passed = self.passed and other.passed
        if self.counterexample is None:
            self.counterexample = other.counterexample
        self.notes.extend(other.notes)

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def verify_theorem2(E: FiniteMdp, tol: float = 1e-9, n_random_policies: int = 20,
                    rng: np.random.Generator | None = None, exact_tol: float = 1e-12) -> WrapReport:
    """Check on ``E``:

    (i) safe policies induce the same kernel and expected rewards in E and wrap(E);
    (ii) any policy of wrap(E) matches its projection in E (kernel, rewards, values);
    (iii) the optimum of wrap(E) equals the best safe value in E, within ``tol``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    W = wrap(E)
    rep = WrapReport()
    for _ in range(n_random_policies):
        pi = random_policy(E, rng, safe_only=True)
        (P, r), (Pw, rw) = kernel(E, pi), kernel(W, pi)
        rep.safe_kernel = max(rep.safe_kernel, float(np.max(np.abs(P - Pw))))
        rep.safe_reward = max(rep.safe_reward, float(np.max(np.abs(r - rw))))
        pi_w = random_policy(W, rng)
        g = project_policy(pi_w, E)
        (P, r), (Pw, rw) = kernel(E, g), kernel(W, pi_w)
        rep.projected_kernel = max(rep.projected_kernel, float(np.max(np.abs(P - Pw))))
        rep.projected_reward = max(rep.projected_reward, float(np.max(np.abs(r - rw))))
        rep.projected_value = max(rep.projected_value,
                               float(np.max(np.abs(policy_value(E, g) - policy_value(W, pi_w)))))
    v_wrapped, _ = policy_iteration(W)
    v_safe, _ = policy_iteration(E, safe_only=True)
    rep.optimal_value = float(np.max(np.abs(v_wrapped - v_safe)))
    rep.reachable_original = int(E.reachable(safe_only=False).sum())
    rep.reachable_wrapped = int(W.reachable().sum())
    checks = {"safe_kernel": exact_tol, "safe_reward": exact_tol, "projected_kernel": exact_tol,
              "projected_reward": exact_tol, "projected_value": tol, "optimal_value": tol}
    failed = [k for k, lim in checks.items() if not getattr(rep, k) <= lim]
    if failed:
        rep.passed = False
        rep.counterexample = E.to_json()
        rep.notes.append(f"failed: {', '.join(failed)}")
    return rep
