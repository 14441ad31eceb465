"""Finite-state Markov chains with a coding map into matrices.

Transition storage follows the target-major convention ``trans[e', e] =
P(e -> e')``: columns index the source state and sum to one.  This mirrors
the renewal-theory formulas used downstream and avoids transposition bugs;
all public accessors say explicitly which index is the source.

Words are handled in applied order e_0, e_1, ..., e_{n-1} (e_0 acts first);
the coded product of a word is g_{e_{n-1}} ... g_{e_0}.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _sstats

from . import kernels
from .groups import aku_decompose, in_p
from .linalg import norm_gauge
from .rng import Stream

EXCURSION_STEP_CAP = 10_000_000


class NonRecurrenceAlarm(RuntimeError):
    """An excursion exceeded the hard step cap; the chain looks trapped."""


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class ChainSpec:
    """A finite Markov chain plus a coding of states into d x d matrices."""

    states: tuple
    trans: np.ndarray  # trans[target, source]; columns sum to 1
    coding: tuple
    start: np.ndarray

    def __post_init__(self):
        trans = np.asarray(self.trans, dtype=float)
        start = np.asarray(self.start, dtype=float)
        coding = tuple(np.asarray(g, dtype=float) for g in self.coding)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "coding", coding)
        n = len(self.states)
        if trans.shape != (n, n):
            raise ChainError(f"transition matrix shape {trans.shape} != ({n},{n})")
        if start.shape != (n,):
            raise ChainError("start distribution has wrong length")
        if len(coding) != n:
            raise ChainError("coding must map every state")
        d = coding[0].shape[0]
        for g in coding:
            if g.shape != (d, d):
                raise ChainError("coded matrices must share one dimension")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return self.coding[0].shape[0]

    def state_index(self, state) -> int:
        return self.states.index(state)

    def coded_array(self) -> np.ndarray:
        return np.ascontiguousarray(np.stack(self.coding))

    def cum_rows(self) -> np.ndarray:
        """cum_rows[source] = cumulative distribution over targets."""
        return np.ascontiguousarray(np.cumsum(self.trans.T, axis=1))

    def start_cdf(self) -> np.ndarray:
        return np.cumsum(self.start)

    @staticmethod
    def iid(weights, coding, states=None) -> "ChainSpec":
        """An i.i.d. walk as a 1-step chain: every column equals the law.

        This keeps one code path for i.i.d. and genuinely Markov walks.
        """
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ChainError("weights must be a probability vector")
        n = len(w)
        if states is None:
            states = tuple(f"s{i}" for i in range(n))
        trans = np.tile(w[:, None], (1, n))
        return ChainSpec(states=tuple(states), trans=trans, coding=tuple(coding), start=w)


@dataclass(frozen=True)
class ChainReport:
    stochastic_residual: float
    irreducible: bool
    universally_accessible: tuple
    state_errors: tuple
    ok: bool


@dataclass(frozen=True)
class Excursion:
    """One return loop at the anchor state.

    ``word`` lists states in display order e_{n-1} ... e_0 (anchor last,
    no interior anchor); ``path_order`` gives the same word as visited.
    """

    word: tuple
    weight: float
    element: np.ndarray

    @property
    def length(self) -> int:
        return len(self.word)

    @property
    def path_order(self) -> tuple:
        return tuple(reversed(self.word))


def _adjacency(trans: np.ndarray) -> np.ndarray:
    return trans.T > 0.0  # adj[source, target]


def _strongly_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    if n == 1:
        return True

    def reach(a):
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in np.nonzero(a[u])[0]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return seen.all()

    return reach(adj) and reach(adj.T)


def validate_chain(chain: ChainSpec) -> ChainReport:
    """Stochasticity, irreducibility, and universal accessibility report.

    Finite irreducible chains are automatically positive and exponentially
    recurrent, so the graph facts here are the whole checkable story.
    """
    colsums = chain.trans.sum(axis=0)
    residual = float(np.max(np.abs(colsums - 1.0)))
    errors = []
    for i, s in enumerate(chain.states):
        if abs(colsums[i] - 1.0) > 1e-12 or np.any(chain.trans[:, i] < 0):
            errors.append(s)
    irreducible = _strongly_connected(_adjacency(chain.trans))
    universal = tuple(
        chain.states[j]
        for j in range(chain.n_states)
        if np.all(chain.trans[j, :] > 0.0)
    )
    return ChainReport(
        stochastic_residual=residual,
        irreducible=irreducible,
        universally_accessible=universal,
        state_errors=tuple(errors),
        ok=not errors,
    )


def stationary_distribution(chain: ChainSpec) -> np.ndarray:
    """Unique stationary law of an irreducible chain, by the GTH elimination.

    GTH is subtraction-free, so the residual of pi P = pi lands at roundoff
    (well under 1e-12).
    """
    report = validate_chain(chain)
    if not report.ok:
        raise ChainError(f"non-stochastic columns at states {report.state_errors}")
    if not report.irreducible:
        raise ChainError("chain is reducible; stationary law not unique")
    t = chain.trans.copy()
    n = chain.n_states
    if n == 1:
        return np.array([1.0])
    for k in range(n - 1, 0, -1):
        # censor state k: s is the mass leaving k downward; the into-k row is
        # normalized by s so the back substitution can use it directly
        s = t[:k, k].sum()
        t[k, :k] /= s
        for i in range(k):
            t[:k, i] += t[:k, k] * t[k, i]
    pi = np.zeros(n)
    pi[0] = 1.0
    total = 1.0
    for k in range(1, n):
        pi[k] = t[k, 0] + pi[1:k] @ t[k, 1:k]
        total += pi[k]
    pi /= total
    return pi


def expected_return_time(chain: ChainSpec, anchor) -> float:
    """E_e[tau_e] = 1 / pi(e) (Kac)."""
    pi = stationary_distribution(chain)
    return 1.0 / pi[chain.state_index(anchor)]


def sample_path(chain: ChainSpec, n_steps: int, rng: Stream) -> np.ndarray:
    """States e_0 .. e_{n_steps}, with e_0 drawn from the start law."""
    start = rng.choice_index(chain.start_cdf())
    us = rng.uniforms(n_steps)
    return kernels.markov_path(chain.cum_rows(), start, us)


def _excursion_bounds(path: np.ndarray, anchor_idx: int) -> np.ndarray:
    return np.nonzero(path == anchor_idx)[0]


def word_weight(chain: ChainSpec, word_path_order) -> float:
    """Renewal weight p_{e, e_{n-1}} p_w of a return word given in path order."""
    idx = [chain.state_index(s) for s in word_path_order]
    w = 1.0
    for a, b in zip(idx[:-1], idx[1:]):
        w *= chain.trans[b, a]
    w *= chain.trans[idx[0], idx[-1]]  # closing step back to the anchor
    return float(w)


def sample_excursions(chain: ChainSpec, anchor, n_samples: int, rng: Stream,
                      chunk: int = 1 << 15):
    """Yield n_samples excursion state-index arrays (path order) from anchor."""
    a = chain.state_index(anchor)
    cum = chain.cum_rows()
    found = 0
    carry = np.array([a], dtype=np.int64)
    steps_in_carry = 0
    while found < n_samples:
        us = rng.uniforms(chunk)
        seg = kernels.markov_path(cum, int(carry[-1]), us)
        path = np.concatenate([carry[:-1], seg])
        hits = _excursion_bounds(path, a)
        for i, j in zip(hits[:-1], hits[1:]):
            yield path[i:j]
            found += 1
            if found >= n_samples:
                return
        carry = path[hits[-1]:] if len(hits) else path
        steps_in_carry = len(carry)
        if steps_in_carry > EXCURSION_STEP_CAP:
            raise NonRecurrenceAlarm(
                f"no return to {anchor!r} within {EXCURSION_STEP_CAP} steps"
            )


def sample_excursion(chain: ChainSpec, anchor, rng: Stream) -> Excursion:
    """One excursion from the anchor back to itself, with weight and element."""
    report = validate_chain(chain)
    if not report.irreducible:
        raise ChainError("excursions need an irreducible chain")
    idx = next(iter(sample_excursions(chain, anchor, 1, rng)))
    word_path = tuple(chain.states[i] for i in idx)
    g = np.eye(chain.dim)
    for i in idx:
        g = chain.coding[i] @ g
    return Excursion(
        word=tuple(reversed(word_path)),
        weight=word_weight(chain, word_path),
        element=g,
    )


@dataclass
class ExcursionStats:
    n_samples: int
    mean_return_time: float
    se_return_time: float
    pi_estimate: np.ndarray
    pi_se: np.ndarray
    mean_log_gauge: float
    se_log_gauge: float
    delta_moments: dict = field(default_factory=dict)


def excursion_stats(chain: ChainSpec, anchor, n_samples: int, rng: Stream,
                    deltas=(0.1, 0.25, 0.5, 1.0)) -> ExcursionStats:
    """Monte-Carlo return-time / occupation / moment estimates at the anchor.

    The occupation-based stationary estimate is E[occupation of e'] divided
    by E[tau]; moments are of N(g_w) = max(||g_w||, ||g_w^{-1}||) over one
    excursion word w.
    """
    mats = chain.coded_array()
    n_states = chain.n_states
    taus = np.empty(n_samples)
    occ = np.zeros((n_samples, n_states))
    log_gauges = np.empty(n_samples)
    for r, idx in enumerate(sample_excursions(chain, anchor, n_samples, rng)):
        taus[r] = len(idx)
        for i in idx:
            occ[r, i] += 1.0
        g = np.eye(chain.dim)
        for i in idx:
            g = mats[i] @ g
        log_gauges[r] = np.log(norm_gauge(g))
    mean_tau = taus.mean()
    pi_est = occ.mean(axis=0) / mean_tau
    # ratio-estimator (delta method) s.e. for occ/tau
    resid = occ - pi_est[None, :] * taus[:, None]
    pi_se = resid.std(axis=0, ddof=1) / (mean_tau * np.sqrt(n_samples))
    moments = {float(d): float(np.mean(np.exp(d * log_gauges))) for d in deltas}
    return ExcursionStats(
        n_samples=n_samples,
        mean_return_time=float(mean_tau),
        se_return_time=float(taus.std(ddof=1) / np.sqrt(n_samples)),
        pi_estimate=pi_est,
        pi_se=pi_se,
        mean_log_gauge=float(log_gauges.mean()),
        se_log_gauge=float(log_gauges.std(ddof=1) / np.sqrt(n_samples)),
        delta_moments=moments,
    )


def renewal_t_identity(chain: ChainSpec, anchor, n_samples: int, rng: Stream,
                       m_dim=None, n_dim=None):
    """Monte-Carlo check of E_e[t(g over one excursion)] = E_e[tau] sum t pi.

    Every coded element must lie in P; the left side extracts t from the
    excursion products, the right side is exact from the stationary linear
    solve.  Returns (lhs, rhs, z_score, se).  The block shape defaults to
    (d/2, d/2) for even d and (d-1, 1) otherwise.
    """
    d = chain.dim
    if m_dim is None or n_dim is None:
        if d % 2 == 0:
            m_dim = n_dim = d // 2
        else:
            m_dim, n_dim = d - 1, 1
    for g in chain.coding:
        if not in_p(g, m_dim, n_dim):
            raise NotInPChain(
                f"coded element not in P for block shape ({m_dim},{n_dim})"
            )
    pi = stationary_distribution(chain)
    t_states = np.array(
        [aku_decompose(g, m_dim, n_dim).t for g in chain.coding]
    )
    rhs = float((1.0 / pi[chain.state_index(anchor)]) * (t_states @ pi))

    mats = chain.coded_array()
    lhs_samples = np.empty(n_samples)
    for r, idx in enumerate(sample_excursions(chain, anchor, n_samples, rng)):
        g = np.eye(d)
        for i in idx:
            g = mats[i] @ g
        a = g[:m_dim, :m_dim]
        lhs_samples[r] = np.log(abs(np.linalg.det(a)))
    lhs = float(lhs_samples.mean())
    se = float(lhs_samples.std(ddof=1) / np.sqrt(n_samples))
    z = (lhs - rhs) / se if se > 0 else 0.0
    return lhs, rhs, float(z), se


class NotInPChain(ValueError):
    """A coded element fell outside the block group P."""


def renewal_word_law(chain: ChainSpec, anchor, mass: float = 0.999):
    """Enumerate return words by weight until the requested mass is covered.

    Returns a list of (word_in_path_order, weight), heaviest first.  Finite
    irreducible chains have geometric tails, so this terminates quickly.
    """
    a = chain.state_index(anchor)
    n = chain.n_states
    out = []
    total = 0.0
    # heap over partial words (no interior anchor), keyed by -probability
    heap = [(-1.0, (a,))]
    guard = 0
    while heap and total < mass:
        guard += 1
        if guard > 5_000_000:
            raise NonRecurrenceAlarm("renewal word enumeration budget exceeded")
        negp, partial = heapq.heappop(heap)
        p = -negp
        last = partial[-1]
        close = chain.trans[a, last]
        if close > 0:
            w = p * close
            out.append((tuple(partial), float(w)))
            total += w
        for nxt in range(n):
            if nxt == a:
                continue
            step = chain.trans[nxt, last]
            if step > 0:
                heapq.heappush(heap, (-p * step, partial + (nxt,)))
    out.sort(key=lambda kv: (-kv[1], kv[0]))
    return out, total


def excursion_word_chisquare(chain: ChainSpec, anchor, n_samples: int,
                             rng: Stream, mass: float = 0.999):
    """Goodness of fit of sampled excursion words against the renewal law.

    Words outside the enumerated mass pool into a tail bucket.  Returns
    (statistic, dof, p_value).
    """
    law, covered = renewal_word_law(chain, anchor, mass)
    index = {w: i for i, (w, _) in enumerate(law)}
    counts = np.zeros(len(law) + 1)
    for idx in sample_excursions(chain, anchor, n_samples, rng):
        w = tuple(int(i) for i in idx)
        j = index.get(w, len(law))
        counts[j] += 1
    expected = np.array([p for _, p in law] + [1.0 - covered]) * n_samples
    keep = expected >= 1.0
    if not keep[-1]:  # fold a tiny tail into the last kept cell
        counts[np.nonzero(keep)[0][-1]] += counts[-1]
        expected[np.nonzero(keep)[0][-1]] += expected[-1]
    counts, expected = counts[keep], expected[keep]
    expected *= counts.sum() / expected.sum()
    stat = float(np.sum((counts - expected) ** 2 / expected))
    dof = len(counts) - 1
    pval = float(_sstats.chi2.sf(stat, dof))
    return stat, dof, pval
