"""Points of the space of unimodular lattices: canonicalization, shortest
vectors, Mahler sets, Siegel counts, the action-chain walk driver, and the
equidistribution diagnostics built on top of it.

A point is stored as a determinant-one basis matrix whose columns generate
the lattice; all observables are invariant under right multiplication by
integer unimodular matrices, which is exactly well-definedness on the
quotient.  Exact shortest vectors and ball counts come from Fincke-Pohst
enumeration on an LLL-reduced basis and are limited to dimension <= 6; walks
in higher dimension only get reduced-basis norm bounds, with a warning.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _sstats

from . import kernels
from .markov import ChainSpec, sample_path, validate_chain
from .rng import Stream

LLL_DELTA = 0.99
ENUM_DIM_CAP = 6
REDUCE_CADENCE = 64
ALARM_ENTRY = 1e12

JOINT_BINS = 16
JOINT_LOG_LO = math.log(0.05)
JOINT_LOG_HI = math.log(1.2)
JOINT_STRIDE = 16


class LatticeError(ValueError):
    pass


class WalkAlarm(RuntimeError):
    """Basis entries overflowed or reduction failed during a walk."""


@dataclass(frozen=True)
class LatticePoint:
    """A unimodular lattice, as the column span of a det-1 basis matrix."""

    basis: np.ndarray
    reduced: bool = False

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        object.__setattr__(self, "basis", b)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise LatticeError("basis must be square")
        if not np.all(np.isfinite(b)):
            raise LatticeError("basis has non-finite entries")
        det = np.linalg.det(b)
        if abs(abs(det) - 1.0) > 1e-8:
            raise LatticeError(f"|det| = {abs(det)} is not 1 within 1e-8")

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @staticmethod
    def standard(d: int) -> "LatticePoint":
        return LatticePoint(np.eye(d), reduced=True)

    def apply(self, g: np.ndarray) -> "LatticePoint":
        return LatticePoint(np.asarray(g, float) @ self.basis)


def reduce_basis(x: LatticePoint) -> LatticePoint:
    """LLL-reduce (delta = 0.99) and verify the change of basis is unimodular."""
    b = np.ascontiguousarray(x.basis.copy())
    if kernels.lll_reduce(b, LLL_DELTA) < 0:
        raise LatticeError("LLL failed: numerically dependent basis")
    u = np.linalg.solve(x.basis, b)
    if np.max(np.abs(u - np.rint(u))) > 1e-6:
        raise LatticeError("reduction left the lattice (non-integral transform)")
    if abs(abs(round(float(np.linalg.det(np.rint(u))))) - 1) > 0:
        raise LatticeError("reduction transform is not unimodular")
    return LatticePoint(b, reduced=True)


def _reduced_basis(x: LatticePoint) -> np.ndarray:
    if x.reduced:
        return np.ascontiguousarray(x.basis)
    return np.ascontiguousarray(reduce_basis(x).basis)


def shortest_vector(x: LatticePoint, norm: str = "euclidean"):
    """Exact shortest nonzero lattice vector under the requested norm.

    Returns (vector, length).  Ties break on enumeration order, which is
    deterministic in the reduced basis.
    """
    if x.dim > ENUM_DIM_CAP:
        raise LatticeError(f"exact enumeration capped at d <= {ENUM_DIM_CAP}")
    b = _reduced_basis(x)
    e2, sup, ce, cs, ok = kernels.enum_shortest(b)
    if not ok:
        raise LatticeError("enumeration failed on a degenerate basis")
    if norm == "euclidean":
        v = b @ ce
        return v, float(np.sqrt(e2))
    if norm == "sup":
        v = b @ cs
        return v, float(sup)
    raise ValueError(f"unknown norm {norm!r}")


def in_mahler_set(x: LatticePoint, eps: float) -> bool:
    """x in K_eps iff every nonzero lattice vector has sup norm >= eps."""
    _, length = shortest_vector(x, norm="sup")
    return length >= eps


def siegel_transform(x: LatticePoint, radius: float) -> int:
    """Number of nonzero lattice vectors with euclidean norm <= radius.

    Haar-averaged over the space of lattices this equals the ball volume,
    which is what the equidistribution diagnostics test against.
    """
    if radius > 10.0:
        raise LatticeError("siegel radius capped at 10")
    if x.dim > ENUM_DIM_CAP:
        raise LatticeError(f"exact enumeration capped at d <= {ENUM_DIM_CAP}")
    b = _reduced_basis(x)
    counts = kernels.enum_counts(b, np.array([radius * radius]))
    if counts[0] < 0:
        raise LatticeError("enumeration failed on a degenerate basis")
    return int(counts[0])


def lattice_equal(x: LatticePoint, y: LatticePoint, tol: float = 1e-8) -> bool:
    """Same lattice iff basis(x)^{-1} basis(y) is integral with |det| = 1."""
    u = np.linalg.solve(x.basis, y.basis)
    if np.max(np.abs(u - np.rint(u))) > tol:
        return False
    return abs(abs(np.linalg.det(np.rint(u))) - 1.0) < 0.5


def ball_volume(d: int, radius: float) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0) * radius ** d


@dataclass(frozen=True)
class WalkObservables:
    """What the walk driver records each step."""

    eps: tuple = (0.05,)
    radii: tuple = ()
    joint: bool = False
    joint_stride: int = JOINT_STRIDE
    keep_series: bool = False


@dataclass
class EmpiricalAccumulator:
    """Mergeable running statistics of a lattice walk.

    ``keps_counts[eps]`` counts steps with shortest sup norm < eps;
    ``siegel_sums["r<R>"]`` accumulates ball counts; ``joint_counts[(s, b)]``
    counts strided (next-state, lattice-bin) pairs.  ``replica_blocks`` keeps
    the same totals split by replica id so merged accumulators still support
    between-replica standard errors.  merge is associative and commutative
    with the empty accumulator as identity.
    """

    step_count: int = 0
    keps_counts: dict = field(default_factory=dict)
    siegel_sums: dict = field(default_factory=dict)
    joint_counts: dict = field(default_factory=dict)
    replica_blocks: dict = field(default_factory=dict)

    @staticmethod
    def empty() -> "EmpiricalAccumulator":
        return EmpiricalAccumulator()

    def merge(self, other: "EmpiricalAccumulator") -> "EmpiricalAccumulator":
        out = EmpiricalAccumulator()
        out.step_count = self.step_count + other.step_count
        for src in (self, other):
            for k, v in src.keps_counts.items():
                out.keps_counts[k] = out.keps_counts.get(k, 0) + v
            for k, v in src.siegel_sums.items():
                out.siegel_sums[k] = out.siegel_sums.get(k, 0.0) + v
            for k, v in src.joint_counts.items():
                out.joint_counts[k] = out.joint_counts.get(k, 0) + v
            for rid, blk in src.replica_blocks.items():
                if rid in out.replica_blocks:
                    out.replica_blocks[rid] = _merge_block(out.replica_blocks[rid], blk)
                else:
                    out.replica_blocks[rid] = {
                        "step_count": blk["step_count"],
                        "keps": dict(blk["keps"]),
                        "siegel": dict(blk["siegel"]),
                    }
        return out

    def to_json(self) -> dict:
        return {
            "step_count": self.step_count,
            "keps_counts": {f"{k:.12g}": v for k, v in sorted(self.keps_counts.items())},
            "siegel_sums": {k: v for k, v in sorted(self.siegel_sums.items())},
            "joint_counts": {
                f"{s}:{b}": v for (s, b), v in sorted(self.joint_counts.items())
            },
            "replica_blocks": {
                str(rid): blk for rid, blk in sorted(self.replica_blocks.items())
            },
        }

    @staticmethod
    def from_json(obj: dict) -> "EmpiricalAccumulator":
        acc = EmpiricalAccumulator()
        acc.step_count = int(obj["step_count"])
        acc.keps_counts = {float(k): int(v) for k, v in obj["keps_counts"].items()}
        acc.siegel_sums = {k: float(v) for k, v in obj["siegel_sums"].items()}
        for k, v in obj["joint_counts"].items():
            s, b = k.split(":")
            acc.joint_counts[(int(s), int(b))] = int(v)
        for rid, blk in obj.get("replica_blocks", {}).items():
            acc.replica_blocks[int(rid)] = {
                "step_count": int(blk["step_count"]),
                "keps": {float(k): int(v) for k, v in blk["keps"].items()},
                "siegel": {k: float(v) for k, v in blk["siegel"].items()},
            }
        return acc


def _merge_block(a: dict, b: dict) -> dict:
    out = {
        "step_count": a["step_count"] + b["step_count"],
        "keps": dict(a["keps"]),
        "siegel": dict(a["siegel"]),
    }
    for k, v in b["keps"].items():
        out["keps"][k] = out["keps"].get(k, 0) + v
    for k, v in b["siegel"].items():
        out["siegel"][k] = out["siegel"].get(k, 0.0) + v
    return out


def _radius_key(r: float) -> str:
    return f"r{r:g}"


def walk_with_series(chain: ChainSpec, x0: LatticePoint, n_steps: int,
                     observables: WalkObservables, rng: Stream):
    """Drive one replica and return (accumulator, series dict).

    Series are the per-step shortest sup and euclidean norms (float arrays of
    length n_steps); the accumulator keeps only summary counts.
    """
    if not validate_chain(chain).ok:
        raise ValueError("invalid chain")
    d = chain.dim
    if x0.dim != d:
        raise ValueError("start point dimension does not match coded matrices")
    if d > ENUM_DIM_CAP:
        warnings.warn(
            "dimension above enumeration cap: observables degrade to "
            "reduced-basis norm bounds",
            stacklevel=2,
        )
        return _walk_normbound(chain, x0, n_steps, observables, rng)

    mats = chain.coded_array()
    path = sample_path(chain, n_steps, rng)
    eps = np.asarray(sorted(observables.eps), dtype=float)
    radii = np.asarray(sorted(observables.radii), dtype=float)
    nbins = JOINT_BINS if observables.joint else 0
    bin_width = (JOINT_LOG_HI - JOINT_LOG_LO) / JOINT_BINS

    keps, siegel, joint, sup_s, euc_s, basis, alarm = kernels.walk_drive(
        np.ascontiguousarray(x0.basis),
        mats,
        path,
        eps,
        radii * radii,
        nbins,
        JOINT_LOG_LO,
        bin_width,
        observables.joint_stride,
        REDUCE_CADENCE,
        ALARM_ENTRY,
    )
    if alarm == 1:
        raise WalkAlarm(
            "basis entry overflow despite reduction (escape of mass or a bug)"
        )
    if alarm == 2:
        raise WalkAlarm("lattice reduction failed during walk")

    acc = EmpiricalAccumulator()
    acc.step_count = n_steps
    acc.keps_counts = {float(e): int(c) for e, c in zip(eps, keps)}
    acc.siegel_sums = {_radius_key(r): float(s) for r, s in zip(radii, siegel)}
    if observables.joint:
        for s in range(chain.n_states):
            for b in range(JOINT_BINS):
                c = int(joint[s, b])
                if c:
                    acc.joint_counts[(s, b)] = c
    acc.replica_blocks[rng.replica_id] = {
        "step_count": n_steps,
        "keps": dict(acc.keps_counts),
        "siegel": dict(acc.siegel_sums),
    }
    series = {"shortest_sup": sup_s, "shortest_euclidean": euc_s}
    return acc, series


def _walk_normbound(chain, x0, n_steps, observables, rng):
    # d > 6: carry the reduced basis, use min column norms as upper bounds
    # for the shortest vector (lower-bound observables are skipped).
    mats = chain.coded_array()
    path = sample_path(chain, n_steps, rng)
    b = np.ascontiguousarray(x0.basis.copy())
    sups = np.empty(n_steps)
    eucs = np.empty(n_steps)
    for k in range(n_steps):
        if kernels.lll_reduce(b, LLL_DELTA) < 0:
            raise WalkAlarm("lattice reduction failed during walk")
        if np.max(np.abs(b)) > ALARM_ENTRY:
            raise WalkAlarm("basis entry overflow despite reduction")
        eucs[k] = np.min(np.linalg.norm(b, axis=0))
        sups[k] = np.min(np.max(np.abs(b), axis=0))
        b = mats[path[k]] @ b
    acc = EmpiricalAccumulator()
    acc.step_count = n_steps
    acc.keps_counts = {float(e): int(np.sum(sups < e)) for e in observables.eps}
    acc.replica_blocks[rng.replica_id] = {
        "step_count": n_steps,
        "keps": dict(acc.keps_counts),
        "siegel": {},
    }
    return acc, {"shortest_sup": sups, "shortest_euclidean": eucs}


def run_walk(chain: ChainSpec, x0: LatticePoint, n_steps: int,
             observables: WalkObservables, rng: Stream) -> EmpiricalAccumulator:
    """Simulate the action chain (e_n, x_n), x_{n+1} = g_{e_n} x_n.

    Observables are recorded at x_k against the state e_k about to act,
    k = 0..n_steps-1 (the empirical measure includes the start point).
    """
    acc, _ = walk_with_series(chain, x0, n_steps, observables, rng)
    return acc


@dataclass
class EquidistributionReport:
    steps: int
    escape_fractions: dict
    siegel_averages: dict
    siegel_targets: dict
    siegel_rel_errors: dict
    siegel_std_errors: dict
    independence_chi2: float
    independence_dof: int
    independence_pvalue: float


def equidistribution_report(acc: EmpiricalAccumulator, chain: ChainSpec
                            ) -> EquidistributionReport:
    """Escape fractions, Siegel averages vs ball-volume targets, and the
    (state x lattice-bin) independence chi-square.

    The joint counts are strided samples, so the chi-square operates on
    weakly dependent draws; the stride is part of the walk observables.
    """
    if acc.step_count < 10_000:
        raise ValueError("need at least 1e4 steps for a stable report")
    d = chain.dim
    n = acc.step_count
    escapes = {e: c / n for e, c in sorted(acc.keps_counts.items())}

    averages, targets, rels, ses = {}, {}, {}, {}
    for key, s in sorted(acc.siegel_sums.items()):
        r = float(key[1:])
        avg = s / n
        tgt = ball_volume(d, r)
        averages[key] = avg
        targets[key] = tgt
        rels[key] = abs(avg - tgt) / tgt
        vals = [
            blk["siegel"][key] / blk["step_count"]
            for blk in acc.replica_blocks.values()
            if key in blk["siegel"]
        ]
        if len(vals) > 1:
            ses[key] = float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
        else:
            ses[key] = float("nan")

    if acc.joint_counts:
        states = sorted({s for s, _ in acc.joint_counts})
        bins = sorted({b for _, b in acc.joint_counts})
        table = np.zeros((len(states), len(bins)))
        for (s, b), c in acc.joint_counts.items():
            table[states.index(s), bins.index(b)] = c
        table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
        if table.shape[0] > 1 and table.shape[1] > 1:
            row = table.sum(axis=1, keepdims=True)
            col = table.sum(axis=0, keepdims=True)
            expected = row @ col / table.sum()
            stat = float(np.sum((table - expected) ** 2 / expected))
            dof = (table.shape[0] - 1) * (table.shape[1] - 1)
            pval = float(_sstats.chi2.sf(stat, dof))
        else:
            stat, dof, pval = 0.0, 0, 1.0
    else:
        stat, dof, pval = 0.0, 0, 1.0

    return EquidistributionReport(
        steps=n,
        escape_fractions=escapes,
        siegel_averages=averages,
        siegel_targets=targets,
        siegel_rel_errors=rels,
        siegel_std_errors=ses,
        independence_chi2=stat,
        independence_dof=dof,
        independence_pvalue=pval,
    )
