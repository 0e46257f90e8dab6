"""Parameter lifting and approximate parameter-space partitioning.

A pMC over a region is relaxed into an MDP: every state picks, independently
of the others, one corner of the region restricted to the parameters in its
own row.  Min/max reachability of that MDP bounds the true reachability at
every point of the region.

Chains produced by :mod:`pbnsynth.transform` are acyclic apart from restart
edges into the initial state.  For those the MDP optimum is the best ratio
N/D over policies, where N is the per-trial mass reaching the target and D
the per-trial mass that ends the trial; it is found exactly by Dinkelbach
iteration over a backward pass.  Any other chain falls back to value
iteration in floating point.
"""

from __future__ import annotations

import heapq
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .algebra import AlgebraError, Region, as_fraction
from .bn import Assignment, Pbn, PbnError, Query, compare
from .models import Pmc, Predicates, Target
from .pmc import evidence_chain

log = logging.getLogger(__name__)

ACCEPTING = "accepting"
REJECTING = "rejecting"
UNKNOWN = "unknown"
LABELS = (ACCEPTING, REJECTING, UNKNOWN)

VI_PRECISION = 1e-8
VI_MAX_SWEEPS = 10 ** 6
DEFAULT_MAX_REGIONS = 10 ** 6


class NotMultiAffine(AlgebraError):
    pass


class RegionIllFormed(AlgebraError):
    """Some transition leaves [0, 1] at a corner of the region."""


def region_wellformed(b: Pbn, r: Region) -> bool:
    """True iff every CPT entry lies in [0, 1] at every corner of ``r``."""
    for name, cpt in b.cpts.items():
        for row in cpt.rows.values():
            for e in row:
                if not e.is_multi_affine():
                    raise NotMultiAffine(f"CPT entry {e} of {name} is not multi-affine")
                idx = e.variables()
                if not idx:
                    if not 0 <= e.constant_value() <= 1:
                        return False
                    continue
                base = [lo for lo, _ in r.intervals]
                for corner in r.vertices(idx):
                    for i, v in zip(idx, corner):
                        base[i] = v
                    if not 0 <= e.eval(base) <= 1:
                        return False
    return True


# -- bounds ----------------------------------------------------------------------


class LiftedReachability:
    """Reachability of ``target`` in ``m``, prepared for repeated lifting over regions."""

    def __init__(self, m: Pmc, target: Target):
        self.m = m
        for s, row in enumerate(m.transitions):
            for t, f in row:
                if not f.is_polynomial() or not f.as_polynomial().is_multi_affine():
                    raise NotMultiAffine(f"transition {s}->{t} ({f}) is not a multi-affine polynomial")
        self.target = m.resolve(target)
        self.live = m.can_reach(self.target)
        init = m.initial
        self.trivial: Optional[Fraction] = None
        if init in self.target:
            self.trivial = Fraction(1)
        elif init not in self.live:
            self.trivial = Fraction(0)
        self.unknown = sorted(s for s in self.live if s not in self.target)
        self.rows = {s: [(t, f.as_polynomial()) for t, f in m.transitions[s]] for s in self.unknown}
        self.row_vars = {s: m.row_variables(s) for s in self.unknown}
        self.order = self._trial_order()

    def _trial_order(self) -> Optional[List[int]]:
        """Successors-first order of the trial graph (restart edges removed), or None if cyclic."""
        init = self.m.initial
        unk = set(self.unknown)
        succ = {s: sorted({t for t, _ in self.rows[s] if t in unk and t != init}) for s in self.unknown}
        indeg = {s: 0 for s in self.unknown}
        for s in self.unknown:
            for t in succ[s]:
                indeg[t] += 1
        ready = sorted((s for s in self.unknown if indeg[s] == 0), reverse=True)
        out = []
        while ready:
            s = ready.pop()
            out.append(s)
            for t in succ[s]:
                indeg[t] -= 1
                if indeg[t] == 0:
                    ready.append(t)
        if len(out) != len(self.unknown):
            return None
        out.reverse()
        return out

    def actions(self, r: Region) -> Dict[int, List[Tuple[Tuple[int, Fraction], ...]]]:
        """Per state, the distinct distributions obtained at the corners of ``r``."""
        acts = {}
        base = [lo for lo, _ in r.intervals]
        for s in self.unknown:
            idx = self.row_vars[s]
            seen = []
            for corner in r.vertices(idx) if idx else [()]:
                point = list(base)
                for i, v in zip(idx, corner):
                    point[i] = v
                dist = []
                for t, f in self.rows[s]:
                    v = f.eval(point)
                    if not 0 <= v <= 1:
                        raise RegionIllFormed(f"transition {s}->{t} evaluates to {v} at a corner")
                    dist.append((t, v))
                dist = tuple(dist)
                if dist not in seen:
                    seen.append(dist)
            acts[s] = seen
        return acts

    def bound(self, r: Region, objective: str) -> Fraction:
        if objective not in ("min", "max"):
            raise ValueError("objective must be 'min' or 'max'")
        if r.params != self.m.params:
            raise AlgebraError("region and chain use different parameter lists")
        if self.trivial is not None:
            return self.trivial
        acts = self.actions(r)
        if self.order is not None:
            return self._dinkelbach(acts, objective == "max")
        return self._value_iteration(acts, objective == "max")

    def bounds(self, r: Region) -> Tuple[Fraction, Fraction]:
        return self.bound(r, "min"), self.bound(r, "max")

    # exact route

    def _sweep(self, acts, score, better):
        """One backward pass; returns per-state (score, N, D) under the greedy choice."""
        init = self.m.initial
        tset = self.target
        val: Dict[int, Tuple[Fraction, Fraction, Fraction]] = {}
        for s in self.order:
            best = None
            for dist in acts[s]:
                sc = n = d = Fraction(0)
                for t, p in dist:
                    if not p:
                        continue
                    if t in tset:
                        tn, td = Fraction(1), Fraction(1)
                        ts = score(tn, td)
                    elif t == init:
                        continue
                    elif t in val:
                        ts, tn, td = val[t]
                    else:  # cannot reach the target
                        tn, td = Fraction(0), Fraction(1)
                        ts = score(tn, td)
                    sc += p * ts
                    n += p * tn
                    d += p * td
                if best is None or better(sc, best[0]):
                    best = (sc, n, d)
            val[s] = best
        return val[init]

    def _dinkelbach(self, acts, maximize: bool) -> Fraction:
        if maximize:
            lam = Fraction(0)
            while True:
                sc, n, d = self._sweep(acts, lambda n, d: n - lam * d, lambda a, b: a > b)
                if sc <= 0:
                    return lam
                lam = n / d
        _, n, d = self._sweep(acts, lambda n, d: d, lambda a, b: a < b)
        if d == 0:
            return Fraction(0)  # some policy restarts forever
        lam = n / d
        while True:
            sc, n, d = self._sweep(acts, lambda n, d: n - lam * d, lambda a, b: a < b)
            if sc >= 0:
                return lam
            lam = n / d

    # fallback

    def _value_iteration(self, acts, maximize: bool) -> Fraction:
        tset = self.target
        unknown = self.unknown
        x = {s: 0.0 for s in unknown}
        fa = {
            s: [[(t, float(p)) for t, p in dist if p] for dist in acts[s]]
            for s in unknown
        }

        def get(t):
            if t in tset:
                return 1.0
            return x.get(t, 0.0)

        pick = max if maximize else min
        for sweep in range(VI_MAX_SWEEPS):
            delta = 0.0
            for s in unknown:
                v = pick(sum(p * get(t) for t, p in dist) for dist in fa[s])
                delta = max(delta, abs(v - x[s]))
                x[s] = v
            if delta < VI_PRECISION:
                break
        else:
            log.warning("value iteration hit the sweep cap; bound may be loose")
        v = x[self.m.initial]
        if maximize:
            return Fraction(min(1.0, v + VI_PRECISION))
        return Fraction(max(0.0, v - VI_PRECISION))


def lift_bounds(m: Pmc, r: Region, target: Target, objective: str) -> Fraction:
    """Sound bound on Pr(eventually target) over ``r``: min below, max above."""
    return LiftedReachability(m, target).bound(r, objective)


# -- verification ------------------------------------------------------------------


@dataclass(frozen=True)
class ReachConstraint:
    """Pr(eventually target) CMP threshold on a single chain."""

    target: frozenset
    comparison: str
    threshold: Fraction

    def __str__(self):
        return f"Pr(F target) {self.comparison} {self.threshold}"


def _label(lhs: Tuple[Fraction, Fraction], cmp: str, rhs: Tuple[Fraction, Fraction]) -> str:
    """Label for ``a CMP b`` knowing only a in [lhs] and b in [rhs] over the whole region."""
    a_lo, a_hi = lhs
    b_lo, b_hi = rhs
    if cmp == ">=":
        acc, rej = a_lo >= b_hi, a_hi < b_lo
    elif cmp == ">":
        acc, rej = a_lo > b_hi, a_hi <= b_lo
    elif cmp == "<=":
        acc, rej = a_hi <= b_lo, a_lo > b_hi
    elif cmp == "<":
        acc, rej = a_hi < b_lo, a_lo >= b_hi
    else:
        raise ValueError(f"unknown comparison {cmp!r}")
    if acc:
        return ACCEPTING
    if rej:
        return REJECTING
    return UNKNOWN


class _Verifier:
    """Labels regions for ``main CMP combine(alt)``; ``alt`` is None for plain thresholds."""

    def __init__(self, main: LiftedReachability, comparison: str, threshold: Fraction,
                 alt: Optional[LiftedReachability] = None, kind: str = "probability"):
        self.main = main
        self.alt = alt
        self.comparison = comparison
        self.threshold = as_fraction(threshold)
        self.kind = kind

    def __call__(self, r: Region) -> str:
        try:
            a = self.main.bounds(r)
            q = self.threshold
            if self.alt is None:
                rhs = (q, q)
            elif self.alt is self.main:
                # both sides share one term, so cancel it instead of comparing two intervals
                zero = Fraction(0)
                if self.kind == "ratio":
                    a, rhs = tuple(sorted(((1 - q) * a[0], (1 - q) * a[1]))), (zero, zero)
                else:
                    a, rhs = (zero, zero), (q, q)
            else:
                g_lo, g_hi = self.alt.bounds(r)
                if self.kind == "ratio":
                    rhs = tuple(sorted((q * g_lo, q * g_hi)))
                else:
                    rhs = (q + g_lo, q + g_hi)
        except RegionIllFormed:
            return UNKNOWN
        return _label(a, self.comparison, rhs)


def verify_region(m: Pmc, constraint: ReachConstraint, r: Region) -> str:
    lifted = LiftedReachability(m, constraint.target)
    return _Verifier(lifted, constraint.comparison, constraint.threshold)(r)


# -- partitioning --------------------------------------------------------------------


@dataclass
class RegionPartition:
    constraint: object
    box: Region
    regions: List[Tuple[Region, str]]
    coverage_requested: Fraction
    coverage_achieved: Fraction
    refinement_budget_used: int
    partial: bool = False

    def volume_fraction(self, label: str) -> Fraction:
        total = self.box.volume()
        if not total:
            return Fraction(1) if any(lab == label for _, lab in self.regions) else Fraction(0)
        return sum((r.volume() for r, lab in self.regions if lab == label), Fraction(0)) / total

    def of_label(self, label: str) -> List[Region]:
        return [r for r, lab in self.regions if lab == label]

    def to_json(self) -> dict:
        return {
            "constraint": str(self.constraint),
            "coverage_requested": float(self.coverage_requested),
            "coverage_achieved": float(self.coverage_achieved),
            "partial": self.partial,
            "refinement_budget_used": self.refinement_budget_used,
            "parameters": list(self.box.params.names),
            "regions": [{"bounds": r.as_float_bounds(), "label": lab} for r, lab in self.regions],
        }


def _refine(box: Region, verify: Callable[[Region], str], coverage, max_regions: int,
            threads: int, constraint) -> RegionPartition:
    coverage = as_fraction(coverage)
    if not 0 < coverage <= 1:
        raise ValueError("coverage must lie in (0, 1]")
    if max_regions < 1:
        raise ValueError("max_regions must be positive")
    total = box.volume()

    def share(r: Region) -> Fraction:
        return r.volume() / total if total else Fraction(1)

    def key(r: Region):
        return (-r.volume(), r.sort_key())

    heap = [(key(box), box)]
    done: List[Tuple[Region, str]] = []
    decided = Fraction(0)
    used = 0
    partial = False
    cache: Dict[Region, str] = {}
    batch = max(1, threads) * 4
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while heap and decided < coverage:
            # speculative batch; results are only consumed in sequential pop order
            peek = [r for _, r in heapq.nsmallest(batch, heap) if r not in cache]
            if pool is not None and len(peek) > 1:
                for r, lab in zip(peek, pool.map(verify, peek)):
                    cache[r] = lab
            for _ in range(batch):
                if not heap or decided >= coverage:
                    break
                _, r = heapq.heappop(heap)
                lab = cache.pop(r, None)
                if lab is None:
                    lab = verify(r)
                used += 1
                if lab != UNKNOWN:
                    done.append((r, lab))
                    decided += share(r)
                    continue
                if r.volume() == 0:  # degenerate box, splitting cannot help
                    done.append((r, UNKNOWN))
                    continue
                if len(done) + len(heap) + 2 > max_regions:
                    done.append((r, UNKNOWN))
                    partial = True
                    break
                for child in r.split():
                    heapq.heappush(heap, (key(child), child))
            if partial:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    while heap:
        done.append((heapq.heappop(heap)[1], UNKNOWN))
    if decided < coverage:
        partial = True
    done.sort(key=lambda rl: rl[0].sort_key())
    return RegionPartition(constraint, box, done, coverage, decided, used, partial)


def partition(m: Pmc, constraint: ReachConstraint, box: Optional[Region] = None, coverage=Fraction(99, 100),
              max_regions: int = DEFAULT_MAX_REGIONS, threads: int = 1) -> RegionPartition:
    box = box or m.params.full_region()
    verify = _Verifier(LiftedReachability(m, constraint.target), constraint.comparison, constraint.threshold)
    return _refine(box, verify, coverage, max_regions, threads, constraint)


def _term(b: Pbn, hyp: Assignment, ev: Assignment, cache: dict) -> LiftedReachability:
    key = (tuple(sorted(hyp.variables)), ev)
    chain = cache.get(key)
    if chain is None:
        chain = cache[key] = evidence_chain(b, key[0], ev)
    return LiftedReachability(chain, Predicates(chain).final_satisfying(hyp.as_dict()))


def query_verifier(b: Pbn, q: Query) -> Callable[[Region], str]:
    """Region labeller for any query kind, built on evidence-tailored chains."""
    q.check(b)
    chains: dict = {}
    main = _term(b, q.hypothesis, q.evidence, chains)
    if q.kind == "probability":
        return _Verifier(main, q.comparison, q.threshold)
    h, e = q.alternative_terms()
    alt = main if (h, e) == (q.hypothesis, q.evidence) else _term(b, h, e, chains)
    return _Verifier(main, q.comparison, q.threshold, alt, q.kind)


def partition_query(b: Pbn, q: Query, box: Optional[Region] = None, coverage=Fraction(99, 100),
                    max_regions: int = DEFAULT_MAX_REGIONS, threads: int = 1) -> RegionPartition:
    box = box or b.params.full_region()
    if box.params != b.params:
        raise AlgebraError("box and network use different parameter lists")
    return _refine(box, query_verifier(b, q), coverage, max_regions, threads, q)


def ratio_partition(b: Pbn, q: Query, box: Optional[Region] = None, coverage=Fraction(99, 100),
                    max_regions: int = DEFAULT_MAX_REGIONS, threads: int = 1) -> RegionPartition:
    if q.kind != "ratio":
        raise PbnError("ratio_partition needs a ratio query")
    return partition_query(b, q, box, coverage, max_regions, threads)


def difference_partition(b: Pbn, q: Query, box: Optional[Region] = None, coverage=Fraction(99, 100),
                         max_regions: int = DEFAULT_MAX_REGIONS, threads: int = 1) -> RegionPartition:
    if q.kind != "difference":
        raise PbnError("difference_partition needs a difference query")
    return partition_query(b, q, box, coverage, max_regions, threads)
