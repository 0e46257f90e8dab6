"""Feasibility search, parameter tuning and the CD distance."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .algebra import PoleError, Region, as_fraction
from .bn import NotWellFormed, Pbn, Query, fix_parameters, instantiate, joint_distribution
from .pla import ACCEPTING, partition_query
from .pmc import QueryFunctions

log = logging.getLogger(__name__)

CD_GRID = Fraction(1, 100)
CD_GRID_LIMIT = 10 ** 5


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 40
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    max_iters: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be at least 2")
        if min(self.inertia, self.cognitive, self.social) <= 0:
            raise ValueError("PSO coefficients must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")


@dataclass(frozen=True)
class Certificate:
    """Exact re-evaluation of a candidate against freshly built sensitivity functions."""

    query: str
    value: Optional[Fraction]
    satisfied: bool
    wellformed: bool

    @property
    def ok(self) -> bool:
        return self.satisfied and self.wellformed


@dataclass(frozen=True)
class TuningResult:
    parameters: Tuple[str, ...]
    instantiation: Tuple[Fraction, ...]
    achieved_value: Optional[Fraction]
    distance: Optional[float]
    certificate: Certificate
    method: str = ""
    details: Dict[str, object] = field(default_factory=dict, compare=False)

    def as_dict(self) -> Dict[str, Fraction]:
        return dict(zip(self.parameters, self.instantiation))

    def to_json(self) -> dict:
        return {
            "result": "feasible",
            "method": self.method,
            "instantiation": {n: float(v) for n, v in zip(self.parameters, self.instantiation)},
            "instantiation_exact": {n: str(v) for n, v in zip(self.parameters, self.instantiation)},
            "achieved_value": None if self.achieved_value is None else float(self.achieved_value),
            "distance": self.distance,
            "certificate": {
                "query": self.certificate.query,
                "value": None if self.certificate.value is None else str(self.certificate.value),
                "satisfied": self.certificate.satisfied,
                "wellformed": self.certificate.wellformed,
            },
            **{k: v for k, v in self.details.items()},
        }


def certify(b: Pbn, q: Query, point: Sequence[Fraction]) -> Certificate:
    """Rebuild the query functions from ``b`` and check ``q`` exactly at ``point``."""
    point = b.params.instantiation(point)
    try:
        instantiate(b, point)
        wellformed = True
    except NotWellFormed:
        wellformed = False
    qf = QueryFunctions(b, q)
    try:
        value = qf.value(point)
    except PoleError:
        value = None
    try:
        sat = qf.satisfied(point)
    except PoleError:
        sat = False
    return Certificate(str(q), value, sat, wellformed)


def _result(b, q, point, method, distance=None, **details) -> Optional[TuningResult]:
    cert = certify(b, q, point)
    if not cert.ok:
        return None
    return TuningResult(b.params.names, tuple(point), cert.value, distance, cert, method, details)


def _parametric_entries(b: Pbn):
    return [e for cpt in b.cpts.values() for row in cpt.rows.values() for e in row if e.variables()]


def _wellformed_float(entries, x) -> bool:
    for e in entries:
        v = e.eval_float(x)
        if v < 0.0 or v > 1.0:
            return False
    return True


# -- feasibility ------------------------------------------------------------------


def feasibility_pso(b: Pbn, q: Query, cfg: Optional[PsoConfig] = None) -> Optional[TuningResult]:
    """Particle swarm search for a point satisfying ``q``; the first certified hit is returned."""
    cfg = cfg or PsoConfig()
    qf = QueryFunctions(b, q)
    n = len(b.params)
    lo = np.array([float(p.lower) for p in b.params])
    hi = np.array([float(p.upper) for p in b.params])
    entries = _parametric_entries(b)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.swarm_size)]

    def sample(rng):
        for _ in range(1000):
            x = lo + (hi - lo) * rng.random(n)
            if _wellformed_float(entries, x):
                return x
        return x

    def fitness(x) -> float:
        try:
            return qf.margin_float(x)
        except (ZeroDivisionError, PoleError):
            return -math.inf

    def exact(x) -> Tuple[Fraction, ...]:
        return tuple(min(max(Fraction(float(v)), p.lower), p.upper) for v, p in zip(x, b.params))

    evaluations = 0

    def check(x, fit):
        if fit >= 0 or (n == 0):
            point = exact(x)
            res = _result(b, q, point, "pso", evaluations=evaluations)
            return res
        return None

    pos = [sample(r) for r in rngs]
    vel = [np.zeros(n) for _ in rngs]
    fit = []
    for x in pos:
        evaluations += 1
        f = fitness(x)
        fit.append(f)
        hit = check(x, f)
        if hit is not None:
            return hit
    pbest = [x.copy() for x in pos]
    pbest_fit = list(fit)
    g = int(np.argmax(pbest_fit))
    gbest, gbest_fit = pbest[g].copy(), pbest_fit[g]
    for _ in range(cfg.max_iters):
        for i, rng in enumerate(rngs):
            r1, r2 = rng.random(n), rng.random(n)
            vel[i] = (cfg.inertia * vel[i] + cfg.cognitive * r1 * (pbest[i] - pos[i])
                      + cfg.social * r2 * (gbest - pos[i]))
            x = np.clip(pos[i] + vel[i], lo, hi)
            if not _wellformed_float(entries, x):
                x = sample(rng)
                vel[i] = np.zeros(n)
            pos[i] = x
            evaluations += 1
            f = fitness(x)
            hit = check(x, f)
            if hit is not None:
                return hit
            if f > pbest_fit[i]:
                pbest[i], pbest_fit[i] = x.copy(), f
                if f > gbest_fit:
                    gbest, gbest_fit = x.copy(), f
    return None


def simple_tuning(b: Pbn, q: Query, cfg: Optional[PsoConfig] = None, coverage=Fraction(9, 10),
                  max_regions: int = 10 ** 5) -> Optional[TuningResult]:
    """PSO first; if it fails, the center of an accepting region of a coarse partition."""
    hit = feasibility_pso(b, q, cfg)
    if hit is not None:
        return hit
    part = partition_query(b, q, coverage=coverage, max_regions=max_regions)
    for r in part.of_label(ACCEPTING):
        res = _result(b, q, r.center(), "partition")
        if res is not None:
            return res
    return None


# -- distances ------------------------------------------------------------------------


def _log_ratio(num: Fraction, den: Fraction) -> float:
    """ln(num/den) for positive rationals, robust to huge numerators and denominators."""
    r = num / den
    return math.log(r.numerator) - math.log(r.denominator)


def cd_distance(b: Pbn, u, u0) -> float:
    """ln(max ratio) - ln(min ratio) of the joints at ``u`` and ``u0`` (0/0 counts as 1)."""
    p_new = joint_distribution(instantiate(b, u))
    p_old = joint_distribution(instantiate(b, u0))
    hi = lo = None
    for w, a in p_new.items():
        c = p_old[w]
        if not c:
            if a:
                return math.inf
            ratio = Fraction(1)
        else:
            ratio = a / c
        hi = ratio if hi is None or ratio > hi else hi
        lo = ratio if lo is None or ratio < lo else lo
    if lo == 0:
        return math.inf
    if hi == lo:
        return 0.0
    return _log_ratio(hi, lo)


def _euclid_sq(a, b) -> Fraction:
    return sum(((x - y) ** 2 for x, y in zip(a, b)), Fraction(0))


def _grid_points(box: Region) -> List[Tuple[Fraction, ...]]:
    axes = []
    for lo, hi in box.intervals:
        k0 = math.ceil(lo / CD_GRID)
        k1 = math.floor(hi / CD_GRID)
        axes.append([k * CD_GRID for k in range(k0, k1 + 1)])
    return list(itertools.product(*axes))


def minimal_change_tuning(
    b: Pbn,
    q: Query,
    u0,
    metric: str = "euclidean",
    coverage=Fraction(99, 100),
    vary: Optional[Sequence[str]] = None,
    max_regions: int = 10 ** 6,
    threads: int = 1,
) -> Optional[TuningResult]:
    """Closest certified point to ``u0`` among the accepting regions of a partition.

    ``vary`` restricts the search to some parameters; the others stay at
    their ``u0`` values.  Returns None when no region is proven accepting.
    """
    if metric == "euclidean_params":
        metric = "euclidean"
    if metric not in ("euclidean", "cd"):
        raise ValueError("metric must be 'euclidean', 'euclidean_params' or 'cd'")
    u0 = b.params.instantiation(u0)
    names = b.params.names
    vary = list(names) if vary is None else list(vary)
    for v in vary:
        if v not in b.params:
            raise ValueError(f"unknown parameter {v!r}")
    frozen = {n: u0[i] for i, n in enumerate(names) if n not in vary}
    sub = fix_parameters(b, frozen) if frozen else b
    u0_sub = tuple(u0[names.index(n)] for n in sub.params.names)

    def full(point_sub) -> Tuple[Fraction, ...]:
        vals = dict(zip(sub.params.names, point_sub))
        vals.update(frozen)
        return tuple(vals[n] for n in names)

    part = partition_query(sub, q, coverage=coverage, max_regions=max_regions, threads=threads)
    boxes = part.of_label(ACCEPTING)
    if not boxes:
        return None
    details = {
        "coverage_achieved": float(part.coverage_achieved),
        "regions": len(part.regions),
        "partial": part.partial,
        "varied": list(sub.params.names),
    }
    if metric == "euclidean":
        best = min(((_euclid_sq(r.clamp(u0_sub), u0_sub), r.clamp(u0_sub)) for r in boxes), key=lambda t: t[0])
        point = full(best[1])
        dist = math.sqrt(best[0]) if best[0] else 0.0
        return _result(b, q, point, "minimal-change/euclidean", dist, **details)

    candidates = []
    seen = set()
    total = sum(math.prod(max(1, int((hi - lo) / CD_GRID) + 1) for lo, hi in r.intervals) for r in boxes)
    for r in boxes:
        pts = [r.clamp(u0_sub)]
        pts += _grid_points(r) if total <= CD_GRID_LIMIT else [r.center()]
        for pt in pts:
            if pt not in seen:
                seen.add(pt)
                candidates.append(pt)
    best_pt, best_d = None, math.inf
    for pt in candidates:
        point = full(pt)
        try:
            d = cd_distance(b, point, u0)
        except NotWellFormed:
            continue
        if d < best_d or best_pt is None:
            best_pt, best_d = point, d
    if best_pt is None:
        return None
    return _result(b, q, best_pt, "minimal-change/cd", best_d, **details)
