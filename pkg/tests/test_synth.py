import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from pbnsynth.bn import PbnError
from pbnsynth.generators import random_pbn, random_point
from pbnsynth.pbif_io import QuerySyntaxError, parse_query
from pbnsynth.pmc import QueryFunctions
from pbnsynth.synth import (
    PsoConfig,
    cd_distance,
    certify,
    feasibility_pso,
    minimal_change_tuning,
    simple_tuning,
)

from conftest import PREGNANCY_QUERY, U0

BOUNDARY_PQ = 0.0298231207  # pq at which the posterior equals 0.2
P_STAR = 0.1104560026
Q_STAR = 0.0828420019
PQ = "P(Pregnancy=yes | UrineTest=neg, BloodTest=neg)"


def test_pso_finds_certified_point(pregnancy, pregnancy_query):
    res = feasibility_pso(pregnancy, pregnancy_query, PsoConfig(seed=3))
    assert res is not None and res.certificate.ok
    p, q = res.instantiation
    assert float(p * q) <= BOUNDARY_PQ + 1e-9
    assert res.achieved_value <= F(1, 5)
    assert res.to_json()["result"] == "feasible"


def test_pso_is_reproducible(pregnancy, pregnancy_query):
    a = feasibility_pso(pregnancy, pregnancy_query, PsoConfig(seed=11))
    b = feasibility_pso(pregnancy, pregnancy_query, PsoConfig(seed=11))
    assert a.instantiation == b.instantiation


def test_pso_trivial_and_infeasible(pregnancy):
    res = feasibility_pso(pregnancy, parse_query(f"{PQ} >= 0", pregnancy))
    assert res is not None and res.details["evaluations"] == 1
    assert feasibility_pso(pregnancy, parse_query(f"{PQ} < 0", pregnancy), PsoConfig(max_iters=50)) is None
    assert feasibility_pso(pregnancy, parse_query(f"{PQ} <= 0", pregnancy), PsoConfig(max_iters=50)) is None
    with pytest.raises(QuerySyntaxError, match="threshold"):
        parse_query(f"{PQ} <= -0.1", pregnancy)


def test_pso_config_validation():
    with pytest.raises(ValueError):
        PsoConfig(swarm_size=1)
    with pytest.raises(ValueError):
        PsoConfig(inertia=0)


def test_certificate_is_exact(pregnancy, pregnancy_query):
    cert = certify(pregnancy, pregnancy_query, U0)
    assert cert.value == F(1409400, 3139141)
    assert cert.wellformed and not cert.satisfied


def test_cd_distance_example(pregnancy):
    u = (F(P_STAR).limit_denominator(10 ** 9), U0[1])
    assert cd_distance(pregnancy, U0, U0) == 0.0
    assert abs(cd_distance(pregnancy, (F(1, 10), F(27, 100)), U0) - math.log(F(36, 100) / F(1, 10) * F(90, 64))) < 1e-12
    assert cd_distance(pregnancy, u, U0) == pytest.approx(cd_distance(pregnancy, U0, u))


def _cd_closed_form(p, q, p0=0.36, q0=0.27):
    # only the rows for Pregnancy=yes depend on parameters
    ratios = [1.0] + [a * b for a in (p / p0, (1 - p) / (1 - p0)) for b in (q / q0, (1 - q) / (1 - q0))]
    return math.log(max(ratios) / min(ratios))


def test_cd_distance_value(pregnancy):
    assert cd_distance(pregnancy, (F(18, 100), F(27, 100)), U0) == pytest.approx(math.log(0.82 / 0.64) - math.log(0.5), abs=1e-12)
    assert cd_distance(pregnancy, (F(18, 100), F(27, 100)), U0) == pytest.approx(0.9410, abs=1e-4)
    assert cd_distance(pregnancy, (F(2, 10), F(15, 100)), U0) == pytest.approx(_cd_closed_form(0.2, 0.15), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_cd_metric_axioms(seed):
    rng = random.Random(seed)
    b = random_pbn(seed % 50 + 1)
    if not len(b.params):
        return
    x, y, z = (random_point(b, rng) for _ in range(3))
    try:
        dxy, dyz, dxz = cd_distance(b, x, y), cd_distance(b, y, z), cd_distance(b, x, z)
    except PbnError:
        return
    assert dxy == pytest.approx(cd_distance(b, y, x))
    if math.isfinite(dxy) and math.isfinite(dyz):
        assert dxz <= dxy + dyz + 1e-9


def test_minimal_change_single_parameter(pregnancy, pregnancy_query):
    rp = minimal_change_tuning(pregnancy, pregnancy_query, U0, "euclidean_params", vary=["p"], coverage=1 - F(1, 10 ** 10))
    rq = minimal_change_tuning(pregnancy, pregnancy_query, U0, vary=["q"], coverage=1 - F(1, 10 ** 10))
    assert abs(rp.distance - 0.249544) < 1e-4
    assert abs(float(rp.instantiation[0]) - P_STAR) < 1e-6 and rp.instantiation[1] == U0[1]
    assert abs(float(rq.instantiation[1]) - Q_STAR) < 1e-6 and rq.instantiation[0] == U0[0]
    assert rp.certificate.ok and rq.certificate.ok


def test_minimal_change_both_parameters(pregnancy, pregnancy_query):
    res = minimal_change_tuning(pregnancy, pregnancy_query, U0, coverage=F(99, 100))
    # the exact optimum is 0.180788; a 99% partition lands near it and beats one-parameter moves
    assert 0.180788 - 1e-6 <= res.distance < 0.187158
    assert res.certificate.ok


def test_minimal_change_cd(pregnancy, pregnancy_query):
    res = minimal_change_tuning(pregnancy, pregnancy_query, U0, metric="cd", coverage=F(99, 100))
    assert res.certificate.ok and res.distance == pytest.approx(cd_distance(pregnancy, res.instantiation, U0))


def test_minimal_change_improves_with_coverage(pregnancy, pregnancy_query):
    dists = [minimal_change_tuning(pregnancy, pregnancy_query, U0, vary=["q"], coverage=c).distance
             for c in (F(9, 10), F(99, 100), F(999, 1000))]
    assert dists[0] > dists[1] > dists[2]


def test_minimal_change_errors(pregnancy, pregnancy_query):
    with pytest.raises(ValueError):
        minimal_change_tuning(pregnancy, pregnancy_query, U0, metric="manhattan")
    with pytest.raises(ValueError):
        minimal_change_tuning(pregnancy, pregnancy_query, U0, vary=["r"])
    assert minimal_change_tuning(pregnancy, parse_query(f"{PQ} < 0", pregnancy), U0) is None


def test_already_satisfied_point_has_zero_distance(pregnancy):
    q = parse_query(f"{PQ} >= 0.2", pregnancy)
    res = minimal_change_tuning(pregnancy, q, U0, coverage=F(9, 10))
    assert res.distance == 0.0 and res.instantiation == U0


def test_simple_tuning(pregnancy, pregnancy_query):
    res = simple_tuning(pregnancy, pregnancy_query)
    assert res is not None and QueryFunctions(pregnancy, pregnancy_query).satisfied(res.instantiation)
