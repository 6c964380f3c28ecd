import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_opt, random_graph, set_partitions, tree_expectation
from corrclust.algorithms import QUADRATIC_FUNCTIONS, RoundingFunctions
from corrclust.instances import Clustering, gen_gap_star, gen_planted, gen_single_negative_edge, new_graph
from corrclust.lp import FractionalMetric
from corrclust.triangles import (ALL_SIGNATURES, TriangleLengths, TriangleSignature, alg_sigma,
                                 expectation_oracle_small, kwik_expected_cost, lp_sigma, packing_is_valid,
                                 packing_lower_bound, pivot_cost, pivot_lp, scan_ratio, scan_signature)

BAD = new_graph(3, [(0, 1)])
PMM = TriangleSignature("+", "-", "-")
IDENT = RoundingFunctions.identity()
FNS = [QUADRATIC_FUNCTIONS, IDENT, RoundingFunctions(0.1, 0.7)]


def metric_triples():
    unit = st.floats(0, 1, allow_nan=False)
    return st.tuples(unit, unit, unit).filter(lambda t: TriangleLengths(*t).is_metric())


def test_signatures():
    assert len(set(ALL_SIGNATURES)) == 8
    assert TriangleSignature.parse("(+--)") == PMM
    assert str(PMM) == "(+--)"
    with pytest.raises(ValueError):
        TriangleSignature.parse("+-")


def test_pivot_cost_examples():
    # pivot w, pivot edges at length 0 -> f = 0, both endpoints join
    assert pivot_cost(TriangleSignature("+", "+", "-"), (0, 0, 0), "w", QUADRATIC_FUNCTIONS) == 1
    # both pivot edges positive at length 1 -> f = 1, nobody joins
    assert pivot_cost(TriangleSignature("+", "+", "+"), (1, 1, 0), "w", QUADRATIC_FUNCTIONS) == 0
    assert pivot_cost(PMM, (0, 0, 0), "u", QUADRATIC_FUNCTIONS) == 0
    y, z = 0.3, 0.45
    assert pivot_cost(PMM, (0.5, y, z), "u", QUADRATIC_FUNCTIONS) == pytest.approx(y + z * (1 - 2 * y))


def test_pivot_lp_examples():
    assert pivot_lp(TriangleSignature("+", "+", "+"), (0.3, 0.3, 0.0), "w", QUADRATIC_FUNCTIONS) == 0
    assert pivot_lp(TriangleSignature("+", "+", "-"), (0.5, 0.5, 1.0), "w", QUADRATIC_FUNCTIONS) == 0
    vals = [pivot_lp(PMM, (0, 0, 0), p, QUADRATIC_FUNCTIONS) for p in "wvu"]
    assert vals == [1, 1, 0]


def test_pivot_name_validated():
    with pytest.raises(ValueError):
        pivot_cost(PMM, (0, 0, 0), "x", QUADRATIC_FUNCTIONS)


def test_sums_at_zero_and_all_negative():
    assert alg_sigma(PMM, (0, 0, 0), QUADRATIC_FUNCTIONS) == 2
    assert lp_sigma(PMM, (0, 0, 0), QUADRATIC_FUNCTIONS) == 2
    assert alg_sigma(TriangleSignature("-", "-", "-"), (1, 1, 1), QUADRATIC_FUNCTIONS) == 0


def test_closed_forms_for_plus_minus_minus():
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 1000:
        x, y, z = rng.random(3)
        if not TriangleLengths(x, y, z).is_metric():
            continue
        f = float(QUADRATIC_FUNCTIONS.plus(x))
        alg = 2 - 2 * y * z - 2 * f + f * y + f * z
        lp = 2 + x - y - z - x * y * z - f * y - f * z + 2 * f * y * z
        assert float(alg_sigma(PMM, (x, y, z), QUADRATIC_FUNCTIONS)) == pytest.approx(alg, abs=1e-12)
        assert float(lp_sigma(PMM, (x, y, z), QUADRATIC_FUNCTIONS)) == pytest.approx(lp, abs=1e-12)
        checked += 1


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(ALL_SIGNATURES), metric_triples(), st.sampled_from(FNS))
def test_pivot_terms_are_probabilities(sig, lengths, fns):
    for p in "uvw":
        assert -1e-12 <= float(pivot_cost(sig, lengths, p, fns)) <= 1 + 1e-12
        assert -1e-12 <= float(pivot_lp(sig, lengths, p, fns)) <= 1 + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(ALL_SIGNATURES), metric_triples(), st.sampled_from(FNS))
def test_swapping_u_and_v(sig, lengths, fns):
    x, y, z = lengths
    swapped = TriangleSignature(sig.sigma_uw, sig.sigma_vw, sig.sigma_uv)
    assert float(alg_sigma(sig, (x, y, z), fns)) == pytest.approx(float(alg_sigma(swapped, (y, x, z), fns)), abs=1e-12)
    assert float(lp_sigma(sig, (x, y, z), fns)) == pytest.approx(float(lp_sigma(swapped, (y, x, z), fns)), abs=1e-12)


@pytest.mark.parametrize("sig", ALL_SIGNATURES)
@pytest.mark.parametrize("fns", [QUADRATIC_FUNCTIONS, IDENT])
def test_integral_geometries_match_partition_mistakes(sig, fns):
    u, v, w = 0, 1, 2
    sign = {(v, w): sig.sigma_vw, (u, w): sig.sigma_uw, (u, v): sig.sigma_uv}
    g = new_graph(3, [e for e, s in sign.items() if s == "-"])
    for part in set_partitions([u, v, w]):
        lab = Clustering.from_clusters(part, 3).assignment
        d = {e: float(lab[e[0]] != lab[e[1]]) for e in sign}
        lengths = (d[(v, w)], d[(u, w)], d[(u, v)])
        mistake = {e: (d[e] == 1.0) == (sign[e] == "+") for e in sign}
        # integral objective equals the partition's mistake count
        objective = sum(d[e] if sign[e] == "+" else 1 - d[e] for e in sign)
        assert objective == sum(mistake.values())
        for pivot, name, opp in ((w, "w", (u, v)), (v, "v", (u, w)), (u, "u", (v, w))):
            decided = any(lab[a] == lab[pivot] for a in opp)
            cost = float(pivot_cost(sig, lengths, name, fns))
            lp = float(pivot_lp(sig, lengths, name, fns))
            assert cost == (float(mistake[opp]) if decided else 0.0)
            assert lp == cost
        assert float(alg_sigma(sig, lengths, fns)) == float(lp_sigma(sig, lengths, fns))


def test_scan_matches_naive_loop():
    step, rho = 0.1, 2.06
    axis = [round(i * step, 12) for i in range(11)]
    for sig in ALL_SIGNATURES:
        best = -np.inf
        for x, y, z in itertools.product(axis, repeat=3):
            if TriangleLengths(x, y, z).is_metric():
                best = max(best, float(alg_sigma(sig, (x, y, z), QUADRATIC_FUNCTIONS))
                           - rho * float(lp_sigma(sig, (x, y, z), QUADRATIC_FUNCTIONS)))
        scan = scan_signature(sig, QUADRATIC_FUNCTIONS, rho, step, refine=False)
        assert scan.worst.difference == pytest.approx(best, abs=1e-15)


def test_refinement_never_lowers_the_maximum():
    for sig in ALL_SIGNATURES:
        coarse = scan_signature(sig, IDENT, 2.0, 0.05, refine=False)
        fine = scan_signature(sig, IDENT, 2.0, 0.05, refine=True)
        assert fine.worst.difference >= coarse.worst.difference
        assert fine.points > coarse.points


def test_identity_scan_fails_at_two_with_checkable_witness():
    rep = scan_ratio(IDENT, 2.0, 0.05)
    assert not rep.passes()
    w = rep.worst
    assert w.lengths.is_metric()
    assert float(alg_sigma(w.signature, w.lengths, IDENT)) - 2.0 * float(lp_sigma(w.signature, w.lengths, IDENT)) \
        == pytest.approx(w.difference) and w.difference > 1e-3


def test_coarse_scans_pass_at_target_factors():
    assert scan_ratio(QUADRATIC_FUNCTIONS, 2.06, 0.02).passes()
    assert scan_ratio(IDENT, 2.5, 0.02).passes()


def test_scan_is_deterministic_and_rejects_bad_step():
    a, b = scan_ratio(IDENT, 2.0, 0.1), scan_ratio(IDENT, 2.0, 0.1)
    assert a.worst == b.worst and a.max_ratio == b.max_ratio
    with pytest.raises(ValueError):
        scan_signature(PMM, IDENT, 2.0, 0.0)


# ------------------------------------------------------------- packing

def test_packing_examples():
    pb = packing_lower_bound(BAD)
    assert pb.value == pytest.approx(1.0) and pb.triangle_weights == {(0, 1, 2): pytest.approx(1.0)}
    assert packing_lower_bound(new_graph(6)).value == 0


@pytest.mark.parametrize("n", [4, 5, 6, 8])
def test_packing_on_gap_star(n):
    pb = packing_lower_bound(gen_gap_star(n))
    assert packing_is_valid(pb, n + 1)
    assert n / 2 - 1e-7 <= pb.value <= n - 1 + 1e-7


@pytest.mark.parametrize("seed", range(6))
def test_packing_below_opt(seed):
    g = random_graph(7, 0.4, 50 + seed)
    pb = packing_lower_bound(g)
    assert packing_is_valid(pb, g.n)
    assert pb.value <= brute_opt(g) + 1e-7
    assert pb.value == pytest.approx(packing_lower_bound(g, backend="simplex").value, abs=1e-7)


def test_packing_validity_check_catches_overload():
    from corrclust.triangles import PackingBound
    assert not packing_is_valid(PackingBound(1.5, {(0, 1, 2): 0.75, (0, 1, 3): 0.75}), 4)


# ------------------------------------------------------------- exact expectations

def test_expectation_examples():
    assert expectation_oracle_small(BAD, "kwik") == 1
    assert kwik_expected_cost(gen_single_negative_edge(4)) == Fraction(3, 2)
    zero = FractionalMetric(3, np.zeros((3, 3)))
    assert expectation_oracle_small(new_graph(3), "cmsy", zero, QUADRATIC_FUNCTIONS) == 0


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_kwik_expectation_formula_on_single_negative_edge(n):
    assert kwik_expected_cost(gen_single_negative_edge(n)) == 3 - Fraction(6, n)


@pytest.mark.parametrize("seed", range(5))
def test_kwik_oracle_matches_outcome_tree(seed):
    g = random_graph(5, 0.4, seed)
    assert kwik_expected_cost(g) == tree_expectation(g)


def test_oracle_refusals():
    with pytest.raises(ValueError):
        expectation_oracle_small(new_graph(7), "kwik")
    with pytest.raises(ValueError):
        expectation_oracle_small(new_graph(5), "cmsy", FractionalMetric(5, np.zeros((5, 5))))
    with pytest.raises(ValueError):
        expectation_oracle_small(BAD, "cmsy")
    with pytest.raises(ValueError):
        expectation_oracle_small(BAD, "cgw")
