import math
import random

import pytest

from corefal.constraints import LinkStore
from corefal.corpus import EPSILON, CandidateSet
from corefal.scorer import AntecedentDistribution
from corefal.selectors import (ClusterView, Strategy, build_cluster_view,
                               cluster_probability, clustered_entropy,
                               clustered_entropy_select, clustered_qbc_select,
                               grouped_probabilities, lcc_mcu_select,
                               pairwise_entropy_select, random_select, raw_entropy,
                               revise_distribution_with_links, revised_votes,
                               vote_entropy)

S = [(i, i) for i in range(40)]  # span universe


def make_dist(i, n_cands, probs):
    """Distribution for span S[i] over candidates S[i-n_cands..i-1] plus EPSILON.

    `probs` lists candidate probabilities in order; the remainder goes to EPSILON.
    """
    cands = CandidateSet(span=S[i], candidates=tuple(S[i - n_cands : i]))
    p = {y: probs[j] for j, y in enumerate(cands.candidates)}
    p[EPSILON] = 1.0 - sum(probs)
    return AntecedentDistribution(span=S[i], candidates=cands, probs=p)


def view_of(*clusters):
    view = ClusterView()
    for cluster in clusters:
        for other in cluster[1:]:
            view._union(cluster[0], other)
    return view


# -- cluster probability / partition ------------------------------------------

def test_cluster_probability_direct_sum():
    dist = make_dist(3, 3, [0.3, 0.25, 0.2])  # y1,y2,y3 = S0,S1,S2; eps 0.25
    view = view_of([S[0], S[1]])
    cid = view.cluster_of(S[0])
    assert cluster_probability(dist, cid, view) == pytest.approx(0.55)
    assert cluster_probability(dist, view.cluster_of(S[30]), view) == 0.0
    assert cluster_probability(dist, EPSILON, view) == pytest.approx(0.25)


@pytest.mark.parametrize("seed", range(20))
def test_partition_sums_to_one(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 10)
    raw = [rng.random() for _ in range(n + 1)]
    total = sum(raw)
    dist = make_dist(n, n, [r / total for r in raw[:n]])
    # random partition of the candidates
    view = ClusterView()
    for y in dist.candidates.candidates:
        if rng.random() < 0.5:
            view._union(dist.candidates.candidates[0], y)
    grouped = grouped_probabilities(dist, view)
    assert sum(grouped.values()) == pytest.approx(1.0, abs=1e-9)
    cids = {view.cluster_of(y) for y in dist.candidates.candidates} | {EPSILON}
    assert sum(cluster_probability(dist, c, view) for c in cids) == pytest.approx(1.0, abs=1e-9)


# -- link revision ------------------------------------------------------------

def test_revise_cannot_link_renormalizes():
    dist = make_dist(2, 2, [0.5, 0.3])  # y1=S0 0.5, y2=S1 0.3, eps 0.2
    links = LinkStore()
    links.add_cannot_link(S[2], S[0])
    revised = revise_distribution_with_links(dist, links)
    assert revised.probs[S[0]] == 0.0
    assert revised.probs[S[1]] == pytest.approx(0.6)
    assert revised.probs[EPSILON] == pytest.approx(0.4)


def test_revise_must_link_takes_all_mass():
    dist = make_dist(2, 2, [0.5, 0.3])
    links = LinkStore()
    links.add_must_link(S[2], S[1])
    revised = revise_distribution_with_links(dist, links)
    assert revised.probs == {S[0]: 0.0, S[1]: 1.0, EPSILON: 0.0}


def test_revise_two_must_links_chooses_earliest():
    dist = make_dist(2, 2, [0.1, 0.2])
    links = LinkStore()
    links.add_must_link(S[2], S[1])
    links.add_must_link(S[1], S[0])  # whole chain must-linked
    revised = revise_distribution_with_links(dist, links)
    assert revised.probs[S[0]] == 1.0
    assert revised.probs[S[1]] == 0.0


def test_revise_discourse_new_pins_epsilon():
    dist = make_dist(2, 2, [0.5, 0.3])
    links = LinkStore()
    links.discourse_new.add(S[2])
    revised = revise_distribution_with_links(dist, links)
    assert revised.probs == {S[0]: 0.0, S[1]: 0.0, EPSILON: 1.0}


def test_revise_all_mass_zeroed_falls_back_to_epsilon():
    dist = make_dist(2, 2, [0.6, 0.4])  # eps gets 0
    links = LinkStore()
    links.add_cannot_link(S[2], S[0])
    links.add_cannot_link(S[2], S[1])
    revised = revise_distribution_with_links(dist, links)
    assert revised.probs[EPSILON] == 1.0


# -- clustered entropy --------------------------------------------------------

def test_uniform_four_clusters_entropy_ln4():
    dist = make_dist(4, 3, [0.25, 0.25, 0.25])  # 3 singleton cands + eps, all 0.25
    assert clustered_entropy(dist, ClusterView()) == pytest.approx(math.log(4), abs=1e-9)


def test_merging_candidates_lowers_entropy():
    dist = make_dist(3, 2, [0.3, 0.25])  # y1 0.3, y2 0.25, eps 0.45
    split = clustered_entropy(dist, ClusterView())
    merged = clustered_entropy(dist, view_of([S[1], S[2]]))
    assert merged < split
    # merged outcome contributes a single 0.55 term
    grouped = grouped_probabilities(dist, view_of([S[1], S[2]]))
    assert sorted(grouped.values()) == pytest.approx([0.45, 0.55])


@pytest.mark.parametrize("seed", range(30))
def test_merge_monotonicity_random(seed):
    rng = random.Random(1000 + seed)
    n = rng.randint(2, 8)
    raw = [rng.random() for _ in range(n + 1)]
    total = sum(raw)
    dist = make_dist(n, n, [r / total for r in raw[:n]])
    before = clustered_entropy(dist, ClusterView())
    a, b = rng.sample(list(dist.candidates.candidates), 2)
    after = clustered_entropy(dist, view_of([a, b]))
    assert after <= before + 1e-12


def test_entropy_matches_bruteforce_grouping():
    dist = make_dist(5, 4, [0.1, 0.2, 0.3, 0.15])
    view = view_of([S[1], S[3]], [S[2], S[4]])
    sums = {}
    for y in dist.candidates.candidates:
        sums.setdefault(view.cluster_of(y), 0.0)
        sums[view.cluster_of(y)] += dist.probs[y]
    sums[EPSILON] = dist.probs[EPSILON]
    expected = -sum(p * math.log(p) for p in sums.values() if p > 0)
    assert clustered_entropy(dist, view) == pytest.approx(expected, abs=1e-12)


def test_log_base_invariance_of_argmax():
    dists = [make_dist(4, 2, [0.5, 0.3]), make_dist(8, 2, [0.34, 0.33])]
    view = ClusterView()
    eligible = {d.span for d in dists}
    pick = clustered_entropy_select(dists, view, eligible)
    # recompute with log2: same ranking, same winner
    def ent2(d):
        return -sum(p * math.log2(p) for p in grouped_probabilities(d, view).values() if p > 0)
    by_log2 = max(dists, key=ent2)
    assert pick.span == by_log2.span == S[8]


def test_certain_span_never_selected():
    certain = make_dist(4, 2, [1.0, 0.0])
    uncertain = make_dist(8, 2, [0.4, 0.3])
    pick = clustered_entropy_select([certain, uncertain], ClusterView(),
                                    {certain.span, uncertain.span})
    assert pick.span == uncertain.span
    assert clustered_entropy(certain, ClusterView()) == 0.0


def test_select_exhaustion_returns_none():
    assert clustered_entropy_select([make_dist(2, 2, [0.5, 0.3])], ClusterView(), set()) is None


def test_raw_entropy_ignores_clusters():
    dist = make_dist(3, 2, [0.3, 0.25])
    expected = -sum(p * math.log(p) for p in [0.3, 0.25, 0.45])
    assert raw_entropy(dist) == pytest.approx(expected)


# -- vote entropy / QBC -------------------------------------------------------

def test_vote_entropy_unanimous_cluster_is_zero():
    cands = CandidateSet(span=S[3], candidates=(S[0], S[1]))
    members = [{S[3]: S[0]}, {S[3]: S[1]}, {S[3]: S[0]}]
    view = view_of([S[0], S[1]])  # both candidates in one cluster
    assert vote_entropy(S[3], cands, members, view, LinkStore()) == 0.0


def test_vote_entropy_two_one_split():
    cands = CandidateSet(span=S[3], candidates=(S[0], S[1]))
    members = [{S[3]: S[0]}, {S[3]: S[0]}, {S[3]: S[1]}]
    expected = -(2 / 3) * math.log(2 / 3) - (1 / 3) * math.log(1 / 3)
    got = vote_entropy(S[3], cands, members, ClusterView(), LinkStore())
    assert got == pytest.approx(expected, abs=1e-9)
    assert got == pytest.approx(0.6365, abs=1e-4)


def test_revised_votes_must_link_unanimous():
    cands = CandidateSet(span=S[3], candidates=(S[0], S[1]))
    members = [{S[3]: S[1]}, {S[3]: EPSILON}, {S[3]: S[1]}]
    links = LinkStore()
    links.add_must_link(S[0], S[3])
    votes = revised_votes(S[3], cands, members, links)
    assert votes == {S[0]: 3, S[1]: 0, EPSILON: 0}
    assert vote_entropy(S[3], cands, members, ClusterView(), links) == 0.0


def test_revised_votes_cannot_link_zeroed():
    cands = CandidateSet(span=S[3], candidates=(S[0], S[1]))
    members = [{S[3]: S[0]}, {S[3]: S[0]}, {S[3]: S[1]}]
    links = LinkStore()
    links.add_cannot_link(S[0], S[3])
    votes = revised_votes(S[3], cands, members, links)
    assert votes[S[0]] == 0 and votes[S[1]] == 1


def test_qbc_requires_two_members():
    with pytest.raises(ValueError):
        clustered_qbc_select([], [{}], ClusterView(), LinkStore(), set())


def test_qbc_select_prefers_disagreement():
    d_agree = make_dist(3, 2, [0.5, 0.3])
    d_split = make_dist(8, 2, [0.5, 0.3])
    members = [{S[3]: S[0], S[8]: S[6]},
               {S[3]: S[0], S[8]: S[7]},
               {S[3]: S[0], S[8]: EPSILON}]
    pick = clustered_qbc_select([d_agree, d_split], members, ClusterView(), LinkStore(),
                                {S[3], S[8]})
    assert pick.span == S[8]
    assert pick.strategy is Strategy.CLUSTERED_QBC


# -- never reselect an ML-queried span, all strategies ------------------------

def test_ml_queried_span_never_reselected():
    links = LinkStore()
    links.add_must_link(S[0], S[3])
    links.queried.add(S[3])
    dists = [revise_distribution_with_links(make_dist(3, 2, [0.5, 0.3]), links),
             revise_distribution_with_links(make_dist(8, 2, [0.4, 0.3]), links)]
    eligible = {d.span for d in dists} - links.queried
    view = ClusterView()
    assert clustered_entropy_select(dists, view, eligible).span == S[8]
    members = [{S[3]: S[0], S[8]: S[6]}, {S[3]: S[1], S[8]: S[7]}]
    assert clustered_qbc_select(dists, members, view, links, eligible).span == S[8]
    picks = lcc_mcu_select(dists, view, eligible, budget=10)
    assert all(p.span != S[3] for p in picks)
    assert random_select(eligible, random.Random(0)).span == S[8]


# -- LCC / MCU ----------------------------------------------------------------

def test_lcc_mcu_budget_split():
    # 7 clustered + 30 unclustered spans, L=20 -> n=7, m=13
    view = ClusterView()
    dists = []
    for i in range(7):  # clustered targets: each must-linked pair (2i, 2i+1)... keep simple
        d = make_dist(16 + i, 2, [0.5, 0.3])
        view._union(d.span, S[0])  # mark the span itself clustered
        dists.append(d)
    for i in range(30):
        # unclustered spans need fresh span ids; reuse window upstream of 16
        span = (100 + i, 100 + i)
        cands = CandidateSet(span=span, candidates=(S[0], S[1]))
        dists.append(AntecedentDistribution(span=span, candidates=cands,
                                            probs={S[0]: 0.4, S[1]: 0.3, EPSILON: 0.3}))
    eligible = {d.span for d in dists}
    picks = lcc_mcu_select(dists, view, eligible, budget=20)
    assert len(picks) == 20
    n_clustered = sum(view.is_clustered(p.span) for p in picks)
    assert n_clustered == 7
    assert len(picks) - n_clustered == 13


def test_lcc_mcu_excludes_probability_one():
    view = ClusterView()
    certain = make_dist(4, 2, [1.0, 0.0])
    view._union(certain.span, S[2])
    open_d = make_dist(8, 2, [0.4, 0.3])
    picks = lcc_mcu_select([certain, open_d], view, {certain.span, open_d.span}, budget=4)
    assert [p.span for p in picks] == [open_d.span]


def test_lcc_mcu_all_unclustered():
    dists = [make_dist(4, 2, [0.4, 0.3]), make_dist(8, 2, [0.5, 0.2])]
    picks = lcc_mcu_select(dists, ClusterView(), {d.span for d in dists}, budget=20)
    assert len(picks) == 2  # n=0, m=min(L, #spans)
    assert all(p.strategy is Strategy.LCC_MCU for p in picks)


def test_lcc_mcu_zero_budget():
    assert lcc_mcu_select([make_dist(4, 2, [0.4, 0.3])], ClusterView(), {S[4]}, 0) == []


def test_lcc_mcu_orders_least_coreferent_first():
    view = ClusterView()
    sure = make_dist(10, 2, [0.9, 0.05])  # P(own cluster) high
    shaky = make_dist(20, 2, [0.3, 0.1])
    for d in (sure, shaky):
        view._union(d.span, d.candidates.candidates[0])
    picks = lcc_mcu_select([sure, shaky], view, {sure.span, shaky.span}, budget=2)
    assert picks[0].span == shaky.span


# -- random / pairwise baselines ---------------------------------------------

def test_random_select_deterministic_in_seed():
    eligible = {S[3], S[8], S[15]}
    a = random_select(eligible, random.Random(42)).span
    b = random_select(eligible, random.Random(42)).span
    assert a == b
    assert random_select(set(), random.Random(0)) is None


def test_pairwise_select_max_binary_entropy_and_skip():
    d = make_dist(3, 2, [0.5, 0.1])
    pick = pairwise_entropy_select([d], {d.span}, set())
    assert pick[0] == d.span and pick[1] == S[1]  # p=0.5 is max binary entropy
    pick2 = pairwise_entropy_select([d], {d.span}, {frozenset((d.span, S[1]))})
    assert pick2[1] == S[2]
    assert pairwise_entropy_select(
        [d], {d.span}, {frozenset((d.span, S[1])), frozenset((d.span, S[2]))}) is None


# -- build_cluster_view -------------------------------------------------------

def test_build_cluster_view_links_take_precedence():
    links = LinkStore()
    links.add_must_link(S[0], S[5])
    view = build_cluster_view([frozenset({S[1], S[2]})], links)
    assert view.cluster_of(S[0]) == view.cluster_of(S[5])
    assert view.cluster_of(S[1]) == view.cluster_of(S[2])
    assert view.is_clustered(S[0]) and not view.is_clustered(S[9])


def test_build_cluster_view_cl_blocks_model_merge():
    links = LinkStore()
    links.add_cannot_link(S[1], S[2])
    view = build_cluster_view([frozenset({S[1], S[2]})], links)
    assert view.cluster_of(S[1]) != view.cluster_of(S[2])
