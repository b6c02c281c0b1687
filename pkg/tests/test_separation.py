import numpy as np
import pytest

from moranifs import (Box, ContractionMap, check_mosc, check_mssc, cutset, explicit_system, family_system,
                      gamma2_mwhp, gamma3_mbdp, gamma4_neighbors, near_identity_gap)
from moranifs import _backend
from moranifs.separation import (BOUNDED, FAILS, HOLDS, INCONCLUSIVE, UNBOUNDED, BoxSequence,
                                 SeparationReport, growth_verdict, neighbor_count_max)

from helpers import cantor, random_system

BACKENDS = ["python"] + (["cython"] if _backend.BACKEND == "cython" else [])


def halves():
    """x/2 and (x+1/2)/2 on [0,1]: the second image is [1/4, 3/4]."""
    maps = [ContractionMap.similarity(0.5, [0.0]), ContractionMap.similarity(0.5, [0.5])]
    return explicit_system([], [maps], Box([0.0], [1.0]))


def unit_interval():
    maps = [ContractionMap.similarity(0.5, [0.0]), ContractionMap.similarity(0.5, [1.0])]
    return explicit_system([], [maps], Box([0.0], [1.0]))


def oracle_neighbor_max(cs, dedup):
    """O(W^2) count of closed-box neighbors per word."""
    lo, hi = cs.images()
    tol = 1e-12 * max(1.0, cs.sys.ambient.diameter)
    meet = np.all((lo[:, None, :] <= hi[None, :, :] + tol) & (lo[None, :, :] <= hi[:, None, :] + tol), axis=2)
    if not dedup:
        return int(meet.sum(axis=1).max())
    labels = cs.map_labels
    return max(len(set(labels[meet[i]].tolist())) for i in range(len(cs)))


class TestMosc:
    def test_ex55_holds_with_unit_measure(self):
        res = check_mosc(family_system("ex55", a_rule="up"), nmax=12)
        assert res.verdict.status == HOLDS
        assert res.measure_bounded_below and min(res.running_inf) == pytest.approx(1.0)

    def test_ex53_phi_holds_but_measure_vanishes(self):
        res = check_mosc(family_system("ex53", rho=0.5, form="phi"), nmax=20)
        assert res.verdict.status == HOLDS
        assert not res.measure_bounded_below
        assert res.measures[-1] < 1e-6

    def test_overlap_reported(self):
        res = check_mosc(halves(), nmax=4)
        assert res.verdict.status == FAILS
        assert res.verdict.depth == 1
        assert res.verdict.witness["pair"] == [1, 2]

    def test_overlap_witness_reverifies(self):
        sys = halves()
        w = check_mosc(sys, nmax=4).verdict.witness
        a, b = (sys.ambient.hull_image(sys.layer(1).maps[j - 1]) for j in w["pair"])
        assert max(a.lo[0], b.lo[0]) < min(a.hi[0], b.hi[0])
        assert [a.to_json(), b.to_json()] == w["images"]

    def test_containment_failure(self):
        V = BoxSequence.constant(Box([0.0], [0.4]))
        res = check_mosc(unit_interval(), V, nmax=3)
        assert res.verdict.status == FAILS and res.verdict.witness["reason"] == "containment"

    def test_box_sequence_json(self):
        V = BoxSequence.from_json({"prefix": [{"lo": [0], "hi": [1]}],
                                   "cycle": [[{"lo": [0], "hi": [0.25]}, {"lo": [0.75], "hi": [1]}]]})
        assert len(V.boxes(1)) == 1 and len(V.boxes(5)) == 2
        assert len(BoxSequence.from_json({"boxes": [{"lo": [0], "hi": [1]}]}).boxes(3)) == 1


class TestMssc:
    def test_cantor_holds(self):
        assert check_mssc(cantor()).status == HOLDS

    def test_unit_interval_fails(self):
        v = check_mssc(unit_interval(), nmax=2)
        assert v.status == FAILS and v.depth == 1
        assert v.witness["eps"] == 2.0 ** -16

    def test_fail_witness_reverifies(self):
        sys = unit_interval()
        w = check_mssc(sys, nmax=2).witness
        (a, b) = w["boxes"]
        assert max(a["lo"][0], b["lo"][0]) <= min(a["hi"][0], b["hi"][0])
        # both boxes really are images of X under words starting with the reported maps
        assert a["hi"][0] <= 0.5 + 1e-12 <= b["hi"][0] and w["pair"] == [1, 2]

    def test_ex53_phi_separates(self):
        assert check_mssc(family_system("ex53", rho=0.5, form="phi"), nmax=4).status == HOLDS

    def test_limit_gives_inconclusive(self):
        assert check_mssc(unit_interval(), limit=4).status == INCONCLUSIVE


class TestGamma:
    def test_ex51_gamma2_gamma3_closed_form(self):
        sys = family_system("ex51")
        g2 = gamma2_mwhp(sys, [2.0 ** -n for n in range(1, 11)])
        g3 = gamma3_mbdp(sys, 10)
        assert np.allclose(g2.values, 1.25 ** np.arange(1, 11), rtol=1e-12)
        assert np.allclose(g3.values, 1.25 ** np.arange(1, 11), rtol=1e-12)
        assert np.all(np.asarray(g2.extra["upper_bound_samples"]) >= g2.values * (1 - 1e-12))

    def test_similarity_gamma3_is_one(self):
        assert np.all(gamma3_mbdp(family_system("ex57"), 20).values == 1.0)

    def test_ex58_gamma4_bounded(self):
        res = gamma4_neighbors(family_system("ex58"), [2.0 ** -(2 ** n - 1) for n in (1, 2, 3)])
        assert res.values.max() <= 3

    def test_cantor_gamma4_prime(self):
        res = gamma4_neighbors(cantor(), [3.0 ** -k for k in range(1, 8)], dedup=False)
        assert res.name == "gamma4_prime"
        assert np.all(res.values == 1)
        assert res.verdict.status == BOUNDED

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("dedup", [True, False])
    def test_neighbor_count_matches_quadratic_oracle(self, seed, dedup):
        rng = np.random.default_rng(seed)
        sys = random_system(rng) if seed % 2 else family_system("ex59")
        cs = cutset(sys, float(rng.uniform(0.005, 0.05)))
        for backend in BACKENDS:
            assert neighbor_count_max(cs, dedup, backend=backend) == oracle_neighbor_max(cs, dedup)

    def test_ex59_growth_depends_on_ambient(self):
        grid = [19 / (2 ** n * 10) for n in range(4, 13, 2)]
        flat = gamma4_neighbors(family_system("ex59"), grid).values
        grown = gamma4_neighbors(family_system("ex59", margin=0.5), grid).values
        assert flat.max() <= 3
        assert np.all(np.diff(grown) >= 0) and grown[-1] > grown[0]

    def test_gamma1_with_union(self):
        U = BoxSequence.constant([Box([0.0], [1 / 3]), Box([2 / 3], [1.0])])
        res = gamma4_neighbors(cantor(), [3.0 ** -k for k in range(1, 6)], U=U)
        assert res.name == "gamma1" and np.all(res.values == 1)

    def test_growth_verdict(self):
        assert growth_verdict([1, 2, 2, 2]).status == BOUNDED
        assert growth_verdict([1, 10, 100, 1000, 5000]).status == UNBOUNDED
        assert growth_verdict([1, 2, 3, 4]).status == INCONCLUSIVE
        assert growth_verdict([1]).status == INCONCLUSIVE


class TestNearIdentity:
    def test_cantor_has_no_pairs(self):
        out = near_identity_gap(cantor(), [3.0 ** -k for k in range(1, 6)])
        assert all(s.pairs == 0 for s in out)

    def test_equal_maps_are_not_pairs(self):
        out = near_identity_gap(family_system("ex58"), [0.5 * 1.0000001])
        assert out[0].min_gap is None or out[0].min_gap > 0

    def test_ex53_phi_focused(self):
        sys = family_system("ex53", rho=0.5, form="phi")
        ns = range(1, 7)
        out = near_identity_gap(sys, [2.0 ** (-2 * n) for n in ns], theta=[1 / (n + 1) for n in ns],
                                sigma=[[1] * (2 * n) for n in ns])
        assert [s.qualifying for s in out] == [1, 3, 7, 15, 31, 63]

    def test_focused_agrees_with_global(self):
        sys = family_system("ex53", rho=0.5, form="phi")
        b = 2.0 ** -6
        glob = near_identity_gap(sys, [b], theta=10.0)[0]
        foc = near_identity_gap(sys, [b], theta=10.0, sigma=[[1] * 6])[0]
        assert foc.pairs <= glob.pairs and foc.min_gap >= glob.min_gap

    def test_focused_rejects_word_outside_cutset(self):
        sys = family_system("ex53", rho=0.5, form="phi")
        with pytest.raises(ValueError):
            near_identity_gap(sys, [2.0 ** -6], sigma=[[1]])


def test_report_json():
    rep = SeparationReport({"mssc": check_mssc(cantor(), nmax=2),
                            "near": near_identity_gap(cantor(), [0.1])})
    doc = rep.to_json()
    assert doc["mssc"]["status"] == HOLDS and doc["near"][0]["pairs"] == 0
