import math

import numpy as np
import pytest

from sievekit.cvpp import (HEADER_SIZE, CvppParams, PreprocessedList, collision_experiment, expected_beta,
                           min_alpha, preprocess, reduce_target, reducibility_probability, solve)
from sievekit.enumeration import enumerate_cvp, enumerate_svp
from sievekit.errors import CertificationError, DomainError, FormatError, InputError, WrongLatticeError
from sievekit.experiments import lemma2_rate
from sievekit.lattice import Basis, Lambda1Estimate, Lambda1Source, LatticeVector, random_lattice
from sievekit.sieve import SieveList
from sievekit.targets import random_target

SQRT2 = math.sqrt(2)
SQRT43 = math.sqrt(4 / 3)


def unit_list(d=2):
    b = Basis(np.eye(d, dtype=np.int64))
    lst = SieveList.from_coeffs(b, np.eye(d, dtype=np.int64))
    return PreprocessedList(b, SQRT2, Lambda1Estimate(1.0, Lambda1Source.ENUMERATED), lst)


@pytest.fixture(scope="module")
def d16():
    b = random_lattice(16, 3)
    return b, preprocess(b, rng_seed=3)


class TestMinAlpha:
    def test_exact_limits_agree(self):
        assert min_alpha("bdd", 1.0) == pytest.approx(SQRT2, abs=1e-12)
        assert min_alpha("approx", 1.0) == pytest.approx(SQRT2, abs=1e-12)
        assert min_alpha("exact") == SQRT2

    def test_printed_values(self):
        assert min_alpha("bdd", 0.5) == pytest.approx(1.1976, abs=5e-5)
        assert min_alpha("approx", 1.0882) == pytest.approx(1.1976, abs=1e-3)
        assert min_alpha("approx", SQRT43) == pytest.approx(SQRT43, abs=1e-12)

    def test_limits(self):
        assert min_alpha("bdd", 1e-6) ** 2 == pytest.approx(4 / 3, abs=1e-5)
        assert min_alpha("approx", 1e6) ** 2 == pytest.approx(1.0, abs=1e-5)

    def test_kappa_two_direct_evaluation(self):
        # direct evaluation of the kappa threshold, not the 1.1976 printed for kappa = 2
        k = 2.0
        assert min_alpha("approx", k) == pytest.approx(math.sqrt(2 * k * (k - math.sqrt(k * k - 1))), abs=1e-12)
        assert min_alpha("approx", k) == pytest.approx(1.0353, abs=5e-5)

    @pytest.mark.parametrize("mode,param", [("bdd", 0.0), ("bdd", 1.5), ("approx", 0.9)])
    def test_domain(self, mode, param):
        with pytest.raises(DomainError):
            min_alpha(mode, param)

    def test_params(self):
        p = CvppParams.bdd(0.5)
        assert p.certified and p.success_bound() == 0.5
        assert not CvppParams(1.1).certified
        with pytest.raises(InputError):
            CvppParams(1.2, "bdd")


class TestExpectedBeta:
    def test_values(self):
        assert expected_beta(SQRT2) == pytest.approx(1.0, abs=1e-12)
        assert expected_beta(SQRT43) == pytest.approx(SQRT43, abs=1e-12)
        assert expected_beta(2.0) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("alpha", [1.05, 1.1, SQRT43, 1.3, SQRT2, 1.8])
    def test_against_numeric_minimisation(self, alpha):
        # dense grid including the right endpoint, where the minimum sits for alpha < sqrt(2)
        a0 = np.linspace(1 + 1e-6, alpha, 400_001)
        grid = float(np.min(a0 * a0 / (2 * np.sqrt(a0 * a0 - 1))))
        assert expected_beta(alpha) == pytest.approx(grid, rel=1e-9)

    def test_decreasing(self):
        bs = [expected_beta(a) for a in np.linspace(1.01, SQRT2, 60)]
        assert np.all(np.diff(bs) < 0)

    @pytest.mark.parametrize("kappa", [1.0, 1.1, 1.5, 2.0, 5.0])
    def test_round_trip(self, kappa):
        assert expected_beta(min_alpha("approx", kappa)) == pytest.approx(kappa, abs=1e-6)

    def test_domain(self):
        with pytest.raises(DomainError):
            expected_beta(1.0)


class TestReducibility:
    def test_values(self):
        assert reducibility_probability(1, 2, 50) == 0
        assert reducibility_probability(1, 1e-6, 50) == pytest.approx(1.0, abs=1e-9)
        assert reducibility_probability(1, 1, 100) == pytest.approx(0.75**50, rel=1e-12)
        assert 0.75**50 == pytest.approx(5.66e-7, rel=1e-3)

    def test_domain(self):
        with pytest.raises(DomainError):
            reducibility_probability(0, 1, 10)

    def test_monte_carlo_small_d(self):
        # at small d the leading-order formula is a loose upper bound
        rate = lemma2_rate(8, 200_000, 0)
        assert 0 < rate < reducibility_probability(1, 1, 8)


class TestReduceTarget:
    def test_zero_target(self):
        red = reduce_target(unit_list(), [0.0, 0.0])
        assert red.reduction_count == 0 and not red.t_prime.any()

    def test_lattice_target(self, d16):
        b, plist = d16
        w = LatticeVector.from_coeffs(b, plist.list.coeffs[0])
        red = reduce_target(plist, w.coords)
        assert red.beta == 0 and np.array_equal(red.coeffs, w.coeffs)

    def test_hand_example(self):
        red = reduce_target(unit_list(), [1.4, 0.3])
        assert red.reduction_count == 1
        assert np.allclose(red.t_prime, [0.4, 0.3])
        # exhaustive recheck over the four list vectors
        for w in ([1, 0], [-1, 0], [0, 1], [0, -1]):
            assert np.linalg.norm(red.t_prime - w) > np.linalg.norm(red.t_prime) - 1e-9

    def test_unreducible_and_coset(self, d16):
        b, plist = d16
        rng = np.random.default_rng(0)
        for _ in range(10):
            t = random_target(b, rng)
            red = reduce_target(plist, t)
            assert np.allclose(t - b.coords(red.coeffs), red.t_prime)
            norms = np.linalg.norm(red.t_prime[None, :] - plist.list.coords, axis=1)
            norms_neg = np.linalg.norm(red.t_prime[None, :] + plist.list.coords, axis=1)
            tn = np.linalg.norm(red.t_prime)
            assert np.all(np.minimum(norms, norms_neg) > tn - 1e-9)
            assert red.reduction_count <= 10 * b.dimension

    def test_wrong_lattice(self, d16):
        _, plist = d16
        with pytest.raises(WrongLatticeError):
            reduce_target(plist, np.zeros(16), basis=random_lattice(16, 4))


class TestPreprocess:
    def test_norm_invariant_and_sorting(self, d16):
        b, plist = d16
        lam = enumerate_svp(b).norm
        assert plist.lambda1.value == pytest.approx(lam)
        assert plist.lambda1.source is Lambda1Source.ENUMERATED
        assert np.all(plist.list.norms() <= SQRT2 * lam * 1.02 * (1 + 1e-12))
        assert np.all(np.diff(plist.list.sq_norms) >= 0)

    def test_certification(self):
        b = random_lattice(12, 0)
        with pytest.raises(CertificationError):
            preprocess(b, CvppParams(1.2))
        p = preprocess(b, CvppParams(1.2), override=True)
        assert not p.metadata["certified"]

    def test_lsf_angles(self):
        b = random_lattice(12, 1)
        p = preprocess(b, rng_seed=1, use_lsf=True)
        assert p.lsf.theta == pytest.approx(math.pi / 4)
        p = preprocess(b, CvppParams.bdd(1e-9), rng_seed=1, use_lsf=True)
        assert p.alpha == pytest.approx(SQRT43, abs=1e-6)
        assert p.lsf.theta == pytest.approx(math.pi / 3, abs=1e-6)

    def test_same_seed_same_bytes(self):
        b = random_lattice(14, 2)
        assert preprocess(b, rng_seed=5).to_bytes() == preprocess(b, rng_seed=5).to_bytes()

    def test_round_trip(self, d16, tmp_path):
        b, plist = d16
        path = tmp_path / "list.cvpp"
        plist.save(path)
        back = PreprocessedList.load(path, b)
        assert back.to_bytes() == plist.to_bytes()
        assert np.array_equal(back.list.coeffs, plist.list.coeffs)
        t = random_target(b, np.random.default_rng(1))
        assert np.array_equal(reduce_target(back, t).coeffs, reduce_target(plist, t).coeffs)
        with pytest.raises(WrongLatticeError):
            PreprocessedList.load(path, random_lattice(16, 9))

    def test_header_layout(self, d16):
        _, plist = d16
        data = plist.to_bytes()
        assert data[:4] == b"CVPP"
        assert int.from_bytes(data[4:6], "little") == 1
        assert int.from_bytes(data[6:10], "little") == 16
        assert np.frombuffer(data[10:18], "<f8")[0] == plist.alpha
        assert len(data) >= HEADER_SIZE + len(plist) * 16 * 8

    @pytest.mark.parametrize("mutate", [lambda d: b"XXXX" + d[4:], lambda d: d[:30], lambda d: d + b"!"])
    def test_corrupt_files(self, d16, mutate):
        _, plist = d16
        with pytest.raises(FormatError):
            PreprocessedList.from_bytes(mutate(plist.to_bytes()))

    def test_list_invariant_enforced(self):
        b = Basis(np.eye(2, dtype=np.int64))
        lst = SieveList.from_coeffs(b, [[3, 0]])
        with pytest.raises(InputError):
            PreprocessedList(b, SQRT2, Lambda1Estimate(1.0, Lambda1Source.ENUMERATED), lst)


class TestSolve:
    def test_certificate_and_oracle(self, d16):
        b, plist = d16
        rng = np.random.default_rng(7)
        for _ in range(5):
            t = random_target(b, rng)
            s, cert = solve(plist, t)
            assert cert.mode == "exact" and cert.bound == 1.0
            assert cert.within_bound == (cert.beta <= 1 + 1e-9)
            # beta <= 1 means t' is no longer than lambda1, so s is within lambda1 of t
            if cert.within_bound:
                assert s.distance_to(t) <= enumerate_cvp(b, t).distance_to(t) + plist.lambda1.value

    def test_lsf_query_is_unreducible_on_candidates(self):
        b = random_lattice(14, 6)
        plist = preprocess(b, rng_seed=6, use_lsf=True)
        t = random_target(b, np.random.default_rng(6))
        s, cert = solve(plist, t)
        assert cert.lsf
        red = reduce_target(plist, t)
        assert np.allclose(t - b.coords(red.coeffs), red.t_prime)
        # no candidate the index offers for t' (or -t') can still shorten it
        rows = sorted(plist.index.candidate_set(red.t_prime) | plist.index.candidate_set(-red.t_prime))
        tn = np.linalg.norm(red.t_prime)
        for r in rows:
            w = plist.list.coords[r]
            assert min(np.linalg.norm(red.t_prime - w), np.linalg.norm(red.t_prime + w)) > tn - 1e-9

    def test_collision_experiment_runs(self):
        b = random_lattice(14, 0)
        plist = preprocess(b, CvppParams(SQRT43), rng_seed=0, override=True)
        rates = collision_experiment(b, plist, 5, rng_seed=0)
        assert set(rates) == {0.01, 0.1, 0.5}
        assert all(0 <= r <= 1 for r in rates.values())
