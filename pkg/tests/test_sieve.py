import math

import numpy as np
import pytest

from sievekit.enumeration import enumerate_short, enumerate_svp
from sievekit.errors import DomainError, InputError, ListStarvationError
from sievekit.lattice import Basis, random_lattice, sign_canonical
from sievekit.sieve import (SQRT_4_3, SieveList, SieveStepParams, TerminationRule, gauss_sieve,
                            nv_sieve_step, pairwise_violations, reduction_threshold, relaxed_gauss_sieve,
                            run_nv_sieve)


def identity(d):
    return Basis(np.eye(d, dtype=np.int64))


def brute_nv_step(lst, bound):
    """All w1 -/+ w2 (canonical, nonzero) with norm <= bound, by explicit pairs."""
    out = set()
    for i in range(len(lst)):
        for j in range(i + 1, len(lst)):
            for s in (1, -1):
                c = lst.coeffs[i] - s * lst.coeffs[j]
                x = lst.coords[i] - s * lst.coords[j]
                if c.any() and x @ x <= bound * bound * (1 + 1e-9):
                    nz = c[np.flatnonzero(c)[0]]
                    out.add(tuple(c if nz > 0 else -c))
    return out


class TestSieveList:
    def test_dedupes_modulo_sign_and_rejects_zero(self):
        lst = SieveList(identity(3))
        assert lst.add(np.array([1, -1, 0])) is not None
        assert lst.add(np.array([-1, 1, 0])) is None
        assert lst.add(np.zeros(3, dtype=np.int64)) is None
        assert len(lst) == 1


class TestNvStep:
    def test_empty(self):
        out = nv_sieve_step(SieveList(identity(2)), SieveStepParams(0.9, 1.0))
        assert len(out) == 0

    def test_duplicate_difference_excluded(self):
        b = identity(2)
        lst = SieveList.from_coeffs(b, [[1, 0]])
        lst.add(np.array([1, 0]))
        assert len(nv_sieve_step(lst, SieveStepParams(0.99, 1.0))) == 0

    def test_d2_against_pair_scan(self):
        # (1,0) and (3,4): (3,4)/5 is the unit vector at (0.6, 0.8)
        b = Basis(np.array([[5, 0], [3, 4]]))
        lst = SieveList.from_coeffs(b, [[1, 0], [0, 1]])
        for gamma in (0.99, 0.9, 0.7):
            out = nv_sieve_step(lst, SieveStepParams(gamma, 5.0))
            assert out.key_set() == {SieveList.key_of(np.array(c)) for c in brute_nv_step(lst, gamma * 5.0)}

    def test_contract_on_random_list(self):
        b = random_lattice(10, 4)
        rng = np.random.default_rng(0)
        coeffs = rng.integers(-2, 3, size=(40, 10))
        lst = SieveList.from_coeffs(b, coeffs)
        r = float(np.sqrt(lst.sq_norms.max()))
        out = nv_sieve_step(lst, SieveStepParams(0.97, r))
        assert np.all(out.sq_norms <= (0.97 * r) ** 2 * (1 + 1e-9))
        assert {tuple(c) for c in sign_canonical(out.coeffs)} == brute_nv_step(lst, 0.97 * r)

    def test_input_above_radius(self):
        lst = SieveList.from_coeffs(identity(2), [[3, 0]])
        with pytest.raises(InputError):
            nv_sieve_step(lst, SieveStepParams(0.9, 1.0))

    def test_gamma_range(self):
        with pytest.raises(InputError):
            SieveStepParams(1.0, 1.0)


class TestNvSieve:
    def test_matches_enumeration_d20(self):
        hits = 0
        for seed in range(10):
            b = random_lattice(20, seed)
            out = run_nv_sieve(b, rng_seed=seed)
            hits += out.meta["shortest"].norm <= enumerate_svp(b).norm * (1 + 1e-9)
        assert hits >= 9

    def test_aggressive_gamma_starves(self):
        with pytest.raises(ListStarvationError) as err:
            run_nv_sieve(random_lattice(20, 0), gamma=0.5, rng_seed=0)
        assert err.value.trace

    def test_exponent_floor(self):
        with pytest.raises(DomainError):
            run_nv_sieve(random_lattice(10, 0), initial_list_exponent=0.1)


class TestGaussSieve:
    @pytest.mark.parametrize("seed", range(4))
    def test_pairwise_reduced_and_shortest(self, seed):
        b = random_lattice(20, seed)
        v, lst = gauss_sieve(b, rng_seed=seed)
        assert pairwise_violations(lst, 1.0) == 0
        assert v.norm == pytest.approx(lst.min_norm())
        assert v.norm >= enumerate_svp(b).norm * (1 - 1e-9)

    def test_matches_enumeration_d24(self):
        hits = sum(gauss_sieve(random_lattice(24, s), rng_seed=s)[0].norm
                   <= enumerate_svp(random_lattice(24, s)).norm * (1 + 1e-9) for s in range(10))
        assert hits >= 9

    def test_deterministic(self):
        b = random_lattice(18, 1)
        _, a = gauss_sieve(b, rng_seed=7)
        _, c = gauss_sieve(b, rng_seed=7)
        assert np.array_equal(a.coeffs, c.coeffs)

    def test_lsf_scan_agrees_on_min_norm(self):
        b = random_lattice(20, 2)
        v, _ = gauss_sieve(b, rng_seed=2)
        w, lst = gauss_sieve(b, rng_seed=2, use_lsf=True)
        assert w.norm == pytest.approx(v.norm)
        assert lst.meta["lsf"]

    def test_sample_budget_flags_partial(self):
        _, lst = gauss_sieve(random_lattice(20, 0), TerminationRule(max_samples=5), rng_seed=0)
        assert not lst.meta["certified"]


class TestReductionThreshold:
    def test_values(self):
        assert reduction_threshold(SQRT_4_3) == pytest.approx(1.0, abs=1e-12)
        assert reduction_threshold(math.sqrt(2)) == pytest.approx(2 - math.sqrt(2), abs=1e-12)
        assert reduction_threshold(1.0) == 2.0
        assert reduction_threshold(1e6) < 1e-5

    def test_decreasing(self):
        cs = [reduction_threshold(a) for a in np.linspace(1, 3, 50)]
        assert np.all(np.diff(cs) < 0)

    def test_domain(self):
        with pytest.raises(DomainError):
            reduction_threshold(0.9)


class TestRelaxedSieve:
    def test_plain_alpha_is_gauss_sieve(self):
        b = random_lattice(18, 3)
        _, g = gauss_sieve(b, rng_seed=3)
        r = relaxed_gauss_sieve(b, SQRT_4_3, rng_seed=3)
        assert np.array_equal(g.coeffs, r.coeffs)
        # alpha below sqrt(4/3) clamps to the same sieve
        r2 = relaxed_gauss_sieve(b, 1.05, rng_seed=3)
        assert np.array_equal(g.coeffs, r2.coeffs)

    def test_relaxed_pairwise_property(self):
        b = random_lattice(18, 1)
        lst = relaxed_gauss_sieve(b, math.sqrt(2), rng_seed=1)
        assert pairwise_violations(lst, 2 - math.sqrt(2)) == 0
        assert lst.min_norm() >= enumerate_svp(b).norm * (1 - 1e-9)

    def test_coverage_of_short_vectors(self):
        from sievekit.cvpp import PHASE1_SPREAD, PHASE1_TERMINATION
        from sievekit.lattice import gaussian_heuristic_lambda1
        covered = 0
        for seed in range(5):
            b = random_lattice(20, seed)
            lam = enumerate_svp(b).norm
            lst = relaxed_gauss_sieve(b, math.sqrt(2), PHASE1_TERMINATION, seed,
                                      spread=PHASE1_SPREAD * gaussian_heuristic_lambda1(b).value)
            want = {SieveList.key_of(c) for c in enumerate_short(b, 0.95 * math.sqrt(2) * lam)}
            covered += want <= lst.key_set()
        assert covered >= 4
