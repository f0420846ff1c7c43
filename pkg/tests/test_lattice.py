import itertools
import math

import numpy as np
import pytest

from sievekit.enumeration import (babai_nearest_plane, babai_rounding, enumerate_cvp, enumerate_short,
                                  enumerate_svp)
from sievekit.errors import EmptyResultError, FormatError, InputError, OracleCapError, SingularBasisError
from sievekit.lattice import (Basis, KleinSampler, LatticeVector, Lambda1Source, default_spread, format_basis,
                              gaussian_heuristic_lambda1, gram_schmidt, parse_basis, parse_targets,
                              random_lattice, sample_lattice_vector, sign_canonical)


def identity(d):
    return Basis(np.eye(d, dtype=np.int64))


class TestBasis:
    def test_rejects_singular(self):
        with pytest.raises(SingularBasisError):
            Basis(np.array([[1, 2], [2, 4]]))

    def test_rejects_non_square_and_tiny(self):
        with pytest.raises(InputError):
            Basis(np.ones((2, 3), dtype=int))
        with pytest.raises(InputError):
            Basis(np.array([[1]]))

    def test_rejects_fractional_entries(self):
        with pytest.raises(InputError):
            Basis(np.array([[1.5, 0], [0, 1]]))

    def test_fingerprint_depends_on_row_order(self):
        a = Basis(np.array([[1, 0], [1, 1]]))
        b = Basis(np.array([[1, 1], [1, 0]]))
        assert a.fingerprint == Basis(np.array([[1, 0], [1, 1]])).fingerprint
        assert a.fingerprint != b.fingerprint

    def test_text_round_trip(self):
        b = random_lattice(7, 3)
        assert parse_basis(format_basis(b)) == b

    def test_parse_skips_comments(self):
        b = parse_basis("# a comment\n2\n1 0\n# another\n0 3\n")
        assert b.determinant == 3

    @pytest.mark.parametrize("text", ["", "2\n1 0\n", "2\n1 0\n0 x\n", "3\n1 0\n0 1\n"])
    def test_parse_errors(self, text):
        with pytest.raises(FormatError):
            parse_basis(text)

    def test_targets_parse(self):
        ts = parse_targets("0.5 1\n# c\n2 -3\n", 2)
        assert len(ts) == 2 and ts[1][1] == -3
        with pytest.raises(InputError):
            parse_targets("1 2 3\n", 2)
        with pytest.raises(InputError):
            parse_targets("1 nan\n", 2)


class TestLatticeVector:
    def test_coords_from_coeffs(self):
        b = Basis(np.array([[2, 0], [1, 2]]))
        v = LatticeVector.from_coeffs(b, [1, -1])
        assert np.array_equal(v.coords, [1, -2])
        assert v.norm == pytest.approx(math.sqrt(5), rel=1e-12)

    def test_coeff_length_checked(self):
        with pytest.raises(InputError):
            LatticeVector.from_coeffs(identity(3), [1, 2])

    def test_sign_canonical(self):
        c = np.array([[0, -1, 2], [0, 0, 0], [3, -1, 0]])
        assert np.array_equal(sign_canonical(c), [[0, 1, -2], [0, 0, 0], [3, -1, 0]])


class TestGramSchmidt:
    def test_identity_is_unchanged(self):
        g = gram_schmidt(identity(2))
        assert np.allclose(g.bstar, np.eye(2))
        assert g.mu[1, 0] == 0

    def test_hand_example(self):
        g = gram_schmidt(Basis(np.array([[1, 0], [1, 1]])))
        assert np.allclose(g.bstar[1], [0, 1])
        assert g.mu[1, 0] == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_orthogonality_and_determinant(self, seed):
        b = random_lattice(12, seed)
        g = gram_schmidt(b)
        gram = g.bstar @ g.bstar.T
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) <= 1e-9 * np.max(np.diag(gram))
        assert np.prod(g.norms) == pytest.approx(abs(b.determinant), rel=1e-9)
        # b_i = b*_i + sum_j mu_ij b*_j
        assert np.allclose(g.mu @ g.bstar, b.float_rows)

    def test_singular_matrix(self):
        with pytest.raises(SingularBasisError):
            gram_schmidt(np.array([[1.0, 2.0], [2.0, 4.0]]))


class TestGaussianHeuristic:
    def test_identity_d100(self):
        est = gaussian_heuristic_lambda1(identity(100))
        assert est.source is Lambda1Source.GAUSSIAN_HEURISTIC
        assert est.value == pytest.approx(math.sqrt(100 / (2 * math.pi * math.e)), rel=1e-12)
        assert est.value == pytest.approx(2.4203, abs=1e-3)

    def test_identity_d2(self):
        assert gaussian_heuristic_lambda1(identity(2)).value == pytest.approx(0.3422, abs=1e-4)

    def test_homogeneity(self):
        b = random_lattice(10, 1)
        assert gaussian_heuristic_lambda1(b.scaled(7)).value == pytest.approx(
            7 * gaussian_heuristic_lambda1(b).value, rel=1e-12)


class TestRandomLattice:
    def test_reproducible(self):
        assert random_lattice(20, 5).fingerprint == random_lattice(20, 5).fingerprint
        assert random_lattice(20, 5).fingerprint != random_lattice(20, 6).fingerprint

    def test_shape_and_determinant(self):
        b = random_lattice(15, 2)
        p = int(b.rows[0, 0])
        assert 2**10 <= p < 2**11
        assert all(p % k for k in range(2, int(p**0.5) + 1))
        assert b.determinant == p
        assert np.array_equal(b.rows[1:, 1:], np.eye(14, dtype=np.int64))
        assert np.all((b.rows[1:, 0] >= 0) & (b.rows[1:, 0] < p))

    @pytest.mark.parametrize("d", [1, 61])
    def test_dimension_range(self, d):
        with pytest.raises(InputError):
            random_lattice(d, 0)

    def test_lambda1_near_gaussian_heuristic(self):
        for seed in range(10):
            b = random_lattice(20, seed)
            ratio = enumerate_svp(b).norm / gaussian_heuristic_lambda1(b).value
            assert 0.7 <= ratio <= 1.3


class TestSampler:
    def test_determinism_and_consistency(self):
        b = random_lattice(12, 0)
        v1 = sample_lattice_vector(b, 42)
        v2 = sample_lattice_vector(b, 42)
        assert v1 == v2
        assert np.allclose(b.coords(v1.coeffs), v1.coords)

    def test_mean_norm_tracks_spread(self):
        b = random_lattice(20, 1)
        spread = default_spread(b)
        rng = np.random.default_rng(0)
        c = KleinSampler(b, spread).sample_coeffs(rng, 1000)
        mean = np.linalg.norm(b.coords(c), axis=1).mean()
        assert spread / 3 <= mean <= 3 * spread

    def test_centre_shifts_samples(self):
        b = identity(4)
        t = np.array([100.0, -50.0, 3.0, 0.0])
        c = KleinSampler(b, 1.0).sample_coeffs(np.random.default_rng(1), 200, center=t)
        assert np.linalg.norm(b.coords(c).mean(axis=0) - t) < 1.0


class TestEnumeration:
    def test_identity_svp(self):
        v = enumerate_svp(identity(5))
        assert v.norm == 1
        # tie-break: lexicographically smallest canonical coefficient vector
        assert np.array_equal(v.coeffs, [0, 0, 0, 0, 1])

    def test_small_basis_svp_norm(self):
        assert enumerate_svp(Basis(np.array([[2, 0], [1, 2]]))).norm == pytest.approx(2.0)

    def test_bound_below_lambda1(self):
        with pytest.raises(EmptyResultError):
            enumerate_svp(identity(3), bound=0.5)

    def test_oracle_cap(self):
        with pytest.raises(OracleCapError):
            enumerate_svp(random_lattice(41, 0))

    def test_cvp_rounding_case(self):
        s = enumerate_cvp(identity(2), [0.4, 0.7])
        assert np.array_equal(s.coords, [0, 1])

    def test_cvp_lattice_point(self):
        b = random_lattice(10, 3)
        w = LatticeVector.from_coeffs(b, np.arange(10) - 4)
        s = enumerate_cvp(b, w.coords)
        assert s.distance_to(w.coords) == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_cvp_beats_babai(self, seed):
        b = random_lattice(10, seed)
        t = np.random.default_rng(seed).normal(scale=30, size=10)
        d = enumerate_cvp(b, t).distance_to(t)
        assert d <= babai_rounding(b, t).distance_to(t) + 1e-9
        assert d <= babai_nearest_plane(b, t).distance_to(t) + 1e-9

    def test_cvp_exact_against_box_search(self):
        rng = np.random.default_rng(11)
        for trial in range(100):
            d = int(rng.integers(2, 5))
            rows = rng.integers(-4, 5, size=(d, d))
            if round(np.linalg.det(rows)) == 0:
                continue
            b = Basis(rows)
            t = rng.normal(scale=3, size=d)
            best = enumerate_cvp(b, t).distance_to(t)
            centre = babai_rounding(b, t).coeffs
            for off in itertools.product(range(-3, 4), repeat=d):
                c = centre + np.array(off)
                assert np.linalg.norm(b.coords(c) - t) >= best - 1e-9

    def test_enumerate_short_counts(self):
        xs = enumerate_short(identity(3), 1.0)
        assert len(xs) == 6
        xs = enumerate_short(identity(2), math.sqrt(2))
        assert len(xs) == 8
