import io

import numpy as np
import pytest

from gfdetect.errors import InvalidParameterError
from gfdetect.model import derive_rng
from gfdetect.pilots import (
    PilotDictionary,
    gen_gaussian_dictionary,
    khatri_rao_coherence,
    khatri_rao_dictionary,
    load_csv,
    max_identifiable_support,
    min_pilot_length,
    mutual_coherence,
    save_csv,
    welch_bound,
)


class TestDictionaryGeneration:
    def test_unit_column_norms(self):
        S = gen_gaussian_dictionary(20, 64, derive_rng(0))
        norms = np.linalg.norm(S.entries, axis=0)
        assert np.max(np.abs(norms - 1.0)) < 1e-10

    def test_square_random_draw_not_orthonormal(self):
        S = gen_gaussian_dictionary(20, 20, derive_rng(1))
        assert S.coherence > 0.0

    def test_coherence_never_below_welch_floor(self):
        floor = welch_bound(64, 20)
        for seed in range(25):
            S = gen_gaussian_dictionary(20, 64, derive_rng(seed))
            assert floor - 1e-12 <= S.coherence < 1.0

    def test_normalization_idempotent(self):
        S = gen_gaussian_dictionary(6, 9, derive_rng(2))
        again = PilotDictionary.from_matrix(S.entries)
        assert np.allclose(S.entries, again.entries)

    def test_rejects_empty(self):
        with pytest.raises(InvalidParameterError):
            gen_gaussian_dictionary(0, 4, derive_rng(0))


class TestMutualCoherence:
    def test_orthonormal_zero(self):
        assert mutual_coherence(np.eye(5)) == 0.0

    def test_duplicate_column_one(self):
        S = np.eye(3)[:, [0, 0, 1]]
        assert mutual_coherence(S) == pytest.approx(1.0)

    def test_two_column_example(self):
        S = np.array([[1.0, 1 / np.sqrt(2)], [0.0, 1 / np.sqrt(2)]])
        assert mutual_coherence(S) == pytest.approx(0.70711, abs=1e-5)

    def test_single_column_rejected(self):
        with pytest.raises(InvalidParameterError):
            mutual_coherence(np.ones((4, 1)))


class TestKhatriRao:
    def test_trivial_endpoints(self):
        assert khatri_rao_coherence(0.0) == 0.0
        assert khatri_rao_coherence(1.0) == 1.0

    def test_squares_the_coherence_on_example(self):
        S = np.array([[1.0, 1 / np.sqrt(2)], [0.0, 1 / np.sqrt(2)]])
        mu = mutual_coherence(S)
        lifted = khatri_rao_dictionary(S)
        assert khatri_rao_coherence(mu) == pytest.approx(0.5, abs=1e-5)
        assert mutual_coherence(lifted) == pytest.approx(mu**2, abs=1e-12)

    def test_matches_explicit_lift_exhaustively(self):
        # pairwise inner products of the lifted dictionary square the base ones
        for seed, (L, K) in enumerate([(4, 6), (6, 10), (8, 12)]):
            S = gen_gaussian_dictionary(L, K, derive_rng(seed, 1))
            lifted = khatri_rao_dictionary(S)
            assert mutual_coherence(lifted) == pytest.approx(S.coherence**2, abs=1e-10)

    def test_vectorization_identity(self):
        rng = derive_rng(3)
        for _ in range(20):
            L = int(rng.integers(2, 7))
            K = int(rng.integers(2, 11))
            S = gen_gaussian_dictionary(L, K, rng)
            r = rng.random(K)
            lhs = khatri_rao_dictionary(S) @ r
            rhs = (S.entries @ np.diag(r) @ S.entries.conj().T).ravel(order="F")
            assert np.linalg.norm(lhs - rhs) < 1e-10

    def test_range_validation(self):
        with pytest.raises(InvalidParameterError):
            khatri_rao_coherence(1.5)


class TestWelchBound:
    def test_reference_value(self):
        assert welch_bound(64, 20) == pytest.approx(0.18687, abs=1e-5)

    def test_square_case_zero(self):
        assert welch_bound(20, 20) == 0.0

    def test_two_columns_one_dim(self):
        assert welch_bound(2, 1) == pytest.approx(1.0)


class TestSupportLimit:
    def test_fully_coherent(self):
        assert max_identifiable_support(1.0) == 0

    def test_half(self):
        assert max_identifiable_support(0.5) == 2

    def test_welch_floor_case(self):
        assert max_identifiable_support(0.18687) == 14

    def test_non_increasing_in_mu(self):
        values = [max_identifiable_support(mu) for mu in np.linspace(0.05, 1.0, 60)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_rejects_zero(self):
        with pytest.raises(InvalidParameterError):
            max_identifiable_support(0.0)


class TestMinPilotLength:
    def test_reference_values(self):
        assert min_pilot_length(64, 10) == 15
        assert min_pilot_length(64, 1) == 2

    def test_never_exceeds_node_count(self):
        for K in (2, 8, 64, 101):
            for D in range(1, K + 1):
                assert min_pilot_length(K, D) <= K

    def test_strict_inequality_holds(self):
        for K in (5, 16, 64):
            for D in range(1, K + 1):
                L = min_pilot_length(K, D)
                assert L * (K + 2 * D - 2) > 2 * K * D - K
                assert (L - 1) * (K + 2 * D - 2) <= 2 * K * D - K


class TestCsvRoundTrip:
    def test_round_trip_preserves_entries(self):
        S = gen_gaussian_dictionary(5, 7, derive_rng(4))
        buf = io.StringIO()
        save_csv(S, buf)
        loaded = load_csv(io.StringIO(buf.getvalue()))
        assert loaded.L == 5 and loaded.K == 7
        assert np.max(np.abs(loaded.entries - S.entries)) < 1e-12
        assert loaded.kind == "user-supplied"

    def test_header_carries_dimensions(self):
        S = gen_gaussian_dictionary(2, 3, derive_rng(5))
        buf = io.StringIO()
        save_csv(S, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "L,K"
        assert lines[1] == "2,3"
        assert len(lines) == 2 + 2  # header rows + L matrix rows

    def test_malformed_header_rejected(self):
        with pytest.raises(InvalidParameterError):
            load_csv(io.StringIO("bogus\n1,2\n"))
