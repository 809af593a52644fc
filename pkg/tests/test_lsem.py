import numpy as np
import pytest

from mida import (
    Dag,
    Dataset,
    InvalidDataError,
    InvalidSpecError,
    LsemSpec,
    adjustment_effect,
    covariance_of,
    generate_random_lsem,
    mediation_effect,
    sample,
    standardize_spec,
    total_effect,
)

from helpers import random_weighted_spec


def path_example_spec():
    """Six-node weighted DAG whose treatment-to-response effect is 1.49."""
    edges = {(1, 3): 1.1, (3, 6): 0.9, (3, 2): 0.6, (2, 6): 0.4,
             (3, 4): 0.8, (4, 2): 0.5, (1, 4): 0.3}
    w = np.zeros((6, 6))
    for (i, j), v in edges.items():
        w[i - 1, j - 1] = v
    return LsemSpec(dag=Dag(6, frozenset(edges)), weights=w,
                    error_variances=np.ones(6))


class TestSpecValidation:
    def test_sparsity_mismatch(self):
        w = np.zeros((3, 3))
        w[0, 1] = 0.7
        with pytest.raises(InvalidSpecError):
            LsemSpec(dag=Dag(3, frozenset({(1, 2), (2, 3)})), weights=w,
                     error_variances=np.ones(3))

    def test_nonpositive_variance(self):
        w = np.zeros((3, 3))
        with pytest.raises(InvalidSpecError):
            LsemSpec(dag=Dag(3, frozenset()), weights=w,
                     error_variances=np.array([1.0, 0.0, 1.0]))

    def test_json_round_trip(self):
        spec = path_example_spec()
        again = LsemSpec.from_json(spec.to_json())
        assert again.dag == spec.dag
        assert np.array_equal(again.weights, spec.weights)
        assert np.array_equal(again.error_variances, spec.error_variances)


class TestCovariance:
    def test_identity(self):
        spec = LsemSpec(dag=Dag(3, frozenset()), weights=np.zeros((3, 3)),
                        error_variances=np.ones(3))
        assert np.allclose(covariance_of(spec), np.eye(3))

    def test_two_node_formula(self):
        b = 0.8
        w = np.zeros((2, 2))
        w[0, 1] = b
        spec = LsemSpec(dag=Dag(2, frozenset({(1, 2)})), weights=w,
                        error_variances=np.ones(2))
        assert np.allclose(covariance_of(spec), [[1, b], [b, 1 + b * b]])

    def test_monte_carlo_oracle(self):
        spec = path_example_spec()
        sigma = covariance_of(spec)
        data = sample(spec, 10**6, np.random.default_rng(5))
        emp = np.cov(data.matrix.T, bias=True)
        assert np.max(np.abs(emp - sigma)) < 0.01


class TestSampling:
    def test_determinism(self):
        spec = path_example_spec()
        a = sample(spec, 100, np.random.default_rng(9)).matrix
        b = sample(spec, 100, np.random.default_rng(9)).matrix
        assert np.array_equal(a, b)

    def test_column_means_near_zero(self):
        spec = LsemSpec(dag=Dag(4, frozenset()), weights=np.zeros((4, 4)),
                        error_variances=np.ones(4))
        n = 4000
        data = sample(spec, n, np.random.default_rng(2))
        assert np.max(np.abs(data.matrix.mean(axis=0))) < 4 / np.sqrt(n)

    def test_sample_covariance_converges(self):
        rng = np.random.default_rng(7)
        spec = random_weighted_spec(rng, 6, standardized=True)
        sigma = covariance_of(spec)
        for n, tol in ((10**3, 0.2), (10**4, 0.063), (10**5, 0.02)):
            data = sample(spec, n, np.random.default_rng((7, n)))
            emp = np.cov(data.matrix.T, bias=True)
            assert np.max(np.abs(emp - sigma)) < tol

    @pytest.mark.parametrize("family", ["uniform-centered", "rademacher-scaled"])
    def test_error_families_match_variances(self, family):
        rng = np.random.default_rng(8)
        p, n = 4, 200000
        spec = LsemSpec(dag=Dag(p, frozenset()), weights=np.zeros((p, p)),
                        error_variances=rng.uniform(0.5, 1.0, p),
                        error_family=family)
        data = sample(spec, n, rng)
        assert np.max(np.abs(data.matrix.var(axis=0) - spec.error_variances)) < 0.02
        assert np.max(np.abs(data.matrix.mean(axis=0))) < 0.02

    def test_nonzero_means(self):
        spec = LsemSpec(dag=Dag(3, frozenset({(1, 2)})),
                        weights=np.pad([[0.0, 0.5], [0.0, 0.0]], ((0, 1), (0, 1))),
                        error_variances=np.ones(3),
                        means=np.array([1.0, -2.0, 3.0]))
        data = sample(spec, 50000, np.random.default_rng(3))
        assert np.max(np.abs(data.matrix.mean(axis=0) - spec.means)) < 0.05


class TestTotalEffect:
    def test_path_example(self):
        spec = path_example_spec()
        assert total_effect(spec, 1, 6) == pytest.approx(1.49, abs=1e-12)
        assert total_effect(spec, 1, 6, {2}) == pytest.approx(0.99, abs=1e-12)
        assert total_effect(spec, 2, 6, {1}) == pytest.approx(0.4, abs=1e-12)

    def test_no_path_gives_zero(self):
        spec = path_example_spec()
        assert total_effect(spec, 6, 1) == 0.0
        assert total_effect(spec, 5, 6) == 0.0

    def test_methods_agree(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            spec = random_weighted_spec(rng, int(rng.integers(4, 11)))
            nodes = list(range(1, spec.p + 1))
            src, dst = rng.choice(nodes, 2, replace=False)
            held = {int(x) for x in rng.choice(nodes, 2, replace=False)} - {int(src), int(dst)}
            a = total_effect(spec, int(src), int(dst), held, method="linalg")
            b = total_effect(spec, int(src), int(dst), held, method="paths")
            assert a == pytest.approx(b, abs=1e-10)


class TestMediation:
    def test_chain_product(self):
        w = np.zeros((3, 3))
        w[0, 1], w[1, 2] = 0.7, -0.6
        spec = LsemSpec(dag=Dag(3, frozenset({(1, 2), (2, 3)})), weights=w,
                        error_variances=np.ones(3))
        assert mediation_effect(spec, 2) == pytest.approx(0.7 * -0.6, abs=1e-12)

    def test_unreachable_mediator(self):
        w = np.zeros((3, 3))
        w[1, 2] = 0.5
        spec = LsemSpec(dag=Dag(3, frozenset({(2, 3)})), weights=w,
                        error_variances=np.ones(3))
        assert mediation_effect(spec, 2) == 0.0

    def test_intervention_difference_identity(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            spec = random_weighted_spec(rng, int(rng.integers(4, 12)))
            p = spec.p
            theta_1p = total_effect(spec, 1, p)
            for j in range(2, p):
                lhs = mediation_effect(spec, j)
                rhs = theta_1p - total_effect(spec, 1, p, {j})
                assert lhs == pytest.approx(rhs, abs=1e-10)


class TestAdjustment:
    def test_identity_sigma(self):
        assert adjustment_effect(np.eye(4), 1, 3) == 0.0

    def test_two_node(self):
        b = 0.8
        sigma = np.array([[1, b], [b, 1 + b * b]])
        assert adjustment_effect(sigma, 1, 2) == pytest.approx(b, abs=1e-12)

    def test_matches_path_method_with_parent_adjustment(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            spec = random_weighted_spec(rng, int(rng.integers(4, 12)))
            sigma = covariance_of(spec)
            for i in range(1, spec.p + 1):
                pa = spec.dag.parents(i)
                for k in range(1, spec.p + 1):
                    if k == i or k in pa:
                        continue
                    theta = total_effect(spec, i, k)
                    beta = adjustment_effect(sigma, i, k, pa)
                    assert beta == pytest.approx(theta, abs=1e-9)

    def test_parent_or_treatment_equality(self):
        # Needs the structural setup (treatment has no parents): then X1 is a
        # non-descendant of every mediator, so conditioning on the mediator's
        # parents makes X1 irrelevant whenever it is not itself a parent.
        rng = np.random.default_rng(23)
        checked = 0
        for _ in range(15):
            spec = generate_random_lsem(10, 2.0, rng=rng, standardize=False)
            sigma = covariance_of(spec)
            p = spec.p
            for j in range(2, p):
                pa = spec.dag.parents(j)
                if 1 in pa:
                    continue
                a = adjustment_effect(sigma, j, p, pa)
                b = adjustment_effect(sigma, j, p, pa | {1})
                assert b == pytest.approx(a, abs=1e-9)
                checked += 1
        assert checked > 20


class TestGeneration:
    def test_structural_zeros_and_weight_ranges(self):
        rng = np.random.default_rng(29)
        raw = generate_random_lsem(30, 3.0, rng=rng, standardize=False)
        assert np.all(raw.weights[:, 0] == 0.0)       # nothing points at X1
        assert np.all(raw.weights[-1, :] == 0.0)      # Xp has no children
        nz = np.abs(raw.weights[raw.weights != 0.0])
        assert np.all((nz >= 0.5) & (nz <= 1.0))
        assert np.all((raw.error_variances >= 0.5) & (raw.error_variances <= 1.0))

    def test_standardized_unit_variances(self):
        rng = np.random.default_rng(31)
        for _ in range(5):
            spec = generate_random_lsem(20, 3.0, rng=rng)
            sigma = covariance_of(spec)
            assert np.max(np.abs(np.diag(sigma) - 1.0)) < 1e-10

    def test_expected_mediator_edge_count(self):
        # 250 mediators at degree 3 should average 375 mediator edges
        rng = np.random.default_rng(37)
        counts = []
        for _ in range(200):
            spec = generate_random_lsem(252, 3.0, rng=rng, standardize=False)
            med_edges = [e for e in spec.dag.edges if 2 <= e[0] <= 251 and 2 <= e[1] <= 251]
            counts.append(len(med_edges))
        assert abs(np.mean(counts) - 375.0) < 6.0

    def test_precondition(self):
        with pytest.raises(InvalidSpecError):
            generate_random_lsem(5, 2.0, rng=np.random.default_rng(0))

    def test_standardize_rescales_effects(self):
        # standardization rescales variables, so effects scale by sd ratios
        rng = np.random.default_rng(41)
        raw = random_weighted_spec(rng, 6)
        sigma_raw = covariance_of(raw)
        spec = standardize_spec(raw)
        s = np.sqrt(np.diag(sigma_raw))
        theta_raw = total_effect(raw, 1, 6)
        theta_std = total_effect(spec, 1, 6)
        assert theta_std == pytest.approx(theta_raw * s[0] / s[5], abs=1e-10)


class TestDataset:
    def test_csv_round_trip(self):
        rng = np.random.default_rng(43)
        data = Dataset(rng.standard_normal((5, 3)), labels=("X1", "X2", "X3"))
        again = Dataset.from_csv(data.to_csv())
        assert again.labels == data.labels
        assert np.array_equal(again.matrix, data.matrix)

    def test_validation(self):
        with pytest.raises(InvalidDataError):
            Dataset(np.zeros((1, 3)))
        with pytest.raises(InvalidDataError):
            Dataset(np.zeros((5, 2)))
        bad = np.zeros((3, 3))
        bad[0, 0] = np.nan
        with pytest.raises(InvalidDataError):
            Dataset(bad)
