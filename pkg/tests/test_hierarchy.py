import json

import numpy as np
import pytest

from multivaw import linalg
from multivaw.errors import (
    CyclicHierarchy,
    DimensionMismatch,
    DuplicateNode,
    RankDeficient,
)
from multivaw.hierarchy import (
    HierarchySpec,
    MetaVAW,
    SummingMatrix,
    build_summing_matrix,
    coherence_check,
    metavaw_equivalence_audit,
    ohf_feature_matrix,
)
from multivaw.learners import (
    VAW,
    KroneckerConstant,
    KroneckerMultiVAW,
    MultiVAW,
    ScaledIdentity,
)


from tests.helpers import TWO_LEVEL_S, two_level_tree


class TestHierarchySpec:
    def test_bottom_and_aggregated_ordering(self):
        spec = two_level_tree()
        assert spec.bottom == ("l1", "l2", "l3", "r1", "r2")
        assert spec.aggregated == ("total", "left", "right")
        assert spec.node_order == ("total", "left", "right", "l1", "l2", "l3", "r1", "r2")

    def test_duplicate_node_rejected(self):
        with pytest.raises(DuplicateNode):
            HierarchySpec(["a", "a"])

    def test_two_parents_rejected(self):
        with pytest.raises(DuplicateNode):
            HierarchySpec(["a", "b", "c"], [["a", "c"], ["b", "c"]])

    def test_cycle_rejected(self):
        with pytest.raises(CyclicHierarchy):
            HierarchySpec(["a", "b"], [["a", "b"], ["b", "a"]])

    def test_self_loop_rejected(self):
        with pytest.raises(CyclicHierarchy):
            HierarchySpec(["a"], [["a", "a"]])

    def test_unknown_node_in_edge_rejected(self):
        with pytest.raises(ValueError):
            HierarchySpec(["a"], [["a", "zz"]])

    def test_json_round_trip(self, tmp_path):
        spec = two_level_tree()
        path = tmp_path / "tree.json"
        path.write_text(json.dumps(spec.to_dict()), encoding="utf-8")
        loaded = HierarchySpec.from_json(path)
        assert loaded.nodes == spec.nodes
        assert loaded.children == spec.children
        assert loaded.bottom == spec.bottom


class TestBuildSummingMatrix:
    def test_single_node(self):
        got = build_summing_matrix(HierarchySpec(["only"]))
        assert (got.n, got.d) == (1, 1)
        np.testing.assert_allclose(got.S, [[1.0]], atol=0)

    def test_root_with_three_leaves(self):
        spec = HierarchySpec(["r", "a", "b", "c"], [["r", "a"], ["r", "b"], ["r", "c"]])
        got = build_summing_matrix(spec)
        want = np.vstack([np.ones((1, 3)), np.eye(3)])
        np.testing.assert_allclose(got.S, want, atol=0)

    def test_two_level_tree_exact_matrix(self):
        got = build_summing_matrix(two_level_tree())
        assert (got.n, got.d) == (8, 5)
        np.testing.assert_allclose(got.S, TWO_LEVEL_S, atol=0)
        assert got.labels == two_level_tree().node_order

    def test_identity_block_and_spd_gram(self):
        got = build_summing_matrix(two_level_tree())
        np.testing.assert_allclose(got.S[-got.d :], np.eye(got.d), atol=0)
        linalg.spd_cholesky(got.S.T @ got.S)  # full column rank

    def test_projection_fixes_columns(self):
        S = build_summing_matrix(two_level_tree()).S
        P = linalg.projection_onto_image(S)
        assert np.max(np.abs(P @ S - S)) <= 1e-10


class TestCoherenceCheck:
    def test_image_vector_is_coherent(self):
        rng = np.random.default_rng(0)
        summing = build_summing_matrix(two_level_tree())
        y = summing.S @ rng.standard_normal(summing.d)
        result = coherence_check(summing, y)
        assert result.coherent
        assert result.residual <= 1e-10 * (1.0 + np.linalg.norm(y))

    def test_root_only_vector_is_incoherent(self):
        summing = build_summing_matrix(two_level_tree())
        y = np.zeros(summing.n)
        y[0] = 1.0
        result = coherence_check(summing, y)
        assert not result.coherent
        assert result.residual > 0.1

    def test_zero_vector_is_coherent(self):
        summing = build_summing_matrix(two_level_tree())
        assert coherence_check(summing, np.zeros(summing.n)).coherent

    def test_dimension_mismatch(self):
        summing = build_summing_matrix(two_level_tree())
        with pytest.raises(DimensionMismatch):
            coherence_check(summing, np.zeros(summing.n + 1))


class TestOhfFeatureMatrix:
    def test_identity_case(self):
        got = ohf_feature_matrix(np.eye(2), np.array([1.0]))
        np.testing.assert_allclose(got, np.eye(2), atol=0)

    def test_hand_case(self):
        S = np.array([[1.0], [1.0]])
        X = ohf_feature_matrix(S, np.array([1.0, 2.0]))
        np.testing.assert_allclose(X, [[1.0, 2.0], [1.0, 2.0]], atol=0)
        theta = np.array([3.0, 4.0])  # vec of the 1x2 parameter matrix
        lhs = X @ theta
        rhs = S @ (np.array([[3.0, 4.0]]) @ np.array([1.0, 2.0]))
        np.testing.assert_allclose(lhs, [11.0, 11.0], atol=0)
        np.testing.assert_allclose(lhs, rhs, atol=0)

    def test_vec_trick_identity_random_sweep(self):
        rng = np.random.default_rng(1)
        m, n, d = 3, 4, 2
        for _ in range(100):
            S = rng.standard_normal((n, d))
            x = rng.standard_normal(m)
            Theta = rng.standard_normal((d, m))
            lhs = ohf_feature_matrix(S, x) @ linalg.vec(Theta)
            rhs = S @ Theta @ x
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


class TestMetaVAW:
    def test_first_step_predicts_zero(self):
        summing = build_summing_matrix(two_level_tree())
        lr = MetaVAW(summing, feature_dim=3, lam=1.0)
        np.testing.assert_allclose(lr.receive_features(np.ones(3)), np.zeros(8), atol=0)

    def test_scalar_case_agrees_with_vaw(self):
        meta = MetaVAW(np.array([[1.0]]), feature_dim=1, lam=1.0)
        vaw = VAW(1, 1.0)
        meta.receive_features([1.0])
        vaw.receive_features([1.0])
        meta.receive_response([1.0])
        vaw.receive_response(1.0)
        pred = meta.receive_features([1.0])
        np.testing.assert_allclose(pred, [1.0 / 3.0], rtol=1e-12)
        assert vaw.receive_features([1.0]) == pytest.approx(pred[0], rel=1e-12)

    def test_predictions_always_coherent(self):
        rng = np.random.default_rng(2)
        summing = build_summing_matrix(two_level_tree())
        lr = MetaVAW(summing, feature_dim=4, lam=0.5)
        for _ in range(40):
            x = rng.standard_normal(4)
            pred = lr.receive_features(x)
            gap = np.linalg.norm(pred - lr.projection @ pred)
            assert gap <= 1e-10
            lr.receive_response(rng.standard_normal(summing.n))  # incoherent is fine

    def test_state_invariants(self):
        rng = np.random.default_rng(3)
        summing = build_summing_matrix(two_level_tree())
        lr = MetaVAW(summing, feature_dim=3, lam=2.0)
        P = lr.projection
        assert np.max(np.abs(P @ P - P)) <= 1e-10
        assert np.max(np.abs(P - P.T)) <= 1e-10
        gram = 2.0 * np.eye(3)
        cross = np.zeros((summing.n, 3))
        for _ in range(25):
            x = rng.standard_normal(3)
            y = rng.standard_normal(summing.n)
            lr.receive_features(x)
            lr.receive_response(y)
            gram += np.outer(x, x)
            cross += np.outer(y, x)
        assert np.linalg.norm(lr.gram_inv @ gram - np.eye(3)) <= 1e-8
        np.testing.assert_allclose(lr.cross, cross, rtol=1e-12, atol=1e-12)

    def test_rejects_rank_deficient_summing_matrix(self):
        with pytest.raises(RankDeficient):
            MetaVAW(np.array([[1.0, 1.0], [1.0, 1.0]]), feature_dim=2, lam=1.0)


class TestEquivalenceAudit:
    def test_empty_stream(self):
        summing = build_summing_matrix(two_level_tree())
        assert metavaw_equivalence_audit(summing, 1.0, []) == 0.0

    def test_single_step_both_predict_zero(self):
        summing = build_summing_matrix(two_level_tree())
        stream = [(np.ones(3), np.ones(summing.n))]
        assert metavaw_equivalence_audit(summing, 1.0, stream) <= 1e-12

    @pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
    def test_random_streams(self, lam):
        rng = np.random.default_rng(4)
        summing = build_summing_matrix(two_level_tree())
        stream = [
            (rng.standard_normal(4), rng.standard_normal(summing.n)) for _ in range(60)
        ]
        max_y = max(np.linalg.norm(y) for _, y in stream)
        deviation = metavaw_equivalence_audit(summing, lam, stream)
        assert deviation <= 1e-7 * (1.0 + max_y)


class TestKroneckerPathOnHierarchy:
    def test_closed_form_with_summing_matrix_matches_vectorized(self):
        # the Kronecker learner with V = S and left factor lam*I reproduces
        # the vectorized learner under the matched product regularization
        rng = np.random.default_rng(6)
        summing = build_summing_matrix(two_level_tree())
        m, lam = 3, 0.7
        kron_lr = KroneckerMultiVAW(summing.S, lam * np.eye(m))
        gram = summing.S.T @ summing.S
        vec_lr = MultiVAW(summing.d * m, KroneckerConstant(lam * np.eye(m), gram))
        for _ in range(40):
            x = rng.standard_normal(m)
            y = rng.standard_normal(summing.n)
            pred_kron = kron_lr.receive_features(x)
            X = ohf_feature_matrix(summing, x)
            pred_vec = X @ vec_lr.receive_features(X)
            assert np.linalg.norm(pred_kron - pred_vec) <= 1e-8 * (
                1.0 + np.linalg.norm(pred_vec)
            )
            kron_lr.receive_response(y)
            vec_lr.receive_response(y)


class TestTimeVaryingConstraints:
    def test_general_path_accepts_per_step_summing_matrices(self):
        # node-dropout stream: odd steps observe only a row subset
        rng = np.random.default_rng(5)
        summing = build_summing_matrix(two_level_tree())
        m = 3
        lr = MultiVAW(summing.d * m, ScaledIdentity(1.0))
        keep = np.arange(summing.n - 2)
        for t in range(20):
            S_t = summing.S if t % 2 == 0 else summing.S[keep]
            x = rng.standard_normal(m)
            X = ohf_feature_matrix(S_t, x)
            theta = lr.receive_features(X)
            assert np.all(np.isfinite(theta))
            lr.receive_response(rng.standard_normal(X.shape[0]))
        assert lr.t == 20


class TestSummingMatrixWrapper:
    def test_from_matrix_accepts_grouped_structures(self):
        # crossed structure: two overlapping aggregations of three series
        S = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 0.0],
                      [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        wrapped = SummingMatrix.from_matrix(S, labels=["g1", "g2", "a", "b", "c"])
        assert (wrapped.n, wrapped.d) == (5, 3)

    def test_label_count_checked(self):
        with pytest.raises(DimensionMismatch):
            SummingMatrix.from_matrix(np.eye(2), labels=["a"])
