"""
Tests for the min-weight metric, Ferrari-Canny ε, certificates and the ordering check
"""

import numpy as np
import pytest

import src.metrics as metrics_module
from src.errors import CertificateViolationError, DegenerateBasisError, NotForceClosureError
from src.metrics import (
    CertificateKind,
    MinWeightStatus,
    bound_check,
    certify_ball,
    certify_containment,
    ferrari_canny,
    grasp_metrics,
    lemma_pair,
    min_weight,
    min_weight_dual,
    min_weight_gradient,
)
from src.oracle import make_rng, perturb_in_ball, perturb_in_hull, random_force_closure_set
from src.wrench import WrenchSet
from tests.helpers.grasp_factory import cross_polytope


INV_SQRT6 = 1.0 / np.sqrt(6.0)


class TestCrossPolytope:
    """Closed-form values on {±e_i}"""

    def test_min_weight(self, cross_polytope_set):
        result = min_weight(cross_polytope_set)
        assert result.status is MinWeightStatus.OPTIMAL
        assert result.l_star == pytest.approx(1.0 / 12.0, abs=1e-9)
        np.testing.assert_allclose(result.alpha, np.full(12, 1.0 / 12.0), atol=1e-9)

    def test_ferrari_canny(self, cross_polytope_set):
        assert ferrari_canny(cross_polytope_set) == pytest.approx(INV_SQRT6, abs=1e-9)

    def test_grasp_metrics(self, cross_polytope_set):
        m = grasp_metrics(cross_polytope_set)
        assert m.force_closure
        assert m.n_w == 12
        assert m.l_star_normalized == pytest.approx(1.0, abs=1e-9)
        assert m.l_star_over_nw == pytest.approx(1.0 / 144.0, abs=1e-9)
        assert m.epsilon == pytest.approx(INV_SQRT6, abs=1e-9)
        assert m.delta == pytest.approx(INV_SQRT6, abs=1e-9)
        assert m.bound_holds is True
        assert not m.marginal
        assert m.warnings == []

    def test_scaling(self):
        # ℓ* is scale free, ε and δ scale linearly
        m = grasp_metrics(cross_polytope(scale=3.0))
        assert m.l_star == pytest.approx(1.0 / 12.0, abs=1e-9)
        assert m.epsilon == pytest.approx(3.0 * INV_SQRT6, abs=1e-8)
        assert m.delta == pytest.approx(3.0 * INV_SQRT6, abs=1e-8)

    def test_lemma_pair(self, cross_polytope_set):
        pair = lemma_pair(cross_polytope_set)
        assert pair.b == pytest.approx(INV_SQRT6, abs=1e-9)
        assert pair.feasible
        assert pair.min_slack >= -1e-9


class TestMinWeight:

    def test_upper_bound(self):
        for seed in range(10):
            W = random_force_closure_set(10, seed)
            assert min_weight(W).l_star <= 1.0 / 10.0 + 1e-12

    def test_not_closure_outside_affine_hull(self, non_closure_set):
        result = min_weight(non_closure_set)
        assert result.status is MinWeightStatus.NOT_FORCE_CLOSURE
        assert np.isnan(result.l_star)
        assert not result.force_closure

    def test_negative_when_origin_outside_hull(self):
        shifted = cross_polytope().points + 2.0 * np.eye(6)[0]
        result = min_weight(shifted)
        assert result.status is MinWeightStatus.OPTIMAL
        assert result.l_star < 0.0
        assert not result.force_closure

    def test_unpacks(self, cross_polytope_set):
        l_star, alpha = min_weight(cross_polytope_set)
        assert alpha.shape == (12,)
        assert l_star > 0

    def test_invariant_under_wrench_order(self):
        W = random_force_closure_set(12, seed=3)
        perm = make_rng(0).permutation(12)
        assert min_weight(W.points[perm]).l_star == pytest.approx(min_weight(W).l_star, abs=1e-10)


class TestDuality:
    """Primal and dual optima agree"""

    @pytest.mark.parametrize("n_w", [8, 12, 16, 24])
    def test_force_closure_sets(self, n_w):
        for seed in range(5):
            W = random_force_closure_set(n_w, seed)
            primal = min_weight(W)
            dual = min_weight_dual(W)
            assert dual.status is MinWeightStatus.OPTIMAL
            assert abs(primal.l_star - dual.phi_star) <= 1e-8

    def test_negative_optimum(self):
        shifted = cross_polytope().points + 2.0 * np.eye(6)[0]
        assert min_weight_dual(shifted).phi_star == pytest.approx(min_weight(shifted).l_star, abs=1e-8)

    def test_infeasible_primal(self, non_closure_set):
        dual = min_weight_dual(non_closure_set)
        assert dual.status is MinWeightStatus.NOT_FORCE_CLOSURE
        assert np.isnan(dual.phi_star)

    @pytest.mark.slow
    def test_large_corpus(self):
        for n_w in (8, 12, 16, 24):
            for seed in range(250):
                W = random_force_closure_set(n_w, seed)
                assert abs(min_weight(W).l_star - min_weight_dual(W).phi_star) <= 1e-8


class TestMinWeightGradient:

    def test_matches_finite_differences(self):
        h = 1e-6
        for seed in range(20):
            W = random_force_closure_set(10, seed)
            try:
                grad = min_weight_gradient(W)
            except DegenerateBasisError:
                continue
            pts = W.points.copy()
            assert grad.shape == pts.shape
            for l, k in [(0, 0), (3, 2), (7, 5), (9, 1)]:
                up, down = pts.copy(), pts.copy()
                up[l, k] += h
                down[l, k] -= h
                fd = (min_weight(up).l_star - min_weight(down).l_star) / (2 * h)
                assert grad[l, k] == pytest.approx(fd, rel=1e-4, abs=1e-6)
            break
        else:
            pytest.fail("no non-degenerate instance found")

    def test_not_closure_raises(self, non_closure_set):
        with pytest.raises(NotForceClosureError):
            min_weight_gradient(non_closure_set)


class TestFerrariCanny:

    def test_not_closure_raises(self, non_closure_set):
        with pytest.raises(NotForceClosureError):
            ferrari_canny(non_closure_set)

    def test_grasp_metrics_without_closure(self, non_closure_set):
        m = grasp_metrics(non_closure_set)
        assert not m.force_closure
        assert np.isnan(m.l_star)
        assert np.isnan(m.l_star_normalized)
        assert np.isnan(m.epsilon)
        assert m.bound_holds is None
        # the points span only a hyperplane
        assert np.isnan(m.delta)
        assert m.warnings

    def test_grasp_metrics_when_membership_disagrees(self, cross_polytope_set, monkeypatch, caplog):
        monkeypatch.setattr(metrics_module, "contains_origin", lambda W: False)
        m = grasp_metrics(cross_polytope_set)
        assert m.force_closure
        assert m.epsilon == 0.0
        assert m.marginal
        assert m.bound_holds is False
        assert any("ε set to 0" in w for w in m.warnings)
        assert "Membership LP disagrees" in caplog.text


class TestContainmentCertificate:

    def test_perturbation_inside_hull_is_certified(self, rng):
        for seed in range(10):
            W_bar = random_force_closure_set(12, seed)
            W = perturb_in_hull(W_bar, rng)
            cert = certify_containment(W_bar, W)
            assert cert.kind is CertificateKind.CONTAINMENT
            assert cert.certified
            assert all(cert.per_wrench_ok)

    def test_large_shift_is_not_certified(self, cross_polytope_set):
        W = cross_polytope_set.points + 10.0 * np.eye(6)[0]
        cert = certify_containment(cross_polytope_set, W)
        assert not cert.certified
        assert not any(cert.per_wrench_ok)

    def test_shape_mismatch(self, cross_polytope_set):
        with pytest.raises(ValueError, match="shape"):
            certify_containment(cross_polytope_set, np.zeros((6, 6)))

    def test_violation_is_reported(self, cross_polytope_set, non_closure_set, monkeypatch):
        monkeypatch.setattr(metrics_module, "in_hull", lambda *args, **kwargs: True)
        with pytest.raises(CertificateViolationError):
            certify_containment(cross_polytope_set, non_closure_set)


class TestBallCertificate:

    def test_perturbation_inside_ball_is_certified(self, rng):
        for seed in range(10):
            W_bar = random_force_closure_set(12, seed)
            eps = ferrari_canny(W_bar)
            W = perturb_in_ball(W_bar, 0.99 * eps, rng)
            cert = certify_ball(W_bar, W)
            assert cert.kind is CertificateKind.BALL
            assert cert.certified

    def test_shift_beyond_radius(self, cross_polytope_set):
        W = cross_polytope_set.points + 2.0 * INV_SQRT6 * np.eye(6)[1]
        cert = certify_ball(cross_polytope_set, W)
        assert not cert.certified

    def test_requires_closed_nominal(self, non_closure_set):
        with pytest.raises(NotForceClosureError):
            certify_ball(non_closure_set, non_closure_set)

    @pytest.mark.slow
    def test_many_trials(self):
        rng = make_rng(7)
        for seed in range(1000):
            W_bar = random_force_closure_set(12, seed)
            assert certify_containment(W_bar, perturb_in_hull(W_bar, rng)).certified
            W = perturb_in_ball(W_bar, ferrari_canny(W_bar), rng)
            assert certify_ball(W_bar, W).certified


class TestBoundCheck:

    def test_cross_polytope(self, cross_polytope_set):
        lhs, eps, holds = bound_check(cross_polytope_set)
        assert lhs == pytest.approx(2.0 * INV_SQRT6 / 12.0, abs=1e-9)
        assert eps == pytest.approx(INV_SQRT6, abs=1e-9)
        assert holds

    @pytest.mark.parametrize("n_w", [8, 12, 16, 24])
    def test_random_sets(self, n_w):
        for seed in range(5):
            _, _, holds = bound_check(random_force_closure_set(n_w, seed))
            assert holds

    def test_not_closure_raises(self, non_closure_set):
        with pytest.raises(NotForceClosureError):
            bound_check(non_closure_set)

    def test_wrench_set_input(self):
        W = WrenchSet(cross_polytope().points)
        assert bound_check(W)[2]

    @pytest.mark.slow
    def test_lower_envelope(self):
        """ε/(n_w·ℓ*) stays above min 2δ/n_w in every ℓ̄* bin."""
        ratios, floors, normalized = [], [], []
        for n_w in (8, 12, 16, 24):
            for seed in range(125):
                m = grasp_metrics(random_force_closure_set(n_w, seed))
                assert m.bound_holds
                if m.l_star_normalized > 0:
                    ratios.append(m.epsilon / m.l_star_normalized)
                    floors.append(2.0 * m.delta / n_w)
                    normalized.append(m.l_star_normalized)
        ratios, normalized = np.array(ratios), np.array(normalized)
        edges = np.quantile(normalized, np.linspace(0.0, 1.0, 6))
        bins = np.clip(np.digitize(normalized, edges[1:-1]), 0, 4)
        for b in range(5):
            assert ratios[bins == b].min() >= min(floors) - 1e-9
