import numpy as np
import pytest

from frbl.datum import embed_blockdiag, make_datum
from frbl.geometry import (
    check_geometric,
    check_loewner,
    find_sigma,
    marginal_residuals,
    verify_adjoint_contraction,
    verify_trace_implication,
)
from frbl.instances import loomis_whitney_2d, prekopa_leindler, young_frame
from frbl.linalg import SymMatrix

from _oracles import eig2x2, random_psd


def negative_control():
    """Loewner-violating datum: sum of two lines onto one with unit map."""
    return make_datum((1, 1), (1,), (0.5, 0.5), (1.0,), [[1.0, 1.0]])


class TestLoewner:
    def test_prekopa_leindler_tight(self):
        lam = 1 / 3
        ok, min_eig = check_loewner(prekopa_leindler(lam), tol=1e-9)
        # the gap matrix is lam(1-lam) * [[1,-1],[-1,1]]
        expected = eig2x2([[lam * (1 - lam), -lam * (1 - lam)],
                           [-lam * (1 - lam), lam * (1 - lam)]])
        assert expected[0] == pytest.approx(0.0, abs=1e-15)
        assert ok and min_eig == pytest.approx(0.0, abs=1e-12)

    def test_young_frame_tight(self):
        ok, min_eig = check_loewner(young_frame(), tol=1e-9)
        assert ok and min_eig == pytest.approx(0.0, abs=1e-12)

    def test_negative_control(self):
        ok, min_eig = check_loewner(negative_control(), tol=1e-9)
        expected = eig2x2([[-0.5, -1.0], [-1.0, -0.5]])
        assert expected[0] == pytest.approx(-1.5, abs=1e-15)
        assert not ok
        assert min_eig == pytest.approx(-1.5, abs=1e-12)


class TestFindSigma:
    def test_prekopa_leindler_all_ones(self):
        res = find_sigma(prekopa_leindler(1 / 3))
        assert res.status == "found"
        np.testing.assert_allclose(res.sigma.mat, np.ones((2, 2)), atol=1e-8)
        assert max(res.residual_in, res.residual_out) <= 1e-8
        assert res.sigma_min_eig >= -1e-8

    def test_young_frame_identity(self):
        res = find_sigma(young_frame())
        assert res.status == "found"
        np.testing.assert_allclose(res.sigma.mat, np.eye(2), atol=1e-8)

    def test_forced_sigma_infeasible(self):
        # k=1 forces sigma to the identity, but the pushforward scales by 4
        datum = make_datum((1,), (1,), (1.0,), (1.0,), [[2.0]])
        res = find_sigma(datum)
        assert res.status == "affine-infeasible"
        assert res.reason == "affine-infeasible"
        assert res.sigma is None

    def test_max_iter_when_cone_never_reached(self):
        # affine constraints force an off-diagonal entry beyond PSD range
        datum = make_datum((1, 1), (1,), (0.5, 0.5), (1.0,), [[0.6, 0.3]])
        res = find_sigma(datum, tol=1e-8, max_iter=300)
        assert res.status == "max-iter"
        assert res.iterations == 300
        assert max(res.residual_in, res.residual_out) > 1e-8 or res.sigma_min_eig < -1e-8

    def test_debug_distance_monotonicity(self):
        for datum in (prekopa_leindler(0.4), young_frame(), loomis_whitney_2d()):
            res = find_sigma(datum, debug=True)
            assert res.status == "found"

    def test_matrix_valued_output_blocks(self):
        # R^3 split into a plane and a line: a 2x2 output block in the
        # constraint system
        datum = make_datum((3,), (2, 1), (1.0,), (1.0, 1.0), np.eye(3))
        cert = check_geometric(datum)
        assert cert.verdict == "geometric"
        np.testing.assert_allclose(cert.sigma.mat, np.eye(3), atol=1e-8)

    def test_matrix_valued_cross_blocks(self):
        # two planes interpolated into one: sigma must couple 2x2 blocks
        lam = 1 / 3
        q = np.hstack([lam * np.eye(2), (1 - lam) * np.eye(2)])
        datum = make_datum((2, 2), (2,), (lam, 1 - lam), (1.0,), q)
        cert = check_geometric(datum)
        assert cert.verdict == "geometric"
        expected = np.block([[np.eye(2), np.eye(2)], [np.eye(2), np.eye(2)]])
        np.testing.assert_allclose(cert.sigma.mat, expected, atol=1e-8)

    def test_orthogonal_equivalences_stay_geometric(self):
        # blockwise-orthogonal changes of variables preserve both geometric
        # conditions; the certificate sigma is then a rotated one
        from scipy.stats import ortho_group

        from frbl.datum import EquivalenceTransform, apply_equivalence

        rng = np.random.default_rng(77)

        def random_orthogonal(dim):
            if dim == 1:
                return np.array([[rng.choice([-1.0, 1.0])]])
            return ortho_group.rvs(dim, random_state=rng)

        for base in (prekopa_leindler(0.3), young_frame(), loomis_whitney_2d()):
            for _ in range(5):
                transform = EquivalenceTransform(
                    tuple(random_orthogonal(d) for d in base.layout.in_dims),
                    tuple(random_orthogonal(d) for d in base.layout.out_dims),
                )
                rotated = apply_equivalence(base, transform)
                cert = check_geometric(rotated)
                assert cert.verdict == "geometric", (base.layout, cert)

    def test_slow_convergence_case(self):
        # frozen random datum whose feasible point is far from the identity
        # start; the search needs a few hundred alternating projections
        datum = make_datum(
            (1, 1, 2),
            (1,),
            [0.62537719437472, 1.766995947758348, 0.8301889996603169],
            [4.052751141453702],
            [[-0.586630882730846, 0.7707802337475681,
              -0.49544904738287204, -1.8397186052226187]],
        )
        res = find_sigma(datum, debug=True)
        assert res.status == "found"
        assert res.iterations > 100
        assert max(res.residual_in, res.residual_out) <= 1e-8
        assert res.sigma_min_eig >= -1e-8


class TestCheckGeometric:
    def test_bundled_instances_geometric(self):
        for datum in (
            prekopa_leindler(0.5),
            young_frame(),
            loomis_whitney_2d(),
        ):
            cert = check_geometric(datum)
            assert cert.verdict == "geometric"
            assert cert.loewner_ok
            assert max(cert.residual_in, cert.residual_out) <= 1e-8
            assert cert.sigma_min_eig >= -1e-8
            r_in, r_out = marginal_residuals(datum, cert.sigma.mat)
            assert max(r_in, r_out) <= 1e-8

    def test_prekopa_leindler_sigma_is_ones(self):
        cert = check_geometric(prekopa_leindler(0.5))
        np.testing.assert_allclose(cert.sigma.mat, np.ones((2, 2)), atol=1e-8)

    def test_negative_control_verdict(self):
        cert = check_geometric(negative_control())
        assert cert.verdict == "not-geometric-loewner"
        assert not cert.loewner_ok

    def test_loewner_ok_but_sigma_missing(self):
        datum = make_datum((1,), (1,), (1.0,), (1.0,), [[0.5]])
        cert = check_geometric(datum)
        assert cert.loewner_ok
        assert cert.verdict == "sigma-not-found"
        assert cert.reason == "affine-infeasible"

    def test_certificate_json_schema(self):
        cert = check_geometric(young_frame())
        obj = cert.to_json()
        for key in ("verdict", "loewner_min_eig", "sigma", "residual_in",
                    "residual_out", "iterations"):
            assert key in obj
        assert obj["sigma"] == cert.sigma.mat.tolist()


class TestAdjointContraction:
    def test_zero_vectors(self):
        res = verify_adjoint_contraction(young_frame(), [[0.0], [0.0], [0.0]])
        assert res == (0.0, 0.0, True)

    def test_young_first_basis_vector(self):
        res = verify_adjoint_contraction(young_frame(), [[1.0], [0.0], [0.0]])
        assert res.lhs == pytest.approx(4 / 9, abs=1e-14)
        assert res.rhs == pytest.approx(2 / 3, abs=1e-14)
        assert res.holds

    def test_prekopa_leindler_equality(self):
        # oracle: both sides evaluate to 1 for the unit vector at lam = 1/2
        lam = 0.5
        lhs = sum((1 / c) * (1.0 * q) ** 2 for c, q in ((lam, lam), (1 - lam, 1 - lam)))
        assert lhs == 1.0
        res = verify_adjoint_contraction(prekopa_leindler(lam), [[1.0]])
        assert res.lhs == pytest.approx(1.0, abs=1e-14)
        assert res.rhs == pytest.approx(1.0, abs=1e-14)
        assert res.holds

    def test_random_vectors_on_geometric_instances(self):
        rng = np.random.default_rng(12)
        for datum in (prekopa_leindler(0.3), young_frame(), loomis_whitney_2d()):
            for _ in range(300):
                vs = [rng.standard_normal(d) for d in datum.layout.out_dims]
                assert verify_adjoint_contraction(datum, vs).holds

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            verify_adjoint_contraction(young_frame(), [[1.0], [0.0]])


class TestTraceImplication:
    def test_zero_blocks(self):
        datum = young_frame()
        cert = check_geometric(datum)
        res = verify_trace_implication(
            datum, [np.zeros((2, 2))], [np.zeros((1, 1))] * 3, cert.sigma
        )
        assert res.verdict == "hypothesis-holds, conclusion-holds"
        assert res.lhs_trace == 0.0 and res.rhs_trace == 0.0

    def test_young_equality_case(self):
        datum = young_frame()
        cert = check_geometric(datum)
        res = verify_trace_implication(
            datum, [np.eye(2)], [np.eye(1)] * 3, cert.sigma
        )
        assert res.hypothesis_holds
        assert res.conclusion_holds
        assert res.lhs_trace == pytest.approx(2.0)
        assert res.rhs_trace == pytest.approx(2.0)

    def test_hypothesis_not_met(self):
        datum = young_frame()
        cert = check_geometric(datum)
        res = verify_trace_implication(
            datum, [2.0 * np.eye(2)], [np.eye(1)] * 3, cert.sigma
        )
        assert res.verdict == "hypothesis-not-met"
        assert res.conclusion_holds is None

    def test_bad_sigma_rejected(self):
        datum = young_frame()
        with pytest.raises(ValueError, match="marginal certificate"):
            verify_trace_implication(
                datum, [np.zeros((2, 2))], [np.zeros((1, 1))] * 3,
                SymMatrix(5.0 * np.eye(2)),
            )

    def test_rejection_sampled_pairs(self):
        rng = np.random.default_rng(21)
        for datum in (prekopa_leindler(0.25), young_frame(), loomis_whitney_2d()):
            cert = check_geometric(datum)
            layout = datum.layout
            accepted = 0
            while accepted < 100:
                ys = [random_psd(rng, d) for d in layout.out_dims]
                pulled = datum.q.T @ embed_blockdiag(
                    layout.out_dims, [dj * y for dj, y in zip(datum.d, ys)]
                ) @ datum.q
                shrink = float(rng.uniform(-1.0, 1.0))
                xs = [
                    shrink * pulled[layout.in_slice(i), layout.in_slice(i)] / datum.c[i]
                    for i in range(layout.k)
                ]
                res = verify_trace_implication(datum, xs, ys, cert.sigma)
                if not res.hypothesis_holds:
                    continue
                accepted += 1
                assert res.conclusion_holds, res
