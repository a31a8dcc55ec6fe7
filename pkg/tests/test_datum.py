import math

import numpy as np
import pytest

from frbl.datum import (
    DatumValidationError,
    EquivalenceTransform,
    SpaceLayout,
    apply_equivalence,
    compose_transforms,
    datum_from_json,
    datum_to_json,
    embed_blockdiag,
    lambda_maps,
    make_datum,
    transform_from_json,
    transform_to_json,
    validate_datum,
)
from frbl.instances import loomis_whitney_2d, prekopa_leindler, young_frame


def pl_json(lam=1 / 3, d=1.0):
    return {
        "in_dims": [1, 1],
        "out_dims": [1],
        "c": [lam, 1 - lam],
        "d": [d],
        "Q": [[lam, 1 - lam]],
    }


class TestValidation:
    def test_prekopa_leindler_valid(self):
        datum = validate_datum(pl_json())
        assert datum.k == 2 and datum.m == 1
        np.testing.assert_array_equal(datum.q, [[1 / 3, 1 - 1 / 3]])

    def test_scaling_violation_named(self):
        with pytest.raises(DatumValidationError, match="scaling condition"):
            validate_datum(pl_json(d=2.0))

    def test_young_frame_scaling(self):
        datum = young_frame()
        # one 2-dimensional input factor against three 1/ (2/3)-weighted lines
        assert float(datum.c @ np.array(datum.layout.in_dims)) == pytest.approx(2.0)
        assert float(datum.d @ np.array(datum.layout.out_dims)) == pytest.approx(2.0)

    def test_all_violations_reported_together(self):
        raw = {
            "in_dims": [1, 1],
            "out_dims": [1],
            "c": [0.5, -0.5],
            "d": [1.0],
            "Q": [[1.0, 0.0, 0.0]],
        }
        with pytest.raises(DatumValidationError) as err:
            validate_datum(raw)
        text = str(err.value)
        assert "positive" in text and "shape" in text

    def test_missing_keys_reported(self):
        with pytest.raises(DatumValidationError, match="missing key"):
            validate_datum({"in_dims": [1]})

    def test_layout_rejects_bad_dims(self):
        with pytest.raises(DatumValidationError):
            SpaceLayout((0,), (1,))
        with pytest.raises(DatumValidationError):
            SpaceLayout((1,), ())


class TestLambdaMaps:
    def test_prekopa_leindler_weights(self):
        lam_c, lam_d = lambda_maps(validate_datum(pl_json()))
        np.testing.assert_allclose(lam_c.mat, np.diag([1 / 3, 2 / 3]))
        np.testing.assert_allclose(lam_d.mat, [[1.0]])

    def test_young_equal_weights(self):
        _, lam_d = lambda_maps(young_frame())
        np.testing.assert_allclose(lam_d.mat, (2 / 3) * np.eye(3))

    def test_single_factor_identity(self):
        datum = make_datum((2,), (1, 1), (1.0,), (1.0, 1.0), np.eye(2))
        lam_c, _ = lambda_maps(datum)
        np.testing.assert_array_equal(lam_c.mat, np.eye(2))

    def test_traces_agree(self):
        for datum in (validate_datum(pl_json()), young_frame(), loomis_whitney_2d()):
            lam_c, lam_d = lambda_maps(datum)
            assert np.trace(lam_c.mat) == pytest.approx(np.trace(lam_d.mat), abs=1e-12)


class TestBlocks:
    def test_prekopa_leindler_block(self):
        datum = validate_datum(pl_json())
        np.testing.assert_array_equal(datum.block(0, 1), [[1 - 1 / 3]])

    def test_young_block(self):
        datum = young_frame()
        np.testing.assert_array_equal(datum.block(1, 0), [[-0.5, math.sqrt(3) / 2]])

    def test_reassembly_is_exact(self):
        for datum in (validate_datum(pl_json()), young_frame(), loomis_whitney_2d()):
            rebuilt = np.block(
                [[datum.block(j, i) for i in range(datum.k)] for j in range(datum.m)]
            )
            assert np.array_equal(rebuilt, datum.q)

    def test_index_out_of_range(self):
        datum = validate_datum(pl_json())
        with pytest.raises(IndexError):
            datum.block(1, 0)
        with pytest.raises(IndexError):
            datum.block(0, 2)


class TestEmbedBlockdiag:
    def test_layout(self):
        out = embed_blockdiag((1, 2), [np.array([[5.0]]), np.eye(2) * 3.0])
        np.testing.assert_array_equal(out, np.diag([5.0, 3.0, 3.0]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="does not match"):
            embed_blockdiag((2,), [np.eye(3)])


class TestEquivalence:
    def test_scalar_substitution(self):
        datum = make_datum((1, 1), (1,), (0.5, 0.5), (1.0,), [[1.0, 1.0]])
        t = EquivalenceTransform(
            (np.array([[2.0]]), np.array([[2.0]])), (np.array([[1.0]]),)
        )
        out = apply_equivalence(datum, t)
        np.testing.assert_allclose(out.q, [[0.5, 0.5]], atol=1e-15)
        np.testing.assert_array_equal(out.c, datum.c)

    def test_identity_transform_is_noop(self):
        datum = young_frame()
        out = apply_equivalence(datum, EquivalenceTransform.identity(datum.layout))
        np.testing.assert_allclose(out.q, datum.q, atol=1e-15)

    def test_roundtrip_through_inverse(self):
        rng = np.random.default_rng(2)
        datum = young_frame()
        t = EquivalenceTransform(
            (rng.standard_normal((2, 2)) + 2 * np.eye(2),),
            tuple(rng.standard_normal((1, 1)) + 2 * np.eye(1) for _ in range(3)),
        )
        back = apply_equivalence(apply_equivalence(datum, t), t.inverse())
        np.testing.assert_allclose(back.q, datum.q, atol=1e-12)

    def test_group_action(self):
        rng = np.random.default_rng(4)

        def random_transform(layout):
            return EquivalenceTransform(
                tuple(rng.standard_normal((d, d)) + 2 * np.eye(d) for d in layout.in_dims),
                tuple(rng.standard_normal((d, d)) + 2 * np.eye(d) for d in layout.out_dims),
            )

        datum = young_frame()
        for _ in range(10):
            t1 = random_transform(datum.layout)
            t2 = random_transform(datum.layout)
            stepwise = apply_equivalence(apply_equivalence(datum, t1), t2)
            combined = apply_equivalence(datum, compose_transforms(t2, t1))
            np.testing.assert_allclose(stepwise.q, combined.q, atol=1e-12)

    def test_singular_block_rejected(self):
        with pytest.raises(ValueError, match="singular"):
            EquivalenceTransform((np.zeros((1, 1)),), (np.eye(1),))

    def test_wrong_block_dims_rejected(self):
        datum = young_frame()
        t = EquivalenceTransform((np.eye(3),), (np.eye(1),) * 3)
        with pytest.raises(ValueError, match="does not match"):
            apply_equivalence(datum, t)


class TestJson:
    def test_datum_roundtrip_and_keys(self):
        datum = young_frame()
        obj = datum_to_json(datum)
        assert set(obj) == {"in_dims", "out_dims", "c", "d", "Q"}
        back = datum_from_json(obj)
        np.testing.assert_array_equal(back.q, datum.q)
        np.testing.assert_array_equal(back.c, datum.c)
        assert back.layout == datum.layout

    def test_transform_roundtrip(self):
        t = EquivalenceTransform((np.array([[2.0]]),), (np.array([[3.0]]),))
        obj = transform_to_json(t)
        assert set(obj) == {"C", "D"}
        back = transform_from_json(obj)
        np.testing.assert_array_equal(back.c_blocks[0], t.c_blocks[0])

    def test_transform_missing_key(self):
        with pytest.raises(ValueError, match="missing key"):
            transform_from_json({"C": []})
