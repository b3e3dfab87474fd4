import json

import numpy as np
import pytest

from latticelab.codes import (
    ConstellationBox,
    LatticeCodeSpec,
    builtin_code,
    complex_generator_to_real,
    constellation,
    encode,
    load_code_spec,
    make_threaded_2x2,
    make_vblast,
    permute_columns,
)


def unit_code(kappa: int, eta: float = 1.0) -> LatticeCodeSpec:
    # Scalar-channel helper: n_T = 1, T = 1 needs kappa = 2 rows.
    assert kappa == 2
    return LatticeCodeSpec(
        name="unit", n_t=1, t=1, generator=np.eye(2), shaping_half_width=eta
    )


class TestVblast:
    def test_identity_generator(self):
        code = make_vblast(2, 2)
        np.testing.assert_array_equal(code.generator, np.eye(8))
        assert code.kappa == 8

    def test_calibrated_half_width(self):
        # ||G||_F^2 = 2 n_T T so eta = sqrt(3 / (2 n_T)), independent of T.
        assert make_vblast(2, 2).shaping_half_width == pytest.approx(np.sqrt(0.75))
        assert make_vblast(4, 4).shaping_half_width == pytest.approx(np.sqrt(0.375))


class TestThreaded2x2:
    def test_generator_is_orthogonal(self):
        g = make_threaded_2x2().generator
        np.testing.assert_allclose(g.T @ g, np.eye(8), atol=1e-12)

    def test_unit_determinant(self):
        g = make_threaded_2x2().generator
        assert abs(np.linalg.det(g)) == pytest.approx(1.0, abs=1e-10)

    def test_frobenius_norm_matches_dimension(self):
        g = make_threaded_2x2().generator
        assert np.sum(g**2) == pytest.approx(8.0, rel=1e-12)

    def test_real_form_layout(self):
        # A purely real complex generator embeds with Re/Im blocks per slot.
        gc = np.array([[2.0, 0.0], [0.0, 3.0]], dtype=complex)
        g = complex_generator_to_real(gc, n_t=1, t=2)
        x = g @ np.array([1.0, 0.0, 0.0, 1.0])  # symbols 2, 3i
        np.testing.assert_allclose(x, [2.0, 0.0, 0.0, 3.0])

    def test_nonzero_min_singular_value(self):
        g = make_threaded_2x2().generator
        assert np.linalg.svd(g, compute_uv=False).min() == pytest.approx(1.0, rel=1e-10)


class TestConstellation:
    def test_known_bounds(self):
        # eta * rho^(rT/kappa) = 2.5 -> integer range [-2, 2].
        code = unit_code(2, eta=1.0)
        box = constellation(code, rho=6.25, r=1.0)
        np.testing.assert_array_equal(box.lo, [-2, -2])
        np.testing.assert_array_equal(box.hi, [2, 2])

    def test_degenerate_box_near_rho_one(self):
        code = unit_code(2, eta=0.9)
        box = constellation(code, rho=1.0 + 1e-9, r=1.0)
        np.testing.assert_array_equal(box.lo, [0, 0])
        np.testing.assert_array_equal(box.hi, [0, 0])

    def test_box_never_inverts(self):
        code = make_vblast(2, 2)
        for rho in (1.0001, 2.0, 10.0, 1e4):
            for r in (0.0, 0.5, 1.0, 2.0):
                box = constellation(code, rho, r)
                assert np.all(box.lo <= box.hi)

    def test_cardinality_product_rule(self):
        box = ConstellationBox(lo=np.array([-1, -1]), hi=np.array([2, 2]))
        # 4 values per coordinate -> 16 points.
        assert box.log2_cardinality() == pytest.approx(4.0)

    def test_contains(self):
        box = ConstellationBox(lo=np.array([-2, -2]), hi=np.array([2, 2]))
        assert box.contains([2, -2])
        assert not box.contains([3, 0])


class TestEncode:
    def test_known_scaling(self):
        code = unit_code(2)
        # rho^(-rT/kappa) = 0.1 at rho = 100, r = 1.
        x = encode(code, rho=100.0, r=1.0, s=[3, -1])
        np.testing.assert_allclose(x, [0.3, -0.1], rtol=1e-12)

    def test_injective_on_distinct_symbols(self):
        code = make_threaded_2x2()
        rng = np.random.default_rng(0)
        for _ in range(50):
            s1 = rng.integers(-5, 6, size=8)
            s2 = rng.integers(-5, 6, size=8)
            if np.array_equal(s1, s2):
                continue
            x1 = encode(code, 100.0, 1.0, s1)
            x2 = encode(code, 100.0, 1.0, s2)
            assert np.linalg.norm(x1 - x2) > 1e-9

    @pytest.mark.parametrize("make", [lambda: make_vblast(2, 2), make_threaded_2x2])
    def test_average_power_within_budget(self, make):
        code = make()
        rho, r = 1e4, 1.0
        box = constellation(code, rho, r)
        rng = np.random.default_rng(1)
        total = 0.0
        n = 4000
        for _ in range(n):
            s = rng.integers(box.lo, box.hi + 1)
            total += np.sum(encode(code, rho, r, s) ** 2)
        assert total / n <= 1.1 * code.t


def test_rate_tracks_multiplexing_gain():
    # Measured rate (1/T) log2|X| / log2 rho approaches r within 10%
    # once the box is a few symbols wide.
    code = LatticeCodeSpec(
        name="halfbox", n_t=2, t=2, generator=np.eye(8), shaping_half_width=0.5
    )
    for rho in (1e4, 1e6, 1e8):
        for r in (1.0, 1.5):
            box = constellation(code, rho, r)
            measured = box.log2_cardinality() / code.t / np.log2(rho)
            assert measured == pytest.approx(r, rel=0.10)


class TestPermutation:
    def test_same_lattice_different_order(self):
        code = make_threaded_2x2()
        perm = [3, 1, 2, 0, 7, 5, 6, 4]
        permuted = permute_columns(code, perm)
        s = np.arange(8) - 3
        x_ref = encode(code, 64.0, 1.0, s)
        x_perm = encode(permuted, 64.0, 1.0, s[perm])
        np.testing.assert_allclose(x_perm, x_ref, atol=1e-12)

    def test_rejects_non_permutation(self):
        with pytest.raises(ValueError):
            permute_columns(make_vblast(2, 2), [0, 0, 1, 2, 3, 4, 5, 6])


class TestFileLoading:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "code.json"
        doc = {
            "name": "custom",
            "n_t": 1,
            "t": 1,
            "generator": [[1.0, 0.5], [0.0, 1.0]],
            "shaping_half_width": 0.7,
        }
        path.write_text(json.dumps(doc))
        code = load_code_spec(path)
        assert code.name == "custom"
        assert code.shaping_half_width == pytest.approx(0.7)
        np.testing.assert_array_equal(code.generator, [[1.0, 0.5], [0.0, 1.0]])

    def test_default_half_width_is_calibrated(self, tmp_path):
        path = tmp_path / "code.json"
        doc = {"name": "c", "n_t": 1, "t": 1, "generator": [[1, 0], [0, 1]]}
        path.write_text(json.dumps(doc))
        code = load_code_spec(path)
        assert code.shaping_half_width == pytest.approx(np.sqrt(1.5))

    def test_malformed_raises(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"name": "x"}))
        with pytest.raises(ValueError):
            load_code_spec(path)


def test_builtin_code_lookup():
    assert builtin_code("vblast", 3, 2).kappa == 12
    assert builtin_code("golden", 2, 2).name == "threaded-2x2"
    with pytest.raises(ValueError):
        builtin_code("golden", 3, 2)
    with pytest.raises(ValueError):
        builtin_code("nope", 2, 2)
