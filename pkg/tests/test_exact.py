import math

import numpy as np
import pytest

from conftest import assert_close, table, two_key_oracle
from triemoments import DegenerateVariance, compute
from triemoments.exact import _binom_weights


class TestWeights:
    @pytest.mark.parametrize("n,p", [(2, 0.5), (17, 0.3), (400, 0.02),
                                     (5000, 0.5), (20000, 0.2)])
    def test_normalised(self, n, p):
        w = _binom_weights(n, p, 1.0 - p)
        assert abs(w.sum() - 1.0) < 1e-14
        assert (w >= 0.0).all()

    def test_small_exact(self):
        w = _binom_weights(2, 0.25, 0.75)
        np.testing.assert_allclose(w, [0.5625, 0.375, 0.0625], rtol=1e-15)

    def test_matches_exact_binomial(self):
        # exact rational binomial pmf as oracle
        from fractions import Fraction
        n, p = 30, 0.3
        pf = Fraction(p)
        w = _binom_weights(n, p, 1.0 - p)
        for k in (0, 1, 7, 15, 30):
            want = float(math.comb(n, k) * pf ** k * (1 - pf) ** (n - k))
            assert abs(w[k] - want) < 1e-13 * want


@pytest.mark.parametrize("p", [0.5, 0.3])
class TestTwoKeyOracle:
    """Every n=2 moment against the geometric common-prefix-length oracle."""

    def test_all_moments(self, p):
        t = compute(p, 4)
        want = two_key_oracle(p)
        assert_close(t.ES[2], want["ES"], rtol=1e-13, msg="ES")
        assert_close(t.EK[2], want["EK"], rtol=1e-13, msg="EK")
        assert_close(t.EN[2], want["EN"], rtol=1e-13, msg="EN")
        assert_close(t.ES2[2], want["ES2"], rtol=1e-13, msg="ES2")
        assert_close(t.EK2[2], want["EK2"], rtol=1e-13, msg="EK2")
        assert_close(t.ESK[2], want["ESK"], rtol=1e-13, msg="ESK")
        assert_close(t.ESN[2], want["ESN"], rtol=1e-13, msg="ESN")
        assert_close(t.EN2[2], want["EN2"], rtol=1e-13, msg="EN2")

    def test_rho_SK_is_one(self, p):
        t = compute(p, 4)
        assert_close(t.rho_SK(2), 1.0, atol=1e-12, msg="rho_SK(2)")


def test_known_values_at_half():
    t = compute(0.5, 8)
    assert_close(t.mean_S(2), 2.0, rtol=1e-14)
    assert_close(t.mean_K(2), 4.0, rtol=1e-14)
    assert_close(t.mean_N(2), 2.0, rtol=1e-14)
    assert_close(t.var_S(2), 2.0, rtol=1e-13)
    assert_close(t.cov_SK(2), 4.0, rtol=1e-13)
    assert_close(t.mean_depth(2), 2.0, rtol=1e-14)


def test_boundary_rows_zero():
    t = compute(0.3, 8)
    for name in ("ES", "EK", "EN", "ES2", "EK2", "EN2", "ESK", "ESN"):
        arr = getattr(t, name)
        assert arr[0] == 0.0 and arr[1] == 0.0


def test_exchange_symmetry():
    a = compute(0.3, 64)
    b = compute(0.7, 64)
    for name in ("ES", "EK", "EN", "ES2", "EK2", "EN2", "ESK", "ESN"):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name),
                                   rtol=1e-12, err_msg=name)


@pytest.mark.parametrize("p", [0.5, 0.3])
def test_cauchy_schwarz_and_bounds(p):
    t = table(p, 512)
    for n in range(2, 513):
        vs, vk, vn = t.var_S(n), t.var_K(n), t.var_N(n)
        assert vs > 0 and vk > 0 and vn > 0
        assert t.cov_SK(n) ** 2 <= vs * vk * (1 + 1e-12)
        assert abs(t.rho_SK(n)) <= 1 + 1e-12
        assert abs(t.rho_SN(n)) <= 1 + 1e-12
        assert t.mean_K(n) >= n


def test_extended_matches_standard():
    a = compute(0.5, 256)
    b = compute(0.5, 256, "extended")
    np.testing.assert_allclose(a.ES, b.ES, rtol=1e-13)
    np.testing.assert_allclose(a.EK2, b.EK2, rtol=1e-13)
    for n in (17, 100, 256):
        assert_close(a.var_K(n), b.var_K(n), rtol=1e-11, msg=f"var_K({n})")
        assert_close(a.rho_SK(n), b.rho_SK(n), rtol=1e-11, msg=f"rho({n})")


def test_accessor_errors():
    t = compute(0.5, 16)
    with pytest.raises(IndexError):
        t.mean_S(17)
    with pytest.raises(DegenerateVariance):
        t.rho_SK(1)
    with pytest.raises(ValueError):
        t.mean_depth(0)


def test_precondition_validation():
    with pytest.raises(ValueError):
        compute(1.0, 16)
    with pytest.raises(ValueError):
        compute(0.5, 1)
    with pytest.raises(ValueError):
        compute(0.5, 16, "quad")


def test_csv_round_trip_values():
    t = compute(0.5, 8)
    text = t.to_csv()
    lines = text.strip().split("\n")
    assert lines[0].startswith("# config:")
    header = lines[1].split(",")
    assert header[:4] == ["n", "ES", "EK", "EN"]
    row2 = lines[2 + 2].split(",")  # n = 2
    assert row2[0] == "2"
    assert float(row2[1]) == 2.0
    assert float(row2[2]) == 4.0
    rho = float(lines[2 + 2].split(",")[9])
    assert abs(rho - 1.0) < 1e-12
    # n = 0 row carries nan correlations
    assert "nan" in lines[2]


def test_json_export():
    import json
    t = compute(0.3, 8)
    doc = json.loads(t.to_json(extra_config={"tool": "test"}))
    assert doc["config"]["p"] == 0.3
    assert doc["config"]["tool"] == "test"
    assert len(doc["columns"]["ES"]) == 9
    assert doc["columns"]["ES"][2] == pytest.approx(1 / (2 * 0.3 * 0.7))


def test_depth_accessor_is_mean_K_over_n():
    t = compute(0.3, 64)
    for n in (2, 10, 64):
        assert t.mean_depth(n) == pytest.approx(t.mean_K(n) / n, rel=1e-15)


def test_golden_rho_SN_1024():
    # regression anchor, first computed by this table (in (0.9, 1) as the
    # near-total S/N correlation requires)
    t = table(0.5, 1024)
    got = t.rho_SN(1024)
    assert 0.9 < got < 1.0
    assert_close(got, 0.9860162734025352, atol=1e-9, msg="rho_SN(1024)")


def test_corrected_denominator_rho():
    t = table(0.5, 1024)
    plain = t.rho_SK(512)
    corrected = t.rho_SK_corrected(512)
    assert corrected < plain  # inflated denominator
    # the correction is configurable; zero recovers the plain value
    assert t.rho_SK_corrected(512, correction=0.0) == pytest.approx(plain,
                                                                    rel=1e-15)
