import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holobesov.besov import (ModulusTable, RateSequence, besov_report, besov_seminorm,
                             dyadic_degrees, global_best_approx, is_superalgebraic, modulus, slope,
                             sequence_norm, suggested_order, verdict)
from holobesov.errors import InsufficientDataError, ParameterError
from holobesov.functions import conj_z1, exp_z1, monomial, one, pow_singular
from holobesov.geometry import ball

DOM = ball(2)


def rates(values, p=2.0, norm=1.0):
    return RateSequence(np.array(dyadic_degrees(len(values) - 1)), np.asarray(values, float), p, "given",
                        norm)


def table(values, m=3):
    scales = 2.0 ** -np.arange(1, len(values) + 1)
    return ModulusTable(scales, np.asarray(values, float), 1, 2.0, m)


def test_global_rate_oracles():
    seq = global_best_approx(DOM, monomial((3, 0)), [1, 2, 4])
    assert seq.values[0] > 0 and seq.values[1] > 0
    assert seq.values[2] <= 1e-12
    seq = global_best_approx(DOM, conj_z1, [1, 4, 16])
    assert np.allclose(seq.values, np.pi, rtol=1e-10)
    seq = global_best_approx(DOM, exp_z1, dyadic_degrees(5))
    assert is_superalgebraic(seq)
    ls = global_best_approx(DOM, pow_singular(1.5), [2, 4], method="ls")
    fft = global_best_approx(DOM, pow_singular(1.5), [2, 4])
    # the discrete rule of the ls path resolves the boundary singularity to about 2%
    assert np.allclose(ls.values, fft.values, rtol=3e-2)
    with pytest.raises(ParameterError):
        global_best_approx(DOM, one, [1], p=1)


def test_disc_slope_oracle():
    seq = global_best_approx(ball(1), pow_singular(0.5), dyadic_degrees(6), p=np.inf)
    s, _ = slope(seq)
    assert 0.4 <= s <= 0.6


def test_slope_oracles():
    E = 2.0 ** (-0.5 * np.arange(8))
    assert slope(rates(E))[0] == pytest.approx(0.5, abs=1e-10)
    E[3] = 0.0
    assert slope(rates(E))[0] == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(InsufficientDataError):
        slope(rates([1.0, 0.5, 0.0, 0.0]))


def test_sequence_norm_oracles():
    s = 0.7
    E = 2.0 ** (-s * np.arange(11))
    assert sequence_norm(rates(np.zeros(11)), s, np.inf) == 0
    assert sequence_norm(rates(E), s, np.inf) == pytest.approx(1.0)
    assert sequence_norm(rates(E), s, 1) == pytest.approx(11.0)


def test_seminorm_oracles():
    s = 1.2
    k = np.arange(1, 9)
    assert besov_seminorm(table(np.zeros(8)), s, np.inf) == 0
    assert besov_seminorm(table(2.0 ** (-k * s)), s, np.inf) == pytest.approx(1.0)
    s2 = 1.7
    exact = np.sum(2.0 ** (-k * (s2 - s)))
    assert besov_seminorm(table(2.0 ** (-k * s2)), s, 1) == pytest.approx(exact)
    with pytest.raises(ParameterError):
        besov_seminorm(table(np.ones(8), m=1), 1.5, np.inf)


@given(s=st.floats(0.2, 3), eps=st.floats(0.05, 0.5))
def test_verdict_follows_tail_trend(s, eps):
    k = np.arange(8)
    assert verdict(2.0 ** (-eps * k)) == "finite"
    assert verdict(2.0 ** (eps * k)) == "divergent"
    assert verdict(np.r_[2.0 ** (-s * k[:4]), np.zeros(4)], 1.0) == "finite"


@given(s=st.floats(0, 10))
def test_suggested_order_range(s):
    m = suggested_order(s)
    assert 2 <= m <= 6
    assert m > min(2 * s, 5)


def test_modulus_oracles():
    scales = [0.5, 0.25]
    t = modulus(DOM, lambda z: 1 + z[:, 0] - 2j * z[:, 1], 2, scales, R=2)
    assert np.all(t.values <= 1e-7)
    whole = modulus(DOM, conj_z1, 1, [2.0], R=1)
    assert whole.values[0] == pytest.approx(np.pi, rel=1e-6)
    with pytest.raises(ParameterError):
        modulus(DOM, one, 0, scales)


def test_modulus_decays_for_singular_power():
    t = modulus(DOM, pow_singular(0.5), 2, [0.5, 0.25, 0.125], R=1)
    k = np.arange(1, 4)
    s, _ = np.polyfit(k, -np.log2(t.values), 1)
    assert s > 0


def test_report_round_trip():
    seq = global_best_approx(DOM, pow_singular(1.5), dyadic_degrees(6))
    tab = modulus(DOM, pow_singular(1.5), 3, [0.5, 0.25], R=1)
    rep = besov_report(seq, tab, 1.0, np.inf)
    d = rep.to_dict()
    assert d["q"] == "inf"
    assert rep.a_norm == pytest.approx(rep.lp_norm + rep.seminorm)
    assert rep.verdict_sequence == "finite"
