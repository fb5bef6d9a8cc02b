from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from sbrnn_imdd.complexity import (crossover_window, eta_mlsd, eta_sbrnn, flops_mlsd, flops_report,
                                   flops_sbrnn_rx, flops_sbrnn_tx)
from sbrnn_imdd.errors import ConfigurationError


def test_reference_values():
    # derived by hand with exact rationals
    assert flops_sbrnn_tx(64, 48) == Fraction(2 * 48 * (2 * (64 + 48) + 1), 6) == 3600
    assert flops_sbrnn_rx(64, 48, 10) == 1232020 / 6
    assert Fraction(10 * (24 * 64**2 + 8 * 64 * 48 + 5 * 64 + 2), 6) == Fraction(1232020, 6)
    assert flops_mlsd(2, 12) == flops_mlsd(4, 6) == 73728


def test_mlsd_per_branch_cost_generalizes_over_samples_per_symbol():
    # sps = 2: 3*2 + 1 + 2 = 9 FLOPS per branch
    assert flops_mlsd(2, 0, sps=2) == 9 * 2
    assert flops_mlsd(2, 0, sps=1) == (3 + 0 + 2) * 2


@given(st.integers(1, 40))
def test_sbrnn_linear_and_mlsd_exponential_in_eta(k):
    # matched eta = 12 k
    assert flops_sbrnn_rx(64, 48, 2 * (k + 1)) - flops_sbrnn_rx(64, 48, 2 * k) == pytest.approx(
        flops_sbrnn_rx(64, 48, 2))
    assert flops_mlsd(2, 12 * (k + 1)) / flops_mlsd(2, 12 * k) == 2**12


def test_eta_bookkeeping():
    assert eta_sbrnn(64, 2) == eta_mlsd(2, 12) == eta_mlsd(4, 6) == 12
    assert eta_sbrnn(64, 10) == 60


def test_crossover_and_report():
    assert crossover_window(64, 48, 2) == 12
    assert crossover_window(64, 48, 2, max_eta=6) is None
    r = flops_report(64, 48, 10, 2, 12)
    assert (r.sbrnn_tx, r.mlsd) == (3600, 73728)


@pytest.mark.parametrize("call", [lambda: flops_sbrnn_tx(6, 4), lambda: flops_sbrnn_tx(4, 0),
                                  lambda: flops_sbrnn_rx(4, 4, -1), lambda: flops_mlsd(8, 2),
                                  lambda: flops_mlsd(2, -2)])
def test_invalid_arguments(call):
    with pytest.raises(ConfigurationError):
        call()
