import math

import numpy as np
import pytest
from scipy.special import jv

from bfcsim import (
    CombSpec,
    DegenerateDetuningError,
    EqualizationError,
    FilterClippingError,
    ModulationSpec,
    equalizing_index,
    modulated_comb,
    sideband_weights,
    vernier_map,
)
from bfcsim.modulation import apply_filter
from bfcsim.units import ghz_to_angular

EQUAL_INDEX = 1.434695650819565  # root of J0(m) = J1(m) in (1, 2)

PARENT = CombSpec(
    fsr_angular=ghz_to_angular(40.5),
    linewidth_angular=ghz_to_angular(0.25),
    dimension=2,
)


def _mod(dim, rf_ghz=39.5, halfwidth_ghz=18.0, index=EQUAL_INDEX):
    return ModulationSpec(
        rf_angular=ghz_to_angular(rf_ghz),
        index=index,
        center_bin=1 + (dim - 1) // 2,
        filter_halfwidth=ghz_to_angular(halfwidth_ghz),
    )


def test_sideband_weights_match_bessel():
    orders, weights = sideband_weights(1.2, max_order=3)
    np.testing.assert_allclose(weights, (1j**orders) * jv(orders, 1.2))
    # pure phase drive conserves power; truncation keeps at least the capture
    assert float(np.sum(np.abs(weights) ** 2)) >= 0.999


def test_sideband_weights_grow_order_until_capture():
    orders, weights = sideband_weights(5.0, max_order=1)
    assert orders.max() > 1
    assert float(np.sum(np.abs(weights) ** 2)) >= 0.999


def test_sideband_weights_validation():
    with pytest.raises(ValueError):
        sideband_weights(-0.1)
    with pytest.raises(ValueError):
        sideband_weights(1.0, max_order=0)


def test_equalizing_index_value():
    idx = equalizing_index(2)
    assert math.isclose(idx, EQUAL_INDEX, rel_tol=1e-12)
    assert math.isclose(jv(0, idx), jv(1, idx), rel_tol=1e-9)
    assert equalizing_index(3) == idx
    assert equalizing_index(1) == 0.0


def test_equalizing_index_beyond_three_bins():
    with pytest.raises(EqualizationError) as err:
        equalizing_index(4)
    assert math.isclose(err.value.best_effort_index, EQUAL_INDEX, rel_tol=1e-9)


def test_modulation_spec_validation():
    with pytest.raises(ValueError):
        ModulationSpec(
            rf_angular=0.0,
            index=1.0,
            center_bin=1,
            filter_halfwidth=ghz_to_angular(10.0),
        )
    with pytest.raises(ValueError):
        # filter window wider than the drive period overlaps neighbors
        ModulationSpec(
            rf_angular=ghz_to_angular(39.5),
            index=1.0,
            center_bin=1,
            filter_halfwidth=ghz_to_angular(20.0),
        )


def test_vernier_map_rescales_spacing():
    mapped = vernier_map(PARENT, _mod(2))
    detuning = PARENT.fsr_angular - ghz_to_angular(39.5)
    assert math.isclose(mapped.fsr_angular, detuning, rel_tol=1e-12)
    assert mapped.dimension == PARENT.dimension
    assert math.isclose(mapped.linewidth_angular, PARENT.linewidth_angular)


def test_vernier_map_degenerate_and_inverted_detuning():
    with pytest.raises(DegenerateDetuningError):
        vernier_map(PARENT, _mod(2, rf_ghz=40.5))
    with pytest.raises(ValueError):
        vernier_map(PARENT, _mod(2, rf_ghz=41.5))


def test_apply_filter_clipping_guard():
    # a 3 GHz half-window sits on the Lorentzian shoulders and clips > 1%
    with pytest.raises(FilterClippingError) as err:
        modulated_comb(PARENT, _mod(2, halfwidth_ghz=3.0))
    assert err.value.clipped_bins


def test_modulated_comb_equalizes_two_and_three_bins():
    for dim in (2, 3):
        parent = CombSpec(
            fsr_angular=ghz_to_angular(40.5),
            linewidth_angular=ghz_to_angular(0.25),
            dimension=dim,
        )
        comb = modulated_comb(parent, _mod(dim))
        assert comb.dimension == dim
        assert comb.has_equal_weights(tol=1e-9)
        assert math.isclose(float(np.sum(np.abs(comb.bin_amplitudes) ** 2)), 1.0)
        assert math.isclose(
            comb.fsr_angular, ghz_to_angular(1.0), rel_tol=1e-9
        )
        assert comb.parent_bins == tuple(range(1, dim + 1))


def test_modulated_comb_unequal_index_keeps_bessel_ratio():
    comb = modulated_comb(PARENT, _mod(2, index=0.9))
    mags = np.abs(comb.bin_amplitudes)
    assert math.isclose(
        (mags.max() / mags.min()),
        abs(jv(0, 0.9)) / abs(jv(1, 0.9)),
        rel_tol=1e-9,
    )


def test_apply_filter_keeps_contiguous_window():
    mapped = vernier_map(PARENT, _mod(2))
    comb = apply_filter(mapped, _mod(2))
    assert comb.dimension == 2
    assert np.all(np.diff(comb.bins) == 1)
