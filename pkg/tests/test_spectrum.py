from __future__ import annotations

import io
from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from fbqkd.spectrum import (
    ChannelSpec,
    FrequencyComb,
    JsiParseError,
    JsiRecord,
    Side,
    allocate_channels,
    bell_state,
    channel_modes,
    load_jsi,
    mode_offsets,
    write_jsi,
)


def _fixture_records():
    text = (resources.files("fbqkd.data") / "jsi_synthetic.tsv").read_text()
    return load_jsi(text.splitlines())


def test_comb_mode_frequencies():
    comb = FrequencyComb(pump_frequency_thz=194.67, fsr_ghz=21.23, mode_count=82)
    assert comb.signal_frequency_thz(1) == pytest.approx(194.67 + 0.02123)
    assert comb.idler_frequency_thz(1) == pytest.approx(194.67 - 0.02123)
    assert comb.signal_frequency_thz(40) == pytest.approx(194.67 + 40 * 0.02123)
    # signal and idler remain energy matched to the pump for every index
    for n in (1, 5, 82):
        mean = 0.5 * (comb.signal_frequency_thz(n) + comb.idler_frequency_thz(n))
        assert mean == pytest.approx(194.67, abs=1e-12)
    assert comb.mode(3, Side.SIGNAL).index == 3
    with pytest.raises(ValueError):
        comb.signal_frequency_thz(0)
    with pytest.raises(ValueError):
        comb.idler_frequency_thz(83)


def test_comb_validation():
    with pytest.raises(ValueError):
        FrequencyComb(fsr_ghz=0.0)
    with pytest.raises(ValueError):
        FrequencyComb(mode_count=0)


def test_load_jsi_basic():
    text = """\
# comment line
3\t5200.0\t12.0

5\t100\t0   # trailing comment
"""
    records = load_jsi(io.StringIO(text))
    assert [r.mode_index for r in records] == [3, 5]
    assert records[0].coincidence_rate_hz == 5200.0
    assert records[0].background_rate_hz == 12.0


def test_load_jsi_sorts_by_mode():
    records = load_jsi(["9\t1\t0", "2\t1\t0", "5\t1\t0"])
    assert [r.mode_index for r in records] == [2, 5, 9]


def test_load_jsi_malformed_rows_report_line_numbers():
    with pytest.raises(JsiParseError) as err:
        load_jsi(["1\t10\t0", "2\t10"])
    assert err.value.line_number == 2
    with pytest.raises(JsiParseError) as err:
        load_jsi(["# header", "x\t10\t0"])
    assert err.value.line_number == 2
    with pytest.raises(JsiParseError) as err:
        load_jsi(["1\tten\t0"])
    assert err.value.line_number == 1
    with pytest.raises(JsiParseError):
        load_jsi(["1\tinf\t0"])


def test_load_jsi_semantic_errors():
    with pytest.raises(ValueError, match="duplicate"):
        load_jsi(["4\t10\t0", "4\t20\t0"])
    with pytest.raises(ValueError):
        load_jsi(["0\t10\t0"])
    with pytest.raises(ValueError):
        load_jsi(["1\t-5\t0"])


def test_jsi_record_validation():
    with pytest.raises(ValueError):
        JsiRecord(mode_index=0, coincidence_rate_hz=1.0)
    with pytest.raises(ValueError):
        JsiRecord(mode_index=1, coincidence_rate_hz=-1.0)


def test_write_then_load_round_trip(tmp_path):
    records = [JsiRecord(7, 1234.5, 2.5), JsiRecord(2, 10.0, 0.0)]
    path = tmp_path / "rates.tsv"
    write_jsi(records, path, header="synthetic fixture")
    back = load_jsi(path)
    assert [r.mode_index for r in back] == [2, 7]
    assert back[1].coincidence_rate_hz == 1234.5
    assert back[1].background_rate_hz == 2.5
    assert path.read_text().startswith("# synthetic fixture\n")


def test_channel_occupancy():
    wide = ChannelSpec(center_mode=10, width_resonances=3)
    assert wide.occupied_modes == (9, 10, 11)
    assert wide.first_mode == 9 and wide.last_mode == 11
    assert wide.max_dimension == 3
    narrow = ChannelSpec(center_mode=10, width_resonances=2)
    assert narrow.occupied_modes == (10, 11)
    assert ChannelSpec(center_mode=1, width_resonances=2).first_mode == 1
    with pytest.raises(ValueError):
        ChannelSpec(center_mode=10, width_resonances=4)
    with pytest.raises(ValueError):
        ChannelSpec(center_mode=1, width_resonances=3)  # spills below mode 1


def _brute_force_max_channels(usable, width):
    """Exhaustive non-overlapping placement count (oracle for small combs)."""
    modes = set(usable)
    starts = sorted(
        m for m in modes if all(m + i in modes for i in range(width))
    )

    def best(i, blocked_until):
        if i == len(starts):
            return 0
        skip = best(i + 1, blocked_until)
        if starts[i] >= blocked_until:
            return max(skip, 1 + best(i + 1, starts[i] + width))
        return skip

    return best(0, -(10**9))


@settings(max_examples=120, deadline=None)
@given(
    mask=st.lists(st.booleans(), min_size=1, max_size=12),
    width=st.sampled_from([2, 3]),
)
def test_allocation_is_count_optimal(mask, width):
    usable = [i + 1 for i, keep in enumerate(mask) if keep]
    records = [JsiRecord(m, 2000.0, 0.0) for m in usable]
    got = allocate_channels(records, width, 1000.0)
    assert len(got) == _brute_force_max_channels(usable, width)
    # placements must be disjoint and inside the usable set
    taken = set()
    for ch in got:
        assert ch.width_resonances == width
        assert set(ch.occupied_modes) <= set(usable)
        assert not (set(ch.occupied_modes) & taken)
        taken |= set(ch.occupied_modes)


@settings(max_examples=60, deadline=None)
@given(
    rates=st.lists(
        st.floats(min_value=0.0, max_value=5000.0), min_size=1, max_size=12
    ),
    floors=st.tuples(
        st.floats(min_value=0.0, max_value=5000.0),
        st.floats(min_value=0.0, max_value=5000.0),
    ),
)
def test_allocation_monotone_in_rate_floor(rates, floors):
    records = [JsiRecord(i + 1, r, 0.0) for i, r in enumerate(rates)]
    lo, hi = sorted(floors)
    assert len(allocate_channels(records, 3, hi)) <= len(
        allocate_channels(records, 3, lo)
    )


def test_allocation_on_packaged_fixture():
    records = _fixture_records()
    assert len(records) == 80
    assert len(allocate_channels(records, 3, 1000.0)) == 21
    assert len(allocate_channels(records, 2, 500.0)) == 38
    assert len(allocate_channels(records, 3, 0.0)) == 26


def test_allocation_argument_validation():
    with pytest.raises(ValueError):
        allocate_channels([], width_resonances=5)
    with pytest.raises(ValueError):
        allocate_channels([], rate_floor_hz=-1.0)
    assert allocate_channels([], 3, 0.0) == []


def test_mode_offsets_patterns():
    assert mode_offsets(2) == (-1, 1)
    assert mode_offsets(3) == (-1, 0, 1)
    assert mode_offsets(4) == (-2, -1, 1, 2)
    assert mode_offsets(5) == (-2, -1, 0, 1, 2)
    assert mode_offsets(2, adjacent=True) == (0, 1)
    with pytest.raises(ValueError):
        mode_offsets(3, adjacent=True)
    with pytest.raises(ValueError):
        mode_offsets(1)


def test_channel_modes_respects_capacity():
    ch = ChannelSpec(center_mode=20, width_resonances=3)
    assert channel_modes(ch) == (19, 20, 21)
    assert channel_modes(ch, dimension=2) == (19, 21)
    with pytest.raises(ValueError):
        channel_modes(ChannelSpec(center_mode=20, width_resonances=2), dimension=3)
    assert channel_modes(ChannelSpec(center_mode=20, width_resonances=2)) == (20, 21)


def test_bell_state_phases_follow_slope():
    comb = FrequencyComb(phase_slope_rad=0.065)
    state = bell_state(comb, center_mode=40, dimension=3)
    assert state.mode_phases == pytest.approx((-0.065, 0.0, 0.065))
    state2 = bell_state(comb, center_mode=40, dimension=2)
    assert state2.mode_phases == pytest.approx((-0.065, 0.065))
    adj = bell_state(comb, center_mode=40, dimension=2, adjacent=True)
    assert adj.mode_phases == pytest.approx((0.0, 0.065))


def test_bell_state_range_checks():
    comb = FrequencyComb(mode_count=82)
    with pytest.raises(ValueError):
        bell_state(comb, center_mode=1, dimension=3)
    with pytest.raises(ValueError):
        bell_state(comb, center_mode=82, dimension=3)
    with pytest.raises(ValueError):
        bell_state(comb, center_mode=82, dimension=2, adjacent=True)
    # d=5 needs two modes of margin on both sides
    assert bell_state(comb, 3, 5).mode_phases[0] == pytest.approx(-0.13)
