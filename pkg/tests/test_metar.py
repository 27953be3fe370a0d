"""METAR decoding against the hand-decoded fixture corpus."""

from __future__ import annotations

from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from leraat.airports import Metar, UnrecognizedStation, parse_metar

from metar_fixtures import FIXTURES


def assert_expected(metar: Metar, expected: dict) -> None:
    assert metar.wind_dir_deg == expected["wind_dir"]
    assert metar.wind_speed_kt == expected["wind_speed"]
    assert metar.gust_kt == expected["gust"]
    if expected["vis_sm"] is None:
        assert metar.visibility_sm is None
    else:
        assert metar.visibility_sm == pytest.approx(expected["vis_sm"], rel=1e-9)
    assert metar.ceiling_ft == expected["ceiling_ft"]
    assert metar.temperature_c == expected["temp_c"]
    assert metar.dewpoint_c == expected["dew_c"]
    if expected["altimeter_inhg"] is None:
        assert metar.altimeter_inhg is None
    else:
        assert metar.altimeter_inhg == pytest.approx(expected["altimeter_inhg"], rel=1e-9)
    assert metar.remarks == expected["remarks"]


@pytest.mark.parametrize("raw,expected", FIXTURES, ids=[raw.split()[0] + f"_{i}" for i, (raw, _) in enumerate(FIXTURES)])
def test_fixture_corpus(raw, expected):
    metar = parse_metar(raw)
    assert metar.station == raw.split()[0]
    assert metar.raw == raw
    assert_expected(metar, expected)


@pytest.mark.parametrize("raw,expected", FIXTURES)
def test_byte_retention(raw, expected):
    metar = parse_metar(raw)
    assert Counter(metar.groups) + Counter(metar.remarks.split()) == Counter(raw.split())


def test_gust_exceeds_wind_speed():
    metar = parse_metar("KSFO 121756Z 28010G22KT 10SM FEW020 18/12 A3012")
    assert metar.gust_kt == 22 and metar.wind_speed_kt == 10
    assert metar.gust_kt > metar.wind_speed_kt


def test_calm_winds():
    metar = parse_metar("KATL 121852Z 00000KT 10SM SKC 25/14 A3020")
    assert metar.wind_speed_kt == 0
    assert metar.wind_dir_deg == "CALM"


def test_observation_time():
    metar = parse_metar("KSEA 121753Z 18012KT 2SM BKN008 12/10 A2970")
    assert (metar.observed_day, metar.observed_hour, metar.observed_minute) == (12, 17, 53)


def test_auto_and_cor_flags():
    assert parse_metar("KSLC 010154Z AUTO 34009KT 10SM 22/03 A3010").auto is True
    assert parse_metar("KDFW 121753Z COR 17010KT 5SM 31/21 A3005").corrected is True


def test_wind_variation():
    metar = parse_metar("EDDF 121820Z 25012KT 220V280 CAVOK 18/10 Q1019")
    assert metar.wind_var == (220, 280)


def test_cloud_layers_recorded():
    metar = parse_metar("KSEA 121753Z 18012KT 2SM FEW005 SCT010 BKN015 OVC020 12/10 A2970")
    assert [(layer.cover, layer.base_ft) for layer in metar.layers] == [
        ("FEW", 500), ("SCT", 1000), ("BKN", 1500), ("OVC", 2000),
    ]
    assert metar.ceiling_ft == 1500  # FEW/SCT do not set a ceiling


def test_station_must_be_four_alnum():
    with pytest.raises(UnrecognizedStation):
        parse_metar("SEATTLE 121753Z 18012KT")
    with pytest.raises(UnrecognizedStation):
        parse_metar("KS!A 121753Z 18012KT")
    with pytest.raises(UnrecognizedStation):
        parse_metar("   ")


def test_unknown_trailing_groups_never_abort():
    raw = "KSEA 121753Z 18012KT 2SM 12/10 A2970 $%& UNKNOWNGROUP 12345678"
    metar = parse_metar(raw)
    assert "UNKNOWNGROUP" in metar.remarks
    assert metar.wind_speed_kt == 12


def test_remarks_section_swallows_everything_after_rmk():
    raw = "KSEA 121753Z 18012KT 2SM 12/10 A2970 RMK 24008KT OVC001"
    metar = parse_metar(raw)
    # Groups after RMK must not be decoded, only retained.
    assert metar.wind_speed_kt == 12
    assert metar.ceiling_ft is None
    assert metar.remarks == "RMK 24008KT OVC001"


def test_raw_always_retained():
    for raw, _ in FIXTURES:
        assert parse_metar(raw).raw == raw


@given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), min_size=0, max_size=120))
@settings(max_examples=200, deadline=None)
def test_never_aborts_on_arbitrary_text(text):
    raw = "KSEA " + text
    metar = parse_metar(raw)
    assert metar.station == "KSEA"
    assert Counter(metar.groups) + Counter(metar.remarks.split()) == Counter(raw.split())
