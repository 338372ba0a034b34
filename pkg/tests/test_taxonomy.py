import itertools

import pytest

from radbench.errors import AgeOutOfRange, TaxonomyError, UnknownCountry
from radbench.taxonomy import (
    DEFAULT_AGE_BINNING,
    AgeBinning,
    LocationScope,
    LocationTaxonomy,
    age_group_of,
    default_taxonomy,
    location_scopes,
    resolve,
)

S = LocationScope


@pytest.mark.parametrize(
    "code, expected",
    [("GH", ("Western Africa", "Africa")), ("IN", ("Southern Asia", "Asia")), ("gh", ("Western Africa", "Africa"))],
)
def test_resolve(code, expected):
    assert resolve(code) == expected


def test_resolve_unknown():
    with pytest.raises(UnknownCountry):
        resolve("ZZ")


def test_shipped_table_shape():
    tax = default_taxonomy()
    assert len(tax.entries) == 249
    regions = {r for r, _ in tax.entries.values()}
    # sub-continental granularity of the kind the framework's examples use
    assert {"Western Africa", "South-eastern Asia", "Northern Europe"} <= regions
    assert tax.resolve("SG") == ("South-eastern Asia", "Asia")
    assert tax.resolve("SE") == ("Northern Europe", "Europe")


@pytest.mark.parametrize(
    "case_c, origin, expected",
    [
        ("GH", "GH", {S.Country, S.Region, S.Continent, S.Global}),
        ("NG", "GH", {S.Region, S.Continent, S.Global}),
        ("KE", "GH", {S.Continent, S.Global}),
        ("IN", "GH", {S.Global}),
    ],
)
def test_location_scopes(case_c, origin, expected):
    assert location_scopes(case_c, origin) == expected


def test_location_scopes_unknown():
    with pytest.raises(UnknownCountry):
        location_scopes("ZZ", "GH")
    with pytest.raises(UnknownCountry):
        location_scopes("GH", "ZZ")


def test_scopes_upward_closed_over_whole_table():
    tax = default_taxonomy()
    codes = sorted(tax.entries)
    for a, b in itertools.product(codes, codes):
        scopes = tax.location_scopes(a, b)
        assert S.Global in scopes
        levels = sorted(scopes)
        # upward closed == contiguous run ending at Global
        assert levels == list(range(min(levels), S.Global + 1))


def test_identity_scope_is_full_set():
    tax = default_taxonomy()
    for code in tax.entries:
        assert tax.location_scopes(code, code) == set(S)


def test_scope_order():
    assert list(S) == [S.Country, S.Region, S.Continent, S.Global]
    assert S.Country < S.Region < S.Continent < S.Global


def test_region_spanning_two_continents_rejected():
    with pytest.raises(TaxonomyError):
        LocationTaxonomy.from_rows([("AA", "Somewhere", "Africa"), ("BB", "Somewhere", "Europe")])


def test_duplicate_country_rejected():
    with pytest.raises(TaxonomyError):
        LocationTaxonomy.from_rows([("GH", "Western Africa", "Africa"), ("gh", "Western Africa", "Africa")])


def test_taxonomy_csv_header_enforced():
    with pytest.raises(TaxonomyError):
        LocationTaxonomy.from_csv("code,region,continent\nGH,Western Africa,Africa\n")


def test_taxonomy_load_from_file(tmp_path):
    path = tmp_path / "mini_v2.csv"
    path.write_text("country,region,continent\nGH,Western Africa,Africa\nNG,Western Africa,Africa\n")
    tax = LocationTaxonomy.load(path)
    assert tax.version == "mini_v2"
    assert tax.location_scopes("NG", "GH") == {S.Region, S.Continent, S.Global}


@pytest.mark.parametrize("age, label", [(0, "0-9"), (9, "0-9"), (10, "10-19"), (45, "40-49"), (79, "70-79"), (80, "80+"), (129, "80+")])
def test_age_group_of(age, label):
    assert age_group_of(age) == label


@pytest.mark.parametrize("age", [-1, 130, 200])
def test_age_out_of_range(age):
    with pytest.raises(AgeOutOfRange):
        age_group_of(age)


def test_every_age_in_exactly_one_bin():
    binnings = [
        DEFAULT_AGE_BINNING,
        AgeBinning.from_rows([(0, 18, "child"), (18, 65, "adult"), (65, None, "senior")]),
        AgeBinning.from_rows([(0, 1, "infant"), (1, None, "rest")]),
    ]
    for b in binnings:
        for age in range(130):
            hits = [label for (lo, hi), label in zip(b.bins, b.labels) if lo <= age < hi]
            assert hits == [b.group_of(age)]


@pytest.mark.parametrize(
    "rows",
    [
        [(0, None, "all")],  # one bin
        [(1, 50, "a"), (50, None, "b")],  # does not start at 0
        [(0, 50, "a"), (60, None, "b")],  # gap
        [(0, 50, "a"), (40, None, "b")],  # overlap
        [(0, 50, "a"), (50, 100, "b")],  # does not reach 130
        [(0, 50, "a"), (50, None, "a")],  # duplicate label
    ],
)
def test_invalid_binnings(rows):
    with pytest.raises(TaxonomyError):
        AgeBinning.from_rows(rows)


def test_binning_csv_round_trip():
    text = "lo,hi,label\n0,40,young\n40,,old\n"
    b = AgeBinning.from_csv(text)
    assert b.group_of(39) == "young" and b.group_of(129) == "old"
    assert b.to_rows() == [[0, 40, "young"], [40, None, "old"]]
