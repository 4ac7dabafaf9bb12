import random
from urllib.parse import parse_qs, urlsplit

import pytest
from hypothesis import given, settings, strategies as st

from atmocat.capabilities import LayerDraft, ServiceDraft, ServiceType
from atmocat.cql import SearchQuery, parse_cql, search, thumbnail_url
from atmocat.errors import InvalidQuery
from atmocat.store import Catalogue

FORMATS = ["image/png", "image/jpeg", "image/gif", "application/json"]
WORDS = ["ozone", "wind", "sea", "surface", "temperature", "cloud", "snow", "road"]


def fifty_layer_store() -> Catalogue:
    rng = random.Random(7)
    store = Catalogue()
    for s in range(5):
        layers = []
        for i in range(10):
            x0 = rng.uniform(-180, 100)
            y0 = rng.uniform(-90, 40)
            layers.append(LayerDraft(
                name=f"l{s}_{i}",
                title=" ".join(rng.sample(WORDS, 2)),
                abstract=" ".join(rng.sample(WORDS, 3)),
                formats=rng.sample(FORMATS, rng.randint(0, 3)),
                supported_srs=rng.sample(["EPSG:4326", "EPSG:3857", "CRS:84"], rng.randint(1, 2)),
                bounding_box=(x0, y0, x0 + rng.uniform(1, 80), y0 + rng.uniform(1, 50)),
                time_extent=(f"20{10 + i}-01-01", f"20{11 + i}-06-30") if i % 3 else None,
            ))
        store.upsert_service(
            ServiceDraft(ServiceType.WMS if s % 2 else ServiceType.WFS, "1.3.0" if s % 2 else "2.0.0",
                         title=f"svc {s}", capabilities_url=f"http://s{s}.example/ows"),
            None, layers)
    return store


@pytest.fixture(scope="module")
def fifty():
    store = fifty_layer_store()
    yield store
    store.close()


def ids(page):
    return [r.layer_id for r in page.results]


def test_fixture_has_fifty_layers(fifty):
    assert fifty.layer_count() == 50


@pytest.mark.parametrize("fmt", FORMATS)
def test_format_facet_matches_direct_filter(fifty, fmt):
    expected = {r["layerId"] for r in fifty.layer_rows() if fmt in r["formats"]}
    page = search(fifty, SearchQuery(formats=[fmt], limit=1000))
    assert set(ids(page)) == expected
    assert page.total == len(expected)


def test_formats_any_of(fifty):
    want = {"image/png", "image/gif"}
    expected = {r["layerId"] for r in fifty.layer_rows() if want & set(r["formats"])}
    assert set(ids(search(fifty, SearchQuery(formats=sorted(want), limit=1000)))) == expected


def test_srs_bbox_time_facets(fifty):
    q = SearchQuery(srs="epsg:3857", bbox=(-20, -20, 20, 20), time_range=("2014-01-01", "2015-12-31"),
                    limit=1000)
    got = set(ids(search(fifty, q)))
    for r in fifty.layer_rows():
        b = r["bbox"]
        hit = ("EPSG:3857" in r["srs"] and b[0] <= 20 and b[2] >= -20 and b[1] <= 20 and b[3] >= -20
               and r["timeStart"] is not None and r["timeStart"] <= "2015-12-31"
               and r["timeEnd"] >= "2014-01-01")
        assert (r["layerId"] in got) == hit


def test_free_text_tokens_all_required_and_ranked(fifty):
    page = search(fifty, SearchQuery(free_text="sea ozone", limit=1000))
    rows = {r["layerId"]: r for r in fifty.layer_rows()}
    for res in page.results:
        text = " ".join([rows[res.layer_id]["title"], rows[res.layer_id]["abstract"]]).lower()
        assert "sea" in text and "ozone" in text
    keys = [(-r.match_rank, -r.quality_score, r.layer_id) for r in page.results]
    assert keys == sorted(keys)


def test_sst_layer_ranks_first(store):
    store.upsert_service(ServiceDraft(ServiceType.WMS, "1.3.0", capabilities_url="http://a/wms"), None,
                         [LayerDraft("sst", title="Sea Surface Temperature"),
                          LayerDraft("wind", title="Wind speed", abstract="near the sea surface")])
    page = search(store, SearchQuery(free_text="Sea Surface Temperature"))
    assert page.total == 1
    assert page.results[0].title == "Sea Surface Temperature"
    assert page.results[0].match_rank == 1.0


def test_empty_store(store):
    page = search(store, SearchQuery(free_text="anything"))
    assert page.total == 0 and page.results == []


def test_cql_facet(fifty):
    q = SearchQuery(cql=parse_cql("name LIKE 'l2_%'"), limit=1000)
    assert {fifty.get_layer(i).name for i in ids(search(fifty, q))} == {f"l2_{i}" for i in range(10)}


@settings(max_examples=40, deadline=None)
@given(limit=st.integers(1, 20), text=st.sampled_from(["", "sea", "wind cloud", "road"]))
def test_paging_consistency(fifty, limit, text):
    full = search(fifty, SearchQuery(free_text=text, limit=1000))
    pages = []
    for offset in range(0, full.total, limit):
        page = search(fifty, SearchQuery(free_text=text, offset=offset, limit=limit))
        assert page.total == full.total
        pages += ids(page)
    assert pages == ids(full)


@pytest.mark.parametrize("kw, locator", [
    ({"limit": 0}, "limit"),
    ({"limit": 1001}, "limit"),
    ({"offset": -1}, "offset"),
    ({"time_range": ("2020-01-02", "2020-01-01")}, "timeRange"),
    ({"time_range": ("soon", "2020-01-01")}, "timeRange"),
    ({"bbox": (10, 0, 0, 5)}, "bbox"),
])
def test_invalid_queries(kw, locator):
    with pytest.raises(InvalidQuery) as info:
        SearchQuery(**kw)
    assert info.value.locator == locator


# --- thumbnails ------------------------------------------------------------

def row(service_type, version, name="sst", bbox=None, url="http://x.gov/wms?map=a&SERVICE=WMS"):
    return {"serviceType": service_type, "version": version, "name": name, "bbox": bbox,
            "serviceUrl": url}


def params(url):
    return {k: v[0] for k, v in parse_qs(urlsplit(url).query, keep_blank_values=True).items()}


def test_wms_130_thumbnail():
    url = thumbnail_url(row("WMS", "1.3.0"))
    p = params(url)
    assert p["service"] == "WMS" and p["request"] == "GetMap" and p["layers"] == "sst"
    assert p["width"] == "256" and p["height"] == "128" and p["format"] == "image/png"
    assert p["CRS"] == "EPSG:4326" and "SRS" not in p
    assert p["bbox"] == "-90,-180,90,180"
    assert p["map"] == "a"
    assert "SERVICE" not in p


def test_wms_111_uses_srs_and_lon_lat_order():
    p = params(thumbnail_url(row("WMS", "1.1.1", bbox=(-10, 20, 30, 40.5))))
    assert p["SRS"] == "EPSG:4326" and "CRS" not in p
    assert p["bbox"] == "-10,20,30,40.5"


def test_wfs_thumbnails():
    p2 = params(thumbnail_url(row("WFS", "2.0.0", url="http://x/wfs")))
    assert (p2["request"], p2["typeNames"], p2["count"]) == ("GetFeature", "sst", "10")
    p1 = params(thumbnail_url(row("WFS", "1.1.0", url="http://x/wfs")))
    assert (p1["typeName"], p1["maxFeatures"]) == ("sst", "10")


@pytest.mark.parametrize("r", [row("CSW", "2.0.2"), row("WCS", "1.0.0"), row("WMS", "1.3.0", name="")])
def test_no_thumbnail(r):
    assert thumbnail_url(r) is None
