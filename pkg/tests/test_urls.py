import pytest
from hypothesis import given, strategies as st

from atmocat.crawl.urls import ProbePatterns, derive_ows_probes, extract_links, normalize_url
from atmocat.errors import MalformedUrl


@pytest.mark.parametrize("raw, expected", [
    ("HTTP://Example.com:80/a/../b?x=1", "http://example.com/b?x=1"),
    ("http://h/ows?REQUEST=GetCapabilities&SERVICE=WMS",
     "http://h/ows?request=GetCapabilities&service=WMS"),
    ("https://H.org:443", "https://h.org/"),
    ("http://h:8080/a/./b/../c#frag", "http://h:8080/a/c"),
    ("http://h/p?b=2&a=1&b=1", "http://h/p?a=1&b=2&b=1"),
])
def test_normalize(raw, expected):
    assert normalize_url(raw) == expected


@pytest.mark.parametrize("raw", ["not a url", "", "http://", "ftp//x", "relative/path"])
def test_normalize_rejects(raw):
    with pytest.raises(MalformedUrl):
        normalize_url(raw)


def test_normalize_resolves_against_base():
    assert normalize_url("../x.html", "http://h/a/b/") == "http://h/a/x.html"


_segment = st.text("abcXYZ019-_.", min_size=1, max_size=6)


@given(host=st.text("abcdefgh", min_size=1, max_size=8),
       segs=st.lists(_segment, max_size=4),
       query=st.lists(st.tuples(st.text("abKEY", min_size=1, max_size=3),
                                st.text("xyz01", max_size=3)), max_size=4))
def test_normalize_is_idempotent(host, segs, query):
    url = f"HTTP://{host.upper()}.Example.COM/" + "/".join(segs)
    if query:
        url += "?" + "&".join(f"{k}={v}" for k, v in query)
    once = normalize_url(url)
    assert normalize_url(once) == once


def test_extract_links_rules():
    html = b'<a href="a.html">1</a><a href="/b">2</a><a href="mailto:x@y">3</a>'
    assert extract_links(html, "http://h/d/") == {"http://h/d/a.html", "http://h/b"}


def test_extract_links_empty_and_duplicates():
    assert extract_links(b"<p>no anchors</p>", "http://h/") == set()
    html = b'<a href="./a">x</a><a href="a">y</a>'
    assert extract_links(html, "http://h/d/") == {"http://h/d/a"}


def test_extract_links_skips_bad_hrefs_and_honours_base_tag():
    html = b'<base href="http://other/x/"><a href="http://[bad">b</a><a href="y">ok</a>'
    assert extract_links(html, "http://h/") == {"http://other/x/y"}


def test_probe_with_service_param():
    assert derive_ows_probes("http://h/ows?service=WMS") == [
        "http://h/ows?request=GetCapabilities&service=WMS"]


def test_probe_from_path_pattern():
    assert derive_ows_probes("http://h/geoserver/wms") == [
        "http://h/geoserver/wms?request=GetCapabilities&service=WMS"]


def test_probe_ows_segment_yields_every_type():
    probes = derive_ows_probes("http://h/ows")
    assert len(probes) == 5
    assert all("request=GetCapabilities" in p for p in probes)


def test_no_probe_for_plain_page():
    assert derive_ows_probes("http://h/index.html") == []


def test_probe_patterns_are_configuration(tmp_path):
    cfg = tmp_path / "patterns.yaml"
    cfg.write_text("patterns:\n  - segment: mapserv\n    services: [WMS]\n")
    patterns = ProbePatterns.from_file(cfg)
    assert derive_ows_probes("http://h/cgi-bin/mapserv", patterns) == [
        "http://h/cgi-bin/mapserv?request=GetCapabilities&service=WMS"]
    assert derive_ows_probes("http://h/wms", patterns) == []
