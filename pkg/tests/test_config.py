import pytest

from atmocat.config import Config, config_from_mapping, load_config
from atmocat.crawl import SeedFileProvider, StubSeedProvider
from atmocat.errors import ConfigError
from conftest import WEB


def test_defaults():
    cfg = load_config(None, env={})
    assert cfg.per_host_delay_ms == 1000 and cfg.timeout_s == 10 and cfg.respect_robots
    assert cfg.scoring.weights == (0.5, 0.5) and cfg.scoring.half_life_ms == 2000
    assert cfg.host_port == ("127.0.0.1", 8080)
    assert len(cfg.load_vocabulary()) > 0


def test_file_and_env_override(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("store: data/cat.db\nlisten: 0.0.0.0:9000\nthreshold: 2\n"
                    "scoring: {weights: [0.7, 0.3], half_life_ms: 500}\n"
                    "service: {title: Test catalogue}\ngeo: {example.org: {latitude: 52.5, longitude: 13.4, country: DE}}\n")
    cfg = load_config(path, env={})
    assert cfg.path(cfg.store) == tmp_path / "data" / "cat.db"
    assert cfg.host_port == ("0.0.0.0", 9000)
    assert cfg.scoring.weights == (0.7, 0.3) and cfg.threshold == 2
    assert cfg.service.title == "Test catalogue"
    assert cfg.geo_resolver().resolve("http://maps.example.org/wms").country == "de"
    assert cfg.geo_resolver().resolve("http://x.example.gov/").country == "us"
    assert cfg.geo_resolver().resolve("http://10.0.0.1/").country == "unknown"
    env = {"ATMOCAT_STORE": ":memory:", "ATMOCAT_API_TOKEN": "t", "ATMOCAT_LISTEN": "h:1"}
    over = load_config(path, env=env)
    assert (over.store, over.api_token, over.host_port) == (":memory:", "t", ("h", 1))


@pytest.mark.parametrize("text", ["nonsense_key: 1\n", "respect_robots: maybe\n", "- a\n- b\n",
                                  "max_pages: [1]\n", "scoring: {weights: [1]}\n", "a: [\n"])
def test_bad_config(tmp_path, text):
    path = tmp_path / "c.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path, env={})


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent.yaml", env={})


def test_bad_listen():
    with pytest.raises(ConfigError):
        Config(listen="nowhere").host_port


def test_seed_providers():
    assert isinstance(config_from_mapping({"seeds": str(WEB / "search-results.yaml")}).seed_provider(),
                      StubSeedProvider)
    provider = config_from_mapping({"seeds": str(WEB / "seeds.txt")}).seed_provider()
    assert isinstance(provider, SeedFileProvider)
    assert provider.seeds_for(["anything"]) == ["http://portal.atmos-data.example.gov/",
                                                "http://www.meteo-links.example.de/"]
    stub = StubSeedProvider.from_file(WEB / "search-results.yaml")
    assert stub.seeds_for(["World", "SST"]) == ["http://portal.atmos-data.example.gov/"]
    assert len(stub.seeds_for(["unheard", "of"])) == 2
