"""Command-line interface.

Exit codes: 0 success, 1 operational failure, 2 usage error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from atmocat import __version__
from atmocat.config import Config, load_config
from atmocat.cql.parser import parse_cql
from atmocat.cql.search import SearchQuery, search
from atmocat.crawl.engine import run_crawl
from atmocat.crawl.frontier import CrawlTask
from atmocat.crawl.seeds import read_seed_file
from atmocat.crawl.transport import HttpTransport, ManualClock, SimulatedWeb, SystemClock
from atmocat.errors import AtmocatError, CqlSyntaxError, InvalidQuery
from atmocat.harvest import Harvester
from atmocat.semantic import load_vocabulary_file
from atmocat.stats import (
    classify_countries, countries_csv, countries_json, country_counts, providers_csv,
    providers_json, top_providers,
)
from atmocat.store import Catalogue, workspace_to_dict

log = logging.getLogger("atmocat")


class Failure(click.ClickException):
    exit_code = 1


class Env:
    def __init__(self, config: Config, web: str | None, plain: bool):
        self.config = config
        self.web = web or config.web
        self.plain = plain
        self._transport = None
        self._clock = None

    def store_path(self, override: str | None) -> str:
        value = override or self.config.store
        return value if value == ":memory:" else str(self.config.path(value))

    def open_store(self, override: str | None) -> Catalogue:
        path = self.store_path(override)
        if path != ":memory:" and not Path(path).parent.is_dir():
            raise Failure(f"cannot open store {path}: directory does not exist")
        try:
            return Catalogue(path)
        except AtmocatError as exc:
            raise Failure(str(exc)) from None

    def transport_and_clock(self):
        if self._transport is None:
            if self.web:
                # a simulated web runs on its own clock so politeness delays cost nothing
                self._clock = ManualClock(0)
                try:
                    self._transport = SimulatedWeb.from_manifest(self.web, self._clock)
                except (OSError, KeyError, ValueError) as exc:
                    raise Failure(f"cannot load simulated web {self.web}: {exc}") from None
            else:
                self._clock = SystemClock()
                self._transport = HttpTransport()
        return self._transport, self._clock

    def harvester(self, store: Catalogue, vocab: str | None = None) -> Harvester:
        try:
            vocabulary = load_vocabulary_file(vocab) if vocab else self.config.load_vocabulary()
        except (OSError, AtmocatError) as exc:
            raise Failure(f"cannot load vocabulary: {exc}") from None
        return Harvester(store, vocabulary, self.config.threshold, self.config.geo_resolver(),
                         self.config.scoring)


def _emit(data) -> None:
    click.echo(json.dumps(data, indent=2, sort_keys=False))


store_option = click.option("--store", "store", metavar="PATH",
                            help="Catalogue database (overrides config).")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="YAML config file.")
@click.option("--web", type=click.Path(dir_okay=False), default=None,
              help="Serve HTTP from a simulated-web manifest instead of the network.")
@click.option("--no-color", "plain", is_flag=True, help="Plain output (no styling).")
@click.option("-v", "--verbose", count=True, help="More logging.")
@click.version_option(__version__, prog_name="atmocat")
@click.pass_context
def main(ctx, config_path, web, plain, verbose):
    """Discover, catalogue and search OGC services holding atmospheric data."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = load_config(config_path)
    except AtmocatError as exc:
        raise Failure(str(exc)) from None
    ctx.obj = Env(config, web, plain)


@main.command()
@click.option("--keywords", help="Search phrase routed through the configured seed provider.")
@click.option("--seeds", "seeds_file", type=click.Path(dir_okay=False), help="Seed URL file.")
@click.option("--max-depth", type=click.IntRange(min=0), default=None)
@click.option("--max-pages", type=click.IntRange(min=1), default=None)
@click.option("--delay-ms", type=click.FloatRange(min=0), default=None,
              help="Per-host politeness delay.")
@click.option("--vocab", type=click.Path(dir_okay=False), help="Vocabulary file.")
@store_option
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON.")
@click.pass_obj
def crawl(env: Env, keywords, seeds_file, max_depth, max_pages, delay_ms, vocab, store, as_json):
    """Run a focused crawl and ingest what it finds."""
    if not keywords and not seeds_file:
        raise click.UsageError("give --seeds FILE or --keywords TEXT")
    cfg = env.config
    try:
        if seeds_file:
            seeds = read_seed_file(seeds_file)
        else:
            seeds = cfg.seed_provider().seeds_for(keywords.split())
    except (OSError, AtmocatError) as exc:
        raise Failure(f"cannot read seeds: {exc}") from None
    if not seeds:
        raise Failure("no seed URLs to start from")
    catalogue = env.open_store(store)
    transport, clock = env.transport_and_clock()
    task = CrawlTask(
        keywords=keywords.split() if keywords else [],
        seed_urls=seeds,
        max_depth=cfg.max_depth if max_depth is None else max_depth,
        max_pages=cfg.max_pages if max_pages is None else max_pages,
        per_host_delay_ms=cfg.per_host_delay_ms if delay_ms is None else delay_ms,
    )
    with catalogue:
        report = run_crawl(task, transport, env.harvester(catalogue, vocab), clock,
                           cfg.crawl_settings())
    data = report.to_dict()
    if as_json:
        _emit(data)
        return
    for key in ("pagesVisited", "capabilitiesFound", "servicesIngested",
                "servicesRejectedBySemantics"):
        click.echo(f"{key}: {data[key]}")
    click.echo(f"errors: {len(data['errors'])}")
    for err in data["errors"]:
        click.echo(f"  {err['kind']}  {err['url']}")


@main.command()
@click.argument("url")
@click.option("--vocab", type=click.Path(dir_okay=False), help="Vocabulary file.")
@store_option
@click.pass_obj
def harvest(env: Env, url, vocab, store):
    """Harvest one capabilities URL and print the ingest summary as JSON."""
    catalogue = env.open_store(store)
    transport, clock = env.transport_and_clock()
    with catalogue:
        try:
            outcome = env.harvester(catalogue, vocab).harvest(url, transport, clock,
                                                              env.config.timeout_s)
        except AtmocatError as exc:
            raise Failure(f"{type(exc).__name__}: {exc}") from None
    _emit(outcome.summary())


def _bbox(text):
    if text is None:
        return None
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise click.BadParameter("expected minLon,minLat,maxLon,maxLat") from None
    if len(values) != 4:
        raise click.BadParameter("expected minLon,minLat,maxLon,maxLat")
    return values


@main.command("search")
@click.option("--q", "text", help="Free text; every word must match.")
@click.option("--cql", help="CQL constraint.")
@click.option("--formats", help="Comma-separated output formats (any of).")
@click.option("--srs", help="Required spatial reference system.")
@click.option("--bbox", callback=lambda c, p, v: _bbox(v), help="minLon,minLat,maxLon,maxLat")
@click.option("--time", "time_range", nargs=2, default=None, metavar="START END")
@click.option("--offset", type=click.IntRange(min=0), default=0)
@click.option("--limit", type=int, default=20)
@click.option("--format", "fmt", type=click.Choice(["table", "json"]), default="table")
@store_option
@click.pass_obj
def search_cmd(env: Env, text, cql, formats, srs, bbox, time_range, offset, limit, fmt, store):
    """Search catalogued layers."""
    try:
        expr = parse_cql(cql) if cql else None
    except CqlSyntaxError as exc:
        raise click.UsageError(f"bad --cql: {exc}") from None
    try:
        q = SearchQuery(free_text=text, time_range=tuple(time_range) if time_range else None,
                        formats=[f.strip() for f in formats.split(",") if f.strip()] if formats
                        else None, bbox=bbox, srs=srs, cql=expr, offset=offset, limit=limit)
    except InvalidQuery as exc:
        raise click.UsageError(str(exc)) from None
    catalogue = env.open_store(store)
    with catalogue:
        page = search(catalogue, q)
    if fmt == "json":
        _emit(page.to_dict())
        return
    for r in page.results:
        click.echo(f"{r.layer_id}\t{r.match_rank:.2f}\t{r.quality_score:.3f}\t{r.title}")


@main.command()
@click.option("--countries", is_flag=True, help="Services per country with natural-breaks classes.")
@click.option("--providers", type=click.IntRange(min=1), default=None, metavar="N",
              help="Top N providers.")
@click.option("--country", help="Restrict --providers to one country code.")
@click.option("--k", type=click.IntRange(min=1), default=6, show_default=True,
              help="Number of classes for --countries.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@store_option
@click.pass_obj
def stats(env: Env, countries, providers, country, k, fmt, store):
    """Export catalogue statistics."""
    if countries == (providers is not None):
        raise click.UsageError("give exactly one of --countries or --providers N")
    catalogue = env.open_store(store)
    with catalogue:
        if countries:
            result = classify_countries(country_counts(catalogue), k)
            out = countries_csv(result) if fmt == "csv" else countries_json(result)
        else:
            rows = top_providers(catalogue, providers, country)
            out = providers_csv(rows) if fmt == "csv" else providers_json(rows)
    click.echo(out, nl=not out.endswith("\n"))


@main.command()
@click.option("--listen", help="host:port (overrides config).")
@store_option
@click.pass_obj
def serve(env: Env, listen, store):
    """Run the HTTP service until interrupted."""
    import uvicorn

    from atmocat.api import create_app

    if listen:
        env.config.listen = listen
    host, port = env.config.host_port
    catalogue = env.open_store(store)
    transport, clock = env.transport_and_clock()
    app = create_app(catalogue, env.config, transport=transport, clock=clock)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    except KeyboardInterrupt:
        pass
    finally:
        catalogue.close()


# --- workspaces ------------------------------------------------------------

@main.group()
def workspace():
    """Manage user workspaces."""


def _show(ws) -> None:
    _emit(workspace_to_dict(ws))


@workspace.command("register-user")
@click.option("--email", required=True)
@click.option("--name", "full_name", default="")
@click.option("--institution", default="")
@click.password_option(confirmation_prompt=False)
@store_option
@click.pass_obj
def ws_register(env: Env, email, full_name, institution, password, store):
    """Register a user who can own workspaces."""
    with env.open_store(store) as catalogue:
        try:
            click.echo(catalogue.register_user(email, full_name, institution, password))
        except AtmocatError as exc:
            raise Failure(f"{type(exc).__name__}: {exc}") from None


@workspace.command("create")
@click.option("--user", "user_id", required=True)
@click.option("--name", required=True)
@click.option("--srs", default="EPSG:4326", show_default=True)
@store_option
@click.pass_obj
def ws_create(env: Env, user_id, name, srs, store):
    with env.open_store(store) as catalogue:
        try:
            _show(catalogue.get_workspace(catalogue.create_workspace(user_id, name, srs)))
        except AtmocatError as exc:
            raise Failure(f"{type(exc).__name__}: {exc}") from None


@workspace.command("add-layer")
@click.argument("workspace_id", type=int)
@click.argument("layer_id", type=int)
@click.option("--order", "display_order", type=int, required=True)
@click.option("--style", help="Style override as a JSON object.")
@store_option
@click.pass_obj
def ws_add(env: Env, workspace_id, layer_id, display_order, style, store):
    try:
        style_override = json.loads(style) if style else None
    except ValueError:
        raise click.BadParameter("must be JSON", param_hint="--style") from None
    if style_override is not None and not isinstance(style_override, dict):
        raise click.BadParameter("must be a JSON object", param_hint="--style")
    with env.open_store(store) as catalogue:
        try:
            _show(catalogue.add_layer_to_workspace(workspace_id, layer_id, display_order,
                                                   style_override))
        except AtmocatError as exc:
            raise Failure(f"{type(exc).__name__}: {exc}") from None


@workspace.command("remove-layer")
@click.argument("workspace_id", type=int)
@click.argument("layer_id", type=int)
@store_option
@click.pass_obj
def ws_remove(env: Env, workspace_id, layer_id, store):
    with env.open_store(store) as catalogue:
        try:
            _show(catalogue.remove_layer_from_workspace(workspace_id, layer_id))
        except AtmocatError as exc:
            raise Failure(f"{type(exc).__name__}: {exc}") from None


@workspace.command("show")
@click.argument("workspace_id", type=int)
@store_option
@click.pass_obj
def ws_show(env: Env, workspace_id, store):
    with env.open_store(store) as catalogue:
        try:
            _show(catalogue.get_workspace(workspace_id))
        except AtmocatError as exc:
            raise Failure(f"{type(exc).__name__}: {exc}") from None


if __name__ == "__main__":
    main()
