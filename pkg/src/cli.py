"""
Command-line entry point: `policyflow <command> ...`.

Exit status is 0 on success, 1 on usage errors and 2 on data errors; errors
are reported on stderr (a JSON record with --format json).
"""

import functools
import re
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import click
import pandas as pd

from src.config import OUTPUT_FORMATS, Settings, configure_logging, get_settings, load_settings
from src.decomposition import exactness_report
from src.errors import ConfigError, PolicyFlowError
from src.experiments import (
    ccdf,
    diversity_matrix,
    matrix_view,
    run_depeering_experiment,
    run_diversity_experiment,
    run_peering_class_experiment,
)
from src.flow import min_cut_bounds
from src.graph_core import LabeledDigraph, load_graph
from src.ingest import (
    WeightTable,
    aggregate_pfx2as,
    augment_peering,
    depeer,
    load_peering_members,
    load_weights,
    parse_as_rel,
    to_labeled_graph,
)
from src.oracle import run_oracle
from src.policy_lang import PRESETS, TOKEN_PATTERN, PolicyNfa, compile_policy, load_nfa, preset
from src.reports import render_cut_report, render_exactness, render_frame, render_summary, to_json
from src.transform import dump_transformed, prepare_policy, prune_unreachable, tensor_transform


@dataclass(frozen=True)
class RunConfig:
    """One single-query invocation, assembled from CLI flags over Settings."""
    subcommand: str
    graph_path: Optional[str] = None
    policy_regex: Optional[str] = None
    policy_nfa: Optional[str] = None
    preset: Optional[str] = None
    source: Optional[str] = None
    sink: Optional[str] = None
    unit_capacities: bool = False
    output_format: str = "text"
    with_paths: bool = True
    prune: bool = True
    out_path: Optional[str] = None
    provenance_path: Optional[str] = None
    max_len: Optional[int] = None
    settings: Settings = Settings()

    def validate(self) -> None:
        given = [p for p in (self.policy_regex, self.policy_nfa, self.preset) if p]
        if len(given) != 1:
            raise ConfigError("give exactly one of --policy-regex, --policy-nfa or --preset")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"unknown output format {self.output_format!r}")
        if self.subcommand != "check-exact":
            if not self.graph_path:
                raise ConfigError("--graph is required")
            if not self.source or not self.sink:
                raise ConfigError("--source and --sink are required")


def resolve_policy(
    regex: Optional[str],
    nfa_path: Optional[str],
    preset_name: Optional[str],
    alphabet: Optional[frozenset] = None,
) -> PolicyNfa:
    """Build the policy NFA from whichever source was given, widened to the graph alphabet."""
    if preset_name:
        _, nfa = preset(preset_name)
    elif regex:
        sigma = alphabet if alphabet is not None else frozenset(re.findall(TOKEN_PATTERN, regex))
        nfa = compile_policy(regex, sigma)
    else:
        nfa = load_nfa(nfa_path)
    if alphabet is not None and not alphabet <= nfa.alphabet:
        nfa = replace(nfa, alphabet=nfa.alphabet | alphabet)
    return nfa


def _load_query_graph(config: RunConfig) -> LabeledDigraph:
    graph = load_graph(config.graph_path)
    return graph.with_unit_capacities() if config.unit_capacities else graph


def run(config: RunConfig) -> str:
    """Execute a single-query subcommand and return its rendered output."""
    config.validate()
    fmt = config.output_format

    if config.subcommand == "check-exact":
        graph = load_graph(config.graph_path) if config.graph_path else None
        nfa = resolve_policy(config.policy_regex, config.policy_nfa, config.preset,
                             graph.alphabet if graph else None)
        return render_exactness(exactness_report(nfa, config.settings.exact_decomposition_limit), fmt)

    graph = _load_query_graph(config)
    nfa = resolve_policy(config.policy_regex, config.policy_nfa, config.preset, graph.alphabet)

    if config.subcommand == "oracle":
        report = run_oracle(
            graph, nfa, config.source, config.sink, config.max_len,
            frontier_limit=config.settings.oracle_frontier_limit,
            path_limit=config.settings.oracle_path_limit,
        )
        record = report.to_dict(graph)
        if fmt == "json":
            return to_json(record)
        record["paths"] = len(record["paths"])
        return render_summary(record, fmt if fmt != "csv" else "text", title=f"{config.source} -> {config.sink}")

    aug = prepare_policy(nfa, config.settings.exact_decomposition_limit)

    if config.subcommand == "transform":
        tg = tensor_transform(graph, aug, config.source, config.sink)
        if config.prune:
            tg = prune_unreachable(tg)
        text, provenance = dump_transformed(tg)
        if not config.out_path:
            if config.provenance_path:
                Path(config.provenance_path).write_text(provenance, encoding="utf-8")
            return text
        Path(config.out_path).write_text(text, encoding="utf-8")
        sidecar = config.provenance_path or f"{config.out_path}.provenance.csv"
        Path(sidecar).write_text(provenance, encoding="utf-8")
        stats = {**tg.stats(), "exact": tg.exact, "out": config.out_path, "provenance": sidecar}
        return render_summary(stats, "json" if fmt == "json" else "text")

    report = min_cut_bounds(graph, aug, config.source, config.sink, prune=config.prune)
    if config.subcommand == "paths":
        rows = [
            {"path": p.to_text(), "labels": " ".join(p.labels), "flow": p.flow, "hops": len(p.edges)}
            for p in report.paths
        ]
        return render_frame(pd.DataFrame(rows, columns=["path", "labels", "flow", "hops"]), fmt)
    return render_cut_report(report, fmt, config.with_paths)


# click wiring

def _emit_error(exc: PolicyFlowError, fmt: Optional[str]) -> None:
    if fmt == "json":
        click.echo(to_json(exc.to_record()), err=True, nl=False)
    else:
        click.echo(f"error: {exc.message}", err=True)


def reports_errors(func: Callable) -> Callable:
    """Turn PolicyFlowError into an error record and the mapped exit status."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return func(*args, **kwargs)
        except PolicyFlowError as exc:
            _emit_error(exc, kwargs.get("fmt") or ctx.obj.output_format)
            ctx.exit(exc.exit_code)
    return wrapper


class PolicyFlowGroup(click.Group):
    """Click group whose usage errors exit with status 1."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args=args, prog_name=prog_name, complete_var=complete_var,
                              standalone_mode=False, **extra)
        except click.ClickException as exc:
            exc.show()
            sys.exit(1)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)
        except PolicyFlowError as exc:
            _emit_error(exc, None)
            sys.exit(exc.exit_code)
        sys.exit(rv if isinstance(rv, int) else 0)


def policy_options(func: Callable) -> Callable:
    for option in reversed([
        click.option("--policy-regex", help="Policy regular expression over edge labels"),
        click.option("--policy-nfa", type=click.Path(exists=True, dir_okay=False), help="Policy NFA file"),
        click.option("--preset", type=click.Choice(sorted(PRESETS)), help="Named policy"),
    ]):
        func = option(func)
    return func


def query_options(func: Callable) -> Callable:
    for option in reversed([
        click.option("--graph", "graph_path", required=True, type=click.Path(exists=True, dir_okay=False)),
        click.option("--source", required=True, help="Source node"),
        click.option("--sink", required=True, help="Sink node"),
        click.option("--format", "fmt", type=click.Choice(OUTPUT_FORMATS), default=None),
    ]):
        func = option(func)
    return policy_options(func)


def _config(subcommand: str, fmt: Optional[str], **values) -> RunConfig:
    settings: Settings = click.get_current_context().obj
    return RunConfig(subcommand=subcommand, output_format=fmt or settings.output_format,
                     settings=settings, **values)


@click.group(cls=PolicyFlowGroup)
@click.option("--verbose", is_flag=True, help="Log progress (INFO)")
@click.option("--debug", is_flag=True, help="Log details (DEBUG)")
@click.option("--env-file", type=click.Path(dir_okay=False), default=None, help="Settings file (.env)")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, debug: bool, env_file: Optional[str]):
    """Policy-compliant path diversity and bisection bandwidth."""
    settings = load_settings(env_file) if env_file else get_settings()
    level = "DEBUG" if debug else "INFO" if verbose else settings.log_level
    configure_logging(level)
    ctx.obj = settings


@cli.command()
@query_options
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Write the transformed graph here")
@click.option("--provenance", "provenance_path", type=click.Path(dir_okay=False), help="Provenance CSV path")
@click.option("--no-prune", is_flag=True, help="Keep unreachable product nodes")
@reports_errors
def transform(graph_path, source, sink, fmt, policy_regex, policy_nfa, preset, out_path, provenance_path, no_prune):
    """Emit the transformed graph (v@q node names) and its provenance sidecar."""
    click.echo(run(_config(
        "transform", fmt, graph_path=graph_path, source=source, sink=sink, policy_regex=policy_regex,
        policy_nfa=policy_nfa, preset=preset, out_path=out_path, provenance_path=provenance_path,
        prune=not no_prune,
    )), nl=False)


@cli.command()
@query_options
@click.option("--unit-capacities", is_flag=True, help="Treat every edge as capacity 1")
@click.option("--no-paths", is_flag=True, help="Omit realizing paths")
@reports_errors
def mincut(graph_path, source, sink, fmt, policy_regex, policy_nfa, preset, unit_capacities, no_paths):
    """Lower/upper bounds on the policy-compliant min-cut (bisection bandwidth)."""
    click.echo(run(_config(
        "mincut", fmt, graph_path=graph_path, source=source, sink=sink, policy_regex=policy_regex,
        policy_nfa=policy_nfa, preset=preset, unit_capacities=unit_capacities, with_paths=not no_paths,
    )), nl=False)


@cli.command()
@query_options
@click.option("--no-paths", is_flag=True, help="Omit realizing paths")
@reports_errors
def diversity(graph_path, source, sink, fmt, policy_regex, policy_nfa, preset, no_paths):
    """Path diversity: mincut with unit capacities."""
    click.echo(run(_config(
        "diversity", fmt, graph_path=graph_path, source=source, sink=sink, policy_regex=policy_regex,
        policy_nfa=policy_nfa, preset=preset, unit_capacities=True, with_paths=not no_paths,
    )), nl=False)


@cli.command()
@query_options
@click.option("--unit-capacities", is_flag=True, help="Treat every edge as capacity 1")
@reports_errors
def paths(graph_path, source, sink, fmt, policy_regex, policy_nfa, preset, unit_capacities):
    """List the paths realizing the upper-bound flow."""
    click.echo(run(_config(
        "paths", fmt, graph_path=graph_path, source=source, sink=sink, policy_regex=policy_regex,
        policy_nfa=policy_nfa, preset=preset, unit_capacities=unit_capacities,
    )), nl=False)


@cli.command("check-exact")
@policy_options
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False), help="Take the alphabet from this graph")
@click.option("--format", "fmt", type=click.Choice(OUTPUT_FORMATS), default=None)
@reports_errors
def check_exact(policy_regex, policy_nfa, preset, graph_path, fmt):
    """Per-symbol block counts and the exactness verdict of a policy."""
    click.echo(run(_config(
        "check-exact", fmt, graph_path=graph_path, policy_regex=policy_regex,
        policy_nfa=policy_nfa, preset=preset,
    )), nl=False)


@cli.command()
@query_options
@click.option("--max-len", type=int, default=None, help="Longest path to enumerate (default |E|)")
@click.option("--frontier-limit", type=int, default=None)
@click.option("--path-limit", type=int, default=None)
@reports_errors
def oracle(graph_path, source, sink, fmt, policy_regex, policy_nfa, preset, max_len, frontier_limit, path_limit):
    """Brute-force diversity and bisection on a small graph."""
    config = _config(
        "oracle", fmt, graph_path=graph_path, source=source, sink=sink, policy_regex=policy_regex,
        policy_nfa=policy_nfa, preset=preset, max_len=max_len,
    )
    config = replace(config, settings=config.settings.with_overrides(
        oracle_frontier_limit=frontier_limit, oracle_path_limit=path_limit,
    ))
    click.echo(run(config), nl=False)


# Experiments

def experiment_options(func: Callable) -> Callable:
    for option in reversed([
        click.option("--as-rel", type=click.Path(exists=True, dir_okay=False), help="CAIDA AS relationship file"),
        click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False), help="Graph text file"),
        click.option("--policy", "policy_name", type=click.Choice(sorted(PRESETS)), default="valley-free"),
        click.option("--augment", type=click.Path(exists=True, dir_okay=False), help="PeeringDB members CSV"),
        click.option("--class", "peering_class", type=click.Choice(["open", "selective", "restrictive"]), default="open"),
        click.option("--seed", type=int, default=None),
        click.option("--jobs", type=int, default=None),
        click.option("--format", "fmt", type=click.Choice(OUTPUT_FORMATS), default=None),
    ]):
        func = option(func)
    return func


def _experiment_graph(as_rel, graph_path, augment, peering_class) -> LabeledDigraph:
    if bool(as_rel) == bool(graph_path):
        raise ConfigError("give exactly one of --as-rel or --graph")
    graph = to_labeled_graph(parse_as_rel(as_rel)) if as_rel else load_graph(graph_path)
    if augment:
        graph = augment_peering(graph, load_peering_members(augment), peering_class)
    return graph


def _weights(graph: LabeledDigraph, weights_path: Optional[str], pfx2as: Optional[str]) -> WeightTable:
    if weights_path:
        return load_weights(weights_path)
    if pfx2as:
        return aggregate_pfx2as(pfx2as)
    return WeightTable({node: 1 for node in graph.nodes})


def _split_isp(text: str) -> List[str]:
    return [part.strip().upper().removeprefix("AS") for part in text.split(",") if part.strip()]


def _parse_depeer(text: str) -> Tuple[List[str], List[str]]:
    left, sep, right = text.partition(":")
    if not sep or not left or not right:
        raise ConfigError("--depeer expects ISP_A:ISP_B (each a comma-separated AS list)", value=text)
    return _split_isp(left), _split_isp(right)


def _experiment_output(frame: pd.DataFrame, summary: dict, fmt: str) -> str:
    if fmt == "json":
        return to_json({"rows": frame, "summary": summary})
    if fmt == "csv":
        return render_frame(frame, "csv")
    return render_frame(frame, "text") + render_summary(summary, "text", title="summary:")


@cli.group()
def experiment():
    """Sampled experiments over AS topologies."""


@experiment.command("diversity")
@experiment_options
@click.option("--weights", "weights_path", type=click.Path(exists=True, dir_okay=False), help="asn,address_count CSV")
@click.option("--pfx2as", type=click.Path(exists=True, dir_okay=False), help="RouteViews pfx2as file")
@click.option("--pairs", "n_pairs", type=int, default=100, show_default=True)
@click.option("--depeer", "depeer_spec", default=None, help="Remove peering ISP_A:ISP_B first")
@click.option("--ccdf", "with_ccdf", is_flag=True, help="Emit the CCDF of the upper bound instead of rows")
@reports_errors
def experiment_diversity(as_rel, graph_path, policy_name, augment, peering_class, seed, jobs, fmt,
                         weights_path, pfx2as, n_pairs, depeer_spec, with_ccdf):
    """Diversity between address-weighted AS pairs (mean and standard deviation)."""
    settings: Settings = click.get_current_context().obj
    graph = _experiment_graph(as_rel, graph_path, augment, peering_class)
    if depeer_spec:
        graph = depeer(graph, *_parse_depeer(depeer_spec))
    _, nfa = preset(policy_name)
    result = run_diversity_experiment(
        graph, _weights(graph, weights_path, pfx2as), n_pairs,
        settings.seed if seed is None else seed, nfa, settings.jobs if jobs is None else jobs,
    )
    fmt = fmt or settings.output_format
    if with_ccdf:
        click.echo(render_frame(ccdf(result.frame["upper"]), fmt), nl=False)
        return
    click.echo(_experiment_output(result.frame, result.summary, fmt), nl=False)


@experiment.command("peering-classes")
@experiment_options
@click.option("--members", required=True, type=click.Path(exists=True, dir_okay=False), help="PeeringDB members CSV")
@click.option("--weights", "weights_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--pfx2as", type=click.Path(exists=True, dir_okay=False))
@click.option("--pairs", "n_pairs", type=int, default=100, show_default=True)
@reports_errors
def experiment_peering_classes(as_rel, graph_path, policy_name, augment, peering_class, seed, jobs, fmt,
                               members, weights_path, pfx2as, n_pairs):
    """Diversity with links added per peering-policy class (not cumulative)."""
    settings: Settings = click.get_current_context().obj
    graph = _experiment_graph(as_rel, graph_path, augment, peering_class)
    _, nfa = preset(policy_name)
    result = run_peering_class_experiment(
        graph, _weights(graph, weights_path, pfx2as), load_peering_members(members), n_pairs,
        settings.seed if seed is None else seed, nfa, settings.jobs if jobs is None else jobs,
    )
    table = pd.DataFrame(result.summary["scenarios"])
    click.echo(render_frame(table, fmt or settings.output_format), nl=False)


@experiment.command("depeering")
@experiment_options
@click.option("--isp-a", required=True, help="First ISP, comma-separated sibling ASes")
@click.option("--isp-b", required=True, help="Second ISP, comma-separated sibling ASes")
@click.option("--depth", type=int, default=3, show_default=True, help="Customer cone depth in p2c edges")
@click.option("--weights", "weights_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--pairs", "n_pairs", type=int, default=100, show_default=True)
@reports_errors
def experiment_depeering(as_rel, graph_path, policy_name, augment, peering_class, seed, jobs, fmt,
                         isp_a, isp_b, depth, weights_path, n_pairs):
    """Mean diversity between exclusive customer cones before and after depeering."""
    settings: Settings = click.get_current_context().obj
    graph = _experiment_graph(as_rel, graph_path, augment, peering_class)
    _, nfa = preset(policy_name)
    result = run_depeering_experiment(
        graph, _split_isp(isp_a), _split_isp(isp_b), depth, n_pairs,
        settings.seed if seed is None else seed, nfa,
        weights=load_weights(weights_path) if weights_path else None,
        jobs=settings.jobs if jobs is None else jobs,
    )
    click.echo(_experiment_output(result.frame, result.summary, fmt or settings.output_format), nl=False)


@experiment.command("matrix")
@experiment_options
@click.option("--ases", required=True, help="Comma-separated ASes")
@click.option("--policies", default="any,valley-free", show_default=True, help="Comma-separated presets")
@reports_errors
def experiment_matrix(as_rel, graph_path, policy_name, augment, peering_class, seed, jobs, fmt, ases, policies):
    """Pairwise diversity table for a list of ASes under several policies."""
    settings: Settings = click.get_current_context().obj
    graph = _experiment_graph(as_rel, graph_path, augment, peering_class)
    names = [name.strip() for name in policies.split(",") if name.strip()]
    frame = diversity_matrix(
        graph, _split_isp(ases), {name: preset(name)[1] for name in names},
        settings.jobs if jobs is None else jobs,
    )
    fmt = fmt or settings.output_format
    if fmt != "text":
        click.echo(render_frame(frame, fmt), nl=False)
        return
    for name in names:
        click.echo(f"{name}:")
        click.echo(render_frame(matrix_view(frame, name).reset_index(), "text"), nl=False)


def main(argv: Optional[List[str]] = None) -> None:
    cli.main(args=argv, prog_name="policyflow")
