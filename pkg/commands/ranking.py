"""
`search`, `rerank` and `fuse`: the two-stage ranking commands.

Each reads and writes TREC run files, so external systems can be dropped
into any stage.
"""
import logging

import click

from commands.options import command_config, tag_option
from convsearch.index_store import load_index, load_passage_texts
from convsearch.pipeline import fuse_runs, make_scorer, read_resolutions, rerank_runs, retrieve
from convsearch.trec_io import read_run, write_run
from utils.decorators import handle_command_exceptions

logger = logging.getLogger('convsearch.commands.ranking')


@click.command('search')
@click.option('--index-dir', type=click.Path(), help='Index directory.')
@click.option('--resolved', required=True, type=click.Path(exists=True), help='Resolved queries (JSON-lines).')
@click.option('--depth', type=int, help='Passages per query.')
@click.option('--mu', type=float, help='Dirichlet prior.')
@click.option('--workers', type=int, help='Search threads.')
@click.option('--output', '-o', required=True, type=click.Path(), help='Run file.')
@tag_option('ql')
@click.pass_context
@handle_command_exceptions(logger)
def search_command(ctx, index_dir, resolved, depth, mu, workers, output, tag):
    """Query-likelihood retrieval for every resolved query."""
    config = command_config(ctx, 'search', required=('index_dir',), index_dir=index_dir, depth=depth, mu=mu,
                            workers=workers)
    index = load_index(config.index_dir)
    runs = retrieve(index, read_resolutions(resolved), config)
    write_run(output, runs.values(), tag)
    click.echo(f"Searched {len(runs)} queries")


@click.command('rerank')
@click.option('--index-dir', type=click.Path(), help='Index directory (passage texts and statistics).')
@click.option('--resolved', required=True, type=click.Path(exists=True), help='Resolved queries (JSON-lines).')
@click.option('--run', 'run_path', required=True, type=click.Path(exists=True), help='Initial run file.')
@click.option('--scorer', type=click.Choice(['overlap', 'ql']), help='Second-stage scorer.')
@click.option('--output', '-o', required=True, type=click.Path(), help='Reranked run file.')
@tag_option('rerank')
@click.pass_context
@handle_command_exceptions(logger)
def rerank_command(ctx, index_dir, resolved, run_path, scorer, output, tag):
    """Rescores the passages of an initial run."""
    config = command_config(ctx, 'rerank', required=('index_dir',), index_dir=index_dir, scorer=scorer)
    index = load_index(config.index_dir)
    passages = load_passage_texts(config.index_dir)
    reranked = rerank_runs(read_run(run_path), read_resolutions(resolved), passages, make_scorer(config, index))
    write_run(output, reranked.values(), tag)
    click.echo(f"Reranked {len(reranked)} queries with {config.scorer}")


@click.command('fuse')
@click.option('--run', 'run_paths', required=True, multiple=True, type=click.Path(exists=True),
              help='Run file; repeat for each list. The first defines the fused passages.')
@click.option('--k-rrf', type=float, help='Fusion constant k.')
@click.option('--output', '-o', required=True, type=click.Path(), help='Fused run file.')
@tag_option('rrf')
@click.pass_context
@handle_command_exceptions(logger)
def fuse_command(ctx, run_paths, k_rrf, output, tag):
    """Reciprocal rank fusion of run files."""
    config = command_config(ctx, 'fuse', k_rrf=k_rrf)
    fused = fuse_runs([read_run(path) for path in run_paths], config.k_rrf)
    write_run(output, fused.values(), tag)
    click.echo(f"Fused {len(run_paths)} runs over {len(fused)} queries")
