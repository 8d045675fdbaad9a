"""
`resolve`: turn every conversational query into a weighted query for retrieval.
"""
import logging

import click

from commands.options import command_config
from convsearch.checkpoint import load_checkpoint
from convsearch.index_store import load_index
from convsearch.pipeline import resolve_topics, write_resolutions
from convsearch.resolver import write_predictions
from convsearch.settings_loader import RESOLVER_VARIANTS
from convsearch.trec_io import read_corpus, read_topics
from utils.decorators import handle_command_exceptions

logger = logging.getLogger('convsearch.commands.resolve')


@click.command('resolve')
@click.option('--topics', type=click.Path(), help='Topics JSON-lines file.')
@click.option('--variant', type=click.Choice(RESOLVER_VARIANTS), help='Resolver variant.')
@click.option('--model', type=click.Path(), help='Checkpoint (variant quretec).')
@click.option('--index-dir', type=click.Path(), help='Index directory (rm3 variants).')
@click.option('--corpus', type=click.Path(), help='Corpus TSV (variant distant).')
@click.option('--tau', type=float, help='Classification threshold.')
@click.option('--output', '-o', required=True, type=click.Path(), help='Resolved queries (JSON-lines).')
@click.option('--predictions', type=click.Path(), help='Also write predicted terms with scores.')
@click.pass_context
@handle_command_exceptions(logger)
def resolve_command(ctx, topics, variant, model, index_dir, corpus, tau, output, predictions):
    """Resolves every turn of every topic with one variant."""
    config = command_config(ctx, 'resolve', required=('topics',), topics=topics, variant=variant, model=model,
                            index_dir=index_dir, corpus=corpus, tau=tau)
    topic_list = read_topics(config.topics)
    resolver_model = load_checkpoint(config.model) if config.variant == 'quretec' and config.model else None
    index = load_index(config.index_dir) if config.variant.startswith('rm3:') and config.index_dir else None
    passages = None
    if config.variant == 'distant' and config.corpus:
        passages = {passage.id: passage.text for passage in read_corpus(config.corpus)}

    resolutions = resolve_topics(topic_list, config.variant, config, resolver_model, index, passages)
    write_resolutions(output, resolutions)
    if predictions:
        write_predictions(predictions, ((r.topic_id, r.turn, r.expansion, r.scores) for r in resolutions))
    click.echo(f"Resolved {len(resolutions)} queries with {config.variant}")
