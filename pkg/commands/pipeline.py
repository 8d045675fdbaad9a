"""
`pipeline`: index, resolve, search, rerank, fuse and evaluate in one go.
"""
import logging

import click

from commands.options import command_config, input_paths
from convsearch.checkpoint import load_checkpoint
from convsearch.index_store import load_index
from convsearch.pipeline import run_pipeline
from convsearch.trec_io import read_corpus, read_qrels, read_topics
from utils.decorators import handle_command_exceptions

logger = logging.getLogger('convsearch.commands.pipeline')


@click.command('pipeline')
@click.option('--topics', type=click.Path(), help='Topics JSON-lines file.')
@click.option('--corpus', type=click.Path(), help='Corpus TSV.')
@click.option('--qrels', type=click.Path(), help='Relevance judgments.')
@click.option('--model', type=click.Path(), help='Checkpoint (variant quretec).')
@click.option('--index-dir', type=click.Path(), help='Use this prebuilt index instead of indexing the corpus.')
@click.option('--variants', help='Comma-separated variants; the first is the baseline.')
@click.option('--output-dir', '-o', type=click.Path(), help='Output directory (replaced).')
@click.option('--workers', type=int, help='Threads for indexing and search.')
@click.pass_context
@handle_command_exceptions(logger)
def pipeline_command(ctx, topics, corpus, qrels, model, index_dir, variants, output_dir, workers):
    """Runs every stage for each variant and writes runs and reports."""
    config = command_config(ctx, 'pipeline', required=('topics', 'corpus'), topics=topics, corpus=corpus,
                            qrels=qrels, model=model, index_dir=index_dir, variants=variants,
                            output_dir=output_dir, workers=workers)
    variant_names = config.variant_list()
    topic_list = read_topics(config.topics)
    passages = read_corpus(config.corpus)
    qrels_data = read_qrels(config.qrels) if config.qrels else None
    resolver_model = None
    if 'quretec' in variant_names:
        config.validate(('model',))
        resolver_model = load_checkpoint(config.model)
    index = load_index(config.index_dir) if config.index_dir else None

    run_pipeline(config, topic_list, passages, qrels_data, resolver_model, index, input_paths(config))
    click.echo(f"Wrote {len(variant_names)} variant(s) to {config.output_dir}")
