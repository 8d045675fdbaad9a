"""
`index`: build and persist the inverted index of a corpus.
"""
import logging

import click

from commands.options import command_config
from convsearch.index_store import save_index
from convsearch.retrieval import build_index
from convsearch.trec_io import read_corpus
from utils.decorators import handle_command_exceptions

logger = logging.getLogger('convsearch.commands.index')


@click.command('index')
@click.option('--corpus', type=click.Path(), help='Corpus TSV.')
@click.option('--index-dir', type=click.Path(), help='Destination index directory.')
@click.option('--workers', type=int, help='Tokenization threads.')
@click.pass_context
@handle_command_exceptions(logger)
def index_command(ctx, corpus, index_dir, workers):
    """Tokenizes every passage and writes the index directory."""
    config = command_config(ctx, 'index', required=('corpus',), corpus=corpus, index_dir=index_dir,
                            workers=workers)
    if not config.index_dir:
        raise click.UsageError("An index directory is required (--index-dir or setting 'index_dir').")
    passages = read_corpus(config.corpus)
    index = build_index(passages, config.workers)
    save_index(index, config.index_dir, {passage.id: passage.text for passage in passages})
    click.echo(f"Indexed {len(index)} passages into {config.index_dir}")
