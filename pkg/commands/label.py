"""
`label`: derive per-term training labels from gold rewrites or relevant passages.
"""
import json
import logging

import click

from commands.options import command_config
from convsearch.pipeline import label_topics
from convsearch.supervision import label_statistics, subsample
from convsearch.trec_io import read_corpus, read_topics, write_examples
from utils.decorators import handle_command_exceptions
from utils.files import write_text

logger = logging.getLogger('convsearch.commands.label')


@click.command('label')
@click.option('--topics', type=click.Path(), help='Topics JSON-lines file.')
@click.option('--corpus', type=click.Path(), help='Corpus TSV (distant mode).')
@click.option('--mode', 'label_mode', type=click.Choice(['gold', 'distant']), help='Label source.')
@click.option('--window', type=int, help='Answer window in characters.')
@click.option('--max-len', type=int, help='Maximum positions per example.')
@click.option('--fraction', type=float, default=1.0, show_default=True,
              help='Keep a seeded random fraction of the examples.')
@click.option('--output', '-o', required=True, type=click.Path(), help='Labeled examples (JSON-lines).')
@click.option('--stats', 'stats_path', type=click.Path(), help='Also write label statistics as JSON.')
@click.pass_context
@handle_command_exceptions(logger)
def label_command(ctx, topics, corpus, label_mode, window, max_len, fraction, output, stats_path):
    """Writes one labeled example per non-first turn."""
    config = command_config(ctx, 'label', required=('topics',), topics=topics, corpus=corpus,
                            label_mode=label_mode, window=window, max_len=max_len)
    topic_list = read_topics(config.topics)
    passages = None
    if config.corpus:
        passages = {passage.id: passage.text for passage in read_corpus(config.corpus)}
    elif config.label_mode == 'distant':
        logger.warning("Distant labeling without a corpus uses answer spans only.")

    summary = label_topics(topic_list, config.label_mode, passages, config)
    examples = subsample(summary.examples, fraction, config.seed)
    stats = label_statistics(examples, summary.coverage)
    stats['skipped'] = dict(sorted(summary.skipped.items()))

    write_examples(output, examples)
    rendered = json.dumps(stats, sort_keys=True, indent=2)
    if stats_path:
        write_text(stats_path, rendered + "\n")
    logger.info("Labels written.", extra={'path': output, 'examples': len(examples)})
    click.echo(rendered)
