"""
`train`: fit the term classifier on labeled examples and save a checkpoint.
"""
import json
import logging

import click

from commands.options import command_config
from convsearch.checkpoint import load_checkpoint, save_checkpoint
from convsearch.resolver import default_encoder_config, grid_search, train, train_config_from
from convsearch.supervision import subsample
from convsearch.trec_io import read_examples
from utils.decorators import handle_command_exceptions

logger = logging.getLogger('convsearch.commands.train')


@click.command('train')
@click.option('--train', 'train_path', required=True, type=click.Path(exists=True), help='Training examples.')
@click.option('--dev', 'dev_path', required=True, type=click.Path(exists=True), help='Gold dev examples.')
@click.option('--model', type=click.Path(), help='Checkpoint to write.')
@click.option('--init-model', type=click.Path(exists=True), help='Warm-start checkpoint (e.g. distant pretraining).')
@click.option('--fraction', type=float, default=1.0, show_default=True, help='Fraction of training examples used.')
@click.option('--grid', is_flag=True, help='Search learning rate and dropout on their default grids.')
@click.option('--learning-rate', type=float, help='Adam learning rate.')
@click.option('--dropout', type=float, help='Dropout rate.')
@click.option('--max-epochs', type=int, help='Epoch cap.')
@click.option('--patience', type=int, help='Early stopping patience.')
@click.option('--seed', type=int, help='Random seed.')
@click.pass_context
@handle_command_exceptions(logger)
def train_command(ctx, train_path, dev_path, model, init_model, fraction, grid, learning_rate, dropout,
                  max_epochs, patience, seed):
    """Trains with early stopping on dev F1 and writes the best checkpoint."""
    config = command_config(ctx, 'train', model=model, learning_rate=learning_rate, dropout=dropout,
                            max_epochs=max_epochs, patience=patience, seed=seed)
    if not config.model:
        raise click.UsageError("A checkpoint path is required (--model or setting 'model').")
    train_set = subsample(read_examples(train_path), fraction, config.seed)
    dev_set = read_examples(dev_path)
    log_extra = {'train_examples': len(train_set), 'dev_examples': len(dev_set), 'fraction': fraction}

    if grid:
        logger.info("Starting grid search.", extra=log_extra)
        trained, table = grid_search(train_set, dev_set, default_encoder_config(config), train_config_from(config))
        click.echo(json.dumps(table, sort_keys=True, indent=2))
    else:
        initial = load_checkpoint(init_model) if init_model else None
        logger.info("Starting training.", extra={**log_extra, 'warm_start': bool(initial)})
        trained = train(train_set, dev_set, default_encoder_config(config), train_config_from(config),
                        init_model=initial)
    digest = save_checkpoint(trained, config.model)
    best = max(entry["dev_f1"] for entry in trained.history)
    click.echo(f"Best dev F1 {best:.4f} after {len(trained.history)} epoch(s); checkpoint {digest[:12]}")
