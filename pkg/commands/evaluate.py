"""
`eval`: intrinsic and extrinsic reports, with significance against a baseline.
"""
import os
import logging

import click

from commands.options import command_config, input_paths
from convsearch import evaluation
from convsearch.pipeline import intrinsic_dataset, read_resolutions, report_header, turn_index_of, write_report
from convsearch.trec_io import read_qrels, read_run, read_topics
from utils.decorators import handle_command_exceptions

logger = logging.getLogger('convsearch.commands.evaluate')


@click.command('eval')
@click.option('--qrels', type=click.Path(), help='Relevance judgments.')
@click.option('--topics', type=click.Path(), help='Topics (turn numbers; gold rewrites for intrinsic).')
@click.option('--run', 'run_path', type=click.Path(exists=True), help='Run file to evaluate.')
@click.option('--baseline-run', type=click.Path(exists=True), help='Run file to test against.')
@click.option('--resolved', type=click.Path(exists=True), help='Resolved queries for intrinsic evaluation.')
@click.option('--baseline-resolved', type=click.Path(exists=True), help='Baseline resolved queries.')
@click.option('--ndcg-cut', type=int, help='NDCG rank cutoff.')
@click.option('--binarize-at', type=int, help='Minimum relevant grade.')
@click.option('--output-dir', '-o', required=True, type=click.Path(), help='Directory for the reports.')
@click.pass_context
@handle_command_exceptions(logger)
def eval_command(ctx, qrels, topics, run_path, baseline_run, resolved, baseline_resolved, ndcg_cut, binarize_at,
                 output_dir):
    """Writes extrinsic.report.* for --run and intrinsic.report.* for --resolved."""
    config = command_config(ctx, 'eval', qrels=qrels, topics=topics, ndcg_cut=ndcg_cut, binarize_at=binarize_at)
    if not run_path and not resolved:
        raise click.UsageError("Nothing to evaluate: pass --run and/or --resolved.")
    topic_list = read_topics(config.topics) if config.topics else []
    inputs = {**input_paths(config, ('qrels', 'topics')), 'run': run_path, 'resolved': resolved}

    if run_path:
        config.validate(('qrels',))
        qrels_data = read_qrels(config.qrels)
        report = evaluation.evaluate_run(read_run(run_path), qrels_data, turn_index_of(topic_list),
                                         config.ndcg_cut, config.depth, config.binarize_at)
        if baseline_run:
            baseline = evaluation.evaluate_run(read_run(baseline_run), qrels_data, turn_index_of(topic_list),
                                               config.ndcg_cut, config.depth, config.binarize_at)
            report.comparison = evaluation.compare(baseline, report)
        report.header = report_header(config, {**inputs, 'baseline_run': baseline_run}, stage='extrinsic')
        write_report(output_dir, "extrinsic.report", report, os.path.basename(run_path))
        click.echo(evaluation.render_table(report), nl=False)

    if resolved:
        if not topic_list:
            raise click.UsageError("Intrinsic evaluation needs --topics with gold rewrites.")
        report = evaluation.intrinsic_eval(
            intrinsic_dataset(topic_list, read_resolutions(resolved), config.history_answers)
        )
        if baseline_resolved:
            baseline = evaluation.intrinsic_eval(
                intrinsic_dataset(topic_list, read_resolutions(baseline_resolved), config.history_answers)
            )
            report.comparison = evaluation.compare(baseline, report)
        report.header = report_header(config, {**inputs, 'baseline_resolved': baseline_resolved}, stage='intrinsic')
        write_report(output_dir, "intrinsic.report", report, os.path.basename(resolved))
        click.echo(evaluation.render_table(report), nl=False)
