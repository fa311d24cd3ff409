"""
Command-line interface for the Dengue Diagnosis Toolkit

Subcommands: synth, impute, select, train, evaluate, predict, roc.
Exit codes: 0 success, 1 usage error, 2 data/model error.
"""
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import click

from charts import emit_roc_svg, export_report_pdf
from config import (
    BOOSTING_ITERATIONS,
    CONFIDENCE_FACTOR,
    FOLD_WORKERS,
    K_FOLDS,
    MIN_LEAF,
    RANDOM_SEED,
    SIGNIFICANCE_ALPHA,
    SMOOTHING_EPSILON,
)
from corpus import generate, clinical_spec, separable_spec, write_cohort
from data_model import parse_csv, parse_discretize_rule, serialize_csv
from errors import ModelFormatError, ToolkitError
from evaluation import ALGORITHMS, read_roc_csv, save_report, write_roc_csv
from feature_select import FeatureSet, format_selection_table
from logger import log
from model_io import load_model, predict, save_model
from pipeline import Pipeline, RunConfig

PathType = click.Path(dir_okay=False, path_type=Path)


def _split_names(ctx, param, values):
    names = []
    for value in values:
        names.extend(n.strip() for n in value.split(",") if n.strip())
    return tuple(names)


def _parse_rules(ctx, param, values):
    try:
        return tuple(parse_discretize_rule(v) for v in values)
    except ValueError as e:
        raise click.BadParameter(str(e)) from None


def data_options(f):
    f = click.option("--schema", "schema_path", required=True, type=PathType, help="Schema sidecar file")(f)
    f = click.option("--data", "data_path", required=True, type=PathType, help="Cohort CSV")(f)
    return f


def preparation_options(f):
    f = click.option("--feature-set", "feature_set_path", type=PathType, help="Selection JSON written by 'select'")(f)
    f = click.option("--features", multiple=True, callback=_split_names, help="Features to keep (comma-separated)")(f)
    f = click.option(
        "--discretize", multiple=True, callback=_parse_rules, help="Rule attr:cutpoint:labelLow:labelHigh"
    )(f)
    return f


def learner_options(f):
    f = click.option("--unpruned", is_flag=True, help="C4.5: skip pruning")(f)
    f = click.option("--min-leaf", type=click.IntRange(min=1), default=MIN_LEAF, show_default=True)(f)
    f = click.option("--cf", "confidence", type=click.FloatRange(0, 1, min_open=True), default=CONFIDENCE_FACTOR, show_default=True)(f)
    f = click.option("--epsilon", type=click.FloatRange(min=0), default=SMOOTHING_EPSILON, show_default=True)(f)
    f = click.option("-T", "--iterations", type=click.IntRange(min=0), default=BOOSTING_ITERATIONS, show_default=True)(f)
    f = click.option("--algo", "algorithm", type=click.Choice(ALGORITHMS), default="adtree", show_default=True)(f)
    return f


def _features(features, feature_set_path):
    if feature_set_path is None:
        return features
    try:
        with open(feature_set_path, "r", encoding="utf-8") as f:
            selection = FeatureSet.from_dict(json.load(f))
    except (UnicodeDecodeError, KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"not a feature selection document: {e}", file=str(feature_set_path)) from None
    return tuple(dict.fromkeys(selection.selected + tuple(features)))


def _run_config(data_path, schema_path, **options) -> RunConfig:
    features = _features(options.pop("features", ()), options.pop("feature_set_path", None))
    return RunConfig(data_path=data_path, schema_path=schema_path, features=features, **options)


@click.group()
def cli():
    """Dengue diagnosis toolkit: ADTree and C4.5 classification with cross-validation."""


@cli.command()
@click.option("--preset", type=click.Choice(["clinical", "separable"]), default="clinical", show_default=True)
@click.option("--n", type=click.IntRange(min=1), default=65, show_default=True)
@click.option("--n-pos", type=click.IntRange(min=0), default=53, show_default=True)
@click.option("--gap", type=float, default=8.0, show_default=True, help="Separable preset: class mean gap in SDs")
@click.option("--seed", type=int, default=RANDOM_SEED, show_default=True)
@click.option("--out", required=True, type=PathType, help="Cohort CSV to write")
@click.option("--schema-out", required=True, type=PathType, help="Schema sidecar to write")
def synth(preset, n, n_pos, gap, seed, out, schema_out):
    """Generate a synthetic cohort."""
    spec = clinical_spec(seed, n, n_pos) if preset == "clinical" else separable_spec(n, n_pos, gap, seed)
    ds = generate(spec)
    write_cohort(ds, out, schema_out)


@cli.command()
@data_options
@click.option("--out", required=True, type=PathType, help="Imputed CSV to write")
@click.option("--means", "means_path", type=PathType, help="Imputation table (attribute, imputed, mean)")
def impute(data_path, schema_path, out, means_path):
    """Replace missing numeric cells with column means."""
    pipeline = Pipeline(RunConfig(data_path=data_path, schema_path=schema_path))
    imputed, report = pipeline.impute(pipeline.load())
    with open(out, "w", encoding="utf-8", newline="") as f:
        serialize_csv(imputed, f)
    if means_path is not None:
        report.to_frame().to_csv(means_path, index=False, lineterminator="\n")
    log.log_step("IMPUTE", data_path, out, "COMPLETED")
    pipeline.summary()


@cli.command()
@data_options
@click.option("--alpha", type=click.FloatRange(0, 1, min_open=True), default=SIGNIFICANCE_ALPHA, show_default=True)
@click.option("--force-include", multiple=True, callback=_split_names, help="Always select these (comma-separated)")
@click.option("--discretize", multiple=True, callback=_parse_rules, help="Rule attr:cutpoint:labelLow:labelHigh")
@click.option("--out", type=PathType, help="Selection JSON to write")
def select(data_path, schema_path, alpha, force_include, discretize, out):
    """Screen features with Wald and chi-squared tests."""
    pipeline = Pipeline(
        RunConfig(data_path=data_path, schema_path=schema_path, alpha=alpha, force_include=force_include, discretize=discretize)
    )
    logit, chi2s, feature_set = pipeline.select()
    click.echo(format_selection_table(logit, chi2s))
    click.echo(f"\nSelected (alpha={alpha}): {', '.join(feature_set.selected) or '(none)'}")
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(feature_set.to_dict(), indent=2) + "\n")
    pipeline.summary()


@cli.command()
@data_options
@learner_options
@preparation_options
@click.option("--out", required=True, type=PathType, help="Model document to write")
def train(data_path, schema_path, out, **options):
    """Fit a model on the whole cohort."""
    pipeline = Pipeline(_run_config(data_path, schema_path, **options))
    doc = pipeline.train()
    save_model(doc, out)
    click.echo(doc.model.render_text())
    pipeline.summary()


@cli.command()
@data_options
@learner_options
@preparation_options
@click.option("--k", type=click.IntRange(min=2), default=K_FOLDS, show_default=True)
@click.option("--seed", type=int, default=RANDOM_SEED, show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=FOLD_WORKERS, show_default=True)
@click.option("--report", "report_path", required=True, type=PathType, help="Evaluation report (JSON) to write")
@click.option("--roc", "roc_path", type=PathType, help="ROC CSV to write")
@click.option("--svg", "svg_path", type=PathType, help="ROC / sensitivity-specificity SVG to write")
@click.option("--pdf", "pdf_path", type=PathType, help="PDF report to write")
def evaluate(data_path, schema_path, report_path, roc_path, svg_path, pdf_path, **options):
    """Stratified k-fold cross-validation."""
    pipeline = Pipeline(_run_config(data_path, schema_path, **options))
    report = pipeline.evaluate()
    save_report(report, report_path)
    if roc_path is not None:
        with open(roc_path, "w", encoding="utf-8", newline="") as f:
            write_roc_csv(report.roc, f)
    if svg_path is not None:
        emit_roc_svg(report.roc, svg_path, title=report.algorithm)
    if pdf_path is not None:
        export_report_pdf(report, pdf_path)
    click.echo(report.render_text(), nl=False)
    pipeline.summary()


@cli.command(name="predict")
@click.option("--model", "model_path", required=True, type=PathType, help="Model document")
@click.option("--data", "data_path", required=True, type=PathType, help="CSV to score (target column optional)")
@click.option("--out", type=PathType, help="Predictions CSV (default: standard output)")
def predict_command(model_path, data_path, out):
    """Label and score new records with a saved model."""
    doc = load_model(model_path)
    schema = doc.preprocessing.input_schema if doc.preprocessing is not None else doc.schema
    try:
        ds = parse_csv(data_path, schema, target_optional=True)
    except ToolkitError as e:
        raise e.add_context("file", str(data_path))
    table = predict(doc, ds)
    if out is not None:
        table.to_csv(out, index=False, lineterminator="\n")
    else:
        click.echo(table.to_csv(index=False, lineterminator="\n"), nl=False)
    log.log_step("PREDICT", data_path, out or "stdout", "COMPLETED")


@cli.command()
@click.option("--roc", "roc_path", required=True, type=PathType, help="ROC CSV written by 'evaluate'")
@click.option("--svg", "svg_path", required=True, type=PathType, help="SVG to write")
def roc(roc_path, svg_path):
    """Plot a saved ROC CSV."""
    emit_roc_svg(read_roc_csv(roc_path), svg_path)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Execute one command

    Returns:
        0 on success, 1 on usage error, 2 on data/model error
    """
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="dengue-toolkit", standalone_mode=False)
    except click.UsageError as e:
        log.error(e.format_message())
        return 1
    except click.exceptions.Abort:
        log.error("Aborted")
        return 1
    except ToolkitError as e:
        log.error(str(e))
        return e.exit_code
    except OSError as e:
        log.error(f"I/O error: {e}")
        return 2
    return 0


def main():
    """Entry point for the script"""
    sys.exit(run())


if __name__ == "__main__":
    main()
