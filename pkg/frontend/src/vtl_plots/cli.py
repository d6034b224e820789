"""Batch chart renderer for vtl sweep CSVs."""

import sys

import click

from vtl_plots.plots import PlotError, plot_fig2, plot_predictor


@click.command()
@click.option("--input", "input_csv", required=True, type=click.Path(),
              help="Sweep CSV (frozen simulator schema).")
@click.option("--output", required=True, type=click.Path(),
              help="Output PNG path.")
@click.option("--kind", required=True,
              type=click.Choice(["fig2", "predictorOverlay"]),
              help="Chart type.")
@click.option("--f", "weight_factor", type=float, default=1.0,
              show_default=True,
              help="Weight factor f for the predictor overlay.")
@click.option("--logx", is_flag=True, default=False,
              help="Logarithmic x axis (predictor overlay only).")
def main(input_csv, output, kind, weight_factor, logx):
    """Render a chart from a vtl sweep CSV."""
    try:
        if kind == "fig2":
            plot_fig2(input_csv, output)
        else:
            plot_predictor(input_csv, output, f=weight_factor, logx=logx)
    except PlotError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {output}")


if __name__ == "__main__":
    main()
