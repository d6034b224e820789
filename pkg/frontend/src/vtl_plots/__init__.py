"""Chart generation for vtl sweep CSVs."""

from vtl_plots.plots import PlotError, plot_fig2, plot_predictor, read_rows

__all__ = ["PlotError", "plot_fig2", "plot_predictor", "read_rows"]
__version__ = "1.0.0"
