"""Figure rendering and word-table extraction for experiment CSV files.

This package consumes the experiment engine only through its file formats
and command line: summary/allocation CSVs go in, image files and
word-table JSON come out.
"""

from .extract import (DummyUniformSource, ExtractionError, HttpLogprobSource,
                      LocalWeightsSource, extract_table, make_source)
from .figures import (FIGURE_IDS, FigureError, FigureSpec, build_figure,
                      render)

__all__ = [
    "FIGURE_IDS", "FigureError", "FigureSpec", "build_figure", "render",
    "ExtractionError", "DummyUniformSource", "HttpLogprobSource",
    "LocalWeightsSource", "make_source", "extract_table",
]

__version__ = "0.1.0"
