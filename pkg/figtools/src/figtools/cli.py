"""Command-line entry points: ``figtools render`` and ``figtools extract-table``."""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractionError, extract_table
from .figures import FIGURE_IDS, FigureError, FigureSpec, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figtools",
        description="Render experiment figures and extract word tables.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_render = sub.add_parser(
        "render", help="draw one figure from experiment CSV files")
    p_render.add_argument("figure", choices=FIGURE_IDS,
                          help="which figure to draw")
    p_render.add_argument("--csv", action="append", required=True,
                          metavar="PATH",
                          help="input CSV (repeat to concatenate files)")
    p_render.add_argument("--out", required=True, metavar="PATH",
                          help="output image (.png or .svg)")

    p_ext = sub.add_parser(
        "extract-table",
        help="build a word-table JSON from a model source")
    p_ext.add_argument("source",
                       help="'dummy', 'dummy:<size>', 'hf:<path>', or an "
                            "http(s) endpoint URL")
    p_ext.add_argument("--prompt", required=True,
                       help="text the table is conditioned on")
    p_ext.add_argument("--J", type=int, default=100,
                       help="vocabulary size to keep (default 100)")
    p_ext.add_argument("--M", type=int, default=30,
                       help="entropy-trace length in words (default 30)")
    p_ext.add_argument("--table-out", required=True, metavar="PATH",
                       help="where to write the word-table JSON")
    p_ext.add_argument("--entropy-out", default=None, metavar="PATH",
                       help="optional CSV tracing greedy-chain entropy")
    p_ext.add_argument("--timeout", type=float, default=10.0,
                       help="HTTP timeout in seconds (default 10)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "render":
            out = render(FigureSpec(figure=args.figure,
                                    csv_paths=tuple(args.csv),
                                    out_path=args.out))
            print(f"wrote {out}")
        else:
            from .extract import make_source
            source = (make_source(args.source, timeout=args.timeout)
                      if isinstance(args.source, str) else args.source)
            table, entropy = extract_table(
                source, args.prompt, args.J, args.M,
                table_out=args.table_out, entropy_out=args.entropy_out)
            print(f"wrote {table}")
            if entropy:
                print(f"wrote {entropy}")
    except (FigureError, ExtractionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
