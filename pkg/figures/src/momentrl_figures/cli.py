"""`render_figure <fig-id> --input <dir> --output <file>`.

Exit 0 on success; exit 1 with a diagnostic on missing files or columns.
The output image is written atomically (temporary file + rename), so a
failed render never leaves a partial file and reruns overwrite cleanly.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .figures import RENDERERS, plt
from .io import FigureDataError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render_figure",
        description="Render one figure from momentrl experiment outputs.")
    parser.add_argument("figure", choices=sorted(RENDERERS),
                        help="which figure to render")
    parser.add_argument("--input", required=True,
                        help="directory holding the experiment's CSV outputs")
    parser.add_argument("--output", required=True,
                        help="image file to write (format from the extension)")
    parser.add_argument("--version", action="version", version=__version__)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        figure = RENDERERS[args.figure](Path(args.input))
    except FigureDataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1

    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    temporary = output.with_name(output.name + ".tmp")
    image_format = output.suffix.lstrip(".").lower() or "png"
    try:
        figure.savefig(temporary, format=image_format, dpi=150)
        os.replace(temporary, output)
    except Exception:
        temporary.unlink(missing_ok=True)
        raise
    finally:
        plt.close(figure)
    return 0


if __name__ == "__main__":
    sys.exit(main())
