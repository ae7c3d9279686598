"""embed-extract: run a frozen backbone over an image folder.

Exit codes: 0 success (skips allowed, recorded in the manifest),
2 invalid arguments, 3 no image could be embedded.
"""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractionConfig, extract


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-extract",
        description="Embed every image in a directory with a frozen vision backbone.",
    )
    parser.add_argument("--images", required=True, help="directory of images")
    parser.add_argument("--model", required=True, help="'stub' or a TorchScript .pt/.ts path")
    parser.add_argument("--size", type=int, default=448, help="input resolution (pixels)")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--out", required=True, help="output .femb or .csv path")
    parser.add_argument("--format", choices=["csv", "femb"], default=None)
    args = parser.parse_args(argv)

    try:
        config = ExtractionConfig(
            images_dir=args.images,
            model=args.model,
            out=args.out,
            size=args.size,
            batch_size=args.batch_size,
            out_format=args.format,
        )
        result = extract(config)
    except (ValueError, FileNotFoundError) as exc:
        print(str(exc), file=sys.stderr)
        code = 2
    except RuntimeError as exc:
        print(str(exc), file=sys.stderr)
        code = 3
    else:
        for name, reason in result.skipped:
            print(f"skipped {name}: {reason}", file=sys.stderr)
        print(f"embedded={result.n_embedded} dim={result.dim}")
        code = 0
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
