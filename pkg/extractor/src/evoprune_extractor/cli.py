"""CLI: extract image-directory datasets into the binary feature format."""

from __future__ import annotations

import argparse
import logging
import sys

from .features import ExtractionError, ExtractSpec, extract


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.split(","))
        return h, w
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected H,W integers, got {text!r}") from None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="evoprune-extract",
        description="Run a frozen pretrained backbone over a class-per-directory "
                    "image dataset and write an EPTL feature file.")
    parser.add_argument("--input", required=True, help="dataset root (one subdirectory per class)")
    parser.add_argument("--out", required=True, help="output feature file")
    parser.add_argument("--backbone", default="resnet50")
    parser.add_argument("--image-size", type=_parse_size, default=None,
                        help="dataset-native H,W resize applied before the backbone input")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--no-pretrained", action="store_true",
                        help="use randomly initialized backbone weights (offline smoke runs)")
    parser.add_argument("--seed", type=int, default=0,
                        help="weight seed when --no-pretrained is given")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    spec = ExtractSpec(
        input_dir=args.input,
        output=args.out,
        backbone=args.backbone,
        image_size=args.image_size,
        batch_size=args.batch_size,
        pretrained=not args.no_pretrained,
        seed=args.seed,
    )
    try:
        out = extract(spec)
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out} (manifest {out.name}.classes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
