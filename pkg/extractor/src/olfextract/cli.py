"""olfextract command line: extract | descriptors | convert | fetch."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from .convert import SOURCES, convert_dataset
from .descriptors import compute_descriptors
from .embeddings import ExtractionJob, JobError, extract_embeddings

log = logging.getLogger(__name__)

FETCH_NOTES = """\
Raw data retrieval is documented, not automated:

  gs-lf   curated Goodscents/Leffingwell label table distributed with the
          openpom project (curated_GS_LF_merged_4983.csv)
  keller  Keller & Vosshall 2016 psychophysical ratings; a tidy CSV export
          is available through the pyrfume-data repository (keller_2016)
  sagar   Sagar et al. 2023 per-subject ratings (pyrfume-data, sagar_2023)
  snitz   Snitz et al. 2013 pairwise similarity ratings (pyrfume-data,
          snitz_2013)
  ravia   Ravia et al. 2020 pairwise similarity ratings (pyrfume-data,
          ravia_2020)

Download the raw CSVs manually (some sources require registration), then
run `olfextract convert <source> --raw <file> --out <dir>`. Pretrained
chemical-structure checkpoints (e.g. a 768-dimensional masked-LM
transformer) are fetched by the transformers library on first use of
`olfextract extract --model <hub-id-or-path>`.
"""


def read_structures(path) -> list[tuple[str, str]]:
    """CSV `id,structure` (header required)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ValueError(f"{path}: expected header id,structure")
        for row in reader:
            if row:
                out.append((row[0].strip(), row[1].strip()))
    if not out:
        raise ValueError(f"{path}: no structures")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="olfextract",
        description="Produce embedding tables, descriptor tables, and canonical "
                    "perceptual CSVs.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("extract", help="per-layer embeddings from a transformer checkpoint")
    p.add_argument("--model", required=True, help="checkpoint path or hub id")
    p.add_argument("--structures", required=True, help="CSV id,structure")
    p.add_argument("--layers", default="final",
                   help="'final', 'all', or comma-separated block indices")
    p.add_argument("--pooling", choices=("mean", "first_token"), default="mean")
    p.add_argument("--model-name", default=None, dest="model_name")
    p.add_argument("--batch-size", type=int, default=16, dest="batch_size")
    p.add_argument("--device", default="cpu")
    p.add_argument("--trust-remote-code", action="store_true", dest="trust_remote_code")
    p.add_argument("--no-validate", action="store_false", dest="validate")
    p.add_argument("--out", required=True)

    p = sub.add_parser("descriptors", help="approximate physicochemical descriptors")
    p.add_argument("--structures", required=True, help="CSV id,structure")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("convert", help="convert a public dataset to canonical files")
    p.add_argument("source", choices=SOURCES)
    p.add_argument("--raw", required=True, help="raw CSV file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--polarity", choices=("similarity", "distance"), default=None,
                   help="pairs only: orientation of the scores")
    p.add_argument("--id-col", default=None, dest="id_col",
                   help="gs-lf only: id column name")
    p.add_argument("--subject-col", default=None, dest="subject_col")
    p.add_argument("--odorant-col", default=None, dest="odorant_col")

    sub.add_parser("fetch", help="print raw-data retrieval notes")
    return parser


def _layers_arg(text: str):
    if text == "final":
        return "final"
    if text == "all":
        return None  # resolved against the model's block count
    return [int(t) for t in text.split(",") if t.strip()]


def execute(argv) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.subcommand == "fetch":
            print(FETCH_NOTES)
            return 0
        if args.subcommand == "extract":
            layers = _layers_arg(args.layers)
            structures = read_structures(args.structures)
            if layers is None:
                # probe the block count with a one-structure job, then expand
                probe = ExtractionJob(
                    model=args.model, structures=structures[:1], layers="final",
                    pooling=args.pooling, out_dir=args.out,
                    trust_remote_code=args.trust_remote_code,
                    validate_structures=False,
                )
                import json as _json

                _, manifest = extract_embeddings(probe)[0]
                layers = list(range(_json.loads(manifest.read_text())["notes"]["n_blocks"]))
            job = ExtractionJob(
                model=args.model,
                structures=structures,
                layers=layers,
                pooling=args.pooling,
                out_dir=args.out,
                model_name=args.model_name,
                batch_size=args.batch_size,
                device=args.device,
                trust_remote_code=args.trust_remote_code,
                validate_structures=args.validate,
            )
            for csv_path, _ in extract_embeddings(job):
                print(csv_path)
            return 0
        if args.subcommand == "descriptors":
            written, skipped = compute_descriptors(read_structures(args.structures), args.out)
            print(f"{args.out}: {written} rows written, {skipped} skipped")
            return 0
        if args.subcommand == "convert":
            kwargs = {}
            if args.polarity is not None:
                kwargs["polarity"] = args.polarity
            if args.id_col is not None:
                kwargs["id_col"] = args.id_col
            if args.subject_col is not None:
                kwargs["subject_col"] = args.subject_col
            if args.odorant_col is not None:
                kwargs["odorant_col"] = args.odorant_col
            for path in convert_dataset(args.source, args.raw, args.out, **kwargs):
                print(path)
            return 0
        raise AssertionError(args.subcommand)
    except (JobError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(execute(sys.argv[1:]))


if __name__ == "__main__":
    main()
