# commands/extract.py
import json
import logging

from data_loader import load_manifest
from processing import DESCRIPTORS, extract, load_extraction_models
from storage import save_featureset, write_text

logger = logging.getLogger(__name__)

NAME = "extract"
HELP = "Compute one descriptor for every page of a manifest"
OVERRIDES = {}


def add_arguments(parser):
    parser.add_argument("--manifest", required=True, help="Line-delimited JSON manifest")
    parser.add_argument("--descriptor", required=True, choices=DESCRIPTORS)
    parser.add_argument("--out", required=True, help="FeatureSet file to write")
    parser.add_argument("--pca", help="Local descriptor PCA model (fv*)")
    parser.add_argument("--gmm", help="GMM vocabulary (fv*)")
    parser.add_argument("--fv-pca", help="FV PCA model (fv256pca)")
    parser.add_argument("--mlp", help="Trained MLP (hybrid-act)")
    parser.add_argument("--errors", help="Where to list skipped records (default: <out>.errors.jsonl)")


def _write_error_report(path, skipped):
    lines = [json.dumps({"id": record_id, "reason": reason}) for record_id, reason in skipped]
    write_text(path, "\n".join(lines) + "\n")
    logger.warning("%d skipped records listed in %s", len(skipped), path)


def run(args, settings):
    manifest = load_manifest(args.manifest)
    models = load_extraction_models(args.pca, args.gmm, args.fv_pca, args.mlp)
    features, skipped = extract(manifest, args.descriptor, models, settings)
    save_featureset(args.out, features)
    errors_path = None
    if skipped:
        errors_path = args.errors or f"{args.out}.errors.jsonl"
        _write_error_report(errors_path, skipped)
    return {
        "descriptor": args.descriptor,
        "out": str(args.out),
        "n": features.n,
        "dim": features.dim,
        "skipped": len(skipped),
        "errors": errors_path,
        "config_hash": features.config_hash,
    }
