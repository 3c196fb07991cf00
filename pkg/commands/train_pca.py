# commands/train_pca.py
from config import FV_PCA_DIM
from data_loader import load_manifest
from errors import UsageError
from processing import train_descriptor_pca, train_feature_pca
from storage import load_featureset, save_model

NAME = "train-pca"
HELP = "Fit the 128 -> 77 SIFT PCA, or a PCA over a FeatureSet (fv256 -> 4096)"
OVERRIDES = {}


def add_arguments(parser):
    parser.add_argument("--source", choices=("sift", "features"), default="sift")
    parser.add_argument("--manifest", help="Pages to sample SIFT descriptors from (--source sift)")
    parser.add_argument("--features", help="FeatureSet to fit on (--source features)")
    parser.add_argument("--dim", type=int, help="Output dimension (default: sift_pca_dim or 4096)")
    parser.add_argument("--out", required=True, help="Model file to write")


def run(args, settings):
    if args.source == "sift":
        if not args.manifest:
            raise UsageError("--source sift needs --manifest")
        if args.dim is not None:
            settings = {**settings, "sift_pca_dim": args.dim}
        pca, metadata = train_descriptor_pca(load_manifest(args.manifest), settings)
    else:
        if not args.features:
            raise UsageError("--source features needs --features")
        pca, metadata = train_feature_pca(load_featureset(args.features), args.dim or FV_PCA_DIM)
    save_model(args.out, pca, metadata)
    return {"out": str(args.out), "source": args.source, "in_dim": pca.in_dim, "out_dim": pca.out_dim,
            "n_samples": metadata["n_samples"]}
