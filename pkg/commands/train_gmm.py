# commands/train_gmm.py
from data_loader import load_manifest
from processing import local_hash, train_vocabulary
from storage import check_config_hash, load_model, save_model

NAME = "train-gmm"
HELP = "Fit the diagonal GMM vocabulary on projected local descriptors"
OVERRIDES = {"max_iters": "gmm_max_iters", "per_image": "gmm_sample_per_image"}


def add_arguments(parser):
    parser.add_argument("--manifest", required=True, help="Training pages")
    parser.add_argument("--pca", required=True, help="Local descriptor PCA model")
    parser.add_argument("--components", type=int, required=True, help="Number of Gaussians (4, 16 or 256)")
    parser.add_argument("--max-iters", type=int, help="EM iteration cap")
    parser.add_argument("--per-image", type=int, help="Descriptors sampled per page")
    parser.add_argument("--out", required=True, help="Model file to write")


def run(args, settings):
    pca, meta = load_model(args.pca, expected_tag="pca")
    check_config_hash(meta, local_hash(settings), args.pca)
    gmm, metadata = train_vocabulary(load_manifest(args.manifest), settings, pca, args.components)
    save_model(args.out, gmm, metadata)
    return {
        "out": str(args.out),
        "components": gmm.n_components,
        "dim": gmm.dim,
        "iterations": len(gmm.log_likelihood_history),
        "avg_log_likelihood": gmm.log_likelihood_history[-1],
        "n_samples": metadata["n_samples"],
    }
