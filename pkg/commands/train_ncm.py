# commands/train_ncm.py
from commands import load_labeled
from predict import ncm_fit
from storage import save_model

NAME = "train-ncm"
HELP = "Store the class means of a FeatureSet as an NCM classifier"
OVERRIDES = {}


def add_arguments(parser):
    parser.add_argument("--features", required=True, help="Labeled training FeatureSet")
    parser.add_argument("--out", required=True, help="Model file to write")


def run(args, settings):
    features = load_labeled(args.features)
    model = ncm_fit(features.matrix, list(features.labels))
    save_model(args.out, model, {"input_descriptor": features.descriptor, "input_hash": features.config_hash})
    return {"out": str(args.out), "classes": len(model.classes), "dim": model.dim, "n_train": features.n}
