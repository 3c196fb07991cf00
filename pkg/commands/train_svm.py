# commands/train_svm.py
from commands import holdout, load_labeled
from errors import UsageError
from predict import select_svm_lambda, train_linear_svm
from storage import save_model

NAME = "train-svm"
HELP = "Train one-vs-rest linear SVMs on a FeatureSet"
OVERRIDES = {"lam": "svm_lambda", "epochs": "svm_epochs"}


def add_arguments(parser):
    parser.add_argument("--features", required=True, help="Labeled training FeatureSet")
    parser.add_argument("--lam", type=float, help="Regularization strength")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--select-lambda", action="store_true",
                        help="Pick lam from the grid on a held-out validation split")
    parser.add_argument("--val-fraction", type=float, default=0.2)
    parser.add_argument("--out", required=True, help="Model file to write")


def run(args, settings):
    features = load_labeled(args.features)
    lam, search = settings["svm_lambda"], None
    if args.select_lambda:
        train_set, val_set = holdout(features, args.val_fraction, settings["seed"])
        if val_set is None:
            raise UsageError("--select-lambda needs --val-fraction > 0")
        lam, _, table = select_svm_lambda((train_set.matrix, list(train_set.labels)),
                                          (val_set.matrix, list(val_set.labels)),
                                          epochs=settings["svm_epochs"], seed=settings["seed"])
        search = table.to_dict(orient="records")
    # the final model always sees every training row
    model = train_linear_svm(features.matrix, list(features.labels), lam, settings["svm_epochs"], settings["seed"])
    save_model(args.out, model, {"input_descriptor": features.descriptor, "input_hash": features.config_hash})
    return {"out": str(args.out), "lam": lam, "classes": len(model.classes), "dim": model.dim,
            "n_train": features.n, "lambda_search": search}
