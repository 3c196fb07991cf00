# commands/train_mlp.py
import logging

from commands import holdout, load_labeled
from mlp import grid_search, train
from processing import MLP_INPUTS, train_config
from storage import save_model

logger = logging.getLogger(__name__)

NAME = "train-mlp"
HELP = "Train the fully connected layers of the hybrid model on a FeatureSet"
OVERRIDES = {
    "epochs": "mlp_epochs",
    "hidden_width": "mlp_hidden_width",
    "hidden_layers": "mlp_hidden_layers",
    "dropout": "mlp_dropout",
    "learning_rate": "mlp_learning_rate",
}

SEARCH_GRID = {"learning_rate": [0.1, 0.01, 0.001], "dropout_rate": [0.3, 0.4]}


def add_arguments(parser):
    parser.add_argument("--features", required=True, help="Labeled training FeatureSet (rl, fv*, fv256pca)")
    parser.add_argument("--val-features", help="Labeled validation FeatureSet")
    parser.add_argument("--val-fraction", type=float, default=0.0,
                        help="Hold out this fraction of --features for validation")
    parser.add_argument("--grid-search", action="store_true",
                        help="Choose learning rate and dropout on the validation set")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--hidden-width", type=int)
    parser.add_argument("--hidden-layers", type=int)
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--out", required=True, help="Model file to write")


def run(args, settings):
    features = load_labeled(args.features)
    if features.descriptor not in MLP_INPUTS:
        logger.warning("Training on '%s' features; hybrid-act extraction needs one of %s",
                       features.descriptor, MLP_INPUTS)
    if args.val_features:
        train_set, val_set = features, load_labeled(args.val_features)
    else:
        train_set, val_set = holdout(features, args.val_fraction, settings["seed"])
    validation = None if val_set is None else (val_set.matrix, list(val_set.labels))
    config = train_config(settings)
    search = None
    if args.grid_search and validation is not None:
        config, model, table = grid_search((train_set.matrix, list(train_set.labels)), validation,
                                           SEARCH_GRID, config)
        search = table.to_dict(orient="records")
    else:
        if args.grid_search:
            logger.warning("--grid-search needs a validation set; training with the configured values")
        model = train(train_set.matrix, list(train_set.labels), config, validation)
    save_model(args.out, model, {
        "input_descriptor": features.descriptor,
        "input_hash": features.config_hash,
        "learning_rate": config.learning_rate,
        "dropout_rate": config.dropout_rate,
        "epochs": config.epochs,
        "seed": config.seed,
    })
    return {
        "out": str(args.out),
        "input_descriptor": features.descriptor,
        "input_dim": model.input_dim,
        "hidden_width": model.hidden_width,
        "classes": len(model.classes),
        "n_train": train_set.n,
        "n_val": 0 if val_set is None else val_set.n,
        "grid_search": search,
    }
