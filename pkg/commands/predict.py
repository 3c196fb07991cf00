# commands/predict.py
import json
import logging

from commands import check_input_hash
from errors import DataError
from mlp import MLPModel, predict_mlp
from predict import LinearSVMModel, NCMModel, ncm_predict, svm_predict, top1_accuracy
from storage import load_featureset, load_model, write_text

logger = logging.getLogger(__name__)

NAME = "predict"
HELP = "Classify every row of a FeatureSet with a trained SVM, NCM or MLP"
OVERRIDES = {}


def add_arguments(parser):
    parser.add_argument("--features", required=True, help="FeatureSet to classify")
    parser.add_argument("--model", required=True, help="svm, ncm or mlp model file")
    parser.add_argument("--out", help="Write one JSON prediction per line")


def run(args, settings):
    features = load_featureset(args.features)
    model, meta = load_model(args.model)
    if isinstance(model, MLPModel):
        check_input_hash(meta, features, args.model, args.features)
        predicted = predict_mlp(features.matrix, model)
        kind = "mlp"
    elif isinstance(model, LinearSVMModel):
        check_input_hash(meta, features, args.model, args.features)
        predicted = svm_predict(features.matrix, model)
        kind = "svm"
    elif isinstance(model, NCMModel):
        check_input_hash(meta, features, args.model, args.features)
        predicted = ncm_predict(features.matrix, model)
        kind = "ncm"
    else:
        raise DataError(f"'{args.model}' is not a classifier model")
    predicted = [str(p) for p in predicted]
    if args.out:
        lines = [json.dumps({"id": i, "predicted": p}) for i, p in zip(features.ids, predicted)]
        write_text(args.out, "\n".join(lines) + ("\n" if lines else ""))
    accuracy = None
    if features.labels is not None and features.n:
        accuracy = top1_accuracy(predicted, [str(label) for label in features.labels])
        logger.info("Top-1 accuracy %.4f on %d rows", accuracy, features.n)
    return {"model": kind, "n": features.n, "accuracy": accuracy, "out": args.out}
