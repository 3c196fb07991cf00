# commands/evaluate.py
import logging
from pathlib import Path

from commands import load_labeled
from config import EVAL_TASKS
from errors import DataError
from evalsuite import compare_reports, run_protocol
from plotting import write_report_html
from storage import write_text

logger = logging.getLogger(__name__)

NAME = "eval"
HELP = "Run the retrieval / clustering / NCM transfer tasks over random half splits"
OVERRIDES = {"repeats": "eval_repeats"}


def add_arguments(parser):
    parser.add_argument("task", choices=EVAL_TASKS + ("all",))
    parser.add_argument("--features", required=True, nargs="+", help="One or more labeled FeatureSets")
    parser.add_argument("--repeats", type=int, help="Number of random half splits")
    parser.add_argument("--out", help="Write the report as JSON lines")
    parser.add_argument("--table", help="Write the metric x feature table as plain text")
    parser.add_argument("--plot", help="Write plotly charts to this HTML file")


def _report_name(path, features, taken):
    name = features.descriptor or Path(path).stem
    if name in taken:
        name = Path(path).stem
    taken.add(name)
    return name


def run(args, settings):
    tasks = EVAL_TASKS if args.task == "all" else (args.task,)
    reports, taken = [], set()
    for path in args.features:
        features = load_labeled(path)
        if features.n < 2:
            raise DataError(f"'{path}' has {features.n} rows; the split protocol needs at least 2")
        reports.append(run_protocol(features.matrix, list(features.labels), tasks, settings["seed"],
                                    settings["eval_repeats"], ids=list(features.ids),
                                    name=_report_name(path, features, taken)))
    if args.out:
        write_text(args.out, "".join(r.to_jsonl() for r in reports))
    table = compare_reports(reports).to_string()
    if args.table:
        write_text(args.table, table + "\n")
    logger.info("Results (mean ± std, %%):\n%s", table)
    if args.plot:
        write_report_html(reports, args.plot)
    return {
        "task": args.task,
        "repeats": settings["eval_repeats"],
        "seed": settings["seed"],
        "results": [r.to_records() for r in reports],
    }
