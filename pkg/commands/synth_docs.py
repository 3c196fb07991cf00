# commands/synth_docs.py
from config import SYNTH_PAGE_HEIGHT, SYNTH_PAGE_WIDTH
from synth_docs import MANIFEST_NAME, NoiseConfig, synth_docs

NAME = "synth-docs"
HELP = "Generate a synthetic template corpus with a manifest"
OVERRIDES = {}


def add_arguments(parser):
    defaults = NoiseConfig()
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--classes", type=int, default=5)
    parser.add_argument("--per-class", type=int, default=40)
    parser.add_argument("--flip-prob", type=float, default=defaults.flip_prob)
    parser.add_argument("--max-shift", type=float, default=defaults.max_shift)
    parser.add_argument("--thickness-jitter", type=int, default=defaults.thickness_jitter)
    parser.add_argument("--block-jitter", type=float, default=defaults.block_jitter)
    parser.add_argument("--block-dropout", type=float, default=defaults.block_dropout)
    parser.add_argument("--no-noise", action="store_true", help="Render every class as its clean template")
    parser.add_argument("--width", type=int, default=SYNTH_PAGE_WIDTH)
    parser.add_argument("--height", type=int, default=SYNTH_PAGE_HEIGHT)


def run(args, settings):
    if args.no_noise:
        noise = NoiseConfig.off()
    else:
        noise = NoiseConfig(args.flip_prob, args.max_shift, args.thickness_jitter,
                            args.block_jitter, args.block_dropout)
    manifest = synth_docs(args.out_dir, args.classes, args.per_class, noise, settings["seed"],
                          args.width, args.height)
    return {"out_dir": str(args.out_dir), "manifest": str(manifest.root / MANIFEST_NAME),
            "classes": args.classes, "pages": len(manifest)}
