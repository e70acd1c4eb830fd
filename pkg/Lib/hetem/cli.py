"""
The ``hetem`` command line.

    hetem simulate --config cfg.json --out data/
    hetem train --config cfg.json --data data/ --out run/ [--flags no_cpp]
    hetem evaluate --run run/ --data data/
    hetem fsc a.mrc b.mrc --out fsc/
    hetem extract-volume --run run/ --z 0.1,0,... --out vol.mrc
"""

import argparse
import logging
import sys

from hetem.errors import HetEMError
from hetem.runConfig import loadConfig, updateConfig

logger = logging.getLogger("hetem")


def _configFromArgs(args):
    config = loadConfig(args.config)
    if getattr(args, "seed", None) is not None:
        config = updateConfig(config, dataset=dict(seed=args.seed), train=dict(seed=args.seed))
    return config


def _floatList(text):
    try:
        return [float(value) for value in text.split(",") if value.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated numbers, got %r" % text)


def _flagList(text):
    return [value for value in text.split(",") if value.strip()]


# --------
# simulate
# --------

def addSimulateArgs(parser):
    parser.add_argument("--config", help="run config (JSON); defaults are used when omitted")
    parser.add_argument("--out", required=True, help="dataset directory")
    parser.add_argument("--seed", type=int, help="override the dataset seed")
    parser.add_argument("--volumes", nargs="+", metavar="MRC", help="ground-truth class volumes to image")
    parser.add_argument("--force", action="store_true", help="write into a non-empty directory")


def mainSimulate(args):
    from hetem.pipeline import cmdSimulate
    manifest = cmdSimulate(_configFromArgs(args), args.out, force=args.force, volumePaths=args.volumes)
    print("%d images, achieved SNR %.2f dB -> %s" % (manifest["nImages"], manifest["snrDbAchieved"], args.out))


# -----
# train
# -----

def addTrainArgs(parser):
    parser.add_argument("--config", help="run config (JSON)")
    parser.add_argument("--data", required=True, help="dataset directory")
    parser.add_argument("--out", required=True, help="run directory")
    parser.add_argument("--seed", type=int, help="override the training seed")
    parser.add_argument("--flags", type=_flagList, default=[], help="ablations: no_cpp,no_fch,no_pds,no_asn")
    parser.add_argument("--epochs", type=int, help="override train.epochs")
    parser.add_argument("--fch-epochs", type=int, help="override train.fchEpochs")
    parser.add_argument("--no-resume", dest="resume", action="store_false", help="refuse to continue existing checkpoints")
    parser.add_argument("--force", action="store_true", help="discard existing checkpoints")


def mainTrain(args):
    from hetem.pipeline import applyFlags, cmdTrain
    config = loadConfig(args.config)
    train = {}
    if args.seed is not None:
        train["seed"] = args.seed
    if args.epochs is not None:
        train["epochs"] = args.epochs
    if args.fch_epochs is not None:
        train["fchEpochs"] = args.fch_epochs
    if train:
        config = updateConfig(config, train=train)
    config = applyFlags(config, args.flags)
    _, epochLog = cmdTrain(config, args.data, args.out, resume=args.resume, force=args.force)
    print("trained %d epochs -> %s" % (len(epochLog), args.out))


# --------
# evaluate
# --------

def addEvaluateArgs(parser):
    parser.add_argument("--run", required=True, help="run directory")
    parser.add_argument("--data", required=True, help="dataset directory")
    parser.add_argument("--out", help="output directory (default: <run>/evaluation)")
    parser.add_argument("--checkpoint", help="checkpoint to evaluate (default: newest)")
    parser.add_argument("--force", action="store_true", help="write into a non-empty directory")


def mainEvaluate(args):
    from hetem.pipeline import cmdEvaluate
    metrics = cmdEvaluate(args.run, args.data, outDir=args.out, checkpoint=args.checkpoint, force=args.force)
    for key in ("rot_mse_median", "trans_mse_median", "class_err", "spearman_pc1", "fsc_res"):
        print("%s: %s" % (key, metrics.get(key)))


# ---
# fsc
# ---

def addFscArgs(parser):
    parser.add_argument("volumes", nargs=2, metavar="MRC", help="volumes to compare")
    parser.add_argument("--out", required=True, help="output directory for fsc.csv")
    parser.add_argument("--cutoff", type=float, default=0.5)


def mainFsc(args):
    from hetem.pipeline import cmdFsc
    summary = cmdFsc(args.volumes[0], args.volumes[1], args.out, cutoff=args.cutoff)
    for cutoff, values in summary.items():
        print("FSC=%s: %.3f pixels (%.3f A)" % (cutoff, values["pixels"], values["angstrom"]))


# --------------
# extract-volume
# --------------

def addExtractVolumeArgs(parser):
    parser.add_argument("--run", required=True, help="run directory")
    parser.add_argument("--z", required=True, type=_floatList, help="latent vector, comma separated")
    parser.add_argument("--out", required=True, help="output MRC path")
    parser.add_argument("--checkpoint", help="checkpoint to use (default: newest)")


def mainExtractVolume(args):
    from hetem.pipeline import cmdExtractVolume
    volume = cmdExtractVolume(args.run, args.z, args.out, checkpoint=args.checkpoint)
    print("wrote %d^3 volume -> %s" % (volume.L, args.out))


commands = [
    ("simulate", addSimulateArgs, mainSimulate, "generate a synthetic particle dataset"),
    ("train", addTrainArgs, mainTrain, "train a model on a dataset"),
    ("evaluate", addEvaluateArgs, mainEvaluate, "evaluate a trained model against ground truth"),
    ("fsc", addFscArgs, mainFsc, "Fourier shell correlation of two volumes"),
    ("extract-volume", addExtractVolumeArgs, mainExtractVolume, "decode a latent vector into a volume"),
]


def makeParser():
    parser = argparse.ArgumentParser(prog="hetem", description="Heterogeneous cryo-EM reconstruction with pose prediction.")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, addArgs, func, summary in commands:
        subparser = subparsers.add_parser(name, help=summary, description=summary)
        addArgs(subparser)
        subparser.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = makeParser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except HetEMError as error:
        logger.debug("command failed", exc_info=True)
        print("hetem %s: error: %s" % (args.command, error), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
