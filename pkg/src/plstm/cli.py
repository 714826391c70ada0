"""Command-line entry point: ``plstm {synth,train,eval,compare,gradcheck}``.

Every command reads its settings from an optional INI-style config file
(``--config FILE``, section named after the command, flat ``key = value``
lines) and from flags; flags win. Unknown keys are rejected before any work
starts. Exit codes: 0 success, 1 verification failure, 2 usage or
configuration error, 3 I/O or file-format error.
"""

import argparse
import configparser
import sys
from pathlib import Path

from . import data, evaluation, experiment, training
from .errors import ConfigError, PlstmError

REQUIRED = object()


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _str_list(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


HYPER = {
    "learning_rate": (float, 0.1, "SGD step size"),
    "max_epochs": (int, 100, "epoch limit"),
    "patience": (int, 10, "epochs without validation improvement before stopping"),
    "clip_norm": (float, 5.0, "global gradient-norm clip"),
    "seed": (int, 0, "initialisation and shuffling seed"),
}

PROTOCOL = {
    "output_channel": (str, "", "channel whose next label is predicted (default: first)"),
    "test_fraction": (float, 0.2, "chronologically last share held out for testing"),
    "valid_ratio": (float, 0.3, "validation share of the remaining samples"),
    "split_seed": (int, 0, "stratified split seed"),
    "hidden_size": (int, 80, "LSTM hidden size"),
}

SCHEMAS = {
    "synth": {
        "out": (str, REQUIRED, "corpus CSV to write"),
        "n_channels": (int, 4, "number of channels"),
        "length": (int, 1000, "number of aligned slots"),
        "vocab_size": (int, 11, "number of labels"),
        "coupling": (float, 0.8, "probability that the output label follows the cross-channel rule"),
        "concentration": (float, 1.0, "Dirichlet concentration of the base chains"),
        "skew": (float, 1.0, "label popularity decay"),
        "seed": (int, 1, "generator seed"),
    },
    "train": {
        "corpus": (str, REQUIRED, "corpus CSV"),
        "out_dir": (str, REQUIRED, "directory for model.json and history.csv"),
        "model": (str, "plstm", "ngram | multingram | lstm | blstm | plstm"),
        "n_streams": (int, 4, "PLSTM stream count"),
        "history": (int, 2, "history size L"),
        **PROTOCOL,
        **HYPER,
    },
    "eval": {
        "model": (str, REQUIRED, "model file written by train"),
        "corpus": (str, REQUIRED, "corpus CSV"),
        "out_dir": (str, REQUIRED, "directory for the report files"),
        "exclude_k": (int, 2, "least frequent classes left out of the second F1"),
        "test_fraction": (float, None, "evaluate on this final share (1 = whole corpus; "
                                       "default: the model's)"),
    },
    "compare": {
        "corpus": (str, REQUIRED, "corpus CSV"),
        "out_dir": (str, REQUIRED, "directory for the grid report"),
        "systems": (_str_list, None, "comma list, e.g. ngram,multingram,lstm,p2lstm,p4lstm "
                                     "(default: all five)"),
        "history_sizes": (_int_list, [1, 2, 3, 4], "comma list of history sizes"),
        "exclude_k": (int, 2, "least frequent classes left out of the second F1"),
        **PROTOCOL,
        **HYPER,
    },
    "gradcheck": {
        "seeds": (int, 10, "random instances per architecture"),
        "archs": (_str_list, ["lstm", "blstm", "plstm-2", "plstm-4"], "architectures to check"),
        "eps": (float, 1e-5, "central-difference step"),
        "tol": (float, 1e-4, "maximum allowed relative error"),
        "corrupt": (_bool, False, "perturb one analytic gradient (self-test of the check)"),
    },
}


def _flag(key):
    return "--" + key.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="plstm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI file; settings are read from its [%s] section" % name)
        for key, (conv, default, text) in schema.items():
            shown = "required" if default is REQUIRED else f"default: {default}"
            if conv is _bool:
                p.add_argument(_flag(key), dest=key, action="store_const", const=True,
                               default=None, help=f"{text}")
            else:
                p.add_argument(_flag(key), dest=key, default=None, help=f"{text} ({shown})")
    return parser


def resolve_config(command, args):
    """Merge defaults, the config file section and flags; validate every key."""
    schema = SCHEMAS[command]
    raw = {}
    if args.config:
        cp = configparser.ConfigParser(interpolation=None)
        try:
            with open(args.config, encoding="utf-8") as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {args.config}: {exc}") from exc
        if cp.has_section(command):
            for key, value in cp.items(command):
                if key not in schema:
                    raise ConfigError(f"unknown key {key!r} in [{command}] of {args.config}")
                raw[key] = value
    for key in schema:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    cfg = {}
    for key, (conv, default, _) in schema.items():
        if key in raw:
            try:
                cfg[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from exc
        elif default is REQUIRED:
            raise ConfigError(f"missing required setting {key!r}")
        else:
            cfg[key] = default
    return cfg


def _hyper(cfg):
    return training.Hyperparams(cfg["learning_rate"], cfg["max_epochs"], cfg["patience"],
                                cfg["seed"], cfg["clip_norm"])


def _output_channel(cfg, corpus):
    return corpus.channel_index(cfg["output_channel"]) if cfg["output_channel"] else 0


def _err(msg):
    print(msg, file=sys.stderr)


def cmd_synth(cfg):
    spec = data.SynthSpec(cfg["n_channels"], cfg["length"], cfg["vocab_size"], cfg["coupling"],
                          cfg["concentration"], cfg["skew"])
    corpus = data.synth_generate(spec, cfg["seed"])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    data.write_corpus(out, corpus)
    print(f"wrote {len(corpus)} slots x {corpus.n_channels} channels to {out}")
    for name, freq in data.label_frequencies(corpus).items():
        print(f"{name}: " + " ".join(f"{lab}={c}" for lab, c in freq.items()))
    return 0


def cmd_train(cfg):
    corpus, _ = data.load_corpus(cfg["corpus"])
    kind = cfg["model"]
    if kind not in experiment.KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {', '.join(experiment.KINDS)}")
    out_channel = _output_channel(cfg, corpus)
    if kind == "plstm":
        experiment.stream_channels(corpus.n_channels, out_channel, cfg["n_streams"])
    hp = _hyper(cfg)
    folds = experiment.prepare_folds(corpus, cfg["history"], out_channel, cfg["test_fraction"],
                                     cfg["valid_ratio"], cfg["split_seed"])
    clf, history = experiment.fit_system(kind, folds, cfg["hidden_size"], hp, cfg["n_streams"],
                                         cfg["test_fraction"], log=_err)
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    experiment.save_classifier(out / "model.json", clf)
    training.write_history_csv(out / "history.csv", history)
    golds = [folds.dense_target(s) for s in folds.valid]
    cm, _ = experiment.evaluate_classifier(clf, folds.valid, golds)
    print(f"validation error rate: {evaluation.percent(evaluation.error_rate(cm))}%")
    return 0


def cmd_eval(cfg):
    clf = experiment.load_classifier(cfg["model"])
    corpus, _ = data.load_corpus(cfg["corpus"])
    frac = cfg["test_fraction"]
    if frac is not None and not 0 < frac <= 1:
        raise ConfigError(f"test_fraction must lie in (0, 1], got {frac}")
    samples, golds, dropped = experiment.eval_samples_for(clf, corpus, frac)
    if not samples:
        raise ConfigError("no evaluable samples in the corpus")
    cm, report = experiment.evaluate_classifier(clf, samples, golds, cfg["exclude_k"])
    out = Path(cfg["out_dir"])
    markdown, _ = evaluation.emit_report({(clf.kind, clf.history): report}, out, stem="report")
    (out / "confusion.csv").write_text(cm.to_csv(), encoding="utf-8")
    lines = ["class,precision,recall,f1,support"]
    support = cm.counts.sum(axis=1)
    for k, name in enumerate(report.class_names):
        lines.append(f"{name},{evaluation.percent(report.precision[k])},"
                     f"{evaluation.percent(report.recall[k])},"
                     f"{evaluation.percent(report.f1[k])},{support[k]}")
    (out / "per_class.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(markdown, end="")
    print(f"samples: {report.n_samples} (dropped {dropped} with targets unknown to the model); "
          f"excluded: {', '.join(report.excluded) or 'none'}")
    return 0


def cmd_compare(cfg):
    corpus, _ = data.load_corpus(cfg["corpus"])
    out_channel = _output_channel(cfg, corpus)
    if cfg["systems"] is None:
        systems = experiment.default_systems(corpus.n_channels)
    else:
        systems = [experiment.parse_system(t, corpus.n_channels) for t in cfg["systems"]]
    if not cfg["history_sizes"]:
        raise ConfigError("history_sizes is empty")
    result = experiment.run_grid(corpus, systems, cfg["history_sizes"], out_channel,
                                 cfg["hidden_size"], _hyper(cfg), cfg["test_fraction"],
                                 cfg["valid_ratio"], cfg["split_seed"], cfg["exclude_k"],
                                 log=_err)
    markdown, _ = experiment.write_grid(result, cfg["out_dir"])
    print(markdown, end="")
    return 0


def cmd_gradcheck(cfg):
    status = 0
    for arch in cfg["archs"]:
        if arch not in training.GRADCHECK_ARCHITECTURES:
            raise ConfigError(f"unknown architecture {arch!r}")
    for arch in cfg["archs"]:
        r = training.gradcheck(arch, range(cfg["seeds"]), cfg["eps"], cfg["corrupt"])
        ok = r.max_rel_error < cfg["tol"]
        print(f"{arch:8s} max relative error {r.max_rel_error:.3e} {'ok' if ok else 'FAIL'}")
        if not ok:
            name, idx = r.worst_param
            _err(f"{arch}: worst parameter {name}{list(idx)} at seed {r.worst_seed}")
            status = 1
    return status


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval,
            "compare": cmd_compare, "gradcheck": cmd_gradcheck}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except PlstmError as exc:
        _err(f"plstm {args.command}: {exc}")
        return exc.exit_code
    except OSError as exc:
        _err(f"plstm {args.command}: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
