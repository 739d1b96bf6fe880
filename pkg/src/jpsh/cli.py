"""Command-line frontend: train, encode, search and evaluate hashing experiments.

Configuration comes from a flat key/value file (``key = value`` per line,
values in TOML-style scalars or lists) with command-line flags overriding
file entries. Every run writes the fully resolved configuration as a manifest
next to its outputs, so a manifest re-run reproduces the experiment exactly.

Exit codes: 0 success, 2 usage or configuration error, 3 solver failure,
4 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import baselines, data_io, metrics, model_io
from .encoder import encode_batch, load_codes, save_codes
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    EmptyIndexError,
    FormatError,
    JpshError,
    LabelError,
    ParamError,
    ShapeError,
    SolverError,
    SplitError,
)
from .index import HammingIndex, search_radius, search_ranked
from .optimizer import MODES, Hyperparams, train

_EXIT_CODES = [
    ((ConfigError, ParamError), 2),
    ((SolverError, DivergenceError), 3),
    (
        (DataError, FormatError, SplitError, LabelError, ShapeError, EmptyIndexError),
        4,
    ),
]

# every recognized configuration key with its expected type
_CONFIG_SPEC: dict[str, type] = {
    "data": str,
    "format": str,
    "labels": str,
    "labels_format": str,
    "test_data": str,
    "test_labels": str,
    "test_per_class": int,
    "split_strategy": str,
    "split_seed": int,
    "bits": int,
    "m": int,
    "k": int,
    "psi": int,
    "lambda1": float,
    "lambda2": float,
    "lambda3": float,
    "iters": int,
    "eps": float,
    "ridge": float,
    "seed": int,
    "mode": str,
    "modes": list,
    "bits_list": list,
    "anchors": str,
    "center": bool,
    "out_dir": str,
    "top_ns": list,
    "model_type": str,
}

_DEFAULTS = {
    "format": "fvec-binary",
    "labels_format": "indices",
    "split_strategy": "per-class-stratified",
    "split_seed": 0,
    "bits": 16,
    "m": 64,
    "k": 7,
    "psi": 7,
    "lambda1": 1.0,
    "lambda2": 1.0,
    "lambda3": 10.0,
    "iters": 10,
    "eps": 1e-8,
    "ridge": 1e-8,
    "seed": 0,
    "mode": "jpsh",
    "anchors": "kmeans",
    "center": True,
    "out_dir": ".",
    "top_ns": [1, 5, 10, 50, 100],
    "model_type": "jpsh",
}


def parse_config_file(path: Path) -> dict:
    """Parse ``key = value`` lines; values are JSON-style scalars or lists."""
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    cfg: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value.strip('"')
        cfg[key] = parsed
    return cfg


def _resolve_config(file_cfg: dict, overrides: dict) -> dict:
    cfg = dict(_DEFAULTS)
    for source in (file_cfg, overrides):
        for key, value in source.items():
            if value is None:
                continue
            if key not in _CONFIG_SPEC:
                raise ConfigError(f"unknown configuration key {key!r}")
            want = _CONFIG_SPEC[key]
            if want in (int, float) and isinstance(value, (int, float)) and not isinstance(value, bool):
                cfg[key] = want(value)
            elif want is bool and isinstance(value, bool):
                cfg[key] = value
            elif want is list and isinstance(value, list):
                cfg[key] = value
            elif want is str and isinstance(value, str):
                cfg[key] = value
            else:
                raise ConfigError(
                    f"configuration key {key!r} expects {want.__name__}, got {value!r}"
                )
    if cfg["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    if cfg["model_type"] not in ("jpsh", "lsh"):
        raise ConfigError("model_type must be jpsh or lsh")
    if cfg["anchors"] not in ("kmeans", "random"):
        raise ConfigError("anchors must be kmeans or random")
    return cfg


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return json.dumps(str(value))


def write_manifest(cfg: dict, path: Path) -> None:
    lines = [f"{key} = {_toml_value(cfg[key])}" for key in sorted(cfg)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _require_file(path_str: str | None, what: str) -> Path:
    if not path_str:
        raise ConfigError(f"missing required setting: {what}")
    path = Path(path_str)
    if not path.exists():
        raise ConfigError(f"{what} file does not exist: {path}")
    return path


def _load_corpus(cfg: dict, data_key: str = "data", labels_key: str = "labels"):
    path = _require_file(cfg.get(data_key), data_key)
    fs = data_io.load_features(path, cfg["format"])
    if cfg.get(labels_key):
        labels = data_io.load_labels(
            _require_file(cfg[labels_key], labels_key), cfg["labels_format"]
        )
        fs = data_io.FeatureSet(fs.features, fs.ids, labels)
    return fs


def _split_corpus(cfg: dict, fs):
    if cfg.get("test_data"):
        test = _load_corpus(cfg, "test_data", "test_labels")
        return fs, test
    if not cfg.get("test_per_class"):
        raise ConfigError("evaluation needs test_data or test_per_class")
    spec = data_io.SplitSpec(
        cfg["test_per_class"], cfg["split_seed"], cfg["split_strategy"]
    )
    return data_io.split(fs, spec)


def _hyper_from_cfg(cfg: dict, bits: int | None = None, mode: str | None = None) -> Hyperparams:
    return Hyperparams(
        l=bits or cfg["bits"],
        m=cfg["m"],
        k=cfg["k"],
        psi=cfg["psi"],
        lambda1=cfg["lambda1"],
        lambda2=cfg["lambda2"],
        lambda3=cfg["lambda3"],
        T=cfg["iters"],
        eps=cfg["eps"],
        mode=mode or cfg["mode"],
        seed=cfg["seed"],
        ridge=cfg["ridge"],
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(cfg: dict) -> int:
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    fs = _load_corpus(cfg)
    if cfg.get("test_per_class"):
        fs, _ = _split_corpus(cfg, fs)
    if cfg["model_type"] == "lsh":
        model = baselines.lsh_train(fs.d, cfg["bits"], cfg["seed"])
        model_io.save_model(model, out_dir / "model.jpshm")
        print(f"lsh model: d={fs.d} bits={cfg['bits']} seed={cfg['seed']}")
    else:
        hyper = _hyper_from_cfg(cfg)
        model, trace = train(
            fs, hyper, center=cfg["center"], anchor_method=cfg["anchors"]
        )
        model_io.save_model(model, out_dir / "model.jpshm")
        trace.to_csv(out_dir / "trace.csv")
        terms = trace.terms[-1]
        print(f"final objective: {trace.objectives[-1]:.6g}")
        print(
            "terms: fit_anchor={:.6g} fit_pairwise={:.6g} "
            "sparsity_P={:.6g} network={:.6g} sparsity_W={:.6g}".format(*terms)
        )
        if trace.converged_at is not None:
            print(f"converged at iteration {trace.converged_at}")
    write_manifest(cfg, out_dir / "manifest.toml")
    return 0


def _encode_with(model, fs):
    if isinstance(model, baselines.LshModel):
        return baselines.lsh_encode_batch(model, fs)
    return encode_batch(model, fs)


def cmd_encode(cfg: dict, model_path: str, out_path: str) -> int:
    model = model_io.load_model(_require_file(model_path, "model"))
    fs = _load_corpus(cfg)
    codes = _encode_with(model, fs)
    save_codes(codes, out_path)
    print(f"encoded {len(codes)} samples at {codes.l} bits -> {out_path}")
    return 0


def cmd_search(
    cfg: dict,
    model_path: str,
    codes_path: str,
    queries_path: str,
    top_n: int | None,
    radius: int | None,
) -> int:
    model = model_io.load_model(_require_file(model_path, "model"))
    db = load_codes(_require_file(codes_path, "codes"))
    queries = data_io.load_features(
        _require_file(queries_path, "queries"), cfg["format"]
    )
    qcodes = _encode_with(model, queries)
    index = HammingIndex(db)
    for qi in range(len(qcodes)):
        if radius is not None:
            res = search_radius(index, qcodes.codes[qi], radius, l=qcodes.l)
        else:
            res = search_ranked(index, qcodes.codes[qi], top_n or 10, l=qcodes.l)
        for id_, dist in zip(res.ids, res.distances):
            print(f"{id_}\t{dist}")
    return 0


def cmd_eval(cfg: dict, model_path: str | None) -> int:
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    fs = _load_corpus(cfg)
    train_fs, test_fs = _split_corpus(cfg, fs)
    if train_fs.labels is None or test_fs.labels is None:
        raise LabelError("evaluation requires labels")

    def one_cell(bits: int, mode: str, model=None):
        if model is None:
            hyper = _hyper_from_cfg(cfg, bits=bits, mode=mode)
            model, _ = train(
                train_fs, hyper, center=cfg["center"], anchor_method=cfg["anchors"]
            )
        db_codes = _encode_with(model, train_fs)
        q_codes = _encode_with(model, test_fs)
        report = metrics.evaluate(
            q_codes,
            test_fs.labels,
            db_codes,
            train_fs.labels,
            top_ns=cfg["top_ns"],
            seeds={"seed": cfg["seed"], "mode": mode, "bits": bits},
        )
        stem = f"report_{mode}_{bits}"
        report.save_json(out_dir / f"{stem}.json")
        report.save_curves_csv(out_dir / f"curves_{mode}_{bits}.csv")
        pre100 = report.pre_at.get(100)
        pre_str = f"{pre100:.4f}" if pre100 is not None else "n/a"
        print(f"{mode:>9} {bits:>4} bits  mAP={report.map:.4f}  pre@100={pre_str}")
        return report

    if model_path:
        model = model_io.load_model(_require_file(model_path, "model"))
        bits = model.hyper.l if hasattr(model, "hyper") else model.l
        mode = model.hyper.mode if hasattr(model, "hyper") else "lsh"
        one_cell(bits, mode, model=model)
    else:
        bits_list = [int(b) for b in (cfg.get("bits_list") or [cfg["bits"]])]
        modes = [str(m) for m in (cfg.get("modes") or [cfg["mode"]])]
        for mode in modes:
            if mode not in MODES:
                raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
            for bits in bits_list:
                one_cell(bits, mode)
    write_manifest(cfg, out_dir / "manifest.toml")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--data")
    p.add_argument("--format", choices=data_io.FORMATS)
    p.add_argument("--labels")
    p.add_argument("--labels-format", dest="labels_format", choices=("indices", "idx-labels"))
    p.add_argument("--test-data", dest="test_data")
    p.add_argument("--test-labels", dest="test_labels")
    p.add_argument("--test-per-class", dest="test_per_class", type=int)
    p.add_argument("--split-strategy", dest="split_strategy")
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--bits", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--psi", type=int)
    p.add_argument("--l1", dest="lambda1", type=float)
    p.add_argument("--l2", dest="lambda2", type=float)
    p.add_argument("--l3", dest="lambda3", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--ridge", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--anchors", choices=("kmeans", "random"))
    p.add_argument("--no-center", dest="center", action="store_const", const=False)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--model-type", dest="model_type", choices=("jpsh", "lsh"))


def _flag_overrides(args: argparse.Namespace) -> dict:
    skip = {"command", "config", "model", "codes", "queries", "top", "radius", "out"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jpsh", description="binary hashing for similarity search"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="learn a hashing model")
    _add_config_flags(p_train)

    p_encode = sub.add_parser("encode", help="encode a corpus into a code file")
    _add_config_flags(p_encode)
    p_encode.add_argument("--model", required=True)
    p_encode.add_argument("--out", required=True)

    p_search = sub.add_parser("search", help="query a code database")
    _add_config_flags(p_search)
    p_search.add_argument("--model", required=True)
    p_search.add_argument("--codes", required=True)
    p_search.add_argument("--queries", required=True)
    group = p_search.add_mutually_exclusive_group()
    group.add_argument("--top", type=int)
    group.add_argument("--radius", type=int)

    p_eval = sub.add_parser("eval", help="train/evaluate over bits and mode grids")
    _add_config_flags(p_eval)
    p_eval.add_argument("--model")
    p_eval.add_argument("--bits-list", dest="bits_list_flag")
    p_eval.add_argument("--modes", dest="modes_flag")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_cfg = parse_config_file(Path(args.config)) if args.config else {}
        overrides = _flag_overrides(args)
        for flag, key in (("bits_list_flag", "bits_list"), ("modes_flag", "modes")):
            raw = overrides.pop(flag, None)
            if raw is not None:
                parts = [p.strip() for p in str(raw).split(",") if p.strip()]
                overrides[key] = (
                    [int(p) for p in parts] if key == "bits_list" else parts
                )
        cfg = _resolve_config(file_cfg, overrides)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "encode":
            return cmd_encode(cfg, args.model, args.out)
        if args.command == "search":
            return cmd_search(cfg, args.model, args.codes, args.queries, args.top, args.radius)
        if args.command == "eval":
            return cmd_eval(cfg, args.model)
        raise ConfigError(f"unknown command {args.command!r}")
    except JpshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for classes, code in _EXIT_CODES:
            if isinstance(exc, classes):
                return code
        return 4


if __name__ == "__main__":
    sys.exit(main())
