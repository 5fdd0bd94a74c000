"""Batch command line front-end.

Every subcommand is a thin wrapper over a library operation.  Machine
output (JSON by default, TSV where tabular) goes to stdout or --out;
progress goes to stderr.  Exit codes: 0 success, 1 domain error, 2 usage
error.  Output files are written atomically, so a failing run leaves no
partial output behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np


class CliError(Exception):
    pass


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(args, payload: str | bytes) -> None:
    """Write to --out atomically, or to stdout."""
    out = getattr(args, "out", None)
    if out is None:
        if isinstance(payload, bytes):
            sys.stdout.buffer.write(payload)
        else:
            sys.stdout.write(payload)
        return
    path = Path(out)
    tmp = path.with_name(path.name + ".part")
    try:
        if isinstance(payload, bytes):
            tmp.write_bytes(payload)
        else:
            tmp.write_text(payload, encoding="utf-8")
        tmp.replace(path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _load_baselines(args) -> list:
    from .corpus import parse_pagexml

    if getattr(args, "pagexml", None):
        parsed = parse_pagexml(Path(args.pagexml).read_bytes())
        return [line.baseline for line in parsed.page.lines]
    if getattr(args, "baselines", None):
        raw = json.loads(Path(args.baselines).read_text(encoding="utf-8"))
        return [[tuple(p) for p in b] for b in raw["baselines"]]
    raise CliError("need --pagexml or --baselines")


def _decode_config(args):
    from .decode import DecodeConfig

    if getattr(args, "greedy", False):
        return None
    if getattr(args, "lm", None) is None and not getattr(args, "beam", False):
        return None
    return DecodeConfig(beam_width=args.beam_width, lm_alpha=args.lm_alpha,
                        word_bonus=args.word_bonus)


def _load_lm(args):
    from .lm import import_arpa

    if getattr(args, "lm", None):
        return import_arpa(Path(args.lm).read_text(encoding="utf-8"))
    return None


def _provider(args):
    from .correct import HttpProvider, MockProvider, ProviderConfig

    if args.provider == "mock":
        return MockProvider(max_retries=args.max_retries)
    if not args.endpoint or not args.model:
        raise CliError("--provider http needs --endpoint and --model")
    return HttpProvider(ProviderConfig(
        endpoint=args.endpoint, model=args.model,
        api_key_env=args.api_key_env, max_retries=args.max_retries,
    ))


# -- subcommand implementations ----------------------------------------------


def cmd_segment(args) -> int:
    from .lineproc import RasterImage
    from .nn.tensorio import load_weights
    from .pipeline import Segmenter

    image = RasterImage.from_file(args.image)
    weights = load_weights(Path(args.weights).read_bytes())
    segmenter = Segmenter(weights=weights, baseline_threshold=args.threshold,
                          boundary_threshold=args.boundary)
    _progress(f"segmenting {args.image} ({image.width}x{image.height})")
    baselines = segmenter.segment(image)
    _emit(args, json.dumps({"baselines": [[list(p) for p in b] for b in baselines]}, indent=1) + "\n")
    return 0


def cmd_extract_lines(args) -> int:
    from .lineproc import RasterImage, extract_line, median_baseline_spacing, normalize_line
    from .nn.tensorio import save_tensors

    image = RasterImage.from_file(args.image)
    baselines = _load_baselines(args)
    if not baselines:
        raise CliError("no baselines found")
    spacing = median_baseline_spacing(baselines, image)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, baseline in enumerate(baselines, 1):
        crop = extract_line(image, baseline, spacing)
        (out_dir / f"line{i:03d}.png").write_bytes(crop.image.to_png())
        if args.tensor:
            line = normalize_line(crop)
            data = save_tensors({"pixels": line.pixels},
                                {"baseline_row": line.baseline_row})
            (out_dir / f"line{i:03d}.tensors").write_bytes(data)
    _progress(f"extracted {len(baselines)} lines (spacing {spacing:.1f}px) to {out_dir}")
    return 0


def cmd_train_lm(args) -> int:
    from .lm import export_arpa, train_ngram

    corpus = [line for line in Path(args.infile).read_text(encoding="utf-8").splitlines()
              if line.strip()]
    model = train_ngram(corpus, n=args.order)
    _emit(args, export_arpa(model))
    _progress(f"trained order-{args.order} model on {len(corpus)} lines")
    return 0


def cmd_train_htr(args) -> int:
    from .corpus import load_dataset
    from .nn import TrainConfig, build_recognizer, save_weights, train
    from .nn.train import history_csv
    from .pipeline import samples_from_manifest

    manifest = load_dataset(args.root, args.split)
    samples = samples_from_manifest(manifest, args.images or args.root, "train")
    channels = tuple(int(c) for c in args.conv_channels.split(","))
    if len(channels) != 4:
        raise CliError("--conv-channels needs 4 comma-separated values")
    spec = build_recognizer(
        len(manifest.charset.chars), conv_channels=channels,
        lstm_hidden=args.lstm_hidden, lstm_layers=args.lstm_layers,
        dropout=args.dropout, input_height=args.height,
    )
    config = TrainConfig(
        lr0=args.lr, weight_decay=args.weight_decay, max_epochs=args.epochs,
        batch_size=args.batch_size, seed=args.seed, val_fraction=args.val_fraction,
        augment=not args.no_augment, plateau_patience=args.patience,
    )
    _progress(f"training on {len(samples)} lines, charset {len(manifest.charset.chars)}")
    weights, history = train(
        samples, manifest.charset, config, spec=spec,
        epoch_callback=lambda h: _progress(
            f"epoch {h.epoch}: loss {h.loss:.3f} cer {h.cer:.1f} wer {h.wer:.1f} lr {h.lr:.2e}"
        ),
    )
    Path(args.out).write_bytes(save_weights(weights))
    if args.history:
        Path(args.history).write_text(history_csv(history), encoding="utf-8")
    _progress(f"saved weights to {args.out}")
    return 0


def cmd_transcribe(args) -> int:
    from .lineproc import RasterImage, median_baseline_spacing
    from .nn.tensorio import load_weights, save_tensors
    from .pipeline import Recognizer

    image = RasterImage.from_file(args.image)
    baselines = _load_baselines(args)
    if not baselines:
        raise CliError("no baselines found")
    weights = load_weights(Path(args.weights).read_bytes())
    recognizer = Recognizer(weights=weights, lm=_load_lm(args), decode_cfg=_decode_config(args))
    spacing = median_baseline_spacing(baselines, image)

    def one(indexed):
        i, baseline = indexed
        logits = recognizer.logits_for_line(image, baseline, spacing)
        if args.dump_logits:
            data = save_tensors({"logits": logits.astype(np.float32)},
                                {"charset": recognizer.charset.chars})
            Path(args.dump_logits, f"line{i:03d}.tensors").write_bytes(data)
        return recognizer.decode(logits)

    if args.dump_logits:
        Path(args.dump_logits).mkdir(parents=True, exist_ok=True)
    jobs = args.jobs or os.cpu_count() or 1
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            texts = list(pool.map(one, enumerate(baselines, 1)))
    else:
        texts = [one(pair) for pair in enumerate(baselines, 1)]
    if args.plain:
        _emit(args, "\n".join(texts) + "\n")
    else:
        _emit(args, json.dumps({"lines": texts}, ensure_ascii=False, indent=1) + "\n")
    return 0


def cmd_decode_logits(args) -> int:
    from .corpus import Charset
    from .decode import greedy_decode, beam_decode, DecodeConfig
    from .nn.tensorio import load_tensors, load_weights

    data, meta = load_tensors(Path(args.logits).read_bytes())
    if "logits" not in data:
        raise CliError("container has no 'logits' tensor")
    if meta.get("charset"):
        charset = Charset(list(meta["charset"]))
    elif args.weights:
        charset = load_weights(Path(args.weights).read_bytes()).charset
    else:
        raise CliError("container lacks charset metadata; pass --weights")
    logits = data["logits"]
    lm = _load_lm(args)
    cfg = _decode_config(args)
    if args.greedy or (cfg is None and lm is None):
        results = [(greedy_decode(logits, charset), 0.0)]
    else:
        cfg = cfg or DecodeConfig(beam_width=args.beam_width, lm_alpha=args.lm_alpha,
                                  word_bonus=args.word_bonus)
        cfg.n_best = args.n_best
        results = beam_decode(logits, charset, lm=lm, cfg=cfg)
    payload = {"hypotheses": [{"text": t, "score": s} for t, s in results]}
    _emit(args, json.dumps(payload, ensure_ascii=False, indent=1) + "\n")
    return 0


def _read_hypotheses(hyp: str) -> dict:
    """--hyp accepts a JSON file {page: {line: text}} or a directory of
    <page>__<line>.txt files."""
    path = Path(hyp)
    if path.is_file():
        raw = json.loads(path.read_text(encoding="utf-8"))
        return {(p, l): t for p, lines in raw.items() for l, t in lines.items()}
    if path.is_dir():
        out = {}
        for item in path.glob("*.txt"):
            stem = item.stem
            if "__" not in stem:
                continue
            page_id, line_id = stem.split("__", 1)
            out[(page_id, line_id)] = item.read_text(encoding="utf-8").rstrip("\n")
        return out
    raise CliError(f"--hyp {hyp!r} is neither a file nor a directory")


def cmd_evaluate(args) -> int:
    from .corpus import load_dataset
    from .evaluate import evaluate_cases

    manifest = load_dataset(args.root, args.split)
    hyps = _read_hypotheses(args.hyp)

    def transcriber(page_id: str, line_id: str) -> str:
        try:
            return hyps[(page_id, line_id)]
        except KeyError:
            raise CliError(f"missing hypothesis for {page_id}/{line_id}")

    report = evaluate_cases(manifest, transcriber)
    _emit(args, report.to_tsv() if args.tsv else report.to_json() + "\n")
    return 0


def cmd_correct(args) -> int:
    from .correct import correct_transcription

    lines = Path(args.infile).read_text(encoding="utf-8").rstrip("\n").split("\n")
    result = correct_transcription(lines, _provider(args))
    if result.fallback:
        _progress("warning: provider kept violating the line count; returning input unchanged")
    payload = {
        "lines": result.lines,
        "changed": result.changed,
        "attempts": result.attempts,
        "fallback": result.fallback,
    }
    _emit(args, json.dumps(payload, ensure_ascii=False, indent=1) + "\n")
    return 0


def cmd_translate(args) -> int:
    from .correct import translate

    lines = Path(args.infile).read_text(encoding="utf-8").rstrip("\n").split("\n")
    text = translate(lines, _provider(args))
    _emit(args, json.dumps({"translation": text}, ensure_ascii=False, indent=1) + "\n")
    return 0


def cmd_stats(args) -> int:
    from .corpus import dataset_stats, load_dataset

    manifest = load_dataset(args.root, args.split)
    report = dataset_stats(manifest)
    _emit(args, report.to_tsv() if args.tsv else report.to_json() + "\n")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.load(args.config) if args.config else ServiceConfig()
    if args.port is not None:
        config.port = args.port
    if args.store is not None:
        config.store_dir = args.store
    if args.weights is not None:
        config.recognizer_weights = args.weights
    if args.lm is not None:
        config.lm_path = args.lm
    app = create_app(config)
    _progress(f"serving on port {config.port} (store: {config.store_dir})")
    uvicorn.run(app, host=args.host, port=config.port, log_level="warning")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scriptorium",
        description="Manuscript transcription pipeline: segment, extract, train, "
                    "transcribe, decode, evaluate, correct, translate, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_out(p):
        p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("segment", help="detect baselines in a page image")
    p.add_argument("--image", required=True)
    p.add_argument("--weights", required=True, help="segmentation weights container")
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("--boundary", type=float, default=0.5)
    add_out(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("extract-lines", help="crop and rectify line images")
    p.add_argument("--image", required=True)
    p.add_argument("--pagexml")
    p.add_argument("--baselines", help="JSON file with a 'baselines' list")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--tensor", action="store_true", help="also write normalized tensors")
    p.set_defaults(func=cmd_extract_lines)

    p = sub.add_parser("train-lm", help="train a Kneser-Ney n-gram model")
    p.add_argument("--in", dest="infile", required=True, help="text corpus, one line per sentence")
    p.add_argument("--order", type=int, default=2)
    add_out(p)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("train-htr", help="train the line recognizer")
    p.add_argument("--root", required=True, help="directory of PageXML files")
    p.add_argument("--split", required=True, help="page<TAB>line<TAB>split file")
    p.add_argument("--images", help="image directory (default: --root)")
    p.add_argument("--out", required=True, help="weights output file")
    p.add_argument("--history", help="per-epoch CSV output")
    p.add_argument("--epochs", type=int, default=250)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-2)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--conv-channels", default="32,32,64,64")
    p.add_argument("--lstm-hidden", type=int, default=512)
    p.add_argument("--lstm-layers", type=int, default=3)
    p.add_argument("--dropout", type=float, default=0.3)
    p.set_defaults(func=cmd_train_htr)

    p = sub.add_parser("transcribe", help="transcribe a page image")
    p.add_argument("--weights", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--pagexml")
    p.add_argument("--baselines")
    p.add_argument("--lm", help="ARPA language model for beam fusion")
    p.add_argument("--beam", action="store_true", help="beam search even without an LM")
    p.add_argument("--greedy", action="store_true", help="force greedy decoding")
    p.add_argument("--beam-width", type=int, default=100)
    p.add_argument("--lm-alpha", type=float, default=0.5)
    p.add_argument("--word-bonus", type=float, default=1.5)
    p.add_argument("--jobs", type=int, help="parallel line workers (default: cores)")
    p.add_argument("--plain", action="store_true", help="plain text lines instead of JSON")
    p.add_argument("--dump-logits", help="directory for per-line logit containers")
    add_out(p)
    p.set_defaults(func=cmd_transcribe)

    p = sub.add_parser("decode-logits", help="decode a stored logit matrix")
    p.add_argument("--logits", required=True, help="tensor container with a 'logits' tensor")
    p.add_argument("--weights", help="weights file for the charset when the container lacks it")
    p.add_argument("--lm")
    p.add_argument("--beam", action="store_true")
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--beam-width", type=int, default=100)
    p.add_argument("--lm-alpha", type=float, default=0.5)
    p.add_argument("--word-bonus", type=float, default=1.5)
    p.add_argument("--n-best", type=int, default=1)
    add_out(p)
    p.set_defaults(func=cmd_decode_logits)

    p = sub.add_parser("evaluate", help="CER/WER report for stored hypotheses")
    p.add_argument("--root", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--hyp", required=True,
                   help="JSON {page: {line: text}} or directory of page__line.txt files")
    p.add_argument("--tsv", action="store_true")
    add_out(p)
    p.set_defaults(func=cmd_evaluate)

    for name, func in (("correct", cmd_correct), ("translate", cmd_translate)):
        p = sub.add_parser(name, help=f"{name} transcription lines via an LLM provider")
        p.add_argument("--in", dest="infile", required=True)
        p.add_argument("--provider", choices=("mock", "http"), default="mock")
        p.add_argument("--endpoint", default="")
        p.add_argument("--model", default="")
        p.add_argument("--api-key-env", default="LLM_API_KEY")
        p.add_argument("--max-retries", type=int, default=2)
        add_out(p)
        p.set_defaults(func=func)

    p = sub.add_parser("stats", help="dataset composition per roll type")
    p.add_argument("--root", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--tsv", action="store_true")
    add_out(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int)
    p.add_argument("--store")
    p.add_argument("--weights")
    p.add_argument("--lm")
    p.set_defaults(func=cmd_serve)

    return parser


DOMAIN_ERRORS: tuple = ()


def _domain_errors():
    global DOMAIN_ERRORS
    if not DOMAIN_ERRORS:
        from .corpus import CorpusError
        from .correct import NoOutput, ProviderError
        from .lineproc import LineProcError
        from .lm import LmError
        from .nn.layers import ShapeError
        from .nn.tensorio import TensorFormatError
        from .nn.train import TrainingDiverged

        DOMAIN_ERRORS = (
            CliError, CorpusError, LineProcError, LmError, ShapeError,
            TensorFormatError, TrainingDiverged, ProviderError, NoOutput,
            FileNotFoundError, ValueError,
        )
    return DOMAIN_ERRORS


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _domain_errors() as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
