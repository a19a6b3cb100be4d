"""CLI for the embedding sidecar: serve the wire protocol or export a store."""

from __future__ import annotations

import argparse
import sys

from op_embed_sidecar.encoders import DEFAULT_MODEL, build_encoder
from op_embed_sidecar.export import export_store
from op_embed_sidecar.service import SidecarConfig, create_app


def _add_encoder_flags(sub):
    sub.add_argument("--model", default=DEFAULT_MODEL, help="model identifier for the sbert backend")
    sub.add_argument("--backend", choices=("sbert", "hash"), default="sbert")
    sub.add_argument("--device", default="cpu")
    sub.add_argument("--hash-dim", type=int, default=384)
    sub.add_argument("--no-normalize", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="op-embed-sidecar", description=__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)

    serve = subparsers.add_parser("serve", help="run the embedding HTTP service")
    serve.add_argument("--bind", default="127.0.0.1:8100", help="host:port")
    serve.add_argument("--max-batch", type=int, default=32)
    _add_encoder_flags(serve)
    serve.set_defaults(func=cmd_serve)

    export = subparsers.add_parser("export", help="write vector-store JSONL for a text or dataset file")
    export.add_argument("texts_file")
    export.add_argument("out_file")
    export.add_argument("--batch-size", type=int, default=64)
    _add_encoder_flags(export)
    export.set_defaults(func=cmd_export)
    return parser


def _config(args) -> SidecarConfig:
    return SidecarConfig(
        model_identifier=args.model,
        backend=args.backend,
        device=args.device,
        max_batch=getattr(args, "max_batch", 32),
        normalize=not args.no_normalize,
        hash_dim=args.hash_dim,
    )


def cmd_serve(args) -> int:
    import uvicorn

    host, _, port = args.bind.rpartition(":")
    app = create_app(_config(args))
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def cmd_export(args) -> int:
    cfg = _config(args)
    encoder = build_encoder(cfg.backend, cfg.model_identifier, cfg.device, cfg.hash_dim)
    count = export_store(args.texts_file, args.out_file, encoder,
                         normalize=cfg.normalize, batch_size=args.batch_size)
    print(f"wrote {count} rows to {args.out_file}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
