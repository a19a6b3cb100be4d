"""Command-line interface binding the scoring, matching, refinement, triplet,
and evaluation pipelines.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

import numpy as np

import opreward
from opreward import serialize
from opreward.embeddings import HttpEmbeddingProvider, LocalVectorStore
from opreward.matching import mbgm
from opreward.pipeline import (
    HttpChatClient,
    Perspective,
    PerspectiveSet,
    RecordingJudgeClient,
    ReplayJudgeClient,
    build_triplets,
    load_dataset_jsonl,
    perspective_set_to_row,
    refine_dataset,
    triplet_to_row,
)
from opreward.protocol import DEFAULT_TAU_GRID, load_cases_jsonl, report_csv, run_protocol, sweep_csv, threshold_sweep
from opreward.rewards import RewardConfig, merge_config, score_response


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _add_provider_flags(sub):
    sub.add_argument("--store", help="local vector store JSONL")
    sub.add_argument("--embed-url", default=None, help="embedding service base URL (or OP_EMBED_URL)")


def _add_judge_flags(sub):
    sub.add_argument("--transcript", help="replay judge votes from this transcript JSONL")
    sub.add_argument("--record-transcript", help="append judge votes to this transcript JSONL")
    sub.add_argument("--llm-url", default=None, help="chat-completions endpoint (or OP_LLM_URL)")
    sub.add_argument("--llm-model", default="judge", help="opaque model name passed to the endpoint")


def _add_config_flags(sub):
    sub.add_argument("--config", help="JSON file with reward-config overrides")
    sub.add_argument("--tau", type=float, default=None, help="matching threshold")
    sub.add_argument("--tau-dup", type=float, default=None, help="duplicate-cluster threshold")
    mode = sub.add_mutually_exclusive_group()
    mode.add_argument("--ladder", dest="ladder_mode", action="store_const", const="ladder", default=None)
    mode.add_argument("--linear", dest="ladder_mode", action="store_const", const="linear")
    sub.add_argument("--alpha-cov", type=float, default=None)
    sub.add_argument("--alpha-uniq", type=float, default=None)
    sub.add_argument("--no-mask", action="store_true", help="disable prompt-keyword masking")


def build_parser() -> _Parser:
    parser = _Parser(prog="opreward", description=__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kwargs):
        sub = subparsers.add_parser(name, **kwargs)
        sub.add_argument("--seed", type=int, default=0, help="seed for any randomized helpers")
        return sub

    score = add_parser("score", help="score responses against references")
    score.add_argument("--prompt-file", required=True, help="JSON row with prompt and references")
    score.add_argument("--responses", required=True, help="JSONL of raw responses")
    score.add_argument("--advantages", action="store_true", help="append group-normalized advantages")
    score.add_argument("--out")
    _add_provider_flags(score)
    _add_config_flags(score)
    score.set_defaults(func=cmd_score)

    match = add_parser("match", help="run the one-to-one matcher on a raw matrix")
    match.add_argument("--matrix", required=True, help="JSON file holding a 2-D score matrix")
    match.add_argument("--tau", type=float, default=0.70)
    match.add_argument("--out")
    match.set_defaults(func=cmd_match)

    refine = add_parser("refine", help="dedup + augmentation pass over a dataset")
    refine.add_argument("--data", required=True, help="dataset JSONL")
    refine.add_argument("--stage1-threshold", type=float, default=0.65)
    refine.add_argument("--out")
    _add_provider_flags(refine)
    _add_judge_flags(refine)
    refine.set_defaults(func=cmd_refine)

    triplets = add_parser("triplets", help="build contrastive triplets from a dataset")
    triplets.add_argument("--data", required=True)
    triplets.add_argument("--out")
    _add_provider_flags(triplets)
    _add_judge_flags(triplets)
    triplets.set_defaults(func=cmd_triplets)

    evalp = add_parser("eval-protocol", help="matcher accuracy over a protocol case file")
    evalp.add_argument("--cases", required=True)
    evalp.add_argument("--matcher", choices=("mbgm", "naive"), default="mbgm")
    evalp.add_argument("--tau", type=float, default=0.70)
    evalp.add_argument("--no-mask", action="store_true")
    evalp.add_argument("--out")
    _add_provider_flags(evalp)
    evalp.set_defaults(func=cmd_eval_protocol)

    sweep = add_parser("sweep", help="protocol accuracy across a threshold grid")
    sweep.add_argument("--cases", required=True)
    sweep.add_argument("--matcher", choices=("mbgm", "naive"), default="mbgm")
    sweep.add_argument("--tau-min", type=float, default=None)
    sweep.add_argument("--tau-max", type=float, default=None)
    sweep.add_argument("--tau-step", type=float, default=None)
    sweep.add_argument("--no-mask", action="store_true")
    sweep.add_argument("--out")
    _add_provider_flags(sweep)
    sweep.set_defaults(func=cmd_sweep)

    serve = add_parser("serve", help="run the HTTP scoring service")
    serve.add_argument("--bind", default="127.0.0.1:8300", help="host:port")
    serve.add_argument("--workers", type=int, default=1)
    _add_provider_flags(serve)
    _add_config_flags(serve)
    serve.set_defaults(func=cmd_serve)

    return parser


def resolve_provider(args):
    if getattr(args, "store", None):
        return LocalVectorStore.from_jsonl(args.store)
    url = getattr(args, "embed_url", None) or os.environ.get("OP_EMBED_URL")
    if url:
        return HttpEmbeddingProvider(url)
    raise UsageError("an embedding source is required: --store or --embed-url (or OP_EMBED_URL)")


def resolve_judge(args):
    if getattr(args, "transcript", None):
        return ReplayJudgeClient.from_jsonl(args.transcript)
    url = getattr(args, "llm_url", None) or os.environ.get("OP_LLM_URL")
    if url:
        client = HttpChatClient(url, args.llm_model, api_key=os.environ.get("OP_LLM_API_KEY"))
        if getattr(args, "record_transcript", None):
            client = RecordingJudgeClient(client, args.record_transcript)
        return client
    raise UsageError("a judge is required: --transcript or --llm-url (or OP_LLM_URL)")


def config_from_args(args) -> RewardConfig:
    cfg = RewardConfig()
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            cfg = merge_config(cfg, json.load(fh))
    overrides = {}
    if getattr(args, "tau", None) is not None:
        overrides["tau_match"] = args.tau
    if getattr(args, "tau_dup", None) is not None:
        overrides["tau_dup"] = args.tau_dup
    if getattr(args, "ladder_mode", None):
        overrides["ladder_mode"] = args.ladder_mode
    if getattr(args, "alpha_cov", None) is not None:
        overrides["alpha_cov"] = args.alpha_cov
    if getattr(args, "alpha_uniq", None) is not None:
        overrides["alpha_uniq"] = args.alpha_uniq
    if getattr(args, "no_mask", False):
        overrides["masking"] = {"enabled": False}
    return merge_config(cfg, overrides)


def _write(out: str | None, text: str) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_references(path: str) -> PerspectiveSet:
    with open(path, encoding="utf-8") as fh:
        row = json.load(fh)
    entries = row.get("references", row.get("perspectives"))
    if not entries:
        raise UsageError("prompt file needs a non-empty 'references' (or 'perspectives') list")
    perspectives = tuple(Perspective(e["name"], e["explanation"]) for e in entries)
    return PerspectiveSet(row_id=str(row.get("id", "prompt")), prompt=row["prompt"], perspectives=perspectives)


def _load_responses(path: str) -> list[str]:
    responses = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            responses.append(row["response"] if isinstance(row, dict) else str(row))
    if not responses:
        raise UsageError("responses file is empty")
    return responses


def cmd_score(args) -> int:
    from opreward.grpo import group_advantages

    provider = resolve_provider(args)
    cfg = config_from_args(args)
    references = _load_references(args.prompt_file)
    responses = _load_responses(args.responses)
    breakdowns = [
        score_response(references.prompt, references, raw, cfg, provider)
        for raw in responses
    ]
    lines = [serialize.dumps(serialize.breakdown_dict(b)) for b in breakdowns]
    if args.advantages:
        adv = group_advantages([b.final for b in breakdowns])
        lines.append(serialize.dumps({"advantages": serialize.advantage_set_dict(adv)}))
    _write(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_match(args) -> int:
    with open(args.matrix, encoding="utf-8") as fh:
        matrix = json.load(fh)
    result = mbgm(np.asarray(matrix, dtype=np.float64), args.tau)
    _write(args.out, serialize.dumps(serialize.match_result_dict(result)) + "\n")
    return 0


def _resolve_augmenter(args):
    url = getattr(args, "llm_url", None) or os.environ.get("OP_LLM_URL")
    if url:
        return HttpChatClient(url, args.llm_model, api_key=os.environ.get("OP_LLM_API_KEY"))
    return None


def cmd_refine(args) -> int:
    provider = resolve_provider(args)
    judge = resolve_judge(args)
    rows = load_dataset_jsonl(args.data)
    outcome = refine_dataset(rows, provider, judge, augmenter=_resolve_augmenter(args),
                             threshold=args.stage1_threshold)
    text = "".join(serialize.dumps(perspective_set_to_row(r)) + "\n" for r in outcome.rows)
    _write(args.out, text)
    print(f"refine: {outcome.counts}", file=sys.stderr)
    return 0


def cmd_triplets(args) -> int:
    provider = resolve_provider(args)
    judge = resolve_judge(args)
    rows = load_dataset_jsonl(args.data)
    lines = []
    skipped = 0
    for row in rows:
        if len(row) < 3:
            skipped += 1
            continue
        for triplet in build_triplets(row, judge, provider):
            lines.append(serialize.dumps(triplet_to_row(triplet)))
    _write(args.out, "".join(line + "\n" for line in lines))
    if skipped:
        print(f"triplets: skipped {skipped} rows with fewer than 3 perspectives", file=sys.stderr)
    return 0


def _masking(args):
    from opreward.embeddings import MaskingConfig

    return MaskingConfig(enabled=not args.no_mask)


def cmd_eval_protocol(args) -> int:
    provider = resolve_provider(args)
    cases = load_cases_jsonl(args.cases)
    report = run_protocol(cases, args.matcher, args.tau, provider, masking=_masking(args))
    _write(args.out, report_csv(report))
    return 0


def cmd_sweep(args) -> int:
    provider = resolve_provider(args)
    cases = load_cases_jsonl(args.cases)
    if args.tau_min is None and args.tau_max is None and args.tau_step is None:
        grid = DEFAULT_TAU_GRID
    else:
        lo = args.tau_min if args.tau_min is not None else 0.65
        hi = args.tau_max if args.tau_max is not None else 0.80
        step = args.tau_step if args.tau_step is not None else 0.01
        n_steps = int(round((hi - lo) / step))
        grid = tuple(round(lo + step * k, 10) for k in range(n_steps + 1))
    reports = threshold_sweep(cases, args.matcher, grid, provider, masking=_masking(args))
    _write(args.out, sweep_csv(reports))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from opreward import serialize as _serialize
    from opreward.embeddings import HttpEmbeddingProvider as _Http
    from opreward.service import create_app

    provider = resolve_provider(args)
    # startup health check: a remote provider must answer a probe request
    if isinstance(provider, _Http):
        provider.fetch(["healthcheck"])
    elif len(provider) == 0:
        raise UsageError("vector store is empty")
    cfg = config_from_args(args)
    host, _, port = args.bind.rpartition(":")
    host = host or "127.0.0.1"
    if args.workers > 1:
        # multi-process serving needs an importable factory; hand the
        # provider/config to the workers through the environment
        if getattr(args, "store", None):
            os.environ["OPREWARD_STORE"] = args.store
        else:
            os.environ["OPREWARD_EMBED_URL"] = args.embed_url or os.environ.get("OP_EMBED_URL", "")
        os.environ["OPREWARD_CONFIG"] = _serialize.dumps(_serialize.reward_config_dict(cfg))
        uvicorn.run("opreward.service:create_app_from_env", factory=True,
                    host=host, port=int(port), workers=args.workers)
    else:
        uvicorn.run(create_app(provider, cfg), host=host, port=int(port))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    random.seed(args.seed)
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
