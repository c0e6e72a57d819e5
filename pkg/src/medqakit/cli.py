"""Command-line front end wiring the pipeline together.

Subcommands: label (weak-label the PQA sources into d1/d2), curate (build
d3/d4 or the manual review queue), schedule (emit staged fine-tuning
manifests), and eval (score prediction files). One JSON config file drives
everything; flags win over the config, and MEDQAKIT_OUTPUT_DIR overrides
the output directory between the two. The effective config is echoed into
the output directory so every artifact is reproducible from disk alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Sequence

from . import __version__, formats
from .bm25 import Bm25Params
from .corpus import DatasetSubsetId
from .covid import (
    CovidFilterPolicy,
    alias_lookup,
    build_artificial_pairs,
    build_review_candidates,
    build_search_queries,
    export_review_queue,
    import_review_queue,
    instantiate_templates,
    load_template_config,
)
from .errors import ConfigError, ContractViolation, ValidationError
from .metrics import evaluate
from .morph import (
    default_lemma_lexicon,
    default_morpheme_lexicon,
    load_lemma_lexicon,
    load_morpheme_lexicon,
)
from .schedule import (
    DEFAULT_HOLDOUT_FRACTIONS,
    SplitSpec,
    builtin_schedules,
    emit_schedule,
    get_schedule,
    make_folds,
    make_target_split,
)
from .weak_label import build_prime_subset

log = logging.getLogger(__name__)

ENV_OUTPUT_DIR = "MEDQAKIT_OUTPUT_DIR"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INTERNAL = 3

_EXTRACTIVE_FILES = {
    DatasetSubsetId.D1: "d1.json",
    DatasetSubsetId.D2: "d2.json",
    DatasetSubsetId.D3: "d3.json",
    DatasetSubsetId.D4: "d4.json",
}


@dataclass
class RunConfig:
    seed: int = 13
    output_dir: Path = Path("out")
    bm25: Bm25Params = field(default_factory=Bm25Params)
    covid_policy: CovidFilterPolicy = field(default_factory=CovidFilterPolicy)
    queue_depth: int = 50
    split_fractions: dict[str, float] = field(
        default_factory=lambda: {s.value: f for s, f in DEFAULT_HOLDOUT_FRACTIONS.items()}
    )
    schedules: list[str] = field(default_factory=lambda: [s.schedule_id for s in builtin_schedules()])
    paths: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "bm25": {"k1": self.bm25.k1, "b": self.bm25.b},
            "covid_filter": {
                "phrases": list(self.covid_policy.phrases),
                "cutoff_date": self.covid_policy.cutoff_date.isoformat(),
            },
            "curation": {"queue_depth": self.queue_depth},
            "split_fractions": self.split_fractions,
            "schedules": self.schedules,
            "paths": {k: (str(v) if v is not None else None) for k, v in self.paths.items()},
        }

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @property
    def provenance(self) -> dict:
        return {"config_hash": self.config_hash, "seed": self.seed, "tool_version": __version__}


def load_run_config(args: argparse.Namespace) -> RunConfig:
    raw: dict = {}
    if args.config:
        path = Path(args.config)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON: {exc}") from exc

    config = RunConfig()
    if "seed" in raw:
        config.seed = int(raw["seed"])
    if "output_dir" in raw:
        config.output_dir = Path(raw["output_dir"])
    bm25_raw = raw.get("bm25", {})
    config.bm25 = Bm25Params(
        k1=float(bm25_raw.get("k1", config.bm25.k1)), b=float(bm25_raw.get("b", config.bm25.b))
    )
    filter_raw = raw.get("covid_filter", {})
    config.covid_policy = CovidFilterPolicy(
        phrases=tuple(filter_raw.get("phrases", config.covid_policy.phrases)),
        cutoff_date=date.fromisoformat(
            str(filter_raw.get("cutoff_date", config.covid_policy.cutoff_date.isoformat()))
        ),
    )
    config.queue_depth = int(raw.get("curation", {}).get("queue_depth", config.queue_depth))
    if "split_fractions" in raw:
        config.split_fractions = {str(k): float(v) for k, v in raw["split_fractions"].items()}
    if "schedules" in raw:
        config.schedules = [str(s) for s in raw["schedules"]]
    config.paths = dict(raw.get("paths", {}))

    # flags win; the env var sits between flags and the config file
    env_out = os.environ.get(ENV_OUTPUT_DIR)
    if env_out:
        config.output_dir = Path(env_out)
    if getattr(args, "output_dir", None):
        config.output_dir = Path(args.output_dir)
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "k1", None) is not None or getattr(args, "b", None) is not None:
        config.bm25 = Bm25Params(
            k1=args.k1 if args.k1 is not None else config.bm25.k1,
            b=args.b if args.b is not None else config.bm25.b,
        )
    if getattr(args, "schedules", None):
        config.schedules = list(args.schedules)
    return config


def _echo_config(config: RunConfig) -> None:
    formats.write_json_atomic(config.output_dir / "config.json", config.to_dict())


def _require_path(config: RunConfig, key: str) -> Path:
    value = config.paths.get(key)
    if not value:
        raise ConfigError(f"config paths.{key} is required for this command")
    path = Path(value)
    if not path.exists():
        raise ConfigError(f"config paths.{key}: no such file: {path}")
    return path


def cmd_label(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    subsets = args.subsets or [
        s for s in ("pqa_l", "pqa_a") if config.paths.get(s)
    ]
    if not subsets:
        raise ConfigError("no PQA source paths configured (paths.pqa_l / paths.pqa_a)")
    _echo_config(config)
    summary: dict[str, Any] = {"provenance": config.provenance, "subsets": {}}
    for name in subsets:
        source_path = _require_path(config, name)
        subset = DatasetSubsetId(name)
        instances = formats.read_source_instances(source_path)
        records, skipped = build_prime_subset(instances, subset, config.bm25)
        pairs = [r.pair for r in records]
        target = pairs[0].subset.value if pairs else {"pqa_l": "d1", "pqa_a": "d2"}[name]
        out_path = config.output_dir / f"{target}.json"
        formats.write_squad(out_path, pairs, config.provenance)
        summary["subsets"][target] = {"emitted": len(pairs), "skipped": skipped, "source": name}
        print(f"{name} -> {out_path}  emitted={len(pairs)} skipped={skipped}")
    formats.write_json_atomic(config.output_dir / "label_summary.json", summary)
    return EXIT_OK


def _load_templates(config: RunConfig):
    templates_path = config.paths.get("templates")
    if templates_path:
        return load_template_config(Path(templates_path))
    from importlib import resources

    with resources.as_file(
        resources.files("medqakit.data").joinpath("covid_templates.json")
    ) as path:
        return load_template_config(path)


def cmd_curate(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    _echo_config(config)

    if args.mode == "artificial":
        corpus = formats.read_abstracts(_require_path(config, "covid_corpus"))
        pairs, skipped = build_artificial_pairs(corpus, config.covid_policy, config.bm25)
        out_path = config.output_dir / "d4.json"
        formats.write_squad(out_path, pairs, config.provenance)
        formats.write_json_atomic(
            config.output_dir / "curate_artificial_summary.json",
            {"provenance": config.provenance, "emitted": len(pairs), "skipped": skipped},
        )
        print(f"artificial -> {out_path}  emitted={len(pairs)} skipped={skipped}")
        return EXIT_OK

    if args.mode == "templates-export":
        templates, vocabs = _load_templates(config)
        questions = instantiate_templates(templates, vocabs)
        lookup = alias_lookup(vocabs)
        queries = build_search_queries(questions, config.covid_policy, term_lookup=lookup)
        queries_path = config.output_dir / "search_queries.txt"
        formats.write_text_atomic(queries_path, "\n".join(queries) + "\n")

        corpus = formats.read_abstracts(_require_path(config, "covid_corpus"))
        candidates = build_review_candidates(
            questions,
            corpus,
            config.covid_policy,
            term_lookup=lookup,
            queue_depth=config.queue_depth,
        )
        queue_path = config.output_dir / "review_queue.tsv"
        export_review_queue(candidates, queue_path)
        formats.write_json_atomic(
            config.output_dir / "curate_export_summary.json",
            {
                "provenance": config.provenance,
                "questions": len(questions),
                "candidates": len(candidates),
                "rows": sum(len(c.candidate_sentences) for c in candidates),
            },
        )
        print(f"templates-export -> {queue_path}  questions={len(questions)} candidates={len(candidates)}")
        return EXIT_OK

    if args.mode == "templates-import":
        review_path = Path(args.review) if args.review else _require_path(config, "review_queue")
        pairs, unreviewed = import_review_queue(review_path)
        out_path = config.output_dir / "d3.json"
        formats.write_squad(out_path, pairs, config.provenance)
        formats.write_json_atomic(
            config.output_dir / "curate_import_summary.json",
            {
                "provenance": config.provenance,
                "emitted": len(pairs),
                "unreviewed": [list(u) for u in unreviewed],
            },
        )
        print(f"templates-import -> {out_path}  emitted={len(pairs)} unreviewed={len(unreviewed)}")
        return EXIT_OK

    raise ConfigError(f"unknown curate mode {args.mode!r}")


def _lexicon_setting(config: RunConfig, key: str):
    return config.paths.get(key, "builtin")


def _load_lexicons(config: RunConfig, needed: bool):
    if not needed:
        return None, None
    morphs_setting = _lexicon_setting(config, "morpheme_lexicon")
    lems_setting = _lexicon_setting(config, "lemma_exceptions")
    if morphs_setting is None or lems_setting is None:
        raise ConfigError(
            "requested schedules apply text transformations but "
            "paths.morpheme_lexicon / paths.lemma_exceptions are disabled"
        )
    if morphs_setting == "builtin":
        morphs = default_morpheme_lexicon()
    else:
        paths = morphs_setting if isinstance(morphs_setting, list) else [morphs_setting]
        morphs = load_morpheme_lexicon(*paths)
    if lems_setting == "builtin":
        lems = default_lemma_lexicon()
    else:
        paths = lems_setting if isinstance(lems_setting, list) else [lems_setting]
        lems = load_lemma_lexicon(*paths)
    return lems, morphs


def cmd_schedule(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    _echo_config(config)
    schedules = [get_schedule(s) for s in config.schedules]

    needed_subsets = {stage.subset for s in schedules for stage in s.stages}
    datasets: dict[DatasetSubsetId, Any] = {}
    for subset in sorted(needed_subsets, key=lambda s: s.value):
        if subset in _EXTRACTIVE_FILES:
            path = config.output_dir / _EXTRACTIVE_FILES[subset]
            if not path.exists():
                raise ValidationError(
                    f"subset {subset.value!r} is not materialized (expected {path}); "
                    "run 'medqakit label' / 'medqakit curate' first"
                )
            datasets[subset] = formats.read_squad(path, subset=subset)
        else:
            datasets[subset] = formats.read_yesno(_require_path(config, subset.value))

    fractions = {DatasetSubsetId(k): v for k, v in config.split_fractions.items()}
    split_inputs = {
        subset: [i.id for i in data]
        for subset, data in datasets.items()
        if subset in fractions
    }
    split = (
        make_target_split(split_inputs, SplitSpec(seed=config.seed, fractions=fractions))
        if split_inputs
        else None
    )
    folds = None
    if DatasetSubsetId.PQA_L in datasets:
        folds = make_folds([i.id for i in datasets[DatasetSubsetId.PQA_L]], config.seed)

    needs_lexicons = any(stage.chain is not None for s in schedules for stage in s.stages)
    lems, morphs = _load_lexicons(config, needs_lexicons)

    print(f"{'schedule':<10} {'stage':>5} {'subset':<7} {'n':>7}")
    manifest_index = []
    for schedule in schedules:
        schedule_dir = config.output_dir / "schedules" / schedule.schedule_id
        manifest_path = emit_schedule(
            schedule,
            datasets,
            split,
            schedule_dir,
            folds=folds,
            lems=lems,
            morphs=morphs,
            provenance=config.provenance,
        )
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        for stage in manifest["stages"]:
            print(
                f"{schedule.schedule_id:<10} {stage['stage_index']:>5} "
                f"{stage['subset']:<7} {stage['n_instances']:>7}"
            )
        manifest_index.append(str(manifest_path.relative_to(config.output_dir)))
    formats.write_json_atomic(
        config.output_dir / "schedule_summary.json",
        {"provenance": config.provenance, "manifests": manifest_index},
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    predictions = formats.read_predictions(Path(args.predictions))
    if args.task == "extractive":
        golds = formats.read_squad(Path(args.gold), subset=DatasetSubsetId.D1)
    else:
        golds = formats.read_yesno(Path(args.gold))
    report = evaluate(golds, predictions, args.task)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    print(text)
    if args.out:
        formats.write_text_atomic(Path(args.out), text + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medqakit",
        description="Build weakly supervised and curated QA datasets from structured abstracts.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON run config; flags override its values")
        p.add_argument("--output-dir", help="output directory (overrides config and env)")
        p.add_argument("--seed", type=int, help="random seed recorded in every manifest")
        p.add_argument("--k1", type=float, help="BM25 k1 parameter")
        p.add_argument("--b", type=float, help="BM25 b parameter")

    p_label = subparsers.add_parser("label", help="weak-label PQA sources into d1/d2")
    add_common(p_label)
    p_label.add_argument(
        "--subset",
        dest="subsets",
        action="append",
        choices=["pqa_l", "pqa_a"],
        help="label only this source (repeatable; default: all configured)",
    )
    p_label.set_defaults(func=cmd_label)

    p_curate = subparsers.add_parser("curate", help="curate COVID QA pairs (d3/d4)")
    p_curate.add_argument(
        "mode", choices=["templates-export", "templates-import", "artificial"]
    )
    add_common(p_curate)
    p_curate.add_argument("--review", help="reviewed TSV for templates-import")
    p_curate.set_defaults(func=cmd_curate)

    p_schedule = subparsers.add_parser("schedule", help="emit fine-tuning manifests")
    add_common(p_schedule)
    p_schedule.add_argument(
        "--schedule",
        dest="schedules",
        action="append",
        help="schedule id to emit (repeatable; default: config or all 17)",
    )
    p_schedule.set_defaults(func=cmd_schedule)

    p_eval = subparsers.add_parser("eval", help="score a predictions file")
    p_eval.add_argument("gold", help="gold dataset (SQuAD-style JSON or yes/no JSONL)")
    p_eval.add_argument("predictions", help="predictions JSONL")
    p_eval.add_argument("--task", choices=["extractive", "yesno"], required=True)
    p_eval.add_argument("--out", help="also write the report JSON here")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ContractViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
