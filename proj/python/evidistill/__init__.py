"""Python access to the evidistill core: labels, prompts, metrics, splits and the CLI."""

import json

from . import _evidistill
from ._evidistill import (
    Error,
    append_label_suffix,
    canonicalize_label,
    compute_metrics,
    extract_fine_grained,
    extract_label,
    fine_grained_block,
    normalize_fine_grained,
    run_cli,
    stats_table_from_counts,
    terminal_sentence,
)

LABELS = ("non-rumor", "rumor", "unverified")


def _dump(instance):
    return instance if isinstance(instance, str) else json.dumps(instance, ensure_ascii=False)


def render_labeling_prompt(instance, gold):
    return _evidistill.render_labeling_prompt(_dump(instance), gold)


def render_inference_prompt(instance):
    return _evidistill.render_inference_prompt(_dump(instance))


def prompt_fingerprint(instance, gold=None):
    return _evidistill.prompt_fingerprint(_dump(instance), gold)


def select_evidence(instance, max_textual, max_visual, max_item_chars=500):
    return json.loads(_evidistill.select_evidence(_dump(instance), max_textual, max_visual, max_item_chars))


def split_dataset(records, labels, test_fraction=0.1, seed=13):
    """Stratified split of instruction records (dicts); returns (train, test)."""
    train, test = _evidistill.split_dataset([_dump(r) for r in records], list(labels), test_fraction, seed)
    return [json.loads(r) for r in train], [json.loads(r) for r in test]


__all__ = [
    "Error",
    "LABELS",
    "append_label_suffix",
    "canonicalize_label",
    "compute_metrics",
    "extract_fine_grained",
    "extract_label",
    "fine_grained_block",
    "normalize_fine_grained",
    "prompt_fingerprint",
    "render_inference_prompt",
    "render_labeling_prompt",
    "run_cli",
    "select_evidence",
    "split_dataset",
    "stats_table_from_counts",
    "terminal_sentence",
]
