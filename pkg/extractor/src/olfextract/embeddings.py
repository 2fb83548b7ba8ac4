"""Per-layer embedding extraction from pretrained transformer checkpoints.

Feeds structure strings through a HuggingFace model with hidden-state
output enabled and writes one (CSV, JSON manifest) pair per requested
layer in the canonical olfalign embedding schema. Layer index i is the
output of transformer block i (the raw token-embedding layer is not
exposed); "final" selects the last block. Pooling is the masked mean over
token positions by default, or the first token.

Inference runs in eval mode under no_grad, so extraction is deterministic
for fixed weights.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .smiles import SmilesError, parse_smiles

log = logging.getLogger(__name__)


@dataclass
class ExtractionJob:
    model: str                         # checkpoint path or hub id
    structures: list                   # (molecule_id, structure string) pairs
    layers: object = "final"           # "final" or list of block indices
    pooling: str = "mean"              # "mean" or "first_token"
    out_dir: str = "."
    model_name: str | None = None      # manifest name; defaults to `model`
    batch_size: int = 16
    device: str = "cpu"
    trust_remote_code: bool = False
    validate_structures: bool = True
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pooling not in ("mean", "first_token"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        ids = [m for m, _ in self.structures]
        if len(set(ids)) != len(ids):
            raise ValueError("molecule ids must be unique")


class JobError(RuntimeError):
    pass


def _load_model(job: ExtractionJob):
    import torch
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(
            job.model, trust_remote_code=job.trust_remote_code
        )
        model = AutoModel.from_pretrained(
            job.model, trust_remote_code=job.trust_remote_code
        )
    except Exception as e:
        raise JobError(f"cannot load model {job.model!r}: {e}") from e
    model.eval()
    model.to(job.device)
    return torch.no_grad, tokenizer, model


def _pool(hidden, mask, pooling: str):
    if pooling == "first_token":
        return hidden[:, 0, :]
    m = mask.unsqueeze(-1).to(hidden.dtype)
    return (hidden * m).sum(dim=1) / m.sum(dim=1).clamp(min=1.0)


def extract_embeddings(job: ExtractionJob) -> list[tuple[Path, Path]]:
    """Run the job; returns the (csv, manifest) path pair per layer."""
    no_grad, tokenizer, model = _load_model(job)

    kept = []
    for mid, smi in job.structures:
        if job.validate_structures:
            try:
                parse_smiles(smi)
            except SmilesError as e:
                log.warning("extract: skipping structure %s: %s", mid, e)
                continue
        kept.append((mid, smi))
    if not kept:
        raise JobError("no valid structures to extract")

    rows_per_layer: dict[int, list] = {}
    n_blocks = None
    with no_grad():
        for start in range(0, len(kept), job.batch_size):
            batch = kept[start:start + job.batch_size]
            enc = tokenizer([s for _, s in batch], padding=True, return_tensors="pt")
            enc = {k: v.to(job.device) for k, v in enc.items()}
            out = model(**enc, output_hidden_states=True)
            hidden_states = out.hidden_states  # embeddings + one per block
            if n_blocks is None:
                n_blocks = len(hidden_states) - 1
                layer_ids = _resolve_layers(job.layers, n_blocks)
                for layer in layer_ids:
                    rows_per_layer[layer] = []
            mask = enc.get("attention_mask")
            if mask is None:
                import torch

                mask = torch.ones(hidden_states[0].shape[:2], dtype=torch.long)
            for layer in rows_per_layer:
                pooled = _pool(hidden_states[layer + 1], mask, job.pooling)
                rows_per_layer[layer].extend(
                    pooled.double().cpu().numpy()
                )

    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_name = job.model_name or str(job.model)
    produced = []
    for layer, rows in sorted(rows_per_layer.items()):
        dim = len(rows[0])
        is_final = layer == n_blocks - 1 and job.layers == "final"
        tag = "final" if is_final else f"layer{layer:02d}"
        csv_path = out_dir / f"embeddings_{tag}.csv"
        manifest_path = out_dir / f"embeddings_{tag}.manifest.json"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id"] + [f"f{j}" for j in range(dim)])
            for (mid, _), row in zip(kept, rows):
                w.writerow([mid] + [repr(float(v)) for v in row])
        manifest = {
            "model_name": model_name,
            "layer": "final" if is_final else layer,
            "dim": dim,
            "notes": {"pooling": job.pooling, "n_blocks": n_blocks, **job.notes},
        }
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        produced.append((csv_path, manifest_path))
        log.info("extract: wrote %s (%d rows, dim %d)", csv_path, len(rows), dim)
    return produced


def _resolve_layers(layers, n_blocks: int) -> list[int]:
    if layers == "final":
        return [n_blocks - 1]
    out = []
    for layer in layers:
        layer = int(layer)
        if not 0 <= layer < n_blocks:
            raise JobError(f"layer {layer} out of range for a {n_blocks}-block model")
        out.append(layer)
    if len(set(out)) != len(out):
        raise JobError("duplicate layers requested")
    return sorted(out)
