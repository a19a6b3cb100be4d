"""Batch export of the vector-store JSONL consumed by the reward engine."""

from __future__ import annotations

import json

import numpy as np


def read_texts(path) -> list[str]:
    """Unique texts from either a plain text file (one per line) or a dataset
    JSONL (one explanation per perspective), in first-seen order."""
    texts: list[str] = []
    seen: set[str] = set()

    def add(text: str):
        if text and text not in seen:
            seen.add(text)
            texts.append(text)

    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            row = None
            try:
                row = json.loads(line)
            except json.JSONDecodeError:
                pass
            if isinstance(row, dict) and "perspectives" in row:
                for perspective in row["perspectives"]:
                    add(perspective["explanation"])
            else:
                add(line)
    return texts


def export_store(texts_file, out_file, encoder, normalize: bool = True,
                 batch_size: int = 64) -> int:
    """Embed every unique input text and write store rows
    ``{"text": ..., "vector": [...]}``; returns the row count."""
    texts = read_texts(texts_file)
    with open(out_file, "w", encoding="utf-8") as fh:
        for start in range(0, len(texts), batch_size):
            batch = texts[start:start + batch_size]
            vectors = np.asarray(encoder.encode(batch), dtype=np.float64)
            if normalize:
                vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
            for text, vector in zip(batch, vectors):
                fh.write(json.dumps({"text": text, "vector": vector.tolist()}) + "\n")
    return len(texts)
