import json

import numpy as np

from op_embed_sidecar.encoders import HashEncoder
from op_embed_sidecar.export import export_store, read_texts


def test_plain_lines_round_trip(tmp_path):
    texts = [f"line number {i} here" for i in range(10)]
    src = tmp_path / "texts.txt"
    src.write_text("\n".join(texts) + "\n", encoding="utf-8")
    out = tmp_path / "store.jsonl"
    count = export_store(src, out, HashEncoder(dim=32))
    assert count == 10
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert [r["text"] for r in rows] == texts
    for row in rows:
        assert abs(np.linalg.norm(row["vector"]) - 1.0) < 1e-5


def test_duplicate_lines_deduplicated(tmp_path):
    src = tmp_path / "texts.txt"
    src.write_text("same line\nother line\nsame line\n", encoding="utf-8")
    out = tmp_path / "store.jsonl"
    assert export_store(src, out, HashEncoder(dim=32)) == 2


def test_dataset_jsonl_exports_every_explanation(tmp_path):
    rows = [
        {"id": "a", "prompt": "p1", "perspectives": [
            {"name": "N1", "explanation": "first explanation"},
            {"name": "N2", "explanation": "second explanation"},
        ]},
        {"id": "b", "prompt": "p2", "perspectives": [
            {"name": "N3", "explanation": "third explanation"},
            {"name": "N4", "explanation": "fourth explanation"},
            {"name": "N5", "explanation": "fifth explanation"},
        ]},
    ]
    src = tmp_path / "data.jsonl"
    src.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    out = tmp_path / "store.jsonl"
    count = export_store(src, out, HashEncoder(dim=32))
    assert count == sum(len(r["perspectives"]) for r in rows)
    assert read_texts(src) == [
        "first explanation", "second explanation", "third explanation",
        "fourth explanation", "fifth explanation",
    ]


def test_store_loadable_by_engine(tmp_path):
    from opreward.embeddings import LocalVectorStore, embed

    src = tmp_path / "texts.txt"
    src.write_text("alpha beta gamma\ndelta epsilon zeta\n", encoding="utf-8")
    out = tmp_path / "store.jsonl"
    export_store(src, out, HashEncoder(dim=32))
    store = LocalVectorStore.from_jsonl(out)
    vectors = embed(["alpha beta gamma"], store)
    assert vectors.shape == (1, 32)
