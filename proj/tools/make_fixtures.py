#!/usr/bin/env python3
"""Regenerates the deterministic test fixtures under tests/fixtures.

offline/   metadata.json + texts/ for a small two-order citation graph
chunker/   50 documents with awkward whitespace, unicode and long runs
"""
import json
import pathlib
import random
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"

TARGET = {
    "id": "T1",
    "title": "Streaming Graph Routing with Sparse Expert Mixtures",
    "date": "2024-05-02",
    "references": ["F1", "F2", "F3", "F4", "F5", "F6"],
}

FIRST = [
    ("F1", "Sparse Mixture-of-Experts Layers for Conditional Computation", "2017-01-23", ["S1", "S2", "S3"]),
    ("F2", "Temporal Graph Networks for Dynamic Graphs", "2020-06-18", ["S4", "S5", "S1"]),
    ("F3", "Load Balancing Losses for Expert Routing", "2021-01-11", ["S1", "S2", "S6"]),
    ("F4", "Incremental Message Passing on Evolving Graphs", "2019-11", ["S4", "S7", "F2"]),
    ("F5", "Graph Attention Networks", "2017-10-30", ["S5", "S8"]),
    ("F6", "Benchmarking Dynamic Link Prediction", "2022", ["S4", "S7"]),
]

SECOND = [
    ("S1", "Adaptive Mixtures of Local Experts", "1991-03"),
    ("S2", "Hierarchical Gating Networks", "1994"),
    ("S3", "Outrageously Large Conditional Models", "2016-12-01"),
    ("S4", "Continuous-Time Dynamic Network Embeddings", "2018-04-23"),
    ("S5", "Neural Message Passing for Quantum Chemistry", "2017-04-04"),
    ("S6", "Switch Routing with a Single Expert", None),
    ("S7", "Streaming Graph Partitioning", "2012-08-12"),
    ("S8", "Attention Is All You Need", "2017-06-12"),
]

PARAS = {
    "T1": [
        "Streaming graphs receive a continuous sequence of edge events, and node representations must be refreshed "
        "as each event arrives. Dense message passing recomputes every layer for every touched node, which makes "
        "the per-event cost grow with the neighbourhood size.",
        "We introduce a sparse expert router for streaming graph neural networks. Each incoming edge event is "
        "dispatched to two of sixteen message experts selected by a gating network conditioned on the event time "
        "encoding and the endpoint memories. Only the selected experts compute messages.",
        "We further propose a delta memory update that applies expert messages to node memories incrementally, "
        "so that untouched nodes keep their cached state and the update cost depends on the number of events "
        "rather than on the graph size.",
        "A balance regulariser based on the coefficient of variation of expert load keeps the router from "
        "collapsing onto a few experts. We prove that the expected load imbalance under the regulariser is bounded "
        "by a constant that depends only on the number of experts.",
        "On five dynamic link prediction benchmarks the router reduces event processing time by a factor of three "
        "while matching the accuracy of dense temporal graph networks. Ablations show that the delta memory update "
        "accounts for most of the speed gain.",
    ],
    "F1": [
        "We present a sparsely gated mixture-of-experts layer that contains thousands of feed-forward experts. A "
        "trainable gating network selects a sparse combination of experts for each example using noisy top-k gating.",
        "Conditional computation increases model capacity without a proportional increase in computation, because "
        "only the selected experts run for a given input.",
        "We add an importance loss that encourages all experts to receive similar total gate values, which avoids "
        "the self-reinforcing imbalance where a few experts are always selected.",
    ],
    "F2": [
        "Temporal graph networks learn on continuous-time dynamic graphs represented as sequences of timed events. "
        "Each node keeps a memory vector that summarises its history and is updated when an event involves the node.",
        "Messages are computed from the memories of the event endpoints, the time encoding and the edge features, "
        "and a recurrent memory updater integrates them.",
        "An embedding module based on graph attention over temporal neighbours produces node embeddings for link "
        "prediction on Wikipedia, Reddit and other interaction datasets.",
    ],
    "F3": [
        "Routing tokens to experts requires an auxiliary loss to balance expert utilisation. We study losses based "
        "on the product of routing fractions and mean gate probabilities.",
        "A coefficient of variation penalty on expert load produces stable training when the number of experts is "
        "large, and capacity factors bound the number of tokens each expert can accept.",
        "We show that balanced routing improves throughput on accelerators because expert computation is spread "
        "evenly across devices.",
    ],
    "F4": [
        "Evolving graphs change through insertions and deletions of edges. Recomputing graph neural network "
        "embeddings from scratch after every change is wasteful.",
        "We propose incremental message passing that propagates only the changes of node states through the "
        "layers, caching intermediate aggregations so that untouched nodes reuse their previous values.",
        "The incremental scheme produces exactly the same embeddings as full recomputation while reducing the "
        "update cost to the size of the affected neighbourhood.",
    ],
    "F5": [
        "Graph attention networks compute node representations by attending over neighbourhood features with "
        "masked self-attention.",
        "Multi-head attention stabilises learning, and the attention coefficients assign different importances to "
        "different neighbours without costly matrix operations.",
    ],
    "S1": [
        "A system of local expert networks is trained together with a gating network that decides which expert "
        "handles each case. The experts compete for training cases and specialise on subsets of the data.",
    ],
    "S2": [
        "Hierarchical gating arranges experts in a tree, and gating networks at each level route inputs down the "
        "hierarchy. The model is trained with expectation maximisation.",
    ],
    "S3": [
        "Very large conditional models activate a small subset of parameters per example. Sparse gating keeps the "
        "computation per example nearly constant as the parameter count grows.",
    ],
    "S4": [
        "Continuous-time dynamic network embeddings respect the temporal order of edges by sampling time-respecting "
        "random walks over interaction events.",
    ],
    "S5": [
        "Message passing neural networks unify graph convolution variants through a message function, an "
        "aggregation step and an update function applied at every layer.",
    ],
    "S7": [
        "Streaming graph partitioning assigns each arriving vertex to a partition in one pass, using heuristics that "
        "balance partition sizes while keeping neighbours together.",
    ],
    "S8": [
        "The transformer architecture relies entirely on attention mechanisms, dispensing with recurrence, and "
        "scales to long sequences through parallel computation.",
    ],
}

# Documents delivered as extraction records rather than plain text.
RECORD_IDS = {"F2", "S3"}


def document_text(doc_id, title):
    body = "\n\n".join(PARAS[doc_id])
    return (
        f"{title}\n\nAbstract\n\n{body}\n\nReferences\n\n"
        "[1] A. Author. An unrelated citation string. 2001.\n[2] B. Author. Another one. 2003.\n"
    )


def write_offline():
    out = ROOT / "offline"
    texts = out / "texts"
    texts.mkdir(parents=True, exist_ok=True)
    papers = [TARGET]
    for pid, title, date, refs in FIRST:
        papers.append({"id": pid, "title": title, "date": date, "references": refs})
    for pid, title, date in SECOND:
        entry = {"id": pid, "title": title, "references": []}
        if date is not None:
            entry["date"] = date
        papers.append(entry)
    (out / "metadata.json").write_text(json.dumps({"papers": papers}, indent=2) + "\n")

    titles = {p["id"]: p["title"] for p in papers}
    for doc_id in PARAS:
        text = document_text(doc_id, titles[doc_id])
        if doc_id in RECORD_IDS:
            record = {
                "source_path": f"pdfs/{doc_id}.pdf",
                "doc_id": doc_id,
                "title": titles[doc_id],
                "raw_text": text,
                "page_count": 2,
                "extraction_warnings": [],
            }
            (texts / f"{doc_id}.json").write_text(json.dumps(record, indent=2) + "\n")
        else:
            (texts / f"{doc_id}.txt").write_text(text)
    # F6 and S6 deliberately have no text: they exercise text_missing.


WORDS = (
    "graph node edge expert router gate memory event stream temporal message attention layer sparse dense "
    "update cache neighbour embedding benchmark loss balance capacity token latency throughput model"
).split()
ODD = ["naïve", "Übergang", "中文文本", "emoji🙂", "x²", "—", "«quoted»", "tab\tsep", "a.b.c", "(paren)", "e.g.,"]


def chunker_doc(rng, k):
    pieces = []
    target_words = rng.choice([1, 5, 40, 300, 511, 512, 513, 900, 1500, 3000])
    for i in range(target_words):
        r = rng.random()
        if r < 0.08:
            pieces.append(rng.choice(ODD))
        elif r < 0.10:
            pieces.append("".join(rng.choice("abcdefghij") for _ in range(rng.randint(50, 400))))
        elif r < 0.16:
            pieces.append(rng.choice([".", ",", ";", "!", "?", "...", "--"]))
        else:
            pieces.append(rng.choice(WORDS))
        sep = rng.random()
        if sep < 0.05:
            pieces.append("\n\n")
        elif sep < 0.07:
            pieces.append("\r\n")
        elif sep < 0.09:
            pieces.append("   \t ")
        else:
            pieces.append(" ")
    text = "".join(pieces)
    if k % 7 == 0:
        text = "\n\n  " + text  # leading whitespace
    if k % 5 == 0:
        text = text + "\n\n\n"  # trailing whitespace
    return text


def write_chunker():
    out = ROOT / "chunker"
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20240502)
    for k in range(50):
        (out / f"doc_{k:02d}.txt").write_bytes(chunker_doc(rng, k).encode("utf-8"))


if __name__ == "__main__":
    write_offline()
    write_chunker()
    sys.exit(0)
