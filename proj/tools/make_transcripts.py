#!/usr/bin/env python3
"""Writes the scripted model transcripts used by the offline end-to-end tests.

generate.jsonl is self-contained. The validation and evaluation transcripts
quote the golden report, so run this again after regenerating
tests/fixtures/golden/report.md.
"""
import json
import pathlib

FIX = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"
OUT = FIX / "transcripts"

REF = {
    "F1": "REF_001_Sparse Mixture-of-Experts Layers for Conditional Computation.pdf",
    "F2": "REF_002_Temporal Graph Networks for Dynamic Graphs.pdf",
    "F3": "REF_003_Load Balancing Losses for Expert Routing.pdf",
    "F4": "REF_004_Incremental Message Passing on Evolving Graphs.pdf",
}


def m(doc):
    return "##" + REF[doc] + "$$"


def entry(stage, response):
    return {"stage": stage, "request_hash": "", "system": "", "prompt": "", "response": response}


def write(name, entries):
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / name, "w") as f:
        for e in entries:
            f.write(json.dumps(e, ensure_ascii=False) + "\n")


SUMMARY = (
    "The paper addresses the cost of refreshing node representations in streaming graphs, where every edge event "
    "triggers dense message passing over the touched neighbourhood. It introduces a sparse expert router that "
    "dispatches each event to two of sixteen message experts chosen by a time-conditioned gating network, a delta "
    "memory update that refreshes only the memories touched by events, and a balance regulariser on expert load "
    "with a bound on expected imbalance. On five dynamic link prediction benchmarks the method cuts event "
    "processing time by a factor of three at accuracy comparable to dense temporal graph networks."
)

EXTRACTION = """1. (Classification: Methodological/Algorithmic) A sparse expert router for streaming graph neural networks that dispatches each incoming edge event to two of sixteen message experts selected by a gating network conditioned on the event time encoding and the endpoint memories, so that only the selected experts compute messages.
2. (Classification: Methodological/Algorithmic) A delta memory update that applies expert messages to node memories incrementally, keeping cached state for untouched nodes so that the update cost depends on the number of events rather than on the graph size.
3. (Classification: Theoretical) A balance regulariser based on the coefficient of variation of expert load, with a proof that the expected load imbalance is bounded by a constant depending only on the number of experts."""

QUERIES = {
    1: [
        "sparse mixture of experts gating for conditional computation",
        "top-k expert selection with noisy gating networks",
        "event-level routing in temporal graph neural networks",
        "expert dispatch of edge messages in dynamic graphs",
        "gating network conditioned on time encoding and node memory",
        "conditional computation for graph message passing",
    ],
    2: [
        "incremental node memory updates on event streams",
        "caching node states in evolving graph neural networks",
        "delta propagation of embedding changes after edge insertions",
        "memory modules in temporal graph networks",
        "update cost proportional to the affected neighbourhood",
        "avoiding full recomputation on streaming graphs",
    ],
    3: [
        "load balancing loss for expert routing",
        "coefficient of variation penalty on expert load",
        "importance loss for sparse gating networks",
        "bound on expected expert load imbalance",
        "capacity factor for expert utilisation",
        "router collapse onto a few experts",
    ],
}

ANALYSIS = {
    1: f"""a) Claimed novelty: The paper routes every incoming edge event of a streaming graph to two of sixteen message experts, chosen by a gating network conditioned on the event time encoding and the endpoint memories, so that only the selected experts compute messages.
b) Similarities: Sparse top-k gating over a large pool of experts is established in {m("F1")}, which also runs only the selected experts for a given input. Computing messages from endpoint memories and time encodings when an event arrives follows {m("F2")}.
c) Unique Differences: Neither retrieved work routes individual graph events to experts. The gate here is conditioned on time encodings and node memories rather than on a static input vector, which turns the single message function of {m("F2")} into a sparse set of specialised functions.
d) Details of Unique Differences: The router replaces a dense message function with a per-event sparse dispatch, and the claimed benefit is a threefold reduction in event processing time at matched link prediction accuracy, supported by comparisons on five dynamic link prediction benchmarks.""",
    2: f"""a) Claimed novelty: The paper applies expert messages to node memories incrementally, so that untouched nodes keep their cached state and the update cost scales with the number of events instead of the graph size.
b) Similarities: Propagating only the changes of node states and caching intermediate aggregations for untouched nodes is the core idea of {m("F4")}. Per-node memories refreshed by a recurrent updater when an event involves the node appear in {m("F2")}.
c) Unique Differences: The delta update acts on recurrent node memories in a continuous-time event stream, whereas {m("F4")} targets layer-wise embeddings after edge insertions and deletions on evolving graphs.
d) Details of Unique Differences: The update is realised by writing expert messages only into the memories of event endpoints, and the ablations attribute most of the reported speed gain to this mechanism.""",
    3: f"""a) Claimed novelty: The paper regularises the router with a penalty on the coefficient of variation of expert load and proves that the expected load imbalance stays below a constant that depends only on the number of experts.
b) Similarities: A coefficient of variation penalty on expert load is studied in {m("F3")} to stabilise routing with many experts. An importance loss that pushes experts towards similar total gate values is used in {m("F1")}.
c) Unique Differences: Based on the retrieved related texts, no unique differences were identified for this novelty point.
d) Details of Unique Differences: The bound is stated for the expected imbalance under the regulariser.""",
}

NOVELTY_SUMMARY = """## 3. Novelty Summary

The paper is integration-driven: it carries sparse expert routing into event-based temporal graph learning and pairs it with incremental memory updates. The event-level expert router is a genuine contribution, since conditioning a sparse gate on time encodings and node memories has no counterpart in the compared works and is backed by a threefold speed-up on link prediction benchmarks. The delta memory update is a useful adaptation of incremental message passing to recurrent memories rather than a new principle. The balance regulariser is Standard Practice, and stating the imbalance bound as a standalone theorem with its assumptions would make the theoretical claim easier to assess.

Final One-line Summary: 3 – Good / Significant: a well-motivated combination of sparse expert routing and temporal graph memories with one clearly new routing mechanism and two incremental components."""


def generate_transcript():
    es = [entry("summary", SUMMARY), entry("extraction", EXTRACTION)]
    for k in (1, 2, 3):
        es.append(entry(f"queries.p{k}", "\n".join(f"{i + 1}. {q}" for i, q in enumerate(QUERIES[k]))))
        es.append(entry(f"analysis.p{k}", ANALYSIS[k]))
    es.append(entry("novelty_summary", NOVELTY_SUMMARY))
    write("generate.jsonl", es)


# --- validation ------------------------------------------------------------------

FLAGGED = ("Per-node memories refreshed by a recurrent updater when an event involves the node appear in [2].")
CORRECTED = ("Per-node memories refreshed by a recurrent updater when an event involves the node, together with a "
             "graph attention embedding module over temporal neighbours, appear in [2].")


def claims(report):
    picked = [
        ("Sparse top-k gating over a large pool of experts is established in [1], which also runs only the selected "
         "experts for a given input.", "The cited work runs only the top-k selected experts per input.", "[1] " + REF["F1"]),
        ("An importance loss that pushes experts towards similar total gate values is used in [1].",
         "The cited work uses an importance loss that balances total gate values.", "[1] " + REF["F1"]),
        (FLAGGED, "The cited work keeps per-node memories updated by a recurrent updater and nothing else.", "[2] " + REF["F2"]),
        ("Propagating only the changes of node states and caching intermediate aggregations for untouched nodes is "
         "the core idea of [3].", "The cited work propagates state changes and caches aggregations.", "[3] " + REF["F4"]),
        ("A coefficient of variation penalty on expert load is studied in [4] to stabilise routing with many experts.",
         "The cited work studies a coefficient of variation penalty on expert load.", "[4] " + REF["F3"]),
    ]
    for statement, _, _ in picked:
        assert statement in report, statement
    return [{"original_statement": s, "claim_explanation": e, "reference_name": r} for s, e, r in picked]


def verdicts(n, incorrect=None):
    out = []
    for i in range(1, n + 1):
        if incorrect == i:
            out.append({
                "idx": i,
                "result": "incorrect",
                "error_reason": "The cited work also describes a graph attention embedding module; the claim omits it "
                                "and overstates that memories are its only component.",
                "correction": "State that the cited work combines per-node memories with a graph attention "
                              "embedding module over temporal neighbours.",
            })
        else:
            out.append({"idx": i, "result": "correct"})
    return json.dumps(out)


def validation_transcripts(report):
    cl = json.dumps(claims(report), ensure_ascii=False)
    # Two claims on the first reference: dedup keeps both.
    common = [entry("claims", cl), entry("dedup.F1", "[1, 2]")]
    ok = common + [
        entry("verify.F1", verdicts(2)),
        entry("verify.F2", verdicts(1)),
        entry("verify.F4", verdicts(1)),
        entry("verify.F3", verdicts(1)),
        entry("polish", report),
    ]
    write("validate_correct.jsonl", ok)

    assert report.count(FLAGGED) == 1
    corrected = report.replace(FLAGGED, CORRECTED)
    bad = common + [
        entry("verify.F1", verdicts(2)),
        entry("verify.F2", verdicts(1, incorrect=1)),
        entry("verify.F4", verdicts(1)),
        entry("verify.F3", verdicts(1)),
        entry("correct", corrected),
        entry("polish", corrected),
    ]
    write("validate_incorrect.jsonl", bad)


# --- evaluation ------------------------------------------------------------------

COUNTS = {"Fluency": 11, "Effectiveness": 13, "Completeness": 18, "Faithfulness": 14, "Depth": 13}
EVAL_QUERIES = [
    "sparse expert routing for streaming graph events",
    "temporal graph networks with node memory modules",
    "incremental message passing on evolving graphs",
    "load balancing losses for mixture of experts",
    "dynamic link prediction benchmarks and speed",
    "gating networks conditioned on time encodings",
]


def evaluation_transcript():
    es = []
    for dim, n in COUNTS.items():
        if dim in ("Completeness", "Faithfulness", "Depth"):
            es.append(entry(f"eval.queries.{dim}", "\n".join(f"{i + 1}. {q}" for i, q in enumerate(EVAL_QUERIES))))
        es.append(entry(f"eval.answers.{dim}", "\n".join(f"Q{i}: yes" for i in range(1, n + 1))))
    write("evaluate_all_yes.jsonl", es)


if __name__ == "__main__":
    generate_transcript()
    evaluation_transcript()
    golden = FIX / "golden" / "report.md"
    if golden.exists():
        validation_transcripts(golden.read_text())
