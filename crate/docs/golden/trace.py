"""Writes the golden fixture corpus and re-derives its expected outputs.

The derivation here is independent of the Rust code: topic allocation, pair
timelines, weights, pruning and component selection are re-implemented in a few
lines each, and the structural metrics come from networkx.

    python3 docs/golden/trace.py            # print the trace
    python3 docs/golden/trace.py --write    # also regenerate the fixtures
"""

import json
import math
import re
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import networkx as nx

ROOT = Path(__file__).resolve().parents[2]
FIXTURES = ROOT / "crates/core/tests/fixtures/golden"
STOPWORDS = set((ROOT / "crates/core/data/stopwords.txt").read_text().split())

HORIZON = datetime(2021, 6, 1, tzinfo=timezone.utc)
WINDOW = timedelta(days=182.625)
PRUNE = 0.30
ACTIVE = 0.15
MIN_NODES = 4


def at(base, hours):
    return base + timedelta(hours=hours)


def headings(*names):
    return "".join(f"== {n} ==\nSome text about {n.lower()}.\n\n" for n in names)


ELECTION = ["Background", "Campaign", "Results", "Reaction"]
SUMMIT = ["Agenda", "Delegations", "Outcome"]
COMPILER = ["Design", "Releases"]

# (hours from base, editor, comment, content)
ARTICLES = {
    ("politics", "Golden Election"): [
        (datetime(2019, 12, 2, tzinfo=timezone.utc), [
            (0, "Ava", "Created page", headings(*ELECTION)),
        ]),
        (datetime(2020, 1, 1, tzinfo=timezone.utc), [
            (0, "Ava", "/* Campaign */ polling", None),
            (1, "Ben", "/* Campaign */ rallies", None),
            (2, "Ava", "/* Results */ first count", None),
            (3, "Cal", "/* Results */ recount", None),
            (4, "Ben", "/* Results */ turnout", None),
            (124, "Dee", "/* Reaction */ statements", None),
            (125, "Cal", "/* Reaction */ copyedit", None),
            (126, "Dee", "/* Campaign */ spending", None),
            (250, "Eli", "/* Background */ history", None),
            (251, "Dee", "/* Background */ ref", None),
            (280, "Eli", "/* Reaction */ abroad", None),
        ]),
        (datetime(2020, 8, 1, tzinfo=timezone.utc), [
            (0, "Fay", "/* Aftermath */ new section", headings(*ELECTION, "Aftermath")),
            (1, "Ava", "/* Aftermath */ expand", None),
            (2, "Ben", "/* Aftermath */ ref", None),
            (3, "Fay", "/* Results */ certified", None),
            (4, "Ava", "/* Results */ table", None),
            (99, "Ben", "/* Reaction */ protests", None),
            (100, "Cal", "/* Reaction */ copyedit", None),
            (101, "Dee", "/* Reaction */ quotes", None),
            (102, "Cal", "/* Aftermath */ court case", None),
            (103, "Eli", "/* Reaction */ ref", None),
            (104, "Dee", "/* Aftermath */ appeal", None),
        ]),
        (datetime(2021, 2, 1, tzinfo=timezone.utc), [
            (0, "Gus", "/* Results */ map", None),
            (1, "Ava", "/* Results */ caption", None),
            (2, "Gus", "/* Campaign */ summary", None),
            (3, "Ben", "/* Campaign */ ref", None),
            (4, "Gus", "/* Background */ lead", None),
            (5, "Hal", "/* Background */ typo", None),
            (6, "Gus", "/* Reaction */ trim", None),
            (30, "Ava", "/* Reaction */ restore", None),
        ]),
    ],
    ("politics", "Golden Summit"): [
        (datetime(2020, 3, 1, 12, tzinfo=timezone.utc), [
            (0, "Ivy", "/* Agenda */ start", headings(*SUMMIT)),
            (2, "Jon", "/* Agenda */ items", None),
            (5, "Kim", "/* Delegations */ list", None),
            (6, "Ivy", "/* Delegations */ flags", None),
            (40, "Lea", "summary of result", "The outcome of the talks was a joint communique."),
            (41, "Max", "/* Outcome */ ref", None),
            (42, "Kim", "/* Outcome */ wording", None),
            (43, "Jon", "/* Trivia */ venue", None),
            (60, "Lea", "/* Agenda */ order", None),
        ]),
        (datetime(2020, 10, 1, tzinfo=timezone.utc), [
            (0, "Nia", "/* Outcome */ follow-up", None),
            (1, "Ivy", "/* Outcome */ ref", None),
            (2, "Jon", "/* Outcome */ ref", None),
            (3, "Kim", "/* Outcome */ ref", None),
            (4, "Nia", "/* Delegations */ update", None),
        ]),
        (datetime(2021, 4, 1, tzinfo=timezone.utc), [
            (0, "Max", "/* Agenda */ anniversary", None),
            (1, "Lea", "/* Agenda */ ref", None),
        ]),
    ],
    ("tech", "Golden Compiler"): [
        (datetime(2020, 6, 1, tzinfo=timezone.utc), [
            (0, "Pat", "/* Design */ start", headings(*COMPILER)),
            (1, "Quinn", "/* Design */ passes", None),
            (2, "Rex", "/* Releases */ 1.0", None),
            (3, "Pat", "/* Releases */ 1.1", None),
            (4, "Sam", "/* Design */ backend", None),
            (5, "Quinn", "/* Releases */ 1.2", None),
        ]),
        (datetime(2021, 1, 10, tzinfo=timezone.utc), [
            (0, "Pat", "/* Design */ ir", None),
            (1, "Rex", "/* Design */ ir", None),
            (2, "Quinn", "/* Design */ ir", None),
        ]),
    ],
}

ID_BASE = {"Golden Election": 1000, "Golden Summit": 2000, "Golden Compiler": 3000}


def slug(title):
    return "".join(c if c.isalnum() or c in "-." else "_" for c in title)


def records(title, bursts):
    out = []
    for base, events in bursts:
        for hours, user, comment, content in events:
            out.append({
                "rev_id": ID_BASE[title] + len(out) + 1,
                "user": user,
                "timestamp": at(base, hours).strftime("%Y-%m-%dT%H:%M:%SZ"),
                "comment": comment,
                "content": content,
            })
    return out


def marker(comment):
    m = re.match(r"/\*(.*?)\*/", comment)
    return m.group(1).strip() if m and m.group(1).strip() else None


def section_names(text):
    names = set()
    for line in text.splitlines():
        m = re.fullmatch(r"(={2,6})\s*(.*?)\s*(={2,6})", line.strip())
        if m and len(m.group(1)) == len(m.group(3)) and m.group(2):
            names.add(m.group(2))
    return names


def tokens(text):
    return {t for t in re.split(r"[^0-9a-z]+", text.lower()) if t.isalpha() and t not in STOPWORDS}


def topics(rev, sections):
    mk = marker(rev["comment"])
    if mk:
        hit = [s for s in sections if s.lower() == mk.lower()]
        if hit:
            return {hit[0]}
    if rev["content"] is None:
        return set()
    words = tokens(rev["content"])
    return {s for s in sections if tokens(s) & words}


def ts(rev):
    return datetime.strptime(rev["timestamp"], "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def ati(revs_a, revs_b, limit):
    merged = sorted([(ts(r), r["rev_id"], "a") for r in revs_a] + [(ts(r), r["rev_id"], "b") for r in revs_b])
    return sum(1 for x, y in zip(merged, merged[1:]) if x[2] != y[2] and (y[0] - x[0]) <= limit)


def analyze(title, revs, hours):
    limit = timedelta(hours=hours)
    revs = sorted(revs, key=lambda r: (ts(r), r["rev_id"]))
    onset = next(ts(a) for a, b in zip(revs, revs[1:]) if a["user"] != b["user"] and ts(b) - ts(a) <= limit)
    snapshots = []
    start, index = onset, 0
    while start < HORIZON:
        end = min(start + WINDOW, HORIZON)
        inside = [r for r in revs if start <= ts(r) < end]
        index_now, start_now = index, start
        start, index = start + WINDOW, index + 1
        if not inside:
            continue
        with_heads = [r for r in revs if ts(r) < end and r["content"] and section_names(r["content"])]
        if with_heads:
            sections = section_names(with_heads[-1]["content"])
        else:
            sections = {marker(r["comment"]) for r in revs if ts(r) < end and marker(r["comment"])}
        by_editor = {}
        for r in inside:
            by_editor.setdefault(r["user"], []).append(r)
        tsets = {u: set().union(*(topics(r, sections) for r in rs)) for u, rs in by_editor.items()}
        edges = []
        names = sorted(by_editor)
        for a_i, a in enumerate(names):
            for b in names[a_i + 1:]:
                wt = ati(by_editor[a], by_editor[b], limit)
                wc = len(tsets[a] & tsets[b]) / len(sections)
                if wt * wc > 0:
                    edges.append((wt * wc, a, b, wt, wc))
        edges.sort()
        cut = math.floor(PRUNE * len(edges) + 1e-9)
        kept = edges[cut:]
        if not kept:
            continue
        g = nx.Graph()
        g.add_edges_from((a, b) for _, a, b, _, _ in kept)
        comps = sorted(
            nx.connected_components(g),
            key=lambda c: (-len(c), -g.subgraph(c).number_of_edges(), min(c)),
        )
        gcc = g.subgraph(comps[0]).copy()
        days = (start_now - onset).total_seconds() / 86400
        snapshots.append({
            "title": title,
            "window": index_now,
            "sections": sorted(sections),
            "topics": {u: sorted(t) for u, t in sorted(tsets.items())},
            "edges": edges,
            "removed": edges[:cut],
            "gcc": gcc,
            "retention": gcc.number_of_edges() / len(kept),
            "age": math.floor(days / 30.4375),
        })
    biggest = max(s["gcc"].number_of_nodes() for s in snapshots)
    return onset, [s for s in snapshots if s["gcc"].number_of_nodes() > ACTIVE * biggest]


def centralization(g):
    n = g.number_of_nodes()
    bc = nx.betweenness_centrality(g, normalized=True)
    top = max(bc.values())
    return sum(top - b for b in bc.values()) / (n - 1)


def main():
    write = "--write" in sys.argv
    if write:
        FIXTURES.mkdir(parents=True, exist_ok=True)
    total = 0
    for hours in (48, 24):
        print(f"## threshold {hours} h\n")
        print("article,window,n_nodes,n_edges,avg_degree,avg_clustering,avg_shortest_path,"
              "betweenness_centralization,age_months,edge_retention")
        for (category, title), bursts in ARTICLES.items():
            revs = records(title, bursts)
            if hours == 48:
                total += len(revs)
                if write:
                    path = FIXTURES / f"{slug(title)}.jsonl"
                    path.write_text("".join(json.dumps(r) + "\n" for r in revs))
            onset, snaps = analyze(title, revs, hours)
            for s in snaps:
                g = s["gcc"]
                n = g.number_of_nodes()
                if n < MIN_NODES:
                    print(f"# {title} w{s['window']}: {n} nodes, below min_nodes")
                    continue
                print(",".join(str(v) for v in [
                    title, s["window"], n, g.number_of_edges(),
                    f"{2 * g.number_of_edges() / n:.6g}",
                    f"{nx.average_clustering(g):.6g}",
                    f"{nx.average_shortest_path_length(g):.6g}",
                    f"{centralization(g):.6g}",
                    s["age"], f"{s['retention']:.6g}",
                ]))
                if hours == 48 and "-v" in sys.argv:
                    print(f"#   onset {onset}, sections {s['sections']}")
                    print(f"#   topics {s['topics']}")
                    for w, a, b, wt, wc in s["edges"]:
                        print(f"#   {a}-{b}: W_T={wt} W_C={wc:.6g} W={w:.6g}")
                    print(f"#   pruned {[(a, b) for _, a, b, _, _ in s['removed']]}")
        print()
    print(f"{total} revisions")


if __name__ == "__main__":
    main()
