"""Built-in datasets: the publication example database and a bibliographic schema.

The publication example holds five papers, five authors and eight
authorships.  Keyword-free filler rows pad the two text relations to the
sizes and average lengths used by the worked example (150 papers with
avdl 57.8, 170 authors with avdl 14.6).
"""

from __future__ import annotations

from .store import SchemaGraph, Store, parse_schema

__all__ = [
    "PUBLICATION_SCHEMA",
    "BIBLIOGRAPHY_SCHEMA",
    "PAPERS",
    "AUTHORS",
    "WRITES",
    "publication_schema",
    "publication_store",
    "filler_text",
]

PUBLICATION_SCHEMA = """\
relation Papers key=pid text=title plain=
relation Authors key=aid text=name plain=
relation Writes key=wid text= plain=aid,pid
fk Writes.aid -> Authors
fk Writes.pid -> Papers
"""

# Seven relations; PaperCite references Papers twice.
BIBLIOGRAPHY_SCHEMA = """\
relation Papers key=paperID text=title plain=procID
relation Authors key=authorID text=name plain=
relation Write key=writeID text= plain=authorID,paperID
relation PaperCite key=citeID text= plain=paperID,citedPaperID
relation Proceedings key=procID text=title plain=
relation ProcEditors key=editorID text=name plain=
relation ProcEditor key=peID text= plain=procID,editorID
fk Papers.procID -> Proceedings
fk Write.authorID -> Authors
fk Write.paperID -> Papers
fk PaperCite.paperID -> Papers
fk PaperCite.citedPaperID -> Papers
fk ProcEditor.procID -> Proceedings
fk ProcEditor.editorID -> ProcEditors
"""

PAPERS = {
    "p1": "Leveraging Identity-Based Cryptography for Node ID Assignment in Structured P2P Systems.",
    "p2": "P2P or Not P2P?: In P2P 2003",
    "p3": "A System for Predicting Subcellular Localization.",
    "p4": "Logical Queries over Views: Decidability.",
    "p5": "A conservative strategy to protect P2P file sharing systems from pollution attacks.",
}

AUTHORS = {
    "a1": "James Chen",
    "a2": "Saikat Guha",
    "a3": "James Bassingthwaighte",
    "a4": "Sabu T.",
    "a5": "James S. W. Walkerdines",
}

# wid -> (aid, pid)
WRITES = {
    "w1": ("a1", "p2"),
    "w2": ("a2", "p1"),
    "w3": ("a3", "p3"),
    "w4": ("a1", "p4"),
    "w5": ("a5", "p5"),
    "w6": ("a3", "p4"),
    "w7": ("a2", "p2"),
    "w8": ("a2", "p5"),
}

PAPER_COUNT, PAPER_DL_SUM = 150, 8670  # avdl 57.8
AUTHOR_COUNT, AUTHOR_DL_SUM = 170, 2482  # avdl 14.6

_FILLER_WORDS = "lorem ipsum dolor sit amet consectetur adipiscing elit sed do eiusmod tempor".split()


def filler_text(length: int, seed: int = 0) -> str:
    """Deterministic keyword-free text of exactly ``length`` characters."""
    words = []
    i = seed
    while sum(len(w) + 1 for w in words) < length + 1:
        words.append(_FILLER_WORDS[i % len(_FILLER_WORDS)])
        i += 1
    text = " ".join(words)[:length]
    if text.endswith(" "):
        text = text[:-1] + "x"
    return text


def _lengths(count: int, total: int) -> list[int]:
    base, extra = divmod(total, count)
    return [base + (1 if i < extra else 0) for i in range(count)]


def publication_schema() -> SchemaGraph:
    return parse_schema(PUBLICATION_SCHEMA)


def publication_store(fillers: bool = True) -> Store:
    """The example database; ``fillers=False`` keeps only the listed rows."""
    store = Store(publication_schema())
    for pid, title in PAPERS.items():
        store.insert("Papers", {"pid": pid, "title": title})
    for aid, name in AUTHORS.items():
        store.insert("Authors", {"aid": aid, "name": name})
    if fillers:
        rest = PAPER_DL_SUM - sum(len(t) for t in PAPERS.values())
        for i, n in enumerate(_lengths(PAPER_COUNT - len(PAPERS), rest), len(PAPERS) + 1):
            store.insert("Papers", {"pid": f"p{i}", "title": filler_text(n, i)})
        rest = AUTHOR_DL_SUM - sum(len(t) for t in AUTHORS.values())
        for i, n in enumerate(_lengths(AUTHOR_COUNT - len(AUTHORS), rest), len(AUTHORS) + 1):
            store.insert("Authors", {"aid": f"a{i}", "name": filler_text(n, i)})
    for wid, (aid, pid) in WRITES.items():
        store.insert("Writes", {"wid": wid, "aid": aid, "pid": pid})
    return store
