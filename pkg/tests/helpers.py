from __future__ import annotations

from gameconn.game import GameShape, table_from_edges


def edge(text: str):
    """``'211->111'`` with 1-based digits as coordinates."""
    a, b = text.split("->")
    return tuple(int(c) - 1 for c in a), tuple(int(c) - 1 for c in b)


def cube_table(edges: str):
    return table_from_edges(GameShape.uniform(3, 2), [edge(e.strip()) for e in edges.split(",")])


ACYCLIC_NOT_SUPER = (
    "211->111, 121->221, 111->121, 211->221, 212->112, 122->222, "
    "122->112, 222->212, 211->212, 111->112, 121->122, 222->221"
)
SUPER_NOT_ACYCLIC = (
    "211->111, 121->221, 111->121, 211->221, 212->112, 122->222, "
    "122->112, 212->211, 111->112, 121->122, 222->221, 222->212"
)


def label(shape, v):
    from gameconn.game import decode_profile

    return "".join(str(c + 1) for c in decode_profile(shape, v))


# super-connected, yet 113 is reachable only from the better-response source 111
SUPER_NOT_GLOBALLY_SUPER = {
    "format": "gameconn-v1", "n": 3, "k": [2, 2, 3],
    "lines": [
        {"player": 1, "context": [1, 1], "ranking": [2, 1]},
        {"player": 1, "context": [1, 2], "ranking": [1, 2]},
        {"player": 1, "context": [1, 3], "ranking": [2, 1]},
        {"player": 1, "context": [2, 1], "ranking": [1, 2]},
        {"player": 1, "context": [2, 2], "ranking": [2, 1]},
        {"player": 1, "context": [2, 3], "ranking": [1, 2]},
        {"player": 2, "context": [1, 1], "ranking": [2, 1]},
        {"player": 2, "context": [1, 2], "ranking": [1, 2]},
        {"player": 2, "context": [1, 3], "ranking": [2, 1]},
        {"player": 2, "context": [2, 1], "ranking": [1, 2]},
        {"player": 2, "context": [2, 2], "ranking": [2, 1]},
        {"player": 2, "context": [2, 3], "ranking": [2, 1]},
        {"player": 3, "context": [1, 1], "ranking": [2, 3, 1]},
        {"player": 3, "context": [1, 2], "ranking": [2, 3, 1]},
        {"player": 3, "context": [2, 1], "ranking": [3, 2, 1]},
        {"player": 3, "context": [2, 2], "ranking": [1, 3, 2]},
    ],
}
