"""Bundled example data: Zachary's karate club and its 2-level fixture hierarchy."""
from __future__ import annotations

from importlib import resources

from .graph import parse_edge_lines
from .hierarchy import HierarchyTree, read_assignment


def _data_path(name):
    return resources.files("mslp") / "data" / name


def karate():
    """The 34-node, 78-edge karate club graph with labels "1".."34"."""
    path = _data_path("karate.txt")
    return parse_edge_lines(path.read_text().splitlines(), source=str(path))


def karate_tree(g=None):
    """Fixture hierarchy: 2 clusters at level 1, 4 at level 2."""
    g = karate() if g is None else g
    levels = [read_assignment(_data_path(f"karate_level{p}.tsv"), g) for p in (1, 2)]
    return HierarchyTree.from_assignments(levels, 2)
