"""Maximum bipartite matching (Hopcroft-Karp) with forced edges."""
from __future__ import annotations

from collections import deque

from .pattern import SparsePattern

FREE = -1


def hopcroft_karp(n_rows: int, n_cols: int, adj, row_match=None, col_match=None):
    """Augment a partial matching to maximum cardinality.

    ``adj[r]`` lists the columns adjacent to row r.  Returns (row_match,
    col_match) arrays with FREE for unmatched vertices.  Vertices matched on
    entry stay matched.
    """
    row_match = list(row_match) if row_match is not None else [FREE] * n_rows
    col_match = list(col_match) if col_match is not None else [FREE] * n_cols
    INF = n_rows + n_cols + 1

    while True:
        # BFS layers from free rows
        dist = [INF] * n_rows
        queue = deque()
        for r in range(n_rows):
            if row_match[r] == FREE:
                dist[r] = 0
                queue.append(r)
        found = False
        while queue:
            r = queue.popleft()
            for c in adj[r]:
                r2 = col_match[c]
                if r2 == FREE:
                    found = True
                elif dist[r2] == INF:
                    dist[r2] = dist[r] + 1
                    queue.append(r2)
        if not found:
            return row_match, col_match

        # iterative DFS along layers
        it = [0] * n_rows
        for root in range(n_rows):
            if row_match[root] != FREE:
                continue
            stack = [root]
            while stack:
                r = stack[-1]
                advanced = False
                while it[r] < len(adj[r]):
                    c = adj[r][it[r]]
                    it[r] += 1
                    r2 = col_match[c]
                    if r2 == FREE:
                        # flip the path recorded on the stack
                        for rr in reversed(stack):
                            prev = row_match[rr]
                            row_match[rr] = c
                            col_match[c] = rr
                            c = prev
                        stack = []
                        advanced = True
                        break
                    if dist[r2] == dist[r] + 1:
                        stack.append(r2)
                        advanced = True
                        break
                if not advanced:
                    dist[r] = INF
                    stack.pop()


def maximum_matching(pat: SparsePattern) -> list[tuple[int, int]]:
    """Maximum matching containing every edge of a -1 time-derivative column.

    Each such column has a single nonzero, so fixing its edge and matching
    the remaining graph still yields maximum cardinality.
    """
    adj = pat.adjacency()
    row_match = [FREE] * pat.rows
    col_match = [FREE] * pat.cols
    col_count = [0] * pat.cols
    for r, c in pat.nonzero():
        col_count[c] += 1
    for (r, c), tag in sorted(pat.tags.items()):
        if tag == "-1" and col_count[c] == 1 and row_match[r] == FREE:
            row_match[r], col_match[c] = c, r
    forced_rows = {r for r in range(pat.rows) if row_match[r] != FREE}
    free_adj = [[] if r in forced_rows else [c for c in adj[r] if col_match[c] == FREE]
                for r in range(pat.rows)]
    row_match, col_match = hopcroft_karp(pat.rows, pat.cols, free_adj, row_match, col_match)
    return [(r, c) for r, c in enumerate(row_match) if c != FREE]


def structural_rank(pat: SparsePattern) -> int:
    row_match, _ = hopcroft_karp(pat.rows, pat.cols, pat.adjacency())
    return sum(c != FREE for c in row_match)
