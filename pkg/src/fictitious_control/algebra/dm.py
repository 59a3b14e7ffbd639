"""Coarse Dulmage-Mendelsohn decomposition from a maximum matching.

Rows split into HR (reachable by alternating paths from free columns), VR
(reachable from free rows) and SR (the rest); columns likewise.  Ordering rows
as HR, SR, VR and columns as HC, SC, VC gives a block upper-triangular form
whose last block row/column is the overdetermined part.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidMatching
from .pattern import SparsePattern


@dataclass(frozen=True)
class DMDecomposition:
    matching: tuple[tuple[int, int], ...]
    VR: frozenset
    HR: frozenset
    SR: frozenset
    VC: frozenset
    HC: frozenset
    SC: frozenset
    row_perm: tuple[int, ...]
    col_perm: tuple[int, ...]
    row_bounds: tuple[int, ...]
    col_bounds: tuple[int, ...]

    @property
    def block_boundaries(self):
        return {"rows": list(self.row_bounds), "cols": list(self.col_bounds)}

    def permuted(self, pat: SparsePattern) -> np.ndarray:
        M = pat.to_dense()
        for (r, c) in pat.nonzero():
            if M[r, c] == 0.0:
                M[r, c] = np.nan  # structural nonzero with zero value
        return M[np.ix_(self.row_perm, self.col_perm)]

    def to_dict(self) -> dict:
        return {
            "matching": [list(e) for e in self.matching],
            "VR": sorted(self.VR), "HR": sorted(self.HR), "SR": sorted(self.SR),
            "VC": sorted(self.VC), "HC": sorted(self.HC), "SC": sorted(self.SC),
            "row_perm": list(self.row_perm), "col_perm": list(self.col_perm),
            "block_boundaries": self.block_boundaries,
        }


def _reach(adj_from, start, match_of_other, partner_of):
    """Alternating BFS.  Returns the reached sets on both sides.

    From a vertex on side X we follow non-matching edges to side Y, then the
    matching edge back to X.  Reaching a free Y vertex means an augmenting
    path exists.
    """
    seen_x = set(start)
    seen_y = set()
    queue = deque(start)
    while queue:
        x = queue.popleft()
        for y in adj_from[x]:
            if partner_of[x] == y or y in seen_y:
                continue
            seen_y.add(y)
            x2 = match_of_other[y]
            if x2 is None:
                raise InvalidMatching(f"augmenting path found through vertex {y}; matching is not maximum")
            if x2 not in seen_x:
                seen_x.add(x2)
                queue.append(x2)
    return seen_x, seen_y


def dulmage_mendelsohn(pat: SparsePattern, matching) -> DMDecomposition:
    matching = tuple(sorted((int(r), int(c)) for r, c in matching))
    row_of = {}
    col_of = {}
    adj = pat.adjacency()
    adj_sets = [set(a) for a in adj]
    for r, c in matching:
        if r in col_of or c in row_of:
            raise InvalidMatching(f"edge ({r}, {c}) shares a vertex with another matching edge")
        if c not in adj_sets[r]:
            raise InvalidMatching(f"edge ({r}, {c}) is not an entry of the pattern")
        col_of[r] = c
        row_of[c] = r
    row_partner = [col_of.get(r) for r in range(pat.rows)]
    col_partner = [row_of.get(c) for c in range(pat.cols)]

    free_rows = [r for r in range(pat.rows) if r not in col_of]
    VR, VC = _reach(adj, free_rows, col_partner, row_partner)

    adj_t = [[] for _ in range(pat.cols)]
    for r, cols in enumerate(adj):
        for c in cols:
            adj_t[c].append(r)
    free_cols = [c for c in range(pat.cols) if c not in row_of]
    HC, HR = _reach(adj_t, free_cols, row_partner, col_partner)

    SR = set(range(pat.rows)) - VR - HR
    SC = set(range(pat.cols)) - VC - HC

    # rows: HR, SR, VR matched, VR free; matched columns follow their rows
    hr = sorted(HR)
    sr = sorted(SR)
    vr_m = sorted(r for r in VR if r in col_of)
    vr_f = sorted(r for r in VR if r not in col_of)
    hc_f = sorted(c for c in HC if c not in row_of)
    hc_m = [col_of[r] for r in hr]
    sc = [col_of[r] for r in sr]
    vc = [col_of[r] for r in vr_m]
    row_perm = tuple(hr + sr + vr_m + vr_f)
    col_perm = tuple(hc_f + hc_m + sc + vc)
    row_bounds = (0, len(hr), len(hr) + len(sr), len(hr) + len(sr) + len(vr_m), pat.rows)
    col_bounds = (0, len(hc_f), len(HC), len(HC) + len(sc), pat.cols)
    return DMDecomposition(
        matching=matching,
        VR=frozenset(VR), HR=frozenset(HR), SR=frozenset(SR),
        VC=frozenset(VC), HC=frozenset(HC), SC=frozenset(SC),
        row_perm=row_perm, col_perm=col_perm,
        row_bounds=row_bounds, col_bounds=col_bounds,
    )
