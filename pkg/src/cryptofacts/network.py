"""q-dependent detrended correlation matrices and minimal spanning trees."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .errors import AlignmentError, DomainError, MissingEntryError
from .ingest import BarSeries, SessionSpec, align_calendars
from .mfractal import combine_rho, profile_and_detrend, q_moments


@dataclass
class CorrelationMatrixQ:
    labels: List[str]
    rho: np.ndarray
    q: float
    s: int

    @property
    def missing(self) -> List[tuple]:
        iu, ju = np.nonzero(np.isnan(np.triu(self.rho, 1)) & np.triu(np.ones_like(self.rho, dtype=bool), 1))
        return [(self.labels[i], self.labels[j]) for i, j in zip(iu, ju)]

    def reorder(self, order: Sequence[int]) -> "CorrelationMatrixQ":
        order = np.asarray(order, dtype=int)
        return CorrelationMatrixQ([self.labels[i] for i in order], self.rho[np.ix_(order, order)], self.q, self.s)

    def sorted_by(self, keys: Sequence[float]) -> "CorrelationMatrixQ":
        """Reorder ascending by ``keys`` (e.g. average inter-transaction time)."""
        return self.reorder(np.argsort(np.asarray(keys, dtype=float), kind="stable"))


class _PairwiseRho:
    """Detrended residuals of each series at one scale, computed once and reused for every pair."""

    def __init__(self, series: Sequence[np.ndarray], s: int, q: float, m: int):
        lengths = {len(x) for x in series}
        if len(lengths) != 1:
            raise DomainError(f"series must be aligned to a common grid, got lengths {sorted(lengths)}")
        self.s, self.q = s, np.array([float(q)])
        self.resid = [profile_and_detrend(np.asarray(x, dtype=float), s, m) for x in series]
        self.self_moment = []
        for r in self.resid:
            f2 = np.einsum("ij,ij->i", r, r) / s
            self.self_moment.append(q_moments(f2, self.q, signed=False)[0][0])

    def __call__(self, i: int, j: int, other=None) -> float:
        ri = self.resid[i]
        rj, mj = (self.resid[j], self.self_moment[j]) if other is None else (other.resid[j], other.self_moment[j])
        f2 = np.einsum("ij,ij->i", ri, rj) / self.s
        m_ij = q_moments(f2, self.q, signed=True)[0]
        return float(combine_rho(m_ij, [self.self_moment[i]], [mj], self.q)[0])


def correlation_matrix(series: Sequence, q: float, s: int, labels: Optional[Sequence[str]] = None,
                       poly_degree: int = 2) -> CorrelationMatrixQ:
    """Matrix of rho_q(s) over all pairs of equal-length, aligned series.

    Undefined entries are NaN; the affected pairs are listed by ``missing``.
    """
    n = len(series)
    labels = list(labels) if labels is not None else [str(i) for i in range(n)]
    if len(labels) != n:
        raise DomainError("one label per series required")
    pair = _PairwiseRho(series, s, q, poly_degree)
    rho = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            rho[i, j] = rho[j, i] = pair(i, j)
    return CorrelationMatrixQ(labels, rho, float(q), int(s))


@dataclass
class DistanceMatrixQ:
    labels: List[str]
    d: np.ndarray


def to_distances(m: CorrelationMatrixQ) -> DistanceMatrixQ:
    """Metric distance d = sqrt(2 (1 - rho)); NaN entries stay NaN."""
    rho = np.asarray(m.rho, dtype=float)
    finite = rho[np.isfinite(rho)]
    if np.any(np.abs(finite) > 1.0):
        raise DomainError("correlation entries outside [-1, 1]")
    d = np.sqrt(np.clip(2.0 * (1.0 - rho), 0.0, 4.0))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrixQ(list(m.labels), d)


@dataclass(frozen=True)
class MstEdge:
    i: int
    j: int
    distance: float

    @property
    def weight_display(self) -> float:
        return 1.0 - self.distance


@dataclass
class MstGraph:
    labels: List[str]
    edges: List[MstEdge]
    node_attrs: Dict[str, dict] = field(default_factory=dict)

    @property
    def total_distance(self) -> float:
        return float(sum(e.distance for e in self.edges))

    def degrees(self) -> Dict[str, int]:
        deg = {lab: 0 for lab in self.labels}
        for e in self.edges:
            deg[self.labels[e.i]] += 1
            deg[self.labels[e.j]] += 1
        return deg

    def edge_set(self) -> set:
        """Edges as unordered label pairs."""
        return {frozenset((self.labels[e.i], self.labels[e.j])) for e in self.edges}

    def to_dict(self) -> dict:
        nodes = []
        for lab in self.labels:
            node = {"label": lab}
            node.update(self.node_attrs.get(lab, {}))
            nodes.append(node)
        edges = [{"source": self.labels[e.i], "target": self.labels[e.j],
                  "distance": e.distance, "width": e.weight_display} for e in self.edges]
        return {"nodes": nodes, "edges": edges}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_dot(self, path=None) -> str:
        """Graphviz text: node ``size`` is the mean volume, edge ``weight_display`` is 1 - d.

        ``penwidth`` repeats 1 - d floored at 0.05, since Graphviz rejects negative widths.
        """
        lines = ["graph mst {"]
        for lab in self.labels:
            attrs = self.node_attrs.get(lab, {})
            parts = [f'label="{lab}"']
            if "mean_volume" in attrs:
                parts.append(f'size="{attrs["mean_volume"]:.6g}"')
            if "group" in attrs:
                parts.append(f'group="{attrs["group"]}"')
            lines.append(f'  "{lab}" [{", ".join(parts)}];')
        for e in self.edges:
            lines.append(f'  "{self.labels[e.i]}" -- "{self.labels[e.j]}" '
                         f'[distance="{e.distance:.10g}", weight_display="{e.weight_display:.6g}", '
                         f'penwidth="{max(e.weight_display, 0.05):.6g}"];')
        lines.append("}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def minimal_spanning_tree(d: DistanceMatrixQ, node_attrs: Optional[Mapping[str, dict]] = None) -> MstGraph:
    """Prim's algorithm from the lexicographically smallest label.

    Equal distances are resolved by the smaller (i, j) index pair, i < j.
    """
    D = np.asarray(d.d, dtype=float)
    n = D.shape[0]
    if n < 2:
        raise DomainError("need at least two nodes")
    bad = np.argwhere(~np.isfinite(np.triu(D, 1)) & np.triu(np.ones((n, n), dtype=bool), 1))
    if len(bad):
        pairs = [(d.labels[i], d.labels[j]) for i, j in bad]
        raise MissingEntryError(f"undefined distances for {len(pairs)} pairs: {pairs[:10]}", pairs)

    start = min(range(n), key=lambda k: d.labels[k])
    in_tree = np.zeros(n, dtype=bool)
    in_tree[start] = True
    best = D[start].copy()
    via = np.full(n, start)
    edges = []
    for _ in range(n - 1):
        cand = np.nonzero(~in_tree)[0]
        dmin = best[cand].min()
        tied = cand[best[cand] == dmin]
        k = min(tied, key=lambda j: (min(j, via[j]), max(j, via[j])))
        i = int(via[k])
        edges.append(MstEdge(min(i, k), max(i, k), float(D[i, k])))
        in_tree[k] = True
        for j in np.nonzero(~in_tree)[0]:
            if D[k, j] < best[j] or (D[k, j] == best[j] and
                                     (min(k, j), max(k, j)) < (min(via[j], j), max(via[j], j))):
                best[j] = D[k, j]
                via[j] = k
    return MstGraph(list(d.labels), edges, dict(node_attrs or {}))


def hub_report(g: MstGraph) -> List[tuple]:
    """(label, degree) pairs, highest degree first, ties by label."""
    return sorted(g.degrees().items(), key=lambda kv: (-kv[1], kv[0]))


# ---------------------------------------------------------------- inter-market


@dataclass
class IntermarketBlock:
    row_labels: List[str]
    col_labels: List[str]
    rho: np.ndarray
    coverage: np.ndarray
    q: float
    s: int


def intermarket_matrix(cryptos: Mapping[str, BarSeries], traditionals: Mapping[str, BarSeries],
                       q: float, s: int, sessions: Optional[SessionSpec] = None, dt: int = 1,
                       row_keys: Optional[Mapping[str, float]] = None, coverage_floor: float = 0.5,
                       poly_degree: int = 2) -> IntermarketBlock:
    """rho_q(s) of log-returns for every (crypto, traditional asset) pair.

    Each pair is calendar-aligned first.  Rows are sorted ascending by
    ``row_keys`` (typically the average inter-transaction time).  Pairs whose
    aligned coverage of the crypto series falls below ``coverage_floor`` make
    the whole call fail with a coverage report.
    """
    rows = list(cryptos)
    if row_keys is not None:
        rows.sort(key=lambda lab: (row_keys[lab], lab))
    cols = list(traditionals)
    rho = np.full((len(rows), len(cols)), np.nan)
    coverage = np.zeros_like(rho)
    low = []
    for i, r in enumerate(rows):
        for j, c in enumerate(cols):
            pair = align_calendars(cryptos[r], traditionals[c], sessions)
            coverage[i, j] = pair.coverage_fraction
            if pair.coverage_fraction < coverage_floor:
                low.append((r, c, round(pair.coverage_fraction, 4)))
                continue
            ra, rb = pair.log_returns(dt)
            rho[i, j] = correlation_matrix([ra.values, rb.values], q, s, poly_degree=poly_degree).rho[0, 1]
    if low:
        raise AlignmentError(f"coverage below {coverage_floor} for {len(low)} pairs: {low[:10]}")
    return IntermarketBlock(rows, cols, rho, coverage, float(q), int(s))


# ---------------------------------------------------------------- export


def write_matrix_csv(labels_rows, labels_cols, values, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(labels_cols))
        for lab, row in zip(labels_rows, np.asarray(values)):
            w.writerow([lab] + ["" if not np.isfinite(v) else f"{v:.12g}" for v in row])
