"""
Citation graph and the renormalized adjacency used by the graph convolution.

Edge (i -> j) means paper i cites paper j. Matrices are scipy CSR with sorted
column indices, so row sums are taken in a fixed order.
"""
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from modules.corpus import CorpusSnapshot
from modules.errors import DataError, ShapeError, UnknownPaperError


@dataclass(frozen=True)
class CitationGraph:
    node_ids: Tuple[str, ...]
    directed_edges: sp.csr_matrix
    in_degree: np.ndarray
    out_degree: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_edges(self) -> int:
        return int(self.directed_edges.nnz)

    def index_of(self) -> Dict[str, int]:
        return {pid: i for i, pid in enumerate(self.node_ids)}


@dataclass(frozen=True)
class NormalizedAdjacency:
    matrix: sp.csr_matrix

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _csr(rows, cols, data, n: int) -> sp.csr_matrix:
    matrix = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def build_citation_graph(snapshot: CorpusSnapshot, node_ids: Sequence[str]) -> CitationGraph:
    """Directed citation edges among node_ids, taken from the snapshot's reference lists"""
    node_ids = tuple(node_ids)
    index = {pid: i for i, pid in enumerate(node_ids)}
    if len(index) != len(node_ids):
        raise DataError("node_ids contains duplicates")
    rows, cols = [], []
    for i, pid in enumerate(node_ids):
        if pid not in snapshot.papers:
            raise UnknownPaperError(pid)
        for ref in snapshot.papers[pid].references:
            j = index.get(ref)
            if j is not None and j != i:
                rows.append(i)
                cols.append(j)
    n = len(node_ids)
    edges = _csr(np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.ones(len(rows)), n)
    edges.data[:] = 1.0
    out_degree = np.diff(edges.indptr).astype(np.int64)
    in_degree = np.bincount(edges.indices, minlength=n).astype(np.int64)
    return CitationGraph(node_ids, edges, in_degree, out_degree)


def _augmented(graph: CitationGraph) -> sp.csr_matrix:
    """sym(M) + I with binary weights"""
    m = graph.directed_edges
    sym = ((m + m.T) > 0).astype(np.float64)
    augmented = (sym + sp.identity(graph.num_nodes, format="csr")).tocsr()
    augmented.sort_indices()
    return augmented


def normalized_adjacency(graph: CitationGraph) -> NormalizedAdjacency:
    """Renormalized adjacency m^-1/2 (sym(M) + I) m^-1/2"""
    augmented = _augmented(graph)
    degree = np.asarray(augmented.sum(axis=1)).ravel()
    augmented = augmented.tocoo()
    inv_sqrt = 1.0 / np.sqrt(degree)
    # product of two scalars is commutative, so (i, j) and (j, i) come out identical
    data = inv_sqrt[augmented.row] * inv_sqrt[augmented.col]
    return NormalizedAdjacency(_csr(augmented.row, augmented.col, data, graph.num_nodes))


def row_normalized_adjacency(graph: CitationGraph) -> sp.csr_matrix:
    """m^-1 (sym(M) + I); every row sums to 1"""
    augmented = _augmented(graph)
    degree = np.asarray(augmented.sum(axis=1)).ravel()
    return sp.diags(1.0 / degree).dot(augmented).tocsr()


def identity_adjacency(n: int) -> NormalizedAdjacency:
    return NormalizedAdjacency(sp.identity(n, format="csr", dtype=np.float64))


def spmm(adj: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
    """Sparse-dense product adj @ x"""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if adj.matrix.shape[1] != x.shape[0]:
        raise ShapeError(f"adjacency is {adj.matrix.shape[0]}x{adj.matrix.shape[1]} but features have {x.shape[0]} rows")
    return np.asarray(adj.matrix @ x)


def adjacency_fingerprint(adj: NormalizedAdjacency) -> str:
    m = adj.matrix
    digest = hashlib.sha256()
    digest.update(np.asarray(m.shape, dtype=np.int64).tobytes())
    digest.update(np.asarray(m.indptr, dtype=np.int64).tobytes())
    digest.update(np.asarray(m.indices, dtype=np.int64).tobytes())
    digest.update(np.asarray(m.data, dtype=np.float64).tobytes())
    return digest.hexdigest()


def write_edge_list(graph: CitationGraph, path: Path):
    edges = graph.directed_edges.tocoo()
    order = np.lexsort((edges.col, edges.row))
    with open(path, "w", encoding="utf-8") as f:
        for k in order:
            f.write(f"{graph.node_ids[edges.row[k]]}\t{graph.node_ids[edges.col[k]]}\n")
