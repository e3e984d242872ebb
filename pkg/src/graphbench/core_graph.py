"""Graph representation, Laplacian algebra and symmetric spectral operations."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

VARIANTS = ("raw", "sym_norm", "augmented", "augmented_sym_norm")

SYMMETRY_TOL = 1e-10


class IsolatedVertexWarning(UserWarning):
    """Raised when symmetric normalization meets a degree-zero vertex."""


@dataclass
class Graph:
    """Sparse symmetric weighted graph.

    Edges are stored upper-triangular as (i, j, w) with i < j and w > 0.
    Self-loop weights live in ``diagonal`` (all zeros unless augmented).
    """

    n: int
    edges: list = field(default_factory=list)
    diagonal: np.ndarray = None
    variant: str = "raw"

    def __post_init__(self):
        if self.diagonal is None:
            self.diagonal = np.zeros(self.n)
        self.diagonal = np.asarray(self.diagonal, dtype=float)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.diagonal.shape != (self.n,):
            raise ValueError("diagonal length must equal vertex count")
        seen = set()
        for i, j, w in self.edges:
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad edge ({i}, {j}): need 0 <= i < j < n")
            if w <= 0:
                raise ValueError(f"edge ({i}, {j}) has non-positive weight {w}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        if self.variant in ("raw", "sym_norm") and np.any(self.diagonal != 0):
            raise ValueError(f"variant {self.variant!r} forbids self-loops")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def to_dense(self) -> np.ndarray:
        """Full symmetric adjacency matrix including the diagonal."""
        A = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            A[i, j] = w
            A[j, i] = w
        A[np.diag_indices(self.n)] = self.diagonal
        return A

    def neighbor_counts(self) -> np.ndarray:
        """Number of incident edges per vertex (self-loops excluded)."""
        counts = np.zeros(self.n, dtype=int)
        for i, j, _ in self.edges:
            counts[i] += 1
            counts[j] += 1
        return counts


def from_dense(A: np.ndarray, variant: str = "raw", threshold: float = 0.0) -> Graph:
    """Build a Graph from a dense symmetric matrix, dropping weights <= threshold."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("adjacency must be square")
    if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL:
        raise ValueError("adjacency must be symmetric")
    edges = []
    iu, ju = np.triu_indices(n, k=1)
    for i, j in zip(iu, ju):
        w = A[i, j]
        if w > threshold:
            edges.append((int(i), int(j), float(w)))
    return Graph(n=n, edges=edges, diagonal=np.diag(A).copy(), variant=variant)


def degrees(g: Graph) -> np.ndarray:
    """Per-vertex weighted degree: incident edge weights plus self-loop weight."""
    d = g.diagonal.copy()
    for i, j, w in g.edges:
        d[i] += w
        d[j] += w
    return d


def normalize(g: Graph, target_variant: str) -> Graph:
    """Produce the requested adjacency variant from a raw graph.

    ``augmented`` adds unit self-loops before any normalization; the
    ``*sym_norm`` variants rescale weight (i, j) by 1/sqrt(d_i * d_j) using
    degrees of the matrix being normalized. Degree-zero vertices keep a zero
    row and trigger an IsolatedVertexWarning.
    """
    if g.variant != "raw":
        raise ValueError("normalize expects a raw-variant graph")
    if target_variant not in VARIANTS:
        raise ValueError(f"unknown variant {target_variant!r}")

    if target_variant == "raw":
        return Graph(g.n, list(g.edges), g.diagonal.copy(), "raw")

    diagonal = g.diagonal.copy()
    edges = list(g.edges)
    if target_variant in ("augmented", "augmented_sym_norm"):
        diagonal = diagonal + 1.0
        if target_variant == "augmented":
            return Graph(g.n, edges, diagonal, "augmented")

    work = Graph(g.n, edges, diagonal, "augmented") if np.any(diagonal) else g
    d = degrees(work)
    isolated = d <= 0
    if np.any(isolated):
        warnings.warn(
            f"{int(isolated.sum())} isolated vertex rows left zero under "
            "symmetric normalization",
            IsolatedVertexWarning,
        )
    inv_sqrt = np.zeros_like(d)
    inv_sqrt[~isolated] = 1.0 / np.sqrt(d[~isolated])
    new_edges = [
        (i, j, w * inv_sqrt[i] * inv_sqrt[j])
        for i, j, w in edges
        if inv_sqrt[i] > 0 and inv_sqrt[j] > 0
    ]
    new_diag = diagonal * inv_sqrt**2
    return Graph(g.n, new_edges, new_diag, target_variant)


def laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian L = D - W (self-loops cancel)."""
    A = g.to_dense()
    return np.diag(degrees(g)) - A


@dataclass
class SpectralDecomposition:
    """Eigendecomposition of a symmetric operator, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    lambda_max: float

    def reconstruct(self) -> np.ndarray:
        F = self.eigenvectors
        return (F * self.eigenvalues) @ F.T


def eigendecompose(A: np.ndarray) -> SpectralDecomposition:
    """Dense symmetric eigendecomposition, ascending eigenvalue order."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("operator must be square")
    if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL:
        raise ValueError("operator must be symmetric")
    vals, vecs = np.linalg.eigh(A)
    return SpectralDecomposition(vals, vecs, float(vals[-1]))


def matrix_exponential(A: np.ndarray) -> np.ndarray:
    """exp(A) for symmetric A via spectral calculus."""
    dec = eigendecompose(A)
    F = dec.eigenvectors
    E = (F * np.exp(dec.eigenvalues)) @ F.T
    return (E + E.T) / 2.0


def write_graph(g: Graph, path) -> None:
    """Serialize a graph: header `#n=<n> variant=<variant>`, then `i<TAB>j<TAB>w` lines."""
    with open(path, "w") as fh:
        fh.write(f"#n={g.n} variant={g.variant}\n")
        for i in range(g.n):
            if g.diagonal[i] != 0:
                fh.write(f"{i}\t{i}\t{float(g.diagonal[i])!r}\n")
        for i, j, w in g.edges:
            fh.write(f"{i}\t{j}\t{float(w)!r}\n")


def read_graph(path) -> Graph:
    """Parse a graph file written by write_graph."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError("missing graph header line")
        fields = dict(part.split("=", 1) for part in header[1:].split())
        n = int(fields["n"])
        variant = fields.get("variant", "raw")
        diagonal = np.zeros(n)
        edges = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected i<TAB>j<TAB>w")
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            if i == j:
                diagonal[i] = w
            elif i < j:
                edges.append((i, j, w))
            else:
                raise ValueError(f"line {lineno}: edges must satisfy i < j")
    return Graph(n=n, edges=edges, diagonal=diagonal, variant=variant)
