"""Multi-element orthonormal polynomial bases and quadrature on the random domain.

The random variable is uniform on a bounded interval. The interval is split
into equal elements; each element carries Legendre-type polynomials that are
orthonormal against the local conditional density, evaluated on a shared
reference quadrature rule on [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ElementPartition",
    "QuadratureRule",
    "GpcBasis",
    "build_partition",
    "build_quadrature",
    "build_basis",
    "eval_orthonormal_legendre",
]


@dataclass(frozen=True)
class ElementPartition:
    """Uniform decomposition of the random domain into disjoint intervals."""

    lo: float
    hi: float
    boundaries: np.ndarray

    @property
    def n_elements(self) -> int:
        return len(self.boundaries) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.boundaries[:-1] + self.boundaries[1:])

    def element_of(self, xi) -> np.ndarray:
        """Index of the element containing each point (boundary points go right)."""
        xi = np.asarray(xi, dtype=float)
        idx = np.searchsorted(self.boundaries, xi, side="right") - 1
        return np.clip(idx, 0, self.n_elements - 1)


def build_partition(lo: float, hi: float, n_elements: int) -> ElementPartition:
    """Split (lo, hi) into n_elements equal elements."""
    if n_elements < 1:
        raise ValueError(f"n_elements must be >= 1, got {n_elements}")
    if not lo < hi:
        raise ValueError(f"empty random domain: lo={lo} >= hi={hi}")
    boundaries = lo + (hi - lo) * np.arange(n_elements + 1) / n_elements
    boundaries[0] = lo
    boundaries[-1] = hi
    return ElementPartition(lo=float(lo), hi=float(hi), boundaries=boundaries)


def eval_orthonormal_legendre(degree: int, t) -> np.ndarray:
    """Table of Legendre polynomials orthonormal against the density 1/2 on [-1, 1].

    Returns an array of shape (degree + 1,) + t.shape. Row k holds
    sqrt(2k+1) * P_k(t), generated by the normalized three-term recurrence
    (stable for the degrees used here, <= 14 and beyond).
    """
    t = np.asarray(t, dtype=float)
    table = np.empty((degree + 1,) + t.shape)
    table[0] = 1.0
    if degree == 0:
        return table
    # recurrence coefficients a_k = k / sqrt(4k^2 - 1) for the weight 1/2
    k = np.arange(1, degree + 1, dtype=float)
    a = k / np.sqrt(4.0 * k * k - 1.0)
    table[1] = t / a[0]
    for n in range(1, degree):
        table[n + 1] = (t * table[n] - a[n - 1] * table[n - 1]) / a[n]
    return table


def _gauss_legendre_ref(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights / 2.0


def _clenshaw_curtis_ref(level: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes as sin(pi*(n-2j)/(2n)) so that levels nest bitwise, 0 included exactly
    if level == 0:
        return np.array([0.0]), np.array([1.0])
    n = 2**level
    j = np.arange(n + 1)
    nodes = np.sin(np.pi * (n - 2 * j) / (2 * n))
    m = np.arange(1, n // 2 + 1)
    b = np.where(m == n // 2, 1.0, 2.0)
    c = np.where((j == 0) | (j == n), 1.0, 2.0)
    cosines = np.cos(2.0 * np.outer(m, j) * np.pi / n)
    weights = (c / n) * (1.0 - (b / (4.0 * m * m - 1.0)) @ cosines)
    order = np.argsort(nodes)
    return nodes[order], weights[order] / 2.0


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature with the local density folded in: weights sum to one."""

    kind: str
    nodes: np.ndarray
    weights: np.ndarray
    ref_nodes: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, values) -> np.ndarray:
        """Integrate node samples against the local density (node axis last)."""
        return np.asarray(values, dtype=float) @ self.weights


def build_quadrature(kind: str, count_or_level: int, element=(-1.0, 1.0)) -> QuadratureRule:
    """Quadrature rule mapped affinely into an element, density-normalized.

    Parameters
    ----------
    kind : "gauss-legendre" (count_or_level = node count >= 1) or
        "clenshaw-curtis" (count_or_level = level >= 0, giving 2**level + 1
        nodes, one node at level 0).
    element : interval the nodes are mapped into.
    """
    if kind in ("gauss-legendre", "gauss"):
        if count_or_level < 1:
            raise ValueError(f"gauss rule needs at least one node, got {count_or_level}")
        ref, w = _gauss_legendre_ref(count_or_level)
    elif kind in ("clenshaw-curtis", "cc"):
        if count_or_level < 0:
            raise ValueError(f"clenshaw-curtis level must be >= 0, got {count_or_level}")
        ref, w = _clenshaw_curtis_ref(count_or_level)
    else:
        raise ValueError(f"unknown quadrature kind: {kind!r}")
    a, b = element
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * ref
    return QuadratureRule(kind=kind, nodes=nodes, weights=w, ref_nodes=ref)


class GpcBasis:
    """Per-element orthonormal bases sharing one reference quadrature rule.

    Attributes
    ----------
    partition : ElementPartition
    degree : highest polynomial degree per element
    rule : reference QuadratureRule on [-1, 1]
    element_weights : probability mass of each element, sums to one
    phi : (degree+1, n_nodes) basis values at the reference nodes
    nodes : (n_elements, n_nodes) quadrature nodes mapped into each element
    """

    def __init__(self, partition: ElementPartition, degree: int, rule: QuadratureRule):
        if degree < 0:
            raise ValueError(f"degree must be >= 0, got {degree}")
        self.partition = partition
        self.degree = int(degree)
        self.rule = rule
        total = partition.hi - partition.lo
        self.element_weights = partition.widths / total
        self.phi = eval_orthonormal_legendre(degree, rule.ref_nodes)
        mids = partition.midpoints
        halves = 0.5 * partition.widths
        self.nodes = mids[:, None] + halves[:, None] * rule.ref_nodes[None, :]
        # projection matrix phi_k(t_q) * w_q, used by project()
        self._phi_w = self.phi * rule.weights

    @property
    def n_elements(self) -> int:
        return self.partition.n_elements

    @property
    def n_nodes(self) -> int:
        return len(self.rule)

    @property
    def n_coeffs(self) -> int:
        return self.degree + 1

    def project(self, values, node_axis: int = -1) -> np.ndarray:
        """Coefficients of node samples: <u phi_k f> by quadrature.

        ``values`` carries the element's quadrature-node samples along
        ``node_axis``; that axis is replaced by the coefficient axis.
        """
        v = np.asarray(values, dtype=float)
        if v.shape[node_axis] != self.n_nodes:
            raise ValueError(
                f"expected {self.n_nodes} node samples along axis {node_axis}, "
                f"got {v.shape[node_axis]}"
            )
        v = np.moveaxis(v, node_axis, -1)
        coeffs = v @ self._phi_w.T
        return np.moveaxis(coeffs, -1, node_axis)

    def reconstruct(self, coeffs, coeff_axis: int = -1) -> np.ndarray:
        """Evaluate the polynomial with given coefficients at the quadrature nodes."""
        c = np.asarray(coeffs, dtype=float)
        if c.shape[coeff_axis] != self.n_coeffs:
            raise ValueError(
                f"expected {self.n_coeffs} coefficients along axis {coeff_axis}, "
                f"got {c.shape[coeff_axis]}"
            )
        c = np.moveaxis(c, coeff_axis, -1)
        vals = c @ self.phi
        return np.moveaxis(vals, -1, coeff_axis)

    def eval_at(self, xi) -> tuple[np.ndarray, np.ndarray]:
        """Element index and local basis table (degree+1, ...) at arbitrary points."""
        xi = np.asarray(xi, dtype=float)
        idx = self.partition.element_of(xi)
        mids = self.partition.midpoints[idx]
        halves = 0.5 * self.partition.widths[idx]
        t = (xi - mids) / halves
        return idx, eval_orthonormal_legendre(self.degree, t)


def build_basis(
    partition: ElementPartition,
    degree: int,
    quad_kind: str = "gauss-legendre",
    quad_count: int | None = None,
) -> GpcBasis:
    """Basis with its quadrature; default rule is Gauss with 2*(degree+1) nodes."""
    if quad_count is None:
        quad_count = 2 * (degree + 1) if quad_kind in ("gauss-legendre", "gauss") else 0
        if quad_kind in ("clenshaw-curtis", "cc"):
            # smallest level with at least 2*(degree+1) points
            quad_count = int(np.ceil(np.log2(max(2 * (degree + 1) - 1, 1))))
    rule = build_quadrature(quad_kind, quad_count)
    return GpcBasis(partition, degree, rule)
