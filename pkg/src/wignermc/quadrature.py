"""Gauss-Legendre quadrature over phase-space boxes.

Rules are tensor products of per-axis 1D rules.  An axis spec is either a
plain node count (one Gauss-Legendre panel, exact for smooth integrands) or
a ``(panels, order)`` pair for a composite rule: the interval is cut into
equal panels each carrying its own Gauss-Legendre rule.  Composite rules are
for integrands with kinks (absolute values of oscillating densities), where
a single global polynomial rule converges too slowly to trust.
"""

from __future__ import annotations

import numpy as np

# Evaluate tensor grids in slabs of at most this many points to bound memory.
_CHUNK = 200_000


def gl_rule(lo: float, hi: float, order: int, panels: int = 1):
    """1D Gauss-Legendre nodes and weights on [lo, hi], optionally composite."""
    if order < 1:
        raise ValueError("quadrature order must be at least 1")
    if panels < 1:
        raise ValueError("panel count must be at least 1")
    xs, ws = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xs[None, :]).reshape(-1)
    weights = (half[:, None] * ws[None, :]).reshape(-1)
    return nodes, weights


def _axis_spec(spec):
    if isinstance(spec, tuple):
        panels, order = spec
        return int(panels), int(order)
    return 1, int(spec)


def tensor_rule(box: np.ndarray, spec):
    """Tensor rule on a (d, 2) box.

    ``spec`` is a single axis spec applied to every axis, or a sequence of
    per-axis specs.  Returns (nodes, weights) with nodes of shape (N, d).
    """
    box = np.asarray(box, dtype=np.float64)
    dim = box.shape[0]
    if isinstance(spec, (int, tuple)):
        specs = [spec] * dim
    else:
        specs = list(spec)
        if len(specs) != dim:
            raise ValueError(f"need {dim} axis specs, got {len(specs)}")
    axes = []
    for i in range(dim):
        panels, order = _axis_spec(specs[i])
        axes.append(gl_rule(box[i, 0], box[i, 1], order, panels))
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    weights = np.ones(nodes.shape[0])
    for w in wgrids:
        weights *= w.reshape(-1)
    return nodes, weights


def _axis_rules(box, spec):
    box = np.asarray(box, dtype=np.float64)
    dim = box.shape[0]
    if isinstance(spec, (int, tuple)):
        specs = [spec] * dim
    else:
        specs = list(spec)
        if len(specs) != dim:
            raise ValueError(f"need {dim} axis specs, got {len(specs)}")
    axes = []
    for i in range(dim):
        panels, order = _axis_spec(specs[i])
        axes.append(gl_rule(box[i, 0], box[i, 1], order, panels))
    return axes


def integrate(func, box: np.ndarray, spec) -> float:
    """Integrate ``func((n, d) states) -> (n,)`` over the box.

    Streams the tensor grid in bounded chunks so fine composite rules never
    materialise the full node array.
    """
    axes = _axis_rules(box, spec)
    sizes = tuple(len(a[0]) for a in axes)
    ntot = int(np.prod(sizes))
    dim = len(axes)
    total = 0.0
    for start in range(0, ntot, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, ntot))
        multi = np.unravel_index(flat, sizes)
        nodes = np.stack([axes[d][0][multi[d]] for d in range(dim)], axis=1)
        weights = axes[0][1][multi[0]].copy()
        for d in range(1, dim):
            weights *= axes[d][1][multi[d]]
        total += float(np.dot(weights, func(nodes)))
    return total


def integrate_2d(func, box_a, box_b, spec_a, spec_b=None) -> float:
    """Integrate ``func(a, b)`` over a rectangle, vectorised over both axes."""
    if spec_b is None:
        spec_b = spec_a
    pa, oa = _axis_spec(spec_a)
    pb, ob = _axis_spec(spec_b)
    na, wa = gl_rule(box_a[0], box_a[1], oa, pa)
    nb, wb = gl_rule(box_b[0], box_b[1], ob, pb)
    total = 0.0
    rows = max(1, _CHUNK // max(1, len(nb)))
    for i in range(0, len(na), rows):
        vals = func(na[i:i + rows, None], nb[None, :])
        total += float(wa[i:i + rows] @ vals @ wb)
    return total
