"""Numpy implementations of the hot kernels.

This is the fallback backend; ``hetdrop._kernels`` prefers the compiled
Cython twin (``_ckernels``) when it imported successfully. Both expose the
same four functions with identical semantics.
"""

import numpy as np

NAME = "numpy"


def csr_dense_matmul(indptr, indices, data, x):
    """Multiply a CSR matrix by a dense matrix: out[i] = sum_j A[i,j] x[j]."""
    n_rows = indptr.shape[0] - 1
    out = np.zeros((n_rows, x.shape[1]), dtype=np.float64)
    if data.shape[0] == 0:
        return out
    contrib = data[:, None] * x[indices]
    counts = np.diff(indptr)
    nonempty = counts > 0
    # reduceat segment boundaries: starts of non-empty rows are strictly
    # increasing and consecutive segments meet exactly at row boundaries.
    starts = indptr[:-1][nonempty]
    out[nonempty] = np.add.reduceat(contrib, starts, axis=0)
    return out


def edge_propagate(u, v, w, self_w, x):
    """Weighted symmetric neighborhood sum.

    out[i] = self_w[i] * x[i] + sum over edges e=(u,v) touching i of
    w[e] * x[other endpoint].
    """
    out = self_w[:, None] * x
    np.add.at(out, u, w[:, None] * x[v])
    np.add.at(out, v, w[:, None] * x[u])
    return out


def edge_pair_dot(u, v, a, b):
    """Per-edge <a[u], b[v]> + <a[v], b[u]> (adjoint of edge_propagate in w)."""
    return np.einsum("ij,ij->i", a[u], b[v]) + np.einsum("ij,ij->i", a[v], b[u])


def _round_robin_rounds(n):
    """Disjoint pivot batches covering every index pair once (circle method).

    Returns a list of (p, q) index-array pairs; a dummy index is appended
    when n is odd and pairs containing it are dropped.
    """
    m = n if n % 2 == 0 else n + 1
    others = list(range(1, m))
    rounds = []
    for _ in range(m - 1):
        ring = [0] + others
        ps, qs = [], []
        for i in range(m // 2):
            a, b = ring[i], ring[m - 1 - i]
            if a >= n or b >= n:
                continue
            ps.append(min(a, b))
            qs.append(max(a, b))
        rounds.append((np.asarray(ps, dtype=np.intp), np.asarray(qs, dtype=np.intp)))
        others = [others[-1]] + others[:-1]
    return rounds


def jacobi_eigenvalues(a, rel_tol=1e-10, max_sweeps=60):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps use a round-robin pivot ordering so each batch of rotations acts
    on disjoint index pairs and can be applied with whole-row/column array
    operations. Converged when the off-diagonal Frobenius norm drops below
    rel_tol times the Frobenius norm of the input. Returns sorted values.
    """
    a = np.array(a, dtype=np.float64, order="C")
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n <= 1:
        return a.reshape(-1).copy()
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        return np.zeros(n)
    thresh = rel_tol * norm
    # pivots below thresh/n can all stay: their total square mass is under
    # thresh**2, so skipping them cannot stall above thresh
    skip = thresh / n
    rounds = _round_robin_rounds(n)
    for _ in range(max_sweeps):
        # row/column updates are applied separately, so symmetry drifts at
        # roundoff level within a sweep; re-pin it before measuring progress
        a = 0.5 * (a + a.T)
        sq = a * a
        np.fill_diagonal(sq, 0.0)  # summing only off-diagonal avoids cancellation
        if np.sqrt(sq.sum()) <= thresh:
            return np.sort(np.diag(a).copy())
        for p, q in rounds:
            apq = a[p, q]
            nz = np.abs(apq) > skip
            if not np.any(nz):
                continue
            c = np.ones(p.shape[0])
            s = np.zeros(p.shape[0])
            theta = (a[q[nz], q[nz]] - a[p[nz], p[nz]]) / (2.0 * apq[nz])
            sgn = np.where(theta >= 0.0, 1.0, -1.0)
            with np.errstate(over="ignore", invalid="ignore"):
                # asymptotic form when theta**2 would overflow
                big = np.abs(theta) > 1e154
                t = np.where(
                    big,
                    0.5 / np.where(big, theta, 1.0),
                    sgn / (np.abs(theta) + np.sqrt(theta * theta + 1.0)),
                )
            c[nz] = 1.0 / np.sqrt(t * t + 1.0)
            s[nz] = t * c[nz]
            # rows: A <- J^T A, then columns: A <- A J
            rp = a[p, :].copy()
            rq = a[q, :].copy()
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            cp = a[:, p].copy()
            cq = a[:, q].copy()
            a[:, p] = cp * c - cq * s
            a[:, q] = cp * s + cq * c
            # rotated pivots are zero analytically; kill the roundoff residue
            a[p, q] = 0.0
            a[q, p] = 0.0
    raise RuntimeError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
