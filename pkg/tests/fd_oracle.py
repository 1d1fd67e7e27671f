"""Dense finite-difference Dirichlet solver used as an independent oracle.

Second-order 5-point scheme for ``-d_rho^2 u - (1 - c(x)) d_x^2 u = 0`` on
``[-pi, pi) x [-L, 0]``, periodic in ``x``, ``u = g`` at ``rho = 0`` and
``u = 0`` at ``rho = -L``.
"""

import numpy as np
from scipy import sparse
from scipy.sparse import linalg


def dirichlet_solve(g, c, L, n_rho):
    """Return ``(u, d_rho u at the face)``; ``u`` has shape ``(len(g), n_rho + 1)``
    with the last column on the face."""
    nx = len(g)
    hx = 2 * np.pi / nx
    hr = L / n_rho
    x = -np.pi + hx * np.arange(nx)
    a = 1 - c(x)
    m = n_rho - 1  # interior rows rho_1..rho_{n-1}
    Dx = sparse.diags([np.ones(nx - 1), -2 * np.ones(nx), np.ones(nx - 1)], [-1, 0, 1], format="lil")
    Dx[0, nx - 1] = 1
    Dx[nx - 1, 0] = 1
    Dx = sparse.diags(a) @ Dx.tocsr() / hx ** 2
    Dr = sparse.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / hr ** 2
    A = -(sparse.kron(sparse.identity(nx), Dr) + sparse.kron(Dx, sparse.identity(m)))
    rhs = np.zeros((nx, m), dtype=complex)
    rhs[:, -1] = g / hr ** 2
    inner = linalg.spsolve(A.tocsc(), rhs.ravel()).reshape(nx, m)
    u = np.zeros((nx, n_rho + 1), dtype=complex)
    u[:, 1:-1] = inner
    u[:, -1] = g
    du = (3 * u[:, -1] - 4 * u[:, -2] + u[:, -3]) / (2 * hr)
    return u, du
