"""Variable-coefficient periodic elliptic solves div(a grad phi) = rhs.

Preconditioned conjugate gradients with the constant-coefficient spectral
inverse as preconditioner. The weight must satisfy 1/C <= a <= C for some
finite C; div(a^{-1} grad) solves just pass the reciprocal weight.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .fields import ScalarField
from .spectral import div, grad, poisson_solve


class EllipticConvergenceError(RuntimeError):
    pass


def elliptic_solve_weighted(rhs: ScalarField, weight: ScalarField,
                            form: str = "div_a_grad",
                            tol: float = 1e-10, maxiter: int | None = None) -> ScalarField:
    """Solve div(a grad phi) = rhs (zero-mean phi), rhs mean-subtracted.

    form 'div_ainv_grad' solves div(a^{-1} grad phi) = rhs instead.
    """
    if form == "div_ainv_grad":
        weight = ScalarField(weight.grid, 1.0 / weight.data)
    elif form != "div_a_grad":
        raise ValueError(f"unknown form {form!r}")
    a = weight.data
    if a.min() <= 0:
        raise ValueError("weight must be strictly positive")
    g = rhs.grid
    if maxiter is None:
        maxiter = 10 * max(g.nx, g.ny)
    abar = float(a.mean())

    def project(arr):
        # remove the null space of -div(a grad): the constant mode and the
        # three unpaired Nyquist modes killed by the spectral first derivative
        F = np.fft.fft2(arr)
        F[0, 0] = 0.0
        F[g.nx // 2, 0] = 0.0
        F[0, g.ny // 2] = 0.0
        F[g.nx // 2, g.ny // 2] = 0.0
        return np.fft.ifft2(F).real

    def apply_op(phi):
        gp = grad(ScalarField(g, phi))
        weighted = gp.__class__(g, a[..., None] * gp.data)
        return project(-div(weighted).data)

    def precond(r):
        return project(-poisson_solve(ScalarField(g, r)).data / abar)

    b = project(-rhs.data)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return ScalarField(g, np.zeros(g.shape))
    n = g.nx * g.ny
    A = LinearOperator((n, n), matvec=lambda u: apply_op(u.reshape(g.shape)).ravel())
    M = LinearOperator((n, n), matvec=lambda u: precond(u.reshape(g.shape)).ravel())
    x, info = cg(A, b.ravel(), rtol=tol, atol=0.0, maxiter=maxiter, M=M)
    res = np.linalg.norm(apply_op(x.reshape(g.shape)) - b)
    if info != 0 and res > tol * bnorm:
        raise EllipticConvergenceError(
            f"PCG did not reach tol={tol:g} in {maxiter} iterations "
            f"(relative residual {res / bnorm:.2e})")
    x = x.reshape(g.shape)
    x -= x.mean()
    return ScalarField(g, x)
