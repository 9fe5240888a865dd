"""Spectral and perturbation diagnostics for preconditioned systems.

All routines here work on dense matrices and are meant for desk-scale
problems (a few thousand unknowns).
"""
import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .assembly import (assemble_galerkin_exact, assemble_h1_matrix, assemble_wq,
                       parametric_matrices)
from .fastdiag import build_preconditioner
from .geometry import DiffusionCoefficient, grid_Q, sample_grid
from .splines import SplineSpace1D
from .tensor import KroneckerSumOperator

MAX_DENSE_EIG = 6000


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    bound: tuple = None

    @property
    def max_imag(self):
        return float(np.abs(self.eigenvalues.imag).max())

    @property
    def spectral_radius(self):
        return float(np.abs(self.eigenvalues).max())

    def contained(self, margin=1e-8):
        """True if every eigenvalue is real up to `margin` and lies in the bound interval."""
        if self.bound is None:
            raise ValueError("no bound interval attached")
        lo, hi = self.bound
        ev = self.eigenvalues
        return bool(np.all(np.abs(ev.imag) <= margin * max(1.0, self.spectral_radius))
                    and np.all(ev.real >= lo - margin) and np.all(ev.real <= hi + margin))


def _dense(A, max_size=MAX_DENSE_EIG):
    if A.shape[0] > max_size:
        raise MemoryError("dense eigensolve of size %d exceeds the limit %d" % (A.shape[0], max_size))
    if isinstance(A, KroneckerSumOperator):
        return A.dense(max_size)
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=float)


def apply_to_columns(P, A):
    """``P^-1 A`` for a dense matrix `A`."""
    if getattr(P, "backend", None) == "fd":
        return P.apply(A)
    return np.column_stack([P.apply(a) for a in A.T])


def q_bounds(G, K=None, samples=50):
    """Sampled ``[inf lambda_min(Q), sup lambda_max(Q)]`` on a ``samples^d`` grid."""
    K = DiffusionCoefficient.identity(G.dim) if K is None else K
    Q, _, _ = grid_Q(G, K, sample_grid(G.dim, samples))
    ev = np.linalg.eigvalsh(Q)
    return float(ev[..., 0].min()), float(ev[..., -1].max())


def preconditioned_spectrum(A, P, bound=None, max_size=MAX_DENSE_EIG):
    """Eigenvalues of ``P^-1 A`` by dense eigensolve."""
    Ad = _dense(A, max_size)
    ev = np.linalg.eigvals(apply_to_columns(P, Ad))
    return SpectrumReport(np.sort_complex(ev), bound)


def eigenvalue_matching_distance(lam, lam_star, mode="absolute"):
    """``max_{l* in lam_star} min_{l in lam} |l - l*|``, divided by ``|l|`` in relative mode."""
    lam = np.asarray(lam).ravel()
    lam_star = np.asarray(lam_star).ravel()
    if lam.size == 0 or lam_star.size == 0:
        raise ValueError("spectra must be nonempty")
    dist = np.abs(lam[:, None] - lam_star[None, :])
    if mode == "relative":
        if np.any(lam == 0):
            raise ZeroDivisionError("zero eigenvalue in relative matching distance")
        dist = dist / np.abs(lam)[:, None]
    elif mode != "absolute":
        raise ValueError("mode must be 'absolute' or 'relative'")
    return float(dist.min(axis=0).max())


def compute_e_h(A_G, A_wq, H):
    """``|| H^-1/2 (A_G - A_wq) H^-1/2 ||_2``."""
    Hd = _dense(H)
    E = _dense(A_G) - _dense(A_wq)
    w, V = np.linalg.eigh(0.5 * (Hd + Hd.T))
    if w.min() <= 0:
        raise np.linalg.LinAlgError("H is not positive definite")
    S = V / np.sqrt(w)
    return float(sla.norm(S.T @ E @ S, 2))


def e_h_value(G, p, num_elements, K=None):
    spaces = [SplineSpace1D.uniform(num_elements, p)] * G.dim
    A_G = assemble_galerkin_exact(G, K, spaces).operator
    A_wq = assemble_wq(G, K, spaces).operator
    H = assemble_h1_matrix(G, spaces)
    return compute_e_h(A_G, A_wq, H)


def spectra_study(G, p, num_elements, K=None, samples=50):
    """Spectra of ``P^-1 A_G`` and ``P^-1 A_wq`` with the Galerkin parametric preconditioner."""
    spaces = [SplineSpace1D.uniform(num_elements, p)] * G.dim
    P = build_preconditioner(parametric_matrices(spaces, "wq"))
    bound = q_bounds(G, K, samples)
    sG = preconditioned_spectrum(assemble_galerkin_exact(G, K, spaces).operator, P, bound)
    sW = preconditioned_spectrum(assemble_wq(G, K, spaces).operator, P, bound)
    return sG, sW


def diagnostics_rows(G, degrees=(2, 3, 4), num_elements=(8, 16, 32), K=None,
                     spectra_degrees=(2,), spectra_elements=(8, 16)):
    """Rows ``{h, p, quantity, value}`` with e_h, Q bounds and spectral quantities."""
    rows = []
    for p in degrees:
        for ne in num_elements:
            rows.append(dict(h=1.0 / ne, p=p, quantity="e_h", value=e_h_value(G, p, ne, K)))
    lo, hi = q_bounds(G, K)
    for p in spectra_degrees:
        for ne in spectra_elements:
            sG, sW = spectra_study(G, p, ne, K)
            h = 1.0 / ne
            rows += [
                dict(h=h, p=p, quantity="q_min", value=lo),
                dict(h=h, p=p, quantity="q_max", value=hi),
                dict(h=h, p=p, quantity="lambda_min_galerkin", value=float(sG.eigenvalues.real.min())),
                dict(h=h, p=p, quantity="lambda_max_galerkin", value=float(sG.eigenvalues.real.max())),
                dict(h=h, p=p, quantity="bound_contained", value=float(sG.contained())),
                dict(h=h, p=p, quantity="matching_distance",
                     value=eigenvalue_matching_distance(sG.eigenvalues, sW.eigenvalues)),
            ]
    return rows


def write_rows_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["h", "p", "quantity", "value"])
        w.writeheader()
        for r in rows:
            w.writerow(r)
    return path
