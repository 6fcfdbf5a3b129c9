"""Shared test utilities: scalar oracles, SPD helpers, spectrum matching."""

import math

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from nmesolve import PencilForm, SymplecticPencil


def scalar_x_plus(a: float, q: float) -> float:
    """Closed-form maximal solution of x + a^2/x = q (quadratic formula)."""
    disc = q * q - 4.0 * a * a
    assert disc >= 0, "no real solution"
    return (q + math.sqrt(disc)) / 2.0


def min_eig(M) -> float:
    M = np.asarray(M, dtype=float)
    return float(np.linalg.eigvalsh((M + M.T) / 2.0).min())


def match_distance(xs, ys) -> float:
    """Max distance under a minimal-cost assignment between two spectra."""
    xs = np.asarray(xs, dtype=complex)
    ys = np.asarray(ys, dtype=complex)
    assert xs.size == ys.size
    cost = np.abs(xs[:, None] - ys[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max()) if xs.size else 0.0


def pencil_with_spectrum(rng, entries):
    """Build a real pencil with a prescribed finite spectrum.

    ``entries`` holds real numbers and/or complex numbers with positive
    imaginary part; each complex entry also contributes its conjugate.
    Returns ``(pencil, spectrum, pairs)`` where ``spectrum`` is the full
    eigenvalue list and ``pairs`` maps each entry as given to an exact
    eigenvector of the pencil.
    """
    blocks = []
    spectrum = []
    seeds = []
    offset = 0
    for z in entries:
        z = complex(z)
        if abs(z.imag) < 1e-14:
            blocks.append(np.array([[z.real]]))
            spectrum.append(complex(z.real))
            seeds.append((complex(z.real), offset, np.array([1.0 + 0j])))
            offset += 1
        else:
            a, b = z.real, abs(z.imag)
            blocks.append(np.array([[a, b], [-b, a]]))
            spectrum += [complex(a, b), complex(a, -b)]
            seeds.append((complex(a, b), offset, np.array([1.0 + 0j, 1j])))
            offset += 2
    D = scipy.linalg.block_diag(*blocks)
    dim = D.shape[0]

    def well_conditioned():
        while True:
            W = rng.standard_normal((dim, dim))
            if np.linalg.cond(W) < 100.0:
                return W

    P = well_conditioned()
    R = well_conditioned()
    M = P @ D @ R
    L = P @ R
    R_inv = np.linalg.inv(R)
    pairs = []
    for lam, off, emb in seeds:
        w = np.zeros(dim, dtype=complex)
        w[off:off + emb.size] = emb
        pairs.append((lam, R_inv @ w))
    pen = SymplecticPencil(M=M.astype(complex), L=L.astype(complex), form=PencilForm.GENERAL)
    return pen, np.asarray(spectrum, dtype=complex), pairs
