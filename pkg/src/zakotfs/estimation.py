"""Channel-matrix construction and MMSE equalization of DD frames."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .core import DDChannelEstimate, DDFilter, DDGridParams, DDSignal
from .exceptions import EqualizationError, InvalidParameterError

__all__ = ["ChannelMatrix", "build_channel_matrix", "mmse_equalize", "vec", "unvec"]

# above this many taps per row the sparse LU fills in and dense Cholesky wins
SPARSE_TAPS_PER_ROW = 8


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Sparse ``MN x MN`` map with ``vec(y) = H @ vec(x)``.

    Vectorization order is ``k + M*l`` (column-major over the cell).
    """

    grid: DDGridParams
    entries: scipy.sparse.csr_matrix

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()

    def apply(self, x: DDSignal) -> DDSignal:
        y = self.entries @ vec(x)
        return DDSignal(self.grid, unvec(y, self.grid))


def vec(x: DDSignal) -> np.ndarray:
    return x.cell.reshape(-1, order="F")


def unvec(v: np.ndarray, grid: DDGridParams) -> np.ndarray:
    return np.asarray(v).reshape(grid.shape, order="F")


def build_channel_matrix(h: DDChannelEstimate | DDFilter, *, prune_below: float = 0.0) -> ChannelMatrix:
    """Matrix form of the twisted convolution ``y = h (*)_sigma x``.

    Each tap ``h[k', l']`` contributes one entry per row:
    ``x_ext[k-k', l-l'] * exp(j*2*pi*l'*(k-k')/MN)`` where the quasi-periodic
    wrap of ``x_ext`` adds ``exp(j*2*pi*n*l0/N)`` for ``n = floor((k-k')/M)``.
    """
    taps = h.to_filter(prune_below) if isinstance(h, DDChannelEstimate) else h
    grid = taps.grid
    M, N, MN = grid.M, grid.N, grid.MN
    k, l = np.meshgrid(np.arange(M), np.arange(N), indexing="ij")
    rows = (k + M * l).reshape(-1, order="F")
    k = k.reshape(-1, order="F")
    l = l.reshape(-1, order="F")
    all_rows, all_cols, all_vals = [], [], []
    for kt, lt, v in zip(taps.delays, taps.dopplers, taps.values):
        dk = k - kt
        n, k0 = np.divmod(dk, M)
        l0 = np.mod(l - lt, N)
        phase = np.mod(n * l0 * M + lt * dk, MN)
        all_rows.append(rows)
        all_cols.append(k0 + M * l0)
        all_vals.append(v * np.exp(2j * np.pi * phase / MN))
    if not all_vals:
        entries = scipy.sparse.csr_matrix((MN, MN), dtype=np.complex128)
    else:
        entries = scipy.sparse.csr_matrix(
            (np.concatenate(all_vals), (np.concatenate(all_rows), np.concatenate(all_cols))),
            shape=(MN, MN),
        )
    return ChannelMatrix(grid, entries)


def mmse_equalize(y: DDSignal, H: ChannelMatrix, noise_var: float, *, method: str = "auto") -> DDSignal:
    """Linear MMSE estimate ``x = H^H (H H^H + noise_var*I)^{-1} vec(y)``.

    ``noise_var`` is the per-entry noise variance in the DD domain.  At
    ``noise_var == 0`` this is exact inversion of ``H``; a singular system
    raises :class:`EqualizationError`.

    ``method`` is ``"dense"`` (Cholesky, the reference), ``"sparse"``
    (sparse LU of the same regularized Gram matrix) or ``"auto"``, which
    picks the sparse path when ``H`` has few taps per row.
    """
    if method not in ("auto", "dense", "sparse"):
        raise InvalidParameterError(f"unknown method {method!r}")
    if method == "auto":
        per_row = H.entries.nnz / max(H.entries.shape[0], 1)
        method = "sparse" if per_row <= SPARSE_TAPS_PER_ROW and noise_var > 0 else "dense"
    if noise_var < 0:
        raise InvalidParameterError(f"noise_var must be >= 0, got {noise_var}")
    if y.grid != H.grid:
        raise InvalidParameterError("grid mismatch between y and H")
    rhs = vec(y)
    Hs = H.entries
    if noise_var == 0 and Hs.count_nonzero() == 0:
        raise EqualizationError("channel matrix is all zero")
    if noise_var == 0:
        # scipy's diagonal fast path divides by zero instead of raising
        with warnings.catch_warnings(), np.errstate(divide="ignore", invalid="ignore"):
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            try:
                x = scipy.linalg.solve(Hs.toarray(), rhs)
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
                raise EqualizationError(f"channel matrix is singular or ill-conditioned: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise EqualizationError("direct solve produced non-finite values")
        return DDSignal(y.grid, unvec(x, y.grid))
    if method == "sparse" and noise_var > 0:
        gram = (Hs @ Hs.conj().T + noise_var * scipy.sparse.identity(Hs.shape[0], format="csr")).tocsc()
        try:
            z = scipy.sparse.linalg.splu(gram).solve(rhs)
        except RuntimeError as exc:
            raise EqualizationError(f"sparse factorization failed: {exc}") from exc
        if not np.all(np.isfinite(z)):
            raise EqualizationError("sparse solve produced non-finite values")
        return DDSignal(y.grid, unvec(Hs.conj().T @ z, y.grid))
    gram = (Hs @ Hs.conj().T).toarray()
    gram[np.diag_indices_from(gram)] += noise_var
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise EqualizationError(f"Cholesky factorization of H H^H + sigma^2 I failed: {exc}") from exc
    z = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    return DDSignal(y.grid, unvec(Hs.conj().T @ z, y.grid))
