"""scikit-learn style wrappers around the packet transmitter and receiver.

Rows of ``X`` are packets: bit rows for the transmitter, complex sample
rows for the receiver.  Hyperparameters live in ``__init__`` so
``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_bits, check_complex_array
from .core import DDGridParams, TDSignal
from .framing import HeaderSpec
from .modem import ModemConfig, bits_per_packet, packet_layout, receive_packet, tx_packet

__all__ = ["ZakOTFSTransmitter", "ZakOTFSReceiver"]


class _ModemParams(BaseEstimator):
    def __init__(self, M=32, N=48, nu_p=30e3, pilot_mode="point", u=5, pilot_to_data_db=0.0, guard=16):
        self.M = M
        self.N = N
        self.nu_p = nu_p
        self.pilot_mode = pilot_mode
        self.u = u
        self.pilot_to_data_db = pilot_to_data_db
        self.guard = guard

    def _build(self) -> ModemConfig:
        return ModemConfig(
            DDGridParams(self.M, self.N, self.nu_p),
            pilot_mode=self.pilot_mode,
            u=self.u,
            pilot_to_data_db=self.pilot_to_data_db,
            header=HeaderSpec(),
            guard=self.guard,
        )

    def fit(self, X=None, y=None):
        self.config_ = self._build()
        self.n_bits_ = bits_per_packet(self.config_)
        self.layout_ = packet_layout(self.config_)
        return self


class ZakOTFSTransmitter(TransformerMixin, _ModemParams):
    """``transform``: ``(n_packets, 2*M*N)`` bits -> ``(n_packets, L)`` complex samples."""

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = np.atleast_2d(np.asarray(X))
        rows = [tx_packet(self.config_, check_bits(row, length=self.n_bits_))[0].samples for row in X]
        return np.vstack(rows)


class ZakOTFSReceiver(_ModemParams):
    """``predict``: packet sample rows -> decided bit rows.

    With ``sync=True`` each row is searched for the header and CFO-corrected;
    otherwise the packet must start at sample 0.
    """

    def __init__(self, M=32, N=48, nu_p=30e3, pilot_mode="point", u=5, pilot_to_data_db=0.0, guard=16,
                 noise_var=0.0, sync=False, threshold=0.6):
        super().__init__(M, N, nu_p, pilot_mode, u, pilot_to_data_db, guard)
        self.noise_var = noise_var
        self.sync = sync
        self.threshold = threshold

    def predict(self, X):
        check_is_fitted(self, "config_")
        X = np.atleast_2d(np.asarray(X))
        out = np.empty((X.shape[0], self.n_bits_), dtype=np.uint8)
        for i, row in enumerate(X):
            td = TDSignal(check_complex_array(row, ndim=1, name="X"), self.config_.grid.B, self.layout_.payload_start)
            result, _ = receive_packet(td, self.layout_, self.config_, self.noise_var, sync=self.sync, threshold=self.threshold)
            out[i] = result.bits
        return out

    def score(self, X, y):
        """Fraction of correctly decided bits."""
        y = np.atleast_2d(np.asarray(y))
        return float(np.mean(self.predict(X) == y))
