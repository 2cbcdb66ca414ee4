"""Zak-OTFS delay-Doppler modem simulator with point and spread pilots."""

from .channel import (
    AliasingWarning,
    ChannelTap,
    add_awgn,
    apply_dd_channel,
    apply_impairments,
    effective_channel_oracle,
    make_rng,
    trial_seed,
)
from .config import ExperimentConfig, default_config, load_config
from .core import (
    DDChannelEstimate,
    DDFilter,
    DDGridParams,
    DDSignal,
    SupportSet,
    TDSignal,
    compose_filters,
    cross_ambiguity,
    dzt,
    idzt,
    make_grid,
    oversampled_td,
    quasi_extend,
    twisted_conv_periodic,
)
from .estimation import ChannelMatrix, build_channel_matrix, mmse_equalize
from .estimators import ZakOTFSReceiver, ZakOTFSTransmitter
from .exceptions import (
    ConfigError,
    EqualizationError,
    FrameSizeError,
    InvalidParameterError,
    IQFormatError,
    SyncNotFoundError,
    ZakOTFSError,
)
from .framing import HeaderSpec, SyncResult, build_header, correct_cfo, detect_frame, estimate_cfo, zc_sequence
from .iq import IQCapture, read_iq, write_iq
from .metrics import BerReport, PaprReport, ber, evm, packet_papr, papr, qpsk_ber_theory
from .modem import (
    ModemConfig,
    PacketLayout,
    RxResult,
    cancel_pilot,
    demap_qpsk,
    map_qpsk,
    packet_layout,
    receive_packet,
    rx_demodulate,
    tx_packet,
    tx_point_pilot_packet,
    tx_spread_pilot_packet,
)
from .pilot import (
    PointPilotSpec,
    SpreadPilotSpec,
    ValidationResult,
    chirp_filter,
    point_pilot,
    spread_pilot,
    validate_spread_params,
)

__version__ = "0.1.0"

__all__ = [
    "add_awgn",
    "AliasingWarning",
    "apply_dd_channel",
    "apply_impairments",
    "ber",
    "BerReport",
    "build_channel_matrix",
    "build_header",
    "cancel_pilot",
    "ChannelMatrix",
    "ChannelTap",
    "chirp_filter",
    "compose_filters",
    "ConfigError",
    "correct_cfo",
    "cross_ambiguity",
    "DDChannelEstimate",
    "DDFilter",
    "DDGridParams",
    "DDSignal",
    "default_config",
    "demap_qpsk",
    "detect_frame",
    "dzt",
    "effective_channel_oracle",
    "EqualizationError",
    "estimate_cfo",
    "evm",
    "ExperimentConfig",
    "FrameSizeError",
    "HeaderSpec",
    "idzt",
    "InvalidParameterError",
    "IQCapture",
    "IQFormatError",
    "load_config",
    "make_grid",
    "make_rng",
    "map_qpsk",
    "mmse_equalize",
    "ModemConfig",
    "oversampled_td",
    "packet_layout",
    "packet_papr",
    "PacketLayout",
    "papr",
    "PaprReport",
    "point_pilot",
    "PointPilotSpec",
    "qpsk_ber_theory",
    "quasi_extend",
    "read_iq",
    "receive_packet",
    "rx_demodulate",
    "RxResult",
    "spread_pilot",
    "SpreadPilotSpec",
    "SupportSet",
    "SyncNotFoundError",
    "SyncResult",
    "TDSignal",
    "trial_seed",
    "twisted_conv_periodic",
    "tx_packet",
    "tx_point_pilot_packet",
    "tx_spread_pilot_packet",
    "validate_spread_params",
    "ValidationResult",
    "write_iq",
    "ZakOTFSError",
    "ZakOTFSReceiver",
    "ZakOTFSTransmitter",
    "zc_sequence",
]
