"""Massive-MIMO full-duplex decode-and-forward relay simulator and power allocator."""
from .channel import ChannelSet, SystemConfig, apply_tx_impairment, draw_channels, snr_relay_db
from .filters import FilterSet, Mode, SingularRealization, build_filters
from .kernels import BACKEND

__all__ = [
    "BACKEND",
    "ChannelSet",
    "FilterSet",
    "Mode",
    "SingularRealization",
    "SystemConfig",
    "apply_tx_impairment",
    "build_filters",
    "draw_channels",
    "snr_relay_db",
]
__version__ = "0.1.0"
