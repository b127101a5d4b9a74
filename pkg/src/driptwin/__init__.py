"""driptwin: a closed-loop digital twin of a three-pot smart drip-irrigation rig."""

from .core import Mode, Notification, NotificationKind, PotId, RelayState, SensorSnapshot, parse_mode

__version__ = "0.1.0"

__all__ = [
    "Mode",
    "Notification",
    "NotificationKind",
    "PotId",
    "RelayState",
    "SensorSnapshot",
    "parse_mode",
    "__version__",
]
