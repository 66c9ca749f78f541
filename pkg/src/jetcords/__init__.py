"""jetcords: exact engine for jet-valued gauge structures on foliated charts."""

__version__ = "0.1.0"
