"""Scene-aware character motion synthesis in dynamic point-cloud scenes."""

__version__ = "0.1.0"
