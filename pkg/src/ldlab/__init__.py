"""ldlab: numerical bounds for the liquid drop model with a neutralizing background."""

__version__ = "0.1.0"
