"""Moving path following guidance on SO(3) for constant-speed vehicles."""

__version__ = "0.1.0"
