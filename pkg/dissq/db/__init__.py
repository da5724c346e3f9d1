"""
Run registry stored in TinyDB.
"""

from .init import get_db

__all__ = ["get_db"]
