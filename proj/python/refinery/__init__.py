"""Python surface of the refinement engine's core operations."""

from ._refinery import *  # noqa: F401,F403
