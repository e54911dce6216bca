"""Structure-preserving LaTeX-subset to accessible HTML conversion."""

from .corpus import CONVERTER_VERSION

__version__ = CONVERTER_VERSION
