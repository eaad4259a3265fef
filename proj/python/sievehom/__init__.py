"""Python bindings for the sieve capacity / homogenization core."""

from sievehom._core import *  # noqa: F401,F403
from sievehom._core import __doc__ as _core_doc

__doc__ = _core_doc
