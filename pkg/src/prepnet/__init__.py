"""PrepNet: adversarial image homogenization for multi-source medical
imaging, with a downstream binary task classifier and a cross-dataset
evaluation harness."""

__version__ = "0.1.0"

from . import errors  # noqa: F401
