from . import layers, ops, optim
from .tensor import Tensor, as_tensor

__all__ = ["Tensor", "as_tensor", "ops", "layers", "optim"]
