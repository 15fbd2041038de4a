"""
Модуль обратного автоматического дифференцирования над плотными тензорами.
"""
from autodiff.tensor import Tensor, as_tensor, is_grad_enabled, no_grad, strict_finite
from autodiff.graph import Graph, backward
from autodiff import functional
from autodiff.gradcheck import GradCheckReport, grad_check
