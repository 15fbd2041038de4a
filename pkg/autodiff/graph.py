"""
Модуль обратного прохода по записанному графу.
"""
import numpy as np

from autodiff.tensor import Tensor
from utils.exceptions import ShapeMismatchError


class Graph:
    """
    Топологически упорядоченная запись применений примитивов, достижимых из выхода.

    Каждый узел посещается ровно один раз; градиенты на ветвлениях складываются.
    """

    def __init__(self, output: Tensor):
        self.output = output
        self.order: list[Tensor] = self._topological_order(output)

    @staticmethod
    def _topological_order(output: Tensor) -> list[Tensor]:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    @property
    def leaves(self) -> list[Tensor]:
        return [node for node in self.order if node.is_leaf and node.requires_grad]

    def backward(self, seed: np.ndarray | None = None) -> dict[int, np.ndarray]:
        """
        Распространяет градиент от выхода к листьям.

        Args:
            seed: Градиент выхода (по умолчанию единицы)

        Returns:
            dict: Градиенты листьев по id тензора
        """
        grads: dict[int, np.ndarray] = {id(self.output): np.ones_like(self.output.data) if seed is None else seed}
        leaf_grads: dict[int, np.ndarray] = {}
        for node in reversed(self.order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node.is_leaf:
                leaf_grads[id(node)] = grad
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node.parents, node.backward_fn(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + parent_grad
                else:
                    grads[id(parent)] = parent_grad
        return leaf_grads

    def release(self) -> None:
        """
        Освобождает сохраненные для обратного прохода данные: граф израсходован.
        """
        for node in self.order:
            if not node.is_leaf:
                node.parents = ()
                node.backward_fn = None


def backward(loss: Tensor, leaves: list[Tensor] | None = None) -> list[np.ndarray] | None:
    """
    Обратный проход от скалярной функции потерь.

    Args:
        loss: Скалярный тензор
        leaves: Листья, для которых вернуть градиенты (несвязанные получают нули)

    Returns:
        list | None: Градиенты запрошенных листьев
    """
    if loss.size != 1:
        raise ShapeMismatchError(f"backward requires a scalar loss, got shape {loss.shape}")
    graph = Graph(loss)
    leaf_grads = graph.backward()
    graph.release()
    if leaves is None:
        return None
    return [leaf_grads.get(id(leaf), np.zeros_like(leaf.data)) for leaf in leaves]
