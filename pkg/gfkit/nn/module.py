"""
This module contains the base of every learned component. A :class:`Module`
owns :class:`Parameter` tensors and child modules as plain attributes; the
order of assignment in ``__init__`` defines the parameter order used by
checkpoints and parameter counting.
"""

from abc import ABC, abstractmethod
import logging
from typing import Any, Dict, Iterable, Iterator, List, Tuple

import numpy as np

from gfkit.autodiff.tensor import Tensor
from gfkit.exceptions import CheckpointError


class Parameter(Tensor):
    """
    Leaf tensor which always requires a gradient.
    """

    def __init__(self, data: Any) -> None:
        super().__init__(data, requires_grad=True)


class Module(ABC):
    """
    Abstract class which describes the bare minimum of a learned component.

    Example usage:

    .. code-block:: python

        >>> from gfkit.nn.module import Module, Parameter
        >>>
        >>>
        >>> class Scale(Module):
        >>>     def __init__(self):
        >>>         self.factor = Parameter([2.0])
        >>>
        >>>     def forward(self, x):
        >>>         return x * self.factor
        >>>
        >>> [name for name, _ in Scale().named_parameters()]
        ['factor']
    """

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(parameters={self.num_parameters()})"

    @abstractmethod
    def forward(self, *args: Any, **kwargs: Any) -> Any:
        """
        Compute the output of the module.
        """

    def children(self) -> Iterator[Tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        """
        Yield every parameter with its dotted path, depth first in the order
        the attributes were assigned.
        """

        for name, value in vars(self).items():
            path = f"{prefix}{name}"

            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix=f"{path}.")

    def parameters(self) -> List[Parameter]:
        return [parameter for _, parameter in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(parameter.size for parameter in self.parameters())

    def zero_grad(self) -> None:
        for parameter in self.parameters():
            parameter.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        Copy the given arrays into the parameters of the module.

        :param state: Named arrays, as returned by :func:`state_dict`
        :type state: Dict[str, np.ndarray]

        :raises: ``CheckpointError`` if names or shapes do not match
        """

        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))

        if missing or unexpected:
            raise CheckpointError(
                f"State does not match the module: missing {missing}, "
                f"unexpected {unexpected}"
            )

        for name, parameter in own.items():
            value = np.asarray(state[name], dtype=np.float64)

            if value.shape != parameter.shape:
                raise CheckpointError(
                    f'Parameter "{name}" has shape {parameter.shape}, '
                    f"the state holds {value.shape}"
                )

            parameter.data = np.ascontiguousarray(value).copy()
            parameter.zero_grad()

        logging.debug("Loaded %d parameters into %r", len(own), self)


class ModuleList(Module):
    """
    Ordered container of modules, registered as ``0``, ``1``, ...
    """

    def __init__(self, modules: Iterable[Module] = ()) -> None:
        self._count = 0

        for module in modules:
            self.append(module)

    def append(self, module: Module) -> None:
        setattr(self, str(self._count), module)
        self._count += 1

    def __len__(self) -> int:
        return self._count

    def __iter__(self) -> Iterator[Module]:
        for index in range(self._count):
            yield getattr(self, str(index))

    def __getitem__(self, index: int) -> Module:
        if not -self._count <= index < self._count:
            raise IndexError(index)

        return getattr(self, str(index % self._count))

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError("ModuleList is a container and has no forward")
