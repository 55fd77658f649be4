"""Parameter containers, the module base class, and checkpoint files.

Modules register parameters and child modules simply by attribute assignment,
so ``self.w = Parameter(...)`` inside ``__init__`` is all a layer needs.
Iteration order everywhere is registration order (own parameters first, then
children depth-first), which makes optimizer state and checkpoints
deterministic.

Checkpoint files are name-keyed so they survive refactors that reorder
registration: header ``ABCK`` + version byte, then per parameter the dotted
name, shape, and raw little-endian float64 data.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from abaf.errors import CheckpointError

_CKPT_MAGIC = b"ABCK"
_CKPT_VERSION = 1


class Parameter:
    """A trainable array with its gradient accumulator."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def size(self) -> int:
        return self.value.size

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


class Module:
    """Base class: attribute assignment registers parameters and children."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name: str, value) -> None:
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        elif name in self._buffers:
            self._buffers[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        """Track non-trainable state (e.g. running stats) for checkpointing."""
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    def named_buffers(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        out = [(prefix + name, b) for name, b in self._buffers.items()]
        for cname, child in self._children.items():
            out.extend(child.named_buffers(f"{prefix}{cname}."))
        return out

    def parameters(self) -> list[Parameter]:
        out = list(self._params.values())
        for child in self._children.values():
            out.extend(child.parameters())
        return out

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Parameter]]:
        out = [(prefix + name, p) for name, p in self._params.items()]
        for cname, child in self._children.items():
            out.extend(child.named_parameters(f"{prefix}{cname}."))
        return out

    def train(self, mode: bool = True) -> "Module":
        object.__setattr__(self, "training", mode)
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


class ModuleList(Module):
    """An indexable sequence of child modules."""

    def __init__(self, modules=()):
        super().__init__()
        self._items: list[Module] = []
        for m in modules:
            self.append(m)

    def append(self, module: Module) -> None:
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> Module:
        return self._items[i]


def count_params(module: Module) -> int:
    return sum(p.size for p in module.parameters())


def _entries(module: Module) -> list[tuple[str, np.ndarray]]:
    # Buffers ride along under a reserved prefix so names cannot collide.
    out: list[tuple[str, np.ndarray]] = [
        (name, p.value) for name, p in module.named_parameters()
    ]
    out.extend((f"buffer:{name}", b) for name, b in module.named_buffers())
    return out


def save_checkpoint(module: Module, path: str | Path) -> None:
    entries = _entries(module)
    parts = [_CKPT_MAGIC, struct.pack("<BI", _CKPT_VERSION, len(entries))]
    for name, value in entries:
        encoded = name.encode("utf-8")
        arr = np.ascontiguousarray(value, dtype=np.float64)
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(module: Module, path: str | Path) -> None:
    """Restore parameters and buffers by name; any mismatch is an error."""
    raw = Path(path).read_bytes()
    if raw[:4] != _CKPT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, count = struct.unpack_from("<BI", raw, 4)
    if version != _CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    offset = 9
    stored: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        name = raw[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        n_items = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f8", count=n_items, offset=offset)
        offset += 8 * n_items
        stored[name] = arr.reshape(shape)

    own = dict(_entries(module))
    missing = sorted(set(own) - set(stored))
    extra = sorted(set(stored) - set(own))
    if missing or extra:
        raise CheckpointError(
            f"{path}: stored names do not match model "
            f"(missing {missing[:3]}, unexpected {extra[:3]})"
        )
    for name, target in own.items():
        if stored[name].shape != target.shape:
            raise CheckpointError(
                f"{path}: shape mismatch for {name}: "
                f"{stored[name].shape} vs {target.shape}"
            )
        target[...] = stored[name]
