"""Persistent environments built from ``Empty``, ``Bind`` and ``Pair``.

Every interpreter in the package uses the same structure: lambda scopes,
muJava contexts and the muJava heap.  Lookup is right-biased, so a binding
in the right half of a ``Pair`` shadows anything on the left.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Generic, Iterator, TypeVar

K = TypeVar("K")
V = TypeVar("V")
W = TypeVar("W")


class Environment(Generic[K, V]):
    __slots__ = ()


@dataclass(frozen=True)
class Empty(Environment[K, V]):
    pass


@dataclass(frozen=True)
class Bind(Environment[K, V]):
    key: K
    value: V


@dataclass(frozen=True)
class Pair(Environment[K, V]):
    left: Environment[K, V]
    right: Environment[K, V]


EMPTY: Empty = Empty()

_MISSING = object()


def _bindings_right_to_left(env: Environment) -> Iterator[Bind]:
    # Iterative walk; heaps are long left-leaning Pair chains.
    stack = [env]
    while stack:
        node = stack.pop()
        if isinstance(node, Bind):
            yield node
        elif isinstance(node, Pair):
            stack.append(node.left)
            stack.append(node.right)


def lookup(key: K, env: Environment[K, V], default: V) -> V:
    """Return the rightmost value bound to ``key``, or ``default``.

    This keeps the sentinel scheme of the original definition: when the right
    half of a ``Pair`` yields a value equal to ``default`` the search falls
    back to the left half.  A binding whose value equals ``default`` is
    therefore indistinguishable from absence (see :func:`find`).
    """
    if isinstance(env, Bind):
        return env.value if env.key == key else default
    for node in _bindings_right_to_left(env):
        if node.key == key and not node.value == default:
            return node.value
    return default


def find(key: K, env: Environment[K, V], default: Any = _MISSING) -> Any:
    """Sentinel-free lookup: the rightmost binding wins whatever its value.

    Raises ``KeyError`` when the key is absent and no default was given.
    """
    for node in _bindings_right_to_left(env):
        if node.key == key:
            return node.value
    if default is _MISSING:
        raise KeyError(key)
    return default


def contains(key: K, env: Environment[K, V]) -> bool:
    return any(node.key == key for node in _bindings_right_to_left(env))


def map_env(fun: Callable[[V], W], env: Environment[K, V]) -> Environment[K, W]:
    """Apply ``fun`` to every value, preserving the tree shape and keys."""
    if isinstance(env, Bind):
        return Bind(env.key, fun(env.value))
    if isinstance(env, Pair):
        return Pair(map_env(fun, env.left), map_env(fun, env.right))
    return env


def from_pairs(items) -> Environment:
    """Build a left-to-right chain so later items shadow earlier ones."""
    env: Environment = EMPTY
    for key, value in items:
        env = Bind(key, value) if env == EMPTY else Pair(env, Bind(key, value))
    return env


def bindings(env: Environment) -> list[tuple[Any, Any]]:
    """All bindings in left-to-right order, shadowed ones included."""
    out = [(b.key, b.value) for b in _bindings_right_to_left(env)]
    out.reverse()
    return out


def visible(env: Environment) -> dict:
    """The effective key -> value map after right-biased shadowing."""
    return dict(bindings(env))
