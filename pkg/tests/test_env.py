import itertools

import pytest
from hypothesis import given, strategies as st

from ebgkit.env import (
    EMPTY, Bind, Empty, Pair, bindings, contains, find, from_pairs, lookup, map_env, visible,
)


def test_lookup_in_empty_returns_default():
    assert lookup("x", EMPTY, 0) == 0


def test_right_binding_shadows_left():
    assert lookup("x", Pair(Bind("x", 1), Bind("x", 2)), 0) == 2


def test_lookup_finds_key_on_either_side():
    env = Pair(Bind("x", 1), Bind("y", 7))
    assert lookup("y", env, 0) == 7
    assert lookup("x", env, 0) == 1


def _flat_oracle(key, items, default):
    # items left to right; the last match wins
    found = default
    for k, v in items:
        if k == key:
            found = v
    return found


def _two_binding_trees():
    leaves = [Bind(k, v) for k in "xy" for v in (1, 2)]
    shapes = [
        lambda a, b: Pair(a, b),
        lambda a, b: Pair(Pair(EMPTY, a), b),
        lambda a, b: Pair(a, Pair(b, EMPTY)),
        lambda a, b: Pair(Pair(a, EMPTY), Pair(EMPTY, b)),
    ]
    for a, b in itertools.product(leaves, repeat=2):
        for shape in shapes:
            yield shape(a, b), [(a.key, a.value), (b.key, b.value)]


@pytest.mark.parametrize("key", ["x", "y", "z"])
def test_lookup_against_flat_oracle_on_all_two_binding_trees(key):
    for env, items in _two_binding_trees():
        assert lookup(key, env, 0) == _flat_oracle(key, items, 0)
        assert find(key, env, 0) == _flat_oracle(key, items, 0)


def test_lookup_falls_back_past_a_default_valued_binding():
    # the sentinel scheme cannot tell a stored default from absence
    env = Pair(Bind("x", 5), Bind("x", 0))
    assert lookup("x", env, 0) == 5
    assert find("x", env) == 0


def test_find_without_default_raises():
    with pytest.raises(KeyError):
        find("missing", Bind("x", 1))
    assert not contains("missing", Bind("x", 1))
    assert contains("x", Pair(EMPTY, Bind("x", 1)))


def test_map_env_cases():
    assert map_env(lambda v: v + 1, EMPTY) == Empty()
    assert map_env(lambda v: v + 1, Bind("k", 1)) == Bind("k", 2)
    env = Pair(Bind("a", 1), Pair(EMPTY, Bind("b", 2)))
    assert map_env(lambda v: v, env) == env


def test_deep_left_chain_does_not_recurse():
    env = from_pairs((i, i * i) for i in range(50_000))
    assert lookup(3, env, -1) == 9
    assert find(49_999, env) == 49_999**2


keys = st.sampled_from("abcd")
envs = st.recursive(
    st.just(EMPTY) | st.builds(Bind, keys, st.integers(1, 9)),
    lambda inner: st.builds(Pair, inner, inner),
    max_leaves=12,
)


@given(envs, keys)
def test_lookup_matches_visible_map(env, key):
    # values are never the default, so sentinel and sentinel-free lookups agree
    assert lookup(key, env, 0) == visible(env).get(key, 0)
    assert find(key, env, 0) == visible(env).get(key, 0)


@given(envs, envs, keys)
def test_pair_is_right_biased(left, right, key):
    expected = visible(right).get(key, visible(left).get(key, 0))
    assert lookup(key, Pair(left, right), 0) == expected


@given(envs)
def test_map_env_preserves_keys_and_maps_values(env):
    mapped = map_env(lambda v: v * 10, env)
    assert [k for k, _ in bindings(mapped)] == [k for k, _ in bindings(env)]
    assert visible(mapped) == {k: v * 10 for k, v in visible(env).items()}
