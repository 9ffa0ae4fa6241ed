"""Input checks shared by the public functions."""

from __future__ import annotations

import numbers


def check_nest_index(instance, nest_index) -> int:
    if not isinstance(nest_index, numbers.Integral) or not 0 <= nest_index < instance.num_nests:
        raise IndexError(f"nest index {nest_index!r} out of range for {instance.num_nests} nests")
    return int(nest_index)


def check_subset(instance, subset) -> tuple[int, ...]:
    items = tuple(int(j) for j in subset)
    if len(set(items)) != len(items):
        raise ValueError(f"subset {items} contains duplicates")
    for j in items:
        if not 0 <= j < instance.num_items:
            raise IndexError(f"item index {j} out of range for {instance.num_items} items")
    return tuple(sorted(items))


def check_combination(instance, combination) -> tuple[tuple[int, ...], ...]:
    comb = tuple(combination)
    if len(comb) != instance.num_nests:
        raise ValueError(f"combination lists {len(comb)} nests, instance has {instance.num_nests}")
    return tuple(check_subset(instance, s) for s in comb)


def check_probability(name: str, value: float, *, upper_open: bool = False) -> float:
    value = float(value)
    if value < 0.0 or value > 1.0 or (upper_open and value == 1.0):
        bound = "[0, 1)" if upper_open else "[0, 1]"
        raise ValueError(f"{name} must lie in {bound}, got {value}")
    return value
