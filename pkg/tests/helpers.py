"""Shared helpers for the test suite."""
import itertools


def S(*names):
    return frozenset(names)


def all_valuations(atoms):
    return [
        frozenset(c) for n in range(len(atoms) + 1) for c in itertools.combinations(atoms, n)
    ]


def all_traces(atoms, max_len):
    """Every non-empty trace over 2^atoms up to max_len, deterministic order."""
    vals = all_valuations(atoms)
    for length in range(1, max_len + 1):
        for combo in itertools.product(vals, repeat=length):
            yield list(combo)


def sequence_formula(colors, atoms):
    """Strictly ordered touch task: visit colors in order, touching nothing else
    meanwhile, and never two target colors at once."""
    idle = " & ".join(f"!{a}" for a in atoms)
    text = None
    for color in reversed(colors):
        others = " & ".join(f"!{a}" for a in atoms if a != color)
        stage = f"({color} & {others})"
        if text is None:
            text = f"({idle}) U {stage}"
        else:
            text = f"({idle}) U ({stage} & X ({text}))"
    return text


def nested_reach_formula(regions):
    """Ordered reachability: eventually r1, strictly later r2, and so on."""
    text = f"F {regions[-1]}"
    for region in reversed(regions[:-1]):
        text = f"F ({region} & X {text})"
    return text
