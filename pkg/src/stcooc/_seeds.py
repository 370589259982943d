"""Structured seed keys: every random stage derives its generator from
(base seed, stage tag, ...) so runs are reproducible and stages independent."""


def seed_key(seed, *tags):
    """Flat integer list usable as a numpy SeedSequence entropy."""
    if seed is None:
        seed = 0
    base = [int(v) for v in seed] if isinstance(seed, (list, tuple)) else [int(seed)]
    return base + [int(t) for t in tags]
