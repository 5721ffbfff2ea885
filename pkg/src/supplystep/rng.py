"""SplitMix64, the one PRNG used for synthetic data and random node sampling.

The generator is specified bit-for-bit so that seeded outputs are portable:

    state = (state + 0x9E3779B97F4A7C15) mod 2**64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    output z ^ (z >> 31)

``uniform()`` maps the top 53 bits to ``[0, 1)`` and ``below(k)`` is
``floor(uniform() * k)``. Nothing downstream uses transcendental functions,
so the synthetic data only depends on IEEE-754 basic arithmetic.
"""

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, k: int) -> int:
        if k <= 0:
            raise ValueError("k must be positive")
        return min(int(self.uniform() * k), k - 1)

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]``."""
        return lo + self.below(hi - lo + 1)
