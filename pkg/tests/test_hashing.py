"""Fixed test vectors for the hashing primitives; these pin the synthetic
provider's determinism contract across platforms."""

import numpy as np

from iviq.hashing import fnv1a64, splitmix64, splitmix64_array, uniform01

# Reference FNV-1a 64-bit values (offset 0xcbf29ce484222325, prime 0x100000001b3),
# computed independently with the textbook byte loop.
FNV_VECTORS = {
    b"": 0xCBF29CE484222325,
    b"a": 0xAF63DC4C8601EC8C,
    b"b": 0xAF63DF4C8601F1A5,
    b"foobar": 0x85944171F73967E8,
}


def _fnv_reference(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h = ((h ^ byte) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def test_fnv1a64_known_vectors():
    for data, expected in FNV_VECTORS.items():
        assert fnv1a64(data) == expected
        assert _fnv_reference(data) == expected


def test_fnv1a64_str_hashes_utf8_bytes():
    assert fnv1a64("singing") == fnv1a64("singing".encode("utf-8"))
    assert fnv1a64("café") == _fnv_reference("café".encode("utf-8"))


def _splitmix_reference(seed: int, n: int) -> list[int]:
    mask = (1 << 64) - 1
    out = []
    x = seed & mask
    for _ in range(n):
        x = (x + 0x9E3779B97F4B1C15) & mask
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


# First outputs of Vigna's canonical splitmix64.c, produced by compiling and
# running the original C code.
SPLITMIX_VECTORS = {
    0: [15919413076801311778, 17600482215133207362, 2690400993407407114],
    42: [13015277254886124922, 3601832942120629332, 6847585343166843374],
    1234567: [4341717149739365288, 13253990223877169572, 1891278907843829859],
}


def test_splitmix64_matches_reference():
    for seed, expected in SPLITMIX_VECTORS.items():
        assert splitmix64(seed, 3) == expected
    for seed in (0, 1, 42, 2**64 - 1):
        assert splitmix64(seed, 8) == _splitmix_reference(seed, 8)


def test_vectorized_splitmix_equals_scalar():
    for seed in (0, 7, 123456789, 2**63 + 5):
        scalar = splitmix64(seed, 32)
        vectorized = splitmix64_array(seed, 32)
        assert [int(v) for v in vectorized] == scalar


def test_uniform01_range_and_precision():
    words = splitmix64_array(9, 1000)
    values = uniform01(words)
    assert np.all(values >= 0.0) and np.all(values < 1.0)
    # top-53-bit mapping: values are exact multiples of 2^-53
    assert np.all(values * 2.0**53 == np.floor(values * 2.0**53))
