import hashlib
import hmac
import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.random import default_rng
from pydantic import ValidationError

import aegisnet.crypto as crypto
from aegisnet.exceptions import PointNotOnCurve

TOY = crypto.TOY_CURVE
ZERO = crypto.SymmetricKey(key=bytes(16))
ONES = crypto.SymmetricKey(key=b"\xff" * 16)


def valid_params():
    for rails in range(1, 9):
        for offset in range(crypto.zigzag_period(rails)):
            yield crypto.RailFenceParams(rails=rails, offset=offset)


RAIL_FENCE_TESTS = {
    "three_rails": (b"HELLOWORLD", 3, 0, b"HOLELWRDLO"),
    "one_rail_identity": (b"HELLOWORLD", 1, 0, b"HELLOWORLD"),
    "empty": (b"", 4, 2, b""),
    "two_rails": (b"abcdef", 2, 0, b"acebdf"),
    "two_rails_offset": (b"abcdef", 2, 1, b"bdface"),
}


@pytest.mark.parametrize(
    "plaintext,rails,offset,expected",
    RAIL_FENCE_TESTS.values(),
    ids=list(RAIL_FENCE_TESTS.keys()),
)
def test_rail_fence_known_values(plaintext, rails, offset, expected):
    params = crypto.RailFenceParams(rails=rails, offset=offset)
    assert crypto.rail_fence_encode(plaintext, params) == expected
    assert crypto.rail_fence_decode(expected, params) == plaintext


@pytest.mark.parametrize(
    "rails,offset",
    [(0, 0), (3, 4), (1, 1), (2, -1)],
    ids=["no_rails", "offset_past_period", "offset_one_rail", "negative"],
)
def test_rail_fence_params_rejected(rails, offset):
    with pytest.raises(ValidationError):
        crypto.RailFenceParams(rails=rails, offset=offset)


def test_rail_fence_exhaustive_round_trip():
    rng = default_rng(1234)
    cases = 0
    for length in range(65):
        for params in valid_params():
            message = rng.bytes(length)
            encoded = crypto.rail_fence_encode(message, params)
            assert len(encoded) == length
            assert crypto.rail_fence_decode(encoded, params) == message
            cases += 1
    assert cases >= 1900
    # Second pass with fresh bytes brings the sweep past ten thousand cases
    for _ in range(5):
        for length in range(65):
            for params in valid_params():
                message = rng.bytes(length)
                assert crypto.rail_fence_decode(crypto.rail_fence_encode(message, params), params) == message
                cases += 1
    assert cases >= 10_000


@settings(max_examples=200)
@given(st.binary(max_size=256), st.integers(1, 8), st.data())
def test_rail_fence_is_a_permutation(message, rails, data):
    offset = data.draw(st.integers(0, crypto.zigzag_period(rails) - 1))
    params = crypto.RailFenceParams(rails=rails, offset=offset)
    encoded = crypto.rail_fence_encode(message, params)
    assert sorted(encoded) == sorted(message)
    assert crypto.rail_fence_decode(encoded, params) == message


def test_rail_fence_params_for_key_in_range():
    for first, second in itertools.product(range(256), repeat=2):
        key = crypto.SymmetricKey(key=bytes([first, second]) + bytes(14))
        params = crypto.rail_fence_params_for_key(key)
        assert params.rails == 2 + first % 6
        assert params.offset == second % (2 * (params.rails - 1))


def test_symmetric_key_length_enforced():
    with pytest.raises(ValidationError):
        crypto.SymmetricKey(key=bytes(15))
    assert "00" * 16 not in repr(ZERO)


def test_kdf_matches_reference_sha256():
    expected = hashlib.sha256(bytes(16) + b"ratchet" + (1).to_bytes(8, "big")).digest()[:16]
    assert crypto.kdf(ZERO, b"ratchet", 1) == expected
    assert crypto.kdf(ZERO, b"ratchet", 1) == crypto.kdf(ZERO, b"ratchet", 1)
    assert crypto.kdf(ZERO, b"ratchet", 1) != ZERO.key
    assert crypto.kdf(ZERO, b"ratchet", 1) != crypto.kdf(ZERO, b"ratchet", 2)


def test_keystream():
    assert crypto.keystream(ZERO, 5, 0) == b""
    assert crypto.keystream(ZERO, 5, 16) == crypto.keystream(ZERO, 5, 32)[:16]
    assert crypto.keystream(ZERO, 1, 16) != crypto.keystream(ZERO, 2, 16)
    label = b"ks" + (3).to_bytes(8, "big")
    first_block = hashlib.sha256(bytes(16) + label + (0).to_bytes(8, "big")).digest()[:16]
    assert crypto.keystream(ZERO, 3, 16) == first_block
    with pytest.raises(ValueError):
        crypto.keystream(ZERO, 0, -1)


@settings(max_examples=100)
@given(
    st.binary(min_size=16, max_size=16),
    st.integers(0, 2 ** 64 - 1),
    st.integers(0, 100),
    st.integers(0, 100),
)
def test_keystream_prefix_property(key, nonce, short, extra):
    key = crypto.SymmetricKey(key=key)
    assert crypto.keystream(key, nonce, short + extra)[:short] == crypto.keystream(key, nonce, short)


def test_mac_tag_matches_reference_hmac():
    reference = hmac.new(bytes(16), b"abc", hashlib.sha256).digest()[:16]
    assert crypto.mac_tag(ZERO, b"abc") == reference
    assert crypto.mac_tag(ZERO, b"abc") != crypto.mac_tag(ZERO, b"abc\x00")
    assert crypto.mac_tag(ZERO, b"abc") != crypto.mac_tag(ONES, b"abc")
    assert crypto.verify_tag(ZERO, b"abc", reference)
    assert not crypto.verify_tag(ZERO, b"abd", reference)
    assert not crypto.verify_tag(ZERO, b"abc", reference[:8])


@settings(max_examples=100)
@given(st.binary(min_size=16, max_size=16), st.integers(0, 2 ** 32), st.binary(max_size=64))
def test_hop_encryption_round_trip(key, nonce, plaintext):
    key = crypto.SymmetricKey(key=key)
    ciphertext = crypto.hop_encrypt(key, nonce, plaintext)
    assert len(ciphertext) == len(plaintext)
    assert crypto.hop_decrypt(key, nonce, ciphertext) == plaintext


def test_hop_encryption_depends_on_key():
    plaintext = b"twenty byte payload!"
    assert crypto.hop_encrypt(ZERO, 0, plaintext) != crypto.hop_encrypt(ONES, 0, plaintext)
    assert crypto.hop_encrypt(ZERO, 0, plaintext) != crypto.hop_encrypt(ZERO, 1, plaintext)


# Independent oracle for the toy curve: every point by enumeration and the
# group law written out with Python's own modular inverse


def toy_points():
    points = [None]
    for x in range(TOY.p):
        for y in range(TOY.p):
            if (y * y - (x ** 3 + TOY.a * x + TOY.b)) % TOY.p == 0:
                points.append((x, y))
    return points


def oracle_add(p1, p2):
    p = TOY.p
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    if p1[0] == p2[0] and (p1[1] + p2[1]) % p == 0:
        return None
    if p1 == p2:
        slope = (3 * p1[0] ** 2 + TOY.a) * pow(2 * p1[1], -1, p) % p
    else:
        slope = (p2[1] - p1[1]) * pow(p2[0] - p1[0], -1, p) % p
    x3 = (slope ** 2 - p1[0] - p2[0]) % p
    return (x3, (slope * (p1[0] - x3) - p1[1]) % p)


def oracle_mul(k, point):
    result = None
    for _ in range(k):
        result = oracle_add(result, point)
    return result


POINTS = toy_points()


def test_toy_curve_has_prime_order_group():
    assert len(POINTS) == TOY.n == 19
    assert crypto.ec_point_add(TOY, TOY.g, TOY.g) == (6, 3)


def test_point_addition_matches_oracle_for_every_pair():
    for p1, p2 in itertools.product(POINTS, repeat=2):
        assert crypto.ec_point_add(TOY, p1, p2) == oracle_add(p1, p2)


def test_scalar_multiples_match_repeated_addition():
    for point in POINTS:
        for k in range(20):
            assert crypto.ec_scalar_mul(TOY, k, point) == oracle_mul(k, point)
    assert crypto.ec_scalar_mul(TOY, 19, TOY.g) is crypto.INFINITY
    assert crypto.ec_scalar_mul(TOY, 0, TOY.g) is crypto.INFINITY


def test_group_axioms_exhaustive():
    add = lambda a, b: crypto.ec_point_add(TOY, a, b)  # noqa: E731
    for a in POINTS:
        assert add(a, crypto.INFINITY) == a
        assert add(a, crypto.ec_point_neg(TOY, a)) is crypto.INFINITY
        for b in POINTS:
            assert add(a, b) == add(b, a)
            for c in POINTS:
                assert add(add(a, b), c) == add(a, add(b, c))


@pytest.mark.parametrize("curve", [crypto.TOY_CURVE, crypto.SECP256K1], ids=["toy17", "secp256k1"])
def test_generator_order(curve):
    assert crypto.is_on_curve(curve, curve.g)
    assert crypto.ec_scalar_mul(curve, curve.n, curve.g) is crypto.INFINITY


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2 ** 64), st.integers(1, 2 ** 64))
def test_diffie_hellman_consistency(a, b):
    for curve in (crypto.TOY_CURVE, crypto.SECP256K1):
        shared = crypto.ec_scalar_mul(curve, a, crypto.ec_scalar_mul(curve, b, curve.g))
        assert shared == crypto.ec_scalar_mul(curve, (a * b) % curve.n, curve.g)


def test_off_curve_points_rejected():
    with pytest.raises(PointNotOnCurve):
        crypto.ec_point_add(TOY, (5, 2), TOY.g)
    with pytest.raises(PointNotOnCurve):
        crypto.ec_scalar_mul(TOY, 3, (0, 0))
    with pytest.raises(ValueError):
        crypto.ec_scalar_mul(TOY, -1, TOY.g)


def test_point_encoding():
    for point in POINTS:
        encoded = crypto.encode_point(TOY, point)
        assert len(encoded) == 1 + 2 * TOY.coordinate_size
        assert crypto.decode_point(TOY, encoded) == point
    assert crypto.encode_point(TOY, crypto.INFINITY) == bytes(3)
    with pytest.raises(PointNotOnCurve):
        crypto.decode_point(TOY, b"\x04\x05\x02")


def test_curve_params_validation():
    with pytest.raises(ValidationError):
        crypto.CurveParams(name="singular", p=17, a=0, b=0, g=(0, 0), n=17)
    with pytest.raises(ValueError):
        crypto.get_curve("p-unknown")


def test_mod_inverse():
    for value in range(1, 17):
        assert value * crypto.mod_inverse(value, 17) % 17 == 1
    with pytest.raises(ZeroDivisionError):
        crypto.mod_inverse(34, 17)
