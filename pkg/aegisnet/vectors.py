"""
Hex test vectors for the crypto primitives.

One record per line: op_name, the comma-joined hex inputs and the hex
output, tab separated. Integers are encoded as 8-byte big-endian values and
curve points in the fixed-width uncompressed form of encode_point.
"""
import logging
from typing import Callable, Dict, Iterator, List, Tuple

from .crypto import (
    TOY_CURVE,
    RailFenceParams,
    SymmetricKey,
    decode_point,
    ec_point_add,
    ec_point_neg,
    ec_scalar_mul,
    encode_point,
    hop_decrypt,
    hop_encrypt,
    kdf,
    keystream,
    mac_tag,
    rail_fence_decode,
    rail_fence_encode,
    u64,
)

LOGGER = logging.getLogger(__name__)

Record = Tuple[str, List[bytes], bytes]

ZERO_KEY = bytes(16)
ONE_KEY = b"\xff" * 16
COUNTING_KEY = bytes(range(16))


def _int(data: bytes) -> int:
    return int.from_bytes(data, "big")


def _rails(rails: bytes, offset: bytes) -> RailFenceParams:
    return RailFenceParams(rails=_int(rails), offset=_int(offset))


def _point(data: bytes):
    return decode_point(TOY_CURVE, data)


OPERATIONS: Dict[str, Callable[..., bytes]] = {
    "rail_fence_encode": lambda text, rails, offset: rail_fence_encode(text, _rails(rails, offset)),
    "rail_fence_decode": lambda text, rails, offset: rail_fence_decode(text, _rails(rails, offset)),
    "kdf": lambda key, label, counter: kdf(SymmetricKey(key=key), label, _int(counter)),
    "keystream": lambda key, nonce, length: keystream(SymmetricKey(key=key), _int(nonce), _int(length)),
    "mac_tag": lambda key, message: mac_tag(SymmetricKey(key=key), message),
    "hop_encrypt": lambda key, nonce, text: hop_encrypt(SymmetricKey(key=key), _int(nonce), text),
    "hop_decrypt": lambda key, nonce, text: hop_decrypt(SymmetricKey(key=key), _int(nonce), text),
    "ec_point_add": lambda p1, p2: encode_point(
        TOY_CURVE, ec_point_add(TOY_CURVE, _point(p1), _point(p2))
    ),
    "ec_scalar_mul": lambda k, point: encode_point(
        TOY_CURVE, ec_scalar_mul(TOY_CURVE, _int(k), _point(point))
    ),
}


def _record(op_name: str, *inputs: bytes) -> Record:
    return op_name, list(inputs), OPERATIONS[op_name](*inputs)


def _toy_points() -> List[bytes]:
    multiples = [ec_scalar_mul(TOY_CURVE, k, TOY_CURVE.g) for k in range(TOY_CURVE.n)]
    return [encode_point(TOY_CURVE, point) for point in multiples]


def generate_records() -> Iterator[Record]:
    yield _record("rail_fence_encode", b"HELLOWORLD", bytes([3]), bytes([0]))
    yield _record("rail_fence_decode", b"HOLELWRDLO", bytes([3]), bytes([0]))
    for rails in range(1, 9):
        for offset in range(2 * (rails - 1) if rails > 1 else 1):
            yield _record(
                "rail_fence_encode", b"WEAREDISCOVEREDFLEEATONCE", bytes([rails]), bytes([offset])
            )
    for key in (ZERO_KEY, ONE_KEY, COUNTING_KEY):
        for counter in (0, 1, 2, 2 ** 64 - 1):
            yield _record("kdf", key, b"ratchet", u64(counter))
        for nonce in (0, 1, 2):
            yield _record("keystream", key, u64(nonce), u64(40))
        yield _record("mac_tag", key, b"abc")
        yield _record("mac_tag", key, b"abc\x00")
        yield _record("hop_encrypt", key, u64(7), b"twenty byte payload!")
    points = _toy_points()
    encoded_g = encode_point(TOY_CURVE, TOY_CURVE.g)
    for k in range(TOY_CURVE.n + 1):
        yield _record("ec_scalar_mul", u64(k), encoded_g)
    for p1 in points:
        for p2 in points:
            yield _record("ec_point_add", p1, p2)
    for point in points:
        negated = encode_point(TOY_CURVE, ec_point_neg(TOY_CURVE, decode_point(TOY_CURVE, point)))
        yield _record("ec_point_add", point, negated)


def format_record(record: Record) -> str:
    op_name, inputs, output = record
    return "\t".join([op_name, ",".join(value.hex() for value in inputs), output.hex()])


def parse_record(line: str) -> Record:
    op_name, inputs, output = line.rstrip("\n").split("\t")
    values = [bytes.fromhex(value) for value in inputs.split(",")] if inputs else []
    return op_name, values, bytes.fromhex(output)


def verify_record(line: str) -> bool:
    """Replay one record through the library"""
    op_name, inputs, output = parse_record(line)
    if op_name not in OPERATIONS:
        LOGGER.error("Unknown vector operation %s", op_name)
        return False
    return OPERATIONS[op_name](*inputs) == output


def vector_lines() -> List[str]:
    return [format_record(record) for record in generate_records()]
