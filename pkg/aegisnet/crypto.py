"""
Stateless cryptographic building blocks: keyed rail-fence transposition,
SHA-256 based kdf/keystream, truncated HMAC tags and affine elliptic-curve
arithmetic over a configurable short-Weierstrass curve.

None of this is hardened against side channels; it exists to make the
protocol executable and testable at simulator scale.
"""
import hashlib
import hmac
import logging
from functools import lru_cache
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, root_validator, validator

from .exceptions import PointNotOnCurve

LOGGER = logging.getLogger(__name__)

KEY_SIZE = 16
TAG_SIZE = 16
RATCHET_LABEL = b"ratchet"
KEYSTREAM_LABEL = b"ks"

# Either None (point at infinity) or affine (x, y)
CurvePoint = Optional[Tuple[int, int]]
INFINITY: CurvePoint = None


class RailFenceParams(BaseModel):
    rails: int = 1
    # Cyclic rotation applied to the zigzag phase before writing
    offset: int = 0

    @validator("rails")
    def check_rails(cls, rails: int) -> int:
        if rails < 1:
            raise ValueError("rails must be >= 1")
        return rails

    @root_validator(skip_on_failure=True)
    def check_offset(cls, values: Dict) -> Dict:
        rails, offset = values.get("rails"), values.get("offset")
        if offset < 0 or offset >= zigzag_period(rails):
            raise ValueError(
                f"offset {offset} out of range for {rails} rail(s)"
            )
        return values


class SymmetricKey(BaseModel):
    key: bytes
    epoch: int = 0

    @validator("key")
    def check_length(cls, key: bytes) -> bytes:
        if len(key) != KEY_SIZE:
            raise ValueError(f"key must be exactly {KEY_SIZE} bytes, got {len(key)}")
        return key

    @validator("epoch")
    def check_epoch(cls, epoch: int) -> int:
        if not 0 <= epoch < 2 ** 64:
            raise ValueError("epoch must fit in an unsigned 64-bit counter")
        return epoch

    def __repr__(self) -> str:
        return f"SymmetricKey(key=<redacted>, epoch={self.epoch})"

    __str__ = __repr__


class CurveParams(BaseModel):
    name: str = ""
    p: int
    a: int
    b: int
    g: Tuple[int, int]
    n: int

    @root_validator(skip_on_failure=True)
    def check_curve(cls, values: Dict) -> Dict:
        p, a, b = values["p"], values["a"], values["b"]
        if (4 * a ** 3 + 27 * b ** 2) % p == 0:
            raise ValueError("singular curve: 4a^3 + 27b^2 = 0 mod p")
        x, y = values["g"]
        if (y * y - (x ** 3 + a * x + b)) % p != 0:
            raise ValueError(f"generator {values['g']} is not on the curve")
        return values

    @property
    def coordinate_size(self) -> int:
        return (self.p.bit_length() + 7) // 8


# y^2 = x^3 + 2x + 2 over F_17, small enough to enumerate every point
TOY_CURVE = CurveParams(name="toy17", p=17, a=2, b=2, g=(5, 1), n=19)

SECP256K1 = CurveParams(
    name="secp256k1",
    p=2 ** 256 - 2 ** 32 - 977,
    a=0,
    b=7,
    g=(
        0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
        0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
    ),
    n=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141,
)

CURVES = {curve.name: curve for curve in (TOY_CURVE, SECP256K1)}


def get_curve(name: str) -> CurveParams:
    try:
        return CURVES[name]
    except KeyError:
        raise ValueError(f"Unknown curve {name}; choose one of {sorted(CURVES)}")


def u64(value: int) -> bytes:
    return value.to_bytes(8, "big")


def digest16(*parts: bytes) -> bytes:
    """First 16 bytes of SHA-256 over the concatenated parts"""
    return hashlib.sha256(b"".join(parts)).digest()[:KEY_SIZE]


# Rail fence


def zigzag_period(rails: int) -> int:
    return 2 * (rails - 1) if rails > 1 else 1


def zigzag_rail(index: int, rails: int, offset: int) -> int:
    if rails == 1:
        return 0
    period = zigzag_period(rails)
    phase = (index + offset) % period
    return phase if phase < rails else period - phase


@lru_cache(maxsize=1024)
def _rail_order(length: int, rails: int, offset: int) -> Tuple[int, ...]:
    """Plaintext indices in the order they are read off the rails"""
    return tuple(
        sorted(range(length), key=lambda i: (zigzag_rail(i, rails, offset), i))
    )


def rail_fence_encode(plaintext: bytes, params: RailFenceParams) -> bytes:
    order = _rail_order(len(plaintext), params.rails, params.offset)
    return bytes(plaintext[i] for i in order)


def rail_fence_decode(ciphertext: bytes, params: RailFenceParams) -> bytes:
    order = _rail_order(len(ciphertext), params.rails, params.offset)
    plain = bytearray(len(ciphertext))
    for position, index in enumerate(order):
        plain[index] = ciphertext[position]
    return bytes(plain)


def rail_fence_params_for_key(key: SymmetricKey) -> RailFenceParams:
    rails = 2 + key.key[0] % 6
    return RailFenceParams(rails=rails, offset=key.key[1] % zigzag_period(rails))


# Hashing


def kdf(key: SymmetricKey, label: bytes, counter: int) -> bytes:
    return hashlib.sha256(key.key + label + u64(counter)).digest()[:KEY_SIZE]


def keystream(key: SymmetricKey, nonce: int, length: int) -> bytes:
    if length < 0:
        raise ValueError("keystream length must be >= 0")
    label = KEYSTREAM_LABEL + u64(nonce)
    blocks = (length + KEY_SIZE - 1) // KEY_SIZE
    return b"".join(kdf(key, label, index) for index in range(blocks))[:length]


def mac_tag(key: SymmetricKey, message: bytes) -> bytes:
    return hmac.new(key.key, message, hashlib.sha256).digest()[:TAG_SIZE]


def verify_tag(key: SymmetricKey, message: bytes, tag: bytes) -> bool:
    return hmac.compare_digest(mac_tag(key, message), tag)


def xor_bytes(left: bytes, right: bytes) -> bytes:
    return bytes(a ^ b for a, b in zip(left, right))


def hop_encrypt(key: SymmetricKey, nonce: int, plaintext: bytes) -> bytes:
    """Keystream XOR followed by the key-derived rail-fence transposition"""
    masked = xor_bytes(plaintext, keystream(key, nonce, len(plaintext)))
    return rail_fence_encode(masked, rail_fence_params_for_key(key))


def hop_decrypt(key: SymmetricKey, nonce: int, ciphertext: bytes) -> bytes:
    masked = rail_fence_decode(ciphertext, rail_fence_params_for_key(key))
    return xor_bytes(masked, keystream(key, nonce, len(masked)))


# Elliptic curve


def mod_inverse(value: int, modulus: int) -> int:
    """Modular inverse by the extended Euclidean algorithm"""
    value %= modulus
    if value == 0:
        raise ZeroDivisionError("0 has no modular inverse")
    last_x, x = 1, 0
    low, high = value, modulus
    while low > 1:
        quotient = high // low
        last_x, x = x - last_x * quotient, last_x
        low, high = high - low * quotient, low
    return last_x % modulus


def is_on_curve(params: CurveParams, point: CurvePoint) -> bool:
    if point is INFINITY:
        return True
    x, y = point
    if not (0 <= x < params.p and 0 <= y < params.p):
        return False
    return (y * y - (x * x * x + params.a * x + params.b)) % params.p == 0


def _require_on_curve(params: CurveParams, *points: CurvePoint) -> None:
    for point in points:
        if not is_on_curve(params, point):
            raise PointNotOnCurve(f"{point} is not on curve {params.name}")


def ec_point_neg(params: CurveParams, point: CurvePoint) -> CurvePoint:
    if point is INFINITY:
        return INFINITY
    x, y = point
    return (x, (params.p - y) % params.p)


def _add(params: CurveParams, p1: CurvePoint, p2: CurvePoint) -> CurvePoint:
    if p1 is INFINITY:
        return p2
    if p2 is INFINITY:
        return p1
    p = params.p
    x1, y1 = p1
    x2, y2 = p2
    if x1 == x2:
        if (y1 + y2) % p == 0:
            return INFINITY
        slope = (3 * x1 * x1 + params.a) * mod_inverse(2 * y1, p) % p
    else:
        slope = (y2 - y1) * mod_inverse(x2 - x1, p) % p
    x3 = (slope * slope - x1 - x2) % p
    y3 = (slope * (x1 - x3) - y1) % p
    return (x3, y3)


def ec_point_add(params: CurveParams, p1: CurvePoint, p2: CurvePoint) -> CurvePoint:
    _require_on_curve(params, p1, p2)
    return _add(params, p1, p2)


def ec_scalar_mul(params: CurveParams, k: int, point: CurvePoint) -> CurvePoint:
    """k-fold addition of point by double-and-add"""
    if k < 0:
        raise ValueError("scalar must be non-negative")
    _require_on_curve(params, point)
    result, addend = INFINITY, point
    while k:
        if k & 1:
            result = _add(params, result, addend)
        addend = _add(params, addend, addend)
        k >>= 1
    return result


def encode_point(params: CurveParams, point: CurvePoint) -> bytes:
    """Fixed-width uncompressed encoding; infinity encodes as all zeros"""
    size = params.coordinate_size
    if point is INFINITY:
        return bytes(1 + 2 * size)
    x, y = point
    return b"\x04" + x.to_bytes(size, "big") + y.to_bytes(size, "big")


def decode_point(params: CurveParams, data: bytes) -> CurvePoint:
    size = params.coordinate_size
    if len(data) != 1 + 2 * size:
        raise PointNotOnCurve(f"Encoded point must be {1 + 2 * size} bytes")
    if data == bytes(len(data)):
        return INFINITY
    if data[0] != 4:
        raise PointNotOnCurve("Unsupported point encoding prefix")
    point = (
        int.from_bytes(data[1 : 1 + size], "big"),
        int.from_bytes(data[1 + size :], "big"),
    )
    _require_on_curve(params, point)
    return point
