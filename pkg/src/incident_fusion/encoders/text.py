"""Character-level binary encoding of incident descriptions."""
import numpy as np

from ..errors import EncodingError

SEQUENCE_LENGTH = 200
BITS = 7


def sanitize(description: str) -> str:
    """Lower-case and replace characters outside 7-bit ASCII with spaces."""
    return "".join(ch if ord(ch) < 128 else " " for ch in description.lower())


def text_to_binary(description: str, length: int = SEQUENCE_LENGTH) -> np.ndarray:
    """
    Encode a description as a ``(length, 7)`` matrix of bits.

    The sanitised text, surrounding spaces included, is repeated until it
    reaches ``length`` characters and truncated; each character becomes its
    7-bit code, least significant bit first.

    Raises
    ------
    EncodingError
        If nothing but whitespace is left after sanitising.

    Examples
    --------
    >>> text_to_binary("a")[0].tolist()
    [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]
    """
    if not isinstance(description, str):
        raise TypeError("description must be a string")
    text = sanitize(description)
    if not text.strip():
        raise EncodingError("description is empty after sanitising")
    repeated = (text * (length // len(text) + 1))[:length]
    codes = np.frombuffer(repeated.encode("ascii"), dtype=np.uint8)
    bits = (codes[:, None] >> np.arange(BITS)) & 1
    return bits.astype(np.float64)


def batch_to_binary(descriptions, length: int = SEQUENCE_LENGTH) -> np.ndarray:
    return np.stack([text_to_binary(d, length) for d in descriptions])
