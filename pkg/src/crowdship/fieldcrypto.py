"""Field-level encryption at rest and keyed blind indexes.

Sensitive columns (person names, emails, phone numbers) are stored as
AES-256-GCM blobs with a fresh random nonce per encryption. Because the
ciphertext of an email is not equality-searchable, lookup fields keep a
companion blind index: an HMAC-SHA-256 digest of the normalized plaintext
under a key derived from the field key. Equal plaintexts map to equal
digests; without the key the digest reveals nothing.

Blob layout: 1-byte version || 1-byte key-id length || key-id ascii ||
12-byte nonce || ciphertext+tag.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import os

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

_VERSION = 1
_NONCE_LEN = 12


class FieldCryptoError(Exception):
    pass


class AuthenticationFailure(FieldCryptoError):
    """Ciphertext failed AEAD authentication (tampered or wrong key)."""


class BadKey(FieldCryptoError):
    pass


def _derive(material: bytes, label: bytes) -> bytes:
    # HKDF-like expansion; one block of SHA-256 output is exactly 32 bytes.
    return hmac.new(material, b"crowdship:" + label, hashlib.sha256).digest()


class FieldCipher:
    """Encrypts/decrypts individual field values under a configured key."""

    def __init__(self, key_material: str | bytes, key_id: str = "k1"):
        if not key_material:
            raise BadKey("field encryption key must be configured")
        if isinstance(key_material, str):
            key_material = key_material.encode()
        if len(key_id) > 255 or not key_id.isascii():
            raise BadKey("key_id must be short ascii")
        self.key_id = key_id
        self._aes_key = _derive(key_material, b"field-encryption")
        self._index_key = _derive(key_material, b"blind-index")
        self._aead = AESGCM(self._aes_key)

    def encrypt(self, plaintext: bytes) -> bytes:
        nonce = os.urandom(_NONCE_LEN)
        ct = self._aead.encrypt(nonce, plaintext, None)
        kid = self.key_id.encode()
        return bytes([_VERSION, len(kid)]) + kid + nonce + ct

    def decrypt(self, blob: bytes) -> bytes:
        if len(blob) < 2 or blob[0] != _VERSION:
            raise FieldCryptoError("unrecognized ciphertext format")
        kid_len = blob[1]
        kid = blob[2 : 2 + kid_len].decode()
        if kid != self.key_id:
            raise BadKey(f"ciphertext was produced under key {kid!r}")
        body = blob[2 + kid_len :]
        nonce, ct = body[:_NONCE_LEN], body[_NONCE_LEN:]
        try:
            return self._aead.decrypt(nonce, ct, None)
        except InvalidTag as exc:
            raise AuthenticationFailure("ciphertext failed authentication") from exc

    def encrypt_str(self, value: str) -> str:
        """Encrypt text and return a base64 string suitable for JSON docs."""
        return base64.b64encode(self.encrypt(value.encode())).decode()

    def decrypt_str(self, encoded: str) -> str:
        return self.decrypt(base64.b64decode(encoded)).decode()

    def blind_index(self, value: str) -> str:
        """Deterministic keyed digest of the case-folded, trimmed value."""
        normalized = value.strip().casefold().encode()
        return hmac.new(self._index_key, normalized, hashlib.sha256).hexdigest()
