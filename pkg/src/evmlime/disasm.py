"""EVM bytecode decoding, linear-sweep disassembly and opcode counting."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from evmlime import _kernels
from evmlime.errors import NonHexCharacter, OddNibbleCount

UNKNOWN = "UNKNOWN"

# Feature vocabulary, in the reference opcode listing order; CREATE is
# listed twice there and kept once.
VOCABULARY: tuple[str, ...] = (
    "SELFBALANCE", "BASEFEE", "MLOAD", "MSTORE",
    "SLOAD", "SSTORE", "JUMP", "JUMPI",
    "PC", "MSIZE", "GAS", "RETURNDATACOPY",
    "EXTCODEHASH", "BLOCKHASH", "COINBASE", "TIMESTAMP",
    "NUMBER", "PREVRANDAO", "GASLIMIT", "CHAINID",
    "BALANCE", "ORIGIN", "CALLER", "CALLVALUE",
    "CALLDATALOAD", "CALLDATACOPY", "CODESIZE", "CODECOPY",
    "GASPRICE", "EXTCODESIZE", "EXTCODECOPY", "SLT",
    "SGT", "EQ", "ISZERO", "AND",
    "OR", "XOR", "NOT", "BYTE",
    "SHL", "SHR", "SAR", "KECCAK256",
    "ADDRESS", "CALLCODE", "RETURN", "DELEGATECALL",
    "CREATE", "STATICCALL", "REVERT", "SELFDESTRUCT",
    "LOG", "SWAP", "DUP", "PUSH",
    "POP", "STOP", "ADD", "MUL",
    "SUB", "CALL", "DIV", "SDIV",
    "MOD", "SMOD", "ADDMOD", "MULMOD",
    "EXP", "SIGNEXTEND", "LT", "GT",
)

# Canonical tokens: every feature name plus the excluded UNKNOWN bucket.
CANONICAL_TOKENS: tuple[str, ...] = VOCABULARY + (UNKNOWN,)

_BASE_MNEMONICS = {
    0x00: "STOP", 0x01: "ADD", 0x02: "MUL", 0x03: "SUB", 0x04: "DIV",
    0x05: "SDIV", 0x06: "MOD", 0x07: "SMOD", 0x08: "ADDMOD", 0x09: "MULMOD",
    0x0A: "EXP", 0x0B: "SIGNEXTEND",
    0x10: "LT", 0x11: "GT", 0x12: "SLT", 0x13: "SGT", 0x14: "EQ",
    0x15: "ISZERO", 0x16: "AND", 0x17: "OR", 0x18: "XOR", 0x19: "NOT",
    0x1A: "BYTE", 0x1B: "SHL", 0x1C: "SHR", 0x1D: "SAR",
    0x20: "KECCAK256",
    0x30: "ADDRESS", 0x31: "BALANCE", 0x32: "ORIGIN", 0x33: "CALLER",
    0x34: "CALLVALUE", 0x35: "CALLDATALOAD", 0x36: "CALLDATASIZE",
    0x37: "CALLDATACOPY", 0x38: "CODESIZE", 0x39: "CODECOPY",
    0x3A: "GASPRICE", 0x3B: "EXTCODESIZE", 0x3C: "EXTCODECOPY",
    0x3D: "RETURNDATASIZE", 0x3E: "RETURNDATACOPY", 0x3F: "EXTCODEHASH",
    0x40: "BLOCKHASH", 0x41: "COINBASE", 0x42: "TIMESTAMP", 0x43: "NUMBER",
    0x44: "PREVRANDAO", 0x45: "GASLIMIT", 0x46: "CHAINID",
    0x47: "SELFBALANCE", 0x48: "BASEFEE", 0x49: "BLOBHASH", 0x4A: "BLOBBASEFEE",
    0x50: "POP", 0x51: "MLOAD", 0x52: "MSTORE", 0x53: "MSTORE8",
    0x54: "SLOAD", 0x55: "SSTORE", 0x56: "JUMP", 0x57: "JUMPI", 0x58: "PC",
    0x59: "MSIZE", 0x5A: "GAS", 0x5B: "JUMPDEST", 0x5C: "TLOAD",
    0x5D: "TSTORE", 0x5E: "MCOPY", 0x5F: "PUSH0",
    0xF0: "CREATE", 0xF1: "CALL", 0xF2: "CALLCODE", 0xF3: "RETURN",
    0xF4: "DELEGATECALL", 0xF5: "CREATE2", 0xFA: "STATICCALL",
    0xFD: "REVERT", 0xFE: "INVALID", 0xFF: "SELFDESTRUCT",
}


def _family(mnemonic: str) -> str:
    for prefix in ("PUSH", "DUP", "SWAP", "LOG"):
        if mnemonic.startswith(prefix) and mnemonic[len(prefix):].isdigit():
            return prefix
    return mnemonic


def _build_tables():
    mnemonics: list[str] = []
    widths: list[int] = []
    canonical: list[str] = []
    vocab = set(VOCABULARY)
    for byte in range(256):
        if 0x60 <= byte <= 0x7F:
            name, width = f"PUSH{byte - 0x5F}", byte - 0x5F
        elif 0x80 <= byte <= 0x8F:
            name, width = f"DUP{byte - 0x7F}", 0
        elif 0x90 <= byte <= 0x9F:
            name, width = f"SWAP{byte - 0x8F}", 0
        elif 0xA0 <= byte <= 0xA4:
            name, width = f"LOG{byte - 0xA0}", 0
        else:
            name, width = _BASE_MNEMONICS.get(byte, UNKNOWN), 0
        fam = _family(name)
        mnemonics.append(name)
        widths.append(width)
        canonical.append(fam if fam in vocab else UNKNOWN)
    return tuple(mnemonics), tuple(widths), tuple(canonical)


MNEMONICS, IMMEDIATE_BYTES, CANONICAL = _build_tables()

# byte -> column in a frequency vector; UNKNOWN bytes map to len(VOCABULARY)
_CANON_INDEX = np.array([CANONICAL_TOKENS.index(c) for c in CANONICAL], dtype=np.int64)

_HEX_RE = re.compile(r"[0-9a-fA-F]*")


def decode_hex(text: str) -> bytes:
    """Decode hex text with an optional ``0x`` prefix and surrounding whitespace."""
    s = text.strip()
    if s[:2] in ("0x", "0X"):
        s = s[2:]
    if not _HEX_RE.fullmatch(s):
        bad = next(ch for ch in s if ch not in "0123456789abcdefABCDEF")
        raise NonHexCharacter(f"non-hex character {bad!r} in bytecode")
    if len(s) % 2:
        raise OddNibbleCount(f"bytecode has an odd number of hex digits ({len(s)})")
    return bytes.fromhex(s)


def canonicalize(mnemonic: str) -> str:
    """Map a raw or canonical mnemonic to its vocabulary token (idempotent)."""
    fam = _family(mnemonic.upper())
    if fam == "DIFFICULTY":
        fam = "PREVRANDAO"
    if fam == "SHA3":
        fam = "KECCAK256"
    return fam if fam in CANONICAL_TOKENS else UNKNOWN


def disassemble(code: bytes) -> list[str]:
    """Linear sweep from offset 0, emitting one canonical token per instruction.

    PUSH immediates are consumed and not emitted, including a truncated tail at
    the end of the code.
    """
    offsets = _kernels.sweep_offsets(bytes(code))
    return [CANONICAL[code[i]] for i in offsets]


def disassemble_raw(code: bytes) -> list[tuple[int, str]]:
    """``(offset, raw mnemonic)`` pairs; useful for the ``disasm`` subcommand."""
    return [(int(i), MNEMONICS[code[i]]) for i in _kernels.sweep_offsets(bytes(code))]


@dataclass(frozen=True)
class FrequencyVector:
    counts: Mapping[str, int]
    unknown: int = 0
    total: int = field(init=False)

    def __post_init__(self):
        full = {name: int(self.counts.get(name, 0)) for name in VOCABULARY}
        extra = set(self.counts) - set(VOCABULARY)
        if extra:
            raise KeyError(f"not in vocabulary: {sorted(extra)}")
        if any(v < 0 for v in full.values()):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", full)
        object.__setattr__(self, "total", sum(full.values()))

    def as_array(self) -> np.ndarray:
        return np.array([self.counts[name] for name in VOCABULARY], dtype=np.float64)

    def nonzero(self) -> dict[str, int]:
        return {k: v for k, v in self.counts.items() if v}


def count_frequencies(stream: Iterable[str]) -> FrequencyVector:
    tally = Counter(stream)
    unknown = tally.pop(UNKNOWN, 0)
    return FrequencyVector(tally, unknown=unknown)


def frequency_array(code: bytes) -> tuple[np.ndarray, int]:
    """Fast path: vocabulary-ordered counts plus the UNKNOWN count for one contract."""
    hist = _kernels.sweep_histogram(bytes(code))
    folded = np.bincount(_CANON_INDEX, weights=hist, minlength=len(CANONICAL_TOKENS))
    return folded[:-1], int(folded[-1])


def featurize_hex(text: str) -> FrequencyVector:
    counts, unknown = frequency_array(decode_hex(text))
    return FrequencyVector(dict(zip(VOCABULARY, counts.astype(int).tolist())), unknown=unknown)
