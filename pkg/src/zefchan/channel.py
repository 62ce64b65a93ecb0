"""Words over a q-ary alphabet, received words with erasures, adversary
budgets, and trajectory measurement.

Symbols are small unsigned integers; an erasure is a distinguished cell state
(a boolean mask alongside the value array), never an in-band value, so any
alphabet size works without sentinel collisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BudgetError",
    "Word",
    "ReceivedWord",
    "AdversaryBudget",
    "TrajectoryPoint",
    "Action",
    "KEEP",
    "ERASE",
    "substitute",
    "distance",
    "apply_adversary_actions",
    "measure_trajectory",
    "word_to_text",
    "received_to_text",
    "parse_word",
    "parse_received",
]

ERASURE_MARK = "?"


class BudgetError(ValueError):
    """An adversary action would exceed its error or erasure budget."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Word:
    """Immutable q-ary word."""

    symbols: np.ndarray
    q: int

    @staticmethod
    def make(symbols, q: int) -> "Word":
        arr = np.asarray(symbols, dtype=np.uint16)
        if arr.ndim != 1:
            raise ValueError("a word is one-dimensional")
        if arr.size and int(arr.max(initial=0)) >= q:
            raise ValueError(f"symbol out of range for alphabet size {q}")
        return Word(_freeze(arr), q)

    def __len__(self) -> int:
        return int(self.symbols.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Word)
            and self.q == other.q
            and np.array_equal(self.symbols, other.symbols)
        )

    def __hash__(self):
        return hash((self.q, self.symbols.tobytes()))


@dataclass(frozen=True)
class ReceivedWord:
    """Channel output: q-ary values plus an erasure mask (erased cells carry
    no symbol; their value entries are zeroed and ignored)."""

    values: np.ndarray
    erased: np.ndarray
    q: int

    @staticmethod
    def make(values, erased, q: int) -> "ReceivedWord":
        vals = np.asarray(values, dtype=np.uint16).copy()
        mask = np.asarray(erased, dtype=bool).copy()
        if vals.shape != mask.shape or vals.ndim != 1:
            raise ValueError("values and erasure mask must be 1-d and congruent")
        vals[mask] = 0
        if vals.size and int(vals.max(initial=0)) >= q:
            raise ValueError(f"symbol out of range for alphabet size {q}")
        return ReceivedWord(_freeze(vals), _freeze(mask), q)

    @staticmethod
    def from_word(word: Word) -> "ReceivedWord":
        return ReceivedWord.make(word.symbols, np.zeros(len(word), bool), word.q)

    def __len__(self) -> int:
        return int(self.values.size)

    def erasure_count(self) -> int:
        return int(np.count_nonzero(self.erased))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ReceivedWord)
            and self.q == other.q
            and np.array_equal(self.erased, other.erased)
            and np.array_equal(self.values[~self.erased], other.values[~other.erased])
        )

    def __hash__(self):
        return hash((self.q, self.values.tobytes(), self.erased.tobytes()))


def distance(a: Word, b) -> int:
    """Hamming distance that skips erased cells: the number of positions where
    ``b`` is unerased and differs from ``a``."""
    if isinstance(b, Word):
        if len(a) != len(b):
            raise ValueError("length mismatch")
        return int(np.count_nonzero(a.symbols != b.symbols))
    if len(a) != len(b):
        raise ValueError("length mismatch")
    return int(np.count_nonzero((a.symbols != b.values) & ~b.erased))


def _floor_budget(fraction: float, n: int) -> int:
    # floor(fraction*n) with a guard against float descent (0.29*100 -> 28.999...)
    return int(math.floor(fraction * n + 1e-9))


@dataclass
class AdversaryBudget:
    """Error/erasure allowances for one session; counters only ever grow."""

    max_errors: int
    max_erasures: int
    used_errors: int = 0
    used_erasures: int = 0

    @staticmethod
    def from_fractions(n: int, p: float, r: float) -> "AdversaryBudget":
        return AdversaryBudget(_floor_budget(p, n), _floor_budget(r, n))

    def remaining_errors(self) -> int:
        return self.max_errors - self.used_errors

    def remaining_erasures(self) -> int:
        return self.max_erasures - self.used_erasures

    def charge_error(self) -> None:
        if self.used_errors >= self.max_errors:
            raise BudgetError(f"error budget {self.max_errors} exhausted")
        self.used_errors += 1

    def charge_erasure(self) -> None:
        if self.used_erasures >= self.max_erasures:
            raise BudgetError(f"erasure budget {self.max_erasures} exhausted")
        self.used_erasures += 1


@dataclass(frozen=True)
class Action:
    """Per-position adversary move: keep, erase, or substitute a symbol."""

    kind: str
    symbol: int | None = None

    def short(self) -> str:
        return {"keep": "keep", "erase": "erase"}.get(self.kind, f"sub:{self.symbol}")

    @staticmethod
    def parse(text: str) -> "Action":
        if text == "keep":
            return KEEP
        if text == "erase":
            return ERASE
        if text.startswith("sub:"):
            return substitute(int(text[4:]))
        raise ValueError(f"unknown action {text!r}")


KEEP = Action("keep")
ERASE = Action("erase")


def substitute(symbol: int) -> Action:
    return Action("sub", int(symbol))


def apply_adversary_actions(x: Word, actions, budget: AdversaryBudget) -> ReceivedWord:
    """Apply one action per position, charging the budget as it goes.

    Substituting a position with its own symbol is rejected (that is a keep,
    and letting it through would undercount errors).
    """
    if len(actions) != len(x):
        raise ValueError("need exactly one action per position")
    values = x.symbols.copy()
    erased = np.zeros(len(x), dtype=bool)
    for i, act in enumerate(actions):
        if act.kind == "keep":
            continue
        if act.kind == "erase":
            budget.charge_erasure()
            erased[i] = True
        elif act.kind == "sub":
            if act.symbol is None or not 0 <= act.symbol < x.q:
                raise ValueError(f"substitute symbol {act.symbol!r} outside alphabet")
            if act.symbol == int(x.symbols[i]):
                raise ValueError(
                    f"substitution at position {i} equals the transmitted symbol"
                )
            budget.charge_error()
            values[i] = act.symbol
        else:
            raise ValueError(f"unknown action kind {act.kind!r}")
    return ReceivedWord.make(values, erased, x.q)


@dataclass(frozen=True)
class TrajectoryPoint:
    """Error/erasure tallies of a received prefix of length t."""

    t: int
    erased: int
    errors: int
    error_fraction: float
    reference: float | None = None
    list_size: int | None = None


def measure_trajectory(x: Word, y: ReceivedWord, t: int) -> TrajectoryPoint:
    """Tally erasures and errors on the common length-``t`` prefix.

    The error fraction is errors/(t - erased), defined as 0 when every cell
    is erased.
    """
    if t > len(x) or t > len(y):
        raise ValueError(f"prefix length {t} exceeds word length")
    erased = int(np.count_nonzero(y.erased[:t]))
    errors = int(np.count_nonzero((x.symbols[:t] != y.values[:t]) & ~y.erased[:t]))
    frac = errors / (t - erased) if t > erased else 0.0
    return TrajectoryPoint(t, erased, errors, frac)


def word_to_text(w: Word) -> str:
    return ",".join(str(int(s)) for s in w.symbols)


def received_to_text(y: ReceivedWord) -> str:
    return ",".join(
        ERASURE_MARK if e else str(int(v)) for v, e in zip(y.values, y.erased)
    )


def parse_word(text: str, q: int) -> Word:
    if text == "":
        return Word.make([], q)
    return Word.make([int(tok) for tok in text.split(",")], q)


def parse_received(text: str, q: int) -> ReceivedWord:
    if text == "":
        return ReceivedWord.make([], [], q)
    toks = text.split(",")
    values = [0 if tok == ERASURE_MARK else int(tok) for tok in toks]
    erased = [tok == ERASURE_MARK for tok in toks]
    return ReceivedWord.make(values, erased, q)
