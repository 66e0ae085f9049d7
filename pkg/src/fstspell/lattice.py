"""CTC wordpiece lattices: sausage construction, synthetic corruption,
path sampling and wordpiece-to-word gluing.

A lattice is a plain acceptor over wordpiece labels whose arc costs are
negative-log posteriors.  The sausage topology puts every alternative for
slot i on parallel arcs from state i to state i+1, so the path count is the
product of the slot sizes and state ids double as slot boundaries.
"""

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import ConfigError, DataError, MalformedPathError
from .fst import Fst, SymbolTable, chain, union
from .semiring import TROPICAL

WORD_START = "▁"  # ▁ marks a word-initial wordpiece


@dataclass
class Lattice:
    """A sausage wordpiece lattice plus its slot structure."""

    fst: Fst
    slots: list[list[tuple[str, float]]]

    @property
    def syms(self) -> SymbolTable:
        return self.fst.isyms

    def num_slots(self) -> int:
        return len(self.slots)

    def one_best(self) -> list[str]:
        """Cheapest wordpiece sequence (per-slot minimum)."""
        return [min(slot, key=lambda alt: (alt[1], alt[0]))[0] for slot in self.slots]

    def path_cost(self, pieces: Sequence[str]) -> float:
        """Total cost of a specific slot-aligned path through the sausage."""
        if len(pieces) != len(self.slots):
            raise DataError("path length differs from slot count")
        total = 0.0
        for piece, slot in zip(pieces, self.slots):
            costs = [cost for alt, cost in slot if alt == piece]
            if not costs:
                raise DataError(f"piece {piece!r} not present in its slot")
            total += min(costs)
        return total


def build_sausage(slots: Sequence[Sequence[tuple[str, float]]],
                  syms: Optional[SymbolTable] = None) -> Lattice:
    """Sausage lattice with all slot-i alternatives from state i to i+1."""
    if not slots:
        raise ConfigError("a sausage needs at least one slot")
    if syms is None:
        syms = SymbolTable()
        for slot in slots:
            for piece, _ in slot:
                syms.add(piece)
    f = Fst(syms, syms)
    states = [f.add_state() for _ in range(len(slots) + 1)]
    f.set_start(states[0])
    f.set_final(states[-1])
    for i, slot in enumerate(slots):
        if not slot:
            raise ConfigError(f"slot {i} is empty")
        for piece, cost in slot:
            label = syms.id_of(piece)
            f.add_arc(states[i], label, label, cost, states[i + 1])
    return Lattice(f, [list(slot) for slot in slots])


def slots_from_json(path: str | Path,
                    syms: Optional[SymbolTable] = None) -> Lattice:
    """Load a ``{"slots": [[["▁co", 0.1], ...], ...]}`` document."""
    with open(path, encoding="utf-8") as handle:
        doc = json.load(handle)
    if "slots" not in doc:
        raise DataError(f"{path}: missing 'slots' key")
    slots = [[(str(piece), float(cost)) for piece, cost in slot]
             for slot in doc["slots"]]
    return build_sausage(slots, syms)


@dataclass
class ConfusionModel:
    """Per-wordpiece alternative lists standing in for CTC posteriors.

    Each slot's alternatives are (wordpiece, cost) pairs whose probabilities
    e^-cost must not exceed 1.  ``seed`` makes corruption deterministic.
    """

    alternatives: dict[str, list[tuple[str, float]]]
    seed: int = 0

    def __post_init__(self):
        for piece, alts in self.alternatives.items():
            if not alts:
                raise ConfigError(f"confusion model has empty slot for {piece!r}")
            mass = sum(math.exp(-cost) for _, cost in alts)
            if mass > 1.0 + 1e-6:
                raise ConfigError(
                    f"confusion alternatives for {piece!r} carry mass {mass:.6f} > 1")

    @classmethod
    def identity(cls, pieces, seed: int = 0) -> "ConfusionModel":
        return cls({p: [(p, 0.0)] for p in pieces}, seed)

    @classmethod
    def from_json(cls, path: str | Path) -> "ConfusionModel":
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
        alts = {piece: [(str(p), float(c)) for p, c in entries]
                for piece, entries in doc["alternatives"].items()}
        return cls(alts, int(doc.get("seed", 0)))

    def to_json(self, path: str | Path) -> None:
        doc = {"alternatives": {p: [[a, c] for a, c in alts]
                                for p, alts in sorted(self.alternatives.items())},
               "seed": self.seed}
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(doc, handle, ensure_ascii=False, indent=2, sort_keys=True)


def corrupt(reference: Sequence[str], model: ConfusionModel,
            syms: Optional[SymbolTable] = None) -> Lattice:
    """Sausage lattice holding the model's alternatives per reference piece."""
    slots = []
    for piece in reference:
        alts = model.alternatives.get(piece)
        if alts is None:
            raise ConfigError(f"confusion model does not cover wordpiece {piece!r}")
        slots.append(list(alts))
    return build_sausage(slots, syms)


def sample_random_paths(lattice: Lattice, n: int, seed: int) -> list[list[str]]:
    """Sample n paths, choosing each arc with probability proportional to e^-cost."""
    rng = random.Random(seed)
    f = lattice.fst
    syms = lattice.syms
    out: list[list[str]] = []
    prepared = []
    for q in range(f.num_states()):
        arcs = f.states[q]
        weights = [math.exp(-a.weight) for a in arcs]
        prepared.append((arcs, weights))
    for _ in range(n):
        state = f.start
        path: list[str] = []
        while True:
            arcs, weights = prepared[state]
            if not arcs:
                break
            (arc,) = rng.choices(arcs, weights=weights, k=1)
            path.append(syms.symbol_of(arc.ilabel))
            state = arc.nextstate
        out.append(path)
    return out


def glue_wordpieces(path: Sequence[str]) -> str:
    """Concatenate pieces into words; ▁ opens a new space-delimited word."""
    if not path:
        return ""
    if not path[0].startswith(WORD_START):
        raise MalformedPathError(
            f"path must start with a word-initial piece, got {path[0]!r}")
    words: list[str] = []
    for piece in path:
        if piece.startswith(WORD_START):
            words.append(piece[len(WORD_START):])
        else:
            words[-1] += piece
    return " ".join(words)


def words_to_lattice(paths: Sequence[Sequence[str]], costs: Sequence[float],
                     syms: SymbolTable) -> Fst:
    """Union of linear word-level acceptors, one per (path, total cost)."""
    if not paths:
        raise ConfigError("words_to_lattice needs at least one path")
    if len(paths) != len(costs):
        raise DataError("paths and costs differ in length")
    chains = []
    for words, cost in zip(paths, costs):
        labels = [syms.add(w) for w in words]
        chains.append(chain(labels, syms, cost=cost))
    return union(chains, TROPICAL)
