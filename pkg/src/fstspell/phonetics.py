"""Phoneme inventory, acoustic-similarity expansion and the k-edit FST.

Phonemes carry 5-dimensional feature vectors assigned by hand; acoustic
proximity is plain Euclidean distance in that space.  Two machines are
built from the inventory:

* the expander P, a one-state transducer with free identity arcs plus
  p:q substitution arcs costing ``lambda * d(p, q)`` for close pairs, and
* the edit FST E, whose state s_i means "i edits spent so far".  Each state
  carries a free sigma:sigma self-arc (exact match) and, below the edit
  budget, eps:rho (insertion), sigma:eps (deletion) and sigma:rho
  (substitution) arcs at a single fixed cost per edit.

Rho output labels are placeholders resolved later by rho-composition
against the retrieval side.
"""

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import ConfigError, DataError, InventoryError
from .fst import EPS, RHO, SIGMA, Fst, SymbolTable

DEFAULT_TAU = 0.8
DEFAULT_LAMBDA = 1.0
DEFAULT_EDIT_COST = 3.0


@dataclass(frozen=True)
class FeatureVector:
    place: float
    manner: float
    height: float
    position: float
    length: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.place, self.manner, self.height, self.position, self.length)


class PhonemeInventory:
    """X-SAMPA phonemes mapped to feature vectors, plus their symbol table."""

    def __init__(self, features: dict[str, FeatureVector]):
        if not features:
            raise ConfigError("empty phoneme inventory")
        self.features = dict(features)
        self.syms = SymbolTable(sorted(self.features))

    @classmethod
    def load(cls, path: Optional[str | Path] = None) -> "PhonemeInventory":
        if path is None:
            source = resources.files("fstspell.data").joinpath("phoneme_features.tsv")
            text = source.read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        features: dict[str, FeatureVector] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"feature file line {lineno}: expected 2 fields")
            phoneme, coords = parts
            values = coords.split()
            if len(values) != 5:
                raise DataError(f"feature file line {lineno}: expected 5 coordinates")
            try:
                vec = FeatureVector(*(float(v) for v in values))
            except ValueError:
                raise DataError(f"feature file line {lineno}: bad coordinate")
            if not all(math.isfinite(v) for v in vec.as_tuple()):
                raise DataError(f"feature file line {lineno}: non-finite coordinate")
            if phoneme in features:
                raise DataError(f"feature file line {lineno}: duplicate {phoneme!r}")
            features[phoneme] = vec
        return cls(features)

    def __contains__(self, phoneme: str) -> bool:
        return phoneme in self.features

    def __len__(self) -> int:
        return len(self.features)

    def phonemes(self) -> list[str]:
        return sorted(self.features)

    def vector(self, phoneme: str) -> FeatureVector:
        try:
            return self.features[phoneme]
        except KeyError:
            raise InventoryError(f"phoneme not in inventory: {phoneme!r}") from None

    def check(self, phonemes) -> None:
        for p in phonemes:
            if p not in self.features:
                raise InventoryError(f"phoneme not in inventory: {p!r}")


def feature_distance(inventory: PhonemeInventory, p: str, q: str) -> float:
    """Euclidean distance between the feature vectors of two phonemes."""
    vp = inventory.vector(p).as_tuple()
    vq = inventory.vector(q).as_tuple()
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(vp, vq)))


def close_pairs(inventory: PhonemeInventory, tau: float):
    """Ordered (p, q, distance) triples with 0 < distance <= tau."""
    pairs = []
    names = inventory.phonemes()
    for p in names:
        for q in names:
            if p == q:
                continue
            d = feature_distance(inventory, p, q)
            if 0.0 < d <= tau:
                pairs.append((p, q, d))
    return pairs


def build_phoneme_expander(inventory: PhonemeInventory,
                           tau: float = DEFAULT_TAU,
                           lam: float = DEFAULT_LAMBDA) -> Fst:
    """The similarity expander P: identity arcs free, near-pair substitutions
    at lambda-scaled feature distance."""
    if tau < 0:
        raise ConfigError("tau must be non-negative")
    if lam <= 0:
        raise ConfigError("lambda must be positive")
    syms = inventory.syms
    f = Fst(syms, syms)
    hub = f.add_state()
    f.set_start(hub)
    f.set_final(hub)
    for p in inventory.phonemes():
        label = syms.id_of(p)
        f.add_arc(hub, label, label, 0.0, hub)
    for p, q, d in close_pairs(inventory, tau):
        f.add_arc(hub, syms.id_of(p), syms.id_of(q), lam * d, hub)
    return f


def build_edit_fst(k: int, unit_cost: float = DEFAULT_EDIT_COST,
                   syms: Optional[SymbolTable] = None) -> Fst:
    """The k-edit expansion FST E over any symbol table."""
    if k < 0:
        raise ConfigError("edit budget must be non-negative")
    if unit_cost <= 0:
        raise ConfigError("edit cost must be positive")
    if syms is None:
        syms = SymbolTable()
    f = Fst(syms, syms)
    states = [f.add_state() for _ in range(k + 1)]
    f.set_start(states[0])
    for i, state in enumerate(states):
        f.set_final(state)
        f.add_arc(state, SIGMA, SIGMA, 0.0, state)
        if i < k:
            nxt = states[i + 1]
            f.add_arc(state, EPS, RHO, unit_cost, nxt)     # insertion
            f.add_arc(state, SIGMA, EPS, unit_cost, nxt)   # deletion
            f.add_arc(state, SIGMA, RHO, unit_cost, nxt)   # substitution
    return f
