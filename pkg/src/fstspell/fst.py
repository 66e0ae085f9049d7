"""Weighted finite-state transducers and their core algorithms.

An :class:`Fst` is an arc-labeled weighted directed graph over a pair of
symbol tables.  Label ids 0, 1 and 2 are reserved for the epsilon, sigma
(match-anything) and rho (substitution wildcard) labels; user symbols start
at 3.  All operations treat their inputs as read-only and return new FSTs,
so built machines can be shared freely across threads.

Composition supports two special matchers in addition to exact label
matching:

* ``sigma_right`` lets a sigma-labeled arc in the right operand match any
  user label of the left operand; the matched label replaces sigma on both
  sides of the right arc.
* ``rho_left`` lets a rho output label of the left operand match any user
  input label of the right operand, again substituting the matched label
  for rho.

Determinization is available in both semirings; in the log semiring the
weight of each accepted string becomes the probability-mass sum of all its
equivalent paths, which is what turns a noisy lattice into a phonetic
consensus.
"""

import heapq
import math
from typing import Iterable, NamedTuple, Optional, Sequence

from .errors import (
    BudgetExceededError,
    ConfigError,
    CyclicInputError,
    DivergenceError,
    SymbolTableMismatchError,
)
from .semiring import ONE, TROPICAL, ZERO, Semiring

EPS = 0
SIGMA = 1
RHO = 2
FIRST_USER_LABEL = 3

RESERVED_SYMBOLS = {"<eps>": EPS, "<sigma>": SIGMA, "<rho>": RHO}

DEFAULT_DETERMINIZE_BUDGET = 1_000_000


class SymbolTable:
    """Bijective string <-> label-id map with the reserved ids pre-seeded."""

    def __init__(self, symbols: Iterable[str] = ()):
        self._sym2id: dict[str, int] = dict(RESERVED_SYMBOLS)
        self._id2sym: dict[int, str] = {i: s for s, i in RESERVED_SYMBOLS.items()}
        self._next_id = FIRST_USER_LABEL
        for sym in symbols:
            self.add(sym)

    def add(self, symbol: str) -> int:
        """Add a symbol if absent; return its id either way."""
        label = self._sym2id.get(symbol)
        if label is not None:
            return label
        label = self._next_id
        self._sym2id[symbol] = label
        self._id2sym[label] = symbol
        self._next_id += 1
        return label

    def add_with_id(self, symbol: str, label: int) -> None:
        if label < FIRST_USER_LABEL or symbol in RESERVED_SYMBOLS:
            raise ConfigError(
                f"reserved symbol or id may not be redefined: {symbol!r} -> {label}"
            )
        old = self._sym2id.get(symbol)
        if old is not None and old != label:
            raise ConfigError(f"symbol {symbol!r} already bound to id {old}")
        holder = self._id2sym.get(label)
        if holder is not None and holder != symbol:
            raise ConfigError(f"id {label} already bound to symbol {holder!r}")
        self._sym2id[symbol] = label
        self._id2sym[label] = symbol
        self._next_id = max(self._next_id, label + 1)

    def id_of(self, symbol: str) -> int:
        try:
            return self._sym2id[symbol]
        except KeyError:
            raise KeyError(f"symbol not in table: {symbol!r}") from None

    def symbol_of(self, label: int) -> str:
        try:
            return self._id2sym[label]
        except KeyError:
            raise KeyError(f"label not in table: {label}") from None

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._sym2id

    def __len__(self) -> int:
        return len(self._sym2id)

    def __eq__(self, other) -> bool:
        return isinstance(other, SymbolTable) and self._sym2id == other._sym2id

    def user_items(self):
        """(symbol, id) pairs excluding the reserved labels, in id order."""
        return sorted(
            ((s, i) for s, i in self._sym2id.items() if i >= FIRST_USER_LABEL),
            key=lambda kv: kv[1],
        )

    def user_ids(self) -> list[int]:
        return [i for _, i in self.user_items()]


class Arc(NamedTuple):
    ilabel: int
    olabel: int
    weight: float
    nextstate: int


NO_STATE = -1


class Fst:
    """Mutable while being built, treated as immutable by every operation."""

    __slots__ = ("states", "start", "finals", "isyms", "osyms")

    def __init__(self, isyms: Optional[SymbolTable] = None,
                 osyms: Optional[SymbolTable] = None):
        self.states: list[list[Arc]] = []
        self.start: int = NO_STATE
        self.finals: dict[int, float] = {}
        self.isyms = isyms if isyms is not None else SymbolTable()
        self.osyms = osyms if osyms is not None else self.isyms

    # -- construction -----------------------------------------------------

    def add_state(self) -> int:
        self.states.append([])
        return len(self.states) - 1

    def add_arc(self, src: int, ilabel: int, olabel: int, weight: float,
                dst: int) -> None:
        if dst >= len(self.states) or src >= len(self.states):
            raise ConfigError(f"arc endpoint out of range: {src}->{dst}")
        self.states[src].append(Arc(ilabel, olabel, weight, dst))

    def set_start(self, state: int) -> None:
        self.start = state

    def set_final(self, state: int, weight: float = ONE) -> None:
        if weight == ZERO:
            raise ConfigError("a final weight must be finite")
        self.finals[state] = weight

    # -- inspection -------------------------------------------------------

    def num_states(self) -> int:
        return len(self.states)

    def num_arcs(self) -> int:
        return sum(len(arcs) for arcs in self.states)

    def arcs(self, state: int) -> list[Arc]:
        return self.states[state]

    def final_weight(self, state: int) -> float:
        return self.finals.get(state, ZERO)

    def is_acceptor(self) -> bool:
        return all(a.ilabel == a.olabel for arcs in self.states for a in arcs)

    def is_empty(self) -> bool:
        """True if the FST accepts nothing at all."""
        return self.start == NO_STATE or not self.finals

    def copy(self) -> "Fst":
        out = Fst(self.isyms, self.osyms)
        out.states = [list(arcs) for arcs in self.states]
        out.start = self.start
        out.finals = dict(self.finals)
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Fst)
            and self.start == other.start
            and self.finals == other.finals
            and self.states == other.states
            and self.isyms == other.isyms
            and self.osyms == other.osyms
        )

    def __repr__(self) -> str:
        return (f"Fst(states={self.num_states()}, arcs={self.num_arcs()}, "
                f"start={self.start}, finals={len(self.finals)})")


# -- small constructors ----------------------------------------------------


def chain(labels: Sequence[int], isyms: SymbolTable,
          osyms: Optional[SymbolTable] = None, cost: float = ONE) -> Fst:
    """Linear acceptor for one label sequence, total cost on the first arc."""
    f = Fst(isyms, osyms if osyms is not None else isyms)
    prev = f.add_state()
    f.set_start(prev)
    for i, label in enumerate(labels):
        nxt = f.add_state()
        f.add_arc(prev, label, label, cost if i == 0 else ONE, nxt)
        prev = nxt
    if not labels:
        f.set_final(prev, cost)
    else:
        f.set_final(prev, ONE)
    return f


def union(fsts: Sequence[Fst], semiring: Semiring = TROPICAL) -> Fst:
    """Union via a fresh shared start state; operands must share tables.

    The semiring only matters when several operands accept the empty string,
    whose weights must merge on the shared start state.
    """
    if not fsts:
        raise ConfigError("union of zero FSTs")
    first = fsts[0]
    out = Fst(first.isyms, first.osyms)
    start = out.add_state()
    out.set_start(start)
    for f in fsts:
        if f.isyms != out.isyms or f.osyms != out.osyms:
            raise SymbolTableMismatchError("union operands have different tables")
        offset = out.num_states()
        for _ in f.states:
            out.add_state()
        for q, arcs in enumerate(f.states):
            for a in arcs:
                out.add_arc(offset + q, a.ilabel, a.olabel, a.weight,
                            offset + a.nextstate)
        for q, w in f.finals.items():
            out.set_final(offset + q, w)
        if f.start != NO_STATE:
            # duplicate start-state arcs onto the shared start
            for a in f.states[f.start]:
                out.add_arc(start, a.ilabel, a.olabel, a.weight,
                            offset + a.nextstate)
            if f.start in f.finals:
                prev = out.finals.get(start, ZERO)
                out.set_final(start, semiring.plus(prev, f.finals[f.start]))
    return out


# -- reachability ----------------------------------------------------------


def connect(f: Fst) -> Fst:
    """Trim states that are unreachable or cannot reach a final state."""
    if f.start == NO_STATE:
        return f.copy()
    n = f.num_states()
    fwd = [False] * n
    stack = [f.start]
    fwd[f.start] = True
    while stack:
        q = stack.pop()
        for a in f.states[q]:
            if not fwd[a.nextstate]:
                fwd[a.nextstate] = True
                stack.append(a.nextstate)
    rev: list[list[int]] = [[] for _ in range(n)]
    for q, arcs in enumerate(f.states):
        for a in arcs:
            rev[a.nextstate].append(q)
    bwd = [False] * n
    stack = [q for q in f.finals if fwd[q]]
    for q in stack:
        bwd[q] = True
    while stack:
        q = stack.pop()
        for p in rev[q]:
            if not bwd[p]:
                bwd[p] = True
                stack.append(p)
    keep = [q for q in range(n) if fwd[q] and bwd[q]]
    remap = {q: i for i, q in enumerate(keep)}
    out = Fst(f.isyms, f.osyms)
    for _ in keep:
        out.add_state()
    for q in keep:
        src = remap[q]
        for a in f.states[q]:
            if a.nextstate in remap:
                out.add_arc(src, a.ilabel, a.olabel, a.weight, remap[a.nextstate])
    if f.start in remap:
        out.set_start(remap[f.start])
        for q, w in f.finals.items():
            if q in remap:
                out.set_final(remap[q], w)
    return out


# -- projection and inversion ----------------------------------------------


def project_output(f: Fst) -> Fst:
    """Copy input labels from output labels, yielding an acceptor."""
    out = Fst(f.osyms, f.osyms)
    out.states = [[Arc(a.olabel, a.olabel, a.weight, a.nextstate) for a in arcs]
                  for arcs in f.states]
    out.start = f.start
    out.finals = dict(f.finals)
    return out


def invert(f: Fst) -> Fst:
    """Swap input and output labels (and symbol tables)."""
    out = Fst(f.osyms, f.isyms)
    out.states = [[Arc(a.olabel, a.ilabel, a.weight, a.nextstate) for a in arcs]
                  for arcs in f.states]
    out.start = f.start
    out.finals = dict(f.finals)
    return out


# -- composition -----------------------------------------------------------

COMPOSE_MODES = ("exact", "sigma_right", "rho_left")


def compose(a: Fst, b: Fst, mode: str = "exact",
            keep_origins: bool = False):
    """Weighted composition with an epsilon-sequencing filter.

    The filter guarantees each pair of compatible paths is matched exactly
    once, so path multiplicities (and hence log-semiring sums) survive
    composition intact.  With ``keep_origins`` the return value is a pair
    ``(fst, origins)`` where ``origins[q] == (state_in_a, state_in_b)``.
    """
    if mode not in COMPOSE_MODES:
        raise ConfigError(f"unknown composition mode: {mode!r}")
    if a.osyms != b.isyms:
        raise SymbolTableMismatchError(
            "left operand's output table differs from right operand's input table")
    sigma_right = mode == "sigma_right"
    rho_left = mode == "rho_left"

    out = Fst(a.isyms, b.osyms)
    if a.start == NO_STATE or b.start == NO_STATE:
        return (out, []) if keep_origins else out

    # per-state index of b's arcs by input label
    b_index: list[dict[int, list[Arc]]] = []
    for arcs in b.states:
        idx: dict[int, list[Arc]] = {}
        for arc in arcs:
            idx.setdefault(arc.ilabel, []).append(arc)
        b_index.append(idx)

    state_ids: dict[tuple[int, int, int], int] = {}
    origins: list[tuple[int, int]] = []
    out_states = out.states
    queue: list[tuple[int, int, int]] = []

    def state_of(key: tuple[int, int, int]) -> int:
        sid = state_ids.get(key)
        if sid is None:
            sid = len(out_states)
            out_states.append([])
            state_ids[key] = sid
            origins.append((key[0], key[1]))
            queue.append(key)
        return sid

    start_key = (a.start, b.start, 0)
    out.set_start(state_of(start_key))

    a_states = a.states
    a_finals = a.finals
    b_finals = b.finals
    head = 0
    while head < len(queue):
        key = queue[head]
        head += 1
        qa, qb, filt = key
        arcs_out = out_states[state_ids[key]]

        wa = a_finals.get(qa)
        if wa is not None:
            wb = b_finals.get(qb)
            if wb is not None:
                out.finals[state_ids[key]] = wa + wb

        b_idx = b_index[qb]
        # right-only move: b consumes its own input epsilon
        for barc in b_idx.get(EPS, ()):
            dst = state_of((qa, barc.nextstate, 2))
            arcs_out.append(Arc(EPS, barc.olabel, barc.weight, dst))

        for aarc in a_states[qa]:
            ol = aarc.olabel
            if ol == EPS:
                # left-only move, blocked once a right-only run has begun
                if filt != 2:
                    dst = state_of((aarc.nextstate, qb, 1))
                    arcs_out.append(Arc(aarc.ilabel, EPS, aarc.weight, dst))
                continue
            if rho_left and ol == RHO:
                aw = aarc.weight
                anext = aarc.nextstate
                for ilabel, barcs in b_idx.items():
                    if ilabel == EPS:
                        continue
                    il = ilabel if aarc.ilabel == RHO else aarc.ilabel
                    for barc in barcs:
                        dst = state_of((anext, barc.nextstate, 0))
                        arcs_out.append(Arc(il, barc.olabel,
                                            aw + barc.weight, dst))
                continue
            barcs = b_idx.get(ol)
            if barcs:
                aw = aarc.weight
                ail = aarc.ilabel
                anext = aarc.nextstate
                for barc in barcs:
                    dst = state_of((anext, barc.nextstate, 0))
                    arcs_out.append(Arc(ail, barc.olabel, aw + barc.weight, dst))
            if sigma_right and ol >= FIRST_USER_LABEL:
                sigma_arcs = b_idx.get(SIGMA)
                if sigma_arcs:
                    aw = aarc.weight
                    ail = aarc.ilabel
                    anext = aarc.nextstate
                    for barc in sigma_arcs:
                        bol = ol if barc.olabel == SIGMA else barc.olabel
                        dst = state_of((anext, barc.nextstate, 0))
                        arcs_out.append(Arc(ail, bol, aw + barc.weight, dst))

    trimmed = connect(out)
    if not keep_origins:
        return trimmed
    # connect renumbers; recompute the surviving origins
    kept = _surviving_origins(out, trimmed, origins)
    return trimmed, kept


def _surviving_origins(raw: Fst, trimmed: Fst,
                       origins: list[tuple[int, int]]) -> list[tuple[int, int]]:
    if raw.start == NO_STATE or trimmed.start == NO_STATE:
        return []
    n = raw.num_states()
    fwd = [False] * n
    stack = [raw.start]
    fwd[raw.start] = True
    while stack:
        q = stack.pop()
        for arc in raw.states[q]:
            if not fwd[arc.nextstate]:
                fwd[arc.nextstate] = True
                stack.append(arc.nextstate)
    rev: list[list[int]] = [[] for _ in range(n)]
    for q, arcs in enumerate(raw.states):
        for arc in arcs:
            rev[arc.nextstate].append(q)
    bwd = [False] * n
    stack = [q for q in raw.finals if fwd[q]]
    for q in stack:
        bwd[q] = True
    while stack:
        q = stack.pop()
        for p in rev[q]:
            if not bwd[p]:
                bwd[p] = True
                stack.append(p)
    return [origins[q] for q in range(n) if fwd[q] and bwd[q]]


# -- topological machinery ---------------------------------------------------


def topological_order(f: Fst) -> list[int]:
    """States in topological order; raises CyclicInputError on a cycle."""
    n = f.num_states()
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * n
    order: list[int] = []
    for root in range(n):
        if color[root] != WHITE:
            continue
        stack: list[tuple[int, int]] = [(root, 0)]
        color[root] = GRAY
        while stack:
            q, i = stack.pop()
            if i < len(f.states[q]):
                stack.append((q, i + 1))
                nxt = f.states[q][i].nextstate
                if color[nxt] == GRAY:
                    raise CyclicInputError("FST contains a cycle")
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, 0))
            else:
                color[q] = BLACK
                order.append(q)
    order.reverse()
    return order


def shortest_distance(f: Fst, semiring: Semiring) -> float:
    """Semiring sum over all accepting-path costs of an acyclic FST."""
    if f.start == NO_STATE or not f.finals:
        return ZERO
    order = topological_order(f)
    dist = [ZERO] * f.num_states()
    dist[f.start] = ONE
    plus = semiring.plus
    for q in order:
        d = dist[q]
        if d == ZERO:
            continue
        for arc in f.states[q]:
            nxt = arc.nextstate
            dist[nxt] = plus(dist[nxt], d + arc.weight)
    total = ZERO
    for q, w in f.finals.items():
        if dist[q] != ZERO:
            total = plus(total, dist[q] + w)
    return total


def backward_distances(f: Fst, semiring: Semiring) -> list[float]:
    """Per-state semiring sum of costs to any final state (acyclic only)."""
    order = topological_order(f)
    dist = [ZERO] * f.num_states()
    plus = semiring.plus
    for q in reversed(order):
        d = f.finals.get(q, ZERO)
        for arc in f.states[q]:
            tail = dist[arc.nextstate]
            if tail != ZERO:
                d = plus(d, arc.weight + tail)
        dist[q] = d
    return dist


def path_count(f: Fst):
    """Exact number of accepting paths of an acyclic FST (arbitrary precision)."""
    if f.start == NO_STATE:
        return 0
    order = topological_order(f)
    count = [0] * f.num_states()
    for q in reversed(order):
        c = 1 if q in f.finals else 0
        for arc in f.states[q]:
            c += count[arc.nextstate]
        count[q] = c
    return count[f.start]


def shortest_paths(f: Fst, n: int) -> list[tuple[list[int], float]]:
    """The n cheapest accepting paths of an acyclic tropical FST.

    Returns (input-label sequence, cost) pairs in nondecreasing cost order;
    equal-cost paths are ordered lexicographically by label ids.
    """
    if n <= 0 or f.start == NO_STATE or not f.finals:
        return []
    heuristic = backward_distances(f, TROPICAL)
    if heuristic[f.start] == ZERO:
        return []
    results: list[tuple[list[int], float]] = []
    counter = 0
    # heap key: (completion-cost bound, labels so far, tiebreaker)
    heap = [(heuristic[f.start], (), counter, f.start, ONE)]
    while heap and len(results) < n:
        bound, labels, _, state, g = heapq.heappop(heap)
        if state == NO_STATE:
            results.append((list(labels), g))
            continue
        fw = f.finals.get(state)
        if fw is not None:
            counter += 1
            heapq.heappush(heap, (g + fw, labels, counter, NO_STATE, g + fw))
        for arc in f.states[state]:
            h = heuristic[arc.nextstate]
            if h == ZERO:
                continue
            counter += 1
            extended = labels if arc.ilabel == EPS else labels + (arc.ilabel,)
            heapq.heappush(
                heap,
                (g + arc.weight + h, extended, counter,
                 arc.nextstate, g + arc.weight))
    return results


# -- epsilon removal ---------------------------------------------------------


def _epsilon_closures(f: Fst, semiring: Semiring,
                      eps_arcs: list[list[Arc]]) -> list[dict[int, float]]:
    n = f.num_states()
    has_eps = [bool(arcs) for arcs in eps_arcs]
    # cycle check restricted to the epsilon subgraph
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * n
    cyclic = False
    for root in range(n):
        if color[root] != WHITE or not has_eps[root]:
            continue
        stack: list[tuple[int, int]] = [(root, 0)]
        color[root] = GRAY
        while stack:
            q, i = stack.pop()
            if i < len(eps_arcs[q]):
                stack.append((q, i + 1))
                nxt = eps_arcs[q][i].nextstate
                if color[nxt] == GRAY:
                    cyclic = True
                    stack.clear()
                    break
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, 0))
            else:
                color[q] = BLACK
    if not cyclic:
        closures: list[dict[int, float]] = [dict() for _ in range(n)]
        done = [False] * n
        plus = semiring.plus

        def close(q: int) -> dict[int, float]:
            if done[q]:
                return closures[q]
            acc: dict[int, float] = {q: ONE}
            for arc in eps_arcs[q]:
                for r, w in close(arc.nextstate).items():
                    c = arc.weight + w
                    prev = acc.get(r)
                    acc[r] = c if prev is None else plus(prev, c)
            closures[q] = acc
            done[q] = True
            return acc

        for q in range(n):
            close(q)
        return closures
    return _epsilon_closures_cyclic(f, semiring, eps_arcs)


def _epsilon_closures_cyclic(f: Fst, semiring: Semiring,
                             eps_arcs: list[list[Arc]]) -> list[dict[int, float]]:
    """All-pairs algebraic closure of the epsilon subgraph (Kleene)."""
    nodes = sorted({q for q, arcs in enumerate(eps_arcs) if arcs}
                   | {a.nextstate for arcs in eps_arcs for a in arcs})
    pos = {q: i for i, q in enumerate(nodes)}
    m = len(nodes)
    plus = semiring.plus
    d = [[ZERO] * m for _ in range(m)]
    for q in nodes:
        for arc in eps_arcs[q]:
            i, j = pos[q], pos[arc.nextstate]
            d[i][j] = plus(d[i][j], arc.weight)

    def star(c: float) -> float:
        if c == ZERO:
            return ONE
        if semiring is TROPICAL:
            if c < 0:
                raise DivergenceError("negative-cost epsilon cycle")
            return ONE
        if c <= 0:
            raise DivergenceError("non-dissipating epsilon cycle in log semiring")
        return math.log1p(-math.exp(-c))  # cost of the geometric series sum

    for k in range(m):
        skk = star(d[k][k])
        row_k = d[k]
        for i in range(m):
            if i == k:
                continue
            dik = d[i][k] + skk
            if dik == ZERO:
                continue
            row_i = d[i]
            for j in range(m):
                if j == k:
                    continue
                w = dik + row_k[j]
                row_i[j] = plus(row_i[j], w)
            row_i[k] = dik
        for j in range(m):
            if j != k:
                row_k[j] = skk + row_k[j]
        d[k][k] = skk

    closures: list[dict[int, float]] = [dict() for _ in range(f.num_states())]
    for q in range(f.num_states()):
        if q in pos:
            # the eliminated matrix's diagonal already contains the empty path
            i = pos[q]
            acc = {r: d[i][j] for j, r in enumerate(nodes) if d[i][j] != ZERO}
            acc.setdefault(q, ONE)
        else:
            acc = {q: ONE}
        closures[q] = acc
    return closures


def rmeps(f: Fst, semiring: Semiring = TROPICAL) -> Fst:
    """Remove eps:eps arcs, preserving the weighted language.

    Parallel epsilon paths combine under the given semiring.  Epsilon cycles
    must dissipate mass (positive cost in the log semiring, non-negative in
    the tropical one) or a DivergenceError is raised.
    """
    n = f.num_states()
    eps_arcs: list[list[Arc]] = [[] for _ in range(n)]
    other_arcs: list[list[Arc]] = [[] for _ in range(n)]
    any_eps = False
    for q, arcs in enumerate(f.states):
        for a in arcs:
            if a.ilabel == EPS and a.olabel == EPS:
                eps_arcs[q].append(a)
                any_eps = True
            else:
                other_arcs[q].append(a)
    if not any_eps:
        return f.copy()
    closures = _epsilon_closures(f, semiring, eps_arcs)
    plus = semiring.plus
    out = Fst(f.isyms, f.osyms)
    for _ in range(n):
        out.add_state()
    out.set_start(f.start)
    for q in range(n):
        finalw = ZERO
        for r, w in closures[q].items():
            for a in other_arcs[r]:
                out.add_arc(q, a.ilabel, a.olabel, w + a.weight, a.nextstate)
            fw = f.finals.get(r)
            if fw is not None:
                finalw = plus(finalw, w + fw)
        if finalw != ZERO:
            out.set_final(q, finalw)
    return connect(out)


# -- determinization ---------------------------------------------------------


def determinize(f: Fst, semiring: Semiring,
                state_budget: int = DEFAULT_DETERMINIZE_BUDGET) -> Fst:
    """Weighted subset determinization of an epsilon-free acceptor.

    Equivalent paths for the same string collapse to one; their costs
    combine with the semiring plus, so determinizing in the log semiring
    assigns each string the *sum* of its path probabilities while the
    tropical semiring keeps only the best path.
    """
    for arcs in f.states:
        for a in arcs:
            if a.ilabel != a.olabel:
                raise ConfigError("determinize requires an acceptor; project first")
            if a.ilabel == EPS:
                raise ConfigError("determinize requires an epsilon-free input")
    out = Fst(f.isyms, f.osyms)
    if f.start == NO_STATE or not f.finals:
        return out
    plus = semiring.plus

    start_subset = ((f.start, ONE),)
    ids: dict[tuple, int] = {}
    queue: list[tuple] = []

    def state_of(subset: tuple) -> int:
        sid = ids.get(subset)
        if sid is None:
            if len(ids) >= state_budget:
                raise BudgetExceededError(
                    f"determinization exceeded {state_budget} subset states")
            sid = out.add_state()
            ids[subset] = sid
            queue.append(subset)
        return sid

    out.set_start(state_of(start_subset))
    head = 0
    while head < len(queue):
        subset = queue[head]
        head += 1
        src = ids[subset]
        finalw = ZERO
        by_label: dict[int, dict[int, float]] = {}
        for q, residual in subset:
            fw = f.finals.get(q)
            if fw is not None:
                finalw = plus(finalw, residual + fw)
            for a in f.states[q]:
                bucket = by_label.setdefault(a.ilabel, {})
                w = residual + a.weight
                prev = bucket.get(a.nextstate)
                bucket[a.nextstate] = w if prev is None else plus(prev, w)
        if finalw != ZERO:
            out.set_final(src, finalw)
        for label in sorted(by_label):
            bucket = by_label[label]
            total = ZERO
            for w in bucket.values():
                total = plus(total, w)
            next_subset = tuple(sorted(
                (q, w - total) for q, w in bucket.items()))
            dst = state_of(next_subset)
            out.add_arc(src, label, label, total, dst)
    return connect(out)
