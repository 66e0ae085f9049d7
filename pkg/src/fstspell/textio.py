"""AT&T-style text serialization for FSTs and symbol tables.

Arc lines are ``src<TAB>dst<TAB>ilabel<TAB>olabel<TAB>cost`` and final states
are ``state<TAB>cost``, with labels written as symbol strings.  The reserved
labels serialize as ``<eps>``, ``<sigma>`` and ``<rho>``.  The first line's
source state is the start state.  Costs are printed with 9 significant
digits, which makes write -> read -> write byte-stable.
"""

import io
from pathlib import Path
from typing import TextIO, Union

from .errors import ConfigError, DataError
from .fst import FIRST_USER_LABEL, NO_STATE, RESERVED_SYMBOLS, Fst, SymbolTable

PathOrIO = Union[str, Path, TextIO]


def format_cost(cost: float) -> str:
    return f"{cost:.9g}"


def _open(target: PathOrIO, mode: str):
    if isinstance(target, (str, Path)):
        return open(target, mode, encoding="utf-8"), True
    return target, False


def write_symbols(table: SymbolTable, target: PathOrIO) -> None:
    """Write user symbols as ``symbol<TAB>id`` lines; reserved ids stay implicit."""
    handle, owned = _open(target, "w")
    try:
        for sym, label in table.user_items():
            handle.write(f"{sym}\t{label}\n")
    finally:
        if owned:
            handle.close()


def read_symbols(source: PathOrIO) -> SymbolTable:
    handle, owned = _open(source, "r")
    try:
        table = SymbolTable()
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"symbol table line {lineno}: expected 2 fields")
            sym, label_text = parts
            try:
                label = int(label_text)
            except ValueError:
                raise DataError(f"symbol table line {lineno}: bad id {label_text!r}")
            if sym in RESERVED_SYMBOLS or label < FIRST_USER_LABEL:
                raise ConfigError(
                    f"symbol table line {lineno}: reserved symbol or id {line!r}")
            table.add_with_id(sym, label)
        return table
    finally:
        if owned:
            handle.close()


def write_fst(f: Fst, target: PathOrIO) -> None:
    handle, owned = _open(target, "w")
    try:
        if f.start == NO_STATE:
            return
        order = [f.start] + [q for q in range(f.num_states()) if q != f.start]
        isym = f.isyms.symbol_of
        osym = f.osyms.symbol_of
        for q in order:
            for a in f.states[q]:
                handle.write(
                    f"{q}\t{a.nextstate}\t{isym(a.ilabel)}\t{osym(a.olabel)}\t"
                    f"{format_cost(a.weight)}\n")
            if q in f.finals:
                handle.write(f"{q}\t{format_cost(f.finals[q])}\n")
    finally:
        if owned:
            handle.close()


def read_fst(source: PathOrIO, isyms: SymbolTable,
             osyms: SymbolTable | None = None) -> Fst:
    if osyms is None:
        osyms = isyms
    handle, owned = _open(source, "r")
    try:
        f = Fst(isyms, osyms)

        def state(text: str, lineno: int) -> int:
            try:
                q = int(text)
            except ValueError:
                raise DataError(f"fst line {lineno}: bad state id {text!r}")
            if q < 0:
                raise DataError(f"fst line {lineno}: negative state id")
            while f.num_states() <= q:
                f.add_state()
            return q

        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) == 2:
                q = state(parts[0], lineno)
                f.set_final(q, float(parts[1]))
            elif len(parts) in (4, 5):
                src = state(parts[0], lineno)
                dst = state(parts[1], lineno)
                try:
                    il = isyms.id_of(parts[2])
                    ol = osyms.id_of(parts[3])
                except KeyError as exc:
                    raise DataError(f"fst line {lineno}: {exc}") from None
                cost = float(parts[4]) if len(parts) == 5 else 0.0
                f.add_arc(src, il, ol, cost, dst)
            else:
                raise DataError(f"fst line {lineno}: expected 2, 4 or 5 fields")
            if f.start == NO_STATE:
                f.set_start(state(parts[0], lineno))
        return f
    finally:
        if owned:
            handle.close()


def fst_to_string(f: Fst) -> str:
    buf = io.StringIO()
    write_fst(f, buf)
    return buf.getvalue()


def fst_from_string(text: str, isyms: SymbolTable,
                    osyms: SymbolTable | None = None) -> Fst:
    return read_fst(io.StringIO(text), isyms, osyms)
