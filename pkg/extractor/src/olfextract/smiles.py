"""Minimal SMILES parser.

Covers the organic subset (B, C, N, O, P, S, F, Cl, Br, I and their
aromatic lowercase forms), bracket atoms with isotope/H-count/charge,
branches, ring closures (including %nn and reuse after closure), explicit
bonds - = # : / \\ and dot-separated fragments. Stereo markers are read and
discarded. Implicit hydrogens follow the usual smallest-sufficient-valence
rule; aromatic bonds count 1.5 toward the valence sum.

This is deliberately small: enough structure (atoms, bonds, rings,
aromaticity, implicit H) to compute approximate physicochemical
descriptors, not a chemistry engine.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field


class SmilesError(ValueError):
    pass


ORGANIC_SUBSET = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC_OK = {"b", "c", "n", "o", "p", "s"}

# smallest-first allowed valences for implicit-H assignment
VALENCES = {
    "B": (3,), "C": (4,), "N": (3, 5), "O": (2,), "P": (3, 5),
    "S": (2, 4, 6), "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}

ATOMIC_MASS = {
    "H": 1.008, "B": 10.811, "C": 12.011, "N": 14.007, "O": 15.999,
    "F": 18.998, "Na": 22.990, "Mg": 24.305, "Si": 28.086, "P": 30.974,
    "S": 32.06, "Cl": 35.45, "K": 39.098, "Ca": 40.078, "Se": 78.971,
    "Br": 79.904, "I": 126.904,
}

HALOGENS = {"F", "Cl", "Br", "I"}

_BRACKET = re.compile(
    r"\[(?P<isotope>\d+)?(?P<symbol>[A-Z][a-z]?|[bcnops]|se|as|\*)"
    r"(?P<chiral>@{1,2}(?:TH\d|AL\d|SP\d|TB\d+|OH\d+)?)?"
    r"(?P<hcount>H\d*)?"
    r"(?P<charge>\+{1,3}|-{1,3}|\+\d+|-\d+)?"
    r"(?::(?P<cls>\d+))?\]"
)

_BOND_ORDER = {"-": 1.0, "=": 2.0, "#": 3.0, "$": 4.0, ":": 1.5, "/": 1.0, "\\": 1.0}


@dataclass
class Atom:
    symbol: str            # normalized element symbol, e.g. "C", "Cl"
    aromatic: bool
    charge: int = 0
    explicit_h: int | None = None   # None = derive from valence rules
    isotope: int | None = None
    index: int = 0

    @property
    def mass(self) -> float:
        if self.isotope is not None:
            return float(self.isotope)
        try:
            return ATOMIC_MASS[self.symbol]
        except KeyError:
            raise SmilesError(f"no atomic mass for element {self.symbol!r}")


@dataclass
class Bond:
    a: int
    b: int
    order: float           # 1, 1.5 (aromatic), 2, 3, 4


@dataclass
class Molecule:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)

    def degree(self, i: int) -> int:
        return sum(1 for b in self.bonds if i in (b.a, b.b))

    def order_sum(self, i: int) -> float:
        return sum(b.order for b in self.bonds if i in (b.a, b.b))

    def implicit_h(self, i: int) -> int:
        atom = self.atoms[i]
        if atom.explicit_h is not None:
            return atom.explicit_h
        if atom.symbol not in VALENCES:
            return 0
        if atom.aromatic:
            # sigma connections plus one for the pi system, never promoted
            # to a higher valence state (so three-connected aromatic N has
            # no H; pyrrole-type NH must be written [nH])
            return max(0, VALENCES[atom.symbol][0] - (self.degree(i) + 1))
        need = math.ceil(self.order_sum(i) - 1e-9)
        for valence in VALENCES[atom.symbol]:
            if valence >= need:
                return valence - need
        return 0

    def total_h(self) -> int:
        return sum(self.implicit_h(i) for i in range(len(self.atoms)))

    def components(self) -> int:
        n = len(self.atoms)
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for b in self.bonds:
            ra, rb = find(b.a), find(b.b)
            if ra != rb:
                parent[ra] = rb
        return len({find(i) for i in range(n)})

    def ring_count(self) -> int:
        return len(self.bonds) - len(self.atoms) + self.components()

    def bridges(self) -> set[tuple[int, int]]:
        """Bonds not in any cycle (Tarjan low-link)."""
        n = len(self.atoms)
        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for k, b in enumerate(self.bonds):
            adj[b.a].append((b.b, k))
            adj[b.b].append((b.a, k))
        visited = [False] * n
        tin = [0] * n
        low = [0] * n
        out: set[tuple[int, int]] = set()
        timer = [0]

        def dfs(root):
            stack = [(root, -1, iter(adj[root]))]
            visited[root] = True
            tin[root] = low[root] = timer[0]
            timer[0] += 1
            while stack:
                v, pedge, it = stack[-1]
                advanced = False
                for to, k in it:
                    if k == pedge:
                        continue
                    if visited[to]:
                        low[v] = min(low[v], tin[to])
                    else:
                        visited[to] = True
                        tin[to] = low[to] = timer[0]
                        timer[0] += 1
                        stack.append((to, k, iter(adj[to])))
                        advanced = True
                        break
                if not advanced:
                    stack.pop()
                    if stack:
                        parent_v = stack[-1][0]
                        low[parent_v] = min(low[parent_v], low[v])
                        if low[v] > tin[parent_v]:
                            bond = self.bonds[pedge]
                            out.add((min(bond.a, bond.b), max(bond.a, bond.b)))

        for i in range(n):
            if not visited[i]:
                dfs(i)
        return out

    def ring_bond_flags(self) -> list[bool]:
        bridges = self.bridges()
        return [(min(b.a, b.b), max(b.a, b.b)) not in bridges for b in self.bonds]

    def molecular_weight(self) -> float:
        return sum(a.mass for a in self.atoms) + ATOMIC_MASS["H"] * self.total_h()


def _parse_charge(text: str | None) -> int:
    if not text:
        return 0
    if text in ("+", "++", "+++"):
        return len(text)
    if text in ("-", "--", "---"):
        return -len(text)
    return int(text)


def parse_smiles(s: str) -> Molecule:
    """Parse a SMILES string into a Molecule; raises SmilesError."""
    if not s or not s.strip():
        raise SmilesError("empty SMILES")
    s = s.strip()
    mol = Molecule()
    prev: int | None = None          # index of previous atom in chain
    pending_bond: float | None = None
    stack: list[int | None] = []
    ring_open: dict[int, tuple[int, float | None]] = {}
    i = 0

    def add_atom(atom: Atom) -> None:
        nonlocal prev, pending_bond
        if prev is None and pending_bond is not None:
            raise SmilesError(f"bond symbol with no preceding atom in {s!r}")
        atom.index = len(mol.atoms)
        mol.atoms.append(atom)
        if prev is not None:
            order = pending_bond
            if order is None:
                order = 1.5 if (mol.atoms[prev].aromatic and atom.aromatic) else 1.0
            mol.bonds.append(Bond(prev, atom.index, order))
        prev = atom.index
        pending_bond = None

    def close_ring(num: int) -> None:
        nonlocal pending_bond
        if prev is None:
            raise SmilesError(f"ring closure {num} before any atom in {s!r}")
        if num in ring_open:
            other, saved = ring_open.pop(num)
            order = pending_bond if pending_bond is not None else saved
            if order is None:
                order = 1.5 if (mol.atoms[other].aromatic and mol.atoms[prev].aromatic) else 1.0
            if other == prev:
                raise SmilesError(f"ring closure {num} bonds an atom to itself in {s!r}")
            mol.bonds.append(Bond(other, prev, order))
        else:
            ring_open[num] = (prev, pending_bond)
        pending_bond = None

    while i < len(s):
        ch = s[i]
        if ch == "[":
            m = _BRACKET.match(s, i)
            if not m:
                raise SmilesError(f"malformed bracket atom at position {i} in {s!r}")
            symbol = m.group("symbol")
            aromatic = symbol[0].islower() and symbol != "*"
            norm = symbol.capitalize() if aromatic else symbol
            if symbol == "*":
                raise SmilesError(f"wildcard atom unsupported in {s!r}")
            if norm not in ATOMIC_MASS:
                raise SmilesError(f"unknown element {symbol!r} in {s!r}")
            hcount = m.group("hcount")
            explicit_h = 0
            if hcount:
                explicit_h = int(hcount[1:]) if len(hcount) > 1 else 1
            add_atom(Atom(
                symbol=norm,
                aromatic=aromatic,
                charge=_parse_charge(m.group("charge")),
                explicit_h=explicit_h,
                isotope=int(m.group("isotope")) if m.group("isotope") else None,
            ))
            i = m.end()
        elif s.startswith(("Cl", "Br"), i):
            add_atom(Atom(symbol=s[i:i + 2], aromatic=False))
            i += 2
        elif ch in "BCNOPSFI":
            add_atom(Atom(symbol=ch, aromatic=False))
            i += 1
        elif ch in AROMATIC_OK:
            add_atom(Atom(symbol=ch.upper(), aromatic=True))
            i += 1
        elif ch in _BOND_ORDER:
            if pending_bond is not None:
                raise SmilesError(f"two bond symbols in a row at position {i} in {s!r}")
            pending_bond = _BOND_ORDER[ch]
            i += 1
        elif ch.isdigit():
            close_ring(int(ch))
            i += 1
        elif ch == "%":
            if i + 2 >= len(s) or not s[i + 1:i + 3].isdigit():
                raise SmilesError(f"malformed %nn ring closure at position {i} in {s!r}")
            close_ring(int(s[i + 1:i + 3]))
            i += 3
        elif ch == "(":
            if prev is None:
                raise SmilesError(f"branch before any atom in {s!r}")
            stack.append(prev)
            i += 1
        elif ch == ")":
            if not stack:
                raise SmilesError(f"unmatched ')' at position {i} in {s!r}")
            prev = stack.pop()
            i += 1
        elif ch == ".":
            prev = None
            pending_bond = None
            i += 1
        else:
            raise SmilesError(f"unsupported character {ch!r} at position {i} in {s!r}")

    if stack:
        raise SmilesError(f"unclosed branch in {s!r}")
    if ring_open:
        raise SmilesError(f"unclosed ring closure(s) {sorted(ring_open)} in {s!r}")
    if pending_bond is not None:
        raise SmilesError(f"dangling bond symbol at end of {s!r}")
    if not mol.atoms:
        raise SmilesError(f"no atoms parsed from {s!r}")
    return mol
