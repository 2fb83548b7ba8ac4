"""Approximate physicochemical descriptors from parsed SMILES graphs.

These are structural approximations computed without any proprietary
descriptor software; emitted files are always labeled approx=true and must
never be presented as equivalent to commercial descriptor sets.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

from .smiles import HALOGENS, Molecule, SmilesError, parse_smiles

log = logging.getLogger(__name__)

DESCRIPTOR_NAMES = (
    "mol_weight",
    "heavy_atoms",
    "carbons",
    "heteroatoms",
    "nitrogen_oxygen",
    "hbond_donors",
    "halogens",
    "aromatic_atoms",
    "rings",
    "rotatable_bonds",
    "double_bonds",
    "triple_bonds",
    "sp3_carbon_fraction",
    "net_charge",
    "branch_points",
)


def _rotatable_bonds(mol: Molecule) -> int:
    ring_flags = mol.ring_bond_flags()
    count = 0
    for flag, bond in zip(ring_flags, mol.bonds):
        if flag or bond.order != 1.0:
            continue
        if mol.degree(bond.a) >= 2 and mol.degree(bond.b) >= 2:
            count += 1
    return count


def descriptor_vector(mol: Molecule) -> list[float]:
    heavy = len(mol.atoms)
    carbons = sum(1 for a in mol.atoms if a.symbol == "C")
    sp3_carbons = sum(
        1 for i, a in enumerate(mol.atoms)
        if a.symbol == "C" and not a.aromatic
        and all(b.order == 1.0 for b in mol.bonds if i in (b.a, b.b))
    )
    donors = sum(
        1 for i, a in enumerate(mol.atoms)
        if a.symbol in ("N", "O", "S") and mol.implicit_h(i) > 0
    )
    return [
        mol.molecular_weight(),
        float(heavy),
        float(carbons),
        float(sum(1 for a in mol.atoms if a.symbol != "C")),
        float(sum(1 for a in mol.atoms if a.symbol in ("N", "O"))),
        float(donors),
        float(sum(1 for a in mol.atoms if a.symbol in HALOGENS)),
        float(sum(1 for a in mol.atoms if a.aromatic)),
        float(mol.ring_count()),
        float(_rotatable_bonds(mol)),
        float(sum(1 for b in mol.bonds if b.order == 2.0)),
        float(sum(1 for b in mol.bonds if b.order == 3.0)),
        (sp3_carbons / carbons) if carbons else 0.0,
        float(sum(a.charge for a in mol.atoms)),
        float(sum(1 for i in range(heavy) if mol.degree(i) >= 3)),
    ]


def compute_descriptors(structures, out_path) -> tuple[int, int]:
    """Write the descriptor CSV for (molecule_id, smiles) pairs.

    Rows that fail to parse are omitted and logged. Returns
    (written, skipped). A sidecar JSON note records approx=true and the
    descriptor list.
    """
    out_path = Path(out_path)
    written = skipped = 0
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + list(DESCRIPTOR_NAMES))
        for mid, smi in structures:
            try:
                mol = parse_smiles(smi)
                values = descriptor_vector(mol)
            except SmilesError as e:
                log.warning("descriptors: skipping %s: %s", mid, e)
                skipped += 1
                continue
            w.writerow([mid] + [repr(float(v)) for v in values])
            written += 1
    meta = out_path.with_suffix(".meta.json")
    meta.write_text(
        '{"approx": true, "source": "olfextract structural approximation", '
        f'"descriptors": {list(DESCRIPTOR_NAMES)!r}}}\n'.replace("'", '"')
    )
    return written, skipped
