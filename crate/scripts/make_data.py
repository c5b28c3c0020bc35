"""Regenerates the bundled molecule sets.

The parser corpus and the hydroxyl toy set come from the ChEMBL drug lists
shipped inside the datamol wheel (Apache-2.0). ESOL (Delaney, 1,128
molecules) comes from the gauche sdist (MIT), keeping only the SMILES and the
measured log solubility. Needs rdkit; the outputs are committed, so this only
matters when refreshing them.

    python scripts/make_data.py /path/to/datamol/data [/path/to/gauche/ESOL.csv]
"""
import csv
import random
import sys
from pathlib import Path

from rdkit import Chem, RDLogger

RDLogger.DisableLog("rdApp.*")

ROOT = Path(__file__).resolve().parent.parent
ALLOWED = set("B C N O P S F Cl Br I".split()) | {"Na", "K", "Li", "Ca", "Mg", "Zn", "H"}
HYDROXYL = Chem.MolFromSmarts("[OX2H]")


def usable(smi, max_heavy):
    mol = Chem.MolFromSmiles(smi)
    if mol is None or mol.GetNumHeavyAtoms() > max_heavy:
        return None
    if any(a.GetSymbol() not in ALLOWED for a in mol.GetAtoms()):
        return None
    # aromatic atoms outside b/c/n/o/p/s cannot be written lowercase
    if any(a.GetIsAromatic() and a.GetSymbol() not in "BCNOPS" for a in mol.GetAtoms()):
        return None
    return mol


def read_smiles(path):
    with open(path) as fh:
        return [row["smiles"] for row in csv.DictReader(fh)]


def main(src):
    src = Path(src)
    drugs = read_smiles(src / "chembl_drugs.csv")
    samples = read_smiles(src / "chembl_samples.csv")

    corpus = []
    seen = set()
    for smi in drugs:
        if smi in seen or usable(smi, 70) is None:
            continue
        seen.add(smi)
        corpus.append(smi)
    random.Random(7).shuffle(corpus)
    corpus = corpus[:500]
    (ROOT / "crates/core/data/corpus500.smi").write_text("\n".join(corpus) + "\n")

    pos, neg = [], []
    for smi in samples:
        if "." in smi or smi in seen:
            continue
        mol = usable(smi, 35)
        if mol is None or mol.GetNumHeavyAtoms() < 6:
            continue
        seen.add(smi)
        (pos if mol.HasSubstructMatch(HYDROXYL) else neg).append(smi)
    rng = random.Random(11)
    rng.shuffle(pos)
    rng.shuffle(neg)
    toy = [(s, 1) for s in pos[:100]] + [(s, 0) for s in neg[:100]]
    rng.shuffle(toy)
    with open(ROOT / "crates/core/data/hydroxyl_toy.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["smiles", "hydroxyl"])
        w.writerows(toy)

    print(len(corpus), len(pos), len(neg))


def esol(path):
    with open(path) as fh:
        rows = [
            (r["smiles"], r["measured log solubility in mols per litre"])
            for r in csv.DictReader(fh)
        ]
    with open(ROOT / "data/esol.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["smiles", "logS"])
        w.writerows(rows)
    print(len(rows))


if __name__ == "__main__":
    main(sys.argv[1])
    if len(sys.argv) > 2:
        esol(sys.argv[2])
