mod common;

use chembridge::data_ingest::load_dataset;
use chembridge::fingerprint::{ecfp, DEFAULT_NBITS, DEFAULT_RADIUS};
use chembridge::scaffold::molecule_scaffold_key;
use chembridge::{parse_smiles, Xoshiro256StarStar};
use common::{fixture, random_smiles};

fn fixture_smiles() -> Vec<String> {
    let ds = load_dataset(fixture("drugs.csv"), 0).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    ds.records
        .iter()
        .filter(|r| seen.insert(r.canonical_smiles.clone()))
        .map(|r| r.canonical_smiles.clone())
        .collect()
}

#[test]
fn every_fixture_structure_parses() {
    for smi in fixture_smiles() {
        let g = parse_smiles(&smi).unwrap_or_else(|e| panic!("{smi}: {e}"));
        assert!(g.atom_count() > 0, "{smi}");
    }
}

#[test]
fn rewritings_keep_fingerprint_and_scaffold() {
    let mut rng = Xoshiro256StarStar::from_seed_u64(2024);
    for smi in fixture_smiles() {
        let g = parse_smiles(&smi).unwrap();
        let fp = ecfp(&g, DEFAULT_RADIUS, DEFAULT_NBITS).unwrap();
        let key = molecule_scaffold_key(&g);
        for _ in 0..5 {
            let alt = random_smiles(&g, &mut rng);
            let h = parse_smiles(&alt).unwrap_or_else(|e| panic!("{smi} -> {alt}: {e}"));
            assert_eq!(h.atom_count(), g.atom_count(), "{smi} -> {alt}");
            assert_eq!(
                ecfp(&h, DEFAULT_RADIUS, DEFAULT_NBITS).unwrap(),
                fp,
                "{smi} -> {alt}"
            );
            assert_eq!(molecule_scaffold_key(&h), key, "{smi} -> {alt}");
        }
    }
}

#[test]
fn writer_handles_many_rings() {
    // more than nine simultaneously open closures needs %nn labels
    let cubane = "C12C3C4C1C5C2C3C45";
    let coronene = "c1cc2ccc3ccc4ccc5ccc6ccc1c7c2c3c4c5c67";
    let mut rng = Xoshiro256StarStar::from_seed_u64(5);
    for smi in [cubane, coronene] {
        let g = parse_smiles(smi).unwrap();
        let fp = ecfp(&g, 2, 2048).unwrap();
        for _ in 0..20 {
            let alt = random_smiles(&g, &mut rng);
            assert_eq!(
                ecfp(&parse_smiles(&alt).unwrap(), 2, 2048).unwrap(),
                fp,
                "{alt}"
            );
        }
    }
}
