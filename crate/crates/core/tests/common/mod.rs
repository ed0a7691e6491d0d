#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rubricnli::corpus::{Corpus, CorpusDocument, Question, RubricItem, RubricJudgment, StudentResponse};
use rubricnli::points::Points;
use rubricnli::seeding::rng_for;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares against `tests/golden/<name>`. With `UPDATE_GOLDEN=1` the file
/// is (re)written instead.
pub fn assert_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read golden file {} ({e}); run with UPDATE_GOLDEN=1", path.display()));
    assert!(actual == expected, "output differs from golden file {}:\n{actual}", path.display());
}

pub fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/chemistry_shape.json")
}

const VOCAB: &[&str] = &[
    "enthalpy", "entropy", "electronegativity", "ionization", "orbital", "valence", "lattice", "dipole",
    "covalent", "ionic", "shielding", "radius", "equilibrium", "catalyst", "activation", "photon",
    "wavelength", "frequency", "quantum", "spin", "hybridization", "resonance", "polarity", "solubility",
    "oxidation", "reduction", "titration", "buffer", "acidity", "molarity", "kinetics", "collision",
    "pressure", "volume", "temperature", "isotope", "nucleus", "proton", "neutron", "electron", "shell",
    "subshell", "octet", "lewis", "vsepr", "bond", "angle", "tetrahedral", "trigonal", "linear",
];

const FILLER: &[&str] = &[
    "because", "therefore", "the", "this", "shows", "higher", "lower", "so", "which", "means", "energy",
    "atoms", "increase", "decrease", "effect", "stronger", "weaker", "trend", "explains", "result",
];

/// A corpus with the published shape of the chemistry dataset: 4 questions
/// with (6, 7, 7, 7) rubric items and (456, 270, 269, 269) responses, each
/// question worth 8 points, and exactly 4880 of the 8392 judgments TRUE.
pub fn chemistry_shaped_document() -> CorpusDocument {
    const ITEMS: [usize; 4] = [6, 7, 7, 7];
    const RESPONSES: [usize; 4] = [456, 270, 269, 269];
    const N_TRUE: usize = 4880;

    let mut doc = CorpusDocument::default();
    let mut vocab: Vec<&str> = VOCAB.to_vec();
    vocab.shuffle(&mut rng_for(2024, "fixture", "vocab"));
    let mut words = vocab.iter().cycle();
    let mut item_words: Vec<Vec<(String, [&str; 2])>> = Vec::new();
    for (q, &n_items) in ITEMS.iter().enumerate() {
        let qid = format!("Q{}", q + 1);
        doc.questions.push(Question { id: qid.clone(), text: format!("Explain the chemistry behind scenario {}.", q + 1) });
        let points: Vec<i64> = if n_items == 6 { vec![2, 2, 1, 1, 1, 1] } else { vec![2, 1, 1, 1, 1, 1, 1] };
        let mut items = Vec::new();
        for (k, p) in points.into_iter().enumerate() {
            let pair = [*words.next().unwrap(), *words.next().unwrap()];
            let id = format!("{qid}-I{}", k + 1);
            doc.rubric_items.push(RubricItem {
                id: id.clone(),
                question_id: qid.clone(),
                text: format!("Mentions {} in relation to {}.", pair[0], pair[1]),
                points: Points::integer(p),
            });
            items.push((id, pair));
        }
        item_words.push(items);
    }

    let n_pairs: usize = ITEMS.iter().zip(RESPONSES).map(|(i, r)| i * r).sum();
    let mut order: Vec<usize> = (0..n_pairs).collect();
    order.shuffle(&mut rng_for(2024, "fixture", "labels"));
    let mut labels = vec![false; n_pairs];
    for &k in &order[..N_TRUE] {
        labels[k] = true;
    }

    let mut rng = rng_for(2024, "fixture", "text");
    let mut k = 0;
    for (q, &n_responses) in RESPONSES.iter().enumerate() {
        let qid = format!("Q{}", q + 1);
        for r in 0..n_responses {
            let rid = format!("{qid}-R{:03}", r + 1);
            let mut sentences = Vec::new();
            for (item_id, pair) in &item_words[q] {
                let label = labels[k];
                k += 1;
                doc.judgments.push(RubricJudgment { response_id: rid.clone(), rubric_item_id: item_id.clone(), label });
                let mut s: Vec<&str> = (0..rng.random_range(2..5)).map(|_| *FILLER.choose(&mut rng).unwrap()).collect();
                if label {
                    s.extend(pair);
                } else if rng.random_bool(0.3) {
                    s.push(pair[rng.random_range(0..2)]);
                }
                s.shuffle(&mut rng);
                sentences.push(s.join(" ") + ".");
            }
            doc.responses.push(StudentResponse { id: rid, question_id: qid.clone(), text: sentences.join(" ") });
        }
    }
    doc
}

pub fn chemistry_shaped() -> Corpus {
    Corpus::from_document(chemistry_shaped_document()).expect("fixture is valid")
}
