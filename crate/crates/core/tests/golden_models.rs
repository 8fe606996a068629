//! Checked-in model files must keep decoding to the same predictions.
//! Regenerate with `UPDATE_GOLDEN=1` after an intentional format change.

mod common;

use std::fs;
use std::path::PathBuf;

use flowhunter::classifiers::codec::{deserialize_model, encode_container, serialize_model, CodecError};
use flowhunter::classifiers::{fit, ClassifierKind, ClassifierSpec, ParamValue};
use flowhunter::flow::LabelClass;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/models")
}

fn spec(kind: ClassifierKind) -> ClassifierSpec {
    let s = ClassifierSpec::default_for(kind);
    match kind {
        ClassifierKind::RandomForest => s.with("n_estimators", ParamValue::Int(5)).unwrap(),
        ClassifierKind::AdaBoost => s.with("n_estimators", ParamValue::Int(5)).unwrap(),
        ClassifierKind::KNN => s.with("n_neighbors", ParamValue::Int(3)).unwrap(),
        _ => s,
    }
}

fn queries() -> Vec<Vec<f64>> {
    let ds = common::synthetic_dataset(60, 0.3, 99);
    ds.x.iter_rows().map(|r| r.to_vec()).collect()
}

fn label_string(ls: &[LabelClass]) -> String {
    ls.iter().map(|l| if l.is_botnet() { 'B' } else { 'N' }).collect()
}

#[test]
fn golden_models_decode_and_predict() {
    let train = common::synthetic_dataset(400, 0.2, 5);
    let q = queries();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for kind in ClassifierKind::ALL {
        let path = dir().join(format!("{}.fhm", kind.name()));
        let expect_path = dir().join(format!("{}.predictions", kind.name()));
        if update {
            let mut m = fit(&spec(kind), &train, 3).unwrap();
            m.fit_time = 0.0;
            let preds: Vec<_> = q.iter().map(|x| m.predict(x).unwrap()).collect();
            fs::write(&path, serialize_model(&m)).unwrap();
            fs::write(&expect_path, label_string(&preds) + "\n").unwrap();
        }
        let bytes = fs::read(&path).unwrap();
        let m = deserialize_model(&bytes).unwrap();
        assert_eq!(m.kind(), kind);
        let preds: Vec<_> = q.iter().map(|x| m.predict(x).unwrap()).collect();
        assert_eq!(label_string(&preds), fs::read_to_string(&expect_path).unwrap().trim_end(), "{kind}");
        assert_eq!(serialize_model(&m), bytes, "{kind} re-encodes identically");

        let mut refit = fit(&spec(kind), &train, 3).unwrap();
        refit.fit_time = 0.0;
        assert_eq!(serialize_model(&refit), bytes, "{kind} training is reproducible");
    }
}

#[test]
fn damaged_golden_models_are_rejected() {
    let bytes = fs::read(dir().join("DecisionTree.fhm")).unwrap();
    let mut flipped = bytes.clone();
    let last = flipped.len() - 1;
    flipped[last] ^= 0x40;
    assert!(matches!(deserialize_model(&flipped), Err(CodecError::Corrupt(_))));
    assert!(matches!(deserialize_model(&bytes[..bytes.len() - 3]), Err(CodecError::Corrupt(_))));
    let v2 = encode_container(2, &bytes[52..]);
    assert_eq!(
        deserialize_model(&v2).unwrap_err(),
        CodecError::VersionMismatch { found: 2, expected: 1 }
    );
}
