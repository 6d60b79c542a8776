use pdt_disasm::scores::{load_labels, load_probabilities, write_labels, write_scores};
use pdt_disasm::{truth_from_scores, Analysis, PropagationMode, Region, Tbc1, TruthVector};

#[test]
fn files_through_prune_and_check() {
    let dir = tempfile::tempdir().unwrap();
    // JCC +1 | OP2 | HALT | NOP NOP HALT, plus junk
    let bytes = vec![
        0x11, 0x01, 0x20, 0x00, 0x00, 0x90, 0x90, 0x00, 0xEE, 0x21, 0x00,
    ];
    let region = Region::with_base(bytes, 0x4000);
    let a = Analysis::new_par(&Tbc1, &region).unwrap();
    a.check_invariants().unwrap();

    let probs: Vec<f64> = (0..region.len())
        .map(|i| [0.9, 0.2, 0.6, 0.05][i % 4])
        .collect();
    let score_path = dir.path().join("p.f32");
    write_scores(&score_path, &probs).unwrap();
    let logits = load_probabilities(&score_path, region.len()).unwrap();
    assert_eq!(logits.iter().filter(|&&l| l > 0.0).count(), 6);

    for mode in [PropagationMode::Faithful, PropagationMode::Exact] {
        let pruned = a.prune(&logits, mode).unwrap();
        assert!(!pruned.retained.is_empty());
        let label_path = dir.path().join(format!("{mode}.i8"));
        write_labels(
            &label_path,
            &TruthVector::from_offsets(region.len(), pruned.retained.iter().copied()),
        )
        .unwrap();
        let truth = load_labels(&label_path, region.len()).unwrap();
        assert!(a.detect(&truth).unwrap().is_clean(), "{mode}");
    }

    // The raw thresholded prediction is not consistent.
    let raw = truth_from_scores(&logits, &a.cfg).unwrap();
    assert!(!a.detect(&raw).unwrap().is_clean());
}

#[test]
fn empty_region() {
    let a = Analysis::new(&Tbc1, &Region::new(Vec::new())).unwrap();
    assert_eq!(a.forest.num_wccs(), 0);
    assert!(a.detect(&TruthVector(Vec::new())).unwrap().is_clean());
    assert!(a
        .prune(&[], PropagationMode::Exact)
        .unwrap()
        .retained
        .is_empty());
}
