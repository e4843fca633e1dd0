use uncq::causal::{benchmark_with, causal_scores, CausalConfig, Direction, OracleScorer, RandomScorer};
use uncq::data::{gen_causal_pair, CausalKind};

fn quick() -> CausalConfig {
    let mut cfg = CausalConfig::default();
    cfg.train.epochs = 30;
    cfg.train.hidden = vec![16, 16];
    cfg
}

#[test]
fn swapping_the_pair_swaps_the_scores() {
    let pair = gen_causal_pair(CausalKind::An, 400, 5).unwrap();
    let a = causal_scores(&pair.x, &pair.y, &[1, 3], &quick()).unwrap();
    let b = causal_scores(&pair.y, &pair.x, &[1, 3], &quick()).unwrap();
    for (va, vb) in a.iter().zip(&b) {
        assert_eq!(va.score_xy, vb.score_yx);
        assert_eq!(va.score_yx, vb.score_xy);
    }
}

#[test]
fn positive_affine_rescaling_keeps_the_verdict() {
    let pair = gen_causal_pair(CausalKind::An, 400, 6).unwrap();
    let x2: Vec<f64> = pair.x.iter().map(|v| 3.0 * v + 11.0).collect();
    let y2: Vec<f64> = pair.y.iter().map(|v| 0.25 * v - 2.0).collect();
    let a = causal_scores(&pair.x, &pair.y, &[3], &quick()).unwrap().remove(0);
    let b = causal_scores(&x2, &y2, &[3], &quick()).unwrap().remove(0);
    assert_eq!(a.direction, b.direction);
    assert!((a.score_xy - b.score_xy).abs() < 1e-3 * a.score_xy, "{a:?} {b:?}");
    assert!((a.score_yx - b.score_yx).abs() < 1e-3 * a.score_yx, "{a:?} {b:?}");
}

#[test]
fn endpoint_scorers() {
    let oracle = benchmark_with(&OracleScorer, CausalKind::Ls, 40, 200, &[1], 0).unwrap();
    assert_eq!(oracle[0].accuracy, 1.0);
    let random = benchmark_with(&RandomScorer, CausalKind::Ls, 400, 100, &[1], 0).unwrap();
    assert!((random[0].accuracy - 0.5).abs() < 0.1, "{}", random[0].accuracy);
    let truths = random[0].verdicts.iter().filter(|o| o.truth == Direction::XtoY).count();
    assert!(truths > 150 && truths < 250, "orientation is randomized: {truths}");
}

#[test]
fn too_few_points_is_rejected() {
    let x: Vec<f64> = (0..50).map(f64::from).collect();
    assert!(causal_scores(&x, &x, &[1], &quick()).is_err());
}
