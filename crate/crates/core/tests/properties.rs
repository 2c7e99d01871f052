use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robustbf::bladrbf::CommGraph;
use robustbf::blrbf::{primal_dual_step, manage_cuts, SolverConfig, SolverState};
use robustbf::cutting_planes::{drop_inactive, parse_cuts, write_cuts, CutOrigin, CutSet, CuttingPlane};
use robustbf::evaluator::{wmmse_baseline, worst_case_wsr};
use robustbf::experiment::{parse_config, random_beamformer};
use robustbf::lower_solver::{phi, AlmConfig, AlmState};
use robustbf::model::*;

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..=3, 1usize..=3, 1usize..=2)
}

fn instance(m: usize, n: usize, k: usize, p: f64, eps: f64, seed: u64) -> (NetworkConfig, ChannelSet, BeamformerVec, ErrorVec) {
    let net = NetworkConfig::uniform(m, n, k, p);
    let radii = uniform_radii(&net, eps);
    let ch = generate_rayleigh_channels(&net, &radii, seed).unwrap();
    let v = random_beamformer(&net, &mut ChaCha8Rng::seed_from_u64(seed));
    let d = sample_error(&net.layout(), &radii, seed ^ 1).unwrap();
    (net, ch, v, d)
}

/// Plain central differences, kept separate from the library's helper.
fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut q = x.to_vec();
            p[i] += h;
            q[i] -= h;
            (f(&p) - f(&q)) / (2.0 * h)
        })
        .collect()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn packing_is_a_norm_preserving_bijection((m, n, k) in dims(), seed in any::<u64>()) {
        let l = PackingLayout::new(m, n, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<Complex64> = (0..l.v_complex_len())
            .map(|_| Complex64::new(rand::Rng::random_range(&mut rng, -3.0..3.0), rand::Rng::random_range(&mut rng, -3.0..3.0)))
            .collect();
        let x = l.pack_v(&z).unwrap();
        prop_assert_eq!(x.len(), 2 * z.len());
        prop_assert_eq!(l.unpack_v(&x).unwrap(), z.clone());
        let nz: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        let nx: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((nz - nx).abs() <= 1e-12 * nz.max(1.0));
    }

    #[test]
    fn global_phase_leaves_wsr_unchanged((m, n, k) in dims(), seed in any::<u64>(), theta in -3.2f64..3.2) {
        let (net, ch, v, d) = instance(m, n, k, 4.0, 0.1, seed);
        let l = net.layout();
        let rot = Complex64::from_polar(1.0, theta);
        let vr: Vec<Complex64> = l.unpack_v(&v).unwrap().iter().map(|z| z * rot).collect();
        let vr = BeamformerVec(l.pack_v(&vr).unwrap());
        let a = wsr(&net, &ch, &v, &d).unwrap();
        let b = wsr(&net, &ch, &vr, &d).unwrap();
        prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn sinr_nonnegative_and_falls_with_noise((m, n, k) in dims(), seed in any::<u64>()) {
        let (net, ch, v, d) = instance(m, n, k, 2.0, 0.05, seed);
        let mut noisy = net.clone();
        noisy.sigma2.iter_mut().for_each(|s| *s *= 2.0);
        for mm in 0..m {
            for kk in 0..k {
                let s = sinr(&net, &ch, &v, &d, kk, mm).unwrap();
                let s2 = sinr(&noisy, &ch, &v, &d, kk, mm).unwrap();
                prop_assert!(s >= 0.0);
                prop_assert!(s2 < s || s == 0.0);
            }
        }
    }

    #[test]
    fn gradients_match_central_differences((m, n, k) in dims(), seed in any::<u64>(), base in prop::sample::select(vec![2.0, std::f64::consts::E])) {
        let (mut net, ch, v, d) = instance(m, n, k, 3.0, 0.1, seed);
        net.log_base = base;
        let gv = grad_wsr_v(&net, &ch, &v, &d).unwrap();
        let gd = grad_wsr_delta(&net, &ch, &v, &d).unwrap();
        let fv = central_diff(|x| wsr(&net, &ch, &BeamformerVec(x.to_vec()), &d).unwrap(), &v, 1e-6);
        let fd = central_diff(|x| wsr(&net, &ch, &v, &ErrorVec(x.to_vec())).unwrap(), &d, 1e-6);
        prop_assert!(rel(&gv, &fv) <= 1e-5, "V: {}", rel(&gv, &fv));
        prop_assert!(rel(&gd, &fd) <= 1e-5, "Δ: {}", rel(&gd, &fd));
    }

    #[test]
    fn phi_stays_in_balls_and_is_adversarial((m, n, k) in dims(), seed in any::<u64>(), eps in 0.01f64..0.3) {
        let (net, ch, v, _) = instance(m, n, k, 2.0, eps, seed);
        let l = net.layout();
        let init = AlmState::initial(&l, &ch.radii, None);
        let d = phi(&v, &AlmConfig::high_accuracy(200), &init, &ch, &net).unwrap();
        for b in 0..l.num_blocks() {
            prop_assert!(l.delta_block_norm(&d, b) <= eps + 1e-12);
        }
        let nominal = wsr(&net, &ch, &v, &ErrorVec::zeros(l.delta_len())).unwrap();
        prop_assert!(wsr(&net, &ch, &v, &d).unwrap() <= nominal + 1e-9);
    }

    #[test]
    fn duals_never_negative(seed in 0u64..1000) {
        let (net, ch, _, _) = instance(2, 2, 1, 1.0, 0.05, seed);
        let cfg = SolverConfig::default();
        let mut st = SolverState::initial(&net, seed, 0, None).unwrap();
        for _ in 0..60 {
            st = primal_dual_step(&st, &cfg, &net, &ch).unwrap();
            if (st.t - 1).is_multiple_of(cfg.k_pre) {
                st = manage_cuts(&st, &cfg, &net, &ch).unwrap();
            }
            prop_assert!(st.cuts.duals().iter().all(|l| *l >= 0.0));
        }
    }

    #[test]
    fn drop_keeps_ids_and_active_cuts(duals in prop::collection::vec(prop::sample::select(vec![0.0, 1e-13, 0.5, 2.0]), 0..12)) {
        let mut set = CutSet::new();
        for (i, l) in duals.iter().enumerate() {
            let cp = CuttingPlane::new(10 + 3 * i as u64, CutOrigin::G, vec![1.0, i as f64], vec![], -1.0).unwrap();
            set.push(cp, *l, 0).unwrap();
        }
        let kept = drop_inactive(&set);
        let expect: Vec<u64> = set.iter().filter(|e| e.lambda > 1e-12).map(|e| e.cut.id).collect();
        prop_assert_eq!(kept.ids(), expect);
    }

    #[test]
    fn channel_dump_round_trips((m, n, k) in dims(), seed in any::<u64>(), eps in 0.0f64..1.0) {
        let net = NetworkConfig::uniform(m, n, k, 1.0);
        let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, eps), seed).unwrap();
        let (est, truth) = write_channel_dump(&ch);
        prop_assert_eq!(read_channel_dump(&est, truth.as_deref()).unwrap(), ch);
    }

    #[test]
    fn cut_wire_round_trips(a in prop::collection::vec(-1e6f64..1e6, 1..8), b in prop::collection::vec(-1e3f64..1e3, 0..8), kappa in -1e6f64..1e6, id in any::<u64>(), node in 0usize..64) {
        let cuts = vec![
            CuttingPlane::new(id, CutOrigin::Received(node), a.clone(), b, kappa).unwrap(),
            CuttingPlane::new(id ^ 1, CutOrigin::Power(node), a, vec![], -kappa).unwrap(),
        ];
        prop_assert_eq!(parse_cuts(&write_cuts(&cuts), None).unwrap(), cuts);
    }

    #[test]
    fn graph_text_round_trips(nodes in 1usize..12, p in 0.0f64..1.0, seed in any::<u64>()) {
        let g = CommGraph::random_strongly_connected(nodes, p, seed).unwrap();
        prop_assert_eq!(CommGraph::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn parsers_never_panic(s in "\\PC{0,200}") {
        let _ = parse_channel_dump(&s);
        let _ = parse_cuts(&s, None);
        let _ = CommGraph::parse(&s);
        let _ = parse_config(&s);
    }

    #[test]
    fn parsers_never_panic_on_numeric_noise(s in "[0-9 .eE+\\-|:#\\n]{0,200}", head in "[0-9]{1,2} [0-9]{1,2} [0-9]{1,2}\\n") {
        let _ = parse_channel_dump(&format!("{head}{s}"));
        let _ = parse_cuts(&format!("1 g {s}"), None);
        let _ = CommGraph::parse(&s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn worst_case_shrinks_as_balls_grow(seed in any::<u64>(), e1 in 0.0f64..0.1, de in 0.0f64..0.1) {
        let net = NetworkConfig::uniform(2, 2, 1, 3.0);
        let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, 0.0), seed).unwrap();
        let v = random_beamformer(&net, &mut ChaCha8Rng::seed_from_u64(seed));
        let alm = AlmConfig::high_accuracy(500);
        let small = worst_case_wsr(&net, &ch.with_uniform_radius(e1), &v, 8, 32, &alm, seed).unwrap();
        let big = worst_case_wsr(&net, &ch.with_uniform_radius(e1 + de), &v, 8, 32, &alm, seed).unwrap();
        prop_assert!(big.wsr_alm <= small.wsr_alm + 1e-6, "{} > {}", big.wsr_alm, small.wsr_alm);
        prop_assert!(big.wsr_alm <= big.wsr_sampling + 1e-9);
    }

    #[test]
    fn wmmse_history_is_monotone((m, n, k) in dims(), seed in any::<u64>()) {
        let net = NetworkConfig::uniform(m, n, k, 10.0);
        let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, 0.0), seed).unwrap();
        let rep = wmmse_baseline(&net, &ch, 200, 1e-10, seed).unwrap();
        for w in rep.history.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn rayleigh_moments() {
    let net = NetworkConfig::uniform(1, 50_000, 1, 1.0);
    let ch = generate_rayleigh_channels(&net, &[0.0], 2024).unwrap();
    let xs: Vec<f64> = ch.h_est.iter().flat_map(|z| [z.re, z.im]).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() <= 0.01, "mean {mean}");
    assert!((var - 0.5).abs() <= 0.01, "var {var}");
}

#[test]
fn corpus_seeds_parse() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let read = |t: &str, f: &str| std::fs::read_to_string(root.join(t).join(f)).unwrap();
    parse_channel_dump(&read("channel_dump", "scalar")).unwrap();
    parse_channel_dump(&read("channel_dump", "two_cells")).unwrap();
    let both = read("channel_dump", "with_truth");
    let (est, truth) = both.split_once('\u{c}').unwrap();
    assert!(read_channel_dump(est, Some(truth)).unwrap().h_true.is_some());
    assert_eq!(parse_cuts(&read("cut_wire", "power"), None).unwrap().len(), 1);
    assert_eq!(parse_cuts(&read("cut_wire", "g_and_received"), None).unwrap().len(), 2);
    assert_eq!(CommGraph::parse(&read("graph_edges", "ring3")).unwrap(), CommGraph::ring(3).unwrap());
    assert_eq!(CommGraph::parse(&read("graph_edges", "chain4")).unwrap().nodes(), 4);
    parse_config(&read("experiment_config", "minimal.toml")).unwrap();
    parse_config(&read("experiment_config", "full.toml")).unwrap();
}
