//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p fairscope --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use fairscope::commands::{self, Grid};
use fairscope::report::MetricsFile;
use fairscope::PipelineConfig;
use fairscope_core::augment::{cutmix_with_patch, decompose, freq_cutmix_with_patch, high_pass, low_pass, CutPatch, FreqMask, MaskLayout};
use fairscope_core::concepts::{bias_aware_weights, css, union_probability, ConceptVector, CssRecord, GradientMatrix};
use fairscope_core::data::{Label, Split};
use fairscope_core::fairness::{auc, f_eo, f_fpr, f_tpr, PredictionRecord};
use fairscope_core::model::{cross_entropy, forward_values, input_gradient, loss_and_grads, MlpParams};
use fairscope_core::numerics::{fft2, ifft2, PcaModel};
use fairscope_core::pipeline::Mode;
use fairscope_core::{Complex, Matrix, Rng, Tensor2D};

type Check = Result<String, String>;

struct Harness {
    failures: usize,
}

impl Harness {
    fn run(&mut self, name: &str, budget_secs: f64, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(detail) if secs > budget_secs => Err(format!("{detail}; over budget {budget_secs}s")),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            self.failures += 1;
        }
        println!("{tag} {name}: {detail} [{secs:.2}s]");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_image(rng: &mut Rng, h: usize, w: usize) -> Tensor2D {
    Tensor2D::from_fn(h, w, |_, _| rng.normal()).unwrap()
}

/// Textbook O(N^4) transform, kept separate from the library FFT.
fn naive_dft(x: &Tensor2D) -> Vec<Complex> {
    let (h, w) = (x.height(), x.width());
    let mut out = vec![Complex::new(0.0, 0.0); h * w];
    for u in 0..h {
        for v in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let theta = -2.0 * std::f64::consts::PI * ((u * r) as f64 / h as f64 + (v * c) as f64 / w as f64);
                    re += x.get(r, c) * theta.cos();
                    im += x.get(r, c) * theta.sin();
                }
            }
            out[u * w + v] = Complex::new(re, im);
        }
    }
    out
}

fn numerics() -> Check {
    let mut rng = Rng::new(1);
    let (mut roundtrip, mut parseval): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let x = random_image(&mut rng, 32, 32);
        let s = fft2(&x).map_err(|e| e.to_string())?;
        roundtrip = roundtrip.max(ifft2(&s).map_err(|e| e.to_string())?.max_abs_diff(&x));
        let rel = (s.energy() / 1024.0 - x.energy()).abs() / x.energy();
        parseval = parseval.max(rel);
    }
    let samples: Vec<Vec<f64>> = (0..200).map(|_| (0..16).map(|_| rng.normal()).collect()).collect();
    let pca = PcaModel::fit(&Matrix::from_rows(&samples).unwrap(), 8).map_err(|e| e.to_string())?;
    let b = pca.basis();
    let mut ortho: f64 = 0.0;
    for i in 0..b.rows() {
        for j in 0..b.rows() {
            let d: f64 = b.row(i).iter().zip(b.row(j)).map(|(a, c)| a * c).sum();
            ortho = ortho.max((d - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    ensure(roundtrip < 1e-9, || format!("roundtrip {roundtrip:e}"))?;
    ensure(parseval < 1e-6, || format!("parseval {parseval:e}"))?;
    ensure(ortho < 1e-9, || format!("orthonormality {ortho:e}"))?;
    Ok(format!("roundtrip {roundtrip:.1e}, parseval {parseval:.1e}, orthonormality {ortho:.1e}"))
}

fn decomposition() -> Check {
    let mut rng = Rng::new(2);
    let mut worst: f64 = 0.0;
    for layout in [MaskLayout::Centered, MaskLayout::Literal] {
        for alpha in [0.25, 0.5, 0.75] {
            let mask = FreqMask::new(alpha, layout).unwrap();
            for _ in 0..10 {
                let x = random_image(&mut rng, 32, 32);
                let (lf, hf) = decompose(&x, &mask).map_err(|e| e.to_string())?;
                worst = worst.max(lf.zip_with(&hf, |a, b| a + b).unwrap().max_abs_diff(&x));
                if layout == MaskLayout::Centered {
                    // the corner block is not conjugate-symmetric, so these two hold only for the centered mask
                    worst = worst.max(low_pass(&lf, &mask).unwrap().max_abs_diff(&lf));
                    worst = worst.max(high_pass(&lf, &mask).unwrap().values().iter().fold(0.0, |m, v| m.max(v.abs())));
                }
            }
        }
    }
    ensure(worst < 1e-9, || format!("identity error {worst:e}"))?;
    let x = random_image(&mut rng, 32, 32);
    for layout in [MaskLayout::Centered, MaskLayout::Literal] {
        let (lf1, hf1) = decompose(&x, &FreqMask::new(1.0, layout).unwrap()).unwrap();
        let (lf0, hf0) = decompose(&x, &FreqMask::new(0.0, layout).unwrap()).unwrap();
        ensure(lf1 == x && hf1.values().iter().all(|&v| v == 0.0), || format!("{layout:?} alpha=1 not exact"))?;
        ensure(lf0.values().iter().all(|&v| v == 0.0) && hf0 == x, || format!("{layout:?} alpha=0 not exact"))?;
    }
    Ok(format!("worst identity error {worst:.1e}; alpha 0 and 1 exact"))
}

fn augmentation() -> Check {
    let mut rng = Rng::new(3);
    let mask = FreqMask::default();
    let x_i = random_image(&mut rng, 32, 32);
    let x_j = random_image(&mut rng, 32, 32);

    let empty = freq_cutmix_with_patch(&x_i, &x_j, &mask, &CutPatch::EMPTY).unwrap();
    let empty_err = empty.max_abs_diff(&x_i);
    ensure(empty_err < 1e-9, || format!("empty patch changed the image by {empty_err:e}"))?;

    for _ in 0..20 {
        let patch = CutPatch::sample(32, 32, &mut rng);
        let out = freq_cutmix_with_patch(&x_i, &x_j, &mask, &patch).unwrap();
        for r in 0..32 {
            for c in 0..32 {
                if !patch.contains(r, c) && out.get(r, c) != x_i.get(r, c) {
                    return Err(format!("kept pixel ({r},{c}) changed"));
                }
            }
        }
    }

    let full = freq_cutmix_with_patch(&x_i, &x_j, &mask, &CutPatch::full(32, 32)).unwrap();
    let (mixed, original) = (naive_dft(&full), naive_dft(&x_i));
    let mut spectral: f64 = 0.0;
    for u in 0..32 {
        for v in 0..32 {
            if !mask.keeps(u, v, 32, 32) {
                let (a, b) = (mixed[u * 32 + v], original[u * 32 + v]);
                spectral = spectral.max(((a.re - b.re).powi(2) + (a.im - b.im).powi(2)).sqrt());
            }
        }
    }
    ensure(spectral < 1e-6, || format!("out-of-mask spectrum moved by {spectral:e}"))?;

    // smooth content plus a planted grid-frequency artifact on x_i only
    let smooth = |rng: &mut Rng| {
        let (a, b, p) = (rng.normal(), rng.normal(), rng.uniform() * 6.28);
        Tensor2D::from_fn(32, 32, |r, c| a * (0.2 * r as f64 + p).sin() + b * (0.15 * c as f64).cos()).unwrap()
    };
    let noisy = |t: Tensor2D, rng: &mut Rng| t.map(|v| v + 0.02 * rng.normal());
    let artifact = Tensor2D::from_fn(32, 32, |r, c| 0.05 * (std::f64::consts::PI * (r + c) as f64 * 14.0 / 16.0).cos()).unwrap();
    let base_i = smooth(&mut rng);
    let x_i = noisy(base_i.zip_with(&artifact, |a, b| a + b).unwrap(), &mut rng);
    let base_j = smooth(&mut rng);
    let x_j = noisy(base_j, &mut rng);
    let band = |t: &Tensor2D| fft2(t).unwrap().energy_where(|u, v| u == 14 && v == 14 || u == 18 && v == 18);
    let full = CutPatch::full(32, 32);
    let pf = band(&freq_cutmix_with_patch(&x_i, &x_j, &mask, &full).unwrap()) / band(&x_j);
    let cm = band(&cutmix_with_patch(&x_i, &x_j, &full).unwrap()) / band(&x_j);
    ensure(pf >= 10.0, || format!("PF artifact ratio {pf:.2}"))?;
    ensure(cm <= 1.1, || format!("CM artifact ratio {cm:.2}"))?;
    Ok(format!("empty patch {empty_err:.1e}, out-of-mask {spectral:.1e}, artifact ratio PF {pf:.1} vs CM {cm:.2}"))
}

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn gradients() -> Check {
    const H: f64 = 1e-5;
    let mut rng = Rng::new(4);
    let p = MlpParams::init(1024, 64, 32, 2, &mut rng);
    let batch: Vec<(Vec<f64>, Label)> = (0..8)
        .map(|i| ((0..1024).map(|_| rng.normal()).collect(), Label::ALL[i % 2]))
        .collect();
    let view: Vec<(&[f64], Label)> = batch.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
    let loss = |q: &MlpParams| {
        batch.iter().map(|(x, y)| cross_entropy(&forward_values(q, x).unwrap().logits, *y)).sum::<f64>() / batch.len() as f64
    };
    let (_, grads) = loss_and_grads(&p, &view).map_err(|e| e.to_string())?;
    let sizes: Vec<usize> = p.blocks().iter().map(|b| b.len()).collect();
    let mut worst: f64 = 0.0;
    for draw in 0..200 {
        let block = if draw < sizes.len() { draw } else { rng.weighted_index(&sizes.iter().map(|&s| s as f64).collect::<Vec<_>>()).unwrap() };
        let idx = rng.below(sizes[block]);
        let mut plus = p.clone();
        plus.blocks_mut()[block][idx] += H;
        let mut minus = p.clone();
        minus.blocks_mut()[block][idx] -= H;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * H);
        worst = worst.max(relative_error(grads.blocks()[block][idx], numeric));
    }
    let margin = |x: &[f64]| {
        let l = forward_values(&p, x).unwrap().logits;
        l[1] - l[0]
    };
    let x = &batch[0].0;
    let g = input_gradient(&p, x).map_err(|e| e.to_string())?;
    let mut worst_input: f64 = 0.0;
    for _ in 0..200 {
        let i = rng.below(x.len());
        let mut plus = x.clone();
        plus[i] += H;
        let mut minus = x.clone();
        minus[i] -= H;
        worst_input = worst_input.max(relative_error(g[i], (margin(&plus) - margin(&minus)) / (2.0 * H)));
    }
    ensure(worst < 1e-4, || format!("parameter relative error {worst:e}"))?;
    ensure(worst_input < 1e-4, || format!("saliency relative error {worst_input:e}"))?;
    Ok(format!("parameters {worst:.1e}, saliency {worst_input:.1e}"))
}

fn concept(dir: Vec<f64>) -> ConceptVector {
    ConceptVector { name: "c".into(), direction: dir, accuracy: 1.0, low_quality: false }
}

fn env(k: usize, values: Vec<f64>) -> GradientMatrix {
    GradientMatrix { environment: k, matrix: Matrix::new(2, 2, values).unwrap() }
}

fn css_oracles() -> Check {
    let ms = [env(0, vec![1.0, 0.0, 0.0, 1.0]), env(1, vec![3.0, 0.0, 0.0, 1.0])];
    let r = css(&[concept(vec![1.0, 0.0]), concept(vec![0.0, 1.0])], &ms).map_err(|e| e.to_string())?;
    ensure(r[0].score == 1.0 && r[0].class == 0, || format!("first example gave S={} y'={}", r[0].score, r[0].class))?;
    ensure(r[1].score == 0.0 && r[1].class == 1, || format!("second example gave S={} y'={}", r[1].score, r[1].class))?;

    let mut rng = Rng::new(5);
    let concepts: Vec<ConceptVector> = (0..5).map(|_| concept(vec![rng.normal(), rng.normal()])).collect();
    let single = css(&concepts, &[env(0, (0..4).map(|_| rng.normal()).collect())]).unwrap();
    ensure(single.iter().all(|c| c.score == 0.0), || "K=1 gave a nonzero score".into())?;
    let many: Vec<GradientMatrix> = (0..4).map(|k| env(k, (0..4).map(|_| rng.normal()).collect())).collect();
    for c in css(&concepts, &many).unwrap() {
        ensure(c.masked.iter().sum::<f64>() == c.score, || "masked scores do not sum to S".into())?;
    }

    let u = union_probability([0.25, 0.75]);
    ensure((u - 0.8125).abs() < 1e-12, || format!("union {u}"))?;
    // one class, two concepts with S = 1 and 3 both present in a cluster of four
    let records = vec![
        CssRecord { concept: "a".into(), score: 1.0, class: 0, masked: vec![1.0, 0.0], projections: vec![] },
        CssRecord { concept: "b".into(), score: 3.0, class: 0, masked: vec![3.0, 0.0], projections: vec![] },
    ];
    let w = bias_aware_weights(&[vec![4, 4], vec![4, 4]], &records, &[vec![vec![0, 1], vec![]], vec![vec![], vec![]]]);
    let (pc, cw) = (&w.concept_probability[0], &w.clusters[0][0]);
    ensure(pc[0] == 0.25 && pc[1] == 0.75, || format!("concept probabilities {pc:?}"))?;
    ensure((cw.bias_score - 0.8125).abs() < 1e-12 && (cw.weight - 0.203125).abs() < 1e-12, || format!("S {} W {}", cw.bias_score, cw.weight))?;
    Ok("S=1.0/y'=0, S=0/y'=1, K=1, masking, 0.8125, 0.203125".into())
}

fn rec(score: f64, label: Label, group: usize) -> PredictionRecord {
    PredictionRecord::new(score, label, group, 0.5)
}

fn fairness_oracles() -> Check {
    let hand = [rec(0.9, Label::Real, 0), rec(0.1, Label::Real, 0), rec(0.1, Label::Real, 1), rec(0.2, Label::Real, 1)];
    let fpr = f_fpr(&hand).map_err(|e| e.to_string())?;
    ensure(fpr == 0.25, || format!("hand F_FPR {fpr}"))?;

    let perfect = [rec(0.1, Label::Real, 0), rec(0.2, Label::Real, 0), rec(0.8, Label::Fake, 0), rec(0.9, Label::Fake, 0)];
    let inverted: Vec<PredictionRecord> = perfect.iter().map(|r| PredictionRecord { score: 1.0 - r.score, ..*r }).collect();
    let tied: Vec<PredictionRecord> = perfect.iter().map(|r| PredictionRecord { score: 0.5, ..*r }).collect();
    let aucs = [auc(&perfect), auc(&inverted), auc(&tied)].map(|a| a.unwrap());
    ensure(aucs == [1.0, 0.0, 0.5], || format!("AUC edge cases {aucs:?}"))?;

    let mut rng = Rng::new(6);
    let mixed: Vec<PredictionRecord> = (0..200).map(|i| rec(rng.uniform(), Label::ALL[i % 2], 0)).collect();
    let single = [f_fpr(&mixed), f_tpr(&mixed), f_eo(&mixed)].map(|m| m.unwrap());
    ensure(single == [0.0; 3], || format!("single group gave {single:?}"))?;

    let grouped: Vec<PredictionRecord> = (0..200).map(|i| rec(rng.uniform(), Label::ALL[i % 2], rng.below(3))).collect();
    let reference = (f_fpr(&grouped).unwrap(), f_tpr(&grouped).unwrap(), auc(&grouped).unwrap());
    for _ in 0..10 {
        let mut shuffled = grouped.clone();
        rng.shuffle(&mut shuffled);
        let got = (f_fpr(&shuffled).unwrap(), f_tpr(&shuffled).unwrap(), auc(&shuffled).unwrap());
        ensure(got == reference, || "metrics changed under permutation".into())?;
    }
    Ok("F_FPR 0.25, AUC {1, 0, 0.5}, single group 0, permutation invariant".into())
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn train_and_evaluate(cfg: &PipelineConfig, name: &str) -> Result<MetricsFile, String> {
    commands::train(cfg).map_err(err)?;
    commands::evaluate(&cfg.out_dir.join(commands::CHECKPOINT), &cfg.data_dir, Split::Test, cfg.run.threshold, &cfg.out_dir, name).map_err(err)
}

fn metric(v: Option<f64>, what: &str) -> Result<f64, String> {
    v.ok_or_else(|| format!("{what} undefined"))
}

fn main() -> ExitCode {
    let mut h = Harness { failures: 0 };
    h.run("numerics", 5.0, numerics);
    h.run("decomposition", 5.0, decomposition);
    h.run("augmentation", 10.0, augmentation);
    h.run("gradients", 30.0, gradients);
    h.run("css oracles", 5.0, css_oracles);
    h.run("fairness oracles", 5.0, fairness_oracles);

    let root = tempfile::TempDir::new().expect("tempdir");
    let mut base = PipelineConfig { data_dir: root.path().join("data"), ..PipelineConfig::default() };
    base.out_dir = root.path().join("vanilla");
    let with = |mode: Mode, out: &str| {
        let mut cfg = base.clone();
        cfg.run.mode = mode;
        cfg.out_dir = root.path().join(out);
        cfg
    };

    h.run("end-to-end benchmark", 600.0, || {
        commands::generate(&base).map_err(err)?;
        let vanilla = train_and_evaluate(&with(Mode::Vanilla, "vanilla"), "vanilla")?;
        let proposed = train_and_evaluate(&with(Mode::Proposed, "proposed"), "proposed")?;
        let (va, ve) = (metric(vanilla.frame.auc, "vanilla AUC")?, metric(vanilla.frame.f_eo, "vanilla F_EO")?);
        let (pa, pe) = (metric(proposed.frame.auc, "proposed AUC")?, metric(proposed.frame.f_eo, "proposed F_EO")?);
        let detail = format!("vanilla AUC {va:.4} F_EO {ve:.4}; proposed AUC {pa:.4} F_EO {pe:.4}");
        ensure(va > 0.8 && ve >= 0.15, || format!("{detail}; vanilla outside calibration"))?;
        ensure(pe <= 0.7 * ve, || format!("{detail}; F_EO reduced by only {:.1}%", 100.0 * (1.0 - pe / ve)))?;
        ensure(va - pa <= 0.03, || format!("{detail}; AUC dropped {:.4}", va - pa))?;
        Ok(format!("{detail}; F_EO reduced {:.1}%", 100.0 * (1.0 - pe / ve)))
    });

    // same total epoch budget as the proposed run, reported only
    let start = Instant::now();
    let mut control = with(Mode::Vanilla, "vanilla-20");
    control.run.train.epochs *= 2;
    match train_and_evaluate(&control, "vanilla-20") {
        Ok(m) => println!(
            "INFO vanilla with {} epochs: AUC {:.4} F_EO {:.4} [{:.2}s]",
            control.run.train.epochs,
            m.frame.auc.unwrap_or(f64::NAN),
            m.frame.f_eo.unwrap_or(f64::NAN),
            start.elapsed().as_secs_f64()
        ),
        Err(e) => println!("INFO equal-budget vanilla failed: {e}"),
    }

    h.run("ablation direction", 600.0, || {
        let mut cfg = base.clone();
        cfg.out_dir = root.path().join("ablation");
        let cells = commands::ablate(&cfg, Grid::Table4, commands::grid_threads()).map_err(err)?;
        let find = |code: &str| {
            let c = cells.iter().find(|c| c.variant.ends_with(code)).ok_or(format!("no {code} cell"))?;
            if let Some(e) = &c.error {
                return Err(format!("{code} failed: {e}"));
            }
            Ok::<_, String>((metric(c.f_eo, code)?, metric(c.auc, code)?))
        };
        let (pf, fm, cm) = (find("+PF")?, find("+FM")?, find("+CM")?);
        let detail = format!("F_EO PF {:.4} vs FM {:.4}; AUC PF {:.4} vs CM {:.4}", pf.0, fm.0, pf.1, cm.1);
        ensure(pf.0 < fm.0 && pf.1 >= cm.1, || detail.clone())?;
        Ok(detail)
    });

    h.run("determinism", 600.0, || {
        let first = with(Mode::Proposed, "repeat-a");
        let second = with(Mode::Proposed, "repeat-b");
        train_and_evaluate(&first, "repeat")?;
        train_and_evaluate(&second, "repeat")?;
        let a = fs::read(first.out_dir.join("metrics.json")).map_err(err)?;
        let b = fs::read(second.out_dir.join("metrics.json")).map_err(err)?;
        let earlier = read_or_empty(&root.path().join("proposed/metrics.json"));
        ensure(a == b, || "metrics.json differs between runs".into())?;
        ensure(a == earlier, || "metrics.json differs from the benchmark run".into())?;
        Ok(format!("{} identical bytes across three runs", a.len()))
    });

    if h.failures == 0 {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", h.failures);
        ExitCode::FAILURE
    }
}

fn read_or_empty(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_default()
}
