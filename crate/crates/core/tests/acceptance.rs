//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::process::{Command, ExitCode};

use fockshift::bayes::{continuous_posterior, discrete_posterior};
use fockshift::fock::{make_operator, DensityMatrix, FockDimension, OperatorKind, PhotonDistribution, C64};
use fockshift::run::{render_campaign, run_campaign};
use fockshift::scenario::{OutputFormat, Scenario};
use fockshift::statistics::{make_state, moments, predict_continuous_mean, predict_discrete_mean, StateFamily};
use fockshift::superops::{add_n, one_count_j, subtract_n_parts, subtract_one_b};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

struct Outcome {
    pass: bool,
    detail: String,
}

fn dim(d: usize) -> FockDimension {
    FockDimension::new(d).unwrap()
}

fn dirichlet<const N: usize>(rng: &mut ChaCha8Rng) -> [f64; N] {
    Dirichlet::new([1.0; N]).unwrap().sample(rng)
}

/// 1. Bare ladder algebra at d = 2, 8, 64.
fn sg_algebra() -> Outcome {
    let mut worst = 0.0f64;
    for d in [2, 8, 64] {
        let lower = make_operator(OperatorKind::LowerSG, dim(d));
        let raise = make_operator(OperatorKind::RaiseSG, dim(d));
        let lr = lower.compose(&raise).unwrap();
        let rl = raise.compose(&lower).unwrap();
        for m in 0..d {
            for n in 0..d {
                let eye = if m == n { 1.0 } else { 0.0 };
                if m < d - 1 && n < d - 1 {
                    worst = worst.max((lr.matrix()[(m, n)] - C64::new(eye, 0.0)).norm());
                }
                let proj = if m == 0 && n == 0 { 0.0 } else { eye };
                worst = worst.max((rl.matrix()[(m, n)] - C64::new(proj, 0.0)).norm());
            }
        }
    }
    Outcome {
        pass: worst <= 1e-14,
        detail: format!("max entry error {worst:e} (tol 1e-14)"),
    }
}

/// 2. a = sqrt(n + 1) E- and a^dag = E+ sqrt(n + 1), entrywise exact at d = 64.
fn polar_decomposition() -> Outcome {
    let d = dim(64);
    let root = fockshift::FockOperator::number_function(d, |n| ((n + 1) as f64).sqrt());
    let a = make_operator(OperatorKind::Annihilate, d);
    let via_sg = root.compose(&make_operator(OperatorKind::LowerSG, d)).unwrap();
    let create_via_sg = make_operator(OperatorKind::RaiseSG, d).compose(&root).unwrap();
    let exact = a.matrix() == via_sg.matrix()
        && make_operator(OperatorKind::Create, d).matrix() == create_via_sg.matrix();
    Outcome {
        pass: exact,
        detail: format!("entrywise bit equality: {exact}"),
    }
}

/// 3. Operator reductions against the Bayes oracle for 1000 Dirichlet draws at d = 32.
fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = PhotonDistribution::from_weights(dirichlet::<32>(&mut rng).to_vec()).unwrap();
        let rho = DensityMatrix::from_distribution(&p);
        let b = subtract_one_b(&rho).unwrap().diagonal_part(1e-12).unwrap();
        let j = one_count_j(&rho).unwrap().diagonal_part(1e-12).unwrap();
        worst = worst
            .max(b.max_abs_diff(&discrete_posterior(&p).unwrap()))
            .max(j.max_abs_diff(&continuous_posterior(&p).unwrap()));
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max |diagonal - oracle| {worst:e} over 1000 states (tol 1e-12)"),
    }
}

/// Infinite-series means after one detection, summed directly.
fn series_means(family: &StateFamily) -> (f64, f64) {
    let terms: Vec<f64> = match family {
        StateFamily::Thermal { mean } => {
            let r = mean / (1.0 + mean);
            (0..4000).map(|n| r.powi(n) * (1.0 - r)).collect()
        }
        StateFamily::Poisson { mean } => {
            let mut t = (-mean).exp();
            (0..400)
                .map(|n| {
                    if n > 0 {
                        t *= mean / n as f64;
                    }
                    t
                })
                .collect()
        }
        _ => unreachable!(),
    };
    let p0 = terms[0];
    let m1: f64 = terms.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    // Discrete: sum_n n p(n+1) / (1 - p0). Continuous: sum_n n (n+1) p(n+1) / m1.
    let discrete: f64 = terms.iter().enumerate().skip(1).map(|(n, p)| (n - 1) as f64 * p).sum::<f64>() / (1.0 - p0);
    let continuous: f64 = terms.iter().enumerate().skip(1).map(|(n, p)| ((n - 1) * n) as f64 * p).sum::<f64>() / m1;
    (discrete, continuous)
}

/// 4. Mean-photon formulas against the reduced states at d = 128.
fn mean_formulas() -> Outcome {
    let d = dim(128);
    let mut states: Vec<StateFamily> = (1..=10).map(|n| StateFamily::Fock { n }).collect();
    for mean in [0.5, 1.0, 2.0, 4.0] {
        states.push(StateFamily::Thermal { mean });
        states.push(StateFamily::Poisson { mean });
    }
    let mut worst = 0.0f64;
    let mut series_worst = 0.0f64;
    for family in &states {
        let p = make_state(family, d).unwrap().distribution;
        let rho = DensityMatrix::from_distribution(&p);
        let s = moments(&p);
        let b = moments(&subtract_one_b(&rho).unwrap().diagonal_part(1e-12).unwrap()).mean;
        let j = moments(&one_count_j(&rho).unwrap().diagonal_part(1e-12).unwrap()).mean;
        let (db, dj) = (predict_discrete_mean(&s).unwrap(), predict_continuous_mean(&s).unwrap());
        worst = worst.max((db - b).abs()).max((dj - j).abs());
        if !matches!(family, StateFamily::Fock { .. }) {
            let (sb, sj) = series_means(family);
            series_worst = series_worst.max((sb - b).abs()).max((sj - j).abs());
        }
    }
    let thermal = moments(&make_state(&StateFamily::Thermal { mean: 2.0 }, d).unwrap().distribution);
    let poisson = moments(&make_state(&StateFamily::Poisson { mean: 2.0 }, d).unwrap().distribution);
    let t_disc = predict_discrete_mean(&thermal).unwrap();
    let t_cont = predict_continuous_mean(&thermal).unwrap();
    let p_cont = predict_continuous_mean(&poisson).unwrap();
    let named = (t_disc - 2.0).abs().max((t_cont - 4.0).abs()).max((p_cont - 2.0).abs());
    Outcome {
        pass: worst <= 1e-8 && series_worst <= 1e-8 && named <= 1e-8,
        detail: format!(
            "formula vs pipeline {worst:e}, vs series {series_worst:e}; thermal(2) {t_disc:.10}/{t_cont:.10}, poisson(2) {p_cont:.10} (tol 1e-8)"
        ),
    }
}

/// 5. Number shifters preserve trace without normalization.
fn number_shifters() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = 16;
    let mut add_worst = 0.0f64;
    let mut sub_worst = 0.0f64;
    let mut sub_gap = f64::INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(1..=4usize);
        // Occupy levels below d - n only.
        let w = dirichlet::<12>(&mut rng);
        let mut p = w.to_vec();
        p.resize(d, 0.0);
        let rho = DensityMatrix::from_distribution(&PhotonDistribution::from_weights(p).unwrap());
        add_worst = add_worst.max((add_n(&rho, n).unwrap().trace() - 1.0).abs());

        // Vacant below n: the bare numerator already has unit trace.
        let mut shifted = vec![0.0; n];
        shifted.extend_from_slice(&w);
        shifted.resize(d, 0.0);
        let rho = DensityMatrix::from_distribution(&PhotonDistribution::from_weights(shifted).unwrap());
        let parts = subtract_n_parts(&rho, n).unwrap();
        sub_worst = sub_worst.max((parts.numerator_trace() - 1.0).abs());

        // Occupied below n: the numerator loses exactly the mass below n.
        let rho = DensityMatrix::from_distribution(&PhotonDistribution::from_weights(w.to_vec()).unwrap());
        let parts = subtract_n_parts(&rho, n).unwrap();
        sub_gap = sub_gap.min((parts.numerator_trace() - 1.0).abs());
    }
    Outcome {
        pass: add_worst <= 1e-12 && sub_worst <= 1e-12 && sub_gap > 1e-12,
        detail: format!(
            "add trace err {add_worst:e}; subtract trace err {sub_worst:e} when p(n<N)=0, min defect {sub_gap:e} otherwise"
        ),
    }
}

fn campaign(text: &str) -> fockshift::run::CampaignReport {
    run_campaign(&Scenario::parse(text).unwrap(), 0, false).unwrap().report
}

/// 6. Conditioned discrete posteriors do not depend on q(n).
fn q_independence() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, excitation) in [
        ("q=0.5", r#"{ kind = "constant", q = 0.5 }"#),
        ("q=n/(n+3)", r#"{ kind = "saturating", offset = 3.0 }"#),
    ] {
        let r = campaign(&format!(
            "model = \"discrete\"\ndim = 3\nseed = 6\ntrials = 1000000\n\
             [initial_state]\nfamily = \"custom\"\np = [0.5, 0.3, 0.2]\n\
             [trajectory]\nexcitation = {excitation}\n"
        ));
        let ok = r.target[..2] == [0.6, 0.4]
            && r.max_abs_z < 3.0
            && (r.expected_conditioning_fraction - 0.5).abs() < 1e-15
            && r.conditioning_z.abs() < 3.0
            && r.anomalies == 0;
        pass &= ok;
        detail.push(format!(
            "{name}: est ({:.5}, {:.5}) max|z| {:.2}, fraction {:.5} (z {:.2})",
            r.estimate[0], r.estimate[1], r.max_abs_z, r.conditioning_fraction, r.conditioning_z
        ));
    }
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

/// 7. Continuous counting on thermal(2) doubles the mean; discrete keeps it at 2.
fn model_divergence() -> Outcome {
    let r = campaign(
        "model = \"continuous\"\ndim = 128\nseed = 7\ntrials = 1000000\n\
         [initial_state]\nfamily = \"thermal\"\nmean = 2.0\n\
         [coupling]\nlambda = 1.0\n\
         [trajectory]\nt_max = 0.001\n",
    );
    let se = r.conditioned_mean_std_error;
    let z_four = (r.conditioned_mean - 4.0) / se;
    let z_two = (r.conditioned_mean - 2.0) / se;
    Outcome {
        pass: z_four.abs() < 3.0 && z_two > 10.0,
        detail: format!(
            "conditioned mean {:.4} ± {:.4} over {} counts: {z_four:.2}σ from 4.0, {z_two:.1}σ from 2.0",
            r.conditioned_mean, se, r.conditioned
        ),
    }
}

/// 8. Identical seeds give byte-identical campaign output, in process and via the CLI.
fn determinism() -> Outcome {
    let text = "model = \"discrete\"\ndim = 64\nseed = 8\ntrials = 100000\n\
                [initial_state]\nfamily = \"thermal\"\nmean = 1.0\n";
    let s = Scenario::parse(text).unwrap();
    let mut in_process = true;
    for format in [OutputFormat::Json, OutputFormat::Csv] {
        let a = render_campaign(&run_campaign(&s, 1, false).unwrap().report, format).unwrap();
        let b = render_campaign(&run_campaign(&s, 4, false).unwrap().report, format).unwrap();
        in_process &= a == b;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("det.toml");
    std::fs::write(&path, text.replace("trials = 100000", "trials = 10")).unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_fockshift"))
            .args(["campaign", path.to_str().unwrap(), "--threads", threads])
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("2"));
    let cli = a.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
    Outcome {
        pass: in_process && cli,
        detail: format!("in-process json/csv identical: {in_process}; CLI stdout identical: {cli}"),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 SG ladder algebra", sg_algebra),
        ("2 polar decomposition", polar_decomposition),
        ("3 Bayes oracle equivalence", oracle_equivalence),
        ("4 mean-photon formulas", mean_formulas),
        ("5 number-shifter unitarity", number_shifters),
        ("6 Monte Carlo q-independence", q_independence),
        ("7 model divergence", model_divergence),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = check();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {name}: {}", outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
