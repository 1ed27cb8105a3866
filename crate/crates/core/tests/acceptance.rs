//! One line per acceptance criterion; exits nonzero if any criterion fails.
//!
//! `cargo test -p iet-core --test acceptance` runs everything (about five
//! minutes on one core). Pass criterion numbers to run a subset:
//! `cargo test -p iet-core --test acceptance -- 1 2 3`.

use std::time::Instant;

use iet_core::experiments::{run, Experiment, ResultRecord, RunConfig};
use iet_core::iet::IetMap;
use iet_core::numeric::{sample_simplex, uniform_float};
use iet_core::renorm::zorich_step;
use iet_core::suspension::{
    birkhoff_conjugacy_check, build_suspension, check_cell, fp_map, residue_grid, sweep_lengths, CellReport,
};
use iet_core::twisted::twisted_zorich_matrix;
use iet_core::{
    genus_and_singularities, irreducible_classes, omega, IntMatrix, LocallyConstantFunction, Permutation, Precision,
    TwistParameter,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::{Float, Integer};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget_s: f64,
    run: fn() -> Outcome,
}

fn all_perms(d_max: usize) -> Vec<Permutation> {
    (2..=d_max).flat_map(irreducible_classes).flat_map(|c| c.vertices).collect()
}

fn two_pow(bits: u32, e: i32) -> Float {
    Float::with_val(bits, 1u32) << e
}

fn c1_combinatorics() -> Outcome {
    let mut classes = 0;
    let mut perms = 0;
    let mut bad = vec![];
    for d in 2..=5 {
        for class in irreducible_classes(d) {
            classes += 1;
            if !class.is_strongly_connected() {
                bad.push(format!("class of {:?} not strongly connected", class.vertices[0].canonical_word()));
            }
            for pi in &class.vertices {
                perms += 1;
                let sd = genus_and_singularities(pi).map_err(|e| e.to_string())?;
                if d != 2 * sd.genus + sd.num_singularities - 1 {
                    bad.push(format!("{:?}: d != 2g + k - 1", pi.canonical_word()));
                }
                if !omega(pi).is_antisymmetric() {
                    bad.push(format!("{:?}: omega not antisymmetric", pi.canonical_word()));
                }
            }
        }
    }
    Ok((bad.is_empty(), format!("{classes} classes, {perms} permutations, {} violations {:?}", bad.len(), bad.first())))
}

fn c2_induction_identity() -> Outcome {
    let bits = 128;
    let prec = Precision::with_bits(bits);
    let perms = all_perms(5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tol = two_pow(bits, -60);
    let mut worst = Float::new(bits);
    let mut failures = 0;
    for _ in 0..1000 {
        let pi0 = &perms[rng.random_range(0..perms.len())];
        let steps = rng.random_range(1..=30);
        let lam0 = sample_simplex(&mut rng, pi0.d(), bits);
        let (mut lam, mut pi) = (lam0.clone(), pi0.clone());
        let mut prod = IntMatrix::identity(pi.d());
        for _ in 0..steps {
            let s = zorich_step(&lam, &pi, prec).map_err(|e| e.to_string())?;
            prod = s.matrix.mul(&prod);
            lam = s.next_lambda;
            pi = s.next_perm;
        }
        let d = pi.d();
        let back: Vec<Float> = (0..d)
            .map(|j| {
                let mut acc = Float::new(bits);
                for i in 0..d {
                    acc += Float::with_val(bits, &lam[i] * prod.row(i).get(j).unwrap_or(&Integer::ZERO));
                }
                acc
            })
            .collect();
        let total = Float::with_val(bits, Float::sum(back.iter()));
        for (b, l) in back.iter().zip(&lam0) {
            let err = Float::with_val(bits, Float::with_val(bits, b / &total) - l).abs();
            if err >= tol {
                failures += 1;
            }
            if err > worst {
                worst = err;
            }
        }
    }
    let log2 = if worst.is_zero() { f64::NEG_INFINITY } else { worst.to_f64().log2() };
    Ok((failures == 0, format!("1000 orbits, max componentwise error 2^{log2:.1}, {failures} above 2^-60")))
}

fn c3_twisted_reduction() -> Outcome {
    let bits = 3072;
    let prec = Precision::with_bits(bits);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = Float::new(bits);
    let mut mismatches = 0;
    let mut steps = 0;
    let starts = [Permutation::reversal(4), Permutation::reversal(5), Permutation::parse("A B C D E / E B D C A")];
    for pi0 in starts {
        let pi0 = pi0.map_err(|e| e.to_string())?;
        let d = pi0.d();
        let mut lam = sample_simplex(&mut rng, d, bits);
        let mut pi = pi0;
        let tw: Vec<Float> = (0..d).map(|_| uniform_float(&mut rng, bits)).collect();
        let mut zeta = TwistParameter::real(tw);
        for _ in 0..1000 {
            let step = zorich_step(&lam, &pi, prec).map_err(|e| e.to_string())?;
            let (zero, _) = twisted_zorich_matrix(&lam, &pi, &TwistParameter::zero(d), prec).map_err(|e| e.to_string())?;
            if !zero.equals_int(&step.matrix) {
                mismatches += 1;
            }
            let (m, (l2, p2, z2)) = twisted_zorich_matrix(&lam, &pi, &zeta, prec).map_err(|e| e.to_string())?;
            let err = Float::with_val(bits, m.det().abs() - 1u32).abs();
            if err > worst {
                worst = err;
            }
            lam = l2;
            pi = p2;
            zeta = z2;
            steps += 1;
        }
    }
    let ok = mismatches == 0 && worst < two_pow(bits, -40);
    let log2 = if worst.is_zero() { "0".to_string() } else { format!("2^{}", worst.get_exp().unwrap_or(0) - 1) };
    Ok((ok, format!("{steps} steps over 3 orbits, zeta=0 mismatches {mismatches}, max ||det|-1| < {log2}")))
}

fn kz_record() -> Result<ResultRecord, String> {
    run(&RunConfig::preset(Experiment::KzRatio)).map_err(|e| e.to_string())
}

fn check_named(rec: &ResultRecord, names: &[&str]) -> Outcome {
    let mut ok = true;
    let mut details = vec![];
    for n in names {
        let c = rec.checks.iter().find(|c| c.name == *n).ok_or(format!("missing check {n}"))?;
        ok &= c.passed;
        details.push(format!("{}: {}", c.name, c.detail));
    }
    Ok((ok, details.join("; ")))
}

fn c4_kz_ratio() -> Outcome {
    let rec = kz_record()?;
    let (ok, detail) = check_named(&rec, &["chi2/chi1 in [0.28, 0.38]"])?;
    Ok((ok, format!("{detail} ({} Zorich steps per exponent)", rec.summary["zorich_steps"])))
}

fn c5_twisted_desk_check() -> Outcome {
    let rec = kz_record()?;
    check_named(&rec, &["twisted exponent positive at 5 stderr", "twisted exponent at most chi1/2 + 3 stderr"])
}

fn suspension_reports() -> Result<Vec<(String, CellReport)>, String> {
    let mut out = vec![];
    for pi in all_perms(4).into_iter().filter(|p| p.last_top_is_first_bottom()) {
        for p in [3u64, 5, 7] {
            let prec = Precision::with_bits(128);
            let lam = sweep_lengths(&pi, p, prec).map_err(|e| e.to_string())?;
            let t = IetMap::new(pi.clone(), lam, prec).map_err(|e| e.to_string())?;
            for n in residue_grid(pi.d(), p, pi.alpha_t()) {
                let s = build_suspension(&t, &n, p).map_err(|e| e.to_string())?;
                let r = check_cell(&s).map_err(|e| e.to_string())?;
                out.push((format!("{:?} p={p} n={n:?}", pi.canonical_word()), r));
            }
        }
    }
    Ok(out)
}

fn tally(reports: &[(String, CellReport)], failures: fn(&CellReport) -> Vec<&'static str>) -> (bool, String) {
    let mut bad = 0;
    let mut first = None;
    for (label, r) in reports {
        let f = failures(r);
        if !f.is_empty() {
            bad += 1;
            first.get_or_insert_with(|| format!("{label}: {f:?}"));
        }
    }
    (bad == 0, format!("{} cells, {bad} failing{}", reports.len(), first.map(|f| format!(", first {f}")).unwrap_or_default()))
}

fn c6_suspension() -> Outcome {
    Ok(tally(&suspension_reports()?, CellReport::suspension_failures))
}

fn c7_conjugacy() -> Outcome {
    let bits = 128;
    let prec = Precision::with_bits(bits);
    let perms: Vec<Permutation> = all_perms(4).into_iter().filter(|p| p.last_top_is_first_bottom()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tol = 2f64.powi(-40);
    let mut bad = 0;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let pi = &perms[rng.random_range(0..perms.len())];
        let d = pi.d();
        let p = [3u64, 5, 7][rng.random_range(0..3)];
        let hat = sample_simplex(&mut rng, d - 1, bits);
        let s_par = prec.float(rng.random_range(0.05..0.95));
        let lam = fp_map(pi, &hat, &s_par, p).map_err(|e| e.to_string())?.lambda;
        let t = IetMap::new(pi.clone(), lam, prec).map_err(|e| e.to_string())?;
        let mut n: Vec<i64> = (0..d).map(|_| rng.random_range(0..p as i64)).collect();
        n[pi.alpha_t()] = rng.random_range(1..p as i64);
        let sus = build_suspension(&t, &n, p).map_err(|e| e.to_string())?;
        let f = LocallyConstantFunction::new(
            (0..d).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
        );
        let k = rng.random_range(1..p);
        let x = Float::with_val(bits, uniform_float(&mut rng, bits) * t.total());
        let ell = rng.random_range(1..=100);
        let c = birkhoff_conjugacy_check(&sus, &f, k, &x, ell, tol).map_err(|e| e.to_string())?;
        let scale = (c.m as f64 * f.max_abs()).max(1.0);
        worst = worst.max((c.twisted - c.untwisted).norm() / scale);
        if !c.ok {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("1000 trials, {bad} above 2^-40, max relative error {worst:.2e}")))
}

fn c8_surface() -> Outcome {
    Ok(tally(&suspension_reports()?, CellReport::surface_failures))
}

fn preset_checks(exp: Experiment) -> Outcome {
    let rec = run(&RunConfig::preset(exp)).map_err(|e| e.to_string())?;
    let detail = rec
        .checks
        .iter()
        .map(|c| format!("[{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((rec.passed(), detail))
}

fn c9_discrepancy() -> Outcome {
    preset_checks(Experiment::Discrepancy)
}

fn c10_spectral_dimension() -> Outcome {
    preset_checks(Experiment::SpectralDim)
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "combinatorial identities, d <= 5", budget_s: 60.0, run: c1_combinatorics },
        Criterion { id: 2, name: "induction identity lambda' B = lambda", budget_s: 60.0, run: c2_induction_identity },
        Criterion { id: 3, name: "twisted reduction and |det| = 1", budget_s: 60.0, run: c3_twisted_reduction },
        Criterion { id: 4, name: "chi2/chi1 for 1234/4321", budget_s: 600.0, run: c4_kz_ratio },
        Criterion { id: 5, name: "twisted top exponent desk check", budget_s: 900.0, run: c5_twisted_desk_check },
        Criterion { id: 6, name: "suspension suite", budget_s: 300.0, run: c6_suspension },
        Criterion { id: 7, name: "Birkhoff conjugacy", budget_s: 60.0, run: c7_conjugacy },
        Criterion { id: 8, name: "surface lemmas", budget_s: 300.0, run: c8_surface },
        Criterion { id: 9, name: "discrepancy slopes", budget_s: 600.0, run: c9_discrepancy },
        Criterion { id: 10, name: "spectral-dimension histogram", budget_s: 900.0, run: c10_spectral_dimension },
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut all_ok = true;
    for c in criteria.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let clock = Instant::now();
        let outcome = (c.run)();
        let secs = clock.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok((ok, d)) => (ok && secs <= c.budget_s, d),
            Err(e) => (false, format!("error: {e}")),
        };
        all_ok &= ok;
        println!(
            "criterion {:>2} {} {}: {detail} [{secs:.1}s / {:.0}s]",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.name,
            c.budget_s
        );
    }
    if !all_ok {
        std::process::exit(1);
    }
}
