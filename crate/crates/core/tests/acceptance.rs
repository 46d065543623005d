//! Acceptance criteria AC1 to AC11. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use blocc_core::battery::{fidelity_bound, min_battery_for_fidelity, BatteryConfig};
use blocc_core::lift::{
    boundary_states, complete, lift, product_overlap, verification_report, Perturbation,
};
use blocc_core::protocols::{concentration_distribution, concentration_exact, ConcentrationSpec};
use blocc_core::schmidt::{entanglement_entropy, SchmidtVector};
use blocc_core::theorems::{
    crooks_check, jarzynski, second_law_equality, strong_converse_tail, third_law_bound,
};
use blocc_core::transfer::{
    canonical_reversible, feasibility_lp, mean_work, sample_joint, verify_conditions,
    work_marginal, FeasibilityOptions, TransferMatrix,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus() -> &'static [TransferMatrix] {
    use std::sync::OnceLock;
    static CORPUS: OnceLock<Vec<TransferMatrix>> = OnceLock::new();
    CORPUS.get_or_init(|| common::witness_corpus(500, 0xB10C))
}

fn ac1() -> Outcome {
    let (big_n, n) = min_battery_for_fidelity(0.85, 1).map_err(|e| e.to_string())?;
    ensure((big_n, n) == (11, 13), || format!("got N={big_n}, n={n}"))?;
    let f = fidelity_bound(11, 1);
    ensure(f == 12.0 / 14.0 && f >= 0.85, || format!("bound {f}"))?;
    let below = fidelity_bound(10, 1);
    ensure(below < 0.85, || format!("N=10 already reaches {below}"))?;
    Ok(format!("N_min=11 n_min=13 bound={f:.12}"))
}

fn ac2() -> Outcome {
    let (p, q) = common::reference_pair();
    let t = canonical_reversible(&p, &q).map_err(|e| e.to_string())?;
    let w_max = t.grid().values().iter().fold(0.0f64, |m, w| m.max(w.abs()));
    ensure((w_max - 1.0).abs() <= 1e-12, || format!("w_max {w_max}"))?;
    let mean = mean_work(&t);
    ensure((mean + 0.25).abs() <= 1e-12, || format!("mean {mean}"))?;
    let report = verify_conditions(&t, 1e-12);
    ensure(report.pass, || format!("{report:?}"))?;
    Ok(format!("w_max=1 mean={mean} max_residual<=1e-12"))
}

fn ac3() -> Outcome {
    let c = corpus();
    let mut worst = 0.0f64;
    for (idx, t) in c.iter().enumerate() {
        let cond = verify_conditions(t, 1e-9);
        ensure(cond.pass, || {
            format!("witness {idx} violates C1-C3: {cond:?}")
        })?;
        let r = second_law_equality(t);
        ensure(r.residual <= 1e-9, || {
            format!("witness {idx}: residual {}", r.residual)
        })?;
        worst = worst.max(r.residual);
    }
    Ok(format!("{} witnesses, max residual {worst:.3e}", c.len()))
}

fn ac4() -> Outcome {
    let pairs = common::random_pairs(200, 0xAC4);
    for (idx, (p, q)) in pairs.iter().enumerate() {
        let grid = common::extended_grid(p, q);
        let gap = entanglement_entropy(p) - entanglement_entropy(q);
        let below = FeasibilityOptions {
            mean_w_target: Some(gap - 1e-3),
            relax_c2: false,
        };
        let r = feasibility_lp(p, q, &grid, &below).map_err(|e| e.to_string())?;
        ensure(r.feasible, || format!("pair {idx}: gap-1e-3 infeasible"))?;
        let w = r.witness.as_ref().ok_or("missing witness")?;
        let m = mean_work(w);
        ensure((m - (gap - 1e-3)).abs() <= 1e-9, || {
            format!("pair {idx}: witness mean {m}")
        })?;
        ensure(verify_conditions(w, 1e-9).pass, || {
            format!("pair {idx}: witness fails C1-C3")
        })?;

        let above = FeasibilityOptions {
            mean_w_target: Some(gap + 1e-3),
            relax_c2: false,
        };
        let r = feasibility_lp(p, q, &grid, &above).map_err(|e| e.to_string())?;
        ensure(!r.feasible, || format!("pair {idx}: gap+1e-3 feasible"))?;
        let cert = r
            .certificate
            .ok_or_else(|| format!("pair {idx}: no certificate"))?;
        ensure(cert.max_dual_slack <= 1e-9 && cert.rhs_value > 1e-9, || {
            format!(
                "pair {idx}: certificate slack {} rhs {}",
                cert.max_dual_slack, cert.rhs_value
            )
        })?;
    }
    Ok(format!("{} pairs decided on both sides", pairs.len()))
}

fn ac5() -> Outcome {
    for (idx, t) in corpus().iter().enumerate() {
        let r = third_law_bound(t);
        ensure(r.pass, || format!("witness {idx}: {} < {}", r.lhs, r.rhs))?;
    }
    let d = 3usize;
    let dp = 2usize;
    let q = SchmidtVector::uniform(dp).unwrap();
    let mut prev = 0.0f64;
    for k in 1..=6 {
        let eps = 10f64.powi(-k);
        let mut c = vec![eps; d];
        c[0] = 1.0 - eps * (d - 1) as f64;
        let p = SchmidtVector::new(c).map_err(|e| e.to_string())?;
        let t = canonical_reversible(&p, &q).map_err(|e| e.to_string())?;
        let r = third_law_bound(&t);
        let expected = 1.0 / (dp as f64 * dp as f64 * eps);
        ensure(((r.rhs - expected) / expected).abs() <= 1e-9, || {
            format!("eps {eps}: rhs {} expected {expected}", r.rhs)
        })?;
        ensure(r.pass, || format!("eps {eps}: {} < {}", r.lhs, r.rhs))?;
        ensure(r.rhs > prev, || format!("eps {eps}: rhs not increasing"))?;
        prev = r.rhs;
    }
    Ok(format!("corpus holds, rhs(1e-6)={prev:.6e}"))
}

fn ac6() -> Outcome {
    let cases: [(Vec<f64>, usize); 3] = [
        (vec![0.4, 0.3, 0.2, 0.1], 2),
        (vec![0.7, 0.3], 4),
        (vec![0.5, 0.3, 0.2], 3),
    ];
    let mut details = Vec::new();
    for (seed, (pc, dp)) in cases.into_iter().enumerate() {
        let d = pc.len();
        let p = SchmidtVector::new(pc).unwrap();
        let q = SchmidtVector::uniform(dp).unwrap();
        let t = canonical_reversible(&p, &q).map_err(|e| e.to_string())?;
        let r = jarzynski(&t).map_err(|e| e.to_string())?;
        let target = d as f64 / dp as f64;
        ensure((r.rhs - target).abs() <= 1e-15, || {
            format!("({d},{dp}): rhs {}", r.rhs)
        })?;
        ensure(r.residual < 1e-12, || {
            format!("({d},{dp}): residual {}", r.residual)
        })?;
        let table = sample_joint(&t, 1_000_000, 1000 + seed as u64).map_err(|e| e.to_string())?;
        let (mean, se) = table.mean_exp2_work();
        ensure((mean - target).abs() <= 3.0 * se, || {
            format!("({d},{dp}): sample mean {mean} vs {target}, se {se}")
        })?;
        details.push(format!("({d},{dp}) mc={mean:.5}"));
    }
    Ok(details.join(" "))
}

fn ac7() -> Outcome {
    let mut checked = 0;
    for t in corpus().iter().filter(|t| t.q().is_uniform(1e-12)) {
        let dist = work_marginal(t);
        for x in [0.0, 0.5, 1.0, 2.0] {
            let r = strong_converse_tail(&dist, t.d(), t.d_out(), x);
            ensure(r.pass, || format!("x={x}: tail {} > {}", r.lhs, r.rhs))?;
        }
        checked += 1;
    }
    ensure(checked >= 50, || {
        format!("only {checked} maximally entangled targets")
    })?;
    Ok(format!("{checked} witnesses, x in {{0,0.5,1,2}}"))
}

fn ac8() -> Outcome {
    let p = SchmidtVector::new(vec![0.75, 0.25]).unwrap();
    let q = SchmidtVector::uniform(4).unwrap();
    let t = canonical_reversible(&p, &q).map_err(|e| e.to_string())?;
    let report = crooks_check(&t).map_err(|e| e.to_string())?;
    ensure(report.d == 4 && report.d_prime == 2, || {
        format!("dims {} {}", report.d, report.d_prime)
    })?;
    for pt in &report.points {
        ensure(pt.residual <= 1e-10, || {
            format!("w={}: residual {}", pt.w, pt.residual)
        })?;
    }
    ensure(report.consistency.pass, || {
        format!("consistency {:?}", report.consistency)
    })?;
    let j = jarzynski(&t).map_err(|e| e.to_string())?;
    ensure((report.consistency.lhs - j.lhs).abs() <= 1e-10, || {
        format!("rebuilt {} vs direct {}", report.consistency.lhs, j.lhs)
    })?;
    ensure(report.pass, || "report flagged failure".into())?;
    Ok(format!(
        "{} ratio points, rebuilt <2^w>={:.12}",
        report.points.len(),
        report.consistency.lhs
    ))
}

fn ac9() -> Outcome {
    let (p, q) = common::reference_pair();
    let t = canonical_reversible(&p, &q).map_err(|e| e.to_string())?;
    for n in [4u32, 5, 6] {
        let cfg = BatteryConfig::new(2, n, n - 2).map_err(|e| e.to_string())?;
        let l = lift(&t, &cfg).map_err(|e| e.to_string())?;
        let c = complete(&l).map_err(|e| e.to_string())?;
        let b = boundary_states(&l);
        let r = verification_report(&c, &b).map_err(|e| e.to_string())?;
        ensure(r.materialized, || format!("n={n} not materialized"))?;
        ensure(
            r.row_max_residual <= 1e-9 && r.col_max_residual <= 1e-9,
            || format!("n={n}: {r:?}"),
        )?;
        ensure(r.mapping_residual <= 1e-9, || {
            format!("n={n}: mapping {}", r.mapping_residual)
        })?;
        let bad = c
            .explicit_check(&b, Perturbation::Fill(1e-6))
            .map_err(|e| e.to_string())?;
        ensure(bad.row_max_residual > 1e-9, || {
            format!("n={n}: fill perturbation undetected")
        })?;
        let bad = c
            .explicit_check(&b, Perturbation::Block(1e-6))
            .map_err(|e| e.to_string())?;
        ensure(bad.mapping_residual > 1e-9, || {
            format!("n={n}: block perturbation undetected")
        })?;
    }
    for n in 4u32..=12 {
        let cfg = BatteryConfig::new(2, n, n - 2).map_err(|e| e.to_string())?;
        let c = complete(&lift(&t, &cfg).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let agg = c.aggregate_report();
        ensure(agg.exact, || format!("n={n}: aggregate not exact {agg:?}"))?;
    }
    Ok("explicit n=4,5,6; aggregate exact n<=12".into())
}

fn ac10() -> Outcome {
    let (p, q) = common::reference_pair();
    let t = canonical_reversible(&p, &q).map_err(|e| e.to_string())?;
    let mut prev_gap = f64::INFINITY;
    let mut parts = Vec::new();
    for big_n in [3u32, 7, 11, 23] {
        let cfg = BatteryConfig::new(2, big_n + 2, big_n).map_err(|e| e.to_string())?;
        let l = lift(&t, &cfg).map_err(|e| e.to_string())?;
        let r = product_overlap(&boundary_states(&l));
        ensure(r.overlap >= r.bound, || {
            format!("N={big_n}: overlap {} < bound {}", r.overlap, r.bound)
        })?;
        let gap = 1.0 - r.overlap;
        ensure(gap <= prev_gap, || {
            format!("N={big_n}: 1-overlap rose to {gap}")
        })?;
        prev_gap = gap;
        parts.push(format!("N={big_n}:{:.6}", r.overlap));
    }
    Ok(parts.join(" "))
}

fn binary_entropy(p: f64) -> f64 {
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

fn ac11() -> Outcome {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let third = BigRational::new(BigInt::one(), BigInt::from(3));
    let two = concentration_exact(2, &half).map_err(|e| e.to_string())?;
    let expected = vec![(1u32.into(), half.clone()), (2u32.into(), half.clone())];
    ensure(two == expected, || format!("n=2 table {two:?}"))?;
    for (pr, pf) in [(&third, 1.0 / 3.0), (&half, 0.5)] {
        let h = binary_entropy(pf);
        let mut prev = f64::NEG_INFINITY;
        for n in 1..=16u32 {
            let table = concentration_exact(n, pr).map_err(|e| e.to_string())?;
            let total = table
                .iter()
                .fold(BigRational::zero(), |acc, (_, m)| acc + m);
            ensure(total.is_one(), || format!("p={pf} n={n}: total {total}"))?;
            let mean: f64 = table
                .iter()
                .map(|(c, m)| m.to_f64().unwrap() * c.to_f64().unwrap().log2())
                .sum();
            let spec = ConcentrationSpec::new(n, pf).map_err(|e| e.to_string())?;
            let float_mean = concentration_distribution(&spec).mean();
            ensure((mean - float_mean).abs() <= 1e-12, || {
                format!("p={pf} n={n}: {mean} vs {float_mean}")
            })?;
            let rate = mean / n as f64;
            ensure(rate >= prev - 1e-15, || {
                format!("p={pf} n={n}: rate fell to {rate}")
            })?;
            ensure(rate <= h + 1e-12, || {
                format!("p={pf} n={n}: rate {rate} > h {h}")
            })?;
            prev = rate;
        }
    }
    Ok("n<=16 exact, n=2 table matches, rate monotone below h(p)".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("AC1", "battery size for fidelity 0.85", ac1),
        ("AC2", "reference conversion", ac2),
        ("AC3", "second law on LP witnesses", ac3),
        ("AC4", "mean work decision problem", ac4),
        ("AC5", "third law bound", ac5),
        ("AC6", "jarzynski identity", ac6),
        ("AC7", "strong converse tail", ac7),
        ("AC8", "crooks ratio", ac8),
        ("AC9", "bistochastic completion", ac9),
        ("AC10", "product state overlap", ac10),
        ("AC11", "entanglement concentration", ac11),
    ];
    let mut failed = 0;
    for (id, title, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS {id} {title}: {detail} [{ms} ms]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} {title}: {why} [{ms} ms]");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
