//! Discrete calculus identities on random finite time scales.
//!
//! Every identity here holds exactly on a finite scale, so the assertions
//! are tight: 1e−12 relative to the magnitudes that enter each identity
//! (floored at 1 so near-zero cases stay meaningful).

use proptest::prelude::*;
use varnabla::{GridFunction, KappaGrid, TimeScale};

const REL_TOL: f64 = 1e-12;

/// |a − b| ≤ 1e−12 · max(1, |a|, |b|, scale)
fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(scale).max(1.0)
}

#[derive(Debug)]
struct Case {
    ts: TimeScale,
    f: Vec<f64>,
    g: Vec<f64>,
    alpha: f64,
    lo: usize,
    mid: usize,
    hi: usize,
}

fn scales() -> impl Strategy<Value = TimeScale> {
    (3usize..=50)
        .prop_flat_map(|m| {
            (
                prop::collection::vec(1e-3..10.0f64, m - 1),
                -100.0..100.0f64,
            )
        })
        .prop_map(|(gaps, start)| {
            let mut pts = Vec::with_capacity(gaps.len() + 1);
            pts.push(start);
            for gap in gaps {
                let last = *pts.last().unwrap();
                pts.push(last + gap);
            }
            TimeScale::from_points(pts).unwrap()
        })
}

fn cases() -> impl Strategy<Value = Case> {
    scales()
        .prop_flat_map(|ts| {
            let m = ts.len();
            (
                Just(ts),
                prop::collection::vec(-10.0..10.0f64, m),
                prop::collection::vec(-10.0..10.0f64, m),
                -3.0..3.0f64,
                0..m,
                0..m,
                0..m,
            )
        })
        .prop_map(|(ts, f, g, alpha, i, j, k)| {
            let mut idx = [i, j, k];
            idx.sort_unstable();
            Case {
                ts,
                f,
                g,
                alpha,
                lo: idx[0],
                mid: idx[1],
                hi: idx[2],
            }
        })
}

fn grid(ts: &TimeScale, values: &[f64]) -> GridFunction {
    GridFunction::new(ts.clone(), values.to_vec()).unwrap()
}

proptest! {
    /// f(ρ(t)) = f(t) − ν(t)·f^∇(t) on every κ-point.
    #[test]
    fn reconstruction_from_derivative(case in cases()) {
        let ts = &case.ts;
        let f = grid(ts, &case.f);
        let df = f.nabla_derivative();
        let frho = f.rho_compose();
        for (i, &t) in ts.kappa_points().iter().enumerate() {
            let nu = ts.nu(t).unwrap();
            let lhs = frho.values()[i + 1];
            let rhs = f.values()[i + 1] - nu * df.values()[i];
            prop_assert!(
                close(lhs, rhs, (nu * df.values()[i]).abs()),
                "at t={t}: {lhs} vs {rhs}"
            );
        }
    }

    /// (f+g)^∇ = f^∇ + g^∇ and (αf)^∇ = α·f^∇.
    #[test]
    fn derivative_linearity(case in cases()) {
        let ts = &case.ts;
        let df = grid(ts, &case.f).nabla_derivative();
        let dg = grid(ts, &case.g).nabla_derivative();
        let sum: Vec<f64> = case.f.iter().zip(&case.g).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = case.f.iter().map(|a| case.alpha * a).collect();
        let dsum = grid(ts, &sum).nabla_derivative();
        let dscaled = grid(ts, &scaled).nabla_derivative();
        for i in 0..ts.len() - 1 {
            let (dfi, dgi) = (df.values()[i], dg.values()[i]);
            prop_assert!(close(dsum.values()[i], dfi + dgi, dfi.abs().max(dgi.abs())));
            prop_assert!(close(dscaled.values()[i], case.alpha * dfi, dfi.abs()));
        }
    }

    /// (fg)^∇ = f^∇·g + f^ρ·g^∇ = f^∇·g^ρ + f·g^∇ at every κ-point.
    #[test]
    fn both_product_rules(case in cases()) {
        let ts = &case.ts;
        let (f, g) = (&case.f, &case.g);
        let df = grid(ts, f).nabla_derivative();
        let dg = grid(ts, g).nabla_derivative();
        let prod: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
        let dprod = grid(ts, &prod).nabla_derivative();
        for i in 0..ts.len() - 1 {
            let lhs = dprod.values()[i];
            let (dfi, dgi) = (df.values()[i], dg.values()[i]);
            let first = dfi * g[i + 1] + f[i] * dgi;
            let second = dfi * g[i] + f[i + 1] * dgi;
            let scale = (dfi * g[i + 1]).abs().max((f[i] * dgi).abs());
            prop_assert!(close(lhs, first, scale), "rule 1 at {i}: {lhs} vs {first}");
            prop_assert!(close(lhs, second, scale), "rule 2 at {i}: {lhs} vs {second}");
        }
    }

    /// ∫_a^b F^∇(t) ∇t = F(b) − F(a) over arbitrary member pairs.
    #[test]
    fn fundamental_theorem(case in cases()) {
        let ts = &case.ts;
        let f = grid(ts, &case.f);
        let df = f.nabla_derivative();
        let pts = ts.points();
        let (a, b) = (pts[case.lo], pts[case.hi]);
        let integral = df.nabla_integral(a, b).unwrap();
        let change = case.f[case.hi] - case.f[case.lo];
        let mass: f64 = (case.lo..case.hi)
            .map(|i| (case.f[i + 1] - case.f[i]).abs())
            .sum();
        prop_assert!(close(integral, change, mass));
    }

    /// ∫(αf + g) = α∫f + ∫g over arbitrary member pairs.
    #[test]
    fn integral_linearity(case in cases()) {
        let ts = &case.ts;
        let comb: Vec<f64> = case
            .f
            .iter()
            .zip(&case.g)
            .map(|(a, b)| case.alpha * a + b)
            .collect();
        let pts = ts.points();
        let (a, b) = (pts[case.lo], pts[case.hi]);
        let lhs = grid(ts, &comb).nabla_integral(a, b).unwrap();
        let int_f = grid(ts, &case.f).nabla_integral(a, b).unwrap();
        let int_g = grid(ts, &case.g).nabla_integral(a, b).unwrap();
        let mass = (b - a) * 10.0 * (case.alpha.abs() + 1.0);
        prop_assert!(close(lhs, case.alpha * int_f + int_g, mass));
    }

    /// ∫_a^c + ∫_c^b = ∫_a^b for any member c, in any order of a, b.
    #[test]
    fn integral_additivity_and_orientation(case in cases()) {
        let ts = &case.ts;
        let f = grid(ts, &case.f);
        let pts = ts.points();
        let (a, c, b) = (pts[case.lo], pts[case.mid], pts[case.hi]);
        let whole = f.nabla_integral(a, b).unwrap();
        let first = f.nabla_integral(a, c).unwrap();
        let second = f.nabla_integral(c, b).unwrap();
        let mass = (b - a) * 10.0;
        prop_assert!(close(first + second, whole, mass));
        prop_assert_eq!(f.nabla_integral(b, a).unwrap(), -whole);
        prop_assert_eq!(f.nabla_integral(a, a).unwrap(), 0.0);
    }

    /// f > 0 on (a,b] with a < b forces a strictly positive integral.
    #[test]
    fn integral_positivity(case in cases()) {
        prop_assume!(case.lo < case.hi);
        let ts = &case.ts;
        let pos: Vec<f64> = case.f.iter().map(|v| v.abs() + 1e-3).collect();
        let pts = ts.points();
        let integral = grid(ts, &pos)
            .nabla_integral(pts[case.lo], pts[case.hi])
            .unwrap();
        prop_assert!(integral > 0.0);
    }

    /// ∫ f^ρ g^∇ = [fg]_a^b − ∫ f^∇ g  and  ∫ f g^∇ = [fg]_a^b − ∫ f^∇ g^ρ.
    #[test]
    fn both_integration_by_parts_forms(case in cases()) {
        let ts = &case.ts;
        let m = ts.len();
        let (f, g) = (&case.f, &case.g);
        let df = grid(ts, f).nabla_derivative();
        let dg = grid(ts, g).nabla_derivative();
        let kappa_product = |build: &dyn Fn(usize) -> f64| {
            let vals: Vec<f64> = (0..m - 1).map(build).collect();
            let pts = ts.points();
            KappaGrid::new(ts.clone(), vals)
                .unwrap()
                .nabla_integral(pts[0], pts[m - 1])
                .unwrap()
        };
        // κ-index i addresses the point t_{i+1}; the ρ-composition shifts to
        // index i
        let frho_dg = kappa_product(&|i| f[i] * dg.values()[i]);
        let df_g = kappa_product(&|i| df.values()[i] * g[i + 1]);
        let f_dg = kappa_product(&|i| f[i + 1] * dg.values()[i]);
        let df_grho = kappa_product(&|i| df.values()[i] * g[i]);
        let boundary = f[m - 1] * g[m - 1] - f[0] * g[0];
        let mass: f64 = (0..m - 1)
            .map(|i| {
                let dfg = (f[i + 1] - f[i]).abs() * 10.0;
                let fdg = (g[i + 1] - g[i]).abs() * 10.0;
                dfg + fdg
            })
            .sum();
        prop_assert!(
            close(frho_dg, boundary - df_g, mass),
            "first form: {frho_dg} vs {}",
            boundary - df_g
        );
        prop_assert!(
            close(f_dg, boundary - df_grho, mass),
            "second form: {f_dg} vs {}",
            boundary - df_grho
        );
    }
}
