//! Acceptance suite: one PASS/FAIL line per criterion, with failing checks
//! listed underneath. Exits nonzero when any criterion fails.

mod common;

use std::time::Instant;

use cpspdc::hom::{self, InterferingPair};
use cpspdc::jsa::{self, GridSpan, JsaMatrix, PumpSpec};
use cpspdc::phasematch::{self, PhaseMatchConfig, PmType};
use cpspdc::schmidt;
use cpspdc::sweep;
use cpspdc::{CrystalDatabase, OpticalAxis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CRYSTALS: [&str; 5] = ["PPKTP", "PPRTP", "PPKTA", "PPRTA", "PPCTA"];

/// Published design data per crystal, in `CRYSTALS` order.
struct Published {
    gvm0: f64,
    period_gvm0: f64,
    period_1550_0: f64,
    purity_gvm0: f64,
    purity_1550_0: f64,
    gvm2: f64,
    period_gvm2: f64,
    period_1550_2: f64,
    purity_gvm2: f64,
    purity_1550_2: f64,
    /// (Δλ nm, L mm) used for the type-0 purities.
    params0: (f64, f64),
    /// (Δλ nm, L mm) used for the type-II purities.
    params2: (f64, f64),
}

const PUBLISHED: [Published; 5] = [
    Published {
        gvm0: 2502.62,
        period_gvm0: 686.266,
        period_1550_0: 419.637,
        purity_gvm0: 0.985,
        purity_1550_0: 0.920,
        gvm2: 1225.19,
        period_gvm2: 353.570,
        period_1550_2: 451.185,
        purity_gvm2: 0.980,
        purity_1550_2: 0.964,
        params0: (0.16, 5.0),
        params2: (0.20, 5.0),
    },
    Published {
        gvm0: 2531.59,
        period_gvm0: 685.767,
        period_1550_0: 414.427,
        purity_gvm0: 0.985,
        purity_1550_0: 0.920,
        gvm2: 1282.04,
        period_gvm2: 363.835,
        period_1550_2: 442.863,
        purity_gvm2: 0.984,
        purity_1550_2: 0.970,
        params0: (0.16, 5.0),
        params2: (0.25, 5.0),
    },
    Published {
        gvm0: 2729.67,
        period_gvm0: 734.277,
        period_1550_0: 410.937,
        purity_gvm0: 0.983,
        purity_1550_0: 0.912,
        gvm2: 1284.84,
        period_gvm2: 360.766,
        period_1550_2: 437.999,
        purity_gvm2: 0.984,
        purity_1550_2: 0.974,
        params0: (0.15, 5.0),
        params2: (0.25, 5.0),
    },
    Published {
        gvm0: 2734.62,
        period_gvm0: 730.648,
        period_1550_0: 408.139,
        purity_gvm0: 0.983,
        purity_1550_0: 0.917,
        gvm2: 1379.66,
        period_gvm2: 383.846,
        period_1550_2: 432.963,
        purity_gvm2: 0.987,
        purity_1550_2: 0.979,
        params0: (0.18, 4.0),
        params2: (0.25, 7.0),
    },
    Published {
        gvm0: 2780.14,
        period_gvm0: 728.149,
        period_1550_0: 399.928,
        purity_gvm0: 0.983,
        purity_1550_0: 0.914,
        gvm2: 1577.17,
        period_gvm2: 426.314,
        period_1550_2: 418.731,
        purity_gvm2: 0.984,
        purity_1550_2: 0.984,
        params0: (0.18, 4.0),
        params2: (0.20, 10.0),
    },
];

struct Check {
    label: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
}

impl Criterion {
    fn near(&mut self, label: impl Into<String>, value: f64, target: f64, tol: f64) {
        let pass = (value - target).abs() <= tol;
        self.checks.push(Check {
            label: label.into(),
            pass,
            detail: format!("got {value:.6}, expected {target} ± {tol}"),
        });
    }

    fn rel(&mut self, label: impl Into<String>, value: f64, target: f64, rel: f64) {
        let pass = ((value - target) / target).abs() <= rel;
        self.checks.push(Check {
            label: label.into(),
            pass,
            detail: format!(
                "got {value:.6}, expected {target} ± {:.0}% ({:+.2}%)",
                rel * 100.0,
                (value / target - 1.0) * 100.0
            ),
        });
    }

    fn at_most(&mut self, label: impl Into<String>, value: f64, bound: f64) {
        self.checks.push(Check {
            label: label.into(),
            pass: value <= bound,
            detail: format!("got {value:.3e}, bound {bound:.1e}"),
        });
    }

    fn at_least(&mut self, label: impl Into<String>, value: f64, bound: f64) {
        self.checks.push(Check {
            label: label.into(),
            pass: value >= bound,
            detail: format!("got {value:.6}, bound ≥ {bound}"),
        });
    }

    fn ok<T, E: std::fmt::Display>(&mut self, label: impl Into<String>, r: Result<T, E>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.checks.push(Check {
                    label: label.into(),
                    pass: false,
                    detail: format!("error: {e}"),
                });
                None
            }
        }
    }
}

struct Suite {
    failed: Vec<usize>,
}

impl Suite {
    fn run(&mut self, id: usize, title: &str, body: impl FnOnce(&mut Criterion)) {
        let start = Instant::now();
        let mut c = Criterion::default();
        body(&mut c);
        let passed = c.checks.iter().filter(|k| k.pass).count();
        let total = c.checks.len();
        let ok = total > 0 && passed == total;
        println!(
            "criterion {id:>2} {}  {title} ({passed}/{total} checks, {:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for k in c.checks.iter().filter(|k| !k.pass) {
            println!("      - {}: {}", k.label, k.detail);
        }
        if !ok {
            self.failed.push(id);
        }
    }
}

fn solved_jsa(
    db: &CrystalDatabase,
    crystal: &str,
    pm: PmType,
    lambda0: f64,
    length_mm: f64,
    delta_nm: f64,
    span: GridSpan,
    n: usize,
) -> cpspdc::Result<JsaMatrix> {
    let config = PhaseMatchConfig::solved(db, crystal, pm, lambda0, length_mm)?;
    let pump = PumpSpec::new(lambda0, delta_nm)?;
    jsa::compute_jsa(db, &config, &pump, span, n)
}

fn svd_purity(jsa: &JsaMatrix) -> f64 {
    schmidt::decompose(jsa).expect("decomposition").purity()
}

fn gvm(db: &CrystalDatabase, crystal: &str, pm: PmType) -> cpspdc::Result<f64> {
    phasematch::gvm_wavelength(db, crystal, pm, pm.default_gvm_bracket())
}

fn main() {
    let db = CrystalDatabase::packaged();
    let mut suite = Suite { failed: Vec::new() };
    let pms = [(PmType::Type0, "type-0"), (PmType::Type2A, "type-II")];

    suite.run(1, "GVM wavelengths for five crystals and two types within ±0.5 nm", |c| {
        for (name, p) in CRYSTALS.iter().zip(&PUBLISHED) {
            for ((pm, tag), target) in pms.iter().zip([p.gvm0, p.gvm2]) {
                if let Some(l) = c.ok(format!("{name} {tag}"), gvm(&db, name, *pm)) {
                    c.near(format!("{name} {tag} λ_GVM"), l, target, 0.5);
                }
            }
        }
    });

    suite.run(2, "poling periods at λ_GVM and 1550 nm within ±0.5 nm, all below 1 µm", |c| {
        for (name, p) in CRYSTALS.iter().zip(&PUBLISHED) {
            for ((pm, tag), (t_gvm, t_1550)) in pms
                .iter()
                .zip([(p.period_gvm0, p.period_1550_0), (p.period_gvm2, p.period_1550_2)])
            {
                // the period at the GVM point uses our own solved wavelength
                if let Some(l) = c.ok(format!("{name} {tag} GVM"), gvm(&db, name, *pm)) {
                    if let Some(period) = c.ok(format!("{name} {tag}"), phasematch::poling_period(&db, name, *pm, l)) {
                        c.near(format!("{name} {tag} Λ_GVM"), period, t_gvm, 0.5);
                        c.at_most(format!("{name} {tag} Λ_GVM < 1000 nm"), period, 1000.0);
                    }
                }
                if let Some(period) = c.ok(format!("{name} {tag}"), phasematch::poling_period(&db, name, *pm, 1550.0)) {
                    c.near(format!("{name} {tag} Λ_1550"), period, t_1550, 0.5);
                    c.at_most(format!("{name} {tag} Λ_1550 < 1000 nm"), period, 1000.0);
                }
            }
        }
    });

    suite.run(3, "purities at λ_GVM and 1550 nm within ±0.005 at the published (Δλ, L)", |c| {
        for (name, p) in CRYSTALS.iter().zip(&PUBLISHED) {
            let cases = [
                (PmType::Type0, "type-0", p.params0, p.purity_gvm0, p.purity_1550_0),
                (PmType::Type2A, "type-II", p.params2, p.purity_gvm2, p.purity_1550_2),
            ];
            for (pm, tag, (delta, length), t_gvm, t_1550) in cases {
                if let Some(l) = c.ok(format!("{name} {tag} GVM"), gvm(&db, name, pm)) {
                    let r = solved_jsa(&db, name, pm, l, length, delta, GridSpan::Auto, 200);
                    if let Some(f) = c.ok(format!("{name} {tag} p_GVM"), r) {
                        c.near(format!("{name} {tag} p_GVM"), svd_purity(&f), t_gvm, 0.005);
                    }
                }
                let r = solved_jsa(&db, name, pm, 1550.0, length, delta, GridSpan::Auto, 200);
                if let Some(f) = c.ok(format!("{name} {tag} p_1550"), r) {
                    c.near(format!("{name} {tag} p_1550"), svd_purity(&f), t_1550, 0.005);
                }
            }
        }
    });

    suite.run(4, "PPKTP tilt and purity curves over the telecom band", |c| {
        let t0 = phasematch::tilt_angle(&db, "PPKTP", PmType::Type0, 1550.0).unwrap();
        c.near("type-0 |θ| at 1550 nm", t0.abs(), 1.01, 0.05);
        let band: Vec<f64> = (0..=50).map(|k| 1500.0 + 10.0 * k as f64).collect();
        let rows = sweep::purity_vs_wavelength(&db, "PPKTP", PmType::Type0, 5.0, 0.16, &band).unwrap();
        let tilts: Vec<f64> = rows.iter().map(|r| r.tilt_deg.unwrap().abs()).collect();
        let lo = tilts.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = tilts.iter().cloned().fold(0.0, f64::max);
        c.near("type-0 min |θ| on [1500, 2000] nm", lo, 0.42, 0.05);
        c.near("type-0 max |θ| on [1500, 2000] nm", hi, 1.10, 0.05);
        let pmin = rows.iter().map(|r| r.purity.unwrap()).fold(1.0, f64::min);
        c.at_least("type-0 min purity on [1500, 2000] nm", pmin, 0.913);

        let t2 = phasematch::tilt_angle(&db, "PPKTP", PmType::Type2A, 1550.0).unwrap();
        c.near("type-II θ at 1550 nm", t2, 0.66, 0.05);
        let band: Vec<f64> = (0..=60).map(|k| 1100.0 + 10.0 * k as f64).collect();
        let rows = sweep::purity_vs_wavelength(&db, "PPKTP", PmType::Type2A, 5.0, 0.20, &band).unwrap();
        let (worst, at) = rows
            .iter()
            .map(|r| (r.purity.unwrap(), r.lambda0_nm))
            .fold((1.0, 0.0), |a, b| if b.0 < a.0 { b } else { a });
        c.at_least(format!("type-II min purity on [1100, 1700] nm (at {at} nm)"), worst, 0.96);
        let f = solved_jsa(&db, "PPKTP", PmType::Type2A, 1225.0, 5.0, 0.20, GridSpan::Auto, 200).unwrap();
        c.near("type-II purity at 1225 nm", svd_purity(&f), 0.98, 0.005);
    });

    suite.run(5, "PPKTP y→y+z variant: GVM wavelength and purity at 1550 nm", |c| {
        if let Some(l) = c.ok("type-IIb GVM", gvm(&db, "PPKTP", PmType::Type2B)) {
            c.near("type-IIb λ_GVM", l, 2337.0, 2.0);
        }
        // the text gives no length or pump width for this variant; the
        // type-II values of the same crystal are used
        let f = solved_jsa(&db, "PPKTP", PmType::Type2B, 1550.0, 5.0, 0.20, GridSpan::Auto, 200).unwrap();
        c.near("type-IIb purity at 1550 nm", svd_purity(&f), 0.91, 0.01);
    });

    suite.run(6, "PPRTP spectra and HOM interference", |c| {
        let cases = [
            (PmType::Type0, "type-0", 0.16, 1.11, 0.9204, 4.51, 36.41),
            (PmType::Type2A, "type-II", 0.25, 1.67, 0.9705, 2.98, 36.02),
        ];
        for (pm, tag, delta, sig_fwhm, vis, dip_ss, dip_ii) in cases {
            // marginal widths on a grid fine enough to resolve the idler line
            let fine = solved_jsa(&db, "PPRTP", pm, 1550.0, 5.0, delta, GridSpan::Auto, 800).unwrap();
            let (s, i) = jsa::marginal_spectra(&fine).unwrap();
            c.near(format!("{tag} signal FWHM (nm)"), s.fwhm_nm, sig_fwhm, 0.05);
            c.near(format!("{tag} idler FWHM (nm)"), i.fwhm_nm, 0.11, 0.01);

            let f = solved_jsa(&db, "PPRTP", pm, 1550.0, 5.0, delta, GridSpan::Auto, 200).unwrap();
            for (pair, dip) in [(InterferingPair::SignalSignal, dip_ss), (InterferingPair::IdlerIdler, dip_ii)] {
                let delays = hom::default_delays(&f, pair);
                let curve = hom::hom_curve(&f, &f, pair, &delays).unwrap();
                c.near(format!("{tag} {pair} visibility"), curve.visibility, vis, 0.005);
                match curve.dip_fwhm_ps {
                    Some(w) => c.rel(format!("{tag} {pair} dip FWHM (ps)"), w, dip, 0.05),
                    None => c.ok::<(), _>(format!("{tag} {pair} dip FWHM"), Err("no half-baseline crossing")).unwrap_or(()),
                }
            }
        }
    });

    suite.run(7, "PPRTP idler bandwidth tunability with crystal length", |c| {
        // the tabulated sweep runs at the default grid; the widths are
        // re-measured on a grid fine enough to resolve the idler line
        let lengths = [1.0, 5.0, 30.0];
        let rows = sweep::idler_bandwidth_vs_length(&db, "PPRTP", PmType::Type0, 1550.0, 0.16, &lengths).unwrap();
        for ((row, l), (nm, ghz)) in rows.iter().zip(lengths).zip([(0.54, 67.43), (0.11, 13.74), (0.019, 2.37)]) {
            let f = solved_jsa(&db, "PPRTP", PmType::Type0, 1550.0, l, 0.16, GridSpan::Auto, 800).unwrap();
            let fwhm = jsa::idler_marginal(&f).unwrap().fwhm_nm;
            println!(
                "      L = {l} mm: idler FWHM {fwhm:.4} nm at N = 800, {:.4} nm at N = 200",
                row.idler_fwhm_nm.unwrap()
            );
            c.rel(format!("L = {l} mm idler FWHM (nm)"), fwhm, nm, 0.05);
            c.rel(format!("L = {l} mm idler FWHM (GHz)"), jsa::bandwidth_nm_to_ghz(1550.0, fwhm), ghz, 0.05);
        }
    });

    suite.run(8, "normalization, Schmidt completeness and reconstruction (100 random JSAs)", |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (mut worst_norm, mut worst_c2, mut worst_rec) = (0.0f64, 0.0f64, 0.0f64);
        for k in 0..100 {
            let f = if k % 2 == 0 {
                let (ns, ni) = (rng.gen_range(2..=24), rng.gen_range(2..=24));
                common::random_matrix(&mut rng, ns, ni)
            } else {
                let n = rng.gen_range(8..=32);
                common::random_smooth_jsa(&mut rng, n, false)
            };
            worst_norm = worst_norm.max((f.norm_sqr() - 1.0).abs());
            let d = schmidt::decompose(&f).unwrap();
            let s2: f64 = d.coefficients.iter().map(|x| x * x).sum();
            worst_c2 = worst_c2.max((s2 - 1.0).abs());
            let err = d
                .reconstruct()
                .iter()
                .zip(f.amplitudes())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst_rec = worst_rec.max(err);
        }
        let f = solved_jsa(&db, "PPKTP", PmType::Type0, 1550.0, 5.0, 0.16, GridSpan::Auto, 200).unwrap();
        worst_norm = worst_norm.max((f.norm_sqr() - 1.0).abs());
        c.at_most("max |Σ|f|² − 1|", worst_norm, 1e-12);
        c.at_most("max |Σc² − 1|", worst_c2, 1e-10);
        c.at_most("max reconstruction error", worst_rec, 1e-8);
    });

    suite.run(9, "SVD purity equals the trace-formula oracle up to 32×32", |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst = 0.0f64;
        for _ in 0..60 {
            let (ns, ni) = (rng.gen_range(2..=32), rng.gen_range(2..=32));
            let f = if rng.gen_bool(0.5) {
                common::random_matrix(&mut rng, ns, ni)
            } else {
                common::random_smooth_jsa(&mut rng, ns, false)
            };
            worst = worst.max((svd_purity(&f) - common::trace_purity(&f)).abs());
        }
        c.at_most("max |p_SVD − p_trace|", worst, 1e-8);
    });

    suite.run(10, "HOM contraction versus four-index sum, symmetry and baseline", |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (mut worst, mut worst_sym, mut worst_base) = (0.0f64, 0.0f64, 0.0f64);
        for k in 0..8 {
            let n = [6, 10, 16, 32][k % 4];
            let f1 = common::random_smooth_jsa(&mut rng, n, false);
            let f2 = common::random_smooth_jsa(&mut rng, n, false);
            let pair = if k % 2 == 0 { InterferingPair::SignalSignal } else { InterferingPair::IdlerIdler };
            let taus = [-7.0, -1.5, 0.0, 2.0, 9.0];
            let curve = hom::hom_curve(&f1, &f2, pair, &taus).unwrap();
            for (t, p) in taus.iter().zip(&curve.p4) {
                worst = worst.max((p - hom::p4_bruteforce(&f1, &f2, pair, *t).unwrap()).abs());
            }
            let real = common::random_smooth_jsa(&mut rng, 32 + 4 * k, true);
            let delays = hom::default_delays(&real, pair);
            let curve = hom::hom_curve(&real, &real, pair, &delays).unwrap();
            let m = curve.p4.len();
            for j in 0..m / 2 {
                worst_sym = worst_sym.max((curve.p4[j] - curve.p4[m - 1 - j]).abs());
            }
            worst_base = worst_base.max((curve.baseline - 0.5).abs());
        }
        for pm in [PmType::Type0, PmType::Type2A] {
            let f = solved_jsa(&db, "PPRTP", pm, 1550.0, 5.0, 0.16, GridSpan::Auto, 200).unwrap();
            for pair in [InterferingPair::SignalSignal, InterferingPair::IdlerIdler] {
                let curve = hom::hom_curve(&f, &f, pair, &hom::default_delays(&f, pair)).unwrap();
                worst_base = worst_base.max((curve.baseline - 0.5).abs());
            }
        }
        c.at_most("max |P₄ contraction − P₄ four-index|", worst, 1e-10);
        c.at_most("max |P₄(τ) − P₄(−τ)| for real JSAs", worst_sym, 1e-10);
        c.at_most("max |baseline − 0.5|", worst_base, 0.01);
    });

    suite.run(11, "identical-source visibility equals purity (20 random JSAs)", |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let n = rng.gen_range(16..=48);
            let real = rng.gen_bool(0.5);
            let f = common::random_smooth_jsa(&mut rng, n, real);
            worst = worst.max(hom::visibility_vs_purity_check(&f).unwrap().gap);
        }
        c.at_most("max |V − p|", worst, 0.005);
    });

    suite.run(12, "tilt angle vanishes at every solved GVM wavelength", |c| {
        for name in CRYSTALS {
            for pm in PmType::ALL {
                if let Some(l) = c.ok(format!("{name} {pm} GVM"), gvm(&db, name, pm)) {
                    let t = phasematch::tilt_angle(&db, name, pm, l).unwrap();
                    c.at_most(format!("{name} {pm} |θ(λ_GVM)| (deg)"), t.abs(), 1e-3);
                }
            }
        }
    });

    suite.run(13, "purity converged in grid size (200→400) and window (×1.5)", |c| {
        for (name, p) in CRYSTALS.iter().zip(&PUBLISHED) {
            for (pm, tag, (delta, length)) in [
                (PmType::Type0, "type-0", p.params0),
                (PmType::Type2A, "type-II", p.params2),
            ] {
                let Some(l) = c.ok(format!("{name} {tag} GVM"), gvm(&db, name, pm)) else {
                    continue;
                };
                for (where_, lambda0) in [("GVM", l), ("1550", 1550.0)] {
                    let half = GridSpan::Auto.half_width_nm(length);
                    let purity = |span: f64, n: usize| {
                        solved_jsa(&db, name, pm, lambda0, length, delta, GridSpan::HalfWidthNm(span), n)
                            .map(|f| schmidt::purity_of(&f))
                    };
                    let (Some(base), Some(dense), Some(wide)) = (
                        c.ok(format!("{name} {tag} {where_}"), purity(half, 200)),
                        c.ok(format!("{name} {tag} {where_} N=400"), purity(half, 400)),
                        c.ok(format!("{name} {tag} {where_} ×1.5"), purity(1.5 * half, 200)),
                    ) else {
                        continue;
                    };
                    c.at_most(format!("{name} {tag} {where_} |Δp| N 200→400"), (dense - base).abs(), 0.002);
                    c.at_most(format!("{name} {tag} {where_} |Δp| window ×1.5"), (wide - base).abs(), 0.002);
                }
            }
        }
    });

    suite.run(14, "analytic group index matches finite differences to 1e-8", |c| {
        for rec in db.records() {
            for axis in OpticalAxis::ALL {
                let model = rec.model(axis).unwrap();
                let [lo, hi] = model.valid_range_nm;
                let mut worst = 0.0f64;
                for k in 0..100 {
                    let lambda = lo + (hi - lo) * (k as f64 + 0.5) / 100.0;
                    let ng = rec.group_index(axis, lambda).unwrap();
                    let n = rec.refractive_index(axis, lambda).unwrap();
                    // central differences at h and h/2, one Richardson step
                    let h = 0.05;
                    let d = |h: f64| {
                        (model.index_unchecked(lambda + h) - model.index_unchecked(lambda - h)) / (2.0 * h)
                    };
                    let slope = (4.0 * d(h / 2.0) - d(h)) / 3.0;
                    let ng_fd = n - lambda * slope;
                    worst = worst.max(((ng - ng_fd) / ng).abs());
                }
                c.at_most(format!("{} {axis} max relative deviation", rec.name), worst, 1e-8);
            }
        }
    });

    if suite.failed.is_empty() {
        println!("acceptance: all 14 criteria pass");
    } else {
        println!(
            "acceptance: {} of 14 criteria fail: {:?}",
            suite.failed.len(),
            suite.failed
        );
        std::process::exit(1);
    }
}
