use modelspace::criteria::{ShellReport, VerdictRule};
use modelspace::spectral::{embed_gram, schatten_norm, tm_values, PointMassMeasure, Space};
use modelspace::symbols::pullback_atoms;
use modelspace::{compop_gram, level_boundary, DiskPoint, InnerFunction, Symbol};
use num_complex::Complex64;
use proptest::prelude::*;

fn point(max_radius: f64) -> impl Strategy<Value = Complex64> {
    (0.0..max_radius, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn zeros(max_degree: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(point(0.95), 1..=max_degree)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_sandwich(zs in zeros(5), z in point(0.999)) {
        let f = InnerFunction::blaschke(&zs).unwrap();
        let p = DiskPoint::new(z);
        let (r, th) = (z.norm(), f.value(z).unwrap().norm());
        let u = f.kernel_diag(p).unwrap();
        let dk = f.kernel_laplacian_diag(p).unwrap();
        let scale = 4.0 * u / (p.comp * p.comp);
        let slack = 1e-12 * scale * 4.0;
        prop_assert!(dk >= scale * (r - th).powi(2) - slack);
        prop_assert!(dk <= scale * (1.0 + r).powi(2) + slack);
    }

    #[test]
    fn kernel_is_hermitian(zs in zeros(4), w in point(0.99), z in point(0.99)) {
        let f = InnerFunction::blaschke(&zs).unwrap();
        let a = f.kernel(w, z).unwrap();
        let b = f.kernel(z, w).unwrap().conj();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn basis_sums_to_kernel_diagonal(zs in zeros(5), z in point(0.99)) {
        let f = InnerFunction::blaschke(&zs).unwrap();
        let sum: f64 = tm_values(&zs, z).iter().map(|e| e.norm_sqr()).sum();
        let k = f.kernel_diag(DiskPoint::new(z)).unwrap();
        prop_assert!((sum - k).abs() <= 1e-10 * k.max(1.0));
    }

    #[test]
    fn adding_an_atom_never_decreases_schatten_norms(
        atoms in prop::collection::vec((point(0.9), 0.01f64..1.0), 1..5),
        extra in point(0.9),
        mass in 0.01f64..1.0,
        p in 0.5f64..4.0,
    ) {
        prop_assume!(atoms.iter().all(|(w, _)| (w - extra).norm() > 1e-3));
        let m = match PointMassMeasure::new(atoms) {
            Ok(m) => m,
            Err(_) => return Ok(()),
        };
        let bigger = m.with_atom(extra, mass).unwrap();
        let pw = InnerFunction::paley_wiener();
        for space in [Space::Hardy, Space::Model(&pw)] {
            let a = schatten_norm(&embed_gram(space, &m).unwrap(), p).unwrap();
            let b = schatten_norm(&embed_gram(space, &bigger).unwrap(), p).unwrap();
            prop_assert!(b >= a * (1.0 - 1e-9), "{a} > {b}");
        }
    }

    #[test]
    fn composition_spectra_are_sorted_and_bounded(zs in zeros(4), c in 0.05f64..0.95) {
        let f = InnerFunction::blaschke(&zs).unwrap();
        let sv = compop_gram(&f, &Symbol::scaled(c).unwrap(), 64).unwrap();
        prop_assert_eq!(sv.values.len(), zs.len());
        prop_assert!(sv.values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(sv.values.iter().all(|&s| s >= 0.0));
        // ‖C_φ‖ on H² is at most √((1 + |φ(0)|)/(1 − |φ(0)|)) = 1 here
        prop_assert!(sv.values[0] <= 1.0 + 1e-9);
    }

    #[test]
    fn pullback_has_circle_mass(zs in zeros(3), c in 0.1f64..0.9, center in point(0.5)) {
        prop_assume!(center.norm() + c * 0.5 < 1.0);
        for s in [Symbol::blaschke(&zs).unwrap(), Symbol::affine(center, c * (1.0 - center.norm())).unwrap()] {
            let m = pullback_atoms(&s, 512).unwrap();
            prop_assert!((m.total_mass() - std::f64::consts::TAU).abs() < 1e-9);
        }
    }

    #[test]
    fn nevanlinna_obeys_littlewood(zs in zeros(4), z in point(0.99)) {
        let s = Symbol::blaschke(&zs).unwrap();
        let a = s.origin_image().unwrap();
        prop_assume!((z - a).norm() > 1e-6);
        let n = s.nevanlinna(z).unwrap();
        let bound = ((Complex64::new(1.0, 0.0) - a.conj() * z) / (z - a)).norm().ln();
        prop_assert!(n >= 0.0);
        // equality for inner φ
        prop_assert!((n - bound).abs() <= 1e-8 * bound.max(1.0), "{n} vs {bound}");
    }

    #[test]
    fn affine_counting_stays_below_littlewood(center in point(0.5), frac in 0.1f64..0.99, z in point(0.99)) {
        let s = Symbol::affine(center, frac * (1.0 - center.norm())).unwrap();
        prop_assume!((z - center).norm() > 1e-6);
        let n = s.nevanlinna(z).unwrap();
        let bound = ((Complex64::new(1.0, 0.0) - center.conj() * z) / (z - center)).norm().ln();
        prop_assert!(n >= 0.0 && n <= bound + 1e-12);
    }

    #[test]
    fn shell_report_prefix_sums(incs in prop::collection::vec(0.0f64..10.0, 6..30)) {
        let rows = incs.iter().enumerate().map(|(k, &v)| (k as f64, k as f64 + 1.0, v, 0.0, true)).collect();
        let r = ShellReport::from_increments("prop", rows, VerdictRule::default(), Vec::new());
        let mut acc = 0.0;
        for (sh, &v) in r.shells.iter().zip(&incs) {
            acc += v;
            prop_assert!((sh.cumulative - acc).abs() <= 1e-12 * acc.max(1.0));
        }
        prop_assert!(r.shells.windows(2).all(|w| w[1].cumulative >= w[0].cumulative));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn level_curve_sits_on_the_level(zs in zeros(3), frac in 0.05f64..0.9) {
        // |ϑ(∞)| = Π 1/|a_k|; D_δ is bounded only below it
        let at_infinity: f64 = zs.iter().map(|a| 1.0 / a.norm()).product();
        let f = InnerFunction::blaschke(&zs).unwrap();
        let delta = 1.0 + frac * (at_infinity.min(4.0) - 1.0);
        prop_assume!(delta > 1.01);
        let dom = level_boundary(&f, delta, 1e-2).unwrap();
        for &v in dom.vertices() {
            let m = f.value(v).unwrap().norm();
            prop_assert!((m - delta).abs() <= dom.tolerance() * delta.max(1.0), "{m}");
            prop_assert!(v.norm() > 1.0);
        }
    }

    #[test]
    fn unbounded_level_domains_are_rejected(a in point(0.95), excess in 1.01f64..2.0) {
        prop_assume!(a.norm() > 0.2);
        let f = InnerFunction::blaschke(&[a]).unwrap();
        prop_assert!(level_boundary(&f, excess / a.norm(), 1e-2).is_err());
    }
}
