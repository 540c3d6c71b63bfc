// Frozen reference values computed independently at 40 digits.

use std::f64::consts::PI;

use zeno_core::dense::{dense_free_propagator, dense_zeno_product};
use zeno_core::spectra::bessel::{bessel_jy, spherical_jy};
use zeno_core::spectra::roots::{annulus_roots, shell_roots};
use zeno_core::spectra::{fd_dirichlet_eigs, rectangle_energy, rectangle_modes, shell_spectrum};
use zeno_core::zeno::zeno_product;
use zeno_core::{
    characteristic_mask, Axis, Complex64, Domain, Grid, MaskRaster, PhysicalUnits, SpectralPropagator, WaveFunction,
};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-2)
}

const JY: &[(f64, f64, f64, f64)] = &[
    (0.0, 0.5, 0.93846980724081290423, -0.44451873350670655715),
    (0.0, 3.7, -0.39923020337119111533, 0.10607431532035411027),
    (0.0, 13.9, 0.18357985545786963222, 0.10985918945952656163),
    (0.0, 14.1, 0.15695287703260123191, 0.14313622862254457131),
    (0.0, 31.4, 0.098653744091573117803, -0.1026615205116387722),
    (1.0, 0.2, 0.099500832639236000866, -3.3238249881118469964),
    (1.0, 8.3, 0.26573930204186430911, -0.080597503533841533278),
    (1.0, 22.0, 0.11717778964385170066, 0.12340585622650762281),
    (2.0, 1.5, 0.23208767214421472724, -0.93219375976297390523),
    (3.0, 20.0, -0.098901394560449675613, 0.14967326271339410371),
    (5.0, 3.0, 0.043028434877047583925, -1.9059459538286737322),
    (7.0, 11.0, 0.018376032647858614565, 0.27184139484930945736),
    (2.5, 4.2, 0.41795698189048107094, 0.083966713157854715213),
    (0.75, 9.1, 0.1706328385031966958, 0.20241723719438871166),
    (1.5, 16.0, 0.18743615328645922853, 0.069367492121756660226),
];

const SPHERICAL: &[(u32, f64, f64, f64)] = &[
    (0, 0.3, 0.98506735553779858478, -3.1844549637520201943),
    (1, 0.05, 0.016662500372006587613, -400.49968754340002079),
    (1, 2.0, 0.43539777497999161735, -0.35061200427605525095),
    (2, 0.7, 0.03153878037661471795, -9.5411400387265823547),
    (3, 5.5, 0.19333339692769585126, 0.06427574358284616501),
    (4, 12.0, 0.023360406794505035078, -0.083246868761752055045),
    (6, 3.0, 0.0039743825098192473787, -7.3207367429813620997),
];

// r1 = 1, r2 = 2, orders 0..3, first three roots
const ANNULUS_ROOTS: [[f64; 3]; 4] = [
    [3.1230309195956922051, 6.2734357139921806532, 9.4182075422515769598],
    [3.1965783808106350054, 6.3123495103732631266, 9.444464925482272759],
    [3.4069214265675253453, 6.4277659225960604015, 9.5228522699533385688],
    [3.7288700680255452245, 6.6159212679446492798, 9.6522449996583316736],
];

// r1 = 1, r2 = 1.5, orders 0..2
const SHELL_ROOTS: [[f64; 3]; 3] = [
    [6.2831853071795864769, 12.566370614359172954, 18.849555921538759431],
    [6.3858139145409735428, 12.61896874566607055, 18.884788190750753999],
    [6.5861371180460375688, 12.723531952731196295, 18.955064810371068007],
];

#[test]
fn cylinder_bessel_table() {
    for &(nu, x, j, y) in JY {
        let (gj, gy) = bessel_jy(nu, x);
        assert!(close(gj, j, 1e-10), "J_{nu}({x}) = {gj}, want {j}");
        assert!(close(gy, y, 1e-10), "Y_{nu}({x}) = {gy}, want {y}");
    }
}

#[test]
fn spherical_bessel_table() {
    for &(l, x, j, y) in SPHERICAL {
        let (gj, gy) = spherical_jy(l, x);
        assert!(close(gj, j, 1e-10), "j_{l}({x}) = {gj}, want {j}");
        assert!(close(gy, y, 1e-10), "y_{l}({x}) = {gy}, want {y}");
    }
}

#[test]
fn annulus_root_table() {
    for (l, want) in ANNULUS_ROOTS.iter().enumerate() {
        let got = annulus_roots(l as f64, 1.0, 2.0, 3).unwrap();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-10 * w, "l={l}: {g} vs {w}");
        }
    }
}

#[test]
fn shell_root_table() {
    for (l, want) in SHELL_ROOTS.iter().enumerate() {
        let got = shell_roots(l as u32, 1.0, 1.5, 3).unwrap();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-10 * w, "l={l}: {g} vs {w}");
        }
    }
    let modes = shell_spectrum(1.0, 1.5, 0, 1, PhysicalUnits::default()).unwrap();
    assert!((modes[0].energy - 0.5 * (2.0 * PI).powi(2)).abs() < 1e-9);
}

#[test]
fn free_gaussian_spreads_as_predicted() {
    let sigma = 0.3;
    let t = 0.2;
    let grid = Grid::line(Axis::new(-8.0, 16.0 / 512.0, 512).unwrap());
    let prop = SpectralPropagator::new(&grid, &[(-2.0, 2.0)], PhysicalUnits::default()).unwrap();
    let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
    let psi0 = WaveFunction::from_fn(&grid, |p| Complex64::new(norm * (-p[0] * p[0] / (4.0 * sigma * sigma)).exp(), 0.0))
        .unwrap();
    let out = prop.evolve_free(&psi0, t).unwrap();
    let s = Complex64::new(1.0, t / (2.0 * sigma * sigma));
    let exact = WaveFunction::from_fn(&grid, |p| {
        norm / s.sqrt() * (-(p[0] * p[0]) / (4.0 * sigma * sigma * s)).exp()
    })
    .unwrap();
    assert!(out.distance(&exact).unwrap() < 1e-10);
    // second moment
    let var: f64 = out.amps().iter().enumerate().map(|(i, z)| grid.point(i)[0].powi(2) * z.norm_sqr()).sum::<f64>()
        * grid.cell_volume();
    let want = sigma * sigma * (1.0 + (t / (2.0 * sigma * sigma)).powi(2));
    assert!((var - want).abs() < 1e-10, "{var} vs {want}");
}

#[test]
fn spectral_propagator_equals_plane_wave_sum() {
    let grid = Grid::line(Axis::new(-3.0, 6.0 / 96.0, 96).unwrap());
    let units = PhysicalUnits::new(0.7, 1.9).unwrap();
    let prop = SpectralPropagator::new(&grid, &[(-1.0, 1.0)], units).unwrap();
    let psi = WaveFunction::from_fn(&grid, |p| Complex64::new((-p[0] * p[0]).exp(), 0.3 * p[0].sin())).unwrap();
    let u = dense_free_propagator(&grid, 0.05, units).unwrap();
    let want = zeno_core::dense::apply(&u, psi.amps());
    let got = prop.evolve_free(&psi, 0.05).unwrap();
    let err = got.amps().iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12, "{err}");
}

#[test]
fn projected_product_equals_matrix_power() {
    let units = PhysicalUnits::default();
    let domain = Domain::Interval { x0: 0.0, x1: 1.0 };
    let prop = SpectralPropagator::for_domain(&domain, 32, 0.05, units).unwrap();
    let grid = prop.grid().clone();
    let mask = characteristic_mask(&domain, &grid).unwrap();
    let psi = WaveFunction::from_fn(&grid, |p| Complex64::new((PI * p[0]).sin(), 0.0)).unwrap();
    for n in [1, 3, 10] {
        let (got, _) = zeno_product(&psi, 0.05 / n as f64, n, &mask, &prop).unwrap();
        let m = dense_zeno_product(&mask, 0.05 / n as f64, n, units).unwrap();
        let want = zeno_core::dense::apply(&m, psi.amps());
        let err = got.amps().iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "n={n}: {err}");
    }
}

#[test]
fn rectangle_closed_forms() {
    let u = PhysicalUnits::default();
    assert_eq!(rectangle_energy(PI, PI, 1, 1, u), 1.0);
    assert_eq!(rectangle_energy(PI, PI, 2, 2, u), 4.0);
    let e = rectangle_energy(2.0, 1.0, 3, 2, PhysicalUnits::new(2.0, 0.5).unwrap());
    assert!((e - 4.0 / 1.0 * PI * PI * (9.0 / 4.0 + 4.0)).abs() < 1e-12);
    let domain = Domain::Rectangle { a: 1.0, b: 1.0 };
    let prop = SpectralPropagator::for_domain(&domain, 32, 1e-3, u).unwrap();
    let basis = rectangle_modes(1.0, 1.0, 3, 3, prop.grid(), u).unwrap();
    assert!(basis.gram_deviation() < 1e-12);
}

#[test]
fn raster_spectrum_follows_two_term_weyl_law() {
    // disk of radius 1 drawn on a 121 x 121 raster
    let n = 121;
    let h = 2.4 / n as f64;
    let grid = Grid::new(vec![Axis::new(-1.2, h, n).unwrap(), Axis::new(-1.2, h, n).unwrap()]).unwrap();
    let inside = (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            p[0] * p[0] + p[1] * p[1] < 1.0
        })
        .collect();
    let domain = Domain::Mask(MaskRaster { grid: grid.clone(), inside });
    let basis = fd_dirichlet_eigs(&domain, &grid, 60, PhysicalUnits::default()).unwrap();
    let k2 = 2.0 * basis.energies()[59];
    let weyl = PI * k2 / (4.0 * PI) - 2.0 * PI * k2.sqrt() / (4.0 * PI);
    assert!((60.0 - weyl).abs() / 60.0 < 0.15, "Weyl count {weyl} for 60 modes");
}
