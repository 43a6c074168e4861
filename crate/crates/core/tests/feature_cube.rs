use afmseg::features::{build_feature_cube, FeatureMask, FeatureOptions, Method};
use afmseg::synth::{synth_texture_image, SynthSpec};
use afmseg::{GrayImage, Grid, TileSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px = Grid::from_fn(w, h, |_, _| rng.random_range(0.0..255.0));
    GrayImage::new(px, 1.0).unwrap()
}

#[test]
fn cube_shape_for_384_image() {
    let img = random_image(384, 384, 1);
    let spec = TileSpec::from_win_factor(384, 384, 0.03, 12).unwrap();
    let cube = build_feature_cube(&img, &spec, Method::Dft, &FeatureOptions::default()).unwrap();
    assert_eq!((cube.grid_h(), cube.grid_w(), cube.n_channels()), (32, 32, 1));

    let small = random_image(96, 64, 2);
    let spec = TileSpec::from_win_factor(96, 64, 0.125, 1).unwrap();
    assert_eq!((spec.tile_w, spec.tile_h), (12, 8));
    let cube = build_feature_cube(&small, &spec, Method::Dct, &FeatureOptions::default()).unwrap();
    assert_eq!((cube.grid_h(), cube.grid_w()), (57, 85));
}

#[test]
fn full_stride_one_grid_is_373_square() {
    let spec = TileSpec::from_win_factor(384, 384, 0.03, 1).unwrap();
    let img = GrayImage::new(Grid::filled(384, 384, 0.0), 1.0).unwrap();
    let grid = afmseg::tiling::extract_tiles(&img, &spec).unwrap();
    assert_eq!((grid.grid_h, grid.grid_w), (373, 373));
}

#[test]
fn uniform_image_gives_identical_cells() {
    let img = GrayImage::new(Grid::filled(40, 40, 77.0), 1.0).unwrap();
    let spec = TileSpec::new(8, 8, 1).unwrap();
    for method in [Method::Dft, Method::Dct, Method::Dwt, Method::Radon] {
        let opts = FeatureOptions {
            mask: FeatureMask::ALL,
            angles: 12,
            ..Default::default()
        };
        let cube = build_feature_cube(&img, &spec, method, &opts).unwrap();
        let first = cube.cell(0, 0).to_vec();
        for r in 0..cube.grid_h() {
            for c in 0..cube.grid_w() {
                assert_eq!(cube.cell(r, c), first.as_slice(), "{method:?} cell ({r},{c})");
            }
        }
    }
}

#[test]
fn dft_variance_cube_mirrors_with_the_image() {
    let img = random_image(48, 40, 3);
    let flipped = GrayImage::new(
        Grid::from_fn(48, 40, |r, c| img.get(39 - r, c)),
        1.0,
    )
    .unwrap();
    let spec = TileSpec::new(8, 8, 1).unwrap();
    let opts = FeatureOptions::default();
    let a = build_feature_cube(&img, &spec, Method::Dft, &opts).unwrap();
    let b = build_feature_cube(&flipped, &spec, Method::Dft, &opts).unwrap();
    let h = a.grid_h();
    for r in 0..h {
        for c in 0..a.grid_w() {
            let (x, y) = (a.cell(r, c)[0], b.cell(h - 1 - r, c)[0]);
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "({r},{c}) {x} vs {y}");
        }
    }
}

#[test]
fn synthetic_textures_separate_on_dft_variance() {
    let out = synth_texture_image(&SynthSpec::default()).unwrap();
    let spec = TileSpec::from_win_factor(256, 256, 0.05, 4).unwrap();
    let cube = build_feature_cube(&out.image, &spec, Method::Dft, &FeatureOptions::default()).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for r in 0..cube.grid_h() {
        for c in 0..cube.grid_w() {
            let (y, x) = cube.grid.center(r, c);
            let v = cube.cell(r, c)[0];
            if *out.region_a.get(y, x) { a.push(v) } else { b.push(v) }
        }
    }
    let min_a = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_b = b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    assert!(median(&mut a) > 5.0 * median(&mut b), "min_a {min_a}, max_b {max_b}");
}
